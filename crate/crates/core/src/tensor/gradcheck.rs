use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing tape gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter index, flat element index) of the worst coordinate.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Checks every coordinate of `params` against `(f(p + eps) - f(p - eps)) / 2eps`.
///
/// `f` records a scalar function of its leaf variables on the given tape.
/// Kinks (ties in `abs`, equal maxima) are not smoothed here; callers should
/// pick inputs that keep every kink farther than `eps` from the evaluation point.
pub fn finite_diff_check<F>(params: &[Tensor], eps: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if eps <= 0.0 {
        return Err(Error::Config(
            "finite-difference eps must be positive".into(),
        ));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| {
            tape.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; p.numel()])
        })
        .collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|p| t.leaf(p.clone())).collect();
        let out = f(&mut t, &vs)?;
        Ok(t.value(out).item())
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for pi in 0..params.len() {
        for ei in 0..params[pi].numel() {
            let orig = params[pi].data()[ei];
            work[pi].data_mut()[ei] = orig + eps;
            let up = eval(&work)?;
            work[pi].data_mut()[ei] = orig - eps;
            let down = eval(&work)?;
            work[pi].data_mut()[ei] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[pi][ei];
            let err = relative_error(a, numeric);
            if err > report.max_rel_error || report.coordinates == 0 {
                report.max_rel_error = err;
                report.worst = (pi, ei);
                report.analytic = a;
                report.numeric = numeric;
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}
