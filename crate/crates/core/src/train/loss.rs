//! Time-domain and frequency-domain mean absolute error.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Smoothing inside the spectral modulus, `sqrt(re² + im² + ε²)`.
pub const FREQ_EPS: f64 = 1e-12;

fn check_pair(tape: &Tape, pred: Var, target: Var, op: &'static str) -> Result<()> {
    if tape.shape(pred) != tape.shape(target) {
        return Err(Error::shape(op, tape.shape(pred), tape.shape(target)));
    }
    Ok(())
}

/// Mean of `|pred - target|` over every element.
pub fn mae_time(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    check_pair(tape, pred, target, "mae_time")?;
    let diff = tape.sub(pred, target)?;
    let a = tape.abs(diff);
    Ok(tape.mean(a))
}

/// Mean spectral modulus of `pred - target`, taken per row along the last axis.
pub fn mae_freq(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    check_pair(tape, pred, target, "mae_freq")?;
    let diff = tape.sub(pred, target)?;
    let spec = tape.dft_real(diff)?;
    let re2 = tape.mul(spec.real, spec.real)?;
    let im2 = tape.mul(spec.imag, spec.imag)?;
    let power = tape.add(re2, im2)?;
    let power = tape.add_scalar(power, FREQ_EPS * FREQ_EPS);
    let modulus = tape.sqrt(power);
    Ok(tape.mean(modulus))
}

/// `(1 - alpha) * mae_time + alpha * mae_freq`; a zero weight skips its term.
pub fn hybrid_loss(tape: &mut Tape, pred: Var, target: Var, alpha: f64) -> Result<Var> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return mae_time(tape, pred, target);
    }
    if alpha == 1.0 {
        return mae_freq(tape, pred, target);
    }
    let lt = mae_time(tape, pred, target)?;
    let lf = mae_freq(tape, pred, target)?;
    let lt = tape.scale(lt, 1.0 - alpha);
    let lf = tape.scale(lf, alpha);
    tape.add(lt, lf)
}

/// Loss value on plain tensors.
pub fn hybrid_loss_value(pred: &Tensor, target: &Tensor, alpha: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.constant(pred.clone());
    let t = tape.constant(target.clone());
    let l = hybrid_loss(&mut tape, p, t, alpha)?;
    Ok(tape.value(l).item())
}
