//! Tape gradients of the hybrid loss against central differences, per parameter.
//!
//! cargo run --example gradient_check

use timebridge::cli::gradcheck_model;
use timebridge::data::windows;
use timebridge::model::TimeBridge;
use timebridge::synth::gen_trend_sinusoid;
use timebridge::tensor::{finite_diff_check, Tensor};
use timebridge::train::{gradient_check, hybrid_loss};

fn main() -> timebridge::Result<()> {
    let config = gradcheck_model();
    let frame = gen_trend_sinusoid(config.input_len + config.output_len, config.channels, 0)?;
    let sample = windows(&frame, config.input_len, config.output_len, 1)?.remove(0);
    let model = TimeBridge::new(config, 0)?;

    let report = gradient_check(&model, &sample, 0.35, 1e-4)?;
    let names = model.params.named();
    println!(
        "{} coordinates, max relative error {:.3e} at {}[{}]",
        report.coordinates, report.max_rel_error, names[report.worst.0].0, report.worst.1
    );

    // The same check on a single op, outside the model.
    let x = Tensor::from_rows(&[vec![0.3, -1.2, 2.0], vec![0.5, 0.1, -0.7]])?;
    let op = finite_diff_check(&[x], 1e-5, |tape, v| {
        let y = tape.softmax(v[0], 1)?;
        let z = tape.constant(Tensor::full(&[2, 3], 0.2));
        hybrid_loss(tape, y, z, 0.5)
    })?;
    println!(
        "softmax + hybrid loss: max relative error {:.3e}",
        op.max_rel_error
    );
    Ok(())
}
