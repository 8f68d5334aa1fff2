//! Checks analytic gradients against central differences for every variant,
//! and for a hand-built loss on the tape.

use gazekex::numeric::{gradient_check, GradCheckOptions, ParamSet, Tape, Tensor};
use gazekex::pipeline::gradcheck_variant;
use gazekex::tagger::Variant;

fn main() -> gazekex::Result<()> {
    for v in Variant::ALL {
        let r = gradcheck_variant(v, 1)?;
        println!("{v:>8}: max relative error {:.2e} over {} coordinates", r.max_relative_error, r.checks.len());
    }

    let mut params = ParamSet::new();
    let w = params.insert("w", Tensor::matrix(2, 3, vec![0.3, -0.2, 0.5, 0.1, 0.4, -0.6])?);
    let b = params.insert("b", Tensor::vector(vec![0.05, -0.1]));
    let x = Tensor::vector(vec![1.0, -2.0, 0.5]);
    let report = gradient_check(
        &params,
        |p| {
            let mut tape = Tape::new();
            let wv = tape.param(p, w);
            let bv = tape.param(p, b);
            let xv = tape.input(x.clone());
            let h = tape.affine(wv, xv, bv)?;
            let h = tape.tanh(h);
            let loss = tape.sum(h);
            Ok((tape.value(loss).item(), tape.backward(loss, p)?))
        },
        GradCheckOptions::default(),
    )?;
    println!("affine+tanh: max relative error {:.2e}", report.max_relative_error);
    Ok(())
}
