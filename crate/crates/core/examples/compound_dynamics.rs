//! Integrates a trajectory together with its third multiplicative compound, the volume of a unit cube
//! and fits the exponential decay of the compound norm.

use kcontraction::model::builtin_model;
use kcontraction::sim::{fit_decay, integrate_compound};
use kcontraction::{DenseMatrix, Result};

pub fn run() -> Result<()> {
    let model = builtin_model("rossler_mod")?;
    let v0 = DenseMatrix::identity(3, 3);
    let trace = integrate_compound(&model.dynamics, &[0.2, 0.5, 0.0], &v0, 3, 20.0, 1e-3)?;
    let norms = trace.compound_norms.as_ref().expect("compound column");
    for i in (0..trace.times.len()).step_by(4000) {
        println!("t = {:5.1}  volume {:.4e}", trace.times[i], norms[i]);
    }
    let fit = fit_decay(&trace)?;
    println!("decay rate {:.4}, overshoot {:.3}, log residual {:.2e}", fit.a, fit.b, fit.residual);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
