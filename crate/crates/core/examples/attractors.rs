//! Labels the long-time behaviour of trajectories of the builtin models.

use kcontraction::model::builtin_model;
use kcontraction::sim::{classify_attractor, integrate};
use kcontraction::Result;

pub fn run() -> Result<()> {
    for (name, x0) in [("synchronverter", None), ("rossler_mod", Some([0.2, 0.5, 0.0])), ("rossler", Some([0.1, 0.1, 0.0]))] {
        let model = builtin_model(name)?;
        let start = match x0 {
            Some(x) => x.to_vec(),
            None => model.state_box.as_ref().expect("builtin box").center(),
        };
        let f = |x: &[f64]| model.dynamics.eval(x);
        let trace = integrate(&f, &start, 300.0, 1e-3)?;
        println!("{name}: {:?}", classify_attractor(&trace, 1e-3));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
