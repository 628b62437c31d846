//! Flows a square of initial conditions and measures its area at increasing
//! times.

use kcontraction::model::builtin_model;
use kcontraction::sim::{flow_grid, volume_of_immersion, ImmersionGrid};
use kcontraction::{DenseMatrix, Result};

pub fn run() -> Result<()> {
    let model = builtin_model("synchronverter")?;
    let f = |x: &[f64]| model.dynamics.eval(x);
    let origin = model.state_box.as_ref().expect("builtin box").center();
    let n = origin.len();
    let edge = |i: usize| (0..n).map(|j| if i == j { 0.2 } else { 0.0 }).collect::<Vec<f64>>();
    let grid = ImmersionGrid::parallelotope(&origin, &[edge(0), edge(1)], 16)?;
    let id = DenseMatrix::identity(n, n);
    println!("t = 0.00  area {:.4e}", volume_of_immersion(&grid, &id)?.value);
    for t in [0.01, 0.05, 0.1] {
        let moved = flow_grid(&f, &grid, t, 1e-3)?;
        println!("t = {t:.2}  area {:.4e}", volume_of_immersion(&moved, &id)?.value);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
