//! Eigenvalue k-sum test for a linear system, for every order k.

use kcontraction::lin_contraction::{eigen_sum_max, k_contractive_lti};
use kcontraction::numkernel::eigenvalues;
use kcontraction::{DenseMatrix, Result};

pub fn run() -> Result<()> {
    // one unstable mode, a slow oscillation and a fast decay
    let a = DenseMatrix::from_row_slice(4, 4, &[
        0.3, 1.0, 0.0, 0.0,
        0.0, -0.2, 2.0, 0.0,
        0.0, -2.0, -0.2, 0.5,
        0.0, 0.0, 0.0, -3.0,
    ]);
    let spectrum = eigenvalues(&a)?;
    println!("eigenvalues:");
    for z in spectrum.values() {
        println!("  {:+.4} {:+.4}i", z.re, z.im);
    }
    for k in 1..=a.nrows() {
        let (contractive, _) = k_contractive_lti(&a, k)?;
        println!("k = {k}: top-k real-part sum {:+.4}, k-contractive: {contractive}", eigen_sum_max(&a, k)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
