//! k-order stabilizability of a pair (A, B) and a gain that makes the
//! closed loop k-contractive.

use kcontraction::lin_contraction::eigen_sum_max;
use kcontraction::lin_synthesis::{k_order_stabilizable, kalman_decompose, stabilizability_certificate, synthesize_gain};
use kcontraction::{DenseMatrix, Result};

pub fn run() -> Result<()> {
    // the third state is uncontrollable and mildly unstable
    let a = DenseMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 0.0, 1.0, -1.0, 0.0, 0.0, 0.2]);
    let b = DenseMatrix::from_row_slice(3, 1, &[0.0, 1.0, 0.0]);
    let split = kalman_decompose(&a, &b)?;
    println!("controllable dimension {}, uncontrollable {}", split.nc, split.nu);
    for k in 1..=3 {
        let v = k_order_stabilizable(&a, &b, k)?;
        println!("k = {k}: stabilizable {} ({})", v.stabilizable, v.diagnostics);
    }
    let k = 2;
    let cert = stabilizability_certificate(&a, &b, k)?;
    for rho in [1.0, 4.0] {
        let gain = synthesize_gain(&cert, &b, rho)?;
        let closed = &a - &b * &gain;
        println!(
            "rho = {rho}: K = {:?}, closed-loop top-{k} sum {:+.4} (bound {:+.4})",
            gain.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            eigen_sum_max(&closed, k)?,
            cert.rate_sum()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
