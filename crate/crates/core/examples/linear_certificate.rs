//! Inertia certificate for k-contraction of a linear system, checked
//! independently of how it was built.

use kcontraction::lin_contraction::{build_certificate, verify_certificate};
use kcontraction::numkernel::inertia_symmetric;
use kcontraction::{DenseMatrix, Result};

pub fn run() -> Result<()> {
    let a = DenseMatrix::from_row_slice(3, 3, &[0.3, 1.0, 0.0, 0.0, -1.0, 2.0, 0.5, 0.0, -2.0]);
    let k = 2;
    let cert = build_certificate(&a, k)?;
    for ((p, mu), d) in cert.mats.iter().zip(&cert.mus).zip(&cert.ds) {
        println!("mu = {mu:+.4}, inertia {} (expected {d} positive)", inertia_symmetric(p, 1e-12)?);
    }
    println!("rate sum {:+.4}", cert.rate_sum());
    let report = verify_certificate(&a, k, &cert, 0.0)?;
    for c in &report.conditions {
        println!("  {:<12} margin {:+.3e}  {}", c.label, c.margin, if c.holds { "ok" } else { "FAILS" });
    }
    println!("verdict: {:?}", report.verdict);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
