//! Gain from a design certificate (W0, W1) for the cubic three-state
//! example, then the equilibria of the closed loop.

use kcontraction::certificate::CertificateFile;
use kcontraction::model::builtin_model;
use kcontraction::nl_verify::synthesize_nl_gain;
use kcontraction::sim::find_equilibria;
use kcontraction::Result;

pub fn run() -> Result<()> {
    let model = builtin_model("example25")?;
    let bx = model.state_box.clone().expect("builtin box");
    let b = model.b.clone().expect("input matrix");
    let file = CertificateFile::parse(include_str!("../data/example25_printed.json"))?;
    let (w0, w1) = (file.matrix("W0")?.matrix, file.matrix("W1")?.matrix);
    let design = synthesize_nl_gain(&model.dynamics, &bx, &w0, &w1, file.mu0, file.mu1, &b, file.k, file.default_slack())?;
    println!("K = {:.4}", design.gain);
    println!("omega = {:.4}, omega_bar = {:.4}, certified: {}", design.omega, design.omega_bar, design.certified);
    for c in design.report.conditions.iter().filter(|c| !c.holds) {
        println!("  fails: {} margin {:+.4}", c.label, c.margin);
    }
    let closed = model.dynamics.with_state_feedback(&b, &design.gain)?;
    let f = |x: &[f64]| closed.eval(x);
    for eq in find_equilibria(&f, &bx, 64)? {
        println!("equilibrium {:?}: {:?}", eq.point.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(), eq.kind);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
