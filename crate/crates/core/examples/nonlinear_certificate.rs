//! Checks a constant-metric certificate of 2-contraction for the
//! synchronverter model on its state box, at every envelope vertex.

use kcontraction::certificate::CertificateFile;
use kcontraction::model::builtin_model;
use kcontraction::nl_verify::verify_nl_certificate;
use kcontraction::report::Slack;
use kcontraction::Result;

pub fn run() -> Result<()> {
    let model = builtin_model("synchronverter")?;
    let bx = model.state_box.clone().expect("builtin box");
    let text = include_str!("../data/synchronverter_printed.json");
    let file = CertificateFile::parse(text)?;
    let cert = file.nl_certificate()?;
    println!("k = {}, mu0 = {}, mu1 = {}, rate sum {:+.4}", cert.k, cert.mu0, cert.mu1, cert.rate_sum());
    for slack in [Slack::Absolute(0.0), file.default_slack()] {
        let report = verify_nl_certificate(&model.dynamics, &bx, &cert, slack)?;
        println!("slack {slack:?}: {:?}", report.verdict);
        for c in report.conditions.iter().filter(|c| !c.holds) {
            println!("  {} margin {:+.4} > {:.4}", c.label, c.margin, c.threshold);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
