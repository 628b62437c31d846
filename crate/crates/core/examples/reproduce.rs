//! Runs the bundled worked examples end to end. Pass bundle names to run a
//! subset.

use kcontraction::reproduce::{reproduce, BUNDLES};
use kcontraction::Result;

pub fn run_bundles(names: &[String]) -> Result<()> {
    for name in names {
        let r = reproduce(name, 0)?;
        println!("{}: {:?}", r.name, r.report.verdict);
        for c in r.report.conditions.iter().filter(|c| !c.holds) {
            println!("  fails: {} margin {:+.4} > {:.4}", c.label, c.margin, c.threshold);
        }
        for (label, trace) in &r.traces {
            println!("  trace {label}: {} samples", trace.times.len());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names = if args.is_empty() { BUNDLES.iter().map(|s| s.to_string()).collect() } else { args };
    run_bundles(&names)
}
