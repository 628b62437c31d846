//! Searches for a constant-metric certificate on a box: rates by bisection,
//! metrics by a convex feasibility solve at each envelope vertex.

use kcontraction::model::{builtin_model, ROSSLER_MOD_BOX};
use kcontraction::nl_verify::{search_nl_certificate, SearchBudget, StateBox};
use kcontraction::Result;

pub fn run() -> Result<()> {
    let cases = [
        ("rossler_mod", Some(StateBox::new(ROSSLER_MOD_BOX.0.to_vec(), ROSSLER_MOD_BOX.1.to_vec())?)),
        ("rossler", None),
    ];
    for (name, bx) in cases {
        let model = builtin_model(name)?;
        let bx = bx.or(model.state_box.clone()).expect("builtin box");
        let out = search_nl_certificate(&model.dynamics, &bx, 3, SearchBudget::default())?;
        match &out.certificate {
            Some(c) => println!("{name}: mu0 = {:+.4}, mu1 = {:+.4}, rate sum {:+.4}", c.mu0, c.mu1, c.rate_sum()),
            None => println!("{name}: no certificate ({})", out.diagnostics.join("; ")),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
