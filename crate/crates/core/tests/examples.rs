#[allow(dead_code)]
#[path = "../examples/linear_analysis.rs"]
mod linear_analysis;
#[allow(dead_code)]
#[path = "../examples/linear_certificate.rs"]
mod linear_certificate;
#[allow(dead_code)]
#[path = "../examples/stabilizing_gain.rs"]
mod stabilizing_gain;
#[allow(dead_code)]
#[path = "../examples/nonlinear_certificate.rs"]
mod nonlinear_certificate;
#[allow(dead_code)]
#[path = "../examples/certificate_search.rs"]
mod certificate_search;
#[allow(dead_code)]
#[path = "../examples/feedback_design.rs"]
mod feedback_design;
#[allow(dead_code)]
#[path = "../examples/compound_dynamics.rs"]
mod compound_dynamics;
#[allow(dead_code)]
#[path = "../examples/volume_decay.rs"]
mod volume_decay;
#[allow(dead_code)]
#[path = "../examples/attractors.rs"]
mod attractors;
#[allow(dead_code)]
#[path = "../examples/reproduce.rs"]
mod reproduce;

#[test]
fn linear_examples_run() {
    linear_analysis::run().unwrap();
    linear_certificate::run().unwrap();
    stabilizing_gain::run().unwrap();
}

#[test]
fn nonlinear_examples_run() {
    nonlinear_certificate::run().unwrap();
    certificate_search::run().unwrap();
    feedback_design::run().unwrap();
}

#[test]
fn simulation_examples_run() {
    compound_dynamics::run().unwrap();
    volume_decay::run().unwrap();
    attractors::run().unwrap();
}

#[test]
fn reproduce_example_runs() {
    reproduce::run_bundles(&["example25".to_string()]).unwrap();
}
