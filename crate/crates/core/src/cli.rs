//! Command-line driver. Every command prints one JSON report on stdout.
//!
//! Exit codes: `0` accept, `1` reject (a legitimate negative answer), `2`
//! usage or data error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::certificate::CertificateFile;
use crate::error::{Error, Result};
use crate::lin_contraction::{build_certificate, eigen_sum_max, variable_counts, verify_certificate};
use crate::lin_synthesis::{k_order_stabilizable, stabilizability_certificate, synthesize_gain, verify_stabilizability};
use crate::model::{builtin_model, parse_model, Model, BUILTINS};
use crate::nl_verify::{
    search_nl_certificate, synthesize_nl_gain, verify_compound_condition, verify_nl_certificate, SearchBudget, StateBox,
};
use crate::numkernel::{to_rows, DenseMatrix};
use crate::report::{Condition, Slack, Verdict, VerificationReport};
use crate::reproduce::{reproduce, BUNDLES};
use crate::sim::{classify_attractor, fit_decay, flow_grid, integrate, integrate_compound, volume_of_immersion, ImmersionGrid, DEFAULT_RECURRENCE_TOL, DEFAULT_STEP};

#[derive(Debug, Parser)]
#[command(name = "kcontraction", version, about = "k-contraction analysis and feedback design")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Model JSON file or builtin name.
    #[arg(long)]
    model: String,
}

#[derive(Debug, Args)]
struct SlackArgs {
    /// Slack for strict inequalities; defaults to the certificate's own.
    #[arg(long)]
    slack: Option<f64>,
    /// Scale the slack by the spectral norm of each metric.
    #[arg(long)]
    relative: bool,
}

impl SlackArgs {
    fn resolve(&self, fallback: Slack) -> Slack {
        match (self.slack, self.relative) {
            (Some(s), true) => Slack::Relative(s),
            (Some(s), false) => Slack::Absolute(s),
            (None, _) => fallback,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalue k-sum test for ẋ = Ax.
    AnalyzeLin {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        k: usize,
    },
    /// Build and verify an inertia certificate for ẋ = Ax.
    CertifyLin {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        k: usize,
        /// Write the certificate JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-order stabilizability of (A, B).
    Stabilizable {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        k: usize,
    },
    /// State-feedback gain making ẋ = (A − BK)x k-contractive.
    SynthLin {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
    },
    /// Check a constant-metric certificate on the model box, or search for one.
    VerifyNl {
        #[command(flatten)]
        model: ModelArg,
        /// Certificate JSON; without it a certificate is searched for.
        #[arg(long)]
        cert: Option<PathBuf>,
        /// Order for the search.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        slack: SlackArgs,
        /// Write a found certificate here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gain from a design certificate (W0, W1) and its closed-loop checks.
    SynthNl {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        cert: PathBuf,
        #[command(flatten)]
        slack: SlackArgs,
    },
    /// Integrate a trajectory, optionally with a k-compound.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        /// Comma-separated initial state.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        h: f64,
        #[arg(long)]
        compound: Option<usize>,
        /// CSV output for the trace.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Volume of a flowed parallelotope grid.
    Volume {
        #[command(flatten)]
        model: ModelArg,
        /// Grid JSON {origin, edges, resolution}, inline or as a file.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        h: f64,
    },
    /// Decision-variable counts of the two formulations.
    Counts {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Run a bundled example end to end.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(BUNDLES))]
        name: String,
        /// Directory for CSV traces.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct Report {
    command: String,
    verdict: Verdict,
    margins: Vec<Condition>,
    anchors: Vec<String>,
    inputs_digest: String,
    seed: u64,
    diagnostics: Vec<String>,
    #[serde(flatten)]
    data: Map<String, Value>,
}

/// Everything a command hashes and reports.
struct Ctx {
    seed: u64,
    hasher: Sha256,
}

impl Ctx {
    fn read(&mut self, path: &Path) -> Result<String> {
        let text = std::fs::read_to_string(path)?;
        self.hasher.update(text.as_bytes());
        Ok(text)
    }

    fn model(&mut self, spec: &str) -> Result<Model> {
        let path = Path::new(spec);
        if path.exists() {
            return parse_model(&self.read(path)?);
        }
        if BUILTINS.contains(&spec) {
            return builtin_model(spec);
        }
        Err(Error::InvalidArgument(format!(
            "model '{spec}' is neither a file nor a builtin ({})",
            BUILTINS.join(", ")
        )))
    }
}

fn linear(model: &Model) -> Result<&DenseMatrix> {
    model
        .a
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("command needs a linear model".into()))
}

fn input(model: &Model) -> Result<&DenseMatrix> {
    model
        .b
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("model has no input matrix B".into()))
}

fn model_box(model: &Model) -> Result<StateBox> {
    model
        .state_box
        .clone()
        .ok_or_else(|| Error::InvalidArgument("model has no box".into()))
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad number '{s}': {e}")))
        })
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn rows_of(m: &DenseMatrix) -> Value {
    json!(to_rows(m))
}

/// Outcome of a command before the digest is attached.
struct Outcome {
    report: VerificationReport,
    data: Map<String, Value>,
}

impl Outcome {
    fn new(report: VerificationReport) -> Self {
        Self {
            report,
            data: Map::new(),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.data.insert(key.into(), value);
        self
    }

    fn negative(reason: String) -> Self {
        let mut rep = VerificationReport::new();
        rep.push("precondition", reason.clone(), 1.0, 0.0, false);
        rep.note(reason);
        Self::new(rep)
    }
}

fn execute(cmd: &Command, ctx: &mut Ctx) -> Result<Outcome> {
    match cmd {
        Command::AnalyzeLin { model, k } => {
            let m = ctx.model(&model.model)?;
            let a = linear(&m)?;
            let s = eigen_sum_max(a, *k)?;
            let mut rep = VerificationReport::new();
            rep.push("k_sum", format!("sum of the {k} largest real parts < 0"), s, 0.0, s < 0.0);
            Ok(Outcome::new(rep).with("eigen_sum_max", json!(s)))
        }
        Command::CertifyLin { model, k, out } => {
            let m = ctx.model(&model.model)?;
            let a = linear(&m)?;
            let cert = match build_certificate(a, *k) {
                Ok(c) => c,
                Err(e @ Error::NotContractive { .. }) => return Ok(Outcome::negative(e.to_string())),
                Err(e) => return Err(e),
            };
            let rep = verify_certificate(a, *k, &cert, 0.0)?;
            let doc = json!({
                "k": k,
                "ell": cert.ell,
                "mus": cert.mus,
                "ds": cert.ds,
                "weights": cert.weights,
                "Ps": cert.mats.iter().map(rows_of).collect::<Vec<_>>(),
            });
            if let Some(p) = out {
                write_file(p, &serde_json::to_string_pretty(&doc)?)?;
            }
            Ok(Outcome::new(rep).with("certificate", doc))
        }
        Command::Stabilizable { model, k } => {
            let m = ctx.model(&model.model)?;
            let (a, b) = (linear(&m)?, input(&m)?);
            let v = k_order_stabilizable(a, b, *k)?;
            if !v.stabilizable {
                return Ok(Outcome::negative(v.diagnostics.clone()).with("nu", json!(v.nu)));
            }
            let cert = stabilizability_certificate(a, b, *k)?;
            let rep = verify_stabilizability(a, b, *k, &cert, 0.0)?;
            Ok(Outcome::new(rep)
                .with("nu", json!(v.nu))
                .with("uncontrollable_sum", json!(v.uncontrollable_sum))
                .with(
                    "certificate",
                    json!({"mus": cert.mus, "ds": cert.ds, "Ws": cert.mats.iter().map(rows_of).collect::<Vec<_>>()}),
                ))
        }
        Command::SynthLin { model, k, rho } => {
            let m = ctx.model(&model.model)?;
            let (a, b) = (linear(&m)?, input(&m)?);
            let cert = match stabilizability_certificate(a, b, *k) {
                Ok(c) => c,
                Err(e @ Error::NotStabilizable { .. }) => return Ok(Outcome::negative(e.to_string())),
                Err(e) => return Err(e),
            };
            let gain = synthesize_gain(&cert, b, *rho)?;
            let s = eigen_sum_max(&(a - b * &gain), *k)?;
            let mut rep = VerificationReport::new();
            rep.push("closed_loop_k_sum", format!("closed-loop sum of the {k} largest real parts < 0"), s, 0.0, s < 0.0);
            Ok(Outcome::new(rep).with("K", rows_of(&gain)).with("closed_loop_eigen_sum", json!(s)))
        }
        Command::VerifyNl {
            model,
            cert,
            k,
            slack,
            out,
        } => {
            let m = ctx.model(&model.model)?;
            let bx = model_box(&m)?;
            match cert {
                Some(path) => {
                    let c = CertificateFile::parse(&ctx.read(path)?)?;
                    let s = slack.resolve(c.default_slack());
                    let rep = verify_nl_certificate(&m.dynamics, &bx, &c.nl_certificate()?, s)?;
                    Ok(Outcome::new(rep).with("slack", json!(s)).with("box", json!(bx)))
                }
                None => {
                    let k = k.ok_or_else(|| Error::InvalidArgument("either --cert or --k is required".into()))?;
                    let budget = SearchBudget {
                        seed: ctx.seed,
                        ..SearchBudget::default()
                    };
                    let found = search_nl_certificate(&m.dynamics, &bx, k, budget)?;
                    let mut rep = found.report.clone().unwrap_or_default();
                    if found.certificate.is_none() {
                        rep.push("search", "constant-metric search", 1.0, 0.0, false);
                    }
                    for d in &found.diagnostics {
                        rep.note(d.clone());
                    }
                    let mut outcome = Outcome::new(rep).with("box", json!(bx));
                    if let Some(c) = &found.certificate {
                        let doc = CertificateFile::from_nl(c);
                        if let Some(p) = out {
                            write_file(p, &doc.to_json())?;
                        }
                        outcome = outcome.with("certificate", serde_json::to_value(&doc)?);
                    }
                    Ok(outcome)
                }
            }
        }
        Command::SynthNl { model, cert, slack } => {
            let m = ctx.model(&model.model)?;
            let bx = model_box(&m)?;
            let b = input(&m)?;
            let c = CertificateFile::parse(&ctx.read(cert)?)?;
            let s = slack.resolve(c.default_slack());
            let w0 = c.matrix("W0")?.matrix;
            let w1 = c.matrix("W1")?.matrix;
            let design = synthesize_nl_gain(&m.dynamics, &bx, &w0, &w1, c.mu0, c.mu1, b, c.k, s)?;
            let mut rep = design.report.clone();
            if let (Some(_), Some(eta)) = (&c.q, c.eta) {
                let q = c.matrix("Q")?.matrix;
                let closed = m.dynamics.with_state_feedback(b, &design.gain)?;
                let cc = verify_compound_condition(&closed, &bx, &q, eta, c.k, s)?;
                for cond in cc.conditions {
                    rep.push(cond.label, cond.anchor, cond.margin, cond.threshold, cond.holds);
                }
            }
            Ok(Outcome::new(rep)
                .with("K", rows_of(&design.gain))
                .with("omega", json!(design.omega))
                .with("omega_bar", json!(design.omega_bar))
                .with("slack", json!(s)))
        }
        Command::Simulate {
            model,
            x0,
            t,
            h,
            compound,
            out,
        } => {
            let m = ctx.model(&model.model)?;
            let x0 = parse_vector(x0)?;
            if x0.len() != m.dim() {
                return Err(Error::DimensionMismatch(format!("x0 must have {} entries", m.dim())));
            }
            let trace = match compound {
                Some(k) => {
                    let v0 = DenseMatrix::identity(m.dim(), *k);
                    integrate_compound(&m.dynamics, &x0, &v0, *k, *t, *h)?
                }
                None => {
                    let f = m.dynamics.f.clone();
                    integrate(&move |x: &[f64]| f(x), &x0, *t, *h)?
                }
            };
            if let Some(p) = out {
                write_file(p, &trace.to_csv())?;
            }
            let mut rep = VerificationReport::new();
            rep.push("finite", "trajectory stays finite", f64::from(u8::from(trace.truncated)), 0.0, !trace.truncated);
            let mut outcome = Outcome::new(rep)
                .with("final_state", json!(trace.last_state()))
                .with("samples", json!(trace.times.len()))
                .with("attractor", json!(classify_attractor(&trace, DEFAULT_RECURRENCE_TOL)));
            if compound.is_some() {
                outcome = outcome.with("decay_fit", json!(fit_decay(&trace)?));
            }
            Ok(outcome)
        }
        Command::Volume { model, grid, t, h } => {
            let m = ctx.model(&model.model)?;
            let text = if grid.trim_start().starts_with('{') {
                ctx.hasher.update(grid.as_bytes());
                grid.clone()
            } else {
                ctx.read(Path::new(grid))?
            };
            let spec: GridSpec = serde_json::from_str(&text)?;
            let n = m.dim();
            if spec.origin.len() != n {
                return Err(Error::DimensionMismatch(format!("grid origin has {} entries, model dimension is {n}", spec.origin.len())));
            }
            let g = ImmersionGrid::parallelotope(&spec.origin, &spec.edges, spec.resolution)?;
            let metric = match &spec.metric {
                Some(rows) => crate::numkernel::from_rows(rows)?,
                None => DenseMatrix::identity(n, n),
            };
            let f = m.dynamics.f.clone();
            let flowed = flow_grid(&move |x: &[f64]| f(x), &g, *t, *h)?;
            let v0 = volume_of_immersion(&g, &metric)?;
            let v1 = volume_of_immersion(&flowed, &metric)?;
            let mut rep = VerificationReport::new();
            let ratio = v1.value / v0.value;
            rep.push("volume_ratio", "flowed volume below the initial volume", ratio, 1.0, ratio < 1.0);
            if v0.degenerate_cells + v1.degenerate_cells > 0 {
                rep.note(format!(
                    "{} cells with a negative Gram determinant were clamped",
                    v0.degenerate_cells + v1.degenerate_cells
                ));
            }
            Ok(Outcome::new(rep)
                .with("volume_initial", json!(v0.value))
                .with("volume_final", json!(v1.value)))
        }
        Command::Counts { n, k } => {
            let (n1, n2) = variable_counts(*n, *k)?;
            Ok(Outcome::new(VerificationReport::new()).with("N1", json!(n1)).with("N2", json!(n2)))
        }
        Command::Reproduce { name, out } => {
            let r = reproduce(name, ctx.seed)?;
            if let Some(dir) = out {
                for (label, trace) in &r.traces {
                    write_file(&dir.join(format!("{label}.csv")), &trace.to_csv())?;
                }
            }
            Ok(Outcome::new(r.report).with("bundle", json!(r.name)).with("details", r.details))
        }
    }
}

#[derive(Debug, serde::Deserialize)]
struct GridSpec {
    origin: Vec<f64>,
    edges: Vec<Vec<f64>>,
    resolution: usize,
    #[serde(default)]
    metric: Option<Vec<Vec<f64>>>,
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::AnalyzeLin { .. } => "analyze-lin",
        Command::CertifyLin { .. } => "certify-lin",
        Command::Stabilizable { .. } => "stabilizable",
        Command::SynthLin { .. } => "synth-lin",
        Command::VerifyNl { .. } => "verify-nl",
        Command::SynthNl { .. } => "synth-nl",
        Command::Simulate { .. } => "simulate",
        Command::Volume { .. } => "volume",
        Command::Counts { .. } => "counts",
        Command::Reproduce { .. } => "reproduce",
    }
}

/// Runs one command line (including the program name) and returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let mut ctx = Ctx {
        seed: cli.seed,
        hasher: Sha256::new(),
    };
    for a in args.iter().skip(1) {
        ctx.hasher.update(a.to_string_lossy().as_bytes());
        ctx.hasher.update([0u8]);
    }
    match execute(&cli.command, &mut ctx) {
        Ok(outcome) => {
            let anchors = outcome.report.conditions.iter().map(|c| c.anchor.clone()).collect();
            let verdict = outcome.report.verdict;
            let report = Report {
                command: command_name(&cli.command).into(),
                verdict,
                margins: outcome.report.conditions,
                anchors,
                inputs_digest: hex::encode(ctx.hasher.finalize()),
                seed: cli.seed,
                diagnostics: outcome.report.diagnostics,
                data: outcome.data,
            };
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            let _ = writeln!(out, "{text}");
            if verdict.is_accept() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}
