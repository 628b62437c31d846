//! Model specifications (JSON) and the built-in example registry.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expression, Interval};
use crate::nl_verify::{EnvelopeTerm, FieldFn, NonlinearModel, StateBox};
use crate::numkernel::{from_rows, DenseMatrix};

pub const ENVELOPE_SAMPLES: usize = 100;
pub const ENVELOPE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub matrix: Vec<Vec<f64>>,
    pub theta: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSpec {
    #[serde(default)]
    pub name: String,
    pub dim: usize,
    pub f: Vec<String>,
    #[serde(rename = "A0")]
    pub a0: Vec<Vec<f64>>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub state_box: Option<BoxSpec>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<Vec<f64>>>,
    },
    Nonlinear(NonlinearSpec),
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

/// A validated model ready for analysis.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub dynamics: NonlinearModel,
    /// Present for linear models.
    pub a: Option<DenseMatrix>,
    pub b: Option<DenseMatrix>,
    pub state_box: Option<StateBox>,
    pub spec: ModelSpec,
}

impl Model {
    pub fn dim(&self) -> usize {
        self.dynamics.dim
    }

    pub fn is_linear(&self) -> bool {
        self.a.is_some()
    }
}

/// Parses and validates a JSON model document.
pub fn parse_model(text: &str) -> Result<Model> {
    let spec: ModelSpec = serde_json::from_str(text)?;
    spec.resolve()
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DenseMatrix> {
    from_rows(rows).map_err(|e| Error::Model(format!("{what}: {e}")))
}

impl ModelSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    /// Expands builtins, parses expressions and cross-checks the envelope.
    pub fn resolve(&self) -> Result<Model> {
        match self {
            ModelSpec::Linear { a, b } => {
                let a = matrix(a, "A")?;
                let n = a.nrows();
                if a.ncols() != n {
                    return Err(Error::Model(format!("A must be square, got {}x{}", n, a.ncols())));
                }
                let b = b.as_ref().map(|b| matrix(b, "B")).transpose()?;
                if let Some(b) = &b {
                    if b.nrows() != n {
                        return Err(Error::Model(format!("B must have {n} rows")));
                    }
                }
                Ok(Model {
                    name: "linear".into(),
                    dynamics: NonlinearModel::linear("linear", a.clone())?,
                    a: Some(a),
                    b,
                    state_box: None,
                    spec: self.clone(),
                })
            }
            ModelSpec::Nonlinear(spec) => resolve_nonlinear(spec, self.clone()),
            ModelSpec::Builtin { name, params } => {
                let spec = builtin(name, params)?;
                let mut m = resolve_nonlinear(&spec, self.clone())?;
                m.name = name.clone();
                Ok(m)
            }
        }
    }
}

fn resolve_nonlinear(spec: &NonlinearSpec, original: ModelSpec) -> Result<Model> {
    let n = spec.dim;
    if spec.f.len() != n {
        return Err(Error::Model(format!("expected {n} field components, got {}", spec.f.len())));
    }
    let exprs: Vec<Expression> = spec
        .f
        .iter()
        .map(|s| Expression::parse(s, n))
        .collect::<Result<_>>()?;
    let field: FieldFn = Arc::new(move |x: &[f64]| exprs.iter().map(|e| e.eval(x)).collect());
    let a0 = matrix(&spec.a0, "A0")?;
    let mut terms = Vec::with_capacity(spec.terms.len());
    for t in &spec.terms {
        let th = Arc::new(Expression::parse(&t.theta, n)?);
        let th_eval = th.clone();
        let bounds: crate::nl_verify::BoundsFn = match t.bounds {
            Some([lo, hi]) => {
                if lo > hi {
                    return Err(Error::Model(format!("bounds of '{}' are reversed", t.theta)));
                }
                Arc::new(move |_: &StateBox| Ok((lo, hi)))
            }
            None => Arc::new(move |b: &StateBox| {
                let iv: Vec<Interval> = b.lower.iter().zip(&b.upper).map(|(l, u)| Interval::new(*l, *u)).collect();
                let r = th.eval_interval(&iv)?;
                Ok((r.lo, r.hi))
            }),
        };
        terms.push(EnvelopeTerm {
            label: t.theta.clone(),
            matrix: matrix(&t.matrix, "term matrix")?,
            theta: Arc::new(move |x: &[f64]| th_eval.eval(x)),
            bounds,
        });
    }
    let name = if spec.name.is_empty() { "nonlinear".to_string() } else { spec.name.clone() };
    let dynamics = NonlinearModel::new(name.clone(), n, field, a0, terms)?;
    let state_box = spec
        .state_box
        .as_ref()
        .map(|b| StateBox::new(b.lower.clone(), b.upper.clone()))
        .transpose()?;
    if let Some(bx) = &state_box {
        if bx.dim() != n {
            return Err(Error::Model(format!("box must have dimension {n}")));
        }
    }
    let check_box = state_box
        .clone()
        .unwrap_or_else(|| StateBox::new(vec![-1.0; n], vec![1.0; n]).expect("unit box"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    dynamics.check_envelope(&check_box, ENVELOPE_SAMPLES, &mut rng, ENVELOPE_TOL)?;
    let b = spec.b.as_ref().map(|b| matrix(b, "B")).transpose()?;
    if let Some(b) = &b {
        if b.nrows() != n {
            return Err(Error::Model(format!("B must have {n} rows")));
        }
    }
    Ok(Model {
        name,
        dynamics,
        a: None,
        b,
        state_box,
        spec: original,
    })
}

pub const BUILTINS: [&str; 4] = ["rossler", "rossler_mod", "synchronverter", "example25"];

fn e(n: usize, entries: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for &(i, j, v) in entries {
        m[i - 1][j - 1] = v;
    }
    m
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Bounding box of the three reference trajectories of `rossler_mod`
/// (t ≤ 500 from the initial conditions in [`ROSSLER_MOD_X0`]), grown by 1%
/// of its width and rounded outward.
pub const ROSSLER_MOD_BOX: ([f64; 3], [f64; 3]) = ([-0.618, -0.695, -0.507], [0.618, 0.534, 0.169]);

pub const ROSSLER_MOD_X0: [[f64; 3]; 3] = [[0.2, 0.5, 0.0], [-0.3, -0.3, -0.5], [0.2, -0.5, -0.3]];

/// Box used for the closed-loop design example.
pub const EXAMPLE25_BOX: ([f64; 3], [f64; 3]) = ([-0.7, -2.0, -2.0], [0.7, 2.0, 2.0]);

/// Specification of a built-in model. Unknown parameter names are rejected.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<NonlinearSpec> {
    let allowed: &[&str] = match name {
        "synchronverter" => &["wn", "V", "J", "R", "L", "Dp", "m", "Tm", "i_f"],
        "rossler" | "rossler_mod" | "example25" => &[],
        _ => {
            return Err(Error::Model(format!(
                "unknown builtin '{name}' (available: {})",
                BUILTINS.join(", ")
            )))
        }
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Model(format!("builtin '{name}' has no parameter '{bad}'")));
    }
    let spec = match name {
        "rossler" => NonlinearSpec {
            name: name.into(),
            dim: 3,
            f: vec!["x2".into(), "-x1 - x3".into(), "0.5*((x1 - x1^2) - x3)".into()],
            a0: e(3, &[(1, 2, 1.0), (2, 1, -1.0), (2, 3, -1.0), (3, 1, 0.5), (3, 3, -0.5)]),
            terms: vec![TermSpec {
                matrix: e(3, &[(3, 1, -1.0)]),
                theta: "x1".into(),
                bounds: None,
            }],
            state_box: Some(BoxSpec {
                lower: vec![-3.0, -3.0, -3.0],
                upper: vec![3.0, 3.0, 3.0],
            }),
            b: None,
        },
        "rossler_mod" => NonlinearSpec {
            name: name.into(),
            dim: 3,
            f: vec!["x2 - 2*x3".into(), "-x1 - x3".into(), "0.5*((x1 - x1^3) - x3)".into()],
            a0: e(3, &[(1, 2, 1.0), (1, 3, -2.0), (2, 1, -1.0), (2, 3, -1.0), (3, 1, 0.5), (3, 3, -0.5)]),
            terms: vec![TermSpec {
                matrix: e(3, &[(3, 1, -1.5)]),
                theta: "x1^2".into(),
                bounds: None,
            }],
            state_box: Some(BoxSpec {
                lower: ROSSLER_MOD_BOX.0.to_vec(),
                upper: ROSSLER_MOD_BOX.1.to_vec(),
            }),
            b: None,
        },
        "example25" => NonlinearSpec {
            name: name.into(),
            dim: 3,
            f: vec!["x2 - x3".into(), "-x1 - x3".into(), "x1*(x1^2 - 0.25)".into()],
            a0: e(3, &[(1, 2, 1.0), (1, 3, -1.0), (2, 1, -1.0), (2, 3, -1.0), (3, 1, -0.25)]),
            terms: vec![TermSpec {
                matrix: e(3, &[(3, 1, 3.0)]),
                theta: "x1^2".into(),
                bounds: None,
            }],
            state_box: Some(BoxSpec {
                lower: EXAMPLE25_BOX.0.to_vec(),
                upper: EXAMPLE25_BOX.1.to_vec(),
            }),
            b: Some(vec![vec![0.0], vec![1.0], vec![0.0]]),
        },
        "synchronverter" => {
            let wn = param(params, "wn", 100.0 * PI);
            let v = param(params, "V", 230.0 * 3f64.sqrt());
            let j = param(params, "J", 0.2);
            let r = param(params, "R", 1.875);
            let l = param(params, "L", 0.05675);
            let dp = param(params, "Dp", 10.0);
            let m = param(params, "m", 3.5);
            let tm = param(params, "Tm", 0.0);
            let i_f = param(params, "i_f", 1.0);
            let (rl, vl, mil, mij, dj) = (r / l, v / l, m * i_f / l, m * i_f / j, dp / j);
            NonlinearSpec {
                name: name.into(),
                dim: 4,
                f: vec![
                    format!("-{rl}*x1 + x2*x3 + {vl}*sin(x4)"),
                    format!("-x1*x3 - {rl}*x2 - {mil}*x3 + {vl}*cos(x4)"),
                    format!("{mij}*x2 - {dj}*(x3 - {wn}) + {}", tm / j),
                    format!("x3 - {wn}"),
                ],
                a0: e(4, &[(1, 1, -rl), (2, 2, -rl), (2, 3, -mil), (3, 2, mij), (3, 3, -dj), (4, 3, 1.0)]),
                terms: vec![
                    TermSpec {
                        matrix: e(4, &[(2, 3, -1.0)]),
                        theta: "x1".into(),
                        bounds: None,
                    },
                    TermSpec {
                        matrix: e(4, &[(1, 3, 1.0)]),
                        theta: "x2".into(),
                        bounds: None,
                    },
                    TermSpec {
                        matrix: e(4, &[(1, 2, 1.0), (2, 1, -1.0)]),
                        theta: "x3".into(),
                        bounds: None,
                    },
                    TermSpec {
                        matrix: e(4, &[(2, 4, -vl)]),
                        theta: "sin(x4)".into(),
                        bounds: None,
                    },
                    TermSpec {
                        matrix: e(4, &[(1, 4, vl)]),
                        theta: "cos(x4)".into(),
                        bounds: None,
                    },
                ],
                state_box: Some(BoxSpec {
                    lower: vec![-81.0, -67.0, 298.0, -0.2],
                    upper: vec![5.0, 10.5, 315.0, 1.0],
                }),
                b: None,
            }
        }
        _ => unreachable!("checked above"),
    };
    Ok(spec)
}

/// Resolves a builtin with default parameters.
pub fn builtin_model(name: &str) -> Result<Model> {
    ModelSpec::Builtin {
        name: name.into(),
        params: BTreeMap::new(),
    }
    .resolve()
}
