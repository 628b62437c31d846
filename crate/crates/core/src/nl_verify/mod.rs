//! Constant-metric certificates for nonlinear systems on boxes.
//!
//! Every model carries a Jacobian envelope `J(x) = A₀ + Σ θⱼ(x) Aⱼ` with
//! interval bounds on each `θⱼ` over a box. The matrix inequalities checked
//! here are affine in `θ`, so holding at the `2ᵐ` vertices of the parameter
//! box implies holding for every Jacobian on the state box.

mod search;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compound::additive_compound;
use crate::error::{Error, Result};
use crate::numkernel::{
    check_square, inertia_symmetric, lambda_max, shifted_lyapunov_operator,
    spectral_norm, symmetric_inverse, symmetrize, DenseMatrix, Inertia, DEFAULT_ZERO_TOL,
};
use crate::report::{Slack, VerificationReport};

pub use search::{search_nl_certificate, SearchBudget, SearchOutcome};

pub const MAX_TERMS: usize = 16;
const OMEGA_TINY: f64 = 1e-9;

/// Axis-aligned box `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidBox("bound lists differ in length".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::InvalidBox(format!("non-finite bound on x{}", i + 1)));
            }
            if l > u {
                return Err(Error::InvalidBox(format!("lower > upper on x{}", i + 1)));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Uniform sample.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..=*u) })
            .collect()
    }

    /// Box grown by `frac` of its width on each side.
    pub fn inflate(&self, frac: f64) -> Self {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let w = (u - l) * frac;
                (l - w, u + w)
            })
            .unzip();
        Self { lower, upper }
    }

    /// Smallest box containing all points.
    pub fn bounding(points: &[Vec<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidBox("no points".into()))?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for p in points {
            for i in 0..lower.len() {
                lower[i] = lower[i].min(p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        Self::new(lower, upper)
    }
}

pub type FieldFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type BoundsFn = Arc<dyn Fn(&StateBox) -> Result<(f64, f64)> + Send + Sync>;

/// One envelope term `θ(x)·A`.
#[derive(Clone)]
pub struct EnvelopeTerm {
    pub label: String,
    pub matrix: DenseMatrix,
    pub theta: ScalarFn,
    pub bounds: BoundsFn,
}

impl fmt::Debug for EnvelopeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvelopeTerm")
            .field("label", &self.label)
            .field("matrix", &self.matrix)
            .finish_non_exhaustive()
    }
}

/// Vector field with an affine-parameter Jacobian envelope.
#[derive(Clone)]
pub struct NonlinearModel {
    pub name: String,
    pub dim: usize,
    pub f: FieldFn,
    pub a0: DenseMatrix,
    pub terms: Vec<EnvelopeTerm>,
}

impl fmt::Debug for NonlinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("a0", &self.a0)
            .field("terms", &self.terms)
            .finish_non_exhaustive()
    }
}

impl NonlinearModel {
    pub fn new(name: impl Into<String>, dim: usize, f: FieldFn, a0: DenseMatrix, terms: Vec<EnvelopeTerm>) -> Result<Self> {
        if check_square(&a0)? != dim {
            return Err(Error::DimensionMismatch(format!("A0 must be {dim}x{dim}")));
        }
        if terms.iter().any(|t| t.matrix.shape() != (dim, dim)) {
            return Err(Error::DimensionMismatch(format!("envelope matrices must be {dim}x{dim}")));
        }
        Ok(Self {
            name: name.into(),
            dim,
            f,
            a0,
            terms,
        })
    }

    /// `ẋ = Ax`.
    pub fn linear(name: impl Into<String>, a: DenseMatrix) -> Result<Self> {
        let n = check_square(&a)?;
        let am = a.clone();
        let f: FieldFn = Arc::new(move |x: &[f64]| (&am * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec());
        Self::new(name, n, f, a, vec![])
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }

    /// Envelope Jacobian `A₀ + Σ θⱼ(x) Aⱼ`.
    pub fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        let mut j = self.a0.clone();
        for t in &self.terms {
            j += &t.matrix * (t.theta)(x);
        }
        j
    }

    /// Central-difference Jacobian of `f`.
    pub fn fd_jacobian(&self, x: &[f64]) -> DenseMatrix {
        fd_jacobian(&*self.f, x)
    }

    /// Parameter intervals over `bx`.
    pub fn theta_bounds(&self, bx: &StateBox) -> Result<Vec<(f64, f64)>> {
        if bx.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "box has dimension {} but model has {}",
                bx.dim(),
                self.dim
            )));
        }
        self.terms.iter().map(|t| (t.bounds)(bx)).collect()
    }

    /// Closed loop under `u = −Kx`: `f(x) − BKx`, envelope `A₀ − BK`.
    pub fn with_state_feedback(&self, b: &DenseMatrix, k: &DenseMatrix) -> Result<Self> {
        if b.nrows() != self.dim || k.ncols() != self.dim || b.ncols() != k.nrows() {
            return Err(Error::DimensionMismatch("B and K do not conform with the model".into()));
        }
        let bk = b * k;
        let f0 = self.f.clone();
        let bk2 = bk.clone();
        let f: FieldFn = Arc::new(move |x: &[f64]| {
            let u = &bk2 * nalgebra::DVector::from_column_slice(x);
            f0(x).iter().zip(u.iter()).map(|(a, b)| a - b).collect()
        });
        Self::new(format!("{} (closed loop)", self.name), self.dim, f, &self.a0 - bk, self.terms.clone())
    }

    /// Worst relative mismatch between the envelope and a finite-difference
    /// Jacobian, and whether sampled `θⱼ(x)` stay inside the declared bounds.
    pub fn check_envelope(&self, bx: &StateBox, samples: usize, rng: &mut impl Rng, tol: f64) -> Result<f64> {
        let bounds = self.theta_bounds(bx)?;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = bx.sample(rng);
            let je = self.jacobian(&x);
            let jf = self.fd_jacobian(&x);
            let dev = (&je - &jf).amax() / (1.0 + je.amax());
            worst = worst.max(dev);
            if dev > tol {
                return Err(Error::EnvelopeMismatch { point: x, deviation: dev });
            }
            for (t, (lo, hi)) in self.terms.iter().zip(&bounds) {
                let v = (t.theta)(&x);
                let pad = 1e-12 * (1.0 + v.abs());
                if v < lo - pad || v > hi + pad {
                    return Err(Error::EnvelopeMismatch {
                        point: x,
                        deviation: (v - lo).min(0.0).abs().max(v - hi),
                    });
                }
            }
        }
        Ok(worst)
    }
}

pub fn fd_jacobian(f: &(dyn Fn(&[f64]) -> Vec<f64> + Send + Sync), x: &[f64]) -> DenseMatrix {
    let n = x.len();
    let mut j = DenseMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let step0 = f64::EPSILON.cbrt();
    for c in 0..n {
        let h = step0 * (1.0 + x[c].abs());
        xp[c] = x[c] + h;
        let fp = f(&xp);
        xp[c] = x[c] - h;
        let fm = f(&xp);
        xp[c] = x[c];
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// One corner of the parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub index: usize,
    pub theta: Vec<f64>,
    pub matrix: DenseMatrix,
}

/// All `2ᵐ` envelope corners; bit `j` of the index selects the upper bound
/// of `θⱼ`.
pub fn envelope_vertices(model: &NonlinearModel, bx: &StateBox) -> Result<Vec<Vertex>> {
    let m = model.terms.len();
    if m > MAX_TERMS {
        return Err(Error::TooManyTerms { terms: m });
    }
    let bounds = model.theta_bounds(bx)?;
    Ok((0..1usize << m)
        .map(|index| {
            let theta: Vec<f64> = bounds
                .iter()
                .enumerate()
                .map(|(j, (lo, hi))| if index >> j & 1 == 1 { *hi } else { *lo })
                .collect();
            let mut matrix = model.a0.clone();
            for (t, th) in model.terms.iter().zip(&theta) {
                matrix += &t.matrix * *th;
            }
            Vertex { index, theta, matrix }
        })
        .collect())
}

/// Non-certifying fallback: envelope Jacobians at a uniform state grid.
pub fn grid_jacobians(model: &NonlinearModel, bx: &StateBox, per_axis: usize) -> Result<Vec<Vertex>> {
    let n = model.dim;
    if bx.dim() != n {
        return Err(Error::DimensionMismatch("box and model".into()));
    }
    let per_axis = per_axis.max(2);
    let total = per_axis.checked_pow(n as u32).ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (rem % per_axis) as f64 / (per_axis - 1) as f64;
                rem /= per_axis;
                bx.lower[i] + t * (bx.upper[i] - bx.lower[i])
            })
            .collect();
        let theta = model.terms.iter().map(|t| (t.theta)(&x)).collect();
        out.push(Vertex {
            index,
            theta,
            matrix: model.jacobian(&x),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearCertificate {
    pub p0: DenseMatrix,
    pub p1: DenseMatrix,
    pub mu0: f64,
    pub mu1: f64,
    pub k: usize,
}

impl NonlinearCertificate {
    /// `μ₁ + (k−1)μ₀`.
    pub fn rate_sum(&self) -> f64 {
        self.mu1 + (self.k as f64 - 1.0) * self.mu0
    }
}

/// Worst vertex of `λ_max(op(J))` over a vertex list; ties keep the lowest index.
fn worst_vertex<F>(vertices: &[Vertex], mut op: F) -> Result<(f64, usize)>
where
    F: FnMut(&DenseMatrix) -> DenseMatrix,
{
    let mut worst = (f64::NEG_INFINITY, 0);
    for v in vertices {
        let m = lambda_max(&op(&v.matrix))?;
        if m > worst.0 {
            worst = (m, v.index);
        }
    }
    Ok(worst)
}

fn vertex_anchor(vertices: &[Vertex], idx: usize) -> String {
    let th = vertices
        .iter()
        .find(|v| v.index == idx)
        .map(|v| v.theta.clone())
        .unwrap_or_default();
    format!("worst vertex {idx} θ = {th:?}")
}

fn check_inertia(rep: &mut VerificationReport, label: &str, p: &DenseMatrix, expected: Inertia) -> Result<()> {
    let found = inertia_symmetric(p, DEFAULT_ZERO_TOL)?;
    let ok = found == expected;
    rep.push(format!("inertia({label})"), format!("found {found}, expected {expected}"), f64::from(u8::from(!ok)), 0.0, ok);
    if !ok {
        rep.note(format!("{label} has inertia {found}, expected {expected}"));
    }
    Ok(())
}

fn check_lmis(
    rep: &mut VerificationReport,
    vertices: &[Vertex],
    cert: &NonlinearCertificate,
    slack: Slack,
) -> Result<()> {
    for (label, p, mu) in [("P0", &cert.p0, cert.mu0), ("P1", &cert.p1, cert.mu1)] {
        let (margin, idx) = worst_vertex(vertices, |j| shifted_lyapunov_operator(j, p, mu))?;
        let thr = slack.threshold(spectral_norm(p));
        rep.push(
            format!("lmi({label})"),
            format!("JᵀP + PJ ≺ 2μP, {}", vertex_anchor(vertices, idx)),
            margin,
            thr,
            margin < thr,
        );
    }
    Ok(())
}

/// Checks a constant-metric pair on every envelope vertex of `bx`.
pub fn verify_nl_certificate(
    model: &NonlinearModel,
    bx: &StateBox,
    cert: &NonlinearCertificate,
    slack: impl Into<Slack>,
) -> Result<VerificationReport> {
    let slack = slack.into();
    let n = model.dim;
    if cert.p0.shape() != (n, n) || cert.p1.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("P0 and P1 must be {n}x{n}")));
    }
    if cert.k < 2 || cert.k > n {
        return Err(Error::OrderOutOfRange { k: cert.k, n });
    }
    let vertices = envelope_vertices(model, bx)?;
    let mut rep = VerificationReport::new();
    check_inertia(&mut rep, "P0", &cert.p0, Inertia::new(0, 0, n))?;
    check_inertia(&mut rep, "P1", &cert.p1, Inertia::new(cert.k - 1, 0, n - cert.k + 1))?;
    check_lmis(&mut rep, &vertices, cert, slack)?;
    let s = cert.rate_sum();
    rep.push("rate_sum", "μ₁ + (k−1)μ₀ < 0", s, 0.0, s < 0.0);
    rep.note(format!("{} envelope vertices checked", vertices.len()));
    if n == 2 && cert.k == 2 {
        rep.note("planar: compactness of the set is not required");
    }
    if rep.accepted() && cert.mu1 >= cert.mu0 {
        rep.note("warning: accepted certificate with μ₁ ≥ μ₀");
    }
    Ok(rep)
}

/// Same checks on a state grid; never certifies the whole box.
pub fn verify_nl_certificate_on_grid(
    model: &NonlinearModel,
    bx: &StateBox,
    cert: &NonlinearCertificate,
    slack: impl Into<Slack>,
    per_axis: usize,
) -> Result<VerificationReport> {
    let n = model.dim;
    let points = grid_jacobians(model, bx, per_axis)?;
    let mut rep = VerificationReport::new();
    check_inertia(&mut rep, "P0", &cert.p0, Inertia::new(0, 0, n))?;
    check_inertia(&mut rep, "P1", &cert.p1, Inertia::new(cert.k - 1, 0, n - cert.k + 1))?;
    check_lmis(&mut rep, &points, cert, slack.into())?;
    let s = cert.rate_sum();
    rep.push("rate_sum", "μ₁ + (k−1)μ₀ < 0", s, 0.0, s < 0.0);
    rep.note(format!("grid sampling with {} points: not a certificate for the box", points.len()));
    Ok(rep)
}

/// `λ_max(Q J⁽ᵏ⁾ + J⁽ᵏ⁾ᵀ Q + ηI)` for one Jacobian, with `J⁽ᵏ⁾` the additive compound.
pub fn compound_margin(j: &DenseMatrix, q: &DenseMatrix, eta: f64, k: usize) -> Result<f64> {
    let jk = additive_compound(j, k)?;
    let m = q * &jk + jk.transpose() * q + DenseMatrix::identity(q.nrows(), q.ncols()) * eta;
    lambda_max(&symmetrize(&m))
}

/// Checks the compound Lyapunov inequality with metric `Q` on every vertex.
pub fn verify_compound_condition(
    model: &NonlinearModel,
    bx: &StateBox,
    q: &DenseMatrix,
    eta: f64,
    k: usize,
    slack: impl Into<Slack>,
) -> Result<VerificationReport> {
    let slack = slack.into();
    let n = model.dim;
    if k == 0 || k > n {
        return Err(Error::OrderOutOfRange { k, n });
    }
    let c = crate::compound::binomial(n, k);
    if q.shape() != (c, c) {
        return Err(Error::DimensionMismatch(format!("Q must be {c}x{c}")));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must be positive")));
    }
    if inertia_symmetric(q, DEFAULT_ZERO_TOL)? != Inertia::new(0, 0, c) {
        return Err(Error::NotPositiveDefinite("Q".into()));
    }
    let vertices = envelope_vertices(model, bx)?;
    let mut worst = (f64::NEG_INFINITY, 0);
    for v in &vertices {
        let m = compound_margin(&v.matrix, q, eta, k)?;
        if m > worst.0 {
            worst = (m, v.index);
        }
    }
    let thr = slack.threshold(spectral_norm(q));
    let mut rep = VerificationReport::new();
    rep.push(
        "compound_lmi",
        format!("QJ⁽ᵏ⁾ + J⁽ᵏ⁾ᵀQ ⪯ −ηI, {}", vertex_anchor(&vertices, worst.1)),
        worst.0,
        thr,
        worst.0 <= thr,
    );
    rep.note(format!("{} envelope vertices checked", vertices.len()));
    Ok(rep)
}

/// Gain, rate correction and the checks behind a nonlinear feedback design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlGain {
    pub gain: DenseMatrix,
    pub omega: f64,
    pub omega_bar: f64,
    pub certified: bool,
    pub report: VerificationReport,
}

/// `K = ½Bᵀ(W₀⁻¹ + W₁⁻¹)` together with the rate correction `ω`.
///
/// Structural problems (definiteness, inertia, shapes) are errors. Failed
/// vertex inequalities are reported and leave `certified = false`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_nl_gain(
    model: &NonlinearModel,
    bx: &StateBox,
    w0: &DenseMatrix,
    w1: &DenseMatrix,
    mu0: f64,
    mu1: f64,
    b: &DenseMatrix,
    k: usize,
    slack: impl Into<Slack>,
) -> Result<NlGain> {
    let slack = slack.into();
    let n = model.dim;
    if k < 2 || k > n {
        return Err(Error::OrderOutOfRange { k, n });
    }
    if w0.shape() != (n, n) || w1.shape() != (n, n) || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!("W0, W1 must be {n}x{n} and B must have {n} rows")));
    }
    let found0 = inertia_symmetric(w0, DEFAULT_ZERO_TOL)?;
    if found0 != Inertia::new(0, 0, n) {
        return Err(Error::NotPositiveDefinite("W0".into()));
    }
    let expected1 = Inertia::new(k - 1, 0, n - k + 1);
    let found1 = inertia_symmetric(w1, DEFAULT_ZERO_TOL)?;
    if found1 != expected1 {
        return Err(Error::InertiaMismatch {
            label: "W1".into(),
            expected: expected1,
            found: found1,
        });
    }
    let w0i = symmetric_inverse(w0, "W0")?;
    let w1i = symmetric_inverse(w1, "W1")?;
    let gain = b.transpose() * (&w0i + &w1i) * 0.5;
    let bbt = b * b.transpose();
    let id = DenseMatrix::identity(n, n);
    let m = &id - &bbt * &w1i * 0.5;
    let chol = w0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("W0".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Cholesky factor of W0".into()))?;
    let s = symmetrize(&(&linv * &m * w0 * m.transpose() * linv.transpose()));
    let omega_bar = (lambda_max(&s)? - 1.0).max(0.0) + OMEGA_TINY;
    let omega = (k as f64 - 1.0) * omega_bar;

    let vertices = envelope_vertices(model, bx)?;
    let mut rep = VerificationReport::new();
    let thr0 = slack.threshold(spectral_norm(w0));
    let (m0, i0) = worst_vertex(&vertices, |j| symmetrize(&(w0 * j.transpose() + j * w0 - &bbt - w0 * (2.0 * mu0))))?;
    rep.push("lmi(W0)", format!("W₀Jᵀ + JW₀ − BBᵀ ≺ 2μ₀W₀, {}", vertex_anchor(&vertices, i0)), m0, thr0, m0 < thr0);
    let thr1 = slack.threshold(spectral_norm(w1));
    let shift = &bbt * &w0i * 0.5;
    let (m1, i1) = worst_vertex(&vertices, |j| {
        let jt = j - &shift;
        symmetrize(&(w1 * jt.transpose() + &jt * w1 - &bbt - w1 * (2.0 * mu1)))
    })?;
    rep.push(
        "lmi(W1)",
        format!("W₁J̃ᵀ + J̃W₁ − BBᵀ ≺ 2μ₁W₁ with J̃ = J − ½BBᵀW₀⁻¹, {}", vertex_anchor(&vertices, i1)),
        m1,
        thr1,
        m1 < thr1,
    );
    let budget = (k as f64 - 1.0) * mu0 + mu1 + omega;
    rep.push("rate_sum", "(k−1)μ₀ + μ₁ + ω < 0", budget, 0.0, budget < 0.0);
    let certified = rep.accepted();
    Ok(NlGain {
        gain,
        omega,
        omega_bar,
        certified,
        report: rep,
    })
}
