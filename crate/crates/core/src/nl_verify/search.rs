//! Best-effort search for constant-metric certificates.
//!
//! For a fixed rate `μ` the set of metrics `P` with `JᵥᵀP + PJᵥ ≺ 2μP` at
//! every vertex is a convex cone, and any member automatically has the
//! inertia fixed by the vertex spectra. Membership is decided by a deep-cut
//! ellipsoid method on `Lᵥ(P) ≼ −I`, after a diagonal rebalancing and time
//! scaling of the vertex Jacobians. The smallest feasible `μ₀`
//! is found by bisection and a feasible `μ₁` by scanning the interval where
//! the required inertia is possible. Results are only returned after the
//! exact vertex verifier accepts them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{envelope_vertices, verify_nl_certificate, NonlinearCertificate, NonlinearModel, StateBox};
use crate::error::{Error, Result};
use crate::numkernel::{
    eigenvalues, lambda_max, solve_lyapunov, spectral_norm, symmetric_eigen, symmetrize, DenseMatrix,
};
use crate::report::VerificationReport;

/// Relative distance kept between `μ₀` and the infeasible region.
const MU0_PAD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub bisection_steps: usize,
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 3,
            iterations: 6000,
            bisection_steps: 24,
            grid_points: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub certificate: Option<NonlinearCertificate>,
    /// Smallest rate for which a positive definite metric was found.
    pub mu0: Option<f64>,
    pub mu1: Option<f64>,
    pub report: Option<VerificationReport>,
    pub diagnostics: Vec<String>,
}

impl SearchOutcome {
    pub fn succeeded(&self) -> bool {
        self.certificate.is_some()
    }
}

/// Diagonal `d` such that `D⁻¹ M D` has balanced off-diagonal row and column sums.
fn balance(mats: &[DenseMatrix]) -> Vec<f64> {
    let n = mats[0].nrows();
    let mut abs = DenseMatrix::zeros(n, n);
    for m in mats {
        abs += m.abs();
    }
    let mut d = vec![1.0; n];
    for _ in 0..50 {
        let mut changed = false;
        for i in 0..n {
            let (mut r, mut c) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    r += abs[(i, j)] * d[j] / d[i];
                    c += abs[(j, i)] * d[i] / d[j];
                }
            }
            if r > 0.0 && c > 0.0 {
                let f = (r / c).sqrt();
                if (f - 1.0).abs() > 1e-3 {
                    d[i] *= f;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

fn svec(p: &DenseMatrix) -> nalgebra::DVector<f64> {
    let n = p.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(p[(i, i)]);
        for j in i + 1..n {
            out.push(std::f64::consts::SQRT_2 * p[(i, j)]);
        }
    }
    nalgebra::DVector::from_vec(out)
}

fn unsvec(v: &nalgebra::DVector<f64>, n: usize) -> DenseMatrix {
    let mut p = DenseMatrix::zeros(n, n);
    let mut t = 0;
    for i in 0..n {
        p[(i, i)] = v[t];
        t += 1;
        for j in i + 1..n {
            p[(i, j)] = v[t] / std::f64::consts::SQRT_2;
            p[(j, i)] = p[(i, j)];
            t += 1;
        }
    }
    p
}

struct Problem {
    mats: Vec<DenseMatrix>,
    n: usize,
}

impl Problem {
    fn op(&self, j: &DenseMatrix, p: &DenseMatrix, mu: f64) -> DenseMatrix {
        symmetrize(&(j.transpose() * p + p * j - p * (2.0 * mu)))
    }

    fn adjoint(&self, j: &DenseMatrix, u: &DenseMatrix, mu: f64) -> DenseMatrix {
        symmetrize(&(j * u + u * j.transpose() - u * (2.0 * mu)))
    }

    fn worst(&self, p: &DenseMatrix, mu: f64) -> Result<f64> {
        let mut w = f64::NEG_INFINITY;
        for j in &self.mats {
            w = w.max(lambda_max(&self.op(j, p, mu))?);
        }
        Ok(w)
    }

    /// Worst vertex value with the top eigenvector of that vertex.
    fn worst_with_cut(&self, p: &DenseMatrix, mu: f64) -> Result<(f64, DenseMatrix)> {
        let mut best = (f64::NEG_INFINITY, DenseMatrix::zeros(self.n, self.n));
        for j in &self.mats {
            let (vals, vecs) = symmetric_eigen(&self.op(j, p, mu))?;
            let top = vals[self.n - 1];
            if top > best.0 {
                let u = vecs.column(self.n - 1);
                best = (top, self.adjoint(j, &(u * u.transpose()), mu));
            }
        }
        Ok(best)
    }

    /// Deep-cut ellipsoid method for `{P : Lᵥ(P) ≼ −I for every vertex}`,
    /// started from a ball around `c`.
    fn ellipsoid(&self, c: &DenseMatrix, mu: f64, iterations: usize) -> Result<Option<DenseMatrix>> {
        let m = self.n * (self.n + 1) / 2;
        let md = m as f64;
        let mut x = svec(c);
        let radius = 1e3 * (1.0 + x.norm());
        let mut h = DenseMatrix::identity(m, m) * (radius * radius);
        for _ in 0..iterations {
            let p = unsvec(&x, self.n);
            let (val, g) = self.worst_with_cut(&p, mu)?;
            if val < -1e-6 {
                return Ok(Some(p));
            }
            let g = svec(&g);
            let hg = &h * &g;
            let gn = g.dot(&hg);
            if !(gn > 1e-300) {
                break;
            }
            let gn = gn.sqrt();
            let alpha = (val + 1.0) / gn;
            if alpha >= 1.0 {
                break;
            }
            let ht = hg / gn;
            x -= &ht * ((1.0 + md * alpha) / (md + 1.0));
            h = (h - &ht * ht.transpose() * (2.0 * (1.0 + md * alpha) / ((md + 1.0) * (1.0 + alpha))))
                * (md * md * (1.0 - alpha * alpha) / (md * md - 1.0));
            h = symmetrize(&h);
        }
        Ok(None)
    }

    /// Lyapunov-based starting metric at a convex combination of vertices.
    fn start(&self, weights: &[f64], mu: f64) -> Option<DenseMatrix> {
        let mut j = DenseMatrix::zeros(self.n, self.n);
        for (m, w) in self.mats.iter().zip(weights) {
            j += m * *w;
        }
        let shifted = j - DenseMatrix::identity(self.n, self.n) * mu;
        solve_lyapunov(&shifted, &DenseMatrix::identity(self.n, self.n)).ok()
    }

    fn feasible(&self, mu: f64, budget: &SearchBudget, rng: &mut ChaCha8Rng) -> Result<Option<DenseMatrix>> {
        let v = self.mats.len();
        let mean = vec![1.0 / v as f64; v];
        let mut starts = vec![mean];
        for _ in 1..budget.restarts.max(1) {
            let raw: Vec<f64> = (0..v).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
            let s: f64 = raw.iter().sum();
            starts.push(raw.into_iter().map(|r| r / s).collect());
        }
        for w in starts {
            let Some(c) = self.start(&w, mu) else { continue };
            if self.worst(&c, mu)? < -1e-7 * c.norm() {
                return Ok(Some(c));
            }
            if let Some(p) = self.ellipsoid(&c, mu, budget.iterations)? {
                return Ok(Some(p));
            }
        }
        Ok(None)
    }
}

/// Searches for `(P₀, P₁, μ₀, μ₁)` accepted by the vertex verifier at slack 0.
pub fn search_nl_certificate(
    model: &NonlinearModel,
    bx: &StateBox,
    k: usize,
    budget: SearchBudget,
) -> Result<SearchOutcome> {
    let n = model.dim;
    if k < 2 || k > n {
        return Err(Error::OrderOutOfRange { k, n });
    }
    let vertices = envelope_vertices(model, bx)?;
    let raw: Vec<DenseMatrix> = vertices.into_iter().map(|v| v.matrix).collect();
    let d = balance(&raw);
    let mut mats: Vec<DenseMatrix> = raw
        .iter()
        .map(|m| DenseMatrix::from_fn(n, n, |i, j| m[(i, j)] * d[j] / d[i]))
        .collect();
    let scale = mats.iter().map(spectral_norm).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for m in &mut mats {
        *m /= scale;
    }
    let prob = Problem { mats, n };
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut out = SearchOutcome {
        certificate: None,
        mu0: None,
        mu1: None,
        report: None,
        diagnostics: vec![format!("{} vertices, time scale {scale:.6e}", prob.mats.len())],
    };

    // smallest rate admitting a positive definite metric
    let mut spectra = Vec::with_capacity(prob.mats.len());
    for m in &prob.mats {
        spectra.push(eigenvalues(m)?.real_parts());
    }
    let mut lo = spectra.iter().map(|s| s[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut hi = prob
        .mats
        .iter()
        .map(|m| lambda_max(&symmetrize(m)).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max)
        + 1e-3;
    let id = DenseMatrix::identity(n, n);
    let mut p0 = id.clone();
    if prob.worst(&p0, hi)? >= 0.0 {
        out.diagnostics.push("identity metric unexpectedly infeasible".into());
        return Ok(out);
    }
    for _ in 0..budget.bisection_steps {
        if hi - lo <= 1e-9 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match prob.feasible(mid, &budget, &mut rng)? {
            Some(p) => {
                hi = mid;
                p0 = p;
            }
            None => lo = mid,
        }
    }
    // step off the infimum, where the metric degenerates
    let pad = MU0_PAD * (1.0 + hi.abs());
    if let Some(p) = prob.feasible(hi + pad, &budget, &mut rng)? {
        hi += pad;
        p0 = p;
    }
    let mu0 = hi;
    out.mu0 = Some(mu0 * scale);
    out.diagnostics.push(format!("μ₀ = {:.6} (infeasible below {:.6})", mu0 * scale, lo * scale));

    // μ₁ must leave exactly k−1 eigenvalues of every vertex to its right
    let lo1 = spectra.iter().map(|s| s[k - 1]).fold(f64::NEG_INFINITY, f64::max);
    let hi1 = spectra.iter().map(|s| s[k - 2]).fold(f64::INFINITY, f64::min);
    let target = -(k as f64 - 1.0) * mu0;
    let top = hi1.min(target);
    out.diagnostics.push(format!(
        "μ₁ window ({:.6}, {:.6}), budget requires μ₁ < {:.6}",
        lo1 * scale,
        hi1 * scale,
        target * scale
    ));
    if lo1 >= top {
        out.diagnostics.push("no admissible μ₁ window".into());
        return Ok(out);
    }
    let g = budget.grid_points.max(1);
    let mut found = None;
    for i in 0..g {
        let mu1 = lo1 + (i as f64 + 0.5) / g as f64 * (top - lo1);
        if let Some(p) = prob.feasible(mu1, &budget, &mut rng)? {
            found = Some((mu1, p));
            break;
        }
    }
    let Some((mu1, p1)) = found else {
        out.diagnostics.push("no metric with the required inertia found below the budget".into());
        return Ok(out);
    };
    out.mu1 = Some(mu1 * scale);

    let unbalance = |p: &DenseMatrix| {
        let q = DenseMatrix::from_fn(n, n, |i, j| p[(i, j)] / (d[i] * d[j]));
        let s = spectral_norm(&q);
        symmetrize(&(q / s))
    };
    let cert = NonlinearCertificate {
        p0: unbalance(&p0),
        p1: unbalance(&p1),
        mu0: mu0 * scale,
        mu1: mu1 * scale,
        k,
    };
    let rep = verify_nl_certificate(model, bx, &cert, 0.0)?;
    if rep.accepted() {
        out.certificate = Some(cert);
    } else {
        out.diagnostics.push("candidate rejected by the vertex verifier".into());
    }
    out.report = Some(rep);
    Ok(out)
}
