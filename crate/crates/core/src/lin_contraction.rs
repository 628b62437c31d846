//! k-contraction of linear time-invariant systems `ẋ = Ax`.
//!
//! The eigenvalue test sums the k largest real parts. The certificate form
//! replaces the compound-matrix Lyapunov inequality with a short list of
//! generalized Lyapunov inequalities `AᵀPᵢ + PᵢA ≺ 2μᵢPᵢ` whose metrics have
//! prescribed inertia, combined through a weighted rate budget.

use serde::{Deserialize, Serialize};

use crate::compound::binomial;
use crate::error::{Error, Result};
use crate::numkernel::{
    check_square, eigenvalues, inertia_symmetric, is_neg_def, shifted_lyapunov_operator,
    solve_lyapunov, solve_lyapunov_min_norm, spectral_norm, DenseMatrix, Inertia, DEFAULT_ZERO_TOL,
};
use crate::report::{Slack, VerificationReport};

const GROUP_TOL: f64 = 1e-8;
const SPECTRUM_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub ell: usize,
    pub mus: Vec<f64>,
    pub ds: Vec<usize>,
    pub mats: Vec<DenseMatrix>,
    pub weights: Vec<usize>,
}

impl ContractionCertificate {
    /// `Σ hᵢ μᵢ`.
    pub fn rate_sum(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.mus)
            .map(|(h, m)| *h as f64 * m)
            .sum()
    }
}

/// Distinct real parts in decreasing order with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RealPartGroups {
    pub alphas: Vec<f64>,
    pub mults: Vec<usize>,
}

impl RealPartGroups {
    pub fn from_real_parts(mut re: Vec<f64>) -> Self {
        re.sort_by(|a, b| b.total_cmp(a));
        let mut alphas: Vec<f64> = Vec::new();
        let mut mults: Vec<usize> = Vec::new();
        for r in re {
            match alphas.last() {
                Some(&a) if (a - r).abs() < GROUP_TOL * (1.0 + a.abs()) => {
                    *mults.last_mut().unwrap() += 1;
                }
                _ => {
                    alphas.push(r);
                    mults.push(1);
                }
            }
        }
        Self { alphas, mults }
    }

    /// Smallest spacing between consecutive distinct real parts.
    pub fn gap(&self) -> f64 {
        self.alphas
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Certificate layout `(ℓ, d, h)` for order `k`: `d` has `ℓ+1` entries ending
/// in `k`, and `h[i] = d[i+1] − d[i]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub ell: usize,
    pub ds: Vec<usize>,
    pub weights: Vec<usize>,
}

pub(crate) fn layout(groups: &RealPartGroups, k: usize) -> Layout {
    let mut partial = vec![0usize];
    for m in &groups.mults {
        partial.push(partial.last().unwrap() + m);
    }
    let mut ds: Vec<usize> = partial.into_iter().filter(|&d| d < k).collect();
    let ell = ds.len();
    ds.push(k);
    let weights = ds.windows(2).map(|w| w[1] - w[0]).collect();
    Layout { ell, ds, weights }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::OrderOutOfRange { k, n });
    }
    Ok(())
}

/// `Σ_{i≤k} Re λᵢ(A)` with eigenvalues ordered by decreasing real part.
pub fn eigen_sum_max(a: &DenseMatrix, k: usize) -> Result<f64> {
    let n = check_square(a)?;
    check_k(k, n)?;
    Ok(eigenvalues(a)?.real_parts().iter().take(k).sum())
}

/// Whether `ẋ = Ax` is k-contractive, with the eigenvalue sum as margin.
pub fn k_contractive_lti(a: &DenseMatrix, k: usize) -> Result<(bool, f64)> {
    let s = eigen_sum_max(a, k)?;
    Ok((s < 0.0, s))
}

/// Solves `(A−μI)ᵀP + P(A−μI) = −I`. The inertia of `P` is
/// `(#{Re λ > μ}, 0, #{Re λ < μ})`.
pub fn shifted_inertia_certificate(a: &DenseMatrix, mu: f64) -> Result<DenseMatrix> {
    let n = check_square(a)?;
    let spec = eigenvalues(a)?;
    if spec.values().iter().any(|z| (z.re - mu).abs() <= SPECTRUM_TOL * (1.0 + mu.abs())) {
        return Err(Error::ShiftOnSpectrum { mu });
    }
    let shifted = a - DenseMatrix::identity(n, n) * mu;
    let q = DenseMatrix::identity(n, n);
    match solve_lyapunov(&shifted, &q) {
        Err(Error::Resonance { i, j, re, im }) => {
            solve_lyapunov_min_norm(&shifted, &q).map_err(|_| Error::Resonance { i, j, re, im })
        }
        other => other,
    }
}

/// Builds a certificate for a k-contractive `A` by placing one rate just to
/// the right of each distinct real part that precedes the k-th eigenvalue.
pub fn build_certificate(a: &DenseMatrix, k: usize) -> Result<ContractionCertificate> {
    let n = check_square(a)?;
    check_k(k, n)?;
    let spec = eigenvalues(a)?;
    let sum: f64 = spec.real_parts().iter().take(k).sum();
    if sum >= 0.0 {
        return Err(Error::NotContractive { k, margin: sum });
    }
    let groups = RealPartGroups::from_real_parts(spec.real_parts());
    let lay = layout(&groups, k);
    let mut eps = (groups.gap() / 2.0).min(sum.abs() / (k + n) as f64);
    let mut last_reason = String::new();
    for _ in 0..=MAX_HALVINGS {
        match try_certificate(a, &groups, &lay, eps) {
            Ok(cert) => return Ok(cert),
            Err(e) => last_reason = e.to_string(),
        }
        eps /= 2.0;
    }
    Err(Error::RateSelection {
        attempts: MAX_HALVINGS + 1,
        reason: last_reason,
    })
}

fn try_certificate(
    a: &DenseMatrix,
    groups: &RealPartGroups,
    lay: &Layout,
    eps: f64,
) -> Result<ContractionCertificate> {
    let n = a.nrows();
    let mus: Vec<f64> = (0..lay.ell).map(|i| groups.alphas[i] + eps).collect();
    let mut cert = ContractionCertificate {
        ell: lay.ell,
        mus,
        ds: lay.ds.clone(),
        mats: Vec::with_capacity(lay.ell),
        weights: lay.weights.clone(),
    };
    if cert.rate_sum() > 0.0 {
        return Err(Error::InvalidArgument(format!("rate sum {} > 0", cert.rate_sum())));
    }
    for (i, &mu) in cert.mus.iter().enumerate() {
        let p = shifted_inertia_certificate(a, mu)?;
        let found = inertia_symmetric(&p, DEFAULT_ZERO_TOL)?;
        let expected = Inertia::new(cert.ds[i], 0, n - cert.ds[i]);
        if found != expected {
            return Err(Error::InertiaMismatch {
                label: format!("P{i}"),
                expected,
                found,
            });
        }
        cert.mats.push(p);
    }
    Ok(cert)
}

fn structural_errors(cert: &ContractionCertificate, k: usize) -> Vec<String> {
    let mut errs = Vec::new();
    if cert.ell == 0 || cert.ell > k {
        errs.push(format!("ell = {} outside 1..={k}", cert.ell));
    }
    if cert.mus.len() != cert.ell || cert.mats.len() != cert.ell || cert.weights.len() != cert.ell {
        errs.push("list lengths disagree with ell".into());
    }
    if cert.ds.len() != cert.ell + 1 {
        errs.push("ds must have ell + 1 entries".into());
    } else {
        if cert.ds[0] != 0 {
            errs.push("d0 must be 0".into());
        }
        if !cert.ds.windows(2).all(|w| w[0] < w[1]) {
            errs.push("ds must be strictly increasing".into());
        }
        if cert.ell >= 1 && cert.ds[cert.ell - 1] > k - 1 {
            errs.push("d_{ell-1} must be at most k-1".into());
        }
        if cert.ds[cert.ell] > k {
            errs.push("d_ell must be at most k".into());
        }
        let h: Vec<usize> = cert.ds.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
        if h != cert.weights {
            errs.push("weights must equal consecutive differences of ds".into());
        }
    }
    errs
}

/// Checks every inequality, inertia constraint and the rate budget.
pub fn verify_certificate(
    a: &DenseMatrix,
    k: usize,
    cert: &ContractionCertificate,
    slack: impl Into<Slack>,
) -> Result<VerificationReport> {
    let slack = slack.into();
    let n = check_square(a)?;
    check_k(k, n)?;
    let mut rep = VerificationReport::new();
    if cert.mats.iter().any(|p| p.nrows() != n || p.ncols() != n) {
        return Err(Error::DimensionMismatch(format!("certificate matrices must be {n}x{n}")));
    }
    let errs = structural_errors(cert, k);
    rep.push("structure", "certificate shape", errs.len() as f64, 0.0, errs.is_empty());
    for e in errs {
        rep.note(e);
    }
    for (i, (p, &mu)) in cert.mats.iter().zip(&cert.mus).enumerate() {
        let d = cert.ds.get(i).copied().unwrap_or(0).min(n);
        let expected = Inertia::new(d, 0, n - d);
        match inertia_symmetric(p, DEFAULT_ZERO_TOL) {
            Ok(found) => {
                let ok = found == expected;
                rep.push(format!("inertia(P{i})"), format!("expected {expected}"), f64::from(u8::from(!ok)), 0.0, ok);
                if !ok {
                    rep.note(format!("P{i} inertia {found}, expected {expected}"));
                }
            }
            Err(e) => {
                rep.push(format!("inertia(P{i})"), format!("expected {expected}"), 1.0, 0.0, false);
                rep.note(format!("P{i}: {e}"));
                continue;
            }
        }
        let lhs = shifted_lyapunov_operator(a, p, mu);
        let thr = slack.threshold(spectral_norm(p));
        let d = is_neg_def(&lhs, thr)?;
        rep.push(format!("lmi(P{i})"), format!("AᵀP{i} + P{i}A ≺ 2μ{i}P{i}"), d.margin, thr, d.holds);
    }
    let s = cert.rate_sum();
    rep.push("rate_sum", "Σ hᵢμᵢ ≤ 0", s, 0.0, s <= 0.0);
    Ok(rep)
}

/// Decision-variable counts of the compound LMI (`N1`) and of the
/// inertia-certificate formulation with ℓ = k (`N2`).
pub fn variable_counts(n: usize, k: usize) -> Result<(usize, usize)> {
    check_k(k, n)?;
    let c = binomial(n, k);
    Ok((c * (c + 1) / 2 + 1, k * n * (n - 1) / 2 + k))
}
