//! k-order stabilizability and k-contractive state feedback for `ẋ = Ax + Bu`.
//!
//! The pair is brought to staircase form `z = Tx` with an orthogonal `T`,
//! splitting controllable and uncontrollable coordinates. Feedback cannot move
//! the uncontrollable spectrum, so stabilizability is decided there; the
//! certificate metrics `Wᵢ` share a common controllable block, which makes a
//! single gain `K = (ρ/2)BᵀW₀⁻¹` valid for every `ρ ≥ 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lin_contraction::{eigen_sum_max, layout, RealPartGroups};
use crate::numkernel::{
    check_square, eigenvalues, inertia_symmetric, is_neg_def, solve_lyapunov, spectral_norm,
    right_solve_symmetric, symmetric_eigen, symmetrize, DenseMatrix, Inertia, DEFAULT_ZERO_TOL,
};
use crate::report::{Slack, VerificationReport};

const RANK_TOL: f64 = 1e-10;
const SPECTRUM_TOL: f64 = 1e-9;
const MAX_KAPPA_HALVINGS: usize = 60;
const MAX_EPS_HALVINGS: usize = 40;
const COLINEAR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KalmanDecomposition {
    /// Orthogonal, `z = T x`.
    pub t: DenseMatrix,
    pub ac: DenseMatrix,
    pub a12: DenseMatrix,
    pub au: DenseMatrix,
    pub bc: DenseMatrix,
    pub nc: usize,
    pub nu: usize,
}

impl KalmanDecomposition {
    /// `T A Tᵀ`.
    pub fn transformed(&self, a: &DenseMatrix) -> DenseMatrix {
        &self.t * a * self.t.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizabilityCertificate {
    pub ell: usize,
    pub mus: Vec<f64>,
    pub ds: Vec<usize>,
    pub weights: Vec<usize>,
    pub mats: Vec<DenseMatrix>,
    pub colinear: bool,
}

impl StabilizabilityCertificate {
    pub fn rate_sum(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.mus)
            .map(|(h, m)| *h as f64 * m)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizabilityVerdict {
    pub stabilizable: bool,
    pub nu: usize,
    /// Eigenvalue k-sum of the uncontrollable block, absent when `nu < k`.
    pub uncontrollable_sum: Option<f64>,
    pub diagnostics: String,
}

fn check_pair(a: &DenseMatrix, b: &DenseMatrix) -> Result<usize> {
    let n = check_square(a)?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{n} but B has {} rows",
            b.nrows()
        )));
    }
    Ok(n)
}

/// Orthonormal columns spanning the range of `m` above the rank cutoff, from
/// a column-pivoted QR factorization.
fn range_basis(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DenseMatrix::zeros(m.nrows(), 0);
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > tol)
        .count();
    qr.q().columns(0, rank).into_owned()
}

/// Controllable subspace by orthogonalized Krylov blocks, completed to an
/// orthonormal basis of `Rⁿ`.
pub fn kalman_decompose(a: &DenseMatrix, b: &DenseMatrix) -> Result<KalmanDecomposition> {
    let n = check_pair(a, b)?;
    let scale_a = spectral_norm(a).max(f64::MIN_POSITIVE);
    let mut basis = DenseMatrix::zeros(n, 0);
    let mut block = b.clone();
    let mut tol = RANK_TOL * spectral_norm(b).max(f64::MIN_POSITIVE);
    while basis.ncols() < n {
        let residual = &block - &basis * (basis.transpose() * &block);
        let fresh = range_basis(&residual, tol);
        if fresh.ncols() == 0 {
            break;
        }
        // one re-orthogonalization pass against the accumulated basis
        let fresh = range_basis(&(&fresh - &basis * (basis.transpose() * &fresh)), 0.5);
        if fresh.ncols() == 0 {
            break;
        }
        basis = DenseMatrix::from_columns(
            &basis
                .column_iter()
                .chain(fresh.column_iter())
                .map(|c| c.into_owned())
                .collect::<Vec<_>>(),
        );
        block = a * &fresh;
        tol = RANK_TOL * scale_a;
    }
    let nc = basis.ncols().min(n);
    let nu = n - nc;
    let mut cols: Vec<_> = basis.column_iter().map(|c| c.into_owned()).collect();
    if nu > 0 {
        let proj = DenseMatrix::identity(n, n) - &basis * basis.transpose();
        let (_, vecs) = symmetric_eigen(&symmetrize(&proj))?;
        for j in (n - nu..n).rev() {
            cols.push(vecs.column(j).into_owned());
        }
    }
    let t = if n == 0 {
        DenseMatrix::zeros(0, 0)
    } else {
        DenseMatrix::from_columns(&cols).transpose()
    };
    let az = &t * a * t.transpose();
    let bz = &t * b;
    Ok(KalmanDecomposition {
        ac: az.view((0, 0), (nc, nc)).into_owned(),
        a12: az.view((0, nc), (nc, nu)).into_owned(),
        au: az.view((nc, nc), (nu, nu)).into_owned(),
        bc: bz.view((0, 0), (nc, b.ncols())).into_owned(),
        t,
        nc,
        nu,
    })
}

/// Rank of the controllability matrix `[B, AB, …]` computed through the same
/// Krylov procedure.
pub fn controllable_dim(a: &DenseMatrix, b: &DenseMatrix) -> Result<usize> {
    Ok(kalman_decompose(a, b)?.nc)
}

/// Decides whether some static feedback makes `A − BK` k-contractive.
pub fn k_order_stabilizable(a: &DenseMatrix, b: &DenseMatrix, k: usize) -> Result<StabilizabilityVerdict> {
    let n = check_pair(a, b)?;
    if k == 0 || k > n {
        return Err(Error::OrderOutOfRange { k, n });
    }
    let dec = kalman_decompose(a, b)?;
    if dec.nu < k {
        return Ok(StabilizabilityVerdict {
            stabilizable: true,
            nu: dec.nu,
            uncontrollable_sum: None,
            diagnostics: format!("uncontrollable dimension {} < k = {k}", dec.nu),
        });
    }
    let s = eigen_sum_max(&dec.au, k)?;
    Ok(StabilizabilityVerdict {
        stabilizable: s < 0.0,
        nu: dec.nu,
        uncontrollable_sum: Some(s),
        diagnostics: format!(
            "uncontrollable dimension {}; top-{k} real-part sum of its block = {s:.6e}",
            dec.nu
        ),
    })
}

fn blockdiag(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (p, q) = (a.nrows(), b.nrows());
    let mut m = DenseMatrix::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((p, p), (q, q)).copy_from(b);
    m
}

/// `W(A−μI)ᵀ + (A−μI)W − BBᵀ`.
pub fn dual_operator(a: &DenseMatrix, b: &DenseMatrix, w: &DenseMatrix, mu: f64) -> DenseMatrix {
    symmetrize(&(w * a.transpose() + a * w - b * b.transpose() - w * (2.0 * mu)))
}

/// Controllable block `Wc ≻ 0` from the shifted Gramian equation at rate `mu`.
fn controllable_block(dec: &KalmanDecomposition, mu: f64) -> Result<DenseMatrix> {
    let nc = dec.nc;
    if nc == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let ahat = &dec.ac - DenseMatrix::identity(nc, nc) * mu;
    let gamma = (1.0 - eigenvalues(&ahat)?.min_real()).max(1.0);
    let m = -DenseMatrix::identity(nc, nc) * gamma - ahat;
    // Wc Mᵀ + M Wc = −Bc Bcᵀ
    solve_lyapunov(&m.transpose(), &symmetrize(&(&dec.bc * dec.bc.transpose())))
}

fn uncontrollable_block(dec: &KalmanDecomposition, mu: f64) -> Result<DenseMatrix> {
    let nu = dec.nu;
    if nu == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let spec = eigenvalues(&dec.au)?;
    if spec
        .values()
        .iter()
        .any(|z| (z.re - mu).abs() <= SPECTRUM_TOL * (1.0 + mu.abs()))
    {
        return Err(Error::ShiftOnSpectrum { mu });
    }
    let ahat = &dec.au - DenseMatrix::identity(nu, nu) * mu;
    // Âu Wu + Wu Âuᵀ = −I
    solve_lyapunov(&ahat.transpose(), &DenseMatrix::identity(nu, nu))
}

fn assemble(
    a: &DenseMatrix,
    b: &DenseMatrix,
    dec: &KalmanDecomposition,
    wc: &DenseMatrix,
    wu: &DenseMatrix,
    mu: f64,
) -> Result<DenseMatrix> {
    let az = dec.transformed(a);
    let bz = &dec.t * b;
    // blocks of matched size keep W well conditioned
    let (nc, nu) = (spectral_norm(wc), spectral_norm(wu));
    let mut kappa = if nc > 0.0 && nu > 0.0 { nc / nu } else { 1.0 };
    let mut margin = f64::INFINITY;
    for _ in 0..=MAX_KAPPA_HALVINGS {
        let wz = blockdiag(wc, &(wu * kappa));
        margin = is_neg_def(&dual_operator(&az, &bz, &wz, mu), 0.0)?.margin;
        if margin < 0.0 {
            return Ok(symmetrize(&(dec.t.transpose() * wz * &dec.t)));
        }
        kappa /= 2.0;
    }
    Err(Error::KappaExhausted {
        halvings: MAX_KAPPA_HALVINGS,
        margin,
    })
}

/// Metric `W` of inertia `(ϱ, 0, n−ϱ)` with `WAᵀ + AW − BBᵀ ≺ 2μW`, where
/// `ϱ` counts eigenvalues of the uncontrollable block to the right of `μ`.
pub fn construct_w(
    a: &DenseMatrix,
    b: &DenseMatrix,
    mu: f64,
    dec: &KalmanDecomposition,
) -> Result<DenseMatrix> {
    check_pair(a, b)?;
    let wu = uncontrollable_block(dec, mu)?;
    let wc = controllable_block(dec, mu)?;
    assemble(a, b, dec, &wc, &wu, mu)
}

struct RatePlan {
    ell: usize,
    ds: Vec<usize>,
    weights: Vec<usize>,
    mus: Vec<f64>,
}

fn plan_rates(dec: &KalmanDecomposition, k: usize, eps: f64) -> Result<RatePlan> {
    let nu = dec.nu;
    if nu == 0 {
        return Ok(RatePlan {
            ell: 1,
            ds: vec![0, k],
            weights: vec![k],
            mus: vec![-1.0],
        });
    }
    let spec = eigenvalues(&dec.au)?;
    if nu < k {
        let mu0 = spec.max_real() + 1.0;
        let mu1 = (-(nu as f64) * mu0 - 1.0).min(spec.min_real() - 1.0);
        return Ok(RatePlan {
            ell: 2,
            ds: vec![0, nu, nu + 1],
            weights: vec![nu, 1],
            mus: vec![mu0, mu1],
        });
    }
    let groups = RealPartGroups::from_real_parts(spec.real_parts());
    let lay = layout(&groups, k);
    let mus = (0..lay.ell).map(|i| groups.alphas[i] + eps).collect();
    Ok(RatePlan {
        ell: lay.ell,
        ds: lay.ds,
        weights: lay.weights,
        mus,
    })
}

fn try_stabilizability(
    a: &DenseMatrix,
    b: &DenseMatrix,
    dec: &KalmanDecomposition,
    k: usize,
    eps: f64,
) -> Result<StabilizabilityCertificate> {
    let n = a.nrows();
    let plan = plan_rates(dec, k, eps)?;
    let rate_sum: f64 = plan
        .weights
        .iter()
        .zip(&plan.mus)
        .map(|(h, m)| *h as f64 * m)
        .sum();
    if rate_sum > 0.0 {
        return Err(Error::InvalidArgument(format!("rate sum {rate_sum} > 0")));
    }
    let mu_min = plan.mus.iter().copied().fold(f64::INFINITY, f64::min);
    let wc = controllable_block(dec, mu_min)?;
    let mut mats = Vec::with_capacity(plan.ell);
    for (i, &mu) in plan.mus.iter().enumerate() {
        let wu = uncontrollable_block(dec, mu)?;
        let w = assemble(a, b, dec, &wc, &wu, mu)?;
        let expected = Inertia::new(plan.ds[i], 0, n - plan.ds[i]);
        let found = inertia_symmetric(&w, DEFAULT_ZERO_TOL)?;
        if found != expected {
            return Err(Error::InertiaMismatch {
                label: format!("W{i}"),
                expected,
                found,
            });
        }
        mats.push(w);
    }
    let mut cert = StabilizabilityCertificate {
        ell: plan.ell,
        mus: plan.mus,
        ds: plan.ds,
        weights: plan.weights,
        mats,
        colinear: false,
    };
    let dev = colinearity_deviation(&cert, b)?;
    if dev > COLINEAR_TOL {
        return Err(Error::NotColinear(dev));
    }
    cert.colinear = true;
    Ok(cert)
}

/// Relative spread `max ‖BᵀWᵢ⁻¹ − BᵀW₀⁻¹‖ / ‖BᵀW₀⁻¹‖`.
pub fn colinearity_deviation(cert: &StabilizabilityCertificate, b: &DenseMatrix) -> Result<f64> {
    let Some(w0) = cert.mats.first() else {
        return Ok(0.0);
    };
    let g0 = right_solve_symmetric(b, w0, "W0")?;
    let scale = spectral_norm(&g0);
    let mut worst: f64 = 0.0;
    for (i, w) in cert.mats.iter().enumerate().skip(1) {
        let gi = right_solve_symmetric(b, w, &format!("W{i}"))?;
        worst = worst.max(spectral_norm(&(gi - &g0)));
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Builds a colinear certificate for a k-order stabilizable pair.
pub fn stabilizability_certificate(
    a: &DenseMatrix,
    b: &DenseMatrix,
    k: usize,
) -> Result<StabilizabilityCertificate> {
    let verdict = k_order_stabilizable(a, b, k)?;
    if !verdict.stabilizable {
        return Err(Error::NotStabilizable {
            k,
            reason: verdict.diagnostics,
        });
    }
    let dec = kalman_decompose(a, b)?;
    let n = a.nrows();
    let mut eps = 1.0;
    if dec.nu >= k {
        let groups = RealPartGroups::from_real_parts(eigenvalues(&dec.au)?.real_parts());
        let s = verdict.uncontrollable_sum.unwrap_or(-1.0);
        eps = (groups.gap() / 2.0).min(s.abs() / (k + n) as f64);
    }
    let mut last = String::new();
    for _ in 0..=MAX_EPS_HALVINGS {
        match try_stabilizability(a, b, &dec, k, eps) {
            Ok(c) => return Ok(c),
            Err(e @ Error::KappaExhausted { .. }) if dec.nu < k => return Err(e),
            Err(e) => last = e.to_string(),
        }
        eps /= 2.0;
    }
    Err(Error::RateSelection {
        attempts: MAX_EPS_HALVINGS + 1,
        reason: last,
    })
}

/// Checks inertia, the dual inequalities, the rate budget and colinearity.
pub fn verify_stabilizability(
    a: &DenseMatrix,
    b: &DenseMatrix,
    k: usize,
    cert: &StabilizabilityCertificate,
    slack: impl Into<Slack>,
) -> Result<VerificationReport> {
    let slack = slack.into();
    let n = check_pair(a, b)?;
    if k == 0 || k > n {
        return Err(Error::OrderOutOfRange { k, n });
    }
    let mut rep = VerificationReport::new();
    let shape_ok = cert.ds.len() == cert.ell + 1
        && cert.mus.len() == cert.ell
        && cert.mats.len() == cert.ell
        && cert.ds.first() == Some(&0)
        && cert.ds.windows(2).all(|w| w[0] < w[1])
        && cert.ds.last().is_some_and(|&d| d <= k);
    rep.push("structure", "certificate shape", f64::from(u8::from(!shape_ok)), 0.0, shape_ok);
    for (i, (w, &mu)) in cert.mats.iter().zip(&cert.mus).enumerate() {
        let d = cert.ds.get(i).copied().unwrap_or(0).min(n);
        let expected = Inertia::new(d, 0, n - d);
        let found = inertia_symmetric(w, DEFAULT_ZERO_TOL)?;
        let ok = found == expected;
        rep.push(format!("inertia(W{i})"), format!("expected {expected}"), f64::from(u8::from(!ok)), 0.0, ok);
        let thr = slack.threshold(spectral_norm(w));
        let def = is_neg_def(&dual_operator(a, b, w, mu), thr)?;
        rep.push(format!("lmi(W{i})"), format!("W{i}Aᵀ + AW{i} − BBᵀ ≺ 2μ{i}W{i}"), def.margin, thr, def.holds);
    }
    let s = cert.rate_sum();
    rep.push("rate_sum", "Σ hᵢμᵢ ≤ 0", s, 0.0, s <= 0.0);
    let dev = colinearity_deviation(cert, b)?;
    rep.push("colinearity", "BᵀWᵢ⁻¹ = BᵀW₀⁻¹", dev, COLINEAR_TOL, dev <= COLINEAR_TOL);
    Ok(rep)
}

/// `K = (ρ/2)BᵀW₀⁻¹`.
pub fn synthesize_gain(cert: &StabilizabilityCertificate, b: &DenseMatrix, rho: f64) -> Result<DenseMatrix> {
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::InvalidRho(rho));
    }
    if !cert.colinear {
        return Err(Error::NotColinear(colinearity_deviation(cert, b).unwrap_or(f64::NAN)));
    }
    let w0 = cert
        .mats
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty certificate".into()))?;
    if w0.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch("W0 and B".into()));
    }
    Ok(right_solve_symmetric(b, w0, "W0")? * (rho / 2.0))
}
