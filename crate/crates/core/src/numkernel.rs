//! Dense real linear algebra used by every analysis routine.
//!
//! Matrices are [`nalgebra::DMatrix<f64>`]. General spectra come from the real
//! Schur form (Hessenberg reduction followed by shifted QR sweeps); inertia of
//! symmetric matrices comes from the symmetric eigensolver, which is the
//! numerically stable route for sign counting.

use std::fmt;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Default relative tolerance for classifying an eigenvalue as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

const SCHUR_MAX_ITER: usize = 10_000;
const SCHUR_TOLS: [f64; 4] = [1.0, 4.0, 16.0, 64.0];
const SYMMETRY_TOL: f64 = 1e-12;

/// Counts of negative, zero and positive eigenvalues (by real part).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inertia {
    pub neg: usize,
    pub zero: usize,
    pub pos: usize,
}

impl Inertia {
    pub fn new(neg: usize, zero: usize, pos: usize) -> Self {
        Self { neg, zero, pos }
    }

    pub fn dim(&self) -> usize {
        self.neg + self.zero + self.pos
    }
}

impl fmt::Display for Inertia {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.neg, self.zero, self.pos)
    }
}

/// Eigenvalues ordered by nonincreasing real part, ties by nonincreasing
/// imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex64>,
}

impl Spectrum {
    fn from_unsorted(mut values: Vec<Complex64>) -> Self {
        values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn max_real(&self) -> f64 {
        self.values.first().map_or(f64::NEG_INFINITY, |z| z.re)
    }

    pub fn min_real(&self) -> f64 {
        self.values.last().map_or(f64::INFINITY, |z| z.re)
    }
}

/// Outcome of a definiteness test: whether it holds and the largest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Definiteness {
    pub holds: bool,
    pub margin: f64,
}

pub fn check_square(m: &DenseMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn check_finite(m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(s: &DenseMatrix) -> Result<()> {
    check_square(s)?;
    check_finite(s)?;
    let scale = s.amax();
    if scale == 0.0 {
        return Ok(());
    }
    let asym = (s - s.transpose()).amax() / scale;
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues of a square matrix.
pub fn eigenvalues(m: &DenseMatrix) -> Result<Spectrum> {
    check_square(m)?;
    check_finite(m)?;
    if m.is_empty() {
        return Ok(Spectrum { values: vec![] });
    }
    // the strict deflation test can stall on clustered eigenvalues
    let schur = SCHUR_TOLS
        .iter()
        .find_map(|f| Schur::try_new(m.clone(), f64::EPSILON * f, SCHUR_MAX_ITER))
        .ok_or(Error::NoConvergence)?;
    let vals: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NoConvergence);
    }
    Ok(Spectrum::from_unsorted(vals))
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(s: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(s)?;
    if s.is_empty() {
        return Ok(vec![]);
    }
    let eig = SymmetricEigen::try_new(symmetrize(s), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Symmetric eigendecomposition with eigenvalues ascending; columns of the
/// returned matrix are the matching unit eigenvectors.
pub fn symmetric_eigen(s: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    check_symmetric(s)?;
    let n = s.nrows();
    let eig = SymmetricEigen::try_new(symmetrize(s), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(s: &DenseMatrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(s)?.last().copied().unwrap_or(f64::NEG_INFINITY))
}

/// Inertia of a symmetric matrix. Eigenvalues within `zero_tol * ||S||` of
/// zero are counted as zero.
pub fn inertia_symmetric(s: &DenseMatrix, zero_tol: f64) -> Result<Inertia> {
    let vals = symmetric_eigenvalues(s)?;
    let scale = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cut = zero_tol * scale;
    let mut inertia = Inertia::new(0, 0, 0);
    for v in vals {
        if v < -cut {
            inertia.neg += 1;
        } else if v > cut {
            inertia.pos += 1;
        } else {
            inertia.zero += 1;
        }
    }
    Ok(inertia)
}

/// Inertia of a general square matrix by real parts of its eigenvalues.
pub fn inertia_general(m: &DenseMatrix, zero_tol: f64) -> Result<Inertia> {
    let spec = eigenvalues(m)?;
    let scale = spec.values().iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    let cut = zero_tol * scale.max(f64::MIN_POSITIVE);
    let mut inertia = Inertia::new(0, 0, 0);
    for z in spec.values() {
        if z.re < -cut {
            inertia.neg += 1;
        } else if z.re > cut {
            inertia.pos += 1;
        } else {
            inertia.zero += 1;
        }
    }
    Ok(inertia)
}

/// `λ_max(S) < slack`, always reporting `λ_max(S)` as the margin.
pub fn is_neg_def(s: &DenseMatrix, slack: f64) -> Result<Definiteness> {
    let margin = lambda_max(s)?;
    Ok(Definiteness {
        holds: margin < slack,
        margin,
    })
}

/// Solves `AᵀP + PA = −Q` for symmetric `P` by Kronecker vectorization.
///
/// Fails with [`Error::Resonance`] when two eigenvalues of `A` sum to zero,
/// which makes the vectorized system singular.
pub fn solve_lyapunov(a: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    let n = check_square(a)?;
    check_symmetric(q)?;
    check_finite(a)?;
    if q.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{n} but Q is {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let spec = eigenvalues(a)?;
    let scale = 1.0 + spectral_norm(a);
    let vals = spec.values();
    for i in 0..n {
        for j in i..n {
            let s = vals[i] + vals[j];
            if s.norm() <= 1e-10 * scale {
                return Err(Error::Resonance {
                    i: i + 1,
                    j: j + 1,
                    re: s.re,
                    im: s.im,
                });
            }
        }
    }

    let big = lyapunov_operator(a);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = big.lu().solve(&rhs).ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
    let p = symmetrize(&DenseMatrix::from_column_slice(n, n, sol.as_slice()));
    check_finite(&p)?;
    Ok(p)
}

/// Minimum-norm solution of `AᵀP + PA = −Q` for resonant but consistent
/// systems; fails with [`Error::Singular`] when the residual is not small.
pub fn solve_lyapunov_min_norm(a: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    let n = check_square(a)?;
    check_symmetric(q)?;
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let svd = lyapunov_operator(a).svd(true, true);
    let cut = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let sol = svd
        .solve(&rhs, cut)
        .map_err(|e| Error::Singular(format!("Lyapunov operator: {e}")))?;
    let p = symmetrize(&DenseMatrix::from_column_slice(n, n, sol.as_slice()));
    check_finite(&p)?;
    let res = lyapunov_residual(a, &p, q);
    if res > 1e-8 * (spectral_norm(a) * spectral_norm(&p) + spectral_norm(q)) {
        return Err(Error::Singular(format!("inconsistent Lyapunov system (residual {res:.3e})")));
    }
    Ok(p)
}

/// Matrix of `P ↦ AᵀP + PA` on column-major `vec(P)`.
fn lyapunov_operator(a: &DenseMatrix) -> DenseMatrix {
    // (I ⊗ Aᵀ + Aᵀ ⊗ I)
    let n = a.nrows();
    let at = a.transpose();
    let nn = n * n;
    let mut big = DenseMatrix::zeros(nn, nn);
    for col in 0..n {
        for row in 0..n {
            let r = col * n + row;
            for k in 0..n {
                // (I ⊗ Aᵀ): P[k, col] contributes Aᵀ[row, k]
                big[(r, col * n + k)] += at[(row, k)];
                // (Aᵀ ⊗ I): P[row, k] contributes A[k, col] = Aᵀ[col, k]
                big[(r, k * n + row)] += at[(col, k)];
            }
        }
    }
    big
}

/// Residual `||AᵀP + PA + Q||` of a Lyapunov solution.
pub fn lyapunov_residual(a: &DenseMatrix, p: &DenseMatrix, q: &DenseMatrix) -> f64 {
    spectral_norm(&(a.transpose() * p + p * a + q))
}

/// `AᵀP + PA − 2μP`, the generalized Lyapunov operator.
pub fn shifted_lyapunov_operator(a: &DenseMatrix, p: &DenseMatrix, mu: f64) -> DenseMatrix {
    symmetrize(&(a.transpose() * p + p * a - p * (2.0 * mu)))
}

/// Inverse of a symmetric nonsingular matrix, symmetrized.
pub fn symmetric_inverse(s: &DenseMatrix, label: &str) -> Result<DenseMatrix> {
    let inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(label.to_string()))?;
    check_finite(&inv).map_err(|_| Error::Singular(label.to_string()))?;
    Ok(symmetrize(&inv))
}

/// `BᵀS⁻¹` for symmetric `S`, by an LU solve rather than an explicit inverse.
pub fn right_solve_symmetric(b: &DenseMatrix, s: &DenseMatrix, label: &str) -> Result<DenseMatrix> {
    let x = s
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(label.to_string()))?;
    check_finite(&x).map_err(|_| Error::Singular(label.to_string()))?;
    Ok(x.transpose())
}

/// Builds a matrix from nested rows, validating shape and finiteness.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged rows".into()));
    }
    let m = DenseMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    check_finite(&m)?;
    Ok(m)
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
