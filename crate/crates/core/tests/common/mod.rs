#![allow(dead_code)]

use kcontraction::compound::additive_compound;
use kcontraction::DenseMatrix;
use nalgebra::{Complex, DVector, Schur};
use rand::Rng;

/// Box–Muller standard normal sample.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn orthogonal(rng: &mut impl Rng, n: usize) -> DenseMatrix {
    gaussian(rng, n, n).qr().q()
}

/// Eigenvalues straight from nalgebra's Schur form, independent of the
/// crate's kernel. The iteration cap guards against stalls on clustered
/// spectra.
pub fn oracle_eigenvalues(m: &DenseMatrix) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return vec![];
    }
    [1.0, 8.0, 64.0, 512.0]
        .iter()
        .find_map(|f| Schur::try_new(m.clone(), f64::EPSILON * f, 50_000))
        .expect("Schur iteration converged")
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect()
}

pub fn oracle_max_real(m: &DenseMatrix) -> f64 {
    oracle_eigenvalues(m).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// `A^[k]` Hurwitz, via the compound spectrum.
pub fn compound_hurwitz(a: &DenseMatrix, k: usize) -> bool {
    oracle_max_real(&additive_compound(a, k).unwrap()) < 0.0
}

/// Sum of the k largest real parts, computed by sorting nalgebra eigenvalues.
pub fn oracle_k_sum(a: &DenseMatrix, k: usize) -> f64 {
    let mut re: Vec<f64> = oracle_eigenvalues(a).iter().map(|z| z.re).collect();
    re.sort_by(|x, y| y.total_cmp(x));
    re[..k].iter().sum()
}

/// Real block-diagonal matrix with the given real eigenvalues and complex
/// pairs `a ± bi`, conjugated by a random orthogonal matrix.
pub fn planted(rng: &mut impl Rng, reals: &[f64], pairs: &[(f64, f64)]) -> DenseMatrix {
    let n = reals.len() + 2 * pairs.len();
    let mut d = DenseMatrix::zeros(n, n);
    let mut i = 0;
    for &r in reals {
        d[(i, i)] = r;
        i += 1;
    }
    for &(a, b) in pairs {
        d[(i, i)] = a;
        d[(i + 1, i + 1)] = a;
        d[(i, i + 1)] = b;
        d[(i + 1, i)] = -b;
        i += 2;
    }
    let q = orthogonal(rng, n);
    &q * d * q.transpose()
}

pub fn vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

/// Pair `(A, B)` with a planted uncontrollable block `au`:
/// `A = Q [[Ac, A12], [0, Au]] Qᵀ`, `B = Q [Bc; 0]`.
pub fn pair_with_uncontrollable(rng: &mut impl Rng, nc: usize, m: usize, au: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let nu = au.nrows();
    let n = nc + nu;
    let mut a = DenseMatrix::zeros(n, n);
    a.view_mut((0, 0), (nc, nc)).copy_from(&gaussian(rng, nc, nc));
    a.view_mut((0, nc), (nc, nu)).copy_from(&gaussian(rng, nc, nu));
    a.view_mut((nc, nc), (nu, nu)).copy_from(au);
    let mut b = DenseMatrix::zeros(n, m);
    b.view_mut((0, 0), (nc, m)).copy_from(&gaussian(rng, nc, m));
    let q = orthogonal(rng, n);
    (&q * a * q.transpose(), &q * b)
}
