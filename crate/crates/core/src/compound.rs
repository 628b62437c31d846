//! Multiplicative and additive compounds of real matrices.
//!
//! Rows and columns of a k-th compound are labeled by the k-subsets of the
//! index set taken in lexicographic order. Public tuples are 1-based.

use crate::error::{Error, Result};
use crate::numkernel::{check_square, DenseMatrix};

/// Lexicographically ordered k-subsets of `{1, …, n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSubsets {
    pub n: usize,
    pub k: usize,
    pub subsets: Vec<Vec<usize>>,
}

impl IndexSubsets {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn check_order(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::OrderOutOfRange { k, n });
    }
    Ok(())
}

/// 0-based k-subsets of `0..n`, lexicographic.
pub(crate) fn subsets0(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut cur: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    out
}

pub fn index_subsets(n: usize, k: usize) -> Result<IndexSubsets> {
    check_order(k, n)?;
    let subsets = subsets0(n, k)
        .into_iter()
        .map(|s| s.into_iter().map(|i| i + 1).collect())
        .collect();
    Ok(IndexSubsets { n, k, subsets })
}

fn minor(q: &DenseMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    let e = |a: usize, b: usize| q[(rows[a], cols[b])];
    match rows.len() {
        1 => e(0, 0),
        2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
        3 => {
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        k => DenseMatrix::from_fn(k, k, e).lu().determinant(),
    }
}

/// Matrix of all order-k minors: entry `(I, J)` is `det Q[I, J]`.
pub fn multiplicative_compound(q: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    check_order(k, q.nrows().min(q.ncols()))?;
    let rows = subsets0(q.nrows(), k);
    let cols = subsets0(q.ncols(), k);
    Ok(DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        minor(q, &rows[i], &cols[j])
    }))
}

/// If `I` and `J` differ in exactly one element, returns
/// `(a, b, sign)` with `I \ {a} = J \ {b}` and the position-parity sign.
fn single_swap(i: &[usize], j: &[usize]) -> Option<(usize, usize, f64)> {
    let mut a = None;
    for (p, x) in i.iter().enumerate() {
        if j.binary_search(x).is_err() {
            if a.is_some() {
                return None;
            }
            a = Some((p, *x));
        }
    }
    let (pa, a) = a?;
    let (pb, b) = j
        .iter()
        .enumerate()
        .find(|(_, y)| i.binary_search(y).is_err())
        .map(|(p, y)| (p, *y))?;
    let sign = if (pa + pb) % 2 == 0 { 1.0 } else { -1.0 };
    Some((a, b, sign))
}

/// Closed-form k-th additive compound.
pub fn additive_compound(q: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let n = check_square(q)?;
    check_order(k, n)?;
    let sets = subsets0(n, k);
    let m = sets.len();
    let mut out = DenseMatrix::zeros(m, m);
    for (r, i) in sets.iter().enumerate() {
        for (c, j) in sets.iter().enumerate() {
            if r == c {
                out[(r, c)] = i.iter().map(|&t| q[(t, t)]).sum();
            } else if let Some((a, b, s)) = single_swap(i, j) {
                out[(r, c)] = s * q[(a, b)];
            }
        }
    }
    Ok(out)
}
