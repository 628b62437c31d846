//! Trajectories, compound (volume) dynamics, equilibria and attractors.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::compound::{additive_compound, binomial, multiplicative_compound};
use crate::error::{Error, Result};
use crate::nl_verify::{fd_jacobian, NonlinearModel, StateBox};
use crate::numkernel::{check_finite, eigenvalues, DenseMatrix};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_RECURRENCE_TOL: f64 = 1e-3;

type Field<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Send + Sync);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub compound_norms: Option<Vec<f64>>,
    /// Integration stopped early on a non-finite state.
    pub truncated: bool,
}

impl Trace {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with header `t,x1..xn[,compound_norm]`, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        if self.compound_norms.is_some() {
            out.push_str(",compound_norm");
        }
        out.push('\n');
        for (i, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let _ = write!(out, "{t:.11e}");
            for v in x {
                let _ = write!(out, ",{v:.11e}");
            }
            if let Some(c) = &self.compound_norms {
                let _ = write!(out, ",{:.11e}", c[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Bounding box of the states with `t ≥ t_from`.
    pub fn bounding_box(&self, t_from: f64) -> Result<StateBox> {
        let pts: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, x)| x.clone())
            .collect();
        StateBox::bounding(&pts)
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(f: Field, x: &[f64], h: f64) -> Vec<f64> {
    let k1 = f(x);
    let k2 = f(&axpy(x, 0.5 * h, &k1));
    let k3 = f(&axpy(x, 0.5 * h, &k2));
    let k4 = f(&axpy(x, h, &k3));
    x.iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn step_count(t_end: f64, h: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !(t_end > 0.0) || !h.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("need h > 0 and t_end > 0, got h = {h}, t_end = {t_end}")));
    }
    let n = (t_end / h).round().max(1.0) as usize;
    Ok((n, t_end / n as f64))
}

/// Fixed-step classical Runge–Kutta, recording every `stride`-th step.
pub fn integrate_with(field: Field, x0: &[f64], t_end: f64, h: f64, stride: usize) -> Result<Trace> {
    let (steps, h) = step_count(t_end, h)?;
    let stride = stride.max(1);
    let mut trace = Trace {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        compound_norms: None,
        truncated: false,
    };
    let mut x = x0.to_vec();
    for s in 1..=steps {
        x = rk4_step(field, &x, h);
        if x.iter().any(|v| !v.is_finite()) {
            trace.truncated = true;
            break;
        }
        if s % stride == 0 || s == steps {
            trace.times.push(s as f64 * h);
            trace.states.push(x.clone());
        }
    }
    Ok(trace)
}

pub fn integrate(field: Field, x0: &[f64], t_end: f64, h: f64) -> Result<Trace> {
    integrate_with(field, x0, t_end, h, 1)
}

/// Co-integrates `x` and `y = X⁽ᵏ⁾` with `ẏ = J(x)^[k] y`, `y(0) = V₀⁽ᵏ⁾`.
pub fn integrate_compound(
    model: &NonlinearModel,
    x0: &[f64],
    v0: &DenseMatrix,
    k: usize,
    t_end: f64,
    h: f64,
) -> Result<Trace> {
    let n = model.dim;
    if x0.len() != n || v0.nrows() != n || v0.ncols() != k {
        return Err(Error::DimensionMismatch(format!("need x0 in R^{n} and V0 of size {n}x{k}")));
    }
    let y0 = multiplicative_compound(v0, k)?;
    if y0.norm() == 0.0 {
        return Err(Error::InvalidArgument("columns of V0 are linearly dependent".into()));
    }
    let m = binomial(n, k);
    let aug = |z: &[f64]| -> Vec<f64> {
        let x = &z[..n];
        let mut out = model.eval(x);
        let jk = additive_compound(&model.jacobian(x), k).expect("order checked");
        let y = DVector::from_column_slice(&z[n..]);
        out.extend((jk * y).iter());
        out
    };
    let mut z0 = x0.to_vec();
    z0.extend(y0.iter());
    let full = integrate(&aug, &z0, t_end, h)?;
    let norms = full
        .states
        .iter()
        .map(|z| z[n..n + m].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    Ok(Trace {
        times: full.times,
        states: full.states.into_iter().map(|z| z[..n].to_vec()).collect(),
        compound_norms: Some(norms),
        truncated: full.truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Exponential rate: `|y(t)| ≈ c·e^{−a t}`.
    pub a: f64,
    /// Smallest `b` with `|y(t)| ≤ b e^{−a t} |y(0)|` on the whole trace.
    pub b: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
}

/// Least-squares fit of `log|y|` against `t` over the trailing half.
pub fn fit_decay(trace: &Trace) -> Result<DecayFit> {
    let norms = trace
        .compound_norms
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trace has no compound norms".into()))?;
    if norms.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("compound norms must be positive".into()));
    }
    if norms.len() < 4 {
        return Err(Error::InvalidArgument("trace too short".into()));
    }
    let start = norms.len() / 2;
    let ts = &trace.times[start..];
    let ls: Vec<f64> = norms[start..].iter().map(|v| v.ln()).collect();
    let m = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let lm = ls.iter().sum::<f64>() / m;
    let sxy: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let residual = (ts
        .iter()
        .zip(&ls)
        .map(|(t, l)| (l - intercept - slope * t).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let a = -slope;
    let y0 = norms[0];
    let b = trace
        .times
        .iter()
        .zip(norms)
        .map(|(t, y)| y * (a * t).exp() / y0)
        .fold(0.0, f64::max);
    Ok(DecayFit { a, b, residual })
}

/// Samples of an immersion `Φ : [0,1]^k → Rⁿ` on a uniform node grid.
/// For `k = 2` node `(i, j)` is stored at `i + resolution·j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionGrid {
    pub k: usize,
    pub resolution: usize,
    pub points: Vec<Vec<f64>>,
}

impl ImmersionGrid {
    /// `Φ(r) = origin + Σ rᵢ edgeᵢ`.
    pub fn parallelotope(origin: &[f64], edges: &[Vec<f64>], resolution: usize) -> Result<Self> {
        let k = edges.len();
        if !(1..=2).contains(&k) {
            return Err(Error::InvalidArgument("only k = 1 or 2 is supported".into()));
        }
        if resolution < 3 {
            return Err(Error::InvalidArgument("resolution must be at least 3".into()));
        }
        if edges.iter().any(|e| e.len() != origin.len()) {
            return Err(Error::DimensionMismatch("edges and origin".into()));
        }
        let step = 1.0 / (resolution - 1) as f64;
        let count = resolution.pow(k as u32);
        let points = (0..count)
            .map(|idx| {
                let r = [(idx % resolution) as f64 * step, (idx / resolution) as f64 * step];
                let mut p = origin.to_vec();
                for (e, ri) in edges.iter().zip(r) {
                    for (pv, ev) in p.iter_mut().zip(e) {
                        *pv += ri * ev;
                    }
                }
                p
            })
            .collect();
        Ok(Self { k, resolution, points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub value: f64,
    /// Cells whose Gram determinant came out negative and was clamped to 0.
    pub degenerate_cells: usize,
}

/// `∫ sqrt det(∂Φᵀ P ∂Φ) dr` by the midpoint rule, with derivatives from
/// central differences across each cell.
pub fn volume_of_immersion(grid: &ImmersionGrid, p: &DenseMatrix) -> Result<Volume> {
    let r = grid.resolution;
    if r < 3 {
        return Err(Error::InvalidArgument("resolution must be at least 3".into()));
    }
    if grid.points.len() != r.pow(grid.k as u32) {
        return Err(Error::InvalidArgument("incomplete grid".into()));
    }
    let n = grid.points[0].len();
    if p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("metric must be {n}x{n}")));
    }
    let dr = 1.0 / (r - 1) as f64;
    let col = |a: &[f64], b: &[f64], c: &[f64], d: &[f64], scale: f64| -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|i| ((a[i] + b[i]) - (c[i] + d[i])) * scale))
    };
    let mut total = 0.0;
    let mut degenerate = 0;
    match grid.k {
        1 => {
            for i in 0..r - 1 {
                let (a, b) = (&grid.points[i], &grid.points[i + 1]);
                let g = DVector::from_iterator(n, (0..n).map(|t| (b[t] - a[t]) / dr));
                let q = (g.transpose() * p * &g)[(0, 0)];
                if q < 0.0 {
                    degenerate += 1;
                }
                total += q.max(0.0).sqrt() * dr;
            }
        }
        2 => {
            let at = |i: usize, j: usize| grid.points[i + r * j].as_slice();
            for j in 0..r - 1 {
                for i in 0..r - 1 {
                    let s = 0.5 / dr;
                    let g1 = col(at(i + 1, j), at(i + 1, j + 1), at(i, j), at(i, j + 1), s);
                    let g2 = col(at(i, j + 1), at(i + 1, j + 1), at(i, j), at(i + 1, j), s);
                    let gm = DenseMatrix::from_columns(&[g1, g2]);
                    let det = (gm.transpose() * p * &gm).determinant();
                    if det < 0.0 {
                        degenerate += 1;
                    }
                    total += det.max(0.0).sqrt() * dr * dr;
                }
            }
        }
        k => return Err(Error::InvalidArgument(format!("k = {k} not supported"))),
    }
    Ok(Volume {
        value: total,
        degenerate_cells: degenerate,
    })
}

/// Moves every grid point along the flow for time `t` with a common step.
pub fn flow_grid(field: Field, grid: &ImmersionGrid, t: f64, h: f64) -> Result<ImmersionGrid> {
    let (steps, h) = step_count(t, h)?;
    let points = grid
        .points
        .iter()
        .map(|x0| {
            let mut x = x0.clone();
            for _ in 0..steps {
                x = rk4_step(field, &x, h);
            }
            x
        })
        .collect();
    Ok(ImmersionGrid {
        k: grid.k,
        resolution: grid.resolution,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    /// Jacobian Hurwitz.
    Stable,
    /// Negated Jacobian Hurwitz.
    Repelling,
    Saddle,
    /// Some eigenvalue on the imaginary axis.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub point: Vec<f64>,
    pub kind: EquilibriumKind,
    pub max_real: f64,
}

impl Equilibrium {
    pub fn is_unstable(&self) -> bool {
        self.max_real > 0.0
    }
}

fn classify_jacobian(j: &DenseMatrix) -> Result<(EquilibriumKind, f64)> {
    let spec = eigenvalues(j)?;
    let scale = spec.values().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let re = spec.real_parts();
    let kind = if re.iter().any(|r| r.abs() <= tol) {
        EquilibriumKind::Marginal
    } else if re.iter().all(|r| *r < 0.0) {
        EquilibriumKind::Stable
    } else if re.iter().all(|r| *r > 0.0) {
        EquilibriumKind::Repelling
    } else {
        EquilibriumKind::Saddle
    };
    Ok((kind, spec.max_real()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn newton(field: Field, x0: &[f64], bx: &StateBox) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut fx = field(&x);
    let widths: f64 = bx.lower.iter().zip(&bx.upper).map(|(l, u)| u - l).fold(0.0, f64::max);
    for _ in 0..100 {
        let r = norm(&fx);
        if r < 1e-12 * (1.0 + norm(&x)) {
            return Some(x);
        }
        let j = fd_jacobian(field, &x);
        let step = j.lu().solve(&DVector::from_column_slice(&fx))?;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let fc = field(&cand);
            if norm(&fc) < (1.0 - 1e-4 * t) * r {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || x.iter().any(|v| !v.is_finite()) || norm(&x) > 1e6 * (1.0 + widths) {
            return None;
        }
    }
    (norm(&fx) < 1e-10 * (1.0 + norm(&x))).then_some(x)
}

/// Damped Newton from a seed grid with about `seeds` points; results are
/// deduplicated within `1e-6` and restricted to the box.
pub fn find_equilibria(field: Field, bx: &StateBox, seeds: usize) -> Result<Vec<Equilibrium>> {
    let n = bx.dim();
    let per_axis = ((seeds.max(1) as f64).powf(1.0 / n as f64).ceil() as usize).max(2);
    let total = per_axis.pow(n as u32);
    let mut found: Vec<Equilibrium> = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let seed: Vec<f64> = (0..n)
            .map(|i| {
                let t = (rem % per_axis) as f64 / (per_axis - 1) as f64;
                rem /= per_axis;
                bx.lower[i] + t * (bx.upper[i] - bx.lower[i])
            })
            .collect();
        let Some(x) = newton(field, &seed, bx) else { continue };
        let pad = 1e-9;
        let inside = x
            .iter()
            .zip(bx.lower.iter().zip(&bx.upper))
            .all(|(v, (l, u))| *v >= l - pad * (1.0 + l.abs()) && *v <= u + pad * (1.0 + u.abs()));
        if !inside || found.iter().any(|e| norm(&axpy(&e.point, -1.0, &x)) < 1e-6) {
            continue;
        }
        let j = fd_jacobian(field, &x);
        check_finite(&j)?;
        let (kind, max_real) = classify_jacobian(&j)?;
        found.push(Equilibrium { point: x, kind, max_real });
    }
    found.sort_by(|a, b| a.point.partial_cmp(&b.point).unwrap_or(std::cmp::Ordering::Equal));
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attractor {
    FixedPoint,
    LimitCycle { period: f64 },
    Unresolved,
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = axpy(b, -1.0, a);
    let ap = axpy(p, -1.0, a);
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm(&axpy(&ap, -t, &ab))
}

/// Distance from `p` to the polyline of `states[lo..=hi]`.
fn polyline_distance(p: &[f64], states: &[Vec<f64>], lo: usize, hi: usize) -> f64 {
    (lo..hi)
        .map(|i| point_segment_distance(p, &states[i], &states[i + 1]))
        .fold(f64::INFINITY, f64::min)
}

/// Labels the long-time behavior of a trace. The first half is discarded as
/// transient.
pub fn classify_attractor(trace: &Trace, tol: f64) -> Attractor {
    let m = trace.states.len();
    if trace.truncated || m < 8 {
        return Attractor::Unresolved;
    }
    let s = &trace.states;
    let t = &trace.times;
    let last = &s[m - 1];
    let speed = norm(&axpy(last, -1.0, &s[m - 2])) / (t[m - 1] - t[m - 2]);
    let tail_start = m - (m / 10).max(2);
    let displacement = s[tail_start..]
        .iter()
        .map(|x| norm(&axpy(x, -1.0, last)))
        .fold(0.0, f64::max);
    if speed < tol {
        return if displacement < tol { Attractor::FixedPoint } else { Attractor::Unresolved };
    }

    // leave the neighborhood of the final point before searching for a return
    let transient = m / 2;
    let mut lim = m - 1;
    while lim > transient && norm(&axpy(&s[lim], -1.0, last)) < 10.0 * tol {
        lim -= 1;
    }
    if lim <= transient + 1 {
        return Attractor::Unresolved;
    }
    // most recent return, refined to the local minimum of the distance
    let dist = |i: usize| point_segment_distance(last, &s[i], &s[i + 1]);
    let Some(mut i) = (transient..lim).rev().find(|&i| dist(i) < tol) else {
        return Attractor::Unresolved;
    };
    while i > transient && dist(i - 1) < dist(i) {
        i -= 1;
    }
    let best = (dist(i), i);
    let shift = m - 1 - best.1;
    let period = t[m - 1] - t[best.1];
    // periodicity over up to three periods inside the trailing half
    let check_from = (m - 1).saturating_sub(3 * shift).max(transient + shift);
    let stride = (shift / 50).max(1);
    let mut i = check_from;
    while i < m {
        let j = i - shift;
        let lo = j.saturating_sub(2).max(transient);
        let hi = (j + 2).min(m - 1);
        if lo >= hi || polyline_distance(&s[i], s, lo, hi) > 10.0 * tol {
            return Attractor::Unresolved;
        }
        i += stride;
    }
    Attractor::LimitCycle { period }
}
