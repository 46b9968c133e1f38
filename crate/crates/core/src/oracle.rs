//! Brute-force reference computations for tests: convex envelopes by
//! enumeration, grid-search proxes and exhaustive minimization of tiny
//! lifted problems.
//!
//! Nothing here calls into the data term, the regularizer or the solver;
//! linear algebra and finite differences are re-done locally.

use crate::error::{Error, Result};
use crate::regularizer::TvKind;

/// Maximal dimension and point count handled by [`EnvelopeOracle`].
pub const MAX_DIM: usize = 3;
pub const MAX_POINTS: usize = 16;

const FEAS_TOL: f64 = 1e-10;

/// Finite point set `(s_j, c_j)` whose lower convex envelope is evaluated.
#[derive(Clone, Debug)]
pub struct EnvelopeOracle {
    dim: usize,
    points: Vec<(Vec<f64>, f64)>,
}

impl EnvelopeOracle {
    pub fn new(points: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.0.len());
        if dim == 0 || dim > MAX_DIM || points.len() > MAX_POINTS {
            return Err(Error::Usage(format!(
                "envelope oracle handles dimension 1..={MAX_DIM} and at most {MAX_POINTS} points"
            )));
        }
        if points.iter().any(|p| p.0.len() != dim || !p.1.is_finite()) {
            return Err(Error::Dimension("inconsistent oracle points".into()));
        }
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                if points[a].0 == points[b].0 {
                    return Err(Error::Usage("oracle points must be distinct".into()));
                }
            }
        }
        Ok(EnvelopeOracle { dim, points })
    }

    /// Support points `1_i^{m/M}` of a sampled cost `cost(t)` on `labels`,
    /// tabulated directly.
    pub fn from_samples<F: Fn(f64) -> f64>(labels: &[f64], subsamples: usize, cost: F) -> Result<Self> {
        let l = labels.len() - 1;
        let mut points = Vec::new();
        for i in 0..l {
            let first = if i == 0 { 0 } else { 1 };
            for m in first..=subsamples {
                let alpha = m as f64 / subsamples as f64;
                let mut s = vec![0.0; l];
                for (j, v) in s.iter_mut().enumerate() {
                    *v = if j < i {
                        1.0
                    } else if j == i {
                        alpha
                    } else {
                        0.0
                    };
                }
                let t = labels[i] + alpha * (labels[i + 1] - labels[i]);
                points.push((s, cost(t)));
            }
        }
        Self::new(points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[(Vec<f64>, f64)] {
        &self.points
    }

    /// `min sum lambda_j c_j` over all representations of `u` by at most
    /// `dim + 1` points; `+inf` if `u` is outside their hull.
    pub fn envelope_value(&self, u: &[f64]) -> f64 {
        let n = self.points.len();
        let mut best = f64::INFINITY;
        let mut subset = Vec::with_capacity(self.dim + 1);
        for size in 1..=(self.dim + 1).min(n) {
            subset.clear();
            subset.extend(0..size);
            loop {
                if let Some(v) = self.combination_cost(&subset, u) {
                    best = best.min(v);
                }
                if !next_subset(&mut subset, n) {
                    break;
                }
            }
        }
        best
    }

    /// Cost of writing `u` as a convex combination of the points in `subset`,
    /// if such a (unique) combination exists.
    fn combination_cost(&self, subset: &[usize], u: &[f64]) -> Option<f64> {
        let m = subset.len();
        let rows = self.dim + 1;
        // normal equations of [s_j; 1] lambda = [u; 1]
        let col = |j: usize, r: usize| {
            if r < self.dim {
                self.points[subset[j]].0[r]
            } else {
                1.0
            }
        };
        let rhs_of = |r: usize| if r < self.dim { u[r] } else { 1.0 };
        let mut a = [[0.0; MAX_DIM + 1]; MAX_DIM + 1];
        let mut b = [0.0; MAX_DIM + 1];
        for x in 0..m {
            for y in 0..m {
                a[x][y] = (0..rows).map(|r| col(x, r) * col(y, r)).sum();
            }
            b[x] = (0..rows).map(|r| col(x, r) * rhs_of(r)).sum();
        }
        let lam = gauss(&mut a, &mut b, m)?;
        for r in 0..rows {
            let v: f64 = (0..m).map(|j| col(j, r) * lam[j]).sum();
            if (v - rhs_of(r)).abs() > FEAS_TOL {
                return None;
            }
        }
        if lam[..m].iter().any(|&l| l < -FEAS_TOL) {
            return None;
        }
        Some((0..m).map(|j| lam[j].max(0.0) * self.points[subset[j]].1).sum())
    }
}

fn next_subset(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if s[i] < n - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with full pivot search on a small dense system.
fn gauss(a: &mut [[f64; MAX_DIM + 1]; MAX_DIM + 1], b: &mut [f64; MAX_DIM + 1], n: usize) -> Option<[f64; MAX_DIM + 1]> {
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; MAX_DIM + 1];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Points of the monotone box `1 >= u^1 >= ... >= u^l >= 0` on a lattice of
/// spacing `1 / steps`, for `l <= 2`.
pub fn box_lattice(l: usize, steps: usize) -> Result<Vec<Vec<f64>>> {
    let h = 1.0 / steps as f64;
    match l {
        1 => Ok((0..=steps).map(|a| vec![a as f64 * h]).collect()),
        2 => {
            let mut out = Vec::new();
            for a in 0..=steps {
                for b in 0..=a {
                    out.push(vec![a as f64 * h, b as f64 * h]);
                }
            }
            Ok(out)
        }
        _ => Err(Error::Usage(format!("box lattice supports l <= 2, got {l}"))),
    }
}

fn steps_of(grid_step: f64) -> Result<usize> {
    let steps = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || steps < 1.0 || ((1.0 / steps) - grid_step).abs() > 1e-9 * grid_step.max(1e-9) {
        return Err(Error::Usage(format!("grid step {grid_step} must divide 1")));
    }
    Ok(steps as usize)
}

/// Envelope values on the box lattice. For `l = 2` this rasterizes every
/// triangle of support points, which covers all Caratheodory representations.
fn envelope_on_lattice(oracle: &EnvelopeOracle, steps: usize) -> Result<Vec<f64>> {
    let pts = oracle.points();
    let h = 1.0 / steps as f64;
    match oracle.dim() {
        1 => {
            let lattice = box_lattice(1, steps)?;
            Ok(lattice.iter().map(|u| oracle.envelope_value(u)).collect())
        }
        2 => {
            // lattice index of (a, b) with b <= a: a(a+1)/2 + b
            let mut env = vec![f64::INFINITY; (steps + 1) * (steps + 2) / 2];
            let n = pts.len();
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        raster_triangle(&pts[i], &pts[j], &pts[k], steps, h, &mut env);
                    }
                }
            }
            // degenerate hulls: single points
            for (s, c) in pts {
                let a = (s[0] * steps as f64).round();
                let b = (s[1] * steps as f64).round();
                if ((a * h - s[0]).abs() < 1e-12) && ((b * h - s[1]).abs() < 1e-12) {
                    let idx = (a as usize) * (a as usize + 1) / 2 + b as usize;
                    env[idx] = env[idx].min(*c);
                }
            }
            Ok(env)
        }
        d => Err(Error::Usage(format!("lattice envelope supports l <= 2, got {d}"))),
    }
}

fn raster_triangle(
    p: &(Vec<f64>, f64),
    q: &(Vec<f64>, f64),
    r: &(Vec<f64>, f64),
    steps: usize,
    h: f64,
    env: &mut [f64],
) {
    let (x0, y0) = (p.0[0], p.0[1]);
    let (x1, y1) = (q.0[0] - x0, q.0[1] - y0);
    let (x2, y2) = (r.0[0] - x0, r.0[1] - y0);
    let det = x1 * y2 - x2 * y1;
    if det.abs() < 1e-14 {
        // collinear: the segments are covered by other triangles unless all
        // support points are collinear, which the box vertices exclude
        return;
    }
    let lo_a = (p.0[0].min(q.0[0]).min(r.0[0]) * steps as f64 - 1e-9).ceil().max(0.0) as usize;
    let hi_a = (p.0[0].max(q.0[0]).max(r.0[0]) * steps as f64 + 1e-9).floor().min(steps as f64) as usize;
    let lo_b = (p.0[1].min(q.0[1]).min(r.0[1]) * steps as f64 - 1e-9).ceil().max(0.0) as usize;
    let hi_b = (p.0[1].max(q.0[1]).max(r.0[1]) * steps as f64 + 1e-9).floor().min(steps as f64) as usize;
    for a in lo_a..=hi_a {
        for b in lo_b..=hi_b.min(a) {
            let dx = a as f64 * h - x0;
            let dy = b as f64 * h - y0;
            let l1 = (dx * y2 - x2 * dy) / det;
            let l2 = (x1 * dy - dx * y1) / det;
            let l0 = 1.0 - l1 - l2;
            if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
                let v = l0 * p.1 + l1 * q.1 + l2 * r.1;
                let idx = a * (a + 1) / 2 + b;
                if v < env[idx] {
                    env[idx] = v;
                }
            }
        }
    }
}

/// Best lattice point of `tau * env(u) + 1/2 |u - z|^2` over the monotone box.
pub fn prox_oracle(oracle: &EnvelopeOracle, z: &[f64], tau: f64, grid_step: f64) -> Result<Vec<f64>> {
    let l = oracle.dim();
    if l > 2 || z.len() != l {
        return Err(Error::Usage("prox oracle supports l <= 2".into()));
    }
    let steps = steps_of(grid_step)?;
    let lattice = box_lattice(l, steps)?;
    let env = envelope_on_lattice(oracle, steps)?;
    let mut best = (f64::INFINITY, 0usize);
    for (idx, u) in lattice.iter().enumerate() {
        if !env[idx].is_finite() {
            continue;
        }
        let d: f64 = u.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = tau * env[idx] + 0.5 * d;
        if v < best.0 {
            best = (v, idx);
        }
    }
    Ok(lattice[best.1].clone())
}

/// Grid prox along the lifted path `t -> 1(t)` only, for any `l`:
/// minimizes `tau * env(1(t)) + 1/2 |1(t) - z|^2` over `t` on a grid of
/// `grid_step` in label units. On the path the envelope is the 1-D lower
/// hull of the interval's samples.
pub fn path_prox_oracle<F: Fn(f64) -> f64>(
    labels: &[f64],
    subsamples: usize,
    cost: F,
    z: &[f64],
    tau: f64,
    grid_step: f64,
) -> Vec<f64> {
    let l = labels.len() - 1;
    let lo = labels[0];
    let hi = labels[l];
    let count = ((hi - lo) / grid_step).round() as usize;
    let mut best = (f64::INFINITY, vec![0.0; l]);
    for g in 0..=count {
        let t = (lo + g as f64 * grid_step).min(hi);
        let mut i = labels.partition_point(|&x| x <= t).saturating_sub(1);
        if i >= l {
            i = l - 1;
        }
        let w = labels[i + 1] - labels[i];
        let alpha = ((t - labels[i]) / w).clamp(0.0, 1.0);
        let samples: Vec<f64> = (0..=subsamples)
            .map(|m| cost(labels[i] + m as f64 / subsamples as f64 * w))
            .collect();
        let env = hull_value(&samples, alpha);
        let s: Vec<f64> = (0..l)
            .map(|j| if j < i { 1.0 } else if j == i { alpha } else { 0.0 })
            .collect();
        let d: f64 = s.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = tau * env + 0.5 * d;
        if v < best.0 {
            best = (v, s);
        }
    }
    best.1
}

/// Lower convex hull at `alpha` of equispaced samples on `[0, 1]`, by pairs.
fn hull_value(samples: &[f64], alpha: f64) -> f64 {
    let m = samples.len() - 1;
    let pos = |k: usize| k as f64 / m as f64;
    let mut best = f64::INFINITY;
    for a in 0..=m {
        if pos(a) > alpha + 1e-15 {
            break;
        }
        for b in a..=m {
            if pos(b) < alpha - 1e-15 {
                continue;
            }
            let v = if b == a {
                if (pos(a) - alpha).abs() <= 1e-15 { samples[a] } else { continue }
            } else {
                let w = (alpha - pos(a)) / (pos(b) - pos(a));
                samples[a] * (1.0 - w) + samples[b] * w
            };
            best = best.min(v);
        }
    }
    best
}

/// A lifted problem on at most 2x2 pixels with `l <= 2`.
#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub width: usize,
    pub height: usize,
    /// Per pixel, row-major.
    pub data: Vec<EnvelopeOracle>,
    /// Per-pixel linear shift `b(x)`; subtracted as `<b, u>`.
    pub shift: Vec<Vec<f64>>,
    pub kind: TvKind,
    /// `gamma_tilde`.
    pub radii: Vec<f64>,
}

impl TinyInstance {
    fn check(&self) -> Result<usize> {
        let l = self.radii.len();
        let n = self.width * self.height;
        if self.width == 0 || self.height == 0 || self.width > 2 || self.height > 2 || l == 0 || l > 2 {
            return Err(Error::Usage("exhaustive search is limited to 2x2 pixels and l <= 2".into()));
        }
        if self.data.len() != n || self.shift.len() != n {
            return Err(Error::Dimension("per-pixel data does not match the grid".into()));
        }
        if self.data.iter().any(|o| o.dim() != l) || self.shift.iter().any(|b| b.len() != l) {
            return Err(Error::Dimension("per-pixel data does not match l".into()));
        }
        Ok(l)
    }

    /// Energy `sum_x env_x(u_x) - <b_x, u_x> + TV(u)` computed from scratch.
    pub fn energy(&self, u: &[Vec<f64>]) -> Result<f64> {
        self.check()?;
        let data: f64 = u
            .iter()
            .enumerate()
            .map(|(x, ux)| {
                self.data[x].envelope_value(ux) - ux.iter().zip(&self.shift[x]).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum();
        Ok(data + self.tv(u))
    }

    fn tv(&self, u: &[Vec<f64>]) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut total = 0.0;
        for r in 0..h {
            for c in 0..w {
                let x = r * w + c;
                for (i, &g) in self.radii.iter().enumerate() {
                    let dx = if c + 1 < w { u[x + 1][i] - u[x][i] } else { 0.0 };
                    let dy = if r + 1 < h { u[x + w][i] - u[x][i] } else { 0.0 };
                    total += g * match self.kind {
                        TvKind::Anisotropic => dx.abs() + dy.abs(),
                        TvKind::Isotropic => (dx * dx + dy * dy).sqrt(),
                    };
                }
            }
        }
        total
    }
}

/// Global minimum of the tiny instance over the box lattice of spacing
/// `grid_step`; returns the minimizing lifted pixels and the energy.
pub fn exhaustive_min(inst: &TinyInstance, grid_step: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    let l = inst.check()?;
    let steps = steps_of(grid_step)?;
    let lattice = box_lattice(l, steps)?;
    let n = inst.width * inst.height;
    let data: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let env = envelope_on_lattice(&inst.data[x], steps)?;
            Ok(lattice
                .iter()
                .zip(env)
                .map(|(u, e)| e - u.iter().zip(&inst.shift[x]).map(|(a, b)| a * b).sum::<f64>())
                .collect())
        })
        .collect::<Result<_>>()?;
    let count = lattice.len();
    let mut idx = vec![0usize; n];
    let mut best = (f64::INFINITY, idx.clone());
    let mut u: Vec<Vec<f64>> = vec![lattice[0].clone(); n];
    loop {
        let d: f64 = (0..n).map(|x| data[x][idx[x]]).sum();
        if d.is_finite() && d < best.0 {
            for x in 0..n {
                u[x].clone_from(&lattice[idx[x]]);
            }
            let e = d + inst.tv(&u);
            if e < best.0 {
                best = (e, idx.clone());
            }
        }
        // odometer
        let mut x = 0;
        loop {
            if x == n {
                let pts = best.1.iter().map(|&i| lattice[i].clone()).collect();
                return Ok((pts, best.0));
            }
            idx[x] += 1;
            if idx[x] < count {
                break;
            }
            idx[x] = 0;
            x += 1;
        }
    }
}

/// Forward differences of one scalar channel on a `width x height` grid with
/// spacing `h`, zero at the last column/row; `(dx, dy)` per pixel.
pub fn forward_differences(width: usize, height: usize, h: f64, values: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(values.len());
    for r in 0..height {
        for c in 0..width {
            let x = r * width + c;
            let dx = if c + 1 < width { (values[x + 1] - values[x]) / h } else { 0.0 };
            let dy = if r + 1 < height { (values[x + width] - values[x]) / h } else { 0.0 };
            out.push((dx, dy));
        }
    }
    out
}

/// Relative adjointness defect `|<A x, y> - <x, B y>| / (|A x| |y| + |x| |B y|)`.
pub fn adjoint_gap(ax: &[f64], y: &[f64], x: &[f64], by: &[f64]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let norm = |a: &[f64]| dot(a, a).sqrt();
    let scale = norm(ax) * norm(y) + norm(x) * norm(by);
    if scale == 0.0 {
        return 0.0;
    }
    (dot(ax, y) - dot(x, by)).abs() / scale
}
