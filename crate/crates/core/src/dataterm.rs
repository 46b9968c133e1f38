//! Sampled-and-convexified lifted data term.
//!
//! For every pixel the cost `rho(x, t)` is tabulated at `l * M + 1` label
//! values `gamma_i^{m/M}`. The lifted points `1_i^{m/M}` together with their
//! costs are the support points; the represented function is their convex
//! envelope over the monotone box `1 >= u^1 >= ... >= u^l >= 0`, minus the
//! per-pixel linear Bregman shift `<b(x), u>`.
//!
//! All lifted support points lie on the edges `1_{i-1} -> 1_i` of the simplex
//! spanned by `1_0, ..., 1_l`. A point on an edge can only be a convex
//! combination of points on the same edge, so per interval only the vertices
//! of the 1-D lower hull of `(alpha, cost)` ever matter. Both the prox and the
//! envelope evaluation price candidate points by a binary search over these
//! hull slopes.

use crate::error::{Error, Result};
use crate::field::{Field, PixelGrid};
use crate::labels::LabelSpace;
use crate::linalg::{cholesky_solve, lu_solve};

/// Per-pixel cost `rho(x, t)` of assigning label value `t` to pixel `x`.
pub trait CostSampler {
    fn grid(&self) -> PixelGrid;
    fn cost(&self, pixel: usize, t: f64) -> f64;
}

impl<S: CostSampler + ?Sized> CostSampler for &S {
    fn grid(&self) -> PixelGrid {
        (**self).grid()
    }
    fn cost(&self, pixel: usize, t: f64) -> f64 {
        (**self).cost(pixel, t)
    }
}

impl<S: CostSampler + ?Sized> CostSampler for Box<S> {
    fn grid(&self) -> PixelGrid {
        (**self).grid()
    }
    fn cost(&self, pixel: usize, t: f64) -> f64 {
        (**self).cost(pixel, t)
    }
}

/// Default sub-sampling per interval for smooth (e.g. quadratic) costs.
pub const DEFAULT_SUBSAMPLES_SMOOTH: usize = 64;
/// Default sub-sampling per interval for sampled stereo costs.
pub const DEFAULT_SUBSAMPLES_STEREO: usize = 16;

const BOX_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct LiftedDataTerm {
    space: LabelSpace,
    grid: PixelGrid,
    subsamples: usize,
    /// Interval of each canonical point index.
    point_interval: Vec<u32>,
    point_alpha: Vec<f64>,
    /// `l * M + 1` costs per pixel.
    costs: Vec<f64>,
    /// Canonical indices of the lower-hull vertices, grouped per (pixel, interval).
    hull: Vec<u32>,
    hull_start: Vec<u32>,
    /// `l` entries per pixel.
    shift: Vec<f64>,
}

/// Warm-start state of the prox at one pixel: active support points and
/// their convex weights.
#[derive(Clone, Debug, Default)]
pub struct ActiveSet {
    points: Vec<usize>,
    weights: Vec<f64>,
}

impl ActiveSet {
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn clear(&mut self) {
        self.points.clear();
        self.weights.clear();
    }
}

/// Scratch buffers for [`LiftedDataTerm::prox_pixel`].
#[derive(Clone, Debug)]
pub struct ProxWorkspace {
    l: usize,
    zp: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
    s0: Vec<f64>,
    s: Vec<f64>,
    diffs: Vec<f64>,
    gram: Vec<f64>,
    rhs: Vec<f64>,
    mu: Vec<f64>,
}

impl ProxWorkspace {
    pub fn new(l: usize) -> Self {
        let n = l + 1;
        ProxWorkspace {
            l,
            zp: vec![0.0; l],
            u: vec![0.0; l],
            r: vec![0.0; l],
            s0: vec![0.0; l],
            s: vec![0.0; l],
            diffs: vec![0.0; l * n],
            gram: vec![0.0; n * n],
            rhs: vec![0.0; n],
            mu: vec![0.0; n + 1],
        }
    }
}

impl LiftedDataTerm {
    /// Tabulates `sampler` at all `gamma_i^{m/M}` and convexifies per interval.
    /// The linear shift starts at zero.
    pub fn build<S: CostSampler + ?Sized>(
        sampler: &S,
        space: &LabelSpace,
        subsamples: usize,
    ) -> Result<Self> {
        if subsamples == 0 {
            return Err(Error::Usage("sub-sampling density must be at least 1".into()));
        }
        let grid = sampler.grid();
        let l = space.sublabels();
        let npts = l * subsamples + 1;
        let mut point_interval = Vec::with_capacity(npts);
        let mut point_alpha = Vec::with_capacity(npts);
        let mut values = Vec::with_capacity(npts);
        for k in 0..npts {
            let i = (k / subsamples).min(l - 1);
            let alpha = if k == npts - 1 {
                1.0
            } else {
                (k - i * subsamples) as f64 / subsamples as f64
            };
            point_interval.push(i as u32);
            point_alpha.push(alpha);
            values.push(space.value_of(crate::labels::SublabelCoord { interval: i, alpha }));
        }

        let mut costs = Vec::with_capacity(grid.len() * npts);
        for p in 0..grid.len() {
            for &t in &values {
                let c = sampler.cost(p, t);
                if !c.is_finite() {
                    return Err(Error::Data {
                        pixel: p,
                        msg: format!("cost {c} at label value {t}"),
                    });
                }
                costs.push(c);
            }
        }

        let mut term = LiftedDataTerm {
            space: space.clone(),
            grid,
            subsamples,
            point_interval,
            point_alpha,
            costs,
            hull: Vec::new(),
            hull_start: Vec::with_capacity(grid.len() * l + 1),
            shift: vec![0.0; grid.len() * l],
        };
        term.build_hulls();
        Ok(term)
    }

    fn build_hulls(&mut self) {
        let l = self.space.sublabels();
        let m = self.subsamples;
        let npts = self.points_per_pixel();
        let mut stack: Vec<u32> = Vec::with_capacity(m + 1);
        self.hull.clear();
        self.hull_start.clear();
        for p in 0..self.grid.len() {
            let c = &self.costs[p * npts..(p + 1) * npts];
            for i in 0..l {
                self.hull_start.push(self.hull.len() as u32);
                stack.clear();
                for k in i * m..=(i + 1) * m {
                    let a = k as f64;
                    while stack.len() >= 2 {
                        let k1 = stack[stack.len() - 2] as usize;
                        let k2 = stack[stack.len() - 1] as usize;
                        // drop k2 unless it lies strictly below the chord k1 -> k
                        let cross = (k2 as f64 - k1 as f64) * (c[k] - c[k1])
                            - (a - k1 as f64) * (c[k2] - c[k1]);
                        if cross <= 0.0 {
                            stack.pop();
                        } else {
                            break;
                        }
                    }
                    stack.push(k as u32);
                }
                self.hull.extend_from_slice(&stack);
            }
        }
        self.hull_start.push(self.hull.len() as u32);
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn subsamples(&self) -> usize {
        self.subsamples
    }

    pub fn sublabels(&self) -> usize {
        self.space.sublabels()
    }

    pub fn points_per_pixel(&self) -> usize {
        self.space.sublabels() * self.subsamples + 1
    }

    /// Sampled costs of pixel `p`, one per canonical support point.
    pub fn costs(&self, p: usize) -> &[f64] {
        let n = self.points_per_pixel();
        &self.costs[p * n..(p + 1) * n]
    }

    /// Lifted coordinates `(interval, alpha)` of canonical point `k`.
    pub fn point_coord(&self, k: usize) -> (usize, f64) {
        (self.point_interval[k] as usize, self.point_alpha[k])
    }

    /// Label value of canonical point `k`.
    pub fn point_value(&self, k: usize) -> f64 {
        let (i, alpha) = self.point_coord(k);
        self.space
            .value_of(crate::labels::SublabelCoord { interval: i, alpha })
    }

    fn write_point(&self, k: usize, out: &mut [f64]) {
        let i = self.point_interval[k] as usize;
        let a = self.point_alpha[k];
        for (j, o) in out.iter_mut().enumerate() {
            *o = if j < i {
                1.0
            } else if j == i {
                a
            } else {
                0.0
            };
        }
    }

    /// All support points `(1_i^alpha, cost)` of pixel `p`, without shift.
    pub fn support_points(&self, p: usize) -> Vec<(Vec<f64>, f64)> {
        let l = self.sublabels();
        self.costs(p)
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let mut s = vec![0.0; l];
                self.write_point(k, &mut s);
                (s, c)
            })
            .collect()
    }

    /// Position of canonical point `k` along interval `i`; the shared
    /// endpoint `(i + 1) M` is `alpha = 1` here.
    #[inline]
    fn local_alpha(&self, i: usize, k: usize) -> f64 {
        (k - i * self.subsamples) as f64 / self.subsamples as f64
    }

    /// Lower-hull vertices (canonical indices) of interval `i` at pixel `p`.
    pub fn hull_vertices(&self, p: usize, i: usize) -> &[u32] {
        let slot = p * self.sublabels() + i;
        &self.hull[self.hull_start[slot] as usize..self.hull_start[slot + 1] as usize]
    }

    pub fn shift(&self, p: usize) -> &[f64] {
        let l = self.sublabels();
        &self.shift[p * l..(p + 1) * l]
    }

    /// Sets `b(x) = p(x) * gamma_tilde`. Replaces any previous shift.
    pub fn set_bregman_shift(&mut self, p: &Field) -> Result<()> {
        if p.grid() != self.grid || p.channels() != 1 {
            return Err(Error::Dimension(format!(
                "subgradient field {}x{}x{} does not match data term grid {}x{}",
                p.grid().width,
                p.grid().height,
                p.channels(),
                self.grid.width,
                self.grid.height
            )));
        }
        let l = self.sublabels();
        let gt = self.space.gamma_tilde();
        for (x, &px) in p.data().iter().enumerate() {
            if !px.is_finite() {
                return Err(Error::Data {
                    pixel: x,
                    msg: format!("non-finite subgradient {px}"),
                });
            }
            for i in 0..l {
                self.shift[x * l + i] = px * gt[i];
            }
        }
        Ok(())
    }

    /// Sets a general per-pixel shift `b(x)` (the untransformed lifted subgradient).
    pub fn set_lifted_shift(&mut self, b: &Field) -> Result<()> {
        if b.grid() != self.grid || b.channels() != self.sublabels() {
            return Err(Error::Dimension(format!(
                "shift field with {} channels does not match {} sublabels",
                b.channels(),
                self.sublabels()
            )));
        }
        if let Some(x) = b.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                pixel: x / self.sublabels(),
                msg: "non-finite shift".into(),
            });
        }
        self.shift.copy_from_slice(b.data());
        Ok(())
    }

    pub fn clear_shift(&mut self) {
        self.shift.iter_mut().for_each(|b| *b = 0.0);
    }

    /// Minimizes `weight * c_k + alpha_k * slope` over the hull vertices of
    /// interval `i`; returns `(k, value)`.
    #[inline]
    fn min_on_interval(&self, p: usize, i: usize, weight: f64, slope: f64) -> (usize, f64) {
        let verts = self.hull_vertices(p, i);
        let c = self.costs(p);
        let alpha = |k: usize| self.local_alpha(i, k);
        let f = |k: usize| weight * c[k] + alpha(k) * slope;
        // segments have increasing cost slopes; find the first non-descending one
        let (mut lo, mut hi) = (0usize, verts.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let a = verts[mid] as usize;
            let b = verts[mid + 1] as usize;
            let d = weight * (c[b] - c[a]) + (alpha(b) - alpha(a)) * slope;
            if d >= 0.0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let k = verts[lo] as usize;
        (k, f(k))
    }

    /// Conjugate of the shifted sampled term: `max_k <s_k, v + b> - c_k`.
    pub fn eval_conjugate(&self, p: usize, v: &[f64]) -> f64 {
        let l = self.sublabels();
        let b = self.shift(p);
        let w: Vec<f64> = v.iter().zip(b).map(|(a, b)| a + b).collect();
        let mut prefix = vec![0.0; l + 1];
        for i in 0..l {
            prefix[i + 1] = prefix[i] + w[i];
        }
        self.costs(p)
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let i = self.point_interval[k] as usize;
                prefix[i] + self.point_alpha[k] * w[i] - c
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Convex envelope of the support points at `u`, minus `<b, u>`;
    /// `+inf` outside the monotone box.
    pub fn eval_envelope(&self, p: usize, u: &[f64]) -> f64 {
        let env = self.envelope_unshifted(p, u);
        if env.is_infinite() {
            return env;
        }
        env - dot(self.shift(p), u)
    }

    /// Sum over pixels of the unshifted envelope, i.e. the lifted data energy.
    pub fn data_energy(&self, u: &Field) -> Result<f64> {
        self.check_field(u)?;
        Ok((0..self.grid.len())
            .map(|p| self.envelope_unshifted(p, u.pixel(p)))
            .sum())
    }

    /// Linear Bregman part `sum_x <b(x), u(x)>`.
    pub fn shift_energy(&self, u: &Field) -> Result<f64> {
        self.check_field(u)?;
        Ok(dot(&self.shift, u.data()))
    }

    fn check_field(&self, u: &Field) -> Result<()> {
        if u.grid() != self.grid || u.channels() != self.sublabels() {
            return Err(Error::Dimension(format!(
                "field with {} channels on {}x{} does not match data term",
                u.channels(),
                u.grid().width,
                u.grid().height
            )));
        }
        Ok(())
    }

    /// Envelope value by a revised simplex method over the support points,
    /// started from the barycentric representation on `1_0, ..., 1_l`.
    pub fn envelope_unshifted(&self, p: usize, u: &[f64]) -> f64 {
        let l = self.sublabels();
        let n = l + 1;
        if u.len() != l || u.iter().any(|x| !x.is_finite()) {
            return f64::INFINITY;
        }
        if !crate::labels::in_monotone_box(u, BOX_TOL) {
            return f64::INFINITY;
        }
        let c = self.costs(p);
        let m = self.subsamples;
        let mut basis: Vec<usize> = (0..=l).map(|j| j * m).collect();
        let mut lam: Vec<f64> = (0..=l)
            .map(|j| {
                let hi = if j == 0 { 1.0 } else { u[j - 1] };
                let lo = if j == l { 0.0 } else { u[j] };
                (hi - lo).max(0.0)
            })
            .collect();

        let mut mat = vec![0.0; n * n];
        let mut pi = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut s = vec![0.0; l];
        let mut degenerate = 0usize;
        let npts = self.points_per_pixel();
        let scale = 1.0 + c.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let tol = 1e-12 * scale;

        for _ in 0..(50 + 20 * npts) {
            // duals: row b of the transposed basis is [s_b; 1]
            for (row, &k) in basis.iter().enumerate() {
                self.write_point(k, &mut s);
                mat[row * n..row * n + l].copy_from_slice(&s);
                mat[row * n + l] = 1.0;
                pi[row] = c[k];
            }
            if !lu_solve(&mut mat, &mut pi, n) {
                break;
            }
            let pi0 = pi[l];
            let entering = if degenerate < 25 {
                let mut best = (usize::MAX, -tol);
                let mut prefix = 0.0;
                for i in 0..l {
                    let (k, v) = self.min_on_interval(p, i, 1.0, -pi[i]);
                    let d = v - prefix - pi0;
                    if d < best.1 {
                        best = (k, d);
                    }
                    prefix += pi[i];
                }
                best.0
            } else {
                // Bland's rule against cycling
                let mut prefix = vec![0.0; l + 1];
                for i in 0..l {
                    prefix[i + 1] = prefix[i] + pi[i];
                }
                (0..npts)
                    .find(|&k| {
                        let i = self.point_interval[k] as usize;
                        c[k] - prefix[i] - self.point_alpha[k] * pi[i] - pi0 < -tol
                    })
                    .unwrap_or(usize::MAX)
            };
            if entering == usize::MAX {
                break;
            }
            // direction: B y = [s_k; 1]
            for (row, &k) in basis.iter().enumerate() {
                self.write_point(k, &mut s);
                for r in 0..l {
                    mat[r * n + row] = s[r];
                }
                mat[l * n + row] = 1.0;
            }
            self.write_point(entering, &mut s);
            col[..l].copy_from_slice(&s);
            col[l] = 1.0;
            if !lu_solve(&mut mat, &mut col, n) {
                break;
            }
            let mut leave = usize::MAX;
            let mut theta = f64::INFINITY;
            for b in 0..n {
                if col[b] > 1e-12 {
                    let r = lam[b] / col[b];
                    if r < theta - 1e-15 || (r <= theta + 1e-15 && leave != usize::MAX && basis[b] < basis[leave]) {
                        theta = r;
                        leave = b;
                    }
                }
            }
            if leave == usize::MAX {
                break;
            }
            if theta <= 1e-15 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for b in 0..n {
                lam[b] = (lam[b] - theta * col[b]).max(0.0);
            }
            lam[leave] = theta;
            basis[leave] = entering;
        }
        basis.iter().zip(&lam).map(|(&k, &w)| w * c[k]).sum()
    }

    /// `argmin_u tau * (env(u) - <b, u>) + 1/2 |u - z|^2` at pixel `p`, cold start.
    pub fn prox_data(&self, p: usize, z: &[f64], tau: f64) -> Result<Vec<f64>> {
        let mut active = ActiveSet::default();
        let mut ws = ProxWorkspace::new(self.sublabels());
        let mut out = vec![0.0; self.sublabels()];
        self.prox_pixel(p, z, tau, &mut active, &mut ws, &mut out)?;
        Ok(out)
    }

    /// Prox at pixel `p` by a primal active-set method on the support-point
    /// weights, warm-started from `active`. Writes the minimizer to `out` and
    /// returns its unshifted envelope value.
    pub fn prox_pixel(
        &self,
        p: usize,
        z: &[f64],
        tau: f64,
        active: &mut ActiveSet,
        ws: &mut ProxWorkspace,
        out: &mut [f64],
    ) -> Result<f64> {
        let l = self.sublabels();
        debug_assert_eq!(ws.l, l);
        if !(tau > 0.0) {
            return Err(Error::Usage(format!("prox step must be positive, got {tau}")));
        }
        let npts = self.points_per_pixel();
        let b = self.shift(p);
        for i in 0..l {
            ws.zp[i] = z[i] + tau * b[i];
        }
        if ws.zp.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data {
                pixel: p,
                msg: "non-finite prox argument".into(),
            });
        }
        if active.points.is_empty()
            || active.points.len() != active.weights.len()
            || active.points.iter().any(|&k| k >= npts)
        {
            self.cold_start(p, tau, active, ws);
        }

        let c = self.costs(p);
        let cap = 100 + 4 * npts;
        for _ in 0..cap {
            self.settle_on_active(p, tau, active, ws)?;

            // gradient g_k = tau c_k + <s_k, u - zp>
            ws.u.iter_mut().for_each(|x| *x = 0.0);
            for (&k, &w) in active.points.iter().zip(&active.weights) {
                let i = self.point_interval[k] as usize;
                for x in ws.u[..i].iter_mut() {
                    *x += w;
                }
                ws.u[i] += w * self.point_alpha[k];
            }
            for i in 0..l {
                ws.r[i] = ws.u[i] - ws.zp[i];
            }
            let grad_of = |k: usize, r: &[f64]| {
                let i = self.point_interval[k] as usize;
                tau * c[k] + r[..i].iter().sum::<f64>() + self.point_alpha[k] * r[i]
            };
            let theta = active
                .points
                .iter()
                .map(|&k| grad_of(k, &ws.r))
                .sum::<f64>()
                / active.points.len() as f64;

            let mut best = (usize::MAX, f64::INFINITY);
            let mut prefix = 0.0;
            for i in 0..l {
                let (k, v) = self.min_on_interval(p, i, tau, ws.r[i]);
                if v + prefix < best.1 {
                    best = (k, v + prefix);
                }
                prefix += ws.r[i];
            }
            let tol = 1e-12 * (1.0 + theta.abs());
            if best.1 >= theta - tol || active.points.contains(&best.0) {
                out.copy_from_slice(&ws.u);
                return Ok(active
                    .points
                    .iter()
                    .zip(&active.weights)
                    .map(|(&k, &w)| w * c[k])
                    .sum());
            }
            self.enter(best.0, active, ws);
        }
        Err(Error::Prox { pixel: p })
    }

    fn cold_start(&self, p: usize, tau: f64, active: &mut ActiveSet, ws: &ProxWorkspace) {
        let l = self.sublabels();
        let c = self.costs(p);
        // |s - zp|^2 = sum_{j<i} (1 - zp_j)^2 + (alpha - zp_i)^2 + sum_{j>i} zp_j^2
        let mut head = vec![0.0; l + 1];
        let mut tail = vec![0.0; l + 1];
        for i in 0..l {
            head[i + 1] = head[i] + (1.0 - ws.zp[i]).powi(2);
        }
        for i in (0..l).rev() {
            tail[i] = tail[i + 1] + ws.zp[i].powi(2);
        }
        let mut best = (0usize, f64::INFINITY);
        for i in 0..l {
            for &k in self.hull_vertices(p, i) {
                let k = k as usize;
                let a = self.local_alpha(i, k);
                let v = tau * c[k] + 0.5 * (head[i] + (a - ws.zp[i]).powi(2) + tail[i + 1]);
                if v < best.1 {
                    best = (k, v);
                }
            }
        }
        active.points.clear();
        active.weights.clear();
        active.points.push(best.0);
        active.weights.push(1.0);
    }

    /// Solves the equality-constrained subproblem on the active points
    /// (weights summing to one); result in `ws.mu`. Returns false if the
    /// active points are numerically affinely dependent.
    fn solve_affine(&self, p: usize, tau: f64, points: &[usize], ws: &mut ProxWorkspace) -> bool {
        let l = self.sublabels();
        let m = points.len() - 1;
        if m == 0 {
            ws.mu[0] = 1.0;
            return true;
        }
        let c = self.costs(p);
        self.write_point(points[0], &mut ws.s0);
        for a in 0..m {
            self.write_point(points[a + 1], &mut ws.s);
            for j in 0..l {
                ws.diffs[a * l + j] = ws.s[j] - ws.s0[j];
            }
        }
        let c0 = c[points[0]];
        for a in 0..m {
            let da = &ws.diffs[a * l..(a + 1) * l];
            for bb in 0..=a {
                let db = &ws.diffs[bb * l..(bb + 1) * l];
                let g = dot(da, db);
                ws.gram[a * m + bb] = g;
                ws.gram[bb * m + a] = g;
            }
            let mut r = -tau * (c[points[a + 1]] - c0);
            for j in 0..l {
                r -= da[j] * (ws.s0[j] - ws.zp[j]);
            }
            ws.rhs[a] = r;
        }
        if !cholesky_solve(&mut ws.gram[..m * m], &mut ws.rhs[..m], m) {
            return false;
        }
        let mut sum = 0.0;
        for a in 0..m {
            ws.mu[a + 1] = ws.rhs[a];
            sum += ws.rhs[a];
        }
        ws.mu[0] = 1.0 - sum;
        true
    }

    /// Moves the weights to the subproblem optimum on the active set,
    /// dropping points whose weight would turn negative.
    fn settle_on_active(
        &self,
        p: usize,
        tau: f64,
        active: &mut ActiveSet,
        ws: &mut ProxWorkspace,
    ) -> Result<()> {
        loop {
            if !self.solve_affine(p, tau, &active.points, ws) {
                // numerically dependent: drop the smallest weight and retry
                let (drop, _) = active
                    .weights
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (a, &w)| if w < acc.1 { (a, w) } else { acc });
                let w = active.weights[drop];
                active.points.remove(drop);
                active.weights.remove(drop);
                if active.points.is_empty() {
                    return Err(Error::Prox { pixel: p });
                }
                let total: f64 = active.weights.iter().sum();
                let total = if total > 0.0 { total } else { 1.0 - w };
                active.weights.iter_mut().for_each(|x| *x /= total);
                continue;
            }
            let n = active.points.len();
            let mut t = 1.0;
            let mut blocking = usize::MAX;
            for a in 0..n {
                let mu = ws.mu[a];
                let w = active.weights[a];
                if mu <= 0.0 {
                    let ta = if w - mu > 0.0 { w / (w - mu) } else { 0.0 };
                    if ta < t {
                        t = ta;
                        blocking = a;
                    }
                }
            }
            if blocking == usize::MAX {
                active.weights.copy_from_slice(&ws.mu[..n]);
                return Ok(());
            }
            for a in 0..n {
                active.weights[a] += t * (ws.mu[a] - active.weights[a]);
            }
            active.points.remove(blocking);
            active.weights.remove(blocking);
            let total: f64 = active.weights.iter().sum();
            active.weights.iter_mut().for_each(|x| *x = x.max(0.0) / total);
        }
    }

    /// Adds point `k`. If its lifted position is an affine combination of the
    /// active points it is strictly cheaper than that combination, so it is
    /// exchanged in at fixed `u` instead.
    fn enter(&self, k: usize, active: &mut ActiveSet, ws: &mut ProxWorkspace) {
        let l = self.sublabels();
        let n = active.points.len();
        let mut kappa = vec![0.0; n];
        let dependent = self.affine_coords(&active.points, k, ws, &mut kappa);
        debug_assert!(dependent || n <= l);
        if dependent {
            let mut t = f64::INFINITY;
            let mut blocking = usize::MAX;
            for a in 0..n {
                if kappa[a] > 1e-14 {
                    let ta = active.weights[a] / kappa[a];
                    if ta < t {
                        t = ta;
                        blocking = a;
                    }
                }
            }
            if blocking != usize::MAX {
                for a in 0..n {
                    active.weights[a] -= t * kappa[a];
                }
                active.points[blocking] = k;
                active.weights[blocking] = t;
                active.weights.iter_mut().for_each(|w| *w = w.max(0.0));
                return;
            }
        }
        active.points.push(k);
        active.weights.push(0.0);
    }

    /// Barycentric coordinates of point `k` w.r.t. `points` if it lies in their
    /// affine hull.
    fn affine_coords(&self, points: &[usize], k: usize, ws: &mut ProxWorkspace, kappa: &mut [f64]) -> bool {
        let l = self.sublabels();
        let m = points.len() - 1;
        self.write_point(points[0], &mut ws.s0);
        self.write_point(k, &mut ws.s);
        let target: Vec<f64> = (0..l).map(|j| ws.s[j] - ws.s0[j]).collect();
        if m == 0 {
            let same = target.iter().all(|x| x.abs() < 1e-12);
            if same {
                kappa[0] = 1.0;
            }
            return same;
        }
        let mut diffs = vec![0.0; m * l];
        for a in 0..m {
            self.write_point(points[a + 1], &mut ws.s);
            for j in 0..l {
                diffs[a * l + j] = ws.s[j] - ws.s0[j];
            }
        }
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for a in 0..m {
            for bb in 0..m {
                gram[a * m + bb] = dot(&diffs[a * l..(a + 1) * l], &diffs[bb * l..(bb + 1) * l]);
            }
            rhs[a] = dot(&diffs[a * l..(a + 1) * l], &target);
        }
        if !cholesky_solve(&mut gram, &mut rhs, m) {
            return false;
        }
        let mut resid = 0.0;
        for j in 0..l {
            let mut v = -target[j];
            for a in 0..m {
                v += rhs[a] * diffs[a * l + j];
            }
            resid += v * v;
        }
        if resid > 1e-18 {
            return false;
        }
        let sum: f64 = rhs.iter().sum();
        kappa[0] = 1.0 - sum;
        kappa[1..=m].copy_from_slice(&rhs);
        true
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
