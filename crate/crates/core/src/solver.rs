//! Over-relaxed primal-dual hybrid gradient for the lifted problem and for
//! the scalar ROF baseline.

use crate::dataterm::{ActiveSet, LiftedDataTerm, ProxWorkspace};
use crate::error::{Error, Result};
use crate::field::{DualField, Field, PixelGrid};
use crate::regularizer::{div_adjoint_into, grad_into, tv_of_gradient, ConstraintSet, TvKind};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative iterate change `|u^n - u^{n-1}| / max(|u^n|, 1)` at which to stop.
    pub tol: f64,
    pub sigma: f64,
    pub tau: f64,
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = 1.0 / 8f64.sqrt();
        SolverConfig {
            max_iters: 20_000,
            tol: 1e-7,
            sigma: s,
            tau: s,
            check_every: 50,
        }
    }
}

impl SolverConfig {
    /// Default step sizes scaled for grid spacing `h`.
    pub fn for_grid(grid: PixelGrid) -> Self {
        let s = grid.spacing / 8f64.sqrt();
        SolverConfig {
            sigma: s,
            tau: s,
            ..Self::default()
        }
    }

    pub fn validate(&self, grid: PixelGrid) -> Result<()> {
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::Usage("iteration counts must be positive".into()));
        }
        if !(self.tol > 0.0) || !(self.sigma > 0.0) || !(self.tau > 0.0) {
            return Err(Error::Usage("tolerance and step sizes must be positive".into()));
        }
        // 8/h^2 overestimates |grad|^2 on any finite grid, so equality is safe
        if self.sigma * self.tau * grid.grad_norm_sq_bound() > 1.0 + 1e-12 {
            return Err(Error::Usage(format!(
                "step sizes violate sigma*tau*|grad|^2 <= 1 (sigma={}, tau={})",
                self.sigma, self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub u: Field,
    pub q: DualField,
    pub iters_used: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Data part of the energy without the linear Bregman term.
    pub data_energy: f64,
    /// `sum_x <b(x), u(x)>`, subtracted in the primal energy.
    pub shift_energy: f64,
    pub tv_energy: f64,
    pub primal_energy: f64,
    /// Primal energy at every convergence check.
    pub energy_trace: Vec<f64>,
}

/// Per-pixel primal prox of the saddle problem.
trait PrimalProx {
    /// Writes `prox_{tau G}(z)` to `out`, returns `(data, shift)` energy at `out`.
    fn prox(&mut self, z: &Field, tau: f64, out: &mut Field) -> Result<(f64, f64)>;
}

struct LiftedProx<'a> {
    data: &'a LiftedDataTerm,
    active: Vec<ActiveSet>,
    ws: ProxWorkspace,
}

impl PrimalProx for LiftedProx<'_> {
    fn prox(&mut self, z: &Field, tau: f64, out: &mut Field) -> Result<(f64, f64)> {
        let mut data = 0.0;
        let mut shift = 0.0;
        for p in 0..z.grid().len() {
            let o = out.pixel_mut(p);
            data += self
                .data
                .prox_pixel(p, z.pixel(p), tau, &mut self.active[p], &mut self.ws, o)?;
            shift += self.data.shift(p).iter().zip(o.iter()).map(|(b, u)| b * u).sum::<f64>();
        }
        Ok((data, shift))
    }
}

struct RofProx<'a> {
    f: &'a Field,
    lambda: f64,
    p_shift: &'a Field,
}

impl PrimalProx for RofProx<'_> {
    fn prox(&mut self, z: &Field, tau: f64, out: &mut Field) -> Result<(f64, f64)> {
        let mut data = 0.0;
        let mut shift = 0.0;
        let lam = self.lambda;
        for (((o, &zv), &f), &p) in out
            .data_mut()
            .iter_mut()
            .zip(z.data())
            .zip(self.f.data())
            .zip(self.p_shift.data())
        {
            let u = (zv + tau * (lam * f + p)) / (1.0 + tau * lam);
            *o = u;
            data += 0.5 * lam * (u - f) * (u - f);
            shift += p * u;
        }
        Ok((data, shift))
    }
}

fn pdhg<P: PrimalProx>(
    prox: &mut P,
    set: &ConstraintSet,
    mut u: Field,
    mut q: DualField,
    cfg: &SolverConfig,
) -> Result<SaddleSolution> {
    let grid = u.grid();
    cfg.validate(grid)?;
    crate::regularizer::project_k_in_place(&mut q, set)?;
    let ch = u.channels();
    let mut ubar = u.clone();
    let mut g = DualField::zeros(grid, ch);
    let mut d = Field::zeros(grid, ch);
    let mut z = Field::zeros(grid, ch);
    let mut u_old = u.clone();
    let mut energy_trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iters = 0;
    let mut parts = (0.0, 0.0);

    for it in 1..=cfg.max_iters {
        iters = it;
        grad_into(&ubar, &mut g);
        for (qv, gv) in q.data_mut().iter_mut().zip(g.data()) {
            *qv += cfg.sigma * gv;
        }
        crate::regularizer::project_k_in_place(&mut q, set)?;
        div_adjoint_into(&q, &mut d);
        std::mem::swap(&mut u, &mut u_old);
        for ((zv, &uo), &dv) in z.data_mut().iter_mut().zip(u_old.data()).zip(d.data()) {
            *zv = uo - cfg.tau * dv;
        }
        parts = prox.prox(&z, cfg.tau, &mut u)?;
        for ((b, &un), &uo) in ubar.data_mut().iter_mut().zip(u.data()).zip(u_old.data()) {
            *b = 2.0 * un - uo;
        }

        if it % cfg.check_every == 0 || it == cfg.max_iters {
            let diff: f64 = u
                .data()
                .iter()
                .zip(u_old.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            residual = diff / u.norm().max(1.0);
            grad_into(&u, &mut g);
            let e = parts.0 - parts.1 + tv_of_gradient(&g, set);
            if !e.is_finite() || !residual.is_finite() {
                return Err(Error::Solver(format!("diverged at iteration {it} (energy {e})")));
            }
            energy_trace.push(e);
            if residual < cfg.tol {
                converged = true;
                break;
            }
        }
    }

    grad_into(&u, &mut g);
    let tv = tv_of_gradient(&g, set);
    let primal = parts.0 - parts.1 + tv;
    if !primal.is_finite() {
        return Err(Error::Solver(format!("non-finite final energy {primal}")));
    }
    Ok(SaddleSolution {
        u,
        q,
        iters_used: iters,
        final_residual: residual,
        converged,
        data_energy: parts.0,
        shift_energy: parts.1,
        tv_energy: tv,
        primal_energy: primal,
        energy_trace,
    })
}

/// Approximate saddle point of `sum_x env_x(u(x)) - <b(x), u(x)> + max_{q in K} <q, grad u>`.
/// Starts from `warm` when given, otherwise from the lift of `gamma_1` and `q = 0`.
pub fn solve_lifted(
    data: &LiftedDataTerm,
    set: &ConstraintSet,
    warm: Option<(&Field, &DualField)>,
    cfg: &SolverConfig,
) -> Result<SaddleSolution> {
    let grid = data.grid();
    let l = data.sublabels();
    if set.channels() != l {
        return Err(Error::Dimension(format!(
            "constraint set has {} channels, data term {}",
            set.channels(),
            l
        )));
    }
    let (u, q) = match warm {
        Some((u, q)) => {
            if u.grid() != grid || u.channels() != l || q.grid() != grid || q.channels() != l {
                return Err(Error::Dimension("warm start does not match the data term".into()));
            }
            (u.clone(), q.clone())
        }
        None => (Field::zeros(grid, l), DualField::zeros(grid, l)),
    };
    let mut prox = LiftedProx {
        data,
        active: vec![ActiveSet::default(); grid.len()],
        ws: ProxWorkspace::new(l),
    };
    pdhg(&mut prox, set, u, q, cfg)
}

/// `min_u sum lambda/2 (u - f)^2 - p_shift u + TV_kind(u)`.
pub fn solve_scalar_rof(
    f: &Field,
    lambda: f64,
    p_shift: &Field,
    kind: TvKind,
    warm: Option<(&Field, &DualField)>,
    cfg: &SolverConfig,
) -> Result<SaddleSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Usage(format!("lambda must be positive, got {lambda}")));
    }
    if f.channels() != 1 || !f.same_shape(p_shift) {
        return Err(Error::Dimension("ROF image and subgradient must be scalar fields of equal shape".into()));
    }
    let grid = f.grid();
    let (u, q) = match warm {
        Some((u, q)) => {
            if !u.same_shape(f) || q.grid() != grid || q.channels() != 1 {
                return Err(Error::Dimension("warm start does not match the image".into()));
            }
            (u.clone(), q.clone())
        }
        None => (f.clone(), DualField::zeros(grid, 1)),
    };
    let mut prox = RofProx { f, lambda, p_shift };
    pdhg(&mut prox, &ConstraintSet::scalar(kind), u, q, cfg)
}
