//! Classical and lifted Bregman iterations.
//!
//! Every step minimizes the energy minus a linear term built from the
//! previous subgradient. In the lifted iteration the subgradient `grad^T q`
//! is either used as-is (untransformed) or rewritten per pixel so that it
//! has the form `p(x) * gamma_tilde` (transformed), which makes the lifted
//! iterates reproduce the classical ones.

use crate::dataterm::LiftedDataTerm;
use crate::error::{Error, Result};
use crate::field::{DualField, Field, PixelGrid, DIRS};
use crate::labels::{integrality_check, LabelSpace, DEFAULT_INTEGRALITY_EPS};
use crate::regularizer::{div_adjoint, scalar_tv, ConstraintSet, TvKind};
use crate::solver::{solve_lifted, solve_scalar_rof, SaddleSolution, SolverConfig};

/// Largest tolerated share of non-integral pixels when transforming.
pub const MAX_NONINTEGRAL_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Classical,
    Untransformed,
    Transformed,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Untransformed => "untransformed",
            Mode::Transformed => "transformed",
        }
    }

    pub const ALL: [Mode; 3] = [Mode::Classical, Mode::Untransformed, Mode::Transformed];
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Mode::Classical),
            "untransformed" | "lifted" => Ok(Mode::Untransformed),
            "transformed" => Ok(Mode::Transformed),
            other => Err(Error::Usage(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepEnergies {
    pub data: f64,
    pub tv: f64,
    /// `|u - f|_2` when a reference image is known.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BregmanState {
    pub k: usize,
    pub u_lifted: Option<Field>,
    pub u_scalar: Field,
    pub p_scalar: Field,
    /// Dual variable defining the current subgradient (transformed if enabled).
    pub q_dual: DualField,
    pub p_lifted: Option<Field>,
    pub energies: StepEnergies,
    pub nonintegral_count: usize,
    pub solver_iters: usize,
    pub converged: bool,
}

impl BregmanState {
    pub fn initial_classical(grid: PixelGrid) -> Self {
        BregmanState {
            k: 0,
            u_lifted: None,
            u_scalar: Field::zeros(grid, 1),
            p_scalar: Field::zeros(grid, 1),
            q_dual: DualField::zeros(grid, 1),
            p_lifted: None,
            energies: StepEnergies::default(),
            nonintegral_count: 0,
            solver_iters: 0,
            converged: true,
        }
    }

    pub fn initial_lifted(space: &LabelSpace, grid: PixelGrid) -> Self {
        let l = space.sublabels();
        BregmanState {
            k: 0,
            u_lifted: None,
            u_scalar: Field::constant(grid, 1, space.min()),
            p_scalar: Field::zeros(grid, 1),
            q_dual: DualField::zeros(grid, l),
            p_lifted: Some(Field::zeros(grid, l)),
            energies: StepEnergies::default(),
            nonintegral_count: 0,
            solver_iters: 0,
            converged: true,
        }
    }
}

fn fidelity(u: &Field, f: &Field) -> f64 {
    u.data()
        .iter()
        .zip(f.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// One step of the classical ROF Bregman iteration.
pub fn classical_step(
    state: &BregmanState,
    f: &Field,
    lambda: f64,
    kind: TvKind,
    cfg: &SolverConfig,
) -> Result<BregmanState> {
    let k = state.k + 1;
    let warm = (state.k > 0).then_some((&state.u_scalar, &state.q_dual));
    let sol = solve_scalar_rof(f, lambda, &state.p_scalar, kind, warm, cfg).map_err(|e| e.at_step(k))?;
    let mut p = state.p_scalar.clone();
    for ((pv, &u), &fv) in p.data_mut().iter_mut().zip(sol.u.data()).zip(f.data()) {
        *pv -= lambda * (u - fv);
    }
    let tv = scalar_tv(&sol.u, kind)?;
    Ok(BregmanState {
        k,
        u_lifted: None,
        energies: StepEnergies {
            data: sol.data_energy,
            tv,
            fidelity: Some(fidelity(&sol.u, f)),
        },
        u_scalar: sol.u,
        p_scalar: p,
        q_dual: sol.q,
        p_lifted: None,
        nonintegral_count: 0,
        solver_iters: sol.iters_used,
        converged: sol.converged,
    })
}

/// `grad^T q`, a subgradient of the lifted TV at the solution.
pub fn extract_subgradient(sol: &SaddleSolution) -> Field {
    div_adjoint(&sol.q)
}

#[derive(Clone, Debug)]
pub struct TransformedSubgradient {
    pub q_t: DualField,
    pub p_scalar: Field,
    /// Pixels that had to be rounded to sublabel-integral form.
    pub flagged: usize,
}

/// Rewrites every pixel block of `q` as `gamma_tilde (x) q^i / gamma_tilde_i`,
/// `i` being the interval of `u(x)`.
pub fn transform_subgradient(
    q: &DualField,
    u: &Field,
    space: &LabelSpace,
    eps: f64,
) -> Result<TransformedSubgradient> {
    let l = space.sublabels();
    if !(eps > 0.0) {
        return Err(Error::Usage(format!("integrality tolerance must be positive, got {eps}")));
    }
    if q.channels() != l || u.channels() != l || q.grid() != u.grid() {
        return Err(Error::Dimension("dual and lifted field do not match the label space".into()));
    }
    let grid = u.grid();
    let gt = space.gamma_tilde();
    let mut q_t = DualField::zeros(grid, l);
    let mut w = DualField::zeros(grid, 1);
    let mut scratch = vec![0.0; l];
    let mut flagged = 0;
    for p in 0..grid.len() {
        let check = integrality_check(u.pixel(p), eps);
        let coord = match check.coord {
            Some(c) if check.is_integral => c,
            _ => {
                flagged += 1;
                space.round_to_integral_into(u.pixel(p), &mut scratch)
            }
        };
        let i = coord.interval;
        for dir in 0..DIRS {
            let s = q.get(p, i, dir) / gt[i];
            w.set(p, 0, dir, s);
            for (j, &g) in gt.iter().enumerate() {
                q_t.set(p, j, dir, g * s);
            }
        }
    }
    Ok(TransformedSubgradient {
        q_t,
        p_scalar: div_adjoint(&w),
        flagged,
    })
}

/// Inputs of a Bregman run. Classical mode needs `rof`; lifted modes need `data`.
#[derive(Clone, Debug)]
pub struct BregmanProblem {
    pub data: Option<LiftedDataTerm>,
    pub kind: TvKind,
    /// ROF datum and weight; also the fidelity reference.
    pub rof: Option<(Field, f64)>,
    pub eps: f64,
}

impl BregmanProblem {
    pub fn rof(f: &Field, lambda: f64, kind: TvKind, space: &LabelSpace, subsamples: usize) -> Result<Self> {
        let sampler = crate::problems::rof_sampler(f, lambda)?;
        Ok(BregmanProblem {
            data: Some(LiftedDataTerm::build(&sampler, space, subsamples)?),
            kind,
            rof: Some((f.clone(), lambda)),
            eps: DEFAULT_INTEGRALITY_EPS,
        })
    }

    pub fn lifted(data: LiftedDataTerm, kind: TvKind) -> Self {
        BregmanProblem {
            data: Some(data),
            kind,
            rof: None,
            eps: DEFAULT_INTEGRALITY_EPS,
        }
    }
}

/// One step of the lifted Bregman iteration.
pub fn lifted_step(
    state: &BregmanState,
    base: &LiftedDataTerm,
    set: &ConstraintSet,
    cfg: &SolverConfig,
    transform: bool,
    eps: f64,
    reference: Option<&Field>,
) -> Result<BregmanState> {
    let k = state.k + 1;
    let space = base.space();
    let grid = base.grid();
    let mut term = base.clone();
    if transform {
        term.set_bregman_shift(&state.p_scalar)
    } else {
        match &state.p_lifted {
            Some(b) => term.set_lifted_shift(b),
            None => Ok(()),
        }
    }
    .map_err(|e| e.at_step(k))?;

    let warm = state.u_lifted.as_ref().map(|u| (u, &state.q_dual));
    let sol = solve_lifted(&term, set, warm, cfg).map_err(|e| e.at_step(k))?;

    let mut u_scalar = Field::zeros(grid, 1);
    let mut nonintegral = 0;
    for p in 0..grid.len() {
        let up = sol.u.pixel(p);
        u_scalar.data_mut()[p] = space.project_lifted(up);
        if !integrality_check(up, eps).is_integral {
            nonintegral += 1;
        }
    }

    let (q_dual, p_scalar, p_lifted) = if transform {
        let t = transform_subgradient(&sol.q, &sol.u, space, eps)?;
        if t.flagged as f64 > MAX_NONINTEGRAL_FRACTION * grid.len() as f64 {
            return Err(Error::Solver(format!(
                "{} of {} pixels are not sublabel-integral; the transformed subgradient is unreliable",
                t.flagged,
                grid.len()
            ))
            .at_step(k));
        }
        let gt = space.gamma_tilde();
        let mut pl = Field::zeros(grid, gt.len());
        for p in 0..grid.len() {
            let s = t.p_scalar.data()[p];
            for (o, &g) in pl.pixel_mut(p).iter_mut().zip(gt) {
                *o = s * g;
            }
        }
        (t.q_t, t.p_scalar, pl)
    } else {
        let pl = extract_subgradient(&sol);
        // scalar read-out: the subgradient averaged against gamma_tilde
        let gt = space.gamma_tilde();
        let norm2: f64 = gt.iter().map(|g| g * g).sum();
        let mut ps = Field::zeros(grid, 1);
        for p in 0..grid.len() {
            ps.data_mut()[p] = pl.pixel(p).iter().zip(gt).map(|(a, g)| a * g).sum::<f64>() / norm2;
        }
        (sol.q.clone(), ps, pl)
    };

    Ok(BregmanState {
        k,
        energies: StepEnergies {
            data: sol.data_energy,
            tv: sol.tv_energy,
            fidelity: reference.map(|f| fidelity(&u_scalar, f)),
        },
        u_lifted: Some(sol.u),
        u_scalar,
        p_scalar,
        q_dual,
        p_lifted: Some(p_lifted),
        nonintegral_count: nonintegral,
        solver_iters: sol.iters_used,
        converged: sol.converged,
    })
}

/// Runs `steps` Bregman steps and returns the state after each one.
pub fn run_iteration(
    mode: Mode,
    problem: &BregmanProblem,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<Vec<BregmanState>> {
    run_iteration_with(mode, problem, steps, cfg, |_| {})
}

/// As [`run_iteration`], calling `on_step` after every step.
pub fn run_iteration_with<F: FnMut(&BregmanState)>(
    mode: Mode,
    problem: &BregmanProblem,
    steps: usize,
    cfg: &SolverConfig,
    mut on_step: F,
) -> Result<Vec<BregmanState>> {
    if steps == 0 {
        return Err(Error::Usage("at least one Bregman step is required".into()));
    }
    let mut out: Vec<BregmanState> = Vec::with_capacity(steps);
    match mode {
        Mode::Classical => {
            let (f, lambda) = problem
                .rof
                .as_ref()
                .ok_or_else(|| Error::Usage("classical mode needs the ROF data term".into()))?;
            let mut state = BregmanState::initial_classical(f.grid());
            for _ in 0..steps {
                state = classical_step(&state, f, *lambda, problem.kind, cfg)?;
                on_step(&state);
                out.push(state.clone());
            }
        }
        Mode::Untransformed | Mode::Transformed => {
            let data = problem
                .data
                .as_ref()
                .ok_or_else(|| Error::Usage("lifted modes need a lifted data term".into()))?;
            let set = ConstraintSet::lifted(problem.kind, data.space());
            let reference = problem.rof.as_ref().map(|(f, _)| f);
            let mut state = BregmanState::initial_lifted(data.space(), data.grid());
            for _ in 0..steps {
                state = lifted_step(&state, data, &set, cfg, mode == Mode::Transformed, problem.eps, reference)?;
                on_step(&state);
                out.push(state.clone());
            }
        }
    }
    Ok(out)
}
