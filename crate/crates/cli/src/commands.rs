//! The experiments behind the subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use liftbreg::bregman::{run_iteration_with, BregmanProblem, BregmanState, Mode};
use liftbreg::imageio::{read_pgm, write_metrics, write_pgm, GrayImage, MetricsRow};
use liftbreg::problems::{
    make_scene_image, make_stereo_pair, squares_image, stereo_patch_sampler, stereo_simple_sampler, ShapeKind,
    StereoPair, SyntheticScene, Weighted,
};
use liftbreg::{Error, Field, LabelSpace, LiftedDataTerm, PixelGrid, Result, TvKind};

use crate::args::RunConfig;

/// States of every requested mode, in the order of `cfg.modes`.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub runs: Vec<(Mode, Vec<BregmanState>)>,
    pub wall_ms: Vec<Vec<u64>>,
}

impl RunOutcome {
    pub fn states(&self, mode: Mode) -> Option<&[BregmanState]> {
        self.runs.iter().find(|r| r.0 == mode).map(|r| r.1.as_slice())
    }
}

pub fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean_abs_diff(a: &Field, b: &Field) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data().len() as f64
}

fn label_space(cfg: &RunConfig) -> Result<LabelSpace> {
    LabelSpace::uniform(cfg.gamma_min, cfg.gamma_max, cfg.labels)
}

fn ensure_out(cfg: &RunConfig) -> Result<Option<&Path>> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn run_modes(cfg: &RunConfig, problem: &BregmanProblem) -> Result<RunOutcome> {
    let solver = cfg.solver();
    let mut runs = Vec::new();
    let mut wall_ms = Vec::new();
    for &mode in &cfg.modes {
        let mut times = Vec::new();
        let mut last = Instant::now();
        let states = run_iteration_with(mode, problem, cfg.steps, &solver, |_| {
            let now = Instant::now();
            times.push(if cfg.timings { (now - last).as_millis() as u64 } else { 0 });
            last = now;
        })?;
        runs.push((mode, states));
        wall_ms.push(times);
    }
    Ok(RunOutcome { runs, wall_ms })
}

fn metrics_rows(out: &RunOutcome) -> Vec<MetricsRow> {
    let classical = out.states(Mode::Classical);
    let mut rows = Vec::new();
    for ((mode, states), times) in out.runs.iter().zip(&out.wall_ms) {
        for (s, &ms) in states.iter().zip(times) {
            let diff = match (mode, classical) {
                (Mode::Classical, _) | (_, None) => None,
                (_, Some(c)) => Some(max_abs_diff(&s.u_scalar, &c[s.k - 1].u_scalar)),
            };
            rows.push(MetricsRow {
                k: s.k,
                mode: mode.name().to_string(),
                data_energy: s.energies.data,
                tv_energy: s.energies.tv,
                fidelity: s.energies.fidelity,
                noninteg_count: s.nonintegral_count,
                solver_iters: s.solver_iters,
                wall_ms: ms,
                diff_to_classic: diff,
            });
        }
    }
    rows
}

fn write_iterates(dir: &Path, cfg: &RunConfig, out: &RunOutcome) -> Result<()> {
    for (mode, states) in &out.runs {
        for s in states {
            let img = GrayImage::from_range(&s.u_scalar, cfg.gamma_min, cfg.gamma_max)?;
            write_pgm(&img, &dir.join(format!("{}_k{:03}.pgm", mode.name(), s.k)), 255)?;
        }
    }
    write_metrics(&metrics_rows(out), &dir.join("metrics.csv"))?;
    cfg.manifest().write(&dir.join("manifest.txt"))
}

/// Input image of the ROF experiment.
pub fn rof_input(cfg: &RunConfig) -> Result<Field> {
    match (&cfg.input, cfg.synthetic) {
        (Some(p), false) => read_pgm(p)?.to_field(),
        _ => squares_image(cfg.size, cfg.noise, cfg.seed),
    }
}

pub fn cmd_rof(cfg: &RunConfig) -> Result<RunOutcome> {
    let f = rof_input(cfg)?;
    let space = label_space(cfg)?;
    let problem = BregmanProblem::rof(&f, cfg.lambda, cfg.reg, &space, cfg.subsamples)?;
    let out = run_modes(cfg, &problem)?;
    if let Some(dir) = ensure_out(cfg)? {
        write_pgm(&GrayImage::from_field(&f)?, &dir.join("input.pgm"), 255)?;
        write_iterates(dir, cfg, &out)?;
    }
    Ok(out)
}

pub fn toy_scene(cfg: &RunConfig) -> SyntheticScene {
    let kind = if cfg.reg == TvKind::Isotropic { ShapeKind::Disc } else { ShapeKind::Square };
    SyntheticScene::three_shapes(kind, cfg.size, cfg.shift as f64)
}

/// First step at which each shape's mean interior depth reaches half its height.
pub fn first_detection(scene: &SyntheticScene, grid: PixelGrid, states: &[BregmanState]) -> Vec<Option<usize>> {
    scene
        .shapes
        .iter()
        .map(|shape| {
            let inside: Vec<usize> = (0..grid.len())
                .filter(|&p| {
                    let (r, c) = grid.row_col(p);
                    shape.contains(r, c)
                })
                .collect();
            states.iter().find_map(|s| {
                let mean = inside.iter().map(|&p| s.u_scalar.data()[p]).sum::<f64>() / inside.len() as f64;
                (mean >= 0.5 * shape.height).then_some(s.k)
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ToyOutcome {
    pub scene: SyntheticScene,
    pub pair: StereoPair,
    pub run: RunOutcome,
    /// Per shape, in scene order.
    pub detection: Vec<Option<usize>>,
}

fn lifted_problem<S: liftbreg::CostSampler>(cfg: &RunConfig, sampler: S) -> Result<BregmanProblem> {
    let weighted = Weighted { inner: sampler, weight: cfg.lambda };
    let data = LiftedDataTerm::build(&weighted, &label_space(cfg)?, cfg.subsamples)?;
    Ok(BregmanProblem::lifted(data, cfg.reg))
}

pub fn cmd_stereo_toy(cfg: &RunConfig) -> Result<ToyOutcome> {
    let grid = PixelGrid::new(cfg.size, cfg.size)?;
    let scene = toy_scene(cfg);
    let pair = make_stereo_pair(&scene, grid, cfg.shift, cfg.seed)?;
    let problem = lifted_problem(cfg, stereo_simple_sampler(&pair, cfg.threshold)?)?;
    let run = run_modes(cfg, &problem)?;
    let detection = first_detection(&scene, grid, &run.runs[0].1);
    if let Some(dir) = ensure_out(cfg)? {
        write_pgm(&GrayImage::from_field(&pair.i1)?, &dir.join("i1.pgm"), 255)?;
        write_pgm(&GrayImage::from_field(&pair.i2)?, &dir.join("i2.pgm"), 255)?;
        let truth = make_scene_image(&scene, grid)?;
        write_pgm(&GrayImage::from_range(&truth, cfg.gamma_min, cfg.gamma_max)?, &dir.join("truth.pgm"), 255)?;
        write_iterates(dir, cfg, &run)?;
        let mut csv = String::from("shape,kind,size,height,first_k\n");
        for (i, (s, d)) in scene.shapes.iter().zip(&detection).enumerate() {
            let kind = if s.kind == ShapeKind::Disc { "disc" } else { "square" };
            let k = d.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(csv, "{i},{kind},{},{},{k}", s.size, s.height);
        }
        write_text(&dir.join("scale_order.csv"), &csv)?;
    }
    Ok(ToyOutcome { scene, pair, run, detection })
}

pub fn cmd_stereo_file(cfg: &RunConfig) -> Result<RunOutcome> {
    let (a, b) = match (&cfg.input, &cfg.input2) {
        (Some(a), Some(b)) => (read_pgm(a)?.to_field()?, read_pgm(b)?.to_field()?),
        _ => return Err(Error::Usage("stereo-file needs --in and --in2".into())),
    };
    let pair = StereoPair::new(a, b)?;
    let grid = pair.grid();
    let row = cfg.profile_row.unwrap_or(grid.height / 2);
    if row >= grid.height {
        return Err(Error::Usage(format!("--profile-row {row} outside an image of height {}", grid.height)));
    }
    let problem = lifted_problem(cfg, stereo_patch_sampler(&pair, cfg.threshold, cfg.patch_radius)?)?;
    let run = run_modes(cfg, &problem)?;
    if let Some(dir) = ensure_out(cfg)? {
        write_iterates(dir, cfg, &run)?;
        let mut csv = String::from("mode,k,col,depth\n");
        for (mode, states) in &run.runs {
            for s in states {
                for c in 0..grid.width {
                    let v = s.u_scalar.data()[grid.index(row, c)];
                    let _ = writeln!(csv, "{},{},{c},{}", mode.name(), s.k, liftbreg::imageio::fmt_real(v));
                }
            }
        }
        write_text(&dir.join("profile.csv"), &csv)?;
    }
    Ok(run)
}
