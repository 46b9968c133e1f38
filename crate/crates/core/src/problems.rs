//! Cost samplers for the ROF and stereo models, and synthetic scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataterm::CostSampler;
use crate::error::{Error, Result};
use crate::field::{Field, PixelGrid};

/// `rho(x, t) = lambda/2 (t - f(x))^2`.
#[derive(Clone, Debug)]
pub struct RofSampler {
    f: Field,
    lambda: f64,
}

pub fn rof_sampler(f: &Field, lambda: f64) -> Result<RofSampler> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Usage(format!("lambda must be positive, got {lambda}")));
    }
    if f.channels() != 1 {
        return Err(Error::Dimension("ROF datum must be a scalar image".into()));
    }
    if let Some(p) = f.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Data {
            pixel: p,
            msg: "non-finite image value".into(),
        });
    }
    Ok(RofSampler {
        f: f.clone(),
        lambda,
    })
}

impl CostSampler for RofSampler {
    fn grid(&self) -> PixelGrid {
        self.f.grid()
    }

    fn cost(&self, pixel: usize, t: f64) -> f64 {
        let d = t - self.f.data()[pixel];
        0.5 * self.lambda * d * d
    }
}

/// Multiplies another sampler's cost by a constant weight.
#[derive(Clone, Debug)]
pub struct Weighted<S> {
    pub inner: S,
    pub weight: f64,
}

impl<S: CostSampler> CostSampler for Weighted<S> {
    fn grid(&self) -> PixelGrid {
        self.inner.grid()
    }

    fn cost(&self, pixel: usize, t: f64) -> f64 {
        self.weight * self.inner.cost(pixel, t)
    }
}

/// Rectified grayscale pair; disparities run along the column axis.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoPair {
    pub i1: Field,
    pub i2: Field,
}

impl StereoPair {
    pub fn new(i1: Field, i2: Field) -> Result<Self> {
        if !i1.same_shape(&i2) || i1.channels() != 1 {
            return Err(Error::Dimension("stereo images must be scalar and equally sized".into()));
        }
        for img in [&i1, &i2] {
            if let Some(p) = img.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data {
                    pixel: p,
                    msg: "intensity outside [0, 1]".into(),
                });
            }
        }
        Ok(StereoPair { i1, i2 })
    }

    pub fn grid(&self) -> PixelGrid {
        self.i1.grid()
    }
}

/// Linear interpolation along a row at fractional column `c`, replicating
/// the border.
#[inline]
fn sample_row(row: &[f64], c: f64) -> f64 {
    let last = (row.len() - 1) as f64;
    let c = c.clamp(0.0, last);
    let c0 = c.floor();
    let frac = c - c0;
    let i = c0 as usize;
    if frac == 0.0 || i + 1 >= row.len() {
        row[i]
    } else {
        row[i] * (1.0 - frac) + row[i + 1] * frac
    }
}

/// `rho(x, t) = min(tau, |I1(x_1, x_2 + t) - I2(x)|)`.
#[derive(Clone, Debug)]
pub struct StereoSimpleSampler {
    pair: StereoPair,
    tau: f64,
}

pub fn stereo_simple_sampler(pair: &StereoPair, tau_thresh: f64) -> Result<StereoSimpleSampler> {
    if !(tau_thresh > 0.0 && tau_thresh.is_finite()) {
        return Err(Error::Usage(format!("threshold must be positive, got {tau_thresh}")));
    }
    Ok(StereoSimpleSampler {
        pair: pair.clone(),
        tau: tau_thresh,
    })
}

impl CostSampler for StereoSimpleSampler {
    fn grid(&self) -> PixelGrid {
        self.pair.grid()
    }

    fn cost(&self, pixel: usize, t: f64) -> f64 {
        let grid = self.grid();
        let (r, c) = grid.row_col(pixel);
        let row = &self.pair.i1.data()[r * grid.width..(r + 1) * grid.width];
        let a = sample_row(row, c as f64 + t);
        (a - self.pair.i2.data()[pixel]).abs().min(self.tau)
    }
}

/// Window sum of truncated absolute gradient differences.
#[derive(Clone, Debug)]
pub struct StereoPatchSampler {
    grid: PixelGrid,
    /// Forward-difference gradients, one field per direction.
    g1: [Vec<f64>; 2],
    g2: [Vec<f64>; 2],
    tau: f64,
    radius: usize,
}

fn forward_gradients(img: &Field) -> [Vec<f64>; 2] {
    let grid = img.grid();
    let (w, h) = (grid.width, grid.height);
    let d = img.data();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            if c + 1 < w {
                gx[p] = (d[p + 1] - d[p]) / grid.spacing;
            }
            if r + 1 < h {
                gy[p] = (d[p + w] - d[p]) / grid.spacing;
            }
        }
    }
    [gx, gy]
}

pub fn stereo_patch_sampler(
    pair: &StereoPair,
    tau_thresh: f64,
    patch_radius: usize,
) -> Result<StereoPatchSampler> {
    if !(tau_thresh > 0.0 && tau_thresh.is_finite()) {
        return Err(Error::Usage(format!("threshold must be positive, got {tau_thresh}")));
    }
    Ok(StereoPatchSampler {
        grid: pair.grid(),
        g1: forward_gradients(&pair.i1),
        g2: forward_gradients(&pair.i2),
        tau: tau_thresh,
        radius: patch_radius,
    })
}

impl StereoPatchSampler {
    pub fn saturation_bound(&self) -> f64 {
        let side = (2 * self.radius + 1) as f64;
        side * side * 2.0 * self.tau
    }
}

impl CostSampler for StereoPatchSampler {
    fn grid(&self) -> PixelGrid {
        self.grid
    }

    fn cost(&self, pixel: usize, t: f64) -> f64 {
        let (w, h) = (self.grid.width, self.grid.height);
        let (r, c) = self.grid.row_col(pixel);
        let rad = self.radius as isize;
        let mut total = 0.0;
        for dr in -rad..=rad {
            let yr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
            for dc in -rad..=rad {
                let yc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                let q = yr * w + yc;
                for j in 0..2 {
                    let row = &self.g1[j][yr * w..(yr + 1) * w];
                    let a = sample_row(row, yc as f64 + t);
                    total += (a - self.g2[j][q]).abs().min(self.tau);
                }
            }
        }
        total
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Disc,
    Square,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    /// `(row, col)` in pixels.
    pub center: (f64, f64),
    /// Radius of a disc or half-side of a square.
    pub size: f64,
    pub height: f64,
}

impl Shape {
    /// Pixel membership: discs by center distance, squares as the half-open
    /// box `[center - size, center + size)` in both coordinates.
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let dr = row as f64 - self.center.0;
        let dc = col as f64 - self.center.1;
        match self.kind {
            ShapeKind::Disc => dr * dr + dc * dc <= self.size * self.size,
            ShapeKind::Square => {
                (-self.size..self.size).contains(&dr) && (-self.size..self.size).contains(&dc)
            }
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let (r, c) = self.center;
        (r - self.size, r + self.size, c - self.size, c + self.size)
    }

    fn disjoint(&self, other: &Shape) -> bool {
        if self.kind == ShapeKind::Disc && other.kind == ShapeKind::Disc {
            let dr = self.center.0 - other.center.0;
            let dc = self.center.1 - other.center.1;
            return (dr * dr + dc * dc).sqrt() > self.size + other.size;
        }
        let a = self.bounds();
        let b = other.bounds();
        a.1 <= b.0 || b.1 <= a.0 || a.3 <= b.2 || b.3 <= a.2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub shapes: Vec<Shape>,
    pub background: f64,
}

impl SyntheticScene {
    pub fn validate(&self, grid: PixelGrid) -> Result<()> {
        for (a, s) in self.shapes.iter().enumerate() {
            if !(s.size > 0.0) || !s.height.is_finite() {
                return Err(Error::Scene(format!("shape {a} has invalid size or height")));
            }
            let (r0, r1, c0, c1) = s.bounds();
            if r0 < 0.0 || c0 < 0.0 || r1 > grid.height as f64 || c1 > grid.width as f64 {
                return Err(Error::Scene(format!("shape {a} does not fit the grid")));
            }
            for (b, t) in self.shapes.iter().enumerate().skip(a + 1) {
                if !s.disjoint(t) {
                    return Err(Error::Scene(format!("shapes {a} and {b} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Index of the shape covering a pixel, if any.
    pub fn shape_at(&self, row: usize, col: usize) -> Option<usize> {
        self.shapes.iter().position(|s| s.contains(row, col))
    }

    /// Three shapes of decreasing size on a `size x size` grid; discs
    /// (radii 12, 8, 5 at size 64) or squares with the same half-sides.
    pub fn three_shapes(kind: ShapeKind, grid_size: usize, height: f64) -> SyntheticScene {
        let s = grid_size as f64 / 64.0;
        let layout = [((18.0, 18.0), 12.0), ((20.0, 46.0), 8.0), ((46.0, 32.0), 5.0)];
        SyntheticScene {
            shapes: layout
                .iter()
                .map(|&((r, c), size)| Shape {
                    kind,
                    center: (r * s, c * s),
                    size: size * s,
                    height,
                })
                .collect(),
            background: 0.0,
        }
    }
}

/// Noisy squares test image in `[0, 1]`: a 3x3 arrangement of squares with
/// half-side `size / 8` and seeded heights in `[0, 0.8)` over a background
/// of 0.1, plus seeded uniform noise of amplitude `noise`, clamped.
pub fn squares_image(size: usize, noise: f64, seed: u64) -> Result<Field> {
    if size < 8 {
        return Err(Error::Scene(format!("squares image needs at least 8x8 pixels, got {size}")));
    }
    let grid = PixelGrid::new(size, size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = size as f64 / 3.0;
    let mut shapes = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 0..3 {
            shapes.push(Shape {
                kind: ShapeKind::Square,
                center: ((a as f64 + 0.5) * cell, (b as f64 + 0.5) * cell),
                size: size as f64 / 8.0,
                height: rng.gen_range(0.0..0.8),
            });
        }
    }
    let scene = SyntheticScene {
        shapes,
        background: 0.1,
    };
    let mut img = make_scene_image(&scene, grid)?;
    if noise > 0.0 {
        for v in img.data_mut() {
            *v = (*v + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0);
        }
    }
    Ok(img)
}

/// Noise amplitude of the default squares image.
pub const SQUARES_NOISE: f64 = 0.2;

pub fn make_scene_image(scene: &SyntheticScene, grid: PixelGrid) -> Result<Field> {
    scene.validate(grid)?;
    let mut img = Field::constant(grid, 1, scene.background);
    for r in 0..grid.height {
        for c in 0..grid.width {
            if let Some(s) = scene.shape_at(r, c) {
                img.data_mut()[grid.index(r, c)] = scene.background + scene.shapes[s].height;
            }
        }
    }
    Ok(img)
}

/// Seeded value noise: uniform values on a lattice of the given cell size,
/// smoothly interpolated, summed over two octaves and rescaled to `[0, 1]`.
pub fn smooth_texture(height: usize, width: usize, cell: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; height * width];
    for (octave, amp) in [(cell.max(1), 1.0), ((cell / 2).max(1), 0.5)] {
        let lh = height / octave + 2;
        let lw = width / octave + 2;
        let lattice: Vec<f64> = (0..lh * lw).map(|_| rng.gen::<f64>()).collect();
        for r in 0..height {
            let fr = r as f64 / octave as f64;
            let r0 = fr.floor() as usize;
            let sr = smoothstep(fr - r0 as f64);
            for c in 0..width {
                let fc = c as f64 / octave as f64;
                let c0 = fc.floor() as usize;
                let sc = smoothstep(fc - c0 as f64);
                let v00 = lattice[r0 * lw + c0];
                let v01 = lattice[r0 * lw + c0 + 1];
                let v10 = lattice[(r0 + 1) * lw + c0];
                let v11 = lattice[(r0 + 1) * lw + c0 + 1];
                let top = v00 + (v01 - v00) * sc;
                let bot = v10 + (v11 - v10) * sc;
                out[r * width + c] += amp * (top + (bot - top) * sr);
            }
        }
    }
    let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    out.iter_mut().for_each(|v| *v = (*v - lo) / span);
    out
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Texture cell size of generated stereo pairs.
pub const TEXTURE_CELL: usize = 3;

/// `I2` is the texture; `I1` equals it except inside the shapes, where its
/// content is moved `shift` pixels along the columns. The shapes stay put.
pub fn make_stereo_pair(
    scene: &SyntheticScene,
    grid: PixelGrid,
    shift: usize,
    texture_seed: u64,
) -> Result<StereoPair> {
    scene.validate(grid)?;
    let (w, h) = (grid.width, grid.height);
    let tw = w + shift;
    let tex = smooth_texture(h, tw, TEXTURE_CELL, texture_seed);
    // texture column c lives at tex column c + shift
    let t = |r: usize, c: isize| tex[r * tw + (c + shift as isize) as usize];
    let mut i1 = Field::zeros(grid, 1);
    let mut i2 = Field::zeros(grid, 1);
    for r in 0..h {
        for c in 0..w {
            let p = grid.index(r, c);
            i2.data_mut()[p] = t(r, c as isize);
            i1.data_mut()[p] = if scene.shape_at(r, c).is_some() {
                t(r, c as isize - shift as isize)
            } else {
                t(r, c as isize)
            };
        }
    }
    StereoPair::new(i1, i2)
}
