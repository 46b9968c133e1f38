//! Forward-difference gradient, its adjoint, the lifted TV and the dual
//! constraint sets `K_iso` / `K_an`.

use crate::error::{Error, Result};
use crate::field::{DualField, Field, PixelGrid, DIRS};
use crate::labels::LabelSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TvKind {
    /// Row-wise Euclidean coupling of the two directions.
    Isotropic,
    /// Directions decoupled (`L1` TV).
    Anisotropic,
}

impl TvKind {
    pub fn name(self) -> &'static str {
        match self {
            TvKind::Isotropic => "iso",
            TvKind::Anisotropic => "aniso",
        }
    }
}

impl std::str::FromStr for TvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iso" | "isotropic" => Ok(TvKind::Isotropic),
            "aniso" | "anisotropic" => Ok(TvKind::Anisotropic),
            other => Err(Error::Usage(format!("unknown regularizer '{other}'"))),
        }
    }
}

/// Dual feasible set: per channel `i`, rows bounded by `radii[i]` in the
/// `L2` (isotropic) or `L_inf` (anisotropic) norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    pub kind: TvKind,
    radii: Vec<f64>,
}

impl ConstraintSet {
    pub fn new(kind: TvKind, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Dimension(
                "constraint radii must be positive and finite".into(),
            ));
        }
        Ok(ConstraintSet { kind, radii })
    }

    /// The lifted TV set with radii `gamma_tilde`.
    pub fn lifted(kind: TvKind, space: &LabelSpace) -> Self {
        ConstraintSet {
            kind,
            radii: space.gamma_tilde().to_vec(),
        }
    }

    /// Unit-radius set of the scalar TV.
    pub fn scalar(kind: TvKind) -> Self {
        ConstraintSet {
            kind,
            radii: vec![1.0],
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn channels(&self) -> usize {
        self.radii.len()
    }

    /// Projects one `channels x 2` pixel block in place.
    #[inline]
    pub fn project_pixel(&self, block: &mut [f64]) {
        match self.kind {
            TvKind::Isotropic => {
                for (row, &r) in block.chunks_exact_mut(DIRS).zip(&self.radii) {
                    let n = (row[0] * row[0] + row[1] * row[1]).sqrt();
                    if n > r {
                        let s = r / n;
                        row[0] *= s;
                        row[1] *= s;
                    }
                }
            }
            TvKind::Anisotropic => {
                for (row, &r) in block.chunks_exact_mut(DIRS).zip(&self.radii) {
                    row[0] = row[0].clamp(-r, r);
                    row[1] = row[1].clamp(-r, r);
                }
            }
        }
    }

    /// Whether a pixel block lies in the set up to `tol`.
    pub fn contains_pixel(&self, block: &[f64], tol: f64) -> bool {
        block
            .chunks_exact(DIRS)
            .zip(&self.radii)
            .all(|(row, &r)| match self.kind {
                TvKind::Isotropic => (row[0] * row[0] + row[1] * row[1]).sqrt() <= r + tol,
                TvKind::Anisotropic => row[0].abs() <= r + tol && row[1].abs() <= r + tol,
            })
    }
}

/// Forward differences divided by `h`, zero across the last row/column.
pub fn grad(u: &Field) -> DualField {
    let mut g = DualField::zeros(u.grid(), u.channels());
    grad_into(u, &mut g);
    g
}

pub fn grad_into(u: &Field, out: &mut DualField) {
    let grid = u.grid();
    let ch = u.channels();
    let inv_h = 1.0 / grid.spacing;
    let (w, h) = (grid.width, grid.height);
    let src = u.data();
    let dst = out.data_mut();
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let base = p * ch;
            for i in 0..ch {
                let v = src[base + i];
                let dx = if c + 1 < w { src[base + ch + i] - v } else { 0.0 };
                let dy = if r + 1 < h { src[base + w * ch + i] - v } else { 0.0 };
                let o = (base + i) * DIRS;
                dst[o] = dx * inv_h;
                dst[o + 1] = dy * inv_h;
            }
        }
    }
}

/// `grad^T q`, the exact adjoint of [`grad`].
pub fn div_adjoint(q: &DualField) -> Field {
    let mut out = Field::zeros(q.grid(), q.channels());
    div_adjoint_into(q, &mut out);
    out
}

pub fn div_adjoint_into(q: &DualField, out: &mut Field) {
    let grid = q.grid();
    let ch = q.channels();
    let inv_h = 1.0 / grid.spacing;
    let (w, h) = (grid.width, grid.height);
    let src = q.data();
    let dst = out.data_mut();
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            for i in 0..ch {
                let o = (p * ch + i) * DIRS;
                let mut acc = 0.0;
                if c + 1 < w {
                    acc -= src[o];
                }
                if c > 0 {
                    acc += src[o - ch * DIRS];
                }
                if r + 1 < h {
                    acc -= src[o + 1];
                }
                if r > 0 {
                    acc += src[o + 1 - w * ch * DIRS];
                }
                dst[p * ch + i] = acc * inv_h;
            }
        }
    }
}

pub fn project_k(q: &DualField, set: &ConstraintSet) -> Result<DualField> {
    let mut out = q.clone();
    project_k_in_place(&mut out, set)?;
    Ok(out)
}

pub fn project_k_in_place(q: &mut DualField, set: &ConstraintSet) -> Result<()> {
    if q.channels() != set.channels() {
        return Err(Error::Dimension(format!(
            "dual field has {} channels, constraint set {}",
            q.channels(),
            set.channels()
        )));
    }
    for block in q.data_mut().chunks_exact_mut(set.channels() * DIRS) {
        set.project_pixel(block);
    }
    Ok(())
}

/// Closed-form support function `max_{q in K} <q, grad u>`.
pub fn lifted_tv(u: &Field, set: &ConstraintSet) -> Result<f64> {
    if u.channels() != set.channels() {
        return Err(Error::Dimension(format!(
            "field has {} channels, constraint set {}",
            u.channels(),
            set.channels()
        )));
    }
    let g = grad(u);
    Ok(tv_of_gradient(&g, set))
}

pub(crate) fn tv_of_gradient(g: &DualField, set: &ConstraintSet) -> f64 {
    let mut total = 0.0;
    for block in g.data().chunks_exact(set.channels() * DIRS) {
        for (row, &r) in block.chunks_exact(DIRS).zip(set.radii()) {
            total += r * match set.kind {
                TvKind::Isotropic => (row[0] * row[0] + row[1] * row[1]).sqrt(),
                TvKind::Anisotropic => row[0].abs() + row[1].abs(),
            };
        }
    }
    total
}

pub fn scalar_tv(u: &Field, kind: TvKind) -> Result<f64> {
    if u.channels() != 1 {
        return Err(Error::Dimension(format!(
            "scalar TV of a {}-channel field",
            u.channels()
        )));
    }
    lifted_tv(u, &ConstraintSet::scalar(kind))
}

/// Pixel grid helper for tests and examples: scalar field from rows.
pub fn scalar_field_from_rows(rows: &[&[f64]]) -> Result<Field> {
    let height = rows.len();
    let width = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension("ragged rows".into()));
    }
    let grid = PixelGrid::new(width, height)?;
    Field::from_vec(grid, 1, rows.concat())
}
