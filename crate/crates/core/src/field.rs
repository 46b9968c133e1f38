//! Pixel grids and the per-pixel vector/matrix fields living on them.
//!
//! Pixels are stored row-major, `p = row * width + col`. The first spatial
//! direction (index 0) runs along columns (`x_2`, the disparity axis), the
//! second (index 1) along rows.

use crate::error::{Error, Result};

/// Number of spatial directions of every dual field.
pub const DIRS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::with_spacing(width, height, 1.0)
    }

    pub fn with_spacing(width: usize, height: usize, spacing: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty grid {width}x{height}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Dimension(format!("invalid grid spacing {spacing}")));
        }
        Ok(PixelGrid {
            width,
            height,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn row_col(&self, p: usize) -> (usize, usize) {
        (p / self.width, p % self.width)
    }

    /// Classical bound on the squared operator norm of the forward-difference gradient.
    pub fn grad_norm_sq_bound(&self) -> f64 {
        8.0 / (self.spacing * self.spacing)
    }
}

/// A field of `channels` reals per pixel. Scalar images have one channel,
/// lifted fields have `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: PixelGrid,
    channels: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: PixelGrid, channels: usize) -> Self {
        Field {
            grid,
            channels,
            data: vec![0.0; grid.len() * channels],
        }
    }

    pub fn constant(grid: PixelGrid, channels: usize, value: f64) -> Self {
        Field {
            grid,
            channels,
            data: vec![value; grid.len() * channels],
        }
    }

    pub fn from_vec(grid: PixelGrid, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || data.len() != grid.len() * channels {
            return Err(Error::Dimension(format!(
                "field of {} values does not fit {}x{} pixels with {} channels",
                data.len(),
                grid.width,
                grid.height,
                channels
            )));
        }
        Ok(Field {
            grid,
            channels,
            data,
        })
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.grid == other.grid && self.channels == other.channels
    }
}

/// Per-pixel `channels x 2` matrices, the dual variable of the (lifted) TV.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField {
    grid: PixelGrid,
    channels: usize,
    data: Vec<f64>,
}

impl DualField {
    pub fn zeros(grid: PixelGrid, channels: usize) -> Self {
        DualField {
            grid,
            channels,
            data: vec![0.0; grid.len() * channels * DIRS],
        }
    }

    pub fn from_vec(grid: PixelGrid, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || data.len() != grid.len() * channels * DIRS {
            return Err(Error::Dimension(format!(
                "dual field of {} values does not fit {} pixels with {} channels",
                data.len(),
                grid.len(),
                channels
            )));
        }
        Ok(DualField {
            grid,
            channels,
            data,
        })
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row-major `channels x 2` block of pixel `p`.
    pub fn pixel(&self, p: usize) -> &[f64] {
        let n = self.channels * DIRS;
        &self.data[p * n..(p + 1) * n]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.channels * DIRS;
        &mut self.data[p * n..(p + 1) * n]
    }

    pub fn get(&self, p: usize, channel: usize, dir: usize) -> f64 {
        self.data[(p * self.channels + channel) * DIRS + dir]
    }

    pub fn set(&mut self, p: usize, channel: usize, dir: usize, value: f64) {
        self.data[(p * self.channels + channel) * DIRS + dir] = value;
    }

    pub fn dot(&self, other: &DualField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}
