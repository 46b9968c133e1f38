//! Fixtures shared by the benchmarks.

use liftbreg::problems::{rof_sampler, squares_image};
use liftbreg::{CostSampler, LabelSpace, LiftedDataTerm, PixelGrid, Result};

/// One-pixel cost with several local minima on `[0, 1]`.
pub struct Wiggly;

impl CostSampler for Wiggly {
    fn grid(&self) -> PixelGrid {
        PixelGrid::new(1, 1).unwrap()
    }

    fn cost(&self, _: usize, t: f64) -> f64 {
        (9.0 * t).sin().abs() + 0.5 * (t - 0.3).powi(2)
    }
}

pub fn wiggly_term(labels: usize, subsamples: usize) -> Result<LiftedDataTerm> {
    LiftedDataTerm::build(&Wiggly, &LabelSpace::uniform(0.0, 1.0, labels)?, subsamples)
}

/// Lifted ROF data term on the noisy squares image.
pub fn rof_term(size: usize, labels: usize, subsamples: usize) -> Result<LiftedDataTerm> {
    let f = squares_image(size, 0.1, 1)?;
    LiftedDataTerm::build(&rof_sampler(&f, 20.0)?, &LabelSpace::uniform(0.0, 1.0, labels)?, subsamples)
}
