#![allow(dead_code)]

use liftbreg::{CostSampler, PixelGrid};
use rand::Rng;

/// Cost given by a closure of `(pixel, t)`.
pub struct FnSampler<F>(pub PixelGrid, pub F);

impl<F: Fn(usize, f64) -> f64> CostSampler for FnSampler<F> {
    fn grid(&self) -> PixelGrid {
        self.0
    }

    fn cost(&self, pixel: usize, t: f64) -> f64 {
        (self.1)(pixel, t)
    }
}

/// Piecewise-linear function through `(x_k, y_k)`, constant outside.
#[derive(Clone, Debug)]
pub struct Pl {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Pl {
    pub fn random<R: Rng>(rng: &mut R, lo: f64, hi: f64, knots: usize, scale: f64) -> Self {
        let xs: Vec<f64> = (0..knots).map(|k| lo + (hi - lo) * k as f64 / (knots - 1) as f64).collect();
        let ys = (0..knots).map(|_| rng.gen_range(0.0..scale)).collect();
        Pl { xs, ys }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.xs.len();
        if t <= self.xs[0] {
            return self.ys[0];
        }
        for k in 1..n {
            if t <= self.xs[k] {
                let w = (t - self.xs[k - 1]) / (self.xs[k] - self.xs[k - 1]);
                return self.ys[k - 1] * (1.0 - w) + self.ys[k] * w;
            }
        }
        self.ys[n - 1]
    }
}

/// Uniform point of the monotone box `1 >= u^1 >= ... >= u^l >= 0`.
pub fn random_box_point<R: Rng>(rng: &mut R, l: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..1.0)).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    u
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
