//! Label space, sublabel coordinates and the lifting/projection maps between
//! scalar values and lifted vectors in `R^l`.
//!
//! Interval indices are zero-based throughout: interval `i` spans
//! `[labels[i], labels[i + 1]]` and the lifted vector of a value at
//! `(i, alpha)` has `i` leading ones, `alpha` at position `i`, then zeros.

use crate::error::{Error, Result};

/// Default componentwise tolerance for sublabel-integrality.
pub const DEFAULT_INTEGRALITY_EPS: f64 = 1e-3;

/// Ordered labels `gamma_1 < ... < gamma_L` and their interval widths.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSpace {
    labels: Vec<f64>,
    widths: Vec<f64>,
}

/// Position inside the label range: interval index plus fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SublabelCoord {
    pub interval: usize,
    pub alpha: f64,
}

/// Outcome of [`integrality_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrality {
    pub is_integral: bool,
    pub coord: Option<SublabelCoord>,
}

impl LabelSpace {
    pub fn new(labels: Vec<f64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Labels(format!(
                "need at least 2 labels, got {}",
                labels.len()
            )));
        }
        if labels.iter().any(|g| !g.is_finite()) {
            return Err(Error::Labels("labels must be finite".into()));
        }
        let widths: Vec<f64> = labels.windows(2).map(|w| w[1] - w[0]).collect();
        if widths.iter().any(|&w| w <= 0.0) {
            return Err(Error::Labels("labels must be strictly increasing".into()));
        }
        Ok(LabelSpace { labels, widths })
    }

    /// `count` equispaced labels covering `[min, max]`.
    pub fn uniform(min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Labels(format!("need at least 2 labels, got {count}")));
        }
        let step = (max - min) / (count - 1) as f64;
        let mut labels: Vec<f64> = (0..count).map(|k| min + step * k as f64).collect();
        labels[count - 1] = max;
        LabelSpace::new(labels)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Number of sublabel intervals `l = L - 1`, i.e. the lifted dimension.
    pub fn sublabels(&self) -> usize {
        self.widths.len()
    }

    /// Interval widths `gamma_{i+1} - gamma_i`.
    pub fn gamma_tilde(&self) -> &[f64] {
        &self.widths
    }

    pub fn min(&self) -> f64 {
        self.labels[0]
    }

    pub fn max(&self) -> f64 {
        self.labels[self.labels.len() - 1]
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn coord(&self, interval: usize, alpha: f64) -> Result<SublabelCoord> {
        if interval >= self.sublabels() || !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Labels(format!(
                "invalid sublabel coordinate ({interval}, {alpha}) for {} intervals",
                self.sublabels()
            )));
        }
        Ok(SublabelCoord { interval, alpha })
    }

    pub fn value_of(&self, c: SublabelCoord) -> f64 {
        let i = c.interval;
        if c.alpha == 1.0 {
            return self.labels[i + 1];
        }
        self.labels[i] + c.alpha * self.widths[i]
    }

    /// Sublabel coordinate of `t` under the half-open convention
    /// `[gamma_i, gamma_{i+1})`, with the top label mapped to `(l - 1, 1)`.
    pub fn coord_of(&self, t: f64) -> Result<SublabelCoord> {
        if !(t >= self.min() && t <= self.max()) {
            return Err(Error::Range {
                value: t,
                min: self.min(),
                max: self.max(),
            });
        }
        let l = self.sublabels();
        if t == self.max() {
            return Ok(SublabelCoord {
                interval: l - 1,
                alpha: 1.0,
            });
        }
        // first label strictly above t, minus one
        let upper = self.labels.partition_point(|&g| g <= t);
        let i = (upper - 1).min(l - 1);
        let alpha = ((t - self.labels[i]) / self.widths[i]).clamp(0.0, 1.0);
        Ok(SublabelCoord { interval: i, alpha })
    }

    /// The lifted vector `1_i^alpha`.
    pub fn lift_coord(&self, c: SublabelCoord) -> Vec<f64> {
        let mut v = vec![0.0; self.sublabels()];
        lift_coord_into(c, &mut v);
        v
    }

    pub fn lift_scalar(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.lift_coord(self.coord_of(t)?))
    }

    /// `gamma_1 + <u, gamma_tilde>`.
    pub fn project_lifted(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.sublabels());
        self.min()
            + u.iter()
                .zip(&self.widths)
                .map(|(a, w)| a * w)
                .sum::<f64>()
    }

    /// Nearest sublabel-integral vector in label value.
    pub fn round_to_integral(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.sublabels()];
        self.round_to_integral_into(u, &mut out);
        out
    }

    pub fn round_to_integral_into(&self, u: &[f64], out: &mut [f64]) -> SublabelCoord {
        let t = self.project_lifted(u).clamp(self.min(), self.max());
        let t = if t.is_nan() { self.min() } else { t };
        let c = self.coord_of(t).expect("clamped value lies in range");
        lift_coord_into(c, out);
        c
    }
}

/// Writes `1_i^alpha` into `out` (length `l`).
pub fn lift_coord_into(c: SublabelCoord, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = match j.cmp(&c.interval) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => c.alpha,
            std::cmp::Ordering::Greater => 0.0,
        };
    }
}

/// Tests whether `u` lies within componentwise distance `eps` of some `1_i^alpha`.
pub fn integrality_check(u: &[f64], eps: f64) -> Integrality {
    let not_integral = Integrality {
        is_integral: false,
        coord: None,
    };
    if u.is_empty() || u.iter().any(|x| !x.is_finite()) {
        return not_integral;
    }
    let l = u.len();
    let i = u.iter().position(|&x| x < 1.0 - eps).unwrap_or(l - 1);
    let alpha = u[i].clamp(0.0, 1.0);
    let head_ok = u[..i].iter().all(|&x| (x - 1.0).abs() <= eps);
    let tail_ok = u[i + 1..].iter().all(|&x| x.abs() <= eps);
    if head_ok && tail_ok && (u[i] - alpha).abs() <= eps {
        Integrality {
            is_integral: true,
            coord: Some(SublabelCoord { interval: i, alpha }),
        }
    } else {
        not_integral
    }
}

/// Whether `u` lies in the monotone box `1 >= u^1 >= ... >= u^l >= 0` up to `tol`.
pub fn in_monotone_box(u: &[f64], tol: f64) -> bool {
    let mut prev = 1.0;
    for &x in u {
        if !(x <= prev + tol) {
            return false;
        }
        prev = x;
    }
    prev >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thirds() -> LabelSpace {
        LabelSpace::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap()
    }

    fn halves() -> LabelSpace {
        LabelSpace::new(vec![0.0, 0.5, 1.0]).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(LabelSpace::new(vec![0.0]).is_err());
        assert!(LabelSpace::new(vec![0.0, 0.0]).is_err());
        assert!(LabelSpace::new(vec![1.0, 0.0]).is_err());
        assert!(LabelSpace::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn gamma_tilde_sums_to_range() {
        let s = LabelSpace::new(vec![-1.0, 0.2, 0.3, 4.0]).unwrap();
        assert_eq!(s.sublabels(), 3);
        let sum: f64 = s.gamma_tilde().iter().sum();
        assert!((sum - 5.0).abs() < 1e-15);
    }

    #[test]
    fn value_of_examples() {
        let s = thirds();
        assert!((s.value_of(s.coord(1, 0.0).unwrap()) - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.value_of(s.coord(1, 1.0).unwrap()) - 2.0 / 3.0).abs() < 1e-15);
        let h = halves();
        assert!((h.value_of(h.coord(0, 0.5).unwrap()) - 0.25).abs() < 1e-15);
        assert!(s.coord(3, 0.0).is_err());
        assert!(s.coord(0, 1.5).is_err());
    }

    #[test]
    fn value_of_is_continuous_across_boundaries() {
        let s = LabelSpace::new(vec![0.0, 0.1, 0.7, 2.3]).unwrap();
        for i in 0..2 {
            let a = s.value_of(SublabelCoord { interval: i, alpha: 1.0 });
            let b = s.value_of(SublabelCoord { interval: i + 1, alpha: 0.0 });
            assert_eq!(a, b);
            let va = s.lift_coord(SublabelCoord { interval: i, alpha: 1.0 });
            let vb = s.lift_coord(SublabelCoord { interval: i + 1, alpha: 0.0 });
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn lift_scalar_examples() {
        let h = halves();
        assert!(close(&h.lift_scalar(0.5).unwrap(), &[1.0, 0.0]));
        assert!(close(&h.lift_scalar(0.75).unwrap(), &[1.0, 0.5]));
        assert!(close(&thirds().lift_scalar(1.0).unwrap(), &[1.0, 1.0, 1.0]));
        assert!(matches!(h.lift_scalar(1.5), Err(Error::Range { .. })));
        assert!(h.lift_scalar(-0.1).is_err());
        assert!(h.lift_scalar(f64::NAN).is_err());
    }

    #[test]
    fn half_open_convention_at_interior_labels() {
        let h = halves();
        let c = h.coord_of(0.5).unwrap();
        assert_eq!(c, SublabelCoord { interval: 1, alpha: 0.0 });
        let c = h.coord_of(1.0).unwrap();
        assert_eq!(c, SublabelCoord { interval: 1, alpha: 1.0 });
        let c = h.coord_of(0.0).unwrap();
        assert_eq!(c, SublabelCoord { interval: 0, alpha: 0.0 });
    }

    #[test]
    fn project_examples() {
        assert!((thirds().project_lifted(&[1.0, 0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(halves().project_lifted(&[0.0, 0.0]), 0.0);
        assert!((halves().project_lifted(&[1.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrality_examples() {
        let r = integrality_check(&[1.0, 0.3, 0.0], 1e-3);
        assert!(r.is_integral);
        let c = r.coord.unwrap();
        assert_eq!(c.interval, 1);
        assert!((c.alpha - 0.3).abs() < 1e-15);

        let r = integrality_check(&[0.6, 0.5, 0.4], 1e-3);
        assert_eq!(r, Integrality { is_integral: false, coord: None });

        let r = integrality_check(&[1.0, 1.0, 1.0], 1e-3);
        assert_eq!(r.coord, Some(SublabelCoord { interval: 2, alpha: 1.0 }));
    }

    #[test]
    fn integrality_tolerates_noise_and_rejects_nan() {
        let r = integrality_check(&[0.9995, 0.2, 0.0004], 1e-3);
        assert!(r.is_integral);
        assert_eq!(r.coord.unwrap().interval, 1);
        assert!(!integrality_check(&[1.0, f64::NAN], 1e-3).is_integral);
        assert!(!integrality_check(&[1.0, 1.2], 1e-3).is_integral);
    }

    #[test]
    fn round_to_integral_examples() {
        let s = thirds();
        assert!(close(&s.round_to_integral(&[1.0, 0.3, 0.0]), &[1.0, 0.3, 0.0]));
        assert!(close(&s.round_to_integral(&[0.6, 0.5, 0.4]), &[1.0, 0.5, 0.0]));
        assert!(close(&s.round_to_integral(&[2.0, 2.0, 2.0]), &[1.0, 1.0, 1.0]));
        assert!(close(&s.round_to_integral(&[-1.0, 0.0, 0.0]), &[0.0, 0.0, 0.0]));
    }

    #[test]
    fn monotone_box_membership() {
        assert!(in_monotone_box(&[1.0, 0.5, 0.5, 0.0], 0.0));
        assert!(!in_monotone_box(&[0.5, 0.6], 1e-9));
        assert!(!in_monotone_box(&[1.1, 0.0], 1e-9));
        assert!(!in_monotone_box(&[0.5, -0.1], 1e-9));
    }
}
