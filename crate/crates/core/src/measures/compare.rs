use serde::{Deserialize, Serialize};

use super::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::sphere::Cx;

/// Axis-aligned rectangle `[re_min, re_max] x [im_min, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) {
            return Err(Error::Precondition("window must have positive width and height".into()));
        }
        Ok(Window {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    /// Square `[-r, r]^2`.
    pub fn centered(r: f64) -> Self {
        Window {
            re_min: -r,
            re_max: r,
            im_min: -r,
            im_max: r,
        }
    }

    pub fn contains(&self, z: Cx) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Grid cell of `z` on a `bins x bins` subdivision, row-major with the real part fastest.
    pub fn cell(&self, z: Cx, bins: usize) -> usize {
        let fx = (z.re - self.re_min) / (self.re_max - self.re_min);
        let fy = (z.im - self.im_min) / (self.im_max - self.im_min);
        let ix = ((fx * bins as f64) as usize).min(bins - 1);
        let iy = ((fy * bins as f64) as usize).min(bins - 1);
        iy * bins + ix
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub bins: usize,
    pub tv_distance: f64,
    /// Smallest density ratio `a/b` over bins above the shot-noise floor; `None` if no bin qualifies.
    pub ratio_low: Option<f64>,
    pub ratio_high: Option<f64>,
    /// Bins above the floor in both measures.
    pub occupied_bins: usize,
    pub samples_a: usize,
    pub samples_b: usize,
}

impl ComparabilityReport {
    /// `ratio_high / ratio_low`, the empirical comparability constant squared.
    pub fn spread(&self) -> Option<f64> {
        Some(self.ratio_high? / self.ratio_low?)
    }
}

/// Minimum number of samples each measure must place in the window.
pub const MIN_WINDOW_SAMPLES: usize = 1000;
/// Expected count below which a bin is treated as shot noise.
pub const FLOOR_COUNT: f64 = 10.0;

fn histogram(mu: &EmpiricalMeasure, window: &Window, bins: usize) -> (Vec<f64>, usize) {
    let mut h = vec![0.0; bins * bins];
    let mut count = 0;
    for (z, w) in mu.points.iter().zip(&mu.weights) {
        if window.contains(*z) {
            h[window.cell(*z, bins)] += w;
            count += 1;
        }
    }
    let total: f64 = super::neumaier_sum(h.iter().copied());
    if total > 0.0 {
        for v in &mut h {
            *v /= total;
        }
    }
    (h, count)
}

/// Binned total variation and density-ratio bounds of two measures restricted to `window`.
pub fn measure_compare(a: &EmpiricalMeasure, b: &EmpiricalMeasure, window: &Window, bins: usize) -> Result<ComparabilityReport> {
    if bins == 0 {
        return Err(Error::Precondition("bins must be positive".into()));
    }
    let (ha, na) = histogram(a, window, bins);
    let (hb, nb) = histogram(b, window, bins);
    if na == 0 || nb == 0 {
        return Err(Error::EmptyWindow);
    }
    if na < MIN_WINDOW_SAMPLES || nb < MIN_WINDOW_SAMPLES {
        return Err(Error::Precondition(format!(
            "window holds {na} and {nb} samples; at least {MIN_WINDOW_SAMPLES} each are needed"
        )));
    }
    let tv_distance = 0.5 * super::neumaier_sum(ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()));
    let (floor_a, floor_b) = (FLOOR_COUNT / na as f64, FLOOR_COUNT / nb as f64);
    let mut low: Option<f64> = None;
    let mut high: Option<f64> = None;
    let mut occupied = 0;
    for (x, y) in ha.iter().zip(&hb) {
        if *x > floor_a && *y > floor_b {
            occupied += 1;
            let r = x / y;
            low = Some(low.map_or(r, |l| l.min(r)));
            high = Some(high.map_or(r, |h| h.max(r)));
        }
    }
    Ok(ComparabilityReport {
        bins,
        tv_distance: tv_distance.clamp(0.0, 1.0),
        ratio_low: low,
        ratio_high: high,
        occupied_bins: occupied,
        samples_a: na,
        samples_b: nb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluable::FnMap;
    use crate::measures::{chain_rng, pushforward_measure, Provenance};
    use rand::Rng;
    use std::f64::consts::TAU;

    fn random_circle(n: usize, seed: u64) -> EmpiricalMeasure {
        let mut rng = chain_rng(seed, 0);
        let pts = (0..n).map(|_| Cx::from_polar(1.0, rng.gen_range(0.0..TAU))).collect();
        EmpiricalMeasure::uniform(pts, seed, Provenance::External)
    }

    #[test]
    fn identical_measures() {
        let mu = random_circle(20_000, 1);
        let r = measure_compare(&mu, &mu, &Window::centered(1.5), 16).unwrap();
        assert_eq!(r.tv_distance, 0.0);
        assert_eq!(r.ratio_low, Some(1.0));
        assert_eq!(r.ratio_high, Some(1.0));
        assert!(r.occupied_bins > 0);
    }

    #[test]
    fn swap_symmetry() {
        let a = random_circle(20_000, 1);
        let b = random_circle(30_000, 2);
        let w = Window::centered(1.2);
        let ab = measure_compare(&a, &b, &w, 12).unwrap();
        let ba = measure_compare(&b, &a, &w, 12).unwrap();
        assert!((ab.tv_distance - ba.tv_distance).abs() < 1e-15);
        assert!((ab.ratio_low.unwrap() - 1.0 / ba.ratio_high.unwrap()).abs() < 1e-12);
        assert!((ab.ratio_high.unwrap() - 1.0 / ba.ratio_low.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn uniform_versus_arcsine_is_detected() {
        // uniform law on [-2, 2] against its arcsine image 2 cos(theta)
        let mut rng = chain_rng(4, 0);
        let n = 200_000;
        let flat: Vec<Cx> = (0..n).map(|_| Cx::new(rng.gen_range(-2.0..2.0), 0.0)).collect();
        let flat = EmpiricalMeasure::uniform(flat, 4, Provenance::External);
        let joukowski = FnMap(|z: Cx| z + z.inv());
        let arcsine = pushforward_measure(&joukowski, &random_circle(n, 5)).unwrap();
        let w = Window::new(-2.0, 2.0, -0.5, 0.5).unwrap();
        let r = measure_compare(&flat, &arcsine, &w, 32).unwrap();
        assert!(r.spread().unwrap() > 3.0, "{r:?}");
    }

    #[test]
    fn empty_and_thin_windows() {
        let mu = random_circle(5000, 1);
        let far = Window::new(10.0, 11.0, 10.0, 11.0).unwrap();
        assert!(matches!(measure_compare(&mu, &mu, &far, 8), Err(Error::EmptyWindow)));
        let corner = Window::new(0.99, 1.01, -0.01, 0.01).unwrap();
        assert!(matches!(measure_compare(&mu, &mu, &corner, 8), Err(Error::Precondition(_))));
    }
}
