use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::green::{default_escape_radius, gradient_unchecked, green_and_gradient, green_unchecked};
use super::{chain_rng, EmpiricalMeasure, Provenance};
use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::sphere::Cx;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkOptions {
    /// Fraction of the distance bound used as the jump radius.
    pub alpha: f64,
    pub max_steps: usize,
    /// Largest tolerated fraction of discarded walks.
    pub max_discard: f64,
    /// Iteration cap for each Green's function evaluation.
    pub green_iterations: usize,
    /// Use central differences for `|grad G|` instead of the orbit derivative.
    pub finite_difference: bool,
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions {
            alpha: 0.9,
            max_steps: 100_000,
            max_discard: 0.01,
            green_iterations: 2000,
            finite_difference: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub walks: usize,
    pub discarded: usize,
    /// Visited points where the Green's function was not positive.
    pub crossings: usize,
    pub total_steps: usize,
    /// Exact jumps from outside the teleport circle back onto it.
    pub teleports: usize,
}

enum WalkEnd {
    Exit(Cx),
    Discarded,
}

struct WalkRecord {
    end: WalkEnd,
    steps: usize,
    crossings: usize,
    teleports: usize,
}

/// Harmonic measure of the basin of infinity seen from `z_start`, by walk-on-spheres.
pub fn brownian_exit_measure(
    f: &RationalMap,
    z_start: Cx,
    n_walks: usize,
    eps_stop: f64,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    brownian_exit_measure_with_stats(f, z_start, n_walks, eps_stop, seed, &WalkOptions::default()).map(|(m, _)| m)
}

/// As [`brownian_exit_measure`], also returning discard and step counts.
///
/// Far from the filled Julia set a walk is moved exactly: outside the circle of
/// radius `2 R_esc` the first hitting point on that circle follows the exterior
/// Poisson kernel, a wrapped Cauchy law in the angle.
pub fn brownian_exit_measure_with_stats(
    f: &RationalMap,
    z_start: Cx,
    n_walks: usize,
    eps_stop: f64,
    seed: u64,
    opts: &WalkOptions,
) -> Result<(EmpiricalMeasure, WalkStats)> {
    if !f.is_polynomial() || f.degree < 2 {
        return Err(Error::Precondition("walk-on-spheres needs a polynomial of degree at least 2".into()));
    }
    if !(eps_stop > 0.0) {
        return Err(Error::Precondition("eps_stop must be positive".into()));
    }
    let r_esc = default_escape_radius(f);
    if green_unchecked(f, z_start, opts.green_iterations, r_esc).value <= 0.0 {
        return Err(Error::Precondition(format!("start point {z_start} is not outside the filled Julia set")));
    }
    let r_tel = 2.0 * r_esc;
    let records: Vec<WalkRecord> = (0..n_walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i as u64);
            walk(f, z_start, eps_stop, r_esc, r_tel, opts, &mut rng)
        })
        .collect();
    let mut stats = WalkStats {
        walks: n_walks,
        ..Default::default()
    };
    let mut points = Vec::with_capacity(n_walks);
    for r in records {
        stats.total_steps += r.steps;
        stats.crossings += r.crossings;
        stats.teleports += r.teleports;
        match r.end {
            WalkEnd::Exit(z) => points.push(z),
            WalkEnd::Discarded => stats.discarded += 1,
        }
    }
    if stats.discarded as f64 > opts.max_discard * n_walks as f64 {
        return Err(Error::TooManyDiscarded {
            discarded: stats.discarded,
            total: n_walks,
        });
    }
    if points.is_empty() {
        return Err(Error::TooManyDiscarded {
            discarded: stats.discarded,
            total: n_walks,
        });
    }
    Ok((EmpiricalMeasure::uniform(points, seed, Provenance::BrownianExit), stats))
}

fn walk<R: Rng>(f: &RationalMap, start: Cx, eps_stop: f64, r_esc: f64, r_tel: f64, opts: &WalkOptions, rng: &mut R) -> WalkRecord {
    let mut w = start;
    let mut crossings = 0;
    let mut teleports = 0;
    for steps in 0..opts.max_steps {
        let r = w.norm();
        if r > r_tel {
            w = hitting_point(w, r_tel, rng);
            teleports += 1;
            continue;
        }
        let (g, grad) = if opts.finite_difference {
            let g = green_unchecked(f, w, opts.green_iterations, r_esc).value;
            (g, gradient_unchecked(f, w, opts.green_iterations, r_esc))
        } else {
            green_and_gradient(f, w, opts.green_iterations, r_esc)
        };
        if g <= 0.0 {
            crossings += 1;
            return WalkRecord {
                end: WalkEnd::Exit(w),
                steps,
                crossings,
                teleports,
            };
        }
        let dist = distance_bound(g, grad);
        if dist < eps_stop {
            return WalkRecord {
                end: WalkEnd::Exit(w),
                steps,
                crossings,
                teleports,
            };
        }
        let t: f64 = rng.gen_range(0.0..TAU);
        w += Cx::from_polar(opts.alpha * dist, t);
    }
    WalkRecord {
        end: WalkEnd::Discarded,
        steps: opts.max_steps,
        crossings,
        teleports,
    }
}

/// Lower bound `sinh G / (2 e^G |grad G|)` for the distance to the Julia set.
pub(crate) fn distance_bound(g: f64, grad: f64) -> f64 {
    if grad <= 0.0 || !grad.is_finite() {
        return 0.0;
    }
    // sinh(g) / (2 e^g) = (1 - e^{-2g}) / 4
    -(-2.0 * g).exp_m1() / (4.0 * grad)
}

/// First hitting point on `|z| = radius` of planar Brownian motion from `w` outside.
fn hitting_point<R: Rng>(w: Cx, radius: f64, rng: &mut R) -> Cx {
    let rho = radius / w.norm();
    let u: f64 = rng.gen_range(0.0..1.0);
    let spread = ((1.0 - rho) / (1.0 + rho)) * (PI * (u - 0.5)).tan();
    Cx::from_polar(radius, w.arg() + 2.0 * spread.atan())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle_bins(mu: &EmpiricalMeasure, bins: usize) -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for (z, w) in mu.points.iter().zip(&mu.weights) {
            let t = z.arg().rem_euclid(TAU) / TAU;
            h[((t * bins as f64) as usize).min(bins - 1)] += w;
        }
        h
    }

    fn tv(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    /// Mass of the exterior Poisson kernel for the unit disk seen from `x > 1` on each bin.
    fn poisson_bins(x: f64, bins: usize) -> Vec<f64> {
        // antiderivative of (x^2-1)/(2 pi (x^2 - 2x cos t + 1))
        let cdf = |t: f64| {
            let k = (x + 1.0) / (x - 1.0);
            // t/2 stays in [0, pi], where atan2 is continuous
            (k * (t / 2.0).sin()).atan2((t / 2.0).cos()) / PI
        };
        (0..bins)
            .map(|k| {
                let a = TAU * k as f64 / bins as f64;
                let b = TAU * (k + 1) as f64 / bins as f64;
                cdf(b) - cdf(a)
            })
            .collect()
    }

    #[test]
    fn poisson_oracle_is_a_probability() {
        let p = poisson_bins(2.0, 64);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x > 0.0));
        // density at 0 is 3 / (2 pi)
        assert!((p[0] * 64.0 / TAU - 3.0 / TAU).abs() < 0.01);
    }

    #[test]
    fn exit_from_two_matches_poisson_kernel() {
        let f = RationalMap::monomial(2);
        let (mu, stats) =
            brownian_exit_measure_with_stats(&f, Cx::new(2.0, 0.0), 100_000, 1e-3, 5, &WalkOptions::default()).unwrap();
        assert_eq!(stats.crossings, 0);
        let d = tv(&angle_bins(&mu, 64), &poisson_bins(2.0, 64));
        assert!(d < 0.05, "tv = {d}");
    }

    #[test]
    fn exit_from_far_away_is_nearly_uniform() {
        let f = RationalMap::monomial(2);
        let (mu, stats) = brownian_exit_measure_with_stats(
            &f,
            Cx::from_polar(1e3, 0.3),
            50_000,
            1e-3,
            9,
            &WalkOptions::default(),
        )
        .unwrap();
        assert_eq!(stats.crossings, 0);
        assert!(stats.discarded == 0);
        let d = tv(&angle_bins(&mu, 64), &[1.0 / 64.0; 64]);
        assert!(d < 0.05, "tv = {d}");
    }

    #[test]
    fn halving_eps_is_stable() {
        let f = RationalMap::real_polynomial(&[-1.0, 0.0, 1.0]).unwrap();
        let start = Cx::new(0.0, 2.0);
        let a = brownian_exit_measure(&f, start, 40_000, 2e-3, 1).unwrap();
        let b = brownian_exit_measure(&f, start, 40_000, 1e-3, 2).unwrap();
        let d = tv(&angle_bins(&a, 64), &angle_bins(&b, 64));
        assert!(d < 0.05, "tv = {d}");
    }

    #[test]
    fn finite_difference_gradient_agrees() {
        let f = RationalMap::monomial(2);
        let opts = WalkOptions {
            finite_difference: true,
            ..Default::default()
        };
        let (a, stats) = brownian_exit_measure_with_stats(&f, Cx::new(2.0, 0.0), 20_000, 1e-3, 5, &opts).unwrap();
        assert_eq!(stats.crossings, 0);
        let d = tv(&angle_bins(&a, 32), &poisson_bins(2.0, 32));
        assert!(d < 0.05, "tv = {d}");
    }

    #[test]
    fn start_inside_filled_julia_set_is_rejected() {
        let f = RationalMap::monomial(2);
        assert!(brownian_exit_measure(&f, Cx::new(0.5, 0.0), 10, 1e-3, 0).is_err());
    }

    #[test]
    fn distance_bound_for_square_map() {
        // G = log r, |grad G| = 1/r, bound = (r - 1/r) / 4
        for r in [1.01f64, 1.5, 4.0] {
            let want = (r - 1.0 / r) / 4.0;
            assert!((distance_bound(r.ln(), 1.0 / r) - want).abs() < 1e-14);
            assert!(want < r - 1.0);
        }
    }

    #[test]
    fn hitting_law_is_wrapped_cauchy() {
        let mut rng = chain_rng(3, 0);
        let w = Cx::new(2.0, 0.0);
        let n = 200_000;
        let mut h = vec![0.0; 64];
        for _ in 0..n {
            let z = hitting_point(w, 1.0, &mut rng);
            assert!((z.norm() - 1.0).abs() < 1e-12);
            let t = z.arg().rem_euclid(TAU) / TAU;
            h[((t * 64.0) as usize).min(63)] += 1.0 / n as f64;
        }
        assert!(tv(&h, &poisson_bins(2.0, 64)) < 0.02);
    }
}
