use rand::Rng;
use rayon::prelude::*;

use super::{chain_rng, EmpiricalMeasure, Provenance};
use crate::error::{Error, Result};
use crate::periodic::periodic_points;
use crate::rational::RationalMap;
use crate::sphere::SpherePoint;

/// Smallest accepted number of backward steps per chain (the burn-in length).
pub const MIN_DEPTH: usize = 20;

const FIBER_RADIUS: f64 = 1e-6;
const EXCEPTIONAL_RADIUS: f64 = 1e-8;

/// Points with finite backward orbit: totally ramified fixed points and 2-cycles.
pub fn exceptional_set(f: &RationalMap) -> Result<Vec<SpherePoint>> {
    let mut out: Vec<SpherePoint> = Vec::new();
    for n in [1, 2] {
        let orbits = periodic_points(f, n)?;
        for cycle in &orbits.cycles {
            let totally_ramified = cycle.points.iter().enumerate().all(|(k, c)| {
                let prev = &cycle.points[(k + cycle.period - 1) % cycle.period];
                f.preimages(c)
                    .map(|pre| pre.iter().all(|q| q.chordal(prev) < FIBER_RADIUS))
                    .unwrap_or(false)
            });
            if totally_ramified {
                out.extend(cycle.points.iter().copied());
            }
        }
    }
    Ok(out)
}

fn format_set(set: &[SpherePoint]) -> String {
    let items: Vec<String> = set.iter().map(|p| p.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

/// Samples of the measure of maximal entropy by randomized backward iteration.
///
/// Chain `i` uses its own generator stream, takes `depth` uniformly random
/// preimage steps from `z0` and contributes its final point.
pub fn sample_mmem(f: &RationalMap, n_points: usize, depth: usize, z0: &SpherePoint, seed: u64) -> Result<EmpiricalMeasure> {
    if f.degree < 2 {
        return Err(Error::Precondition("backward iteration needs degree at least 2".into()));
    }
    if depth < MIN_DEPTH {
        return Err(Error::Precondition(format!("depth {depth} is below the burn-in length {MIN_DEPTH}")));
    }
    let exceptional = exceptional_set(f)?;
    if exceptional.iter().any(|e| e.chordal(z0) < EXCEPTIONAL_RADIUS) {
        return Err(Error::Exceptional {
            point: z0.to_string(),
            set: format_set(&exceptional),
        });
    }
    let points = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i as u64);
            let mut z = *z0;
            for step in 0..depth {
                let pre = f.preimages(&z)?;
                let last = step + 1 == depth;
                let candidates: Vec<SpherePoint> = if last {
                    pre.iter().copied().filter(|p| p.to_finite().is_some()).collect()
                } else {
                    pre
                };
                if candidates.is_empty() {
                    return Err(Error::Precondition(format!("fiber over {z} has no finite point")));
                }
                z = candidates[rng.gen_range(0..candidates.len())];
            }
            Ok(z.to_finite().expect("finite by construction"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalMeasure::uniform(points, seed, Provenance::InverseIteration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::pushforward_measure;
    use crate::sphere::Cx;
    use std::f64::consts::{PI, TAU};

    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = cdf(x);
                (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    fn angle(z: Cx) -> f64 {
        z.arg().rem_euclid(TAU)
    }

    #[test]
    fn square_map_angles_are_uniform() {
        let f = RationalMap::monomial(2);
        let mu = sample_mmem(&f, 100_000, 24, &SpherePoint::real(2.0), 7).unwrap();
        assert_eq!(mu.len(), 100_000);
        assert_eq!(mu.provenance, Provenance::InverseIteration);
        let ks = ks_statistic(mu.points.iter().map(|z| angle(*z)).collect(), |t| t / TAU);
        assert!(ks < 0.01, "ks = {ks}");
        for z in &mu.points {
            assert!((z.norm() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn chebyshev_marginal_is_arcsine() {
        let f = RationalMap::real_polynomial(&[-2.0, 0.0, 1.0]).unwrap();
        let mu = sample_mmem(&f, 50_000, 30, &SpherePoint::finite(Cx::new(0.3, 0.2)), 11).unwrap();
        // x = 2 cos(theta), theta uniform on [0, pi]
        let cdf = |x: f64| 1.0 - (x / 2.0).clamp(-1.0, 1.0).acos() / PI;
        let ks = ks_statistic(mu.points.iter().map(|z| z.re).collect(), cdf);
        assert!(ks < 0.01, "ks = {ks}");
        assert!(mu.points.iter().all(|z| z.im.abs() < 1e-4));
    }

    #[test]
    fn pushforward_preserves_binned_measure() {
        let f = RationalMap::monomial(2);
        let mu = sample_mmem(&f, 50_000, 24, &SpherePoint::real(0.5), 3).unwrap();
        let pushed = pushforward_measure(&f, &mu).unwrap();
        let bins = |m: &EmpiricalMeasure| {
            let mut h = [0.0f64; 64];
            for (z, w) in m.points.iter().zip(&m.weights) {
                h[((angle(*z) / TAU * 64.0) as usize).min(63)] += w;
            }
            h
        };
        let (a, b) = (bins(&mu), bins(&pushed));
        let tv: f64 = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn seed_determinism() {
        let f = RationalMap::real_polynomial(&[0.25, 0.0, 1.0]).unwrap();
        let z0 = SpherePoint::finite(Cx::new(0.1, 0.9));
        let a = sample_mmem(&f, 500, 20, &z0, 42).unwrap();
        let b = sample_mmem(&f, 500, 20, &z0, 42).unwrap();
        let c = sample_mmem(&f, 500, 20, &z0, 43).unwrap();
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn exceptional_points_are_rejected() {
        let f = RationalMap::monomial(2);
        for z0 in [SpherePoint::real(0.0), SpherePoint::INFINITY] {
            let err = sample_mmem(&f, 10, 20, &z0, 0).unwrap_err();
            match err {
                Error::Exceptional { set, .. } => {
                    assert!(set.contains("inf") && set.contains('0'), "{set}");
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        let cheb = RationalMap::real_polynomial(&[-2.0, 0.0, 1.0]).unwrap();
        let set = exceptional_set(&cheb).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set[0].is_infinity());
    }

    #[test]
    fn shallow_depth_is_rejected() {
        let f = RationalMap::monomial(2);
        assert!(sample_mmem(&f, 10, 19, &SpherePoint::real(2.0), 0).is_err());
    }
}
