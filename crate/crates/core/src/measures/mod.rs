//! Empirical measures: maximal-entropy samples, harmonic measure, comparisons.

mod compare;
mod green;
mod inverse;
mod walk;

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use compare::{measure_compare, ComparabilityReport, Window};
pub use green::{default_escape_radius, green_function, green_gradient_norm, GreenEvaluation};
pub use inverse::{exceptional_set, sample_mmem, MIN_DEPTH};
pub use walk::{brownian_exit_measure, brownian_exit_measure_with_stats, WalkOptions, WalkStats};

use crate::error::{Error, Result};
use crate::evaluable::SphereMap;
use crate::sphere::{Cx, SpherePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    InverseIteration,
    BrownianExit,
    Pushforward,
    External,
}

/// Weighted finite point cloud on the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub points: Vec<Cx>,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub provenance: Provenance,
}

/// Sidecar metadata written next to a measure CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSidecar {
    pub seed: u64,
    pub provenance: Provenance,
    pub map_hash: Option<String>,
    pub count: usize,
}

impl EmpiricalMeasure {
    pub fn uniform(points: Vec<Cx>, seed: u64, provenance: Provenance) -> Self {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        EmpiricalMeasure {
            points,
            weights,
            seed,
            provenance,
        }
    }

    /// Builds a measure from raw weights, normalizing them to total mass one.
    pub fn weighted(points: Vec<Cx>, weights: Vec<f64>, seed: u64, provenance: Provenance) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Precondition("points and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Precondition("weights must be finite and nonnegative".into()));
        }
        if points.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Precondition("points must be finite".into()));
        }
        let total = neumaier_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::Precondition("total weight is zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(EmpiricalMeasure {
            points,
            weights,
            seed,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        neumaier_sum(self.weights.iter().copied())
    }

    /// Writes `re,im,weight` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re,im,weight")?;
        for (z, w) in self.points.iter().zip(&self.weights) {
            writeln!(out, "{:e},{:e},{:e}", z.re, z.im, w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, seed: u64, provenance: Provenance) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with("re")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("measure line {}: bad number `{s}`", lineno + 1)))
            };
            match fields.len() {
                2 | 3 => {
                    points.push(Cx::new(parse(fields[0])?, parse(fields[1])?));
                    weights.push(if fields.len() == 3 { parse(fields[2])? } else { 1.0 });
                }
                _ => return Err(Error::Config(format!("measure line {}: expected re,im[,weight]", lineno + 1))),
            }
        }
        Self::weighted(points, weights, seed, provenance)
    }

    pub fn sidecar(&self, map_hash: Option<String>) -> MeasureSidecar {
        MeasureSidecar {
            seed: self.seed,
            provenance: self.provenance,
            map_hash,
            count: self.len(),
        }
    }
}

/// Compensated summation.
pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Independent per-chain generator: stream `index` of the ChaCha8 generator keyed by `seed`.
pub fn chain_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Largest tolerated fraction of dropped samples in a pushforward.
pub const MAX_DROP_FRACTION: f64 = 0.01;

/// Applies `sigma` to every sample; samples outside its certified domain are dropped.
pub fn pushforward_measure<S: SphereMap + ?Sized>(sigma: &S, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    let mut points = Vec::with_capacity(mu.len());
    let mut weights = Vec::with_capacity(mu.len());
    let mut dropped = 0;
    for (z, w) in mu.points.iter().zip(&mu.weights) {
        let p = SpherePoint::finite(*z);
        let image = if sigma.certified(&p) { sigma.apply(&p).ok() } else { None };
        match image.and_then(|q| q.to_finite()) {
            Some(v) if v.re.is_finite() && v.im.is_finite() => {
                points.push(v);
                weights.push(*w);
            }
            _ => dropped += 1,
        }
    }
    if dropped as f64 > MAX_DROP_FRACTION * mu.len() as f64 {
        return Err(Error::TooManyDiscarded {
            discarded: dropped,
            total: mu.len(),
        });
    }
    EmpiricalMeasure::weighted(points, weights, mu.seed, Provenance::Pushforward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluable::FnMap;
    use crate::rational::RationalMap;

    fn circle(n: usize) -> EmpiricalMeasure {
        let pts = (0..n)
            .map(|k| Cx::from_polar(1.0, std::f64::consts::TAU * (k as f64 + 0.5) / n as f64))
            .collect();
        EmpiricalMeasure::uniform(pts, 0, Provenance::External)
    }

    #[test]
    fn weights_sum_to_one() {
        let mu = circle(1_000_000);
        assert!((mu.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pushforward_identity_and_translation() {
        let mu = circle(2000);
        let id = pushforward_measure(&RationalMap::identity(), &mu).unwrap();
        assert_eq!(id.points, mu.points);
        assert_eq!(id.provenance, Provenance::Pushforward);

        let shift = RationalMap::real_polynomial(&[1.0, 1.0]).unwrap();
        let moved = pushforward_measure(&shift, &mu).unwrap();
        for z in &moved.points {
            assert!(((z - Cx::new(1.0, 0.0)).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pushforward_square_keeps_circle_uniform() {
        let mu = circle(4096);
        let sq = pushforward_measure(&RationalMap::monomial(2), &mu).unwrap();
        // angle doubling of an equispaced grid: each bin of 64 gets the same mass
        let mut bins = [0.0f64; 64];
        for (z, w) in sq.points.iter().zip(&sq.weights) {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            let t = z.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
            bins[((t * 64.0) as usize).min(63)] += w;
        }
        for b in bins {
            assert!((b - 1.0 / 64.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pushforward_drops_out_of_domain_points() {
        let mu = circle(100);
        let bad = FnMap(|z: Cx| if z.re > 0.9 { Cx::new(f64::NAN, 0.0) } else { z });
        assert!(matches!(pushforward_measure(&bad, &mu), Err(Error::TooManyDiscarded { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let mu = circle(10);
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let back = EmpiricalMeasure::read_csv(&buf[..], 0, Provenance::External).unwrap();
        assert_eq!(back.points, mu.points);
        for (a, b) in back.weights.iter().zip(&mu.weights) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
