//! Blaschke products on the unit circle: periodic orbits, Lyapunov spectra, rigidity.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::Cx;

/// Circle samples used to decide whether `|B'| > 1` everywhere.
pub const EXPANSION_SAMPLES: usize = 2048;
/// Grid on which the winding number of the lift is verified.
pub const LIFT_GRID: usize = 4096;
/// Width at which angle bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-13;
/// Largest accepted number `d^n` of periodic points.
pub const MAX_POINTS: u64 = 1_000_000;
/// Circular distance under which two angles are the same point.
const SAME_ANGLE: f64 = 1e-9;

/// `B(z) = e^{iφ} ∏ (z − a_i) / (1 − ā_i z)` with all `|a_i| < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeProduct {
    pub zeros: Vec<Cx>,
    pub rotation: f64,
    pub degree: usize,
    /// `min |B'| > 1` over [`EXPANSION_SAMPLES`] circle points.
    pub expanding: bool,
    pub min_derivative: f64,
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<Cx>, rotation: f64) -> Result<Self> {
        if zeros.is_empty() {
            return Err(Error::InvalidMap("a Blaschke product needs at least one zero".into()));
        }
        if let Some(a) = zeros.iter().find(|a| !(a.norm() < 1.0)) {
            return Err(Error::InvalidMap(format!("zero {a} is not inside the unit disk")));
        }
        if !rotation.is_finite() {
            return Err(Error::InvalidMap("rotation must be finite".into()));
        }
        let mut b = BlaschkeProduct {
            degree: zeros.len(),
            zeros,
            rotation,
            expanding: false,
            min_derivative: 0.0,
        };
        b.min_derivative = (0..EXPANSION_SAMPLES)
            .map(|k| b.circle_derivative(k as f64 / EXPANSION_SAMPLES as f64))
            .fold(f64::INFINITY, f64::min);
        b.expanding = b.min_derivative > 1.0;
        b.verify_winding()?;
        Ok(b)
    }

    /// `z ↦ z^d`.
    pub fn monomial(d: usize) -> Self {
        Self::new(vec![Cx::new(0.0, 0.0); d], 0.0).expect("origin is inside the disk")
    }

    pub fn eval(&self, z: Cx) -> Cx {
        let p: Cx = self.zeros.iter().map(|a| (z - a) / (Cx::new(1.0, 0.0) - a.conj() * z)).product();
        p * Cx::from_polar(1.0, self.rotation)
    }

    /// `|B'(e^{2πiθ})| = Σ (1 − |a|²) / |e^{2πiθ} − a|²`.
    pub fn circle_derivative(&self, theta: f64) -> f64 {
        let z = Cx::from_polar(1.0, TAU * theta);
        self.zeros.iter().map(|a| (1.0 - a.norm_sqr()) / (z - a).norm_sqr()).sum()
    }

    /// Monotone lift `F` of the circle map in turns, with `F(x + 1) = F(x) + d`.
    ///
    /// Each factor contributes `x + arg(1 − a e^{−2πix}) / π`; the argument is
    /// continuous because the real part stays positive.
    pub fn lift(&self, x: f64) -> f64 {
        let e = Cx::from_polar(1.0, -TAU * x);
        let turns: f64 = self
            .zeros
            .iter()
            .map(|a| {
                let w = Cx::new(1.0, 0.0) - a * e;
                w.im.atan2(w.re) / PI
            })
            .sum();
        self.rotation / TAU + self.degree as f64 * x + turns
    }

    /// Circle map in turns, reduced to `[0, 1)`.
    pub fn circle_map(&self, theta: f64) -> f64 {
        self.lift(theta).rem_euclid(1.0)
    }

    /// Checks on a fine grid that the lift tracks `arg B` and gains exactly `d` turns.
    fn verify_winding(&self) -> Result<()> {
        let mut prev = self.lift(0.0);
        let mut total = 0.0;
        for k in 1..=LIFT_GRID {
            let x = k as f64 / LIFT_GRID as f64;
            let v = self.lift(x);
            let step = v - prev;
            if !(step > 0.0) {
                return Err(Error::InvalidMap("circle lift is not increasing".into()));
            }
            total += step;
            prev = v;
            let b = self.eval(Cx::from_polar(1.0, TAU * x));
            let diff = (b.arg() / TAU - v).rem_euclid(1.0);
            if diff.min(1.0 - diff) > 1e-9 {
                return Err(Error::InvalidMap("circle lift disagrees with the map".into()));
            }
        }
        if (total - self.degree as f64).abs() > 1e-9 {
            return Err(Error::InvalidMap(format!("winding {total} differs from degree {}", self.degree)));
        }
        Ok(())
    }

    /// `F^n(x) − x` as an integer part and a fraction, keeping full precision in the fraction.
    fn displacement(&self, x: f64, n: usize) -> (i64, f64) {
        let d = self.degree as i64;
        let mut int_part: i64 = 0;
        let mut y = x;
        for _ in 0..n {
            let v = self.lift(y);
            let fl = v.floor();
            int_part = int_part * d + fl as i64;
            y = v - fl;
        }
        (int_part, y - x)
    }

    fn require_expanding(&self) -> Result<()> {
        if !self.expanding {
            return Err(Error::NotExpanding(self.min_derivative));
        }
        Ok(())
    }
}

fn count_points(d: usize, n: usize) -> Result<u64> {
    let total = (d as u64).checked_pow(n as u32).filter(|t| *t <= MAX_POINTS);
    total.ok_or_else(|| Error::Precondition(format!("{d}^{n} periodic points exceed the limit {MAX_POINTS}")))
}

/// All `d^n − 1` fixed points of the `n`-th iterate, as sorted angles in `[0, 1)`.
///
/// `G(x) = F^n(x) − x` increases by `d^n − 1` over a period, so each integer
/// level it crosses in `[0, 1)` has exactly one root, found by bisection.
pub fn circle_periodic_orbits(b: &BlaschkeProduct, n: usize) -> Result<Vec<f64>> {
    b.require_expanding()?;
    if n == 0 {
        return Err(Error::Precondition("period must be at least 1".into()));
    }
    let count = count_points(b.degree, n)? - 1;
    let (i0, f0) = b.displacement(0.0, n);
    let first = i0 + f0.ceil() as i64;
    // g(x) - k with exact integer bookkeeping
    let level = |x: f64, k: i64| {
        let (i, f) = b.displacement(x, n);
        (i - k) as f64 + f
    };
    let mut roots: Vec<f64> = (0..count as i64)
        .into_par_iter()
        .map(|j| {
            let k = first + j;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            if level(lo, k) >= 0.0 {
                return lo;
            }
            while hi - lo > BISECTION_WIDTH {
                let mid = 0.5 * (lo + hi);
                if level(mid, k) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

fn nearest_index(sorted: &[f64], x: f64) -> usize {
    let i = sorted.partition_point(|v| *v < x);
    let candidates = [i.wrapping_sub(1), i % sorted.len(), 0, sorted.len() - 1];
    candidates
        .into_iter()
        .filter(|&j| j < sorted.len())
        .min_by(|&p, &q| circular_distance(sorted[p], x).total_cmp(&circular_distance(sorted[q], x)))
        .expect("nonempty")
}

/// Smallest `p` with `B^p(θ) = θ`.
fn minimal_period(b: &BlaschkeProduct, theta: f64, n: usize) -> usize {
    let mut y = theta;
    for p in 1..=n {
        y = b.circle_map(y);
        if n.is_multiple_of(p) && circular_distance(y, theta) < SAME_ANGLE {
            return p;
        }
    }
    n
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    /// Primitive period of the point.
    pub period: usize,
    pub angle: f64,
    /// `(1/n) Σ log|B'|` along the cycle.
    pub exponent: f64,
    /// Index of the cycle the point belongs to.
    pub cycle: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    /// One entry per periodic point of period at most `n_max`.
    pub entries: Vec<SpectrumEntry>,
    pub d: usize,
    pub n_max: usize,
}

impl LyapunovSpectrum {
    /// One exponent per cycle, in cycle order.
    pub fn cycle_exponents(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.entries {
            if e.cycle == out.len() {
                out.push(e.exponent);
            }
        }
        out
    }

    pub fn cycle_count(&self) -> usize {
        self.cycle_exponents().len()
    }

    /// Entries whose period divides `n`: the fixed points of the `n`-th iterate.
    pub fn points_of_iterate(&self, n: usize) -> usize {
        self.entries.iter().filter(|e| n.is_multiple_of(e.period)).count()
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().map(|e| e.exponent).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().map(|e| e.exponent).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean exponent over cycles.
    pub fn mean(&self) -> f64 {
        let c = self.cycle_exponents();
        c.iter().sum::<f64>() / c.len().max(1) as f64
    }

    /// Writes `period,angle,exponent` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "period,angle,exponent")?;
        for e in &self.entries {
            writeln!(out, "{},{:.15e},{:.15e}", e.period, e.angle, e.exponent)?;
        }
        Ok(())
    }
}

/// Exponents of all primitive cycles with period at most `n_max`.
pub fn lyapunov_spectrum(b: &BlaschkeProduct, n_max: usize) -> Result<LyapunovSpectrum> {
    b.require_expanding()?;
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    count_points(b.degree, n_max)?;
    let mut entries = Vec::new();
    let mut cycle = 0;
    for n in 1..=n_max {
        let angles = circle_periodic_orbits(b, n)?;
        let primitive: Vec<f64> = angles.iter().copied().filter(|&t| minimal_period(b, t, n) == n).collect();
        let mut seen = vec![false; primitive.len()];
        for start in 0..primitive.len() {
            if seen[start] {
                continue;
            }
            let mut orbit = Vec::with_capacity(n);
            let mut idx = start;
            for _ in 0..n {
                seen[idx] = true;
                orbit.push(primitive[idx]);
                idx = nearest_index(&primitive, b.circle_map(primitive[idx]));
            }
            let exponent = orbit.iter().map(|&t| b.circle_derivative(t).ln()).sum::<f64>() / n as f64;
            for angle in orbit {
                entries.push(SpectrumEntry {
                    period: n,
                    angle,
                    exponent,
                    cycle,
                });
            }
            cycle += 1;
        }
    }
    Ok(LyapunovSpectrum {
        entries,
        d: b.degree,
        n_max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub min: f64,
    pub max: f64,
    /// Longest subinterval of `[min, max]` free of cycle exponents.
    pub largest_gap: f64,
    /// Fraction of `grid` equal cells of `[min, max]` holding an exponent.
    pub coverage: f64,
    /// Fewer than two distinct exponents: the gap is undefined and reported as 0.
    pub degenerate: bool,
}

const DISTINCT: f64 = 1e-12;

/// How far the cycle exponents are from filling the interval `[min, max]`.
pub fn spectrum_interval_check(s: &LyapunovSpectrum, grid: usize) -> Result<IntervalReport> {
    let mut values = s.cycle_exponents();
    if values.is_empty() {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    values.sort_by(f64::total_cmp);
    let (min, max) = (values[0], values[values.len() - 1]);
    if max - min <= DISTINCT {
        return Ok(IntervalReport {
            min,
            max,
            largest_gap: 0.0,
            coverage: 1.0,
            degenerate: true,
        });
    }
    let largest_gap = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let grid = grid.max(1);
    let mut hit = vec![false; grid];
    for v in &values {
        let c = (((v - min) / (max - min)) * grid as f64) as usize;
        hit[c.min(grid - 1)] = true;
    }
    let coverage = hit.iter().filter(|h| **h).count() as f64 / grid as f64;
    Ok(IntervalReport {
        min,
        max,
        largest_gap,
        coverage,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    MonomialConjugate,
    NonRigid,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub verdict: Verdict,
    pub spread: f64,
    pub mean: f64,
    /// `e^{mean}`, the expansion factor of a conjugate monomial.
    pub expansion: f64,
    pub degree: usize,
}

/// Smallest `n_max` accepted by [`rigidity_verdict`].
pub const MIN_VERDICT_PERIOD: usize = 6;

/// Classifies a spectrum: a single exponent equal to `log d` means conjugate to `z^d`.
pub fn rigidity_verdict(s: &LyapunovSpectrum, tol: f64) -> Result<RigidityReport> {
    if s.n_max < MIN_VERDICT_PERIOD {
        return Err(Error::Precondition(format!(
            "verdict needs n_max >= {MIN_VERDICT_PERIOD}, got {}",
            s.n_max
        )));
    }
    if s.entries.is_empty() {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    let spread = s.max() - s.min();
    let mean = s.mean();
    let verdict = if spread < tol && (mean - (s.d as f64).ln()).abs() < tol {
        Verdict::MonomialConjugate
    } else if spread > 10.0 * tol {
        Verdict::NonRigid
    } else {
        Verdict::Inconclusive
    };
    Ok(RigidityReport {
        verdict,
        spread,
        mean,
        expansion: mean.exp(),
        degree: s.d,
    })
}

/// `log d / χ`, with `χ` the average exponent over the fixed points of the `n_max`-th iterate.
///
/// Periodic points of high period equidistribute toward the maximal-entropy
/// measure, so the average approximates its Lyapunov exponent.
pub fn dimension_estimate(s: &LyapunovSpectrum) -> f64 {
    let (sum, count) = s
        .entries
        .iter()
        .filter(|e| s.n_max.is_multiple_of(e.period))
        .fold((0.0, 0usize), |(acc, c), e| (acc + e.exponent, c + 1));
    (s.d as f64).ln() / (sum / count.max(1) as f64)
}
