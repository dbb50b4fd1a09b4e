//! Expansion diagnostics: shrinking of pullbacks of small balls and measure scaling of balls.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{chain_rng, green_function, EmpiricalMeasure};
use crate::rational::RationalMap;
use crate::sphere::{Cx, SpherePoint};

/// Koebe distortion allowance applied to derivative-based diameters.
pub const KOEBE: f64 = 4.0;
/// Largest accepted ball radius.
pub const MAX_RADIUS: f64 = 0.2;
/// Green value below which a point counts as on the Julia set.
pub const JULIA_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkEstimate {
    pub center: Cx,
    pub radius: f64,
    /// Largest component-diameter proxy at depth `n = 1, 2, ...`.
    pub diam_by_n: Vec<f64>,
    /// `exp` of the least-squares slope of `−log diam` against `n` over the last half.
    pub fitted_rate: Option<f64>,
    /// Branches still univalent at each depth.
    pub branch_count_by_n: Vec<usize>,
    /// Every branch met the critical set before `n_max`.
    pub truncated: bool,
}

/// Rejects centers that are visibly off the Julia set.
fn check_on_julia(f: &RationalMap, x: Cx) -> Result<()> {
    if f.is_polynomial() {
        let g = green_function(f, x, 2000, None)?.value;
        if g >= JULIA_TOL {
            return Err(Error::Precondition(format!("center {x} has Green value {g:.3e}, not on the Julia set")));
        }
        return Ok(());
    }
    // settled orbits with contracting multiplier belong to an attracting basin
    let mut z = f.iterate(&SpherePoint::finite(x), 200)?;
    let start = z;
    let mut deriv = Cx::new(1.0, 0.0);
    for p in 1..=12 {
        deriv *= f.derivative(&z)?;
        z = f.eval(&z)?;
        if z.chordal(&start) < 1e-9 && deriv.norm() < 1.0 {
            return Err(Error::Precondition(format!(
                "center {x} is attracted to a cycle of period {p}"
            )));
        }
    }
    Ok(())
}

fn validate(f: &RationalMap, x: Cx, r: f64, n_max: usize) -> Result<()> {
    if !(r > 0.0 && r <= MAX_RADIUS) {
        return Err(Error::Precondition(format!("radius {r} outside (0, {MAX_RADIUS}]")));
    }
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    if f.degree < 2 {
        return Err(Error::Precondition("expansion diagnostics need degree at least 2".into()));
    }
    check_on_julia(f, x)
}

/// Follows one backward branch, returning `|(f^j)'|` at each univalent depth.
///
/// The branch stops at the first depth where the pulled-back disk, of radius
/// `2 r K / |(f^j)'|`, reaches a critical point.
fn follow_branch(
    f: &RationalMap,
    x: Cx,
    r: f64,
    n_max: usize,
    critical: &[Cx],
    mut choose: impl FnMut(&[SpherePoint], Cx) -> usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max);
    let mut w = x;
    let mut deriv = 1.0;
    for _ in 0..n_max {
        let pre = match f.preimages(&SpherePoint::finite(w)) {
            Ok(p) => p,
            Err(_) => break,
        };
        let next = match pre[choose(&pre, w)].to_finite() {
            Some(v) => v,
            None => break,
        };
        let fp = match f.derivative(&SpherePoint::finite(next)) {
            Ok(d) => d.norm(),
            Err(_) => break,
        };
        deriv *= fp;
        let reach = 2.0 * r * KOEBE / deriv;
        if !(deriv.is_finite() && deriv > 0.0) || critical.iter().any(|c| (c - next).norm() <= reach) {
            break;
        }
        out.push(deriv);
        w = next;
    }
    out
}

fn assemble(x: Cx, r: f64, n_max: usize, branches: &[Vec<f64>]) -> ShrinkEstimate {
    let mut diam_by_n = Vec::new();
    let mut branch_count_by_n = Vec::new();
    for n in 0..n_max {
        let derivs: Vec<f64> = branches.iter().filter_map(|b| b.get(n).copied()).collect();
        if derivs.is_empty() {
            break;
        }
        let smallest = derivs.iter().copied().fold(f64::INFINITY, f64::min);
        diam_by_n.push(KOEBE * r / smallest);
        branch_count_by_n.push(derivs.len());
    }
    let truncated = diam_by_n.len() < n_max;
    let fitted_rate = fit_rate(&diam_by_n, n_max);
    ShrinkEstimate {
        center: x,
        radius: r,
        diam_by_n,
        fitted_rate,
        branch_count_by_n,
        truncated,
    }
}

/// `exp(slope)` of `−log diam_n` against `n` over the last `⌈n_max/2⌉` depths.
fn fit_rate(diam_by_n: &[f64], n_max: usize) -> Option<f64> {
    let take = n_max.div_ceil(2).min(diam_by_n.len());
    if take < 2 {
        return None;
    }
    let start = diam_by_n.len() - take;
    let pts: Vec<(f64, f64)> = (start..diam_by_n.len()).map(|i| ((i + 1) as f64, -diam_by_n[i].ln())).collect();
    Some(least_squares_slope(&pts).exp())
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Backward shrinking of `B(x, r)` along `branch_budget` random inverse branches.
///
/// Branch `i` draws its preimage choices from its own generator stream, so the
/// estimate depends only on the seed.
pub fn shrink_rate_estimate(
    f: &RationalMap,
    x: Cx,
    r: f64,
    n_max: usize,
    branch_budget: usize,
    seed: u64,
) -> Result<ShrinkEstimate> {
    validate(f, x, r, n_max)?;
    if branch_budget == 0 {
        return Err(Error::Precondition("branch budget must be positive".into()));
    }
    let critical = f.critical_points()?;
    let branches: Vec<Vec<f64>> = (0..branch_budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i as u64);
            follow_branch(f, x, r, n_max, &critical, |pre, _| rng.gen_range(0..pre.len()))
        })
        .collect();
    Ok(assemble(x, r, n_max, &branches))
}

/// Shrinking along the single branch that always takes the preimage nearest the current point.
///
/// At a repelling fixed point this is the local inverse branch fixing it.
pub fn shrink_along_orbit(f: &RationalMap, x: Cx, r: f64, n_max: usize) -> Result<ShrinkEstimate> {
    validate(f, x, r, n_max)?;
    let critical = f.critical_points()?;
    let nearest = |pre: &[SpherePoint], w: Cx| {
        let here = SpherePoint::finite(w);
        (0..pre.len())
            .min_by(|&a, &b| pre[a].chordal(&here).total_cmp(&pre[b].chordal(&here)))
            .expect("nonempty fiber")
    };
    let branch = follow_branch(f, x, r, n_max, &critical, nearest);
    Ok(assemble(x, r, n_max, &[branch]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointScaling {
    pub x: Cx,
    /// Slope of `log μ(B(x, r))` against `log r`; `None` when the point is flagged.
    pub exponent: Option<f64>,
    /// Radii whose ball held more than [`MIN_BALL_COUNT`] samples.
    pub used_radii: usize,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallScalingReport {
    /// Largest fitted exponent: the binding `θ` in `μ(B(x, r)) ≳ r^θ`.
    pub theta_hat: Option<f64>,
    pub per_point: Vec<PointScaling>,
    pub radii: Vec<f64>,
}

pub const MIN_MEASURE_SAMPLES: usize = 100_000;
/// Samples a ball must hold for its radius to enter the fit.
pub const MIN_BALL_COUNT: usize = 50;
/// Samples required in the largest ball around each point.
pub const MIN_OUTER_COUNT: usize = 100;

/// Geometric list of `count` radii from `r_min` to `r_max`.
pub fn geometric_radii(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    let ratio = (r_max / r_min).ln() / (count.max(2) - 1) as f64;
    (0..count).map(|k| r_min * (ratio * k as f64).exp()).collect()
}

/// Local dimension exponents of an empirical measure at the query points (Euclidean balls).
pub fn measure_ball_scaling(mu: &EmpiricalMeasure, points: &[Cx], radii: &[f64]) -> Result<BallScalingReport> {
    if mu.len() < MIN_MEASURE_SAMPLES {
        return Err(Error::Precondition(format!(
            "ball scaling needs at least {MIN_MEASURE_SAMPLES} samples, got {}",
            mu.len()
        )));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || radii.len() < 2 {
        return Err(Error::Precondition("radii must be at least two positive numbers".into()));
    }
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    if r_max / r_min < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Precondition("radii must span at least two decades".into()));
    }
    let per_point: Vec<PointScaling> = points
        .par_iter()
        .map(|&x| {
            let mut counts = vec![0usize; radii.len()];
            let mut masses = vec![0.0f64; radii.len()];
            for (z, w) in mu.points.iter().zip(&mu.weights) {
                let d = (z - x).norm();
                for (k, r) in radii.iter().enumerate() {
                    if d < *r {
                        counts[k] += 1;
                        masses[k] += w;
                    }
                }
            }
            let outer = radii.iter().position(|r| *r == r_max).expect("max is present");
            let pts: Vec<(f64, f64)> = (0..radii.len())
                .filter(|&k| counts[k] > MIN_BALL_COUNT)
                .map(|k| (radii[k].ln(), masses[k].ln()))
                .collect();
            let usable = counts[outer] >= MIN_OUTER_COUNT && pts.len() >= 2;
            PointScaling {
                x,
                exponent: usable.then(|| least_squares_slope(&pts)),
                used_radii: pts.len(),
                flagged: !usable,
            }
        })
        .collect();
    let theta_hat = per_point.iter().filter_map(|p| p.exponent).reduce(f64::max);
    Ok(BallScalingReport {
        theta_hat,
        per_point,
        radii: radii.to_vec(),
    })
}
