//! Periodic cycles of rational maps: census, multipliers, classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::roots::{aberth, AberthOptions, RootTarget};
use crate::sphere::{Cx, SpherePoint};

/// Classification band around `|λ| = 1`.
pub const EPS_CLASSIFY: f64 = 1e-6;
/// Roots closer than this (chordal) are merged into one cluster.
pub const DEDUP_RADIUS: f64 = 1e-7;
/// Orbit re-verification tolerance (chordal).
pub const CYCLE_TOLERANCE: f64 = 1e-8;
/// Multipliers below this modulus are treated as zero.
const SUPERATTRACTING_CUTOFF: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleKind {
    Repelling,
    Attracting,
    Superattracting,
    Indifferent,
}

impl CycleKind {
    pub fn classify(multiplier: Cx) -> Self {
        let r = multiplier.norm();
        if r < SUPERATTRACTING_CUTOFF {
            CycleKind::Superattracting
        } else if r > 1.0 + EPS_CLASSIFY {
            CycleKind::Repelling
        } else if r < 1.0 - EPS_CLASSIFY {
            CycleKind::Attracting
        } else {
            CycleKind::Indifferent
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub period: usize,
    /// `points[i+1] = f(points[i])`, cyclically.
    pub points: Vec<SpherePoint>,
    pub multiplier: Cx,
    pub kind: CycleKind,
}

/// A group of numerically coincident roots, reported rather than silently merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootCluster {
    pub point: SpherePoint,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Census {
    /// `degree^n + 1`.
    pub expected: usize,
    /// Roots found on the sphere, with multiplicity.
    pub found: usize,
    /// Points lying on primitive cycles of the requested period.
    pub primitive_points: usize,
    pub deficit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbits {
    pub period: usize,
    pub cycles: Vec<Cycle>,
    pub clusters: Vec<RootCluster>,
    pub census: Census,
}

#[derive(Clone, Debug)]
pub struct PeriodicOptions {
    pub n_max: usize,
    pub max_iter: usize,
    /// Upper bound on `degree^n`.
    pub max_points: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            n_max: 12,
            max_iter: 500,
            max_points: 1_000_000,
        }
    }
}

/// The numerator of `f^n(z) - z`, evaluated by homogeneous iteration with rescaling.
struct FixedPointEquation<'a> {
    f: &'a RationalMap,
    n: usize,
    affine_degree: usize,
}

impl FixedPointEquation<'_> {
    /// Homogeneous image `(u, v)` of `[z:1]` under `f^n` with z-derivatives, jointly rescaled.
    fn orbit(&self, z: Cx) -> (Cx, Cx, Cx, Cx) {
        let d = self.f.degree;
        let (mut u, mut v) = (z, Cx::new(1.0, 0.0));
        let (mut du, mut dv) = (Cx::new(1.0, 0.0), Cx::new(0.0, 0.0));
        for _ in 0..self.n {
            let (a, au, av) = self.f.num.eval_homogeneous(d, u, v);
            let (b, bu, bv) = self.f.den.eval_homogeneous(d, u, v);
            let nu = au * du + av * dv;
            let nv = bu * du + bv * dv;
            let s = a.norm().max(b.norm());
            let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
            u = a / s;
            v = b / s;
            du = nu / s;
            dv = nv / s;
        }
        (u, v, du, dv)
    }
}

impl RootTarget for FixedPointEquation<'_> {
    fn degree(&self) -> usize {
        self.affine_degree
    }

    fn newton_ratio(&self, z: Cx) -> (Cx, f64) {
        let (u, v, du, dv) = self.orbit(z);
        let p = u - z * v;
        let dp = du - v - z * dv;
        let scale = u.norm() + z.norm() * v.norm();
        (p / dp, p.norm() / scale.max(f64::MIN_POSITIVE))
    }
}

/// Homogeneous image of infinity under `f^n`, as `(N_n(1,0), D_n(1,0), ∂_t D_n(1,t)|_0)` rescaled.
fn infinity_orbit(f: &RationalMap, n: usize) -> (Cx, Cx, Cx, Cx) {
    let d = f.degree;
    // local coordinate t at infinity: [1 : t]
    let (mut u, mut v) = (Cx::new(1.0, 0.0), Cx::new(0.0, 0.0));
    let (mut du, mut dv) = (Cx::new(0.0, 0.0), Cx::new(1.0, 0.0));
    for _ in 0..n {
        let (a, au, av) = f.num.eval_homogeneous(d, u, v);
        let (b, bu, bv) = f.den.eval_homogeneous(d, u, v);
        let nu = au * du + av * dv;
        let nv = bu * du + bv * dv;
        let s = a.norm().max(b.norm());
        u = a / s;
        v = b / s;
        du = nu / s;
        dv = nv / s;
    }
    (u, v, du, dv)
}

fn checked_power(d: usize, n: usize, cap: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..n {
        acc = acc.checked_mul(d)?;
        if acc > cap {
            return None;
        }
    }
    Some(acc)
}

/// All primitive cycles of exact period `n`.
pub fn periodic_points(f: &RationalMap, n: usize) -> Result<PeriodicOrbits> {
    periodic_points_with(f, n, &PeriodicOptions::default())
}

pub fn periodic_points_with(f: &RationalMap, n: usize, opts: &PeriodicOptions) -> Result<PeriodicOrbits> {
    if n == 0 || n > opts.n_max {
        return Err(Error::Precondition(format!("period {n} outside 1..={}", opts.n_max)));
    }
    let dn = checked_power(f.degree, n, opts.max_points)
        .ok_or_else(|| Error::Precondition(format!("degree^n exceeds {}", opts.max_points)))?;
    let expected = dn + 1;

    // Is infinity a root of z1*N_n - z0*D_n, and with what multiplicity?
    let (iu, iv, idu, idv) = infinity_orbit(f, n);
    let inf_fixed = iv.norm() <= 1e-12 * iu.norm();
    let mut inf_mult = 0;
    let mut inf_parabolic = false;
    if inf_fixed {
        // multiplier of f^n at infinity in the reciprocal chart
        let g1 = (idv * iu - iv * idu) / (iu * iu);
        if (g1 - Cx::new(1.0, 0.0)).norm() < 1e-8 {
            inf_parabolic = true;
            inf_mult = 2;
        } else {
            inf_mult = 1;
        }
    }
    let affine_degree = expected - inf_mult;

    let start_radius = if f.is_polynomial() {
        let lead = f.num.leading().norm();
        1.0 + f.num.coeffs.iter().rev().skip(1).map(|c| c.norm() / lead).fold(0.0, f64::max)
    } else {
        1.0
    };
    let eq = FixedPointEquation { f, n, affine_degree };
    let roots = aberth(
        &eq,
        &AberthOptions {
            max_iter: opts.max_iter,
            start_radius,
        },
    )?;

    // Cluster roots.
    let mut reps: Vec<(SpherePoint, usize)> = Vec::new();
    for z in &roots.roots {
        let p = SpherePoint::finite(*z);
        match reps.iter_mut().find(|(q, _)| q.chordal(&p) < DEDUP_RADIUS) {
            Some(entry) => entry.1 += 1,
            None => reps.push((p, 1)),
        }
    }
    if inf_fixed {
        match reps.iter_mut().find(|(q, _)| q.chordal(&SpherePoint::INFINITY) < DEDUP_RADIUS) {
            Some(entry) => entry.1 += inf_mult,
            None => reps.push((SpherePoint::INFINITY, inf_mult)),
        }
    }
    let mut clusters: Vec<RootCluster> = reps
        .iter()
        .filter(|(_, m)| *m > 1)
        .map(|(p, m)| RootCluster {
            point: *p,
            multiplicity: *m,
        })
        .collect();
    if inf_parabolic && !clusters.iter().any(|c| c.point.is_infinity()) {
        clusters.push(RootCluster {
            point: SpherePoint::INFINITY,
            multiplicity: inf_mult,
        });
    }
    let found: usize = reps.iter().map(|(_, m)| m).sum();

    let mut assigned = vec![false; reps.len()];
    let mut cycles = Vec::new();
    for i in 0..reps.len() {
        if assigned[i] {
            continue;
        }
        let start = reps[i].0;
        let mut orbit = vec![start];
        let mut period = None;
        let mut w = start;
        for k in 1..=n {
            w = f.eval(&w)?;
            if w.chordal(&start) < DEDUP_RADIUS * 10.0 {
                period = Some(k);
                break;
            }
            orbit.push(w);
        }
        assigned[i] = true;
        if period != Some(n) {
            continue;
        }
        // Replace orbit points by the matching (more accurate) roots.
        let mut points = Vec::with_capacity(n);
        points.push(start);
        for q in orbit.iter().skip(1) {
            let best = (0..reps.len())
                .filter(|&j| !assigned[j])
                .min_by(|&a, &b| reps[a].0.chordal(q).total_cmp(&reps[b].0.chordal(q)));
            match best {
                Some(j) if reps[j].0.chordal(q) < 1e-6 => {
                    assigned[j] = true;
                    points.push(reps[j].0);
                }
                _ => points.push(*q),
            }
        }
        let multiplier = cycle_multiplier(f, &points)?;
        cycles.push(Cycle {
            period: n,
            points,
            multiplier,
            kind: CycleKind::classify(multiplier),
        });
    }
    let primitive_points = cycles.len() * n;
    Ok(PeriodicOrbits {
        period: n,
        cycles,
        clusters,
        census: Census {
            expected,
            found,
            primitive_points,
            deficit: found != expected,
        },
    })
}

fn cycle_multiplier(f: &RationalMap, points: &[SpherePoint]) -> Result<Cx> {
    points
        .iter()
        .try_fold(Cx::new(1.0, 0.0), |acc, p| Ok(acc * f.derivative(p)?))
}

/// Product of derivatives along a verified cycle.
pub fn multiplier(f: &RationalMap, cycle: &Cycle) -> Result<Cx> {
    let m = cycle.points.len();
    if m == 0 || m != cycle.period {
        return Err(Error::Precondition(format!(
            "cycle has {} points but period {}",
            m, cycle.period
        )));
    }
    for i in 0..m {
        let image = f.eval(&cycle.points[i])?;
        let next = cycle.points[(i + 1) % m];
        let gap = image.chordal(&next);
        if gap > CYCLE_TOLERANCE {
            return Err(Error::Precondition(format!(
                "point {i} of the cycle does not map to its successor (chordal gap {gap:.3e})"
            )));
        }
    }
    cycle_multiplier(f, &cycle.points)
}
