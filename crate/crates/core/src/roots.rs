//! Simultaneous polynomial root finding (Aberth–Ehrlich).
//!
//! The iteration only needs the Newton ratio `p/p'` at a point, so targets can
//! be given either by coefficients or by an evaluation procedure (for example
//! the numerator of `f^n(z) - z` computed by iterating `f` homogeneously).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::sphere::Cx;

/// Something whose zeros can be found by simultaneous Newton-type iteration.
pub trait RootTarget: Sync {
    /// Number of affine zeros counted with multiplicity.
    fn degree(&self) -> usize;
    /// Newton ratio `p(z)/p'(z)` and a scale-free backward-error measure of `|p(z)|`.
    fn newton_ratio(&self, z: Cx) -> (Cx, f64);
}

impl RootTarget for Poly {
    fn degree(&self) -> usize {
        Poly::degree(self)
    }

    fn newton_ratio(&self, z: Cx) -> (Cx, f64) {
        let (p, dp) = self.eval_with_derivative(z);
        let r = z.norm();
        let scale: f64 = self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm());
        (p / dp, p.norm() / scale.max(f64::MIN_POSITIVE))
    }
}

#[derive(Clone, Debug)]
pub struct AberthOptions {
    pub max_iter: usize,
    /// Radius of the circle carrying the initial guesses.
    pub start_radius: f64,
}

impl Default for AberthOptions {
    fn default() -> Self {
        AberthOptions {
            max_iter: 500,
            start_radius: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AberthResult {
    pub roots: Vec<Cx>,
    /// Backward error per root at termination.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Backward error accepted for roots whose corrections never settled (root clusters).
pub const CLUSTER_RESIDUAL: f64 = 1e-10;

/// Runs the Aberth–Ehrlich iteration from a deterministic circle of starting points.
pub fn aberth<T: RootTarget + ?Sized>(target: &T, opts: &AberthOptions) -> Result<AberthResult> {
    let m = target.degree();
    if m == 0 {
        return Ok(AberthResult {
            roots: vec![],
            residuals: vec![],
            iterations: 0,
            converged: true,
        });
    }
    let offset = 0.4;
    let mut z: Vec<Cx> = (0..m)
        .map(|k| {
            let t = std::f64::consts::TAU * (k as f64 + offset) / m as f64;
            Cx::from_polar(opts.start_radius, t)
        })
        .collect();
    let mut done = vec![false; m];
    let mut residuals = vec![f64::INFINITY; m];
    let mut iterations = 0;
    while iterations < opts.max_iter && done.iter().any(|d| !d) {
        iterations += 1;
        let snapshot = z.clone();
        let step = |k: usize| -> (Cx, bool, f64) {
            let zk = snapshot[k];
            if done[k] {
                return (zk, true, residuals[k]);
            }
            let (ratio, res) = target.newton_ratio(zk);
            if res == 0.0 {
                return (zk, true, 0.0);
            }
            let mut s = Cx::new(0.0, 0.0);
            for (j, zj) in snapshot.iter().enumerate() {
                if j != k {
                    let diff = zk - zj;
                    if diff.norm() > 0.0 {
                        s += diff.inv();
                    }
                }
            }
            let corr = ratio / (Cx::new(1.0, 0.0) - ratio * s);
            if !(corr.re.is_finite() && corr.im.is_finite()) {
                // p' vanished: nudge off the critical point.
                let nudge = Cx::from_polar(1e-8 * (1.0 + zk.norm()), 0.7 + k as f64);
                return (zk + nudge, false, res);
            }
            let next = zk - corr;
            let small = corr.norm() <= 1e-14 * next.norm().max(1.0);
            (next, small, res)
        };
        let results: Vec<(Cx, bool, f64)> = if m > 128 {
            (0..m).into_par_iter().map(step).collect()
        } else {
            (0..m).map(step).collect()
        };
        for (k, (zk, ok, res)) in results.into_iter().enumerate() {
            z[k] = zk;
            done[k] = ok;
            residuals[k] = res;
        }
    }
    for k in 0..m {
        residuals[k] = target.newton_ratio(z[k]).1;
    }
    let converged = done.iter().all(|&d| d);
    if !converged {
        let worst = (0..m)
            .filter(|&k| !done[k])
            .map(|k| residuals[k])
            .fold(0.0, f64::max);
        if worst > CLUSTER_RESIDUAL {
            return Err(Error::NonConvergence {
                iterations,
                residual: worst,
            });
        }
    }
    Ok(AberthResult {
        roots: z,
        residuals,
        iterations,
        converged,
    })
}

/// All roots of a coefficient polynomial, closed forms for degree at most 2.
pub fn poly_roots(p: &Poly) -> Result<Vec<Cx>> {
    match p.degree() {
        _ if p.is_zero() => Ok(vec![]),
        0 => Ok(vec![]),
        1 => Ok(vec![-p.coeffs[0] / p.coeffs[1]]),
        2 => {
            let (c, b, a) = (p.coeffs[0], p.coeffs[1], p.coeffs[2]);
            let disc = (b * b - a * c * 4.0).sqrt();
            // pick the sign avoiding cancellation
            let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
            if q.norm() == 0.0 {
                return Ok(vec![Cx::new(0.0, 0.0); 2]);
            }
            Ok(vec![q / a, c / q])
        }
        _ => {
            let radius = cauchy_radius(p);
            let res = aberth(
                p,
                &AberthOptions {
                    start_radius: radius,
                    ..Default::default()
                },
            )?;
            Ok(res.roots)
        }
    }
}

/// Geometric-mean root radius `|a_0 / a_n|^(1/n)`, clamped to a sane range.
fn cauchy_radius(p: &Poly) -> f64 {
    let n = p.degree() as f64;
    let a0 = p.coeffs.iter().find(|c| c.norm() > 0.0).map(|c| c.norm()).unwrap_or(1.0);
    let r = (a0 / p.leading().norm()).powf(1.0 / n);
    if r.is_finite() && r > 0.0 {
        r.clamp(1e-3, 1e6)
    } else {
        1.0
    }
}
