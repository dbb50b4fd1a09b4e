//! Multiplier and degree relations, semiconjugacy residuals and invariant algebraic curves.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluable::SphereMap;
use crate::linearization::{GeneralizedLinearizer, Linearizer};
use crate::poly::Poly;
use crate::rational::RationalMap;
use crate::sphere::{Cx, SpherePoint};

/// Default absolute tolerance on the log-scale relation defect.
pub const RELATION_TOL: f64 = 1e-9;
/// Fit residual below which a bidegree is accepted in the sweep.
pub const CURVE_TOL: f64 = 1e-8;
/// Singular values below this count as exact zeros when testing uniqueness.
pub const RANK_TOL: f64 = 1e-12;
/// Affine coordinates beyond this modulus are treated as near infinity.
pub const AFFINE_LIMIT: f64 = 1e8;
/// Largest `d^k` accepted when expanding iterate-graph curves.
pub const MAX_GRAPH_DEGREE: usize = 1000;

/// `λ₁^{aℓ} = λ₂^b` up to `defect` on the logarithmic scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRelation {
    pub a: usize,
    pub b: usize,
    pub ell: usize,
    pub defect: f64,
    /// No proper divisor `(a/t, b/t)` is also a relation.
    pub primitive: bool,
}

/// Distance from `aℓ Log λ₁ − b Log λ₂` to the lattice `2πiℤ`.
pub fn relation_defect(lambda1: Cx, ell: usize, lambda2: Cx, a: usize, b: usize) -> f64 {
    let x = lambda1.ln() * (a * ell) as f64 - lambda2.ln() * b as f64;
    let k = (x.im / std::f64::consts::TAU).round();
    Cx::new(x.re, x.im - k * std::f64::consts::TAU).norm()
}

/// All `(a, b)` within bounds with `λ₁^{aℓ} = λ₂^b` to tolerance `tol`.
pub fn multiplier_relation_search(
    lambda1: Cx,
    ell: usize,
    lambda2: Cx,
    a_max: usize,
    b_max: usize,
    tol: f64,
) -> Result<Vec<MultiplierRelation>> {
    if lambda1.norm() <= 1.0 || lambda2.norm() <= 1.0 {
        return Err(Error::NotRepelling(lambda1.norm().min(lambda2.norm())));
    }
    if ell == 0 {
        return Err(Error::Precondition("ell must be at least 1".into()));
    }
    let mut found = Vec::new();
    for a in 1..=a_max {
        for b in 1..=b_max {
            let defect = relation_defect(lambda1, ell, lambda2, a, b);
            if defect < tol {
                found.push(MultiplierRelation {
                    a,
                    b,
                    ell,
                    defect,
                    primitive: true,
                });
            }
        }
    }
    let pairs: Vec<(usize, usize)> = found.iter().map(|r| (r.a, r.b)).collect();
    for r in &mut found {
        let g = gcd(r.a, r.b);
        r.primitive = !(2..=g).any(|t| g.is_multiple_of(t) && pairs.contains(&(r.a / t, r.b / t)));
    }
    Ok(found)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact test of `d₁^a = d₂^b`.
pub fn degree_relation_check(d1: usize, a: usize, d2: usize, b: usize) -> bool {
    let lhs = BigUint::from(d1).pow(a as u32);
    let rhs = BigUint::from(d2).pow(b as u32);
    lhs == rhs
}

/// Max chordal distance between `f₂^b(σ(z))` and `σ(f₁^a(z))` over the samples.
pub fn semiconjugacy_residual<S: SphereMap + ?Sized>(
    f1: &RationalMap,
    a: usize,
    f2: &RationalMap,
    b: usize,
    sigma: &S,
    samples: &[SpherePoint],
) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (k, z) in samples.iter().enumerate() {
        let pair = (|| -> Option<(SpherePoint, SpherePoint)> {
            let fz = f1.iterate(z, a).ok()?;
            if !sigma.certified(z) || !sigma.certified(&fz) {
                return None;
            }
            let lhs = f2.iterate(&sigma.apply(z).ok()?, b).ok()?;
            let rhs = sigma.apply(&fz).ok()?;
            Some((lhs, rhs))
        })();
        match pair {
            Some((l, r)) => {
                let d = l.chordal(&r);
                if d.is_nan() {
                    bad.push(k);
                } else {
                    worst = worst.max(d);
                }
            }
            None => bad.push(k),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Domain(bad));
    }
    Ok(worst)
}

/// Polynomial `P(x, y) = Σ c[i][j] x^i y^j` of bidegree `(m, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveCandidate {
    pub m: usize,
    pub n: usize,
    /// `(m+1) x (n+1)` coefficients, row `i` for `x^i`, unit Frobenius norm.
    pub coeffs: Vec<Vec<Cx>>,
    pub fit_residual: f64,
    pub invariance_residual: Option<f64>,
    /// Samples dropped for lying near infinity.
    pub dropped: usize,
    /// Irreducibility is never decided; always `None` ("possibly reducible").
    pub reducible: Option<bool>,
}

impl CurveCandidate {
    pub fn from_coeffs(coeffs: Vec<Vec<Cx>>) -> Result<Self> {
        let m = coeffs.len().checked_sub(1).ok_or_else(|| Error::Precondition("empty coefficient matrix".into()))?;
        let n = coeffs[0].len().checked_sub(1).ok_or_else(|| Error::Precondition("empty coefficient row".into()))?;
        if coeffs.iter().any(|r| r.len() != n + 1) {
            return Err(Error::Precondition("ragged coefficient matrix".into()));
        }
        let norm = coeffs.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Precondition("coefficients vanish identically".into()));
        }
        let coeffs = coeffs.into_iter().map(|r| r.into_iter().map(|c| c / norm).collect()).collect();
        Ok(CurveCandidate {
            m,
            n,
            coeffs,
            fit_residual: 0.0,
            invariance_residual: None,
            dropped: 0,
            reducible: None,
        })
    }

    pub fn coeff(&self, i: usize, j: usize) -> Cx {
        self.coeffs.get(i).and_then(|r| r.get(j)).copied().unwrap_or(Cx::new(0.0, 0.0))
    }

    pub fn eval(&self, x: Cx, y: Cx) -> Cx {
        self.coeffs.iter().rev().fold(Cx::new(0.0, 0.0), |acc, row| {
            acc * x + row.iter().rev().fold(Cx::new(0.0, 0.0), |s, &c| s * y + c)
        })
    }

    /// `Σ |c_ij| |x|^i |y|^j`, the scale against which `|P(x, y)|` is judged.
    pub fn monomial_scale(&self, x: Cx, y: Cx) -> f64 {
        let (ax, ay) = (x.norm(), y.norm());
        self.coeffs.iter().rev().fold(0.0, |acc, row| {
            acc * ax + row.iter().rev().fold(0.0, |s, c| s * ay + c.norm())
        })
    }

    pub fn relative_value(&self, x: Cx, y: Cx) -> f64 {
        let s = self.monomial_scale(x, y);
        if s == 0.0 {
            0.0
        } else {
            self.eval(x, y).norm() / s
        }
    }

    /// Multiplies by a unit scalar so that the largest coefficient is real and positive.
    fn fix_phase(&mut self) {
        let big = self
            .coeffs
            .iter()
            .flatten()
            .copied()
            .fold(Cx::new(0.0, 0.0), |best, c| if c.norm() > best.norm() * (1.0 + 1e-9) { c } else { best });
        if big.norm() > 0.0 {
            let u = big.conj() / big.norm();
            for row in &mut self.coeffs {
                for c in row {
                    *c *= u;
                }
            }
        }
    }
}

fn affine_samples(samples: &[(Cx, Cx)]) -> (Vec<(Cx, Cx)>, usize) {
    let ok = |z: Cx| z.re.is_finite() && z.im.is_finite() && z.norm() <= AFFINE_LIMIT;
    let kept: Vec<(Cx, Cx)> = samples.iter().copied().filter(|(x, y)| ok(*x) && ok(*y)).collect();
    let dropped = samples.len() - kept.len();
    (kept, dropped)
}

/// Least-squares algebraic curve of bidegree `(m, n)` through the samples.
///
/// The monomial matrix is column-normalized before the SVD and the null vector
/// is mapped back to unscaled coefficients.
pub fn fit_invariant_curve(samples: &[(Cx, Cx)], m: usize, n: usize) -> Result<CurveCandidate> {
    let (pts, dropped) = affine_samples(samples);
    let cols = (m + 1) * (n + 1);
    if pts.len() < 3 * cols {
        return Err(Error::Precondition(format!(
            "bidegree ({m},{n}) needs {} finite samples, got {}",
            3 * cols,
            pts.len()
        )));
    }
    let rows = pts.len();
    let mut a = DMatrix::<Cx>::zeros(rows, cols);
    for (r, (x, y)) in pts.iter().enumerate() {
        let mut xi = Cx::new(1.0, 0.0);
        for i in 0..=m {
            let mut yj = Cx::new(1.0, 0.0);
            for j in 0..=n {
                a[(r, i * (n + 1) + j)] = xi * yj;
                yj *= y;
            }
            xi *= x;
        }
    }
    let mut scale = vec![1.0; cols];
    for (c, s) in scale.iter_mut().enumerate() {
        let norm = a.column(c).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            *s = norm;
            a.column_mut(c).iter_mut().for_each(|v| *v /= norm);
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let sigma_min = svd.singular_values[smallest];
    if order.len() > 1 && svd.singular_values[order[1]] < RANK_TOL {
        return Err(Error::CurveNotUnique { m, n });
    }
    let coeffs: Vec<Vec<Cx>> = (0..=m)
        .map(|i| (0..=n).map(|j| v_t[(smallest, i * (n + 1) + j)].conj() / scale[i * (n + 1) + j]).collect())
        .collect();
    let mut curve = CurveCandidate::from_coeffs(coeffs)?;
    curve.fix_phase();
    curve.fit_residual = sigma_min / (rows as f64).sqrt();
    curve.dropped = dropped;
    Ok(curve)
}

/// Bidegrees with `1 <= m <= max_m`, `1 <= n <= max_n`, by increasing `(m+1)(n+1)`.
pub fn bidegree_order(max_m: usize, max_n: usize) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = (1..=max_m).flat_map(|m| (1..=max_n).map(move |n| (m, n))).collect();
    cells.sort_by_key(|&(m, n)| ((m + 1) * (n + 1), m, n));
    cells
}

/// First curve in [`bidegree_order`] with fit residual below [`CURVE_TOL`] that
/// also passes through every sample to within [`ON_CURVE_TOL`].
///
/// Bidegrees whose null space is not one-dimensional, or that need more samples
/// than available, are skipped.
pub fn minimal_curve(samples: &[(Cx, Cx)], max_m: usize, max_n: usize) -> Option<CurveCandidate> {
    let cells = bidegree_order(max_m, max_n);
    let fits: Vec<Option<CurveCandidate>> = cells
        .par_iter()
        .map(|&(m, n)| fit_invariant_curve(samples, m, n).ok())
        .collect();
    fits.into_iter().flatten().find(|c| {
        c.fit_residual < CURVE_TOL && samples.iter().all(|(x, y)| c.relative_value(*x, *y) < ON_CURVE_TOL)
    })
}

/// Tolerance on `|P(x,y)|` (relative to the monomial scale) for a sample to count as on the curve.
pub const ON_CURVE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub residual: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Max relative value of `P(f₁^a(x), f₂^b(y))` over samples on the curve; stored on `curve`.
pub fn curve_invariance_check(
    curve: &mut CurveCandidate,
    f1: &RationalMap,
    a: usize,
    f2: &RationalMap,
    b: usize,
    samples_on_curve: &[(Cx, Cx)],
) -> Result<InvarianceReport> {
    let off: Vec<usize> = samples_on_curve
        .iter()
        .enumerate()
        .filter(|(_, (x, y))| !(curve.relative_value(*x, *y) < ON_CURVE_TOL))
        .map(|(k, _)| k)
        .collect();
    if !off.is_empty() {
        return Err(Error::Precondition(format!(
            "{} samples are not on the curve (first index {})",
            off.len(),
            off[0]
        )));
    }
    let image = |f: &RationalMap, k: usize, z: Cx| -> Option<Cx> {
        let w = f.iterate(&SpherePoint::finite(z), k).ok()?.to_finite()?;
        (w.norm() <= AFFINE_LIMIT && w.re.is_finite() && w.im.is_finite()).then_some(w)
    };
    let mut residual = 0.0f64;
    let mut used = 0;
    let mut dropped = 0;
    for (x, y) in samples_on_curve {
        match (image(f1, a, *x), image(f2, b, *y)) {
            (Some(u), Some(v)) => {
                residual = residual.max(curve.relative_value(u, v));
                used += 1;
            }
            _ => dropped += 1,
        }
    }
    if used == 0 {
        return Err(Error::TooManyDiscarded {
            discarded: dropped,
            total: samples_on_curve.len(),
        });
    }
    curve.invariance_residual = Some(residual);
    Ok(InvarianceReport { residual, used, dropped })
}

/// Numerator of `f^k(x) − f^l(y)` as a coefficient matrix.
pub fn iterate_graph_curve(f: &RationalMap, k: usize, l: usize) -> Result<CurveCandidate> {
    let biggest = f.degree.checked_pow(k.max(l) as u32).unwrap_or(usize::MAX);
    if biggest > MAX_GRAPH_DEGREE {
        return Err(Error::CoefficientOverflow(format!(
            "expanding f^{} of degree {}",
            k.max(l),
            f.degree
        )));
    }
    let fk = f.power(k)?;
    let fl = f.power(l)?;
    // N_k(x) D_l(y) − N_l(y) D_k(x)
    let outer = |px: &Poly, qy: &Poly| -> Vec<Vec<Cx>> {
        (0..=fk.degree)
            .map(|i| (0..=fl.degree).map(|j| px.coeff(i) * qy.coeff(j)).collect())
            .collect()
    };
    let left = outer(&fk.num, &fl.den);
    let right = outer(&fk.den, &fl.num);
    let coeffs: Vec<Vec<Cx>> = left
        .iter()
        .zip(&right)
        .map(|(l, r)| l.iter().zip(r).map(|(a, b)| a - b).collect())
        .collect();
    if coeffs.iter().flatten().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::CoefficientOverflow("expanding an iterate graph".into()));
    }
    let mut curve = CurveCandidate::from_coeffs(coeffs)?;
    curve.fix_phase();
    Ok(curve)
}

/// Deterministic sunflower-spiral points filling the disk `|ζ| <= radius`.
pub fn disk_samples(count: usize, radius: f64) -> Vec<Cx> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| Cx::from_polar(radius * ((k as f64 + 0.5) / count as f64).sqrt(), golden * k as f64))
        .collect()
}

/// Points `(ψ₁(ζ), χ₂(ζ))` on the graph of a linearizer pair; evaluations at infinity are skipped.
pub fn linearizer_graph_samples(chi1: &Linearizer, chi2: &GeneralizedLinearizer, zetas: &[Cx]) -> Result<Vec<(Cx, Cx)>> {
    let mut out = Vec::with_capacity(zetas.len());
    for &z in zetas {
        if let (Some(x), Some(y)) = (chi1.eval(z)?.to_finite(), chi2.eval(z)?.to_finite()) {
            out.push((x, y));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluable::FnMap;
    use crate::linearization::{generalized_koenigs, koenigs_series};
    use crate::measures::chain_rng;
    use rand::Rng;

    fn cx(re: f64) -> Cx {
        Cx::new(re, 0.0)
    }

    #[test]
    fn powers_of_two_and_four() {
        let rel = multiplier_relation_search(cx(2.0), 1, cx(4.0), 10, 10, RELATION_TOL).unwrap();
        let prim: Vec<_> = rel.iter().filter(|r| r.primitive).collect();
        assert_eq!(prim.len(), 1);
        assert_eq!((prim[0].a, prim[0].b), (2, 1));
        assert_eq!(prim[0].defect, 0.0);
        let all: Vec<_> = rel.iter().map(|r| (r.a, r.b)).collect();
        assert_eq!(all, vec![(2, 1), (4, 2), (6, 3), (8, 4), (10, 5)]);
    }

    #[test]
    fn two_and_three_are_independent() {
        let rel = multiplier_relation_search(cx(2.0), 1, cx(3.0), 20, 20, RELATION_TOL).unwrap();
        assert!(rel.is_empty());
        // best rational approximations of log 3 / log 2 up to denominator 20 stay far from tol
        let best = (1..=20)
            .flat_map(|a| (1..=20).map(move |b| relation_defect(cx(2.0), 1, cx(3.0), a, b)))
            .fold(f64::INFINITY, f64::min);
        assert!(best > 1e-3, "{best}");
    }

    #[test]
    fn basilica_fixed_point_squared() {
        let l1 = cx(1.0 + 5f64.sqrt());
        let rel = multiplier_relation_search(l1, 1, l1 * l1, 6, 6, RELATION_TOL).unwrap();
        let prim: Vec<_> = rel.iter().filter(|r| r.primitive).map(|r| (r.a, r.b)).collect();
        assert_eq!(prim, vec![(2, 1)]);
    }

    #[test]
    fn complex_multipliers_use_the_branch_lattice() {
        // λ₁ = 2 e^{iθ}, λ₂ = λ₁³ wraps the argument past π
        let l1 = Cx::from_polar(2.0, 2.5);
        let rel = multiplier_relation_search(l1, 1, l1.powu(3), 3, 3, RELATION_TOL).unwrap();
        assert!(rel.iter().any(|r| (r.a, r.b) == (3, 1) && r.primitive));
        let with_ell = multiplier_relation_search(l1, 3, l1.powu(3), 3, 3, RELATION_TOL).unwrap();
        assert!(with_ell.iter().any(|r| (r.a, r.b) == (1, 1)));
    }

    #[test]
    fn non_repelling_is_rejected() {
        assert!(multiplier_relation_search(cx(0.5), 1, cx(2.0), 3, 3, RELATION_TOL).is_err());
    }

    #[test]
    fn degree_relations() {
        assert!(degree_relation_check(2, 2, 4, 1));
        assert!(!degree_relation_check(2, 3, 4, 1));
        assert!(degree_relation_check(8, 2, 4, 3));
        // exact even where f64 would round
        assert!(!degree_relation_check(3, 40, 3usize.pow(20) + 1, 2));
        assert!(degree_relation_check(3, 40, 3usize.pow(20), 2));
    }

    fn ring_samples() -> Vec<SpherePoint> {
        disk_samples(50, 1.3).into_iter().map(SpherePoint::finite).collect()
    }

    #[test]
    fn semiconjugacy_examples() {
        let z2 = RationalMap::monomial(2);
        let z4 = RationalMap::monomial(4);
        let s = ring_samples();
        assert!(semiconjugacy_residual(&z2, 2, &z4, 1, &z2, &s).unwrap() < 1e-14);
        let f = RationalMap::real_polynomial(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(semiconjugacy_residual(&f, 3, &f, 3, &RationalMap::identity(), &s).unwrap(), 0.0);
        assert!(semiconjugacy_residual(&z2, 1, &z2, 1, &z2, &s).unwrap() < 1e-14);
        // a non-commuting pair is detected
        assert!(semiconjugacy_residual(&f, 1, &f, 1, &z2, &s).unwrap() > 1e-2);
    }

    #[test]
    fn semiconjugacy_reports_domain_violations() {
        let z2 = RationalMap::monomial(2);
        let sigma = FnMap(|z: Cx| if z.norm() > 1.0 { Cx::new(f64::NAN, 0.0) } else { z });
        let s = vec![SpherePoint::real(0.5), SpherePoint::real(2.0), SpherePoint::real(0.9)];
        match semiconjugacy_residual(&z2, 1, &z2, 1, &sigma, &s) {
            Err(Error::Domain(idx)) => assert_eq!(idx, vec![1]),
            other => panic!("{other:?}"),
        }
    }

    /// Coefficient matrix of `y − x²` for bidegree (2, 1), unit norm.
    fn parabola_coeffs() -> Vec<Vec<Cx>> {
        let s = 1.0 / 2f64.sqrt();
        vec![vec![cx(0.0), cx(s)], vec![cx(0.0), cx(0.0)], vec![cx(-s), cx(0.0)]]
    }

    fn assert_matches_up_to_sign(curve: &CurveCandidate, want: &[Vec<Cx>], tol: f64) {
        let dot: Cx = curve.coeffs.iter().flatten().zip(want.iter().flatten()).map(|(a, b)| a * b.conj()).sum();
        let phase = dot / dot.norm();
        for (row, wrow) in curve.coeffs.iter().zip(want) {
            for (c, w) in row.iter().zip(wrow) {
                assert!((c - w * phase).norm() < tol, "{:?}", curve.coeffs);
            }
        }
    }

    #[test]
    fn fits_parabola_from_points() {
        let samples: Vec<(Cx, Cx)> = disk_samples(200, 1.5).into_iter().map(|x| (x, x * x)).collect();
        let c = fit_invariant_curve(&samples, 2, 1).unwrap();
        assert!(c.fit_residual < 1e-10, "{}", c.fit_residual);
        assert_matches_up_to_sign(&c, &parabola_coeffs(), 1e-9);
    }

    #[test]
    fn fits_parabola_from_exponentials() {
        let samples: Vec<(Cx, Cx)> = disk_samples(200, 1.0).into_iter().map(|z| (z.exp(), (2.0 * z).exp())).collect();
        let c = fit_invariant_curve(&samples, 2, 1).unwrap();
        assert!(c.fit_residual < 1e-8);
        assert_matches_up_to_sign(&c, &parabola_coeffs(), 1e-8);
    }

    #[test]
    fn random_bidisk_has_no_curve() {
        let mut rng = chain_rng(17, 0);
        let mut unit_disk = || loop {
            let z = Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if z.norm() < 1.0 {
                return z;
            }
        };
        let samples: Vec<(Cx, Cx)> = (0..200).map(|_| (unit_disk(), unit_disk())).collect();
        let c = fit_invariant_curve(&samples, 2, 2).unwrap();
        assert!(c.fit_residual > 1e-3, "{}", c.fit_residual);
    }

    #[test]
    fn non_unique_bidegree_is_reported() {
        let samples: Vec<(Cx, Cx)> = disk_samples(200, 1.5).into_iter().map(|x| (x, x * x)).collect();
        assert!(matches!(fit_invariant_curve(&samples, 2, 2), Err(Error::CurveNotUnique { m: 2, n: 2 })));
    }

    #[test]
    fn too_few_samples_and_far_points() {
        let mut samples: Vec<(Cx, Cx)> = disk_samples(20, 1.0).into_iter().map(|x| (x, x * x)).collect();
        assert!(fit_invariant_curve(&samples, 2, 1).is_ok());
        samples.push((cx(1e9), cx(1e18)));
        let c = fit_invariant_curve(&samples, 2, 1).unwrap();
        assert_eq!(c.dropped, 1);
        assert!(fit_invariant_curve(&samples[..10], 2, 1).is_err());
    }

    #[test]
    fn rescaling_preserves_the_variety() {
        let samples: Vec<(Cx, Cx)> = disk_samples(200, 1.2).into_iter().map(|x| (x, x * x + x)).collect();
        let s = 7.5;
        let scaled: Vec<(Cx, Cx)> = samples.iter().map(|(x, y)| (x * s, *y)).collect();
        let c = fit_invariant_curve(&scaled, 2, 1).unwrap();
        // membership of fresh points on the rescaled curve
        for x in disk_samples(30, 0.9) {
            assert!(c.relative_value(x * s, x * x + x) < 1e-9);
        }
    }

    #[test]
    fn minimal_sweep_finds_lowest_bidegree() {
        let samples: Vec<(Cx, Cx)> = disk_samples(200, 1.0).into_iter().map(|x| (x, x * x)).collect();
        let c = minimal_curve(&samples, 4, 4).unwrap();
        assert_eq!((c.m, c.n), (2, 1));
        let line: Vec<(Cx, Cx)> = disk_samples(200, 1.0).into_iter().map(|x| (x, 3.0 * x - 1.0)).collect();
        let c = minimal_curve(&line, 3, 3).unwrap();
        assert_eq!((c.m, c.n), (1, 1));
        assert_eq!(bidegree_order(2, 2)[0], (1, 1));
    }

    #[test]
    fn invariance_examples() {
        let on_curve: Vec<(Cx, Cx)> = disk_samples(100, 1.1).into_iter().map(|x| (x, x * x)).collect();
        let mut c = CurveCandidate::from_coeffs(parabola_coeffs()).unwrap();
        let z2 = RationalMap::monomial(2);
        // P(x², y²) = y² − x⁴ = (y − x²)(y + x²)
        let r = curve_invariance_check(&mut c, &z2, 1, &z2, 1, &on_curve).unwrap();
        assert!(r.residual < 1e-8);
        assert_eq!(c.invariance_residual, Some(r.residual));
        // (z², z⁴) sends (x, x²) to (x², x⁸), off the parabola
        let r = curve_invariance_check(&mut c, &z2, 1, &RationalMap::monomial(4), 1, &on_curve).unwrap();
        assert!(r.residual > 1e-2);

        let shifted = RationalMap::real_polynomial(&[1.0, 0.0, 1.0]).unwrap();
        let r = curve_invariance_check(&mut c, &shifted, 1, &RationalMap::monomial(2), 1, &on_curve).unwrap();
        assert!(r.residual > 1e-2, "{}", r.residual);

        let off = vec![(cx(0.5), cx(0.9))];
        assert!(curve_invariance_check(&mut c, &shifted, 1, &shifted, 1, &off).is_err());
    }

    #[test]
    fn iterate_graphs() {
        let z2 = RationalMap::monomial(2);
        let c = iterate_graph_curve(&z2, 1, 0).unwrap();
        assert_eq!((c.m, c.n), (2, 1));
        assert_matches_up_to_sign(&c, &parabola_coeffs(), 1e-15);

        let c = iterate_graph_curve(&z2, 1, 1).unwrap();
        assert_eq!((c.m, c.n), (2, 2));
        assert_eq!(c.fit_residual, 0.0);
        assert_eq!(c.reducible, None);
        let s = 1.0 / 2f64.sqrt();
        assert!((c.coeff(2, 0).norm() - s).abs() < 1e-15 && (c.coeff(0, 2).norm() - s).abs() < 1e-15);

        let basilica = RationalMap::real_polynomial(&[-1.0, 0.0, 1.0]).unwrap();
        let c = iterate_graph_curve(&basilica, 1, 0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_matches_up_to_sign(&c, &[vec![cx(-s), cx(-s)], vec![cx(0.0), cx(0.0)], vec![cx(s), cx(0.0)]], 1e-15);

        assert!(iterate_graph_curve(&z2, 10, 0).is_err());
    }

    #[test]
    fn iterate_graph_is_invariant_under_diagonal_action() {
        let f = RationalMap::real_polynomial(&[-1.0, 0.0, 1.0]).unwrap();
        let (k, l) = (2, 1);
        let mut c = iterate_graph_curve(&f, k, l).unwrap();
        // points with f^k(x) = f^l(y): choose y, then solve f^k(x) = f^l(y)
        let mut on_curve = Vec::new();
        for y in disk_samples(40, 1.2) {
            let target = f.iterate(&SpherePoint::finite(y), l).unwrap();
            let mut fiber = vec![target];
            for _ in 0..k {
                fiber = fiber.iter().flat_map(|t| f.preimages(t).unwrap()).collect();
            }
            on_curve.push((fiber[0].to_finite().unwrap(), y));
        }
        let r = curve_invariance_check(&mut c, &f, 1, &f, 1, &on_curve).unwrap();
        assert!(r.residual < 1e-8, "{}", r.residual);
    }

    #[test]
    fn linearizer_graph_of_square_and_fourth_power() {
        let z2 = RationalMap::monomial(2);
        let z4 = RationalMap::monomial(4);
        let one = SpherePoint::real(1.0);
        let psi1 = koenigs_series(&z2, &one, 64).unwrap();
        let chi2 = generalized_koenigs(&z4, &one, cx(2.0), 1, 0, 64).unwrap();
        let samples = linearizer_graph_samples(&psi1, &chi2, &disk_samples(200, 1.0)).unwrap();
        assert_eq!(samples.len(), 200);
        let mut c = minimal_curve(&samples, 3, 3).unwrap();
        assert_eq!((c.m, c.n), (2, 1));
        assert!(c.fit_residual < 1e-8);
        assert_matches_up_to_sign(&c, &parabola_coeffs(), 1e-8);
        let r = curve_invariance_check(&mut c, &z2, 2, &z4, 1, &samples).unwrap();
        assert!(r.residual < 1e-8);
    }
}
