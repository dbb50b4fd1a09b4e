//! Poincaré–Koenigs linearizers at repelling fixed points.
//!
//! The linearizer `ψ` of `f` at a repelling fixed point `p` with multiplier `λ`
//! is the entire map with `ψ(0) = p`, `ψ'(0) = 1` and `f(ψ(ζ)) = ψ(λζ)`. Its
//! Taylor coefficients are determined one at a time by matching powers of `ζ`
//! in `N(ψ(ζ)) = D(ψ(ζ)) · ψ(λζ)`, where `f = N/D`. Outside the certified disk
//! the functional equation is used to pull `ζ` back into the disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::sphere::{Cx, SpherePoint};

pub const DEFAULT_TRUNCATION: usize = 64;
pub const MAX_TRUNCATION: usize = 512;
/// Residual bound defining the trust radius.
pub const TRUST_RESIDUAL: f64 = 1e-8;
pub const BOUNDARY_SAMPLES: usize = 64;
/// Dyadic sweep exponents for the trust radius.
const SWEEP: std::ops::RangeInclusive<i32> = -30..=12;

const ZERO: Cx = Cx::new(0.0, 0.0);
const ONE: Cx = Cx::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linearizer {
    pub base: SpherePoint,
    pub lambda: Cx,
    /// `c_0 = p, c_1 = 1, ...` in the chart where the series lives.
    pub coeffs: Vec<Cx>,
    pub trust_radius: f64,
    pub residual_at_trust: f64,
    /// The map being linearized.
    pub map: RationalMap,
    /// True when the series is built for `1/f(1/w)` at `w = 0` (base at infinity).
    pub inverted: bool,
}

impl Linearizer {
    /// The truncated series at `ζ`, in the series chart.
    pub fn series(&self, zeta: Cx) -> Cx {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * zeta + c)
    }

    fn series_point(&self, zeta: Cx) -> SpherePoint {
        let w = self.series(zeta);
        if self.inverted {
            SpherePoint::from_homogeneous(ONE, w).unwrap_or(SpherePoint::INFINITY)
        } else {
            SpherePoint::finite(w)
        }
    }

    /// Number of pullback steps needed to bring `ζ` into the trust disk.
    pub fn pullback_steps(&self, zeta: Cx) -> usize {
        let r = zeta.norm();
        if r <= self.trust_radius {
            return 0;
        }
        let m = ((r / self.trust_radius).ln() / self.lambda.norm().ln()).ceil();
        m.max(0.0) as usize
    }

    /// `ψ(ζ)`, extending the series by the functional equation.
    pub fn eval(&self, zeta: Cx) -> Result<SpherePoint> {
        self.eval_with_steps(zeta, self.pullback_steps(zeta))
    }

    /// `f^m(series(λ^{-m} ζ))` for a caller-chosen number of steps.
    pub fn eval_with_steps(&self, zeta: Cx, m: usize) -> Result<SpherePoint> {
        let scaled = zeta / self.lambda.powu(m as u32);
        let start = self.series_point(scaled);
        self.map.iterate(&start, m)
    }

    /// Max chordal defect of `f(S(ζ)) = S(λζ)` for the truncated series `S` on `|ζ| = radius`.
    pub fn series_residual(&self, radius: f64, samples: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..samples.max(1) {
            let zeta = Cx::from_polar(radius, std::f64::consts::TAU * k as f64 / samples.max(1) as f64);
            let lhs = self.map.eval(&self.series_point(zeta))?;
            let rhs = self.series_point(self.lambda * zeta);
            let gap = lhs.chordal(&rhs);
            if gap.is_nan() {
                return Ok(1.0);
            }
            worst = worst.max(gap);
        }
        Ok(worst)
    }
}

/// Certification residual of a linearizer on the circle `|ζ| = radius`.
pub fn linearizer_residual(lin: &Linearizer, radius: f64, samples: usize) -> Result<f64> {
    if radius < 0.0 {
        return Err(Error::Precondition("radius must be nonnegative".into()));
    }
    lin.series_residual(radius, samples)
}

/// Builds the truncated linearizer at a repelling fixed point.
pub fn koenigs_series(f: &RationalMap, p: &SpherePoint, truncation: usize) -> Result<Linearizer> {
    if !(1..=MAX_TRUNCATION).contains(&truncation) {
        return Err(Error::Precondition(format!(
            "truncation {truncation} outside 1..={MAX_TRUNCATION}"
        )));
    }
    let image = f.eval(p)?;
    if image.chordal(p) > 1e-8 {
        return Err(Error::Precondition(format!("{p} is not a fixed point")));
    }
    let inverted = p.is_infinity() || p.to_finite().map(|z| z.norm() > 1e6).unwrap_or(true);
    let (g, base) = if inverted {
        (f.conjugate_by_inversion(), p.reciprocal().to_finite().unwrap_or(ZERO))
    } else {
        (f.clone(), p.to_finite().expect("finite base"))
    };
    let lambda = g.derivative(&SpherePoint::finite(base))?;
    if lambda.norm() <= 1.0 {
        return Err(Error::NotRepelling(lambda.norm()));
    }
    let coeffs = koenigs_coefficients(&g, base, lambda, truncation);
    let mut lin = Linearizer {
        base: *p,
        lambda,
        coeffs,
        trust_radius: 0.0,
        residual_at_trust: f64::INFINITY,
        map: f.clone(),
        inverted,
    };
    let mut trust = None;
    for k in SWEEP {
        let rho = 2f64.powi(k);
        let res = lin.series_residual(rho, BOUNDARY_SAMPLES)?;
        if res < TRUST_RESIDUAL {
            trust = Some((rho, res));
        } else {
            break;
        }
    }
    let (rho, res) = trust.ok_or_else(|| {
        Error::Precondition("series fails the functional equation on every sweep radius".into())
    })?;
    lin.trust_radius = rho;
    lin.residual_at_trust = res;
    Ok(lin)
}

/// Taylor coefficients `c_0..c_N` of the linearizer of `g` at the fixed point `p`.
fn koenigs_coefficients(g: &RationalMap, p: Cx, lambda: Cx, truncation: usize) -> Vec<Cx> {
    let big_n = truncation;
    // Taylor coefficients of numerator and denominator at p.
    let nt = g.num.shift(p);
    let et = g.den.shift(p);
    let n_c = |j: usize| nt.coeff(j);
    let e_c = |j: usize| et.coeff(j);
    let dmax = nt.degree().max(et.degree()).max(1);

    let mut lam_pow = vec![ONE; big_n + 1];
    for k in 1..=big_n {
        lam_pow[k] = lam_pow[k - 1] * lambda;
    }
    // powers[j][k] = [ (ψ - p)^j ]_k, j = 1..=dmax
    let mut powers = vec![vec![ZERO; big_n + 1]; dmax + 1];
    // coefficients of ψ(λζ) beyond the constant term
    let mut scaled = vec![ZERO; big_n + 1];
    // comp_d[i] = [ D(ψ(ζ)) ]_i
    let mut comp_d = vec![ZERO; big_n + 1];
    comp_d[0] = e_c(0);

    let mut c = vec![ZERO; big_n + 1];
    c[0] = p;
    if big_n >= 1 {
        c[1] = ONE;
        powers[1][1] = ONE;
        for row in powers.iter_mut().take(dmax + 1).skip(2) {
            row[1] = ZERO;
        }
        scaled[1] = lambda;
        comp_d[1] = e_c(1);
    }
    for n in 2..=big_n {
        for j in 2..=dmax {
            let mut acc = ZERO;
            for i in 1..n {
                let a = powers[1][i];
                let b = powers[j - 1][n - i];
                if a != ZERO && b != ZERO {
                    acc += a * b;
                }
            }
            powers[j][n] = acc;
        }
        let known_l: Cx = (2..=dmax).map(|j| n_c(j) * powers[j][n]).sum();
        let higher_d: Cx = (2..=dmax).map(|j| e_c(j) * powers[j][n]).sum();
        let mut known_r = p * higher_d;
        for i in 1..n {
            known_r += comp_d[i] * scaled[n - i];
        }
        let denom = n_c(1) - p * e_c(1) - e_c(0) * lam_pow[n];
        let cn = if denom.norm().is_finite() {
            (known_r - known_l) / denom
        } else {
            ZERO
        };
        let cn = if cn.re.is_finite() && cn.im.is_finite() { cn } else { ZERO };
        c[n] = cn;
        powers[1][n] = cn;
        let s = cn * lam_pow[n];
        scaled[n] = if s.re.is_finite() && s.im.is_finite() { s } else { ZERO };
        comp_d[n] = e_c(1) * cn + higher_d;
    }
    c.truncate(big_n + 1);
    c
}

/// `χ(ζ) = ψ(β ζ^ℓ)`, satisfying `f(χ(ζ)) = χ(κζ)` with `κ^ℓ = λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedLinearizer {
    pub inner: Linearizer,
    pub beta: Cx,
    pub ell: u32,
    pub kappa: Cx,
    pub root_index: u32,
}

impl GeneralizedLinearizer {
    pub fn eval(&self, zeta: Cx) -> Result<SpherePoint> {
        self.inner.eval(self.beta * zeta.powu(self.ell))
    }

    /// Radius of the disk mapped into the trust disk of the inner linearizer.
    pub fn certified_radius(&self) -> f64 {
        (self.inner.trust_radius / self.beta.norm()).powf(1.0 / self.ell as f64)
    }

    /// Max chordal defect of `f(χ(ζ)) = χ(κζ)` over a polar grid filling `|ζ| <= radius`.
    pub fn residual(&self, radius: f64, samples: usize) -> Result<f64> {
        let rings = 8;
        let mut worst = 0.0f64;
        for r in 1..=rings {
            let rho = radius * r as f64 / rings as f64;
            for k in 0..samples {
                let zeta = Cx::from_polar(rho, std::f64::consts::TAU * (k as f64 + 0.5) / samples as f64);
                let lhs = self.inner.map.eval(&self.eval(zeta)?)?;
                let rhs = self.eval(self.kappa * zeta)?;
                worst = worst.max(lhs.chordal(&rhs));
            }
        }
        Ok(worst)
    }
}

/// The `root_index`-th `ℓ`-th root of `λ`: principal root rotated by `2π·root_index/ℓ`.
pub fn select_root(lambda: Cx, ell: u32, root_index: u32) -> Cx {
    let principal = (lambda.ln() / ell as f64).exp();
    principal * Cx::from_polar(1.0, std::f64::consts::TAU * root_index as f64 / ell as f64)
}

pub fn generalized_koenigs(
    f: &RationalMap,
    p: &SpherePoint,
    beta: Cx,
    ell: u32,
    root_index: u32,
    truncation: usize,
) -> Result<GeneralizedLinearizer> {
    if beta == ZERO {
        return Err(Error::Precondition("beta must be nonzero".into()));
    }
    if ell == 0 || root_index >= ell {
        return Err(Error::Precondition(format!(
            "need ell >= 1 and 0 <= root_index < ell (got {ell}, {root_index})"
        )));
    }
    let inner = koenigs_series(f, p, truncation)?;
    let kappa = select_root(inner.lambda, ell, root_index);
    Ok(GeneralizedLinearizer {
        inner,
        beta,
        ell,
        kappa,
        root_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn exponential_fixture() {
        let f = RationalMap::monomial(2);
        let lin = koenigs_series(&f, &SpherePoint::real(1.0), 30).unwrap();
        assert_eq!(lin.coeffs[0], ONE);
        assert_eq!(lin.coeffs[1], ONE);
        for n in 0..=30 {
            assert!((lin.coeffs[n] - Cx::new(1.0 / factorial(n), 0.0)).norm() < 1e-14, "c_{n}");
        }
    }

    #[test]
    fn cosh_fixture() {
        let f = RationalMap::real_polynomial(&[-2.0, 0.0, 1.0]).unwrap();
        let lin = koenigs_series(&f, &SpherePoint::real(2.0), 20).unwrap();
        assert_eq!(lin.coeffs[0], Cx::new(2.0, 0.0));
        assert_eq!(lin.coeffs[1], ONE);
        for n in 0..=20 {
            let want = 2.0 / factorial(2 * n);
            assert!((lin.coeffs[n].re - want).abs() < 1e-14 * want.max(1e-300) + 1e-300, "c_{n}");
        }
    }

    #[test]
    fn eval_examples() {
        let f = RationalMap::monomial(2);
        let lin = koenigs_series(&f, &SpherePoint::real(1.0), DEFAULT_TRUNCATION).unwrap();
        let v = lin.eval(Cx::new(10.0, 0.0)).unwrap().to_finite().unwrap();
        let want = 10f64.exp();
        assert!(((v.re - want) / want).abs() < 1e-6);
        assert_eq!(lin.eval(ZERO).unwrap().to_finite(), Some(ONE));

        let cheb = RationalMap::real_polynomial(&[-2.0, 0.0, 1.0]).unwrap();
        let lin = koenigs_series(&cheb, &SpherePoint::real(2.0), DEFAULT_TRUNCATION).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let v = lin.eval(Cx::new(-pi2, 0.0)).unwrap().to_finite().unwrap();
        assert!((v - Cx::new(-2.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn residual_examples() {
        let f = RationalMap::monomial(2);
        let lin = koenigs_series(&f, &SpherePoint::real(1.0), 32).unwrap();
        assert!(linearizer_residual(&lin, 0.5, 64).unwrap() < 1e-12);
        assert_eq!(linearizer_residual(&lin, 0.0, 64).unwrap(), 0.0);
        let short = koenigs_series(&f, &SpherePoint::real(1.0), 2).unwrap();
        assert!(linearizer_residual(&short, 1.0, 64).unwrap() > 1e-3);
        assert!(short.residual_at_trust < TRUST_RESIDUAL);
    }

    #[test]
    fn not_repelling() {
        let f = RationalMap::monomial(2);
        assert!(matches!(
            koenigs_series(&f, &SpherePoint::real(0.0), 16),
            Err(Error::NotRepelling(_))
        ));
        assert!(koenigs_series(&f, &SpherePoint::real(0.5), 16).is_err());
    }

    #[test]
    fn generalized_examples() {
        let f = RationalMap::monomial(2);
        let p = SpherePoint::real(1.0);
        let chi = generalized_koenigs(&f, &p, ONE, 2, 0, DEFAULT_TRUNCATION).unwrap();
        assert!((chi.kappa - Cx::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!(chi.residual(1.0, 64).unwrap() < 1e-8);
        let z = Cx::new(0.3, 0.4);
        let v = chi.eval(z).unwrap().to_finite().unwrap();
        assert!((v - (z * z).exp()).norm() < 1e-12);

        let id = generalized_koenigs(&f, &p, ONE, 1, 0, DEFAULT_TRUNCATION).unwrap();
        assert_eq!(id.kappa, id.inner.lambda);
        assert_eq!(id.eval(z).unwrap(), id.inner.eval(z).unwrap());

        let twice = generalized_koenigs(&f, &p, Cx::new(2.0, 0.0), 1, 0, DEFAULT_TRUNCATION).unwrap();
        let v = twice.eval(z).unwrap().to_finite().unwrap();
        assert!((v - (z * 2.0).exp()).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_generalized_parameters() {
        let f = RationalMap::monomial(2);
        let p = SpherePoint::real(1.0);
        assert!(generalized_koenigs(&f, &p, ZERO, 1, 0, 16).is_err());
        assert!(generalized_koenigs(&f, &p, ONE, 2, 2, 16).is_err());
    }

    #[test]
    fn repelling_point_at_infinity() {
        // f = 1/g(1/z) with g(w) = 2w + w^2, so infinity is repelling with multiplier 2
        let g = RationalMap::real_polynomial(&[0.0, 2.0, 1.0]).unwrap();
        let f = g.conjugate_by_inversion();
        let lin = koenigs_series(&f, &SpherePoint::INFINITY, 32).unwrap();
        assert!(lin.inverted);
        assert!((lin.lambda - Cx::new(2.0, 0.0)).norm() < 1e-14);
        assert!(lin.eval(ZERO).unwrap().is_infinity());
        let z = Cx::new(0.2, 0.1);
        let lhs = f.eval(&lin.eval(z).unwrap()).unwrap();
        let rhs = lin.eval(z * 2.0).unwrap();
        assert!(lhs.chordal(&rhs) < 1e-10);
    }
}
