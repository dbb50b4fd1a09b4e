use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::RationalMap;
use crate::sphere::Cx;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenEvaluation {
    pub value: f64,
    /// First iterate index with `|f^n(z)| > R_esc`.
    pub escape_time: Option<usize>,
    pub converged: bool,
}

/// Radius beyond which every orbit of the polynomial escapes to infinity.
pub fn default_escape_radius(f: &RationalMap) -> f64 {
    let d = f.num.degree();
    let lead = f.num.leading().norm();
    let ratio = (0..d).map(|i| f.num.coeff(i).norm() / lead).fold(0.0, f64::max);
    let growth = (2.0 / lead).powf(1.0 / (d as f64 - 1.0));
    (1.0 + ratio).max(growth)
}

fn check_polynomial(f: &RationalMap) -> Result<()> {
    if !f.is_polynomial() || f.degree < 2 {
        return Err(Error::Precondition("Green's function needs a polynomial of degree at least 2".into()));
    }
    Ok(())
}

/// Extra iterations allowed after escape to reach the bailout radius.
const POST_ESCAPE_STEPS: usize = 256;

/// Escape rate `lim d^-n log|f^n(z)|` of a polynomial.
///
/// Once an orbit passes `R_esc` it is followed to a large bailout radius where
/// `log|w| + log|a_d|/(d-1)` matches the limit to machine precision.
pub fn green_function(f: &RationalMap, z: Cx, n_max: usize, r_esc: Option<f64>) -> Result<GreenEvaluation> {
    check_polynomial(f)?;
    Ok(green_unchecked(f, z, n_max, r_esc.unwrap_or_else(|| default_escape_radius(f))))
}

pub(crate) fn green_unchecked(f: &RationalMap, z: Cx, n_max: usize, r_esc: f64) -> GreenEvaluation {
    let d = f.num.degree();
    let df = d as f64;
    let lead = f.num.leading();
    let tail = lead.norm().ln() / (df - 1.0);
    // keep one more step below overflow: bailout^d * |a_d| must stay finite
    let bailout = 10f64.powf((280.0 / df).min(20.0)).max(r_esc * 2.0);
    let (esc2, bail2) = (r_esc * r_esc, bailout * bailout);
    let mut w = z;
    let mut escape_time = None;
    let mut n = 0usize;
    loop {
        let r2 = w.norm_sqr();
        if escape_time.is_none() && r2 > esc2 {
            escape_time = Some(n);
        }
        if r2 > bail2 || !r2.is_finite() {
            break;
        }
        let limit = escape_time.map_or(n_max, |t| t + POST_ESCAPE_STEPS);
        if n >= limit {
            break;
        }
        w = f.num.eval(w);
        n += 1;
    }
    match escape_time {
        None => GreenEvaluation {
            value: 0.0,
            escape_time: None,
            converged: false,
        },
        Some(_) => {
            let r2 = w.norm_sqr();
            let value = if r2.is_finite() {
                (0.5 * r2.ln() + tail) / df.powi(n as i32)
            } else {
                0.0
            };
            GreenEvaluation {
                value: value.max(0.0),
                escape_time,
                converged: true,
            }
        }
    }
}

/// Green's function together with `|grad G| = lim |(f^n)'(z)| / (d^n |f^n(z)|)`.
pub(crate) fn green_and_gradient(f: &RationalMap, z: Cx, n_max: usize, r_esc: f64) -> (f64, f64) {
    let d = f.num.degree();
    let df = d as f64;
    let tail = f.num.leading().norm().ln() / (df - 1.0);
    let bailout = 10f64.powf((280.0 / df).min(20.0)).max(r_esc * 2.0);
    let (esc2, bail2) = (r_esc * r_esc, bailout * bailout);
    let mut w = z;
    let mut dw = Cx::new(1.0, 0.0);
    let mut escaped_at = None;
    let mut n = 0usize;
    loop {
        let r2 = w.norm_sqr();
        if escaped_at.is_none() && r2 > esc2 {
            escaped_at = Some(n);
        }
        if r2 > bail2 || !r2.is_finite() {
            break;
        }
        if n >= escaped_at.map_or(n_max, |t| t + POST_ESCAPE_STEPS) {
            break;
        }
        let (v, dv) = f.num.eval_with_derivative(w);
        dw *= dv;
        w = v;
        n += 1;
    }
    let r2 = w.norm_sqr();
    if escaped_at.is_none() || !r2.is_finite() {
        return (0.0, 0.0);
    }
    let scale = df.powi(n as i32);
    let value = ((0.5 * r2.ln() + tail) / scale).max(0.0);
    (value, dw.norm() / (r2.sqrt() * scale))
}

/// `|grad G|` by central differences with step `1e-6 (1 + |w|)`.
pub fn green_gradient_norm(f: &RationalMap, w: Cx, n_max: usize, r_esc: Option<f64>) -> Result<f64> {
    check_polynomial(f)?;
    let r_esc = r_esc.unwrap_or_else(|| default_escape_radius(f));
    Ok(gradient_unchecked(f, w, n_max, r_esc))
}

pub(crate) fn gradient_unchecked(f: &RationalMap, w: Cx, n_max: usize, r_esc: f64) -> f64 {
    let h = 1e-6 * (1.0 + w.norm());
    let g = |z: Cx| green_unchecked(f, z, n_max, r_esc).value;
    let gx = (g(w + Cx::new(h, 0.0)) - g(w - Cx::new(h, 0.0))) / (2.0 * h);
    let gy = (g(w + Cx::new(0.0, h)) - g(w - Cx::new(0.0, h))) / (2.0 * h);
    gx.hypot(gy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    fn g(f: &RationalMap, z: Cx) -> f64 {
        green_function(f, z, 500, None).unwrap().value
    }

    #[test]
    fn square_map() {
        let f = RationalMap::monomial(2);
        assert!((g(&f, Cx::new(2.0, 0.0)) - 2f64.ln()).abs() < 1e-12);
        let inside = green_function(&f, Cx::new(0.5, 0.0), 500, None).unwrap();
        assert_eq!(inside.value, 0.0);
        assert_eq!(inside.escape_time, None);
        assert!(!inside.converged);
    }

    #[test]
    fn chebyshev_joukowski_oracle() {
        let f = RationalMap::real_polynomial(&[-2.0, 0.0, 1.0]).unwrap();
        for z in [Cx::new(3.0, 0.0), Cx::new(0.3, 1.7), Cx::new(-2.5, -0.2)] {
            // z = w + 1/w with |w| > 1
            let s = (z * z - 4.0).sqrt();
            let mut w = (z + s) / 2.0;
            if w.norm() < 1.0 {
                w = (z - s) / 2.0;
            }
            assert!((g(&f, z) - w.norm().ln()).abs() < 1e-10, "z = {z}");
        }
        assert!((g(&f, Cx::new(3.0, 0.0)) - 0.962424).abs() < 1e-6);
    }

    #[test]
    fn scaled_leading_coefficient() {
        // f(z) = 2 z^2 is conjugate to z^2 by z -> 2z, so G(z) = log|2z|
        let f = RationalMap::real_polynomial(&[0.0, 0.0, 2.0]).unwrap();
        let z = Cx::new(0.7, 0.4);
        assert!((g(&f, z) - (2.0 * z.norm()).ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_log_modulus() {
        let f = RationalMap::monomial(3);
        let w = Cx::new(1.5, -2.0);
        let grad = green_gradient_norm(&f, w, 500, None).unwrap();
        assert!((grad - 1.0 / w.norm()).abs() < 1e-6);
        let (_, exact) = green_and_gradient(&f, w, 500, default_escape_radius(&f));
        assert!((exact - 1.0 / w.norm()).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let f = RationalMap::real_polynomial(&[-0.75, 0.0, 1.0]).unwrap();
        let r = default_escape_radius(&f);
        for w in [Cx::new(0.1, 1.3), Cx::new(-1.6, 0.2), Cx::new(2.5, -2.5)] {
            let (g, grad) = green_and_gradient(&f, w, 500, r);
            assert!((g - green_unchecked(&f, w, 500, r).value).abs() < 1e-14);
            let fd = gradient_unchecked(&f, w, 500, r);
            assert!((grad - fd).abs() < 1e-6 * grad.max(1.0), "{grad} vs {fd}");
        }
    }

    #[test]
    fn rejects_rational_maps() {
        let f = RationalMap::new(Poly::from_real(&[1.0]), Poly::from_real(&[0.0, 0.0, 1.0])).unwrap();
        assert!(green_function(&f, Cx::new(2.0, 0.0), 10, None).is_err());
    }
}
