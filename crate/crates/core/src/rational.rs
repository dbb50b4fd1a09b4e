//! Rational maps of the Riemann sphere: evaluation, derivatives, composition.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::roots;
use crate::sphere::{Chart, Cx, SpherePoint};

/// Tolerance on the normalized resultant below which num/den are declared non-coprime.
pub const EPS_COPRIME: f64 = 1e-10;

/// Points whose affine modulus exceeds this are differentiated in the reciprocal chart.
pub const DERIVATIVE_CHART_LIMIT: f64 = 1e6;

const ONE: Cx = Cx::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalMap {
    pub num: Poly,
    pub den: Poly,
    pub degree: usize,
}

impl RationalMap {
    /// Validated constructor: degree at least 1, coprime numerator and denominator.
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidMap("denominator is identically zero".into()));
        }
        if !num.is_finite() || !den.is_finite() {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        let map = Self::from_parts(num, den);
        if map.degree < 1 {
            return Err(Error::InvalidMap("constant map".into()));
        }
        if !map.num.is_zero() && map.den.degree() > 0 && map.num.degree() > 0 {
            let r = normalized_resultant(&map.num, &map.den);
            if r <= EPS_COPRIME {
                return Err(Error::NotCoprime(r));
            }
        }
        Ok(map)
    }

    /// Normalizes without the coprimality check (used for maps built by composition).
    fn from_parts(mut num: Poly, mut den: Poly) -> Self {
        if den.degree() == 0 && !den.is_zero() {
            let c = den.coeffs[0];
            num = num.scale(c.inv());
            den = Poly::one();
        }
        num.trim(0.0);
        den.trim(0.0);
        let degree = num.degree().max(den.degree());
        RationalMap { num, den, degree }
    }

    pub fn polynomial(coeffs: Poly) -> Result<Self> {
        Self::new(coeffs, Poly::one())
    }

    /// Polynomial with real coefficients, ascending.
    pub fn real_polynomial(coeffs: &[f64]) -> Result<Self> {
        Self::polynomial(Poly::from_real(coeffs))
    }

    pub fn identity() -> Self {
        Self::from_parts(Poly::x(), Poly::one())
    }

    /// `z -> z^d`.
    pub fn monomial(d: usize) -> Self {
        let mut c = vec![Cx::new(0.0, 0.0); d + 1];
        c[d] = ONE;
        Self::from_parts(Poly::new(c), Poly::one())
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.degree() == 0
    }

    /// Image of `[u : v]` as a homogeneous pair (not normalized).
    fn eval_pair(&self, u: Cx, v: Cx) -> (Cx, Cx) {
        let (a, _, _) = self.num.eval_homogeneous(self.degree, u, v);
        let (b, _, _) = self.den.eval_homogeneous(self.degree, u, v);
        (a, b)
    }

    fn coefficient_scale(&self) -> f64 {
        self.num.coeffs.iter().chain(self.den.coeffs.iter()).map(|c| c.norm()).sum()
    }

    pub fn eval(&self, z: &SpherePoint) -> Result<SpherePoint> {
        let (u, v) = z.homogeneous();
        let (a, b) = self.eval_pair(u, v);
        let scale = self.coefficient_scale() * u.norm().max(v.norm()).powi(self.degree as i32);
        if a.norm().max(b.norm()) <= 1e-14 * scale {
            return Err(Error::Indeterminate(z.to_string()));
        }
        SpherePoint::from_homogeneous(a, b).ok_or_else(|| Error::Indeterminate(z.to_string()))
    }

    pub fn eval_cx(&self, z: Cx) -> Result<SpherePoint> {
        self.eval(&SpherePoint::finite(z))
    }

    pub fn iterate(&self, z: &SpherePoint, n: usize) -> Result<SpherePoint> {
        let mut w = *z;
        for _ in 0..n {
            w = self.eval(&w)?;
        }
        Ok(w)
    }

    /// Derivative in the chart-consistent local coordinates at `z` and `f(z)`.
    ///
    /// Both charts are standard when the points have modulus at most
    /// [`DERIVATIVE_CHART_LIMIT`]; otherwise the reciprocal chart is used on that
    /// side. Products along a cycle therefore give the chart-independent multiplier.
    pub fn derivative(&self, z: &SpherePoint) -> Result<Cx> {
        let input = derivative_chart(z);
        let t = z.in_chart(input);
        let (u, v) = match input {
            Chart::Standard => (t, ONE),
            Chart::Reciprocal => (ONE, t),
        };
        let (a, au, av) = self.num.eval_homogeneous(self.degree, u, v);
        let (b, bu, bv) = self.den.eval_homogeneous(self.degree, u, v);
        let (da, db) = match input {
            Chart::Standard => (au, bu),
            Chart::Reciprocal => (av, bv),
        };
        let image = SpherePoint::from_homogeneous(a, b).ok_or_else(|| Error::Indeterminate(z.to_string()))?;
        let out = match derivative_chart(&image) {
            Chart::Standard => (da * b - a * db) / (b * b),
            Chart::Reciprocal => (db * a - b * da) / (a * a),
        };
        if out.re.is_finite() && out.im.is_finite() {
            Ok(out)
        } else {
            Err(Error::Indeterminate(z.to_string()))
        }
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &RationalMap) -> Result<RationalMap> {
        let d = self.degree;
        let p_pows = powers(&g.num, d);
        let q_pows = powers(&g.den, d);
        let mut num = Poly::zero();
        let mut den = Poly::zero();
        for i in 0..=d {
            let term = &p_pows[i] * &q_pows[d - i];
            let (a, b) = (self.num.coeff(i), self.den.coeff(i));
            if a != Cx::new(0.0, 0.0) {
                num = &num + &term.scale(a);
            }
            if b != Cx::new(0.0, 0.0) {
                den = &den + &term.scale(b);
            }
        }
        if !num.is_finite() || !den.is_finite() {
            return Err(Error::CoefficientOverflow(format!(
                "composing maps of degrees {} and {}",
                d, g.degree
            )));
        }
        num.trim(1e-15);
        den.trim(1e-15);
        let out = Self::from_parts(num, den);
        if !out.num.is_finite() || !out.den.is_finite() {
            return Err(Error::CoefficientOverflow("normalizing a composition".into()));
        }
        Ok(out)
    }

    /// `self^n` as an explicit rational map.
    pub fn power(&self, n: usize) -> Result<RationalMap> {
        let mut acc = RationalMap::identity();
        for _ in 0..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Conjugate by `z -> 1/z`: the map `w -> 1 / f(1/w)`.
    pub fn conjugate_by_inversion(&self) -> RationalMap {
        let d = self.degree;
        Self::from_parts(self.den.reversed(d), self.num.reversed(d))
    }

    /// Finite critical points: zeros of `N'D - ND'`.
    pub fn critical_points(&self) -> Result<Vec<Cx>> {
        let w = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        roots::poly_roots(&w)
    }

    /// All preimages of `target`, with multiplicity.
    pub fn preimages(&self, target: &SpherePoint) -> Result<Vec<SpherePoint>> {
        let d = self.degree;
        let (t0, t1) = target.homogeneous();
        // Solve t1 * N(w) - t0 * D(w) = 0 in homogeneous degree d.
        let eq = &self.num.scale(t1) - &self.den.scale(t0);
        let mut out: Vec<SpherePoint> = roots::poly_roots(&eq)?.into_iter().map(SpherePoint::finite).collect();
        let missing = d.saturating_sub(eq.degree());
        out.extend(std::iter::repeat_n(SpherePoint::INFINITY, missing));
        Ok(out)
    }

    /// Hex SHA-256 of the coefficient bit patterns.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for (tag, p) in [(b'n', &self.num), (b'd', &self.den)] {
            h.update([tag]);
            for c in &p.coeffs {
                h.update(c.re.to_le_bytes());
                h.update(c.im.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses `num = [...]` and optional `den = [...]` from structured config text.
    /// Entries are reals or `[re, im]` pairs, ascending degree.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        Self::from_table(&table)
    }

    pub fn from_table(table: &toml::Table) -> Result<Self> {
        let num = match table.get("num") {
            Some(v) => parse_coeffs("num", v)?,
            None => return Err(Error::Config("missing key `num`".into())),
        };
        let den = match table.get("den") {
            Some(v) => parse_coeffs("den", v)?,
            None => Poly::one(),
        };
        for key in table.keys() {
            if key != "num" && key != "den" {
                return Err(Error::Config(format!("unknown key `{key}` in map")));
            }
        }
        Self::new(num, den).map_err(|e| Error::Config(format!("map: {e}")))
    }

    pub fn to_config_string(&self) -> String {
        let fmt = |p: &Poly| {
            let items: Vec<String> = p.coeffs.iter().map(|c| format!("[{:?}, {:?}]", c.re, c.im)).collect();
            format!("[{}]", items.join(", "))
        };
        format!("num = {}\nden = {}\n", fmt(&self.num), fmt(&self.den))
    }
}

fn derivative_chart(z: &SpherePoint) -> Chart {
    match z.to_finite() {
        Some(w) if w.norm() <= DERIVATIVE_CHART_LIMIT => Chart::Standard,
        _ => Chart::Reciprocal,
    }
}

fn powers(p: &Poly, d: usize) -> Vec<Poly> {
    let mut out = Vec::with_capacity(d + 1);
    out.push(Poly::one());
    for k in 1..=d {
        out.push(&out[k - 1] * p);
    }
    out
}

pub(crate) fn parse_complex(key: &str, v: &toml::Value) -> Result<Cx> {
    let num = |x: &toml::Value| -> Option<f64> { x.as_float().or_else(|| x.as_integer().map(|i| i as f64)) };
    if let Some(x) = num(v) {
        return Ok(Cx::new(x, 0.0));
    }
    if let Some(arr) = v.as_array() {
        if arr.len() == 2 {
            if let (Some(re), Some(im)) = (num(&arr[0]), num(&arr[1])) {
                return Ok(Cx::new(re, im));
            }
        }
    }
    Err(Error::Config(format!("key `{key}`: expected a number or [re, im] pair, got {v}")))
}

fn parse_coeffs(key: &str, v: &toml::Value) -> Result<Poly> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config(format!("key `{key}`: expected an array of coefficients")))?;
    if arr.is_empty() {
        return Err(Error::Config(format!("key `{key}`: empty coefficient list")));
    }
    let coeffs = arr.iter().map(|c| parse_complex(key, c)).collect::<Result<Vec<_>>>()?;
    Ok(Poly::new(coeffs))
}

/// `|Res(p, q)| / (‖p‖^deg q · ‖q‖^deg p)`, in `[0, 1]` by Hadamard's inequality.
pub fn normalized_resultant(p: &Poly, q: &Poly) -> f64 {
    let (m, n) = (p.degree(), q.degree());
    if p.is_zero() || q.is_zero() {
        return 0.0;
    }
    if m == 0 || n == 0 {
        return 1.0;
    }
    let size = m + n;
    let mut a = vec![Cx::new(0.0, 0.0); size * size];
    // n rows of p coefficients, m rows of q coefficients (descending powers).
    for r in 0..n {
        for (k, c) in p.coeffs.iter().rev().enumerate() {
            a[r * size + r + k] = *c;
        }
    }
    for r in 0..m {
        for (k, c) in q.coeffs.iter().rev().enumerate() {
            a[(n + r) * size + r + k] = *c;
        }
    }
    let log_det = match log_abs_det(&mut a, size) {
        Some(v) => v,
        None => return 0.0,
    };
    let log_bound = n as f64 * p.norm2().ln() + m as f64 * q.norm2().ln();
    (log_det - log_bound).exp().min(1.0)
}

/// `log |det A|` by LU with partial pivoting; `None` if singular.
fn log_abs_det(a: &mut [Cx], n: usize) -> Option<f64> {
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))?;
        let pv = a[piv * n + col];
        if pv.norm() == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
        }
        acc += pv.norm().ln();
        for r in col + 1..n {
            let factor = a[r * n + col] / pv;
            if factor.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[r * n + k] -= factor * v;
            }
        }
    }
    Some(acc)
}
