//! Dense univariate polynomials with complex coefficients, ascending order.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::sphere::Cx;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<Cx>,
}

const ZERO: Cx = Cx::new(0.0, 0.0);
const ONE: Cx = Cx::new(1.0, 0.0);

impl Poly {
    /// Builds a polynomial and strips exactly-zero leading coefficients.
    pub fn new(coeffs: Vec<Cx>) -> Self {
        let mut p = Poly { coeffs };
        p.trim(0.0);
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Cx::new(c, 0.0)).collect())
    }

    pub fn constant(c: Cx) -> Self {
        Self::new(vec![c])
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        Self::constant(ONE)
    }

    /// The identity polynomial `z`.
    pub fn x() -> Self {
        Poly {
            coeffs: vec![ZERO, ONE],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Cx {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn coeff(&self, i: usize) -> Cx {
        self.coeffs.get(i).copied().unwrap_or(ZERO)
    }

    /// Drops leading coefficients with modulus `<= rel * max|c|`.
    pub fn trim(&mut self, rel: f64) {
        let scale = self.max_abs();
        while let Some(c) = self.coeffs.last() {
            if c.norm() <= rel * scale || *c == ZERO {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn norm2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn eval(&self, z: Cx) -> Cx {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, z: Cx) -> (Cx, Cx) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Evaluates the degree-`d` homogenization `sum c_i u^i v^(d-i)` and its partials.
    pub fn eval_homogeneous(&self, d: usize, u: Cx, v: Cx) -> (Cx, Cx, Cx) {
        // Horner in u/v expressed without division: work with powers explicitly.
        let mut val = ZERO;
        let mut du = ZERO;
        let mut dv = ZERO;
        let n = self.coeffs.len();
        if n == 0 {
            return (ZERO, ZERO, ZERO);
        }
        // u_pow[i] = u^i, v_pow[j] = v^j for i, j <= d
        let mut u_pow = Vec::with_capacity(d + 1);
        let mut v_pow = Vec::with_capacity(d + 1);
        u_pow.push(ONE);
        v_pow.push(ONE);
        for k in 1..=d {
            u_pow.push(u_pow[k - 1] * u);
            v_pow.push(v_pow[k - 1] * v);
        }
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let j = d - i;
            val += c * u_pow[i] * v_pow[j];
            if i > 0 {
                du += c * (i as f64) * u_pow[i - 1] * v_pow[j];
            }
            if j > 0 {
                dv += c * (j as f64) * u_pow[i] * v_pow[j - 1];
            }
        }
        (val, du, dv)
    }

    /// Coefficients reversed as a degree-`d` polynomial: `z^d p(1/z)`.
    pub fn reversed(&self, d: usize) -> Poly {
        let mut c = vec![ZERO; d + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            c[d - i] = a;
        }
        Poly::new(c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Cx) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn pow(&self, k: usize) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Taylor coefficients at `p`: the polynomial `q(h) = self(p + h)`.
    pub fn shift(&self, p: Cx) -> Poly {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let next = c[j + 1];
                c[j] += p * next;
            }
        }
        Poly::new(c)
    }

    /// `self(g(z))` by Horner's scheme.
    pub fn compose(&self, g: &Poly) -> Poly {
        let mut acc = Poly::zero();
        for &c in self.coeffs.iter().rev() {
            acc = &(&acc * g) + &Poly::constant(c);
        }
        acc
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-ONE)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }
}
