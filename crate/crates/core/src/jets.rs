//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] carries every partial derivative of a scalar up to a fixed total
//! order at one point. Coefficients are Taylor-normalized (the coefficient of
//! the multi-index `α` is `∂^α f / α!`), so multiplication is a plain
//! convolution of coefficient arrays. Multi-indices are ordered by total
//! degree and then lexicographically on the sorted list of variable indices,
//! which makes a jet of lower order a prefix of the same jet at higher order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use thiserror::Error;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 4;
/// Highest supported number of variables.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Multi-index bookkeeping for one dimension, built once at [`MAX_ORDER`].
#[derive(Debug)]
pub struct Layout {
    dim: usize,
    exponents: Vec<Vec<u8>>,
    /// `offsets[k]` = number of multi-indices of total degree `< k`.
    offsets: Vec<usize>,
    /// For each result index, the `(a, b)` pairs with `α_a + α_b = α_result`.
    mul_pairs: Vec<Vec<(u16, u16)>>,
    /// `shift[a][i]` = index of `α_a + e_i`, when its degree is within range.
    shift: Vec<Vec<Option<u16>>>,
}

impl Layout {
    fn build(dim: usize) -> Self {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        let mut offsets = Vec::with_capacity(MAX_ORDER + 2);
        for degree in 0..=MAX_ORDER {
            offsets.push(exponents.len());
            for vars in non_decreasing(dim, degree, 0) {
                let mut e = vec![0u8; dim];
                for v in vars {
                    e[v] += 1;
                }
                exponents.push(e);
            }
        }
        offsets.push(exponents.len());

        let positions: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let find = |e: &[u8]| positions.get(e).copied();
        let len = exponents.len();
        let mut mul_pairs = vec![Vec::new(); len];
        for a in 0..len {
            for b in 0..len {
                let sum: Vec<u8> = exponents[a]
                    .iter()
                    .zip(&exponents[b])
                    .map(|(x, y)| x + y)
                    .collect();
                if sum.iter().map(|&x| x as usize).sum::<usize>() <= MAX_ORDER {
                    let c = find(&sum).expect("sum of multi-indices within order");
                    mul_pairs[c].push((a as u16, b as u16));
                }
            }
        }
        let shift = (0..len)
            .map(|a| {
                (0..dim)
                    .map(|i| {
                        let mut e = exponents[a].clone();
                        e[i] += 1;
                        find(&e).map(|x| x as u16)
                    })
                    .collect()
            })
            .collect();
        Layout {
            dim,
            exponents,
            offsets,
            mul_pairs,
            shift,
        }
    }

    /// Number of coefficients of a jet of the given order.
    pub fn count(&self, order: usize) -> usize {
        self.offsets[order + 1]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exponent vector of coefficient `index`.
    pub fn exponent(&self, index: usize) -> &[u8] {
        &self.exponents[index]
    }

    /// Position of an exponent vector in storage order.
    pub fn index_of(&self, exponent: &[u8]) -> Option<usize> {
        self.exponents.iter().position(|e| e.as_slice() == exponent)
    }
}

/// Shared layout for `dim` variables.
pub fn layout(dim: usize) -> &'static Layout {
    static LAYOUTS: [OnceLock<Layout>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    assert!(
        (1..=MAX_DIM).contains(&dim),
        "jet dimension {dim} outside 1..={MAX_DIM}"
    );
    LAYOUTS[dim].get_or_init(|| Layout::build(dim))
}

/// Number of Taylor coefficients for `dim` variables through `order`.
pub fn coefficient_count(dim: usize, order: usize) -> usize {
    layout(dim).count(order)
}

/// Truncated Taylor expansion of a scalar in `dim` variables.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    order: usize,
    coeffs: Vec<f64>,
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        self.layout.dim == other.layout.dim
            && self.order == other.order
            && self.coeffs == other.coeffs
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.layout.dim)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(value: f64, dim: usize, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let layout = layout(dim);
        let mut coeffs = vec![0.0; layout.count(order)];
        coeffs[0] = value;
        Jet {
            layout,
            order,
            coeffs,
        }
    }

    /// Seed for coordinate `index` at `value`.
    pub fn variable(index: usize, value: f64, dim: usize, order: usize) -> Self {
        assert!(index < dim, "variable index {index} out of range for dim {dim}");
        let mut jet = Jet::constant(value, dim, order);
        if order >= 1 {
            jet.coeffs[1 + index] = 1.0;
        }
        jet
    }

    /// Builds a jet from Taylor-normalized coefficients in storage order.
    pub fn from_coefficients(dim: usize, order: usize, coeffs: Vec<f64>) -> Self {
        let layout = layout(dim);
        assert_eq!(
            coeffs.len(),
            layout.count(order),
            "coefficient count mismatch"
        );
        Jet {
            layout,
            order,
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    /// Taylor coefficient for an exponent vector, or 0 beyond the order.
    pub fn coefficient(&self, exponent: &[u8]) -> f64 {
        match self.layout.index_of(exponent) {
            Some(i) if i < self.coeffs.len() => self.coeffs[i],
            _ => 0.0,
        }
    }

    /// Exact partial derivative `∂^α f` (coefficient times `α!`).
    pub fn partial(&self, exponent: &[u8]) -> f64 {
        let factorial: f64 = exponent
            .iter()
            .map(|&k| (1..=k as u32).product::<u32>() as f64)
            .product();
        self.coefficient(exponent) * factorial
    }

    /// Gradient `∂_i f` for every variable.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| if self.order >= 1 { self.coeffs[1 + i] } else { 0.0 })
            .collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            layout: self.layout,
            order,
            coeffs: self.coeffs[..self.layout.count(order)].to_vec(),
        }
    }

    /// Partial derivative with respect to variable `i`; the order drops by one.
    ///
    /// Panics on an order-0 jet.
    pub fn derivative(&self, i: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let len = self.layout.count(order);
        let coeffs = (0..len)
            .map(|a| {
                let target = self.layout.shift[a][i].expect("shift within order") as usize;
                (self.layout.exponents[a][i] as f64 + 1.0) * self.coeffs[target]
            })
            .collect();
        Jet {
            layout: self.layout,
            order,
            coeffs,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_compatible(&self, other: &Jet) {
        assert_eq!(
            self.layout.dim, other.layout.dim,
            "jet dimension mismatch"
        );
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_constant(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        self.check_compatible(other);
        let order = self.order.min(other.order);
        let len = self.layout.count(order);
        Jet {
            layout: self.layout,
            order,
            coeffs: (0..len).map(|i| f(self.coeffs[i], other.coeffs[i])).collect(),
        }
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_compatible(other);
        let order = self.order.min(other.order);
        let len = self.layout.count(order);
        let coeffs = (0..len)
            .map(|c| {
                self.layout.mul_pairs[c]
                    .iter()
                    .map(|&(a, b)| self.coeffs[a as usize] * other.coeffs[b as usize])
                    .sum()
            })
            .collect();
        Jet {
            layout: self.layout,
            order,
            coeffs,
        }
    }

    /// Evaluates `Σ_k series[k] · h^k` where `h` is this jet minus its value.
    ///
    /// `series[k]` must be `f^(k)(value) / k!`; this composes `f` with the jet.
    pub fn compose(&self, series: &[f64]) -> Jet {
        debug_assert!(series.len() > self.order);
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Jet::constant(series[self.order], self.dim(), self.order);
        for k in (0..self.order).rev() {
            acc = acc.mul_jet(&h).add_constant(series[k]);
        }
        acc
    }

    fn finite_or(self, what: &str) -> Result<Jet, JetError> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(JetError::Domain(format!("{what} produced a non-finite value")))
        }
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let x = self.value();
        if x == 0.0 || !x.is_finite() {
            return Err(JetError::Domain("division by zero".into()));
        }
        let series: Vec<f64> = (0..=self.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / x.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&series).finite_or("reciprocal")
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn exp(&self) -> Result<Jet, JetError> {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose(&series).finite_or("exp")
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let x = self.value();
        if x <= 0.0 || !x.is_finite() {
            return Err(JetError::Domain(format!("log of non-positive value {x}")));
        }
        let series: Vec<f64> = (0..=self.order)
            .map(|k| {
                if k == 0 {
                    x.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * x.powi(k as i32))
                }
            })
            .collect();
        self.compose(&series).finite_or("log")
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn sinh(&self) -> Jet {
        let x = self.value();
        let cycle = [x.sinh(), x.cosh()];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 2] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn cosh(&self) -> Jet {
        let x = self.value();
        let cycle = [x.cosh(), x.sinh()];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 2] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let x = self.value();
        if x < 0.0 || (x == 0.0 && self.order > 0) {
            return Err(JetError::Domain(format!("sqrt singular at {x}")));
        }
        self.powf(0.5)
    }

    /// Non-negative integer power by repeated multiplication; exact for any base.
    pub fn powi(&self, exponent: u32) -> Jet {
        let mut result = Jet::constant(1.0, self.dim(), self.order);
        let mut base = self.clone();
        let mut e = exponent;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }

    /// Real power. Integer exponents are exact for any base (negative ones
    /// need a non-zero base); other exponents need a positive base.
    pub fn powf(&self, exponent: f64) -> Result<Jet, JetError> {
        if exponent.fract() == 0.0 && exponent.abs() <= u32::MAX as f64 {
            let p = self.powi(exponent.abs() as u32);
            return if exponent < 0.0 { p.recip() } else { Ok(p) };
        }
        let x = self.value();
        if x <= 0.0 || !x.is_finite() {
            return Err(JetError::Domain(format!(
                "non-integer power {exponent} of non-positive value {x}"
            )));
        }
        // binomial series: C(p, k) x^(p-k)
        let mut series = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            series.push(binom * x.powf(exponent - k as f64));
            binom *= (exponent - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&series).finite_or("power")
    }
}

/// Non-decreasing sequences of `len` variable indices, all `>= start`, in lex order.
fn non_decreasing(dim: usize, len: usize, start: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in start..dim {
        for mut rest in non_decreasing(dim, len - 1, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Panicking division; use [`Jet::div_jet`] when the divisor may vanish.
impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.div_jet(rhs).expect("jet division by zero")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn coefficient_counts_match_binomials() {
        for n in 1..=5 {
            for k in 0..=MAX_ORDER {
                let expected: usize = (0..=k).map(|d| binom(n + d - 1, d)).sum();
                assert_eq!(coefficient_count(n, k), expected, "n={n} k={k}");
            }
        }
        assert_eq!(coefficient_count(4, 4), 70);
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn storage_order_is_degree_then_lex() {
        let l = layout(2);
        let e: Vec<&[u8]> = (0..l.count(2)).map(|i| l.exponent(i)).collect();
        assert_eq!(e, vec![&[0, 0][..], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]]);
    }

    #[test]
    fn variable_seed() {
        let j = Jet::variable(0, 2.5, 2, 2);
        assert_eq!(j.coefficients(), &[2.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let j = Jet::variable(1, 0.0, 2, 1);
        assert_eq!(j.coefficients(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn square_of_seed_is_taylor_normalized() {
        let x = Jet::variable(0, 3.0, 1, 2);
        let sq = &x * &x;
        assert_eq!(sq.coefficients(), &[9.0, 6.0, 1.0]);
        assert_eq!(sq.partial(&[2]), 2.0);
    }

    #[test]
    fn product_rule() {
        let x = Jet::variable(0, 1.0, 2, 2);
        let y = Jet::variable(1, 2.0, 2, 2);
        let p = &x * &y;
        assert_eq!(p.value(), 2.0);
        assert_eq!(p.gradient(), vec![2.0, 1.0]);
        assert_eq!(p.coefficient(&[1, 1]), 1.0);
    }

    #[test]
    fn geometric_series() {
        let one_plus_x = Jet::variable(0, 0.0, 1, 3).add_constant(1.0);
        let q = Jet::constant(1.0, 1, 3).div_jet(&one_plus_x).unwrap();
        assert_eq!(q.coefficients(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn sine_series() {
        let s = Jet::variable(0, 0.0, 1, 3).sin();
        let d: Vec<f64> = (0..4).map(|k| s.partial(&[k])).collect();
        assert_eq!(d, vec![0.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn exp_of_square_matches_finite_differences() {
        let f = |x: f64| (x * x).exp();
        let x0 = 0.5;
        let x = Jet::variable(0, x0, 1, 3);
        let j = (&x * &x).exp().unwrap();
        let h = 1e-3;
        let d1 = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        let d2 = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
        let d3 = (f(x0 + 2.0 * h) - 2.0 * f(x0 + h) + 2.0 * f(x0 - h) - f(x0 - 2.0 * h))
            / (2.0 * h * h * h);
        assert!(close(j.partial(&[1]), d1, 1e-6));
        assert!(close(j.partial(&[2]), d2, 1e-6));
        assert!(close(j.partial(&[3]), d3, 1e-5));
    }

    #[test]
    fn domain_errors() {
        let zero = Jet::variable(0, 0.0, 1, 2);
        assert!(zero.recip().is_err());
        assert!(zero.ln().is_err());
        assert!(zero.sqrt().is_err());
        assert!(Jet::variable(0, -1.0, 1, 2).powf(0.5).is_err());
        assert!(Jet::variable(0, -2.0, 1, 2).powf(-3.0).is_ok());
    }

    #[test]
    fn derivative_lowers_order() {
        let x = Jet::variable(0, 2.0, 2, 3);
        let y = Jet::variable(1, -1.0, 2, 3);
        let f = &(&x * &x) * &y; // x^2 y
        let fx = f.derivative(0); // 2 x y
        assert_eq!(fx.order(), 2);
        assert!(close(fx.value(), -4.0, 1e-15));
        assert!(close(fx.partial(&[0, 1]), 4.0, 1e-15));
        assert!(close(fx.partial(&[1, 1]), 2.0, 1e-15));
    }

    #[test]
    fn mixed_order_arithmetic_truncates() {
        let a = Jet::variable(0, 1.0, 2, 3);
        let b = Jet::variable(1, 1.0, 2, 1);
        assert_eq!((&a * &b).order(), 1);
        assert_eq!((&a + &b).order(), 1);
    }
}
