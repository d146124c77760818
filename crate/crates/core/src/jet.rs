//! Truncated univariate Taylor arithmetic and closed-form fields.
//!
//! A [`Jet`] holds the Taylor coefficients of `t ↦ g(s + t n)`. Evaluating a
//! closed-form expression on jets seeded with `s + t n` yields every
//! directional derivative `D_n^l g(s) = l! · c_l` at once.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

/// Highest supported derivative order plus one.
pub const JET_CAPACITY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; JET_CAPACITY],
    len: usize,
}

impl Jet {
    pub fn constant(value: f64, len: usize) -> Self {
        assert!((1..=JET_CAPACITY).contains(&len), "jet length out of range");
        let mut c = [0.0; JET_CAPACITY];
        c[0] = value;
        Self { c, len }
    }

    /// The affine jet `s + t·slope`.
    pub fn variable(value: f64, slope: f64, len: usize) -> Self {
        let mut j = Self::constant(value, len);
        if len > 1 {
            j.c[1] = slope;
        }
        j
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c[..self.len]
    }

    /// `l`-th derivative with respect to `t` at `t = 0`.
    pub fn derivative(&self, l: usize) -> f64 {
        let fact: f64 = (1..=l).map(|i| i as f64).product();
        self.c[l] * fact
    }

    fn from_coeffs(c: [f64; JET_CAPACITY], len: usize) -> Self {
        Self { c, len }
    }

    fn common_len(&self, other: &Jet) -> usize {
        self.len.min(other.len)
    }

    pub fn exp(self) -> Jet {
        let mut e = [0.0; JET_CAPACITY];
        e[0] = self.c[0].exp();
        for n in 1..self.len {
            let s: f64 = (1..=n).map(|k| k as f64 * self.c[k] * e[n - k]).sum();
            e[n] = s / n as f64;
        }
        Jet::from_coeffs(e, self.len)
    }

    pub fn sin_cos(self) -> (Jet, Jet) {
        let mut s = [0.0; JET_CAPACITY];
        let mut c = [0.0; JET_CAPACITY];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for n in 1..self.len {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for k in 1..=n {
                let w = k as f64 * self.c[k];
                ss += w * c[n - k];
                cc -= w * s[n - k];
            }
            s[n] = ss / n as f64;
            c[n] = cc / n as f64;
        }
        (
            Jet::from_coeffs(s, self.len),
            Jet::from_coeffs(c, self.len),
        )
    }

    pub fn sin(self) -> Jet {
        self.sin_cos().0
    }

    pub fn cos(self) -> Jet {
        self.sin_cos().1
    }

    pub fn ln(self) -> Jet {
        let mut l = [0.0; JET_CAPACITY];
        l[0] = self.c[0].ln();
        for n in 1..self.len {
            let s: f64 = (1..n).map(|k| k as f64 * l[k] * self.c[n - k]).sum();
            l[n] = (self.c[n] - s / n as f64) / self.c[0];
        }
        Jet::from_coeffs(l, self.len)
    }

    pub fn recip(self) -> Jet {
        Jet::constant(1.0, self.len) / self
    }

    pub fn powi(self, p: u32) -> Jet {
        (0..p).fold(Jet::constant(1.0, self.len), |acc, _| acc * self)
    }

    pub fn scale(mut self, s: f64) -> Jet {
        self.c[..self.len].iter_mut().for_each(|x| *x *= s);
        self
    }

    pub fn offset(mut self, s: f64) -> Jet {
        self.c[0] += s;
        self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let len = self.common_len(&rhs);
        let mut c = [0.0; JET_CAPACITY];
        for i in 0..len {
            c[i] = self.c[i] + rhs.c[i];
        }
        Jet::from_coeffs(c, len)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let len = self.common_len(&rhs);
        let mut c = [0.0; JET_CAPACITY];
        for n in 0..len {
            c[n] = (0..=n).map(|k| self.c[k] * rhs.c[n - k]).sum();
        }
        Jet::from_coeffs(c, len)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let len = self.common_len(&rhs);
        let mut q = [0.0; JET_CAPACITY];
        for n in 0..len {
            let s: f64 = (1..=n).map(|k| rhs.c[k] * q[n - k]).sum();
            q[n] = (self.c[n] - s) / rhs.c[0];
        }
        Jet::from_coeffs(q, len)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.offset(rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.offset(-rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

type JetFn = dyn Fn(&[Jet]) -> Jet + Send + Sync;

/// A scalar field known in closed form, evaluable with derivatives along
/// any direction.
#[derive(Clone)]
pub struct ClosedForm {
    f: Arc<JetFn>,
}

impl fmt::Debug for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosedForm")
    }
}

impl ClosedForm {
    pub fn new(f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |x| Jet::constant(value, x[0].len()))
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        let x: Vec<Jet> = point.iter().map(|&p| Jet::constant(p, 1)).collect();
        (self.f)(&x).value()
    }

    /// `[D_n^0 f(s), ..., D_n^k f(s)]` along `direction` (not normalized here).
    pub fn directional_derivatives(&self, point: &[f64], direction: &[f64], k: usize) -> Vec<f64> {
        let x: Vec<Jet> = point
            .iter()
            .zip(direction)
            .map(|(&p, &a)| Jet::variable(p, a, k + 1))
            .collect();
        let j = (self.f)(&x);
        (0..=k).map(|l| j.derivative(l)).collect()
    }

    /// Pointwise sum, used to assemble superposed data.
    pub fn plus(&self, other: &ClosedForm) -> ClosedForm {
        let (a, b) = (self.f.clone(), other.f.clone());
        ClosedForm::new(move |x| a(x) + b(x))
    }

    pub fn scaled(&self, s: f64) -> ClosedForm {
        let a = self.f.clone();
        ClosedForm::new(move |x| a(x) * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_derivatives() {
        // f = 1/(x-1): f^(n)(x) = (-1)^n n! / (x-1)^{n+1}
        let f = ClosedForm::new(|x| (x[0] - 1.0).recip());
        let d = f.directional_derivatives(&[2.0], &[1.0], 4);
        let expect = [1.0, -1.0, 2.0, -6.0, 24.0];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn exp_sin_chain_rule() {
        let f = ClosedForm::new(|x| x[0].sin().exp());
        let d = f.directional_derivatives(&[2.0], &[1.0], 2);
        let e = 2f64.sin().exp();
        assert!((d[0] - e).abs() < 1e-14);
        assert!((d[1] - 2f64.cos() * e).abs() < 1e-14);
        let second = (2f64.cos().powi(2) - 2f64.sin()) * e;
        assert!((d[2] - second).abs() < 1e-13);
    }

    #[test]
    fn plane_wave_directional() {
        let f = ClosedForm::new(|x| (x[0] + x[1] * 2.0).cos());
        let d = f.directional_derivatives(&[0.0, 0.0], &[0.6, 0.8], 2);
        assert!(d[1].abs() < 1e-15);
        assert!((d[2] + 4.84).abs() < 1e-13);
    }

    #[test]
    fn log_and_division() {
        let f = ClosedForm::new(|x| (x[0] - 1.0).ln() * (x[0] - 1.0));
        // (x-1)ln(x-1): derivative ln(x-1)+1, second 1/(x-1)
        let d = f.directional_derivatives(&[3.0], &[1.0], 3);
        assert!((d[0] - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!((d[1] - (2f64.ln() + 1.0)).abs() < 1e-14);
        assert!((d[2] - 0.5).abs() < 1e-14);
        assert!((d[3] + 0.25).abs() < 1e-14);
    }
}
