//! Truncated bivariate Taylor polynomials ("jets") up to total order four.
//!
//! A jet stores the coefficients `c[a,b]` of `sum c[a,b] du^a dv^b` around a
//! chart point, so arithmetic on jets propagates exact partial derivatives
//! through compositions such as `f + t * phi * nu` without symbolic work.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub const MAX_ORDER: usize = 4;
const N: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

#[inline]
const fn idx(a: usize, b: usize) -> usize {
    (a + b) * (a + b + 1) / 2 + b
}

#[inline]
const fn n_coeffs(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// `(a, b)` exponents for every coefficient slot.
const EXPONENTS: [(usize, usize); N] = {
    let mut out = [(0, 0); N];
    let mut d = 0;
    while d <= MAX_ORDER {
        let mut b = 0;
        while b <= d {
            out[idx(d - b, b)] = (d - b, b);
            b += 1;
        }
        d += 1;
    }
    out
};

const FACTORIAL: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; N],
    order: usize,
}

pub type JetVec = [Jet; 3];

impl Jet {
    pub fn constant(x: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; N];
        c[0] = x;
        Jet { c, order }
    }

    /// The chart coordinate `u` expanded at `u0`.
    pub fn var_u(u0: f64, order: usize) -> Self {
        let mut j = Self::constant(u0, order);
        if order >= 1 {
            j.c[idx(1, 0)] = 1.0;
        }
        j
    }

    pub fn var_v(v0: f64, order: usize) -> Self {
        let mut j = Self::constant(v0, order);
        if order >= 1 {
            j.c[idx(0, 1)] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `d^(a+b) / du^a dv^b` at the expansion point.
    pub fn d(&self, a: usize, b: usize) -> f64 {
        assert!(a + b <= self.order, "derivative order {} beyond jet order {}", a + b, self.order);
        self.c[idx(a, b)] * FACTORIAL[a] * FACTORIAL[b]
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut c = [0.0; N];
        c[..n_coeffs(order)].copy_from_slice(&self.c[..n_coeffs(order)]);
        Jet { c, order }
    }

    /// Jet of `d/du`, one order lower.
    pub fn du(&self) -> Self {
        assert!(self.order >= 1);
        let order = self.order - 1;
        let mut c = [0.0; N];
        for k in 0..n_coeffs(order) {
            let (a, b) = EXPONENTS[k];
            c[k] = (a + 1) as f64 * self.c[idx(a + 1, b)];
        }
        Jet { c, order }
    }

    pub fn dv(&self) -> Self {
        assert!(self.order >= 1);
        let order = self.order - 1;
        let mut c = [0.0; N];
        for k in 0..n_coeffs(order) {
            let (a, b) = EXPONENTS[k];
            c[k] = (b + 1) as f64 * self.c[idx(a, b + 1)];
        }
        Jet { c, order }
    }

    /// `g(self)` given `derivs[k] = g^(k)(self.value())`.
    fn compose(&self, derivs: &[f64; MAX_ORDER + 1]) -> Self {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Jet::constant(derivs[0], self.order);
        let mut power = Jet::constant(1.0, self.order);
        for k in 1..=self.order {
            power = power * delta;
            out = out + power * (derivs[k] / FACTORIAL[k]);
        }
        out
    }

    pub fn powf(&self, p: f64) -> Self {
        let x = self.value();
        let mut d = [0.0; MAX_ORDER + 1];
        let mut coef = 1.0;
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = coef * x.powf(p - k as f64);
            coef *= p - k as f64;
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    pub fn square(&self) -> Self {
        *self * *self
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.compose(&[c, s, c, s, c])
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.compose(&[s, c, s, c, s])
    }

    pub fn is_finite(&self) -> bool {
        self.c[..n_coeffs(self.order)].iter().all(|x| x.is_finite())
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut c = [0.0; N];
        for k in 0..n_coeffs(order) {
            c[k] = self.c[k] + rhs.c[k];
        }
        Jet { c, order }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
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
    fn neg(mut self) -> Jet {
        for x in &mut self.c {
            *x = -*x;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = n_coeffs(order);
        let mut c = [0.0; N];
        for i in 0..n {
            let x = self.c[i];
            if x == 0.0 {
                continue;
            }
            let (a1, b1) = EXPONENTS[i];
            for j in 0..n_coeffs(order - (a1 + b1)) {
                let (a2, b2) = EXPONENTS[j];
                c[idx(a1 + a2, b1 + b2)] += x * rhs.c[j];
            }
        }
        Jet { c, order }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for x in &mut self.c {
            *x *= rhs;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

pub fn dot(a: &JetVec, b: &JetVec) -> Jet {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &JetVec, b: &JetVec) -> JetVec {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn scale(a: &JetVec, s: Jet) -> JetVec {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add(a: &JetVec, b: &JetVec) -> JetVec {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn du(a: &JetVec) -> JetVec {
    [a[0].du(), a[1].du(), a[2].du()]
}

pub fn dv(a: &JetVec) -> JetVec {
    [a[0].dv(), a[1].dv(), a[2].dv()]
}

pub fn values(a: &JetVec) -> crate::Vec3 {
    crate::Vec3::new(a[0].value(), a[1].value(), a[2].value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Central-difference partial derivative of a scalar function.
    fn fd(f: &dyn Fn(f64, f64) -> f64, u: f64, v: f64, a: usize, b: usize) -> f64 {
        let h = 1e-2;
        match (a, b) {
            (0, 0) => f(u, v),
            (1, 0) => (f(u + h, v) - f(u - h, v)) / (2.0 * h),
            (0, 1) => (f(u, v + h) - f(u, v - h)) / (2.0 * h),
            (2, 0) => (f(u + h, v) - 2.0 * f(u, v) + f(u - h, v)) / (h * h),
            (0, 2) => (f(u, v + h) - 2.0 * f(u, v) + f(u, v - h)) / (h * h),
            (1, 1) => (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4.0 * h * h),
            _ => unreachable!(),
        }
    }

    #[test]
    fn known_derivatives() {
        let u = Jet::var_u(0.3, 4);
        let v = Jet::var_v(-0.7, 4);
        let f = (u * v).sin();
        let (x, y) = (0.3f64, -0.7f64);
        let s = (x * y).sin();
        let c = (x * y).cos();
        assert!((f.d(1, 0) - y * c).abs() < 1e-14);
        assert!((f.d(1, 1) - (c - x * y * s)).abs() < 1e-14);
        assert!((f.d(2, 0) + y * y * s).abs() < 1e-14);
        let d22 = -2.0 * s - 4.0 * x * y * c + x * x * y * y * s;
        assert!((f.d(2, 2) - d22).abs() < 1e-12, "{} vs {}", f.d(2, 2), d22);
    }

    #[test]
    fn derivative_jet_commutes() {
        let u = Jet::var_u(0.4, 3);
        let v = Jet::var_v(1.1, 3);
        let f = (u.square() + v).sqrt() * v.cosh();
        assert!((f.du().d(0, 1) - f.d(1, 1)).abs() < 1e-13);
        assert!((f.dv().dv().d(1, 0) - f.d(1, 2)).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn matches_finite_differences(u0 in -1.0f64..1.0, v0 in 0.2f64..1.5) {
            let g = |u: Jet, v: Jet| (u * v).exp() / (v.square() + 1.0).sqrt() + u.sinh() * v.cos();
            let gf = |u: f64, v: f64| (u * v).exp() / (v * v + 1.0).sqrt() + u.sinh() * v.cos();
            let j = g(Jet::var_u(u0, 2), Jet::var_v(v0, 2));
            for (a, b) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
                let expected = fd(&gf, u0, v0, a, b);
                prop_assert!((j.d(a, b) - expected).abs() < 1e-3 * (1.0 + expected.abs()));
            }
        }
    }
}
