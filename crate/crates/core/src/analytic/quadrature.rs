use super::surface::ParametricSurface;
use crate::error::{param, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// One axis of a tensor-product rule.
#[derive(Debug, Clone, Serialize)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub periodic: bool,
}

impl AxisRule {
    pub fn new(lo: f64, hi: f64, n: usize, periodic: bool) -> Self {
        if periodic {
            let h = (hi - lo) / n as f64;
            AxisRule { nodes: (0..n).map(|i| lo + i as f64 * h).collect(), weights: vec![h; n], periodic }
        } else {
            let (x, w) = gauss_legendre(n);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            AxisRule {
                nodes: x.iter().map(|t| mid + half * t).collect(),
                weights: w.iter().map(|w| w * half).collect(),
                periodic,
            }
        }
    }
}

/// Tensor-product grid: Gauss-Legendre on bounded axes, trapezoid on
/// periodic ones.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureGrid {
    pub u: AxisRule,
    pub v: AxisRule,
}

impl QuadratureGrid {
    pub fn new(surface: &ParametricSurface, nu: usize, nv: usize) -> Result<Self> {
        if nu < 2 {
            return Err(param("nu", "quadrature needs at least 2 nodes per axis"));
        }
        if nv < 2 {
            return Err(param("nv", "quadrature needs at least 2 nodes per axis"));
        }
        let d = surface.domain();
        Ok(QuadratureGrid {
            u: AxisRule::new(d.u.0, d.u.1, nu, d.periodic[0]),
            v: AxisRule::new(d.v.0, d.v.1, nv, d.periodic[1]),
        })
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.u.nodes.len(), self.v.nodes.len())
    }

    /// `(u, v, weight)` for every node, `u` varying slowest.
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.u.nodes.len() * self.v.nodes.len());
        for (u, wu) in self.u.nodes.iter().zip(&self.u.weights) {
            for (v, wv) in self.v.nodes.iter().zip(&self.v.weights) {
                out.push((*u, *v, wu * wv));
            }
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.u.weights.iter().sum::<f64>() * self.v.weights.iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exact_for_polynomials() {
        for n in [2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n).min(30) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
            assert!(w.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn weights_sum_to_domain_measure() {
        let s = ParametricSurface::Torus { major: 2.0, minor: 1.0 };
        let g = QuadratureGrid::new(&s, 16, 24).unwrap();
        assert!((g.total_weight() - 4.0 * PI * PI).abs() < 1e-12);
        let c = ParametricSurface::Catenoid { neck: 1.0, half_height: 2.0 };
        let g = QuadratureGrid::new(&c, 16, 24).unwrap();
        assert!((g.total_weight() - 2.0 * PI * 4.0).abs() < 1e-12);
        assert!(QuadratureGrid::new(&c, 1, 24).is_err());
    }
}
