use super::{geometry_from_jets, jet::Jet, ParametricSurface, QuadratureGrid};
use crate::energy::EnergyParams;
use crate::error::{param, Error, Result};
use crate::exec::{map_slice, Execution};
use crate::Vec3;
use serde::Serialize;

/// Quintic smoothstep ramp: 1 on `[0, 1/2]`, 0 on `[1, inf)`.
pub fn quintic_cutoff(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let x = 2.0 * s - 1.0;
        1.0 - x * x * x * (10.0 + x * (6.0 * x - 15.0))
    }
}

/// `sup |phi'|` of the ramp, attained at `s = 3/4`.
pub const RAMP_SLOPE: f64 = 3.75;
/// `sup |phi"| = 40 / sqrt 3`, attained where `2s - 1 = (1 -+ 1/sqrt 3) / 2`.
pub const RAMP_CURVATURE: f64 = 23.094_010_767_585_03;

/// `gamma(p) = phi(|f(p) - center| / radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub center: Vec3,
    pub radius: f64,
}

impl Cutoff {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(param("radius", format!("must be finite and > 0, got {radius}")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(param("center", "must be finite"));
        }
        Ok(Cutoff { center, radius })
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        quintic_cutoff((x - self.center).norm() / self.radius)
    }

    /// Sharp indicator of the open ball, i.e. of `[gamma > 0]`.
    pub fn support(&self, x: &Vec3) -> bool {
        (x - self.center).norm() < self.radius
    }

    /// Bound on the surface gradient of `gamma`.
    pub fn gradient_bound(&self) -> f64 {
        RAMP_SLOPE / self.radius
    }

    pub fn hessian_bound(&self) -> f64 {
        RAMP_CURVATURE / (self.radius * self.radius)
    }
}

/// Integral terms of the localized gap estimate. No inequality is
/// evaluated: the absolute constants in it are not known numerically.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub surface: String,
    pub params: EnergyParams,
    pub cutoff: Cutoff,
    pub c_gamma: f64,
    pub c_gamma_second: f64,
    pub resolution: (usize, usize),
    /// `int W² gamma^4`; absent when the surface has no stored `Laplace(H)`.
    pub residual_sq_gamma4: Option<f64>,
    pub grad_mean_sq_gamma2: f64,
    pub grad_mean_sq_gamma4: f64,
    pub tracefree_cubed_gamma4: f64,
    pub second_form_4_tracefree_sq_gamma4: f64,
    pub gamma4: f64,
    /// `int_[gamma > 0] |A°|²`.
    pub localized_gap: f64,
}

pub fn estimate_report(
    surface: &ParametricSurface,
    params: &EnergyParams,
    cutoff: &Cutoff,
    grid: &QuadratureGrid,
) -> Result<EstimateReport> {
    surface.validate()?;
    params.validate()?;
    let cutoff = Cutoff::new(cutoff.center, cutoff.radius)?;
    let nodes = grid.nodes();
    let has_lap = surface.has_mean_curvature_laplacian();
    let rows = map_slice(Execution::default(), &nodes, |&(u, v, w)| {
        let pos = surface.position(Jet::var_u(u, 3), Jet::var_v(v, 3));
        let g = geometry_from_jets(u, v, &pos, surface.mean_curvature_laplacian(u, v));
        let gamma = cutoff.eval(&g.position);
        let (g2, g4) = (gamma * gamma, gamma.powi(4));
        let ao = g.tracefree_sq;
        let a2 = g.second_form_sq();
        let el = g.el_operator(params).unwrap_or(0.0);
        let gap = if cutoff.support(&g.position) { ao } else { 0.0 };
        let terms = [
            el * el * g4,
            g.grad_mean_sq * g2,
            g.grad_mean_sq * g4,
            ao.powi(3) * g4,
            a2 * a2 * ao * g4,
            g4,
            gap,
        ];
        let wd = w * g.area_density;
        if terms.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical { what: "estimate integrand".into(), location: format!("chart point ({u}, {v})") });
        }
        Ok(terms.map(|t| t * wd))
    });
    let mut acc = [0.0; 7];
    for r in rows {
        let r = r?;
        for k in 0..7 {
            acc[k] += r[k];
        }
    }
    Ok(EstimateReport {
        surface: surface.name(),
        params: *params,
        cutoff,
        c_gamma: cutoff.gradient_bound(),
        c_gamma_second: cutoff.hessian_bound(),
        resolution: grid.resolution(),
        residual_sq_gamma4: has_lap.then_some(acc[0]),
        grad_mean_sq_gamma2: acc[1],
        grad_mean_sq_gamma4: acc[2],
        tracefree_cubed_gamma4: acc[3],
        second_form_4_tracefree_sq_gamma4: acc[4],
        gamma4: acc[5],
        localized_gap: acc[6],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(s: &ParametricSurface, n: usize) -> QuadratureGrid {
        QuadratureGrid::new(s, n, n).unwrap()
    }

    #[test]
    fn ramp_shape() {
        assert_eq!(quintic_cutoff(0.0), 1.0);
        assert_eq!(quintic_cutoff(0.5), 1.0);
        assert_eq!(quintic_cutoff(1.0), 0.0);
        assert!((quintic_cutoff(0.75) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        let mut max_slope: f64 = 0.0;
        let mut max_curv: f64 = 0.0;
        let mut prev = 1.0;
        for i in 1..=10_000 {
            let s = 0.5 + 0.5 * i as f64 / 10_000.0;
            let p = quintic_cutoff(s);
            assert!(p <= prev && (0.0..=1.0).contains(&p));
            prev = p;
            max_slope = max_slope.max(((quintic_cutoff(s + h) - quintic_cutoff(s - h)) / (2.0 * h)).abs());
            if s < 1.0 - 1e-3 {
                let c = (quintic_cutoff(s + 1e-4) - 2.0 * p + quintic_cutoff(s - 1e-4)) / 1e-8;
                max_curv = max_curv.max(c.abs());
            }
        }
        assert!((max_slope - RAMP_SLOPE).abs() < 1e-6);
        assert!((max_curv - RAMP_CURVATURE).abs() < 1e-3, "{max_curv} {RAMP_CURVATURE}");
    }

    #[test]
    fn critical_sphere_row_vanishes() {
        let s = ParametricSurface::Sphere { radius: 2.0 };
        let c = Cutoff::new(Vec3::zeros(), 10.0).unwrap();
        let r = estimate_report(&s, &EnergyParams { c0: 0.0, l1: 1.0, l2: -1.0 }, &c, &grid(&s, 64)).unwrap();
        assert!(r.residual_sq_gamma4.unwrap().abs() < 1e-10);
        assert!(r.localized_gap.abs() < 1e-10);
        assert!((r.gamma4 - 16.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn plane_residual_is_constant() {
        let s = ParametricSurface::PlanePatch { width: 2.0, height: 2.0 };
        let c = Cutoff::new(Vec3::new(1.0, 1.0, 0.0), 0.8).unwrap();
        let r = estimate_report(&s, &EnergyParams { c0: 0.0, l1: 0.3, l2: 0.5 }, &c, &grid(&s, 64)).unwrap();
        let w = r.residual_sq_gamma4.unwrap();
        assert!(w > 0.0);
        assert!((w - 1.0 * r.gamma4).abs() < 1e-12 * w);
    }

    #[test]
    fn catenoid_gap_below_ceiling() {
        let s = ParametricSurface::Catenoid { neck: 1.0, half_height: 5.0 };
        let c = Cutoff::new(Vec3::zeros(), 10.0).unwrap();
        let r = estimate_report(&s, &EnergyParams::default(), &c, &grid(&s, 128)).unwrap();
        assert!(r.localized_gap > 0.0 && r.localized_gap <= 8.0 * PI * 5f64.tanh());
        assert!(r.residual_sq_gamma4.unwrap() < 1e-20);
    }

    #[test]
    fn graph_has_no_residual_row() {
        let s = ParametricSurface::Graph { amplitude: 0.3, width: 1.0, half_extent: 2.0 };
        let c = Cutoff::new(Vec3::zeros(), 1.5).unwrap();
        let r = estimate_report(&s, &EnergyParams::default(), &c, &grid(&s, 32)).unwrap();
        assert!(r.residual_sq_gamma4.is_none());
        assert!(r.grad_mean_sq_gamma2 > 0.0);
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(Cutoff::new(Vec3::zeros(), 0.0).is_err());
    }
}
