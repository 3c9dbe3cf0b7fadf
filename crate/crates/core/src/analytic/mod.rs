//! Exact parametric surfaces: closed-form fundamental forms through jets,
//! chart quadrature, and the chart-level checks of the first-variation
//! formulas and pointwise curvature identities.

mod estimate;
mod identity;
pub mod jet;
mod quadrature;
mod surface;
mod variation;

pub use estimate::{estimate_report, quintic_cutoff, Cutoff, EstimateReport};
pub use identity::{chart_sample, identity_check, principal_sample, IdentityReport, IdentitySample};
pub use quadrature::{gauss_legendre, AxisRule, QuadratureGrid};
pub use surface::{ChartDomain, ParametricSurface};
pub use variation::{variation_check, Functional, TestField, VariationReport, VariationRow};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::Vec3;
use jet::{cross, du, dv, Jet, JetVec};
use nalgebra::Matrix2;
use serde::Serialize;

/// First and second fundamental forms and their invariants as jets.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FormJets {
    pub fu: JetVec,
    pub fv: JetVec,
    pub g11: Jet,
    pub g12: Jet,
    pub g22: Jet,
    pub det: Jet,
    pub a11: Jet,
    pub a12: Jet,
    pub a22: Jet,
    pub normal: JetVec,
    pub mean: Jet,
    pub gauss: Jet,
}

/// Forms of a position jet of order `n >= 2`; `g`, `nu` come out at order
/// `n - 1`, `A`, `H`, `K` at order `n - 2`.
pub(crate) fn forms(pos: &JetVec) -> FormJets {
    let fu = du(pos);
    let fv = dv(pos);
    let fuu = du(&fu);
    let fuv = dv(&fu);
    let fvv = dv(&fv);
    let g11 = jet::dot(&fu, &fu);
    let g12 = jet::dot(&fu, &fv);
    let g22 = jet::dot(&fv, &fv);
    let det = g11 * g22 - g12 * g12;
    let n_out = cross(&fu, &fv);
    let inv_len = jet::dot(&n_out, &n_out).powf(-0.5);
    let normal = jet::scale(&n_out, -inv_len);
    let a11 = jet::dot(&fuu, &normal);
    let a12 = jet::dot(&fuv, &normal);
    let a22 = jet::dot(&fvv, &normal);
    let inv_det = det.truncate(a11.order()).recip();
    let mean = (g22.truncate(a11.order()) * a11 - g12.truncate(a11.order()) * a12 * 2.0
        + g11.truncate(a11.order()) * a22)
        * inv_det;
    let gauss = (a11 * a22 - a12 * a12) * inv_det;
    FormJets { fu, fv, g11, g12, g22, det, a11, a12, a22, normal, mean, gauss }
}

/// Everything known about the surface at one chart point.
#[derive(Debug, Clone, Serialize)]
pub struct PointGeometry {
    pub u: f64,
    pub v: f64,
    pub position: Vec3,
    pub metric: Matrix2<f64>,
    /// Second fundamental form against the inward normal.
    pub second_form: Matrix2<f64>,
    pub normal: Vec3,
    pub mean: f64,
    pub gauss: f64,
    pub tracefree_sq: f64,
    pub area_density: f64,
    /// Contravariant chart components `g^{ij} d_j H`.
    pub grad_mean: [f64; 2],
    pub grad_mean_sq: f64,
    /// Stored closed form of `Laplace-Beltrami(H)`, when the surface has one.
    pub laplacian_mean: Option<f64>,
}

impl PointGeometry {
    /// `|A|² = H² - 2K`.
    pub fn second_form_sq(&self) -> f64 {
        self.mean * self.mean - 2.0 * self.gauss
    }

    /// Euler-Lagrange operator, when `Laplace(H)` is known.
    pub fn el_operator(&self, params: &EnergyParams) -> Option<f64> {
        self.laplacian_mean.map(|lap| params.el_operator(lap, self.mean, self.gauss, self.tracefree_sq))
    }
}

pub(crate) fn geometry_from_jets(u: f64, v: f64, pos: &JetVec, lap: Option<f64>) -> PointGeometry {
    let f = forms(pos);
    let metric = Matrix2::new(f.g11.value(), f.g12.value(), f.g12.value(), f.g22.value());
    let second_form = Matrix2::new(f.a11.value(), f.a12.value(), f.a12.value(), f.a22.value());
    let (h, k) = (f.mean.value(), f.gauss.value());
    let det = f.det.value();
    let (mut grad_mean, mut grad_mean_sq) = ([f64::NAN; 2], f64::NAN);
    if f.mean.order() >= 1 {
        let (hu, hv) = (f.mean.d(1, 0), f.mean.d(0, 1));
        let (g11, g12, g22) = (metric[(0, 0)], metric[(0, 1)], metric[(1, 1)]);
        let gu = (g22 * hu - g12 * hv) / det;
        let gv = (-g12 * hu + g11 * hv) / det;
        grad_mean = [gu, gv];
        grad_mean_sq = gu * hu + gv * hv;
    }
    PointGeometry {
        u,
        v,
        position: jet::values(pos),
        metric,
        second_form,
        normal: jet::values(&f.normal),
        mean: h,
        gauss: k,
        tracefree_sq: 0.5 * h * h - 2.0 * k,
        area_density: det.sqrt(),
        grad_mean,
        grad_mean_sq,
        laplacian_mean: lap,
    }
}

/// Closed-form geometry at `(u, v)`.
pub fn oracle_geometry(surface: &ParametricSurface, u: f64, v: f64) -> Result<PointGeometry> {
    surface.validate()?;
    surface.check_point(u, v)?;
    let pos = surface.position(Jet::var_u(u, 3), Jet::var_v(v, 3));
    Ok(geometry_from_jets(u, v, &pos, surface.mean_curvature_laplacian(u, v)))
}

/// `Laplace-Beltrami(H)` by differentiating the chart to fourth order,
/// `(1/sqrt g) d_i (sqrt g g^{ij} d_j H)`. Independent of the stored forms.
pub fn jet_mean_curvature_laplacian(surface: &ParametricSurface, u: f64, v: f64) -> Result<f64> {
    surface.check_point(u, v)?;
    let pos = surface.position(Jet::var_u(u, 4), Jet::var_v(v, 4));
    let f = forms(&pos);
    let (hu, hv) = (f.mean.du(), f.mean.dv());
    let o = hu.order();
    let (g11, g12, g22, det) = (f.g11.truncate(o), f.g12.truncate(o), f.g22.truncate(o), f.det.truncate(o));
    let inv_sqrt = det.powf(-0.5);
    let wu = (g22 * hu - g12 * hv) * inv_sqrt;
    let wv = (g11 * hv - g12 * hu) * inv_sqrt;
    Ok((wu.d(1, 0) + wv.d(0, 1)) * inv_sqrt.value())
}

/// A quadrature estimate with the change from halving the resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

fn integrate_on<F>(surface: &ParametricSurface, grid: &QuadratureGrid, exec: Execution, integrand: &F) -> Result<(f64, f64)>
where
    F: Fn(&PointGeometry) -> f64 + Sync,
{
    let nodes = grid.nodes();
    let terms = map_slice(exec, &nodes, |&(u, v, w)| {
        let pos = surface.position(Jet::var_u(u, 3), Jet::var_v(v, 3));
        let geom = geometry_from_jets(u, v, &pos, surface.mean_curvature_laplacian(u, v));
        let val = integrand(&geom);
        if !val.is_finite() {
            return Err(Error::Numerical { what: format!("integrand {val}"), location: format!("chart point ({u}, {v})") });
        }
        Ok(w * val * geom.area_density)
    });
    let mut sum = 0.0;
    let mut abs = 0.0;
    for t in terms {
        let t = t?;
        sum += t;
        abs += t.abs();
    }
    Ok((sum, abs))
}

/// `int integrand dmu` over the chart with the given grid.
pub fn oracle_integrate<F>(surface: &ParametricSurface, integrand: F, grid: &QuadratureGrid) -> Result<f64>
where
    F: Fn(&PointGeometry) -> f64 + Sync,
{
    Ok(integrate_on(surface, grid, Execution::default(), &integrand)?.0)
}

/// Integrates on `grid` and on a grid with half the nodes per axis; the
/// estimate is their difference, floored at the rounding level of the sum.
pub fn oracle_integrate_with_estimate<F>(
    surface: &ParametricSurface,
    integrand: F,
    grid: &QuadratureGrid,
) -> Result<Integral>
where
    F: Fn(&PointGeometry) -> f64 + Sync,
{
    let (nu, nv) = grid.resolution();
    let coarse = QuadratureGrid::new(surface, (nu / 2).max(2), (nv / 2).max(2))?;
    let (fine, abs) = integrate_on(surface, grid, Execution::default(), &integrand)?;
    let (rough, _) = integrate_on(surface, &coarse, Execution::default(), &integrand)?;
    Ok(Integral { value: fine, error_estimate: (fine - rough).abs().max(64.0 * f64::EPSILON * abs) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(s: &ParametricSurface, n: usize) -> QuadratureGrid {
        QuadratureGrid::new(s, n, n).unwrap()
    }

    #[test]
    fn sphere_point() {
        let s = ParametricSurface::Sphere { radius: 2.0 };
        for (u, v) in [(0.3, 0.1), (1.5, 4.0), (3.0, 6.2)] {
            let g = oracle_geometry(&s, u, v).unwrap();
            assert!((g.mean - 1.0).abs() < 1e-14);
            assert!((g.gauss - 0.25).abs() < 1e-14);
            assert!(g.tracefree_sq.abs() < 1e-14);
            assert!((g.normal + g.position / 2.0).norm() < 1e-14);
        }
        assert!(matches!(oracle_geometry(&s, 0.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(oracle_geometry(&s, 1.0, 7.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn catenoid_neck() {
        let s = ParametricSurface::Catenoid { neck: 1.0, half_height: 2.0 };
        let g = oracle_geometry(&s, 0.7, 0.0).unwrap();
        assert!(g.mean.abs() < 1e-14);
        assert!((g.tracefree_sq - 2.0).abs() < 1e-14);
        assert!((g.gauss + 1.0).abs() < 1e-14);
    }

    #[test]
    fn plane_is_flat() {
        let s = ParametricSurface::PlanePatch { width: 1.0, height: 2.0 };
        let g = oracle_geometry(&s, 0.4, 1.3).unwrap();
        assert_eq!(g.second_form, Matrix2::zeros());
        assert_eq!(g.mean, 0.0);
        assert_eq!(g.gauss, 0.0);
    }

    #[test]
    fn willmore_of_sphere_is_four_pi() {
        for r in [0.5, 1.0, 2.0, 7.0] {
            let s = ParametricSurface::Sphere { radius: r };
            let w = oracle_integrate(&s, |g| 0.25 * g.mean * g.mean, &grid(&s, 64)).unwrap();
            assert!((w - 4.0 * PI).abs() <= 1e-10 * 4.0 * PI);
        }
    }

    #[test]
    fn catenoid_gap_closed_form() {
        for t in [1.0, 2.0, 5.0] {
            let s = ParametricSurface::Catenoid { neck: 1.0, half_height: t };
            let gap = oracle_integrate(&s, |g| g.tracefree_sq, &grid(&s, 64)).unwrap();
            assert!((gap - 8.0 * PI * t.tanh()).abs() < 1e-8, "{gap}");
        }
    }

    #[test]
    fn torus_total_curvature_vanishes() {
        let s = ParametricSurface::Torus { major: 2.0, minor: 1.0 };
        let k = oracle_integrate(&s, |g| g.gauss, &grid(&s, 64)).unwrap();
        assert!(k.abs() < 1e-10);
    }

    #[test]
    fn stored_torus_laplacian_matches_jets() {
        let s = ParametricSurface::Torus { major: 2.0, minor: 1.0 };
        for (u, v) in [(0.1, 0.2), (1.0, 2.0), (4.0, 3.1), (5.5, 5.9)] {
            let stored = s.mean_curvature_laplacian(u, v).unwrap();
            let jets = jet_mean_curvature_laplacian(&s, u, v).unwrap();
            assert!((stored - jets).abs() < 1e-12, "{stored} vs {jets}");
        }
    }

    #[test]
    fn stored_torus_laplacian_matches_chart_differences() {
        // dH = (1/sqrt g) d_v (sqrt g g^vv d_v H) with H(v) from the oracle
        let s = ParametricSurface::Torus { major: 3.0, minor: 1.2 };
        let h = |v: f64| oracle_geometry(&s, 1.0, v).unwrap().mean;
        let sg = |v: f64| oracle_geometry(&s, 1.0, v).unwrap().area_density;
        let gvv = |v: f64| oracle_geometry(&s, 1.0, v).unwrap().metric[(1, 1)];
        let step = 1e-3;
        for v in [0.5, 1.7, 3.0, 4.4] {
            let flux = |x: f64| sg(x) / gvv(x) * (h(x + step / 2.0) - h(x - step / 2.0)) / step;
            let fd = (flux(v + step / 2.0) - flux(v - step / 2.0)) / step / sg(v);
            let stored = s.mean_curvature_laplacian(1.0, v).unwrap();
            assert!((fd - stored).abs() < 1e-5, "{fd} vs {stored}");
        }
    }

    #[test]
    fn quadrature_self_consistency() {
        let surfaces = [
            ParametricSurface::Sphere { radius: 1.5 },
            ParametricSurface::Torus { major: 2.0, minor: 1.0 },
            ParametricSurface::Catenoid { neck: 1.0, half_height: 2.0 },
        ];
        for s in &surfaces {
            let coarse = oracle_integrate_with_estimate(s, |g| g.mean * g.mean + g.tracefree_sq, &grid(s, 16)).unwrap();
            let fine = oracle_integrate_with_estimate(s, |g| g.mean * g.mean + g.tracefree_sq, &grid(s, 32)).unwrap();
            assert!((fine.value - coarse.value).abs() < 10.0 * coarse.error_estimate, "{}", s.name());
        }
    }

    #[test]
    fn non_finite_integrand_reports_point() {
        let s = ParametricSurface::Sphere { radius: 1.0 };
        let err = oracle_integrate(&s, |g| if g.u > 1.0 { f64::NAN } else { 0.0 }, &grid(&s, 8)).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }
}
