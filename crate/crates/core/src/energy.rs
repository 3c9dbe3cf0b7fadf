//! Energy functionals on meshes and on parametric surfaces.

use crate::analytic::{geometry_from_jets, jet::Jet, ParametricSurface, PointGeometry, QuadratureGrid};
use crate::curvature::{curvature_bundle_with, CurvatureBundle};
use crate::error::{param, Error, Result};
use crate::exec::{map_slice, Execution};
use crate::mesh::TriangleMesh;
use crate::Vec3;
use serde::{Deserialize, Serialize};

/// Weights of `1/4 int (H - c0)² + l1 area + l2 volume`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub c0: f64,
    pub l1: f64,
    pub l2: f64,
}

impl EnergyParams {
    pub fn new(c0: f64, l1: f64, l2: f64) -> Result<Self> {
        let p = EnergyParams { c0, l1, l2 };
        p.validate()?;
        Ok(p)
    }

    /// Locally constrained Willmore weights (`c0 = 0`).
    pub fn willmore(l1: f64, l2: f64) -> Self {
        EnergyParams { c0: 0.0, l1, l2 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("c0", self.c0), ("l1", self.l1), ("l2", self.l2)] {
            if !x.is_finite() {
                return Err(param(name, format!("must be finite, got {x}")));
            }
        }
        Ok(())
    }

    /// The classification assumes a non-negative area weight.
    pub fn require_classification_range(&self) -> Result<()> {
        self.validate()?;
        if self.l1 < 0.0 {
            return Err(Error::Hypothesis(format!("l1 = {} < 0 is outside the classified range l1 >= 0", self.l1)));
        }
        Ok(())
    }

    /// Pointwise Euler-Lagrange operator from its ingredients.
    #[inline]
    pub fn el_operator(&self, lap_h: f64, h: f64, k: f64, tracefree_sq: f64) -> f64 {
        lap_h + h * tracefree_sq + 2.0 * self.c0 * k - (2.0 * self.l1 + 0.5 * self.c0 * self.c0) * h - 2.0 * self.l2
    }
}

/// Energies of one geometry. Entries that need an enclosed volume are
/// `None` on surfaces with boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub area: f64,
    pub volume: Option<f64>,
    /// `1/4 int H²`.
    pub willmore: f64,
    /// `1/4 int (H - c0)² + l1 area + l2 volume`.
    pub helfrich: Option<f64>,
    /// `willmore + l1 area + l2 volume`.
    pub lcw: Option<f64>,
    /// `int |A°|²`.
    pub gap: f64,
    pub breakdown: Breakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakdown {
    pub params: EnergyParams,
    /// `int H`.
    pub mean_integral: f64,
    /// `1/4 int (H - c0)²`.
    pub bending: f64,
    pub area_term: f64,
    pub volume_term: Option<f64>,
}

impl EnergyReport {
    fn assemble(area: f64, volume: Option<f64>, h1: f64, h2: f64, gap: f64, params: EnergyParams) -> Self {
        let willmore = 0.25 * h2;
        // 1/4 int (H - c0)² = 1/4 int H² - c0/2 int H + c0²/4 area
        let bending = willmore - 0.5 * params.c0 * h1 + 0.25 * params.c0 * params.c0 * area;
        let area_term = params.l1 * area;
        let volume_term = volume.map(|v| params.l2 * v);
        EnergyReport {
            area,
            volume,
            willmore,
            helfrich: volume_term.map(|vt| bending + area_term + vt),
            lcw: volume_term.map(|vt| willmore + area_term + vt),
            gap,
            breakdown: Breakdown { params, mean_integral: h1, bending, area_term, volume_term },
        }
    }

    /// `W_{l1,l2}`; undefined without an enclosed volume.
    pub fn lcw_total(&self) -> Result<f64> {
        self.lcw.ok_or_else(|| {
            Error::UndefinedFunctional("the volume-weighted functional needs a closed surface".into())
        })
    }

    pub fn helfrich_total(&self) -> Result<f64> {
        self.helfrich.ok_or_else(|| {
            Error::UndefinedFunctional("the volume-weighted functional needs a closed surface".into())
        })
    }
}

/// Geometry on which energies are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Mesh(&'a TriangleMesh),
    Oracle { surface: &'a ParametricSurface, grid: &'a QuadratureGrid },
}

impl Source<'_> {
    pub fn is_closed(&self) -> bool {
        match self {
            Source::Mesh(m) => m.is_closed(),
            Source::Oracle { surface, .. } => surface.is_closed(),
        }
    }
}

fn check_open(closed: bool, params: &EnergyParams) -> Result<()> {
    if !closed && params.l2 != 0.0 {
        return Err(Error::UndefinedFunctional(format!(
            "volume weight l2 = {} on a surface with boundary: the enclosed volume is not defined",
            params.l2
        )));
    }
    Ok(())
}

/// Area, volume, Willmore, Helfrich and gap. A non-zero volume weight on a
/// surface with boundary is an error; with `l2 = 0` the report is partial.
pub fn evaluate_energies(source: Source<'_>, params: &EnergyParams) -> Result<EnergyReport> {
    evaluate_energies_with(source, params, Execution::default())
}

pub fn evaluate_energies_with(source: Source<'_>, params: &EnergyParams, exec: Execution) -> Result<EnergyReport> {
    params.validate()?;
    check_open(source.is_closed(), params)?;
    match source {
        Source::Mesh(mesh) => {
            let bundle = curvature_bundle_with(mesh, exec)?;
            Ok(mesh_energies(mesh, &bundle, params))
        }
        Source::Oracle { surface, grid } => oracle_energies(surface, grid, params, exec),
    }
}

/// Mesh energies from an already computed bundle. Curvature integrals run
/// over interior vertices; area and volume are exact polyhedral values.
pub fn mesh_energies(mesh: &TriangleMesh, bundle: &CurvatureBundle, params: &EnergyParams) -> EnergyReport {
    let (mut h1, mut h2, mut gap) = (0.0, 0.0, 0.0);
    for i in bundle.interior_iter() {
        let a = bundle.area[i];
        h1 += bundle.mean[i] * a;
        h2 += bundle.mean[i] * bundle.mean[i] * a;
        gap += bundle.tracefree_sq[i] * a;
    }
    let volume = mesh.is_closed().then(|| mesh.signed_volume_unchecked());
    EnergyReport::assemble(mesh.area(), volume, h1, h2, gap, *params)
}

fn oracle_point(surface: &ParametricSurface, u: f64, v: f64) -> PointGeometry {
    let pos = surface.position(Jet::var_u(u, 3), Jet::var_v(v, 3));
    geometry_from_jets(u, v, &pos, None)
}

fn oracle_energies(
    surface: &ParametricSurface,
    grid: &QuadratureGrid,
    params: &EnergyParams,
    exec: Execution,
) -> Result<EnergyReport> {
    surface.validate()?;
    let nodes = grid.nodes();
    let terms = map_slice(exec, &nodes, |&(u, v, w)| {
        let g = oracle_point(surface, u, v);
        let wd = w * g.area_density;
        // outward normal is -nu
        let vol = -g.position.dot(&g.normal) / 3.0;
        [wd, wd * vol, wd * g.mean, wd * g.mean * g.mean, wd * g.tracefree_sq]
    });
    let mut acc = [0.0; 5];
    for t in terms {
        for k in 0..5 {
            acc[k] += t[k];
        }
    }
    if acc.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical { what: "oracle energy".into(), location: surface.name() });
    }
    let volume = surface.is_closed().then_some(acc[1]);
    Ok(EnergyReport::assemble(acc[0], volume, acc[2], acc[3], acc[4], *params))
}

/// `int |A°|²` over the part of the surface inside the open ball.
pub fn localized_gap(source: Source<'_>, center: Vec3, radius: f64) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(param("radius", format!("must be finite and > 0, got {radius}")));
    }
    match source {
        Source::Mesh(mesh) => {
            let bundle = curvature_bundle_with(mesh, Execution::default())?;
            Ok(bundle
                .interior_iter()
                .filter(|&i| (mesh.vertices()[i] - center).norm() < radius)
                .map(|i| bundle.tracefree_sq[i] * bundle.area[i])
                .sum())
        }
        Source::Oracle { surface, grid } => {
            surface.validate()?;
            let nodes = grid.nodes();
            let terms = map_slice(Execution::default(), &nodes, |&(u, v, w)| {
                let g = oracle_point(surface, u, v);
                if (g.position - center).norm() < radius {
                    w * g.area_density * g.tracefree_sq
                } else {
                    0.0
                }
            });
            Ok(terms.into_iter().sum())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_primitive, PrimitiveSpec};
    use nalgebra::Rotation3;
    use std::f64::consts::PI;

    fn oracle(surface: &ParametricSurface, params: EnergyParams) -> EnergyReport {
        let grid = QuadratureGrid::new(surface, 64, 64).unwrap();
        evaluate_energies(Source::Oracle { surface, grid: &grid }, &params).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn critical_sphere_oracle() {
        let r = oracle(&ParametricSurface::Sphere { radius: 2.0 }, EnergyParams::willmore(1.0, -1.0));
        assert!(rel(r.willmore, 4.0 * PI) < 1e-12);
        assert!(rel(r.area, 16.0 * PI) < 1e-12);
        assert!(rel(r.volume.unwrap(), 32.0 * PI / 3.0) < 1e-12);
        assert!(rel(r.lcw.unwrap(), 28.0 * PI / 3.0) < 1e-12);
        assert!((r.lcw.unwrap() - 29.3215).abs() < 1e-4);
        assert!(r.gap.abs() < 1e-12);
    }

    #[test]
    fn zero_weights_reduce_to_willmore() {
        let s = ParametricSurface::Torus { major: 2.0, minor: 0.7 };
        let r = oracle(&s, EnergyParams::default());
        assert_eq!(r.helfrich, Some(r.willmore));
        assert_eq!(r.lcw, Some(r.willmore));
    }

    #[test]
    fn breakdown_sums() {
        let s = ParametricSurface::Torus { major: 2.0, minor: 1.0 };
        let p = EnergyParams::new(0.7, 0.4, -0.3).unwrap();
        let r = oracle(&s, p);
        let b = r.breakdown;
        let total = b.bending + b.area_term + b.volume_term.unwrap();
        assert!((total - r.helfrich.unwrap()).abs() <= 1e-12 * total.abs());
        // direct quadrature of 1/4 (H - c0)²
        let grid = QuadratureGrid::new(&s, 64, 64).unwrap();
        let direct = crate::analytic::oracle_integrate(&s, |g| 0.25 * (g.mean - 0.7).powi(2), &grid).unwrap();
        assert!(rel(b.bending, direct) < 1e-12);
        // torus volume 2 pi² R r²
        assert!(rel(r.volume.unwrap(), 2.0 * PI * PI * 2.0) < 1e-12);
    }

    #[test]
    fn catenoid_partial_report() {
        let s = ParametricSurface::Catenoid { neck: 1.0, half_height: 2.0 };
        let r = oracle(&s, EnergyParams::default());
        assert!(r.willmore.abs() < 1e-20);
        assert!((r.gap - 8.0 * PI * 2f64.tanh()).abs() < 1e-8);
        assert!(r.volume.is_none() && r.lcw.is_none());
        assert!(matches!(r.lcw_total(), Err(Error::UndefinedFunctional(_))));
        let grid = QuadratureGrid::new(&s, 8, 8).unwrap();
        let err = evaluate_energies(Source::Oracle { surface: &s, grid: &grid }, &EnergyParams::willmore(1.0, -1.0));
        assert!(matches!(err, Err(Error::UndefinedFunctional(_))));
    }

    #[test]
    fn mesh_matches_oracle() {
        let mesh = make_primitive(&PrimitiveSpec::Icosphere { radius: 2.0, level: 5 }).unwrap();
        let p = EnergyParams::willmore(1.0, -1.0);
        let m = evaluate_energies(Source::Mesh(&mesh), &p).unwrap();
        let o = oracle(&ParametricSurface::Sphere { radius: 2.0 }, p);
        for (a, b) in [(m.area, o.area), (m.willmore, o.willmore), (m.volume.unwrap(), o.volume.unwrap()), (m.lcw.unwrap(), o.lcw.unwrap())] {
            assert!(rel(a, b) < 1e-2, "{a} vs {b}");
        }
        assert!(m.gap < 1e-2 * o.willmore);
    }

    #[test]
    fn mesh_scale_law() {
        let mesh = make_primitive(&PrimitiveSpec::PerturbedSphere {
            radius: 1.0,
            amplitude: 0.1,
            level: 3,
            profile: Default::default(),
        })
        .unwrap();
        let p = EnergyParams::willmore(0.8, -0.6);
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let s = 1.7;
        let a = evaluate_energies(Source::Mesh(&mesh), &p).unwrap();
        let scaled = mesh.transformed(Some(&rot), s, Vec3::new(0.4, -2.0, 1.0));
        let b = evaluate_energies(Source::Mesh(&scaled), &p).unwrap();
        assert!(rel(b.willmore, a.willmore) < 1e-9);
        assert!(rel(b.gap, a.gap) < 1e-9);
        assert!(rel(b.area, s * s * a.area) < 1e-9);
        assert!(rel(b.volume.unwrap(), s.powi(3) * a.volume.unwrap()) < 1e-9);
        let composite = a.willmore + p.l1 * s * s * a.area + p.l2 * s.powi(3) * a.volume.unwrap();
        assert!(rel(b.lcw.unwrap(), composite) < 1e-9);
    }

    #[test]
    fn localized_gap_monotone() {
        let s = ParametricSurface::Catenoid { neck: 1.0, half_height: 4.0 };
        let grid = QuadratureGrid::new(&s, 64, 128).unwrap();
        let src = Source::Oracle { surface: &s, grid: &grid };
        let mut prev = 0.0;
        for r in [0.5, 1.0, 2.0, 5.0, 50.0] {
            let g = localized_gap(src, Vec3::zeros(), r).unwrap();
            assert!(g >= prev && g <= 8.0 * PI);
            prev = g;
        }
        let sphere = make_primitive(&PrimitiveSpec::Icosphere { radius: 1.0, level: 3 }).unwrap();
        assert!(localized_gap(Source::Mesh(&sphere), Vec3::zeros(), 0.9).unwrap() < 1e-3);
        let patch = make_primitive(&PrimitiveSpec::FlatPatch { width: 1.0, height: 1.0, nx: 8, ny: 8 }).unwrap();
        assert!(localized_gap(Source::Mesh(&patch), Vec3::new(0.5, 0.5, 0.0), 0.3).unwrap().abs() < 1e-20);
    }
}
