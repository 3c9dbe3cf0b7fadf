use super::jet::{Jet, JetVec};
use crate::error::{param, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Rectangle `u x v` with per-axis periodicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartDomain {
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub periodic: [bool; 2],
}

/// Named surfaces with closed-form charts.
///
/// Every chart is oriented so that `f_u x f_v` points outward (upward for
/// the graph and plane); the inward normal used for curvature signs is its
/// negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParametricSurface {
    /// `r (sin u cos v, sin u sin v, cos u)`, `u` in `[0, pi]`, `v` periodic.
    Sphere { radius: f64 },
    /// `(u, v, 0)` on `[0, width] x [0, height]`.
    PlanePatch { width: f64, height: f64 },
    /// `(c cosh(v/c) cos u, c cosh(v/c) sin u, v)`, `u` periodic, `|v| <= half_height`.
    Catenoid { neck: f64, half_height: f64 },
    /// `((R + r cos v) cos u, (R + r cos v) sin u, r sin v)`, both periodic.
    Torus { major: f64, minor: f64 },
    /// `(u, v, a exp(-(u² + v²)/w²))` on `[-L, L]²`.
    Graph { amplitude: f64, width: f64, half_extent: f64 },
}

fn positive(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(param(field, format!("must be finite and > 0, got {x}")))
    }
}

impl ParametricSurface {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ParametricSurface::Sphere { radius } => positive("radius", radius),
            ParametricSurface::PlanePatch { width, height } => {
                positive("width", width)?;
                positive("height", height)
            }
            ParametricSurface::Catenoid { neck, half_height } => {
                positive("neck", neck)?;
                positive("half_height", half_height)
            }
            ParametricSurface::Torus { major, minor } => {
                positive("minor", minor)?;
                positive("major", major)?;
                if major <= minor {
                    return Err(param("major", "must exceed the minor radius for an immersed torus"));
                }
                Ok(())
            }
            ParametricSurface::Graph { amplitude, width, half_extent } => {
                if !amplitude.is_finite() {
                    return Err(param("amplitude", "must be finite"));
                }
                positive("width", width)?;
                positive("half_extent", half_extent)
            }
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ParametricSurface::Sphere { radius } => format!("sphere(r={radius})"),
            ParametricSurface::PlanePatch { width, height } => format!("plane_patch({width}x{height})"),
            ParametricSurface::Catenoid { neck, half_height } => format!("catenoid(c={neck},T={half_height})"),
            ParametricSurface::Torus { major, minor } => format!("torus(R={major},r={minor})"),
            ParametricSurface::Graph { amplitude, width, half_extent } => {
                format!("graph(a={amplitude},w={width},L={half_extent})")
            }
        }
    }

    pub fn domain(&self) -> ChartDomain {
        match *self {
            ParametricSurface::Sphere { .. } => ChartDomain { u: (0.0, PI), v: (0.0, TAU), periodic: [false, true] },
            ParametricSurface::PlanePatch { width, height } => {
                ChartDomain { u: (0.0, width), v: (0.0, height), periodic: [false, false] }
            }
            ParametricSurface::Catenoid { half_height, .. } => {
                ChartDomain { u: (0.0, TAU), v: (-half_height, half_height), periodic: [true, false] }
            }
            ParametricSurface::Torus { .. } => ChartDomain { u: (0.0, TAU), v: (0.0, TAU), periodic: [true, true] },
            ParametricSurface::Graph { half_extent: l, .. } => {
                ChartDomain { u: (-l, l), v: (-l, l), periodic: [false, false] }
            }
        }
    }

    /// Closed surfaces have no boundary terms in integration by parts.
    pub fn is_closed(&self) -> bool {
        matches!(self, ParametricSurface::Sphere { .. } | ParametricSurface::Torus { .. })
    }

    pub fn check_point(&self, u: f64, v: f64) -> Result<()> {
        let d = self.domain();
        let inside = |x: f64, (lo, hi): (f64, f64)| x.is_finite() && x >= lo && x <= hi;
        let mut ok = inside(u, d.u) && inside(v, d.v);
        if let ParametricSurface::Sphere { .. } = self {
            // the poles are chart singularities
            ok &= u > 0.0 && u < PI;
        }
        if ok {
            Ok(())
        } else {
            Err(Error::Domain { surface: self.name(), u, v })
        }
    }

    /// Position map evaluated on jets.
    pub fn position(&self, u: Jet, v: Jet) -> JetVec {
        match *self {
            ParametricSurface::Sphere { radius } => {
                let s = u.sin() * radius;
                [s * v.cos(), s * v.sin(), u.cos() * radius]
            }
            ParametricSurface::PlanePatch { .. } => [u, v, Jet::constant(0.0, u.order().min(v.order()))],
            ParametricSurface::Catenoid { neck, .. } => {
                let r = (v / neck).cosh() * neck;
                [r * u.cos(), r * u.sin(), v]
            }
            ParametricSurface::Torus { major, minor } => {
                let w = v.cos() * minor + major;
                [w * u.cos(), w * u.sin(), v.sin() * minor]
            }
            ParametricSurface::Graph { amplitude, width, .. } => {
                let h = (-(u.square() + v.square()) / (width * width)).exp() * amplitude;
                [u, v, h]
            }
        }
    }

    /// Hand-derived `Laplace-Beltrami(H)` where available.
    ///
    /// Sphere and plane have constant `H`; the catenoid is minimal. For the
    /// torus, with `w = R + r cos v` and `H = 1/r + cos v / w`,
    /// `dH = -R (R cos v + r) / (r² w³)`.
    pub fn mean_curvature_laplacian(&self, _u: f64, v: f64) -> Option<f64> {
        match *self {
            ParametricSurface::Sphere { .. }
            | ParametricSurface::PlanePatch { .. }
            | ParametricSurface::Catenoid { .. } => Some(0.0),
            ParametricSurface::Torus { major, minor } => {
                let w = major + minor * v.cos();
                Some(-major * (major * v.cos() + minor) / (minor * minor * w.powi(3)))
            }
            ParametricSurface::Graph { .. } => None,
        }
    }

    pub fn has_mean_curvature_laplacian(&self) -> bool {
        self.mean_curvature_laplacian(0.0, 0.0).is_some()
    }
}
