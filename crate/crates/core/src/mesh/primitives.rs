use super::{refine, SurfaceHint, TriangleMesh};
use crate::error::{param, Result};
use crate::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

const MAX_LEVEL: u32 = 7;

/// Polynomial of degree at most three in the components of a unit vector,
/// stored as `(coefficient, [i, j, k])` for `x^i y^j z^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialProfile {
    pub terms: Vec<(f64, [u32; 3])>,
}

impl Default for RadialProfile {
    /// `P3(z) + (x^2 - y^2)/2 + 2xyz`; zero mean on the sphere, `|p| < 2`.
    fn default() -> Self {
        RadialProfile {
            terms: vec![
                (2.5, [0, 0, 3]),
                (-1.5, [0, 0, 1]),
                (0.5, [2, 0, 0]),
                (-0.5, [0, 2, 0]),
                (2.0, [1, 1, 1]),
            ],
        }
    }
}

fn double_factorial_odd(n: i64) -> f64 {
    // (n)!! for odd n >= -1
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Mean of `x^i y^j z^k` over the unit sphere.
pub(crate) fn sphere_moment(e: [u32; 3]) -> f64 {
    if e.iter().any(|p| p % 2 == 1) {
        return 0.0;
    }
    let num: f64 = e.iter().map(|&p| double_factorial_odd(p as i64 - 1)).product();
    num / double_factorial_odd((e[0] + e[1] + e[2]) as i64 + 1)
}

impl RadialProfile {
    pub fn eval(&self, n: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|(c, [i, j, k])| c * n.x.powi(*i as i32) * n.y.powi(*j as i32) * n.z.powi(*k as i32))
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    /// Exact mean over the unit sphere.
    pub fn sphere_mean(&self) -> f64 {
        self.terms.iter().map(|(c, e)| c * sphere_moment(*e)).sum()
    }

    fn check(&self) -> Result<()> {
        if self.terms.iter().any(|(c, _)| !c.is_finite()) {
            return Err(param("profile", "non-finite coefficient"));
        }
        if self.degree() > 3 {
            return Err(param("profile", format!("degree {} exceeds 3", self.degree())));
        }
        if self.sphere_mean().abs() > 1e-12 {
            return Err(param("profile", format!("mean {:e} over the sphere is not zero", self.sphere_mean())));
        }
        Ok(())
    }
}

/// Benchmark geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimitiveSpec {
    /// Loop-subdivided icosahedron projected onto the sphere of `radius`.
    Icosphere { radius: f64, level: u32 },
    /// `(c cosh(v/c) cos u, c cosh(v/c) sin u, v)`, `|v| <= half_height`;
    /// `around` samples in `u`, `along` intervals in `v`.
    Catenoid { neck: f64, half_height: f64, around: usize, along: usize },
    /// `[0, width] x [0, height]` in the plane `z = 0`.
    FlatPatch { width: f64, height: f64, nx: usize, ny: usize },
    /// Icosphere displaced radially by `radius * amplitude * profile(n)`.
    PerturbedSphere {
        radius: f64,
        amplitude: f64,
        level: u32,
        #[serde(default)]
        profile: RadialProfile,
    },
}

fn positive(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(param(field, format!("must be finite and > 0, got {x}")))
    }
}

fn level_ok(level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        Err(param("level", format!("must be <= {MAX_LEVEL}, got {level}")))
    } else {
        Ok(())
    }
}

impl PrimitiveSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PrimitiveSpec::Icosphere { radius, level } => {
                positive("radius", *radius)?;
                level_ok(*level)
            }
            PrimitiveSpec::Catenoid { neck, half_height, around, along } => {
                positive("neck", *neck)?;
                positive("half_height", *half_height)?;
                if *around < 3 {
                    return Err(param("around", "needs at least 3 samples"));
                }
                if *along < 1 {
                    return Err(param("along", "needs at least 1 interval"));
                }
                Ok(())
            }
            PrimitiveSpec::FlatPatch { width, height, nx, ny } => {
                positive("width", *width)?;
                positive("height", *height)?;
                if *nx < 1 {
                    return Err(param("nx", "needs at least 1 cell"));
                }
                if *ny < 1 {
                    return Err(param("ny", "needs at least 1 cell"));
                }
                Ok(())
            }
            PrimitiveSpec::PerturbedSphere { radius, amplitude, level, profile } => {
                positive("radius", *radius)?;
                if !(amplitude.is_finite() && *amplitude >= 0.0 && *amplitude < 0.3) {
                    return Err(param("amplitude", format!("must lie in [0, 0.3), got {amplitude}")));
                }
                level_ok(*level)?;
                profile.check()
            }
        }
    }
}

pub fn make_primitive(spec: &PrimitiveSpec) -> Result<TriangleMesh> {
    spec.validate()?;
    match spec {
        PrimitiveSpec::Icosphere { radius, level } => icosphere(*radius, *level),
        PrimitiveSpec::Catenoid { neck, half_height, around, along } => {
            catenoid(*neck, *half_height, *around, *along)
        }
        PrimitiveSpec::FlatPatch { width, height, nx, ny } => flat_patch(*width, *height, *nx, *ny),
        PrimitiveSpec::PerturbedSphere { radius, amplitude, level, profile } => {
            let unit = icosphere(1.0, *level)?;
            let hint = SurfaceHint::Radial {
                center: Vec3::zeros(),
                radius: *radius,
                amplitude: *amplitude,
                profile: profile.clone(),
            };
            let verts: Vec<Vec3> = unit.vertices().iter().map(|p| hint.project(p)).collect();
            if verts.iter().any(|p| !(p.norm() > 0.0)) {
                return Err(param("amplitude", "radial displacement collapses a vertex"));
            }
            Ok(unit.with_positions(verts)?.with_hint(hint))
        }
    }
}

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let verts: Vec<Vec3> = raw.iter().map(|p| Vec3::new(p[0], p[1], p[2]).normalize()).collect();
    let mut faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for f in &mut faces {
        let (a, b, c) = (verts[f[0]], verts[f[1]], verts[f[2]]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    (verts, faces)
}

fn icosphere(radius: f64, level: u32) -> Result<TriangleMesh> {
    let (verts, faces) = icosahedron();
    let hint = SurfaceHint::Sphere { center: Vec3::zeros(), radius };
    let verts = verts.into_iter().map(|p| p * radius).collect();
    let mut mesh = TriangleMesh::new(verts, faces)?.with_hint(hint);
    for _ in 0..level {
        mesh = refine(&mesh)?;
    }
    Ok(mesh)
}

fn catenoid(neck: f64, half_height: f64, around: usize, along: usize) -> Result<TriangleMesh> {
    let mut verts = Vec::with_capacity(around * (along + 1));
    for j in 0..=along {
        let v = -half_height + 2.0 * half_height * j as f64 / along as f64;
        let r = neck * (v / neck).cosh();
        for i in 0..around {
            let u = TAU * i as f64 / around as f64;
            verts.push(Vec3::new(r * u.cos(), r * u.sin(), v));
        }
    }
    let id = |i: usize, j: usize| j * around + (i % around);
    let mut faces = Vec::with_capacity(2 * around * along);
    for j in 0..along {
        for i in 0..around {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(verts, faces)
}

fn flat_patch(width: f64, height: f64, nx: usize, ny: usize) -> Result<TriangleMesh> {
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push(Vec3::new(width * i as f64 / nx as f64, height * j as f64 / ny as f64, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate;

    #[test]
    fn icosphere_vertex_counts() {
        for level in 0..=4 {
            let m = make_primitive(&PrimitiveSpec::Icosphere { radius: 1.0, level }).unwrap();
            assert_eq!(m.n_vertices(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            assert!(validate(&m).pass);
        }
    }

    #[test]
    fn perturbed_sphere_amplitude_bound() {
        let spec = PrimitiveSpec::PerturbedSphere {
            radius: 2.0,
            amplitude: 0.05,
            level: 4,
            profile: RadialProfile::default(),
        };
        let m = make_primitive(&spec).unwrap();
        assert!(m.is_closed());
        assert_eq!(m.euler_characteristic(), 2);
        let dev = m.vertices().iter().map(|p| (p.norm() - 2.0).abs()).fold(0.0, f64::max);
        assert!(dev <= 0.1 * 2.0 && dev > 0.0, "{dev}");
    }

    #[test]
    fn default_profile_is_zero_mean_cubic() {
        let p = RadialProfile::default();
        assert_eq!(p.degree(), 3);
        assert!(p.sphere_mean().abs() < 1e-15);
        // cross-check the exact moment formula against a quadrature-free identity
        assert!((sphere_moment([2, 0, 0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((sphere_moment([2, 2, 0]) - 1.0 / 15.0).abs() < 1e-15);
        assert!((sphere_moment([4, 0, 0]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let cases = [
            (PrimitiveSpec::Icosphere { radius: -1.0, level: 2 }, "radius"),
            (PrimitiveSpec::Icosphere { radius: 1.0, level: 11 }, "level"),
            (PrimitiveSpec::Catenoid { neck: 1.0, half_height: 0.0, around: 8, along: 8 }, "half_height"),
            (PrimitiveSpec::FlatPatch { width: 1.0, height: 1.0, nx: 0, ny: 1 }, "nx"),
            (
                PrimitiveSpec::PerturbedSphere {
                    radius: 1.0,
                    amplitude: 0.3,
                    level: 2,
                    profile: RadialProfile::default(),
                },
                "amplitude",
            ),
            (
                PrimitiveSpec::PerturbedSphere {
                    radius: 1.0,
                    amplitude: 0.1,
                    level: 2,
                    profile: RadialProfile { terms: vec![(1.0, [2, 0, 0])] },
                },
                "profile",
            ),
        ];
        for (spec, field) in cases {
            match make_primitive(&spec) {
                Err(crate::Error::Parameter { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected parameter error for {field}, got {other:?}"),
            }
        }
    }
}
