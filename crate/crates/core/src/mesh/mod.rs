//! Discrete immersions: triangle meshes with half-edge connectivity, the
//! benchmark primitives, global integrals, Loop refinement and OBJ/OFF I/O.
//!
//! Faces wind counter-clockwise seen from outside, so face normals computed
//! as `(b - a) x (c - a)` point outward and a convex body has positive
//! signed volume.

mod connectivity;
mod io;
mod primitives;
mod refine;

pub use connectivity::{face_of, next, Connectivity, NO_TWIN};
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use primitives::{make_primitive, PrimitiveSpec, RadialProfile};
pub use refine::refine;

use crate::error::{Error, Result};
use crate::Vec3;
use serde::Serialize;

/// Relative threshold (times the squared bounding-box diagonal) below which a
/// face counts as degenerate.
pub const DEGENERATE_FACE_REL: f64 = 1e-12;

/// Surface the mesh samples, used to reproject new vertices on refinement.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceHint {
    None,
    Sphere { center: Vec3, radius: f64 },
    /// `center + radius * (1 + amplitude * profile(n)) * n` over unit directions `n`.
    Radial { center: Vec3, radius: f64, amplitude: f64, profile: RadialProfile },
}

impl SurfaceHint {
    pub fn project(&self, p: &Vec3) -> Vec3 {
        match self {
            SurfaceHint::None => *p,
            SurfaceHint::Sphere { center, radius } => center + (p - center).normalize() * *radius,
            SurfaceHint::Radial { center, radius, amplitude, profile } => {
                let n = (p - center).normalize();
                center + n * (*radius * (1.0 + amplitude * profile.eval(&n)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    connectivity: Connectivity,
    hint: SurfaceHint,
}

/// Area, signed volume and Euler characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshIntegrals {
    pub area: f64,
    pub signed_volume: Option<f64>,
    pub euler_characteristic: i64,
}

/// Result of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub pass: bool,
    pub manifold: bool,
    pub orientation_consistent: bool,
    pub degenerate_faces: Vec<usize>,
    pub boundary_loops: usize,
    pub closed: bool,
    pub euler_characteristic: i64,
    pub messages: Vec<String>,
}

impl TriangleMesh {
    /// Builds a mesh and its connectivity. Fails only on malformed indices;
    /// topological defects are reported by [`validate`].
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::Topology(format!("face {fi} references a vertex out of range")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Topology(format!("face {fi} repeats a vertex")));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::Numerical { what: "vertex coordinate".into(), location: "mesh construction".into() });
        }
        let connectivity = Connectivity::build(n, &faces);
        Ok(TriangleMesh { vertices, faces, connectivity, hint: SurfaceHint::None })
    }

    pub fn with_hint(mut self, hint: SurfaceHint) -> Self {
        self.hint = hint;
        self
    }

    pub fn hint(&self) -> &SurfaceHint {
        &self.hint
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn connectivity(&self) -> &Connectivity {
        &self.connectivity
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.connectivity.edges.len()
    }

    pub fn is_closed(&self) -> bool {
        self.connectivity.is_closed()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.connectivity.boundary_vertex[v]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    /// Same connectivity, new positions. The surface hint is dropped since
    /// the positions need not lie on it any more.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Shape { expected: self.vertices.len(), got: vertices.len() });
        }
        Ok(TriangleMesh {
            vertices,
            faces: self.faces.clone(),
            connectivity: self.connectivity.clone(),
            hint: SurfaceHint::None,
        })
    }

    /// Reverses every face, flipping the outward side.
    pub fn reversed(&self) -> Self {
        let faces = self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect::<Vec<_>>();
        let connectivity = Connectivity::build(self.vertices.len(), &faces);
        TriangleMesh { vertices: self.vertices.clone(), faces, connectivity, hint: self.hint.clone() }
    }

    /// Applies `x -> scale * x + shift` (and `rotation` first, if given).
    pub fn transformed(&self, rotation: Option<&nalgebra::Rotation3<f64>>, scale: f64, shift: Vec3) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| {
                let r = rotation.map_or(*p, |rot| rot * p);
                r * scale + shift
            })
            .collect();
        TriangleMesh {
            vertices,
            faces: self.faces.clone(),
            connectivity: self.connectivity.clone(),
            hint: SurfaceHint::None,
        }
    }

    pub fn face_corners(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Outward area vector, `|n| = 2 * area`.
    pub fn face_normal2(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_corners(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_normal2(f).norm()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }

    pub fn area(&self) -> f64 {
        (0..self.n_faces()).map(|f| self.face_area(f)).sum()
    }

    /// `(1/6) sum det[v0, v1, v2]`; requires a closed mesh.
    pub fn signed_volume(&self) -> Result<f64> {
        if !self.is_closed() {
            return Err(Error::Topology("signed volume requires a closed mesh".into()));
        }
        Ok(self.signed_volume_unchecked())
    }

    pub(crate) fn signed_volume_unchecked(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])))
            .sum::<f64>()
            / 6.0
    }

    pub fn integrals(&self) -> MeshIntegrals {
        mesh_integrals(self)
    }

    /// Interior angle at each corner of face `f`.
    pub fn corner_angles(&self, f: usize) -> [f64; 3] {
        let p = self.face_corners(f);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let e1 = p[(k + 1) % 3] - p[k];
            let e2 = p[(k + 2) % 3] - p[k];
            out[k] = e1.cross(&e2).norm().atan2(e1.dot(&e2));
        }
        out
    }

    /// Sum over vertices of `2*pi - (angle sum)` (interior) or
    /// `pi - (angle sum)` (boundary), the discrete total curvature.
    pub fn total_angle_defect(&self) -> f64 {
        let mut sums = vec![0.0; self.n_vertices()];
        for f in 0..self.n_faces() {
            let ang = self.corner_angles(f);
            for (k, &v) in self.faces[f].iter().enumerate() {
                sums[v] += ang[k];
            }
        }
        sums.iter()
            .enumerate()
            .filter(|(v, _)| !self.connectivity.faces_of(*v).is_empty())
            .map(|(v, s)| {
                let full = if self.is_boundary(v) { std::f64::consts::PI } else { std::f64::consts::TAU };
                full - s
            })
            .sum()
    }
}

pub fn mesh_integrals(mesh: &TriangleMesh) -> MeshIntegrals {
    MeshIntegrals {
        area: mesh.area(),
        signed_volume: mesh.signed_volume().ok(),
        euler_characteristic: mesh.euler_characteristic(),
    }
}

pub fn validate(mesh: &TriangleMesh) -> Diagnostics {
    let c = mesh.connectivity();
    let mut messages = Vec::new();
    let manifold = c.non_manifold_edges.is_empty() && c.non_manifold_vertices.is_empty();
    if !c.non_manifold_edges.is_empty() {
        messages.push(format!("non-manifold: {} edges with more than two faces", c.non_manifold_edges.len()));
    }
    if !c.non_manifold_vertices.is_empty() {
        messages.push(format!("non-manifold: {} vertices with split fans", c.non_manifold_vertices.len()));
    }
    let orientation_consistent = c.inconsistent_edges.is_empty();
    if !orientation_consistent {
        messages.push(format!(
            "orientation inconsistency: {} edges traversed twice in the same direction",
            c.inconsistent_edges.len()
        ));
    }
    let threshold = DEGENERATE_FACE_REL * mesh.bounding_box_diagonal().powi(2);
    let degenerate_faces: Vec<usize> =
        (0..mesh.n_faces()).filter(|&f| !(mesh.face_area(f) > threshold)).collect();
    if !degenerate_faces.is_empty() {
        messages.push(format!("{} degenerate faces (first: {})", degenerate_faces.len(), degenerate_faces[0]));
    }
    if mesh.n_faces() == 0 {
        messages.push("mesh has no faces".into());
    }
    let closed = c.is_closed();
    let chi = mesh.euler_characteristic();
    let mut pass = manifold && orientation_consistent && degenerate_faces.is_empty() && mesh.n_faces() > 0;
    if closed && pass && chi % 2 != 0 {
        messages.push(format!("closed mesh with odd Euler characteristic {chi}"));
        pass = false;
    }
    Diagnostics {
        pass,
        manifold,
        orientation_consistent,
        degenerate_faces,
        boundary_loops: c.boundary_loops,
        closed,
        euler_characteristic: chi,
        messages,
    }
}
