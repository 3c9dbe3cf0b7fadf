//! Discrete curvature: cotangent Laplace-Beltrami operator, mean curvature
//! from the cotangent mean-curvature vector, Gauss curvature from angle
//! defects, and the tracefree norm `|A°|² = H²/2 - 2K`.
//!
//! All per-vertex quantities are computed from the vertex's own fan of
//! faces, which lets the finite-difference code re-evaluate a handful of
//! vertices after moving one of them.

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::mesh::{validate, TriangleMesh, DEGENERATE_FACE_REL};
use crate::Vec3;
use serde::Serialize;
use std::f64::consts::TAU;

/// Read access to vertex positions, possibly with one vertex overridden.
pub(crate) trait Positions: Sync {
    fn at(&self, i: usize) -> Vec3;
}

impl Positions for [Vec3] {
    fn at(&self, i: usize) -> Vec3 {
        self[i]
    }
}

impl Positions for Vec<Vec3> {
    fn at(&self, i: usize) -> Vec3 {
        self[i]
    }
}

/// `base` with vertex `index` moved to `moved`.
pub(crate) struct Overlay<'a> {
    pub base: &'a [Vec3],
    pub index: usize,
    pub moved: Vec3,
}

impl Positions for Overlay<'_> {
    fn at(&self, i: usize) -> Vec3 {
        if i == self.index {
            self.moved
        } else {
            self.base[i]
        }
    }
}

/// Fan quantities of a single vertex.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalGeometry {
    pub area: f64,
    /// `(1/2A) sum (cot a + cot b)(x_j - x_i)`, magnitude `k1 + k2`.
    pub mean_vector: Vec3,
    /// Sum of outward doubled-area face normals.
    pub normal_sum: Vec3,
    pub angle_sum: f64,
}

impl LocalGeometry {
    pub fn inward_normal(&self) -> Vec3 {
        -self.normal_sum.normalize()
    }

    pub fn mean(&self) -> f64 {
        self.mean_vector.dot(&self.inward_normal())
    }
}

/// Orders face `f` so that `v` comes first, keeping the winding.
#[inline]
pub(crate) fn rotate_to(face: [usize; 3], v: usize) -> (usize, usize) {
    if face[0] == v {
        (face[1], face[2])
    } else if face[1] == v {
        (face[2], face[0])
    } else {
        (face[0], face[1])
    }
}

#[inline]
fn cot(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b) / a.cross(b).norm()
}

pub(crate) fn vertex_local<P: Positions + ?Sized>(mesh: &TriangleMesh, pos: &P, v: usize) -> LocalGeometry {
    let xi = pos.at(v);
    let mut area = 0.0;
    let mut hvec = Vec3::zeros();
    let mut normal_sum = Vec3::zeros();
    let mut angle_sum = 0.0;
    for &f in mesh.connectivity().faces_of(v) {
        let (j, k) = rotate_to(mesh.faces()[f], v);
        let (xj, xk) = (pos.at(j), pos.at(k));
        let ej = xj - xi;
        let ek = xk - xi;
        let n2 = ej.cross(&ek);
        let dbl = n2.norm();
        let cot_i = ej.dot(&ek) / dbl;
        let cot_j = cot(&(xi - xj), &(xk - xj));
        let cot_k = cot(&(xi - xk), &(xj - xk));
        normal_sum += n2;
        angle_sum += dbl.atan2(ej.dot(&ek));
        hvec += ej * cot_k + ek * cot_j;
        let tri = 0.5 * dbl;
        area += if cot_i < 0.0 {
            0.5 * tri
        } else if cot_j < 0.0 || cot_k < 0.0 {
            0.25 * tri
        } else {
            0.125 * (ej.norm_squared() * cot_k + ek.norm_squared() * cot_j)
        };
    }
    LocalGeometry { area, mean_vector: hvec / (2.0 * area), normal_sum, angle_sum }
}

/// Cotangent Laplacian of `field` at `v`, divided by `area`.
pub(crate) fn laplacian_local<P, F>(mesh: &TriangleMesh, pos: &P, v: usize, area: f64, field: F) -> f64
where
    P: Positions + ?Sized,
    F: Fn(usize) -> f64,
{
    let xi = pos.at(v);
    let fi = field(v);
    let mut acc = 0.0;
    for &f in mesh.connectivity().faces_of(v) {
        let (j, k) = rotate_to(mesh.faces()[f], v);
        let (xj, xk) = (pos.at(j), pos.at(k));
        let cot_j = cot(&(xi - xj), &(xk - xj));
        let cot_k = cot(&(xi - xk), &(xj - xk));
        acc += cot_k * (field(j) - fi) + cot_j * (field(k) - fi);
    }
    acc / (2.0 * area)
}

/// Per-vertex curvature invariants. Boundary vertices carry `NaN` in the
/// curvature fields and `false` in `interior`.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureBundle {
    pub area: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub mean: Vec<f64>,
    pub gauss: Vec<f64>,
    pub tracefree_sq: Vec<f64>,
    pub interior: Vec<bool>,
    /// Vertices where `H²/2 - 2K` came out negative and was clamped to zero.
    pub clamp_count: usize,
    /// Clamps larger than [`CLAMP_TOLERANCE_REL`] times the local curvature
    /// scale `H²/2 + 2|K|`.
    pub significant_clamps: usize,
    pub max_clamp: f64,
}

/// Relative size below which a negative `H²/2 - 2K` is treated as
/// discretization noise of an umbilic point.
pub const CLAMP_TOLERANCE_REL: f64 = 1e-3;

impl CurvatureBundle {
    pub fn n_interior(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    /// Sum of `K * area` over interior vertices.
    pub fn total_gauss(&self) -> f64 {
        self.interior_iter().map(|v| self.gauss[v] * self.area[v]).sum()
    }

    pub fn interior_iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.interior.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn clamp_fraction(&self) -> f64 {
        self.clamp_count as f64 / self.n_interior().max(1) as f64
    }

    pub fn significant_clamp_fraction(&self) -> f64 {
        self.significant_clamps as f64 / self.n_interior().max(1) as f64
    }
}

/// Rejects meshes the curvature operators cannot handle.
pub(crate) fn check_mesh(mesh: &TriangleMesh) -> Result<()> {
    let threshold = DEGENERATE_FACE_REL * mesh.bounding_box_diagonal().powi(2);
    for f in 0..mesh.n_faces() {
        let a = mesh.face_area(f);
        if !(a > threshold) {
            return Err(Error::DegenerateFace { face: f, area: a, threshold });
        }
    }
    let d = validate(mesh);
    if !d.manifold || !d.orientation_consistent {
        return Err(Error::Topology(d.messages.join("; ")));
    }
    Ok(())
}

/// Tracefree norm from `H` and `K`; returns the value and the clamp amount.
#[inline]
pub(crate) fn tracefree_from(h: f64, k: f64) -> (f64, f64) {
    let raw = 0.5 * h * h - 2.0 * k;
    if raw < 0.0 {
        (0.0, -raw)
    } else {
        (raw, 0.0)
    }
}

pub fn curvature_bundle(mesh: &TriangleMesh) -> Result<CurvatureBundle> {
    curvature_bundle_with(mesh, Execution::default())
}

pub fn curvature_bundle_with(mesh: &TriangleMesh, exec: Execution) -> Result<CurvatureBundle> {
    check_mesh(mesh)?;
    let pos = mesh.vertices();
    let locals = map_range(exec, mesh.n_vertices(), |v| vertex_local(mesh, pos, v));
    Ok(bundle_from_locals(mesh, &locals))
}

pub(crate) fn bundle_from_locals(mesh: &TriangleMesh, locals: &[LocalGeometry]) -> CurvatureBundle {
    let n = locals.len();
    let mut b = CurvatureBundle {
        area: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
        gauss: Vec::with_capacity(n),
        tracefree_sq: Vec::with_capacity(n),
        interior: Vec::with_capacity(n),
        clamp_count: 0,
        significant_clamps: 0,
        max_clamp: 0.0,
    };
    for (v, l) in locals.iter().enumerate() {
        b.area.push(l.area);
        b.normal.push(l.inward_normal());
        let interior = !mesh.is_boundary(v);
        b.interior.push(interior);
        if interior {
            let h = l.mean();
            let k = (TAU - l.angle_sum) / l.area;
            let (ao, clamp) = tracefree_from(h, k);
            if clamp > 0.0 {
                b.clamp_count += 1;
                if clamp > CLAMP_TOLERANCE_REL * (0.5 * h * h + 2.0 * k.abs()) {
                    b.significant_clamps += 1;
                }
                b.max_clamp = b.max_clamp.max(clamp);
            }
            b.mean.push(h);
            b.gauss.push(k);
            b.tracefree_sq.push(ao);
        } else {
            b.mean.push(f64::NAN);
            b.gauss.push(f64::NAN);
            b.tracefree_sq.push(f64::NAN);
        }
    }
    if b.clamp_count > 0 {
        log::debug!(
            "clamped |A°|² at {} vertices ({} beyond tolerance), max magnitude {:e}",
            b.clamp_count,
            b.significant_clamps,
            b.max_clamp
        );
    }
    b
}

/// Symmetric cotangent stiffness (off-diagonal weights `(cot a + cot b)/2`)
/// together with the diagonal mixed-area mass.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    mass: Vec<f64>,
}

impl SparseOperator {
    pub fn assemble(mesh: &TriangleMesh) -> Result<Self> {
        check_mesh(mesh)?;
        let conn = mesh.connectivity();
        let n = mesh.n_vertices();
        let mut edge_w = std::collections::HashMap::with_capacity(conn.edges.len());
        for f in 0..mesh.n_faces() {
            let face = mesh.faces()[f];
            let p = mesh.face_corners(f);
            for c in 0..3 {
                let (a, b) = (face[(c + 1) % 3], face[(c + 2) % 3]);
                let w = 0.5 * cot(&(p[(c + 1) % 3] - p[c]), &(p[(c + 2) % 3] - p[c]));
                *edge_w.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(2 * conn.edges.len());
        let mut weights = Vec::with_capacity(2 * conn.edges.len());
        offsets.push(0);
        for v in 0..n {
            let mut row: Vec<(usize, f64)> =
                conn.neighbors_of(v).iter().map(|&w| (w, edge_w[&(v.min(w), v.max(w))])).collect();
            row.sort_unstable_by_key(|e| e.0);
            for (c, w) in row {
                cols.push(c);
                weights.push(w);
            }
            offsets.push(cols.len());
        }
        let pos = mesh.vertices();
        let mass = (0..n).map(|v| vertex_local(mesh, pos, v).area).collect();
        Ok(SparseOperator { offsets, cols, weights, mass })
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Stiffness entry `(i, j)`, zero when not adjacent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = self.offsets[i]..self.offsets[i + 1];
        match self.cols[row.clone()].binary_search(&j) {
            Ok(k) => self.weights[row.start + k],
            Err(_) if i == j => -self.weights[row].iter().sum::<f64>(),
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.offsets[i]..self.offsets[i + 1]).map(move |k| (self.cols[k], self.weights[k]))
    }

    /// Pointwise Laplace-Beltrami estimate `M^-1 S f`.
    pub fn laplace_field(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.n() {
            return Err(Error::Shape { expected: self.n(), got: field.len() });
        }
        Ok((0..self.n())
            .map(|i| self.row(i).map(|(j, w)| w * (field[j] - field[i])).sum::<f64>() / self.mass[i])
            .collect())
    }
}

pub fn laplace_field(op: &SparseOperator, field: &[f64]) -> Result<Vec<f64>> {
    op.laplace_field(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_primitive, PrimitiveSpec};
    use std::f64::consts::PI;

    fn ico(radius: f64, level: u32) -> TriangleMesh {
        make_primitive(&PrimitiveSpec::Icosphere { radius, level }).unwrap()
    }

    #[test]
    fn sphere_radius_two_level4() {
        let b = curvature_bundle(&ico(2.0, 4)).unwrap();
        for v in b.interior_iter() {
            assert!((b.mean[v] - 1.0).abs() < 0.01, "H = {}", b.mean[v]);
            assert!((b.gauss[v] - 0.25).abs() < 0.02 * 0.25, "K = {}", b.gauss[v]);
            assert!(b.tracefree_sq[v] <= 1e-2);
        }
    }

    #[test]
    fn flat_patch_is_flat() {
        let m = make_primitive(&PrimitiveSpec::FlatPatch { width: 1.0, height: 1.0, nx: 8, ny: 8 }).unwrap();
        let b = curvature_bundle(&m).unwrap();
        assert!(b.n_interior() > 0);
        for v in b.interior_iter() {
            assert!(b.mean[v].abs() < 1e-10);
            assert!(b.gauss[v].abs() < 1e-10);
            assert!(b.tracefree_sq[v].abs() < 1e-10);
        }
        assert!(b.mean[0].is_nan());
    }

    #[test]
    fn catenoid_mid_band() {
        let m = make_primitive(&PrimitiveSpec::Catenoid { neck: 1.0, half_height: 2.0, around: 64, along: 64 })
            .unwrap();
        let b = curvature_bundle(&m).unwrap();
        let mut checked = 0;
        for v in b.interior_iter() {
            let z = m.vertices()[v].z;
            if z.abs() > 1.0 {
                continue;
            }
            let kmax = 1.0 / z.cosh().powi(2);
            let expected = 2.0 * kmax * kmax;
            assert!(b.mean[v].abs() <= 0.03 * kmax, "H = {} at z = {z}", b.mean[v]);
            assert!((b.tracefree_sq[v] - expected).abs() <= 0.05 * expected, "|A°|² = {} vs {expected}", b.tracefree_sq[v]);
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn gauss_bonnet_on_closed_meshes() {
        let meshes = [
            ico(1.0, 3),
            ico(3.0, 2),
            make_primitive(&PrimitiveSpec::PerturbedSphere {
                radius: 1.0,
                amplitude: 0.2,
                level: 3,
                profile: Default::default(),
            })
            .unwrap(),
        ];
        for m in &meshes {
            let b = curvature_bundle(m).unwrap();
            assert!((b.total_gauss() - 4.0 * PI).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_after_clamp() {
        let b = curvature_bundle(&ico(1.0, 4)).unwrap();
        for v in b.interior_iter() {
            let raw = 0.5 * b.mean[v].powi(2) - 2.0 * b.gauss[v];
            assert!((raw - b.tracefree_sq[v]).abs() <= b.max_clamp + 1e-15);
            assert!(b.tracefree_sq[v] >= 0.0);
        }
    }

    #[test]
    fn clamps_stay_within_tolerance_at_level4() {
        let meshes = [
            ico(2.0, 4),
            make_primitive(&PrimitiveSpec::PerturbedSphere {
                radius: 2.0,
                amplitude: 0.05,
                level: 4,
                profile: Default::default(),
            })
            .unwrap(),
            make_primitive(&PrimitiveSpec::Catenoid { neck: 1.0, half_height: 2.0, around: 64, along: 64 }).unwrap(),
        ];
        for m in &meshes {
            let b = curvature_bundle(m).unwrap();
            assert!(b.significant_clamp_fraction() < 0.01);
        }
    }

    #[test]
    fn scale_covariance() {
        let m = ico(1.0, 3);
        let s = 2.7;
        let ms = m.transformed(None, s, Vec3::zeros());
        let (b, bs) = (curvature_bundle(&m).unwrap(), curvature_bundle(&ms).unwrap());
        for v in 0..m.n_vertices() {
            assert!((bs.mean[v] * s - b.mean[v]).abs() <= 1e-9 * b.mean[v].abs());
            assert!((bs.gauss[v] * s * s - b.gauss[v]).abs() <= 1e-9 * b.gauss[v].abs());
            assert!((bs.tracefree_sq[v] * s * s - b.tracefree_sq[v]).abs() <= 1e-9 * (b.tracefree_sq[v] + 1e-12));
        }
    }

    #[test]
    fn operator_rows_and_symmetry() {
        let m = make_primitive(&PrimitiveSpec::PerturbedSphere {
            radius: 1.0,
            amplitude: 0.1,
            level: 2,
            profile: Default::default(),
        })
        .unwrap();
        let op = SparseOperator::assemble(&m).unwrap();
        for i in 0..op.n() {
            let diag = op.weight(i, i);
            let off: f64 = op.row(i).map(|(_, w)| w).sum();
            assert!((diag + off).abs() <= 1e-10 * diag.abs());
            for (j, w) in op.row(i) {
                assert_eq!(w, op.weight(j, i));
            }
        }
        let ones = vec![3.5; op.n()];
        assert!(op.laplace_field(&ones).unwrap().iter().all(|x| x.abs() < 1e-10));
        assert!(matches!(op.laplace_field(&ones[1..]), Err(Error::Shape { .. })));
    }

    #[test]
    fn z_is_an_eigenfunction() {
        let m = ico(1.0, 4);
        let op = SparseOperator::assemble(&m).unwrap();
        let z: Vec<f64> = m.vertices().iter().map(|p| p.z).collect();
        let lz = op.laplace_field(&z).unwrap();
        let err = lz.iter().zip(&z).map(|(l, z)| (l + 2.0 * z).abs()).fold(0.0, f64::max);
        assert!(err <= 0.02 * 2.0, "{err}");
    }

    #[test]
    fn degenerate_face_cited() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 1]]).unwrap();
        match curvature_bundle(&m) {
            Err(Error::DegenerateFace { face, .. }) => assert_eq!(face, 1),
            other => panic!("{other:?}"),
        }
    }
}
