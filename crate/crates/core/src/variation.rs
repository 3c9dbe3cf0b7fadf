//! Euler-Lagrange residuals and energy gradients on meshes and oracles.
//!
//! The residual is stored without the outer minus sign that some authors
//! attach to the Helfrich operator: `W = dH + H|A°|² + 2c0K - (2l1 + c0²/2)H
//! - 2l2`, so that `d/dt E(f + t phi nu) = 1/2 int phi W`.

use crate::analytic::{geometry_from_jets, jet::Jet, ParametricSurface, QuadratureGrid};
use crate::curvature::{check_mesh, laplacian_local, tracefree_from, vertex_local, LocalGeometry, Overlay, Positions};
use crate::energy::{EnergyParams, Source};
use crate::error::{param, Error, Result};
use crate::exec::{map_range, map_slice, Execution};
use crate::mesh::TriangleMesh;
use crate::Vec3;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Pointwise residual with its norms over the interior mask.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualField {
    /// `NaN` outside the mask.
    pub value: Vec<f64>,
    /// Vertex area or quadrature weight times area density.
    pub area: Vec<f64>,
    pub interior: Vec<bool>,
    /// `sqrt(sum W² area)` over the mask.
    pub l2: f64,
    pub linf: f64,
    pub n_interior: usize,
}

impl ResidualField {
    fn from_values(value: Vec<f64>, area: Vec<f64>, interior: Vec<bool>) -> Self {
        let (mut s, mut linf, mut n) = (0.0, 0.0f64, 0);
        for i in 0..value.len() {
            if interior[i] {
                s += value[i] * value[i] * area[i];
                linf = linf.max(value[i].abs());
                n += 1;
            }
        }
        ResidualField { value, area, interior, l2: s.sqrt(), linf, n_interior: n }
    }

    /// Area-weighted mean square, `l2² / total mask area`.
    pub fn mean_square(&self) -> f64 {
        let a: f64 = self.area.iter().zip(&self.interior).filter(|p| *p.1).map(|p| p.0).sum();
        self.l2 * self.l2 / a
    }
}

/// Vertices where the discrete residual is defined: not on the boundary and
/// with no boundary neighbour (the Laplacian of `H` needs the whole ring).
pub fn residual_mask(mesh: &TriangleMesh) -> Vec<bool> {
    (0..mesh.n_vertices())
        .map(|v| !mesh.is_boundary(v) && mesh.connectivity().neighbors_of(v).iter().all(|&j| !mesh.is_boundary(j)))
        .collect()
}

/// `(H, K, |A°|²)` of a local fan.
#[inline]
pub(crate) fn invariants(l: &LocalGeometry) -> (f64, f64, f64) {
    let h = l.mean();
    let k = (TAU - l.angle_sum) / l.area;
    (h, k, tracefree_from(h, k).0)
}

/// Residual at `v` from precomputed fans and mean curvatures.
pub(crate) fn residual_at<P: Positions + ?Sized>(
    mesh: &TriangleMesh,
    pos: &P,
    v: usize,
    local: &LocalGeometry,
    mean: &dyn Fn(usize) -> f64,
    params: &EnergyParams,
) -> f64 {
    let (h, k, ao) = invariants(local);
    let lap = laplacian_local(mesh, pos, v, local.area, mean);
    params.el_operator(lap, h, k, ao)
}

pub fn el_residual(source: Source<'_>, params: &EnergyParams) -> Result<ResidualField> {
    el_residual_with(source, params, Execution::default())
}

pub fn el_residual_with(source: Source<'_>, params: &EnergyParams, exec: Execution) -> Result<ResidualField> {
    params.validate()?;
    match source {
        Source::Mesh(mesh) => {
            check_mesh(mesh)?;
            Ok(mesh_residual(mesh, mesh.vertices(), params, exec))
        }
        Source::Oracle { surface, grid } => oracle_residual(surface, grid, params, exec),
    }
}

pub(crate) fn mesh_residual(mesh: &TriangleMesh, pos: &[Vec3], params: &EnergyParams, exec: Execution) -> ResidualField {
    let locals = map_range(exec, mesh.n_vertices(), |v| vertex_local(mesh, pos, v));
    let mean: Vec<f64> = locals.iter().map(LocalGeometry::mean).collect();
    let mask = residual_mask(mesh);
    let value = map_range(exec, mesh.n_vertices(), |v| {
        if mask[v] {
            residual_at(mesh, pos, v, &locals[v], &|j| mean[j], params)
        } else {
            f64::NAN
        }
    });
    ResidualField::from_values(value, locals.iter().map(|l| l.area).collect(), mask)
}

fn oracle_residual(
    surface: &ParametricSurface,
    grid: &QuadratureGrid,
    params: &EnergyParams,
    exec: Execution,
) -> Result<ResidualField> {
    surface.validate()?;
    if !surface.has_mean_curvature_laplacian() {
        return Err(Error::Unsupported(format!("{} has no stored Laplacian of H", surface.name())));
    }
    let nodes = grid.nodes();
    let rows = map_slice(exec, &nodes, |&(u, v, w)| {
        let pos = surface.position(Jet::var_u(u, 3), Jet::var_v(v, 3));
        let g = geometry_from_jets(u, v, &pos, surface.mean_curvature_laplacian(u, v));
        (g.el_operator(params).unwrap_or(f64::NAN), w * g.area_density)
    });
    let (value, area): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let n = value.len();
    Ok(ResidualField::from_values(value, area, vec![true; n]))
}

/// Exact gradient of the polyhedral area.
pub fn area_gradient(mesh: &TriangleMesh) -> Vec<Vec3> {
    area_gradient_at(mesh, mesh.vertices())
}

pub(crate) fn area_gradient_at<P: Positions + ?Sized>(mesh: &TriangleMesh, pos: &P) -> Vec<Vec3> {
    let mut g = vec![Vec3::zeros(); mesh.n_vertices()];
    for f in mesh.faces() {
        let x = [pos.at(f[0]), pos.at(f[1]), pos.at(f[2])];
        let n = (x[1] - x[0]).cross(&(x[2] - x[0])).normalize();
        for c in 0..3 {
            g[f[c]] += 0.5 * n.cross(&(x[(c + 2) % 3] - x[(c + 1) % 3]));
        }
    }
    g
}

/// Exact gradient of the signed polyhedral volume.
pub fn volume_gradient(mesh: &TriangleMesh) -> Vec<Vec3> {
    let mut g = vec![Vec3::zeros(); mesh.n_vertices()];
    let x = mesh.vertices();
    for f in mesh.faces() {
        for c in 0..3 {
            g[f[c]] += x[f[(c + 1) % 3]].cross(&x[f[(c + 2) % 3]]) / 6.0;
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Normal curvature part `1/2 (dH + H|A°|² + 2c0K) A nu` plus the exact
    /// polyhedral area and volume gradients.
    Assembled,
    /// Extrapolated central differences of the discrete energy per coordinate.
    FiniteDifference,
}

fn check_defined(mesh: &TriangleMesh, params: &EnergyParams) -> Result<()> {
    params.validate()?;
    if !mesh.is_closed() && (params.l1 != 0.0 || params.l2 != 0.0) {
        return Err(Error::UndefinedFunctional(format!(
            "weights (l1, l2) = ({}, {}) on a mesh with boundary",
            params.l1, params.l2
        )));
    }
    check_mesh(mesh)
}

/// Central-difference step used by the finite-difference gradient.
pub fn fd_step(mesh: &TriangleMesh) -> f64 {
    1e-5 * mesh.bounding_box_diagonal()
}

/// Discrete Helfrich energy, the sum that `mesh_energies` reports.
pub fn discrete_energy(mesh: &TriangleMesh, params: &EnergyParams) -> Result<f64> {
    check_defined(mesh, params)?;
    Ok(energy_at(mesh, mesh.vertices(), params, Execution::default()))
}

/// Bending density of one fan, `1/4 H² A - c0/2 H A`.
#[inline]
fn bending(l: &LocalGeometry, c0: f64) -> f64 {
    let h = l.mean();
    (0.25 * h * h - 0.5 * c0 * h) * l.area
}

fn face_terms<P: Positions + ?Sized>(x: &P, f: &[usize; 3]) -> (f64, f64) {
    let (a, b, c) = (x.at(f[0]), x.at(f[1]), x.at(f[2]));
    (0.5 * (b - a).cross(&(c - a)).norm(), a.dot(&b.cross(&c)) / 6.0)
}

pub(crate) fn energy_at<P: Positions + ?Sized>(mesh: &TriangleMesh, pos: &P, params: &EnergyParams, exec: Execution) -> f64 {
    let bend = map_range(exec, mesh.n_vertices(), |v| {
        if mesh.is_boundary(v) {
            0.0
        } else {
            bending(&vertex_local(mesh, pos, v), params.c0)
        }
    });
    let (mut area, mut vol) = (0.0, 0.0);
    for f in mesh.faces() {
        let (a, v) = face_terms(pos, f);
        area += a;
        vol += v;
    }
    bend.iter().sum::<f64>() + (params.l1 + 0.25 * params.c0 * params.c0) * area + params.l2 * vol
}

/// Energy terms that change when vertex `p` moves.
fn local_energy<P: Positions + ?Sized>(mesh: &TriangleMesh, pos: &P, p: usize, params: &EnergyParams) -> f64 {
    let conn = mesh.connectivity();
    let mut e = 0.0;
    for &v in std::iter::once(&p).chain(conn.neighbors_of(p)) {
        if !mesh.is_boundary(v) {
            e += bending(&vertex_local(mesh, pos, v), params.c0);
        }
    }
    let w = params.l1 + 0.25 * params.c0 * params.c0;
    for &f in conn.faces_of(p) {
        let (a, v) = face_terms(pos, &mesh.faces()[f]);
        e += w * a + params.l2 * v;
    }
    e
}

pub fn energy_gradient(mesh: &TriangleMesh, params: &EnergyParams, method: GradientMethod) -> Result<Vec<Vec3>> {
    energy_gradient_with(mesh, params, method, Execution::default())
}

pub fn energy_gradient_with(
    mesh: &TriangleMesh,
    params: &EnergyParams,
    method: GradientMethod,
    exec: Execution,
) -> Result<Vec<Vec3>> {
    check_defined(mesh, params)?;
    Ok(match method {
        GradientMethod::Assembled => assembled_gradient(mesh, params, exec),
        GradientMethod::FiniteDifference => fd_gradient(mesh, params, fd_step(mesh), exec),
    })
}

fn assembled_gradient(mesh: &TriangleMesh, params: &EnergyParams, exec: Execution) -> Vec<Vec3> {
    let pos = mesh.vertices();
    let locals = map_range(exec, mesh.n_vertices(), |v| vertex_local(mesh, pos, v));
    let mean: Vec<f64> = locals.iter().map(LocalGeometry::mean).collect();
    let mask = residual_mask(mesh);
    let curvature_only = EnergyParams { c0: params.c0, l1: -0.25 * params.c0 * params.c0, l2: 0.0 };
    let mut g = map_range(exec, mesh.n_vertices(), |v| {
        if !mask[v] {
            return Vec3::zeros();
        }
        // W with the area and volume weights removed
        let w = residual_at(mesh, pos, v, &locals[v], &|j| mean[j], &curvature_only);
        0.5 * w * locals[v].area * locals[v].inward_normal()
    });
    let wa = params.l1 + 0.25 * params.c0 * params.c0;
    if wa != 0.0 {
        for (gi, ai) in g.iter_mut().zip(area_gradient(mesh)) {
            *gi += wa * ai;
        }
    }
    if params.l2 != 0.0 {
        for (gi, vi) in g.iter_mut().zip(volume_gradient(mesh)) {
            *gi += params.l2 * vi;
        }
    }
    g
}

/// Central differences at `h` and `h/2` combined by Richardson
/// extrapolation; the discrete bending energy is stiff enough that a single
/// central difference at `h` carries a visible `h²` error.
pub(crate) fn fd_gradient(mesh: &TriangleMesh, params: &EnergyParams, h: f64, exec: Execution) -> Vec<Vec3> {
    let base = mesh.vertices();
    map_range(exec, mesh.n_vertices(), |p| {
        let mut g = Vec3::zeros();
        for c in 0..3 {
            let d = |step: f64| {
                let mut e = Vec3::zeros();
                e[c] = step;
                let plus = local_energy(mesh, &Overlay { base, index: p, moved: base[p] + e }, p, params);
                let minus = local_energy(mesh, &Overlay { base, index: p, moved: base[p] - e }, p, params);
                (plus - minus) / (2.0 * step)
            };
            g[c] = richardson(d(h), d(0.5 * h));
        }
        g
    })
}

#[inline]
pub(crate) fn richardson(full: f64, half: f64) -> f64 {
    (4.0 * half - full) / 3.0
}

/// Random smooth vector field `a + B x + sum d_m sin(k_m . x + s_m)`, with
/// `B = I + perturbation` so that the field always has a dilation part.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothField {
    pub shift: Vec3,
    pub linear: Matrix3<f64>,
    pub waves: Vec<(Vec3, Vec3, f64)>,
}

impl SmoothField {
    pub fn random(rng: &mut impl Rng, center: Vec3, scale: f64) -> Self {
        let mut u = |s: f64| rng.random_range(-s..=s);
        let shift = Vec3::new(u(0.3), u(0.3), u(0.3)) * scale;
        let linear = Matrix3::identity() + Matrix3::from_fn(|_, _| u(0.5));
        let waves = (0..2)
            .map(|_| {
                let k = Vec3::new(u(2.0), u(2.0), u(2.0)) / scale;
                let d = Vec3::new(u(0.3), u(0.3), u(0.3)) * scale;
                (k, d, u(3.0))
            })
            .collect();
        let shift = shift - linear * center;
        SmoothField { shift, linear, waves }
    }

    pub fn eval(&self, x: &Vec3) -> Vec3 {
        let mut out = self.shift + self.linear * x;
        for (k, d, s) in &self.waves {
            out += d * (k.dot(x) + s).sin();
        }
        out
    }

    pub fn sample(&self, mesh: &TriangleMesh) -> Vec<Vec3> {
        mesh.vertices().iter().map(|x| self.eval(x)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionalRow {
    /// Richardson-extrapolated central difference of the whole-mesh energy.
    pub directional: f64,
    pub assembled: f64,
    pub fd_gradient: f64,
    pub rel_assembled: f64,
    pub rel_fd_gradient: f64,
    pub area_directional: f64,
    pub area_exact: f64,
    pub rel_area: f64,
    pub volume_directional: Option<f64>,
    pub volume_exact: Option<f64>,
    pub rel_volume: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheckReport {
    pub params: EnergyParams,
    pub n_vertices: usize,
    pub step: f64,
    pub seed: u64,
    pub rows: Vec<DirectionalRow>,
    pub max_rel_assembled: f64,
    pub max_rel_fd_gradient: f64,
    pub max_rel_area: f64,
    pub max_rel_volume: Option<f64>,
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / b.abs()
    }
}

fn dot(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Directional derivatives along `n_fields` seeded random smooth fields:
/// the assembled and finite-difference gradients against a whole-mesh
/// central difference, and the exact area and volume gradients against
/// central differences of area and volume.
pub fn gradient_check(mesh: &TriangleMesh, params: &EnergyParams, n_fields: usize, seed: u64) -> Result<GradientCheckReport> {
    gradient_check_with(mesh, params, n_fields, seed, Execution::default())
}

pub fn gradient_check_with(
    mesh: &TriangleMesh,
    params: &EnergyParams,
    n_fields: usize,
    seed: u64,
    exec: Execution,
) -> Result<GradientCheckReport> {
    check_defined(mesh, params)?;
    if n_fields == 0 {
        return Err(param("fields", "need at least one field"));
    }
    let assembled = assembled_gradient(mesh, params, exec);
    let step = fd_step(mesh);
    let fd = fd_gradient(mesh, params, step, exec);
    let ag = area_gradient(mesh);
    let vg = mesh.is_closed().then(|| volume_gradient(mesh));
    let n = mesh.n_vertices() as f64;
    let center = mesh.vertices().iter().sum::<Vec3>() / n;
    let scale = 0.5 * mesh.bounding_box_diagonal();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = mesh.vertices();
    let mut rows = Vec::with_capacity(n_fields);
    for _ in 0..n_fields {
        let field = SmoothField::random(&mut rng, center, scale);
        let d = field.sample(mesh);
        let dmax = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let t = step / dmax;
        let along = |t: f64| {
            let plus: Vec<Vec3> = x.iter().zip(&d).map(|(x, d)| x + d * t).collect();
            let minus: Vec<Vec3> = x.iter().zip(&d).map(|(x, d)| x - d * t).collect();
            let e = (energy_at(mesh, &plus, params, exec) - energy_at(mesh, &minus, params, exec)) / (2.0 * t);
            let (mut ap, mut am, mut vp, mut vm) = (0.0, 0.0, 0.0, 0.0);
            for f in mesh.faces() {
                let (a, v) = face_terms(&plus, f);
                ap += a;
                vp += v;
                let (a, v) = face_terms(&minus, f);
                am += a;
                vm += v;
            }
            [e, (ap - am) / (2.0 * t), (vp - vm) / (2.0 * t)]
        };
        let (full, half) = (along(t), along(0.5 * t));
        let [directional, area_directional, volume_fd] = [0, 1, 2].map(|k| richardson(full[k], half[k]));
        let area_exact = dot(&ag, &d);
        let (a_dot, f_dot) = (dot(&assembled, &d), dot(&fd, &d));
        let volume_directional = vg.as_ref().map(|_| volume_fd);
        let volume_exact = vg.as_ref().map(|g| dot(g, &d));
        rows.push(DirectionalRow {
            directional,
            assembled: a_dot,
            fd_gradient: f_dot,
            rel_assembled: rel(a_dot, directional),
            rel_fd_gradient: rel(f_dot, directional),
            area_directional,
            area_exact,
            rel_area: rel(area_exact, area_directional),
            volume_directional,
            volume_exact,
            rel_volume: volume_exact.zip(volume_directional).map(|(a, b)| rel(a, b)),
        });
    }
    let max = |f: &dyn Fn(&DirectionalRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(GradientCheckReport {
        params: *params,
        n_vertices: mesh.n_vertices(),
        step,
        seed,
        max_rel_assembled: max(&|r| r.rel_assembled),
        max_rel_fd_gradient: max(&|r| r.rel_fd_gradient),
        max_rel_area: max(&|r| r.rel_area),
        max_rel_volume: vg.as_ref().map(|_| max(&|r| r.rel_volume.unwrap_or(0.0))),
        rows,
    })
}
