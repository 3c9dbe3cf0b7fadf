//! Descent engines on closed meshes and the sphere fit used to classify
//! their endpoints.
//!
//! Residual descent minimises `sum W² A` with Levenberg-Marquardt damped
//! Gauss-Newton steps over normal vertex displacements; the Jacobian is
//! assembled column by column from central differences that only touch
//! the two-ring of the moved vertex. Energy descent follows the normal
//! part of the finite-difference energy gradient, scaled by inverse vertex
//! area. Both use Armijo backtracking.

use crate::curvature::{check_mesh, vertex_local, LocalGeometry, Overlay};
use crate::energy::EnergyParams;
use crate::error::{param, Error, Result};
use crate::exec::{map_range, Execution};
use crate::mesh::{TriangleMesh, DEGENERATE_FACE_REL};
use crate::variation::{energy_at, fd_gradient, fd_step, mesh_residual, residual_at};
use crate::Vec3;
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    EnergyDescent,
    ResidualDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub mode: FlowMode,
    /// First trial step of each line search (energy descent: of the first
    /// one; later searches start from twice the last accepted step).
    pub initial_step: f64,
    /// Line-search shrink factor in `(0, 1)`.
    pub backtrack: f64,
    /// Armijo constant in `(0, 1)`.
    pub armijo: f64,
    pub max_iters: usize,
    /// Stop when `sqrt(sum |g_i|² / A_i)` falls below this.
    pub gradient_tol: f64,
    /// Stop when the largest vertex move is below this fraction of the
    /// bounding-box diagonal.
    pub step_tol: f64,
    /// Initial Levenberg-Marquardt damping (residual descent).
    pub damping: f64,
    /// Energy descent preconditioner: the normal gradient is mapped through
    /// `(M + s·a·L)⁻¹`, with `M` the vertex areas, `a` their mean and `L` the
    /// graph Laplacian. Zero gives the plain area-weighted gradient.
    pub smoothing: f64,
    /// Trace every `log_every` iterations; the first and last are always kept.
    pub log_every: usize,
}

impl FlowConfig {
    pub fn new(mode: FlowMode) -> Self {
        match mode {
            FlowMode::ResidualDescent => FlowConfig {
                mode,
                initial_step: 1.0,
                backtrack: 0.5,
                armijo: 1e-4,
                max_iters: 60,
                gradient_tol: 1e-6,
                step_tol: 1e-12,
                damping: 1e-3,
                smoothing: 0.0,
                log_every: 1,
            },
            FlowMode::EnergyDescent => FlowConfig {
                mode,
                initial_step: 1e-4,
                backtrack: 0.5,
                armijo: 1e-4,
                max_iters: 400,
                gradient_tol: 1e-6,
                step_tol: 1e-13,
                damping: 0.0,
                smoothing: SMOOTHING,
                log_every: 10,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(param("initial_step", "must be finite and > 0"));
        }
        if !open01(self.backtrack) {
            return Err(param("backtrack", "must lie in (0, 1)"));
        }
        if !open01(self.armijo) {
            return Err(param("armijo", "must lie in (0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(param("max_iters", "must be >= 1"));
        }
        if !(self.gradient_tol.is_finite() && self.gradient_tol >= 0.0) {
            return Err(param("gradient_tol", "must be finite and >= 0"));
        }
        if !(self.step_tol.is_finite() && self.step_tol >= 0.0) {
            return Err(param("step_tol", "must be finite and >= 0"));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(param("damping", "must be finite and >= 0"));
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(param("smoothing", "must be finite and >= 0"));
        }
        if self.log_every == 0 {
            return Err(param("log_every", "must be >= 1"));
        }
        Ok(())
    }
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig::new(FlowMode::ResidualDescent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereFit {
    pub center: Vec3,
    pub radius: f64,
    /// Root-mean-square radial deviation.
    pub rms: f64,
}

/// Algebraic least-squares sphere refined by at most ten geometric
/// Gauss-Newton steps.
pub fn best_fit_sphere(mesh: &TriangleMesh) -> Result<SphereFit> {
    fit_points(mesh.vertices())
}

pub fn fit_points(points: &[Vec3]) -> Result<SphereFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let mut cov = nalgebra::Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo <= 1e-12 * hi {
        return Err(Error::Fit("points are coplanar: plane candidate".into()));
    }
    // |x|² = 2 c.x + d, in centred coordinates
    let mut m = Matrix4::zeros();
    let mut rhs = Vector4::zeros();
    for p in points {
        let d = p - mean;
        let row = Vector4::new(2.0 * d.x, 2.0 * d.y, 2.0 * d.z, 1.0);
        m += row * row.transpose();
        rhs += row * d.norm_squared();
    }
    let sol = m.cholesky().ok_or_else(|| Error::Fit("singular algebraic fit".into()))?.solve(&rhs);
    let mut c = Vec3::new(sol[0], sol[1], sol[2]);
    let mut r = (sol[3] + c.norm_squared()).sqrt();
    for _ in 0..10 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for p in points {
            let d = p - mean - c;
            let dist = d.norm();
            let u = d / dist;
            let row = Vector4::new(-u.x, -u.y, -u.z, -1.0);
            jtj += row * row.transpose();
            jtr += row * (dist - r);
        }
        let Some(ch) = jtj.cholesky() else { break };
        let step = ch.solve(&(-jtr));
        c += Vec3::new(step[0], step[1], step[2]);
        r += step[3];
        if step.norm() <= 1e-15 * r {
            break;
        }
    }
    let center = c + mean;
    let rms = (points.iter().map(|p| ((p - center).norm() - r).powi(2)).sum::<f64>() / n).sqrt();
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Fit(format!("non-finite radius {r}")));
    }
    Ok(SphereFit { center, radius: r, rms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxIters,
    DegenerateMesh,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// `1/4 int (H - c0)² + l1 area + l2 volume`.
    pub energy: f64,
    /// The minimised quantity: the energy, or `sum W² A`.
    pub objective: f64,
    pub residual_l2: f64,
    pub residual_linf: f64,
    pub gradient_norm: f64,
    /// Line-search parameter of the step taken from this state (0 if none).
    pub step: f64,
    pub accepted: bool,
    /// Armijo right-hand side the accepted step satisfied.
    pub armijo_bound: f64,
    pub area: f64,
    pub volume: f64,
    pub fit: Option<SphereFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub config: FlowConfig,
    pub params: EnergyParams,
    pub rows: Vec<TraceRow>,
    pub verdict: Verdict,
    pub iterations: usize,
    pub final_fit: Option<SphereFit>,
    #[serde(skip)]
    pub final_mesh: TriangleMesh,
}

impl FlowTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least one row")
    }
}

fn min_face_ok(mesh: &TriangleMesh, pos: &[Vec3], reference: &[Vec3]) -> bool {
    let diag = mesh.bounding_box_diagonal();
    let threshold = DEGENERATE_FACE_REL * diag * diag;
    mesh.faces().iter().zip(reference).all(|(&[a, b, c], n0)| {
        let n = (pos[b] - pos[a]).cross(&(pos[c] - pos[a]));
        0.5 * n.norm() > threshold && n.dot(n0) > 0.0
    })
}

fn face_normals(mesh: &TriangleMesh) -> Vec<Vec3> {
    (0..mesh.n_faces()).map(|f| mesh.face_normal2(f)).collect()
}

struct State {
    mesh: TriangleMesh,
    locals: Vec<LocalGeometry>,
    energy: f64,
}

impl State {
    fn new(mesh: TriangleMesh, params: &EnergyParams, exec: Execution) -> Self {
        let locals = map_range(exec, mesh.n_vertices(), |v| vertex_local(&mesh, mesh.vertices(), v));
        let energy = energy_at(&mesh, mesh.vertices(), params, exec);
        State { mesh, locals, energy }
    }

    fn row(&self, iteration: usize, objective: f64, gradient_norm: f64, params: &EnergyParams, exec: Execution) -> TraceRow {
        let r = mesh_residual(&self.mesh, self.mesh.vertices(), params, exec);
        TraceRow {
            iteration,
            energy: self.energy,
            objective,
            residual_l2: r.l2,
            residual_linf: r.linf,
            gradient_norm,
            step: 0.0,
            accepted: false,
            armijo_bound: f64::NAN,
            area: self.mesh.area(),
            volume: self.mesh.signed_volume().unwrap_or(f64::NAN),
            fit: best_fit_sphere(&self.mesh).ok(),
        }
    }
}

/// Residual vector `W_j sqrt(A_j)` and its Jacobian with respect to normal
/// displacements, as per-row sparse entries.
fn residual_jacobian(
    mesh: &TriangleMesh,
    locals: &[LocalGeometry],
    params: &EnergyParams,
    exec: Execution,
) -> (Vec<f64>, Vec<Vec<(usize, f64)>>) {
    let base = mesh.vertices();
    let conn = mesh.connectivity();
    let n = mesh.n_vertices();
    let mean: Vec<f64> = locals.iter().map(LocalGeometry::mean).collect();
    let r: Vec<f64> = map_range(exec, n, |j| {
        residual_at(mesh, base, j, &locals[j], &|k| mean[k], params) * locals[j].area.sqrt()
    });
    let h = fd_step(mesh);
    let columns = map_range(exec, n, |p| {
        let mut fans: Vec<usize> = vec![p];
        fans.extend_from_slice(conn.neighbors_of(p));
        let mut targets = fans.clone();
        for &f in &fans[1..] {
            targets.extend_from_slice(conn.neighbors_of(f));
        }
        targets.sort_unstable();
        targets.dedup();
        let nu = locals[p].inward_normal();
        let eval = |t: f64| -> Vec<f64> {
            let pos = Overlay { base, index: p, moved: base[p] + nu * t };
            let moved: Vec<LocalGeometry> = fans.iter().map(|&v| vertex_local(mesh, &pos, v)).collect();
            let lookup = |v: usize| fans.iter().position(|&f| f == v).map(|i| &moved[i]).unwrap_or(&locals[v]);
            let m = |v: usize| lookup(v).mean();
            targets
                .iter()
                .map(|&j| {
                    let l = lookup(j);
                    residual_at(mesh, &pos, j, l, &m, params) * l.area.sqrt()
                })
                .collect()
        };
        let (plus, minus) = (eval(h), eval(-h));
        targets.iter().enumerate().map(|(i, &j)| (j, (plus[i] - minus[i]) / (2.0 * h))).collect::<Vec<_>>()
    });
    let mut rows = vec![Vec::new(); n];
    for (p, col) in columns.into_iter().enumerate() {
        for (j, v) in col {
            rows[j].push((p, v));
        }
    }
    (r, rows)
}

fn displaced(base: &[Vec3], locals: &[LocalGeometry], delta: &DVector<f64>, t: f64) -> Vec<Vec3> {
    base.iter().zip(locals).zip(delta.iter()).map(|((x, l), d)| x + l.inward_normal() * (d * t)).collect()
}

fn check_flow_input(mesh: &TriangleMesh, params: &EnergyParams, config: &FlowConfig) -> Result<()> {
    config.validate()?;
    params.validate()?;
    if !mesh.is_closed() {
        return Err(Error::Unsupported("flow needs a closed mesh".into()));
    }
    check_mesh(mesh)
}

/// Runs the configured descent from `mesh`.
pub fn flow_run(mesh: &TriangleMesh, params: &EnergyParams, config: &FlowConfig) -> Result<FlowTrace> {
    flow_run_with(mesh, params, config, Execution::default())
}

pub fn flow_run_with(mesh: &TriangleMesh, params: &EnergyParams, config: &FlowConfig, exec: Execution) -> Result<FlowTrace> {
    check_flow_input(mesh, params, config)?;
    match config.mode {
        FlowMode::ResidualDescent => residual_descent(mesh, params, config, exec),
        FlowMode::EnergyDescent => energy_descent(mesh, params, config, exec),
    }
}

fn non_finite(iteration: usize, what: &str) -> Error {
    Error::Numerical { what: format!("non-finite {what}"), location: format!("flow iteration {iteration}") }
}

fn should_log(config: &FlowConfig, it: usize) -> bool {
    it % config.log_every == 0
}

fn residual_descent(mesh: &TriangleMesh, params: &EnergyParams, config: &FlowConfig, exec: Execution) -> Result<FlowTrace> {
    let normals0 = face_normals(mesh);
    let mut state = State::new(mesh.clone(), params, exec);
    let mut mu = config.damping;
    let mut rows = Vec::new();
    let mut verdict = Verdict::MaxIters;
    let mut it = 0;
    loop {
        let (r, jrows) = residual_jacobian(&state.mesh, &state.locals, params, exec);
        let objective: f64 = r.iter().map(|x| x * x).sum();
        if !objective.is_finite() {
            return Err(non_finite(it, "residual objective"));
        }
        let n = r.len();
        let mut jtj = DMatrix::<f64>::zeros(n, n);
        let mut jtr = DVector::<f64>::zeros(n);
        for (j, row) in jrows.iter().enumerate() {
            for &(p, a) in row {
                jtr[p] += a * r[j];
                for &(q, b) in row {
                    jtj[(p, q)] += a * b;
                }
            }
        }
        let gradient_norm =
            (0..n).map(|p| (2.0 * jtr[p]).powi(2) / state.locals[p].area).sum::<f64>().sqrt();
        let log = |it| state.row(it, objective, gradient_norm, params, exec);
        if gradient_norm <= config.gradient_tol {
            verdict = Verdict::Converged;
            rows.push(log(it));
            break;
        }
        if it >= config.max_iters {
            rows.push(log(it));
            break;
        }
        let scale = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        let mut accepted = None;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += mu * (jtj[(i, i)] + 1e-12 * scale);
            }
            let Some(ch) = a.cholesky() else {
                mu = (mu * 10.0).max(1e-12);
                continue;
            };
            let delta = ch.solve(&(-&jtr));
            let slope = 2.0 * jtr.dot(&delta);
            let mut t = config.initial_step;
            while t >= 1e-4 * config.initial_step {
                let pos = displaced(state.mesh.vertices(), &state.locals, &delta, t);
                let bound = objective + config.armijo * t * slope;
                if min_face_ok(&state.mesh, &pos, &normals0) {
                    let trial = mesh_residual(&state.mesh, &pos, params, exec);
                    let value = trial.l2 * trial.l2;
                    if value.is_finite() && value <= bound {
                        let max_move = delta.iter().map(|d| (d * t).abs()).fold(0.0, f64::max);
                        accepted = Some((pos, t, bound, max_move));
                        break;
                    }
                }
                t *= config.backtrack;
            }
            if accepted.is_some() {
                mu = (mu / 3.0).max(1e-15);
                break;
            }
            mu = (mu * 10.0).max(1e-12);
        }
        let Some((pos, t, bound, max_move)) = accepted else {
            // no damping level yields decrease: stationary to working precision
            verdict = Verdict::Converged;
            rows.push(log(it));
            break;
        };
        if should_log(config, it) {
            rows.push(TraceRow { step: t, accepted: true, armijo_bound: bound, ..log(it) });
        }
        let diag = state.mesh.bounding_box_diagonal();
        state = State::new(state.mesh.with_positions(pos)?, params, exec);
        it += 1;
        if let Some(v) = terminal(&state, max_move, diag, config) {
            verdict = v;
            let r = mesh_residual(&state.mesh, state.mesh.vertices(), params, exec);
            rows.push(state.row(it, r.l2 * r.l2, f64::NAN, params, exec));
            break;
        }
    }
    finish(state, rows, verdict, it, params, config)
}

fn energy_descent(mesh: &TriangleMesh, params: &EnergyParams, config: &FlowConfig, exec: Execution) -> Result<FlowTrace> {
    let normals0 = face_normals(mesh);
    let mut state = State::new(mesh.clone(), params, exec);
    let mut rows = Vec::new();
    let mut verdict = Verdict::MaxIters;
    let mut step = config.initial_step;
    let mut it = 0;
    loop {
        let objective = state.energy;
        if !objective.is_finite() {
            return Err(non_finite(it, "energy"));
        }
        let g = fd_gradient(&state.mesh, params, fd_step(&state.mesh), exec);
        // normal component of the gradient, as a density
        let gn: Vec<f64> = g.iter().zip(&state.locals).map(|(g, l)| g.dot(&l.inward_normal())).collect();
        let u = precondition(&state, &gn, config.smoothing);
        let velocity: Vec<Vec3> = u.iter().zip(&state.locals).map(|(u, l)| -l.inward_normal() * *u).collect();
        let slope: f64 = -gn.iter().zip(&u).map(|(g, u)| g * u).sum::<f64>();
        let gradient_norm = gn.iter().zip(&state.locals).map(|(g, l)| g * g / l.area).sum::<f64>().sqrt();
        let log = |it| state.row(it, objective, gradient_norm, params, exec);
        if gradient_norm <= config.gradient_tol {
            verdict = Verdict::Converged;
            rows.push(log(it));
            break;
        }
        if it >= config.max_iters {
            rows.push(log(it));
            break;
        }
        let base = state.mesh.vertices();
        let mut t = step;
        let mut accepted = None;
        while t >= 1e-12 * config.initial_step {
            let pos: Vec<Vec3> = base.iter().zip(&velocity).map(|(x, v)| x + v * t).collect();
            let bound = objective + config.armijo * t * slope;
            if min_face_ok(&state.mesh, &pos, &normals0) {
                let value = energy_at(&state.mesh, &pos, params, exec);
                if value.is_finite() && value <= bound && value < objective {
                    let max_move = velocity.iter().map(|v| v.norm() * t).fold(0.0, f64::max);
                    accepted = Some((pos, t, bound, max_move));
                    break;
                }
            }
            t *= config.backtrack;
        }
        let Some((pos, t, bound, max_move)) = accepted else {
            verdict = Verdict::Converged;
            rows.push(log(it));
            break;
        };
        step = 2.0 * t;
        if should_log(config, it) {
            rows.push(TraceRow { step: t, accepted: true, armijo_bound: bound, ..log(it) });
        }
        let diag = state.mesh.bounding_box_diagonal();
        state = State::new(state.mesh.with_positions(pos)?, params, exec);
        it += 1;
        if let Some(v) = terminal(&state, max_move, diag, config) {
            verdict = v;
            rows.push(state.row(it, state.energy, f64::NAN, params, exec));
            break;
        }
    }
    finish(state, rows, verdict, it, params, config)
}

const SMOOTHING: f64 = 20.0;

/// Solves `(M + s·a·L) u = g` by Jacobi-preconditioned conjugate gradients.
fn precondition(state: &State, g: &[f64], smoothing: f64) -> Vec<f64> {
    let area: Vec<f64> = state.locals.iter().map(|l| l.area).collect();
    if smoothing == 0.0 {
        return g.iter().zip(&area).map(|(g, a)| g / a).collect();
    }
    let conn = state.mesh.connectivity();
    let tau = smoothing * area.iter().sum::<f64>() / area.len() as f64;
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let ring = conn.neighbors_of(i);
                area[i] * x[i] + tau * ring.iter().map(|&j| x[i] - x[j]).sum::<f64>()
            })
            .collect()
    };
    let diag: Vec<f64> = (0..g.len()).map(|i| area[i] + tau * conn.neighbors_of(i).len() as f64).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
    let mut x: Vec<f64> = g.iter().zip(&diag).map(|(g, d)| g / d).collect();
    let ax = apply(&x);
    let mut r: Vec<f64> = g.iter().zip(&ax).map(|(g, a)| g - a).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let target = 1e-24 * dot(g, g);
    for _ in 0..4 * g.len() {
        if dot(&r, &r) <= target {
            break;
        }
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let next = dot(&r, &z);
        let beta = next / rz;
        rz = next;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

fn terminal(state: &State, max_move: f64, diag: f64, config: &FlowConfig) -> Option<Verdict> {
    if check_mesh(&state.mesh).is_err() {
        Some(Verdict::DegenerateMesh)
    } else if max_move <= config.step_tol * diag {
        Some(Verdict::Converged)
    } else {
        None
    }
}

fn finish(
    state: State,
    rows: Vec<TraceRow>,
    verdict: Verdict,
    iterations: usize,
    params: &EnergyParams,
    config: &FlowConfig,
) -> Result<FlowTrace> {
    Ok(FlowTrace {
        config: *config,
        params: *params,
        verdict,
        iterations,
        final_fit: best_fit_sphere(&state.mesh).ok(),
        rows,
        final_mesh: state.mesh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_primitive, PrimitiveSpec};

    fn bumpy(radius: f64, level: u32) -> TriangleMesh {
        make_primitive(&PrimitiveSpec::PerturbedSphere { radius, amplitude: 0.05, level, profile: Default::default() })
            .unwrap()
    }

    #[test]
    fn fit_exact_sphere() {
        let m = make_primitive(&PrimitiveSpec::Icosphere { radius: 2.0, level: 4 }).unwrap();
        let shifted = m.transformed(None, 1.0, Vec3::new(1.0, -2.0, 0.5));
        let f = best_fit_sphere(&shifted).unwrap();
        assert!((f.radius - 2.0).abs() < 1e-3 && f.rms < 1e-3);
        assert!((f.center - Vec3::new(1.0, -2.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn fit_rejects_plane() {
        let m = make_primitive(&PrimitiveSpec::FlatPatch { width: 1.0, height: 1.0, nx: 4, ny: 4 }).unwrap();
        assert!(matches!(best_fit_sphere(&m), Err(Error::Fit(_))));
    }

    #[test]
    fn fit_bumpy_sphere() {
        let f = best_fit_sphere(&bumpy(1.0, 3)).unwrap();
        assert!((f.radius - 1.0).abs() < 0.05);
        assert!(f.rms > 1e-3 && f.rms < 0.1);
    }

    #[test]
    fn config_ranges() {
        let mut c = FlowConfig::default();
        c.backtrack = 1.0;
        assert!(c.validate().is_err());
        c = FlowConfig::default();
        c.armijo = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn open_mesh_rejected() {
        let m = make_primitive(&PrimitiveSpec::FlatPatch { width: 1.0, height: 1.0, nx: 4, ny: 4 }).unwrap();
        let err = flow_run(&m, &EnergyParams::default(), &FlowConfig::default());
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    fn assert_sound(trace: &FlowTrace) {
        for w in trace.rows.windows(2) {
            assert!(w[0].iteration < w[1].iteration);
        }
        for r in trace.rows.iter().filter(|r| r.accepted) {
            assert!(r.armijo_bound < r.objective);
        }
    }

    #[test]
    fn residual_descent_finds_critical_sphere() {
        let trace = flow_run(&bumpy(2.0, 3), &EnergyParams::willmore(1.0, -1.0), &FlowConfig::default()).unwrap();
        assert_sound(&trace);
        for w in trace.rows.windows(2) {
            assert!(w[1].objective <= w[0].objective);
        }
        let fit = trace.final_fit.unwrap();
        assert_eq!(trace.verdict, Verdict::Converged);
        assert!((fit.radius - 2.0).abs() <= 0.02 * 2.0);
        assert!(fit.rms <= 1e-3 * 2.0);
    }

    #[test]
    fn shrinking_sphere_never_converges() {
        let m = make_primitive(&PrimitiveSpec::Icosphere { radius: 1.0, level: 2 }).unwrap();
        let mut c = FlowConfig::new(FlowMode::EnergyDescent);
        c.max_iters = 100;
        c.log_every = 1;
        let trace = flow_run(&m, &EnergyParams::willmore(1.0, 0.0), &c).unwrap();
        assert_sound(&trace);
        assert_ne!(trace.verdict, Verdict::Converged);
        for w in trace.rows.windows(2) {
            assert!(w[1].area < w[0].area);
        }
    }

    #[test]
    fn willmore_descent_rounds_a_bumpy_sphere() {
        let m = bumpy(1.0, 3);
        let mut c = FlowConfig::new(FlowMode::EnergyDescent);
        c.max_iters = 150;
        c.log_every = 1;
        let trace = flow_run(&m, &EnergyParams::default(), &c).unwrap();
        assert_sound(&trace);
        for w in trace.rows.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        let four_pi = 4.0 * std::f64::consts::PI;
        assert!((trace.last().energy / four_pi - 1.0).abs() < 1e-2);
        let fit = trace.final_fit.unwrap();
        assert!(fit.rms < 1e-2 * fit.radius, "rms {}", fit.rms);
        assert!(fit.rms < 0.25 * trace.rows[0].fit.unwrap().rms);
    }
}
