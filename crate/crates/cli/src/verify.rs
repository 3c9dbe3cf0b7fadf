//! Acceptance suite. Each criterion returns named checks with pinned
//! bounds; a criterion passes when all of its checks do. Wall time is
//! reported next to the budget but does not decide the outcome.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use helfrich_core::analytic::{
    estimate_report, identity_check, variation_check, Cutoff, Functional, ParametricSurface, QuadratureGrid, TestField,
};
use helfrich_core::classify::radius_scan;
use helfrich_core::energy::{evaluate_energies, EnergyParams, Source};
use helfrich_core::flow::{flow_run, FlowConfig, FlowMode};
use helfrich_core::mesh::{make_primitive, PrimitiveSpec, TriangleMesh};
use helfrich_core::variation::{el_residual, gradient_check};
use helfrich_core::Vec3;
use serde::Serialize;

use crate::commands::{benchmark_surfaces, measured_flat_patch_residual, NOT_REPRODUCED};

pub const CRITERIA: [(u32, &str, f64); 9] = [
    (1, "Willmore normalization", 10.0),
    (2, "Catenoid gap threshold", 1.0),
    (3, "Critical sphere", 30.0),
    (4, "Non-existence branches", 5.0),
    (5, "First-variation suite", 60.0),
    (6, "Gradient checks", 300.0),
    (7, "Flow reproduction of the sphere branch", 600.0),
    (8, "Identity suite", 5.0),
    (9, "Estimate integrand table", 5.0),
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable bound, e.g. `<= 1e-10`.
    pub bound: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub budget_seconds: f64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub criterion: u32,
    pub check: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub id: u32,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl Outcome {
    pub fn ledger_line(&self, elapsed: Duration) -> String {
        let secs = elapsed.as_secs_f64();
        let budget = if secs <= self.budget_seconds { "" } else { " OVER BUDGET" };
        let worst = self
            .checks
            .iter()
            .find(|c| !c.passed)
            .map(|c| format!(" first failing: {} = {:.3e} (needs {})", c.name, c.value, c.bound))
            .unwrap_or_default();
        format!(
            "{} [{}] {} ({} checks, {:.2} s of {} s{}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.checks.len(),
            secs,
            self.budget_seconds,
            budget,
            worst
        )
    }

    pub fn check_rows(&self) -> Vec<CheckRow> {
        self.checks
            .iter()
            .map(|c| CheckRow {
                criterion: self.id,
                check: c.name.clone(),
                value: c.value,
                bound: c.bound.clone(),
                passed: c.passed,
            })
            .collect()
    }
}

struct Checks {
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { checks: Vec::new(), notes: Vec::new() }
    }

    fn push(&mut self, name: impl Into<String>, value: f64, bound: String, passed: bool) {
        self.checks.push(Check { name: name.into(), value, bound, passed: passed && !value.is_nan() });
    }

    fn le(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name, value, format!("<= {bound:e}"), value <= bound);
    }

    fn lt(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name, value, format!("< {bound:e}"), value < bound);
    }

    fn ge(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name, value, format!(">= {bound:e}"), value >= bound);
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool) {
        self.push(name, if ok { 1.0 } else { 0.0 }, "true".into(), ok);
    }

    /// Records an error as a failed check instead of aborting the suite.
    fn attempt<T>(&mut self, name: &str, r: helfrich_core::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(format!("{name}: {e}"), f64::NAN, "no error".into(), false);
                None
            }
        }
    }
}

pub fn run_criterion(id: u32) -> (Outcome, Duration) {
    let &(_, title, budget) = CRITERIA.iter().find(|c| c.0 == id).expect("known criterion");
    let start = Instant::now();
    let mut c = Checks::new();
    match id {
        1 => willmore_normalization(&mut c),
        2 => catenoid_gap(&mut c),
        3 => critical_sphere(&mut c),
        4 => non_existence(&mut c),
        5 => first_variation(&mut c),
        6 => gradient_checks(&mut c),
        7 => flow_reproduction(&mut c),
        8 => identities(&mut c),
        9 => estimate_table(&mut c),
        _ => unreachable!(),
    }
    let elapsed = start.elapsed();
    let passed = !c.checks.is_empty() && c.checks.iter().all(|k| k.passed);
    (Outcome { id, title, passed, budget_seconds: budget, checks: c.checks, notes: c.notes }, elapsed)
}

fn grid(s: &ParametricSurface, n: usize) -> helfrich_core::Result<QuadratureGrid> {
    QuadratureGrid::new(s, n, n)
}

fn primitive(spec: PrimitiveSpec) -> helfrich_core::Result<TriangleMesh> {
    make_primitive(&spec)
}

fn icosphere(radius: f64, level: u32) -> helfrich_core::Result<TriangleMesh> {
    primitive(PrimitiveSpec::Icosphere { radius, level })
}

fn bumpy(radius: f64, level: u32) -> helfrich_core::Result<TriangleMesh> {
    primitive(PrimitiveSpec::PerturbedSphere { radius, amplitude: 0.05, level, profile: Default::default() })
}

fn willmore_of(source: Source<'_>) -> helfrich_core::Result<f64> {
    Ok(evaluate_energies(source, &EnergyParams::default())?.willmore)
}

fn willmore_normalization(c: &mut Checks) {
    for rho in [0.5, 1.0, 2.0, 7.0] {
        let s = ParametricSurface::Sphere { radius: rho };
        let w = grid(&s, 64).and_then(|g| willmore_of(Source::Oracle { surface: &s, grid: &g }));
        if let Some(w) = c.attempt("oracle sphere", w) {
            c.le(format!("oracle sphere rho={rho}: |W/4pi - 1|"), (w / (4.0 * PI) - 1.0).abs(), 1e-10);
        }
    }
    let mut errors = Vec::new();
    for level in 2..=5 {
        let w = icosphere(1.0, level).and_then(|m| willmore_of(Source::Mesh(&m)));
        if let Some(w) = c.attempt("icosphere", w) {
            errors.push((level, (w / (4.0 * PI) - 1.0).abs()));
        }
    }
    for &(level, e) in &errors {
        if level == 4 {
            c.le("icosphere level 4: |W/4pi - 1|", e, 1e-2);
        } else {
            c.push(format!("icosphere level {level}: |W/4pi - 1|"), e, "reported".into(), true);
        }
    }
    c.holds("icosphere error decreasing over levels 2..5", errors.len() == 4 && errors.windows(2).all(|w| w[1].1 < w[0].1));
}

fn catenoid_gap(c: &mut Checks) {
    let neck = 1.5;
    let mut gaps = Vec::new();
    for t in [0.5, 1.0, 2.0, 3.0, 5.0, 8.0] {
        let s = ParametricSurface::Catenoid { neck, half_height: t * neck };
        let gap = grid(&s, 64).and_then(|g| evaluate_energies(Source::Oracle { surface: &s, grid: &g }, &EnergyParams::default()));
        if let Some(r) = c.attempt("catenoid", gap) {
            if [1.0, 2.0, 5.0].contains(&t) {
                c.le(format!("T/c={t}: |gap - 8pi tanh(T/c)|"), (r.gap - 8.0 * PI * t.tanh()).abs(), 1e-8);
            }
            gaps.push(r.gap);
        }
    }
    c.holds("gap increasing in T", gaps.len() == 6 && gaps.windows(2).all(|w| w[1] > w[0]));
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    c.le("max gap / 8pi", max / (8.0 * PI), 1.0);
}

fn critical_sphere(c: &mut Checks) {
    for (l1, l2, lo, hi) in [(1.0, -1.0, 0.5, 4.0), (2.0, -0.5, 1.0, 20.0), (0.3, -3.0, 0.05, 1.0)] {
        let params = EnergyParams::willmore(l1, l2);
        if let Some(scan) = c.attempt("scan", radius_scan(&params, lo, hi, 100)) {
            let expected = -2.0 * l1 / l2;
            c.holds(format!("({l1},{l2}): exactly one root"), scan.roots.len() == 1);
            if let Some(&root) = scan.roots.first() {
                c.le(format!("({l1},{l2}): |root - (-2 l1/l2)| / root"), (root - expected).abs() / expected, 1e-12);
            }
        }
    }
    let params = EnergyParams::willmore(1.0, -1.0);
    let l2 = |level| icosphere(2.0, level).and_then(|m| el_residual(Source::Mesh(&m), &params)).map(|r| r.l2);
    let r4 = c.attempt("level 4 residual", l2(4));
    let r5 = c.attempt("level 5 residual", l2(5));
    if let (Some(r4), Some(r5)) = (r4, r5) {
        c.le("icosphere rho=2 level 4: residual L2", r4, 0.05);
        c.lt("icosphere rho=2 level 5: residual L2", r5, r4);
    }
}

fn non_existence(c: &mut Checks) {
    let params = EnergyParams::willmore(1.0, 0.5);
    if let Some(scan) = c.attempt("scan", radius_scan(&params, 0.1, 50.0, 1000)) {
        c.ge("(1,0.5): min |sphere residual| on [0.1,50]", scan.min_abs_residual, 0.98 * 2.0 * 0.5);
        c.holds("(1,0.5): no root", scan.roots.is_empty());
    }
    if let Some(flat) = c.attempt_cli("flat patch", measured_flat_patch_residual(&params)) {
        c.le("(1,0.5): |flat patch residual + 2 l2|", (flat + 2.0 * 0.5).abs(), 1e-10);
    }
    for l2 in [0.3, -0.3, 2.0] {
        let params = EnergyParams::willmore(0.0, l2);
        let bound = 2.0 * l2.abs() * (1.0 - 1e-12);
        if let Some(scan) = c.attempt("scan", radius_scan(&params, 0.1, 50.0, 1000)) {
            c.ge(format!("(0,{l2}): min |sphere residual|"), scan.min_abs_residual, bound);
        }
        if let Some(flat) = c.attempt_cli("flat patch", measured_flat_patch_residual(&params)) {
            c.ge(format!("(0,{l2}): |flat patch residual|"), flat.abs(), bound);
        }
    }
}

impl Checks {
    fn attempt_cli<T>(&mut self, name: &str, r: Result<T, crate::CliError>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(format!("{name}: {e}"), f64::NAN, "no error".into(), false);
                None
            }
        }
    }
}

fn first_variation(c: &mut Checks) {
    let params = EnergyParams { c0: 0.7, l1: 1.0, l2: -1.0 };
    for s in [ParametricSurface::Sphere { radius: 1.0 }, ParametricSurface::Torus { major: 2.0, minor: 1.0 }] {
        let fields = TestField::standard_suite(&s);
        let report = grid(&s, 48).and_then(|g| variation_check(&s, &params, &fields, 1e-2, &g));
        let Some(r) = c.attempt("variation_check", report) else { continue };
        let name = s.name();
        c.holds(format!("{name}: 5 fields"), fields.len() == 5);
        for f in Functional::ALL {
            let worst = r.rows.iter().filter(|x| x.functional == f).map(|x| x.rel_error).fold(0.0, f64::max);
            let n = r.rows.iter().filter(|x| x.functional == f).count();
            c.holds(format!("{name} {f:?}: {n} rows"), n == 5);
            c.le(format!("{name} {f:?}: max rel error"), worst, 1e-6);
        }
    }
}

fn gradient_checks(c: &mut Checks) {
    let params = EnergyParams::willmore(1.0, -1.0);
    let mut assembled = Vec::new();
    for level in [4, 5] {
        let report = bumpy(1.0, level).and_then(|m| gradient_check(&m, &params, 5, 7));
        let Some(r) = c.attempt("gradient_check", report) else { continue };
        c.le(format!("level {level}: area gradient rel"), r.max_rel_area, 1e-8);
        c.le(format!("level {level}: volume gradient rel"), r.max_rel_volume.unwrap_or(f64::NAN), 1e-8);
        if level == 4 {
            c.le("level 4: assembled vs FD directional rel", r.max_rel_assembled, 5e-2);
        }
        assembled.push(r.max_rel_assembled);
    }
    if let [a4, a5] = assembled[..] {
        c.lt("level 5 assembled rel below level 4", a5, a4);
    }
    c.notes.push("mesh: perturbed sphere rho=1, amplitude 0.05; params (1,-1); 5 seeded random smooth fields".into());
}

fn flow_reproduction(c: &mut Checks) {
    let Some(mesh) = c.attempt("mesh", bumpy(2.0, 3)) else { return };
    let residual = FlowConfig::new(FlowMode::ResidualDescent);
    if let Some(t) = c.attempt("residual descent", flow_run(&mesh, &EnergyParams::willmore(1.0, -1.0), &residual)) {
        match t.final_fit {
            Some(fit) => {
                c.le("residual descent: |R - 2| / 2", (fit.radius - 2.0).abs() / 2.0, 0.02);
                c.le("residual descent: rms sphericity", fit.rms, 1e-3 * 2.0);
            }
            None => c.holds("residual descent: endpoint sphere fit", false),
        }
        c.le("residual descent: iterations", t.iterations as f64, residual.max_iters as f64);
        c.notes.push(format!("residual descent verdict {:?} after {} iterations", t.verdict, t.iterations));
    }
    let energy = FlowConfig { log_every: 1, ..FlowConfig::new(FlowMode::EnergyDescent) };
    if let Some(t) = c.attempt("energy descent", flow_run(&mesh, &EnergyParams::default(), &energy)) {
        c.le("energy descent (0,0): |W/4pi - 1|", (t.last().energy / (4.0 * PI) - 1.0).abs(), 1e-2);
        c.holds("energy descent: W non-increasing", t.rows.windows(2).all(|w| w[1].energy <= w[0].energy));
        c.notes.push(format!(
            "energy descent: W/4pi {:.6} -> {:.6}, verdict {:?}, final rms {:?}",
            t.rows[0].energy / (4.0 * PI),
            t.last().energy / (4.0 * PI),
            t.verdict,
            t.final_fit.map(|f| f.rms)
        ));
    }
}

fn identities(c: &mut Checks) {
    if let Some(r) = c.attempt("identity_check", identity_check(1000, 5.0, 7, &benchmark_surfaces(), 9)) {
        c.holds("1000 random pairs plus chart samples", r.samples.len() >= 1000);
        c.le("cubic identity", r.max_cubic, 1e-12);
        c.le("K = H²/4 - |A°|²/2", r.max_gauss_relation, 1e-12);
        c.le("|A°|² = H²/2 - 2K", r.max_tracefree, 1e-12);
        c.le("contracted Codazzi (chart samples)", r.max_codazzi, 1e-12);
    }
    let mut meshes = Vec::new();
    for level in 0..=5 {
        meshes.push((format!("icosphere level {level}"), PrimitiveSpec::Icosphere { radius: 1.0, level }));
    }
    for (radius, level) in [(1.0, 2), (1.0, 3), (1.0, 4), (1.0, 5), (2.0, 3)] {
        meshes.push((
            format!("perturbed sphere rho={radius} level {level}"),
            PrimitiveSpec::PerturbedSphere { radius, amplitude: 0.05, level, profile: Default::default() },
        ));
    }
    for (name, spec) in meshes {
        if let Some(m) = c.attempt("mesh", primitive(spec)) {
            let err = (m.total_angle_defect() - 2.0 * PI * m.euler_characteristic() as f64).abs();
            c.le(format!("Gauss-Bonnet {name}"), err, 1e-9);
        }
    }
}

fn estimate_table(c: &mut Checks) {
    let params = EnergyParams::willmore(1.0, -1.0);
    let s = ParametricSurface::Sphere { radius: 2.0 };
    let report = Cutoff::new(Vec3::zeros(), 10.0).and_then(|cut| grid(&s, 64).and_then(|g| estimate_report(&s, &params, &cut, &g)));
    if let Some(r) = c.attempt("estimate_report", report) {
        c.le("critical sphere: |int W² gamma^4|", r.residual_sq_gamma4.map_or(f64::NAN, f64::abs), 1e-10);
    }
    c.notes.push(NOT_REPRODUCED.into());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_check_fails_outcome() {
        let mut c = Checks::new();
        c.le("a", 1.0, 2.0);
        c.le("b", f64::NAN, 2.0);
        assert!(c.checks[0].passed);
        assert!(!c.checks[1].passed);
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [2, 4, 8, 9] {
            let (o, _) = run_criterion(id);
            assert!(o.passed, "{o:?}");
        }
    }
}
