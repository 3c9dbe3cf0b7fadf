use super::jet::{self, Jet, JetVec};
use super::{forms, geometry_from_jets, ParametricSurface, QuadratureGrid};
use crate::energy::EnergyParams;
use crate::error::{param, Error, Result};
use crate::exec::{map_slice, Execution};
use serde::{Deserialize, Serialize};

/// Scalar test function `phi` for normal variations `f + t phi nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestField {
    Constant { value: f64 },
    /// `sum c x^a y^b z^c` in ambient coordinates; smooth on every surface.
    Ambient { terms: Vec<(f64, [u32; 3])> },
    /// `sum a cos(m u + n v + phase)`; only for doubly periodic charts.
    Trig { terms: Vec<(f64, i32, i32, f64)> },
}

impl TestField {
    pub fn name(&self) -> String {
        match self {
            TestField::Constant { value } => format!("const({value})"),
            TestField::Ambient { terms } => {
                let parts: Vec<String> =
                    terms.iter().map(|(c, [a, b, e])| format!("{c}x^{a}y^{b}z^{e}")).collect();
                format!("ambient({})", parts.join("+"))
            }
            TestField::Trig { terms } => {
                let parts: Vec<String> =
                    terms.iter().map(|(a, m, n, p)| format!("{a}cos({m}u+{n}v+{p})")).collect();
                format!("trig({})", parts.join("+"))
            }
        }
    }

    fn check(&self, surface: &ParametricSurface) -> Result<()> {
        let finite = match self {
            TestField::Constant { value } => value.is_finite(),
            TestField::Ambient { terms } => terms.iter().all(|t| t.0.is_finite()),
            TestField::Trig { terms } => terms.iter().all(|t| t.0.is_finite() && t.3.is_finite()),
        };
        if !finite {
            return Err(param("field", "coefficients must be finite"));
        }
        if matches!(self, TestField::Trig { .. }) && surface.domain().periodic != [true, true] {
            return Err(param("field", format!("trig fields are not smooth on {}", surface.name())));
        }
        Ok(())
    }

    pub(crate) fn eval(&self, u: Jet, v: Jet, pos: &JetVec) -> Jet {
        let order = pos[0].order();
        match self {
            TestField::Constant { value } => Jet::constant(*value, order),
            TestField::Ambient { terms } => {
                let mut acc = Jet::constant(0.0, order);
                for (c, e) in terms {
                    let mut t = Jet::constant(*c, order);
                    for (k, &p) in e.iter().enumerate() {
                        for _ in 0..p {
                            t = t * pos[k];
                        }
                    }
                    acc += t;
                }
                acc
            }
            TestField::Trig { terms } => {
                let mut acc = Jet::constant(0.0, order);
                for &(a, m, n, p) in terms {
                    acc += (u * m as f64 + v * n as f64 + p).cos() * a;
                }
                acc.truncate(order)
            }
        }
    }

    /// Five fields per surface: constants, low-degree ambient polynomials,
    /// and on the torus trigonometric chart modes.
    pub fn standard_suite(surface: &ParametricSurface) -> Vec<TestField> {
        let mut out = vec![
            TestField::Constant { value: 1.0 },
            TestField::Ambient { terms: vec![(1.0, [1, 0, 0]), (0.5, [0, 0, 1])] },
            TestField::Ambient { terms: vec![(1.0, [0, 0, 2]), (-0.3, [1, 1, 0]), (0.2, [0, 0, 0])] },
        ];
        if surface.domain().periodic == [true, true] {
            out.push(TestField::Trig { terms: vec![(1.0, 1, 0, 0.0), (0.5, 0, 2, 0.3)] });
            out.push(TestField::Trig { terms: vec![(0.7, 2, 1, 0.0), (0.4, 1, 3, -1.1), (0.2, 0, 0, 0.0)] });
        } else {
            out.push(TestField::Ambient { terms: vec![(1.0, [1, 1, 1]), (0.4, [0, 1, 0])] });
            out.push(TestField::Ambient { terms: vec![(0.5, [3, 0, 0]), (-1.0, [0, 2, 1]), (0.1, [0, 0, 0])] });
        }
        out
    }
}

/// The five functionals whose first variations are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Area,
    MeanIntegral,
    Willmore,
    Volume,
    Helfrich,
}

impl Functional {
    pub const ALL: [Functional; 5] =
        [Functional::Area, Functional::MeanIntegral, Functional::Willmore, Functional::Volume, Functional::Helfrich];
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationRow {
    pub field: String,
    pub functional: Functional,
    /// Quadrature of the closed-form first variation.
    pub formula: f64,
    /// Central difference at `h`.
    pub fd: f64,
    /// Central difference at `h/2`.
    pub fd_half: f64,
    /// `(4 D(h/2) - D(h)) / 3`.
    pub richardson: f64,
    /// Normaliser: integral of the summed term magnitudes of the variation
    /// density, or 1 when it vanishes.
    pub scale: f64,
    pub rel_error_fd: f64,
    pub rel_error_fd_half: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationReport {
    pub surface: String,
    pub params: EnergyParams,
    pub step: f64,
    pub resolution: (usize, usize),
    pub rows: Vec<VariationRow>,
    pub max_rel_error: f64,
}

/// Values of all five functionals on `f + t phi nu`.
fn energies(
    surface: &ParametricSurface,
    nodes: &[(f64, f64, f64)],
    field: &TestField,
    params: &EnergyParams,
    t: f64,
    exec: Execution,
) -> Result<[f64; 5]> {
    let terms = map_slice(exec, nodes, |&(u, v, w)| {
        let (ju, jv) = (Jet::var_u(u, 3), Jet::var_v(v, 3));
        let pos = surface.position(ju, jv);
        let base = forms(&pos);
        let phi = field.eval(ju, jv, &pos).truncate(2);
        let moved = jet::add(&pos.map(|c| c.truncate(2)), &jet::scale(&base.normal, phi * t));
        let f = forms(&moved);
        let dmu = f.det.value().sqrt();
        let h = f.mean.value();
        let n_out = jet::values(&jet::cross(&f.fu, &f.fv));
        let vol = jet::values(&moved).dot(&n_out) / 3.0;
        let hel = 0.25 * (h - params.c0).powi(2) * dmu + params.l1 * dmu + params.l2 * vol;
        let out = [dmu, h * dmu, 0.25 * h * h * dmu, vol, hel];
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical { what: "perturbed energy density".into(), location: format!("chart point ({u}, {v}), t = {t}") });
        }
        Ok(out.map(|x| x * w))
    });
    let mut acc = [0.0; 5];
    for t in terms {
        let t = t?;
        for k in 0..5 {
            acc[k] += t[k];
        }
    }
    Ok(acc)
}

/// Closed-form first variations, and for each the integral of the summed
/// magnitudes of its density's terms, with the Willmore part written as
/// `dH + H|A|² - H³/2`. That normaliser stays meaningful when the terms
/// cancel exactly, as the Willmore variation does on a round sphere.
fn formulas(
    surface: &ParametricSurface,
    nodes: &[(f64, f64, f64)],
    field: &TestField,
    params: &EnergyParams,
    exec: Execution,
) -> Result<([f64; 5], [f64; 5])> {
    let terms = map_slice(exec, nodes, |&(u, v, w)| {
        let (ju, jv) = (Jet::var_u(u, 3), Jet::var_v(v, 3));
        let pos = surface.position(ju, jv);
        let lap = surface
            .mean_curvature_laplacian(u, v)
            .ok_or_else(|| Error::Unsupported(format!("{} has no stored Laplacian of H", surface.name())))?;
        let g = geometry_from_jets(u, v, &pos, Some(lap));
        let phi = field.eval(ju, jv, &pos).value();
        let (h, k) = (g.mean, g.gauss);
        let willmore = 0.5 * (lap + h * g.tracefree_sq);
        let el = g.el_operator(params).unwrap_or(f64::NAN);
        let dens = [-phi * h, -2.0 * phi * k, phi * willmore, -phi, 0.5 * phi * el];
        let bending = lap.abs() + h.abs() * g.second_form_sq() + 0.5 * h.abs().powi(3);
        let lower = 2.0 * (params.c0 * k).abs()
            + (2.0 * params.l1 + 0.5 * params.c0 * params.c0).abs() * h.abs()
            + 2.0 * params.l2.abs();
        let phi = phi.abs();
        let mags = [phi * h.abs(), 2.0 * phi * k.abs(), 0.5 * phi * bending, phi, 0.5 * phi * (bending + lower)];
        let wd = w * g.area_density;
        Ok::<_, Error>((dens.map(|d| d * wd), mags.map(|d| d * wd)))
    });
    let (mut val, mut abs) = ([0.0; 5], [0.0; 5]);
    for t in terms {
        let (a, b) = t?;
        for k in 0..5 {
            val[k] += a[k];
            abs[k] += b[k];
        }
    }
    Ok((val, abs))
}

/// Compares central differences of the five functionals along `phi nu`,
/// before and after Richardson extrapolation, with quadrature of the
/// first-variation formulas. Closed surfaces only: on open charts the
/// integrations by parts leave boundary terms.
pub fn variation_check(
    surface: &ParametricSurface,
    params: &EnergyParams,
    fields: &[TestField],
    step: f64,
    grid: &QuadratureGrid,
) -> Result<VariationReport> {
    surface.validate()?;
    params.validate()?;
    if !surface.is_closed() {
        return Err(Error::Unsupported(format!(
            "variation check on open surface {}: boundary terms do not vanish",
            surface.name()
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(param("step", format!("must be finite and > 0, got {step}")));
    }
    let exec = Execution::default();
    let nodes = grid.nodes();
    let mut rows = Vec::new();
    for field in fields {
        field.check(surface)?;
        let (formula, abs) = formulas(surface, &nodes, field, params, exec)?;
        let e = |t| energies(surface, &nodes, field, params, t, exec);
        let (p1, m1, p2, m2) = (e(step)?, e(-step)?, e(0.5 * step)?, e(-0.5 * step)?);
        for (k, functional) in Functional::ALL.into_iter().enumerate() {
            let fd = (p1[k] - m1[k]) / (2.0 * step);
            let fd_half = (p2[k] - m2[k]) / step;
            let richardson = (4.0 * fd_half - fd) / 3.0;
            let scale = if abs[k] > 0.0 { abs[k] } else { 1.0 };
            rows.push(VariationRow {
                field: field.name(),
                functional,
                formula: formula[k],
                fd,
                fd_half,
                richardson,
                scale,
                rel_error_fd: (fd - formula[k]).abs() / scale,
                rel_error_fd_half: (fd_half - formula[k]).abs() / scale,
                rel_error: (richardson - formula[k]).abs() / scale,
            });
        }
    }
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(VariationReport {
        surface: surface.name(),
        params: *params,
        step,
        resolution: grid.resolution(),
        rows,
        max_rel_error,
    })
}
