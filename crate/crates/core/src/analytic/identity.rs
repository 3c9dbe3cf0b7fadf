use super::jet::Jet;
use super::{forms, ParametricSurface};
use crate::error::Result;
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Residuals of the pointwise curvature identities at one sample.
#[derive(Debug, Clone, Serialize)]
pub struct IdentitySample {
    pub label: String,
    pub mean: f64,
    pub gauss: f64,
    /// `max_ij |H (A g^-1 A)_ij - |A|² A_ij - 2K A°_ij|`.
    pub cubic: f64,
    /// `|K - (H²/4 - |A°|²/2)|`.
    pub gauss_relation: f64,
    /// `|  |A°|² - (H²/2 - 2K)  |`, with `|A°|²` contracted from the tensor.
    pub tracefree: f64,
    /// `max_j |d_j H - 2 div(A°)_j|`; chart samples only.
    pub codazzi: Option<f64>,
}

impl IdentitySample {
    pub fn max_error(&self) -> f64 {
        [self.cubic, self.gauss_relation, self.tracefree, self.codazzi.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub samples: Vec<IdentitySample>,
    pub max_cubic: f64,
    pub max_gauss_relation: f64,
    pub max_tracefree: f64,
    pub max_codazzi: f64,
}

impl IdentityReport {
    pub fn max_error(&self) -> f64 {
        self.samples.iter().map(IdentitySample::max_error).fold(0.0, f64::max)
    }
}

fn algebraic(label: String, g: Matrix2<f64>, a: Matrix2<f64>) -> IdentitySample {
    let gi = g.try_inverse().expect("metric is positive definite");
    let s = gi * a;
    let h = s.trace();
    let k = s.determinant();
    let ao = a - g * (0.5 * h);
    let a_sq = (s * s).trace();
    let ao_sq = (gi * ao * gi * ao).trace();
    let lhs = a * gi * a * h - a * a_sq;
    let rhs = ao * (2.0 * k);
    IdentitySample {
        label,
        mean: h,
        gauss: k,
        cubic: (lhs - rhs).abs().max(),
        gauss_relation: (k - (0.25 * h * h - 0.5 * ao_sq)).abs(),
        tracefree: (ao_sq - (0.5 * h * h - 2.0 * k)).abs(),
        codazzi: None,
    }
}

/// Diagonal shape operator with principal curvatures `(k1, k2)`.
pub fn principal_sample(k1: f64, k2: f64) -> IdentitySample {
    algebraic(format!("principal({k1},{k2})"), Matrix2::identity(), Matrix2::new(k1, 0.0, 0.0, k2))
}

/// Chart sample: the algebraic identities in covariant form, plus the
/// contracted Codazzi equation `dH = 2 div A°` with Christoffel symbols
/// from the metric jets.
pub fn chart_sample(surface: &ParametricSurface, u: f64, v: f64) -> Result<IdentitySample> {
    surface.check_point(u, v)?;
    let pos = surface.position(Jet::var_u(u, 3), Jet::var_v(v, 3));
    let f = forms(&pos);
    let m = |a: &Jet, b: &Jet, c: &Jet| Matrix2::new(a.value(), b.value(), b.value(), c.value());
    let g = m(&f.g11, &f.g12, &f.g22);
    let a = m(&f.a11, &f.a12, &f.a22);
    let mut out = algebraic(format!("{}@({u},{v})", surface.name()), g, a);

    let gi = g.try_inverse().expect("immersion");
    // d_k g_ij and d_k A°_ij, k = 0 (u), 1 (v)
    let gj = [[f.g11, f.g12], [f.g12, f.g22]];
    let aj = [[f.a11, f.a12], [f.a12, f.a22]];
    let hj = f.mean;
    let dg = |i: usize, j: usize, k: usize| if k == 0 { gj[i][j].d(1, 0) } else { gj[i][j].d(0, 1) };
    let dh = |k: usize| if k == 0 { hj.d(1, 0) } else { hj.d(0, 1) };
    let ao = |i: usize, j: usize| aj[i][j].value() - 0.5 * hj.value() * gj[i][j].value();
    let dao = |i: usize, j: usize, k: usize| {
        let (da, dgk) = if k == 0 { (aj[i][j].d(1, 0), gj[i][j].d(1, 0)) } else { (aj[i][j].d(0, 1), gj[i][j].d(0, 1)) };
        da - 0.5 * (dh(k) * gj[i][j].value() + hj.value() * dgk)
    };
    // Gamma^m_ik
    let gamma = |mm: usize, i: usize, k: usize| {
        (0..2).map(|l| 0.5 * gi[(mm, l)] * (dg(l, i, k) + dg(l, k, i) - dg(i, k, l))).sum::<f64>()
    };
    let mut codazzi: f64 = 0.0;
    for j in 0..2 {
        let mut div = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                let mut cov = dao(k, j, i);
                for mm in 0..2 {
                    cov -= gamma(mm, i, k) * ao(mm, j) + gamma(mm, i, j) * ao(k, mm);
                }
                div += gi[(i, k)] * cov;
            }
        }
        codazzi = codazzi.max((dh(j) - 2.0 * div).abs());
    }
    out.codazzi = Some(codazzi);
    Ok(out)
}

/// Evenly spread interior chart points.
pub fn chart_points(surface: &ParametricSurface, n: usize) -> Vec<(f64, f64)> {
    let d = surface.domain();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let t = (j as f64 + 0.37) / n as f64;
            out.push((d.u.0 + s * (d.u.1 - d.u.0), d.v.0 + t * (d.v.1 - d.v.0)));
        }
    }
    out
}

/// Random principal pairs in `[-range, range]²` from a seeded stream,
/// plus the umbilic and flat corner cases, plus chart samples on the given
/// surfaces.
pub fn identity_check(
    n_random: usize,
    range: f64,
    seed: u64,
    surfaces: &[ParametricSurface],
    points_per_axis: usize,
) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![principal_sample(3.0, 1.0), principal_sample(2.0, 2.0), principal_sample(0.0, 0.0)];
    for _ in 0..n_random {
        let k1 = rng.random_range(-range..=range);
        let k2 = rng.random_range(-range..=range);
        samples.push(principal_sample(k1, k2));
    }
    for s in surfaces {
        s.validate()?;
        for (u, v) in chart_points(s, points_per_axis) {
            samples.push(chart_sample(s, u, v)?);
        }
    }
    let max = |f: fn(&IdentitySample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    Ok(IdentityReport {
        max_cubic: max(|s| s.cubic),
        max_gauss_relation: max(|s| s.gauss_relation),
        max_tracefree: max(|s| s.tracefree),
        max_codazzi: max(|s| s.codazzi.unwrap_or(0.0)),
        samples,
    })
}
