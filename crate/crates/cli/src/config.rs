//! JSON run configuration. Every block is optional; command-line flags
//! override whatever the file provides.

use std::path::{Path, PathBuf};

use helfrich_core::analytic::{ParametricSurface, TestField};
use helfrich_core::classify::FlowEndpoint;
use helfrich_core::energy::EnergyParams;
use helfrich_core::flow::FlowConfig;
use helfrich_core::mesh::PrimitiveSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub params: Option<EnergyParams>,
    pub mesh: Option<MeshSource>,
    pub surface: Option<ParametricSurface>,
    pub quadrature: Option<Quadrature>,
    pub flow: Option<FlowConfig>,
    pub scan: Option<ScanRange>,
    pub gradient_check: Option<GradientCheckConfig>,
    pub variation: Option<VariationConfig>,
    pub identity: Option<IdentityConfig>,
    pub cutoff: Option<CutoffConfig>,
    pub evidence: Option<EvidenceConfig>,
    /// Where mesh-make writes the mesh, or flow its final mesh.
    pub mesh_output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    Path(PathBuf),
    Primitive(PrimitiveSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadrature {
    pub nu: usize,
    pub nv: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRange {
    pub rho_min: f64,
    pub rho_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientCheckConfig {
    pub fields: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationConfig {
    pub step: Option<f64>,
    pub fields: Option<Vec<TestField>>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub n_random: Option<usize>,
    pub range: Option<f64>,
    pub points_per_axis: Option<usize>,
    pub surfaces: Option<Vec<ParametricSurface>>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceConfig {
    #[serde(default)]
    pub flow_endpoints: Vec<FlowEndpoint>,
    pub flat_patch_residual: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("config `{}`: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Range checks beyond what the types enforce.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.params {
            p.validate()?;
        }
        if let Some(MeshSource::Primitive(spec)) = &self.mesh {
            spec.validate()?;
        }
        if let Some(s) = &self.surface {
            s.validate()?;
        }
        if let Some(q) = &self.quadrature {
            if q.nu < 2 || q.nv < 2 {
                return Err(CliError::Usage("quadrature: nu and nv must be >= 2".into()));
            }
        }
        if let Some(f) = &self.flow {
            f.validate()?;
        }
        if let Some(s) = &self.scan {
            if !(s.rho_min > 0.0 && s.rho_max > s.rho_min && s.n >= 2) {
                return Err(CliError::Usage("scan: need 0 < rho_min < rho_max and n >= 2".into()));
            }
        }
        if let Some(c) = &self.cutoff {
            if !(c.radius.is_finite() && c.radius > 0.0) {
                return Err(CliError::Usage("cutoff: radius must be finite and > 0".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"{
            "output_dir": "out",
            "seed": 3,
            "params": {"c0": 0.0, "l1": 1.0, "l2": -1.0},
            "mesh": {"primitive": {"kind": "perturbed_sphere", "radius": 2.0, "amplitude": 0.05, "level": 3}},
            "surface": {"kind": "torus", "major": 2.0, "minor": 1.0},
            "quadrature": {"nu": 32, "nv": 32},
            "flow": {"mode": "residual_descent", "max_iters": 10},
            "scan": {"rho_min": 0.5, "rho_max": 4.0, "n": 100},
            "gradient_check": {"fields": 3},
            "variation": {"step": 0.01, "fields": [{"kind": "constant", "value": 1.0}]},
            "identity": {"n_random": 10},
            "cutoff": {"center": [0.0, 0.0, 0.0], "radius": 3.0},
            "evidence": {"flow_endpoints": [{"radius": 2.01, "rms": 0.0001, "converged": true}]}
        }"#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.flow.unwrap().max_iters, 10);
        let again = RunConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"sede": 3}"#,
            r#"{"params": {"l1": 1.0, "lambda2": 0.0}}"#,
            r#"{"scan": {"rho_min": 1.0, "rho_max": 2.0, "n": 3, "log": true}}"#,
            r#"{"mesh": {"primitive": {"kind": "icosphere", "radius": 1.0, "level": 2, "extra": 1}}}"#,
            r#"{"flow": {"max_iter": 3}}"#,
        ] {
            assert!(matches!(RunConfig::parse(text), Err(CliError::Usage(_))), "{text}");
        }
    }

    #[test]
    fn ranges_checked() {
        assert!(RunConfig::parse(r#"{"scan": {"rho_min": 2.0, "rho_max": 1.0, "n": 3}}"#).is_err());
        assert!(RunConfig::parse(r#"{"quadrature": {"nu": 1, "nv": 8}}"#).is_err());
        assert!(RunConfig::parse(r#"{"flow": {"backtrack": 1.5}}"#).is_err());
    }
}
