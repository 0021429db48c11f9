//! Run configuration: JSON schema, built-in presets and validation.

use std::path::{Path, PathBuf};

use geomilne::decomposition::BoundaryDatum;
use geomilne::discretization::EtaGrading;
use geomilne::expansion::ExpansionConfig;
use geomilne::geometry::ConvexBoundary;
use geomilne::milne::{MeanInterpolation, MilneContext, MilneGridSpec};
use geomilne::norms::LimitStudyConfig;
use geomilne::transport2d::{TransportConfig, TransportGrids, TransportMethod};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub domain: DomainConfig,
    /// In-flow datum `g = mean + sin_phi sin(phi) + cos_tau cos(tau) + cos_2phi cos(2 phi)`.
    pub datum: DatumConfig,
    pub epsilons: Vec<f64>,
    pub grids: GridConfig,
    pub decomposition: DecompositionConfig,
    pub tolerances: ToleranceConfig,
    pub solver: SolverConfig,
    pub m: u32,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub cosine_coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    pub mean: f64,
    pub sin_phi: f64,
    pub cos_tau: f64,
    pub cos_2phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_eta: usize,
    pub n_phi: usize,
    pub n_ordinates: usize,
    pub mesh_resolution: usize,
    pub clustering: Switch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    pub alpha: f64,
    pub enabled: bool,
    pub n_tau: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub milne: f64,
    pub transport: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub anderson: bool,
    pub interpolation: MeanInterpolation,
    pub transport_method: TransportMethod,
    pub geometric_correction: bool,
}

pub const PRESETS: [&str; 4] = ["unit-disk", "ellipse", "limit-study", "verify"];

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let mut cfg = Self {
            preset: name.to_string(),
            domain: DomainConfig {
                cosine_coefficients: vec![1.0],
            },
            datum: DatumConfig {
                mean: 1.0,
                sin_phi: 0.5,
                cos_tau: 0.0,
                cos_2phi: 0.0,
            },
            epsilons: vec![0.1],
            grids: GridConfig {
                n_eta: 129,
                n_phi: 128,
                n_ordinates: 32,
                mesh_resolution: 8,
                clustering: Switch::On,
            },
            decomposition: DecompositionConfig {
                alpha: 0.5,
                enabled: true,
                n_tau: 32,
            },
            tolerances: ToleranceConfig {
                milne: 1e-10,
                transport: 1e-9,
                max_iter: 2000,
            },
            solver: SolverConfig {
                anderson: true,
                interpolation: MeanInterpolation::Linear,
                transport_method: TransportMethod::Auto,
                geometric_correction: true,
            },
            m: 6,
            k0: 0.1,
            output_dir: PathBuf::from("out"),
        };
        match name {
            "unit-disk" | "verify" => {}
            "ellipse" => {
                cfg.domain.cosine_coefficients = vec![1.0, 0.1];
                cfg.datum.cos_tau = 0.2;
                cfg.grids.mesh_resolution = 6;
            }
            "limit-study" => cfg.epsilons = vec![0.2, 0.1, 0.05],
            other => {
                return Err(CliError::Config {
                    key: "preset".into(),
                    message: format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")),
                })
            }
        }
        Ok(cfg)
    }

    /// Parses a config file; errors name the offending key path.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            key: String::new(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config {
                key: if path == "." { String::new() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, message: String| {
            Err(CliError::Config {
                key: key.into(),
                message,
            })
        };
        if self.epsilons.is_empty() {
            return bad("epsilons", "at least one value is required".into());
        }
        for (k, &e) in self.epsilons.iter().enumerate() {
            if !(e > 0.0 && e <= 0.5) {
                return bad(&format!("epsilons[{k}]"), format!("{e} is outside (0, 0.5]"));
            }
        }
        let a = self.decomposition.alpha;
        if !(a > 0.0 && a < 1.0) {
            return bad("decomposition.alpha", format!("{a} is outside (0, 1)"));
        }
        if self.m < 2 {
            return bad("m", format!("{} is below 2", self.m));
        }
        if !(self.k0 > 0.0) {
            return bad("K0", format!("{} must be positive", self.k0));
        }
        if !(self.tolerances.milne > 0.0) || !(self.tolerances.transport > 0.0) {
            return bad("tolerances", "tolerances must be positive".into());
        }
        if !self.grids.n_phi.is_multiple_of(4) || self.grids.n_phi < 8 {
            return bad("grids.n_phi", format!("{} is not a multiple of 4 (>= 8)", self.grids.n_phi));
        }
        if self.grids.n_eta < 4 {
            return bad("grids.n_eta", format!("{} is below 4", self.grids.n_eta));
        }
        if !self.grids.n_ordinates.is_multiple_of(2) || self.grids.n_ordinates < 4 {
            return bad("grids.n_ordinates", format!("{} is not even (>= 4)", self.grids.n_ordinates));
        }
        if self.grids.mesh_resolution < 2 {
            return bad("grids.mesh_resolution", format!("{} is below 2", self.grids.mesh_resolution));
        }
        if self.decomposition.n_tau < 8 {
            return bad("decomposition.n_tau", format!("{} is below 8", self.decomposition.n_tau));
        }
        self.boundary().map_err(|e| CliError::Config {
            key: "domain.cosine_coefficients".into(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    pub fn boundary(&self) -> geomilne::Result<ConvexBoundary> {
        ConvexBoundary::new(self.domain.cosine_coefficients.clone())
    }

    pub fn datum(&self) -> BoundaryDatum {
        let d = self.datum;
        BoundaryDatum::new(move |tau, phi| {
            d.mean + d.sin_phi * phi.sin() + d.cos_tau * tau.cos() + d.cos_2phi * (2.0 * phi).cos()
        })
    }

    pub fn milne_grids(&self) -> MilneGridSpec {
        MilneGridSpec {
            n_eta: self.grids.n_eta,
            n_phi: self.grids.n_phi,
            grading: EtaGrading::Geometric,
            clustering: self.grids.clustering == Switch::On,
        }
    }

    pub fn milne_context(&self, epsilon: f64) -> MilneContext {
        let mut ctx = MilneContext::new(epsilon, self.milne_grids());
        ctx.interpolation = self.solver.interpolation;
        ctx.geometric_correction = self.solver.geometric_correction;
        ctx.solver.iteration.tol = self.tolerances.milne;
        ctx.solver.iteration.max_iter = self.tolerances.max_iter;
        ctx.solver.iteration.window = if self.solver.anderson { 3 } else { 0 };
        ctx
    }

    pub fn expansion(&self) -> ExpansionConfig {
        ExpansionConfig {
            alpha: self.decomposition.alpha,
            n_tau: self.decomposition.n_tau,
            decomposition: self.decomposition.enabled,
        }
    }

    pub fn transport(&self) -> TransportConfig {
        TransportConfig {
            tol: self.tolerances.transport,
            max_iter: self.tolerances.max_iter,
            method: self.solver.transport_method,
            anderson_window: if self.solver.anderson { 5 } else { 0 },
            ..Default::default()
        }
    }

    pub fn transport_grids(&self, epsilon: f64) -> geomilne::Result<TransportGrids> {
        TransportGrids::new(&self.boundary()?, epsilon, self.grids.mesh_resolution, self.grids.n_ordinates)
    }

    pub fn limit_study(&self) -> geomilne::Result<LimitStudyConfig> {
        let mut cfg = LimitStudyConfig::disk_default(self.datum());
        cfg.boundary = self.boundary()?;
        cfg.epsilons = self.epsilons.clone();
        cfg.resolution = self.grids.mesh_resolution;
        cfg.n_ordinates = self.grids.n_ordinates;
        cfg.milne = self.milne_grids();
        cfg.interpolation = self.solver.interpolation;
        cfg.expansion = self.expansion();
        cfg.transport = self.transport();
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn missing_key_is_named() {
        let mut v = serde_json::to_value(RunConfig::preset("unit-disk").unwrap()).unwrap();
        v["decomposition"].as_object_mut().unwrap().remove("alpha");
        match RunConfig::parse(&v.to_string()) {
            Err(CliError::Config { key, message }) => {
                assert_eq!(key, "decomposition");
                assert!(message.contains("alpha"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ranges_are_checked() {
        let mut cfg = RunConfig::preset("unit-disk").unwrap();
        cfg.epsilons = vec![0.1, 0.7];
        assert!(matches!(cfg.validate(), Err(CliError::Config { key, .. }) if key == "epsilons[1]"));
        let mut cfg = RunConfig::preset("unit-disk").unwrap();
        cfg.decomposition.alpha = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::preset("unit-disk").unwrap();
        cfg.m = 1;
        assert!(cfg.validate().is_err());
        assert!(RunConfig::preset("nope").is_err());
    }
}
