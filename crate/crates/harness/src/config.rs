//! Experiment configuration files.
//!
//! A config holds a model, a seed and either one experiment (`kind` and
//! `params` at the top level) or a list under `experiments`. Every threshold
//! an experiment asserts is a named field of its params struct.

use std::path::{Path, PathBuf};

use mfgmaster_core::model::ModelSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::measures::MeasureSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown experiment kind `{0}`")]
    UnknownKind(String),
    #[error("invalid params for `{kind}`: {source}")]
    Params {
        kind: String,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OracleConvergence,
    Duality,
    MfgSolve,
    Monotonicity,
    Lipschitz,
    RemainderOrder,
    MasterResidual,
    Neumann,
    FlowConsistency,
    HolderTime,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        Self::OracleConvergence,
        Self::Duality,
        Self::MfgSolve,
        Self::Monotonicity,
        Self::Lipschitz,
        Self::RemainderOrder,
        Self::MasterResidual,
        Self::Neumann,
        Self::FlowConsistency,
        Self::HolderTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::OracleConvergence => "oracle-convergence",
            Self::Duality => "duality",
            Self::MfgSolve => "mfg-solve",
            Self::Monotonicity => "monotonicity",
            Self::Lipschitz => "lipschitz",
            Self::RemainderOrder => "remainder-order",
            Self::MasterResidual => "master-residual",
            Self::Neumann => "neumann",
            Self::FlowConsistency => "flow-consistency",
            Self::HolderTime => "holder-time",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| ConfigError::UnknownKind(name.to_string()))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid sizes `(n_x, n_t)`.
pub type Rung = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub ladder: Vec<Rung>,
    pub t_end: f64,
    pub diffusion: f64,
    pub mode: usize,
    pub amplitude: f64,
    pub min_space_order: f64,
    pub min_time_order: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            ladder: vec![(51, 100), (101, 400), (201, 1600)],
            t_end: 0.1,
            diffusion: 1.0,
            mode: 1,
            amplitude: 0.5,
            min_space_order: 1.9,
            min_time_order: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualityParams {
    pub n_x: usize,
    pub n_t: usize,
    pub tuples: usize,
    pub drift_amplitude: f64,
    pub max_defect: f64,
}

impl Default for DualityParams {
    fn default() -> Self {
        Self {
            n_x: 41,
            n_t: 41,
            tuples: 50,
            drift_amplitude: 0.5,
            max_defect: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfgSolveParams {
    pub m0: MeasureSpec,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Also start from the frozen path `m(t) = m0` and compare endpoints.
    pub compare_initializations: bool,
    pub max_init_difference: f64,
    pub max_mass_drift: f64,
    pub min_density: f64,
}

impl Default for MfgSolveParams {
    fn default() -> Self {
        Self {
            m0: MeasureSpec::default(),
            damping: 0.5,
            tol: 1e-8,
            max_iter: 60,
            compare_initializations: true,
            max_init_difference: 1e-6,
            max_mass_drift: 1e-12,
            min_density: -1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonotonicityParams {
    pub pairs: usize,
    pub tol: f64,
    /// Slack on `lhs <= rhs` is `slack_factor * (dx^2 + dt)`.
    pub slack_factor: f64,
    pub min_bregman: f64,
    pub max_mass_drift: f64,
    pub min_density: f64,
}

impl Default for MonotonicityParams {
    fn default() -> Self {
        Self {
            pairs: 10,
            tol: 1e-10,
            slack_factor: 1e-3,
            min_bregman: -1e-10,
            max_mass_drift: 1e-12,
            min_density: -1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzParams {
    pub pairs: usize,
    pub t0: f64,
    /// Fixed first measure of every pair.
    pub base: MeasureSpec,
    /// Perturbation bumps are centered uniformly in this interval.
    pub bump_centers: (f64, f64),
    pub bump_width: f64,
    pub min_d1: f64,
    pub max_d1: f64,
    pub tol: f64,
    pub max_spread: f64,
}

impl Default for LipschitzParams {
    fn default() -> Self {
        Self {
            pairs: 10,
            t0: 0.0,
            base: MeasureSpec::Gaussian {
                center: 0.75,
                width: 0.1,
                floor: 0.2,
            },
            bump_centers: (0.05, 0.35),
            bump_width: 0.08,
            min_d1: 1e-3,
            max_d1: 1e-1,
            tol: 1e-12,
            max_spread: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemainderParams {
    pub t0: f64,
    pub m0: MeasureSpec,
    pub m1: MeasureSpec,
    pub s_ladder: Vec<f64>,
    pub tol: f64,
    pub linearized_tol: f64,
    pub min_slope: f64,
    pub max_slope: f64,
}

impl Default for RemainderParams {
    fn default() -> Self {
        Self {
            t0: 0.0,
            m0: MeasureSpec::default(),
            m1: MeasureSpec::Gaussian {
                center: 0.7,
                width: 0.1,
                floor: 0.0,
            },
            s_ladder: vec![0.2, 0.1, 0.05, 0.025],
            tol: 1e-12,
            linearized_tol: 1e-11,
            min_slope: 1.8,
            max_slope: 2.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterResidualParams {
    pub ladder: Vec<Rung>,
    pub t0: f64,
    pub m0: MeasureSpec,
    pub tol: f64,
    pub linearized_tol: f64,
    pub min_order: f64,
    /// Applied to the boundary residuals of the finest rung.
    pub max_boundary: f64,
}

impl Default for MasterResidualParams {
    fn default() -> Self {
        Self {
            ladder: vec![(21, 41), (41, 81), (81, 161)],
            t0: 0.0,
            m0: MeasureSpec::default(),
            tol: 1e-12,
            linearized_tol: 1e-11,
            min_order: 1.0,
            max_boundary: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeumannParams {
    pub t0: f64,
    pub m0: MeasureSpec,
    pub tol: f64,
    pub linearized_tol: f64,
    pub max_boundary: f64,
    /// Interior nodes for the point-dipole cross-check; empty picks quartiles.
    pub dipole_nodes: Vec<usize>,
    pub max_dipole_error: f64,
    /// Random zero-mean perturbations checked against the kernel pairing.
    pub representation_samples: usize,
    /// Representation error bound as a multiple of `linearized_tol`.
    pub representation_factor: f64,
}

impl Default for NeumannParams {
    fn default() -> Self {
        Self {
            t0: 0.0,
            m0: MeasureSpec::default(),
            tol: 1e-12,
            linearized_tol: 1e-11,
            max_boundary: 1e-8,
            dipole_nodes: Vec::new(),
            max_dipole_error: 1e-8,
            representation_samples: 5,
            representation_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub t0: f64,
    pub m0: MeasureSpec,
    pub tol: f64,
    pub interior_times: usize,
    /// Error bound as a multiple of `tol`.
    pub tolerance_factor: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            t0: 0.0,
            m0: MeasureSpec::default(),
            tol: 1e-12,
            interior_times: 5,
            tolerance_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderTimeParams {
    pub ladder: Vec<Rung>,
    pub m0: MeasureSpec,
    pub tol: f64,
    /// Largest allowed ratio between the biggest and smallest quotient over the ladder.
    pub max_factor: f64,
}

impl Default for HolderTimeParams {
    fn default() -> Self {
        Self {
            ladder: vec![(51, 101), (101, 201)],
            m0: MeasureSpec::default(),
            tol: 1e-10,
            max_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ExperimentParams {
    OracleConvergence(OracleParams),
    Duality(DualityParams),
    MfgSolve(MfgSolveParams),
    Monotonicity(MonotonicityParams),
    Lipschitz(LipschitzParams),
    RemainderOrder(RemainderParams),
    MasterResidual(MasterResidualParams),
    Neumann(NeumannParams),
    FlowConsistency(FlowParams),
    HolderTime(HolderTimeParams),
}

impl ExperimentParams {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::OracleConvergence(_) => ExperimentKind::OracleConvergence,
            Self::Duality(_) => ExperimentKind::Duality,
            Self::MfgSolve(_) => ExperimentKind::MfgSolve,
            Self::Monotonicity(_) => ExperimentKind::Monotonicity,
            Self::Lipschitz(_) => ExperimentKind::Lipschitz,
            Self::RemainderOrder(_) => ExperimentKind::RemainderOrder,
            Self::MasterResidual(_) => ExperimentKind::MasterResidual,
            Self::Neumann(_) => ExperimentKind::Neumann,
            Self::FlowConsistency(_) => ExperimentKind::FlowConsistency,
            Self::HolderTime(_) => ExperimentKind::HolderTime,
        }
    }

    pub fn defaults(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::OracleConvergence => Self::OracleConvergence(Default::default()),
            ExperimentKind::Duality => Self::Duality(Default::default()),
            ExperimentKind::MfgSolve => Self::MfgSolve(Default::default()),
            ExperimentKind::Monotonicity => Self::Monotonicity(Default::default()),
            ExperimentKind::Lipschitz => Self::Lipschitz(Default::default()),
            ExperimentKind::RemainderOrder => Self::RemainderOrder(Default::default()),
            ExperimentKind::MasterResidual => Self::MasterResidual(Default::default()),
            ExperimentKind::Neumann => Self::Neumann(Default::default()),
            ExperimentKind::FlowConsistency => Self::FlowConsistency(Default::default()),
            ExperimentKind::HolderTime => Self::HolderTime(Default::default()),
        }
    }

    fn from_value(kind: ExperimentKind, params: Value) -> Result<Self, ConfigError> {
        let wrap = |source| ConfigError::Params {
            kind: kind.name().to_string(),
            source,
        };
        let params = if params.is_null() { Value::Object(Default::default()) } else { params };
        Ok(match kind {
            ExperimentKind::OracleConvergence => Self::OracleConvergence(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::Duality => Self::Duality(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::MfgSolve => Self::MfgSolve(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::Monotonicity => Self::Monotonicity(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::Lipschitz => Self::Lipschitz(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::RemainderOrder => Self::RemainderOrder(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::MasterResidual => Self::MasterResidual(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::Neumann => Self::Neumann(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::FlowConsistency => Self::FlowConsistency(serde_json::from_value(params).map_err(wrap)?),
            ExperimentKind::HolderTime => Self::HolderTime(serde_json::from_value(params).map_err(wrap)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub name: String,
    #[serde(flatten)]
    pub params: ExperimentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: Option<String>,
    kind: String,
    #[serde(default)]
    params: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<ModelSpec>,
    #[serde(default)]
    seed: u64,
    out: Option<PathBuf>,
    name: Option<String>,
    kind: Option<String>,
    #[serde(default)]
    params: Value,
    experiments: Option<Vec<RawExperiment>>,
}

/// Reference model on an 81 x 161 grid.
pub fn default_model() -> ModelSpec {
    ModelSpec::reference(81, 161)
}

impl ExperimentConfig {
    pub fn single(model: ModelSpec, seed: u64, params: ExperimentParams) -> Self {
        Self {
            model,
            seed,
            out: None,
            experiments: vec![Experiment {
                name: params.kind().name().to_string(),
                params,
            }],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let mut list = Vec::new();
        match (raw.kind, raw.experiments) {
            (Some(kind), None) => list.push(RawExperiment {
                name: raw.name,
                kind,
                params: raw.params,
            }),
            (None, Some(items)) => {
                if raw.name.is_some() || !raw.params.is_null() {
                    return Err(ConfigError::Invalid(
                        "top-level `name`/`params` only apply to single-experiment configs".into(),
                    ));
                }
                list = items;
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("give either `kind` or `experiments`, not both".into()))
            }
            (None, None) => return Err(ConfigError::Invalid("no experiment: missing `kind`".into())),
        }
        if list.is_empty() {
            return Err(ConfigError::Invalid("empty experiment list".into()));
        }
        let mut experiments = Vec::with_capacity(list.len());
        for item in list {
            let kind = ExperimentKind::parse(&item.kind)?;
            let params = ExperimentParams::from_value(kind, item.params)?;
            let name = item.name.unwrap_or_else(|| kind.name().to_string());
            if experiments.iter().any(|e: &Experiment| e.name == name) {
                return Err(ConfigError::Invalid(format!("duplicate experiment name `{name}`")));
            }
            experiments.push(Experiment { name, params });
        }
        Ok(Self {
            model: raw.model.unwrap_or_else(default_model),
            seed: raw.seed,
            out: raw.out,
            experiments,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_experiment_with_defaults() {
        let c = ExperimentConfig::from_json(r#"{"kind": "duality", "seed": 3}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.experiments.len(), 1);
        assert_eq!(c.experiments[0].name, "duality");
        assert_eq!(c.experiments[0].params, ExperimentParams::Duality(DualityParams::default()));
    }

    #[test]
    fn params_override_defaults() {
        let c = ExperimentConfig::from_json(r#"{"kind": "duality", "params": {"n_x": 21, "n_t": 21}}"#).unwrap();
        match &c.experiments[0].params {
            ExperimentParams::Duality(p) => {
                assert_eq!((p.n_x, p.n_t, p.tuples), (21, 21, 50));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn experiment_list() {
        let text = r#"{"experiments": [
            {"kind": "holder-time", "name": "h"},
            {"kind": "mfg-solve", "params": {"m0": {"kind": "uniform"}}}
        ]}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        let names: Vec<_> = c.experiments.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["h", "mfg-solve"]);
        assert_eq!(c.model, default_model());
    }

    #[test]
    fn unknown_kind_and_bad_params() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"kind": "unknown"}"#),
            Err(ConfigError::UnknownKind(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"kind": "duality", "params": {"bogus": 1}}"#),
            Err(ConfigError::Params { .. })
        ));
        assert!(ExperimentConfig::from_json(r#"{"seed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiments": [{"kind": "duality"}, {"kind": "duality"}]}"#).is_err());
    }

    #[test]
    fn every_kind_parses_by_name() {
        for kind in ExperimentKind::ALL {
            let text = format!(r#"{{"kind": "{kind}"}}"#);
            let c = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(c.experiments[0].params, ExperimentParams::defaults(kind));
        }
    }
}
