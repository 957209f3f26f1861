//! Run configuration files.
//!
//! A run is described by one JSON document: problem, method, network
//! architecture, optional training-parameter overrides, optional strip
//! schedule, output directory and master seed. All randomness in the run is
//! derived from that seed.

use hjb_pinn::hjb::{load_problem, HJBProblem, Horizon, BUILTIN_IDS};
use hjb_pinn::networks::{ConvexNet, Network, PartialConvexNet, QuadraticNet, SmoothMlp};
use hjb_pinn::training::{Method, StripSchedule, TrainConfig};
use hjb_pinn::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin problem id or path to a problem definition file.
    pub problem: String,
    pub method: Method,
    pub network: NetworkSpec,
    /// Overrides for the training defaults; keys must name `TrainConfig`
    /// fields.
    #[serde(default)]
    pub train: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub strip: Option<StripSchedule>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// Hidden layer widths; input and output widths come from the problem.
    SmoothMlp { hidden: Vec<usize> },
    Convex {
        hidden: usize,
        #[serde(default = "default_activation")]
        activation: String,
    },
    PartialConvex {
        hidden: usize,
        #[serde(default = "default_t_features")]
        t_features: usize,
        #[serde(default = "default_yhat_dim")]
        yhat_dim: usize,
        #[serde(default = "default_f_hidden")]
        f1_hidden: usize,
        #[serde(default = "default_f_hidden")]
        f2_hidden: usize,
    },
    Quadratic {},
}

fn default_activation() -> String {
    "relu".to_string()
}
fn default_t_features() -> usize {
    16
}
fn default_yhat_dim() -> usize {
    8
}
fn default_f_hidden() -> usize {
    16
}

impl NetworkSpec {
    pub fn build(&self, problem: &HJBProblem) -> Result<Network> {
        let input_dim = problem.input_dim();
        match self {
            NetworkSpec::SmoothMlp { hidden } => {
                let mut widths = Vec::with_capacity(hidden.len() + 2);
                widths.push(input_dim);
                widths.extend_from_slice(hidden);
                widths.push(1);
                Ok(Network::SmoothMlp(SmoothMlp::new(widths)?))
            }
            NetworkSpec::Convex { hidden, activation } => {
                let act = hjb_pinn::checkpoint::parse_convex_activation(activation)?;
                Ok(Network::Convex(ConvexNet::new(input_dim, *hidden, act)))
            }
            NetworkSpec::PartialConvex {
                hidden,
                t_features,
                yhat_dim,
                f1_hidden,
                f2_hidden,
            } => {
                if !problem.horizon().is_finite() {
                    return Err(Error::InvalidConfig(
                        "a partially convex network needs a finite horizon \
                         (time input)"
                            .into(),
                    ));
                }
                Ok(Network::PartialConvex(PartialConvexNet {
                    state_dim: problem.state_dim(),
                    hidden: *hidden,
                    t_features: *t_features,
                    yhat_dim: *yhat_dim,
                    f1_hidden: *f1_hidden,
                    f2_hidden: *f2_hidden,
                }))
            }
            NetworkSpec::Quadratic {} => Ok(Network::Quadratic(QuadraticNet {
                dim: input_dim,
            })),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Assemble the full `TrainConfig`: defaults for the chosen method, the
    /// run seed, then the overrides (each key must name an existing field).
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut base = serde_json::to_value(TrainConfig::new(self.method))?;
        let map = base
            .as_object_mut()
            .expect("TrainConfig serializes to an object");
        map.insert("seed".into(), serde_json::json!(self.seed));
        for (key, value) in &self.train {
            if !map.contains_key(key) {
                return Err(Error::InvalidConfig(format!(
                    "unknown training parameter `{key}`"
                )));
            }
            if key == "method" || key == "seed" {
                return Err(Error::InvalidConfig(format!(
                    "`{key}` is set at the top level of the run config"
                )));
            }
            map.insert(key.clone(), value.clone());
        }
        let cfg: TrainConfig = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolve a problem argument: builtin id first, then a definition file.
pub fn resolve_problem(arg: &str) -> Result<HJBProblem> {
    if BUILTIN_IDS.contains(&arg) {
        return hjb_pinn::hjb::builtin_problem(arg);
    }
    let path = Path::new(arg);
    if path.exists() {
        return load_problem(path);
    }
    Err(Error::UnknownProblem(format!(
        "{arg} (not a builtin id and no such file)"
    )))
}

/// Validate a strip schedule against the problem and network family.
pub fn validate_strip(
    strip: &Option<StripSchedule>,
    problem: &HJBProblem,
    net: &Network,
) -> Result<()> {
    if let Some(s) = strip {
        let t_end = match problem.horizon() {
            Horizon::Finite { t_end, .. } => *t_end,
            Horizon::Infinite => {
                return Err(Error::InvalidConfig(
                    "strip training needs a finite-horizon problem".into(),
                ))
            }
        };
        s.validate(t_end)?;
        if !matches!(net, Network::PartialConvex(_)) {
            return Err(Error::InvalidConfig(
                "strip training runs on a partial_convex network".into(),
            ));
        }
    }
    Ok(())
}
