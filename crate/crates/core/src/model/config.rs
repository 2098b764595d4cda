use super::{DriftFamily, ModelSpec, ParamBox, Reward};
use crate::error::{invalid, Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Declarative model definition, loadable from JSON or TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: DriftFamily,
    pub theta: Vec<f64>,
    pub theta_bounds: BoxConfig,
    pub epsilon: f64,
    /// Row-major rows of `Σ̄`.
    pub sigma_bar: Vec<Vec<f64>>,
    pub action_box: BoxConfig,
    pub reward: Reward,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let d = self.sigma_bar.len();
        if d == 0 || self.sigma_bar.iter().any(|r| r.len() != d) {
            return invalid("sigma_bar must be a square, nonempty matrix");
        }
        let flat: Vec<f64> = self.sigma_bar.iter().flatten().copied().collect();
        ModelSpec::new(
            self.family.clone(),
            self.theta.clone(),
            ParamBox::new(self.theta_bounds.lo.clone(), self.theta_bounds.hi.clone())?,
            self.reward.clone(),
            DMatrix::from_row_slice(d, d, &flat),
            self.epsilon,
            ParamBox::new(self.action_box.lo.clone(), self.action_box.hi.clone())?,
        )
    }

    pub fn from_model(m: &ModelSpec) -> Self {
        let d = m.state_dim();
        Self {
            family: m.family.clone(),
            theta: m.theta.clone(),
            theta_bounds: BoxConfig {
                lo: m.theta_bounds.lo.clone(),
                hi: m.theta_bounds.hi.clone(),
            },
            epsilon: m.epsilon,
            sigma_bar: (0..d)
                .map(|i| (0..d).map(|j| m.sigma_bar[(i, j)]).collect())
                .collect(),
            action_box: BoxConfig {
                lo: m.action_box.lo.clone(),
                hi: m.action_box.hi.clone(),
            },
            reward: m.reward.clone(),
        }
    }

    pub fn benchmark() -> Self {
        Self::from_model(&ModelSpec::benchmark_linear_1d(0.05))
    }
}

/// Parse a JSON or TOML document, chosen by file extension (`.toml` is TOML,
/// anything else JSON).
pub fn load_document<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("toml") {
        toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))
    } else {
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_rebuilds_benchmark() {
        let cfg = ModelConfig::benchmark();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ModelConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let m = back.build().unwrap();
        assert_eq!(m.theta, vec![-1.0, 1.0]);
    }

    #[test]
    fn toml_document_parses() {
        let text = r#"
theta = [-1.0, 1.0]
epsilon = 0.1
sigma_bar = [[1.0]]

[family]
id = "linear"
state_dim = 1
action_dim = 1

[theta_bounds]
lo = [-2.0, 0.25]
hi = [-0.5, 1.75]

[action_box]
lo = [-1.0]
hi = [1.0]

[reward]
id = "bump"
amplitude = 1.0
center = [0.0]
width = 1.0
action_cost = { kind = "quadratic", weight = 0.5, clamp = 1.0 }
"#;
        let cfg: ModelConfig = toml::from_str(text).unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.eval_reward(&[0.0], &[0.0]).unwrap(), 1.0);
    }
}
