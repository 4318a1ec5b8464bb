//! Run configuration files.
//!
//! A configuration is a flat TOML table. Unknown keys are rejected.
//!
//! ```toml
//! problem = "poisson1d"     # catalog name
//! omega = 3.141592653589793 # optional problem parameters: q, omega, beta,
//!                           # amplitude, scale, n1, n2
//! loss = "strong_variational" # strong | strong_variational | weak_variational | mse
//! k = 0                     # interior Sobolev order
//! l = 0                     # boundary Sobolev order
//! n_r = 100                 # interior grid degree
//! n_s = 100                 # face grid degree (defaults to n_r)
//! boundary_sum = "per_face" # per_face | pre
//! hidden = [20, 20, 20, 20]
//! activation = "sin"        # sin | tanh | relu | elu
//! epochs = 10000
//! lr = 1e-3
//! lr_lambda = 1e-2          # inverse runs only; defaults to lr
//! lambda0 = 1.0             # inverse runs only
//! data_weight = 1.0         # inverse runs only: fit to observed solution
//! seed = 0
//! output_dir = "runs/poisson1d"
//! eval_n = 100
//! checkpoint_stride = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossKind, LossSpec};
use crate::nn::{Activation, MlpArchitecture};
use crate::optim::TrainConfig;
use crate::problems::{ProblemParams, ProblemSpec};
use crate::sobolev::BoundarySum;

/// Environment variable that, when set, prefixes relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "SCPINN_OUTPUT_ROOT";

fn default_hidden() -> Vec<usize> {
    vec![20, 20, 20, 20]
}
fn default_one() -> f64 {
    1.0
}
fn default_n() -> usize {
    30
}
fn default_epochs() -> usize {
    1000
}
fn default_lr() -> f64 {
    1e-3
}
fn default_eval_n() -> usize {
    100
}
fn default_loss() -> LossKind {
    LossKind::Strong
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub l: usize,
    #[serde(default = "default_n")]
    pub n_r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(default)]
    pub boundary_sum: BoundarySum,
    #[serde(default = "default_one")]
    pub interior_weight: f64,
    #[serde(default = "default_one")]
    pub boundary_weight: f64,
    /// Weight of the fit to the analytic solution in inverse runs.
    #[serde(default = "default_one")]
    pub data_weight: f64,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_lambda: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_eval_n")]
    pub eval_n: usize,
    #[serde(default)]
    pub checkpoint_stride: usize,
}

impl RunConfig {
    /// Minimal configuration for `problem` with every other key at its default.
    pub fn new(problem: &str) -> Self {
        Self::from_toml_str(&format!("problem = {problem:?}")).expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.problem_spec()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_r == 0 || self.n_s == Some(0) {
            return bad("n_r and n_s must be positive".into());
        }
        if self.eval_n < 2 {
            return bad("eval_n must be at least 2".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if let Some(l) = self.lr_lambda {
            if !(l.is_finite() && l >= 0.0) {
                return bad(format!("lr_lambda must be non-negative, got {l}"));
            }
        }
        if let Some(l) = self.lambda0 {
            if !l.is_finite() {
                return bad("lambda0 must be finite".into());
            }
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        for w in [self.interior_weight, self.boundary_weight, self.data_weight] {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("term weights must be non-negative, got {w}"));
            }
        }
        if self.loss == LossKind::Mse && !matches!(self.activation, Activation::Sin | Activation::Tanh) {
            return bad(format!("the mse loss needs a smooth activation, got {}", self.activation.name()));
        }
        Ok(())
    }

    pub fn problem_params(&self) -> ProblemParams {
        ProblemParams {
            q: self.q,
            omega: self.omega,
            beta: self.beta,
            amplitude: self.amplitude,
            scale: self.scale,
            n1: self.n1,
            n2: self.n2,
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::from_name(&self.problem, &self.problem_params()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            kind: self.loss,
            k: self.k,
            l: self.l,
            n_r: self.n_r,
            n_s: self.n_s.unwrap_or(self.n_r),
            boundary_sum: self.boundary_sum,
            interior_weight: self.interior_weight,
            boundary_weight: self.boundary_weight,
            data_weight: self.data_weight,
            seed: self.seed,
        }
    }

    pub fn architecture(&self) -> Result<MlpArchitecture> {
        let dim = self.problem_spec()?.dim();
        MlpArchitecture::new(dim, self.hidden.clone(), self.activation)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            lr_lambda: self.lr_lambda,
            seed: self.seed,
            checkpoint_stride: self.checkpoint_stride,
            eval_n: self.eval_n,
        }
    }

    /// Output directory after applying [`OUTPUT_ROOT_ENV`] to relative paths.
    pub fn resolved_output_dir(&self) -> PathBuf {
        let dir = self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.problem));
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::new("poisson1d");
        assert_eq!(c.loss, LossKind::Strong);
        assert_eq!(c.loss_spec().n_s, 30);
        assert_eq!(c.hidden, vec![20, 20, 20, 20]);
        assert_eq!(c.activation, Activation::Sin);
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"
            problem = "poisson_inverse"
            omega = 3.0
            loss = "weak_variational"
            k = 1
            l = 1
            n_r = 40
            n_s = 50
            boundary_sum = "pre"
            hidden = [8, 8]
            activation = "tanh"
            epochs = 5
            lr = 1e-2
            lr_lambda = 5e-2
            lambda0 = 2.0
            seed = 7
            output_dir = "out"
            eval_n = 11
            checkpoint_stride = 2
        "#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.problem_spec().unwrap(), ProblemSpec::PoissonInverse1d { omega: 3.0 });
        assert_eq!(c.loss_spec().boundary_sum, BoundarySum::Pre);
        assert_eq!(c.architecture().unwrap().input_dim, 1);
        assert_eq!(c.train_config().lr_lambda, Some(5e-2));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        for text in [
            "problem = \"poisson1d\"\nfoo = 1",
            "problem = \"nope\"",
            "problem = \"poisson1d\"\nlr = -1.0",
            "problem = \"poisson1d\"\nn_r = 0",
            "problem = \"poisson1d\"\nloss = \"mse\"\nactivation = \"relu\"",
            "problem = ",
            "k = 1",
        ] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn toml_and_json_round_trip() {
        let mut c = RunConfig::new("qho2d");
        c.n1 = Some(2);
        c.lr_lambda = Some(0.5);
        c.output_dir = Some(PathBuf::from("x/y"));
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
    }
}
