//! Experiment configuration, read from TOML.

use super::reference::{Problem, ProblemId, Scheme};
use crate::drivers::Payoff;
use crate::error::{invalid, Error, Result};
use crate::solver::Convention;
use serde::{Deserialize, Serialize};

/// Keys of an experiment file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub k_list: Vec<usize>,
    pub p_max: usize,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    /// Generator coefficient (`linear-lambda`) or jump intensity
    /// (`jump-linear`); the problem default when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Weight exponent of the ⋆-norm; chosen from `Φ` when absent.
    #[serde(default)]
    pub beta_hat: Option<f64>,
    /// Bound on `A_T` checked for every row.
    #[serde(rename = "A_bar", default)]
    pub a_bar: Option<f64>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub convention: Convention,
    #[serde(default)]
    pub payoff: Option<Payoff>,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub strike: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub mark: Option<f64>,
    /// Largest leaf count solved on the full tree; bigger rows use the
    /// lattice and sampled scenarios.
    #[serde(default = "default_exact")]
    pub exact_max_leaves: usize,
    /// Tolerance of the Moore–Osgood checks and of the joint limit.
    #[serde(default = "default_mo_tol")]
    pub mo_tol: f64,
    /// Iteration cap when running each row to its fixed point.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}
fn default_paths() -> usize {
    10_000
}
fn default_tol() -> f64 {
    1e-10
}
fn default_exact() -> usize {
    1 << 16
}
fn default_mo_tol() -> f64 {
    0.05
}
fn default_max_iter() -> usize {
    200
}
fn default_delta() -> f64 {
    0.25
}

impl ExperimentConfig {
    /// Defaults for everything but the problem, the `k` list and `p_max`.
    pub fn new(problem: ProblemId, k_list: Vec<usize>, p_max: usize) -> Self {
        ExperimentConfig {
            problem: problem.name().into(),
            k_list,
            p_max,
            horizon: 1.0,
            lambda: None,
            beta_hat: None,
            a_bar: None,
            n_paths: default_paths(),
            seed: 0,
            tol: default_tol(),
            convention: Convention::YLeft,
            payoff: None,
            scheme: None,
            kappa: None,
            strike: None,
            eta: None,
            mark: None,
            exact_max_leaves: default_exact(),
            mo_tol: default_mo_tol(),
            max_iter: default_max_iter(),
            delta: default_delta(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.parse::<ProblemId>()?;
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return invalid("k_list needs positive entries");
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("k_list must be strictly increasing");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid("T must be positive");
        }
        if self.n_paths == 0 {
            return invalid("n_paths must be positive");
        }
        if !(self.tol > 0.0) || !(self.mo_tol > 0.0) {
            return invalid("tolerances must be positive");
        }
        if self.beta_hat.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
            return invalid("beta_hat must be positive");
        }
        self.to_problem()?.check()
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let id: ProblemId = self.problem.parse()?;
        let mut p = Problem::new(id);
        p.horizon = self.horizon;
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = &self.payoff {
            p.payoff = v.clone();
        }
        if let Some(v) = self.scheme {
            p.scheme = v;
        }
        if let Some(v) = self.kappa {
            p.kappa = v;
        }
        if let Some(v) = self.strike {
            p.strike = v;
        }
        if let Some(v) = self.eta {
            p.eta = v;
        }
        if let Some(v) = self.mark {
            p.mark = v;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_keys() {
        let text = r#"
problem = "martingale-g"
k_list = [4, 16, 64]
p_max = 4
T = 1.0
lambda = 0.0
beta_hat = 2.0
A_bar = 1.0
n_paths = 500
seed = 7
tol = 1e-12
convention = "Y_right"
payoff = { kind = "square" }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.convention, Convention::YRight);
        assert_eq!(cfg.to_problem().unwrap().payoff, Payoff::Square);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = "problem = \"martingale-g\"\nk_list = [4, 16, 64]\np_max = 3\n";
        assert!(ExperimentConfig::from_toml(base).is_ok());
        assert!(ExperimentConfig::from_toml(&format!("{base}colour = 1\n")).is_err());
        assert!(ExperimentConfig::from_toml(&base.replace("martingale-g", "nope")).is_err());
        assert!(ExperimentConfig::from_toml(&base.replace("[4, 16, 64]", "[16, 4]")).is_err());
        assert!(ExperimentConfig::from_toml(&base.replace("martingale-g\"", "ode-limit\"\nscheme = \"walk\"")).is_err());
    }
}
