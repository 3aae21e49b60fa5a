//! Line-oriented `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! instance.mus = 0.75, 0.725, 0.7, 0.675
//! instance.horizon = 50000
//! utility.kind = penalized
//! utility.lambda = 5
//! mechanism.kind = ucbs
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::arms::{Game, GradientConfig};
use crate::env::{Instance, RewardModel, StrategyProfile};
use crate::error::{Error, Result};
use crate::mech::MechanismKind;
use crate::sim::Recording;
use crate::utility::{UtilityKind, UtilitySpec};

/// Strategy updates between epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmModel {
    Fixed,
    Gradient,
}

impl FromStr for ArmModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(ArmModel::Fixed),
            "gradient" => Ok(ArmModel::Gradient),
            other => Err(format!("unknown arm model `{other}` (expected: fixed, gradient)")),
        }
    }
}

/// Fixed strategies, either explicit or `s*(μᵢ) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Explicit(Vec<f64>),
    Truthful,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumConfig {
    pub grid_step: f64,
    pub mc_reps: usize,
    pub max_iters: usize,
    /// Certification tolerance in expected clicks.
    pub epsilon: f64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.01,
            mc_reps: 10,
            max_iters: 10,
            epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mus: Vec<f64>,
    pub horizon: usize,
    pub reward_model: RewardModel,
    pub utility: UtilityKind,
    pub mechanism: MechanismKind,
    pub arm_model: ArmModel,
    pub profile: ProfileSpec,
    pub profile_offset: f64,
    pub gradient: GradientConfig,
    pub equilibrium: EquilibriumConfig,
    pub sweep_horizons: Vec<usize>,
    pub sweep_offsets: Vec<f64>,
    pub runs: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub recording: Recording,
    /// Grid step of `validate-utility`.
    pub validate_grid_step: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mus: Vec::new(),
            horizon: 0,
            reward_model: RewardModel::Bernoulli,
            utility: UtilityKind::Penalized { lambda: 5.0 },
            mechanism: MechanismKind::UcbS,
            arm_model: ArmModel::Fixed,
            profile: ProfileSpec::Truthful,
            profile_offset: 0.0,
            gradient: GradientConfig::default(),
            equilibrium: EquilibriumConfig::default(),
            sweep_horizons: Vec::new(),
            sweep_offsets: vec![0.0],
            runs: 1,
            base_seed: 0,
            output_dir: PathBuf::from("out"),
            recording: Recording::Summary,
            validate_grid_step: 1e-3,
        }
    }
}

pub const PRESETS: [&str; 2] = ["paper-fig2", "paper-fig3"];

/// Gradient step scale used by the repeated-interaction presets.
pub const PRESET_STEP_SCALE: f64 = 0.01;

impl ExperimentConfig {
    /// Repeated interaction of four arms with UCB-S (`paper-fig2`) or with
    /// standard UCB (`paper-fig3`).
    pub fn preset(name: &str) -> Result<Self> {
        let mechanism = match name {
            "paper-fig2" => MechanismKind::UcbS,
            "paper-fig3" => MechanismKind::Ucb,
            other => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset `{other}` (available: {})", PRESETS.join(", ")),
                ))
            }
        };
        Ok(Self {
            mus: vec![0.75, 0.725, 0.7, 0.675],
            horizon: 50_000,
            utility: UtilityKind::Penalized { lambda: 5.0 },
            mechanism,
            arm_model: ArmModel::Gradient,
            gradient: GradientConfig {
                epochs: 20,
                mc_reps: 10,
                fd_delta: 0.05,
                step_scale: PRESET_STEP_SCALE,
                init_strategy: 1.0,
            },
            runs: 10,
            output_dir: PathBuf::from(format!("out/{name}")),
            ..Self::default()
        })
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.apply(key, value.trim()).map_err(|message| Error::config(key, message))
    }

    fn apply(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "instance.mus" => self.mus = parse_list(v)?,
            "instance.horizon" => self.horizon = parse(v)?,
            "instance.reward" => self.reward_model = parse(v)?,
            "utility.kind" => {
                self.utility = match v {
                    "greedy" => UtilityKind::Greedy,
                    "penalized" => UtilityKind::Penalized {
                        lambda: match self.utility {
                            UtilityKind::Penalized { lambda } => lambda,
                            UtilityKind::Greedy => 5.0,
                        },
                    },
                    other => return Err(format!("unknown utility `{other}` (expected: greedy, penalized)")),
                }
            }
            "utility.lambda" => {
                let lambda = parse(v)?;
                self.utility = UtilityKind::Penalized { lambda };
            }
            "mechanism.kind" => self.mechanism = parse(v)?,
            "arms.model" => self.arm_model = parse(v)?,
            "arms.profile" => {
                self.profile = if v == "truthful" {
                    ProfileSpec::Truthful
                } else {
                    ProfileSpec::Explicit(parse_list(v)?)
                }
            }
            "arms.offset" => self.profile_offset = parse(v)?,
            "gradient.epochs" => self.gradient.epochs = parse(v)?,
            "gradient.mc_reps" => self.gradient.mc_reps = parse(v)?,
            "gradient.fd_delta" => self.gradient.fd_delta = parse(v)?,
            "gradient.step_scale" => self.gradient.step_scale = parse(v)?,
            "gradient.init_strategy" => self.gradient.init_strategy = parse(v)?,
            "equilibrium.grid_step" => self.equilibrium.grid_step = parse(v)?,
            "equilibrium.mc_reps" => self.equilibrium.mc_reps = parse(v)?,
            "equilibrium.max_iters" => self.equilibrium.max_iters = parse(v)?,
            "equilibrium.epsilon" => self.equilibrium.epsilon = parse(v)?,
            "sweep.horizons" => self.sweep_horizons = parse_list(v)?,
            "sweep.offsets" => self.sweep_offsets = parse_list(v)?,
            "experiment.runs" => self.runs = parse(v)?,
            "experiment.seed" => self.base_seed = parse(v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "output.granularity" => self.recording = parse(v)?,
            "validate.grid_step" => self.validate_grid_step = parse(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Applies every setting of a config text, reporting the offending line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: Some(idx + 1),
                    key: line.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            self.apply(key, value.trim()).map_err(|message| Error::Config {
                line: Some(idx + 1),
                key: key.to_string(),
                message,
            })?;
        }
        Ok(())
    }

    pub fn instance(&self) -> Result<Instance> {
        if self.mus.is_empty() {
            return Err(Error::config("instance.mus", "must list at least one arm mean"));
        }
        Instance::new(self.mus.clone(), self.horizon, self.reward_model)
            .map_err(|e| Error::config(if self.horizon < 2 { "instance.horizon" } else { "instance.mus" }, e.to_string()))
    }

    pub fn utility_spec(&self) -> Result<UtilitySpec> {
        UtilitySpec::from_kind(self.utility).map_err(|e| Error::config("utility.lambda", e.to_string()))
    }

    pub fn game(&self) -> Result<Game> {
        Ok(Game::new(self.instance()?, self.utility_spec()?, self.mechanism))
    }

    /// The fixed profile for an instance with these means.
    pub fn fixed_profile(&self, instance: &Instance) -> Result<StrategyProfile> {
        let utility = self.utility_spec()?;
        let base: Vec<f64> = match &self.profile {
            ProfileSpec::Explicit(s) => {
                if s.len() != instance.k() {
                    return Err(Error::config(
                        "arms.profile",
                        format!("has {} entries but the instance has {} arms", s.len(), instance.k()),
                    ));
                }
                s.clone()
            }
            ProfileSpec::Truthful => instance.mus().iter().map(|&mu| utility.sstar(mu)).collect(),
        };
        let shifted = base.iter().map(|s| s + self.profile_offset).collect();
        StrategyProfile::new(shifted).map_err(|e| Error::config("arms.profile", e.to_string()))
    }

    /// Checks everything an experiment over the instance needs.
    pub fn validate(&self) -> Result<()> {
        self.validate_utility()?;
        let instance = self.instance()?;
        if self.runs == 0 {
            return Err(Error::config("experiment.runs", "must be at least 1"));
        }
        self.gradient.validate().map_err(|e| match e {
            Error::InvalidParameter { name, message } => Error::config(format!("gradient.{name}"), message),
            other => other,
        })?;
        let eq = &self.equilibrium;
        if !(eq.grid_step > 0.0 && eq.grid_step <= 0.1) {
            return Err(Error::config("equilibrium.grid_step", "must lie in (0, 0.1]"));
        }
        if eq.mc_reps == 0 {
            return Err(Error::config("equilibrium.mc_reps", "must be at least 1"));
        }
        if eq.max_iters == 0 {
            return Err(Error::config("equilibrium.max_iters", "must be at least 1"));
        }
        if eq.epsilon.is_nan() || eq.epsilon < 0.0 {
            return Err(Error::config("equilibrium.epsilon", "must be nonnegative"));
        }
        if let Some(h) = self.sweep_horizons.iter().find(|&&h| h < 2) {
            return Err(Error::config("sweep.horizons", format!("horizon {h} is below 2")));
        }
        if self.arm_model == ArmModel::Fixed {
            self.fixed_profile(&instance)?;
        }
        Ok(())
    }

    pub fn validate_utility(&self) -> Result<()> {
        self.utility_spec()?;
        if !(self.validate_grid_step > 0.0 && self.validate_grid_step <= 0.05) {
            return Err(Error::config("validate.grid_step", "must lie in (0, 0.05]"));
        }
        Ok(())
    }
}

/// Builds a config from an optional preset, an optional file and overrides,
/// in that order.
pub fn load_config(preset: Option<&str>, file: Option<&Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut config = match preset {
        Some(name) => ExperimentConfig::preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        config.apply_text(&text)?;
    }
    for (key, value) in overrides {
        config.set(key, value)?;
    }
    Ok(config)
}

/// Splits `key=value`.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::config(arg, "expected `key=value`"))
}

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}"))
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse(x.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig2_preset_protocol() {
        let c = ExperimentConfig::preset("paper-fig2").unwrap();
        assert_eq!(c.mus, vec![0.75, 0.725, 0.7, 0.675]);
        assert_eq!(c.horizon, 50_000);
        assert_eq!(c.utility, UtilityKind::Penalized { lambda: 5.0 });
        assert_eq!(c.gradient.epochs, 20);
        assert_eq!(c.gradient.init_strategy, 1.0);
        assert_eq!(c.runs, 10);
        assert_eq!(c.mechanism, MechanismKind::UcbS);
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::preset("paper-fig3").unwrap().mechanism, MechanismKind::Ucb);
        assert!(ExperimentConfig::preset("fig9").is_err());
    }

    #[test]
    fn parses_text() {
        let mut c = ExperimentConfig::default();
        c.apply_text(
            "# test\n\ninstance.mus = 0.5, 0.4\ninstance.horizon=100\nutility.kind = greedy\nmechanism.kind = mu-oracle\narms.profile = 1, 0.5\nexperiment.runs = 3\n",
        )
        .unwrap();
        assert_eq!(c.mus, vec![0.5, 0.4]);
        assert_eq!(c.horizon, 100);
        assert_eq!(c.utility, UtilityKind::Greedy);
        assert_eq!(c.mechanism, MechanismKind::MuOracle);
        assert_eq!(c.profile, ProfileSpec::Explicit(vec![1.0, 0.5]));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_names_line() {
        let mut c = ExperimentConfig::default();
        let err = c.apply_text("instance.horizon = 10\ninstance.bogus = 3\n").unwrap_err();
        match err {
            Error::Config { line, key, .. } => {
                assert_eq!(line, Some(2));
                assert_eq!(key, "instance.bogus");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(c.apply_text("no equals sign").is_err());
        assert!(c.apply_text("instance.horizon = ten").is_err());
    }

    #[test]
    fn validation_errors_name_field() {
        let mut c = ExperimentConfig::preset("paper-fig2").unwrap();
        c.mus.clear();
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "instance.mus"));

        let mut c = ExperimentConfig::preset("paper-fig2").unwrap();
        c.runs = 0;
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "experiment.runs"));

        let mut c = ExperimentConfig::preset("paper-fig2").unwrap();
        c.set("gradient.fd_delta", "0.5").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "gradient.fd_delta"));

        let mut c = ExperimentConfig::preset("paper-fig2").unwrap();
        c.set("arm.model", "fixed").unwrap_err();
        c.set("arms.model", "fixed").unwrap();
        c.set("arms.profile", "1,1").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "arms.profile"));
    }

    #[test]
    fn truthful_profile_with_offset() {
        let mut c = ExperimentConfig::preset("paper-fig2").unwrap();
        c.set("arms.offset", "0.01").unwrap();
        let p = c.fixed_profile(&c.instance().unwrap()).unwrap();
        assert!((p.get(0) - 0.835).abs() < 1e-12);
        c.set("arms.offset", "0.5").unwrap();
        assert!(c.fixed_profile(&c.instance().unwrap()).is_err());
    }

    #[test]
    fn overrides() {
        let (k, v) = parse_override("instance.horizon=200").unwrap();
        assert_eq!((k.as_str(), v.as_str()), ("instance.horizon", "200"));
        assert!(parse_override("instance.horizon").is_err());
        let c = load_config(Some("paper-fig2"), None, &[(k, v)]).unwrap();
        assert_eq!(c.horizon, 200);
    }
}
