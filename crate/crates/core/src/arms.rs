//! Strategic arm models.
//!
//! An arm's utility is its expected number of clicks over an episode. It is
//! estimated by Monte-Carlo over seeded episodes. Every estimate that
//! compares strategies of the same arm reuses the same replicate streams
//! (common random numbers), so differences between strategies are far less
//! noisy than the individual estimates.

use rayon::prelude::*;

use crate::env::{role, Instance, StrategyProfile, StreamKey};
use crate::error::{Error, Result};
use crate::mech::MechanismKind;
use crate::sim::{self, Recording, Trace};
use crate::utility::{unit_grid, UtilitySpec};

/// The game among arms induced by a mechanism on an instance.
#[derive(Debug, Clone)]
pub struct Game {
    instance: Instance,
    utility: UtilitySpec,
    kind: MechanismKind,
}

impl Game {
    pub fn new(instance: Instance, utility: UtilitySpec, kind: MechanismKind) -> Self {
        Self {
            instance,
            utility,
            kind,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.instance.k()
    }

    pub fn horizon(&self) -> usize {
        self.instance.horizon()
    }

    pub fn episode(&self, profile: &StrategyProfile, seed: StreamKey, recording: Recording) -> Result<Trace> {
        sim::run_episode(&self.instance, self.kind, profile, &self.utility, seed, recording)
    }

    /// sᵢ = s*(μᵢ) for every arm.
    pub fn desired_profile(&self) -> StrategyProfile {
        StrategyProfile::new(self.instance.mus().iter().map(|&mu| self.utility.sstar(mu)).collect())
            .expect("s* maps into [0, 1]")
    }

    fn clicks(&self, profile: &StrategyProfile, arm: usize, reps: usize, seed: StreamKey) -> Result<Vec<f64>> {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                self.episode(profile, seed.fork(role::REPLICATE, r), Recording::Summary)
                    .map(|tr| sim::arm_clicks(&tr, arm) as f64)
            })
            .collect()
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            reps: n,
        }
    }
}

fn check_reps(mc_reps: usize) -> Result<()> {
    if mc_reps == 0 {
        return Err(Error::param("mc_reps", "must be at least 1"));
    }
    Ok(())
}

fn check_grid_step(grid_step: f64) -> Result<()> {
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::param("grid_step", format!("must lie in (0, 0.1], got {grid_step}")));
    }
    Ok(())
}

/// Expected clicks of `arm` under `profile`, averaged over `mc_reps` episodes.
pub fn mc_arm_utility(
    game: &Game,
    profile: &StrategyProfile,
    arm: usize,
    mc_reps: usize,
    seed: StreamKey,
) -> Result<Estimate> {
    game.instance.check_arm(arm)?;
    check_reps(mc_reps)?;
    Ok(Estimate::from_samples(&game.clicks(profile, arm, mc_reps, seed)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientConfig {
    pub epochs: usize,
    /// Episodes per utility estimate.
    pub mc_reps: usize,
    /// Finite-difference half-width.
    pub fd_delta: f64,
    /// Step scale γ; the update is γ·ĝ/T.
    pub step_scale: f64,
    pub init_strategy: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            mc_reps: 10,
            fd_delta: 0.05,
            step_scale: 1.0,
            init_strategy: 1.0,
        }
    }
}

impl GradientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        check_reps(self.mc_reps)?;
        if !(self.fd_delta > 0.0 && self.fd_delta <= 0.25) {
            return Err(Error::param("fd_delta", format!("must lie in (0, 0.25], got {}", self.fd_delta)));
        }
        if !(self.step_scale.is_finite() && self.step_scale >= 0.0) {
            return Err(Error::param("step_scale", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.init_strategy) {
            return Err(Error::param("init_strategy", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Finite-difference slope of `arm`'s expected clicks in its own strategy.
///
/// Central difference over `[s − δ, s + δ]` clipped to `[0, 1]`; both ends use
/// the same replicate streams. The returned standard error is that of the
/// paired difference quotient.
pub fn estimate_gradient(
    game: &Game,
    profile: &StrategyProfile,
    arm: usize,
    config: &GradientConfig,
    seed: StreamKey,
) -> Result<Estimate> {
    game.instance.check_arm(arm)?;
    config.validate()?;
    let s = profile.get(arm);
    let lo = (s - config.fd_delta).max(0.0);
    let hi = (s + config.fd_delta).min(1.0);
    let below = game.clicks(&profile.with_strategy(arm, lo)?, arm, config.mc_reps, seed)?;
    let above = game.clicks(&profile.with_strategy(arm, hi)?, arm, config.mc_reps, seed)?;
    let width = hi - lo;
    let quotients: Vec<f64> = above.iter().zip(&below).map(|(a, b)| (a - b) / width).collect();
    Ok(Estimate::from_samples(&quotients))
}

/// One epoch of repeated interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Strategies played during the epoch.
    pub strategies: Vec<f64>,
    pub regret: f64,
    pub clicks: Vec<u64>,
    pub elimination_round: Vec<Option<usize>>,
    pub gradients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientRun {
    pub epochs: Vec<EpochRecord>,
    /// Strategies after the last update.
    pub final_profile: StrategyProfile,
}

/// Key of the randomness used in `epoch` of `run`.
pub fn epoch_key(base_seed: u64, run: u64, epoch: u64) -> StreamKey {
    StreamKey::derive(base_seed, run, epoch, role::EPOCH)
}

/// Decentralized gradient ascent: each epoch plays one recorded episode,
/// then every arm simultaneously moves sᵢ ← clip(sᵢ + γ·ĝᵢ/T).
pub fn gradient_ascent_run(game: &Game, config: &GradientConfig, base_seed: u64, run: u64) -> Result<GradientRun> {
    config.validate()?;
    let k = game.k();
    let horizon = game.horizon() as f64;
    let mut profile = StrategyProfile::uniform(k, config.init_strategy)?;
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let key = epoch_key(base_seed, run, epoch as u64);
        let trace = game.episode(&profile, key.fork(role::EPISODE, 0), Recording::Summary)?;
        let regret = sim::strategic_regret(&trace, &game.instance, &profile, &game.utility)?;
        let gradients = (0..k)
            .map(|arm| {
                estimate_gradient(game, &profile, arm, config, key.fork(role::GRADIENT, arm as u64)).map(|g| g.mean)
            })
            .collect::<Result<Vec<f64>>>()?;
        let next: Vec<f64> = profile
            .as_slice()
            .iter()
            .zip(&gradients)
            .map(|(&s, &g)| (s + config.step_scale * g / horizon).clamp(0.0, 1.0))
            .collect();
        epochs.push(EpochRecord {
            epoch,
            strategies: profile.as_slice().to_vec(),
            regret,
            clicks: trace.clicks,
            elimination_round: trace.elimination_round,
            gradients,
        });
        profile = StrategyProfile::new(next)?;
    }
    Ok(GradientRun {
        epochs,
        final_profile: profile,
    })
}

/// Per-replicate clicks of `arm` at every grid strategy, sharing streams.
fn sweep(game: &Game, profile: &StrategyProfile, arm: usize, grid: &[f64], reps: usize, seed: StreamKey) -> Result<Vec<Vec<f64>>> {
    grid.par_iter()
        .map(|&s| game.clicks(&profile.with_strategy(arm, s)?, arm, reps, seed))
        .collect()
}

// Ties go to the larger strategy.
fn best_index(samples: &[Vec<f64>]) -> usize {
    let means: Vec<f64> = samples.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let mut best = 0;
    for (i, &m) in means.iter().enumerate() {
        if m >= means[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub strategy: f64,
    pub value: Estimate,
}

/// Grid best response of `arm` holding the other strategies fixed.
pub fn best_response(
    game: &Game,
    profile: &StrategyProfile,
    arm: usize,
    grid_step: f64,
    mc_reps: usize,
    seed: StreamKey,
) -> Result<BestResponse> {
    game.instance.check_arm(arm)?;
    profile.check_len(game.k())?;
    check_grid_step(grid_step)?;
    check_reps(mc_reps)?;
    let grid = unit_grid(grid_step);
    let samples = sweep(game, profile, arm, &grid, mc_reps, seed)?;
    let best = best_index(&samples);
    Ok(BestResponse {
        strategy: grid[best],
        value: Estimate::from_samples(&samples[best]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbrOutcome {
    pub profile: StrategyProfile,
    pub converged: bool,
    pub passes: usize,
}

/// Round-robin best responses until a full pass moves no arm by more than
/// one grid step.
///
/// Each arm's sweeps reuse the same streams in every pass, so the iteration
/// is a deterministic best-response map on a fixed sample.
pub fn iterated_best_response(
    game: &Game,
    init: &StrategyProfile,
    max_iters: usize,
    grid_step: f64,
    mc_reps: usize,
    seed: StreamKey,
) -> Result<IbrOutcome> {
    if max_iters == 0 {
        return Err(Error::param("max_iters", "must be at least 1"));
    }
    init.check_len(game.k())?;
    let mut profile = init.clone();
    for pass in 1..=max_iters {
        let mut moved = false;
        for arm in 0..game.k() {
            let br = best_response(game, &profile, arm, grid_step, mc_reps, seed.fork(role::BEST_RESPONSE, arm as u64))?;
            if (br.strategy - profile.get(arm)).abs() > grid_step + 1e-9 {
                moved = true;
            }
            profile = profile.with_strategy(arm, br.strategy)?;
        }
        if !moved {
            return Ok(IbrOutcome {
                profile,
                converged: true,
                passes: pass,
            });
        }
    }
    Ok(IbrOutcome {
        profile,
        converged: false,
        passes: max_iters,
    })
}

/// Evidence that no arm gains more than ε clicks by a unilateral grid deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NeCertificate {
    pub profile: StrategyProfile,
    /// Tolerance in expected clicks.
    pub epsilon: f64,
    pub per_arm_value: Vec<f64>,
    pub best_strategy: Vec<f64>,
    pub best_value: Vec<f64>,
    /// Estimated gain of the best grid deviation over the current strategy.
    pub per_arm_gain: Vec<f64>,
    /// Standard error of each gain (paired over replicates).
    pub std_errors: Vec<f64>,
    pub grid_step: f64,
    pub mc_reps: usize,
}

impl NeCertificate {
    pub fn max_gain(&self) -> f64 {
        self.per_arm_gain.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_std_error(&self) -> f64 {
        self.std_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn certified(&self) -> bool {
        self.max_gain() <= self.epsilon + 2.0 * self.max_std_error()
    }
}

pub fn certify_epsilon_ne(
    game: &Game,
    profile: &StrategyProfile,
    epsilon: f64,
    grid_step: f64,
    mc_reps: usize,
    seed: StreamKey,
) -> Result<NeCertificate> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::param("epsilon", format!("must be nonnegative, got {epsilon}")));
    }
    profile.check_len(game.k())?;
    check_grid_step(grid_step)?;
    check_reps(mc_reps)?;
    let grid = unit_grid(grid_step);
    let k = game.k();
    let mut cert = NeCertificate {
        profile: profile.clone(),
        epsilon,
        per_arm_value: Vec::with_capacity(k),
        best_strategy: Vec::with_capacity(k),
        best_value: Vec::with_capacity(k),
        per_arm_gain: Vec::with_capacity(k),
        std_errors: Vec::with_capacity(k),
        grid_step,
        mc_reps,
    };
    for arm in 0..k {
        let arm_seed = seed.fork(role::CERTIFY, arm as u64);
        let current = game.clicks(profile, arm, mc_reps, arm_seed)?;
        let samples = sweep(game, profile, arm, &grid, mc_reps, arm_seed)?;
        let best = best_index(&samples);
        let diffs: Vec<f64> = samples[best].iter().zip(&current).map(|(b, c)| b - c).collect();
        let gain = Estimate::from_samples(&diffs);
        cert.per_arm_value.push(Estimate::from_samples(&current).mean);
        cert.best_strategy.push(grid[best]);
        cert.best_value.push(Estimate::from_samples(&samples[best]).mean);
        cert.per_arm_gain.push(gain.mean);
        cert.std_errors.push(gain.std_error);
    }
    Ok(cert)
}
