//! Problem instances, strategy profiles and the stochastic click environment.
//!
//! Each round the recommended arm is clicked with probability equal to its
//! strategy; a post-click reward with the arm's mean is revealed only on a
//! click.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Post-click reward distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardModel {
    /// Reward is 1 with probability μ and 0 otherwise.
    #[default]
    Bernoulli,
}

impl std::str::FromStr for RewardModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bernoulli" => Ok(RewardModel::Bernoulli),
            other => Err(format!("unknown reward model `{other}` (expected: bernoulli)")),
        }
    }
}

impl std::fmt::Display for RewardModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RewardModel::Bernoulli => f.write_str("bernoulli"),
        }
    }
}

/// The hidden environment: per-arm post-click means and the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    mus: Vec<f64>,
    horizon: usize,
    reward_model: RewardModel,
}

impl Instance {
    pub fn new(mus: Vec<f64>, horizon: usize, reward_model: RewardModel) -> Result<Self> {
        if mus.is_empty() {
            return Err(Error::InvalidInstance("at least one arm is required".into()));
        }
        if let Some((i, mu)) = mus
            .iter()
            .enumerate()
            .find(|(_, mu)| !(0.0..=1.0).contains(*mu))
        {
            return Err(Error::InvalidInstance(format!(
                "mean of arm {i} is {mu}, outside of [0, 1]"
            )));
        }
        // ln T must be positive for the confidence radii.
        if horizon < 2 {
            return Err(Error::InvalidInstance(format!(
                "horizon must be at least 2, got {horizon}"
            )));
        }
        Ok(Self {
            mus,
            horizon,
            reward_model,
        })
    }

    /// Same arms, different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.mus.clone(), horizon, self.reward_model)
    }

    pub fn k(&self) -> usize {
        self.mus.len()
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn mu(&self, arm: usize) -> f64 {
        self.mus[arm]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn reward_model(&self) -> RewardModel {
        self.reward_model
    }

    pub fn mu_star(&self) -> f64 {
        self.mus.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index arm attaining μ*.
    pub fn best_arm(&self) -> usize {
        let mu_star = self.mu_star();
        self.mus.iter().position(|&mu| mu == mu_star).unwrap_or(0)
    }

    /// The arm attaining μ*, if it is unique.
    pub fn unique_best_arm(&self) -> Option<usize> {
        let mu_star = self.mu_star();
        let mut maximizers = self.mus.iter().enumerate().filter(|(_, &mu)| mu == mu_star);
        let first = maximizers.next().map(|(i, _)| i);
        match maximizers.next() {
            Some(_) => None,
            None => first,
        }
    }

    pub(crate) fn check_arm(&self, arm: usize) -> Result<()> {
        if arm < self.k() {
            Ok(())
        } else {
            Err(Error::ArmOutOfRange { arm, k: self.k() })
        }
    }
}

/// Pure click-rate strategies, one per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile(Vec<f64>);

impl StrategyProfile {
    pub fn new(strategies: Vec<f64>) -> Result<Self> {
        if let Some((i, s)) = strategies
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(Error::InvalidProfile(format!(
                "strategy of arm {i} is {s}, outside of [0, 1]"
            )));
        }
        Ok(Self(strategies))
    }

    /// Every arm plays `s`.
    pub fn uniform(k: usize, s: f64) -> Result<Self> {
        Self::new(vec![s; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, arm: usize) -> f64 {
        self.0[arm]
    }

    /// Unilateral deviation of `arm` to `s`.
    pub fn with_strategy(&self, arm: usize, s: f64) -> Result<Self> {
        if arm >= self.len() {
            return Err(Error::ArmOutOfRange { arm, k: self.len() });
        }
        let mut next = self.0.clone();
        next[arm] = s;
        Self::new(next)
    }

    pub(crate) fn check_len(&self, k: usize) -> Result<()> {
        if self.len() == k {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: k,
                got: self.len(),
            })
        }
    }
}

/// What happened after recommending an arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickOutcome {
    pub clicked: bool,
    /// Post-click reward; present iff `clicked`.
    pub reward: Option<f64>,
}

impl ClickOutcome {
    pub fn missed() -> Self {
        Self {
            clicked: false,
            reward: None,
        }
    }

    pub fn clicked(reward: f64) -> Self {
        Self {
            clicked: true,
            reward: Some(reward),
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.clicked == self.reward.is_some()
    }
}

/// Draws the click and, on a click, the post-click reward for `arm`.
///
/// Exactly two uniforms are consumed per call whether or not the arm is
/// clicked, so that streams stay aligned across strategy perturbations.
pub fn sample_round<R: Rng + ?Sized>(
    instance: &Instance,
    profile: &StrategyProfile,
    arm: usize,
    rng: &mut R,
) -> Result<ClickOutcome> {
    instance.check_arm(arm)?;
    profile.check_len(instance.k())?;
    Ok(draw_outcome(
        instance.reward_model,
        profile.get(arm),
        instance.mu(arm),
        rng,
    ))
}

#[inline]
pub(crate) fn draw_outcome<R: Rng + ?Sized>(
    model: RewardModel,
    s: f64,
    mu: f64,
    rng: &mut R,
) -> ClickOutcome {
    let u_click: f64 = rng.random();
    let u_reward: f64 = rng.random();
    if u_click < s {
        let reward = match model {
            RewardModel::Bernoulli => {
                if u_reward < mu {
                    1.0
                } else {
                    0.0
                }
            }
        };
        ClickOutcome::clicked(reward)
    } else {
        ClickOutcome::missed()
    }
}

/// Stream tags separating the independent randomness consumers.
pub mod role {
    /// Per-arm click/reward stream within an episode (index = arm).
    pub const ARM_ENV: u64 = 1;
    /// Mechanism-internal randomness (uniform selection).
    pub const MECHANISM: u64 = 2;
    /// Monte-Carlo replicate (index = replicate).
    pub const REPLICATE: u64 = 3;
    /// The recorded episode of an epoch.
    pub const EPISODE: u64 = 4;
    /// Gradient estimate of an arm (index = arm).
    pub const GRADIENT: u64 = 5;
    /// Best-response sweep (index = arm).
    pub const BEST_RESPONSE: u64 = 6;
    /// Iterated best-response pass (index = pass).
    pub const PASS: u64 = 7;
    /// Certification sweep (index = arm).
    pub const CERTIFY: u64 = 8;
    /// One epoch of a gradient-ascent run.
    pub const EPOCH: u64 = 9;
    /// One point of a horizon/offset sweep.
    pub const SWEEP: u64 = 10;
}

/// 256-bit key of an independent ChaCha stream.
///
/// Distinct word tuples give distinct keys, so `derive` is injective.
/// `fork` derives child keys through the ChaCha block function itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u64; 4]);

impl StreamKey {
    pub const fn new(words: [u64; 4]) -> Self {
        Self(words)
    }

    /// Key for `(base_seed, run, epoch, role)`.
    pub const fn derive(base_seed: u64, run: u64, epoch: u64, role: u64) -> Self {
        Self([base_seed, run, epoch, role])
    }

    pub fn words(&self) -> [u64; 4] {
        self.0
    }

    fn bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (chunk, word) in out.chunks_exact_mut(8).zip(self.0) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        out
    }

    /// Child key for `(tag, index)`.
    pub fn fork(&self, tag: u64, index: u64) -> StreamKey {
        let mut rng = ChaCha8Rng::from_seed(self.bytes());
        rng.set_stream(tag);
        // 8 words of 32 bits per child key.
        rng.set_word_pos(u128::from(index) * 8);
        StreamKey([rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()])
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.bytes())
    }
}

impl From<u64> for StreamKey {
    fn from(seed: u64) -> Self {
        StreamKey([seed, 0, 0, 0])
    }
}
