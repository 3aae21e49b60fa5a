//! Mechanisms: UCB with screening (UCB-S) and the incentive-unaware baselines.
//!
//! All mechanisms share one sequential interface: [`Mechanism::select`] picks
//! the arm to recommend and [`Mechanism::observe`] feeds back the click
//! outcome. UCB-S selects optimistically by post-click reward among the
//! active arms and, after each observation, screens the pulled arm: the arm is
//! dropped for good when its click-rate confidence interval lies entirely
//! below or above the image of its reward confidence interval under `s*`.
//! When every arm has been dropped, selection falls back to uniform over all
//! arms.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::env::ClickOutcome;
use crate::error::{Error, Result};
use crate::utility::UtilitySpec;

/// Relative tolerance when comparing learner utilities for the (μ,s)-oracle.
const UTILITY_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    /// UCB with screening.
    UcbS,
    /// Standard UCB on post-click rewards, no screening.
    Ucb,
    /// Always plays the arm with the largest μ.
    MuOracle,
    /// Always plays the arm with the largest u(sᵢ, μᵢ), ties to larger μ.
    MuSOracle,
    /// Uniform over all arms every round.
    Uniform,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::UcbS,
        MechanismKind::Ucb,
        MechanismKind::MuOracle,
        MechanismKind::MuSOracle,
        MechanismKind::Uniform,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            MechanismKind::UcbS => "ucbs",
            MechanismKind::Ucb => "ucb",
            MechanismKind::MuOracle => "mu-oracle",
            MechanismKind::MuSOracle => "mus-oracle",
            MechanismKind::Uniform => "uniform",
        }
    }

    pub fn needs_mus(&self) -> bool {
        matches!(self, MechanismKind::MuOracle | MechanismKind::MuSOracle)
    }

    pub fn needs_strategies(&self) -> bool {
        matches!(self, MechanismKind::MuSOracle)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for MechanismKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| {
                format!("unknown mechanism `{s}` (expected one of: ucbs, ucb, mu-oracle, mus-oracle, uniform)")
            })
    }
}

/// Oracle knowledge handed to the oracle mechanisms at construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Privileged {
    pub mus: Option<Vec<f64>>,
    pub strategies: Option<Vec<f64>>,
}

/// Pessimistic and optimistic estimates of an arm's click-rate and
/// post-click reward. Infinite when the relevant count is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBounds {
    pub s_lo: f64,
    pub s_hi: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    /// Times selected, n(i).
    pub pulls: u64,
    /// Clicks, which equals the number of observed rewards m(i).
    pub clicks: u64,
    pub reward_sum: f64,
}

impl ArmStats {
    pub fn s_hat(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.clicks as f64 / self.pulls as f64)
    }

    pub fn mu_hat(&self) -> Option<f64> {
        (self.clicks > 0).then(|| self.reward_sum / self.clicks as f64)
    }
}

/// The selection rule for the upcoming round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Arm(usize),
    UniformOverAll,
}

/// True iff the click-rate interval misses `[min s*, max s*]` over the
/// reward interval clamped to `[0, 1]`.
///
/// With nondecreasing `s*` the extremes sit at the clamped endpoints. No
/// screening happens before a reward has been observed.
pub fn screening_rule(bounds: &ConfidenceBounds, utility: &UtilitySpec) -> bool {
    if !(bounds.mu_lo.is_finite() && bounds.mu_hi.is_finite()) {
        return false;
    }
    let lo = bounds.mu_lo.clamp(0.0, 1.0);
    let hi = bounds.mu_hi.clamp(0.0, 1.0);
    bounds.s_hi < utility.sstar(lo) || bounds.s_lo > utility.sstar(hi)
}

#[derive(Debug, Clone)]
pub struct Mechanism {
    kind: MechanismKind,
    utility: UtilitySpec,
    horizon: usize,
    /// 2 ln T, shared by every confidence radius.
    two_log_horizon: f64,
    stats: Vec<ArmStats>,
    mu_upper: Vec<f64>,
    active: Vec<bool>,
    active_count: usize,
    round: usize,
    fixed_choice: Option<usize>,
}

impl Mechanism {
    pub fn new(
        kind: MechanismKind,
        k: usize,
        horizon: usize,
        utility: UtilitySpec,
        privileged: Option<&Privileged>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInstance("at least one arm is required".into()));
        }
        if horizon < 2 {
            return Err(Error::InvalidInstance(format!(
                "horizon must be at least 2, got {horizon}"
            )));
        }
        let fixed_choice = match kind {
            MechanismKind::MuOracle => {
                let mus = oracle_vec(kind, privileged.and_then(|p| p.mus.as_deref()), k, "mus")?;
                Some(argmax_lowest(mus))
            }
            MechanismKind::MuSOracle => {
                let mus = oracle_vec(kind, privileged.and_then(|p| p.mus.as_deref()), k, "mus")?;
                let strategies = oracle_vec(
                    kind,
                    privileged.and_then(|p| p.strategies.as_deref()),
                    k,
                    "strategies",
                )?;
                Some(mus_oracle_choice(&utility, mus, strategies))
            }
            _ => None,
        };
        Ok(Self {
            kind,
            utility,
            horizon,
            two_log_horizon: 2.0 * (horizon as f64).ln(),
            stats: vec![ArmStats::default(); k],
            mu_upper: vec![f64::INFINITY; k],
            active: vec![true; k],
            active_count: k,
            round: 0,
            fixed_choice,
        })
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.stats.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Rounds observed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    pub fn is_active(&self, arm: usize) -> bool {
        self.active[arm]
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    fn radius(&self, count: u64) -> f64 {
        (self.two_log_horizon / count as f64).sqrt()
    }

    pub fn confidence_bounds(&self, arm: usize) -> ConfidenceBounds {
        let st = &self.stats[arm];
        let (s_lo, s_hi) = match st.s_hat() {
            Some(s) => {
                let r = self.radius(st.pulls);
                (s - r, s + r)
            }
            None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let (mu_lo, mu_hi) = match st.mu_hat() {
            Some(mu) => {
                let r = self.radius(st.clicks);
                (mu - r, mu + r)
            }
            None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        ConfidenceBounds {
            s_lo,
            s_hi,
            mu_lo,
            mu_hi,
        }
    }

    pub fn screening_triggered(&self, arm: usize) -> bool {
        screening_rule(&self.confidence_bounds(arm), &self.utility)
    }

    /// How the next arm will be chosen.
    pub fn selection(&self) -> Selection {
        if let Some(arm) = self.fixed_choice {
            return Selection::Arm(arm);
        }
        match self.kind {
            MechanismKind::Uniform => Selection::UniformOverAll,
            MechanismKind::UcbS if self.active_count == 0 => Selection::UniformOverAll,
            MechanismKind::UcbS => Selection::Arm(self.optimistic_arm(true)),
            _ => Selection::Arm(self.optimistic_arm(false)),
        }
    }

    // Largest upper reward bound, lowest index on ties.
    fn optimistic_arm(&self, active_only: bool) -> usize {
        let mut best = usize::MAX;
        let mut best_index = f64::NEG_INFINITY;
        for (arm, &index) in self.mu_upper.iter().enumerate() {
            if active_only && !self.active[arm] {
                continue;
            }
            if best == usize::MAX || index > best_index {
                best = arm;
                best_index = index;
            }
        }
        best
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        debug_assert!(self.round < self.horizon, "select called after the horizon");
        match self.selection() {
            Selection::Arm(arm) => arm,
            Selection::UniformOverAll => rng.random_range(0..self.k()),
        }
    }

    /// Records the outcome of pulling `arm`. Returns true if the arm was
    /// screened out this round.
    pub fn observe(&mut self, arm: usize, outcome: &ClickOutcome) -> Result<bool> {
        if arm >= self.k() {
            return Err(Error::ArmOutOfRange { arm, k: self.k() });
        }
        if !outcome.is_consistent() {
            return Err(Error::InconsistentOutcome {
                clicked: outcome.clicked,
                reward_present: outcome.reward.is_some(),
            });
        }
        let st = &mut self.stats[arm];
        st.pulls += 1;
        if let Some(reward) = outcome.reward {
            st.clicks += 1;
            st.reward_sum += reward;
            let (clicks, mean) = (st.clicks, st.reward_sum / st.clicks as f64);
            self.mu_upper[arm] = mean + self.radius(clicks);
        }
        self.round += 1;

        let eliminated = self.kind == MechanismKind::UcbS
            && self.active[arm]
            && self.screening_triggered(arm);
        if eliminated {
            self.active[arm] = false;
            self.active_count -= 1;
        }
        Ok(eliminated)
    }
}

fn oracle_vec<'a>(
    kind: MechanismKind,
    data: Option<&'a [f64]>,
    k: usize,
    what: &'static str,
) -> Result<&'a [f64]> {
    let name = match kind {
        MechanismKind::MuOracle => "mu-oracle",
        _ => "mus-oracle",
    };
    let data = data.ok_or(Error::MissingPrivileged(name, what))?;
    if data.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: data.len(),
        });
    }
    Ok(data)
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn mus_oracle_choice(utility: &UtilitySpec, mus: &[f64], strategies: &[f64]) -> usize {
    let mut best = 0;
    let mut best_u = utility.value(strategies[0], mus[0]);
    for i in 1..mus.len() {
        let u = utility.value(strategies[i], mus[i]);
        let tol = UTILITY_TIE_TOLERANCE * best_u.abs().max(u.abs()).max(1.0);
        if u > best_u + tol || ((u - best_u).abs() <= tol && mus[i] > mus[best]) {
            best = i;
            best_u = u;
        }
    }
    best
}
