//! Episode runner and learner/arm-side metrics.

use rand_chacha::ChaCha8Rng;

use crate::env::{draw_outcome, role, Instance, StrategyProfile, StreamKey};
use crate::error::{Error, Result};
use crate::mech::{Mechanism, MechanismKind, Privileged};
use crate::utility::UtilitySpec;

/// How much of an episode to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recording {
    /// Every round.
    Full,
    /// Per-arm totals and elimination rounds only.
    #[default]
    Summary,
}

impl std::str::FromStr for Recording {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(Recording::Full),
            "summary" => Ok(Recording::Summary),
            other => Err(format!("unknown granularity `{other}` (expected: full, summary)")),
        }
    }
}

impl std::fmt::Display for Recording {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Recording::Full => "full",
            Recording::Summary => "summary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    /// Zero-based round index.
    pub t: usize,
    pub arm: usize,
    pub clicked: bool,
    pub reward: Option<f64>,
    /// Active arms after the round.
    pub active_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Empty unless recorded with [`Recording::Full`].
    pub records: Vec<RoundRecord>,
    pub pulls: Vec<u64>,
    pub clicks: Vec<u64>,
    /// Zero-based round in which the arm was screened out.
    pub elimination_round: Vec<Option<usize>>,
    pub horizon: usize,
}

impl Trace {
    pub fn k(&self) -> usize {
        self.pulls.len()
    }

    pub fn eliminated(&self, arm: usize) -> bool {
        self.elimination_round[arm].is_some()
    }

    pub fn any_eliminated(&self) -> bool {
        self.elimination_round.iter().any(Option::is_some)
    }

    pub fn total_clicks(&self) -> u64 {
        self.clicks.iter().sum()
    }
}

/// Oracle data for the given kind, taken from the true environment.
pub fn privileged_for(
    kind: MechanismKind,
    instance: &Instance,
    profile: &StrategyProfile,
) -> Option<Privileged> {
    (kind.needs_mus() || kind.needs_strategies()).then(|| Privileged {
        mus: Some(instance.mus().to_vec()),
        strategies: kind.needs_strategies().then(|| profile.as_slice().to_vec()),
    })
}

/// Plays one `T`-round episode: select, sample, observe.
///
/// Arm `i`'s clicks and rewards come from its own stream, so the j-th pull
/// of an arm sees the same uniforms whatever the other arms do.
pub fn run_episode(
    instance: &Instance,
    kind: MechanismKind,
    profile: &StrategyProfile,
    utility: &UtilitySpec,
    seed: StreamKey,
    recording: Recording,
) -> Result<Trace> {
    profile.check_len(instance.k())?;
    let privileged = privileged_for(kind, instance, profile);
    let mut mech = Mechanism::new(
        kind,
        instance.k(),
        instance.horizon(),
        *utility,
        privileged.as_ref(),
    )?;
    let mut arm_rngs: Vec<ChaCha8Rng> = (0..instance.k() as u64)
        .map(|arm| seed.fork(role::ARM_ENV, arm).rng())
        .collect();
    let mut mech_rng = seed.fork(role::MECHANISM, 0).rng();

    let horizon = instance.horizon();
    let mut elimination_round = vec![None; instance.k()];
    let mut records = match recording {
        Recording::Full => Vec::with_capacity(horizon),
        Recording::Summary => Vec::new(),
    };
    let model = instance.reward_model();
    for t in 0..horizon {
        let arm = mech.select(&mut mech_rng);
        let outcome = draw_outcome(model, profile.get(arm), instance.mu(arm), &mut arm_rngs[arm]);
        if mech.observe(arm, &outcome)? {
            elimination_round[arm] = Some(t);
        }
        if recording == Recording::Full {
            records.push(RoundRecord {
                t,
                arm,
                clicked: outcome.clicked,
                reward: outcome.reward,
                active_count: mech.active_count(),
            });
        }
    }

    Ok(Trace {
        records,
        pulls: mech.stats().iter().map(|s| s.pulls).collect(),
        clicks: mech.stats().iter().map(|s| s.clicks).collect(),
        elimination_round,
        horizon,
    })
}

/// Per-pull regret `u(s*, μ*) − u(sᵢ, μᵢ)` of each arm.
pub fn regret_per_pull(
    instance: &Instance,
    profile: &StrategyProfile,
    utility: &UtilitySpec,
) -> Result<Vec<f64>> {
    profile.check_len(instance.k())?;
    let benchmark = utility.ustar(instance.mu_star());
    Ok(instance
        .mus()
        .iter()
        .zip(profile.as_slice())
        .map(|(&mu, &s)| benchmark - utility.value(s, mu))
        .collect())
}

fn check_trace(trace: &Trace, instance: &Instance) -> Result<()> {
    if trace.k() != instance.k() {
        return Err(Error::DimensionMismatch {
            expected: instance.k(),
            got: trace.k(),
        });
    }
    Ok(())
}

fn weighted_regret(counts: &[u64], per_pull: &[f64]) -> f64 {
    counts
        .iter()
        .zip(per_pull)
        .fold(0.0, |acc, (&n, &g)| acc + n as f64 * g)
}

/// Σₜ [u(s*, μ*) − u(s_{iₜ}, μ_{iₜ})]: expected regret given the realized
/// arm sequence. Realized clicks and rewards do not enter.
pub fn strategic_regret(
    trace: &Trace,
    instance: &Instance,
    profile: &StrategyProfile,
    utility: &UtilitySpec,
) -> Result<f64> {
    check_trace(trace, instance)?;
    let per_pull = regret_per_pull(instance, profile, utility)?;
    Ok(weighted_regret(&trace.pulls, &per_pull))
}

/// Realized clicks of `arm`.
pub fn arm_clicks(trace: &Trace, arm: usize) -> u64 {
    trace.clicks[arm]
}

/// Cumulative regret after each round; the last element equals
/// [`strategic_regret`] exactly.
pub fn regret_curve(
    trace: &Trace,
    instance: &Instance,
    profile: &StrategyProfile,
    utility: &UtilitySpec,
) -> Result<Vec<f64>> {
    check_trace(trace, instance)?;
    if trace.records.len() != trace.horizon {
        return Err(Error::MissingRecords);
    }
    let per_pull = regret_per_pull(instance, profile, utility)?;
    let mut counts = vec![0u64; instance.k()];
    Ok(trace
        .records
        .iter()
        .map(|r| {
            counts[r.arm] += 1;
            weighted_regret(&counts, &per_pull)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RewardModel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lambda5() -> UtilitySpec {
        UtilitySpec::penalized(5.0).unwrap()
    }

    fn inst(mus: &[f64], horizon: usize) -> Instance {
        Instance::new(mus.to_vec(), horizon, RewardModel::Bernoulli).unwrap()
    }

    fn truthful(instance: &Instance, u: &UtilitySpec) -> StrategyProfile {
        StrategyProfile::new(instance.mus().iter().map(|&m| u.sstar(m)).collect()).unwrap()
    }

    #[test]
    fn uniform_single_arm_gets_every_round() {
        let i = inst(&[0.4], 500);
        let p = StrategyProfile::new(vec![0.3]).unwrap();
        let tr = run_episode(&i, MechanismKind::Uniform, &p, &lambda5(), 1.into(), Recording::Full).unwrap();
        assert_eq!(tr.pulls, vec![500]);
        assert_eq!(tr.records.len(), 500);
        assert!(tr.records.windows(2).all(|w| w[1].t == w[0].t + 1));
    }

    #[test]
    fn mu_oracle_plays_best_arm() {
        let i = inst(&[0.5, 0.7], 300);
        let p = StrategyProfile::new(vec![1.0, 1.0]).unwrap();
        let tr = run_episode(&i, MechanismKind::MuOracle, &p, &lambda5(), 9.into(), Recording::Summary).unwrap();
        assert_eq!(tr.pulls, vec![0, 300]);
        assert_eq!(arm_clicks(&tr, 0), 0);
        assert_eq!(arm_clicks(&tr, 1), 300);
    }

    #[test]
    fn oracle_regret_is_beta_times_horizon() {
        let u = lambda5();
        let i = inst(&[0.75, 0.6], 1000);
        let p = StrategyProfile::new(vec![1.0, 0.66]).unwrap();
        let tr = run_episode(&i, MechanismKind::MuOracle, &p, &u, 0.into(), Recording::Full).unwrap();
        let r = strategic_regret(&tr, &i, &p, &u).unwrap();
        assert_abs_diff_eq!(r, 153.125, epsilon = 1e-9);
        let curve = regret_curve(&tr, &i, &p, &u).unwrap();
        assert_eq!(*curve.last().unwrap(), r);
        for (t, c) in curve.iter().enumerate() {
            assert_abs_diff_eq!(*c, 0.153125 * (t + 1) as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn regret_two_terms() {
        let u = lambda5();
        let i = inst(&[0.75, 0.7], 2);
        let p = StrategyProfile::new(vec![0.825, 0.77]).unwrap();
        let tr = Trace {
            records: vec![
                RoundRecord { t: 0, arm: 0, clicked: true, reward: Some(1.0), active_count: 2 },
                RoundRecord { t: 1, arm: 1, clicked: false, reward: None, active_count: 2 },
            ],
            pulls: vec![1, 1],
            clicks: vec![1, 0],
            elimination_round: vec![None, None],
            horizon: 2,
        };
        assert_abs_diff_eq!(strategic_regret(&tr, &i, &p, &u).unwrap(), 0.076125, epsilon = 1e-12);
        let curve = regret_curve(&tr, &i, &p, &u).unwrap();
        assert_abs_diff_eq!(curve[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn truthful_single_arm_has_zero_regret() {
        let u = lambda5();
        let i = inst(&[0.6], 200);
        let p = truthful(&i, &u);
        let tr = run_episode(&i, MechanismKind::UcbS, &p, &u, 3.into(), Recording::Full).unwrap();
        assert_eq!(strategic_regret(&tr, &i, &p, &u).unwrap(), 0.0);
        assert!(regret_curve(&tr, &i, &p, &u).unwrap().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn clicks_with_full_click_rate() {
        let i = inst(&[0.5, 0.5], 400);
        let p = StrategyProfile::new(vec![1.0, 1.0]).unwrap();
        let tr = run_episode(&i, MechanismKind::Uniform, &p, &lambda5(), 4.into(), Recording::Summary).unwrap();
        assert_eq!(tr.clicks, tr.pulls);
    }

    #[test]
    fn summary_traces_have_no_curve() {
        let i = inst(&[0.5], 10);
        let p = StrategyProfile::new(vec![0.5]).unwrap();
        let tr = run_episode(&i, MechanismKind::Ucb, &p, &lambda5(), 4.into(), Recording::Summary).unwrap();
        assert!(matches!(regret_curve(&tr, &i, &p, &lambda5()), Err(Error::MissingRecords)));
    }

    #[test]
    fn mismatched_profile() {
        let i = inst(&[0.5, 0.4], 10);
        let p = StrategyProfile::new(vec![0.5]).unwrap();
        assert!(run_episode(&i, MechanismKind::Ucb, &p, &lambda5(), 0.into(), Recording::Summary).is_err());
    }

    #[test]
    fn uniform_clicks_match_binomial() {
        // Per arm: mean T·½·½ = 2500, sd of one episode sqrt(T·¼·½) (selection and click both random).
        let u = lambda5();
        let i = inst(&[0.5, 0.5], 10_000);
        let p = StrategyProfile::new(vec![0.5, 0.5]).unwrap();
        let seeds = 100;
        let mut mean = [0.0; 2];
        for seed in 0..seeds {
            let tr = run_episode(&i, MechanismKind::Uniform, &p, &u, seed.into(), Recording::Summary).unwrap();
            for (arm, m) in mean.iter_mut().enumerate() {
                *m += arm_clicks(&tr, arm) as f64 / seeds as f64;
            }
        }
        let sd = (10_000.0f64 * 0.25 * 0.5).sqrt();
        for m in mean {
            assert!((m - 2500.0).abs() <= 3.0 * sd, "mean clicks {m}");
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let u = lambda5();
        let i = inst(&[0.75, 0.725, 0.7, 0.675], 3000);
        let p = StrategyProfile::new(vec![0.9, 0.8, 0.95, 0.5]).unwrap();
        for kind in [MechanismKind::UcbS, MechanismKind::Ucb, MechanismKind::Uniform] {
            let a = run_episode(&i, kind, &p, &u, 77.into(), Recording::Full).unwrap();
            let b = run_episode(&i, kind, &p, &u, 77.into(), Recording::Full).unwrap();
            assert_eq!(a, b);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn episode_invariants(
            seed in any::<u64>(),
            strategies in proptest::collection::vec(0.0f64..=1.0, 1..5),
            kind_idx in 0usize..5,
            horizon in 2usize..400,
        ) {
            let u = lambda5();
            let k = strategies.len();
            let mus: Vec<f64> = (0..k).map(|i| 0.3 + 0.1 * i as f64).collect();
            let i = inst(&mus, horizon);
            let p = StrategyProfile::new(strategies).unwrap();
            let kind = MechanismKind::ALL[kind_idx];
            let tr = run_episode(&i, kind, &p, &u, seed.into(), Recording::Full).unwrap();

            prop_assert_eq!(tr.pulls.iter().sum::<u64>() as usize, horizon);
            for arm in 0..k {
                prop_assert!(arm_clicks(&tr, arm) <= tr.pulls[arm]);
            }
            let clicked_rounds = tr.records.iter().filter(|r| r.clicked).count() as u64;
            prop_assert_eq!(tr.total_clicks(), clicked_rounds);
            prop_assert!(tr.records.iter().all(|r| r.clicked == r.reward.is_some()));
            prop_assert!(tr.records.windows(2).all(|w| w[1].active_count <= w[0].active_count));
            if kind != MechanismKind::UcbS {
                prop_assert!(!tr.any_eliminated());
            }

            let curve = regret_curve(&tr, &i, &p, &u).unwrap();
            let total = strategic_regret(&tr, &i, &p, &u).unwrap();
            prop_assert_eq!(*curve.last().unwrap(), total);
            let benchmark = u.ustar(i.mu_star());
            let worst = i.mus().iter()
                .flat_map(|&mu| [u.value(0.0, mu), u.value(1.0, mu)])
                .fold(f64::INFINITY, f64::min);
            let mut prev = 0.0;
            for &c in &curve {
                prop_assert!(c >= prev);
                prop_assert!(c - prev <= benchmark - worst + 1e-12);
                prev = c;
            }
        }
    }
}
