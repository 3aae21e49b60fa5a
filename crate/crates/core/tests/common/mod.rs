//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use clickbandit::env::ClickOutcome;
use clickbandit::mech::{Mechanism, MechanismKind, Privileged, Selection};
use clickbandit::utility::UtilitySpec;

/// Penalized utility written out directly, without the library.
pub fn penalized(s: f64, mu: f64, lambda: f64) -> f64 {
    s * mu - lambda * (s - mu) * (s - mu)
}

/// Maximizer of `penalized(·, mu)` over [0, 1], from the first-order condition.
pub fn penalized_sstar(mu: f64, lambda: f64) -> f64 {
    ((1.0 + 1.0 / (2.0 * lambda)) * mu).min(1.0)
}

/// Per-pull strategic regret of each arm under the penalized utility.
pub fn regret_per_pull(mus: &[f64], strategies: &[f64], lambda: f64) -> Vec<f64> {
    let mu_star = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = penalized(penalized_sstar(mu_star, lambda), mu_star, lambda);
    mus.iter().zip(strategies).map(|(&mu, &s)| best - penalized(s, mu, lambda)).collect()
}

/// Exact expected strategic regret over one episode, by enumerating every
/// selection branch and every Bernoulli click/reward outcome.
pub fn exact_expected_regret(kind: MechanismKind, mus: &[f64], strategies: &[f64], horizon: usize, lambda: f64) -> f64 {
    let spec = UtilitySpec::penalized(lambda).unwrap();
    let privileged = Privileged {
        mus: Some(mus.to_vec()),
        strategies: Some(strategies.to_vec()),
    };
    let mech = Mechanism::new(kind, mus.len(), horizon, spec, Some(&privileged)).unwrap();
    let per_pull = regret_per_pull(mus, strategies, lambda);
    expand(&mech, mus, strategies, &per_pull, horizon)
}

fn expand(mech: &Mechanism, mus: &[f64], strategies: &[f64], per_pull: &[f64], rounds_left: usize) -> f64 {
    if rounds_left == 0 {
        return 0.0;
    }
    let k = mus.len();
    let branches: Vec<(usize, f64)> = match mech.selection() {
        Selection::Arm(i) => vec![(i, 1.0)],
        Selection::UniformOverAll => (0..k).map(|i| (i, 1.0 / k as f64)).collect(),
    };
    let mut total = 0.0;
    for (arm, p_arm) in branches {
        let (s, mu) = (strategies[arm], mus[arm]);
        let outcomes = [
            (ClickOutcome::missed(), 1.0 - s),
            (ClickOutcome::clicked(1.0), s * mu),
            (ClickOutcome::clicked(0.0), s * (1.0 - mu)),
        ];
        for (outcome, p) in outcomes {
            if p == 0.0 {
                continue;
            }
            let mut next = mech.clone();
            next.observe(arm, &outcome).unwrap();
            total += p_arm * p * (per_pull[arm] + expand(&next, mus, strategies, per_pull, rounds_left - 1));
        }
    }
    total
}
