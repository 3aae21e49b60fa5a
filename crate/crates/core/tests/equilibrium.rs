mod common;

use clickbandit::arms::{best_response, certify_epsilon_ne, iterated_best_response, mc_arm_utility, Game};
use clickbandit::env::{role, Instance, RewardModel, StrategyProfile, StreamKey};
use clickbandit::mech::MechanismKind;
use clickbandit::utility::UtilitySpec;

use common::penalized_sstar;

fn game(mus: &[f64], horizon: usize) -> Game {
    let instance = Instance::new(mus.to_vec(), horizon, RewardModel::Bernoulli).unwrap();
    Game::new(instance, UtilitySpec::penalized(5.0).unwrap(), MechanismKind::UcbS)
}

#[test]
fn best_response_matches_high_precision_grid() {
    let g = game(&[0.75], 2000);
    let profile = StrategyProfile::new(vec![0.825]).unwrap();
    let step = 0.01;
    let br = best_response(&g, &profile, 0, step, 10, StreamKey::from(3)).unwrap();

    // Exhaustive grid at ten times the replicates, on independent streams.
    let seed = StreamKey::derive(17, 0, 0, role::REPLICATE);
    let values: Vec<f64> = (0..=100)
        .map(|j| {
            let p = StrategyProfile::new(vec![j as f64 * step]).unwrap();
            mc_arm_utility(&g, &p, 0, 100, seed).unwrap().mean
        })
        .collect();
    let argmax = (0..values.len()).rev().max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    assert!(
        (br.strategy - argmax as f64 * step).abs() <= 2.0 * step + 1e-9,
        "best response {} vs high-precision argmax {}",
        br.strategy,
        argmax as f64 * step
    );
}

#[test]
fn ibr_under_ucbs_stays_above_desired_strategies() {
    let mus = [0.75, 0.7];
    let step = 0.01;
    let g = game(&mus, 2000);
    let init = StrategyProfile::uniform(2, 1.0).unwrap();
    let out = iterated_best_response(&g, &init, 10, step, 10, StreamKey::from(5)).unwrap();
    assert!(out.converged);
    for (arm, &mu) in mus.iter().enumerate() {
        let s = out.profile.get(arm);
        assert!(s >= penalized_sstar(mu, 5.0) - step, "arm {arm} at {s}");
    }

    let cert = certify_epsilon_ne(&g, &out.profile, 0.02 * 2000.0, step, 10, StreamKey::from(6)).unwrap();
    assert!(cert.certified(), "max gain {} se {}", cert.max_gain(), cert.max_std_error());
}
