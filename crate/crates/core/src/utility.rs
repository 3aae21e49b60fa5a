//! The learner's utility `u(s, μ)` and the quantities derived from it.
//!
//! Two families are built in:
//!
//! - `Greedy`: `u(s, μ) = sμ`, maximized by `s = 1`.
//! - `Penalized(λ)`: `u(s, μ) = sμ − λ(s − μ)²`, maximized by
//!   `s*(μ) = min{(1 + 1/(2λ))μ, 1}`.
//!
//! Both have a nondecreasing desired strategy `s*`, which the screening rule
//! relies on to evaluate its thresholds at interval endpoints.

use std::fmt;

use crate::env::Instance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind {
    Greedy,
    Penalized { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec {
    kind: UtilityKind,
    /// Declared ℓ1-Lipschitz constant of `u`.
    lipschitz_l: f64,
    /// Declared Lipschitz constant of `s*`.
    lipschitz_h: f64,
}

impl UtilitySpec {
    pub fn greedy() -> Self {
        Self {
            kind: UtilityKind::Greedy,
            lipschitz_l: 1.0,
            lipschitz_h: 0.0,
        }
    }

    pub fn penalized(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidUtility(format!(
                "penalty weight must be positive and finite, got {lambda}"
            )));
        }
        // |∂u/∂s| and |∂u/∂μ| are both at most 1 + 2λ on the unit square.
        Ok(Self {
            kind: UtilityKind::Penalized { lambda },
            lipschitz_l: 1.0 + 2.0 * lambda,
            lipschitz_h: 1.0 + 1.0 / (2.0 * lambda),
        })
    }

    pub fn from_kind(kind: UtilityKind) -> Result<Self> {
        match kind {
            UtilityKind::Greedy => Ok(Self::greedy()),
            UtilityKind::Penalized { lambda } => Self::penalized(lambda),
        }
    }

    /// Overrides the declared Lipschitz constants.
    pub fn with_constants(mut self, lipschitz_l: f64, lipschitz_h: f64) -> Self {
        self.lipschitz_l = lipschitz_l;
        self.lipschitz_h = lipschitz_h;
        self
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn lipschitz_l(&self) -> f64 {
        self.lipschitz_l
    }

    pub fn lipschitz_h(&self) -> f64 {
        self.lipschitz_h
    }

    /// `u(s, μ)` with domain checks.
    pub fn utility(&self, s: f64, mu: f64) -> Result<f64> {
        check_unit("s", s)?;
        check_unit("mu", mu)?;
        Ok(self.value(s, mu))
    }

    /// `u(s, μ)` without domain checks.
    #[inline]
    pub fn value(&self, s: f64, mu: f64) -> f64 {
        match self.kind {
            UtilityKind::Greedy => s * mu,
            UtilityKind::Penalized { lambda } => s * mu - lambda * (s - mu) * (s - mu),
        }
    }

    /// `s*(μ) = argmax_s u(s, μ)` over `[0, 1]`.
    pub fn desired_strategy(&self, mu: f64) -> Result<f64> {
        check_unit("mu", mu)?;
        Ok(self.sstar(mu))
    }

    #[inline]
    pub(crate) fn sstar(&self, mu: f64) -> f64 {
        match self.kind {
            UtilityKind::Greedy => 1.0,
            UtilityKind::Penalized { lambda } => ((1.0 + 0.5 / lambda) * mu).min(1.0),
        }
    }

    /// `u*(μ) = max_s u(s, μ)`.
    pub fn max_utility(&self, mu: f64) -> Result<f64> {
        check_unit("mu", mu)?;
        Ok(self.ustar(mu))
    }

    #[inline]
    pub(crate) fn ustar(&self, mu: f64) -> f64 {
        self.value(self.sstar(mu), mu)
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            UtilityKind::Greedy => f.write_str("greedy"),
            UtilityKind::Penalized { lambda } => write!(f, "penalized(lambda={lambda})"),
        }
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}

/// β: what the learner loses when the best arm plays `s = 1` instead of `s*`.
pub fn gap_beta(spec: &UtilitySpec, instance: &Instance) -> f64 {
    let mu_star = instance.mu_star();
    spec.ustar(mu_star) - spec.value(1.0, mu_star)
}

/// η: distance between the best achievable utility and the best utility any
/// other arm could offer.
pub fn gap_eta(spec: &UtilitySpec, instance: &Instance) -> Result<f64> {
    if instance.k() < 2 {
        return Err(Error::UndefinedGap("eta needs at least two arms"));
    }
    let best = instance
        .unique_best_arm()
        .ok_or(Error::UndefinedGap("eta needs a unique best arm"))?;
    let runner_up = instance
        .mus()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &mu)| spec.ustar(mu))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(spec.ustar(instance.mu_star()) - runner_up)
}

/// Δᵢ = μ* − μᵢ.
pub fn optimality_gaps(instance: &Instance) -> Vec<f64> {
    let mu_star = instance.mu_star();
    instance.mus().iter().map(|mu| mu_star - mu).collect()
}

/// Grid estimates of the regularity constants of a utility.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub grid_step: f64,
    pub l_hat: f64,
    pub h_hat: f64,
    pub l_declared: f64,
    pub h_declared: f64,
    pub ustar_monotone: bool,
    pub sstar_min: f64,
}

impl AssumptionReport {
    pub fn l_within_declared(&self) -> bool {
        self.l_hat <= self.l_declared + 1e-9
    }

    pub fn h_within_declared(&self) -> bool {
        self.h_hat <= self.h_declared + 1e-9
    }

    pub fn sstar_bounded_away_from_zero(&self) -> bool {
        self.sstar_min > 0.0
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "grid_step={}", self.grid_step)?;
        writeln!(f, "l_hat={}", self.l_hat)?;
        writeln!(f, "l_declared={}", self.l_declared)?;
        writeln!(f, "l_ok={}", self.l_within_declared())?;
        writeln!(f, "h_hat={}", self.h_hat)?;
        writeln!(f, "h_declared={}", self.h_declared)?;
        writeln!(f, "h_ok={}", self.h_within_declared())?;
        writeln!(f, "ustar_monotone={}", self.ustar_monotone)?;
        writeln!(f, "sstar_min={}", self.sstar_min)?;
        write!(
            f,
            "sstar_bounded_away_from_zero={}",
            self.sstar_bounded_away_from_zero()
        )
    }
}

/// Estimates the Lipschitz constants of `u` and `s*`, checks that `u*` is
/// nondecreasing and reports `min s*` on a uniform grid. Violations are
/// reported, not raised.
pub fn validate_assumptions(spec: &UtilitySpec, grid_step: f64) -> Result<AssumptionReport> {
    if !(grid_step > 0.0 && grid_step <= 0.05) {
        return Err(Error::param("grid_step", format!("must lie in (0, 0.05], got {grid_step}")));
    }
    let grid = unit_grid(grid_step);

    let mut l_hat = 0.0f64;
    for (a, &s0) in grid.iter().enumerate() {
        for (b, &mu0) in grid.iter().enumerate() {
            let u0 = spec.value(s0, mu0);
            if let Some(&s1) = grid.get(a + 1) {
                l_hat = l_hat.max((spec.value(s1, mu0) - u0).abs() / (s1 - s0));
            }
            if let Some(&mu1) = grid.get(b + 1) {
                l_hat = l_hat.max((spec.value(s0, mu1) - u0).abs() / (mu1 - mu0));
            }
        }
    }

    let sstar: Vec<f64> = grid.iter().map(|&mu| spec.sstar(mu)).collect();
    let ustar: Vec<f64> = grid.iter().map(|&mu| spec.ustar(mu)).collect();
    let h_hat = grid
        .windows(2)
        .zip(sstar.windows(2))
        .map(|(mu, s)| (s[1] - s[0]).abs() / (mu[1] - mu[0]))
        .fold(0.0, f64::max);
    let ustar_monotone = ustar.windows(2).all(|w| w[1] >= w[0]);
    let sstar_min = sstar.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(AssumptionReport {
        grid_step,
        l_hat,
        h_hat,
        l_declared: spec.lipschitz_l,
        h_declared: spec.lipschitz_h,
        ustar_monotone,
        sstar_min,
    })
}

/// `{0, step, 2·step, …, 1}`; the last point is exactly 1.
pub(crate) fn unit_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(1.0)).collect();
    if let Some(last) = grid.last_mut() {
        *last = 1.0;
    }
    grid.dedup();
    grid
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

    fn instance(mus: &[f64]) -> Instance {
        Instance::new(mus.to_vec(), 100, RewardModel::Bernoulli).unwrap()
    }

    /// Argmax of `u(·, μ)` over `{0, 0.001, …, 1}` by exhaustive search.
    fn brute_argmax(spec: &UtilitySpec, mu: f64) -> (f64, f64) {
        (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .map(|s| (s, spec.value(s, mu)))
            .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    #[test]
    fn utility_values() {
        let u = lambda5();
        assert_abs_diff_eq!(u.utility(0.825, 0.75).unwrap(), 0.590625, epsilon = 1e-12);
        assert_abs_diff_eq!(u.utility(1.0, 0.75).unwrap(), 0.4375, epsilon = 1e-12);
        for s in [0.0, 0.3, 0.77, 1.0] {
            assert_abs_diff_eq!(u.utility(s, s).unwrap(), s * s, epsilon = 1e-15);
        }
        assert!(matches!(u.utility(1.1, 0.5), Err(Error::Domain { name: "s", .. })));
        assert!(u.utility(0.5, -0.1).is_err());
    }

    #[test]
    fn desired_strategy_values() {
        let u = lambda5();
        assert_abs_diff_eq!(u.desired_strategy(0.75).unwrap(), 0.825, epsilon = 1e-12);
        assert_eq!(UtilitySpec::greedy().desired_strategy(0.4).unwrap(), 1.0);
        assert_eq!(u.desired_strategy(0.95).unwrap(), 1.0);
        let (s, _) = brute_argmax(&u, 0.95);
        assert_eq!(s, 1.0);
        assert!(u.desired_strategy(1.5).is_err());
    }

    #[test]
    fn max_utility_values() {
        let u = lambda5();
        assert_abs_diff_eq!(u.max_utility(0.75).unwrap(), 0.590625, epsilon = 1e-12);
        assert_abs_diff_eq!(u.max_utility(0.7).unwrap(), 0.5145, epsilon = 1e-12);
        assert_eq!(u.max_utility(0.0).unwrap(), 0.0);
        // Interior optimum: μ²(1 + 1/(4λ)).
        assert_abs_diff_eq!(brute_argmax(&u, 0.7).1, 0.5145, epsilon = 1e-5);
    }

    #[test]
    fn beta_values() {
        let u = lambda5();
        assert_abs_diff_eq!(gap_beta(&u, &instance(&[0.75, 0.7])), 0.153125, epsilon = 1e-12);
        assert_abs_diff_eq!(gap_beta(&u, &instance(&[0.8, 0.7])), 0.072, epsilon = 1e-12);
        assert_eq!(gap_beta(&UtilitySpec::greedy(), &instance(&[0.8, 0.3])), 0.0);
    }

    #[test]
    fn eta_values() {
        let u = lambda5();
        assert_abs_diff_eq!(gap_eta(&u, &instance(&[0.8, 0.7])).unwrap(), 0.1575, epsilon = 1e-12);
        assert_abs_diff_eq!(
            gap_eta(&u, &instance(&[0.75, 0.725])).unwrap(),
            0.0387188,
            epsilon = 1e-7
        );
        assert!(gap_eta(&u, &instance(&[0.6, 0.6])).is_err());
        assert!(gap_eta(&u, &instance(&[0.6])).is_err());
    }

    #[test]
    fn gaps() {
        let g = optimality_gaps(&instance(&[0.75, 0.725, 0.7, 0.675]));
        for (got, want) in g.iter().zip([0.0, 0.025, 0.05, 0.075]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(optimality_gaps(&instance(&[0.4, 0.4, 0.4])), vec![0.0; 3]);
        assert_eq!(optimality_gaps(&instance(&[0.9])), vec![0.0]);
    }

    #[test]
    fn assumptions_penalized() {
        let r = validate_assumptions(&lambda5(), 1e-3).unwrap();
        assert!((r.h_hat - 1.1).abs() <= 1e-3, "h_hat={}", r.h_hat);
        assert!(r.h_within_declared());
        assert!(r.l_within_declared(), "l_hat={}", r.l_hat);
        assert!(r.ustar_monotone);
        assert_eq!(r.sstar_min, 0.0);
        assert!(!r.sstar_bounded_away_from_zero());
        let text = r.to_string();
        assert!(text.contains("sstar_bounded_away_from_zero=false"));
    }

    #[test]
    fn assumptions_greedy() {
        let r = validate_assumptions(&UtilitySpec::greedy(), 1e-3).unwrap();
        assert_eq!(r.sstar_min, 1.0);
        assert_eq!(r.h_hat, 0.0);
        assert!(r.l_within_declared());
    }

    #[test]
    fn assumptions_flag_understated_constants() {
        let r = validate_assumptions(&lambda5().with_constants(1.0, 0.5), 0.01).unwrap();
        assert!(!r.l_within_declared());
        assert!(!r.h_within_declared());
    }

    #[test]
    fn bad_grid_step() {
        assert!(validate_assumptions(&lambda5(), 0.0).is_err());
        assert!(validate_assumptions(&lambda5(), 0.1).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = unit_grid(0.1);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(unit_grid(0.01).len(), 101);
    }

    #[test]
    fn argmax_property_on_grid() {
        for spec in [lambda5(), UtilitySpec::penalized(0.7).unwrap(), UtilitySpec::greedy()] {
            for j in 0..=100 {
                let mu = j as f64 / 100.0;
                let best = spec.ustar(mu);
                for i in 0..=1000 {
                    let s = i as f64 / 1000.0;
                    assert!(best >= spec.value(s, mu) - 1e-12, "{spec} mu={mu} s={s}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sstar_and_ustar_nondecreasing(lambda in 0.05f64..50.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for spec in [UtilitySpec::penalized(lambda).unwrap(), UtilitySpec::greedy()] {
                prop_assert!(spec.sstar(lo) <= spec.sstar(hi));
                prop_assert!(spec.ustar(lo) <= spec.ustar(hi) + 1e-12);
            }
        }

        #[test]
        fn gaps_nonnegative(lambda in 0.05f64..50.0, mus in proptest::collection::vec(0.0f64..=1.0, 2..6)) {
            let inst = instance(&mus);
            let spec = UtilitySpec::penalized(lambda).unwrap();
            prop_assert!(gap_beta(&spec, &inst) >= 0.0);
            if inst.unique_best_arm().is_some() {
                prop_assert!(gap_eta(&spec, &inst).unwrap() >= 0.0);
            }
        }
    }
}
