//! Cross-validation of the transform solution against brute-force stationary
//! distributions of the cycle-level Markov chain, for small finite-support
//! instances.

use fctl_core::numerics::invert_pgf;
use fctl_core::solver::{solve_queue, SignalPlan};
use fctl_core::testutil::markov_stationary;
use fctl_core::{ArrivalProcess, Scenario, SlotDistribution};

/// All product scenarios of an i.i.d. finite-support slot law.
fn iid_finite(cycle: usize, masses: &[(u32, f64)]) -> ArrivalProcess {
    let mut scenarios: Vec<Scenario> = vec![Scenario::new(1.0, Vec::new()).unwrap()];
    for _ in 0..cycle {
        let mut next = Vec::with_capacity(scenarios.len() * masses.len());
        for s in &scenarios {
            for &(count, prob) in masses {
                let mut slots = s.slots.clone();
                slots.push(SlotDistribution::new(count, 0.0).unwrap());
                next.push(Scenario {
                    weight: s.weight * prob,
                    slots,
                });
            }
        }
        scenarios = next;
    }
    ArrivalProcess::new(cycle, scenarios).unwrap()
}

fn check_against_oracle(arrivals: ArrivalProcess, plan: SignalPlan, tag: &str) {
    let cap = 160;
    let oracle = markov_stationary(&arrivals, plan, cap);
    let sol = solve_queue(plan, arrivals).unwrap();

    for l in 0..plan.green {
        assert!(
            (sol.q()[l] - oracle[l]).abs() < 1e-8,
            "{tag}: q[{l}] = {} vs oracle {}",
            sol.q()[l],
            oracle[l]
        );
    }
    // full distribution via inversion
    let pgf = sol.x0_pgf();
    for (x, &pi) in oracle.iter().enumerate().take(60) {
        let p = invert_pgf(&pgf, x);
        assert!(
            (p - pi).abs() < 1e-8,
            "{tag}: P(X_0 = {x}) = {p} vs oracle {pi}"
        );
    }
}

#[test]
fn bernoulli_g2_c4_matches_markov_chain() {
    let arrivals = iid_finite(4, &[(0, 0.7), (1, 0.3)]);
    check_against_oracle(arrivals, SignalPlan::new(2, 2).unwrap(), "bernoulli");
}

#[test]
fn heavier_finite_support_matches_markov_chain() {
    // per-slot law {0, 1, 2} with mean 0.45, g=3, c=5
    let arrivals = iid_finite(5, &[(0, 0.65), (1, 0.25), (2, 0.10)]);
    check_against_oracle(arrivals, SignalPlan::new(3, 2).unwrap(), "triple");
}

#[test]
fn degenerate_no_empty_cycle_fails_loudly() {
    // every scenario guarantees an arrival: the boundary system loses an
    // equation and the solver must refuse rather than guess
    let always = Scenario::new(
        1.0,
        vec![
            SlotDistribution::new(1, 0.0).unwrap(),
            SlotDistribution::ZERO,
            SlotDistribution::ZERO,
            SlotDistribution::ZERO,
        ],
    )
    .unwrap();
    let arrivals = ArrivalProcess::new(4, vec![always]).unwrap();
    let err = solve_queue(SignalPlan::new(2, 2).unwrap(), arrivals).unwrap_err();
    assert!(matches!(err, fctl_core::Error::RootFinding(_)), "{err}");
}

#[test]
fn correlated_scenarios_match_markov_chain() {
    // burst-or-quiet correlation across the cycle
    let burst = Scenario::new(
        0.25,
        vec![
            SlotDistribution::new(2, 0.0).unwrap(),
            SlotDistribution::new(1, 0.0).unwrap(),
            SlotDistribution::ZERO,
            SlotDistribution::ZERO,
            SlotDistribution::ZERO,
        ],
    )
    .unwrap();
    let quiet = Scenario::new(
        0.75,
        vec![SlotDistribution::ZERO; 5],
    )
    .unwrap();
    let arrivals = ArrivalProcess::new(5, vec![burst, quiet]).unwrap();
    check_against_oracle(arrivals, SignalPlan::new(2, 3).unwrap(), "correlated");
}
