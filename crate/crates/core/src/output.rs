//! Joint law of the per-slot departures during one green period.
//!
//! Conditional on the queue emptying at green slot `j`, the output vector
//! `(O_1, ..., O_g)` is `(1, ..., 1, Y_{j+1}, ..., Y_g)`: one departure per
//! busy slot, then the arrivals pass straight through. Summing over `j` and
//! the upstream scenarios gives the joint output pgf
//!
//! ```text
//! O(z_1, ..., z_g) = (1 - S) prod_k z_k + T
//! ```
//!
//! with `S` the total emptiness mass and `T` the mixture over `(j, scenario)`
//! pairs. Since the output slots after emptying replicate the arrival slots,
//! grouping by `(j, scenario)` instead of `(l, pattern)` is an exact
//! regrouping and keeps the component count at `g * |scenarios| + 1`.
//!
//! The result is itself an arrival-process-shaped mixture over the `g` green
//! slots, which is what lets a downstream queue consume it directly.

use crate::arrival::{ArrivalProcess, Scenario, SlotDistribution};
use crate::error::Result;
use crate::solver::QueueSolution;
use crate::Complex;

/// Mixture-form joint law of the departures `(O_1, ..., O_g)` plus the
/// effective-green-time distribution.
#[derive(Debug, Clone)]
pub struct OutputProcess {
    green: usize,
    /// Mixture over the `g` green slots; weights sum to 1.
    mixture: ArrivalProcess,
    /// `P(G = j)` for `j = 0..=g`.
    green_dist: Vec<f64>,
}

impl OutputProcess {
    pub fn green(&self) -> usize {
        self.green
    }

    /// The departures as a mixture process on a `g`-slot cycle.
    pub fn mixture(&self) -> &ArrivalProcess {
        &self.mixture
    }

    /// `P(G = j)`, `j = 0..=g`.
    pub fn green_dist(&self) -> &[f64] {
        &self.green_dist
    }

    /// Joint output pgf `O(z_1, ..., z_g)`.
    pub fn joint_pgf(&self, z: &[Complex]) -> Result<Complex> {
        self.mixture.joint_pgf(z)
    }

    /// `E[O_i]` per green slot.
    pub fn mean_per_slot(&self) -> Vec<f64> {
        self.mixture.mean_per_slot()
    }
}

/// Distribution of the effective green time `G`: the first green slot at
/// whose end the queue is empty, or `g` if it never empties.
///
/// `P(G = j) = sum_l q_l sum_{patterns in G_{j,l}} P(pattern)` for `j < g`;
/// the saturation mass `P(G = g)` is the complement.
pub fn effective_green_dist(sol: &QueueSolution) -> Vec<f64> {
    let g = sol.plan().green;
    let mut dist = Vec::with_capacity(g + 1);
    let mut cum = 0.0;
    for j in 0..g {
        let mass: f64 = sol.weighted_pattern_mass()[j].iter().sum();
        dist.push(mass);
        cum += mass;
    }
    dist.push((1.0 - cum).max(0.0));
    dist
}

/// Joint output law of a solved queue.
///
/// One component per `(j, scenario)` pair — `j` certain departures followed by
/// the scenario's own slots `j+1..g` — plus a saturation component of `g`
/// certain departures. Identical components are merged.
pub fn output_pgf(sol: &QueueSolution) -> Result<OutputProcess> {
    let g = sol.plan().green;
    let scenarios = sol.arrivals().scenarios();
    let qpm = sol.weighted_pattern_mass();

    let mut components: Vec<Scenario> = Vec::new();
    let mut emptiness_mass = 0.0;
    for j in 0..g {
        for (s, scen) in scenarios.iter().enumerate() {
            let weight = qpm[j][s];
            if weight <= 0.0 {
                continue;
            }
            emptiness_mass += weight;
            let mut slots = vec![SlotDistribution::ONE; j];
            slots.extend_from_slice(&scen.slots[j..g]);
            components.push(Scenario { weight, slots });
        }
    }
    let saturation = 1.0 - emptiness_mass;
    if saturation > 1e-15 {
        components.push(Scenario {
            weight: saturation,
            slots: vec![SlotDistribution::ONE; g],
        });
    }
    let mixture = ArrivalProcess::new(g, components)?.compact(0.0);
    Ok(OutputProcess {
        green: g,
        mixture,
        green_dist: effective_green_dist(sol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrival::ArrivalProcess;
    use crate::solver::{solve_queue, SignalPlan};
    use approx::assert_abs_diff_eq;

    fn ones(n: usize) -> Vec<Complex> {
        vec![Complex::new(1.0, 0.0); n]
    }

    #[test]
    fn zero_arrivals_never_depart() {
        let sol = solve_queue(SignalPlan::new(4, 2).unwrap(), ArrivalProcess::zero(6)).unwrap();
        let dist = effective_green_dist(&sol);
        assert_abs_diff_eq!(dist[0], 1.0, epsilon = 1e-12);
        assert!(dist[1..].iter().all(|&p| p.abs() < 1e-12));

        let out = output_pgf(&sol).unwrap();
        assert!(out.mean_per_slot().iter().all(|&m| m.abs() < 1e-12));
        assert_abs_diff_eq!(out.joint_pgf(&ones(4)).unwrap().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn green_dist_sums_to_one() {
        let sol =
            solve_queue(SignalPlan::new(10, 10).unwrap(), ArrivalProcess::poisson(20, 0.45).unwrap())
                .unwrap();
        let dist = effective_green_dist(&sol);
        assert_eq!(dist.len(), 11);
        let total: f64 = dist.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        assert!(dist.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn output_normalized_and_conserves_flow() {
        let plan = SignalPlan::new(10, 10).unwrap();
        let arrivals = ArrivalProcess::poisson(20, 0.45).unwrap();
        let sol = solve_queue(plan, arrivals.clone()).unwrap();
        let out = output_pgf(&sol).unwrap();

        assert_abs_diff_eq!(out.joint_pgf(&ones(10)).unwrap().re, 1.0, epsilon = 1e-12);

        // under stability every arriving vehicle eventually departs
        let total_out: f64 = out.mean_per_slot().iter().sum();
        let total_in: f64 = arrivals.total_mean();
        assert_abs_diff_eq!(total_out, total_in, epsilon = 1e-9);
    }

    #[test]
    fn independent_input_matches_conditional_form() {
        // With independent slots, conditioning on G = j gives
        // P(G=0) prod Y_i(z_i) + sum_j P(G=j) prod_{i<=j} z_i prod_{i>j} Y_i(z_i)
        // + P(G=g) prod z_i.
        let plan = SignalPlan::new(5, 5).unwrap();
        let lambda = 0.35;
        let arrivals = ArrivalProcess::poisson(10, lambda).unwrap();
        let sol = solve_queue(plan, arrivals).unwrap();
        let out = output_pgf(&sol).unwrap();
        let dist = out.green_dist();

        let slot = crate::SlotDistribution::new(0, lambda).unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..10 {
            let z: Vec<Complex> = (0..5).map(|_| Complex::new(next(), next())).collect();
            let got = out.joint_pgf(&z).unwrap();
            let mut expect = Complex::new(0.0, 0.0);
            for j in 0..=5usize {
                let mut term = Complex::new(dist[j], 0.0);
                for zi in z.iter().take(j) {
                    term *= zi;
                }
                for zi in z.iter().skip(j) {
                    term *= slot.pgf(*zi);
                }
                expect += term;
            }
            assert!((got - expect).norm() < 1e-10, "{got} vs {expect}");
        }
    }

    #[test]
    fn output_slots_are_correlated_even_for_iid_input() {
        let plan = SignalPlan::new(10, 10).unwrap();
        let arrivals = ArrivalProcess::poisson(20, 0.45).unwrap();
        let sol = solve_queue(plan, arrivals).unwrap();
        let out = output_pgf(&sol).unwrap();

        // compare joint pgf against the product of marginals at one test point
        let z0 = Complex::new(0.6, 0.0);
        let mut args = ones(10);
        args[0] = z0;
        let m1 = out.joint_pgf(&args).unwrap();
        let mut args = ones(10);
        args[5] = z0;
        let m6 = out.joint_pgf(&args).unwrap();
        let mut args = ones(10);
        args[0] = z0;
        args[5] = z0;
        let joint = out.joint_pgf(&args).unwrap();
        assert!(
            (joint - m1 * m6).norm() > 1e-6,
            "departures should be correlated: joint {joint} vs product {}",
            m1 * m6
        );
    }

    #[test]
    fn compact_preserves_output_law() {
        let plan = SignalPlan::new(6, 6).unwrap();
        let arrivals = ArrivalProcess::poisson(12, 0.4).unwrap();
        let sol = solve_queue(plan, arrivals).unwrap();
        let out = output_pgf(&sol).unwrap();
        let recompacted = out.mixture().compact(0.0);
        let z: Vec<Complex> = (0..6).map(|i| Complex::new(0.4 + 0.07 * i as f64, 0.21)).collect();
        let a = out.mixture().joint_pgf(&z).unwrap();
        let b = recompacted.joint_pgf(&z).unwrap();
        assert!((a - b).norm() < 1e-12);
    }
}
