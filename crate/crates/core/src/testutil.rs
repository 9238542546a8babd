//! Brute-force reference computations for tests (feature `testutil`).
//!
//! Everything here deliberately avoids the transform machinery: the
//! stationary law comes from the one-cycle transition matrix of the queue
//! recursion, raised to a huge power by repeated squaring. Only meaningful
//! for finite-support (purely deterministic-slot) arrival processes.

use crate::arrival::ArrivalProcess;
use crate::solver::SignalPlan;

/// Stationary distribution of the cycle-start queue length on states
/// `0..=cap`, from the explicit transition matrix.
///
/// Panics if any scenario has a Poisson component (the enumeration would not
/// be finite) or if noticeable mass escapes past `cap`.
pub fn markov_stationary(arrivals: &ArrivalProcess, plan: SignalPlan, cap: usize) -> Vec<f64> {
    let c = plan.cycle();
    let g = plan.green;
    assert_eq!(arrivals.cycle_length(), c);
    let n = cap + 1;
    let mut p = vec![0.0f64; n * n];
    for scen in arrivals.scenarios() {
        assert!(
            scen.slots.iter().all(|s| s.rate == 0.0),
            "oracle needs finite-support slots"
        );
        for x0 in 0..n {
            // one deterministic cycle of the slot recursion
            let mut x = x0 as u64;
            for (i, slot) in scen.slots.iter().enumerate() {
                let a = slot.shift as u64;
                if i < g {
                    if x > 0 {
                        x = x - 1 + a;
                    }
                } else {
                    x += a;
                }
            }
            let target = (x as usize).min(cap);
            p[x0 * n + target] += scen.weight;
        }
    }

    // pi = lim row of P^(2^k)
    let mut m = p;
    for _ in 0..40 {
        m = mat_square(&m, n);
    }
    let pi: Vec<f64> = m[..n].to_vec();
    let tail = pi[cap];
    assert!(
        tail < 1e-10,
        "state cap {cap} too small: stationary mass {tail} at the boundary"
    );
    pi
}

fn mat_square(m: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n * n];
    for i in 0..n {
        for k in 0..n {
            let v = m[i * n + k];
            if v == 0.0 {
                continue;
            }
            let row = &m[k * n..(k + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (d, &r) in dst.iter_mut().zip(row) {
                *d += v * r;
            }
        }
    }
    // renormalize rows against drift
    for i in 0..n {
        let sum: f64 = out[i * n..(i + 1) * n].iter().sum();
        if sum > 0.0 {
            for v in &mut out[i * n..(i + 1) * n] {
                *v /= sum;
            }
        }
    }
    out
}
