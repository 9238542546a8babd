//! The general solution must collapse to the known closed forms when the
//! arrival structure degenerates: i.i.d. slots give the classical FCTL pgf,
//! independent non-identical slots give its effective-green-time variant.

use fctl_core::output::effective_green_dist;
use fctl_core::solver::{solve_queue, SignalPlan};
use fctl_core::{ArrivalProcess, Complex, Scenario, SlotDistribution};

/// Deterministic low-discrepancy points inside the unit disk.
fn disk_points(n: usize) -> Vec<Complex> {
    (0..n)
        .map(|i| {
            let r = 0.15 + 0.8 * ((i as f64 * 0.618034) % 1.0);
            let theta = 2.0 * std::f64::consts::PI * ((i as f64 * 0.414214) % 1.0);
            Complex::from_polar(r, theta)
        })
        .collect()
}

#[test]
fn classical_iid_reduction() {
    // X_0(z) = (1 - Y(z)/z) sum_j P(X_{j-1}=0) z^j Y(z)^(c-j) / (z^g - Y(z)^c)
    let g = 10usize;
    let c = 20usize;
    let lambda = 0.45;
    let plan = SignalPlan::new(g, c - g).unwrap();
    let arrivals = ArrivalProcess::poisson(c, lambda).unwrap();
    let sol = solve_queue(plan, arrivals).unwrap();

    // P(X_j = 0) during green is the cumulative effective-green law
    let green = effective_green_dist(&sol);
    let p_zero = |j_minus_1: usize| -> f64 { green[..=j_minus_1].iter().sum() };

    let slot = SlotDistribution::new(0, lambda).unwrap();
    for z in disk_points(20) {
        let y = slot.pgf(z);
        let mut num = Complex::new(0.0, 0.0);
        for j in 1..=g {
            num += p_zero(j - 1) * z.powu(j as u32) * y.powu((c - j) as u32);
        }
        num *= Complex::new(1.0, 0.0) - y / z;
        let den = z.powu(g as u32) - y.powu(c as u32);
        let classical = num / den;
        let general = sol.eval_x0(z);
        assert!(
            (classical - general).norm() < 1e-9,
            "at {z}: classical {classical} vs general {general}"
        );
    }
}

#[test]
fn independent_nonidentical_reduction() {
    // X_0(z) = [(1-P(G=g)) z^g prod_{i>g} Y_i(z)
    //           - sum_{j<g} P(G=j) z^j prod_{i>j} Y_i(z)] / (z^g - prod Y_i(z))
    let g = 4usize;
    let c = 8usize;
    let plan = SignalPlan::new(g, c - g).unwrap();
    let slots: Vec<SlotDistribution> = (0..c)
        .map(|i| SlotDistribution::new(0, 0.1 + 0.05 * (i % 4) as f64).unwrap())
        .collect();
    let arrivals = ArrivalProcess::new(c, vec![Scenario::new(1.0, slots.clone()).unwrap()]).unwrap();
    let sol = solve_queue(plan, arrivals).unwrap();
    let green = effective_green_dist(&sol);

    for z in disk_points(20) {
        let tail_prod = |from: usize| -> Complex {
            slots[from..].iter().map(|s| s.pgf(z)).product()
        };
        let mut num = (1.0 - green[g]) * z.powu(g as u32) * tail_prod(g);
        for j in 0..g {
            num -= green[j] * z.powu(j as u32) * tail_prod(j);
        }
        let den = z.powu(g as u32) - tail_prod(0);
        let reduced = num / den;
        let general = sol.eval_x0(z);
        assert!(
            (reduced - general).norm() < 1e-9,
            "at {z}: reduced {reduced} vs general {general}"
        );
    }
}
