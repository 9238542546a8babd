//! Slot-based discrete-event simulation: the ground truth against which the
//! transform solution and the network decomposition are checked.
//!
//! The single-queue simulator draws one scenario per cycle and applies the
//! slot recursion exactly: during green a positive queue releases one vehicle
//! and absorbs the slot's arrivals, an empty queue lets all arrivals pass
//! through within the slot; during red arrivals accumulate. The network
//! simulator couples the true departure streams through travel-time delays
//! with no independence assumption between cycles, so the gap to the
//! decomposition is exactly the decomposition error.
//!
//! Randomness comes from ChaCha8 with one documented stream per
//! (replication, node): stream id `replication << 32 | node`. Identical seed
//! and configuration give bit-identical statistics; replications run in
//! parallel and are reduced in fixed order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arrival::ArrivalProcess;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::solver::SignalPlan;

/// Tail levels reported by the simulator (`P(X >= 1..=6)`).
pub const TAIL_LEVELS: usize = 6;

/// Simulation run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Measured cycles per replication.
    pub cycles: u64,
    /// Cycles discarded before measurement starts.
    pub warmup_cycles: u64,
    pub seed: u64,
    pub replications: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cycles: 1_000_000,
            warmup_cycles: 10_000,
            seed: 0x5eed_fc71,
            replications: 10,
        }
    }
}

/// Measured statistics of one queue.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub cycle: usize,
    pub green: usize,
    /// Mean queue length at the end of slot `k`, `k = 0..=c` (0 = cycle start).
    pub mean_x: Vec<f64>,
    /// Standard error of `mean_x` across replications.
    pub stderr_x: Vec<f64>,
    /// `P(X_0 >= m)`, `m = 1..=TAIL_LEVELS`.
    pub tail_x0: Vec<f64>,
    /// `P(X_g >= m)`.
    pub tail_xg: Vec<f64>,
    /// `P(X >= m)` at a uniformly random slot.
    pub tail_xbar: Vec<f64>,
    /// Empirical effective-green histogram, `j = 0..=g`.
    pub green_hist: Vec<f64>,
    /// Mean departures per green slot, `1..=g`.
    pub output_mean: Vec<f64>,
    pub arrivals_per_cycle: f64,
    pub departures_per_cycle: f64,
    /// Overall mean queue length and its standard error.
    pub mean_xbar: f64,
    pub stderr_xbar: f64,
    pub cycles_measured: u64,
    pub replications: u32,
}

/// Per-slot sampling tables of one arrival process.
struct Sampler {
    cum_weights: Vec<f64>,
    /// Per scenario, per slot: (shift, rate, e^-rate).
    slots: Vec<Vec<(u32, f64, f64)>>,
}

impl Sampler {
    fn new(process: &ArrivalProcess) -> Sampler {
        let mut cum = 0.0;
        let cum_weights = process
            .scenarios()
            .iter()
            .map(|s| {
                cum += s.weight;
                cum
            })
            .collect();
        let slots = process
            .scenarios()
            .iter()
            .map(|s| {
                s.slots
                    .iter()
                    .map(|d| (d.shift, d.rate, (-d.rate).exp()))
                    .collect()
            })
            .collect();
        Sampler { cum_weights, slots }
    }

    fn pick_scenario(&self, rng: &mut ChaCha8Rng) -> usize {
        if self.cum_weights.len() == 1 {
            return 0;
        }
        let u: f64 = rng.gen();
        let idx = self.cum_weights.partition_point(|&w| w <= u);
        idx.min(self.cum_weights.len() - 1)
    }

    #[inline]
    fn sample_slot(&self, scenario: usize, slot: usize, rng: &mut ChaCha8Rng) -> u64 {
        let (shift, rate, p0) = self.slots[scenario][slot];
        let mut count = shift as u64;
        if rate > 0.0 {
            // CDF inversion; exact and reproducible for the small rates here
            let u: f64 = rng.gen();
            let mut p = p0;
            let mut cum = p;
            let mut k = 0u64;
            while u > cum && k < 500 {
                k += 1;
                p *= rate / k as f64;
                cum += p;
            }
            count += k;
        }
        count
    }
}

/// Per-replication accumulator for one queue.
#[derive(Clone)]
struct Acc {
    sum_x: Vec<u64>,
    count_x: Vec<u64>,
    tail_x0: [u64; TAIL_LEVELS],
    tail_xg: [u64; TAIL_LEVELS],
    tail_xbar: [u64; TAIL_LEVELS],
    slots_seen: u64,
    green_hist: Vec<u64>,
    out_sum: Vec<u64>,
    arrivals: u64,
    departures: u64,
    cycles: u64,
}

impl Acc {
    fn new(cycle: usize, green: usize) -> Acc {
        Acc {
            sum_x: vec![0; cycle + 1],
            count_x: vec![0; cycle + 1],
            tail_x0: [0; TAIL_LEVELS],
            tail_xg: [0; TAIL_LEVELS],
            tail_xbar: [0; TAIL_LEVELS],
            slots_seen: 0,
            green_hist: vec![0; green + 1],
            out_sum: vec![0; green],
            arrivals: 0,
            departures: 0,
            cycles: 0,
        }
    }
}

fn count_tails(x: u64, tallies: &mut [u64; TAIL_LEVELS]) {
    let top = (x as usize).min(TAIL_LEVELS);
    for t in tallies.iter_mut().take(top) {
        *t += 1;
    }
}

/// Simulate one isolated queue.
pub fn simulate_single(
    arrivals: &ArrivalProcess,
    plan: SignalPlan,
    cfg: &SimConfig,
) -> Result<SimStats> {
    let c = plan.cycle();
    let g = plan.green;
    if arrivals.cycle_length() != c {
        return Err(Error::CycleMismatch {
            left: c,
            right: arrivals.cycle_length(),
        });
    }
    let sampler = Sampler::new(arrivals);

    let accs: Vec<Acc> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((rep as u64) << 32);
            let mut acc = Acc::new(c, g);
            let mut x: u64 = 0;
            for cycle in 0..cfg.warmup_cycles + cfg.cycles {
                let record = cycle >= cfg.warmup_cycles;
                let scenario = sampler.pick_scenario(&mut rng);
                if record {
                    acc.sum_x[0] += x;
                    acc.count_x[0] += 1;
                    count_tails(x, &mut acc.tail_x0);
                    acc.cycles += 1;
                }
                let mut geff: usize = if x == 0 { 0 } else { usize::MAX };
                for slot in 0..c {
                    let a = sampler.sample_slot(scenario, slot, &mut rng);
                    let out;
                    if slot < g {
                        if x > 0 {
                            x += a;
                            x -= 1;
                            out = 1;
                        } else {
                            out = a;
                        }
                        if geff == usize::MAX && slot + 1 < g && x == 0 {
                            geff = slot + 1;
                        }
                    } else {
                        x += a;
                        out = 0;
                    }
                    if record {
                        let k = slot + 1;
                        acc.sum_x[k] += x;
                        acc.count_x[k] += 1;
                        count_tails(x, &mut acc.tail_xbar);
                        acc.slots_seen += 1;
                        if k == g {
                            count_tails(x, &mut acc.tail_xg);
                        }
                        if slot < g {
                            acc.out_sum[slot] += out;
                        }
                        acc.arrivals += a;
                        acc.departures += out;
                    }
                }
                if record {
                    let j = if geff == usize::MAX { g } else { geff };
                    acc.green_hist[j] += 1;
                }
            }
            acc
        })
        .collect();

    Ok(reduce_replications(c, g, &accs))
}

/// Simulate the fully coupled network; returns statistics per node in node
/// order, measured in each node's local signal frame.
pub fn simulate_network(spec: &NetworkSpec, cfg: &SimConfig) -> Result<Vec<SimStats>> {
    spec.validate()?;
    let order = spec.topological_order()?;
    let c = spec.cycle;
    let n = spec.nodes.len();

    // child adjacency with travel times
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut ring_len = vec![1usize; n];
    for (i, node) in spec.nodes.iter().enumerate() {
        for feed in &node.feeds {
            children[feed.from].push((i, feed.travel));
            ring_len[i] = ring_len[i].max(feed.travel + 1);
        }
    }
    let samplers: Vec<Option<Sampler>> = spec
        .nodes
        .iter()
        .map(|node| node.external.as_ref().map(Sampler::new))
        .collect();

    let per_rep: Vec<Vec<Acc>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rngs: Vec<ChaCha8Rng> = (0..n)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(((rep as u64) << 32) | i as u64);
                    rng
                })
                .collect();
            let mut accs: Vec<Acc> = spec
                .nodes
                .iter()
                .map(|node| Acc::new(c, node.plan.green))
                .collect();
            let mut x = vec![0u64; n];
            let mut geff = vec![usize::MAX; n];
            let mut scenario = vec![0usize; n];
            let mut ring: Vec<Vec<u64>> = ring_len.iter().map(|&l| vec![0u64; l]).collect();

            let record_start = cfg.warmup_cycles * c as u64;
            let total_slots = (cfg.warmup_cycles + cfg.cycles) * c as u64;
            for t in 0..total_slots {
                let record = t >= record_start;
                let full_cycle_inside = t >= record_start + c as u64 - 1;
                let tc = (t % c as u64) as usize;
                for &idx in &order {
                    let node = &spec.nodes[idx];
                    let local = (tc + c - node.green_start) % c;
                    let green = node.plan.green;

                    let mut a = ring[idx][(t % ring_len[idx] as u64) as usize];
                    ring[idx][(t % ring_len[idx] as u64) as usize] = 0;
                    if let Some(sampler) = &samplers[idx] {
                        if local == 0 {
                            scenario[idx] = sampler.pick_scenario(&mut rngs[idx]);
                        }
                        a += sampler.sample_slot(scenario[idx], local, &mut rngs[idx]);
                    }

                    if local == 0 {
                        // queue level now is X_0 of the starting local cycle
                        if record {
                            let acc = &mut accs[idx];
                            acc.sum_x[0] += x[idx];
                            acc.count_x[0] += 1;
                            count_tails(x[idx], &mut acc.tail_x0);
                        }
                        geff[idx] = if x[idx] == 0 { 0 } else { usize::MAX };
                    }

                    let out;
                    if local < green {
                        if x[idx] > 0 {
                            x[idx] += a;
                            x[idx] -= 1;
                            out = 1;
                        } else {
                            out = a;
                        }
                        if geff[idx] == usize::MAX && local + 1 < green && x[idx] == 0 {
                            geff[idx] = local + 1;
                        }
                    } else {
                        x[idx] += a;
                        out = 0;
                    }

                    if record {
                        let acc = &mut accs[idx];
                        let k = local + 1;
                        acc.sum_x[k] += x[idx];
                        acc.count_x[k] += 1;
                        count_tails(x[idx], &mut acc.tail_xbar);
                        acc.slots_seen += 1;
                        if k == green {
                            count_tails(x[idx], &mut acc.tail_xg);
                        }
                        if local < green {
                            acc.out_sum[local] += out;
                        }
                        acc.arrivals += a;
                        acc.departures += out;
                        if local == c - 1 && full_cycle_inside {
                            let j = if geff[idx] == usize::MAX { green } else { geff[idx] };
                            acc.green_hist[j] += 1;
                            acc.cycles += 1;
                        }
                    }

                    if out > 0 {
                        for &(child, travel) in &children[idx] {
                            let len = ring_len[child] as u64;
                            ring[child][((t + travel as u64) % len) as usize] += out;
                        }
                    }
                }
            }
            accs
        })
        .collect();

    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let accs: Vec<Acc> = per_rep.iter().map(|reps| reps[idx].clone()).collect();
        out.push(reduce_replications(c, spec.nodes[idx].plan.green, &accs));
    }
    Ok(out)
}

/// Combine replication accumulators into means and replication-based errors.
fn reduce_replications(cycle: usize, green: usize, accs: &[Acc]) -> SimStats {
    let reps = accs.len();
    let mean_of = |f: &dyn Fn(&Acc) -> f64| -> (f64, f64) {
        let values: Vec<f64> = accs.iter().map(|a| f(a)).collect();
        let mean = values.iter().sum::<f64>() / reps as f64;
        if reps < 2 {
            return (mean, 0.0);
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
        (mean, (var / reps as f64).sqrt())
    };

    let mut mean_x = Vec::with_capacity(cycle + 1);
    let mut stderr_x = Vec::with_capacity(cycle + 1);
    for k in 0..=cycle {
        let (m, e) = mean_of(&|a: &Acc| a.sum_x[k] as f64 / a.count_x[k].max(1) as f64);
        mean_x.push(m);
        stderr_x.push(e);
    }
    let (mean_xbar, stderr_xbar) = mean_of(&|a: &Acc| {
        let total: u64 = a.sum_x[1..].iter().sum();
        let count: u64 = a.count_x[1..].iter().sum();
        total as f64 / count.max(1) as f64
    });

    let frac = |num: &dyn Fn(&Acc) -> u64, den: &dyn Fn(&Acc) -> u64| -> f64 {
        let (m, _) = mean_of(&|a: &Acc| num(a) as f64 / den(a).max(1) as f64);
        m
    };

    let tails = |pick: &dyn Fn(&Acc) -> &[u64; TAIL_LEVELS], den: &dyn Fn(&Acc) -> u64| -> Vec<f64> {
        (0..TAIL_LEVELS)
            .map(|m| frac(&|a| pick(a)[m], den))
            .collect()
    };

    let green_hist = (0..=green)
        .map(|j| frac(&|a| a.green_hist[j], &|a| a.cycles))
        .collect();
    let output_mean = (0..green)
        .map(|s| frac(&|a| a.out_sum[s], &|a| a.count_x[s + 1]))
        .collect();

    SimStats {
        cycle,
        green,
        mean_x,
        stderr_x,
        tail_x0: tails(&|a| &a.tail_x0, &|a| a.count_x[0]),
        tail_xg: tails(&|a| &a.tail_xg, &|a| a.count_x[green]),
        tail_xbar: tails(&|a| &a.tail_xbar, &|a| a.slots_seen),
        green_hist,
        output_mean,
        arrivals_per_cycle: frac(&|a| a.arrivals, &|a| a.count_x[0]),
        departures_per_cycle: frac(&|a| a.departures, &|a| a.count_x[0]),
        mean_xbar,
        stderr_xbar,
        cycles_measured: accs.iter().map(|a| a.count_x[0]).sum(),
        replications: reps as u32,
    }
}
