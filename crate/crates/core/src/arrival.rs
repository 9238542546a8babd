//! Cyclic arrival processes as finite scenario mixtures.
//!
//! An [`ArrivalProcess`] over a cycle of `c` slots is a finite mixture of
//! [`Scenario`]s. Within a scenario the per-slot counts are independent, each
//! distributed as a deterministic shift plus a Poisson component
//! ([`SlotDistribution`]). Correlation across slots comes entirely from the
//! mixture. The class is closed under superposition and slot permutation, and
//! every joint-pgf functional the solver needs (coefficient extraction in a
//! prefix of slots, partial products of marginal pgfs) reduces to finite sums
//! of elementary factors, with no numerical differentiation anywhere.
//!
//! A fresh scenario is drawn each cycle, so arrivals in different cycles are
//! independent while arrivals within a cycle may be strongly dependent.

use crate::complex_ext::{cln, exp_diff};
use crate::error::{Error, Result};
use crate::Complex;

/// Law of the arrival count in one slot: `shift + Poisson(rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDistribution {
    /// Deterministic number of vehicles always arriving in the slot.
    pub shift: u32,
    /// Intensity of the additional Poisson component (vehicles per slot).
    pub rate: f64,
}

impl SlotDistribution {
    pub const ZERO: SlotDistribution = SlotDistribution { shift: 0, rate: 0.0 };

    /// One vehicle with certainty (a departing platoon slot).
    pub const ONE: SlotDistribution = SlotDistribution { shift: 1, rate: 0.0 };

    pub fn new(shift: u32, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "slot rate must be finite and nonnegative, got {rate}"
            )));
        }
        Ok(SlotDistribution { shift, rate })
    }

    /// `z^shift * exp(rate * (z - 1))`.
    pub fn pgf(&self, z: Complex) -> Complex {
        z.powu(self.shift) * (self.rate * (z - 1.0)).exp()
    }

    /// `P(count = n)`: shifted Poisson mass, 0 below the shift.
    pub fn pmf(&self, n: u32) -> f64 {
        if n < self.shift {
            return 0.0;
        }
        let k = n - self.shift;
        if self.rate == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let mut p = (-self.rate).exp();
        for i in 1..=k {
            p *= self.rate / i as f64;
        }
        p
    }

    pub fn mean(&self) -> f64 {
        self.shift as f64 + self.rate
    }

    pub fn variance(&self) -> f64 {
        self.rate
    }

    /// Law of the sum of two independent slots: shifts and rates add.
    pub fn convolve(&self, other: &SlotDistribution) -> SlotDistribution {
        SlotDistribution {
            shift: self.shift + other.shift,
            rate: self.rate + other.rate,
        }
    }

    /// Smallest `n` with `P(count <= n) >= 1 - tail`.
    pub fn quantile_upper(&self, tail: f64) -> u32 {
        if self.rate == 0.0 {
            return self.shift;
        }
        let mut p = (-self.rate).exp();
        let mut cum = p;
        let mut k = 0u32;
        while cum < 1.0 - tail && k < 10_000 {
            k += 1;
            p *= self.rate / k as f64;
            cum += p;
        }
        self.shift + k
    }
}

/// One mixture component: a weight and an independent law per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub weight: f64,
    pub slots: Vec<SlotDistribution>,
}

impl Scenario {
    pub fn new(weight: f64, slots: Vec<SlotDistribution>) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scenario weight must be positive, got {weight}"
            )));
        }
        Ok(Scenario { weight, slots })
    }

    /// Total deterministic arrivals over slots `[from, to)`.
    pub(crate) fn shift_sum(&self, from: usize, to: usize) -> u64 {
        self.slots[from..to].iter().map(|s| s.shift as u64).sum()
    }

    /// Total Poisson intensity over slots `[from, to)`.
    pub(crate) fn rate_sum(&self, from: usize, to: usize) -> f64 {
        self.slots[from..to].iter().map(|s| s.rate).sum()
    }
}

/// A cyclic arrival process: weighted mixture of per-slot-independent scenarios.
///
/// Weights are normalized to sum to exactly 1 at construction; construction
/// fails if they are off by more than `1e-12` before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalProcess {
    cycle: usize,
    scenarios: Vec<Scenario>,
}

impl ArrivalProcess {
    pub fn new(cycle: usize, mut scenarios: Vec<Scenario>) -> Result<Self> {
        if cycle == 0 {
            return Err(Error::InvalidParameter("cycle length must be >= 1".into()));
        }
        if scenarios.is_empty() {
            return Err(Error::InvalidParameter(
                "arrival process needs at least one scenario".into(),
            ));
        }
        for s in &scenarios {
            if s.slots.len() != cycle {
                return Err(Error::LengthMismatch {
                    what: "scenario slots",
                    expected: cycle,
                    got: s.slots.len(),
                });
            }
        }
        let total: f64 = scenarios.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "scenario weights sum to {total}, expected 1"
            )));
        }
        for s in &mut scenarios {
            s.weight /= total;
        }
        Ok(ArrivalProcess { cycle, scenarios })
    }

    /// I.i.d. Poisson arrivals with the given per-slot intensity.
    pub fn poisson(cycle: usize, rate: f64) -> Result<Self> {
        let slot = SlotDistribution::new(0, rate)?;
        ArrivalProcess::new(cycle, vec![Scenario::new(1.0, vec![slot; cycle])?])
    }

    /// No arrivals ever.
    pub fn zero(cycle: usize) -> Self {
        ArrivalProcess::new(cycle, vec![Scenario::new(1.0, vec![SlotDistribution::ZERO; cycle]).unwrap()])
            .unwrap()
    }

    pub fn cycle_length(&self) -> usize {
        self.cycle
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    /// True when no scenario can produce an arrival.
    pub fn is_zero(&self) -> bool {
        self.scenarios
            .iter()
            .all(|s| s.slots.iter().all(|d| d.shift == 0 && d.rate == 0.0))
    }

    /// Joint pgf `Y(y_1, ..., y_c)`.
    pub fn joint_pgf(&self, y: &[Complex]) -> Result<Complex> {
        if y.len() != self.cycle {
            return Err(Error::LengthMismatch {
                what: "joint pgf arguments",
                expected: self.cycle,
                got: y.len(),
            });
        }
        let mut total = Complex::new(0.0, 0.0);
        for s in &self.scenarios {
            let mut prod = Complex::new(1.0, 0.0);
            for (slot, &yi) in s.slots.iter().zip(y) {
                prod *= slot.pgf(yi);
            }
            total += s.weight * prod;
        }
        Ok(total)
    }

    /// Pgf of the total per-cycle arrivals: `Y(z, z, ..., z)`.
    pub fn total_pgf(&self, z: Complex) -> Complex {
        let lz = cln(z);
        let w = z - 1.0;
        let mut total = Complex::new(0.0, 0.0);
        for s in &self.scenarios {
            let shift = s.shift_sum(0, self.cycle) as f64;
            let rate = s.rate_sum(0, self.cycle);
            total += s.weight * (shift * lz + rate * w).exp();
        }
        total
    }

    /// Partial-derivative functional behind the transform solution.
    ///
    /// With `prefix = (n_1, ..., n_j)` and `0 <= j <= m <= c`, returns
    ///
    /// ```text
    /// sum_s w_s * prod_{i<=j} P_s(Y_i = n_i)
    ///          * prod_{i=j+1..m} pgf_{s,i}(z) * z^-(m-j)
    ///          * prod_{i=m+1..c} pgf_{s,i}(tail_{i-m})
    /// ```
    ///
    /// i.e. the coefficient of `y_1^{n_1} ... y_j^{n_j}` in
    /// `Y(y_1, ..., y_j, z, ..., z, tail...) / z^(m-j)`. Scenario slot
    /// independence makes the coefficient extraction an exact product.
    pub fn h_eval(&self, m: usize, z: Complex, tail: &[Complex], prefix: &[u32]) -> Result<Complex> {
        let j = prefix.len();
        if j > m || m > self.cycle {
            return Err(Error::InvalidParameter(format!(
                "h_eval needs prefix <= m <= c, got j={j}, m={m}, c={}",
                self.cycle
            )));
        }
        if tail.len() != self.cycle - m {
            return Err(Error::LengthMismatch {
                what: "h_eval tail",
                expected: self.cycle - m,
                got: tail.len(),
            });
        }
        if m > j && z.norm_sqr() == 0.0 {
            return Err(Error::PoleAtZero);
        }
        let mut total = Complex::new(0.0, 0.0);
        for s in &self.scenarios {
            let mut term = Complex::new(s.weight, 0.0);
            for (i, &n) in prefix.iter().enumerate() {
                term *= s.slots[i].pmf(n);
            }
            if term.re == 0.0 {
                continue;
            }
            for i in j..m {
                term *= s.slots[i].pgf(z);
            }
            if m > j {
                term *= z.powi(-((m - j) as i32));
            }
            for (i, &ti) in (m..self.cycle).zip(tail) {
                term *= s.slots[i].pgf(ti);
            }
            total += term;
        }
        Ok(total)
    }

    /// `P(Y_1 = n_1, ..., Y_j = n_j)`.
    pub fn prefix_prob(&self, prefix: &[u32]) -> f64 {
        let mut total = 0.0;
        for s in &self.scenarios {
            let mut term = s.weight;
            for (i, &n) in prefix.iter().enumerate() {
                term *= s.slots[i].pmf(n);
            }
            total += term;
        }
        total
    }

    /// Superposition of two independent processes on the same cycle.
    ///
    /// The mixture of slot-wise convolutions over all scenario pairs, with
    /// identical components merged afterwards.
    pub fn superpose(&self, other: &ArrivalProcess) -> Result<ArrivalProcess> {
        if self.cycle != other.cycle {
            return Err(Error::CycleMismatch {
                left: self.cycle,
                right: other.cycle,
            });
        }
        let mut scenarios = Vec::with_capacity(self.scenarios.len() * other.scenarios.len());
        for a in &self.scenarios {
            for b in &other.scenarios {
                let slots = a
                    .slots
                    .iter()
                    .zip(&b.slots)
                    .map(|(x, y)| x.convolve(y))
                    .collect();
                scenarios.push(Scenario {
                    weight: a.weight * b.weight,
                    slots,
                });
            }
        }
        Ok(ArrivalProcess::new(self.cycle, scenarios)?.compact(0.0))
    }

    /// `E[Y_i]` per slot.
    pub fn mean_per_slot(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cycle];
        for s in &self.scenarios {
            for (m, slot) in means.iter_mut().zip(&s.slots) {
                *m += s.weight * slot.mean();
            }
        }
        means
    }

    /// `E[Y]`, total mean arrivals per cycle.
    pub fn total_mean(&self) -> f64 {
        self.mean_per_slot().iter().sum()
    }

    /// Merge scenarios with bitwise-identical slot signatures and drop
    /// scenarios of weight below `eps_weight`, renormalizing afterwards.
    ///
    /// With `eps_weight = 0` this is lossless. The merge key compares rates
    /// bitwise, so deterministically constructed duplicates always collapse.
    pub fn compact(&self, eps_weight: f64) -> ArrivalProcess {
        use std::collections::HashMap;
        let mut index: HashMap<Vec<(u32, u64)>, usize> = HashMap::new();
        let mut merged: Vec<Scenario> = Vec::new();
        for s in &self.scenarios {
            let key: Vec<(u32, u64)> = s.slots.iter().map(|d| (d.shift, d.rate.to_bits())).collect();
            match index.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    merged[*e.get()].weight += s.weight;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(merged.len());
                    merged.push(s.clone());
                }
            }
        }
        if eps_weight > 0.0 {
            merged.retain(|s| s.weight >= eps_weight);
        }
        // Deterministic order regardless of hash iteration: sort by signature.
        merged.sort_by(|a, b| {
            let ka = a.slots.iter().map(|d| (d.shift, d.rate.to_bits()));
            let kb = b.slots.iter().map(|d| (d.shift, d.rate.to_bits()));
            ka.cmp(kb)
        });
        let total: f64 = merged.iter().map(|s| s.weight).sum();
        for s in &mut merged {
            s.weight /= total;
        }
        ArrivalProcess {
            cycle: self.cycle,
            scenarios: merged,
        }
    }

    /// `z^g - Y(z, ..., z)` evaluated as a sum of stable per-scenario
    /// differences; vanishing linearly at `z = 1` without cancellation.
    pub(crate) fn char_denominator(&self, green: usize, z: Complex) -> Complex {
        let lz = cln(z);
        let w = z - 1.0;
        let g = green as f64;
        let mut total = Complex::new(0.0, 0.0);
        for s in &self.scenarios {
            let shift = s.shift_sum(0, self.cycle) as f64;
            let rate = s.rate_sum(0, self.cycle);
            let delta = (shift - g) * lz + rate * w;
            total += s.weight * exp_diff(g * lz, delta);
        }
        total
    }
}
