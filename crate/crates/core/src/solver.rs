//! Stationary analysis of one generalized FCTL queue.
//!
//! Writing `X_k` for the queue length at the end of slot `k` and `q_l =
//! P(X_0 = l)`, the cycle-start pgf is
//!
//! ```text
//! X_0(z) = sum_l q_l zeta_l(z) / (z^g - Y(z, ..., z))
//! ```
//!
//! where each `zeta_l` collects the correction terms of the cycles in which a
//! queue of initial length `l` empties during green. The `g` unknowns `q_l`
//! come from a linear system: the normalization `sum_l q_l zeta_l'(1) = g - E[Y]`
//! plus one vanishing-numerator equation per root of the denominator inside
//! the unit circle.
//!
//! All per-slot pgfs `X_k(z)` and means `E[X_k]` follow. Transform evaluations
//! run through cancellation-safe exponential differences so that values within
//! `1e-6` of `z = 1` stay at full precision (the mean-vs-derivative
//! consistency checks depend on this). For small `|z|` the closed forms for
//! `X_k` divide by `z^k` and are numerically hopeless in doubles; there the
//! evaluators switch to an exact truncated power series built from the queue
//! distribution itself, so inversion works at every quadrature radius.

use std::sync::OnceLock;

use crate::arrival::ArrivalProcess;
use crate::complex_ext::{cexpm1, cln};
use crate::error::{Error, Result};
use crate::lattice::{enumerate_g_sets, GTable};
use crate::numerics::{find_roots, invert_pgf, RootSet};
use crate::Complex;

/// Fixed signal timing: `green` slots of green followed by `red` slots of red.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalPlan {
    pub green: usize,
    pub red: usize,
}

impl SignalPlan {
    pub fn new(green: usize, red: usize) -> Result<Self> {
        if green == 0 {
            return Err(Error::InvalidParameter("green period must be >= 1".into()));
        }
        Ok(SignalPlan { green, red })
    }

    pub fn cycle(&self) -> usize {
        self.green + self.red
    }
}

/// Tail probabilities `P(X >= m)` for the cycle start, green end, and an
/// arbitrary slot.
#[derive(Debug, Clone)]
pub struct TailTable {
    /// Levels `1..=len`.
    pub x0: Vec<f64>,
    pub x_green_end: Vec<f64>,
    pub x_average: Vec<f64>,
}

/// Solved stationary queue: boundary probabilities, roots, pgf evaluators and
/// mean queue lengths. Immutable once produced; safe to share across threads.
#[derive(Debug)]
pub struct QueueSolution {
    plan: SignalPlan,
    arrivals: ArrivalProcess,
    g_table: GTable,
    roots: RootSet,
    q: Vec<f64>,
    /// `pm[j][l][s]`: scenario-resolved mass of all emptiness patterns in
    /// `G_{j,l}`, i.e. `w_s * sum_{n in G_{j,l}} prod_i P_s(Y_i = n_i)`.
    pm: Vec<Vec<Vec<f64>>>,
    /// `qpm[j][s] = sum_l q_l pm[j][l][s]`.
    qpm: Vec<Vec<f64>>,
    /// Per-scenario prefix sums of slot shifts and rates (length `c + 1`).
    pshift: Vec<Vec<f64>>,
    prate: Vec<Vec<f64>>,
    /// `E[X_k]` for `k = 0..=c`.
    mean_x: Vec<f64>,
    eta: f64,
    max_system_residual: f64,
    dist: OnceLock<DistTables>,
}

/// Solve the stationary queue for the given plan and arrival process.
///
/// Fails when the queue is unstable (`E[Y] >= g`), when root finding cannot
/// certify `g - 1` roots inside the unit circle, or when the boundary system
/// is numerically singular.
pub fn solve_queue(plan: SignalPlan, arrivals: ArrivalProcess) -> Result<QueueSolution> {
    let c = plan.cycle();
    let g = plan.green;
    if arrivals.cycle_length() != c {
        return Err(Error::CycleMismatch {
            left: c,
            right: arrivals.cycle_length(),
        });
    }
    let mean_total = arrivals.total_mean();
    if !arrivals.is_zero() && mean_total >= g as f64 {
        return Err(Error::Unstable {
            queue: String::new(),
            mean_arrivals: mean_total,
            green: g,
            rho: mean_total / g as f64,
        });
    }
    // With no chance of an arrival-free cycle the denominator vanishes at
    // z = 0 where the numerator vanishes identically, so one boundary
    // equation is lost. The transform method cannot pin the solution there.
    if !arrivals.is_zero() && g > 1 {
        let empty_cycle: f64 = arrivals
            .scenarios()
            .iter()
            .map(|s| {
                if s.slots.iter().any(|d| d.shift > 0) {
                    0.0
                } else {
                    s.weight * (-s.rate_sum(0, c)).exp()
                }
            })
            .sum();
        if empty_cycle == 0.0 {
            return Err(Error::RootFinding(
                "every scenario forces at least one arrival per cycle; the transform \
                 denominator has a root at z = 0 with a vacuous boundary equation"
                    .into(),
            ));
        }
    }
    let eta = g as f64 - mean_total;

    let g_table = enumerate_g_sets(g)?;
    let (pshift, prate) = prefix_sums(&arrivals);
    let pm = prefix_mass(&arrivals, &g_table);

    let (roots, q) = if arrivals.is_zero() {
        let mut q = vec![0.0; g];
        q[0] = 1.0;
        (
            RootSet {
                roots: Vec::new(),
                residuals: Vec::new(),
            },
            q,
        )
    } else {
        let roots = find_roots(&arrivals, g)?;
        let q = solve_boundary(&arrivals, plan, &pm, &pshift, &prate, &roots, eta)?;
        (roots, q)
    };

    let mut qpm = vec![vec![0.0; arrivals.scenarios().len()]; g];
    for j in 0..g {
        for l in 0..g {
            let ql = q[l];
            if ql == 0.0 {
                continue;
            }
            for (s, &mass) in pm[j][l].iter().enumerate() {
                qpm[j][s] += ql * mass;
            }
        }
    }

    let mut sol = QueueSolution {
        plan,
        arrivals,
        g_table,
        roots,
        q,
        pm,
        qpm,
        pshift,
        prate,
        mean_x: Vec::new(),
        eta,
        max_system_residual: 0.0,
        dist: OnceLock::new(),
    };
    sol.mean_x = sol.compute_means();
    sol.max_system_residual = sol.system_residual();
    if sol.max_system_residual >= 1e-9 {
        return Err(Error::RootFinding(format!(
            "boundary system residual {:.3e} exceeds 1e-9",
            sol.max_system_residual
        )));
    }
    Ok(sol)
}

/// Prefix sums over slots of deterministic shifts and Poisson rates.
fn prefix_sums(arrivals: &ArrivalProcess) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let c = arrivals.cycle_length();
    let mut pshift = Vec::with_capacity(arrivals.scenarios().len());
    let mut prate = Vec::with_capacity(arrivals.scenarios().len());
    for s in arrivals.scenarios() {
        let mut ps = vec![0.0; c + 1];
        let mut pr = vec![0.0; c + 1];
        for (i, slot) in s.slots.iter().enumerate() {
            ps[i + 1] = ps[i] + slot.shift as f64;
            pr[i + 1] = pr[i] + slot.rate;
        }
        pshift.push(ps);
        prate.push(pr);
    }
    (pshift, prate)
}

/// Scenario-resolved pattern masses `pm[j][l][s]`.
fn prefix_mass(arrivals: &ArrivalProcess, table: &GTable) -> Vec<Vec<Vec<f64>>> {
    let g = table.green();
    let scenarios = arrivals.scenarios();
    // pmf lookup per scenario and slot for counts up to g (pattern entries
    // never exceed j - l < g).
    let max_n = g as u32;
    let lookup: Vec<Vec<Vec<f64>>> = scenarios
        .iter()
        .map(|s| {
            s.slots
                .iter()
                .map(|slot| (0..=max_n).map(|n| slot.pmf(n)).collect())
                .collect()
        })
        .collect();

    let mut pm = vec![vec![vec![0.0; scenarios.len()]; g]; g];
    for (j, l, pattern) in table.iter() {
        let cell = &mut pm[j][l];
        for (s, scen) in scenarios.iter().enumerate() {
            let mut mass = scen.weight;
            for (i, &n) in pattern.iter().enumerate() {
                mass *= lookup[s][i][n as usize];
                if mass == 0.0 {
                    break;
                }
            }
            cell[s] += mass;
        }
    }
    pm
}

/// Assemble and solve the boundary-probability system.
fn solve_boundary(
    arrivals: &ArrivalProcess,
    plan: SignalPlan,
    pm: &[Vec<Vec<f64>>],
    pshift: &[Vec<f64>],
    prate: &[Vec<f64>],
    roots: &RootSet,
    eta: f64,
) -> Result<Vec<f64>> {
    let g = plan.green;
    let c = plan.cycle();
    let n_s = arrivals.scenarios().len();

    // Row 0: normalization via zeta_l'(1):
    // b_l = sum_j sum_s pm[j][l][s] (g - j - E[Y_{j+1..g} | pattern]).
    let mut matrix = vec![vec![Complex::new(0.0, 0.0); g]; g];
    for l in 0..g {
        let mut b = 0.0;
        for (j, row) in pm.iter().enumerate() {
            for s in 0..n_s {
                let mass = row[l][s];
                if mass == 0.0 {
                    continue;
                }
                let mean_rest = (pshift[s][g] - pshift[s][j]) + (prate[s][g] - prate[s][j]);
                b += mass * (g as f64 - j as f64 - mean_rest);
            }
        }
        matrix[0][l] = Complex::new(b, 0.0);
    }

    // Rows 1..g: numerator must vanish at each interior root.
    for (i, &z) in roots.roots.iter().enumerate() {
        let lz = cln(z);
        let w = z - 1.0;
        for s in 0..n_s {
            let base = (g as f64 + pshift[s][c] - pshift[s][g]) * lz + (prate[s][c] - prate[s][g]) * w;
            let ea = base.exp();
            for (j, row) in pm.iter().enumerate() {
                let delta = (j as f64 - g as f64 + pshift[s][g] - pshift[s][j]) * lz
                    + (prate[s][g] - prate[s][j]) * w;
                let factor = if delta.re.abs() <= 0.5 {
                    -ea * cexpm1(delta)
                } else {
                    ea - (base + delta).exp()
                };
                for l in 0..g {
                    let mass = row[l][s];
                    if mass != 0.0 {
                        matrix[i + 1][l] += mass * factor;
                    }
                }
            }
        }
    }

    let mut rhs = vec![Complex::new(0.0, 0.0); g];
    rhs[0] = Complex::new(eta, 0.0);
    let solution = gauss_solve(matrix, rhs)?;

    let mut q = Vec::with_capacity(g);
    for (index, value) in solution.iter().enumerate() {
        let re = value.re;
        if re < -1e-10 {
            return Err(Error::NegativeProbability { index, value: re });
        }
        q.push(re.max(0.0)); // clamp roundoff-level negativity
    }
    Ok(q)
}

/// Complex Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<Complex>>, mut b: Vec<Complex>) -> Result<Vec<Complex>> {
    let n = b.len();
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter().map(|x| x.norm()))
        .fold(0.0, f64::max)
        .max(1.0);
    for col in 0..n {
        let (pivot_row, pivot_norm) = (col..n)
            .map(|r| (r, a[r][col].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_norm < 1e-14 * scale {
            return Err(Error::SingularSystem {
                pivot: pivot_norm,
                column: col,
            });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let inv = a[col][col].inv();
        for r in col + 1..n {
            let f = a[r][col] * inv;
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for k in col..n {
                let sub = f * a[col][k];
                a[r][k] -= sub;
            }
            let sub = f * b[col];
            b[r] -= sub;
        }
    }
    let mut x = vec![Complex::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Exact pmf tables for the hybrid small-|z| evaluation.
#[derive(Debug)]
struct DistTables {
    /// `pmf[k][x] = P(X_k = x)` for `k = 0..=c`.
    pmf: Vec<Vec<f64>>,
    /// Arithmetic average of `pmf[1..=c]`.
    pmf_avg: Vec<f64>,
}

impl QueueSolution {
    pub fn plan(&self) -> SignalPlan {
        self.plan
    }

    pub fn arrivals(&self) -> &ArrivalProcess {
        &self.arrivals
    }

    pub fn g_table(&self) -> &GTable {
        &self.g_table
    }

    pub fn roots(&self) -> &RootSet {
        &self.roots
    }

    /// Boundary probabilities `q_l = P(X_0 = l)` for `l < g`.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `g - E[Y]`, the stability margin.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Occupation rate `E[Y] / g`.
    pub fn rho(&self) -> f64 {
        self.arrivals.total_mean() / self.plan.green as f64
    }

    /// Max-norm residual of the solved boundary system.
    pub fn system_residual(&self) -> f64 {
        let g = self.plan.green;
        let mut worst = 0.0f64;
        let mut row0 = 0.0;
        for l in 0..g {
            row0 += self.q[l] * self.b_coefficient(l);
        }
        worst = worst.max((row0 - self.eta).abs());
        for &z in &self.roots.roots {
            let mut acc = Complex::new(0.0, 0.0);
            for l in 0..g {
                acc += self.q[l] * self.zeta_unchecked(l, z);
            }
            worst = worst.max(acc.norm());
        }
        worst
    }

    /// `zeta_l'(1)`, computed from exact conditional scenario moments.
    fn b_coefficient(&self, l: usize) -> f64 {
        let g = self.plan.green;
        let mut b = 0.0;
        for (j, row) in self.pm.iter().enumerate() {
            for (s, &mass) in row[l].iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let mean_rest =
                    (self.pshift[s][g] - self.pshift[s][j]) + (self.prate[s][g] - self.prate[s][j]);
                b += mass * (g as f64 - j as f64 - mean_rest);
            }
        }
        b
    }

    /// Correction transform `zeta_l(z)`; pole at `z = 0`.
    pub fn zeta(&self, l: usize, z: Complex) -> Result<Complex> {
        if l >= self.plan.green {
            return Err(Error::InvalidParameter(format!(
                "zeta index {l} out of range (green = {})",
                self.plan.green
            )));
        }
        if z.norm_sqr() == 0.0 {
            return Err(Error::PoleAtZero);
        }
        Ok(self.zeta_unchecked(l, z))
    }

    fn zeta_unchecked(&self, l: usize, z: Complex) -> Complex {
        let g = self.plan.green;
        let c = self.plan.cycle();
        let lz = cln(z);
        let w = z - 1.0;
        let mut total = Complex::new(0.0, 0.0);
        for s in 0..self.arrivals.scenarios().len() {
            let base =
                (g as f64 + self.pshift[s][c] - self.pshift[s][g]) * lz + (self.prate[s][c] - self.prate[s][g]) * w;
            let ea = base.exp();
            for (j, row) in self.pm.iter().enumerate() {
                let mass = row[l][s];
                if mass == 0.0 {
                    continue;
                }
                let delta = (j as f64 - g as f64 + self.pshift[s][g] - self.pshift[s][j]) * lz
                    + (self.prate[s][g] - self.prate[s][j]) * w;
                let factor = if delta.re.abs() <= 0.5 {
                    -ea * cexpm1(delta)
                } else {
                    ea - (base + delta).exp()
                };
                total += mass * factor;
            }
        }
        total
    }

    /// Scenario-resolved pattern mass already weighted by the boundary
    /// probabilities: `sum_l q_l * pm[j][l][s]`.
    pub(crate) fn weighted_pattern_mass(&self) -> &[Vec<f64>] {
        &self.qpm
    }

    /// Numerator `sum_l q_l zeta_l(z)` of the cycle-start pgf.
    fn numerator(&self, z: Complex) -> Complex {
        let g = self.plan.green;
        let c = self.plan.cycle();
        let lz = cln(z);
        let w = z - 1.0;
        let mut total = Complex::new(0.0, 0.0);
        for s in 0..self.arrivals.scenarios().len() {
            let base =
                (g as f64 + self.pshift[s][c] - self.pshift[s][g]) * lz + (self.prate[s][c] - self.prate[s][g]) * w;
            let ea = base.exp();
            for (j, qrow) in self.qpm.iter().enumerate() {
                let mass = qrow[s];
                if mass == 0.0 {
                    continue;
                }
                let delta = (j as f64 - g as f64 + self.pshift[s][g] - self.pshift[s][j]) * lz
                    + (self.prate[s][g] - self.prate[s][j]) * w;
                let factor = if delta.re.abs() <= 0.5 {
                    -ea * cexpm1(delta)
                } else {
                    ea - (base + delta).exp()
                };
                total += mass * factor;
            }
        }
        total
    }

    /// Cycle-start pgf `X_0(z)`, analytic on the closed unit disk.
    ///
    /// Within `1e-9` of `z = 1` the removable singularity is evaluated by its
    /// first-order expansion `1 + E[X_0](z - 1)`; within `1e-7` of an interior
    /// root the argument is nudged `1e-5` radially off the root.
    pub fn eval_x0(&self, z: Complex) -> Complex {
        let z = self.guard_roots(z);
        let w = z - 1.0;
        if w.norm() < 1e-9 {
            return Complex::new(1.0, 0.0) + self.mean_x[0] * w;
        }
        if z.norm_sqr() == 0.0 {
            return Complex::new(self.q[0], 0.0);
        }
        self.numerator(z) / self.arrivals.char_denominator(self.plan.green, z)
    }

    fn guard_roots(&self, z: Complex) -> Complex {
        for &root in &self.roots.roots {
            if (z - root).norm() < 1e-7 {
                let dir = if z.norm() > 1e-12 {
                    z / z.norm()
                } else {
                    Complex::new(1.0, 0.0)
                };
                return z + 1e-5 * dir;
            }
        }
        z
    }

    /// Radius below which `X_k` switches to its exact power series: the
    /// closed forms divide by `z^g` and lose `g * |log10 z|` digits.
    fn series_radius(&self) -> f64 {
        10f64.powf(-2.5 / self.plan.green as f64).clamp(0.6, 0.9)
    }

    /// Per-slot pgf `X_k(z)` for `k = 0..=c` (`k = 0` and `k = c` both give
    /// the cycle-start law; `k = c` goes through the red-slot transform).
    pub fn eval_xk(&self, k: usize, z: Complex) -> Result<Complex> {
        let c = self.plan.cycle();
        if k > c {
            return Err(Error::InvalidParameter(format!(
                "slot index {k} out of range (cycle = {c})"
            )));
        }
        if k == 0 {
            return Ok(self.eval_x0(z));
        }
        let w = z - 1.0;
        if w.norm() < 1e-9 {
            return Ok(Complex::new(1.0, 0.0) + self.mean_x[k] * w);
        }
        if z.norm() < self.series_radius() {
            let tables = self.dist_tables();
            return Ok(eval_series(&tables.pmf[k], z));
        }
        Ok(self.eval_xk_transform(k, z))
    }

    fn eval_xk_transform(&self, k: usize, z: Complex) -> Complex {
        let g = self.plan.green;
        let lz = cln(z);
        let w = z - 1.0;
        let x0 = self.eval_x0(z);
        let n_s = self.arrivals.scenarios().len();
        let div = if k <= g { k as f64 } else { g as f64 };

        // X_0(z) * Y(z,...,z,1,...,1) / z^div, mixed per scenario.
        let mut lead = Complex::new(0.0, 0.0);
        for (s, scen) in self.arrivals.scenarios().iter().enumerate() {
            let expo = (self.pshift[s][k] - div) * lz + self.prate[s][k] * w;
            lead += scen.weight * expo.exp();
        }
        let mut total = x0 * lead;

        // Correction terms for cycles that empty during green.
        if k <= g {
            // sum_l q_l sum_{j<k} (f_k(1,.) - f_k(z,.))
            for s in 0..n_s {
                for j in 0..k.min(g) {
                    let mass = self.qpm[j][s];
                    if mass == 0.0 {
                        continue;
                    }
                    let delta = (j as f64 - k as f64 + self.pshift[s][k] - self.pshift[s][j]) * lz
                        + (self.prate[s][k] - self.prate[s][j]) * w;
                    let factor = if delta.re.abs() <= 0.5 {
                        -cexpm1(delta)
                    } else {
                        Complex::new(1.0, 0.0) - delta.exp()
                    };
                    total += mass * factor;
                }
            }
        } else {
            // h_g with a tail of (k - g) z's and (c - k) ones
            for s in 0..n_s {
                let base = (self.pshift[s][k] - self.pshift[s][g]) * lz
                    + (self.prate[s][k] - self.prate[s][g]) * w;
                let ea = base.exp();
                for j in 0..g {
                    let mass = self.qpm[j][s];
                    if mass == 0.0 {
                        continue;
                    }
                    let delta = (j as f64 - g as f64 + self.pshift[s][g] - self.pshift[s][j]) * lz
                        + (self.prate[s][g] - self.prate[s][j]) * w;
                    let factor = if delta.re.abs() <= 0.5 {
                        -ea * cexpm1(delta)
                    } else {
                        ea - (base + delta).exp()
                    };
                    total += mass * factor;
                }
            }
        }
        total
    }

    /// Time-average pgf over the cycle.
    pub fn eval_xbar(&self, z: Complex) -> Complex {
        let c = self.plan.cycle();
        let w = z - 1.0;
        if w.norm() < 1e-9 {
            return Complex::new(1.0, 0.0) + self.mean_xbar() * w;
        }
        if z.norm() < self.series_radius() {
            return eval_series(&self.dist_tables().pmf_avg, z);
        }
        let mut total = Complex::new(0.0, 0.0);
        for k in 1..=c {
            total += self.eval_xk_transform(k, z);
        }
        total / c as f64
    }

    /// Closure view of `X_0` for inversion.
    pub fn x0_pgf(&self) -> impl Fn(Complex) -> Complex + '_ {
        move |z| self.eval_x0(z)
    }

    /// Closure view of `X_k` for inversion; validates `k` up front.
    pub fn xk_pgf(&self, k: usize) -> Result<impl Fn(Complex) -> Complex + '_> {
        if k > self.plan.cycle() {
            return Err(Error::InvalidParameter(format!(
                "slot index {k} out of range (cycle = {})",
                self.plan.cycle()
            )));
        }
        Ok(move |z| self.eval_xk(k, z).expect("k validated"))
    }

    /// Closure view of the time-average pgf.
    pub fn xbar_pgf(&self) -> impl Fn(Complex) -> Complex + '_ {
        move |z| self.eval_xbar(z)
    }

    /// `E[X_k]`, `k = 0..=c`.
    pub fn mean_xk(&self, k: usize) -> Result<f64> {
        self.mean_x
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("slot index {k} out of range")))
    }

    /// `E[X_0]`.
    pub fn mean_x0(&self) -> f64 {
        self.mean_x[0]
    }

    /// Mean queue length at an arbitrary slot: `(1/c) sum_k E[X_k]`.
    pub fn mean_xbar(&self) -> f64 {
        let c = self.plan.cycle();
        self.mean_x[1..=c].iter().sum::<f64>() / c as f64
    }

    /// All per-slot means, index `0..=c`.
    pub fn means(&self) -> &[f64] {
        &self.mean_x
    }

    /// Closed-form means: `E[X_0]` from the second derivatives of numerator
    /// and denominator at 1, then slot recursions (forward through green with
    /// an emptiness correction, backward through red from `E[X_c] = E[X_0]`).
    fn compute_means(&self) -> Vec<f64> {
        let g = self.plan.green;
        let c = self.plan.cycle();
        let scenarios = self.arrivals.scenarios();
        let slot_means = self.arrivals.mean_per_slot();

        // E[Y], E[Y^2] of per-cycle totals.
        let mut ey = 0.0;
        let mut ey2 = 0.0;
        for (s, scen) in scenarios.iter().enumerate() {
            let m = self.pshift[s][c] + self.prate[s][c];
            ey += scen.weight * m;
            ey2 += scen.weight * (self.prate[s][c] + m * m);
        }

        // N''(1) and D''(1).
        let d2 = (g * g) as f64 - g as f64 - (ey2 - ey);
        let mut n2 = -self.eta;
        for (j, qrow) in self.qpm.iter().enumerate() {
            for (s, &mass) in qrow.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                // red-period total R and post-pattern total V = Y_{j+1..c}
                let m_r = (self.pshift[s][c] - self.pshift[s][g]) + (self.prate[s][c] - self.prate[s][g]);
                let var_r = self.prate[s][c] - self.prate[s][g];
                let m_v = (self.pshift[s][c] - self.pshift[s][j]) + (self.prate[s][c] - self.prate[s][j]);
                let var_v = self.prate[s][c] - self.prate[s][j];
                let gf = g as f64;
                let jf = j as f64;
                let e_left = gf * gf + 2.0 * gf * m_r + var_r + m_r * m_r;
                let e_right = jf * jf + 2.0 * jf * m_v + var_v + m_v * m_v;
                n2 += mass * (e_left - e_right);
            }
        }
        let mean0 = if self.eta > 0.0 { (n2 - d2) / (2.0 * self.eta) } else { 0.0 };

        let mut means = vec![0.0; c + 1];
        means[0] = mean0;
        // Green: E[X_k] = E[X_{k-1}] + E[Y_k] - 1 + sum q_l P(A_j)(1 - E[Y_k | A_j]),
        // summing over patterns that have already emptied the queue (j < k).
        for k in 1..=g {
            let mut correction = 0.0;
            for (j, qrow) in self.qpm.iter().enumerate().take(k) {
                for (s, &mass) in qrow.iter().enumerate() {
                    if mass == 0.0 {
                        continue;
                    }
                    let slot_mean = (self.pshift[s][k] - self.pshift[s][k - 1])
                        + (self.prate[s][k] - self.prate[s][k - 1]);
                    correction += mass * (1.0 - slot_mean);
                }
                let _ = j;
            }
            means[k] = means[k - 1] + slot_means[k - 1] - 1.0 + correction;
        }
        // Red: backward from E[X_c] = E[X_0].
        means[c] = mean0;
        for k in (g + 1..c).rev() {
            means[k] = means[k + 1] - slot_means[k];
        }
        // All-zero processes stay identically empty.
        if self.arrivals.is_zero() {
            means.iter_mut().for_each(|m| *m = 0.0);
        }
        means
    }

    fn dist_tables(&self) -> &DistTables {
        self.dist.get_or_init(|| self.build_dist_tables())
    }

    /// Exact queue-length pmfs for every slot: invert `X_0` (stable at any
    /// radius), then push the distribution through the slot recursion with
    /// per-slot arrival pmfs truncated at `1e-16` tail mass.
    fn build_dist_tables(&self) -> DistTables {
        let g = self.plan.green;
        let c = self.plan.cycle();
        let scenarios = self.arrivals.scenarios();

        // Length heuristic: geometric-style tails decay at least like rho.
        let mean0 = self.mean_x[0].max(0.0);
        let cap = ((4.0 * mean0 + 64.0) as usize + 8 * c).min(4096);
        let mut x0_pmf = Vec::with_capacity(cap.min(256));
        let mut cum = 0.0;
        for x in 0..cap {
            let p = invert_pgf(self.x0_pgf(), x).max(0.0);
            x0_pmf.push(p);
            cum += p;
            if cum >= 1.0 - 1e-12 && x as f64 > mean0 {
                break;
            }
        }

        let slot_support: Vec<Vec<Vec<f64>>> = scenarios
            .iter()
            .map(|s| {
                s.slots
                    .iter()
                    .map(|slot| {
                        let hi = slot.quantile_upper(1e-16);
                        (0..=hi).map(|n| slot.pmf(n)).collect()
                    })
                    .collect()
            })
            .collect();

        let mut pmf: Vec<Vec<f64>> = vec![Vec::new(); c + 1];
        pmf[0] = x0_pmf.clone();
        let max_extra: usize = (0..c)
            .map(|i| {
                slot_support
                    .iter()
                    .map(|s| s[i].len() - 1)
                    .max()
                    .unwrap_or(0)
            })
            .sum();
        let full = x0_pmf.len() + max_extra;
        for v in pmf.iter_mut().skip(1) {
            v.resize(full, 0.0);
        }

        for (s, scen) in scenarios.iter().enumerate() {
            let mut v = vec![0.0; full];
            v[..x0_pmf.len()].copy_from_slice(&x0_pmf);
            let mut top = x0_pmf.len(); // exclusive bound of nonzero states
            for k in 1..=c {
                let arrivals = &slot_support[s][k - 1];
                let mut next = vec![0.0; full];
                if k <= g {
                    next[0] = v[0]; // empty queue absorbs through green
                    for x in 1..top {
                        let px = v[x];
                        if px == 0.0 {
                            continue;
                        }
                        for (y, &py) in arrivals.iter().enumerate() {
                            let t = x + y - 1;
                            if t < full {
                                next[t] += px * py;
                            }
                        }
                    }
                } else {
                    for x in 0..top {
                        let px = v[x];
                        if px == 0.0 {
                            continue;
                        }
                        for (y, &py) in arrivals.iter().enumerate() {
                            let t = x + y;
                            if t < full {
                                next[t] += px * py;
                            }
                        }
                    }
                }
                top = (top + arrivals.len()).min(full);
                v = next;
                let out = &mut pmf[k];
                for (o, &val) in out.iter_mut().zip(&v) {
                    *o += scen.weight * val;
                }
            }
        }

        let mut pmf_avg = vec![0.0; full];
        for k in 1..=c {
            for (a, &p) in pmf_avg.iter_mut().zip(&pmf[k]) {
                *a += p;
            }
        }
        pmf_avg.iter_mut().for_each(|p| *p /= c as f64);

        DistTables { pmf, pmf_avg }
    }

    /// `P(X >= m)` for `m = 1..=levels` at the cycle start, the green end,
    /// and a uniformly random slot, via pgf inversion and cumulative sums.
    pub fn tail_table(&self, levels: usize) -> TailTable {
        let g = self.plan.green;
        let tail = |pgf: &dyn Fn(Complex) -> Complex| -> Vec<f64> {
            let mut cum = 0.0;
            let mut tails = Vec::with_capacity(levels);
            for m in 1..=levels {
                cum += invert_pgf(pgf, m - 1);
                tails.push(1.0 - cum);
            }
            tails
        };
        TailTable {
            x0: tail(&self.x0_pgf()),
            x_green_end: tail(&|z| self.eval_xk(g, z).expect("g in range")),
            x_average: tail(&self.xbar_pgf()),
        }
    }
}

/// Horner evaluation of a truncated pmf power series.
fn eval_series(pmf: &[f64], z: Complex) -> Complex {
    let mut acc = Complex::new(0.0, 0.0);
    for &p in pmf.iter().rev() {
        acc = acc * z + p;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrival::{Scenario, SlotDistribution};
    use approx::assert_abs_diff_eq;

    fn c64(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn iid_poisson_queue() -> QueueSolution {
        let plan = SignalPlan::new(10, 10).unwrap();
        let arrivals = ArrivalProcess::poisson(20, 0.45).unwrap();
        solve_queue(plan, arrivals).unwrap()
    }

    #[test]
    fn zero_arrivals_trivial_solution() {
        let plan = SignalPlan::new(4, 3).unwrap();
        let sol = solve_queue(plan, ArrivalProcess::zero(7)).unwrap();
        assert_eq!(sol.q()[0], 1.0);
        assert!(sol.q()[1..].iter().all(|&q| q == 0.0));
        assert!(sol.means().iter().all(|&m| m == 0.0));
        for &z in &[c64(0.3, 0.2), c64(-0.5, 0.1), c64(0.9, 0.0)] {
            assert!((sol.eval_x0(z) - 1.0).norm() < 1e-12);
            assert!((sol.eval_xk(3, z).unwrap() - 1.0).norm() < 1e-12);
            assert!((sol.eval_xbar(z) - 1.0).norm() < 1e-12);
        }
        let tails = sol.tail_table(6);
        assert!(tails.x0.iter().all(|&t| t.abs() < 1e-9));
    }

    #[test]
    fn zeta_zero_arrivals_reduces_to_zg_minus_one() {
        let plan = SignalPlan::new(5, 2).unwrap();
        let sol = solve_queue(plan, ArrivalProcess::zero(7)).unwrap();
        for &z in &[c64(0.4, 0.3), c64(-0.7, 0.2)] {
            let zeta = sol.zeta(0, z).unwrap();
            let expect = z.powu(5) - 1.0;
            assert!((zeta - expect).norm() < 1e-13, "zeta {zeta} vs {expect}");
        }
    }

    #[test]
    fn zeta_vanishes_at_one() {
        let sol = iid_poisson_queue();
        for l in 0..10 {
            let z = sol.zeta(l, c64(1.0, 0.0)).unwrap();
            assert!(z.norm() < 1e-12, "zeta_{l}(1) = {z}");
        }
    }

    #[test]
    fn zeta_rejects_zero() {
        let sol = iid_poisson_queue();
        assert!(matches!(sol.zeta(0, c64(0.0, 0.0)), Err(Error::PoleAtZero)));
    }

    #[test]
    fn normalization_and_q_sanity() {
        let sol = iid_poisson_queue();
        let one = sol.eval_x0(c64(1.0, 0.0));
        assert!((one - 1.0).norm() < 1e-10);
        assert!(sol.q().iter().all(|&q| (0.0..=1.0).contains(&q)));
        let qsum: f64 = sol.q().iter().sum();
        assert!(qsum <= 1.0 + 1e-9);
        assert!(sol.system_residual() < 1e-9);
    }

    #[test]
    fn numerator_vanishes_at_roots() {
        let sol = iid_poisson_queue();
        for &root in &sol.roots().roots {
            let mut acc = Complex::new(0.0, 0.0);
            for l in 0..10 {
                acc += sol.q()[l] * sol.zeta(l, root).unwrap();
            }
            assert!(acc.norm() < 1e-8, "numerator at root {root}: {acc}");
        }
    }

    #[test]
    fn xc_equals_x0_pointwise() {
        let sol = iid_poisson_queue();
        for &z in &[
            c64(0.8, 0.1),
            c64(-0.85, 0.2),
            c64(0.3, -0.4), // series region
            c64(0.95, 0.0),
        ] {
            let x0 = sol.eval_x0(z);
            let xc = sol.eval_xk(20, z).unwrap();
            assert!((x0 - xc).norm() < 1e-10, "at {z}: {x0} vs {xc}");
        }
    }

    #[test]
    fn mean_x0_matches_central_difference() {
        let sol = iid_poisson_queue();
        let h = 1e-6;
        let num = (sol.eval_x0(c64(1.0 + h, 0.0)) - sol.eval_x0(c64(1.0 - h, 0.0))).re / (2.0 * h);
        assert_abs_diff_eq!(sol.mean_x0(), num, epsilon = 1e-6);
    }

    #[test]
    fn mean_xk_matches_central_difference() {
        let sol = iid_poisson_queue();
        let h = 1e-6;
        for k in [1usize, 5, 10, 11, 15, 20] {
            let num = (sol.eval_xk(k, c64(1.0 + h, 0.0)).unwrap()
                - sol.eval_xk(k, c64(1.0 - h, 0.0)).unwrap())
            .re
                / (2.0 * h);
            assert_abs_diff_eq!(sol.mean_xk(k).unwrap(), num, epsilon = 1e-6);
        }
        let num = (sol.eval_xbar(c64(1.0 + h, 0.0)) - sol.eval_xbar(c64(1.0 - h, 0.0))).re / (2.0 * h);
        assert_abs_diff_eq!(sol.mean_xbar(), num, epsilon = 1e-6);
    }

    #[test]
    fn red_period_mean_recursion_is_exact() {
        let sol = iid_poisson_queue();
        let slot_means = sol.arrivals().mean_per_slot();
        for k in 10..20 {
            let lhs = sol.mean_xk(k).unwrap() - sol.mean_xk(k + 1).unwrap();
            assert_abs_diff_eq!(lhs, -slot_means[k], epsilon = 1e-12);
        }
        // junction between green-forward and red-backward chains
        assert_abs_diff_eq!(
            sol.mean_xk(10).unwrap(),
            sol.mean_xk(11).unwrap() - slot_means[10],
            epsilon = 1e-9
        );
    }

    #[test]
    fn series_and_transform_regions_agree() {
        let sol = iid_poisson_queue();
        // both regions are accurate near the switch radius
        let r = 0.7;
        for k in [1usize, 9, 10, 15, 20] {
            for angle in [0.0, 1.3, 2.9, 4.4] {
                let z = Complex::from_polar(r, angle);
                let series = eval_series(&sol.dist_tables().pmf[k], z);
                let transform = sol.eval_xk_transform(k, z);
                assert!(
                    (series - transform).norm() < 1e-9,
                    "k={k} angle={angle}: {series} vs {transform}"
                );
            }
        }
    }

    #[test]
    fn unstable_queue_rejected() {
        let plan = SignalPlan::new(10, 10).unwrap();
        let arrivals = ArrivalProcess::poisson(20, 0.51).unwrap();
        assert!(matches!(
            solve_queue(plan, arrivals),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn cycle_mismatch_rejected() {
        let plan = SignalPlan::new(10, 10).unwrap();
        let arrivals = ArrivalProcess::poisson(19, 0.2).unwrap();
        assert!(matches!(
            solve_queue(plan, arrivals),
            Err(Error::CycleMismatch { .. })
        ));
    }

    #[test]
    fn correlated_two_scenario_instance_solves() {
        // platoon of 2 then nothing, or light Poisson everywhere
        let s1 = Scenario::new(
            0.5,
            vec![
                SlotDistribution::new(2, 0.0).unwrap(),
                SlotDistribution::ZERO,
                SlotDistribution::ZERO,
                SlotDistribution::ZERO,
            ],
        )
        .unwrap();
        let s2 = Scenario::new(0.5, vec![SlotDistribution::new(0, 0.3).unwrap(); 4]).unwrap();
        let arrivals = ArrivalProcess::new(4, vec![s1, s2]).unwrap();
        let sol = solve_queue(SignalPlan::new(2, 2).unwrap(), arrivals).unwrap();
        assert!((sol.eval_x0(c64(1.0, 0.0)) - 1.0).norm() < 1e-10);
        let h = 1e-6;
        let num = (sol.eval_x0(c64(1.0 + h, 0.0)) - sol.eval_x0(c64(1.0 - h, 0.0))).re / (2.0 * h);
        assert_abs_diff_eq!(sol.mean_x0(), num, epsilon = 1e-6);
    }
}
