//! Root finding for `z^g = Y(z, ..., z)` inside the unit circle, and
//! pgf-to-pmf inversion.
//!
//! The characteristic function `D(z) = z^g - Y(z, ..., z)` of a stable queue
//! has `g` zeros on or within the unit circle, one of them at `z = 1`; the
//! remaining `g - 1` lie strictly inside and pin down the boundary
//! probabilities. They are located by rooting a Taylor truncation of `D`
//! (degree grows until enough roots are confirmed) and polishing every
//! candidate with Newton iteration on the exact `D`.

use crate::arrival::ArrivalProcess;
use crate::error::{Error, Result};
use crate::Complex;

/// Distinct roots of `D` strictly inside the unit circle, with residuals.
#[derive(Debug, Clone)]
pub struct RootSet {
    /// Roots ordered by (real, imaginary).
    pub roots: Vec<Complex>,
    /// `|D(z_i)|` after polishing.
    pub residuals: Vec<f64>,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// Taylor coefficients about 0 of `D(z) = z^g - Y(z, ..., z)`, orders `0..=n`.
///
/// The series of each scenario is a shifted Poisson kernel, so coefficient `k`
/// is `1{k=g} - sum_s w_s e^{-L_s} L_s^(k-S_s) / (k-S_s)!` — analytic, no
/// numerical differentiation.
pub fn taylor_coeffs(process: &ArrivalProcess, green: usize, n: usize) -> Vec<f64> {
    let c = process.cycle_length();
    let mut coeffs = vec![0.0; n + 1];
    if green <= n {
        coeffs[green] += 1.0;
    }
    for s in process.scenarios() {
        let shift = s.shift_sum(0, c) as usize;
        let rate = s.rate_sum(0, c);
        if shift > n {
            continue;
        }
        let mut term = s.weight * (-rate).exp();
        for k in shift..=n {
            coeffs[k] -= term;
            term *= rate / (k - shift + 1) as f64;
        }
    }
    coeffs
}

/// Locate the `g - 1` distinct roots of `z^g = Y(z, ..., z)` with `|z| < 1`.
///
/// Requires stability (`g > E[Y]`). The Taylor truncation starts at `g + 90`
/// and grows by 10 per retry up to `g + 500`; each retry roots the truncated
/// polynomial, polishes every candidate by Newton iteration on the exact `D`,
/// and keeps the distinct polished roots inside the circle. Roots that polish
/// onto the unit circle (degenerate lattice-type arrivals) are reported in the
/// failure diagnostic rather than guessed at.
pub fn find_roots(process: &ArrivalProcess, green: usize) -> Result<RootSet> {
    let mean = process.total_mean();
    if mean >= green as f64 {
        return Err(Error::Unstable {
            queue: String::new(),
            mean_arrivals: mean,
            green,
            rho: mean / green as f64,
        });
    }
    if green == 1 {
        return Ok(RootSet {
            roots: Vec::new(),
            residuals: Vec::new(),
        });
    }

    let wanted = green - 1;
    let mut n = green + 90;
    let mut near_circle: Vec<Complex> = Vec::new();
    loop {
        n += 10;
        if n > green + 500 {
            return Err(Error::RootFinding(format!(
                "found no stable set of {wanted} roots inside the unit circle up to \
                 truncation order {} ({} near-circle roots seen): the arrival lattice \
                 may be periodic",
                green + 500,
                near_circle.len()
            )));
        }
        let coeffs = taylor_coeffs(process, green, n);
        let seeds = aberth_roots(&coeffs);

        let mut accepted: Vec<Complex> = Vec::new();
        let mut residuals: Vec<f64> = Vec::new();
        near_circle.clear();
        for seed in seeds {
            let Some(root) = newton_polish(process, green, seed) else {
                continue;
            };
            let r = root.norm();
            if (root - Complex::new(1.0, 0.0)).norm() <= 1e-6 {
                continue; // the trivial root at 1
            }
            if r >= 1.0 - 1e-12 {
                if r <= 1.0 + 1e-9 {
                    near_circle.push(root);
                }
                continue;
            }
            if accepted.iter().any(|z| (z - root).norm() <= 1e-8) {
                continue;
            }
            residuals.push(process.char_denominator(green, root).norm());
            accepted.push(root);
        }

        if accepted.len() == wanted {
            let mut order: Vec<usize> = (0..wanted).collect();
            order.sort_by(|&a, &b| {
                (accepted[a].re, accepted[a].im)
                    .partial_cmp(&(accepted[b].re, accepted[b].im))
                    .unwrap()
            });
            return Ok(RootSet {
                roots: order.iter().map(|&i| accepted[i]).collect(),
                residuals: order.iter().map(|&i| residuals[i]).collect(),
            });
        }
    }
}

/// Newton iteration on the exact `D(z)`; `None` when it fails to settle.
fn newton_polish(process: &ArrivalProcess, green: usize, seed: Complex) -> Option<Complex> {
    let mut z = seed;
    for _ in 0..100 {
        let (d, dp) = d_and_derivative(process, green, z);
        if dp.norm() < 1e-300 {
            return None;
        }
        let step = d / dp;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() < 1e-13 {
            return Some(z);
        }
    }
    None
}

fn d_and_derivative(process: &ArrivalProcess, green: usize, z: Complex) -> (Complex, Complex) {
    let c = process.cycle_length();
    let g = green as f64;
    let mut d = z.powu(green as u32);
    let mut dp = g * z.powu(green as u32 - 1);
    for s in process.scenarios() {
        let shift = s.shift_sum(0, c) as u32;
        let rate = s.rate_sum(0, c);
        let e = (rate * (z - 1.0)).exp();
        let zs = z.powu(shift);
        let term = s.weight * zs * e;
        d -= term;
        let mut deriv = rate * term;
        if shift > 0 {
            deriv += s.weight * shift as f64 * z.powu(shift - 1) * e;
        }
        dp -= deriv;
    }
    (d, dp)
}

/// All roots of a real-coefficient polynomial by Aberth–Ehrlich iteration.
///
/// Serves only as the seed stage: accuracy beyond Newton's basin is not
/// needed, so the sweep count is bounded and partial convergence is fine.
fn aberth_roots(coeffs: &[f64]) -> Vec<Complex> {
    // Trim leading (high-order) zero coefficients to the true degree.
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() < 1e-300 {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let a = &coeffs[..=deg];
    let da: Vec<f64> = (1..=deg).map(|k| k as f64 * a[k]).collect();

    // Spiral initialization across the unit-disk neighbourhood.
    let mut z: Vec<Complex> = (0..deg)
        .map(|j| {
            let frac = (j as f64 + 0.5) / deg as f64;
            let radius = 0.3 + 2.2 * frac;
            let angle = 2.0 * std::f64::consts::PI * frac * 7.0 + 0.4;
            Complex::from_polar(radius, angle)
        })
        .collect();

    for _ in 0..240 {
        let mut max_step = 0.0f64;
        for j in 0..deg {
            let p = horner(a, z[j]);
            let dp = horner(&da, z[j]);
            if dp.norm() < 1e-300 {
                z[j] += Complex::new(1e-6, 1e-6);
                continue;
            }
            let newton = p / dp;
            let mut sum = Complex::new(0.0, 0.0);
            for k in 0..deg {
                if k != j {
                    let diff = z[j] - z[k];
                    if diff.norm_sqr() > 1e-300 {
                        sum += diff.inv();
                    }
                }
            }
            let denom = Complex::new(1.0, 0.0) - newton * sum;
            let step = if denom.norm() < 1e-12 { newton } else { newton / denom };
            z[j] -= step;
            if !z[j].re.is_finite() || !z[j].im.is_finite() {
                z[j] = Complex::from_polar(0.5, j as f64);
                continue;
            }
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-12 {
            break;
        }
    }
    z
}

fn horner(coeffs: &[f64], z: Complex) -> Complex {
    let mut acc = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Recover `P(X = k)` from a pgf analytic on the closed unit disk.
///
/// Lattice-inversion quadrature with damping `r^k = 10^-5`: evaluates `X` at
/// `2k` points on the circle of radius `10^(-5/k)` with alternating twist, and
/// clamps tiny negative results (in `[-1e-8, 0)`) to zero. `P(X = 0)` is read
/// off at `z = 10^-10`; the aliasing error is below `1e-9` for any pgf.
pub fn invert_pgf<F: Fn(Complex) -> Complex>(pgf: F, k: usize) -> f64 {
    let gamma = 10.0;
    if k == 0 {
        return pgf(Complex::new(1e-10, 0.0)).re;
    }
    let kf = k as f64;
    let r = 10f64.powf(-gamma / (2.0 * kf));
    let mut sum = pgf(Complex::new(r, 0.0)).re;
    let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
    sum += alt * pgf(Complex::new(-r, 0.0)).re;
    for j in 1..k {
        let angle = std::f64::consts::PI * j as f64 / kf;
        let point = Complex::from_polar(r, angle);
        let twiddle = if j % 2 == 1 { -1.0 } else { 1.0 }; // e^{-i k theta_j}
        sum += 2.0 * twiddle * pgf(point).re;
    }
    let p = sum / (2.0 * kf * r.powi(k as i32));
    if (-1e-8..0.0).contains(&p) {
        0.0
    } else {
        p
    }
}
