//! Cancellation-safe complex helpers.
//!
//! The transform formulas evaluate differences like `z^a e^{u(z-1)} - z^b e^{v(z-1)}`
//! at points arbitrarily close to `z = 1`, where both sides tend to the same
//! value. Writing every such factor as `exp(s * ln z + lambda * (z - 1))` and
//! computing the difference through `expm1`/`ln1p` keeps the relative error of
//! the small difference at machine level, which the mean-vs-derivative checks
//! rely on.

use crate::Complex;

/// `ln(1 + w)` accurate for small `|w|`; caller guarantees `|w| < 1/2`.
///
/// The real part uses `ln1p(2u + |w|^2) / 2` with `w = u + iv`, which avoids
/// the loss of significance in `ln(|1 + w|)` when `|w|` is tiny. For larger
/// `|w|` the `2u + u^2` sum itself cancels; [`cln`] branches away first.
pub fn cln1p(w: Complex) -> Complex {
    let u = w.re;
    let v = w.im;
    let re = 0.5 * (2.0 * u + u * u + v * v).ln_1p();
    let im = v.atan2(1.0 + u);
    Complex::new(re, im)
}

/// `exp(w) - 1` accurate for small `|w|`.
pub fn cexpm1(w: Complex) -> Complex {
    let ex = w.re.exp_m1(); // e^x - 1
    let cos = w.im.cos();
    let sin = w.im.sin();
    // e^x cos y - 1 = (e^x - 1) cos y - 2 sin^2(y/2)
    let half = w.im * 0.5;
    let re = ex * cos - 2.0 * half.sin() * half.sin();
    let im = (ex + 1.0) * sin;
    Complex::new(re, im)
}

/// `ln z`, full-precision also when `z` is within rounding distance of 1.
pub fn cln(z: Complex) -> Complex {
    let w = z - 1.0;
    if w.norm_sqr() < 0.25 {
        cln1p(w)
    } else {
        z.ln()
    }
}

/// `e^base - e^(base + delta)`, stable in both regimes.
///
/// Near `delta = 0` the subtraction is run through `expm1`; away from it the
/// two exponentials differ enough in magnitude that the direct difference is
/// safe. Splitting on `Re(delta)` also avoids overflow in `exp(delta)` when
/// `base + delta` is moderate but `delta` alone is huge (small `|z|` with
/// negative powers).
pub fn exp_diff(base: Complex, delta: Complex) -> Complex {
    if delta.re.abs() <= 0.5 {
        -base.exp() * cexpm1(delta)
    } else {
        base.exp() - (base + delta).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln1p_matches_ln_away_from_one() {
        let z = Complex::new(0.3, -0.7);
        let d = cln(z) - z.ln();
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn ln1p_small_argument() {
        let w = Complex::new(1e-9, -2e-9);
        let got = cln1p(w);
        // ln(1+w) = w - w^2/2 + ...
        let expect = w - w * w * 0.5;
        assert!((got - expect).norm() < 1e-24);
    }

    #[test]
    fn expm1_small_argument() {
        let w = Complex::new(-3e-8, 4e-8);
        let got = cexpm1(w);
        let expect = w + w * w * 0.5;
        assert!((got - expect).norm() < 1e-22);
    }

    #[test]
    fn exp_diff_agrees_with_direct() {
        let base = Complex::new(0.2, 1.1);
        for &delta in &[
            Complex::new(1e-9, 3e-9),
            Complex::new(2.0, -1.0),
            Complex::new(-4.0, 0.3),
        ] {
            let got = exp_diff(base, delta);
            let direct = base.exp() - (base + delta).exp();
            assert!((got - direct).norm() <= 1e-13 * (1.0 + direct.norm()));
        }
    }
}
