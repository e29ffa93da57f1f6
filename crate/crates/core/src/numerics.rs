//! Scalar numerics shared by the other modules: quadrature, root finding,
//! regression and a few stable special functions.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// First positive zero of the Bessel function J₀.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Volume of the unit sphere 𝕊ⁿ ⊂ ℝⁿ⁺¹ (ω₀ = 2, ω₁ = 2π, ω₂ = 4π, ...).
pub fn sphere_volume(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * core::f64::consts::PI,
        _ => 2.0 * core::f64::consts::PI / (n as f64 - 1.0) * sphere_volume(n - 2),
    }
}

/// Least nonnegative remainder of `x` modulo `m > 0`.
pub fn rem_euclid(x: f64, m: f64) -> f64 {
    let r = x % m;
    if r < 0.0 {
        r + m
    } else {
        r
    }
}

/// `ln sinh(x)` for x > 0 without overflow.
pub fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - core::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln Σ e^{x_i}`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln((1/n) Σ e^{x_i})` with its leave-one-out jackknife standard error.
pub fn log_mean_exp_jackknife(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    let full = m + (s / n as f64).ln();
    if n < 2 {
        return (full, f64::INFINITY);
    }
    let loo: Vec<f64> = w
        .iter()
        .map(|wi| {
            let rest = (s - wi).max(0.0);
            if rest > 0.0 {
                m + (rest / (n - 1) as f64).ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    if loo.iter().any(|v| !v.is_finite()) {
        return (full, f64::INFINITY);
    }
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (full, var.sqrt())
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Bisection for an increasing function `f` with `f(lo) ≤ target ≤ f(hi)`.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordinary least squares fit `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_error: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_std_error = if n > 2.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
        slope_std_error,
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_volumes() {
        assert!((sphere_volume(2) - 4.0 * core::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_volume(3) - 2.0 * core::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn simpson_matches_antiderivative() {
        let v = integrate(|x| x.sinh(), 0.0, 1.0, 1e-13);
        assert!((v - (1f64.cosh() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn jackknife_of_constant_sample_is_zero() {
        let (m, se) = log_mean_exp_jackknife(&[0.3; 10]);
        assert!((m - 0.3).abs() < 1e-14);
        assert!(se < 1e-12);
    }

    #[test]
    fn rem_euclid_wraps_into_range() {
        let m = 2.0 * core::f64::consts::PI;
        for x in [-7.0, -m, -0.5, 0.0, 0.5, m, 13.0] {
            let r = rem_euclid(x, m);
            assert!((0.0..m).contains(&r), "{x} -> {r}");
            let k = ((x - r) / m).round();
            assert!((x - r - k * m).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_sinh_matches_direct_and_large() {
        assert!((ln_sinh(2.0) - 2f64.sinh().ln()).abs() < 1e-14);
        assert!((ln_sinh(800.0) - (800.0 - core::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x).collect();
        let fit = linear_fit(&xs, &ys);
        assert!((fit.slope + 3.0).abs() < 1e-12 && (fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}
