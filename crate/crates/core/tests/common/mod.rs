//! Independent reference computations for tests. Nothing here calls into the
//! library's numerics.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gamma(k/2) for a positive integer k, built from Gamma(1) = 1,
/// Gamma(1/2) = sqrt(pi) and the recurrence Gamma(a + 1) = a Gamma(a).
pub fn gamma_half_integer(k: u32) -> f64 {
    assert!(k > 0);
    let (mut a, mut g) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    let target = f64::from(k) / 2.0;
    while a < target {
        g *= a;
        a += 1.0;
    }
    g
}

pub fn chi_square_density(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = f64::from(dof);
    x.powf(k / 2.0 - 1.0) * (-x / 2.0).exp() / (2f64.powf(k / 2.0) * gamma_half_integer(dof))
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // split into panels first so narrow features are not skipped
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            adaptive(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40)
        })
        .sum()
}

/// Chi-square upper tail by brute-force integration of the density over
/// `[statistic, statistic + 600]`.
pub fn chi_square_sf_oracle(statistic: f64, dof: u32) -> f64 {
    assert!(statistic > 0.0);
    integrate(&|x| chi_square_density(x, dof), statistic, statistic + 600.0, 1e-14)
}

/// Raw moments of orders 1..=4 for the exponential + normal mixture, written
/// out term by term.
pub fn mixture_moments_closed_form(p: f64, lambda: f64, mu: f64, sigma: f64) -> [f64; 4] {
    let s2 = sigma * sigma;
    let e = [1.0 / lambda, 2.0 / lambda.powi(2), 6.0 / lambda.powi(3), 24.0 / lambda.powi(4)];
    let n = [
        mu,
        s2 + mu * mu,
        3.0 * mu * s2 + mu.powi(3),
        3.0 * s2 * s2 + 6.0 * mu * mu * s2 + mu.powi(4),
    ];
    [0, 1, 2, 3].map(|i| p * e[i] + (1.0 - p) * n[i])
}

/// Sample raw moments of orders 1..=4 and their standard errors
/// (sample standard deviation of `x^v` over `sqrt(n)`).
pub fn moments_with_standard_errors(xs: &[f64]) -> [(f64, f64); 4] {
    let n = xs.len() as f64;
    [1, 2, 3, 4].map(|v| {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &x in xs {
            let t = x.powi(v);
            sum += t;
            sum_sq += t * t;
        }
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        (mean, (var / n).sqrt())
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
