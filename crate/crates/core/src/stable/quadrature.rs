//! Direct evaluation of the unit-time profile `p(1, r)` by Fourier inversion,
//! and its large-radius series.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{euler_accelerate, graded_breaks, panel, panels};

/// Panels integrated exactly before switching to accelerated partial sums.
const PLAIN_ZEROS: usize = 40;
const MAX_PANELS: usize = 200_000;
const ABS_TOL: f64 = 1e-12;

/// `p(t, r)` for time `t` by direct quadrature of the radial inversion
/// integral:
/// d=1: `(1/pi) int cos(rs) e^{-t s^a} ds`,
/// d=2: `(1/2pi) int s J0(rs) e^{-t s^a} ds`,
/// d=3: `(1/(2 pi^2 r)) int s sin(rs) e^{-t s^a} ds` (the `J_{1/2}` case in closed form).
pub fn radial_density(alpha: f64, dim: usize, t: f64, r: f64) -> Result<f64> {
    let s_cut = (50.0 / t).powf(1.0 / alpha);
    let env = |s: f64| (-t * s.powf(alpha)).exp();
    match dim {
        1 => {
            let f = |s: f64| (r * s).cos() * env(s);
            let zero = |k: usize| (k as f64 + 0.5) * PI / r;
            Ok(oscillatory(&f, r, &zero, s_cut)? / PI)
        }
        2 => {
            let f = |s: f64| s * puruspe::Jn(0, r * s) * env(s);
            let zero = |k: usize| bessel_j0_zero(k) / r;
            Ok(oscillatory(&f, r, &zero, s_cut)? / (2.0 * PI))
        }
        3 => {
            if r == 0.0 {
                let f = |s: f64| s * s * env(s);
                Ok(oscillatory(&f, r, &|_| f64::INFINITY, s_cut)? / (2.0 * PI * PI))
            } else {
                let f = |s: f64| s * (r * s).sin() * env(s);
                let zero = |k: usize| (k + 1) as f64 * PI / r;
                Ok(oscillatory(&f, r, &zero, s_cut)? / (2.0 * PI * PI * r))
            }
        }
        _ => Err(Error::Parameter(format!(
            "kernel quadrature supports dimensions 1-3, got {dim}"
        ))),
    }
}

/// `k`-th positive zero of `J0` (from 0): McMahon expansion polished by Newton.
fn bessel_j0_zero(k: usize) -> f64 {
    let b = (k as f64 + 0.75) * PI;
    let mut z = b + 1.0 / (8.0 * b) - 31.0 / (384.0 * b.powi(3));
    for _ in 0..3 {
        z += puruspe::Jn(0, z) / puruspe::Jn(1, z);
    }
    z
}

/// Integral over `[0, inf)` of `f = oscillation * envelope`, where the
/// envelope is negligible past `s_cut` and `zero(k)` lists the sign changes.
fn oscillatory<F, Z>(f: &F, r: f64, zero: &Z, s_cut: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    Z: Fn(usize) -> f64,
{
    let first = if r > 0.0 { zero(0).min(s_cut) } else { s_cut };
    let b0 = first.min(1.0);
    let mut breaks = graded_breaks(b0, 40);
    let mut x = b0;
    while x < first {
        x = (x + 0.5).min(first);
        breaks.push(x);
    }
    let mut sum = panels(f, &breaks);
    if first >= s_cut {
        return Ok(sum);
    }

    let mut partial = Vec::new();
    let mut last_estimate = f64::NAN;
    let mut k = 0;
    loop {
        let a = zero(k);
        if a >= s_cut {
            return Ok(sum);
        }
        let b = zero(k + 1).min(s_cut);
        // wide half-periods: split so the envelope is well resolved
        let pieces = ((b - a) / 0.5).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for i in 0..pieces {
            sum += panel(f, a + i as f64 * h, a + (i + 1) as f64 * h);
        }
        k += 1;
        if k >= PLAIN_ZEROS {
            partial.push(sum);
            if partial.len() >= 16 {
                let est = euler_accelerate(&partial[partial.len() - 16..]);
                if (est - last_estimate).abs() < ABS_TOL {
                    return Ok(est);
                }
                last_estimate = est;
            }
        }
        if k > MAX_PANELS {
            return Err(Error::Quadrature {
                radius: r,
                reason: format!("no convergence after {MAX_PANELS} oscillation panels"),
            });
        }
    }
}

/// Large-radius expansion
/// `p(1,r) = sum_k (-1)^{k+1}/k! 2^{ak} pi^{-d/2-1} G(ak/2+1) G((ak+d)/2) sin(pi a k/2) r^{-ak-d}`,
/// summed until the terms fall below round-off. `None` when the series is
/// degenerate (`alpha = 2`) or its smallest term is not small enough.
pub fn asymptotic_density(alpha: f64, dim: usize, r: f64) -> Option<f64> {
    if alpha >= 2.0 || r <= 0.0 {
        return None;
    }
    let d = dim as f64;
    let lr = r.ln();
    let base = -(d / 2.0 + 1.0) * PI.ln();
    let mut sum = 0.0f64;
    let mut prev_mag = f64::INFINITY;
    for k in 1..5000usize {
        let kf = k as f64;
        let ak = alpha * kf;
        let ln_mag = base + ak * std::f64::consts::LN_2 + puruspe::ln_gamma(ak / 2.0 + 1.0)
            + puruspe::ln_gamma((ak + d) / 2.0)
            - puruspe::ln_gamma(kf + 1.0)
            - (ak + d) * lr;
        let mag = ln_mag.exp();
        if k > 2 && mag > prev_mag {
            return (prev_mag < 1e-13 * sum.abs()).then_some(sum);
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * mag * (PI * ak / 2.0).sin();
        if k > 2 && mag < 1e-18 * sum.abs() {
            return Some(sum);
        }
        prev_mag = mag;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_values_match_closed_form() {
        for (alpha, dim) in [(1.5, 1), (1.2, 1), (1.5, 2), (1.8, 3), (2.0, 1), (1.0, 2)] {
            let p = super::super::StableParams::extended(alpha, dim).unwrap();
            let q = radial_density(alpha, dim, 1.0, 0.0).unwrap();
            assert!((q - p.density_at_origin()).abs() < 1e-12, "{alpha} {dim}: {q}");
        }
    }

    #[test]
    fn cauchy_closed_forms() {
        // alpha = 1: p(1,x) = Gamma((d+1)/2) / pi^{(d+1)/2} (1+|x|^2)^{-(d+1)/2}
        for dim in 1..=3 {
            let d = dim as f64;
            let c = puruspe::gamma((d + 1.0) / 2.0) / PI.powf((d + 1.0) / 2.0);
            for r in [0.01f64, 0.3, 1.0, 4.0, 15.0] {
                let exact = c * (1.0 + r * r).powf(-(d + 1.0) / 2.0);
                let q = radial_density(1.0, dim, 1.0, r).unwrap();
                assert!((q / exact - 1.0).abs() < 1e-8, "d={dim} r={r}: {q} vs {exact}");
            }
            for r in [25.0f64, 100.0, 1e4] {
                let exact = c * (1.0 + r * r).powf(-(d + 1.0) / 2.0);
                let s = asymptotic_density(1.0, dim, r).unwrap();
                assert!((s / exact - 1.0).abs() < 1e-10, "d={dim} r={r}");
            }
        }
    }

    #[test]
    fn gaussian_closed_form() {
        for r in [0.0f64, 0.5, 2.0, 5.0] {
            let exact = (-r * r / 4.0).exp() / (2.0 * PI.sqrt());
            let q = radial_density(2.0, 1, 1.0, r).unwrap();
            assert!((q - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn series_and_quadrature_agree_on_overlap() {
        for (alpha, dim, r0) in [(1.5, 1, 10.0), (1.3, 2, 10.0), (1.7, 3, 10.0), (1.9, 1, 20.0)] {
            for r in [r0, 1.5 * r0, 2.0 * r0, 3.0 * r0] {
                let q = radial_density(alpha, dim, 1.0, r).unwrap();
                let s = asymptotic_density(alpha, dim, r).unwrap();
                assert!((q / s - 1.0).abs() < 1e-7, "a={alpha} d={dim} r={r}: {q} vs {s}");
            }
        }
    }

    #[test]
    fn j0_zeros_are_zeros() {
        for k in 0..50 {
            assert!(puruspe::Jn(0, bessel_j0_zero(k)).abs() < 1e-12);
        }
        assert!((bessel_j0_zero(0) - 2.404_825_557_695_773).abs() < 1e-12);
    }
}
