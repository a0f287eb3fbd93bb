//! Small quadrature toolkit: fixed-order Gauss-Legendre panels and
//! acceleration of alternating partial sums.

use std::sync::OnceLock;

const GL_ORDER: usize = 20;

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GL_ORDER))
}

/// 20-point Gauss-Legendre on `[a, b]`.
pub fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Sum of [`panel`] over consecutive breakpoints.
pub fn panels<F: Fn(f64) -> f64>(f: &F, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|w| panel(f, w[0], w[1])).sum()
}

/// Geometrically graded breakpoints `0, b 2^-levels, ..., b/2, b`, for
/// integrands with an algebraic singularity in a derivative at zero.
pub fn graded_breaks(b: f64, levels: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(levels as usize + 2);
    out.push(0.0);
    for k in (0..=levels).rev() {
        out.push(b * 0.5f64.powi(k as i32));
    }
    out
}

/// Limit estimate of a sequence of partial sums of an alternating series by
/// repeated averaging of neighbours (Euler transform on the partial sums).
pub fn euler_accelerate(partial: &[f64]) -> f64 {
    match partial.len() {
        0 => 0.0,
        1 => partial[0],
        _ => {
            let mut row = partial.to_vec();
            while row.len() > 1 {
                row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            }
            row[0]
        }
    }
}

/// Composite Simpson rule on a uniform grid of odd length.
pub fn simpson_uniform(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd number of samples");
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * step / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let f = |x: f64| x.powi(39) + 3.0 * x.powi(10) - 1.0;
        let exact = 1.0 / 40.0 * (2f64.powi(40) - 1.0) + 3.0 / 11.0 * (2f64.powi(11) - 1.0) - 1.0;
        let got = panel(&f, 1.0, 2.0);
        assert!((got - exact).abs() / exact.abs() < 1e-13);
    }

    #[test]
    fn weights_sum_to_two() {
        let (_, w) = rule();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_panels_handle_sqrt_singularity() {
        let f = |x: f64| x.sqrt();
        let got = panels(&f, &graded_breaks(1.0, 40));
        assert!((got - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn euler_transform_accelerates_log2_series() {
        let mut partial = Vec::new();
        let mut s = 0.0;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            partial.push(s);
        }
        let est = euler_accelerate(&partial);
        assert!((est - std::f64::consts::LN_2).abs() < 1e-7);
        assert!((s - std::f64::consts::LN_2).abs() > 1e-2);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        assert!((simpson_uniform(&v, 0.1) - 0.25).abs() < 1e-14);
    }
}
