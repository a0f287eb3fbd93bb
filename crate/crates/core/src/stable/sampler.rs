use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::f64::consts::PI;

use super::StableParams;
use crate::error::{param_err, Result};
use crate::rng::RngStream;

/// One draw of a positive stable variable with `E exp(-l S) = exp(-l^index)`,
/// by the Kanter / Chambers-Mallows-Stuck representation.
pub fn sample_one_sided_stable(index: f64, rng: &mut RngStream) -> Result<f64> {
    if !(index > 0.0 && index < 1.0) {
        return param_err(format!("subordinator index must lie in (0,1), got {index}"));
    }
    Ok(one_sided_unchecked(index, rng))
}

#[inline]
fn one_sided_unchecked(a: f64, rng: &mut RngStream) -> f64 {
    // open interval (0, pi) so that sin(u) never vanishes
    let u = PI * (1.0 - rng.random::<f64>());
    let u = u.min(PI * (1.0 - f64::EPSILON));
    let w: f64 = Exp1.sample(rng);
    let w = w.max(f64::MIN_POSITIVE);
    (a * u).sin() / u.sin().powf(1.0 / a) * ((((1.0 - a) * u).sin()) / w).powf((1.0 - a) / a)
}

/// Writes one increment `L_{t+dt} - L_t` into `out` (length = dimension).
/// The increment is `sqrt(2 dt^{2/alpha} S) Z` with `S` positive
/// `(alpha/2)`-stable and `Z` standard normal, so that
/// `E exp(i xi . dL) = E exp(-dt^{2/alpha} S |xi|^2) = exp(-dt |xi|^alpha)`.
pub fn fill_increment(dt: f64, params: &StableParams, rng: &mut RngStream, out: &mut [f64]) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return param_err(format!("time step must be positive, got {dt}"));
    }
    if out.len() != params.dim() {
        return param_err(format!("output length {} != dimension {}", out.len(), params.dim()));
    }
    fill_increment_unchecked(dt, params.alpha(), rng, out);
    Ok(())
}

#[inline]
pub(crate) fn fill_increment_unchecked(dt: f64, alpha: f64, rng: &mut RngStream, out: &mut [f64]) {
    let s = if alpha >= 2.0 {
        1.0
    } else {
        one_sided_unchecked(alpha / 2.0, rng)
    };
    let scale = (2.0 * dt.powf(2.0 / alpha) * s).sqrt();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = scale * z;
    }
}

/// Allocating form of [`fill_increment`].
pub fn sample_increment(dt: f64, params: &StableParams, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.dim()];
    fill_increment(dt, params, rng, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_id, StreamDomain};

    fn stream(i: u64) -> RngStream {
        RngStream::new(2024, stream_id(StreamDomain::Generic, i))
    }

    #[test]
    fn laplace_transform_half_stable() {
        let mut rng = stream(1);
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| (-sample_one_sided_stable(0.5, &mut rng).unwrap()).exp())
            .sum::<f64>()
            / n as f64;
        assert!((mean - (-1f64).exp()).abs() < 3e-3, "{mean}");
    }

    #[test]
    fn half_stable_cdf_closed_form() {
        let mut rng = stream(2);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_one_sided_stable(0.5, &mut rng).unwrap())
            .collect();
        for s in [0.5, 1.0, 4.0] {
            let emp = draws.iter().filter(|&&x| x <= s).count() as f64 / n as f64;
            let exact = puruspe::erfc(1.0 / (2.0 * f64::sqrt(s)));
            assert!((emp - exact).abs() < 3e-3, "s={s}: {emp} vs {exact}");
        }
    }

    #[test]
    fn deterministic_sequence() {
        let a: Vec<f64> = {
            let mut r = stream(3);
            (0..100).map(|_| sample_one_sided_stable(0.7, &mut r).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut r = stream(3);
            (0..100).map(|_| sample_one_sided_stable(0.7, &mut r).unwrap()).collect()
        };
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut r = stream(4);
        assert!(sample_one_sided_stable(0.0, &mut r).is_err());
        assert!(sample_one_sided_stable(1.0, &mut r).is_err());
        let p = StableParams::new(1.5, 1).unwrap();
        assert!(sample_increment(0.0, &p, &mut r).is_err());
        assert!(sample_increment(-1.0, &p, &mut r).is_err());
    }

    #[test]
    fn characteristic_function_one_dimensional() {
        let p = StableParams::new(1.5, 1).unwrap();
        let mut r = stream(5);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_increment(1.0, &p, &mut r).unwrap()[0]).collect();
        for xi in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let cf = xs.iter().map(|x| (xi * x).cos()).sum::<f64>() / n as f64;
            let target = (-f64::powf(xi, 1.5)).exp();
            assert!((cf - target).abs() <= 4.0 / (n as f64).sqrt(), "xi={xi}: {cf} vs {target}");
        }
    }

    #[test]
    fn gaussian_limit_has_variance_two_dt() {
        let p = StableParams::extended(2.0, 1).unwrap();
        let mut r = stream(6);
        let n = 200_000;
        let var = (0..n).map(|_| sample_increment(0.5, &p, &mut r).unwrap()[0].powi(2)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }
}
