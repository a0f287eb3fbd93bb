use proptest::prelude::*;
use stable_ddsde::quadrature::simpson_uniform;
use stable_ddsde::rng::{stream_id, RngStream, StreamDomain};
use stable_ddsde::stable::{
    build_kernel_table, ck_defect, fill_increment, kernel_bound_report, p_alpha, rho_alpha, sample_increment,
};
use stable_ddsde::{KernelTable, StableParams};
use std::sync::OnceLock;

fn table15() -> &'static KernelTable {
    static T: OnceLock<KernelTable> = OnceLock::new();
    T.get_or_init(|| build_kernel_table(StableParams::new(1.5, 1).unwrap(), 400).unwrap())
}

fn draws(alpha: f64, dim: usize, dt: f64, n: usize, stream: u64) -> Vec<f64> {
    let p = StableParams::new(alpha, dim).unwrap();
    let mut rng = RngStream::new(7, stream_id(StreamDomain::Generic, stream));
    let mut out = vec![0.0; n * dim];
    for x in out.chunks_mut(dim) {
        fill_increment(dt, &p, &mut rng, x).unwrap();
    }
    out
}

#[test]
fn characteristic_function_in_one_and_two_dimensions() {
    let probes = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
    for (alpha, dim, n) in [(1.2, 1, 1_000_000), (1.5, 1, 1_000_000), (1.8, 1, 1_000_000), (1.5, 2, 250_000)] {
        let xs = draws(alpha, dim, 1.0, n, 1);
        for xi in probes {
            // probe along the diagonal direction in 2-d
            let dir: Vec<f64> = (0..dim).map(|_| xi / (dim as f64).sqrt()).collect();
            let mean: f64 = xs
                .chunks(dim)
                .map(|x| x.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>().cos())
                .sum::<f64>()
                / n as f64;
            let err = (mean - (-xi.powf(alpha)).exp()).abs();
            assert!(err <= 4.0 / (n as f64).sqrt(), "alpha {alpha} d {dim} xi {xi}: {err}");
        }
    }
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn increments_are_self_similar() {
    let n = 100_000;
    let lambda: f64 = 8.0;
    let a = 1.5;
    let scaled: Vec<f64> = draws(a, 1, lambda * 0.3, n, 2).iter().map(|x| x * lambda.powf(-1.0 / a)).collect();
    let plain = draws(a, 1, 0.3, n, 3);
    let d = ks_statistic(scaled, plain);
    let critical = 1.628 * (2.0 / n as f64).sqrt();
    assert!(d < critical, "KS {d} vs {critical}");
}

#[test]
fn first_moment_scales_like_t_to_one_over_alpha() {
    let a = 1.5;
    let m: Vec<f64> = [0.1, 1.0, 10.0]
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let xs = draws(a, 1, t, 1_000_000, 10 + k as u64);
            xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64 / t.powf(1.0 / a)
        })
        .collect();
    let (lo, hi) = m.iter().fold((f64::MAX, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi / lo - 1.0 < 0.1, "{m:?}");
}

#[test]
fn origin_golden_values() {
    // Gamma(5/3)
    let gamma = 0.902_745_292_950_934;
    assert!((p_alpha(1.0, &[0.0], table15()).unwrap() - gamma / std::f64::consts::PI).abs() < 1e-6);
    let gauss = build_kernel_table(StableParams::extended(2.0, 1).unwrap(), 200).unwrap();
    assert!((p_alpha(1.0, &[0.0], &gauss).unwrap() - 0.5 / std::f64::consts::PI.sqrt()).abs() < 1e-6);
}

#[test]
fn mass_with_tail_correction() {
    let t_params = table15().params();
    let c = t_params.tail_coefficient();
    let a = t_params.alpha();
    for t in [0.1f64, 1.0, 10.0] {
        let r = 2000.0 * t.powf(1.0 / a);
        let n = 400_001;
        let h = 2.0 * r / (n - 1) as f64;
        let v: Vec<f64> = (0..n).map(|i| table15().density_radial(t, (-r + i as f64 * h).abs())).collect();
        let body = simpson_uniform(&v, h);
        let tail = 2.0 * c * t * r.powf(-a) / a;
        assert!((body + tail - 1.0).abs() < 1e-5, "t {t}: {}", body + tail);
    }
}

fn bound_grids(nt: usize, nx: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let ts = (0..nt).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / (nt - 1) as f64)).collect();
    let mut xs = vec![vec![0.0]];
    xs.extend((0..nx).map(|i| vec![10f64.powf(-3.0 + 6.0 * i as f64 / (nx - 1) as f64)]));
    (ts, xs)
}

#[test]
fn two_sided_bound_stable_under_refinement() {
    let (t1, x1) = bound_grids(9, 120);
    let (t2, x2) = bound_grids(17, 240);
    let a = kernel_bound_report(table15(), &t1, &x1).unwrap();
    let b = kernel_bound_report(table15(), &t2, &x2).unwrap();
    assert!(a.two_sided_min > 0.0 && a.two_sided_max.is_finite());
    for (u, v) in [(a.two_sided_min, b.two_sided_min), (a.two_sided_max, b.two_sided_max)] {
        assert!((u / v - 1.0).abs() < 0.2, "{u} vs {v}");
    }
    for (u, v) in [(a.gradient_max, b.gradient_max), (a.space_holder[1].constant, b.space_holder[1].constant)] {
        assert!(u / v < 2.0 && v / u < 2.0, "{u} vs {v}");
    }
    for (u, v) in a.time_holder.iter().zip(&b.time_holder) {
        assert!(u.constant / v.constant < 2.0 && v.constant / u.constant < 2.0);
    }
}

#[test]
fn ck_defect_decreases_with_step() {
    let d: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| ck_defect(table15(), 1.0, 1.0, 60.0, h).unwrap())
        .collect();
    assert!(d[2] <= 1e-3);
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}

#[test]
fn rho_closed_forms() {
    let p = StableParams::new(1.5, 1).unwrap();
    assert_eq!(rho_alpha(1.0, &[0.0], &p).unwrap(), 1.0);
    assert!((rho_alpha(1.0, &[1.0], &p).unwrap() - 2f64.powf(-2.5)).abs() < 1e-15);
    assert!(rho_alpha(0.0, &[1.0], &p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_path_is_exact_at_origin(t in 1e-3f64..1e3) {
        let p1 = p_alpha(1.0, &[0.0], table15()).unwrap();
        let pt = p_alpha(t, &[0.0], table15()).unwrap();
        prop_assert!((pt - t.powf(-1.0 / 1.5) * p1).abs() <= 1e-14 * pt);
    }

    #[test]
    fn kernel_positive_and_radially_decreasing(t in 1e-2f64..1e2, r in 0.0f64..1e3, dr in 1e-6f64..10.0) {
        let a = table15().density_radial(t, r);
        let b = table15().density_radial(t, r + dr);
        prop_assert!(a > 0.0 && b > 0.0 && b <= a);
    }

    #[test]
    fn rng_streams_replay(seed in any::<u64>(), id in 0u64..1 << 40) {
        let p = StableParams::new(1.3, 2).unwrap();
        let mut a = RngStream::new(seed, id);
        let mut b = RngStream::new(seed, id);
        for _ in 0..4 {
            prop_assert_eq!(sample_increment(0.5, &p, &mut a).unwrap(), sample_increment(0.5, &p, &mut b).unwrap());
        }
    }
}
