use percsim::generators::{sample_poisson, ReplicationKernel};
use percsim::mc::mean_estimate;
use percsim::stats::{
    cx_order_check, default_battery, lifted_values, ripley_k, second_difference_convexity,
    CxVerdict, IntDistribution, KCorrection, TestFunction,
};
use percsim::{RngStream, Window};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn mean_two() -> Vec<ReplicationKernel> {
    use ReplicationKernel::*;
    vec![
        Dirac { k: 2 },
        HyperGeometric { n: 12, m: 6, k: 4 },
        Binomial { n: 4, p: 0.5 },
        Binomial { n: 6, p: 1.0 / 3.0 },
        Binomial {
            n: 12,
            p: 1.0 / 6.0,
        },
        Binomial {
            n: 24,
            p: 1.0 / 12.0,
        },
        Poisson { mean: 2.0 },
        NegBinomial {
            r: 4.0,
            p: 1.0 / 3.0,
        },
        NegBinomial { r: 2.0, p: 0.5 },
        Geometric { p: 1.0 / 3.0 },
        GeoMixture {
            weights: vec![0.5, 0.5],
            params: vec![0.5, 0.25],
        },
    ]
}

fn dist(k: &ReplicationKernel) -> IntDistribution {
    IntDistribution::from_kernel(k).unwrap()
}

#[test]
fn stop_loss_matches_direct_sum() {
    let mut kernels = mean_two();
    kernels.push(ReplicationKernel::Poisson { mean: 0.3 });
    kernels.push(ReplicationKernel::Geometric { p: 0.9 });
    for k in &kernels {
        let d = dist(k);
        let pmf = d.pmf();
        for (j, v) in d.stop_loss().iter().enumerate() {
            let direct: f64 = pmf
                .iter()
                .enumerate()
                .skip(j + 1)
                .map(|(i, p)| (i - j) as f64 * p)
                .sum();
            assert!(
                (v - direct).abs() <= 1e-12 * direct.max(1.0),
                "{k:?} k={j}: {v} vs {direct}"
            );
        }
    }
}

fn expect(d: &IntDistribution, f: &impl Fn(f64) -> f64) -> f64 {
    d.pmf()
        .iter()
        .enumerate()
        .map(|(i, p)| p * f(i as f64))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn cx_verdict_agrees_with_convex_test_functions(i in 0usize..11, j in 0usize..11, seed in any::<u64>()) {
        let kernels = mean_two();
        let (a, b) = (dist(&kernels[i]), dist(&kernels[j]));
        let report = cx_order_check(&a, &b, 1e-12).unwrap();
        prop_assert_eq!(cx_order_check(&b, &a, 1e-12).unwrap().verdict, report.verdict.mirrored());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a_below = false;
        let mut b_below = false;
        for _ in 0..20 {
            let pieces: Vec<(f64, f64)> = (0..rng.random_range(1..5))
                .map(|_| {
                    let slope: f64 = rng.random_range(-3.0..3.0);
                    let knot: f64 = rng.random_range(0.0..10.0);
                    (slope, -slope * knot)
                })
                .collect();
            let f = |x: f64| pieces.iter().map(|(s, c)| s * x + c).fold(f64::NEG_INFINITY, f64::max);
            let (ea, eb) = (expect(&a, &f), expect(&b, &f));
            a_below |= ea < eb - 1e-9;
            b_below |= eb < ea - 1e-9;
            match report.verdict {
                CxVerdict::ALeqB => prop_assert!(ea <= eb + 1e-9),
                CxVerdict::BLeqA => prop_assert!(eb <= ea + 1e-9),
                CxVerdict::Equal => prop_assert!((ea - eb).abs() <= 1e-9),
                CxVerdict::Incomparable => {}
            }
        }
        if a_below && b_below {
            prop_assert_eq!(report.verdict, CxVerdict::Incomparable);
        }
        if let Some(k) = report.witness {
            let hinge = |x: f64| (x - k as f64).max(0.0);
            prop_assert!(expect(&a, &hinge) > expect(&b, &hinge));
        }
    }
}

#[test]
fn ripley_superposition_matches_single_poisson() {
    let w = Window::cube(2, 25.0).unwrap();
    let rng = RngStream::new(31);
    let radii = [0.3, 0.6, 1.0];
    let (mut merged, mut single): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        (vec![vec![]; 3], vec![vec![]; 3]);
    for i in 0..150 {
        let s = rng.replicate(i);
        let a = sample_poisson(&w, 0.4, 0.0, &s.derive("a")).unwrap();
        let b = sample_poisson(&w, 0.8, 0.0, &s.derive("b")).unwrap();
        let c = sample_poisson(&w, 1.2, 0.0, &s.derive("c")).unwrap();
        let ka = ripley_k(
            &a.superpose(&b).unwrap(),
            &radii,
            None,
            KCorrection::Border,
            false,
        )
        .unwrap();
        let kc = ripley_k(&c, &radii, None, KCorrection::Border, false).unwrap();
        for k in 0..3 {
            merged[k].push(ka[k]);
            single[k].push(kc[k]);
        }
    }
    for k in 0..3 {
        let (x, y) = (
            mean_estimate(&merged[k], 3.0),
            mean_estimate(&single[k], 3.0),
        );
        assert!(
            (x.value - y.value).abs() <= 3.0 * (x.se * x.se + y.se * y.se).sqrt(),
            "{x:?} {y:?}"
        );
    }
}

fn brute_lifted(f: &TestFunction, xi: &[IntDistribution], n: i64) -> f64 {
    let sums: Vec<IntDistribution> = xi
        .iter()
        .map(|d| d.convolve_power(n.unsigned_abs() as usize))
        .collect();
    let sign = if n < 0 { -1.0 } else { 1.0 };
    let (a, b) = (sums[0].pmf(), sums[1].pmf());
    let mut g = 0.0;
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            g += p * q * f.eval(&[sign * i as f64, sign * j as f64]);
        }
    }
    g
}

#[test]
fn lifted_values_match_product_grid() {
    use ReplicationKernel::*;
    let xi = [
        IntDistribution::from_kernel(&Binomial { n: 4, p: 0.5 }).unwrap(),
        IntDistribution::from_kernel_with_cap(&Geometric { p: 0.5 }, 48).unwrap(),
    ];
    for f in default_battery(2) {
        let lifted = lifted_values(&f, &xi, 4).unwrap();
        assert_eq!(lifted.len(), 9);
        for (n, v) in lifted {
            let want = brute_lifted(&f, &xi, n);
            assert!(
                (v - want).abs() <= 1e-10 * want.abs().max(1.0),
                "{} n={n}: {v} vs {want}",
                f.label()
            );
        }
    }
}

#[test]
fn exponential_second_differences_stay_finite_signed() {
    let xi =
        [IntDistribution::from_kernel(&ReplicationKernel::Geometric { p: 1.0 / 3.0 }).unwrap()];
    let f = TestFunction::ExpPlus { s: vec![1.0] };
    let m = second_difference_convexity(&f, &xi, 20).unwrap();
    assert!(m >= 0.0 && !m.is_nan());
}
