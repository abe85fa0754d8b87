use percsim::bounds::{c_lambda, c_lambda_k, critical_intensity, rc_lower, rc_upper_tilde};
use percsim::shotnoise::{chernoff_level_bound, Level, ResponseFunction};

fn lambda_grid() -> Vec<f64> {
    (0..=24)
        .map(|i| 10f64.powf(-3.0 + 0.25 * i as f64))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn closed_forms_match_log_space_evaluation() {
    for d in 1..=4usize {
        let df = d as f64;
        for lam in lambda_grid() {
            let ln_k = (3f64.powi(d as i32) - 2.0).ln();
            let tilde = if ln_k == 0.0 {
                0.0
            } else {
                (0.5 * df.ln() + (ln_k.ln() - lam.ln()) / df).exp()
            };
            let lower = (-(2f64.ln()) - (lam.ln() + (3f64.powi(d as i32) - 1.0).ln()) / df).exp();
            let got_tilde = rc_upper_tilde(lam, d).unwrap();
            assert!(got_tilde == tilde || rel(got_tilde, tilde) < 1e-12);
            assert!(rel(rc_lower(lam, d).unwrap(), lower) < 1e-12);
        }
    }
    assert!(
        rel(
            critical_intensity(0.35, 2.0, 0.6).unwrap(),
            (2f64.ln() + 2.0 * (0.6f64 / 0.35).ln()).exp()
        ) < 1e-12
    );
}

#[test]
fn bound_ordering_across_grid() {
    for d in [2usize, 3, 4] {
        let mut prev_c = f64::INFINITY;
        for lam in lambda_grid() {
            let lo = rc_lower(lam, d).unwrap();
            let tilde = rc_upper_tilde(lam, d).unwrap();
            assert!(lo <= tilde, "d={d} lam={lam}");
            assert!(c_lambda_k(lam, 1, d).unwrap() >= tilde - 1e-8);
            let c = c_lambda(lam, d).unwrap();
            assert!(c > 0.0 && c <= prev_c, "d={d} lam={lam}");
            prev_c = c;
        }
    }
}

#[test]
fn chernoff_cube_bound_is_below_peierls_threshold_under_c_lambda() {
    let (lam, d) = (1.154701, 2usize);
    let c = c_lambda(lam, d).unwrap();
    let threshold = 1.0 / (3f64.powi(d as i32) - 1.0);
    let sites: [&[f64]; 3] = [&[0.0, 0.0], &[5.0, 0.0], &[0.0, 7.0]];
    for frac in [0.2, 0.5, 0.8, 0.95] {
        let r = frac * c;
        let a = lam * (2.0 * r).powi(2);
        let s = -a.ln();
        let cube = ResponseFunction::IndicatorCube { half_width: r };
        let bound = chernoff_level_bound(lam, &cube, s, 1.0, &sites, Level::AtLeast).unwrap();
        let per_site = bound.powf(1.0 / 3.0);
        assert!(rel(per_site, (-(s + (1.0 - s.exp()) * a)).exp()) < 1e-10);
        assert!(per_site < threshold, "r={r}: {per_site}");
    }
}
