//! Analytic radius bounds for weakly sub-Poisson Boolean models and the
//! sandwich check that ties estimated radii together.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::Estimate;
use crate::quad::golden_max;

const LOG_S_LO: f64 = -20.0;
const LOG_S_HI: f64 = 20.0;
const TOL: f64 = 1e-10;

fn check(lambda: f64, d: usize) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be positive and finite"));
    }
    if d == 0 {
        return Err(Error::param("d", "must be >= 1"));
    }
    Ok(())
}

fn three_pow(d: usize) -> f64 {
    3f64.powi(d as i32)
}

/// `sqrt(d) (ln(3^d - 2) / lambda)^(1/d)`.
pub fn rc_upper_tilde(lambda: f64, d: usize) -> Result<f64> {
    check(lambda, d)?;
    let df = d as f64;
    Ok(df.sqrt() * ((three_pow(d) - 2.0).ln() / lambda).powf(1.0 / df))
}

/// `(1/2) (lambda (3^d - 1))^(-1/d)`.
pub fn rc_lower(lambda: f64, d: usize) -> Result<f64> {
    check(lambda, d)?;
    Ok(0.5 * (lambda * (three_pow(d) - 1.0)).powf(-1.0 / d as f64))
}

/// Largest `r` for which some `s > 0` gives
/// `s + (1 - e^s) lambda (2r)^d > ln(3^d - 1)`.
pub fn c_lambda(lambda: f64, d: usize) -> Result<f64> {
    check(lambda, d)?;
    let level = (three_pow(d) - 1.0).ln();
    let df = d as f64;
    let exponent = |r: f64| {
        let a = lambda * (2.0 * r).powf(df);
        golden_max(
            |t| {
                let s = t.exp();
                s + (1.0 - s.exp()) * a
            },
            LOG_S_LO,
            LOG_S_HI,
            TOL,
        )
        .1
    };
    // Beyond lambda (2r)^d = 1 the exponent is negative for every s > 0.
    let mut hi = 0.5 * lambda.powf(-1.0 / df);
    let mut lo = hi;
    loop {
        lo *= 0.5;
        if exponent(lo) > level {
            break;
        }
        if lo < hi * 1e-6 {
            return Err(Error::Bracket(format!("no feasible radius above {lo:e}")));
        }
    }
    while hi - lo > TOL * hi {
        let mid = 0.5 * (lo + hi);
        if exponent(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Infimum over `s > 0` of the smallest `r` with
/// `(1 - e^-s) lambda (r / sqrt(d))^d - s (ceil(k/2) - 1) > ln(3^d - 2)`.
pub fn c_lambda_k(lambda: f64, k: usize, d: usize) -> Result<f64> {
    check(lambda, d)?;
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    let level = (three_pow(d) - 2.0).ln();
    let extra = (k.div_ceil(2) - 1) as f64;
    let df = d as f64;
    let radius =
        |s: f64| df.sqrt() * ((level + s * extra) / ((1.0 - (-s).exp()) * lambda)).powf(1.0 / df);
    let (_, neg) = golden_max(|t| -radius(t.exp()), LOG_S_LO, LOG_S_HI, TOL);
    let r = -neg;
    if !r.is_finite() {
        return Err(Error::Bracket(format!(
            "no finite radius for lambda={lambda}, k={k}"
        )));
    }
    Ok(r)
}

/// `lambda_ref (rc_ref / r)^2`: the intensity at which radius `r` is
/// critical, given a reference critical radius `rc_ref` at `lambda_ref`.
pub fn critical_intensity(r: f64, lambda_ref: f64, rc_ref: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::param("r", "must be positive"));
    }
    Ok(lambda_ref * (rc_ref / r).powi(2))
}

/// Peierls ratio `rho (3^d - 2)`: contour sums converge when it is below 1.
pub fn peierls_ratio(rho: f64, d: usize) -> f64 {
    rho * (three_pow(d) - 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lower: f64,
    pub upper: f64,
    /// Point estimate between the bounds, if any.
    pub center: Option<f64>,
    pub lower_method: String,
    pub upper_method: String,
    pub parameters: Vec<(String, f64)>,
    pub violation: bool,
}

/// Closed-form bracket for a weakly sub-Poisson process of intensity
/// `lambda`, with `c(lambda)` and `c(lambda, k)` echoed as parameters.
pub fn analytic_report(lambda: f64, d: usize, k: usize) -> Result<BoundReport> {
    let lower = rc_lower(lambda, d)?;
    let upper = rc_upper_tilde(lambda, d)?;
    Ok(BoundReport {
        lower,
        upper,
        center: None,
        lower_method: "moment".into(),
        upper_method: "peierls".into(),
        parameters: vec![
            ("lambda".into(), lambda),
            ("d".into(), d as f64),
            ("k".into(), k as f64),
            ("c_lambda".into(), c_lambda(lambda, d)?),
            ("c_lambda_k".into(), c_lambda_k(lambda, k, d)?),
        ],
        violation: lower > upper,
    })
}

/// Checks `rlow(P2) <= rc(P1) <= rbar(P2)` for `P1 <=dcx P2`, flagging a
/// violation only when the intervals are disjoint in the wrong order.
pub fn sandwich_report(
    rc_lower_sub2: &Estimate,
    rc_upper_sub2: &Estimate,
    rc_hat_sub1: &Estimate,
) -> BoundReport {
    let violation = rc_lower_sub2.ci_lo > rc_hat_sub1.ci_hi
        || rc_hat_sub1.ci_lo > rc_upper_sub2.ci_hi
        || rc_lower_sub2.ci_lo > rc_upper_sub2.ci_hi;
    BoundReport {
        lower: rc_lower_sub2.value,
        upper: rc_upper_sub2.value,
        center: Some(rc_hat_sub1.value),
        lower_method: "expected_paths".into(),
        upper_method: "void_contours".into(),
        parameters: vec![
            ("lower_ci_lo".into(), rc_lower_sub2.ci_lo),
            ("lower_ci_hi".into(), rc_lower_sub2.ci_hi),
            ("rc_ci_lo".into(), rc_hat_sub1.ci_lo),
            ("rc_ci_hi".into(), rc_hat_sub1.ci_hi),
            ("upper_ci_lo".into(), rc_upper_sub2.ci_lo),
            ("upper_ci_hi".into(), rc_upper_sub2.ci_hi),
        ],
        violation,
    }
}
