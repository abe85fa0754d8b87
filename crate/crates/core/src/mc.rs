//! Monte-Carlo plumbing: replicate runners and interval estimates.

use rayon::prelude::*;

use crate::rng::RngStream;

/// Runs `f` once per replicate on derived streams, in parallel; results are
/// returned in replicate order so reductions are deterministic.
pub fn replicate<T, F>(reps: usize, rng: &RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&RngStream) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(&rng.replicate(i)))
        .collect()
}

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A proportion or mean with a confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Standard error of `value`.
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            ci_lo: value,
            ci_hi: value,
            se: 0.0,
            n: 0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_lo <= x && x <= self.ci_hi
    }
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: usize, n: usize, z: f64) -> Estimate {
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            ci_lo: 0.0,
            ci_hi: 1.0,
            se: f64::NAN,
            n,
        };
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Estimate {
        value: p,
        ci_lo: if successes == 0 {
            0.0
        } else {
            (center - half).max(0.0)
        },
        ci_hi: if successes == n {
            1.0
        } else {
            (center + half).min(1.0)
        },
        se: (p * (1.0 - p) / nf).sqrt(),
        n,
    }
}

/// Sample mean with a normal-approximation interval at `z` standard errors.
pub fn mean_estimate(values: &[f64], z: f64) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            se: f64::NAN,
            n,
        };
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let se = (var / nf).sqrt();
    Estimate {
        value: mean,
        ci_lo: mean - z * se,
        ci_hi: mean + z * se,
        se,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_bounds() {
        let e = wilson(0, 10, Z95);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.ci_lo, 0.0);
        assert!(e.ci_hi > 0.0 && e.ci_hi < 0.35);
        let e = wilson(10, 10, Z95);
        assert_eq!(e.ci_hi, 1.0);
        let e = wilson(50, 100, Z95);
        assert!((e.ci_lo - 0.4038).abs() < 1e-3 && (e.ci_hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn replicate_is_ordered_and_deterministic() {
        use rand::Rng;
        let s = RngStream::new(3);
        let a = replicate(64, &s, |r| r.rng().random::<u64>());
        let b = replicate(64, &s, |r| r.rng().random::<u64>());
        assert_eq!(a, b);
        assert_eq!(a[5], s.replicate(5).rng().random::<u64>());
    }

    #[test]
    fn mean_estimate_basic() {
        let e = mean_estimate(&[1.0, 2.0, 3.0], 2.0);
        assert_eq!(e.value, 2.0);
        assert!((e.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
