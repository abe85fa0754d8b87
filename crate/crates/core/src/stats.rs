//! Clustering descriptors and stochastic-order checks: Ripley's K, void
//! probabilities, factorial moments, weak sub/super-Poisson reports, exact
//! convex-order tests on integer distributions, empirical dcx batteries and
//! second-difference convexity of lifted test functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GenConfig, ReplicationKernel};
use crate::geom::{CellGrid, PointPattern, Window};
use crate::mc::{self, Estimate};
use crate::rng::RngStream;

/// Explicit distribution on `{0, ..., cap}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntDistribution {
    pmf: Vec<f64>,
}

const MASS_TOL: f64 = 1e-12;

impl IntDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::param("pmf", "must be nonempty"));
        }
        if pmf.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::param("pmf", "masses must be finite and >= 0"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Truncation(1.0 - total));
        }
        Ok(IntDistribution { pmf })
    }

    /// Tabulates `kernel` up to the smallest cap (doubling from a moment
    /// guess) whose missing mass is below `1e-12`, or the exact support.
    pub fn from_kernel(kernel: &ReplicationKernel) -> Result<Self> {
        kernel.validate()?;
        if let Some(top) = kernel.max_support() {
            return IntDistribution::new(kernel.pmf_table(top as usize));
        }
        let mut cap = ((kernel.mean() * 8.0) as usize).max(32);
        loop {
            let pmf = kernel.pmf_table(cap);
            let missing = 1.0 - pmf.iter().sum::<f64>();
            if missing.abs() < 1e-13 {
                return IntDistribution::new(pmf);
            }
            if cap > 1 << 22 {
                return Err(Error::Truncation(missing));
            }
            cap *= 2;
        }
    }

    /// Tabulates `kernel` on exactly `{0, ..., cap}`.
    pub fn from_kernel_with_cap(kernel: &ReplicationKernel, cap: usize) -> Result<Self> {
        kernel.validate()?;
        IntDistribution::new(kernel.pmf_table(cap))
    }

    pub fn cap(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mass(&self) -> f64 {
        self.pmf.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 - m).powi(2) * p)
            .sum()
    }

    /// `E (X - k)+` for `k = 0..=cap`, by the recursion
    /// `pi(k) = pi(k + 1) + P(X > k)` from the top of the support.
    pub fn stop_loss(&self) -> Vec<f64> {
        let cap = self.cap();
        let mut pi = vec![0.0; cap + 1];
        let mut tail = 0.0;
        for k in (0..cap).rev() {
            tail += self.pmf[k + 1];
            pi[k] = pi[k + 1] + tail;
        }
        pi
    }

    /// Distribution of the sum of `n` independent copies.
    pub fn convolve_power(&self, n: usize) -> IntDistribution {
        let mut acc = vec![1.0];
        for _ in 0..n {
            let mut next = vec![0.0; acc.len() + self.pmf.len() - 1];
            for (i, a) in acc.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (j, b) in self.pmf.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            acc = next;
        }
        IntDistribution { pmf: acc }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CxVerdict {
    Equal,
    /// `A <=cx B`.
    ALeqB,
    /// `B <=cx A`.
    BLeqA,
    Incomparable,
}

impl CxVerdict {
    pub fn mirrored(self) -> Self {
        match self {
            CxVerdict::ALeqB => CxVerdict::BLeqA,
            CxVerdict::BLeqA => CxVerdict::ALeqB,
            v => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CxReport {
    pub verdict: CxVerdict,
    pub mean_a: f64,
    pub mean_b: f64,
    /// For incomparable pairs with equal means: the first `k` at which the
    /// stop-loss of `A` exceeds that of `B` by more than `tol`.
    pub witness: Option<usize>,
}

/// Convex order via equal means and ordered stop-loss transforms.
pub fn cx_order_check(a: &IntDistribution, b: &IntDistribution, tol: f64) -> Result<CxReport> {
    for d in [a, b] {
        let missing = 1.0 - d.mass();
        if missing.abs() > MASS_TOL {
            return Err(Error::Truncation(missing));
        }
    }
    let (mean_a, mean_b) = (a.mean(), b.mean());
    if (mean_a - mean_b).abs() > tol {
        return Ok(CxReport {
            verdict: CxVerdict::Incomparable,
            mean_a,
            mean_b,
            witness: None,
        });
    }
    let (sa, sb) = (a.stop_loss(), b.stop_loss());
    let at = |s: &[f64], k: usize| s.get(k).copied().unwrap_or(0.0);
    let top = a.cap().max(b.cap());
    let mut a_above = None;
    let mut b_above = None;
    for k in 0..=top {
        let diff = at(&sa, k) - at(&sb, k);
        if diff > tol && a_above.is_none() {
            a_above = Some(k);
        }
        if -diff > tol && b_above.is_none() {
            b_above = Some(k);
        }
    }
    let (verdict, witness) = match (a_above, b_above) {
        (None, None) => (CxVerdict::Equal, None),
        (None, Some(_)) => (CxVerdict::ALeqB, None),
        (Some(_), None) => (CxVerdict::BLeqA, None),
        (Some(k), Some(_)) => (CxVerdict::Incomparable, Some(k)),
    };
    Ok(CxReport {
        verdict,
        mean_a,
        mean_b,
        witness,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KCorrection {
    None,
    /// Only points of the window eroded by `r` act as centres.
    Border,
}

/// `K(r) = (1 / (lambda |B_r|)) sum_{X in B_r} #{other points within r}`
/// using the points inside the window; `B_r` is the window, eroded by `r`
/// under border correction. Poisson gives `lambda pi r^2` in the plane;
/// with `unit_free` the result is divided once more by `lambda`.
pub fn ripley_k(
    pattern: &PointPattern,
    r_grid: &[f64],
    intensity_hat: Option<f64>,
    correction: KCorrection,
    unit_free: bool,
) -> Result<Vec<f64>> {
    let pts = pattern.restricted_to_window();
    if pts.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let window = pattern.window();
    let lambda = intensity_hat.unwrap_or(pts.len() as f64 / window.volume());
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);
    let grid = CellGrid::build(&pts, if r_max > 0.0 { r_max } else { 1.0 })?;
    r_grid
        .iter()
        .map(|&r| {
            if r < 0.0 {
                return Err(Error::param("r", "radii must be >= 0"));
            }
            let inner = match correction {
                KCorrection::None => Some(window.clone()),
                KCorrection::Border => window.erode(r),
            };
            let Some(inner) = inner else {
                return Ok(f64::NAN);
            };
            let mut pairs = 0usize;
            for (i, p) in pts.points().enumerate() {
                if inner.contains(p) {
                    grid.for_each_within(&pts, p, r, |j, _| pairs += usize::from(j != i));
                }
            }
            let k = pairs as f64 / (lambda * inner.volume());
            Ok(if unit_free { k / lambda } else { k })
        })
        .collect()
}

/// Points of `pattern` in the half-open box `[lower, upper)`.
pub fn count_in_box(pattern: &PointPattern, b: &Window) -> usize {
    pattern
        .points()
        .filter(|p| {
            p.iter()
                .enumerate()
                .all(|(a, x)| b.lower()[a] <= *x && *x < b.upper()[a])
        })
        .count()
}

fn check_boxes(config: &GenConfig, boxes: &[Window]) -> Result<()> {
    for (i, b) in boxes.iter().enumerate() {
        if b.dim() != config.window.dim() {
            return Err(Error::DimensionMismatch {
                expected: config.window.dim(),
                found: b.dim(),
            });
        }
        if !(config.window.contains(b.lower()) && config.window.contains(b.upper())) {
            return Err(Error::param("box", format!("box {i} leaves the window")));
        }
    }
    Ok(())
}

/// Fraction of replicates with no point in `b` (half-open), with a Wilson
/// interval at `z` standard errors.
pub fn void_probability_z(
    config: &GenConfig,
    b: &Window,
    reps: usize,
    z: f64,
    rng: &RngStream,
) -> Result<Estimate> {
    if reps == 0 {
        return Err(Error::param("reps", "need at least one replicate"));
    }
    check_boxes(config, std::slice::from_ref(b))?;
    let empty = mc::replicate(reps, rng, |s| -> Result<bool> {
        Ok(count_in_box(&config.sample(s)?, b) == 0)
    });
    let mut hits = 0;
    for e in empty {
        hits += usize::from(e?);
    }
    Ok(mc::wilson(hits, reps, z))
}

/// Void probability of `b` with a 95% Wilson interval.
pub fn void_probability(
    config: &GenConfig,
    b: &Window,
    reps: usize,
    rng: &RngStream,
) -> Result<Estimate> {
    void_probability_z(config, b, reps, mc::Z95, rng)
}

fn check_disjoint(boxes: &[Window]) -> Result<()> {
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if boxes[i].overlaps(&boxes[j]) {
                return Err(Error::OverlappingBoxes(i, j));
            }
        }
    }
    Ok(())
}

/// Mean of `prod_i Phi(B_i)` over replicates for pairwise disjoint boxes,
/// with a normal interval at `z` standard errors.
pub fn factorial_moment_z(
    config: &GenConfig,
    boxes: &[Window],
    reps: usize,
    z: f64,
    rng: &RngStream,
) -> Result<Estimate> {
    if reps == 0 || boxes.is_empty() {
        return Err(Error::param(
            "reps,boxes",
            "need reps >= 1 and at least one box",
        ));
    }
    check_disjoint(boxes)?;
    check_boxes(config, boxes)?;
    let products = mc::replicate(reps, rng, |s| -> Result<f64> {
        let p = config.sample(s)?;
        Ok(boxes.iter().map(|b| count_in_box(&p, b) as f64).product())
    });
    let values: Vec<f64> = products.into_iter().collect::<Result<_>>()?;
    Ok(mc::mean_estimate(&values, z))
}

pub fn factorial_moment(
    config: &GenConfig,
    boxes: &[Window],
    reps: usize,
    rng: &RngStream,
) -> Result<Estimate> {
    factorial_moment_z(config, boxes, reps, mc::Z95, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakLabel {
    Sub,
    Super,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakFace {
    /// `"void"` or `"product"`.
    pub statistic: &'static str,
    /// Box indices involved.
    pub boxes: Vec<usize>,
    pub estimate: Estimate,
    /// Poisson value at the same intensity.
    pub reference: f64,
    pub label: WeakLabel,
}

fn label(est: &Estimate, reference: f64) -> WeakLabel {
    if est.ci_hi < reference {
        WeakLabel::Sub
    } else if est.ci_lo > reference {
        WeakLabel::Super
    } else {
        WeakLabel::Inconclusive
    }
}

/// Void probabilities of each box in `voids` against `exp(-lambda |B|)` and
/// product moments of each group in `products` against `prod lambda |B_i|`,
/// at 3 standard errors.
pub fn weak_poisson_report(
    config: &GenConfig,
    voids: &[Window],
    products: &[Vec<Window>],
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<WeakFace>> {
    let lambda = config.process.intensity();
    let mut faces = Vec::new();
    for (i, b) in voids.iter().enumerate() {
        let est = void_probability_z(config, b, reps, 3.0, &rng.derive("void").replicate(i))?;
        let reference = (-lambda * b.volume()).exp();
        faces.push(WeakFace {
            statistic: "void",
            boxes: vec![i],
            label: label(&est, reference),
            estimate: est,
            reference,
        });
    }
    for (i, group) in products.iter().enumerate() {
        let est = factorial_moment_z(
            config,
            group,
            reps,
            3.0,
            &rng.derive("product").replicate(i),
        )?;
        let reference = group.iter().map(|b| lambda * b.volume()).product();
        faces.push(WeakFace {
            statistic: "product",
            boxes: vec![i],
            label: label(&est, reference),
            estimate: est,
            reference,
        });
    }
    Ok(faces)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderClass {
    Dcx,
    Idcx,
    Ddcx,
}

/// Directionally convex test functions on count vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `exp(sum s_i x_i)`, `s_i >= 0`; a single `s` applies to every coordinate.
    ExpPlus { s: Vec<f64> },
    /// `exp(-sum s_i x_i)`.
    ExpMinus { s: Vec<f64> },
    /// `max(0, sum x_i - a)`.
    Ramp { a: f64 },
    /// `prod x_i`.
    ProductCounts,
    /// `(sum x_i)^2`.
    SumSquare,
}

impl TestFunction {
    pub fn class(&self) -> OrderClass {
        match self {
            TestFunction::ExpPlus { .. } | TestFunction::ProductCounts => OrderClass::Idcx,
            TestFunction::ExpMinus { .. } => OrderClass::Ddcx,
            TestFunction::Ramp { .. } | TestFunction::SumSquare => OrderClass::Dcx,
        }
    }

    pub fn label(&self) -> String {
        let join = |s: &[f64]| {
            s.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        match self {
            TestFunction::ExpPlus { s } => format!("exp_plus({})", join(s)),
            TestFunction::ExpMinus { s } => format!("exp_minus({})", join(s)),
            TestFunction::Ramp { a } => format!("ramp({a})"),
            TestFunction::ProductCounts => "product".into(),
            TestFunction::SumSquare => "sum_square".into(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let weighted = |s: &[f64]| -> f64 {
            x.iter()
                .enumerate()
                .map(|(i, xi)| s[if s.len() == 1 { 0 } else { i }] * xi)
                .sum()
        };
        match self {
            TestFunction::ExpPlus { s } => weighted(s).exp(),
            TestFunction::ExpMinus { s } => (-weighted(s)).exp(),
            TestFunction::Ramp { a } => (x.iter().sum::<f64>() - a).max(0.0),
            TestFunction::ProductCounts => x.iter().product(),
            TestFunction::SumSquare => x.iter().sum::<f64>().powi(2),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunction::ExpPlus { s } | TestFunction::ExpMinus { s } => {
                if !(s.len() == 1 || s.len() == dim) {
                    return Err(Error::param(
                        "s",
                        format!("need 1 or {dim} weights, got {}", s.len()),
                    ));
                }
                if s.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::param("s", "weights must be finite and >= 0"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// The default battery: exponentials at `s` in {0.2, 0.5, 1} per coordinate,
/// ramps at a few levels, the product and the squared sum.
pub fn default_battery(dim: usize) -> Vec<TestFunction> {
    let grid = [0.2, 0.5, 1.0];
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let s: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
        out.push(TestFunction::ExpPlus { s: s.clone() });
        out.push(TestFunction::ExpMinus { s });
        let mut a = 0;
        while a < dim && idx[a] == grid.len() - 1 {
            idx[a] = 0;
            a += 1;
        }
        if a == dim {
            break;
        }
        idx[a] += 1;
    }
    out.extend([0.0, 1.0, 2.0].map(|a| TestFunction::Ramp { a }));
    out.push(TestFunction::ProductCounts);
    out.push(TestFunction::SumSquare);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DcxRow {
    pub function: String,
    pub class: OrderClass,
    pub a: Estimate,
    pub b: Estimate,
    /// `E_A f <= E_B f` up to the 95% slack of the difference.
    pub consistent: bool,
}

/// Compares sample means of each test function; `consistent` holds when
/// the estimates do not contradict `A <= B` in the function's order class.
pub fn dcx_counts_check(
    a: &[Vec<u64>],
    b: &[Vec<u64>],
    battery: &[TestFunction],
) -> Result<Vec<DcxRow>> {
    let dim = a.first().or(b.first()).map(Vec::len).unwrap_or(0);
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("samples", "need samples on both sides"));
    }
    if a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(Error::param(
            "samples",
            "count vectors must share one dimension",
        ));
    }
    battery
        .iter()
        .map(|f| {
            f.validate(dim)?;
            let values = |s: &[Vec<u64>]| -> Vec<f64> {
                s.iter()
                    .map(|v| f.eval(&v.iter().map(|&c| c as f64).collect::<Vec<_>>()))
                    .collect()
            };
            let ea = mc::mean_estimate(&values(a), mc::Z95);
            let eb = mc::mean_estimate(&values(b), mc::Z95);
            let slack = mc::Z95 * (ea.se * ea.se + eb.se * eb.se).sqrt();
            Ok(DcxRow {
                function: f.label(),
                class: f.class(),
                consistent: ea.value <= eb.value + slack,
                a: ea,
                b: eb,
            })
        })
        .collect()
}

/// `g` on `-n_max..=n_max`, either directly or as `ln g` when `f` is an
/// exponential (whose lifted values can leave the f64 range).
struct Lifted {
    values: Vec<f64>,
    log: bool,
}

fn log_mgf(d: &IntDistribution, t: f64) -> f64 {
    let terms: Vec<f64> = d
        .pmf
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(j, &p)| p.ln() + t * j as f64)
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn lifted(f: &TestFunction, xi: &[IntDistribution], n_max: usize) -> Result<Lifted> {
    if xi.is_empty() {
        return Err(Error::param("xi", "need at least one coordinate"));
    }
    f.validate(xi.len())?;
    let weight = |s: &[f64], c: usize| s[if s.len() == 1 { 0 } else { c }];
    let ns = || (-(n_max as i64))..=(n_max as i64);
    match f {
        TestFunction::ExpPlus { s } | TestFunction::ExpMinus { s } => {
            let dir = if matches!(f, TestFunction::ExpPlus { .. }) {
                1.0
            } else {
                -1.0
            };
            let up: f64 = xi
                .iter()
                .enumerate()
                .map(|(c, d)| log_mgf(d, dir * weight(s, c)))
                .sum();
            let down: f64 = xi
                .iter()
                .enumerate()
                .map(|(c, d)| log_mgf(d, -dir * weight(s, c)))
                .sum();
            let values = ns()
                .map(|n| {
                    if n >= 0 {
                        n as f64 * up
                    } else {
                        (-n) as f64 * down
                    }
                })
                .collect();
            Ok(Lifted { values, log: true })
        }
        TestFunction::ProductCounts => {
            let means: Vec<f64> = xi.iter().map(IntDistribution::mean).collect();
            let values = ns()
                .map(|n| means.iter().map(|m| n as f64 * m).product())
                .collect();
            Ok(Lifted { values, log: false })
        }
        TestFunction::Ramp { .. } | TestFunction::SumSquare => {
            let mut step = vec![1.0];
            for d in xi {
                step = convolve(&step, &d.pmf);
            }
            let mut acc = vec![1.0];
            let mut pos = Vec::with_capacity(n_max + 1);
            let mut neg = Vec::with_capacity(n_max + 1);
            for n in 0..=n_max {
                if n > 0 {
                    acc = convolve(&acc, &step);
                }
                let expect = |sign: f64| -> f64 {
                    acc.iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(|(t, &p)| p * f.eval(&[sign * t as f64]))
                        .sum()
                };
                pos.push(expect(1.0));
                neg.push(expect(-1.0));
            }
            let values = ns()
                .map(|n| {
                    if n >= 0 {
                        pos[n as usize]
                    } else {
                        neg[(-n) as usize]
                    }
                })
                .collect();
            Ok(Lifted { values, log: false })
        }
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact `g(n) = E f(sgn(n) sum_{i <= |n|} xi_i)` for i.i.d. random vectors
/// `xi_i` with independent coordinates distributed as `xi[c]`; `g(0) = f(0)`.
/// Exponentials past the f64 range come out as `inf`.
pub fn lifted_values(
    f: &TestFunction,
    xi: &[IntDistribution],
    n_max: usize,
) -> Result<Vec<(i64, f64)>> {
    let l = lifted(f, xi, n_max)?;
    Ok(l.values
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i as i64 - n_max as i64, if l.log { v.exp() } else { v }))
        .collect())
}

/// Smallest second difference `g(n-1) + g(n+1) - 2 g(n)` over
/// `|n| < n_max`. Exponentials are differenced relative to `g(n)`, so a
/// difference beyond the f64 range is reported as `inf`, never NaN.
pub fn second_difference_convexity(
    f: &TestFunction,
    xi: &[IntDistribution],
    n_max: usize,
) -> Result<f64> {
    if n_max == 0 {
        return Err(Error::param("n_max", "must be >= 1"));
    }
    let l = lifted(f, xi, n_max)?;
    let diffs = l.values.windows(3).map(|w| {
        if l.log {
            let rel = (w[0] - w[1]).exp() + (w[2] - w[1]).exp() - 2.0;
            if rel == 0.0 {
                0.0
            } else {
                rel.signum() * (w[1] + rel.abs().ln()).exp()
            }
        } else {
            w[0] + w[2] - 2.0 * w[1]
        }
    });
    Ok(diffs.fold(f64::INFINITY, f64::min))
}

/// Poisson reference for K: `lambda pi r^2` in the plane.
pub fn poisson_k(lambda: f64, r: f64) -> f64 {
    lambda * PI * r * r
}
