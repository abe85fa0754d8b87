//! Samplers for the point-process families compared throughout the crate:
//! homogeneous Poisson, deterministic lattices, perturbed lattices, annular
//! Poisson-Poisson cluster processes and the count-vector representation of
//! determinantal / Poisson / permanental processes on simultaneously
//! observable sets.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric, Hypergeometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PointPattern, Window};
use crate::mc;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Square,
    /// Unit triangular lattice: rows `sqrt(3)/2 * spacing` apart, odd rows
    /// shifted by `spacing / 2`, origin on the lattice.
    Hexagonal,
}

/// A planar lattice with nearest-neighbour distance `spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub spacing: f64,
}

impl LatticeSpec {
    pub fn square(spacing: f64) -> Self {
        LatticeSpec {
            kind: LatticeKind::Square,
            spacing,
        }
    }

    pub fn hexagonal(spacing: f64) -> Self {
        LatticeSpec {
            kind: LatticeKind::Hexagonal,
            spacing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::param(
                "spacing",
                format!("must be positive, got {}", self.spacing),
            ));
        }
        Ok(())
    }

    /// Points per unit area.
    pub fn intensity(&self) -> f64 {
        let s2 = self.spacing * self.spacing;
        match self.kind {
            LatticeKind::Square => 1.0 / s2,
            LatticeKind::Hexagonal => 2.0 / (3f64.sqrt() * s2),
        }
    }

    /// Largest distance from a lattice point to its Voronoi cell boundary.
    pub fn cell_circumradius(&self) -> f64 {
        match self.kind {
            LatticeKind::Square => self.spacing / 2f64.sqrt(),
            LatticeKind::Hexagonal => self.spacing / 3f64.sqrt(),
        }
    }

    fn for_each_point_in(&self, window: &Window, mut f: impl FnMut(f64, f64)) {
        let s = self.spacing;
        let (lo, hi) = (window.lower(), window.upper());
        match self.kind {
            LatticeKind::Square => {
                let (i0, i1) = ((lo[0] / s).ceil() as i64, (hi[0] / s).floor() as i64);
                let (j0, j1) = ((lo[1] / s).ceil() as i64, (hi[1] / s).floor() as i64);
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        f(i as f64 * s, j as f64 * s);
                    }
                }
            }
            LatticeKind::Hexagonal => {
                let h = 3f64.sqrt() / 2.0 * s;
                let (j0, j1) = ((lo[1] / h).ceil() as i64, (hi[1] / h).floor() as i64);
                for j in j0..=j1 {
                    let shift = if j.rem_euclid(2) == 1 { 0.5 * s } else { 0.0 };
                    let i0 = ((lo[0] - shift) / s).ceil() as i64;
                    let i1 = ((hi[0] - shift) / s).floor() as i64;
                    for i in i0..=i1 {
                        f(i as f64 * s + shift, j as f64 * h);
                    }
                }
            }
        }
    }
}

/// All lattice points inside `window` dilated by `margin`.
pub fn make_lattice(spec: &LatticeSpec, window: &Window, margin: f64) -> Result<PointPattern> {
    spec.validate()?;
    require_planar(window)?;
    let bounds = window.dilate(margin);
    let mut coords = Vec::new();
    spec.for_each_point_in(&bounds, |x, y| {
        coords.push(x);
        coords.push(y);
    });
    Ok(PointPattern::from_flat(window.clone(), margin, coords))
}

fn require_planar(window: &Window) -> Result<()> {
    if window.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "lattice-based processes are planar, window has dimension {}",
            window.dim()
        )));
    }
    Ok(())
}

/// Distribution of the number of replicas of each source point.
///
/// Conventions: `Geometric(p)` has pmf `p (1-p)^i` (mean `(1-p)/p`);
/// `NegBinomial(r, p)` has pmf `C(r+i-1, i) p^i (1-p)^r` (mean `rp/(1-p)`);
/// `HyperGeometric(n, m, k)` has pmf `C(m,i) C(n-m,k-i) / C(n,k)` (mean
/// `km/n`); `GeoMixture` mixes `Geometric(params[j])` with `weights[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReplicationKernel {
    Dirac { k: u64 },
    Binomial { n: u64, p: f64 },
    Poisson { mean: f64 },
    NegBinomial { r: f64, p: f64 },
    Geometric { p: f64 },
    HyperGeometric { n: u64, m: u64, k: u64 },
    GeoMixture { weights: Vec<f64>, params: Vec<f64> },
}

impl ReplicationKernel {
    pub fn validate(&self) -> Result<()> {
        use ReplicationKernel::*;
        let unit = |name, p: f64, open_lo: bool, open_hi: bool| {
            let ok_lo = if open_lo { p > 0.0 } else { p >= 0.0 };
            let ok_hi = if open_hi { p < 1.0 } else { p <= 1.0 };
            if ok_lo && ok_hi {
                Ok(())
            } else {
                Err(Error::param(name, format!("out of range: {p}")))
            }
        };
        match self {
            Dirac { .. } => Ok(()),
            Binomial { n, p } => {
                if *n == 0 {
                    return Err(Error::param("n", "binomial needs n >= 1"));
                }
                unit("p", *p, false, false)
            }
            Poisson { mean } => {
                if *mean >= 0.0 && mean.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("mean", format!("must be >= 0, got {mean}")))
                }
            }
            NegBinomial { r, p } => {
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(Error::param("r", format!("must be positive, got {r}")));
                }
                unit("p", *p, true, true)
            }
            Geometric { p } => unit("p", *p, true, true),
            HyperGeometric { n, m, k } => {
                if m > n || k > n {
                    Err(Error::param(
                        "m,k",
                        format!("need m, k <= n, got n={n} m={m} k={k}"),
                    ))
                } else {
                    Ok(())
                }
            }
            GeoMixture { weights, params } => {
                if weights.is_empty() || weights.len() != params.len() {
                    return Err(Error::param(
                        "weights",
                        "need one weight per geometric component",
                    ));
                }
                if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    return Err(Error::param("weights", "weights must lie in [0, 1]"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param(
                        "weights",
                        format!("must sum to 1, got {total}"),
                    ));
                }
                params
                    .iter()
                    .try_for_each(|p| unit("params", *p, true, false))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        use ReplicationKernel::*;
        match self {
            Dirac { k } => *k as f64,
            Binomial { n, p } => *n as f64 * p,
            Poisson { mean } => *mean,
            NegBinomial { r, p } => r * p / (1.0 - p),
            Geometric { p } => (1.0 - p) / p,
            HyperGeometric { n, m, k } => {
                if *n == 0 {
                    0.0
                } else {
                    (*k as f64) * (*m as f64) / (*n as f64)
                }
            }
            GeoMixture { weights, params } => weights
                .iter()
                .zip(params)
                .map(|(w, p)| w * (1.0 - p) / p)
                .sum(),
        }
    }

    /// Largest value with positive probability, `None` when unbounded.
    pub fn max_support(&self) -> Option<u64> {
        use ReplicationKernel::*;
        match self {
            Dirac { k } => Some(*k),
            Binomial { n, p } => Some(if *p == 0.0 { 0 } else { *n }),
            Poisson { mean } if *mean == 0.0 => Some(0),
            HyperGeometric { m, k, .. } => Some(*m.min(k)),
            GeoMixture { params, .. } if params.iter().all(|p| *p == 1.0) => Some(0),
            _ => None,
        }
    }

    /// Probability masses at `0..=cap`.
    pub fn pmf_table(&self, cap: usize) -> Vec<f64> {
        use ReplicationKernel::*;
        let mut pmf = vec![0.0; cap + 1];
        match self {
            Dirac { k } => {
                if (*k as usize) <= cap {
                    pmf[*k as usize] = 1.0;
                }
            }
            Binomial { n, p } => {
                let n = *n as usize;
                for (i, v) in pmf.iter_mut().enumerate().take(n.min(cap) + 1) {
                    *v = (ln_choose(n as u64, i as u64)
                        + i as f64 * p.ln()
                        + (n - i) as f64 * (1.0 - p).ln())
                    .exp();
                    if v.is_nan() {
                        // 0 * ln(0) at p in {0, 1}.
                        *v = if (*p == 0.0 && i == 0) || (*p == 1.0 && i == n) {
                            1.0
                        } else {
                            0.0
                        };
                    }
                }
            }
            Poisson { mean } => {
                for (i, v) in pmf.iter_mut().enumerate() {
                    *v = if *mean == 0.0 {
                        if i == 0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (i as f64 * mean.ln() - mean - ln_factorial(i as u64)).exp()
                    };
                }
            }
            NegBinomial { r, p } => {
                for (i, v) in pmf.iter_mut().enumerate() {
                    let i_f = i as f64;
                    *v = (ln_gamma(r + i_f) - ln_gamma(*r) - ln_factorial(i as u64)
                        + i_f * p.ln()
                        + r * (1.0 - p).ln())
                    .exp();
                }
            }
            Geometric { p } => {
                for (i, v) in pmf.iter_mut().enumerate() {
                    *v = p * (1.0 - p).powi(i as i32);
                }
            }
            HyperGeometric { n, m, k } => {
                let (n, m, k) = (*n, *m, *k);
                let lo = (k + m).saturating_sub(n);
                let hi = m.min(k);
                let denom = ln_choose(n, k);
                for i in lo..=hi.min(cap as u64) {
                    pmf[i as usize] = (ln_choose(m, i) + ln_choose(n - m, k - i) - denom).exp();
                }
            }
            GeoMixture { weights, params } => {
                for (i, v) in pmf.iter_mut().enumerate() {
                    *v = weights
                        .iter()
                        .zip(params)
                        .map(|(w, p)| w * p * (1.0 - p).powi(i as i32))
                        .sum();
                }
            }
        }
        pmf
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        use ReplicationKernel::*;
        match self {
            Dirac { k } => *k,
            Binomial { n, p } => rand_distr::Binomial::new(*n, *p)
                .expect("validated")
                .sample(rng),
            Poisson { mean } => poisson_count(*mean, rng),
            NegBinomial { r, p } => {
                // Gamma(shape r, scale p/(1-p)) mixture of Poisson.
                let rate = Gamma::new(*r, p / (1.0 - p))
                    .expect("validated")
                    .sample(rng);
                poisson_count(rate, rng)
            }
            Geometric { p } => geometric(*p, rng),
            HyperGeometric { n, m, k } => Hypergeometric::new(*n, *m, *k)
                .expect("validated")
                .sample(rng),
            GeoMixture { weights, params } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = params.len() - 1;
                for (j, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                geometric(params[pick], rng)
            }
        }
    }
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

fn geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    Geometric::new(p).expect("p in (0, 1)").sample(rng)
}

/// Draws one value of `kernel` from the start of stream `rng`.
pub fn sample_replication(kernel: &ReplicationKernel, rng: &RngStream) -> Result<u64> {
    kernel.validate()?;
    Ok(kernel.sample(&mut rng.rng()))
}

pub(crate) fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Lanczos approximation (g = 7, n = 9), relative error below 1e-15 for
/// positive arguments; small integers are summed exactly.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x == x.floor() && (1.0..=171.0).contains(&x) {
        return (2..x as u64).map(|i| (i as f64).ln()).sum();
    }
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Distribution of the displacement of each replica from its source point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TranslationKernel {
    /// Uniform on the Voronoi cell of the source lattice point (a square for
    /// square lattices, a hexagon for hexagonal ones).
    UniformCell,
    /// Uniform on the annulus `inner <= |x| <= outer`.
    UniformAnnulus { inner: f64, outer: f64 },
    /// Uniform on the disc of the given radius.
    UniformBall { radius: f64 },
}

impl TranslationKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            TranslationKernel::UniformCell => Ok(()),
            TranslationKernel::UniformAnnulus { inner, outer } => {
                if *inner >= 0.0 && inner < outer && outer.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(
                        "annulus",
                        format!("need 0 <= inner < outer, got {inner}, {outer}"),
                    ))
                }
            }
            TranslationKernel::UniformBall { radius } => {
                if *radius > 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(
                        "radius",
                        format!("must be positive, got {radius}"),
                    ))
                }
            }
        }
    }

    pub fn support_radius(&self, lattice: &LatticeSpec) -> f64 {
        match self {
            TranslationKernel::UniformCell => lattice.cell_circumradius(),
            TranslationKernel::UniformAnnulus { outer, .. } => *outer,
            TranslationKernel::UniformBall { radius } => *radius,
        }
    }

    pub fn sample_offset<R: Rng + ?Sized>(&self, lattice: &LatticeSpec, rng: &mut R) -> [f64; 2] {
        match self {
            TranslationKernel::UniformCell => {
                let s = lattice.spacing;
                match lattice.kind {
                    LatticeKind::Square => [
                        (rng.random::<f64>() - 0.5) * s,
                        (rng.random::<f64>() - 0.5) * s,
                    ],
                    LatticeKind::Hexagonal => {
                        // Pointy-top hexagon: |x| <= s/2, |y| <= (s - |x|) / sqrt(3).
                        let r = s / 3f64.sqrt();
                        loop {
                            let x = (rng.random::<f64>() - 0.5) * s;
                            let y = (rng.random::<f64>() * 2.0 - 1.0) * r;
                            if y.abs() <= (s - x.abs()) / 3f64.sqrt() {
                                return [x, y];
                            }
                        }
                    }
                }
            }
            TranslationKernel::UniformAnnulus { inner, outer } => {
                annulus_offset(*inner, *outer, rng)
            }
            TranslationKernel::UniformBall { radius } => annulus_offset(0.0, *radius, rng),
        }
    }
}

fn annulus_offset<R: Rng + ?Sized>(inner: f64, outer: f64, rng: &mut R) -> [f64; 2] {
    let u: f64 = rng.random();
    let rho = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    [rho * theta.cos(), rho * theta.sin()]
}

/// Homogeneous Poisson process of the given intensity in `window` dilated
/// by `margin`.
pub fn sample_poisson(
    window: &Window,
    intensity: f64,
    margin: f64,
    rng: &RngStream,
) -> Result<PointPattern> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::param(
            "intensity",
            format!("must be >= 0, got {intensity}"),
        ));
    }
    let mut r = rng.rng();
    let bounds = window.dilate(margin);
    let n = poisson_count(intensity * bounds.volume(), &mut r);
    let d = window.dim();
    let mut coords = Vec::with_capacity(n as usize * d);
    for _ in 0..n {
        for a in 0..d {
            coords.push(bounds.lower()[a] + r.random::<f64>() * bounds.side(a));
        }
    }
    Ok(PointPattern::from_flat(window.clone(), margin, coords))
}

/// Perturbed lattice: every lattice point is replicated according to
/// `repl` and each replica is displaced independently according to `trans`.
/// The margin is the translation support radius.
pub fn sample_perturbed_lattice(
    spec: &LatticeSpec,
    repl: &ReplicationKernel,
    trans: &TranslationKernel,
    window: &Window,
    rng: &RngStream,
) -> Result<PointPattern> {
    sample_perturbed_lattice_with_margin(spec, repl, trans, window, trans.support_radius(spec), rng)
}

fn sample_perturbed_lattice_with_margin(
    spec: &LatticeSpec,
    repl: &ReplicationKernel,
    trans: &TranslationKernel,
    window: &Window,
    margin: f64,
    rng: &RngStream,
) -> Result<PointPattern> {
    spec.validate()?;
    repl.validate()?;
    trans.validate()?;
    require_planar(window)?;
    let keep = window.dilate(margin);
    let sources = window.dilate(margin + trans.support_radius(spec));
    let mut r = rng.rng();
    let mut pattern = PointPattern::empty(window.clone(), margin);
    spec.for_each_point_in(&sources, |x, y| {
        for _ in 0..repl.sample(&mut r) {
            let [dx, dy] = trans.sample_offset(spec, &mut r);
            let p = [x + dx, y + dy];
            if keep.contains(&p) {
                pattern.push(&p);
            }
        }
    });
    Ok(pattern)
}

/// Poisson-Poisson cluster process with annular clusters: Poisson(`alpha`)
/// centres, each with Poisson(`mu`) points uniform on the annulus
/// `B(R) \ B(R - delta)` around it.
pub fn sample_annular_cox(
    alpha: f64,
    radius: f64,
    delta: f64,
    mu: f64,
    window: &Window,
    margin: f64,
    rng: &RngStream,
) -> Result<PointPattern> {
    validate_annular(alpha, radius, delta, mu)?;
    require_planar(window)?;
    let keep = window.dilate(margin);
    let centers = sample_poisson(window, alpha, margin + radius, &rng.derive("centers"))?;
    let mut r = rng.derive("clusters").rng();
    let mut pattern = PointPattern::empty(window.clone(), margin);
    for c in centers.points() {
        for _ in 0..poisson_count(mu, &mut r) {
            let [dx, dy] = annulus_offset(radius - delta, radius, &mut r);
            let p = [c[0] + dx, c[1] + dy];
            if keep.contains(&p) {
                pattern.push(&p);
            }
        }
    }
    Ok(pattern)
}

fn validate_annular(alpha: f64, radius: f64, delta: f64, mu: f64) -> Result<()> {
    if !(alpha >= 0.0 && mu >= 0.0 && alpha.is_finite() && mu.is_finite()) {
        return Err(Error::param("alpha,mu", "must be finite and >= 0"));
    }
    if !(delta > 0.0 && delta <= radius && radius.is_finite()) {
        return Err(Error::param(
            "delta",
            format!("need 0 < delta <= R, got delta={delta}, R={radius}"),
        ));
    }
    Ok(())
}

/// Probability that each of `cells` equal arcs of an annular cluster with
/// Poisson(`mu`) points receives at least one point: `(1 - e^{-mu/K})^K`.
pub fn open_probability(cells: f64, mu: f64) -> f64 {
    (cells * (-(-mu / cells).exp()).ln_1p()).exp()
}

/// Cluster mean `mu(R) = (2 pi R / r) log(R / sqrt(log R))`, defined for
/// `R > 1`.
pub fn cluster_mean(radius: f64, r: f64) -> f64 {
    let l = radius.ln();
    2.0 * PI * radius / r * (l - 0.5 * l.ln())
}

/// `ln(p(R, mu(R)) R^2 / mu(R))` with `K = 2 pi R / r` cells, evaluated in
/// log space so that it stays finite for astronomically large `R`.
pub fn open_center_log_exposure(radius: f64, r: f64) -> f64 {
    let cells = 2.0 * PI * radius / r;
    let l = radius.ln();
    // e^{-mu/K} = sqrt(log R) / R.
    let empty = (0.5 * l.ln() - l).exp();
    let ln_p = cells * (-empty).ln_1p();
    ln_p + 2.0 * l - cluster_mean(radius, r).ln()
}

/// Parameters of an annular cluster process whose open cluster centres
/// cover a target volume fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CounterexampleParams {
    pub alpha: f64,
    pub mu: f64,
    pub delta: f64,
    pub radius: f64,
    pub cells: u64,
    pub p_open: f64,
    pub volume_fraction: f64,
}

/// Searches `R = K r / (2 pi)` over integers `K` (with `R > 1`, `R <= cap`)
/// for the smallest `R` whose open-centre Boolean model
/// `1 - exp(-(a / mu) p(R, mu) pi R^2)` exceeds `target`, with
/// `mu = mu(R)`, `delta = r / 2` and `alpha = a / mu`.
pub fn counterexample_params(
    a: f64,
    r: f64,
    target: f64,
    cap: f64,
) -> Result<CounterexampleParams> {
    if !(a > 0.0 && r > 0.0 && a.is_finite() && r.is_finite()) {
        return Err(Error::param("a,r", "must be positive"));
    }
    if !(0.0 < target && target < 1.0) {
        return Err(Error::param(
            "target",
            format!("must lie in (0, 1), got {target}"),
        ));
    }
    let per_cell = r / (2.0 * PI);
    let mut cells = (1.0 / per_cell).floor() as u64 + 1;
    let mut best = (0.0f64, f64::NEG_INFINITY, f64::NAN);
    loop {
        let radius = cells as f64 * per_cell;
        if radius > cap {
            break;
        }
        let log_exposure = open_center_log_exposure(radius, r);
        let fraction = -(-a * PI * log_exposure.exp()).exp_m1();
        if log_exposure > best.1 {
            best = (fraction, log_exposure, radius);
        }
        if fraction > target {
            let mu = cluster_mean(radius, r);
            return Ok(CounterexampleParams {
                alpha: a / mu,
                mu,
                delta: r / 2.0,
                radius,
                cells,
                p_open: open_probability(cells as f64, mu),
                volume_fraction: fraction,
            });
        }
        cells += 1;
    }
    Err(Error::NoAdmissibleRadius {
        cap,
        best_fraction: best.0,
        best_log_exposure: best.1,
        best_radius: best.2,
    })
}

/// A point process that can be sampled on a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Poisson {
        intensity: f64,
    },
    Lattice {
        lattice: LatticeSpec,
    },
    PerturbedLattice {
        lattice: LatticeSpec,
        replication: ReplicationKernel,
        translation: TranslationKernel,
    },
    AnnularCox {
        alpha: f64,
        radius: f64,
        delta: f64,
        mu: f64,
    },
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Poisson { intensity } => {
                if *intensity >= 0.0 && intensity.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(
                        "intensity",
                        format!("must be >= 0, got {intensity}"),
                    ))
                }
            }
            ProcessSpec::Lattice { lattice } => lattice.validate(),
            ProcessSpec::PerturbedLattice {
                lattice,
                replication,
                translation,
            } => {
                lattice.validate()?;
                replication.validate()?;
                translation.validate()
            }
            ProcessSpec::AnnularCox {
                alpha,
                radius,
                delta,
                mu,
            } => validate_annular(*alpha, *radius, *delta, *mu),
        }
    }

    /// Mean number of points per unit volume.
    pub fn intensity(&self) -> f64 {
        match self {
            ProcessSpec::Poisson { intensity } => *intensity,
            ProcessSpec::Lattice { lattice } => lattice.intensity(),
            ProcessSpec::PerturbedLattice {
                lattice,
                replication,
                ..
            } => lattice.intensity() * replication.mean(),
            ProcessSpec::AnnularCox { alpha, mu, .. } => alpha * mu,
        }
    }

    /// Maximal displacement of a point from its source.
    pub fn support_radius(&self) -> f64 {
        match self {
            ProcessSpec::Poisson { .. } | ProcessSpec::Lattice { .. } => 0.0,
            ProcessSpec::PerturbedLattice {
                lattice,
                translation,
                ..
            } => translation.support_radius(lattice),
            ProcessSpec::AnnularCox { radius, .. } => *radius,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, ProcessSpec::Lattice { .. })
    }

    /// Realisation restricted to `window` dilated by `margin`.
    pub fn sample(&self, window: &Window, margin: f64, rng: &RngStream) -> Result<PointPattern> {
        match self {
            ProcessSpec::Poisson { intensity } => sample_poisson(window, *intensity, margin, rng),
            ProcessSpec::Lattice { lattice } => make_lattice(lattice, window, margin),
            ProcessSpec::PerturbedLattice {
                lattice,
                replication,
                translation,
            } => sample_perturbed_lattice_with_margin(
                lattice,
                replication,
                translation,
                window,
                margin,
                rng,
            ),
            ProcessSpec::AnnularCox {
                alpha,
                radius,
                delta,
                mu,
            } => sample_annular_cox(*alpha, *radius, *delta, *mu, window, margin, rng),
        }
    }
}

/// A process together with its observation window and sampling margin.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub process: ProcessSpec,
    pub window: Window,
    /// Dilation used when sampling; defaults to the process support radius.
    pub margin: Option<f64>,
}

impl GenConfig {
    pub fn new(process: ProcessSpec, window: Window) -> Self {
        GenConfig {
            process,
            window,
            margin: None,
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin.unwrap_or_else(|| self.process.support_radius())
    }

    pub fn sample(&self, rng: &RngStream) -> Result<PointPattern> {
        self.process.sample(&self.window, self.margin(), rng)
    }

    /// A realisation restricted to the observation window.
    pub fn sample_in_window(&self, rng: &RngStream) -> Result<PointPattern> {
        Ok(self.sample(rng)?.restricted_to_window())
    }
}

/// Spectral table `lambda[j][i]`: row `j` is an eigen-index, column `i` a
/// set; row sums are the eigenvalues restricted to the union of the sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenTable {
    rows: Vec<Vec<f64>>,
}

impl EigenTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 {
            return Err(Error::param(
                "table",
                "need at least one row and one column",
            ));
        }
        for row in &rows {
            if row.len() != width {
                return Err(Error::param("table", "rows must have equal length"));
            }
            if row.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::param("table", "entries must be finite and >= 0"));
            }
        }
        Ok(EigenTable { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn sets(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row_sum(&self, j: usize) -> f64 {
        self.rows[j].iter().sum()
    }

    /// Expected count in each set (shared by all three models).
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.sets())
            .map(|i| self.rows.iter().map(|r| r[i]).sum())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountModel {
    Determinantal,
    Poisson,
    Permanental,
}

/// Joint counts on the sets of `table`: for each row `j` a total
/// `N_j ~ Bernoulli / Poisson / Geometric(1/(1+lambda_j))` (by model) is split
/// multinomially with probabilities `lambda[j][i] / lambda_j`; rows are
/// summed.
pub fn sample_count_vectors(
    model: CountModel,
    table: &EigenTable,
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<Vec<u64>>> {
    if model == CountModel::Determinantal {
        for j in 0..table.rows.len() {
            let s = table.row_sum(j);
            if s > 1.0 {
                return Err(Error::param(
                    "table",
                    format!("determinantal model needs row sums <= 1, row {j} sums to {s}"),
                ));
            }
        }
    }
    Ok(mc::replicate(reps, rng, |stream| {
        let mut r = stream.rng();
        let mut counts = vec![0u64; table.sets()];
        for (j, row) in table.rows.iter().enumerate() {
            let total = table.row_sum(j);
            if total == 0.0 {
                continue;
            }
            let n = match model {
                CountModel::Determinantal => u64::from(r.random::<f64>() < total),
                CountModel::Poisson => poisson_count(total, &mut r),
                CountModel::Permanental => geometric(1.0 / (1.0 + total), &mut r),
            };
            for _ in 0..n {
                let u = r.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = row.len() - 1;
                for (i, v) in row.iter().enumerate() {
                    acc += v;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                counts[pick] += 1;
            }
        }
        counts
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_window(side: f64) -> Window {
        Window::cube(2, side).unwrap()
    }

    #[test]
    fn lattice_intensities() {
        assert_eq!(LatticeSpec::square(1.0).intensity(), 1.0);
        assert!((LatticeSpec::hexagonal(1.0).intensity() - 1.154_700_538_379_251_5).abs() < 1e-15);
    }

    #[test]
    fn square_lattice_counts() {
        // [0, k)^2 realised as [0, k - 1/2] so the far face is excluded.
        for k in [1usize, 3, 10] {
            let w = Window::cube(2, k as f64 - 0.5).unwrap();
            let p = make_lattice(&LatticeSpec::square(1.0), &w, 0.0).unwrap();
            assert_eq!(p.len(), k * k);
        }
    }

    #[test]
    fn hex_lattice_density_and_spacing() {
        let spec = LatticeSpec::hexagonal(1.0);
        let mut last_err = f64::INFINITY;
        for side in [20.0, 80.0, 320.0] {
            let w = unit_window(side);
            let p = make_lattice(&spec, &w, 0.0).unwrap();
            let err = (p.len() as f64 / w.volume() - 2.0 / 3f64.sqrt()).abs();
            assert!(err < last_err);
            last_err = err;
        }
        assert!(last_err < 0.01);

        let w = unit_window(10.0);
        let p = make_lattice(&spec, &w, 0.0).unwrap();
        let inner = Window::new(vec![2.0, 2.0], vec![8.0, 8.0]).unwrap();
        for (i, a) in p.points().enumerate() {
            if !inner.contains(a) {
                continue;
            }
            let nn = p
                .points()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| crate::geom::distance(a, b).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!((nn - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn replication_examples() {
        let s = RngStream::new(1);
        for i in 0..20 {
            let k =
                sample_replication(&ReplicationKernel::Dirac { k: 1 }, &s.replicate(i)).unwrap();
            assert_eq!(k, 1);
        }
        let n = 100_000;
        let bin = ReplicationKernel::Binomial { n: 2, p: 0.5 };
        let mut r = s.derive("bin").rng();
        let mut hist = [0usize; 3];
        for _ in 0..n {
            hist[bin.sample(&mut r) as usize] += 1;
        }
        for (c, p) in hist.iter().zip([0.25, 0.5, 0.25]) {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.0 * sd);
        }
        let poi = ReplicationKernel::Poisson { mean: 1.0 };
        let mut r = s.derive("poi").rng();
        let mean = (0..n).map(|_| poi.sample(&mut r) as f64).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * (1.0 / n as f64).sqrt());
    }

    #[test]
    fn kernel_pmfs_match_means() {
        let kernels = [
            ReplicationKernel::Dirac { k: 3 },
            ReplicationKernel::Binomial { n: 6, p: 1.0 / 3.0 },
            ReplicationKernel::Poisson { mean: 2.0 },
            ReplicationKernel::NegBinomial { r: 2.0, p: 0.5 },
            ReplicationKernel::Geometric { p: 1.0 / 3.0 },
            ReplicationKernel::HyperGeometric { n: 12, m: 6, k: 4 },
            ReplicationKernel::GeoMixture {
                weights: vec![0.5, 0.5],
                params: vec![0.5, 0.25],
            },
        ];
        for k in kernels {
            let pmf = k.pmf_table(400);
            let total: f64 = pmf.iter().sum();
            let mean: f64 = pmf.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
            assert!((total - 1.0).abs() < 1e-12, "{k:?} total {total}");
            assert!((mean - k.mean()).abs() < 1e-10, "{k:?} mean {mean}");
        }
    }

    #[test]
    fn kernel_validation() {
        assert!(ReplicationKernel::Binomial { n: 0, p: 0.5 }
            .validate()
            .is_err());
        assert!(ReplicationKernel::Geometric { p: 1.0 }.validate().is_err());
        assert!(ReplicationKernel::HyperGeometric { n: 3, m: 4, k: 1 }
            .validate()
            .is_err());
        assert!(ReplicationKernel::GeoMixture {
            weights: vec![0.5, 0.4],
            params: vec![0.5, 0.5]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn poisson_examples() {
        let w = unit_window(10.0);
        let s = RngStream::new(5);
        assert!(sample_poisson(&w, 0.0, 0.0, &s).unwrap().is_empty());
        assert!(sample_poisson(&w, -1.0, 0.0, &s).is_err());
        let reps = 400;
        let counts: Vec<f64> = (0..reps)
            .map(|i| {
                sample_poisson(&w, 1.154701, 0.0, &s.replicate(i))
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let sd = (115.4701f64 / reps as f64).sqrt();
        assert!((mean - 115.4701).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn simple_perturbed_square_lattice_has_one_point_per_cell() {
        let w = Window::new(vec![-0.5, -0.5], vec![9.5, 9.5]).unwrap();
        let p = sample_perturbed_lattice(
            &LatticeSpec::square(1.0),
            &ReplicationKernel::Dirac { k: 1 },
            &TranslationKernel::UniformCell,
            &w,
            &RngStream::new(9),
        )
        .unwrap();
        let inside = p.restricted_to_window();
        assert_eq!(inside.len(), 100);
        let mut seen = std::collections::HashSet::new();
        for q in inside.points() {
            assert!(seen.insert(((q[0] + 0.5).floor() as i64, (q[1] + 0.5).floor() as i64)));
        }
    }

    #[test]
    fn hexagon_offsets_stay_in_voronoi_cell() {
        let spec = LatticeSpec::hexagonal(1.0);
        let mut r = RngStream::new(2).rng();
        for _ in 0..10_000 {
            let [x, y] = TranslationKernel::UniformCell.sample_offset(&spec, &mut r);
            // Closer to the origin than to each of the six neighbours.
            let d0 = x * x + y * y;
            for k in 0..6 {
                let a = k as f64 * PI / 3.0;
                let (nx, ny) = (a.cos(), a.sin());
                assert!(d0 <= (x - nx).powi(2) + (y - ny).powi(2) + 1e-12);
            }
        }
    }

    #[test]
    fn annular_cox_examples() {
        let w = unit_window(20.0);
        let s = RngStream::new(4);
        assert!(sample_annular_cox(0.5, 2.0, 0.5, 0.0, &w, 0.0, &s)
            .unwrap()
            .is_empty());
        assert!(sample_annular_cox(0.5, 2.0, 2.5, 1.0, &w, 0.0, &s).is_err());

        // delta = R: every point within R of a centre.
        let centers = sample_poisson(&w, 0.05, 3.0, &s.derive("centers")).unwrap();
        let p = sample_annular_cox(0.05, 3.0, 3.0, 10.0, &w, 0.0, &s).unwrap();
        for q in p.points() {
            assert!(centers
                .points()
                .any(|c| crate::geom::distance(c, q).unwrap() <= 3.0 + 1e-12));
        }
    }

    #[test]
    fn open_probability_example() {
        let v = open_probability(4.0, 4.0 * 2f64.ln());
        assert!((v - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn counterexample_exposure_grows_along_doubling_tail() {
        let tail = |r: f64| -> Vec<f64> {
            (400..1020)
                .step_by(25)
                .map(|k| open_center_log_exposure(2f64.powi(k), r))
                .collect()
        };
        for r in [0.2, 1.0] {
            let values = tail(r);
            assert!(values.windows(2).all(|w| w[1] > w[0]), "r={r}: {values:?}");
        }
        assert!(*tail(1.0).last().unwrap() > 0.0);
        // Still hopeless at the edge of the f64 range for small r.
        assert!(*tail(0.2).last().unwrap() < -100.0);
    }

    #[test]
    fn counterexample_search() {
        // Large r makes the construction reachable.
        let p = counterexample_params(1.0, 4.0, 0.9, 1e7).unwrap();
        assert_eq!(p.delta, 2.0);
        assert!(p.volume_fraction > 0.9);
        assert!((p.alpha * p.mu - 1.0).abs() < 1e-12);
        assert!((p.radius - p.cells as f64 * 4.0 / (2.0 * PI)).abs() < 1e-9);

        let err = counterexample_params(0.1, 0.2, 0.9, 1e5).unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleRadius { .. }));
    }

    #[test]
    fn count_vector_examples() {
        let s = RngStream::new(11);
        let single = EigenTable::new(vec![vec![0.5]]).unwrap();
        let reps = 100_000;
        let mut variances = Vec::new();
        for model in [
            CountModel::Determinantal,
            CountModel::Poisson,
            CountModel::Permanental,
        ] {
            let v = sample_count_vectors(model, &single, reps, &s.derive("one")).unwrap();
            let xs: Vec<f64> = v.iter().map(|c| c[0] as f64).collect();
            let m = mc::mean_estimate(&xs, 3.0);
            assert!(m.contains(0.5), "{model:?} mean {}", m.value);
            let var = xs.iter().map(|x| (x - m.value).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
            variances.push(var);
        }
        for (v, want) in variances.iter().zip([0.25, 0.5, 0.75]) {
            assert!((v - want).abs() < 0.02, "variance {v} vs {want}");
        }

        let two = EigenTable::new(vec![vec![0.3, 0.2]]).unwrap();
        for model in [
            CountModel::Determinantal,
            CountModel::Poisson,
            CountModel::Permanental,
        ] {
            let v = sample_count_vectors(model, &two, reps, &s.derive("two")).unwrap();
            for (i, want) in [0.3, 0.2].into_iter().enumerate() {
                let xs: Vec<f64> = v.iter().map(|c| c[i] as f64).collect();
                assert!(mc::mean_estimate(&xs, 3.0).contains(want));
            }
        }

        let bad = EigenTable::new(vec![vec![0.7, 0.6]]).unwrap();
        assert!(sample_count_vectors(CountModel::Determinantal, &bad, 1, &s).is_err());
    }
}
