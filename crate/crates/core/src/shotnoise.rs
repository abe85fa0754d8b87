//! Shot-noise fields, level sets, interference, SINR graphs and Chernoff
//! bounds for level crossings of Poisson shot noise.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::discrete::SiteField;
use crate::error::{Error, Result};
use crate::generators::GenConfig;
use crate::geom::{dist2, CellGrid, PointPattern};
use crate::mc::{self, Estimate};
use crate::percolation::{components, GeometricGraph};
use crate::quad;
use crate::rng::RngStream;

/// Response `l(x, y)` of a germ at `y` observed at `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseFunction {
    /// `1[x - y in (-r, r]^d]`.
    IndicatorCube { half_width: f64 },
    /// `(1 + t)^-beta` with `t = |x - y|`.
    PowerLaw { beta: f64 },
    /// `((1 + t)^-beta - (1 + t_max)^-beta)+ / (1 - (1 + t_max)^-beta)`, a
    /// continuous power law vanishing from `t_max` on.
    TruncatedPowerLaw { beta: f64, t_max: f64 },
}

impl Default for ResponseFunction {
    fn default() -> Self {
        ResponseFunction::PowerLaw { beta: 4.0 }
    }
}

impl ResponseFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ResponseFunction::IndicatorCube { half_width } => {
                if half_width > 0.0 && half_width.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(
                        "half_width",
                        format!("must be positive, got {half_width}"),
                    ))
                }
            }
            ResponseFunction::PowerLaw { beta } => {
                if beta > 0.0 && beta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(
                        "beta",
                        format!("must be positive, got {beta}"),
                    ))
                }
            }
            ResponseFunction::TruncatedPowerLaw { beta, t_max } => {
                if beta > 0.0 && beta.is_finite() && t_max > 0.0 && t_max.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("beta,t_max", "must be positive and finite"))
                }
            }
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, ResponseFunction::IndicatorCube { .. })
    }

    /// `l(t)` for radial responses; `None` for the cube indicator.
    pub fn radial(&self, t: f64) -> Option<f64> {
        match *self {
            ResponseFunction::IndicatorCube { .. } => None,
            ResponseFunction::PowerLaw { beta } => Some((1.0 + t).powf(-beta)),
            ResponseFunction::TruncatedPowerLaw { beta, t_max } => {
                if t >= t_max {
                    return Some(0.0);
                }
                let floor = (1.0 + t_max).powf(-beta);
                Some(((1.0 + t).powf(-beta) - floor) / (1.0 - floor))
            }
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            ResponseFunction::IndicatorCube { half_width } => {
                let inside = x.iter().zip(y).all(|(a, b)| {
                    let d = a - b;
                    -half_width < d && d <= half_width
                });
                f64::from(u8::from(inside))
            }
            _ => self.radial(dist2(x, y).sqrt()).expect("radial response"),
        }
    }

    /// Largest distance at which the response can be positive.
    pub fn support_radius(&self, dim: usize) -> Option<f64> {
        match *self {
            ResponseFunction::IndicatorCube { half_width } => {
                Some(half_width * (dim as f64).sqrt())
            }
            ResponseFunction::PowerLaw { .. } => None,
            ResponseFunction::TruncatedPowerLaw { t_max, .. } => Some(t_max),
        }
    }

    /// Smallest `t` with `l(t) <= level` for radial responses, by bisection
    /// to relative tolerance `1e-12`.
    pub fn inverse(&self, level: f64) -> Result<f64> {
        let l = |t: f64| self.radial(t).expect("radial");
        if !self.is_radial() {
            return Err(Error::Unsupported(
                "inverse of a non-radial response".into(),
            ));
        }
        if level > 1.0 {
            return Err(Error::Infeasible {
                required: level,
                available: 1.0,
            });
        }
        if level == 1.0 {
            return Ok(0.0);
        }
        if level <= 0.0 {
            return Ok(match *self {
                ResponseFunction::TruncatedPowerLaw { t_max, .. } => t_max,
                _ => f64::INFINITY,
            });
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while l(hi) > level {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if l(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Pattern prepared for repeated response queries.
struct ResponseIndex<'a> {
    pattern: &'a PointPattern,
    response: &'a ResponseFunction,
    grid: Option<(CellGrid, f64)>,
}

impl<'a> ResponseIndex<'a> {
    fn new(pattern: &'a PointPattern, response: &'a ResponseFunction) -> Self {
        let grid = response.support_radius(pattern.dim()).map(|reach| {
            (
                CellGrid::build(pattern, reach).expect("positive reach"),
                reach,
            )
        });
        ResponseIndex {
            pattern,
            response,
            grid,
        }
    }

    fn for_each(&self, x: &[f64], mut f: impl FnMut(usize, f64)) {
        match &self.grid {
            Some((grid, reach)) => grid.for_each_within(self.pattern, x, *reach, |i, _| {
                f(i, self.response.value(x, self.pattern.point(i)))
            }),
            None => {
                for (i, p) in self.pattern.points().enumerate() {
                    f(i, self.response.value(x, p));
                }
            }
        }
    }
}

/// `V(x) = sum_X l(x, X)` at each query.
pub fn additive_sn(
    pattern: &PointPattern,
    response: &ResponseFunction,
    queries: &[&[f64]],
) -> Vec<f64> {
    let index = ResponseIndex::new(pattern, response);
    queries
        .iter()
        .map(|x| {
            let mut v = 0.0;
            index.for_each(x, |_, l| v += l);
            v
        })
        .collect()
}

/// `U(x) = sup_X l(x, X)` at each query, 0 for an empty pattern.
pub fn extremal_sn(
    pattern: &PointPattern,
    response: &ResponseFunction,
    queries: &[&[f64]],
) -> Vec<f64> {
    let index = ResponseIndex::new(pattern, response);
    queries
        .iter()
        .map(|x| {
            let mut v = 0.0f64;
            index.for_each(x, |_, l| v = v.max(l));
            v
        })
        .collect()
}

/// Real values on the sites of a box of the lattice `Z^d / n`, axis 0
/// varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub n: usize,
    pub origin: Vec<i64>,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl ScalarField {
    /// Shot-noise values at the site centres `z / n` of a box of sites.
    pub fn from_shot_noise(
        pattern: &PointPattern,
        response: &ResponseFunction,
        n: usize,
        origin: Vec<i64>,
        dims: Vec<usize>,
        extremal: bool,
    ) -> Result<Self> {
        if n == 0 || origin.len() != dims.len() || dims.len() != pattern.dim() {
            return Err(Error::param("n,origin,dims", "inconsistent site box"));
        }
        let total: usize = dims.iter().product();
        let centers: Vec<Vec<f64>> = (0..total)
            .map(|flat| {
                let mut rem = flat;
                origin
                    .iter()
                    .zip(&dims)
                    .map(|(o, d)| {
                        let c = (o + (rem % d) as i64) as f64 / n as f64;
                        rem /= d;
                        c
                    })
                    .collect()
            })
            .collect();
        let queries: Vec<&[f64]> = centers.iter().map(Vec::as_slice).collect();
        let values = if extremal {
            extremal_sn(pattern, response, &queries)
        } else {
            additive_sn(pattern, response, &queries)
        };
        Ok(ScalarField {
            n,
            origin,
            dims,
            values,
        })
    }

    /// Indicator values (1 open, 0 closed) of a site field.
    pub fn from_site_field(field: &SiteField) -> Self {
        ScalarField {
            n: field.n(),
            origin: field.origin().to_vec(),
            dims: field.dims().to_vec(),
            values: field
                .states()
                .iter()
                .map(|&o| f64::from(u8::from(o)))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    AtLeast,
    AtMost,
}

/// Sites where the value is `>= h` (or `<= h`).
pub fn level_set_sites(values: &ScalarField, h: f64, direction: Level) -> Result<SiteField> {
    let open = values
        .values
        .iter()
        .map(|&v| match direction {
            Level::AtLeast => v >= h,
            Level::AtMost => v <= h,
        })
        .collect();
    SiteField::new(values.n, values.origin.clone(), values.dims.clone(), open)
}

/// `I(x) = sum l(x, X)` over points other than `exclude` and other than
/// points located exactly at `x`.
pub fn interference(
    pattern: &PointPattern,
    x: &[f64],
    response: &ResponseFunction,
    exclude: Option<usize>,
) -> f64 {
    let mut total = 0.0;
    ResponseIndex::new(pattern, response).for_each(x, |i, l| {
        if Some(i) != exclude && pattern.point(i) != x {
            total += l;
        }
    });
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrParams {
    pub power: f64,
    pub noise: f64,
    pub threshold: f64,
    pub gamma: f64,
}

impl SinrParams {
    pub fn validate(&self, response: &ResponseFunction) -> Result<()> {
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::param("power", "must be positive"));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("threshold", self.threshold),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        response.validate()?;
        if !response.is_radial() {
            return Err(Error::Unsupported("SINR needs a radial attenuation".into()));
        }
        Ok(())
    }
}

fn sinr_ratio(signal: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        if signal > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        signal / denom
    }
}

/// `P l(|x - y|) / (N + gamma P I(y))` where the interference at `y` omits
/// interferers located at `x` or at `y`. Returns `+inf` when the
/// denominator vanishes and the signal is positive, 0 when both vanish.
pub fn sinr_value(
    x: &[f64],
    y: &[f64],
    interferers: &PointPattern,
    params: &SinrParams,
    response: &ResponseFunction,
) -> Result<f64> {
    params.validate(response)?;
    let signal = params.power * response.radial(dist2(x, y).sqrt()).expect("radial");
    let mut i_y = 0.0;
    if params.gamma > 0.0 {
        ResponseIndex::new(interferers, response).for_each(y, |k, l| {
            let p = interferers.point(k);
            if p != x && p != y {
                i_y += l;
            }
        });
    }
    Ok(sinr_ratio(
        signal,
        params.noise + params.gamma * params.power * i_y,
    ))
}

/// Transmission radius `r_l = l^-1(TN / P) / 2` without interference.
pub fn snr_radius(params: &SinrParams, response: &ResponseFunction) -> Result<f64> {
    params.validate(response)?;
    let level = params.threshold * params.noise / params.power;
    let l0 = response.radial(0.0).expect("radial");
    if level > l0 {
        return Err(Error::Infeasible {
            required: level,
            available: l0,
        });
    }
    Ok(0.5 * response.inverse(level)?)
}

/// Graph on `backbone` with an edge iff the SINR exceeds `T` in both
/// directions.
pub fn build_sinr_graph(
    backbone: &PointPattern,
    interferers: &PointPattern,
    params: &SinrParams,
    response: &ResponseFunction,
) -> Result<GeometricGraph> {
    params.validate(response)?;
    let r_l = snr_radius(params, response)?;
    let l = |t: f64| response.radial(t).expect("radial");
    let key = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let mut multiplicity: HashMap<Vec<u64>, usize> = HashMap::new();
    if params.gamma > 0.0 {
        for p in interferers.points() {
            *multiplicity.entry(key(p)).or_default() += 1;
        }
    }
    let index = ResponseIndex::new(interferers, response);
    let full_i: Vec<f64> = backbone
        .points()
        .map(|y| {
            let mut total = 0.0;
            if params.gamma > 0.0 {
                index.for_each(y, |k, v| {
                    if interferers.point(k) != y {
                        total += v;
                    }
                });
            }
            total
        })
        .collect();
    let n = backbone.len();
    let mut adjacency = vec![Vec::new(); n];
    // Edges need P l(d) > T N at least, i.e. d < 2 r_l.
    let grid = if r_l.is_finite() {
        Some(CellGrid::build(
            backbone,
            if r_l > 0.0 { 2.0 * r_l } else { 1.0 },
        )?)
    } else {
        None
    };
    let directed = |x: usize, y: usize| -> f64 {
        let (px, py) = (backbone.point(x), backbone.point(y));
        let d = dist2(px, py).sqrt();
        let signal = params.power * l(d);
        let mut i_y = full_i[y];
        if params.gamma > 0.0 {
            if let Some(m) = multiplicity.get(&key(px)) {
                i_y -= *m as f64 * l(d);
            }
            i_y = i_y.max(0.0);
        }
        sinr_ratio(signal, params.noise + params.gamma * params.power * i_y)
    };
    for i in 0..n {
        let cands = match &grid {
            Some(g) => g.neighbors_within(backbone, backbone.point(i), 2.0 * r_l, Some(i)),
            None => (0..n).filter(|&j| j != i).collect(),
        };
        for j in cands {
            if j > i && directed(i, j) > params.threshold && directed(j, i) > params.threshold {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }
    Ok(GeometricGraph::from_adjacency(adjacency, r_l))
}

/// `lambda * integral_{|x| > margin} l(|x|) dx` in the plane: the expected
/// interference from a Poisson process outside a disc of radius `margin`.
pub fn interference_tail_bound(
    lambda: f64,
    response: &ResponseFunction,
    margin: f64,
) -> Result<f64> {
    let l = |t: f64| {
        response
            .radial(t)
            .ok_or_else(|| Error::Unsupported("non-radial response".into()))
    };
    l(0.0)?;
    if let ResponseFunction::PowerLaw { beta } = *response {
        if beta <= 2.0 {
            return Err(Error::Divergent(format!(
                "planar interference diverges for beta = {beta} <= 2"
            )));
        }
    }
    let f = |t: f64| 2.0 * PI * t * response.radial(t).unwrap();
    // t = margin / u maps (margin, inf) to (0, 1).
    let m = margin.max(1e-12);
    let v = quad::integrate(
        |u| {
            if u <= 0.0 {
                0.0
            } else {
                f(m / u) * m / (u * u)
            }
        },
        0.0,
        1.0,
        1e-14,
        1e-10,
    );
    Ok(lambda * v)
}

/// A backbone process observed through SINR connectivity.
#[derive(Clone, Debug, PartialEq)]
pub struct SinrExperiment {
    pub backbone: GenConfig,
    /// Independent interferer process; `None` means the backbone interferes
    /// with itself.
    pub interferers: Option<GenConfig>,
    pub params: SinrParams,
    pub response: ResponseFunction,
    /// Dilation for interferers, default `5 r_l`.
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinrSweepRow {
    pub gamma: f64,
    pub p_span: Estimate,
    pub reps: usize,
    /// Expected Poisson interference beyond the margin at the backbone
    /// intensity.
    pub truncation_bound: f64,
}

/// Spanning probability (axis 0) of the SINR graph on the windowed
/// backbone for each `gamma`, with common random numbers across `gamma`.
pub fn sinr_span_sweep(
    exp: &SinrExperiment,
    gammas: &[f64],
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<SinrSweepRow>> {
    if gammas.is_empty() || reps == 0 {
        return Err(Error::param(
            "gammas,reps",
            "need a nonempty grid and reps >= 1",
        ));
    }
    exp.params.validate(&exp.response)?;
    let r_l = snr_radius(&exp.params, &exp.response)?;
    let margin = exp.margin.unwrap_or(5.0 * r_l);
    if !margin.is_finite() {
        return Err(Error::param(
            "margin",
            "infinite SNR radius needs an explicit margin",
        ));
    }
    let backbone_cfg = GenConfig {
        margin: Some(exp.backbone.margin().max(margin)),
        ..exp.backbone.clone()
    };
    let interferer_cfg = exp.interferers.as_ref().map(|c| GenConfig {
        margin: Some(c.margin().max(margin)),
        window: exp.backbone.window.clone(),
        ..c.clone()
    });
    let per_rep = mc::replicate(reps, rng, |s| -> Result<Vec<bool>> {
        let full = backbone_cfg.sample(&s.derive("backbone"))?;
        let nodes = full.restricted_to_window();
        let interferers = match &interferer_cfg {
            Some(c) => c.sample(&s.derive("interferers"))?,
            None => full,
        };
        gammas
            .iter()
            .map(|&gamma| {
                let params = SinrParams {
                    gamma,
                    ..exp.params
                };
                let g = build_sinr_graph(&nodes, &interferers, &params, &exp.response)?;
                Ok(components(&g, &nodes, r_l).spans[0])
            })
            .collect()
    });
    let per_rep: Vec<Vec<bool>> = per_rep.into_iter().collect::<Result<_>>()?;
    let tail = interference_tail_bound(exp.backbone.process.intensity(), &exp.response, margin)
        .unwrap_or(f64::NAN);
    Ok(gammas
        .iter()
        .enumerate()
        .map(|(k, &gamma)| SinrSweepRow {
            gamma,
            p_span: mc::wilson(per_rep.iter().filter(|r| r[k]).count(), reps, mc::Z95),
            reps,
            truncation_bound: tail,
        })
        .collect())
}

/// Chernoff bound for a Poisson process of intensity `lambda` on
/// `P(V(x_i) >= h for all sites)` (or `<= h`): `exp(-+ s n h) exp(lambda
/// integral (exp(+- s sum_i l(x_i, y)) - 1) dy)`. Cube indicators are
/// integrated exactly; planar power laws by nested adaptive Gauss-Kronrod
/// in polar coordinates (relative tolerance about 1e-9).
pub fn chernoff_level_bound(
    lambda: f64,
    response: &ResponseFunction,
    s: f64,
    h: f64,
    sites: &[&[f64]],
    direction: Level,
) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::param("s", format!("must be positive, got {s}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be finite and >= 0"));
    }
    response.validate()?;
    if sites.is_empty() {
        return Ok(1.0);
    }
    let d = sites[0].len();
    if sites.iter().any(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: sites.iter().map(|x| x.len()).find(|&l| l != d).unwrap(),
        });
    }
    let sign = match direction {
        Level::AtLeast => 1.0,
        Level::AtMost => -1.0,
    };
    let integral = match *response {
        ResponseFunction::IndicatorCube { half_width } => {
            cube_integral(sites, half_width, s * sign)
        }
        ResponseFunction::PowerLaw { beta } => {
            if beta <= d as f64 {
                return Err(Error::Divergent(format!(
                    "exponential moment integral diverges for beta = {beta} <= d = {d}"
                )));
            }
            planar_integral(sites, response, s * sign, None)?
        }
        ResponseFunction::TruncatedPowerLaw { t_max, .. } => {
            planar_integral(sites, response, s * sign, Some(t_max))?
        }
    };
    let n = sites.len() as f64;
    Ok((-sign * s * n * h + lambda * integral).exp())
}

/// `integral (exp(t k(y)) - 1) dy` with `k(y)` the number of sites `x_i`
/// with `x_i - y in (-r, r]^d`, by coordinate compression.
fn cube_integral(sites: &[&[f64]], r: f64, t: f64) -> f64 {
    let d = sites[0].len();
    let breaks: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let mut b: Vec<f64> = sites.iter().flat_map(|x| [x[a] - r, x[a] + r]).collect();
            b.sort_by(f64::total_cmp);
            b.dedup();
            b
        })
        .collect();
    let counts: Vec<usize> = breaks.iter().map(|b| b.len() - 1).collect();
    let total: usize = counts.iter().product();
    let mut sum = 0.0;
    let mut mid = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        let mut vol = 1.0;
        for a in 0..d {
            let k = rem % counts[a];
            rem /= counts[a];
            mid[a] = 0.5 * (breaks[a][k] + breaks[a][k + 1]);
            vol *= breaks[a][k + 1] - breaks[a][k];
        }
        let k = sites
            .iter()
            .filter(|x| x.iter().zip(&mid).all(|(xi, yi)| (xi - yi).abs() < r))
            .count();
        sum += vol * (t * k as f64).exp_m1();
    }
    sum
}

fn planar_integral(
    sites: &[&[f64]],
    response: &ResponseFunction,
    t: f64,
    support: Option<f64>,
) -> Result<f64> {
    if sites[0].len() != 2 {
        return Err(Error::Unsupported(
            "radial Chernoff integrals are implemented in the plane".into(),
        ));
    }
    let n = sites.len() as f64;
    let c = [
        sites.iter().map(|x| x[0]).sum::<f64>() / n,
        sites.iter().map(|x| x[1]).sum::<f64>() / n,
    ];
    let spread = sites
        .iter()
        .map(|x| dist2(x, &c).sqrt())
        .fold(0.0, f64::max);
    let g = |rho: f64| -> f64 {
        let ring = |theta: f64| {
            let y = [c[0] + rho * theta.cos(), c[1] + rho * theta.sin()];
            let k: f64 = sites.iter().map(|x| response.value(x, &y)).sum();
            (t * k).exp_m1()
        };
        rho * quad::integrate(ring, 0.0, 2.0 * PI, 1e-15, 1e-10)
    };
    let r0 = spread + 1.0;
    let inner = quad::integrate(g, 0.0, r0, 1e-13, 1e-9);
    let outer = match support {
        Some(t_max) => quad::integrate(g, r0, spread + t_max.max(1.0) + 1.0, 1e-13, 1e-9),
        None => quad::integrate(
            |u| {
                if u <= 0.0 {
                    0.0
                } else {
                    g(r0 / u) * r0 / (u * u)
                }
            },
            0.0,
            1.0,
            1e-13,
            1e-9,
        ),
    };
    Ok(inner + outer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point, Window};

    fn pattern(points: &[[f64; 2]]) -> PointPattern {
        PointPattern::new(
            Window::centered(2, 50.0).unwrap(),
            0.0,
            points
                .iter()
                .map(|p| Point::new(p.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    const L4: ResponseFunction = ResponseFunction::PowerLaw { beta: 4.0 };

    #[test]
    fn shot_noise_examples() {
        let q: [&[f64]; 1] = [&[0.0, 0.0]];
        assert_eq!(additive_sn(&pattern(&[]), &L4, &q), vec![0.0]);
        assert_eq!(extremal_sn(&pattern(&[]), &L4, &q), vec![0.0]);
        assert_eq!(additive_sn(&pattern(&[[1.0, 0.0]]), &L4, &q), vec![0.0625]);
        let cube = ResponseFunction::IndicatorCube { half_width: 0.5 };
        assert_eq!(additive_sn(&pattern(&[[0.0, 0.0]]), &cube, &q), vec![1.0]);
        let p = pattern(&[[0.2, 0.1], [0.3, -0.4], [2.0, 2.0]]);
        let qs: [&[f64]; 3] = [&[0.0, 0.0], &[0.5, 0.5], &[1.9, 2.2]];
        for resp in [L4, cube] {
            let a = additive_sn(&p, &resp, &qs);
            let e = extremal_sn(&p, &resp, &qs);
            for (x, y) in a.iter().zip(&e) {
                assert!(y <= x);
                if !resp.is_radial() {
                    assert!(*y == 0.0 || *y == 1.0);
                }
            }
        }
    }

    #[test]
    fn level_sets() {
        let v = ScalarField {
            n: 1,
            origin: vec![0, 0],
            dims: vec![2, 2],
            values: vec![0.1, 0.5, 0.9, 0.3],
        };
        assert_eq!(
            level_set_sites(&v, 0.0, Level::AtLeast)
                .unwrap()
                .open_count(),
            4
        );
        assert_eq!(
            level_set_sites(&v, 1.0, Level::AtMost)
                .unwrap()
                .open_count(),
            4
        );
        let once = level_set_sites(&v, 0.4, Level::AtLeast).unwrap();
        let twice =
            level_set_sites(&ScalarField::from_site_field(&once), 0.5, Level::AtLeast).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn interference_examples() {
        let one = pattern(&[[0.0, 0.0]]);
        assert_eq!(interference(&one, &[0.0, 0.0], &L4, Some(0)), 0.0);
        let two = pattern(&[[0.0, 0.0], [1.0, 0.0]]);
        assert_eq!(interference(&two, &[0.0, 0.0], &L4, Some(0)), 0.0625);
    }

    #[test]
    fn sinr_examples() {
        let params = SinrParams {
            power: 1.0,
            noise: 0.01,
            threshold: 1.0,
            gamma: 0.5,
        };
        let none = pattern(&[]);
        let v = sinr_value(&[0.0, 0.0], &[1.0, 0.0], &none, &params, &L4).unwrap();
        assert!((v - 6.25).abs() < 1e-12);
        let with = pattern(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
        let w = sinr_value(&[0.0, 0.0], &[1.0, 0.0], &with, &params, &L4).unwrap();
        assert!(w < v);
        let silent = SinrParams {
            noise: 0.0,
            gamma: 0.0,
            ..params
        };
        assert_eq!(
            sinr_value(&[0.0, 0.0], &[1.0, 0.0], &with, &silent, &L4).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn snr_radius_examples() {
        let params = SinrParams {
            power: 1.0,
            noise: 0.01,
            threshold: 1.0,
            gamma: 0.0,
        };
        let r = snr_radius(&params, &L4).unwrap();
        assert!((r - (10f64.sqrt() - 1.0) / 2.0).abs() < 1e-11);
        assert_eq!(
            snr_radius(
                &SinrParams {
                    noise: 1.0,
                    ..params
                },
                &L4
            )
            .unwrap(),
            0.0
        );
        assert!(
            snr_radius(
                &SinrParams {
                    power: 2.0,
                    ..params
                },
                &L4
            )
            .unwrap()
                > r
        );
        assert!(matches!(
            snr_radius(
                &SinrParams {
                    noise: 2.0,
                    ..params
                },
                &L4
            ),
            Err(Error::Infeasible { .. })
        ));
        assert_eq!(
            snr_radius(
                &SinrParams {
                    noise: 0.0,
                    ..params
                },
                &L4
            )
            .unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn sinr_graph_reduces_to_gilbert_without_interference() {
        let w = Window::cube(2, 10.0).unwrap();
        let p = crate::generators::sample_poisson(&w, 1.154701, 0.0, &RngStream::new(1)).unwrap();
        let params = SinrParams {
            power: 1.0,
            noise: 2.4f64.powi(-4),
            threshold: 1.0,
            gamma: 0.0,
        };
        let r_l = snr_radius(&params, &L4).unwrap();
        assert!((r_l - 0.7).abs() < 1e-10);
        let sinr = build_sinr_graph(&p, &p, &params, &L4).unwrap();
        let gilbert = crate::percolation::build_gilbert(&p, r_l).unwrap();
        assert_eq!(sinr, gilbert);

        let mut last = sinr.edge_count();
        for gamma in [1e-4, 1e-2, 1.0, 1e6] {
            let g = build_sinr_graph(&p, &p, &SinrParams { gamma, ..params }, &L4).unwrap();
            assert!(g.edges().all(|(i, j)| sinr.has_edge(i, j)));
            assert!(g.edge_count() <= last);
            last = g.edge_count();
        }
        assert_eq!(last, 0);
    }

    #[test]
    fn chernoff_cube_single_site() {
        let cube = ResponseFunction::IndicatorCube { half_width: 0.3 };
        let (lambda, s, h) = (1.2, 0.7, 1.0);
        let b = chernoff_level_bound(lambda, &cube, s, h, &[&[0.0, 0.0]], Level::AtLeast).unwrap();
        let want = (-s * h + lambda * 0.36 * (s.exp() - 1.0)).exp();
        assert!((b - want).abs() < 1e-14);
        let tiny =
            chernoff_level_bound(lambda, &cube, 1e-9, h, &[&[0.0, 0.0]], Level::AtLeast).unwrap();
        assert!((tiny - 1.0).abs() < 1e-8);
        assert!(
            chernoff_level_bound(lambda, &cube, 0.0, h, &[&[0.0, 0.0]], Level::AtLeast).is_err()
        );
    }

    #[test]
    fn chernoff_power_law_matches_radial_integral_for_one_site() {
        // One site at the origin: integral = 2 pi int_0^inf t (exp(s l(t)) - 1) dt.
        let (lambda, s) = (0.8, 0.5);
        let oracle = {
            let f = |t: f64| 2.0 * PI * t * (s * (1.0 + t).powi(-4)).exp_m1();
            let mut sum = 0.0;
            let steps = 2_000_000;
            let top = 2000.0;
            let dt = top / steps as f64;
            for k in 0..steps {
                let t = (k as f64 + 0.5) * dt;
                sum += f(t) * dt;
            }
            // Tail beyond `top`: 2 pi s t^-3 integrated.
            sum + s * PI / (top * top)
        };
        let b = chernoff_level_bound(lambda, &L4, s, 0.0, &[&[0.0, 0.0]], Level::AtLeast).unwrap();
        assert!(
            (b.ln() / lambda - oracle).abs() < 1e-6 * oracle,
            "{} vs {oracle}",
            b.ln() / lambda
        );
        assert!(matches!(
            chernoff_level_bound(
                lambda,
                &ResponseFunction::PowerLaw { beta: 2.0 },
                s,
                0.0,
                &[&[0.0, 0.0]],
                Level::AtLeast
            ),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn interference_tail_bound_closed_form() {
        // 2 pi int_m^inf t (1+t)^-4 dt = 2 pi (1/(2(1+m)^2) - 1/(3(1+m)^3)).
        let m = 3.5;
        let want = 2.0 * PI * (0.5 / (1.0 + m) / (1.0 + m) - 1.0 / (3.0 * (1.0f64 + m).powi(3)));
        let got = interference_tail_bound(1.0, &L4, m).unwrap();
        assert!((got - want).abs() < 1e-9 * want);
    }
}
