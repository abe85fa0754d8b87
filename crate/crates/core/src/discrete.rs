//! Close-packed lattice approximations of Boolean models: site fields on
//! the scaled lattice `Z^d / n`, contours around the origin, Peierls-type
//! void sums and counts of open germ paths.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{GenConfig, ProcessSpec};
use crate::geom::{dist2, CellGrid, PointPattern, Window};
use crate::mc::{self, Estimate};
use crate::percolation::moore_spans;
use crate::rng::RngStream;

/// Open/closed states of the sites of a box in `Z^d`. Site `z` stands for
/// the cell `z / n + (-1/(2n), 1/(2n)]^d`; adjacency is close-packed (all
/// `3^d - 1` sup-norm neighbours).
#[derive(Clone, Debug, PartialEq)]
pub struct SiteField {
    n: usize,
    origin: Vec<i64>,
    dims: Vec<usize>,
    open: Vec<bool>,
}

impl SiteField {
    /// States listed with axis 0 varying fastest; `origin` is the smallest
    /// site of the box.
    pub fn new(n: usize, origin: Vec<i64>, dims: Vec<usize>, open: Vec<bool>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        if origin.len() != dims.len() || dims.is_empty() || dims.contains(&0) {
            return Err(Error::param("dims", "need one positive extent per axis"));
        }
        if open.len() != dims.iter().product::<usize>() {
            return Err(Error::param("open", "one state per site required"));
        }
        Ok(SiteField {
            n,
            origin,
            dims,
            open,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn states(&self) -> &[bool] {
        &self.open
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    fn flat(&self, site: &[i64]) -> Option<usize> {
        let mut flat = 0;
        for a in (0..self.dims.len()).rev() {
            let c = site[a] - self.origin[a];
            if c < 0 || c >= self.dims[a] as i64 {
                return None;
            }
            flat = flat * self.dims[a] + c as usize;
        }
        Some(flat)
    }

    /// State of `site`; sites outside the box are closed.
    pub fn is_open(&self, site: &[i64]) -> bool {
        self.flat(site).is_some_and(|f| self.open[f])
    }
}

/// Squared distance from `p` to the closed cell of site `z` at scale `n`.
fn dist2_to_cell(p: &[f64], z: &[i64], n: f64) -> f64 {
    let h = 0.5 / n;
    p.iter()
        .zip(z)
        .map(|(x, &zi)| {
            let c = zi as f64 / n;
            let gap = ((x - c).abs() - h).max(0.0);
            gap * gap
        })
        .sum()
}

/// Site `z` (cells with centre `z / n` in `bounds`) is open iff some germ
/// lies within distance `r` of its cell.
pub fn site_field_from_pattern(
    pattern: &PointPattern,
    r: f64,
    n: usize,
    bounds: &Window,
) -> Result<SiteField> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::param(
            "r",
            format!("must be finite and >= 0, got {r}"),
        ));
    }
    if bounds.dim() != pattern.dim() {
        return Err(Error::DimensionMismatch {
            expected: pattern.dim(),
            found: bounds.dim(),
        });
    }
    let nf = n as f64;
    let d = bounds.dim();
    let origin: Vec<i64> = bounds
        .lower()
        .iter()
        .map(|x| (x * nf).ceil() as i64)
        .collect();
    let upper: Vec<i64> = bounds
        .upper()
        .iter()
        .map(|x| (x * nf).floor() as i64)
        .collect();
    if origin.iter().zip(&upper).any(|(lo, hi)| hi < lo) {
        return Err(Error::param("bounds", "box contains no site"));
    }
    let dims: Vec<usize> = origin
        .iter()
        .zip(&upper)
        .map(|(lo, hi)| (hi - lo + 1) as usize)
        .collect();
    let total = dims.iter().product();
    let mut field = SiteField::new(n, origin, dims, vec![false; total])?;
    let r2 = r * r;
    let reach = r + 0.5 / nf;
    let mut site = vec![0i64; d];
    for p in pattern.points() {
        let lo: Vec<i64> = (0..d)
            .map(|a| (((p[a] - reach) * nf).ceil() as i64).max(field.origin[a]))
            .collect();
        let hi: Vec<i64> = (0..d)
            .map(|a| {
                (((p[a] + reach) * nf).floor() as i64)
                    .min(field.origin[a] + field.dims[a] as i64 - 1)
            })
            .collect();
        if lo.iter().zip(&hi).any(|(l, h)| h < l) {
            continue;
        }
        let spans: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (h - l + 1) as usize)
            .collect();
        let total: usize = spans.iter().product();
        for k in 0..total {
            let mut rem = k;
            for a in 0..d {
                site[a] = lo[a] + (rem % spans[a]) as i64;
                rem /= spans[a];
            }
            if dist2_to_cell(p, &site, nf) <= r2 {
                let f = field.flat(&site).expect("site in box");
                field.open[f] = true;
            }
        }
    }
    Ok(field)
}

/// Whether open sites connect the two faces of the box orthogonal to axis 0
/// under close-packed adjacency.
pub fn site_percolates(field: &SiteField) -> bool {
    moore_spans(&field.dims, &field.open, 0)
}

/// A minimal set of sites separating the origin from infinity in the
/// planar close-packed lattice, stored as a 4-connected cycle.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Contour {
    pub sites: Vec<(i64, i64)>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

const MOORE: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const VON_NEUMANN: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Whether the origin can reach a site outside the bounding box of
/// `blocked` through unblocked sites under close-packed adjacency.
pub fn origin_escapes(blocked: &HashSet<(i64, i64)>) -> bool {
    if blocked.contains(&(0, 0)) {
        return false;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (0i64, 0i64, 0i64, 0i64);
    for &(x, y) in blocked {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let mut seen = HashSet::from([(0i64, 0i64)]);
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    while let Some((x, y)) = queue.pop_front() {
        if x <= x0 || x >= x1 || y <= y0 || y >= y1 {
            return true;
        }
        for (dx, dy) in MOORE {
            let q = (x + dx, y + dy);
            if !blocked.contains(&q) && seen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    false
}

fn encloses_origin(cycle: &[(i64, i64)]) -> bool {
    // Even-odd rule for the ray from the origin along the positive x-axis,
    // with the half-open convention on y to count vertex crossings once.
    let mut inside = false;
    for k in 0..cycle.len() {
        let (xa, ya) = cycle[k];
        let (xb, yb) = cycle[(k + 1) % cycle.len()];
        if (ya > 0) != (yb > 0) {
            let x_cross = xa as f64 + (0.0 - ya as f64) * (xb - xa) as f64 / (yb - ya) as f64;
            if x_cross > 0.0 {
                inside = !inside;
            }
        }
    }
    inside
}

fn is_minimal_contour(cycle: &[(i64, i64)]) -> bool {
    let mut blocked: HashSet<(i64, i64)> = cycle.iter().copied().collect();
    if origin_escapes(&blocked) {
        return false;
    }
    for s in cycle {
        blocked.remove(s);
        let escapes = origin_escapes(&blocked);
        blocked.insert(*s);
        if !escapes {
            return false;
        }
    }
    true
}

/// All contours around the origin with at most `max_len` sites, each once,
/// ordered by length and then by their sorted site lists.
pub fn enumerate_contours(max_len: usize) -> Result<Vec<Contour>> {
    if max_len < 8 {
        return Err(Error::param(
            "max_len",
            format!("must be >= 8, got {max_len}"),
        ));
    }
    let mut found: BTreeSet<(usize, Vec<(i64, i64)>)> = BTreeSet::new();
    let mut cycles: Vec<Vec<(i64, i64)>> = Vec::new();
    for k in 1..=(max_len as i64 / 2) {
        let start = (k, 0i64);
        let mut path = vec![start];
        let mut on_path: HashSet<(i64, i64)> = HashSet::from([start]);
        extend_cycle(k, max_len, &mut path, &mut on_path, &mut |cycle| {
            let mut key = cycle.to_vec();
            key.sort_unstable();
            if found.contains(&(cycle.len(), key.clone())) {
                return;
            }
            if encloses_origin(cycle) && is_minimal_contour(cycle) {
                found.insert((cycle.len(), key));
                cycles.push(cycle.to_vec());
            }
        });
    }
    let mut contours: Vec<(Vec<(i64, i64)>, Contour)> = cycles
        .into_iter()
        .map(|c| {
            let mut key = c.clone();
            key.sort_unstable();
            (key, Contour { sites: c })
        })
        .collect();
    contours.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| a.0.cmp(&b.0)));
    Ok(contours.into_iter().map(|(_, c)| c).collect())
}

fn extend_cycle(
    k: i64,
    max_len: usize,
    path: &mut Vec<(i64, i64)>,
    on_path: &mut HashSet<(i64, i64)>,
    emit: &mut impl FnMut(&[(i64, i64)]),
) {
    let start = path[0];
    let (x, y) = *path.last().unwrap();
    for (dx, dy) in VON_NEUMANN {
        let q = (x + dx, y + dy);
        if q == start && path.len() >= 4 {
            emit(path);
            continue;
        }
        // The start is the crossing of the positive x-axis closest to the origin.
        if q.1 == 0 && q.0 >= 0 && q.0 < k {
            continue;
        }
        if on_path.contains(&q) {
            continue;
        }
        let back = (q.0 - start.0).unsigned_abs() + (q.1 - start.1).unsigned_abs();
        if path.len() + back as usize > max_len {
            continue;
        }
        path.push(q);
        on_path.insert(q);
        extend_cycle(k, max_len, path, on_path, emit);
        on_path.remove(&q);
        path.pop();
    }
}

/// `sum_{l > max_len} l (3^2 - 2)^{l-1} rho^l`, infinite when `7 rho >= 1`.
pub fn contour_tail_bound(rho: f64, max_len: usize) -> f64 {
    let q = 7.0 * rho;
    if rho == 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let l = max_len as f64;
    rho * ((l + 1.0) * q.powf(l) - l * q.powf(l + 1.0)) / ((1.0 - q) * (1.0 - q))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VoidContourReport {
    pub r: f64,
    /// Mean number of contours of length at most `max_len` with all sites
    /// closed.
    pub truncated_sum: Estimate,
    /// Per-site void factor: largest `P(void)^(1/l)` over contours of the
    /// longest enumerated length `l`.
    pub rho_hat: f64,
    pub tail_bound: f64,
    pub summable: bool,
    pub contours: usize,
    pub longest: usize,
}

/// Process window (centred at the origin) covering all cells of contours up
/// to `max_len` at scale `n` together with germs that can reach them.
fn contour_window(d: usize, n: usize, max_len: usize) -> Result<Window> {
    Window::centered(d, (max_len / 2) as f64 / n as f64 + 1.0 / n as f64)
}

/// Monte-Carlo Peierls sum over contours around the origin at scale `n`
/// for the Boolean model of radius `r`.
pub fn expected_void_contours(
    process: &ProcessSpec,
    r: f64,
    n: usize,
    max_len: usize,
    reps: usize,
    rng: &RngStream,
) -> Result<VoidContourReport> {
    let contours = enumerate_contours(max_len)?;
    Ok(void_contours_over_radii(process, &[r], n, &contours, reps, rng)?.remove(0))
}

fn void_contours_over_radii(
    process: &ProcessSpec,
    radii: &[f64],
    n: usize,
    contours: &[Contour],
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<VoidContourReport>> {
    if n == 0 || reps == 0 {
        return Err(Error::param("n,reps", "must be >= 1"));
    }
    process.validate()?;
    let max_len = contours.iter().map(Contour::len).max().unwrap_or(0);
    let longest: Vec<usize> = (0..contours.len())
        .filter(|&i| contours[i].len() == max_len)
        .collect();
    let window = contour_window(2, n, max_len)?;
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let cfg = GenConfig {
        process: process.clone(),
        margin: Some(process.support_radius() + r_max),
        window: window.clone(),
    };
    // Per replicate and radius: number of void contours, and void flags of the longest.
    let per_rep = mc::replicate(reps, rng, |s| -> Result<Vec<(usize, Vec<bool>)>> {
        let pattern = cfg.sample(s)?;
        radii
            .iter()
            .map(|&r| {
                let field = site_field_from_pattern(&pattern, r, n, &window)?;
                let void: Vec<bool> = contours
                    .iter()
                    .map(|c| c.sites.iter().all(|&(x, y)| !field.is_open(&[x, y])))
                    .collect();
                let total = void.iter().filter(|&&v| v).count();
                Ok((total, longest.iter().map(|&i| void[i]).collect()))
            })
            .collect()
    });
    let per_rep: Vec<Vec<(usize, Vec<bool>)>> = per_rep.into_iter().collect::<Result<_>>()?;
    Ok(radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let totals: Vec<f64> = per_rep.iter().map(|rep| rep[k].0 as f64).collect();
            let rho_hat = (0..longest.len())
                .map(|j| {
                    let hits = per_rep.iter().filter(|rep| rep[k].1[j]).count();
                    (hits as f64 / reps as f64).powf(1.0 / max_len as f64)
                })
                .fold(0.0, f64::max);
            VoidContourReport {
                r,
                truncated_sum: mc::mean_estimate(&totals, mc::Z95),
                rho_hat,
                tail_bound: contour_tail_bound(rho_hat, max_len),
                summable: 7.0 * rho_hat < 1.0,
                contours: contours.len(),
                longest: max_len,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RbarScan {
    pub rows: Vec<VoidContourReport>,
    /// Smallest grid radius whose contour sum is summable.
    pub r_bar: Option<f64>,
}

/// Scans an ascending grid of radii on common seeds for the first radius at
/// which the truncated Peierls sum becomes summable.
pub fn rbar_upper_scan(
    process: &ProcessSpec,
    n: usize,
    r_grid: &[f64],
    max_len: usize,
    reps: usize,
    rng: &RngStream,
) -> Result<RbarScan> {
    if r_grid.is_empty() || r_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("r_grid", "must be nonempty and ascending"));
    }
    let contours = enumerate_contours(max_len)?;
    let rows = void_contours_over_radii(process, r_grid, n, &contours, reps, rng)?;
    let r_bar = rows.iter().find(|row| row.summable).map(|row| row.r);
    Ok(RbarScan { rows, r_bar })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PathCount {
    pub count: u64,
    pub truncated: bool,
    pub explored: u64,
}

/// Distance from `p` to the boundary of `(-m, m]^d`.
fn dist_to_box_boundary(p: &[f64], m: f64) -> f64 {
    let inside = p.iter().all(|x| x.abs() <= m);
    if inside {
        p.iter().map(|x| m - x.abs()).fold(f64::INFINITY, f64::min)
    } else {
        p.iter()
            .map(|x| (x.abs() - m).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn in_box(p: &[f64], m: f64) -> bool {
    p.iter().all(|&x| -m < x && x <= m)
}

/// Number of sequences of distinct germs `X_1, ..., X_j` with consecutive
/// germs within `2r`, `|X_1| <= r`, `X_2, ..., X_{j-1}` in `(-m, m]^d` and the
/// ball of `X_j` meeting the boundary of `(-m, m]^d`. Exploration stops after
/// `cap` partial paths and flags the count as truncated.
pub fn count_open_paths(pattern: &PointPattern, r: f64, m: f64, cap: u64) -> Result<PathCount> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param("m", format!("must be positive, got {m}")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::param(
            "r",
            format!("must be finite and >= 0, got {r}"),
        ));
    }
    let npts = pattern.len();
    let grid = CellGrid::build(pattern, if r > 0.0 { 2.0 * r } else { 1.0 })?;
    let neighbors: Vec<Vec<usize>> = pattern
        .points()
        .enumerate()
        .map(|(i, p)| grid.neighbors_within(pattern, p, 2.0 * r, Some(i)))
        .collect();
    let terminal: Vec<bool> = pattern
        .points()
        .map(|p| dist_to_box_boundary(p, m) <= r)
        .collect();
    let inner: Vec<bool> = pattern.points().map(|p| in_box(p, m)).collect();
    let origin = vec![0.0; pattern.dim()];
    let mut state = PathSearch {
        neighbors: &neighbors,
        terminal: &terminal,
        inner: &inner,
        used: vec![false; npts],
        count: 0,
        explored: 0,
        cap,
        truncated: false,
    };
    for i in 0..npts {
        if dist2(pattern.point(i), &origin) <= r * r {
            state.visit(i, true);
            if state.truncated {
                break;
            }
        }
    }
    Ok(PathCount {
        count: state.count,
        truncated: state.truncated,
        explored: state.explored,
    })
}

struct PathSearch<'a> {
    neighbors: &'a [Vec<usize>],
    terminal: &'a [bool],
    inner: &'a [bool],
    used: Vec<bool>,
    count: u64,
    explored: u64,
    cap: u64,
    truncated: bool,
}

impl PathSearch<'_> {
    fn visit(&mut self, i: usize, first: bool) {
        if self.explored >= self.cap {
            self.truncated = true;
            return;
        }
        self.explored += 1;
        if self.terminal[i] {
            self.count += 1;
        }
        // Extending makes `i` an intermediate germ unless it is the first.
        if !first && !self.inner[i] {
            return;
        }
        self.used[i] = true;
        for &j in &self.neighbors[i] {
            if !self.used[j] {
                self.visit(j, false);
                if self.truncated {
                    break;
                }
            }
        }
        self.used[i] = false;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRow {
    pub r: f64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub truncated_rate: f64,
    pub reps: usize,
}

/// Monte-Carlo mean of [`count_open_paths`] at each radius of `r_grid` on
/// common seeds. The process is sampled on `[-(m + r_max), m + r_max]^d`.
pub fn expected_paths_sweep(
    process: &ProcessSpec,
    dim: usize,
    r_grid: &[f64],
    m: f64,
    reps: usize,
    cap: u64,
    rng: &RngStream,
) -> Result<Vec<PathRow>> {
    if r_grid.is_empty() || reps == 0 {
        return Err(Error::param(
            "r_grid,reps",
            "need a nonempty grid and reps >= 1",
        ));
    }
    process.validate()?;
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);
    let cfg = GenConfig::new(process.clone(), Window::centered(dim, m + r_max)?);
    let per_rep = mc::replicate(reps, rng, |s| -> Result<Vec<PathCount>> {
        let pattern = cfg.sample(s)?;
        r_grid
            .iter()
            .map(|&r| count_open_paths(&pattern, r, m, cap))
            .collect()
    });
    let per_rep: Vec<Vec<PathCount>> = per_rep.into_iter().collect::<Result<_>>()?;
    Ok(r_grid
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let values: Vec<f64> = per_rep.iter().map(|rep| rep[k].count as f64).collect();
            let est = mc::mean_estimate(&values, mc::Z95);
            PathRow {
                r,
                mean: est.value,
                ci_lo: est.ci_lo,
                ci_hi: est.ci_hi,
                truncated_rate: per_rep.iter().filter(|rep| rep[k].truncated).count() as f64
                    / reps as f64,
                reps,
            }
        })
        .collect())
}

/// Smallest grid radius whose mean path count reaches `threshold`.
pub fn rlower_surrogate(rows: &[PathRow], threshold: f64) -> Option<f64> {
    rows.iter()
        .filter(|row| row.mean >= threshold)
        .map(|row| row.r)
        .fold(None, |best: Option<f64>, r| {
            Some(best.map_or(r, |b| b.min(r)))
        })
}
