//! Gilbert graphs of Boolean models, connected components, window-spanning
//! percolation proxies, critical-radius estimation and k-coverage.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::GenConfig;
use crate::geom::{close_pairs, CellGrid, PointPattern};
use crate::mc::{self, Estimate};
use crate::rng::RngStream;

/// Graph joining points at distance at most `2r`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricGraph {
    adjacency: Vec<Vec<usize>>,
    radius: f64,
}

impl GeometricGraph {
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>, radius: f64) -> Self {
        GeometricGraph { adjacency, radius }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Sorted neighbour indices of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }
}

pub fn build_gilbert(pattern: &PointPattern, r: f64) -> Result<GeometricGraph> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::param(
            "r",
            format!("must be finite and >= 0, got {r}"),
        ));
    }
    let reach = 2.0 * r;
    let grid = CellGrid::build(pattern, if reach > 0.0 { reach } else { 1.0 })?;
    let adjacency = pattern
        .points()
        .enumerate()
        .map(|(i, p)| grid.neighbors_within(pattern, p, reach, Some(i)))
        .collect();
    Ok(GeometricGraph {
        adjacency,
        radius: r,
    })
}

/// Disjoint-set forest with union by size and path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns whether they were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }

    pub fn size_of(&mut self, x: usize) -> usize {
        let root = self.find(x);
        self.size[root]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentStats {
    /// Component sizes, largest first; ties ordered by smallest member index.
    pub sizes: Vec<usize>,
    pub fraction_largest: f64,
    pub fraction_second: f64,
    /// `spans[axis]`: some component has points within `r` of both faces
    /// orthogonal to `axis`.
    pub spans: Vec<bool>,
}

impl ComponentStats {
    pub fn node_count(&self) -> usize {
        self.sizes.iter().sum()
    }
}

pub fn components(graph: &GeometricGraph, pattern: &PointPattern, r: f64) -> ComponentStats {
    let mut uf = UnionFind::new(graph.node_count());
    for (i, j) in graph.edges() {
        uf.union(i, j);
    }
    stats_from_forest(&mut uf, pattern, r)
}

fn stats_from_forest(uf: &mut UnionFind, pattern: &PointPattern, r: f64) -> ComponentStats {
    let n = uf.len();
    let d = pattern.dim();
    let window = pattern.window();
    // Per root: (first member index, size, touches lower face, touches upper face).
    let mut slot = vec![usize::MAX; n];
    let mut comps: Vec<(usize, usize, Vec<bool>, Vec<bool>)> = Vec::new();
    for (i, p) in pattern.points().enumerate() {
        let root = uf.find(i);
        if slot[root] == usize::MAX {
            slot[root] = comps.len();
            comps.push((i, 0, vec![false; d], vec![false; d]));
        }
        let c = &mut comps[slot[root]];
        c.1 += 1;
        for a in 0..d {
            if p[a] - window.lower()[a] <= r {
                c.2[a] = true;
            }
            if window.upper()[a] - p[a] <= r {
                c.3[a] = true;
            }
        }
    }
    let mut spans = vec![false; d];
    for c in &comps {
        for a in 0..d {
            spans[a] |= c.2[a] && c.3[a];
        }
    }
    comps.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let sizes: Vec<usize> = comps.iter().map(|c| c.1).collect();
    let frac = |k: usize| {
        if n == 0 {
            0.0
        } else {
            sizes.get(k).copied().unwrap_or(0) as f64 / n as f64
        }
    };
    ComponentStats {
        fraction_largest: frac(0),
        fraction_second: frac(1),
        sizes,
        spans,
    }
}

/// Component statistics of one realisation at every radius of `radii`
/// (sorted ascending), adding edges incrementally.
pub fn stats_over_radii(pattern: &PointPattern, radii: &[f64]) -> Vec<ComponentStats> {
    debug_assert!(radii.windows(2).all(|w| w[0] <= w[1]));
    let r_max = radii.last().copied().unwrap_or(0.0);
    let pairs = close_pairs(pattern, 2.0 * r_max);
    let mut uf = UnionFind::new(pattern.len());
    let mut next = 0;
    radii
        .iter()
        .map(|&r| {
            while next < pairs.len() && pairs[next].2 <= 2.0 * r {
                uf.union(pairs[next].0, pairs[next].1);
                next += 1;
            }
            stats_from_forest(&mut uf, pattern, r)
        })
        .collect()
}

/// Fraction of replicates whose Boolean model of radius `r` spans the
/// window along `axis`, with a Wilson 95% interval. Replicate `i` uses the
/// stream `rng.replicate(i)` so that calls at different `r` are coupled.
pub fn percolation_probability(
    config: &GenConfig,
    r: f64,
    reps: usize,
    axis: usize,
    rng: &RngStream,
) -> Result<Estimate> {
    if reps == 0 {
        return Err(Error::param("reps", "need at least one replicate"));
    }
    if axis >= config.window.dim() {
        return Err(Error::param(
            "axis",
            format!("axis {axis} outside the window"),
        ));
    }
    config.process.validate()?;
    let hits = mc::replicate(reps, rng, |s| -> Result<bool> {
        let pattern = config.sample_in_window(s)?;
        let graph = build_gilbert(&pattern, r)?;
        Ok(components(&graph, &pattern, r).spans[axis])
    });
    let mut successes = 0;
    for h in hits {
        successes += usize::from(h?);
    }
    Ok(mc::wilson(successes, reps, mc::Z95))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub mean_frac1: f64,
    pub mean_frac2: f64,
    pub p_span: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub reps: usize,
}

/// Mean component fractions and spanning probability (along axis 0) at
/// each radius of `r_grid`, with common random numbers across radii.
pub fn sweep_r(
    config: &GenConfig,
    r_grid: &[f64],
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<SweepRow>> {
    if r_grid.is_empty() {
        return Err(Error::param("r_grid", "must be nonempty"));
    }
    if reps == 0 {
        return Err(Error::param("reps", "need at least one replicate"));
    }
    if r_grid.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::param("r_grid", "radii must be finite and >= 0"));
    }
    config.process.validate()?;
    let mut order: Vec<usize> = (0..r_grid.len()).collect();
    order.sort_by(|&a, &b| r_grid[a].total_cmp(&r_grid[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| r_grid[i]).collect();
    let per_rep = mc::replicate(reps, rng, |s| -> Result<Vec<(f64, f64, bool)>> {
        let pattern = config.sample_in_window(s)?;
        Ok(stats_over_radii(&pattern, &sorted)
            .into_iter()
            .map(|c| (c.fraction_largest, c.fraction_second, c.spans[0]))
            .collect())
    });
    let mut sums = vec![(0.0, 0.0, 0usize); sorted.len()];
    for rep in per_rep {
        for (acc, (f1, f2, span)) in sums.iter_mut().zip(rep?) {
            acc.0 += f1;
            acc.1 += f2;
            acc.2 += usize::from(span);
        }
    }
    let mut rows = vec![None; r_grid.len()];
    for (k, &orig) in order.iter().enumerate() {
        let (f1, f2, spans) = sums[k];
        let w = mc::wilson(spans, reps, mc::Z95);
        rows[orig] = Some(SweepRow {
            r: sorted[k],
            mean_frac1: f1 / reps as f64,
            mean_frac2: f2 / reps as f64,
            p_span: w.value,
            ci_lo: w.ci_lo,
            ci_hi: w.ci_hi,
            reps,
        });
    }
    Ok(rows.into_iter().map(Option::unwrap).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RcEstimate {
    /// Midpoint of the final bracket.
    pub r_hat: f64,
    pub half_width: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub p_lo: Estimate,
    pub p_hi: Estimate,
    pub evaluations: usize,
}

/// Bisection for the radius at which the spanning probability crosses
/// `target_p`, until the bracket is at most `tol` wide.
pub fn estimate_rc(
    config: &GenConfig,
    r_lo: f64,
    r_hi: f64,
    reps: usize,
    target_p: f64,
    tol: f64,
    rng: &RngStream,
) -> Result<RcEstimate> {
    if !(r_lo >= 0.0 && r_lo < r_hi && r_hi.is_finite()) {
        return Err(Error::param(
            "r_lo,r_hi",
            format!("need 0 <= r_lo < r_hi, got {r_lo}, {r_hi}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let p = |r: f64| percolation_probability(config, r, reps, 0, rng);
    let (mut lo, mut hi) = (r_lo, r_hi);
    let (mut p_lo, mut p_hi) = (p(lo)?, p(hi)?);
    let mut evaluations = 2;
    if !(p_lo.value < target_p && target_p < p_hi.value) {
        return Err(Error::InvalidBracket {
            r_lo,
            r_hi,
            p_lo: p_lo.value,
            p_hi: p_hi.value,
            target: target_p,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let pm = p(mid)?;
        evaluations += 1;
        if pm.value < target_p {
            lo = mid;
            p_lo = pm;
        } else {
            hi = mid;
            p_hi = pm;
        }
    }
    Ok(RcEstimate {
        r_hat: 0.5 * (lo + hi),
        half_width: 0.5 * (hi - lo),
        r_lo: lo,
        r_hi: hi,
        p_lo,
        p_hi,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMode {
    /// Close-packed lattice of cells of side at most `r / sqrt(d)`; a cell is
    /// open when it holds at least `ceil(k / 2)` germs. Spanning of open
    /// cells is sufficient for percolation of the k-covered set.
    LatticeSufficient,
    /// Cells of side at most `resolution`, open when their centre is covered
    /// at least `k` times.
    FineGrid,
}

/// Whether the set covered at least `k` times by balls of radius `r` around
/// the points of `pattern` spans the window along axis 0 (Moore adjacency
/// between cells).
pub fn k_coverage_percolates(
    pattern: &PointPattern,
    r: f64,
    k: usize,
    mode: CoverageMode,
    resolution: f64,
) -> Result<bool> {
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::param(
            "r",
            format!("must be finite and >= 0, got {r}"),
        ));
    }
    let window = pattern.window();
    let d = window.dim();
    match mode {
        CoverageMode::LatticeSufficient => {
            if r == 0.0 {
                return Ok(false);
            }
            let (dims, h) = cell_layout(pattern, r / (d as f64).sqrt());
            let mut counts = vec![0usize; dims.iter().product()];
            for p in pattern.points() {
                if !window.contains(p) {
                    continue;
                }
                let mut flat = 0;
                for a in (0..d).rev() {
                    let i = (((p[a] - window.lower()[a]) / h[a]).floor() as usize).min(dims[a] - 1);
                    flat = flat * dims[a] + i;
                }
                counts[flat] += 1;
            }
            let need = k.div_ceil(2);
            let open: Vec<bool> = counts.iter().map(|&c| c >= need).collect();
            Ok(moore_spans(&dims, &open, 0))
        }
        CoverageMode::FineGrid => {
            if !(resolution > 0.0 && resolution.is_finite()) {
                return Err(Error::param(
                    "resolution",
                    format!("must be positive, got {resolution}"),
                ));
            }
            let (dims, h) = cell_layout(pattern, resolution);
            let grid = CellGrid::build(pattern, if r > 0.0 { r } else { 1.0 })?;
            let total: usize = dims.iter().product();
            let mut center = vec![0.0; d];
            let open: Vec<bool> = (0..total)
                .map(|flat| {
                    let mut rem = flat;
                    for a in 0..d {
                        center[a] = window.lower()[a] + ((rem % dims[a]) as f64 + 0.5) * h[a];
                        rem /= dims[a];
                    }
                    let mut covered = 0;
                    grid.for_each_within(pattern, &center, r, |_, _| covered += 1);
                    covered >= k
                })
                .collect();
            Ok(moore_spans(&dims, &open, 0))
        }
    }
}

/// Cells per axis and their sides when the window is tiled by cells of side
/// at most `max_side`.
pub(crate) fn cell_layout(pattern: &PointPattern, max_side: f64) -> (Vec<usize>, Vec<f64>) {
    let w = pattern.window();
    (0..w.dim())
        .map(|a| {
            let n = ((w.side(a) / max_side).ceil() as usize).max(1);
            (n, w.side(a) / n as f64)
        })
        .unzip()
}

/// Whether open sites of a box-shaped grid (axis 0 varying fastest) connect
/// the first and last layer along `axis` under Moore adjacency.
pub(crate) fn moore_spans(dims: &[usize], open: &[bool], axis: usize) -> bool {
    let d = dims.len();
    let total: usize = dims.iter().product();
    debug_assert_eq!(open.len(), total);
    let mut strides = vec![1usize; d];
    for a in 1..d {
        strides[a] = strides[a - 1] * dims[a - 1];
    }
    let coord = |flat: usize, a: usize| (flat / strides[a]) % dims[a];
    let mut seen = vec![false; total];
    let mut stack: Vec<usize> = (0..total)
        .filter(|&f| open[f] && coord(f, axis) == 0)
        .collect();
    for &f in &stack {
        seen[f] = true;
    }
    let offsets = 3usize.pow(d as u32);
    while let Some(f) = stack.pop() {
        if coord(f, axis) == dims[axis] - 1 {
            return true;
        }
        'next: for o in 0..offsets {
            let mut rem = o;
            let mut g = f;
            for a in 0..d {
                let step = (rem % 3) as isize - 1;
                rem /= 3;
                let c = coord(f, a) as isize + step;
                if c < 0 || c >= dims[a] as isize {
                    continue 'next;
                }
                g = (g as isize + step * strides[a] as isize) as usize;
            }
            if open[g] && !seen[g] {
                seen[g] = true;
                stack.push(g);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{LatticeSpec, ProcessSpec};
    use crate::geom::{Point, Window};

    fn line_pattern(xs: &[f64]) -> PointPattern {
        let w = Window::new(vec![-1.0, -1.0], vec![4.0, 1.0]).unwrap();
        PointPattern::new(
            w,
            0.0,
            xs.iter()
                .map(|x| Point::new(vec![*x, 0.0]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn hex_config(side: f64) -> GenConfig {
        GenConfig::new(
            ProcessSpec::Lattice {
                lattice: LatticeSpec::hexagonal(1.0),
            },
            Window::cube(2, side).unwrap(),
        )
    }

    #[test]
    fn gilbert_examples() {
        let p = line_pattern(&[0.0, 1.0, 3.0]);
        assert_eq!(build_gilbert(&p, 0.0).unwrap().edge_count(), 0);
        let g = build_gilbert(&p, 0.6).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(components(&g, &p, 0.6).sizes, vec![2, 1]);
        assert!(build_gilbert(&p, -1.0).is_err());
    }

    #[test]
    fn empty_pattern_stats() {
        let p = PointPattern::empty(Window::cube(2, 1.0).unwrap(), 0.0);
        let c = components(&build_gilbert(&p, 1.0).unwrap(), &p, 1.0);
        assert_eq!((c.fraction_largest, c.fraction_second), (0.0, 0.0));
        assert_eq!(c.spans, vec![false, false]);
    }

    #[test]
    fn ties_break_by_smallest_index() {
        let p = line_pattern(&[3.0, 0.0, 0.5, 2.9]);
        let c = components(&build_gilbert(&p, 0.3).unwrap(), &p, 0.3);
        assert_eq!(c.sizes, vec![2, 2]);
        assert_eq!(c.fraction_largest, 0.5);
    }

    #[test]
    fn hex_lattice_threshold() {
        let cfg = hex_config(10.0);
        let p = cfg.sample_in_window(&RngStream::new(0)).unwrap();
        let below = components(&build_gilbert(&p, 0.49).unwrap(), &p, 0.49);
        assert_eq!(below.spans, vec![false, false]);
        assert_eq!(below.fraction_largest, 1.0 / p.len() as f64);
        let above = components(&build_gilbert(&p, 0.51).unwrap(), &p, 0.51);
        assert_eq!(above.spans, vec![true, true]);
        assert_eq!(above.sizes.len(), 1);
    }

    #[test]
    fn percolation_probability_examples() {
        let s = RngStream::new(1);
        let cfg = hex_config(10.0);
        assert_eq!(
            percolation_probability(&cfg, 0.0, 5, 0, &s).unwrap().value,
            0.0
        );
        assert_eq!(
            percolation_probability(&cfg, 0.51, 5, 0, &s).unwrap().value,
            1.0
        );
        assert!(percolation_probability(&cfg, 0.5, 0, 0, &s).is_err());
    }

    #[test]
    fn poisson_brackets_reference_radius() {
        let cfg = GenConfig::new(
            ProcessSpec::Poisson {
                intensity: 1.154701,
            },
            Window::cube(2, 50.0).unwrap(),
        );
        let s = RngStream::new(2);
        let lo = percolation_probability(&cfg, 0.50, 40, 0, &s).unwrap();
        let hi = percolation_probability(&cfg, 0.62, 40, 0, &s).unwrap();
        assert!(lo.ci_hi < 0.5, "{lo:?}");
        assert!(hi.ci_lo > 0.5, "{hi:?}");
    }

    #[test]
    fn deterministic_sweep_is_a_step_function() {
        let cfg = hex_config(8.0);
        let rows = sweep_r(&cfg, &[0.51, 0.3, 0.49], 1, &RngStream::new(3)).unwrap();
        assert_eq!(rows[0].r, 0.51);
        assert_eq!(rows[0].mean_frac1, 1.0);
        assert_eq!(rows[0].p_span, 1.0);
        assert_eq!(rows[1].mean_frac1, rows[2].mean_frac1);
        assert_eq!(rows[2].p_span, 0.0);
        assert!(sweep_r(&cfg, &[], 1, &RngStream::new(3)).is_err());
    }

    #[test]
    fn sweep_matches_direct_evaluation() {
        let cfg = GenConfig::new(
            ProcessSpec::Poisson { intensity: 1.0 },
            Window::cube(2, 12.0).unwrap(),
        );
        let s = RngStream::new(8);
        let grid = [0.4, 0.6, 0.8];
        let rows = sweep_r(&cfg, &grid, 30, &s).unwrap();
        for (row, r) in rows.iter().zip(grid) {
            let direct = percolation_probability(&cfg, r, 30, 0, &s).unwrap();
            assert_eq!(row.p_span, direct.value);
        }
    }

    #[test]
    fn estimate_rc_on_hex_lattice() {
        let cfg = hex_config(8.0);
        let est = estimate_rc(&cfg, 0.3, 0.7, 1, 0.5, 1e-4, &RngStream::new(0)).unwrap();
        assert!((est.r_hat - 0.5).abs() <= 1e-4);
        let err = estimate_rc(&cfg, 0.0, 0.4, 1, 0.5, 1e-3, &RngStream::new(0)).unwrap_err();
        assert!(matches!(err, Error::InvalidBracket { .. }));
    }

    #[test]
    fn k_coverage_examples() {
        let w = Window::cube(2, 4.0).unwrap();
        let dense = crate::generators::make_lattice(&LatticeSpec::square(0.25), &w, 0.0).unwrap();
        assert!(k_coverage_percolates(&dense, 0.3, 1, CoverageMode::FineGrid, 0.1).unwrap());
        let single = PointPattern::new(w, 0.0, vec![Point::new(vec![2.0, 2.0]).unwrap()]).unwrap();
        for mode in [CoverageMode::FineGrid, CoverageMode::LatticeSufficient] {
            assert!(!k_coverage_percolates(&single, 5.0, 2, mode, 0.1).unwrap());
        }
        assert!(k_coverage_percolates(&single, 5.0, 1, CoverageMode::FineGrid, 0.1).unwrap());
    }

    #[test]
    fn k_coverage_monotone_in_r() {
        let p = crate::generators::sample_poisson(
            &Window::cube(2, 10.0).unwrap(),
            1.154701,
            0.0,
            &RngStream::new(5),
        )
        .unwrap();
        for mode in [CoverageMode::FineGrid, CoverageMode::LatticeSufficient] {
            let mut last = false;
            for i in 0..30 {
                let r = 0.3 + 0.05 * i as f64;
                let now = k_coverage_percolates(&p, r, 2, mode, 0.05).unwrap();
                if mode == CoverageMode::FineGrid {
                    assert!(now || !last, "r={r}");
                }
                last = now;
            }
            assert!(last);
        }
    }

    #[test]
    fn moore_spanning() {
        // Diagonal chain spans under Moore adjacency.
        let dims = [3, 3];
        let mut open = vec![false; 9];
        for i in 0..3 {
            open[i + 3 * i] = true;
        }
        assert!(moore_spans(&dims, &open, 0));
        assert!(moore_spans(&dims, &open, 1));
        open[4] = false;
        assert!(!moore_spans(&dims, &open, 0));
    }
}
