//! Points, axis-aligned windows, point patterns and fixed-radius neighbour
//! search.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::Deref;

use crate::error::{Error, Result};

/// A point of `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::param(
                "coords",
                "a point needs at least one coordinate",
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("coords", "coordinates must be finite"));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distance between two points of the same dimension.
pub fn distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(dist2(p, q).sqrt())
}

#[inline]
pub(crate) fn dist2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::param("window", "dimension must be at least 1"));
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param(
                    "window",
                    format!("axis {axis}: need finite lower < upper, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(Window { lower, upper })
    }

    /// `[0, side]^dim`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Window::new(vec![0.0; dim], vec![side; dim])
    }

    /// `[-half, half]^dim`.
    pub fn centered(dim: usize, half: f64) -> Result<Self> {
        Window::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.side(a)).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn dilate(&self, margin: f64) -> Window {
        Window {
            lower: self.lower.iter().map(|x| x - margin).collect(),
            upper: self.upper.iter().map(|x| x + margin).collect(),
        }
    }

    /// Window shrunk by `margin` on every face, `None` when nothing is left.
    pub fn erode(&self, margin: f64) -> Option<Window> {
        Window::new(
            self.lower.iter().map(|x| x + margin).collect(),
            self.upper.iter().map(|x| x - margin).collect(),
        )
        .ok()
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &Window) -> bool {
        (0..self.dim()).all(|a| self.lower[a] < other.upper[a] && other.lower[a] < self.upper[a])
    }

    /// Smallest window containing both.
    pub fn hull(&self, other: &Window) -> Window {
        Window {
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a.min(*b))
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }
}

/// A finite (multi)set of points sampled in `window` dilated by
/// `margin_used`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPattern {
    window: Window,
    margin_used: f64,
    coords: Vec<f64>,
}

impl PointPattern {
    pub fn empty(window: Window, margin_used: f64) -> Self {
        PointPattern {
            window,
            margin_used,
            coords: Vec::new(),
        }
    }

    /// Builds a pattern, checking that every point lies in the dilated window.
    pub fn new(window: Window, margin_used: f64, points: Vec<Point>) -> Result<Self> {
        let mut pattern = PointPattern::empty(window, margin_used.max(0.0));
        let bounds = pattern.window.dilate(pattern.margin_used);
        for p in points {
            if p.dim() != pattern.dim() {
                return Err(Error::DimensionMismatch {
                    expected: pattern.dim(),
                    found: p.dim(),
                });
            }
            if !bounds.contains(&p) {
                return Err(Error::param(
                    "points",
                    format!("{:?} lies outside the dilated window", p.coords()),
                ));
            }
            pattern.coords.extend_from_slice(&p);
        }
        Ok(pattern)
    }

    /// Unchecked constructor for samplers that already respect the window.
    pub(crate) fn from_flat(window: Window, margin_used: f64, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len() % window.dim(), 0);
        PointPattern {
            window,
            margin_used,
            coords,
        }
    }

    pub(crate) fn push(&mut self, p: &[f64]) {
        self.coords.extend_from_slice(p);
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn margin_used(&self) -> f64 {
        self.margin_used
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim())
    }

    pub fn flat_coords(&self) -> &[f64] {
        &self.coords
    }

    /// True when two points share the same location.
    pub fn has_duplicates(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.points()
            .any(|p| !seen.insert(p.iter().map(|c| c.to_bits()).collect::<Vec<_>>()))
    }

    /// The points lying in the undilated window, margin reset to zero.
    pub fn restricted_to_window(&self) -> PointPattern {
        self.restricted_to(&self.window)
    }

    /// The points lying in `window`, which becomes the pattern window.
    pub fn restricted_to(&self, window: &Window) -> PointPattern {
        let coords = self
            .points()
            .filter(|p| window.contains(p))
            .flatten()
            .copied()
            .collect();
        PointPattern::from_flat(window.clone(), 0.0, coords)
    }

    /// Superposition of two patterns on the same window.
    pub fn superpose(&self, other: &PointPattern) -> Result<PointPattern> {
        if self.window != other.window {
            return Err(Error::param("other", "patterns live on different windows"));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(PointPattern::from_flat(
            self.window.clone(),
            self.margin_used.max(other.margin_used),
            coords,
        ))
    }

    /// Writes the CSV format: `# window lo.. hi..`, `# margin m`, a header
    /// line and one point per row, every number with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("# window");
        for v in self.window.lower.iter().chain(&self.window.upper) {
            write!(line, " {}", fmt17(*v)).unwrap();
        }
        writeln!(out, "{line}")?;
        writeln!(out, "# margin {}", fmt17(self.margin_used))?;
        writeln!(out, "{}", axis_names(self.dim()).join(","))?;
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|v| fmt17(*v)).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<PointPattern> {
        let mut window = None;
        let mut margin = 0.0;
        let mut header_seen = false;
        let mut points = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("`{s}`: {e}"),
                })
            };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let mut words = rest.split_whitespace();
                match words.next() {
                    Some("window") => {
                        let vals = words.map(parse).collect::<Result<Vec<_>>>()?;
                        if vals.is_empty() || vals.len() % 2 != 0 {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: "window line needs 2d numbers".into(),
                            });
                        }
                        let d = vals.len() / 2;
                        window = Some(Window::new(vals[..d].to_vec(), vals[d..].to_vec())?);
                    }
                    Some("margin") => {
                        margin = parse(words.next().unwrap_or(""))?;
                    }
                    _ => {}
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let coords = trimmed.split(',').map(parse).collect::<Result<Vec<_>>>()?;
            points.push(Point::new(coords)?);
        }
        let window = window.ok_or(Error::Parse {
            line: 0,
            msg: "missing `# window` line".into(),
        })?;
        PointPattern::new(window, margin, points)
    }
}

fn axis_names(dim: usize) -> Vec<String> {
    (0..dim)
        .map(|a| match a {
            0 => "x".to_string(),
            1 => "y".to_string(),
            2 => "z".to_string(),
            _ => format!("x{a}"),
        })
        .collect()
}

/// Formats with 17 significant digits, enough for an exact f64 round-trip.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    format!("{v:.16e}")
}

/// Uniform-cell index of a pattern for fixed-radius queries.
///
/// Cells are `cell_size`-cubes anchored at the origin; cell `c` holds the
/// points `p` with `floor(p / cell_size) == c`.
#[derive(Clone, Debug)]
pub struct CellGrid {
    cell_size: f64,
    dim: usize,
    len: usize,
    index: HashMap<Vec<i64>, Vec<usize>>,
}

impl CellGrid {
    pub fn build(pattern: &PointPattern, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::param(
                "cell_size",
                format!("must be positive, got {cell_size}"),
            ));
        }
        let mut index: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in pattern.points().enumerate() {
            index.entry(cell_of(p, cell_size)).or_default().push(i);
        }
        Ok(CellGrid {
            cell_size,
            dim: pattern.dim(),
            len: pattern.len(),
            index,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Cell coordinates of `p`.
    pub fn cell_of(&self, p: &[f64]) -> Vec<i64> {
        cell_of(p, self.cell_size)
    }

    /// Point indices stored under `cell`, empty if none.
    pub fn cell(&self, cell: &[i64]) -> &[usize] {
        self.index.get(cell).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn occupied_cells(&self) -> usize {
        self.index.len()
    }

    /// Calls `f(i, squared distance)` for each point within `radius` of `p`.
    pub fn for_each_within(
        &self,
        pattern: &PointPattern,
        p: &[f64],
        radius: f64,
        mut f: impl FnMut(usize, f64),
    ) {
        debug_assert_eq!(pattern.len(), self.len);
        if self.len == 0 || radius < 0.0 {
            return;
        }
        let r2 = radius * radius;
        let reach = (radius / self.cell_size).ceil() as i64;
        let center = self.cell_of(p);
        let span = (2 * reach + 1) as usize;
        let total: usize = span.pow(self.dim as u32);
        // Very large reach relative to the occupancy: scan occupied cells instead.
        if total > 4 * self.index.len() + 64 {
            for (cell, members) in &self.index {
                if cell.iter().zip(&center).any(|(c, o)| (c - o).abs() > reach) {
                    continue;
                }
                for &i in members {
                    let d2 = dist2(pattern.point(i), p);
                    if d2 <= r2 {
                        f(i, d2);
                    }
                }
            }
            return;
        }
        let mut key = vec![0i64; self.dim];
        for flat in 0..total {
            let mut rem = flat;
            for (a, k) in key.iter_mut().enumerate() {
                *k = center[a] + (rem % span) as i64 - reach;
                rem /= span;
            }
            if let Some(members) = self.index.get(&key) {
                for &i in members {
                    let d2 = dist2(pattern.point(i), p);
                    if d2 <= r2 {
                        f(i, d2);
                    }
                }
            }
        }
    }

    /// Sorted indices of the points within `radius` of `p`, skipping
    /// `exclude`.
    pub fn neighbors_within(
        &self,
        pattern: &PointPattern,
        p: &[f64],
        radius: f64,
        exclude: Option<usize>,
    ) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(pattern, p, radius, |i, _| {
            if Some(i) != exclude {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }
}

fn cell_of(p: &[f64], cell_size: f64) -> Vec<i64> {
    p.iter().map(|x| (x / cell_size).floor() as i64).collect()
}

/// All unordered pairs `(i, j, distance)` with `i < j` and distance at most
/// `max_dist`, sorted by distance then indices.
pub fn close_pairs(pattern: &PointPattern, max_dist: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    if pattern.len() < 2 {
        return pairs;
    }
    let cell = if max_dist > 0.0 { max_dist } else { 1.0 };
    let grid = CellGrid::build(pattern, cell).expect("positive cell size");
    for (i, p) in pattern.points().enumerate() {
        grid.for_each_within(pattern, p, max_dist, |j, d2| {
            if j > i {
                pairs.push((i, j, d2.sqrt()));
            }
        });
    }
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(points: &[[f64; 2]]) -> PointPattern {
        let w = Window::new(vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap();
        PointPattern::new(
            w,
            0.0,
            points
                .iter()
                .map(|p| Point::new(p.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        let d = distance(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(matches!(
            distance(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(vec![0.0], vec![0.0]).is_err());
        assert!(Window::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let w = Window::cube(2, 3.0).unwrap();
        assert_eq!(w.volume(), 9.0);
        assert!(w.erode(1.5).is_none());
        assert_eq!(w.erode(1.0).unwrap().volume(), 1.0);
    }

    #[test]
    fn grid_examples() {
        let empty = pattern(&[]);
        assert_eq!(CellGrid::build(&empty, 1.0).unwrap().occupied_cells(), 0);
        assert!(CellGrid::build(&empty, 0.0).is_err());

        let one = pattern(&[[0.5, 0.5]]);
        let g = CellGrid::build(&one, 1.0).unwrap();
        assert_eq!(g.cell(&[0, 0]), &[0]);

        let line = pattern(&[[0.5, 0.5], [1.5, 0.5], [2.5, 0.5]]);
        let g = CellGrid::build(&line, 1.0).unwrap();
        assert_eq!(g.occupied_cells(), 3);
    }

    #[test]
    fn neighbor_examples() {
        let pts = pattern(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let g = CellGrid::build(&pts, 1.0).unwrap();
        assert_eq!(g.neighbors_within(&pts, &[0.0, 0.0], 0.0, None), vec![0]);
        assert_eq!(g.neighbors_within(&pts, &[0.0, 0.0], 1.2, None), vec![0, 1]);
        assert_eq!(g.neighbors_within(&pts, &[0.0, 0.0], 1.2, Some(0)), vec![1]);
        assert!(g.neighbors_within(&pts, &[5.0, 5.0], 0.9, None).is_empty());
        // Radius much larger than the cell size.
        assert_eq!(
            g.neighbors_within(&pts, &[0.0, 0.0], 50.0, None),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = pattern(&[[0.1, 1.0 / 3.0], [-2.5e-7, 9.75]]);
        let mut buf = Vec::new();
        pts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# window"));
        assert!(text.contains("\nx,y\n"));
        let back = PointPattern::read_csv(&buf[..]).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn csv_rejects_points_outside_window() {
        let text = "# window 0 0 1 1\nx,y\n2,2\n";
        assert!(PointPattern::read_csv(text.as_bytes()).is_err());
    }
}
