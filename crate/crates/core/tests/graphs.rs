use std::collections::VecDeque;

use percsim::discrete::{site_percolates, SiteField};
use percsim::generators::sample_poisson;
use percsim::percolation::{
    build_gilbert, components, k_coverage_percolates, stats_over_radii, CoverageMode,
};
use percsim::{PointPattern, RngStream, Window};
use proptest::prelude::*;

fn poisson(seed: u64, side: f64, lambda: f64) -> PointPattern {
    sample_poisson(
        &Window::cube(2, side).unwrap(),
        lambda,
        0.0,
        &RngStream::new(seed),
    )
    .unwrap()
}

/// Component sizes and spanning flags from BFS over all O(n^2) pairs.
fn brute_components(p: &PointPattern, r: f64) -> (Vec<usize>, Vec<bool>) {
    let n = p.len();
    let w = p.window();
    let mut label = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut spans = vec![false; 2];
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        label[s] = id;
        let mut queue = VecDeque::from([s]);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for j in 0..n {
                if label[j] == usize::MAX
                    && percsim::distance(p.point(i), p.point(j)).unwrap() <= 2.0 * r
                {
                    label[j] = id;
                    queue.push_back(j);
                }
            }
        }
        for (a, span) in spans.iter_mut().enumerate() {
            let lo = members.iter().any(|&i| p.point(i)[a] - w.lower()[a] <= r);
            let hi = members.iter().any(|&i| w.upper()[a] - p.point(i)[a] <= r);
            *span |= lo && hi;
        }
        sizes.push(members.len());
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    (sizes, spans)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn components_match_bfs(seed in any::<u64>(), side in 3.0f64..40.0, lambda in 0.2f64..1.2, r in 0.05f64..1.0) {
        let p = poisson(seed, side, lambda.min(2000.0 / (side * side)));
        let stats = components(&build_gilbert(&p, r).unwrap(), &p, r);
        let (sizes, spans) = brute_components(&p, r);
        prop_assert_eq!(stats.sizes, sizes);
        prop_assert_eq!(stats.spans, spans);
    }

    #[test]
    fn gilbert_edges_are_monotone_in_r(seed in any::<u64>(), r1 in 0.0f64..0.8, dr in 0.0f64..0.5) {
        let p = poisson(seed, 12.0, 1.154701);
        let r2 = r1 + dr;
        let (g1, g2) = (build_gilbert(&p, r1).unwrap(), build_gilbert(&p, r2).unwrap());
        for (i, j) in g1.edges() {
            prop_assert!(g2.has_edge(i, j));
        }
        let stats = stats_over_radii(&p, &[r1, r2]);
        prop_assert!(stats[0].fraction_largest <= stats[1].fraction_largest);
        prop_assert_eq!(&stats[0], &components(&g1, &p, r1));
    }

    #[test]
    fn k_coverage_monotone_in_k(seed in any::<u64>(), r in 0.3f64..1.5, k in 1usize..5) {
        let p = poisson(seed, 8.0, 2.0);
        for mode in [CoverageMode::LatticeSufficient, CoverageMode::FineGrid] {
            let upper = k_coverage_percolates(&p, r, k + 1, mode, 0.1).unwrap();
            let lower = k_coverage_percolates(&p, r, k, mode, 0.1).unwrap();
            prop_assert!(!upper || lower, "{:?} k={}", mode, k);
        }
    }
}

#[test]
fn lattice_sufficient_implies_fine_grid() {
    let mut positives = 0;
    for seed in 0..50 {
        let p = poisson(seed, 10.0, 1.5);
        let r = 0.9;
        if k_coverage_percolates(&p, r, 1, CoverageMode::LatticeSufficient, 0.0).unwrap() {
            positives += 1;
            // Cells of side r / sqrt(d), each split into four per axis.
            let side = 10.0 / (10.0 * 2f64.sqrt() / r).ceil();
            assert!(
                k_coverage_percolates(&p, r, 1, CoverageMode::FineGrid, side / 4.0).unwrap(),
                "seed {seed}"
            );
        }
    }
    assert!(positives > 10, "{positives}");
}

fn brute_flood(field: &SiteField) -> bool {
    let dims = field.dims();
    let (w, h) = (dims[0], dims[1]);
    let open = |x: usize, y: usize| field.states()[y * w + x];
    let mut seen = vec![false; w * h];
    let mut stack: Vec<(usize, usize)> = (0..h).filter(|&y| open(0, y)).map(|y| (0, y)).collect();
    for &(x, y) in &stack {
        seen[y * w + x] = true;
    }
    while let Some((x, y)) = stack.pop() {
        if x + 1 == w {
            return true;
        }
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if open(nx, ny) && !seen[ny * w + nx] {
                    seen[ny * w + nx] = true;
                    stack.push((nx, ny));
                }
            }
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn site_percolation_matches_flood_fill(
        (w, h, states) in (1usize..=64, 1usize..=64).prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(proptest::bool::weighted(0.6), w * h)))
    ) {
        let field = SiteField::new(4, vec![-3, 5], vec![w, h], states).unwrap();
        prop_assert_eq!(site_percolates(&field), brute_flood(&field));
    }
}
