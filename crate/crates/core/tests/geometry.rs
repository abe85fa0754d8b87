use percsim::generators::{
    sample_poisson, GenConfig, LatticeSpec, ProcessSpec, ReplicationKernel, TranslationKernel,
};
use percsim::{CellGrid, PointPattern, RngStream, Window};
use proptest::prelude::*;

fn brute_neighbors(p: &PointPattern, q: &[f64], r: f64, exclude: Option<usize>) -> Vec<usize> {
    p.points()
        .enumerate()
        .filter(|(i, x)| Some(*i) != exclude && percsim::distance(x, q).unwrap() <= r)
        .map(|(i, _)| i)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn neighbors_within_matches_pairwise_scan(seed in any::<u64>(), side in 2.0f64..40.0, lambda in 0.1f64..6.0, r in 0.0f64..3.0) {
        let w = Window::cube(2, side).unwrap();
        let p = sample_poisson(&w, lambda.min(1e4 / (side * side)), 0.0, &RngStream::new(seed)).unwrap();
        let grid = CellGrid::build(&p, r.max(0.05)).unwrap();
        for i in (0..p.len()).step_by(1 + p.len() / 50) {
            let q = p.point(i);
            prop_assert_eq!(grid.neighbors_within(&p, q, r, Some(i)), brute_neighbors(&p, q, r, Some(i)));
        }
        let probe = [side * 0.37, side * 0.61];
        prop_assert_eq!(grid.neighbors_within(&p, &probe, r, None), brute_neighbors(&p, &probe, r, None));
    }
}

#[test]
fn neighbors_within_large_pattern() {
    let w = Window::cube(2, 100.0).unwrap();
    let p = sample_poisson(&w, 1.0, 0.0, &RngStream::new(5)).unwrap();
    assert!(p.len() > 9000);
    let grid = CellGrid::build(&p, 1.0).unwrap();
    for i in (0..p.len()).step_by(97) {
        let q = p.point(i);
        assert_eq!(
            grid.neighbors_within(&p, q, 1.3, Some(i)),
            brute_neighbors(&p, q, 1.3, Some(i))
        );
    }
}

fn serialized(cfg: &GenConfig, seed: u64) -> Vec<u8> {
    let mut out = Vec::new();
    cfg.sample(&RngStream::new(seed))
        .unwrap()
        .write_csv(&mut out)
        .unwrap();
    out
}

#[test]
fn sampling_is_reproducible_for_every_family() {
    let w = Window::cube(2, 12.0).unwrap();
    let families = [
        ProcessSpec::Poisson {
            intensity: 1.154701,
        },
        ProcessSpec::Lattice {
            lattice: LatticeSpec::hexagonal(1.0),
        },
        ProcessSpec::PerturbedLattice {
            lattice: LatticeSpec::square(1.0),
            replication: ReplicationKernel::NegBinomial { r: 2.0, p: 0.5 },
            translation: TranslationKernel::UniformCell,
        },
        ProcessSpec::PerturbedLattice {
            lattice: LatticeSpec::hexagonal(1.0),
            replication: ReplicationKernel::Binomial { n: 3, p: 1.0 / 3.0 },
            translation: TranslationKernel::UniformBall { radius: 0.4 },
        },
        ProcessSpec::AnnularCox {
            alpha: 2.0,
            radius: 1.0,
            delta: 0.1,
            mu: 1.0,
        },
    ];
    for process in families {
        let cfg = GenConfig::new(process.clone(), w.clone());
        let a = serialized(&cfg, 42);
        assert_eq!(a, serialized(&cfg, 42), "{process:?}");
        let back = PointPattern::read_csv(&a[..]).unwrap();
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert_eq!(a, again);
        if !process.is_deterministic() {
            assert_ne!(a, serialized(&cfg, 43), "{process:?}");
        }
    }
}
