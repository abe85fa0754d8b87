//! Experiment runner behind the `percsim` binary: resolves a config,
//! dispatches a subcommand and renders deterministic CSV.

pub mod config;
mod table;

use anyhow::{anyhow, bail, Context, Result};
use percsim::bounds::{analytic_report, c_lambda, c_lambda_k, rc_lower, rc_upper_tilde};
use percsim::discrete::{expected_paths_sweep, rbar_upper_scan, rlower_surrogate};
use percsim::generators::{
    sample_count_vectors, CountModel, EigenTable, GenConfig, ProcessSpec, ReplicationKernel,
};
use percsim::mc::{self, wilson, Z95};
use percsim::percolation::{
    estimate_rc, k_coverage_percolates, stats_over_radii, sweep_r, SweepRow,
};
use percsim::shotnoise::{sinr_span_sweep, SinrExperiment, SinrParams};
use percsim::stats::{
    cx_order_check, dcx_counts_check, default_battery, poisson_k, ripley_k, weak_poisson_report,
    IntDistribution,
};
use percsim::{fmt17, RngStream, Window};

pub use config::{ExperimentConfig, Overrides, Preset};
pub use table::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Generate,
    Percolate,
    SweepR,
    EstimateRc,
    Kperc,
    Rbar,
    Rpaths,
    SinrSweep,
    Bounds,
    CxCheck,
    CountsDcx,
    Stats,
    Figure2,
    Figure4,
}

impl Command {
    pub const ALL: [Command; 14] = [
        Command::Generate,
        Command::Percolate,
        Command::SweepR,
        Command::EstimateRc,
        Command::Kperc,
        Command::Rbar,
        Command::Rpaths,
        Command::SinrSweep,
        Command::Bounds,
        Command::CxCheck,
        Command::CountsDcx,
        Command::Stats,
        Command::Figure2,
        Command::Figure4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Percolate => "percolate",
            Command::SweepR => "sweep-r",
            Command::EstimateRc => "estimate-rc",
            Command::Kperc => "kperc",
            Command::Rbar => "rbar",
            Command::Rpaths => "rpaths",
            Command::SinrSweep => "sinr-sweep",
            Command::Bounds => "bounds",
            Command::CxCheck => "cx-check",
            Command::CountsDcx => "counts-dcx",
            Command::Stats => "stats",
            Command::Figure2 => "figure2",
            Command::Figure4 => "figure4",
        }
    }
}

/// What a run produces: the CSV body, optional human-readable text and the
/// fully resolved config that reproduces it.
pub struct Artifact {
    pub csv: String,
    pub text: Option<String>,
    pub config: ExperimentConfig,
}

fn f(v: f64) -> String {
    fmt17(v)
}

/// Fills preset defaults so that the written config is self-contained.
pub fn resolve(cmd: Command, cfg: &mut ExperimentConfig) {
    cfg.seed.get_or_insert(1);
    if let Some(preset) = preset(cmd) {
        cfg.window.get_or_insert(config::WindowConfig::Side(50.0));
        cfg.reps.get_or_insert(300);
        cfg.r_grid.get_or_insert(config::Grid::Range {
            start: 0.5,
            stop: 0.7,
            step: 0.005,
        });
        cfg.figure.get_or_insert(config::FigureSection {
            ns: preset.default_ns(),
            spacing: 1.0,
        });
    }
}

fn preset(cmd: Command) -> Option<Preset> {
    match cmd {
        Command::Figure2 => Some(Preset::Binomial),
        Command::Figure4 => Some(Preset::NegBinomial),
        _ => None,
    }
}

fn gen_config(cfg: &ExperimentConfig) -> Result<GenConfig> {
    let mut g = GenConfig::new(cfg.process()?.clone(), cfg.window()?);
    g.margin = cfg.margin;
    if g.window.dim() != 2 && !matches!(g.process, ProcessSpec::Poisson { .. }) {
        bail!("window: lattice-based processes are planar");
    }
    Ok(g)
}

/// Resolves `cfg` for `cmd`, validates it and runs the experiment.
pub fn run(cmd: Command, mut cfg: ExperimentConfig) -> Result<Artifact> {
    resolve(cmd, &mut cfg);
    let rng = RngStream::new(cfg.seed());
    let mut text = None;
    let table = match cmd {
        Command::Generate => generate(&cfg, &rng)?,
        Command::Percolate => percolate(&cfg, &rng)?,
        Command::SweepR => {
            let g = gen_config(&cfg)?;
            let rows = sweep_r(&g, &cfg.r_grid()?, cfg.reps()?, &rng)?;
            sweep_table(&[], &rows)
        }
        Command::EstimateRc => estimate(&cfg, &rng)?,
        Command::Kperc => kperc(&cfg, &rng)?,
        Command::Rbar => rbar(&cfg, &rng)?,
        Command::Rpaths => rpaths(&cfg, &rng)?,
        Command::SinrSweep => sinr(&cfg, &rng)?,
        Command::Bounds => {
            let (t, s) = bounds(&cfg)?;
            text = Some(s);
            t
        }
        Command::CxCheck => cx(&cfg)?,
        Command::CountsDcx => counts(&cfg, &rng)?,
        Command::Stats => stats(&cfg, &rng)?,
        Command::Figure2 | Command::Figure4 => {
            let preset = preset(cmd).expect("figure preset");
            let curves = figure_curves(preset, &cfg)?;
            let mut t = Table::new(&[
                "family",
                "n",
                "r",
                "mean_frac1",
                "mean_frac2",
                "p_span",
                "ci_lo",
                "ci_hi",
                "reps",
            ]);
            for (n, rows) in &curves {
                let family = if n == "inf" {
                    "poisson"
                } else {
                    preset.label()
                };
                for row in rows {
                    t.push(vec![
                        family.into(),
                        n.clone(),
                        f(row.r),
                        f(row.mean_frac1),
                        f(row.mean_frac2),
                        f(row.p_span),
                        f(row.ci_lo),
                        f(row.ci_hi),
                        row.reps.to_string(),
                    ]);
                }
            }
            t
        }
    };
    let hash = cfg.hash()?;
    Ok(Artifact {
        csv: table.to_csv(cfg.seed(), &hash),
        text,
        config: cfg.canonical(),
    })
}

/// Sweeps every curve of a figure preset; curves are keyed by `n`
/// (`"inf"` for Poisson) in preset order.
pub fn figure_curves(
    preset: Preset,
    cfg: &ExperimentConfig,
) -> Result<Vec<(String, Vec<SweepRow>)>> {
    let fig = cfg.section("figure", &cfg.figure)?;
    let window = cfg.window()?;
    let grid = cfg.r_grid()?;
    let reps = cfg.reps()?;
    let rng = RngStream::new(cfg.seed());
    preset
        .curves(fig)
        .into_iter()
        .map(|(n, process)| {
            let g = GenConfig::new(process, window.clone());
            let rows = sweep_r(
                &g,
                &grid,
                reps,
                &rng.derive(&format!("{}-{n}", preset.label())),
            )?;
            Ok((n, rows))
        })
        .collect()
}

/// First grid radius at which the mean largest-component fraction reaches
/// `level`.
pub fn crossing_radius(rows: &[SweepRow], level: f64) -> Option<f64> {
    rows.iter().find(|r| r.mean_frac1 >= level).map(|r| r.r)
}

fn sweep_table(prefix: &[&str], rows: &[SweepRow]) -> Table {
    let mut cols = prefix.to_vec();
    cols.extend([
        "r",
        "mean_frac1",
        "mean_frac2",
        "p_span",
        "ci_lo",
        "ci_hi",
        "reps",
    ]);
    let mut t = Table::new(&cols);
    for row in rows {
        t.push(vec![
            f(row.r),
            f(row.mean_frac1),
            f(row.mean_frac2),
            f(row.p_span),
            f(row.ci_lo),
            f(row.ci_hi),
            row.reps.to_string(),
        ]);
    }
    t
}

fn generate(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let g = gen_config(cfg)?;
    let pattern = g.sample_in_window(rng)?;
    let cols: Vec<String> = (0..pattern.dim()).map(|a| format!("x{a}")).collect();
    let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    for p in pattern.points() {
        t.push(p.iter().map(|&v| f(v)).collect());
    }
    Ok(t)
}

fn percolate(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let g = gen_config(cfg)?;
    let grid = cfg.r_grid()?;
    let pattern = g.sample_in_window(rng)?;
    let d = pattern.dim();
    let mut cols = vec![
        "r".to_string(),
        "points".into(),
        "components".into(),
        "fraction_largest".into(),
        "fraction_second".into(),
    ];
    cols.extend((0..d).map(|a| format!("spans_{a}")));
    let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    for (r, s) in grid.iter().zip(stats_over_radii(&pattern, &grid)) {
        let mut row = vec![
            f(*r),
            pattern.len().to_string(),
            s.sizes.len().to_string(),
            f(s.fraction_largest),
            f(s.fraction_second),
        ];
        row.extend(s.spans.iter().map(|b| b.to_string()));
        t.push(row);
    }
    Ok(t)
}

fn estimate(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let g = gen_config(cfg)?;
    let rc = cfg.section("rc", &cfg.rc)?;
    let est = estimate_rc(&g, rc.r_lo, rc.r_hi, cfg.reps()?, rc.target, rc.tol, rng)?;
    let mut t = Table::new(&[
        "r_hat",
        "half_width",
        "r_lo",
        "r_hi",
        "p_lo",
        "p_hi",
        "evaluations",
        "reps",
    ]);
    t.push(vec![
        f(est.r_hat),
        f(est.half_width),
        f(est.r_lo),
        f(est.r_hi),
        f(est.p_lo.value),
        f(est.p_hi.value),
        est.evaluations.to_string(),
        cfg.reps()?.to_string(),
    ]);
    Ok(t)
}

fn kperc(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let g = gen_config(cfg)?;
    let sec = cfg.section("kperc", &cfg.kperc)?;
    let grid = cfg.r_grid()?;
    let reps = cfg.reps()?;
    if sec.k.is_empty() || sec.k.contains(&0) {
        bail!("[kperc].k: need a nonempty list of k >= 1");
    }
    let per_rep = mc::replicate(reps, rng, |s| -> percsim::Result<Vec<bool>> {
        let p = g.sample_in_window(s)?;
        let mut out = Vec::new();
        for &k in &sec.k {
            for &r in &grid {
                out.push(k_coverage_percolates(&p, r, k, sec.mode, sec.resolution)?);
            }
        }
        Ok(out)
    });
    let per_rep: Vec<Vec<bool>> = per_rep.into_iter().collect::<percsim::Result<_>>()?;
    let mode = match sec.mode {
        percsim::percolation::CoverageMode::LatticeSufficient => "lattice-sufficient",
        percsim::percolation::CoverageMode::FineGrid => "fine-grid",
    };
    let mut t = Table::new(&["k", "mode", "r", "p_perc", "ci_lo", "ci_hi", "reps"]);
    for (ki, k) in sec.k.iter().enumerate() {
        for (ri, r) in grid.iter().enumerate() {
            let idx = ki * grid.len() + ri;
            let est = wilson(per_rep.iter().filter(|v| v[idx]).count(), reps, Z95);
            t.push(vec![
                k.to_string(),
                mode.into(),
                f(*r),
                f(est.value),
                f(est.ci_lo),
                f(est.ci_hi),
                reps.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn rbar(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let sec = cfg.section("discrete", &cfg.discrete)?;
    let scan = rbar_upper_scan(
        cfg.process()?,
        sec.n,
        &cfg.r_grid()?,
        sec.max_len,
        cfg.reps()?,
        rng,
    )?;
    let mut t = Table::new(&[
        "r",
        "truncated_sum",
        "ci_lo",
        "ci_hi",
        "rho_hat",
        "tail_bound",
        "summable",
        "contours",
        "max_len",
        "r_bar",
    ]);
    for row in &scan.rows {
        t.push(vec![
            f(row.r),
            f(row.truncated_sum.value),
            f(row.truncated_sum.ci_lo),
            f(row.truncated_sum.ci_hi),
            f(row.rho_hat),
            f(row.tail_bound),
            row.summable.to_string(),
            row.contours.to_string(),
            row.longest.to_string(),
            f(scan.r_bar.unwrap_or(f64::NAN)),
        ]);
    }
    Ok(t)
}

fn rpaths(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let sec = cfg.section("discrete", &cfg.discrete)?;
    let dim = cfg
        .window
        .as_ref()
        .map(|w| w.to_window().map(|w| w.dim()))
        .transpose()?
        .unwrap_or(2);
    let rows = expected_paths_sweep(
        cfg.process()?,
        dim,
        &cfg.r_grid()?,
        sec.m,
        cfg.reps()?,
        sec.cap,
        rng,
    )?;
    let r_lower = rlower_surrogate(&rows, sec.threshold);
    let mut t = Table::new(&[
        "r",
        "mean_paths",
        "ci_lo",
        "ci_hi",
        "truncated_rate",
        "reps",
        "r_lower",
    ]);
    for row in &rows {
        t.push(vec![
            f(row.r),
            f(row.mean),
            f(row.ci_lo),
            f(row.ci_hi),
            f(row.truncated_rate),
            row.reps.to_string(),
            f(r_lower.unwrap_or(f64::NAN)),
        ]);
    }
    Ok(t)
}

fn sinr(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let sec = cfg.section("sinr", &cfg.sinr)?;
    let backbone = gen_config(cfg)?;
    let interferers = match &sec.interferers {
        Some(p) => {
            p.validate().context("[sinr].interferers")?;
            Some(GenConfig::new(p.clone(), backbone.window.clone()))
        }
        None => None,
    };
    let exp = SinrExperiment {
        backbone,
        interferers,
        params: SinrParams {
            power: sec.power,
            noise: sec.noise,
            threshold: sec.threshold,
            gamma: 0.0,
        },
        response: sec.response,
        margin: sec.margin,
    };
    let rows = sinr_span_sweep(&exp, &cfg.gamma_grid()?, cfg.reps()?, rng)?;
    let mut t = Table::new(&[
        "gamma",
        "p_span",
        "ci_lo",
        "ci_hi",
        "reps",
        "truncation_bound",
    ]);
    for row in &rows {
        t.push(vec![
            f(row.gamma),
            f(row.p_span.value),
            f(row.p_span.ci_lo),
            f(row.p_span.ci_hi),
            row.reps.to_string(),
            f(row.truncation_bound),
        ]);
    }
    Ok(t)
}

fn bounds(cfg: &ExperimentConfig) -> Result<(Table, String)> {
    let sec = cfg.section("bounds", &cfg.bounds)?;
    let (lam, d, k) = (sec.lambda, sec.d, sec.k);
    let report = analytic_report(lam, d, k)?;
    let values = [
        ("rc_lower", rc_lower(lam, d)?),
        ("rc_upper_tilde", rc_upper_tilde(lam, d)?),
        ("c_lambda", c_lambda(lam, d)?),
        ("c_lambda_k", c_lambda_k(lam, k, d)?),
    ];
    let mut t = Table::new(&["quantity", "lambda", "d", "k", "value"]);
    let mut text = format!("lambda = {lam}, d = {d}, k = {k}\n");
    for (name, v) in values {
        t.push(vec![
            name.into(),
            f(lam),
            d.to_string(),
            k.to_string(),
            f(v),
        ]);
        text.push_str(&format!("{name:<16}{v:>12.6}\n"));
    }
    text.push_str(&format!(
        "{:<16}[{:.6}, {:.6}]{}\n",
        "bracket",
        report.lower,
        report.upper,
        if report.violation { "  VIOLATED" } else { "" }
    ));
    Ok((t, text))
}

/// Short human-readable kernel name, e.g. `binomial(n=6,p=0.333)`.
pub fn kernel_label(k: &ReplicationKernel) -> String {
    use ReplicationKernel::*;
    match k {
        Dirac { k } => format!("dirac(k={k})"),
        Binomial { n, p } => format!("binomial(n={n};p={p})"),
        Poisson { mean } => format!("poisson(mean={mean})"),
        NegBinomial { r, p } => format!("neg_binomial(r={r};p={p})"),
        Geometric { p } => format!("geometric(p={p})"),
        HyperGeometric { n, m, k } => format!("hypergeometric(n={n};m={m};k={k})"),
        GeoMixture { weights, params } => format!(
            "geo_mixture(w={};p={})",
            weights
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join("/"),
            params
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join("/")
        ),
    }
}

fn cx(cfg: &ExperimentConfig) -> Result<Table> {
    let sec = cfg.section("cx", &cfg.cx)?;
    if sec.chain.len() < 2 {
        bail!("[cx].chain: need at least two kernels");
    }
    let dists: Vec<IntDistribution> = sec
        .chain
        .iter()
        .enumerate()
        .map(|(i, k)| {
            match sec.cap {
                Some(cap) => IntDistribution::from_kernel_with_cap(k, cap),
                None => IntDistribution::from_kernel(k),
            }
            .with_context(|| format!("[cx].chain[{i}]"))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["link", "a", "b", "verdict", "mean_a", "mean_b", "witness"]);
    for i in 0..dists.len() - 1 {
        let rep = cx_order_check(&dists[i], &dists[i + 1], sec.tol)?;
        let verdict = match rep.verdict {
            percsim::stats::CxVerdict::Equal => "equal",
            percsim::stats::CxVerdict::ALeqB => "a_leq_b",
            percsim::stats::CxVerdict::BLeqA => "b_leq_a",
            percsim::stats::CxVerdict::Incomparable => "incomparable",
        };
        t.push(vec![
            i.to_string(),
            kernel_label(&sec.chain[i]),
            kernel_label(&sec.chain[i + 1]),
            verdict.into(),
            f(rep.mean_a),
            f(rep.mean_b),
            rep.witness.map(|w| w.to_string()).unwrap_or_default(),
        ]);
    }
    Ok(t)
}

const MODELS: [(CountModel, &str); 3] = [
    (CountModel::Determinantal, "determinantal"),
    (CountModel::Poisson, "poisson"),
    (CountModel::Permanental, "permanental"),
];

/// Count vectors for each model on the same table, on separate streams.
pub fn count_samples(
    table: &EigenTable,
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<Vec<Vec<u64>>>> {
    MODELS
        .iter()
        .map(|(m, name)| Ok(sample_count_vectors(*m, table, reps, &rng.derive(name))?))
        .collect()
}

fn counts(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let sec = cfg.section("dcx", &cfg.dcx)?;
    let table = EigenTable::new(sec.table.clone()).context("[dcx].table")?;
    let battery = sec
        .battery
        .clone()
        .unwrap_or_else(|| default_battery(table.sets()));
    let samples = count_samples(&table, cfg.reps()?, rng)?;
    let mut t = Table::new(&[
        "a",
        "b",
        "function",
        "class",
        "mean_a",
        "se_a",
        "mean_b",
        "se_b",
        "consistent",
    ]);
    for i in 0..2 {
        for row in dcx_counts_check(&samples[i], &samples[i + 1], &battery)? {
            let class = match row.class {
                percsim::stats::OrderClass::Dcx => "dcx",
                percsim::stats::OrderClass::Idcx => "idcx",
                percsim::stats::OrderClass::Ddcx => "ddcx",
            };
            t.push(vec![
                MODELS[i].1.into(),
                MODELS[i + 1].1.into(),
                row.function,
                class.into(),
                f(row.a.value),
                f(row.a.se),
                f(row.b.value),
                f(row.b.se),
                row.consistent.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn stats(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Table> {
    let g = gen_config(cfg)?;
    let sec = cfg.section("stats", &cfg.stats)?;
    let reps = cfg.reps()?;
    let mut t = Table::new(&[
        "statistic",
        "index",
        "r",
        "value",
        "ci_lo",
        "ci_hi",
        "reference",
        "label",
    ]);
    if let Some(grid) = &cfg.r_grid {
        let grid = grid.values().context("r_grid")?;
        let per_rep = mc::replicate(
            reps,
            &rng.derive("ripley"),
            |s| -> percsim::Result<Vec<f64>> {
                let p = g.sample_in_window(s)?;
                ripley_k(&p, &grid, None, sec.correction, sec.unit_free)
            },
        );
        let per_rep: Vec<Vec<f64>> = per_rep.into_iter().collect::<percsim::Result<_>>()?;
        let lambda = g.process.intensity();
        for (i, r) in grid.iter().enumerate() {
            let values: Vec<f64> = per_rep
                .iter()
                .map(|v| v[i])
                .filter(|v| v.is_finite())
                .collect();
            let est = mc::mean_estimate(&values, Z95);
            let reference = match (g.window.dim(), sec.unit_free) {
                (2, false) => poisson_k(lambda, *r),
                (2, true) => std::f64::consts::PI * r * r,
                _ => f64::NAN,
            };
            t.push(vec![
                "ripley_k".into(),
                i.to_string(),
                f(*r),
                f(est.value),
                f(est.ci_lo),
                f(est.ci_hi),
                f(reference),
                String::new(),
            ]);
        }
    }
    let boxes: Vec<Window> = sec
        .boxes
        .iter()
        .enumerate()
        .map(|(i, b)| b.to_window().with_context(|| format!("[stats].boxes[{i}]")))
        .collect::<Result<_>>()?;
    let groups: Vec<Vec<Window>> = sec
        .pairs
        .iter()
        .map(|[i, j]| {
            let get = |k: usize| {
                boxes
                    .get(k)
                    .cloned()
                    .ok_or_else(|| anyhow!("[stats].pairs: no box {k}"))
            };
            Ok(vec![get(*i)?, get(*j)?])
        })
        .collect::<Result<_>>()?;
    if !boxes.is_empty() {
        for face in weak_poisson_report(&g, &boxes, &groups, reps, &rng.derive("weak"))? {
            let label = match face.label {
                percsim::stats::WeakLabel::Sub => "sub",
                percsim::stats::WeakLabel::Super => "super",
                percsim::stats::WeakLabel::Inconclusive => "inconclusive",
            };
            t.push(vec![
                face.statistic.into(),
                face.boxes[0].to_string(),
                String::new(),
                f(face.estimate.value),
                f(face.estimate.ci_lo),
                f(face.estimate.ci_hi),
                f(face.reference),
                label.into(),
            ]);
        }
    }
    Ok(t)
}
