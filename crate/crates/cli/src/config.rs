//! Experiment configuration: one TOML document with optional sections per
//! subcommand. Unknown keys are rejected.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use percsim::generators::{LatticeSpec, ProcessSpec, ReplicationKernel, TranslationKernel};
use percsim::percolation::CoverageMode;
use percsim::shotnoise::ResponseFunction;
use percsim::stats::{KCorrection, TestFunction};
use percsim::Window;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Output path; not part of the hashed config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Worker threads; not part of the hashed config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rc: Option<RcSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kperc: Option<KpercSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr: Option<SinrSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<CxSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcx: Option<DcxSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<FigureSection>,
}

/// `window = 30.0` is the square `[0, 30]^2`; otherwise explicit corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum WindowConfig {
    Side(f64),
    Corners { lower: Vec<f64>, upper: Vec<f64> },
}

impl WindowConfig {
    pub fn to_window(&self) -> Result<Window> {
        Ok(match self {
            WindowConfig::Side(s) => Window::cube(2, *s)?,
            WindowConfig::Corners { lower, upper } => Window::new(lower.clone(), upper.clone())?,
        })
    }
}

/// Either an explicit list or `{ start, stop, step }` (inclusive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0 && stop >= start) {
                    bail!("grid: need step > 0 and stop >= start");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            bail!("grid: values must be finite and nonempty");
        }
        if v.windows(2).any(|w| w[0] > w[1]) {
            bail!("grid: values must be ascending");
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcSection {
    pub r_lo: f64,
    pub r_hi: f64,
    #[serde(default = "half")]
    pub target: f64,
    #[serde(default = "rc_tol")]
    pub tol: f64,
}

fn half() -> f64 {
    0.5
}

fn rc_tol() -> f64 {
    0.005
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpercSection {
    pub k: Vec<usize>,
    pub mode: CoverageMode,
    #[serde(default = "resolution")]
    pub resolution: f64,
}

fn resolution() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSection {
    /// Lattice scale for contour sums.
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default = "max_len")]
    pub max_len: usize,
    /// Half side of the box for path counts.
    #[serde(default = "three")]
    pub m: f64,
    #[serde(default = "cap")]
    pub cap: u64,
    #[serde(default = "threshold")]
    pub threshold: f64,
}

fn one() -> usize {
    1
}

fn max_len() -> usize {
    12
}

fn three() -> f64 {
    3.0
}

fn cap() -> u64 {
    1_000_000
}

fn threshold() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrSection {
    pub power: f64,
    pub noise: f64,
    pub threshold: f64,
    #[serde(default)]
    pub response: ResponseFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferers: Option<ProcessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub lambda: f64,
    #[serde(default = "two")]
    pub d: usize,
    #[serde(default = "one")]
    pub k: usize,
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CxSection {
    /// Consecutive pairs are compared.
    pub chain: Vec<ReplicationKernel>,
    #[serde(default = "cx_tol")]
    pub tol: f64,
    /// Fixed support cap; by default each distribution is tabulated until
    /// its tail is negligible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

fn cx_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcxSection {
    pub table: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<Vec<TestFunction>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxConfig {
    pub fn to_window(&self) -> Result<Window> {
        Ok(Window::new(self.lower.clone(), self.upper.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    #[serde(default)]
    pub boxes: Vec<BoxConfig>,
    /// Index pairs into `boxes` whose count products are compared.
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    #[serde(default = "border")]
    pub correction: KCorrection,
    #[serde(default)]
    pub unit_free: bool,
}

fn border() -> KCorrection {
    KCorrection::Border
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSection {
    /// Kernel parameters `n` of the preset family; Poisson is always added.
    pub ns: Vec<u64>,
    #[serde(default = "unit")]
    pub spacing: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Binomial,
    NegBinomial,
}

impl Preset {
    pub fn default_ns(self) -> Vec<u64> {
        match self {
            Preset::Binomial => vec![1, 2, 3, 5, 10, 20],
            Preset::NegBinomial => vec![1, 2, 3, 5, 10],
        }
    }

    pub fn kernel(self, n: u64) -> ReplicationKernel {
        match self {
            Preset::Binomial => ReplicationKernel::Binomial {
                n,
                p: 1.0 / n as f64,
            },
            Preset::NegBinomial => ReplicationKernel::NegBinomial {
                r: n as f64,
                p: 1.0 / (1.0 + n as f64),
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Preset::Binomial => "binomial",
            Preset::NegBinomial => "neg_binomial",
        }
    }

    /// Perturbed hexagonal lattices for each `n`, then Poisson at the
    /// lattice intensity.
    pub fn curves(self, fig: &FigureSection) -> Vec<(String, ProcessSpec)> {
        let lattice = LatticeSpec::hexagonal(fig.spacing);
        let mut out: Vec<(String, ProcessSpec)> = fig
            .ns
            .iter()
            .map(|&n| {
                (
                    n.to_string(),
                    ProcessSpec::PerturbedLattice {
                        lattice,
                        replication: self.kernel(n),
                        translation: TranslationKernel::UniformCell,
                    },
                )
            })
            .collect();
        out.push((
            "inf".into(),
            ProcessSpec::Poisson {
                intensity: lattice.intensity(),
            },
        ));
        out
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub window: Option<f64>,
    pub out: Option<String>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("invalid config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.reps.is_some() {
            self.reps = o.reps;
        }
        if let Some(w) = o.window {
            self.window = Some(WindowConfig::Side(w));
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
    }

    /// The config without run-local settings, as written to the sidecar.
    pub fn canonical(&self) -> ExperimentConfig {
        ExperimentConfig {
            out: None,
            threads: None,
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.canonical())?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML text.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn reps(&self) -> Result<usize> {
        match self.reps {
            Some(0) => bail!("reps: must be >= 1"),
            Some(r) => Ok(r),
            None => bail!("reps: missing"),
        }
    }

    pub fn window(&self) -> Result<Window> {
        self.window
            .as_ref()
            .ok_or_else(|| anyhow!("window: missing"))?
            .to_window()
            .context("window")
    }

    pub fn process(&self) -> Result<&ProcessSpec> {
        let p = self
            .process
            .as_ref()
            .ok_or_else(|| anyhow!("process: missing"))?;
        p.validate().context("process")?;
        Ok(p)
    }

    pub fn r_grid(&self) -> Result<Vec<f64>> {
        let g = self
            .r_grid
            .as_ref()
            .ok_or_else(|| anyhow!("r_grid: missing"))?;
        let v = g.values().context("r_grid")?;
        if v.iter().any(|r| *r < 0.0) {
            bail!("r_grid: radii must be >= 0");
        }
        Ok(v)
    }

    pub fn gamma_grid(&self) -> Result<Vec<f64>> {
        let g = self
            .gamma_grid
            .as_ref()
            .ok_or_else(|| anyhow!("gamma_grid: missing"))?;
        g.values().context("gamma_grid")
    }

    pub fn section<'a, T>(&'a self, name: &str, s: &'a Option<T>) -> Result<&'a T> {
        s.as_ref()
            .ok_or_else(|| anyhow!("[{name}]: missing section"))
    }
}
