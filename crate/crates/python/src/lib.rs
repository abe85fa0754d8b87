use percsim::generators::{
    GenConfig, LatticeKind, LatticeSpec, ProcessSpec, ReplicationKernel, TranslationKernel,
};
use percsim::shotnoise::{snr_radius, ResponseFunction, SinrParams};
use percsim::stats::{cx_order_check, CxVerdict, IntDistribution};
use percsim::{bounds, discrete, percolation, Point, RngStream, Window};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: percsim::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn square(side: f64) -> PyResult<Window> {
    Window::cube(2, side).map_err(err)
}

fn lattice(kind: &str, spacing: f64) -> PyResult<LatticeSpec> {
    let kind = match kind {
        "square" => LatticeKind::Square,
        "hexagonal" => LatticeKind::Hexagonal,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown lattice kind {other:?}"
            )))
        }
    };
    Ok(LatticeSpec { kind, spacing })
}

/// A finite point pattern with its observation window.
#[pyclass(name = "PointPattern", frozen)]
pub struct PyPattern {
    inner: percsim::PointPattern,
}

#[pymethods]
impl PyPattern {
    #[new]
    #[pyo3(signature = (points, lower, upper))]
    fn new(points: Vec<Vec<f64>>, lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        let window = Window::new(lower, upper).map_err(err)?;
        let points = points
            .into_iter()
            .map(Point::new)
            .collect::<Result<_, _>>()
            .map_err(err)?;
        Ok(PyPattern {
            inner: percsim::PointPattern::new(window, 0.0, points).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.window().lower().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.window().upper().to_vec()
    }

    /// Points inside the window only.
    fn restricted(&self) -> Self {
        PyPattern {
            inner: self.inner.restricted_to_window(),
        }
    }
}

/// Replication kernel: the number of points placed at a lattice site.
#[pyclass(name = "Kernel", frozen)]
pub struct PyKernel {
    inner: ReplicationKernel,
}

fn kernel(inner: ReplicationKernel) -> PyResult<PyKernel> {
    inner.validate().map_err(err)?;
    Ok(PyKernel { inner })
}

#[pymethods]
impl PyKernel {
    #[staticmethod]
    fn dirac(k: u64) -> PyResult<Self> {
        kernel(ReplicationKernel::Dirac { k })
    }

    #[staticmethod]
    fn binomial(n: u64, p: f64) -> PyResult<Self> {
        kernel(ReplicationKernel::Binomial { n, p })
    }

    #[staticmethod]
    fn poisson(mean: f64) -> PyResult<Self> {
        kernel(ReplicationKernel::Poisson { mean })
    }

    #[staticmethod]
    fn neg_binomial(r: f64, p: f64) -> PyResult<Self> {
        kernel(ReplicationKernel::NegBinomial { r, p })
    }

    #[staticmethod]
    fn geometric(p: f64) -> PyResult<Self> {
        kernel(ReplicationKernel::Geometric { p })
    }

    #[staticmethod]
    fn hypergeometric(n: u64, m: u64, k: u64) -> PyResult<Self> {
        kernel(ReplicationKernel::HyperGeometric { n, m, k })
    }

    #[staticmethod]
    fn geo_mixture(weights: Vec<f64>, params: Vec<f64>) -> PyResult<Self> {
        kernel(ReplicationKernel::GeoMixture { weights, params })
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn pmf(&self, cap: usize) -> Vec<f64> {
        self.inner.pmf_table(cap)
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?})", self.inner)
    }
}

/// A point process specification.
#[pyclass(name = "Process", frozen)]
pub struct PyProcess {
    inner: ProcessSpec,
}

fn process(inner: ProcessSpec) -> PyResult<PyProcess> {
    inner.validate().map_err(err)?;
    Ok(PyProcess { inner })
}

#[pymethods]
impl PyProcess {
    #[staticmethod]
    fn poisson(intensity: f64) -> PyResult<Self> {
        process(ProcessSpec::Poisson { intensity })
    }

    #[staticmethod]
    #[pyo3(signature = (kind = "hexagonal", spacing = 1.0))]
    fn lattice(kind: &str, spacing: f64) -> PyResult<Self> {
        process(ProcessSpec::Lattice {
            lattice: lattice(kind, spacing)?,
        })
    }

    /// Lattice with `kernel` points per site, each uniform on the site's cell.
    #[staticmethod]
    #[pyo3(signature = (kernel, kind = "hexagonal", spacing = 1.0))]
    fn perturbed_lattice(kernel: &PyKernel, kind: &str, spacing: f64) -> PyResult<Self> {
        process(ProcessSpec::PerturbedLattice {
            lattice: lattice(kind, spacing)?,
            replication: kernel.inner.clone(),
            translation: TranslationKernel::UniformCell,
        })
    }

    #[staticmethod]
    fn annular_cox(alpha: f64, radius: f64, delta: f64, mu: f64) -> PyResult<Self> {
        process(ProcessSpec::AnnularCox {
            alpha,
            radius,
            delta,
            mu,
        })
    }

    /// Any process in the TOML form used by the CLI `[process]` table.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let spec: ProcessSpec =
            toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        process(spec)
    }

    fn intensity(&self) -> f64 {
        self.inner.intensity()
    }

    /// One realisation restricted to `[0, side]^2`.
    fn sample(&self, side: f64, seed: u64) -> PyResult<PyPattern> {
        let cfg = GenConfig::new(self.inner.clone(), square(side)?);
        Ok(PyPattern {
            inner: cfg.sample_in_window(&RngStream::new(seed)).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Process({:?})", self.inner)
    }
}

#[pyclass(name = "ComponentStats", frozen, get_all)]
pub struct PyComponents {
    sizes: Vec<usize>,
    fraction_largest: f64,
    fraction_second: f64,
    spans: Vec<bool>,
}

/// Connected components of the Gilbert graph of radius `r`.
#[pyfunction]
fn components(pattern: &PyPattern, r: f64) -> PyResult<PyComponents> {
    let g = percolation::build_gilbert(&pattern.inner, r).map_err(err)?;
    let c = percolation::components(&g, &pattern.inner, r);
    Ok(PyComponents {
        sizes: c.sizes,
        fraction_largest: c.fraction_largest,
        fraction_second: c.fraction_second,
        spans: c.spans,
    })
}

/// Rows `(r, mean_frac1, mean_frac2, p_span, ci_lo, ci_hi)` on `[0, side]^2`.
#[pyfunction]
fn sweep_r(
    process: &PyProcess,
    side: f64,
    r_grid: Vec<f64>,
    reps: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64)>> {
    let cfg = GenConfig::new(process.inner.clone(), square(side)?);
    let rows = percolation::sweep_r(&cfg, &r_grid, reps, &RngStream::new(seed)).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.r, r.mean_frac1, r.mean_frac2, r.p_span, r.ci_lo, r.ci_hi))
        .collect())
}

/// Bisection for the spanning threshold; returns `(r_hat, half_width)`.
#[pyfunction]
#[pyo3(signature = (process, side, r_lo, r_hi, reps, seed, target = 0.5, tol = 0.005))]
#[allow(clippy::too_many_arguments)]
fn estimate_rc(
    py: Python<'_>,
    process: &PyProcess,
    side: f64,
    r_lo: f64,
    r_hi: f64,
    reps: usize,
    seed: u64,
    target: f64,
    tol: f64,
) -> PyResult<(f64, f64)> {
    let cfg = GenConfig::new(process.inner.clone(), square(side)?);
    let est = py
        .detach(|| {
            percolation::estimate_rc(&cfg, r_lo, r_hi, reps, target, tol, &RngStream::new(seed))
        })
        .map_err(err)?;
    Ok((est.r_hat, est.half_width))
}

#[pyfunction]
#[pyo3(signature = (lambda_, d = 2))]
fn rc_lower(lambda_: f64, d: usize) -> PyResult<f64> {
    bounds::rc_lower(lambda_, d).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (lambda_, d = 2))]
fn rc_upper_tilde(lambda_: f64, d: usize) -> PyResult<f64> {
    bounds::rc_upper_tilde(lambda_, d).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (lambda_, d = 2))]
fn c_lambda(lambda_: f64, d: usize) -> PyResult<f64> {
    bounds::c_lambda(lambda_, d).map_err(err)
}

#[pyfunction]
fn critical_intensity(r: f64, lambda_ref: f64, rc_ref: f64) -> PyResult<f64> {
    bounds::critical_intensity(r, lambda_ref, rc_ref).map_err(err)
}

/// Convex-order verdict between two kernels: `"equal"`, `"a_leq_b"`,
/// `"b_leq_a"` or `"incomparable"`.
#[pyfunction]
#[pyo3(signature = (a, b, tol = 1e-12, cap = None))]
fn cx_check(a: &PyKernel, b: &PyKernel, tol: f64, cap: Option<usize>) -> PyResult<&'static str> {
    let table = |k: &PyKernel| match cap {
        Some(c) => IntDistribution::from_kernel_with_cap(&k.inner, c),
        None => IntDistribution::from_kernel(&k.inner),
    };
    let report =
        cx_order_check(&table(a).map_err(err)?, &table(b).map_err(err)?, tol).map_err(err)?;
    Ok(match report.verdict {
        CxVerdict::Equal => "equal",
        CxVerdict::ALeqB => "a_leq_b",
        CxVerdict::BLeqA => "b_leq_a",
        CxVerdict::Incomparable => "incomparable",
    })
}

/// Interference-free link radius under a `(1 + t)^-beta` attenuation.
#[pyfunction]
#[pyo3(signature = (power, noise, threshold, beta = 4.0))]
fn snr_radius_power_law(power: f64, noise: f64, threshold: f64, beta: f64) -> PyResult<f64> {
    let params = SinrParams {
        power,
        noise,
        threshold,
        gamma: 0.0,
    };
    snr_radius(&params, &ResponseFunction::PowerLaw { beta }).map_err(err)
}

/// Open paths from the origin to the boundary of `(-m, m]^d`; returns
/// `(count, truncated)`.
#[pyfunction]
#[pyo3(signature = (pattern, r, m, cap = 1_000_000))]
fn count_open_paths(pattern: &PyPattern, r: f64, m: f64, cap: u64) -> PyResult<(u64, bool)> {
    let c = discrete::count_open_paths(&pattern.inner, r, m, cap).map_err(err)?;
    Ok((c.count, c.truncated))
}

#[pymodule]
fn percsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPattern>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyProcess>()?;
    m.add_class::<PyComponents>()?;
    m.add_function(wrap_pyfunction!(components, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_r, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rc, m)?)?;
    m.add_function(wrap_pyfunction!(rc_lower, m)?)?;
    m.add_function(wrap_pyfunction!(rc_upper_tilde, m)?)?;
    m.add_function(wrap_pyfunction!(c_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(critical_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(cx_check, m)?)?;
    m.add_function(wrap_pyfunction!(snr_radius_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(count_open_paths, m)?)?;
    Ok(())
}
