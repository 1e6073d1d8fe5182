//! Python bindings. The extension module is imported as `convexdiv`.
//!
//! Structured results (statistic values, test reports, validation reports)
//! are returned as plain dicts built from the library's serde output.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyType;
use serde::Serialize;

use convexdiv::cache;
use convexdiv::generators::{validate_generator, DEFAULT_GRID};
use convexdiv::nulldist::NullSource;
use convexdiv::oracle::{self, AnalyticCdf};
use convexdiv::{
    parse_generator, AnyGenerator, CdfConvention, Sample, Statistic, StatisticKind, TestOptions, WeightVector,
};

fn to_py(e: convexdiv::Error) -> PyErr {
    use convexdiv::Error as E;
    match e {
        E::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        E::Io { .. } | E::Cache { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A convex generator `h` or log-convex generator `ξ`, built from a spec
/// string such as `power:2`, `poly:0,1,0,1`, `bernstein:power:3:16` or
/// `expsq:1`.
#[pyclass(name = "Generator", module = "convexdiv", frozen)]
struct PyGenerator {
    inner: AnyGenerator,
}

#[pymethods]
impl PyGenerator {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyGenerator {
            inner: parse_generator(spec).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    /// `"convex"` or `"log_convex"`.
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            AnyGenerator::Convex(_) => "convex",
            AnyGenerator::LogConvex(_) => "log_convex",
        }
    }

    /// `∫₀¹h` for a convex generator, `∫₀¹ξ²` for a log-convex one.
    #[getter]
    fn integral(&self) -> f64 {
        match &self.inner {
            AnyGenerator::Convex(h) => h.integral_0_1(),
            AnyGenerator::LogConvex(xi) => xi.integral_sq_0_1(),
        }
    }

    #[getter]
    fn characterization_guaranteed(&self) -> bool {
        match &self.inner {
            AnyGenerator::Convex(h) => h.characterization_guaranteed(),
            AnyGenerator::LogConvex(xi) => xi.characterization_guaranteed(),
        }
    }

    fn __call__(&self, u: f64) -> f64 {
        match &self.inner {
            AnyGenerator::Convex(h) => h.eval(u),
            AnyGenerator::LogConvex(xi) => xi.eval(u),
        }
    }

    #[pyo3(signature = (grid_size = DEFAULT_GRID))]
    fn validate<'py>(&self, py: Python<'py>, grid_size: usize) -> PyResult<Bound<'py, PyAny>> {
        let report = validate_generator(&self.inner, grid_size).map_err(to_py)?;
        to_dict(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("Generator('{}')", self.inner.name())
    }
}

fn generator_arg(obj: &Bound<'_, PyAny>) -> PyResult<AnyGenerator> {
    if let Ok(g) = obj.cast::<PyGenerator>() {
        return Ok(g.get().inner.clone());
    }
    let spec: String = obj.extract()?;
    parse_generator(&spec).map_err(to_py)
}

fn samples(values: Vec<Vec<f64>>) -> PyResult<Vec<Sample>> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| Sample::new(format!("sample{}", i + 1), v).map_err(to_py))
        .collect()
}

fn statistic(
    kind: &str,
    generator: &Bound<'_, PyAny>,
    k: usize,
    weights: Option<Vec<f64>>,
    convention: &str,
) -> PyResult<Statistic> {
    let kind: StatisticKind = kind.parse().map_err(to_py)?;
    let convention: CdfConvention = convention.parse().map_err(to_py)?;
    let g = generator_arg(generator)?;
    let stat = match kind {
        StatisticKind::TwoSample => Statistic::two_sample(g.into_convex().map_err(to_py)?),
        StatisticKind::Tau => Statistic::tau(g.into_log_convex().map_err(to_py)?),
        StatisticKind::KSample => {
            let w = match weights {
                Some(w) => WeightVector::new(w),
                None => WeightVector::uniform(k),
            }
            .map_err(to_py)?;
            Statistic::k_sample(g.into_convex().map_err(to_py)?, w)
        }
    };
    Ok(stat.with_convention(convention))
}

fn evaluate<'py>(py: Python<'py>, stat: &Statistic, values: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    let s = samples(values)?;
    to_dict(py, &stat.evaluate(&s).map_err(to_py)?)
}

/// Two-sample statistic `∫h(F)dG + ∫h(G)dF − 2∫h`.
#[pyfunction]
#[pyo3(signature = (h, x, y, convention = "right-continuous"))]
fn two_sample<'py>(
    py: Python<'py>,
    h: &Bound<'py, PyAny>,
    x: Vec<f64>,
    y: Vec<f64>,
    convention: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let stat = statistic("two_sample", h, 2, None, convention)?;
    evaluate(py, &stat, vec![x, y])
}

/// k-sample statistic with mixture weights (uniform when omitted).
#[pyfunction]
#[pyo3(signature = (h, samples, weights = None, convention = "right-continuous"))]
fn k_sample<'py>(
    py: Python<'py>,
    h: &Bound<'py, PyAny>,
    samples: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
    convention: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let stat = statistic("k_sample", h, samples.len(), weights, convention)?;
    evaluate(py, &stat, samples)
}

/// Log-convex statistic τ, centred by `2∫ξ²`.
#[pyfunction]
#[pyo3(signature = (xi, x, y, convention = "right-continuous"))]
fn tau<'py>(
    py: Python<'py>,
    xi: &Bound<'py, PyAny>,
    x: Vec<f64>,
    y: Vec<f64>,
    convention: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let stat = statistic("tau", xi, 2, None, convention)?;
    evaluate(py, &stat, vec![x, y])
}

/// Sorted Monte Carlo null replicates for one statistic and sample sizes.
#[pyclass(name = "NullTable", module = "convexdiv", frozen)]
struct PyNullTable {
    inner: convexdiv::NullTable,
}

#[pymethods]
impl PyNullTable {
    fn p_value(&self, observed: f64) -> f64 {
        self.inner.p_value(observed)
    }

    fn critical_value<'py>(&self, py: Python<'py>, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.critical_value(alpha).map_err(to_py)?)
    }

    #[getter]
    fn replicates(&self) -> Vec<f64> {
        self.inner.replicates.clone()
    }

    #[getter]
    fn meta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.meta())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Writes the table as `binary` (default) or `csv`.
    #[pyo3(signature = (path, format = "binary"))]
    fn save(&self, path: std::path::PathBuf, format: &str) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(file);
        let written = match format {
            "binary" => cache::write_binary(&self.inner, &mut w),
            "csv" => cache::write_csv(&self.inner, &mut w),
            other => return Err(PyValueError::new_err(format!("unknown table format `{other}`"))),
        };
        written
            .and_then(|_| std::io::Write::flush(&mut w))
            .map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))
    }

    /// Reads a table written by `save`; the format is sniffed from the file.
    #[classmethod]
    fn load(_cls: &Bound<'_, PyType>, path: std::path::PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        let inner = if bytes.starts_with(b"CVDNULL") {
            cache::read_binary(bytes.as_slice(), &path)
        } else {
            cache::read_csv(bytes.as_slice(), &path)
        }
        .map_err(to_py)?;
        Ok(PyNullTable { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "NullTable({} {} sizes={:?} B={} seed={})",
            self.inner.statistic_kind.as_str(),
            self.inner.generator_name,
            self.inner.sample_sizes,
            self.inner.len(),
            self.inner.seed
        )
    }
}

/// Simulates the null distribution from independent uniforms.
#[pyfunction]
#[pyo3(signature = (kind, h, sizes, replicates = 9999, seed = 0, weights = None, convention = "right-continuous", workers = None))]
#[allow(clippy::too_many_arguments)]
fn simulate_null(
    py: Python<'_>,
    kind: &str,
    h: &Bound<'_, PyAny>,
    sizes: Vec<usize>,
    replicates: usize,
    seed: u64,
    weights: Option<Vec<f64>>,
    convention: &str,
    workers: Option<usize>,
) -> PyResult<PyNullTable> {
    let stat = statistic(kind, h, sizes.len(), weights, convention)?;
    let inner = py
        .detach(|| {
            convexdiv::NullSimulator::new(&stat, &sizes)
                .replicates(replicates)
                .seed(seed)
                .workers(workers)
                .source(NullSource::Uniform)
                .run()
        })
        .map_err(to_py)?;
    Ok(PyNullTable { inner })
}

#[pyfunction]
fn p_value(table: &PyNullTable, observed: f64) -> f64 {
    table.inner.p_value(observed)
}

#[pyfunction]
fn critical_value<'py>(py: Python<'py>, table: &PyNullTable, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
    table.critical_value(py, alpha)
}

/// Full test: statistic, simulated (or permutation) null, p-value and
/// decisions at each level.
#[pyfunction]
#[pyo3(signature = (kind, h, samples, replicates = 9999, seed = 0, levels = vec![0.01, 0.05, 0.1], weights = None, convention = "right-continuous", permutation = false, workers = None))]
#[allow(clippy::too_many_arguments)]
fn run_test<'py>(
    py: Python<'py>,
    kind: &str,
    h: &Bound<'py, PyAny>,
    samples: Vec<Vec<f64>>,
    replicates: usize,
    seed: u64,
    levels: Vec<f64>,
    weights: Option<Vec<f64>>,
    convention: &str,
    permutation: bool,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let stat = statistic(kind, h, samples.len(), weights, convention)?;
    let s = self::samples(samples)?;
    let options = TestOptions {
        replicates,
        seed,
        levels,
        workers,
        permutation,
    };
    let report = py.detach(|| convexdiv::run_test(&stat, &s, &options)).map_err(to_py)?;
    to_dict(py, &report)
}

/// Exact null law by enumerating every rank interleaving.
#[pyfunction]
#[pyo3(signature = (kind, h, sizes, weights = None))]
fn enumerate_null<'py>(
    py: Python<'py>,
    kind: &str,
    h: &Bound<'py, PyAny>,
    sizes: Vec<usize>,
    weights: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let stat = statistic(kind, h, sizes.len(), weights, "right-continuous")?;
    to_dict(py, &oracle::enumerate_null(&stat, &sizes).map_err(to_py)?)
}

fn cdf(spec: &str) -> PyResult<AnalyticCdf> {
    spec.parse().map_err(to_py)
}

fn convex(h: &Bound<'_, PyAny>) -> PyResult<convexdiv::ConvexGenerator> {
    generator_arg(h)?.into_convex().map_err(to_py)
}

/// Population functional `∫h(F)dG + ∫h(G)dF` for analytic CDF specs such as
/// `uniform`, `power:2`, `logistic:0,1`, `exponential:1`.
#[pyfunction]
fn population_functional(h: &Bound<'_, PyAny>, f: &str, g: &str) -> PyResult<f64> {
    oracle::population_functional(&convex(h)?, &cdf(f)?, &cdf(g)?).map_err(to_py)
}

/// Population functional minus `2∫h`.
#[pyfunction]
fn two_sample_gap(h: &Bound<'_, PyAny>, f: &str, g: &str) -> PyResult<f64> {
    oracle::two_sample_gap(&convex(h)?, &cdf(f)?, &cdf(g)?).map_err(to_py)
}

/// Cramér–von Mises type distance `∫(F − G)² d(F + G)/2`.
#[pyfunction]
fn cvm_distance(f: &str, g: &str) -> PyResult<f64> {
    oracle::cvm_distance(&cdf(f)?, &cdf(g)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (h, cdfs, weights = None))]
fn jensen_gap(h: &Bound<'_, PyAny>, cdfs: Vec<String>, weights: Option<Vec<f64>>) -> PyResult<f64> {
    let cdfs = cdfs.iter().map(|s| cdf(s)).collect::<PyResult<Vec<_>>>()?;
    let w = match weights {
        Some(w) => WeightVector::new(w),
        None => WeightVector::uniform(cdfs.len()),
    }
    .map_err(to_py)?;
    oracle::jensen_gap(&convex(h)?, &cdfs, &w).map_err(to_py)
}

/// Runs the numerical verification battery; one dict per case.
#[pyfunction]
fn run_battery(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    let cases = py.detach(oracle::run_battery).map_err(to_py)?;
    to_dict(py, &cases)
}

#[pymodule]
#[pyo3(name = "convexdiv")]
fn convexdiv_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGenerator>()?;
    m.add_class::<PyNullTable>()?;
    m.add_function(wrap_pyfunction!(two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(k_sample, m)?)?;
    m.add_function(wrap_pyfunction!(tau, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_null, m)?)?;
    m.add_function(wrap_pyfunction!(p_value, m)?)?;
    m.add_function(wrap_pyfunction!(critical_value, m)?)?;
    m.add_function(wrap_pyfunction!(run_test, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_null, m)?)?;
    m.add_function(wrap_pyfunction!(population_functional, m)?)?;
    m.add_function(wrap_pyfunction!(two_sample_gap, m)?)?;
    m.add_function(wrap_pyfunction!(cvm_distance, m)?)?;
    m.add_function(wrap_pyfunction!(jensen_gap, m)?)?;
    m.add_function(wrap_pyfunction!(run_battery, m)?)?;
    Ok(())
}
