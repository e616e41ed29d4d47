//! Python bindings for the `idlepi` crate.

use std::collections::{BTreeMap, BTreeSet};

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use idlepi::embedding::{chimera_clique_embedding, complete_edges, validate_embedding};
use idlepi::experiment::{analyze, run_experiment, simulate, ExperimentConfig};
use idlepi::monitor::BurnInStore;
use idlepi::problems::{gen_er_graph, gen_indicator, mc_qubo, mvc_qubo, IndicatorKind, IndicatorSpec, PenaltyWeights};
use idlepi::qubo::{combine_with_indicator, Var};
use idlepi::timeseries::{self, LagOrder};
use idlepi::topology::{self, HardwareGraph};
use idlepi::{Error, Frame, QuboModel, Sample};

type RegionLists = (Vec<Var>, Vec<(Var, Var)>);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::NotReady(msg) => PyRuntimeError::new_err(format!("not ready: {msg}")),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for idlepi::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn parse_frame(frame: &str) -> PyResult<Frame> {
    match frame {
        "qubo" => Ok(Frame::Qubo),
        "ising" => Ok(Frame::Ising),
        other => Err(PyValueError::new_err(format!("unknown frame '{other}'"))),
    }
}

/// A QUBO (or Ising) model with sparse coefficients.
#[pyclass(name = "QuboModel", module = "idlepi_py", from_py_object)]
#[derive(Clone)]
struct PyQuboModel {
    inner: QuboModel,
}

#[pymethods]
impl PyQuboModel {
    #[new]
    #[pyo3(signature = (linear=None, quadratic=None))]
    fn new(linear: Option<BTreeMap<Var, f64>>, quadratic: Option<BTreeMap<(Var, Var), f64>>) -> PyResult<Self> {
        let mut m = QuboModel::new();
        for (v, c) in linear.unwrap_or_default() {
            m.add_variable(v);
            m.add_linear(v, c).py()?;
        }
        for ((u, v), c) in quadratic.unwrap_or_default() {
            m.add_quadratic(u, v, c).py()?;
        }
        Ok(Self { inner: m })
    }

    fn add_variable(&mut self, v: Var) {
        self.inner.add_variable(v);
    }

    fn add_linear(&mut self, v: Var, c: f64) -> PyResult<()> {
        self.inner.add_linear(v, c).py()
    }

    fn add_quadratic(&mut self, u: Var, v: Var, c: f64) -> PyResult<()> {
        self.inner.add_quadratic(u, v, c).py()
    }

    #[getter]
    fn variables(&self) -> Vec<Var> {
        self.inner.variables().iter().copied().collect()
    }

    #[getter]
    fn linear(&self) -> BTreeMap<Var, f64> {
        self.inner.linear_terms().collect()
    }

    #[getter]
    fn quadratic(&self) -> BTreeMap<(Var, Var), f64> {
        self.inner.quadratic_terms().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.num_variables()
    }

    /// Energy of an assignment `{var: value}` with values in the given frame.
    #[pyo3(signature = (sample, frame="qubo"))]
    fn energy(&self, sample: BTreeMap<Var, i8>, frame: &str) -> PyResult<f64> {
        let s = Sample {
            values: sample,
            frame: parse_frame(frame)?,
        };
        self.inner.energy(&s).py()
    }

    /// `(ising_model, offset)`.
    fn to_ising(&self) -> (Self, f64) {
        let (m, off) = self.inner.to_ising();
        (Self { inner: m }, off)
    }

    /// `(qubo_model, offset)`, treating this model as Ising.
    #[allow(clippy::wrong_self_convention)]
    fn from_ising(&self) -> (Self, f64) {
        let (m, off) = self.inner.from_ising();
        (Self { inner: m }, off)
    }

    /// `(scaled_model, factor)`.
    fn autoscale(&self) -> (Self, f64) {
        let (m, f) = self.inner.autoscale();
        (Self { inner: m }, f)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: QuboModel::from_text(text).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "QuboModel({} variables, {} interactions)",
            self.inner.num_variables(),
            self.inner.num_interactions()
        )
    }
}

/// Hardware graph: qubits and couplers.
#[pyclass(name = "HardwareGraph", module = "idlepi_py", from_py_object)]
#[derive(Clone)]
struct PyHardwareGraph {
    inner: HardwareGraph,
}

#[pymethods]
impl PyHardwareGraph {
    #[getter]
    fn nodes(&self) -> Vec<Var> {
        self.inner.nodes().iter().copied().collect()
    }

    #[getter]
    fn couplers(&self) -> Vec<(Var, Var)> {
        self.inner.couplers().iter().copied().collect()
    }

    fn with_defects(&self, defects: BTreeSet<Var>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.apply_defects(&defects).py()?,
        })
    }

    /// `(nodes, couplers)` of the subgraph not covered by `used`.
    fn idle_region(&self, used: BTreeSet<Var>) -> PyResult<RegionLists> {
        let r = self.inner.idle_region(&used).py()?;
        Ok((r.nodes.into_iter().collect(), r.couplers.into_iter().collect()))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: HardwareGraph::from_text(text).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "HardwareGraph({} qubits, {} couplers)",
            self.inner.num_nodes(),
            self.inner.num_couplers()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (m, t=4))]
fn chimera(m: u32, t: u32) -> PyResult<PyHardwareGraph> {
    Ok(PyHardwareGraph {
        inner: topology::chimera(m, t).py()?,
    })
}

/// `{var: [qubits]}` for a clique of size `k`; raises if it does not validate.
#[pyfunction]
fn clique_embedding(graph: &PyHardwareGraph, k: usize) -> PyResult<BTreeMap<Var, Vec<Var>>> {
    let e = chimera_clique_embedding(&graph.inner, k).py()?;
    let report = validate_embedding(&e, &graph.inner, &complete_edges(k));
    if let Some(v) = report.violations.first() {
        return Err(PyValueError::new_err(v.to_string()));
    }
    Ok(e.chains)
}

/// Edge list of a seeded Erdos-Renyi graph.
#[pyfunction]
fn er_graph(n: u32, density: f64, seed: u64) -> PyResult<Vec<(u32, u32)>> {
    Ok(gen_er_graph(n, density, seed).py()?.edges.into_iter().collect())
}

#[pyfunction]
#[pyo3(signature = (n, density, seed, a=1.0, b=2.0))]
fn max_clique_qubo(n: u32, density: f64, seed: u64, a: f64, b: f64) -> PyResult<PyQuboModel> {
    let g = gen_er_graph(n, density, seed).py()?;
    Ok(PyQuboModel {
        inner: mc_qubo(&g, PenaltyWeights { a, b }).py()?,
    })
}

/// `(model, offset)`.
#[pyfunction]
#[pyo3(signature = (n, density, seed, a=2.0, b=1.0))]
fn vertex_cover_qubo(n: u32, density: f64, seed: u64, a: f64, b: f64) -> PyResult<(PyQuboModel, f64)> {
    let g = gen_er_graph(n, density, seed).py()?;
    let (m, off) = mvc_qubo(&g, PenaltyWeights { a, b }).py()?;
    Ok((PyQuboModel { inner: m }, off))
}

/// Random indicator QUBO (`"PI1"` or `"PI2"`) on the qubits of `graph` not
/// in `used`.
#[pyfunction]
#[pyo3(signature = (kind, graph, used, seed))]
fn indicator(kind: &str, graph: &PyHardwareGraph, used: BTreeSet<Var>, seed: u64) -> PyResult<PyQuboModel> {
    let kind = match kind {
        "PI1" => IndicatorKind::Pi1,
        "PI2" => IndicatorKind::Pi2,
        other => return Err(PyValueError::new_err(format!("unknown indicator '{other}'"))),
    };
    let region = graph.inner.idle_region(&used).py()?;
    Ok(PyQuboModel {
        inner: gen_indicator(&IndicatorSpec { kind, region, seed }).py()?,
    })
}

/// `(combined, scale_constant)`.
#[pyfunction]
fn combine(problem: &PyQuboModel, indicator: &PyQuboModel) -> PyResult<(PyQuboModel, f64)> {
    let c = combine_with_indicator(&problem.inner, &indicator.inner).py()?;
    Ok((PyQuboModel { inner: c.combined }, c.scale_constant))
}

#[pyfunction]
fn moving_average(x: Vec<f64>, window: usize) -> PyResult<Vec<f64>> {
    timeseries::moving_average(&x, window).py()
}

#[pyfunction]
fn normalize(x: Vec<f64>) -> Vec<f64> {
    timeseries::minmax_normalize(&x)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    timeseries::pearson(&x, &y).py()
}

#[pyfunction]
fn rmsd(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    timeseries::rmsd(&x, &y).py()
}

/// Normalize, align and score a problem series against an indicator series.
#[pyfunction]
fn compare<'py>(py: Python<'py>, problem: Vec<f64>, indicator: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let c = timeseries::compare(&problem, &indicator).py()?;
    let d = PyDict::new(py);
    d.set_item("pearson", c.pearson)?;
    d.set_item("rmsd", c.rmsd)?;
    d.set_item("bin_agreement", c.bin_agreement)?;
    Ok(d)
}

#[pyfunction]
fn acf(x: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    timeseries::acf(&x, max_lag).py()
}

#[pyfunction]
fn pacf(x: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    timeseries::pacf(&x, max_lag).py()
}

/// Augmented Dickey-Fuller test with a constant; `lags=None` picks the lag
/// order automatically.
#[pyfunction]
#[pyo3(signature = (x, lags=None))]
fn adf<'py>(py: Python<'py>, x: Vec<f64>, lags: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let r = timeseries::adf_test(&x, lags.map_or(LagOrder::Auto, LagOrder::Fixed)).py()?;
    let d = PyDict::new(py);
    d.set_item("stat", r.stat)?;
    d.set_item("p", r.p)?;
    d.set_item("lags", r.lags)?;
    d.set_item("nobs", r.nobs)?;
    Ok(d)
}

/// `(statistic, p_value)` of the two-sample Kolmogorov-Smirnov test.
#[pyfunction]
fn ks_2samp(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = timeseries::ks_two_sample(&a, &b).py()?;
    Ok((r.stat, r.p))
}

/// History of indicator energies with percentile ranking and gating.
#[pyclass(name = "BurnInStore", module = "idlepi_py")]
struct PyBurnInStore {
    inner: BurnInStore,
}

#[pymethods]
impl PyBurnInStore {
    #[new]
    #[pyo3(signature = (burn_in, cap=None))]
    fn new(burn_in: usize, cap: Option<usize>) -> PyResult<Self> {
        let inner = match cap {
            Some(c) => BurnInStore::with_cap(burn_in, c).py()?,
            None => BurnInStore::new(burn_in),
        };
        Ok(Self { inner })
    }

    fn observe(&mut self, value: f64) {
        self.inner.observe(value);
    }

    fn is_ready(&self) -> bool {
        self.inner.is_ready()
    }

    fn percentile_rank(&self, value: f64) -> PyResult<f64> {
        self.inner.percentile_rank(value).py()
    }

    /// `(accept, normalized_e, percentile)`.
    fn gate(&self, value: f64, tau: f64) -> PyResult<(bool, f64, f64)> {
        let d = self.inner.gate(value, tau).py()?;
        Ok((d.accept, d.normalized_e, d.percentile))
    }

    #[getter]
    fn history(&self) -> Vec<f64> {
        self.inner.history().collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: BurnInStore::from_json(text).py()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Built-in experiment config as TOML: `"single"`, `"smoke"`, `"trend"` or
/// `"alternate"`.
#[pyfunction]
#[pyo3(signature = (name="single"))]
fn default_config(name: &str) -> PyResult<String> {
    let cfg = match name {
        "single" => ExperimentConfig::single_default(),
        "smoke" => ExperimentConfig::smoke(),
        "trend" => ExperimentConfig::trend_default(),
        "alternate" => ExperimentConfig::alternate_default(),
        other => return Err(PyValueError::new_err(format!("unknown config '{other}'"))),
    };
    cfg.to_toml().py()
}

/// Runs a TOML config in memory and returns `(raw_columns, report_json)`.
#[pyfunction]
fn simulate_config<'py>(py: Python<'py>, config: &str) -> PyResult<(Bound<'py, PyDict>, String)> {
    let cfg = ExperimentConfig::from_toml(config).py()?;
    let (raw, report) = py
        .detach(|| -> idlepi::Result<_> {
            let raw = simulate(&cfg)?;
            let report = analyze(&cfg, &raw)?.report.to_json()?;
            Ok((raw, report))
        })
        .py()?;
    let d = PyDict::new(py);
    d.set_item("partner", raw.partner)?;
    d.set_item("beta", raw.beta)?;
    d.set_item("chain_break", raw.chain_break)?;
    d.set_item("indicator", raw.indicator)?;
    d.set_item("problems", raw.problems)?;
    Ok((d, report))
}

/// Runs a TOML config, writes its artifacts and returns the paths written.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::from_toml(config).py()?;
    let art = py.detach(|| run_experiment(&cfg)).py()?;
    Ok(art.files.iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
pub fn idlepi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuboModel>()?;
    m.add_class::<PyHardwareGraph>()?;
    m.add_class::<PyBurnInStore>()?;
    m.add_function(wrap_pyfunction!(chimera, m)?)?;
    m.add_function(wrap_pyfunction!(clique_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(er_graph, m)?)?;
    m.add_function(wrap_pyfunction!(max_clique_qubo, m)?)?;
    m.add_function(wrap_pyfunction!(vertex_cover_qubo, m)?)?;
    m.add_function(wrap_pyfunction!(indicator, m)?)?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    m.add_function(wrap_pyfunction!(moving_average, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(rmsd, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(acf, m)?)?;
    m.add_function(wrap_pyfunction!(pacf, m)?)?;
    m.add_function(wrap_pyfunction!(adf, m)?)?;
    m.add_function(wrap_pyfunction!(ks_2samp, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
