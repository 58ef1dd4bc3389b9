//! Python module `wban`.
//!
//! Thin wrappers over `wban_core`: datasets, the per-link channel model, the
//! broadcast chain and its outcome distribution, the simulator, and the
//! JSON-configured sweep commands.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use wban_core::experiment::{self, ExperimentConfig};
use wban_core::markov::{self, FixedLinks, DEFAULT_N_BACKOFFS};
use wban_core::{channel, multibroadcast, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Quadrature { .. } | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<channel::InterferenceMode> {
    mode.parse().map_err(to_py)
}

#[pyclass(name = "AttenuationMatrix", module = "wban", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAttenuationMatrix(wban_core::AttenuationMatrix);

#[pymethods]
impl PyAttenuationMatrix {
    /// The bundled seven-node running-posture dataset.
    #[staticmethod]
    fn posture2_running() -> Self {
        Self(wban_core::AttenuationMatrix::posture2_running())
    }

    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        wban_core::AttenuationMatrix::from_path(path).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn uniform(n_nodes: usize, mean_db: f64, std_db: f64) -> PyResult<Self> {
        wban_core::AttenuationMatrix::uniform(n_nodes, mean_db, std_db).map(Self).map_err(to_py)
    }

    /// Builds a matrix from `(i, j, mean_db, std_db)` tuples.
    #[staticmethod]
    fn from_pairs(n_nodes: usize, pairs: Vec<(usize, usize, f64, f64)>) -> PyResult<Self> {
        wban_core::AttenuationMatrix::from_pairs(n_nodes, pairs).map(Self).map_err(to_py)
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.0.n_nodes()
    }

    fn mean_db(&self, i: usize, j: usize) -> PyResult<f64> {
        self.check(i, j)?;
        Ok(self.0.mean_db(i, j))
    }

    fn std_db(&self, i: usize, j: usize) -> PyResult<f64> {
        self.check(i, j)?;
        Ok(self.0.std_db(i, j))
    }

    fn __repr__(&self) -> String {
        format!("AttenuationMatrix(n_nodes={})", self.0.n_nodes())
    }
}

impl PyAttenuationMatrix {
    fn check(&self, i: usize, j: usize) -> PyResult<()> {
        let n = self.0.n_nodes();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("node pair ({i},{j}) out of range for {n} nodes")));
        }
        Ok(())
    }
}

#[pyclass(name = "RadioConfig", module = "wban", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyRadioConfig {
    pt_dbm: f64,
    sn_dbm: f64,
    pn_dbm: f64,
    n_bit: u32,
    bitrate_bps: f64,
}

impl From<&PyRadioConfig> for channel::RadioConfig {
    fn from(r: &PyRadioConfig) -> Self {
        channel::RadioConfig { pt_dbm: r.pt_dbm, sn_dbm: r.sn_dbm, pn_dbm: r.pn_dbm, n_bit: r.n_bit, bitrate_bps: r.bitrate_bps }
    }
}

#[pymethods]
impl PyRadioConfig {
    #[new]
    #[pyo3(signature = (
        pt_dbm = channel::DEFAULT_PT_DBM,
        sn_dbm = channel::DEFAULT_SN_DBM,
        pn_dbm = channel::DEFAULT_PN_DBM,
        n_bit = channel::DEFAULT_N_BIT,
        bitrate_bps = channel::DEFAULT_BITRATE_BPS,
    ))]
    fn new(pt_dbm: f64, sn_dbm: f64, pn_dbm: f64, n_bit: u32, bitrate_bps: f64) -> PyResult<Self> {
        let radio = Self { pt_dbm, sn_dbm, pn_dbm, n_bit, bitrate_bps };
        channel::RadioConfig::from(&radio).validate().map_err(to_py)?;
        Ok(radio)
    }

    /// Packet airtime in seconds.
    fn airtime(&self) -> f64 {
        channel::RadioConfig::from(self).airtime()
    }

    fn __repr__(&self) -> String {
        format!(
            "RadioConfig(pt_dbm={}, sn_dbm={}, pn_dbm={}, n_bit={}, bitrate_bps={})",
            self.pt_dbm, self.sn_dbm, self.pn_dbm, self.n_bit, self.bitrate_bps
        )
    }
}

#[pyclass(name = "CsmaConfig", module = "wban", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyCsmaConfig {
    tu_seconds: f64,
    w_init: u32,
    max_attempts: u32,
    t_setup: f64,
    t_cca: f64,
}

impl From<&PyCsmaConfig> for wban_core::CsmaConfig {
    fn from(c: &PyCsmaConfig) -> Self {
        wban_core::CsmaConfig {
            tu_seconds: c.tu_seconds,
            w_init: c.w_init,
            max_attempts: c.max_attempts,
            t_setup: c.t_setup,
            t_cca: c.t_cca,
        }
    }
}

#[pymethods]
impl PyCsmaConfig {
    #[new]
    #[pyo3(signature = (
        tu_seconds = wban_core::sim::DEFAULT_TU_SECONDS,
        w_init = wban_core::sim::DEFAULT_W_INIT,
        max_attempts = wban_core::sim::DEFAULT_MAX_ATTEMPTS,
        t_setup = wban_core::sim::DEFAULT_T_SETUP,
        t_cca = wban_core::sim::DEFAULT_T_CCA,
    ))]
    fn new(tu_seconds: f64, w_init: u32, max_attempts: u32, t_setup: f64, t_cca: f64) -> PyResult<Self> {
        let csma = Self { tu_seconds, w_init, max_attempts, t_setup, t_cca };
        wban_core::CsmaConfig::from(&csma).validate().map_err(to_py)?;
        Ok(csma)
    }
}

fn csma_or_default(csma: Option<PyRef<'_, PyCsmaConfig>>) -> wban_core::CsmaConfig {
    csma.map(|c| wban_core::CsmaConfig::from(&*c)).unwrap_or_default()
}

/// Mean time a node spends in the transmitting state.
#[pyfunction]
#[pyo3(signature = (radio, csma = None, n_backoffs = DEFAULT_N_BACKOFFS))]
fn mean_tx_state_time(radio: PyRef<'_, PyRadioConfig>, csma: Option<PyRef<'_, PyCsmaConfig>>, n_backoffs: f64) -> f64 {
    markov::mean_tx_state_time(&csma_or_default(csma), &(&*radio).into(), n_backoffs)
}

/// QPSK bit error rate for a received power and linear noise-plus-interference.
#[pyfunction]
fn ber_qpsk_awgn(pr_dbm: f64, noise_plus_interference_mw: f64) -> PyResult<f64> {
    channel::ber_qpsk_awgn(pr_dbm, noise_plus_interference_mw).map_err(to_py)
}

#[pyclass(name = "LinkModel", module = "wban", frozen)]
struct PyLinkModel(channel::LinkModel);

#[pymethods]
impl PyLinkModel {
    #[new]
    #[pyo3(signature = (matrix, radio, mode = "general", mean_tx_state_time = None))]
    fn new(
        matrix: &PyAttenuationMatrix,
        radio: PyRef<'_, PyRadioConfig>,
        mode: &str,
        mean_tx_state_time: Option<f64>,
    ) -> PyResult<Self> {
        let radio = channel::RadioConfig::from(&*radio);
        let tau = mean_tx_state_time
            .unwrap_or_else(|| markov::mean_tx_state_time(&Default::default(), &radio, DEFAULT_N_BACKOFFS));
        channel::LinkModel::new(matrix.0.clone(), radio, parse_mode(mode)?, tau).map(Self).map_err(to_py)
    }

    /// Success probability of `i → j` while `interferers` are transmitting.
    #[pyo3(signature = (i, j, interferers = Vec::new()))]
    fn link_success_probability(&self, i: usize, j: usize, interferers: Vec<usize>) -> PyResult<f64> {
        self.0.link_success_probability(i, j, &interferers).map_err(to_py)
    }

    #[getter]
    fn overlap_probability(&self) -> f64 {
        self.0.overlap_probability()
    }
}

#[pyclass(name = "OutcomeDistribution", module = "wban", frozen)]
struct PyOutcomeDistribution(markov::OutcomeDistribution);

#[pymethods]
impl PyOutcomeDistribution {
    #[getter]
    fn cover_probability(&self) -> f64 {
        self.0.cover_probability()
    }

    #[getter]
    fn average_cover_number(&self) -> f64 {
        self.0.average_cover_number()
    }

    fn hitting_probability(&self, node: usize) -> PyResult<f64> {
        self.0.hitting_probability(node).map_err(to_py)
    }

    fn hitting_probabilities(&self) -> BTreeMap<usize, f64> {
        self.0.hitting_probabilities().into_iter().collect()
    }

    /// Non-sink node order used to index `masses` bits.
    #[getter]
    fn nodes(&self) -> Vec<usize> {
        self.0.nodes().to_vec()
    }

    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.0.masses().to_vec()
    }

    fn k_cover_probability(&self, k: u32) -> PyResult<f64> {
        multibroadcast::k_cover_probability(&self.0, k).map_err(to_py)
    }

    /// `(cover probability, {node: hitting probability})` after `k` broadcasts.
    fn multi_broadcast(&self, k: u32) -> PyResult<(f64, BTreeMap<usize, f64>)> {
        let r = multibroadcast::multi_broadcast(&self.0, k).map_err(to_py)?;
        Ok((r.cover_probability_k, r.per_node_hitting_k.into_iter().collect()))
    }
}

#[pyclass(name = "BroadcastChain", module = "wban", frozen)]
struct PyBroadcastChain(markov::BroadcastChain);

#[pymethods]
impl PyBroadcastChain {
    #[staticmethod]
    #[pyo3(signature = (matrix, radio, mode = "general", sink = 1, csma = None, n_backoffs = DEFAULT_N_BACKOFFS))]
    fn from_channel(
        matrix: &PyAttenuationMatrix,
        radio: PyRef<'_, PyRadioConfig>,
        mode: &str,
        sink: usize,
        csma: Option<PyRef<'_, PyCsmaConfig>>,
        n_backoffs: f64,
    ) -> PyResult<Self> {
        let radio = channel::RadioConfig::from(&*radio);
        let tau = markov::mean_tx_state_time(&csma_or_default(csma), &radio, n_backoffs);
        markov::BroadcastChain::from_channel(&matrix.0, &radio, parse_mode(mode)?, sink, tau).map(Self).map_err(to_py)
    }

    /// Chain over fixed link probabilities `p[from][to]`.
    #[staticmethod]
    #[pyo3(signature = (p, sink = 0, mean_tx_state_time = 1.0))]
    fn from_links(p: Vec<Vec<f64>>, sink: usize, mean_tx_state_time: f64) -> PyResult<Self> {
        let n = p.len();
        if p.iter().any(|row| row.len() != n) {
            return Err(PyValueError::new_err("link probabilities must form a square matrix"));
        }
        let mut links = FixedLinks::new(n, p.concat()).map_err(to_py)?;
        markov::BroadcastChain::build(n, sink, &mut links, mean_tx_state_time).map(Self).map_err(to_py)
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.0.len()
    }

    /// States as `L`/`T`/`R` strings, node 0 first.
    #[getter]
    fn states(&self) -> Vec<String> {
        self.0.states().iter().map(ToString::to_string).collect()
    }

    fn absorption_distribution(&self) -> PyOutcomeDistribution {
        PyOutcomeDistribution(self.0.absorption_distribution())
    }

    /// Expected broadcast duration given that every node is covered.
    fn average_cover_time(&self) -> PyResult<f64> {
        self.0.average_cover_time().map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Simulation", module = "wban", frozen)]
struct PySimulation(wban_core::Simulation);

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (matrix, radio, csma = None, sink = 1))]
    fn new(
        matrix: &PyAttenuationMatrix,
        radio: PyRef<'_, PyRadioConfig>,
        csma: Option<PyRef<'_, PyCsmaConfig>>,
        sink: usize,
    ) -> PyResult<Self> {
        wban_core::Simulation::new(matrix.0.clone(), (&*radio).into(), csma_or_default(csma), sink)
            .map(Self)
            .map_err(to_py)
    }

    /// Batch estimates as a JSON document.
    fn run_batch(&self, py: Python<'_>, n_runs: usize, seed: u64) -> PyResult<String> {
        let est = py.detach(|| self.0.run_batch(n_runs, seed)).map_err(to_py)?;
        serde_json::to_string(&est).map_err(|e| to_py(e.into()))
    }

    /// Covered non-sink nodes of one run.
    fn run_once(&self, seed: u64) -> Vec<usize> {
        self.0.run_once(seed).covered
    }

    /// Event trace of one run as JSON lines.
    fn trace(&self, seed: u64) -> PyResult<String> {
        self.0.run_traced(seed).trace_jsonl().map_err(to_py)
    }
}

fn with_config<F>(py: Python<'_>, config_json: &str, f: F) -> PyResult<String>
where
    F: FnOnce(&ExperimentConfig) -> wban_core::Result<String> + Send,
{
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    py.detach(|| f(&cfg)).map_err(to_py)
}

/// Analytical sweep; takes and returns JSON.
#[pyfunction]
#[pyo3(signature = (config_json = "{}"))]
fn analyze(py: Python<'_>, config_json: &str) -> PyResult<String> {
    with_config(py, config_json, |c| experiment::analyze(c)?.to_json())
}

/// Simulator sweep; takes and returns JSON.
#[pyfunction]
#[pyo3(signature = (config_json = "{}"))]
fn simulate(py: Python<'_>, config_json: &str) -> PyResult<String> {
    with_config(py, config_json, |c| experiment::simulate(c)?.to_json())
}

/// Power × repetition table; takes and returns JSON.
#[pyfunction]
#[pyo3(signature = (config_json = "{}"))]
fn abaque(py: Python<'_>, config_json: &str) -> PyResult<String> {
    with_config(py, config_json, |c| experiment::abaque_report(c)?.to_json())
}

#[pymodule]
fn wban(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAttenuationMatrix>()?;
    m.add_class::<PyRadioConfig>()?;
    m.add_class::<PyCsmaConfig>()?;
    m.add_class::<PyLinkModel>()?;
    m.add_class::<PyOutcomeDistribution>()?;
    m.add_class::<PyBroadcastChain>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(mean_tx_state_time, m)?)?;
    m.add_function(wrap_pyfunction!(ber_qpsk_awgn, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(abaque, m)?)?;
    Ok(())
}
