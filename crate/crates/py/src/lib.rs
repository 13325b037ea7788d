//! Python bindings: degree distributions, codes, RLL flipping, the
//! end-to-end link, density evolution and the config-driven runner.
//!
//! Bit and symbol vectors come back as `bytes`.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uepsim::analysis::{de_run, estimate_initial_pdfs, DeConfig, Grid};
use uepsim::cli::{run, RunArgs, RunError};
use uepsim::config::ExperimentConfig;
use uepsim::degree::{DegreeDistribution as CoreDistribution, Perspective};
use uepsim::ldpc::{Algorithm, DecoderState};
use uepsim::mapping::{Interleaver, Labeling, LabelingKind, Scheme};
use uepsim::sim::{ber_point, Budget, Code as CoreCode, CodeSpec};
use uepsim::turbo::{Chain, Link, TurboSchedule};
use uepsim::{rll, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Input(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn perspective(name: &str) -> PyResult<Perspective> {
    match name {
        "node" => Ok(Perspective::Node),
        "edge" => Ok(Perspective::Edge),
        _ => Err(PyValueError::new_err(format!("perspective must be 'node' or 'edge', got {name:?}"))),
    }
}

fn scheme(name: &str) -> PyResult<Scheme> {
    serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown scheme {name:?}")))
}

fn labeling(name: &str) -> PyResult<Labeling> {
    let kind: LabelingKind = serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown labeling {name:?}")))?;
    Ok(Labeling::new(kind))
}

fn parse_config(json: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_json(json).map_err(err)
}

/// Variable/check degree profile.
#[pyclass(name = "DegreeDistribution", from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: CoreDistribution,
}

#[pymethods]
impl PyDistribution {
    #[new]
    #[pyo3(signature = (var, chk=Vec::new(), perspective="node"))]
    fn new(var: Vec<(usize, f64)>, chk: Vec<(usize, f64)>, perspective: &str) -> PyResult<Self> {
        let p = self::perspective(perspective)?;
        Ok(Self { inner: CoreDistribution::new(var, chk, p).map_err(err)? })
    }

    #[getter]
    fn var(&self) -> Vec<(usize, f64)> {
        self.inner.var().to_vec()
    }

    #[getter]
    fn chk(&self) -> Vec<(usize, f64)> {
        self.inner.chk().to_vec()
    }

    fn to_node(&self) -> Self {
        Self { inner: self.inner.to_node() }
    }

    fn to_edge(&self) -> Self {
        Self { inner: self.inner.to_edge() }
    }

    fn design_rate(&self) -> PyResult<f64> {
        self.inner.design_rate().map_err(err)
    }

    fn var_node_counts(&self, n: usize) -> Vec<(usize, usize)> {
        self.inner.to_node().var_node_counts(n)
    }

    fn __repr__(&self) -> String {
        format!("DegreeDistribution(var={:?}, chk={:?})", self.inner.var(), self.inner.chk())
    }
}

/// PEG-built LDPC code with its systematic encoder.
#[pyclass(name = "Code", skip_from_py_object)]
struct PyCode {
    inner: CoreCode,
}

#[pymethods]
impl PyCode {
    #[new]
    #[pyo3(signature = (distribution, n, rate=None, seed=0))]
    fn new(distribution: &PyDistribution, n: usize, rate: Option<f64>, seed: u64) -> PyResult<Self> {
        let rate = match rate {
            Some(r) => r,
            None => distribution.inner.design_rate().map_err(err)?,
        };
        let spec = CodeSpec { seed, ..CodeSpec::from_distribution(distribution.inner.clone(), n, rate) };
        Ok(Self { inner: CoreCode::build(&spec).map_err(err)? })
    }

    #[staticmethod]
    fn from_alist(path: PathBuf) -> PyResult<Self> {
        let spec = CodeSpec { n: 0, rate: None, distribution: None, alist: Some(path), seed: 0 };
        Ok(Self { inner: CoreCode::build(&spec).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.encoder.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.encoder.k()
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.inner.encoder.rate()
    }

    #[getter]
    fn girth(&self) -> Option<usize> {
        self.inner.graph.graph().girth()
    }

    fn encode(&self, message: Vec<u8>) -> PyResult<Vec<u8>> {
        self.inner.encoder.encode(&message).map_err(err)
    }

    fn extract_message(&self, codeword: Vec<u8>) -> Vec<u8> {
        self.inner.encoder.extract_message(&codeword)
    }

    fn is_codeword(&self, v: Vec<u8>) -> bool {
        self.inner.graph.graph().is_codeword(&v)
    }

    fn to_alist(&self) -> String {
        self.inner.graph.graph().to_alist()
    }

    /// Stand-alone BP decode; returns (hard decisions, a-posteriori LLRs, parity satisfied).
    #[pyo3(signature = (llr, iterations=50, algorithm="sum_product"))]
    fn decode(&self, llr: Vec<f64>, iterations: usize, algorithm: &str) -> PyResult<(Vec<u8>, Vec<f64>, bool)> {
        let algo: Algorithm = serde_json::from_value(serde_json::Value::String(algorithm.to_owned()))
            .map_err(|_| PyValueError::new_err(format!("unknown algorithm {algorithm:?}")))?;
        let out = DecoderState::new(Arc::clone(&self.inner.graph)).decode(&llr, iterations, algo, true).map_err(err)?;
        Ok((out.hard, out.app, out.parity_ok))
    }
}

/// Write/read link described by an experiment config.
#[pyclass(name = "Link", skip_from_py_object)]
struct PyLink {
    inner: Link,
    schedule: TurboSchedule,
}

#[pymethods]
impl PyLink {
    /// Builds the code and channel of a JSON experiment config at its first SNR.
    #[staticmethod]
    fn from_config(json: &str) -> PyResult<Self> {
        let cfg = parse_config(json)?;
        let spec = cfg.code.as_ref().ok_or_else(|| PyValueError::new_err("config has no `code`"))?;
        let code = CoreCode::build(spec).map_err(err)?;
        let ch = cfg.channel_params(cfg.snr_db[0], code.encoder.rate()).map_err(err)?;
        let inner = code.link(cfg.scheme, cfg.bit_map(), cfg.flip, ch).map_err(err)?;
        Ok(Self { inner, schedule: cfg.schedule })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    /// Monte-Carlo BER at one SNR; frame f draws from stream (seed, point, f).
    #[pyo3(signature = (snr_db, max_frames, stop_errors=usize::MAX, seed=0, point=0))]
    fn ber_point<'py>(
        &self,
        py: Python<'py>,
        snr_db: f64,
        max_frames: usize,
        stop_errors: usize,
        seed: u64,
        point: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let link = self.inner.at_snr(snr_db);
        let budget = Budget { max_frames, stop_errors };
        let p = py.detach(|| ber_point(&link, &self.schedule, budget, point, seed)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("snr_db", p.snr_db)?;
        d.set_item("frames", p.frames)?;
        d.set_item("bit_errors", p.final_bit_errors())?;
        d.set_item("ber", p.ber())?;
        d.set_item("frame_errors", p.frame_errors)?;
        d.set_item("fer", p.fer())?;
        d.set_item("ber_per_outer", (0..self.schedule.outer).map(|u| p.ber_at(u)).collect::<Vec<_>>())?;
        d.set_item("flip_rate", p.flip_rate(self.inner.n() / self.inner.bit_map().bits_per_symbol()))?;
        Ok(d)
    }
}

/// Min-sum density evolution of a distribution at one SNR.
///
/// The config supplies scheme, labeling, flipping, channel and n; returns the
/// P_e trace (index 0 is the detector output) and the convergence flag.
#[pyfunction]
#[pyo3(signature = (config_json, distribution, snr_db, trials=1000, u_max=15, seed=0))]
fn density_evolution(
    py: Python<'_>,
    config_json: &str,
    distribution: &PyDistribution,
    snr_db: f64,
    trials: usize,
    u_max: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, bool)> {
    let cfg = parse_config(config_json)?;
    let n = cfg.code.as_ref().ok_or_else(|| PyValueError::new_err("config has no `code`"))?.n;
    let rate = cfg.nominal_rate().map_err(err)?;
    let chain = Chain::new(n, cfg.scheme, cfg.bit_map(), cfg.flip, cfg.channel_params(snr_db, rate).map_err(err)?).map_err(err)?;
    let dist = distribution.inner.clone();
    py.detach(|| {
        let init = estimate_initial_pdfs(&chain, Grid::default(), trials, seed)?;
        let r = de_run(&DeConfig { u_max, ..DeConfig::new(dist, n) }, &init.flipped, &init.non_flipped)?;
        Ok((r.pe, r.converged))
    })
    .map_err(err)
}

/// Runs a JSON config file like `uepsim run`; returns the CSV path.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir=PathBuf::from("."), threads=None, seed=None))]
fn run_experiment(py: Python<'_>, config_path: PathBuf, out_dir: PathBuf, threads: Option<usize>, seed: Option<u64>) -> PyResult<PathBuf> {
    let args = RunArgs { config: config_path, out: out_dir, threads, seed };
    py.detach(|| run(&args)).map_err(|e| match e {
        RunError::Config(e) => PyValueError::new_err(e.to_string()),
        RunError::Runtime(e) => PyRuntimeError::new_err(e.to_string()),
    })
}

/// Deliberate binary flipping; returns (flipped sequence, flip positions).
#[pyfunction]
fn binary_flip(v: Vec<u8>, k: usize) -> PyResult<(Vec<u8>, Vec<usize>)> {
    let q = rll::binary_locate(&v, k).map_err(err)?;
    Ok((q.apply(&v), positions(&q.q)))
}

/// Deliberate quaternary flipping to the fill level.
#[pyfunction]
#[pyo3(signature = (w, k, fill=2))]
fn quaternary_flip(w: Vec<u8>, k: usize, fill: u8) -> PyResult<(Vec<u8>, Vec<usize>)> {
    let q = rll::quaternary_locate(&w, k, fill).map_err(err)?;
    Ok((q.apply(&w), positions(&q.q)))
}

fn positions(q: &[u8]) -> Vec<usize> {
    q.iter().enumerate().filter(|(_, &x)| x != 0).map(|(i, _)| i).collect()
}

#[pyfunction]
fn verify_rll(seq: Vec<u8>, k: usize) -> bool {
    rll::verify_rll(&seq, k)
}

#[pyfunction]
fn stationary_flip_rate(k: usize, p_zero: f64) -> f64 {
    rll::stationary_flip_rate(k, p_zero)
}

/// AEWE table per error label: list of (squared distance, weight).
#[pyfunction]
#[pyo3(signature = (labeling_kind="natural"))]
fn aewe(labeling_kind: &str) -> PyResult<Vec<Vec<(f64, f64)>>> {
    Ok(labeling(labeling_kind)?.aewe().to_vec())
}

#[pyfunction]
fn interleave(scheme_name: &str, v: Vec<u8>) -> PyResult<Vec<u8>> {
    Interleaver::new(scheme(scheme_name)?, v.len()).and_then(|p| p.interleave(&v)).map_err(err)
}

#[pyfunction]
fn deinterleave(scheme_name: &str, v: Vec<u8>) -> PyResult<Vec<u8>> {
    Interleaver::new(scheme(scheme_name)?, v.len()).and_then(|p| p.deinterleave(&v)).map_err(err)
}

#[pymodule]
fn pyuepsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyCode>()?;
    m.add_class::<PyLink>()?;
    m.add_function(wrap_pyfunction!(density_evolution, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(binary_flip, m)?)?;
    m.add_function(wrap_pyfunction!(quaternary_flip, m)?)?;
    m.add_function(wrap_pyfunction!(verify_rll, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_flip_rate, m)?)?;
    m.add_function(wrap_pyfunction!(aewe, m)?)?;
    m.add_function(wrap_pyfunction!(interleave, m)?)?;
    m.add_function(wrap_pyfunction!(deinterleave, m)?)?;
    m.add("GIT_DESCRIBE", uepsim::cli::GIT_DESCRIBE)?;
    Ok(())
}
