//! Python bindings. Build the `srspla_py` cdylib and import it as `srspla`.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use srspla::auth::{self, AuthError, PearsonAuthenticator};
use srspla::eval::{self, ModelKind, SplitMethod, SplitSpec};
use srspla::features::{self, FeatureMatrix, ProbeWindow};
use srspla::pipeline::{self, PipelineConfig, PipelineError};
use srspla::trace_format::{self, DeviceLabel, SrsProbe};

fn pipeline_err(e: PipelineError) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn auth_err(e: AuthError) -> PyErr {
    match e {
        AuthError::InvalidConfig { .. } | AuthError::DimensionMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_py_json<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    json_loads(py, &serde_json::to_string(v).map_err(value_err)?)
}

fn label_name(l: DeviceLabel) -> &'static str {
    match l {
        DeviceLabel::Legit => "legit",
        DeviceLabel::Attack => "attack",
        DeviceLabel::Unknown => "unknown",
    }
}

fn parse_method(name: &str) -> PyResult<SplitMethod> {
    match name {
        "chrono" | "chronological" => Ok(SplitMethod::Chronological),
        "random" => Ok(SplitMethod::Random),
        other => Err(PyValueError::new_err(format!("unknown split method {other:?}"))),
    }
}

/// Decodes a packed Q15 IQ word into `(i, q)` floats.
#[pyfunction]
fn decode_c16(word: u32) -> (f64, f64) {
    let d = trace_format::decode_c16(word);
    (d.fi, d.fq)
}

/// Packs two Q15 integers into a word.
#[pyfunction]
fn encode_c16(i: i16, q: i16) -> u32 {
    trace_format::encode_c16(i, q)
}

/// One assembled sounding probe.
#[pyclass(name = "Probe", module = "srspla", frozen, from_py_object)]
#[derive(Clone)]
struct PyProbe {
    inner: SrsProbe,
}

#[pymethods]
impl PyProbe {
    #[getter]
    fn timestamp_ns(&self) -> u64 {
        self.inner.timestamp_ns
    }

    #[getter]
    fn rnti(&self) -> u16 {
        self.inner.rnti
    }

    #[getter]
    fn label(&self) -> &'static str {
        label_name(self.inner.device_label)
    }

    #[getter]
    fn toa_ns(&self) -> f64 {
        self.inner.toa_ns
    }

    #[getter]
    fn snr_per_rb(&self) -> Vec<f64> {
        self.inner.snr_per_rb.clone()
    }

    #[getter]
    fn freq_est(&self) -> Vec<Complex64> {
        self.inner.freq_est.clone()
    }

    #[getter]
    fn time_est(&self) -> Vec<Complex64> {
        self.inner.time_est.clone()
    }

    /// Magnitudes of the active subcarriers.
    fn amplitudes(&self) -> Vec<f64> {
        self.inner.active().iter().map(|c| c.norm()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Probe(timestamp_ns={}, rnti={}, label={:?})",
            self.inner.timestamp_ns,
            self.inner.rnti,
            label_name(self.inner.device_label)
        )
    }
}

/// Reads a trace file and assembles its probes.
#[pyfunction]
fn read_probes(path: PathBuf) -> PyResult<Vec<PyProbe>> {
    let bytes = std::fs::read(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    let records = trace_format::read_trace(&bytes).map_err(value_err)?;
    let asm = trace_format::assemble_probes(records).map_err(value_err)?;
    Ok(asm.probes.into_iter().map(|inner| PyProbe { inner }).collect())
}

/// Feature vector of `probe` given up to seven earlier probes, oldest first.
#[pyfunction]
#[pyo3(signature = (probe, history = Vec::new()))]
fn extract(probe: PyRef<'_, PyProbe>, history: Vec<PyProbe>) -> PyResult<Vec<f64>> {
    let history: Vec<SrsProbe> = history.into_iter().map(|p| p.inner).collect();
    let window = ProbeWindow::new(&probe.inner, &history).map_err(PyValueError::new_err)?;
    Ok(features::extract(&window).values)
}

/// `(name, start, end)` for each feature group.
#[pyfunction]
fn feature_layout() -> Vec<(&'static str, usize, usize)> {
    features::layout_manifest()
        .into_iter()
        .map(|s| (s.name, s.start, s.end))
        .collect()
}

#[pyclass(name = "FeatureMatrix", module = "srspla", frozen)]
struct PyFeatureMatrix {
    inner: FeatureMatrix,
}

#[pymethods]
impl PyFeatureMatrix {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyFeatureMatrix { inner: pipeline::load_features(&path).map_err(pipeline_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        features::write_feature_file(&path, &self.inner).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn sessions(&self) -> Vec<String> {
        self.inner.sessions.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f32>> {
        if i >= self.inner.n_rows() {
            return Err(PyIndexError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn labels(&self) -> Vec<&'static str> {
        self.inner.labels().map(label_name).collect()
    }

    fn session_ids(&self) -> Vec<u32> {
        self.inner.meta.iter().map(|m| m.session).collect()
    }

    fn timestamps_ns(&self) -> Vec<u64> {
        self.inner.meta.iter().map(|m| m.timestamp_ns).collect()
    }

    fn select(&self, rows: Vec<usize>) -> PyResult<Self> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.inner.n_rows()) {
            return Err(PyIndexError::new_err(format!("row {r} out of range")));
        }
        Ok(PyFeatureMatrix { inner: self.inner.select(&rows) })
    }

    /// `(train, val, test)` row indices.
    #[pyo3(signature = (method = "chronological", seed = 0))]
    fn splits(&self, method: &str, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        let spec = SplitSpec { method: parse_method(method)?, ..SplitSpec::random(seed) };
        let s = eval::make_splits(&self.inner, &spec).map_err(value_err)?;
        Ok((s.train, s.val, s.test))
    }

    fn __repr__(&self) -> String {
        format!("FeatureMatrix(rows={}, dim={})", self.inner.n_rows(), self.inner.dim)
    }
}

/// Extracts every session listed in a trace directory manifest.
#[pyfunction]
#[pyo3(signature = (traces_dir, out = None))]
fn extract_dataset(traces_dir: PathBuf, out: Option<PathBuf>) -> PyResult<PyFeatureMatrix> {
    let inner = match out {
        Some(out) => pipeline::cmd_extract(&traces_dir, &out).map_err(pipeline_err)?,
        None => features::extract_dataset(&traces_dir).map_err(|e| PyIOError::new_err(e.to_string()))?,
    };
    Ok(PyFeatureMatrix { inner })
}

/// Pipeline configuration, built from TOML.
#[pyclass(name = "Config", module = "srspla", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = None, seed = None))]
    fn new(toml: Option<&str>, seed: Option<u64>) -> PyResult<Self> {
        let mut inner = match toml {
            Some(t) => PipelineConfig::from_toml(t).map_err(pipeline_err)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = seed {
            inner = inner.with_seed(s);
        }
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, seed = None))]
    fn load(path: PathBuf, seed: Option<u64>) -> PyResult<Self> {
        let mut inner = PipelineConfig::load(&path).map_err(pipeline_err)?;
        if let Some(s) = seed {
            inner = inner.with_seed(s);
        }
        Ok(PyConfig { inner })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }
}

fn config_or_default(cfg: Option<PyRef<'_, PyConfig>>) -> PipelineConfig {
    cfg.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Generates the synthetic dataset; returns the manifest as a dict.
#[pyfunction]
#[pyo3(signature = (out_dir, config = None))]
fn gen_dataset<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    config: Option<PyRef<'_, PyConfig>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_or_default(config);
    let manifest = py.detach(|| pipeline::cmd_gen(&cfg, &out_dir)).map_err(pipeline_err)?;
    to_py_json(py, &manifest)
}

#[pyclass(name = "Pearson", module = "srspla")]
struct PyPearson {
    inner: PearsonAuthenticator,
}

#[pymethods]
impl PyPearson {
    /// Enrolls on the legitimate rows of a feature matrix.
    #[staticmethod]
    fn enroll_matrix(features: PyRef<'_, PyFeatureMatrix>) -> PyResult<Self> {
        Ok(PyPearson { inner: PearsonAuthenticator::enroll_matrix(&features.inner).map_err(auth_err)? })
    }

    #[staticmethod]
    fn enroll(probes: Vec<PyProbe>) -> PyResult<Self> {
        let probes: Vec<SrsProbe> = probes.into_iter().map(|p| p.inner).collect();
        Ok(PyPearson { inner: PearsonAuthenticator::enroll(&probes).map_err(auth_err)? })
    }

    #[staticmethod]
    fn enroll_amplitudes(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = PearsonAuthenticator::enroll_amplitudes(rows.iter().map(|r| r.as_slice()))
            .map_err(auth_err)?;
        Ok(PyPearson { inner })
    }

    #[getter]
    fn reference_profile(&self) -> Vec<f64> {
        self.inner.reference_profile.clone()
    }

    #[getter]
    fn threshold_alpha(&self) -> f64 {
        self.inner.threshold_alpha
    }

    #[setter]
    fn set_threshold_alpha(&mut self, alpha: f64) -> PyResult<()> {
        self.inner = self.inner.clone().with_threshold(alpha).map_err(auth_err)?;
        Ok(())
    }

    /// Correlation of a probe with the reference profile.
    fn score(&self, probe: PyRef<'_, PyProbe>) -> f64 {
        self.inner.score(&probe.inner)
    }

    fn score_amplitudes(&self, amplitudes: Vec<f64>) -> PyResult<f64> {
        if amplitudes.len() != self.inner.reference_profile.len() {
            return Err(PyValueError::new_err(format!(
                "expected {} amplitudes, got {}",
                self.inner.reference_profile.len(),
                amplitudes.len()
            )));
        }
        Ok(self.inner.score_amplitudes(&amplitudes))
    }

    fn accepts(&self, score: f64) -> bool {
        self.inner.accepts(score)
    }
}

/// A trained SE-ResNet authenticator.
#[pyclass(name = "Model", module = "srspla")]
struct PyModel {
    inner: auth::TrainedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: pipeline::load_trained(&path).map_err(pipeline_err)? })
    }

    fn save(&mut self, path: PathBuf) -> PyResult<()> {
        auth::save_model(&path, &mut self.inner).map_err(auth_err)
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.inner.best_epoch
    }

    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py_json(py, &self.inner.history)
    }

    /// `(p_legit, logits)` for one raw feature vector.
    fn forward(&mut self, features: Vec<f64>) -> PyResult<(f64, [f64; 2])> {
        self.inner.forward(&features).map_err(auth_err)
    }

    /// Legitimate-class probability for every row.
    fn score_batch(&mut self, py: Python<'_>, features: PyRef<'_, PyFeatureMatrix>) -> PyResult<Vec<f64>> {
        let m = &features.inner;
        let inner = &mut self.inner;
        py.detach(|| inner.score_batch(m)).map_err(auth_err)
    }
}

/// Trains a model on the train split of `method` and returns it with its
/// test-split report.
#[pyfunction]
#[pyo3(signature = (features, method = "chronological", config = None))]
fn train<'py>(
    py: Python<'py>,
    features: PyRef<'_, PyFeatureMatrix>,
    method: &str,
    config: Option<PyRef<'_, PyConfig>>,
) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let cfg = config_or_default(config);
    let method = parse_method(method)?;
    let m = &features.inner;
    let (model, report) = py
        .detach(|| {
            let splits = eval::make_splits(m, &cfg.split_spec(method))?;
            eval::evaluate_split(
                m,
                &splits,
                method,
                ModelKind::Resnet,
                &cfg.network,
                &cfg.train_config(),
                &mut |_| {},
            )
        })
        .map_err(value_err)?;
    let inner = match model {
        eval::Authenticator::Resnet(b) => *b,
        eval::Authenticator::Pearson(_) => unreachable!("resnet requested"),
    };
    Ok((PyModel { inner }, json_loads(py, &report.to_json())?))
}

/// `(eer, threshold)` for legit and attack scores.
#[pyfunction]
fn compute_eer(legit: Vec<f64>, attack: Vec<f64>) -> PyResult<(f64, f64)> {
    eval::compute_eer(&legit, &attack).map_err(value_err)
}

#[pyfunction]
fn compute_auc(legit: Vec<f64>, attack: Vec<f64>) -> PyResult<f64> {
    eval::compute_auc(&legit, &attack).map_err(value_err)
}

/// Runs gen, extract, eval and bench into `out_dir`; returns the summaries
/// and latency table as a dict.
#[pyfunction]
#[pyo3(signature = (out_dir, config = None))]
fn run_all<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    config: Option<PyRef<'_, PyConfig>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_or_default(config);
    let res = py
        .detach(|| pipeline::cmd_run_all(&cfg, &out_dir, &mut |_| {}))
        .map_err(pipeline_err)?;
    let out = serde_json::json!({
        "summaries": res.summaries,
        "latency": res.latency,
    });
    json_loads(py, &out.to_string())
}

#[pymodule]
#[pyo3(name = "srspla")]
fn srspla_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FEATURE_DIM", features::FEATURE_DIM)?;
    m.add_class::<PyProbe>()?;
    m.add_class::<PyFeatureMatrix>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyPearson>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(decode_c16, m)?)?;
    m.add_function(wrap_pyfunction!(encode_c16, m)?)?;
    m.add_function(wrap_pyfunction!(read_probes, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(feature_layout, m)?)?;
    m.add_function(wrap_pyfunction!(extract_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(gen_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compute_eer, m)?)?;
    m.add_function(wrap_pyfunction!(compute_auc, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    Ok(())
}
