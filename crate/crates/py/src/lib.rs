//! Python module `pyblockid`.

use std::path::PathBuf;

use blockid::dataset::{cross_validate as cv, evaluate, SplitMode};
use blockid::grasp::{grasp_pose, PointCloud};
use blockid::identify::Identifier;
use blockid::synth::{default_shape, generate_corpus, CorpusSpec};
use blockid::training::{fit, Init, ModelFile};
use blockid::{default_lexicon, Error, FitConfig, Method, ModelParams, TaskFilter};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_validation() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializable report to a plain Python object via `json.loads`.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Environments plus identification tasks.
#[pyclass(name = "Corpus", module = "pyblockid")]
pub struct PyCorpus {
    inner: blockid::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    #[pyo3(signature = (seed=7, envs=[5, 5, 5, 5, 2], replicas=10, descriptions=5, noise=0.05))]
    fn synth(seed: u64, envs: [usize; 5], replicas: usize, descriptions: usize, noise: f64) -> PyResult<Self> {
        let spec = CorpusSpec {
            envs_per_category: envs,
            descriptions_per_object: descriptions,
            replicas,
            noise,
            seed,
            shapes: [1, 2, 3, 4, 5].map(default_shape),
        };
        let inner = generate_corpus(&spec, &default_lexicon()).map_err(to_py)?;
        Ok(PyCorpus { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = blockid::Corpus::load(&path, &default_lexicon()).map_err(to_py)?;
        Ok(PyCorpus { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path, &default_lexicon()).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json(&default_lexicon())
    }

    #[getter]
    fn env_ids(&self) -> Vec<String> {
        self.inner.environments.iter().map(|e| e.id.clone()).collect()
    }

    #[getter]
    fn n_tasks(&self) -> usize {
        self.inner.tasks.len()
    }

    /// Object ids of one environment, in order.
    fn objects(&self, env_id: &str) -> PyResult<Vec<String>> {
        let env = self
            .inner
            .env(env_id)
            .ok_or_else(|| to_py(Error::UnknownEnvironment(env_id.into())))?;
        Ok(env.objects.iter().map(|o| o.id.clone()).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.environments.len()
    }
}

/// Per-symbol log-linear weights over the default lexicon.
#[pyclass(name = "Model", module = "pyblockid")]
pub struct PyModel {
    params: ModelParams,
    ridge: f64,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn zeros() -> Self {
        PyModel {
            params: ModelParams::zeros(default_lexicon()),
            ridge: 0.0,
        }
    }

    #[staticmethod]
    #[pyo3(signature = (corpus, method="bfgs", ridge=1e-6, tol=1e-6, max_iters=500, seed=None))]
    fn fit<'py>(
        py: Python<'py>,
        corpus: &PyCorpus,
        method: &str,
        ridge: f64,
        tol: f64,
        max_iters: usize,
        seed: Option<u64>,
    ) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
        let method = match method {
            "bfgs" => Method::Bfgs,
            "newton" => Method::Newton,
            other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
        };
        let config = FitConfig {
            method,
            grad_tol: tol,
            max_iters,
            ridge,
            init: seed.map_or(Init::Zeros, |seed| Init::Gaussian { seed }),
        };
        let lex = default_lexicon();
        let c = &corpus.inner;
        let (params, report) = py
            .detach(|| fit(&lex, &c.tasks, &c.environments, &config))
            .map_err(to_py)?;
        Ok((PyModel { params, ridge }, to_object(py, &report)?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let file = ModelFile::load(&path).map_err(to_py)?;
        let ridge = file.ridge;
        Ok(PyModel {
            params: file.params().map_err(to_py)?,
            ridge,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        ModelFile::new(&self.params, self.ridge, None).save(&path).map_err(to_py)
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.params.beta.clone()
    }

    /// Ranked posterior `{"posterior": [{"object_id", "prob"}], "entropy"}`.
    fn identify<'py>(
        &self,
        py: Python<'py>,
        corpus: &PyCorpus,
        env_id: &str,
        symbols: Vec<String>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let id = Identifier::new(self.params.clone(), corpus.inner.clone()).map_err(to_py)?;
        let r = id.identify(env_id, &symbols).map_err(to_py)?;
        to_object(py, &r)
    }

    /// Metrics over all tasks, or those matching `env=ID` / `cat=ID`.
    #[pyo3(signature = (corpus, filter=None))]
    fn evaluate<'py>(&self, py: Python<'py>, corpus: &PyCorpus, filter: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
        let filter = match filter {
            None => TaskFilter::All,
            Some(f) => TaskFilter::parse(f).ok_or_else(|| PyValueError::new_err(format!("bad filter '{f}'")))?,
        };
        let m = evaluate(&self.params, &corpus.inner, &filter).map_err(to_py)?;
        to_object(py, &m)
    }
}

/// Symbol names in parameter order.
#[pyfunction]
fn lexicon() -> Vec<String> {
    default_lexicon().symbols().iter().map(|s| s.name.clone()).collect()
}

/// Leave-one-group-out cross-validation; `mode` is `"env"` or `"cat"`.
#[pyfunction]
#[pyo3(signature = (corpus, mode="env"))]
fn cross_validate<'py>(py: Python<'py>, corpus: &PyCorpus, mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "env" => SplitMode::Env,
        "cat" => SplitMode::Category,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    let lex = default_lexicon();
    let c = &corpus.inner;
    let report = py
        .detach(|| cv(&lex, c, &FitConfig::default(), mode))
        .map_err(to_py)?;
    to_object(py, &report)
}

/// Grasp pose `{"position", "direction", "width"}` for `(x, y, z)` points.
#[pyfunction]
fn grasp<'py>(py: Python<'py>, points: Vec<(f64, f64, f64)>) -> PyResult<Bound<'py, PyAny>> {
    let cloud = PointCloud::new(points.into_iter().map(|(x, y, z)| [x, y, z]).collect()).map_err(to_py)?;
    to_object(py, &grasp_pose(&cloud).map_err(to_py)?)
}

#[pymodule]
pub fn pyblockid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(lexicon, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(grasp, m)?)?;
    Ok(())
}
