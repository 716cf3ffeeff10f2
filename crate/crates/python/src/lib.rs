use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use engine::aggregate::{self, FormCorpusStats};
use engine::config::Config;
use engine::form_model::{self, parse_forms as parse_forms_rs, url_for as url_for_rs};
use engine::semantics::Classifier;
use engine::simulator::{self, generate_site, SimServer, SimTransport, SiteKind, SiteSpec};
use engine::surfacer::{self, FakeClock, Fetcher, HttpTransport, SystemClock};
use engine::{Binding, FormSpec, Method, PageSignature};

const SIM_HOST: &str = "sim.test";

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let py = obj.py();
    let text: String = py
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(err)
}

fn config_from(obj: Option<&Bound<'_, PyAny>>) -> PyResult<Config> {
    let config = match obj {
        Some(o) => from_py::<Config>(o)?,
        None => Config::default(),
    };
    config.validate().map_err(err)?;
    Ok(config)
}

/// A generated deep-web site with exact ground truth.
#[pyclass(frozen)]
struct Site {
    inner: Arc<simulator::Site>,
}

#[pymethods]
impl Site {
    #[new]
    #[pyo3(signature = (kind, records, page_size=10, vocabulary=2000, seed=0, post=false))]
    fn new(
        kind: &str,
        records: usize,
        page_size: usize,
        vocabulary: usize,
        seed: u64,
        post: bool,
    ) -> PyResult<Self> {
        let kind: SiteKind = kind.parse().map_err(PyValueError::new_err)?;
        let mut spec = SiteSpec::new(kind, records, page_size, vocabulary, seed);
        if post {
            spec.method = Method::Post;
        }
        Self::from_spec(&spec)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_spec(&serde_json::from_str(text).map_err(err)?)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(self.inner.spec()).map_err(err)
    }

    #[getter]
    fn record_count(&self) -> usize {
        self.inner.record_count()
    }

    fn form_page(&self) -> String {
        self.inner.form_page()
    }

    /// Returns `(matched_ids, html)` for a list of `(name, value)` pairs.
    fn answer(&self, params: Vec<(String, String)>) -> PyResult<(Vec<u64>, String)> {
        let a = self.inner.answer_query(&params).map_err(err)?;
        Ok((a.matched, a.html))
    }

    fn coverage(&self, urls: Vec<String>) -> PyResult<f64> {
        self.inner.coverage(&urls).map_err(err)
    }

    fn true_count(&self, url: &str) -> PyResult<usize> {
        self.inner.true_count(url).map_err(err)
    }

    /// Surfaces the site in-process on a fake clock. Returns `(entries, report)`.
    #[pyo3(signature = (config=None))]
    fn surface(
        &self,
        py: Python<'_>,
        config: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let config = config_from(config)?;
        let options = config.surface_options().map_err(err)?;
        let transport = SimTransport::new().with_site(SIM_HOST, Arc::clone(&self.inner));
        let fetcher = Fetcher::new(
            Arc::new(transport),
            config.fetch_policy(),
            Arc::new(FakeClock::new()),
        );
        let url = format!("http://{SIM_HOST}/");
        let (plan, report) = py
            .detach(|| surfacer::surface_site(&fetcher, &url, &options))
            .map_err(err)?;
        Ok((to_py(py, &plan.entries)?, to_py(py, &report)?))
    }

    /// Serves the site over HTTP; port 0 picks a free port.
    #[pyo3(signature = (host="127.0.0.1", port=0))]
    fn serve(&self, host: &str, port: u16) -> PyResult<Server> {
        let server =
            simulator::serve(Arc::clone(&self.inner), &format!("{host}:{port}")).map_err(err)?;
        Ok(Server {
            base_url: server.base_url(),
            inner: Mutex::new(Some(server)),
        })
    }
}

impl Site {
    fn from_spec(spec: &SiteSpec) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(generate_site(spec).map_err(err)?),
        })
    }
}

#[pyclass(frozen)]
struct Server {
    #[pyo3(get)]
    base_url: String,
    inner: Mutex<Option<SimServer>>,
}

#[pymethods]
impl Server {
    fn shutdown(&self) {
        if let Some(s) = self.inner.lock().unwrap().take() {
            s.shutdown();
        }
    }

    fn __enter__(slf: Py<Self>) -> Py<Self> {
        slf
    }

    fn __exit__(&self, _t: Py<PyAny>, _v: Py<PyAny>, _tb: Py<PyAny>) {
        self.shutdown();
    }
}

#[pyclass(frozen, name = "PageSignature")]
struct Signature {
    inner: PageSignature,
}

#[pymethods]
impl Signature {
    #[getter]
    fn minhash(&self) -> Vec<u64> {
        self.inner.minhash.clone()
    }

    #[getter]
    fn estimated_result_count(&self) -> usize {
        self.inner.estimated_result_count
    }

    #[getter]
    fn empty(&self) -> bool {
        self.inner.empty
    }

    fn similarity(&self, other: &Signature) -> f64 {
        self.inner.similarity(&other.inner)
    }
}

#[pyfunction]
fn signature(html: &str) -> Signature {
    Signature {
        inner: surfacer::signature(html),
    }
}

#[pyfunction]
fn estimate_result_count(html: &str) -> usize {
    surfacer::estimate_result_count(html)
}

/// Forms on a page, as dictionaries.
#[pyfunction]
fn parse_forms(py: Python<'_>, html: &str, source_url: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &parse_forms_rs(html, source_url))
}

/// The GET URL for a form dictionary and a `{name: value}` binding.
#[pyfunction]
fn url_for(form: &Bound<'_, PyAny>, binding: Vec<(String, String)>) -> PyResult<String> {
    let form: FormSpec = from_py(form)?;
    let mut b = Binding::new();
    for (name, value) in binding {
        let pos = form
            .position_of(&name)
            .ok_or_else(|| PyValueError::new_err(format!("form has no input {name:?}")))?;
        b.set(pos, value);
    }
    url_for_rs(&form, &b).map_err(err)
}

/// Name-only type hypothesis for one input: `(tag, confidence)`.
#[pyfunction]
fn classify_input(form: &Bound<'_, PyAny>, name: &str) -> PyResult<(String, f64)> {
    let form: FormSpec = from_py(form)?;
    let input = form
        .inputs
        .iter()
        .find(|i| i.name == name)
        .ok_or_else(|| PyValueError::new_err(format!("form has no input {name:?}")))?;
    let t = Classifier::default().classify(input, &form, None);
    Ok((format!("{:?}", t.tag), t.confidence))
}

/// Surfaces the forms at `url` over HTTP.
#[pyfunction]
#[pyo3(signature = (url, config=None))]
fn surface_url(
    py: Python<'_>,
    url: &str,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    let config = config_from(config)?;
    let options = config.surface_options().map_err(err)?;
    let policy = config.fetch_policy();
    let fetcher = Fetcher::new(
        Arc::new(HttpTransport::new(&policy)),
        policy,
        Arc::new(SystemClock::new()),
    );
    let (plan, report) = py
        .detach(|| surfacer::surface_site(&fetcher, url, &options))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((to_py(py, &plan.entries)?, to_py(py, &report)?))
}

/// Attribute-name statistics over a corpus of forms.
#[pyclass]
struct FormCorpus {
    inner: FormCorpusStats,
}

#[pymethods]
impl FormCorpus {
    #[new]
    fn new() -> Self {
        Self {
            inner: FormCorpusStats::new(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: FormCorpusStats::load(path.as_ref()).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(err)
    }

    /// Adds form dictionaries; returns how many were new.
    fn ingest(&mut self, forms: Vec<Bound<'_, PyAny>>) -> PyResult<usize> {
        let mut added = 0;
        for f in &forms {
            added += self.inner.ingest_form(&from_py::<FormSpec>(f)?) as usize;
        }
        Ok(added)
    }

    #[getter]
    fn forms_ingested(&self) -> usize {
        self.inner.forms_ingested()
    }

    #[pyo3(signature = (name, k=5))]
    fn synonyms(&self, name: &str, k: usize) -> Vec<(String, f64)> {
        aggregate::synonyms(name, &self.inner, k)
    }

    fn values(&self, name: &str) -> Vec<(String, u64)> {
        aggregate::values_for(name, &self.inner)
    }

    #[pyo3(signature = (names, k=5))]
    fn autocomplete(&self, names: Vec<String>, k: usize) -> Vec<(String, f64)> {
        aggregate::schema_autocomplete(&names, &self.inner, k)
    }
}

#[pyfunction]
fn normalize_name(name: &str) -> String {
    aggregate::normalize_name(name)
}

#[pyfunction]
fn encode_component(s: &str) -> String {
    form_model::encode_component(s)
}

#[pymodule]
fn deepsurf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Site>()?;
    m.add_class::<Server>()?;
    m.add_class::<Signature>()?;
    m.add_class::<FormCorpus>()?;
    m.add_function(wrap_pyfunction!(signature, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_result_count, m)?)?;
    m.add_function(wrap_pyfunction!(parse_forms, m)?)?;
    m.add_function(wrap_pyfunction!(url_for, m)?)?;
    m.add_function(wrap_pyfunction!(classify_input, m)?)?;
    m.add_function(wrap_pyfunction!(surface_url, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_name, m)?)?;
    m.add_function(wrap_pyfunction!(encode_component, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
