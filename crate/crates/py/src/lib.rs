//! Python bindings for the simulator: the main value types plus the
//! model, optimizer, partitioner and pipeline entry points.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use edgesr::domain::{AllocationRatio, CandidateSets, Configuration, Request};
use edgesr::error::Error;
use edgesr::image::{read_netpbm, write_netpbm};
use edgesr::optimizer::{self, Policy, SaParams};
use edgesr::partitioner::select_foreground;
use edgesr::perf::LatencyBreakdown;
use edgesr::profile::SystemProfile;
use edgesr::simulator;
use edgesr::stitcher;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::FileNotFound { .. } | Error::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_policy(name: &str) -> PyResult<Policy> {
    match name {
        "sa" => Ok(Policy::Sa),
        "brute" => Ok(Policy::Brute),
        "random" => Ok(Policy::Random),
        "nosr" => Ok(Policy::NoSr),
        "onetype" => Ok(Policy::OneType),
        other => Err(PyValueError::new_err(format!(
            "unknown policy {other}; expected sa|brute|random|nosr|onetype"
        ))),
    }
}

fn candidate_sets(scales: Vec<u32>, steps: Vec<u32>) -> PyResult<CandidateSets> {
    CandidateSets::new(scales, steps).map_err(to_py_err)
}

fn gamma_ratio(gamma: f64) -> PyResult<AllocationRatio> {
    AllocationRatio::new(gamma).map_err(to_py_err)
}

/// One user generation task.
#[pyclass(name = "Request", from_py_object)]
#[derive(Clone)]
struct PyRequest {
    inner: Request,
}

#[pymethods]
impl PyRequest {
    #[new]
    #[pyo3(signature = (id, target_resolution, lambda_weight, prompt_seed = 0))]
    fn new(id: String, target_resolution: u32, lambda_weight: f64, prompt_seed: u64) -> Self {
        PyRequest { inner: Request::new(id, target_resolution, lambda_weight, prompt_seed) }
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn target_resolution(&self) -> u32 {
        self.inner.target_resolution
    }

    #[getter]
    fn lambda_weight(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn prompt_seed(&self) -> u64 {
        self.inner.prompt_seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Request(id={:?}, target_resolution={}, lambda_weight={}, prompt_seed={})",
            self.inner.id, self.inner.target_resolution, self.inner.lambda, self.inner.prompt_seed
        )
    }
}

/// Decision pair: SR scale and denoising steps.
#[pyclass(name = "Configuration", from_py_object)]
#[derive(Clone)]
struct PyConfiguration {
    inner: Configuration,
}

#[pymethods]
impl PyConfiguration {
    #[new]
    fn new(sr_scale: u32, denoise_steps: u32) -> Self {
        PyConfiguration { inner: Configuration::new(sr_scale, denoise_steps) }
    }

    #[getter]
    fn sr_scale(&self) -> u32 {
        self.inner.sr_scale
    }

    #[getter]
    fn denoise_steps(&self) -> u32 {
        self.inner.denoise_steps
    }

    fn __repr__(&self) -> String {
        format!(
            "Configuration(sr_scale={}, denoise_steps={})",
            self.inner.sr_scale, self.inner.denoise_steps
        )
    }

    fn __eq__(&self, other: &PyConfiguration) -> bool {
        self.inner == other.inner
    }
}

/// Calibration constants of the latency/quality models.
#[pyclass(name = "SystemProfile", from_py_object)]
#[derive(Clone)]
struct PySystemProfile {
    inner: SystemProfile,
}

#[pymethods]
impl PySystemProfile {
    /// The shipped calibrated profile.
    #[staticmethod]
    fn default() -> Self {
        PySystemProfile { inner: SystemProfile::default_calibrated() }
    }

    /// Load a profile from a JSON file (unknown keys rejected).
    #[staticmethod]
    fn load(path: String) -> PyResult<Self> {
        Ok(PySystemProfile { inner: edgesr::profile::load_profile(path).map_err(to_py_err)? })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let p = &self.inner;
        d.set_item("edge_capacity", p.edge_capacity)?;
        d.set_item("device_capacity", p.device_capacity)?;
        d.set_item("bandwidth", p.bandwidth)?;
        d.set_item("gen_load_coeff", p.gen_load_coeff)?;
        d.set_item("gen_res_exponent", p.gen_res_exponent)?;
        d.set_item("sr_edge_coeff", p.sr_edge_coeff)?;
        d.set_item("sr_device_coeff", p.sr_device_coeff)?;
        d.set_item("sr_res_exponent", p.sr_res_exponent)?;
        d.set_item("bits_per_pixel", p.bits_per_pixel)?;
        d.set_item("quality_step_rate", p.quality_step_rate)?;
        d.set_item("quality_peak_resolution", p.quality_peak_resolution)?;
        d.set_item("quality_res_width", p.quality_res_width)?;
        d.set_item("quality_max", p.quality_max)?;
        d.set_item("enhance_max_ratio", p.enhance_max_ratio)?;
        d.set_item("enhance_exponent", p.enhance_exponent)?;
        Ok(d)
    }
}

fn breakdown_dict<'py>(py: Python<'py>, b: &LatencyBreakdown) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t_gen", b.t_gen)?;
    d.set_item("t_sr_edge", b.t_sr_edge)?;
    d.set_item("t_sr_device", b.t_sr_device)?;
    d.set_item("t_tx_enhanced", b.t_tx_enhanced)?;
    d.set_item("t_tx_raw", b.t_tx_raw)?;
    d.set_item("t_enhance", b.t_enhance)?;
    d.set_item("total", b.total)?;
    Ok(d)
}

/// Full latency breakdown of one request/configuration pair.
#[pyfunction]
fn latency_total<'py>(
    py: Python<'py>,
    request: &PyRequest,
    config: &PyConfiguration,
    gamma: f64,
    profile: &PySystemProfile,
) -> PyResult<Bound<'py, PyDict>> {
    let b = edgesr::perf::latency_total(
        &request.inner,
        config.inner,
        gamma_ratio(gamma)?,
        &profile.inner,
    )
    .map_err(to_py_err)?;
    breakdown_dict(py, &b)
}

/// Final quality (base quality times the gamma multiplier, capped at 1).
#[pyfunction]
fn quality_final(
    request: &PyRequest,
    config: &PyConfiguration,
    gamma: f64,
    profile: &PySystemProfile,
) -> PyResult<f64> {
    edgesr::perf::quality_final(&request.inner, config.inner, gamma_ratio(gamma)?, &profile.inner)
        .map_err(to_py_err)
}

/// Utility: quality - lambda * latency.
#[pyfunction]
fn utility(quality: f64, latency_secs: f64, lambda_weight: f64) -> f64 {
    optimizer::utility(quality, latency_secs, lambda_weight)
}

#[pyfunction]
#[pyo3(signature = (request, gamma, profile, scales, steps, latency_budget = None))]
fn brute_force(
    request: &PyRequest,
    gamma: f64,
    profile: &PySystemProfile,
    scales: Vec<u32>,
    steps: Vec<u32>,
    latency_budget: Option<f64>,
) -> PyResult<(PyConfiguration, f64)> {
    let sets = candidate_sets(scales, steps)?;
    let (config, eval) = optimizer::brute_force(
        &request.inner,
        gamma_ratio(gamma)?,
        &profile.inner,
        &sets,
        latency_budget,
    )
    .map_err(to_py_err)?;
    Ok((PyConfiguration { inner: config }, eval.utility))
}

#[pyfunction]
#[pyo3(signature = (request, gamma, profile, scales, steps, seed = 42, latency_budget = None))]
fn anneal(
    request: &PyRequest,
    gamma: f64,
    profile: &PySystemProfile,
    scales: Vec<u32>,
    steps: Vec<u32>,
    seed: u64,
    latency_budget: Option<f64>,
) -> PyResult<(PyConfiguration, f64)> {
    let sets = candidate_sets(scales, steps)?;
    let params = SaParams { rng_seed: seed, latency_budget, ..SaParams::default() };
    let gamma = gamma_ratio(gamma)?;
    let (config, _) = optimizer::anneal(&request.inner, gamma, &profile.inner, &sets, &params)
        .map_err(to_py_err)?;
    let eval = optimizer::evaluate_configuration(&request.inner, config, gamma, &profile.inner)
        .map_err(to_py_err)?;
    Ok((PyConfiguration { inner: config }, eval.utility))
}

/// Run the built-in ten-user scenario and return the per-task records.
#[pyfunction]
#[pyo3(signature = (seed = 42, policy = "sa"))]
fn run_default_scenario<'py>(
    py: Python<'py>,
    seed: u64,
    policy: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let scenario = simulator::default_scenario(seed);
    let report =
        simulator::run_scenario_with_policy(&scenario, parse_policy(policy)?).map_err(to_py_err)?;
    let records = pyo3::types::PyList::empty(py);
    for r in &report.records {
        let d = PyDict::new(py);
        d.set_item("request_id", &r.request_id)?;
        if let Some(c) = r.config {
            d.set_item("sr_scale", c.sr_scale)?;
            d.set_item("denoise_steps", c.denoise_steps)?;
        }
        if let Some(b) = r.breakdown {
            d.set_item("latency", breakdown_dict(py, &b)?)?;
        }
        d.set_item("quality", r.quality)?;
        d.set_item("utility", r.utility)?;
        d.set_item("feasible", r.feasible)?;
        records.append(d)?;
    }
    let out = PyDict::new(py);
    out.set_item("policy", policy)?;
    out.set_item("records", records)?;
    out.set_item("total_utility", report.aggregates.total_utility)?;
    out.set_item("mean_latency", report.aggregates.mean_latency)?;
    out.set_item("mean_quality", report.aggregates.mean_quality)?;
    Ok(out)
}

/// Write the deterministic synthetic source image as PGM/PPM.
#[pyfunction]
fn synth_image(seed: u64, resolution: u32, path: String) -> PyResult<()> {
    let image = simulator::synth_image(seed, resolution);
    write_netpbm(path, &image).map_err(to_py_err)
}

/// Variance-partition an image file; returns variances and cell sets.
#[pyfunction]
#[pyo3(signature = (path, grid = 4, gamma = 0.25))]
fn partition_image<'py>(
    py: Python<'py>,
    path: String,
    grid: u32,
    gamma: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let image = read_netpbm(path).map_err(to_py_err)?;
    let result = select_foreground(&image, grid, gamma_ratio(gamma)?).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("grid_side", result.grid_side)?;
    d.set_item("variances", result.variances.clone())?;
    d.set_item("foreground", result.foreground.clone())?;
    d.set_item("background", result.background.clone())?;
    Ok(d)
}

/// Hybrid-enhance an image file; returns the output dimensions.
#[pyfunction]
#[pyo3(signature = (input_path, output_path, scale = 2, gamma = 0.25, overlap = 16, grid = 4))]
fn enhance_image(
    input_path: String,
    output_path: String,
    scale: u32,
    gamma: f64,
    overlap: u32,
    grid: u32,
) -> PyResult<(u32, u32)> {
    let image = read_netpbm(input_path).map_err(to_py_err)?;
    let out = stitcher::hybrid_enhance(&image, grid, gamma_ratio(gamma)?, scale, overlap)
        .map_err(to_py_err)?;
    write_netpbm(output_path, &out).map_err(to_py_err)?;
    Ok((out.width, out.height))
}

#[pymodule]
fn edgesr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRequest>()?;
    m.add_class::<PyConfiguration>()?;
    m.add_class::<PySystemProfile>()?;
    m.add_function(wrap_pyfunction!(latency_total, m)?)?;
    m.add_function(wrap_pyfunction!(quality_final, m)?)?;
    m.add_function(wrap_pyfunction!(utility, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(anneal, m)?)?;
    m.add_function(wrap_pyfunction!(run_default_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(synth_image, m)?)?;
    m.add_function(wrap_pyfunction!(partition_image, m)?)?;
    m.add_function(wrap_pyfunction!(enhance_image, m)?)?;
    Ok(())
}
