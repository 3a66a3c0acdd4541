//! Python bindings. Rational parameters accept anything whose `str()` is a
//! decimal or `p/q` (ints, strings, `fractions.Fraction`); rational results
//! come back as strings in the same encoding.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use medr::dataset;
use medr::harness::{self, SweepAxis};
use medr::{AllocationResult, Allocator, AllocatorTag, Error, Instance, MechanismOutcome};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::Json(_)
        | Error::UnknownTenant(_)
        | Error::NotAWinner(_)
        | Error::TooManyBids { .. } => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn rational(value: &Bound<'_, PyAny>) -> PyResult<medr::Rational> {
    let text = value.str()?.to_string();
    medr::parse_rational(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn algorithm(name: &str) -> PyResult<AllocatorTag> {
    name.parse().map_err(PyValueError::new_err)
}

#[pyclass(name = "Bid", module = "medr", from_py_object)]
#[derive(Clone)]
struct PyBid {
    #[pyo3(get)]
    tenant_id: String,
    #[pyo3(get)]
    size: i64,
    #[pyo3(get)]
    cost: i64,
}

#[pymethods]
impl PyBid {
    #[new]
    fn new(tenant_id: String, size: i64, cost: i64) -> Self {
        PyBid {
            tenant_id,
            size,
            cost,
        }
    }

    fn __repr__(&self) -> String {
        format!("Bid({:?}, {}, {})", self.tenant_id, self.size, self.cost)
    }

    fn __eq__(&self, other: &PyBid) -> bool {
        self.tenant_id == other.tenant_id && self.size == other.size && self.cost == other.cost
    }
}

impl From<&PyBid> for medr::Bid {
    fn from(b: &PyBid) -> Self {
        medr::Bid::new(b.tenant_id.clone(), b.size, b.cost)
    }
}

impl From<&medr::Bid> for PyBid {
    fn from(b: &medr::Bid) -> Self {
        PyBid::new(b.tenant_id.to_string(), b.size, b.cost)
    }
}

#[pyclass(name = "AuctionConfig", module = "medr", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: medr::AuctionConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (target, alpha = None, gamma = None, epsilon = None))]
    fn new(
        target: i64,
        alpha: Option<&Bound<'_, PyAny>>,
        gamma: Option<&Bound<'_, PyAny>>,
        epsilon: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let pick = |v: Option<&Bound<'_, PyAny>>, default: medr::Rational| {
            v.map(rational).transpose().map(|r| r.unwrap_or(default))
        };
        let inner = medr::AuctionConfig::new(
            target,
            pick(alpha, medr::Rational::from_integer(harness::DEFAULT_ALPHA))?,
            pick(gamma, harness::default_gamma())?,
            pick(epsilon, harness::default_epsilon())?,
        );
        let violations = inner.violations();
        if !violations.is_empty() {
            return Err(to_py(Error::Validation(violations)));
        }
        Ok(PyConfig { inner })
    }

    #[getter]
    fn target(&self) -> i64 {
        self.inner.target
    }

    #[getter]
    fn alpha(&self) -> String {
        medr::format_rational(&self.inner.bes_unit_cost)
    }

    #[getter]
    fn gamma(&self) -> String {
        medr::format_rational(&self.inner.pue)
    }

    #[getter]
    fn epsilon(&self) -> String {
        medr::format_rational(&self.inner.epsilon)
    }

    fn __repr__(&self) -> String {
        format!(
            "AuctionConfig(target={}, alpha='{}', gamma='{}', epsilon='{}')",
            self.target(),
            self.alpha(),
            self.gamma(),
            self.epsilon()
        )
    }
}

#[pyclass(name = "Allocation", module = "medr", skip_from_py_object)]
struct PyAllocation {
    #[pyo3(get)]
    winners: Vec<String>,
    #[pyo3(get)]
    bes_usage: String,
    #[pyo3(get)]
    social_cost: String,
}

#[pymethods]
impl PyAllocation {
    fn __repr__(&self) -> String {
        format!(
            "Allocation(winners={:?}, bes_usage='{}', social_cost='{}')",
            self.winners, self.bes_usage, self.social_cost
        )
    }
}

impl From<AllocationResult> for PyAllocation {
    fn from(a: AllocationResult) -> Self {
        PyAllocation {
            winners: a.winners.iter().map(ToString::to_string).collect(),
            bes_usage: medr::format_rational(&a.bes_usage),
            social_cost: medr::format_rational(&a.social_cost),
        }
    }
}

#[pyclass(name = "Outcome", module = "medr", skip_from_py_object)]
struct PyOutcome {
    inner: MechanismOutcome,
}

#[pymethods]
impl PyOutcome {
    #[getter]
    fn allocation(&self) -> PyAllocation {
        self.inner.allocation.clone().into()
    }

    #[getter]
    fn allocator(&self) -> &'static str {
        self.inner.allocator.as_str()
    }

    /// Tenant id to payment, in roster order.
    #[getter]
    fn payments(&self) -> Vec<(String, i64)> {
        self.inner
            .payments
            .payments
            .iter()
            .map(|(t, p)| (t.to_string(), *p))
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

fn instance(config: &PyConfig, bids: Vec<PyBid>) -> PyResult<Instance> {
    Instance::checked(config.inner.clone(), bids.iter().map(Into::into).collect()).map_err(to_py)
}

#[pyfunction]
fn dopt_solve(config: &PyConfig, bids: Vec<PyBid>) -> PyResult<PyAllocation> {
    let inst = instance(config, bids)?;
    Ok(medr::dopt_solve(&inst).map_err(to_py)?.into())
}

#[pyfunction]
fn fptas_solve(config: &PyConfig, bids: Vec<PyBid>) -> PyResult<PyAllocation> {
    let inst = instance(config, bids)?;
    Ok(medr::fptas_solve(&inst).map_err(to_py)?.into())
}

#[pyfunction]
fn brute_force_solve(config: &PyConfig, bids: Vec<PyBid>) -> PyResult<PyAllocation> {
    let inst = instance(config, bids)?;
    Ok(medr::brute_force_solve(&inst).map_err(to_py)?.into())
}

#[pyfunction]
#[pyo3(signature = (config, bids, algorithm = "fptas"))]
fn allocate(config: &PyConfig, bids: Vec<PyBid>, algorithm: &str) -> PyResult<PyAllocation> {
    let inst = instance(config, bids)?;
    let tag = self::algorithm(algorithm)?;
    Ok(tag.allocate(&inst).map_err(to_py)?.into())
}

#[pyfunction]
#[pyo3(signature = (config, bids, algorithm = "fptas"))]
fn run_mechanism(
    py: Python<'_>,
    config: &PyConfig,
    bids: Vec<PyBid>,
    algorithm: &str,
) -> PyResult<PyOutcome> {
    let inst = instance(config, bids)?;
    let tag = self::algorithm(algorithm)?;
    let inner = py
        .detach(|| medr::run_mechanism(&inst, &tag))
        .map_err(to_py)?;
    Ok(PyOutcome { inner })
}

#[pyfunction]
#[pyo3(signature = (config, bids, tenant_id, algorithm = "fptas"))]
fn critical_payment(
    config: &PyConfig,
    bids: Vec<PyBid>,
    tenant_id: &str,
    algorithm: &str,
) -> PyResult<i64> {
    let inst = instance(config, bids)?;
    let tag = self::algorithm(algorithm)?;
    medr::critical_payment(&inst, &tenant_id.into(), &tag).map_err(to_py)
}

/// Published bids and configuration for one EDR hour.
#[pyfunction]
#[pyo3(signature = (hour, alpha = None, gamma = None, epsilon = None))]
fn published_instance(
    hour: u32,
    alpha: Option<&Bound<'_, PyAny>>,
    gamma: Option<&Bound<'_, PyAny>>,
    epsilon: Option<&Bound<'_, PyAny>>,
) -> PyResult<(PyConfig, Vec<PyBid>)> {
    let row = dataset::calendar_row(hour)
        .ok_or_else(|| PyValueError::new_err(format!("no EDR event at hour {hour}")))?;
    let config = PyConfig::new(row.target, alpha, gamma, epsilon)?;
    let bids = dataset::published_bids(hour).expect("every calendar hour has bids");
    Ok((config, bids.iter().map(Into::into).collect()))
}

#[pyfunction]
#[pyo3(signature = (hour, seed, random_ratios = false))]
fn generate_bids(hour: u32, seed: u64, random_ratios: bool) -> PyResult<Vec<PyBid>> {
    let row = dataset::calendar_row(hour)
        .ok_or_else(|| PyValueError::new_err(format!("no EDR event at hour {hour}")))?;
    let params = if random_ratios {
        dataset::GenerationParams::random_ratios(seed)
    } else {
        dataset::GenerationParams::published(seed)
    };
    Ok(dataset::generate_instance(&row, &params)
        .bids
        .iter()
        .map(Into::into)
        .collect())
}

#[pyfunction]
fn read_bids(path: &str) -> PyResult<Vec<PyBid>> {
    Ok(dataset::load_bids(path)
        .map_err(to_py)?
        .iter()
        .map(Into::into)
        .collect())
}

/// Ratio sweep over `"alpha"`, `"gamma"` or `"epsilon"`, as CSV text.
#[pyfunction]
fn sweep_csv(py: Python<'_>, axis: &str) -> PyResult<String> {
    let axis: SweepAxis = axis.parse().map_err(PyValueError::new_err)?;
    let records = py.detach(|| harness::sweep(axis)).map_err(to_py)?;
    Ok(harness::ratio_csv(&records))
}

#[pymodule]
#[pyo3(name = "medr")]
pub fn medr_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBid>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyAllocation>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(dopt_solve, m)?)?;
    m.add_function(wrap_pyfunction!(fptas_solve, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_solve, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(run_mechanism, m)?)?;
    m.add_function(wrap_pyfunction!(critical_payment, m)?)?;
    m.add_function(wrap_pyfunction!(published_instance, m)?)?;
    m.add_function(wrap_pyfunction!(generate_bids, m)?)?;
    m.add_function(wrap_pyfunction!(read_bids, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    Ok(())
}
