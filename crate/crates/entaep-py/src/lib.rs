//! Python bindings: the multipartite state, measure, and protocol types
//! plus the entropy, smoothing, and monotonicity entry points. All errors
//! surface as ValueError carrying the library's message.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use entaep::entropy::{self, Distribution};
use entaep::locc::{self, ConditionallyPureState, OneStepChannel};
use entaep::measures::{self, MeasureSpec};
use entaep::random::{random_state, rng_from_seed};
use entaep::serial;
use entaep::smoothing::{self, OptConfig};
use entaep::tensor::{self, Bipartition, MultipartiteState};

fn err(e: entaep::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A pure state of k parties with flat row-major amplitudes.
#[pyclass(frozen)]
struct State {
    inner: MultipartiteState,
}

#[pymethods]
impl State {
    /// State(dims, amps): amps has product(dims) complex entries and unit norm.
    #[new]
    fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> PyResult<Self> {
        let inner = MultipartiteState::new(dims, amps).map_err(err)?;
        inner.require_unit().map_err(err)?;
        Ok(Self { inner })
    }

    /// The k-party GHZ state of local rank r.
    #[staticmethod]
    fn ghz(k: usize, r: usize) -> PyResult<Self> {
        Ok(Self {
            inner: tensor::ghz(k, r).map_err(err)?,
        })
    }

    /// Haar-random unit vector, deterministic per seed.
    #[staticmethod]
    fn random(dims: Vec<usize>, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        Self {
            inner: random_state(&dims, &mut rng),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serial::state_from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serial::state_to_json(&self.inner)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    fn num_parties(&self) -> usize {
        self.inner.num_parties()
    }

    fn amps(&self) -> Vec<Complex64> {
        self.inner.amps().to_vec()
    }

    /// Factor-wise product: party j of the result is the pair of party-j
    /// systems, so party counts must match.
    fn tensor(&self, other: &State) -> PyResult<State> {
        Ok(State {
            inner: tensor::tensor_product(&self.inner, &other.inner).map_err(err)?,
        })
    }

    fn tensor_power(&self, n: usize) -> PyResult<State> {
        Ok(State {
            inner: self.inner.tensor_power(n).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("State(dims={:?})", self.inner.dims())
    }
}

/// A weighted family of marginal entropies defining the measure.
#[pyclass(frozen)]
struct Measure {
    inner: MeasureSpec,
}

#[pymethods]
impl Measure {
    /// Single-party cuts: terms are (party, weight, alpha) with the
    /// weights summing to 1 and each alpha in [0, 1].
    #[staticmethod]
    fn renyi(terms: Vec<(usize, f64, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: MeasureSpec::weighted_marginal_renyi(terms).map_err(err)?,
        })
    }

    /// General cuts at Shannon order: terms are (parties, weight).
    #[staticmethod]
    fn shannon_general(terms: Vec<(Vec<usize>, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: MeasureSpec::weighted_marginal_shannon_general(terms).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serial::measure_from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serial::measure_to_json(&self.inner)
    }
}

/// A finite LOCC protocol: a list of one-step local instruments whose
/// Kraus maps are conditioned on the classical register so far.
#[pyclass(frozen)]
struct Protocol {
    inner: Vec<OneStepChannel>,
}

#[pymethods]
impl Protocol {
    /// Random square trace-preserving protocol, deterministic per seed.
    #[staticmethod]
    fn random(dims: Vec<usize>, steps: usize, branches: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: locc::random_protocol(&dims, steps, branches, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serial::protocol_from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        serial::protocol_to_json(&self.inner)
    }

    fn num_steps(&self) -> usize {
        self.inner.len()
    }

    /// Runs the protocol on psi and returns the outcome ensemble as
    /// (weight, label, state) triples.
    fn apply(&self, psi: &State) -> PyResult<Vec<(f64, usize, State)>> {
        let out = locc::compose_and_discard(&self.inner, &psi.inner).map_err(err)?;
        Ok(branches_of(&out))
    }
}

fn branches_of(rho: &ConditionallyPureState) -> Vec<(f64, usize, State)> {
    rho.branches()
        .iter()
        .map(|b| {
            (
                b.weight,
                b.label,
                State {
                    inner: b.state.clone(),
                },
            )
        })
        .collect()
}

/// Shannon entropy in bits of the normalized weight vector.
#[pyfunction]
fn shannon_entropy(weights: Vec<f64>) -> PyResult<f64> {
    let p = Distribution::normalized(weights).map_err(err)?;
    entropy::shannon(&p).map_err(err)
}

/// Rényi entropy of order alpha (0, 1, and inf included) in bits.
#[pyfunction]
fn renyi_entropy(weights: Vec<f64>, alpha: f64) -> PyResult<f64> {
    let p = Distribution::normalized(weights).map_err(err)?;
    entropy::renyi(&p, alpha).map_err(err)
}

/// Rényi entropy of the marginal on the given parties.
#[pyfunction]
fn marginal_entropy(psi: &State, parties: Vec<usize>, alpha: f64) -> PyResult<f64> {
    let b = Bipartition::new(&parties, psi.inner.num_parties()).map_err(err)?;
    entropy::marginal_entropy(&psi.inner, &b, alpha).map_err(err)
}

/// The measure at psi.
#[pyfunction]
fn evaluate(measure: &Measure, psi: &State) -> PyResult<f64> {
    measures::evaluate(&measure.inner, &psi.inner).map_err(err)
}

/// Squared overlap |<psi|phi>|^2.
#[pyfunction]
fn fidelity_sq(psi: &State, phi: &State) -> PyResult<f64> {
    tensor::fidelity_sq(&psi.inner, &phi.inner).map_err(err)
}

/// Trace distance sqrt(1 - |<psi|phi>|^2) between pure states.
#[pyfunction]
fn trace_distance_pure(psi: &State, phi: &State) -> PyResult<f64> {
    tensor::trace_distance_pure(&psi.inner, &phi.inner).map_err(err)
}

/// Coefficients (a, b) of the continuity envelope a(delta)·log2(dim) +
/// b(delta) for k-party measures; both vanish at delta = 0.
#[pyfunction]
fn continuity_bound(k: usize, delta: f64) -> PyResult<(f64, f64)> {
    let cb = measures::continuity_bound(k, delta).map_err(err)?;
    Ok((cb.a, cb.b))
}

/// |E(psi x phi) - E(psi) - E(phi)|.
#[pyfunction]
fn check_additivity(measure: &Measure, psi: &State, phi: &State) -> PyResult<f64> {
    measures::check_additivity(&measure.inner, &psi.inner, &phi.inner).map_err(err)
}

/// Residual of the direct-sum mixing identity at weight p (Shannon orders).
#[pyfunction]
fn check_direct_sum_identity(measure: &Measure, psi: &State, phi: &State, p: f64) -> PyResult<f64> {
    measures::check_direct_sum_identity(&measure.inner, &psi.inner, &phi.inner, p).map_err(err)
}

/// E(psi) minus the protocol's expected E over outcomes; nonnegative up
/// to tolerance for Shannon-order measures.
#[pyfunction]
fn monotone_avg_check(measure: &Measure, psi: &State, protocol: &Protocol) -> PyResult<f64> {
    locc::monotone_avg_check(&measure.inner, &psi.inner, &protocol.inner).map_err(err)
}

/// Regularized smoothed max-entropy rate (1/n)·H0^eps(P^n) via exact
/// type-class counting.
#[pyfunction]
fn regularized_smooth_h0(weights: Vec<f64>, epsilon: f64, n: usize) -> PyResult<f64> {
    let p = Distribution::normalized(weights).map_err(err)?;
    smoothing::regularized_smooth_h0(&p, epsilon, n).map_err(err)
}

/// Certified upper bound on the eps-smoothed measure at psi: returns
/// (value, certificate) where the certificate is the witness's squared
/// overlap with psi, at least 1 - eps.
#[pyfunction]
#[pyo3(signature = (measure, psi, epsilon, seed = 0))]
fn smooth_estimate(
    measure: &Measure,
    psi: &State,
    epsilon: f64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let opt = OptConfig {
        seed,
        ..OptConfig::default()
    };
    let res =
        smoothing::smooth_infimum_estimate(&measure.inner, &psi.inner, epsilon, &opt).map_err(err)?;
    Ok((res.value, res.certificate))
}

/// Per-copy smoothed estimates at psi^n for each n. Returns
/// (analytic_limit, rows) with rows of (n, value, certificate, gap,
/// rank_bounds); rank_bounds are decimal strings, one per cut, empty when
/// the spectral candidate did not apply.
#[pyfunction]
fn phi_estimate(
    measure: &Measure,
    psi: &State,
    epsilon: f64,
    ns: Vec<usize>,
) -> PyResult<(f64, Vec<(usize, f64, f64, f64, Vec<String>)>)> {
    let est = smoothing::phi_estimate(&measure.inner, &psi.inner, epsilon, &ns).map_err(err)?;
    let rows = est
        .rows
        .into_iter()
        .map(|r| {
            (
                r.n,
                r.value,
                r.certificate,
                r.gap,
                r.rank_bounds.iter().map(|b| b.to_string()).collect(),
            )
        })
        .collect();
    Ok((est.analytic_limit, rows))
}

#[pymodule]
fn entaep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<State>()?;
    m.add_class::<Measure>()?;
    m.add_class::<Protocol>()?;
    m.add_function(wrap_pyfunction!(shannon_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(renyi_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_sq, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance_pure, m)?)?;
    m.add_function(wrap_pyfunction!(continuity_bound, m)?)?;
    m.add_function(wrap_pyfunction!(check_additivity, m)?)?;
    m.add_function(wrap_pyfunction!(check_direct_sum_identity, m)?)?;
    m.add_function(wrap_pyfunction!(monotone_avg_check, m)?)?;
    m.add_function(wrap_pyfunction!(regularized_smooth_h0, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(phi_estimate, m)?)?;
    Ok(())
}
