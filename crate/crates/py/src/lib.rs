//! Python bindings: key generation, encryption, homomorphic evaluation of
//! Clifford+T circuits, decryption, and the worked examples.
//!
//! States cross the boundary as lists of complex amplitudes in little-endian
//! qubit order.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qhe_lab_core::acceptance::{self, DEFAULT_SEED};
use qhe_lab_core::bench as core_bench;
use qhe_lab_core::classical_he::HeScheme;
use qhe_lab_core::demo;
use qhe_lab_core::doc::{read_document, write_document, DocKind};
use qhe_lab_core::gardenhose::GHProtocol;
use qhe_lab_core::quantum::{fidelity_amplitudes, StateVector};
use qhe_lab_core::session::{BundleDoc, KeygenParams};
use qhe_lab_core::tp::{self, EvalOptions, GadgetBackend, GadgetSource, QuantumCircuit};
use qhe_lab_core::QheError as CoreError;

create_exception!(qhe_lab, QheError, PyException, "Error raised by the simulator.");

fn py_err(e: CoreError) -> PyErr {
    QheError::new_err(e.to_string())
}

fn parsed<T: std::str::FromStr<Err = CoreError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Keys for `levels` T gates. Gadget states live only in this object.
#[pyclass(name = "KeyBundle", module = "qhe_lab")]
struct PyKeyBundle {
    params: KeygenParams,
    inner: tp::TPKeyBundle,
}

#[pymethods]
impl PyKeyBundle {
    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels
    }

    #[getter]
    fn gadget_count(&self) -> usize {
        self.inner.gadget_count()
    }

    #[getter]
    fn remaining_gadgets(&self) -> usize {
        self.inner.remaining_gadgets()
    }

    #[getter]
    fn gadget_qubits(&self) -> usize {
        self.inner.gadget_qubits()
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme.to_string()
    }

    #[getter]
    fn source(&self) -> String {
        self.inner.source.to_string()
    }

    /// The bundle as a versioned JSON document, as written by `qhe-lab keygen`.
    fn to_json(&self) -> PyResult<String> {
        let (doc, _) = BundleDoc::generate(self.params).map_err(py_err)?;
        write_document(DocKind::Bundle, &doc).map_err(py_err)
    }

    /// Rebuilds a bundle from a document by replaying its keygen.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: BundleDoc = read_document(DocKind::Bundle, text).map_err(py_err)?;
        let inner = doc.load().map_err(py_err)?;
        Ok(PyKeyBundle { params: doc.params, inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "KeyBundle(levels={}, scheme='{}', source='{}', remaining_gadgets={})",
            self.inner.levels,
            self.inner.scheme,
            self.inner.source,
            self.inner.remaining_gadgets()
        )
    }
}

#[pyclass(name = "QCiphertext", module = "qhe_lab")]
struct PyQCiphertext {
    inner: tp::QCiphertext,
}

#[pymethods]
impl PyQCiphertext {
    #[getter]
    fn num_wires(&self) -> usize {
        self.inner.num_wires()
    }

    #[getter]
    fn key_index(&self) -> usize {
        self.inner.key_index
    }

    /// The padded state as an outside observer would hold it.
    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.state.amplitudes().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("QCiphertext(num_wires={}, key_index={})", self.inner.num_wires(), self.inner.key_index)
    }
}

#[pyclass(name = "EvalReport", module = "qhe_lab", get_all)]
struct PyEvalReport {
    gadgets_consumed: usize,
    recryptions_performed: usize,
    he_eval_node_count: usize,
    dec_op_count_estimate: usize,
    t_count: usize,
    final_key_index: usize,
    symbolic_gadgets: usize,
}

impl From<tp::EvalReport> for PyEvalReport {
    fn from(r: tp::EvalReport) -> Self {
        PyEvalReport {
            gadgets_consumed: r.gadgets_consumed,
            recryptions_performed: r.recryptions_performed,
            he_eval_node_count: r.he_eval_node_count,
            dec_op_count_estimate: r.dec_op_count_estimate,
            t_count: r.t_count,
            final_key_index: r.final_key_index,
            symbolic_gadgets: r.symbolic_gadgets,
        }
    }
}

#[pymethods]
impl PyEvalReport {
    fn __repr__(&self) -> String {
        format!(
            "EvalReport(t_count={}, gadgets_consumed={}, recryptions_performed={}, final_key_index={})",
            self.t_count, self.gadgets_consumed, self.recryptions_performed, self.final_key_index
        )
    }
}

fn state(amplitudes: Vec<Complex64>, seed: u64) -> PyResult<StateVector> {
    StateVector::from_amplitudes(amplitudes, seed).map_err(py_err)
}

/// Generates keys with one gadget per level.
#[pyfunction]
#[pyo3(signature = (levels, scheme = "transparent", kappa = 8, source = "toy-gh", seed = DEFAULT_SEED))]
fn keygen(levels: usize, scheme: &str, kappa: usize, source: &str, seed: u64) -> PyResult<PyKeyBundle> {
    let params = KeygenParams { scheme: parsed::<HeScheme>(scheme)?, kappa, levels, source: parsed(source)?, seed };
    let inner = params.run().map_err(py_err)?;
    Ok(PyKeyBundle { params, inner })
}

/// Pads a normalized state with fresh keys under the first keyset.
#[pyfunction]
#[pyo3(signature = (bundle, amplitudes, seed = DEFAULT_SEED))]
fn encrypt(bundle: &PyKeyBundle, amplitudes: Vec<Complex64>, seed: u64) -> PyResult<PyQCiphertext> {
    let sv = state(amplitudes, seed)?;
    let inner = tp::encrypt(&bundle.inner, sv, &mut rng(seed)).map_err(py_err)?;
    Ok(PyQCiphertext { inner })
}

/// Evaluates a circuit given in text form, one gate per line.
#[pyfunction]
#[pyo3(signature = (bundle, circuit, ciphertext, circuit_privacy = false, backend = "auto", seed = DEFAULT_SEED))]
fn evaluate(
    mut bundle: PyRefMut<'_, PyKeyBundle>,
    circuit: &str,
    ciphertext: &PyQCiphertext,
    circuit_privacy: bool,
    backend: &str,
    seed: u64,
) -> PyResult<(PyQCiphertext, PyEvalReport)> {
    let c = QuantumCircuit::from_text(circuit, ciphertext.inner.num_wires()).map_err(py_err)?;
    let options = EvalOptions { circuit_privacy, backend: parsed::<GadgetBackend>(backend)?, ..Default::default() };
    let (inner, report) =
        tp::eval(&mut bundle.inner, &c, ciphertext.inner.clone(), &options, &mut rng(seed)).map_err(py_err)?;
    Ok((PyQCiphertext { inner }, report.into()))
}

/// Removes the pad; the ciphertext must be under the last keyset.
#[pyfunction]
fn decrypt(bundle: &PyKeyBundle, ciphertext: &PyQCiphertext) -> PyResult<Vec<Complex64>> {
    let (sv, _) = tp::decrypt(&bundle.inner, &ciphertext.inner).map_err(py_err)?;
    Ok(sv.amplitudes().to_vec())
}

/// Applies a circuit in the clear.
#[pyfunction]
fn simulate(circuit: &str, amplitudes: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let mut sv = state(amplitudes, 0)?;
    let c = QuantumCircuit::from_text(circuit, sv.num_qubits()).map_err(py_err)?;
    c.apply_plain(&mut sv).map_err(py_err)?;
    Ok(sv.amplitudes().to_vec())
}

/// Haar-random `n`-qubit state.
#[pyfunction]
#[pyo3(signature = (num_qubits, seed = DEFAULT_SEED))]
fn random_state(num_qubits: usize, seed: u64) -> PyResult<Vec<Complex64>> {
    let sv = StateVector::random(num_qubits, &mut rng(seed), seed).map_err(py_err)?;
    Ok(sv.amplitudes().to_vec())
}

/// `|⟨a|b⟩|²`.
#[pyfunction]
fn fidelity(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<f64> {
    fidelity_amplitudes(&a, &b).map_err(py_err)
}

#[pyfunction]
fn t_count(circuit: &str, num_wires: usize) -> PyResult<usize> {
    Ok(QuantumCircuit::from_text(circuit, num_wires).map_err(py_err)?.t_count())
}

/// Runs `toy`, `barrington-or` or `bv-chain`; returns (transcript, passed).
#[pyfunction]
#[pyo3(signature = (name, seed = DEFAULT_SEED))]
fn run_demo(name: &str, seed: u64) -> PyResult<(String, bool)> {
    let d = demo::run_demo(name, seed).map_err(py_err)?;
    Ok((d.transcript, d.passed))
}

/// Water path through the TOY decryption protocol.
#[pyfunction]
fn gh_eval(alice: usize, bob: usize) -> PyResult<(String, bool)> {
    let p = GHProtocol::toy_dec();
    let flow = p.eval_flow(alice, bob).map_err(py_err)?;
    Ok((flow.render(), flow.output(&p)))
}

/// `(L, qubits per gadget, total qubits, keygen ms, key-update nodes)`
type BenchTuple = (usize, usize, usize, f64, usize);

/// One row per level count.
#[pyfunction]
#[pyo3(name = "bench", signature = (levels, source = "or-example", seed = DEFAULT_SEED))]
fn bench_levels(levels: Vec<usize>, source: &str, seed: u64) -> PyResult<Vec<BenchTuple>> {
    let rows =
        core_bench::bench(HeScheme::Transparent, 8, parsed::<GadgetSource>(source)?, &levels, seed).map_err(py_err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.levels, r.qubits_per_gadget, r.total_qubits, r.keygen_ms, r.key_update_nodes))
        .collect())
}

/// Acceptance criteria as `(id, name, passed, detail)`.
#[pyfunction]
#[pyo3(signature = (criterion = None, seed = DEFAULT_SEED))]
fn selftest(criterion: Option<usize>, seed: u64) -> PyResult<Vec<(usize, String, bool, String)>> {
    let results = match criterion {
        Some(id) => {
            vec![acceptance::run_criterion(id, seed).ok_or_else(|| QheError::new_err(format!("no criterion {id}")))?]
        }
        None => acceptance::run_all(seed),
    };
    Ok(results.into_iter().map(|r| (r.id, r.name.to_string(), r.passed, r.detail)).collect())
}

#[pymodule]
pub fn qhe_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QheError", m.py().get_type::<QheError>())?;
    m.add_class::<PyKeyBundle>()?;
    m.add_class::<PyQCiphertext>()?;
    m.add_class::<PyEvalReport>()?;
    m.add_function(wrap_pyfunction!(keygen, m)?)?;
    m.add_function(wrap_pyfunction!(encrypt, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(decrypt, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(random_state, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(t_count, m)?)?;
    m.add_function(wrap_pyfunction!(run_demo, m)?)?;
    m.add_function(wrap_pyfunction!(gh_eval, m)?)?;
    m.add_function(wrap_pyfunction!(bench_levels, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
