//! Replay recipes for keys and ciphertexts stored between runs.
//!
//! Quantum states never leave the process, so a ciphertext file records how
//! its state came about: the keygen parameters and seed, the input preset
//! and encryption seed, and the circuit and seed of every evaluation.
//! Loading a file replays the recipe and checks the replayed classical part
//! against the stored one.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical_he::HeScheme;
use crate::error::{QheError, Result};
use crate::quantum::{fidelity, Gate, StateVector};
use crate::tp::{
    decrypt, encrypt, eval, keygen, DecryptStats, EvalOptions, EvalReport, GadgetBackend, GadgetSource, QCiphertext,
    QCiphertextClassical, QuantumCircuit, TPKeyBundle,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeygenParams {
    pub scheme: HeScheme,
    pub kappa: usize,
    pub levels: usize,
    pub source: GadgetSource,
    pub seed: u64,
}

impl KeygenParams {
    pub fn run(&self) -> Result<TPKeyBundle> {
        keygen(self.scheme, self.kappa, self.levels, self.source, &mut rng(self.seed))
    }
}

/// Payload of a `bundle` document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleDoc {
    pub params: KeygenParams,
    pub gadget_count: usize,
    pub gadget_qubits: usize,
    pub bundle: TPKeyBundle,
}

fn same_json<T: Serialize>(x: &T, y: &T) -> Result<bool> {
    let v = |t: &T| serde_json::to_value(t).map_err(|e| QheError::Document(e.to_string()));
    Ok(v(x)? == v(y)?)
}

impl BundleDoc {
    pub fn generate(params: KeygenParams) -> Result<(Self, TPKeyBundle)> {
        let bundle = params.run()?;
        let doc = BundleDoc {
            params,
            gadget_count: bundle.gadget_count(),
            gadget_qubits: bundle.gadget_qubits(),
            bundle: bundle.clone(),
        };
        Ok((doc, bundle))
    }

    /// Regenerates the bundle with its gadget states and checks it against
    /// the stored classical part.
    pub fn load(&self) -> Result<TPKeyBundle> {
        let bundle = self.params.run()?;
        if !same_json(&bundle, &self.bundle)? {
            return Err(QheError::Document("bundle does not match its keygen parameters".into()));
        }
        Ok(bundle)
    }
}

/// Named input states for encryption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatePreset {
    /// `|0…0⟩`
    Zero,
    /// `|+…+⟩`
    Plus,
    /// Haar-random, drawn from the encryption seed.
    Random,
}

impl fmt::Display for StatePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatePreset::Zero => "zero",
            StatePreset::Plus => "plus",
            StatePreset::Random => "random",
        })
    }
}

impl FromStr for StatePreset {
    type Err = QheError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(StatePreset::Zero),
            "plus" | "+" => Ok(StatePreset::Plus),
            "random" | "seeded-random" => Ok(StatePreset::Random),
            _ => Err(QheError::Parse { line: 0, message: format!("unknown state preset '{s}' (zero, plus, random)") }),
        }
    }
}

impl StatePreset {
    pub fn state(self, num_wires: usize, seed: u64) -> Result<StateVector> {
        match self {
            StatePreset::Zero => StateVector::new(num_wires, seed),
            StatePreset::Plus => {
                let mut sv = StateVector::new(num_wires, seed)?;
                for w in 0..num_wires {
                    sv.apply_gate(Gate::H, w)?;
                }
                Ok(sv)
            }
            StatePreset::Random => {
                // Offset so the amplitudes and the measurement stream differ.
                StateVector::random(num_wires, &mut rng(seed ^ 0x5eed), seed)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStep {
    /// Circuit in the one-gate-per-line text format.
    pub circuit: String,
    pub circuit_privacy: bool,
    pub backend: GadgetBackend,
    pub seed: u64,
}

impl EvalStep {
    fn options(&self) -> EvalOptions {
        EvalOptions { circuit_privacy: self.circuit_privacy, backend: self.backend, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub keygen: KeygenParams,
    pub preset: StatePreset,
    pub num_wires: usize,
    pub enc_seed: u64,
    pub evals: Vec<EvalStep>,
}

/// In-memory state rebuilt from a [`Session`].
#[derive(Clone, Debug)]
pub struct Replay {
    pub bundle: TPKeyBundle,
    pub ciphertext: QCiphertext,
    pub reports: Vec<EvalReport>,
}

impl Replay {
    pub fn decrypt(&self) -> Result<(StateVector, DecryptStats)> {
        decrypt(&self.bundle, &self.ciphertext)
    }

    /// Applies `step` and records it. Wire count must match.
    fn apply(&mut self, step: &EvalStep) -> Result<EvalReport> {
        let circuit = QuantumCircuit::from_text(&step.circuit, self.ciphertext.num_wires())?;
        let qct = self.ciphertext.clone();
        let (out, report) = eval(&mut self.bundle, &circuit, qct, &step.options(), &mut rng(step.seed))?;
        self.ciphertext = out;
        self.reports.push(report.clone());
        Ok(report)
    }
}

impl Session {
    pub fn replay(&self) -> Result<Replay> {
        let bundle = self.keygen.run()?;
        let state = self.preset.state(self.num_wires, self.enc_seed)?;
        let ciphertext = encrypt(&bundle, state, &mut rng(self.enc_seed))?;
        let mut r = Replay { bundle, ciphertext, reports: Vec::new() };
        for step in &self.evals {
            r.apply(step)?;
        }
        Ok(r)
    }

    /// The preset state with every evaluated circuit applied in the clear.
    pub fn expected_plaintext(&self) -> Result<StateVector> {
        let mut sv = self.preset.state(self.num_wires, self.enc_seed)?;
        for step in &self.evals {
            QuantumCircuit::from_text(&step.circuit, self.num_wires)?.apply_plain(&mut sv)?;
        }
        Ok(sv)
    }
}

/// Payload of a `qciphertext` document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiphertextDoc {
    pub session: Session,
    pub ciphertext: QCiphertextClassical,
    pub reports: Vec<EvalReport>,
}

impl CiphertextDoc {
    pub fn encrypt(bundle: &BundleDoc, preset: StatePreset, num_wires: usize, seed: u64) -> Result<(Self, Replay)> {
        bundle.load()?;
        let session = Session { keygen: bundle.params, preset, num_wires, enc_seed: seed, evals: Vec::new() };
        let r = session.replay()?;
        let doc = CiphertextDoc { session, ciphertext: r.ciphertext.classical(), reports: Vec::new() };
        Ok((doc, r))
    }

    /// Replays the session and checks the result against the stored keys.
    pub fn load(&self) -> Result<Replay> {
        let r = self.session.replay()?;
        if r.ciphertext.classical() != self.ciphertext {
            return Err(QheError::Document("ciphertext does not match its session".into()));
        }
        Ok(r)
    }

    /// Evaluates one more circuit on the ciphertext.
    pub fn eval(&self, step: EvalStep) -> Result<(Self, Replay, EvalReport)> {
        let mut r = self.load()?;
        let report = r.apply(&step)?;
        let mut session = self.session.clone();
        session.evals.push(step);
        let doc = CiphertextDoc { session, ciphertext: r.ciphertext.classical(), reports: r.reports.clone() };
        Ok((doc, r, report))
    }

    /// Decrypts, first recrypting to the final key if no evaluation did.
    /// Returns the plaintext, its fidelity to the expected state and the
    /// decryption cost.
    pub fn decrypt(&self, seed: u64) -> Result<(StateVector, f64, DecryptStats)> {
        let mut doc = self.clone();
        if self.ciphertext.key_index != self.session.keygen.levels {
            let step = EvalStep { circuit: String::new(), circuit_privacy: false, backend: GadgetBackend::Auto, seed };
            doc = self.eval(step)?.0;
        }
        let r = doc.load()?;
        let (plain, stats) = r.decrypt()?;
        let f = fidelity(&plain, &doc.session.expected_plaintext()?)?;
        Ok((plain, f, stats))
    }
}
