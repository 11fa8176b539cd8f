//! The teleportation-gadget scheme: key generation with one correction
//! gadget per T gate, one-time-pad encryption, gate-by-gate evaluation with
//! recryption after every T gate, and decryption.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::barrington::{compile, BranchingProgram};
use crate::classical_he::{decryption_spec, recrypt, DecryptionSpec, HECiphertext, HEKeySet, HeScheme};
use crate::error::{QheError, Result};
use crate::funcexpr::FuncExpr;
use crate::gadget::{
    bp_gadget, bp_plan, consume, encrypt_gadget_info, gh_gadget, gh_plan, instantiate, key_update_homomorphic,
    symbolic_consume, ClassicalGadgetInfo, GadgetMasks, GadgetSpec, MeasurementPlan,
};
use crate::gardenhose::GHProtocol;
use crate::quantum::{BellOutcome, Gate, Mat2, StateVector};

/// Where the correction gadgets come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GadgetSource {
    /// The doubled two-pipe garden-hose protocol for `sk ⊕ ct`.
    ToyGh,
    /// Branching program compiled from the scheme's decryption circuit.
    Bp,
    /// The four-instruction OR program. It does not decrypt anything, so
    /// bundles built from it are for size measurements only.
    OrExample,
}

impl fmt::Display for GadgetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GadgetSource::ToyGh => "toy-gh",
            GadgetSource::Bp => "bp",
            GadgetSource::OrExample => "or-example",
        })
    }
}

impl FromStr for GadgetSource {
    type Err = QheError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy-gh" => Ok(GadgetSource::ToyGh),
            "bp" => Ok(GadgetSource::Bp),
            "or-example" => Ok(GadgetSource::OrExample),
            _ => Err(QheError::Parse { line: 0, message: format!("unknown gadget source '{s}'") }),
        }
    }
}

/// How gadgets are materialized when consumed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GadgetBackend {
    /// Append the gadget's qubits to the register and Bell-measure them.
    StateVector,
    /// Track EPR pairs symbolically and apply the resulting 2×2 operator
    /// to the wire.
    Symbolic,
    /// Statevector when the qubits fit under the register cap.
    #[default]
    Auto,
}

impl fmt::Display for GadgetBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GadgetBackend::StateVector => "statevector",
            GadgetBackend::Symbolic => "symbolic",
            GadgetBackend::Auto => "auto",
        })
    }
}

impl FromStr for GadgetBackend {
    type Err = QheError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(GadgetBackend::StateVector),
            "symbolic" => Ok(GadgetBackend::Symbolic),
            "auto" => Ok(GadgetBackend::Auto),
            _ => Err(QheError::Parse { line: 0, message: format!("unknown backend '{s}'") }),
        }
    }
}

/// Public description of the decryption function the gadgets implement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decoder {
    GardenHose(GHProtocol),
    Program { program: BranchingProgram, decrypts: bool },
}

impl Decoder {
    fn for_source(scheme: HeScheme, source: GadgetSource) -> Result<Self> {
        let circuit = match decryption_spec(scheme) {
            DecryptionSpec::Boolean(c) => c,
            DecryptionSpec::Arithmetic { .. } => {
                return Err(QheError::UnsupportedOperation(format!("{scheme} has no boolean decryption circuit")))
            }
        };
        match source {
            GadgetSource::ToyGh => {
                let protocol = GHProtocol::toy_dec();
                // The protocol reads one bit per side; it must agree with
                // the decryption circuit on the first key and ciphertext bit.
                let mut ct = vec![false; circuit.num_ct_bits()];
                for sk in 0..2 {
                    for c in 0..2 {
                        ct[0] = c == 1;
                        let flow = protocol.eval_flow(sk, c)?.output(&protocol);
                        if circuit.num_sk_bits() != 1 || flow != circuit.eval(&[sk == 1], &ct)? {
                            return Err(QheError::Precondition(format!(
                                "the toy garden-hose protocol does not compute {scheme} decryption"
                            )));
                        }
                    }
                }
                Ok(Decoder::GardenHose(protocol))
            }
            GadgetSource::Bp => Ok(Decoder::Program { program: compile(&circuit).alternate(), decrypts: true }),
            GadgetSource::OrExample => {
                Ok(Decoder::Program { program: BranchingProgram::or_example().alternate(), decrypts: false })
            }
        }
    }

    pub fn decrypts(&self) -> bool {
        match self {
            Decoder::GardenHose(_) => true,
            Decoder::Program { decrypts, .. } => *decrypts,
        }
    }

    pub fn gadget(&self, sk_bits: &[bool]) -> Result<GadgetSpec> {
        match self {
            Decoder::GardenHose(p) => gh_gadget(p, first_bit(sk_bits)?),
            Decoder::Program { program, .. } => bp_gadget(sk_bits, program),
        }
    }

    pub fn plan(&self, ct_bits: &[bool]) -> Result<MeasurementPlan> {
        match self {
            Decoder::GardenHose(p) => gh_plan(p, first_bit(ct_bits)?),
            Decoder::Program { program, .. } => bp_plan(ct_bits, program),
        }
    }

    /// Upper bound on the pairs the qubit crosses: one per layer for
    /// branching-program gadgets.
    fn path_bound(&self, m: usize) -> usize {
        match self {
            Decoder::GardenHose(_) => m,
            Decoder::Program { program, .. } => program.len(),
        }
    }
}

fn first_bit(bits: &[bool]) -> Result<usize> {
    bits.first().map(|&b| b as usize).ok_or_else(|| QheError::DimensionMismatch("empty bit string".into()))
}

/// The quantum part of a gadget: it is prepared as `γ_{x,z}(spec)` when
/// consumed and never leaves the process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetInstance {
    pub spec: GadgetSpec,
    pub masks: GadgetMasks,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleGadget {
    pub index: usize,
    /// Encrypted under keyset `index + 1`.
    pub info: ClassicalGadgetInfo,
    pub consumed: bool,
    #[serde(skip)]
    instance: Option<GadgetInstance>,
}

impl BundleGadget {
    pub fn instance(&self) -> Option<&GadgetInstance> {
        self.instance.as_ref()
    }

    pub fn num_qubits(&self) -> usize {
        2 * self.info.m
    }
}

/// Keys for `levels` T gates: `levels + 1` classical keysets, one gadget
/// per level and the secret-key chain for recryption.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TPKeyBundle {
    pub scheme: HeScheme,
    pub kappa: usize,
    pub levels: usize,
    pub source: GadgetSource,
    pub decoder: Decoder,
    pub keysets: Vec<HEKeySet>,
    pub gadgets: Vec<BundleGadget>,
    /// Entry `i` is `sk_i` encrypted bitwise under keyset `i + 1`.
    pub enc_sk_chain: Vec<Vec<HECiphertext>>,
}

pub fn keygen<R: Rng + ?Sized>(
    scheme: HeScheme,
    kappa: usize,
    levels: usize,
    source: GadgetSource,
    rng: &mut R,
) -> Result<TPKeyBundle> {
    let decoder = Decoder::for_source(scheme, source)?;
    let keysets = (0..=levels).map(|i| HEKeySet::generate(scheme, kappa, i, rng)).collect::<Result<Vec<_>>>()?;
    let mut gadgets = Vec::with_capacity(levels);
    let mut enc_sk_chain = Vec::with_capacity(levels);
    for i in 0..levels {
        let (sk, next) = (&keysets[i], &keysets[i + 1]);
        let mut spec = decoder.gadget(&sk.sk)?;
        spec.sk_keyset_index = i;
        spec.classical_key_index = i + 1;
        let masks = GadgetMasks::random(spec.m, rng);
        let mut info = encrypt_gadget_info(&spec, &masks, &sk.sk, next, rng);
        info.steps = decoder.path_bound(spec.m);
        gadgets.push(BundleGadget { index: i, info, consumed: false, instance: Some(GadgetInstance { spec, masks }) });
        enc_sk_chain.push(next.enc_string(&sk.sk, rng));
    }
    Ok(TPKeyBundle { scheme, kappa, levels, source, decoder, keysets, gadgets, enc_sk_chain })
}

impl TPKeyBundle {
    pub fn gadget_count(&self) -> usize {
        self.gadgets.len()
    }

    pub fn remaining_gadgets(&self) -> usize {
        self.gadgets.iter().filter(|g| !g.consumed).count()
    }

    /// Total qubits over all gadgets.
    pub fn gadget_qubits(&self) -> usize {
        self.gadgets.iter().map(BundleGadget::num_qubits).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QGate {
    H(usize),
    P(usize),
    Cnot(usize, usize),
    T(usize),
    X(usize),
    Z(usize),
}

impl QGate {
    fn wires(&self) -> Vec<usize> {
        match *self {
            QGate::Cnot(c, t) => vec![c, t],
            QGate::H(w) | QGate::P(w) | QGate::T(w) | QGate::X(w) | QGate::Z(w) => vec![w],
        }
    }
}

impl fmt::Display for QGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QGate::H(w) => write!(f, "H {w}"),
            QGate::P(w) => write!(f, "P {w}"),
            QGate::Cnot(c, t) => write!(f, "CNOT {c} {t}"),
            QGate::T(w) => write!(f, "T {w}"),
            QGate::X(w) => write!(f, "X {w}"),
            QGate::Z(w) => write!(f, "Z {w}"),
        }
    }
}

/// A Clifford+T circuit on `num_wires` wires.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumCircuit {
    num_wires: usize,
    gates: Vec<QGate>,
}

impl QuantumCircuit {
    pub fn new(num_wires: usize, gates: Vec<QGate>) -> Result<Self> {
        if num_wires == 0 {
            return Err(QheError::Precondition("a circuit needs at least one wire".into()));
        }
        for g in &gates {
            let ws = g.wires();
            if let Some(&w) = ws.iter().find(|&&w| w >= num_wires) {
                return Err(QheError::IndexOutOfRange { index: w, size: num_wires });
            }
            if ws.len() == 2 && ws[0] == ws[1] {
                return Err(QheError::Precondition(format!("{g}: control equals target")));
            }
        }
        Ok(QuantumCircuit { num_wires, gates })
    }

    pub fn num_wires(&self) -> usize {
        self.num_wires
    }

    pub fn gates(&self) -> &[QGate] {
        &self.gates
    }

    pub fn t_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, QGate::T(_))).count()
    }

    /// Parses one gate per line (`H 0`, `CNOT 0 1`, …); `#` starts a comment
    /// line.
    pub fn from_text(text: &str, num_wires: usize) -> Result<Self> {
        let mut gates = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| QheError::Parse { line: n + 1, message: m };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let idx = |t: &str| t.parse::<usize>().map_err(|e| err(format!("bad wire '{t}': {e}")));
            let g = match toks.as_slice() {
                ["H", w] => QGate::H(idx(w)?),
                ["P", w] => QGate::P(idx(w)?),
                ["T", w] => QGate::T(idx(w)?),
                ["X", w] => QGate::X(idx(w)?),
                ["Z", w] => QGate::Z(idx(w)?),
                ["CNOT", c, t] => QGate::Cnot(idx(c)?, idx(t)?),
                _ => return Err(err(format!("unrecognized gate line '{line}'"))),
            };
            QuantumCircuit::new(num_wires, vec![g]).map_err(|e| err(e.to_string()))?;
            gates.push(g);
        }
        QuantumCircuit::new(num_wires, gates)
    }

    pub fn to_text(&self) -> String {
        self.gates.iter().map(|g| format!("{g}\n")).collect()
    }

    /// Random circuit on `1..=max_wires` wires with at most `max_gates`
    /// gates of which at most `max_t` are T.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_wires: usize, max_gates: usize, max_t: usize) -> Self {
        let n = rng.gen_range(1..=max_wires.max(1));
        let len = rng.gen_range(0..=max_gates);
        let mut t = 0;
        let mut gates = Vec::with_capacity(len);
        while gates.len() < len {
            let w = rng.gen_range(0..n);
            let g = match rng.gen_range(0..6) {
                0 => QGate::H(w),
                1 => QGate::P(w),
                2 if n > 1 => {
                    let other = (w + rng.gen_range(1..n)) % n;
                    QGate::Cnot(w, other)
                }
                3 if t < max_t => {
                    t += 1;
                    QGate::T(w)
                }
                4 => QGate::X(w),
                5 => QGate::Z(w),
                _ => continue,
            };
            gates.push(g);
        }
        QuantumCircuit { num_wires: n, gates }
    }

    /// Applies the circuit directly, without encryption.
    pub fn apply_plain(&self, sv: &mut StateVector) -> Result<()> {
        for g in &self.gates {
            apply_gate(sv, g)?;
        }
        Ok(())
    }
}

fn apply_gate(sv: &mut StateVector, g: &QGate) -> Result<()> {
    match *g {
        QGate::H(w) => sv.apply_gate(Gate::H, w),
        QGate::P(w) => sv.apply_gate(Gate::P, w),
        QGate::T(w) => sv.apply_gate(Gate::T, w),
        QGate::X(w) => sv.apply_gate(Gate::X, w),
        QGate::Z(w) => sv.apply_gate(Gate::Z, w),
        QGate::Cnot(c, t) => sv.apply_cnot(c, t),
    }
}

/// An encrypted register: the padded quantum state and the pad keys
/// encrypted under keyset `key_index`.
#[derive(Clone, Debug)]
pub struct QCiphertext {
    pub state: StateVector,
    pub enc_a: Vec<HECiphertext>,
    pub enc_b: Vec<HECiphertext>,
    pub key_index: usize,
}

/// The classical part of a [`QCiphertext`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QCiphertextClassical {
    pub num_wires: usize,
    pub enc_a: Vec<HECiphertext>,
    pub enc_b: Vec<HECiphertext>,
    pub key_index: usize,
}

impl QCiphertext {
    pub fn num_wires(&self) -> usize {
        self.enc_a.len()
    }

    pub fn classical(&self) -> QCiphertextClassical {
        QCiphertextClassical {
            num_wires: self.num_wires(),
            enc_a: self.enc_a.clone(),
            enc_b: self.enc_b.clone(),
            key_index: self.key_index,
        }
    }
}

/// Pads every wire with fresh uniform keys.
pub fn encrypt<R: Rng + ?Sized>(bundle: &TPKeyBundle, state: StateVector, rng: &mut R) -> Result<QCiphertext> {
    let pads: Vec<(bool, bool)> = (0..state.num_qubits()).map(|_| (rng.gen(), rng.gen())).collect();
    encrypt_with_pads(bundle, state, &pads, rng)
}

/// Encryption with the pad keys `(a_w, b_w)` given. Applies `X^a` then
/// `Z^b` to each wire.
pub fn encrypt_with_pads<R: Rng + ?Sized>(
    bundle: &TPKeyBundle,
    mut state: StateVector,
    pads: &[(bool, bool)],
    rng: &mut R,
) -> Result<QCiphertext> {
    let n = state.num_qubits();
    if pads.len() != n {
        return Err(QheError::DimensionMismatch(format!("{} pads for {n} wires", pads.len())));
    }
    let ks = &bundle.keysets[0];
    let (mut enc_a, mut enc_b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (w, &(a, b)) in pads.iter().enumerate() {
        if a {
            state.apply_gate(Gate::X, w)?;
        }
        if b {
            state.apply_gate(Gate::Z, w)?;
        }
        enc_a.push(ks.enc(a, rng));
        enc_b.push(ks.enc(b, rng));
    }
    Ok(QCiphertext { state, enc_a, enc_b, key_index: 0 })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Re-randomize the output with a fresh pad.
    pub circuit_privacy: bool,
    pub backend: GadgetBackend,
    /// Recrypt to the last key after the circuit. Off only to inspect
    /// intermediate key indices.
    pub skip_finalize: bool,
    /// Forces the circuit-privacy pad instead of sampling it.
    pub privacy_pads: Option<Vec<(bool, bool)>>,
}

impl EvalOptions {
    pub fn private() -> Self {
        EvalOptions { circuit_privacy: true, ..Default::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub gadgets_consumed: usize,
    pub recryptions_performed: usize,
    pub he_eval_node_count: usize,
    /// HE decryptions plus gate applications needed to decrypt the output.
    pub dec_op_count_estimate: usize,
    pub t_count: usize,
    pub final_key_index: usize,
    pub symbolic_gadgets: usize,
}

struct Evaluator<'a, R: Rng + ?Sized> {
    bundle: &'a mut TPKeyBundle,
    qct: QCiphertext,
    report: EvalReport,
    xor2: FuncExpr,
    backend: GadgetBackend,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Evaluator<'_, R> {
    fn xor(&mut self, x: &HECiphertext, y: &HECiphertext) -> Result<HECiphertext> {
        let ks = &self.bundle.keysets[self.qct.key_index];
        self.report.he_eval_node_count += self.xor2.size();
        ks.eval_one(&self.xor2, &[x.clone(), y.clone()], self.rng)
    }

    fn gate(&mut self, g: &QGate) -> Result<()> {
        match *g {
            QGate::T(w) => return self.t_gate(w),
            QGate::H(w) => {
                let q = &mut self.qct;
                std::mem::swap(&mut q.enc_a[w], &mut q.enc_b[w]);
            }
            QGate::P(w) => {
                let (a, b) = (self.qct.enc_a[w].clone(), self.qct.enc_b[w].clone());
                self.qct.enc_b[w] = self.xor(&a, &b)?;
            }
            QGate::Cnot(c, t) => {
                let (bc, bt) = (self.qct.enc_b[c].clone(), self.qct.enc_b[t].clone());
                self.qct.enc_b[c] = self.xor(&bc, &bt)?;
                let (ac, at) = (self.qct.enc_a[c].clone(), self.qct.enc_a[t].clone());
                self.qct.enc_a[t] = self.xor(&at, &ac)?;
            }
            QGate::X(_) | QGate::Z(_) => {}
        }
        apply_gate(&mut self.qct.state, g)
    }

    fn recrypt_wire(&mut self, w: usize) -> Result<()> {
        let i = self.qct.key_index;
        let (next, chain) = (&self.bundle.keysets[i + 1], &self.bundle.enc_sk_chain[i]);
        self.qct.enc_a[w] = recrypt(i, next, chain, &self.qct.enc_a[w], self.rng)?;
        self.qct.enc_b[w] = recrypt(i, next, chain, &self.qct.enc_b[w], self.rng)?;
        self.report.recryptions_performed += 2;
        Ok(())
    }

    fn t_gate(&mut self, w: usize) -> Result<()> {
        let i = self.qct.key_index;
        let gadget = &self.bundle.gadgets[i];
        if gadget.consumed {
            return Err(QheError::Precondition(format!("gadget {i} was already consumed")));
        }
        let inst = gadget
            .instance
            .clone()
            .ok_or_else(|| QheError::Precondition(format!("gadget {i} has no quantum state in this process")))?;
        let info = gadget.info.clone();

        // T X^a Z^b = P^a X^a Z^b T up to phase.
        self.qct.state.apply_gate(Gate::T, w)?;
        let plan = self.bundle.decoder.plan(&self.qct.enc_a[w].payload)?;
        let (a, b) = (self.qct.enc_a[w].clone(), self.qct.enc_b[w].clone());
        let next = &self.bundle.keysets[i + 1];
        let chain = &self.bundle.enc_sk_chain[i];
        let a_next = recrypt(i, next, chain, &a, self.rng)?;
        let b_next = recrypt(i, next, chain, &b, self.rng)?;
        self.report.recryptions_performed += 2;

        let outcomes = self.consume(&inst, &plan, w)?;
        self.bundle.gadgets[i].consumed = true;
        self.report.gadgets_consumed += 1;

        let next = &self.bundle.keysets[i + 1];
        let up = key_update_homomorphic(&info, &plan, &outcomes, &a_next, &b_next, next, self.rng)?;
        self.report.he_eval_node_count += up.node_count;
        for v in 0..self.qct.num_wires() {
            if v != w {
                self.recrypt_wire(v)?;
            }
        }
        self.qct.enc_a[w] = up.a;
        self.qct.enc_b[w] = up.b;
        self.qct.key_index = i + 1;
        Ok(())
    }

    fn consume(&mut self, inst: &GadgetInstance, plan: &MeasurementPlan, w: usize) -> Result<Vec<BellOutcome>> {
        let state = &mut self.qct.state;
        let n = state.num_qubits();
        let fits = n + inst.spec.num_qubits() <= state.cap();
        let use_sv = match self.backend {
            GadgetBackend::StateVector => true,
            GadgetBackend::Symbolic => false,
            GadgetBackend::Auto => fits,
        };
        if !use_sv {
            let run = symbolic_consume(&inst.spec, &inst.masks, plan, self.rng)?;
            state.apply_matrix(&run.operator, w)?;
            self.report.symbolic_gadgets += 1;
            return Ok(run.outcomes);
        }
        let labels = instantiate(&inst.spec, &inst.masks, state)?;
        let res = consume(&labels, plan, w, state)?;
        if state.num_qubits() != n {
            return Err(QheError::MalformedGadget(format!("{} qubits left after consumption", state.num_qubits())));
        }
        let order = (0..n)
            .map(|j| if j == w { Some(res.output_qubit) } else { res.survivor_map[j] })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| QheError::MalformedGadget("a wire was measured".into()))?;
        state.permute_qubits(&order)?;
        Ok(res.outcomes)
    }

    fn finalize(&mut self) -> Result<()> {
        while self.qct.key_index < self.bundle.levels {
            for w in 0..self.qct.num_wires() {
                self.recrypt_wire(w)?;
            }
            self.qct.key_index += 1;
        }
        Ok(())
    }

    fn randomize(&mut self, pads: Option<Vec<(bool, bool)>>) -> Result<()> {
        let n = self.qct.num_wires();
        let pads = match pads {
            Some(p) if p.len() == n => p,
            Some(p) => return Err(QheError::DimensionMismatch(format!("{} privacy pads for {n} wires", p.len()))),
            None => (0..n).map(|_| (self.rng.gen(), self.rng.gen())).collect(),
        };
        for (w, (a, b)) in pads.into_iter().enumerate() {
            if a {
                self.qct.state.apply_gate(Gate::X, w)?;
            }
            if b {
                self.qct.state.apply_gate(Gate::Z, w)?;
            }
            let ks = &self.bundle.keysets[self.qct.key_index];
            let (ea, eb) = (ks.enc(a, self.rng), ks.enc(b, self.rng));
            let (ca, cb) = (self.qct.enc_a[w].clone(), self.qct.enc_b[w].clone());
            self.qct.enc_a[w] = self.xor(&ca, &ea)?;
            self.qct.enc_b[w] = self.xor(&cb, &eb)?;
        }
        Ok(())
    }
}

/// Evaluates `circuit` on `qct` one gate at a time. Each T gate consumes
/// the gadget of the current key index and moves every key one index up;
/// afterwards the keys are recrypted to the last index.
pub fn eval<R: Rng + ?Sized>(
    bundle: &mut TPKeyBundle,
    circuit: &QuantumCircuit,
    qct: QCiphertext,
    options: &EvalOptions,
    rng: &mut R,
) -> Result<(QCiphertext, EvalReport)> {
    if circuit.num_wires() != qct.num_wires() {
        return Err(QheError::DimensionMismatch(format!(
            "circuit has {} wires, ciphertext {}",
            circuit.num_wires(),
            qct.num_wires()
        )));
    }
    if qct.key_index > bundle.levels {
        return Err(QheError::KeyMismatch { expected: bundle.levels, found: qct.key_index });
    }
    let t = circuit.t_count();
    let have = bundle.levels - qct.key_index;
    if t > have {
        return Err(QheError::OutOfGadgets { need: t, have });
    }
    if t > 0 && !bundle.decoder.decrypts() {
        return Err(QheError::UnsupportedOperation(format!(
            "{} gadgets do not implement decryption and cannot correct T gates",
            bundle.source
        )));
    }
    let mut xor2 = FuncExpr::new(2);
    let (x, y) = (xor2.input(0), xor2.input(1));
    let o = xor2.xor(x, y);
    xor2.add_output(o);
    let mut ev = Evaluator {
        bundle,
        qct,
        report: EvalReport { t_count: t, ..Default::default() },
        xor2,
        backend: options.backend,
        rng,
    };
    for g in circuit.gates() {
        ev.gate(g)?;
    }
    if !options.skip_finalize {
        ev.finalize()?;
    }
    if options.circuit_privacy {
        ev.randomize(options.privacy_pads.clone())?;
    }
    let n = ev.qct.num_wires();
    ev.report.final_key_index = ev.qct.key_index;
    ev.report.dec_op_count_estimate = 4 * n;
    Ok((ev.qct, ev.report))
}

/// Work done by [`decrypt`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecryptStats {
    pub he_decryptions: usize,
    pub gate_applications: usize,
}

/// Decrypts the keys under the last keyset and removes the pad one wire at
/// a time (`Z^b` then `X^a`).
pub fn decrypt(bundle: &TPKeyBundle, qct: &QCiphertext) -> Result<(StateVector, DecryptStats)> {
    if qct.key_index != bundle.levels {
        return Err(QheError::NotFinalized { current: qct.key_index, required: bundle.levels });
    }
    let ks = &bundle.keysets[bundle.levels];
    let mut state = qct.state.clone();
    let mut stats = DecryptStats::default();
    for w in 0..qct.num_wires() {
        let a = ks.dec(&qct.enc_a[w])?;
        let b = ks.dec(&qct.enc_b[w])?;
        stats.he_decryptions += 2;
        state.apply_matrix(&Mat2::z().pow(b as u32), w)?;
        state.apply_matrix(&Mat2::x().pow(a as u32), w)?;
        stats.gate_applications += 2;
    }
    Ok((state, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{fidelity, fidelity_amplitudes, trace_distance, DensityMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn plus(n: usize) -> StateVector {
        let mut sv = StateVector::new(n, 0).unwrap();
        for w in 0..n {
            sv.apply_gate(Gate::H, w).unwrap();
        }
        sv
    }

    fn round_trip(
        scheme: HeScheme,
        source: GadgetSource,
        levels: usize,
        circuit: &QuantumCircuit,
        input: &StateVector,
        options: &EvalOptions,
        seed: u64,
    ) -> (f64, EvalReport) {
        let mut r = rng(seed);
        let mut bundle = keygen(scheme, 8, levels, source, &mut r).unwrap();
        let qct = encrypt(&bundle, input.clone(), &mut r).unwrap();
        let (out, report) = eval(&mut bundle, circuit, qct, options, &mut r).unwrap();
        let (plain, _) = decrypt(&bundle, &out).unwrap();
        let mut expect = input.clone();
        circuit.apply_plain(&mut expect).unwrap();
        (fidelity(&plain, &expect).unwrap(), report)
    }

    #[test]
    fn keygen_indices() {
        let mut r = rng(1);
        let b = keygen(HeScheme::Transparent, 8, 2, GadgetSource::ToyGh, &mut r).unwrap();
        assert_eq!(b.keysets.len(), 3);
        assert_eq!(b.gadget_count(), 2);
        for (i, g) in b.gadgets.iter().enumerate() {
            assert_eq!(g.info.key_index, i + 1);
            let ks = &b.keysets[i + 1];
            let inst = g.instance().unwrap();
            assert_eq!(ks.dec_string(&g.info.enc_x).unwrap(), inst.masks.x);
            assert_eq!(ks.dec_string(&g.info.enc_sk).unwrap(), b.keysets[i].sk);
            assert_eq!(inst.spec.sk_keyset_index, i);
            assert_eq!(inst.spec.classical_key_index, i + 1);
        }
        let empty = keygen(HeScheme::Transparent, 8, 0, GadgetSource::ToyGh, &mut r).unwrap();
        assert_eq!((empty.keysets.len(), empty.gadget_count()), (1, 0));
    }

    #[test]
    fn bp_bundle_gadget_size() {
        let mut r = rng(2);
        let b = keygen(HeScheme::Toy, 8, 2, GadgetSource::Bp, &mut r).unwrap();
        let Decoder::Program { program, .. } = &b.decoder else { panic!("program decoder") };
        assert!(program.is_alternating());
        for g in &b.gadgets {
            assert_eq!(g.num_qubits(), 10 * program.len());
        }
        let or = keygen(HeScheme::Toy, 8, 4, GadgetSource::OrExample, &mut r).unwrap();
        assert_eq!(or.gadget_qubits(), 160);
    }

    #[test]
    fn info_length_does_not_depend_on_key() {
        let lens: std::collections::BTreeSet<usize> = (0..16)
            .map(|s| {
                let b = keygen(HeScheme::Transparent, 8, 1, GadgetSource::ToyGh, &mut rng(s)).unwrap();
                b.gadgets[0].info.total_bits()
            })
            .collect();
        assert_eq!(lens.len(), 1);
    }

    #[test]
    fn encrypt_decrypt_round_trip() {
        let mut r = rng(3);
        let b = keygen(HeScheme::Transparent, 8, 0, GadgetSource::ToyGh, &mut r).unwrap();
        for _ in 0..20 {
            let psi = StateVector::random(2, &mut r, 0).unwrap();
            let qct = encrypt(&b, psi.clone(), &mut r).unwrap();
            let (out, _) = decrypt(&b, &qct).unwrap();
            assert!(fidelity(&out, &psi).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn zero_pad_leaves_state() {
        let mut r = rng(4);
        let b = keygen(HeScheme::Toy, 8, 0, GadgetSource::ToyGh, &mut r).unwrap();
        let psi = StateVector::random(2, &mut r, 0).unwrap();
        let qct = encrypt_with_pads(&b, psi.clone(), &[(false, false); 2], &mut r).unwrap();
        assert!(fidelity_amplitudes(qct.state.amplitudes(), psi.amplitudes()).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn pad_average_is_mixed() {
        let mut r = rng(5);
        let b = keygen(HeScheme::Transparent, 8, 0, GadgetSource::ToyGh, &mut r).unwrap();
        let psi = StateVector::random(1, &mut r, 0).unwrap();
        let mut avg = DensityMatrix::zeros(1);
        for code in 0..4 {
            let pads = [(code & 1 == 1, code & 2 == 2)];
            let qct = encrypt_with_pads(&b, psi.clone(), &pads, &mut r).unwrap();
            avg.accumulate(&qct.state.density(), 0.25).unwrap();
        }
        assert!(trace_distance(&avg, &DensityMatrix::maximally_mixed(1)).unwrap() < 1e-10);
    }

    #[test]
    fn single_t_on_plus() {
        let c = QuantumCircuit::new(1, vec![QGate::T(0)]).unwrap();
        for seed in 0..10 {
            let (f, rep) =
                round_trip(HeScheme::Transparent, GadgetSource::ToyGh, 1, &c, &plus(1), &EvalOptions::default(), seed);
            assert!(f > 1.0 - 1e-9);
            assert_eq!((rep.gadgets_consumed, rep.final_key_index, rep.symbolic_gadgets), (1, 1, 0));
        }
    }

    #[test]
    fn clifford_only_without_gadgets() {
        let c = QuantumCircuit::new(2, vec![QGate::H(0), QGate::P(0), QGate::Cnot(0, 1), QGate::X(1), QGate::Z(0)])
            .unwrap();
        for scheme in [HeScheme::Transparent, HeScheme::Toy] {
            let psi = StateVector::random(2, &mut rng(6), 0).unwrap();
            let (f, rep) = round_trip(scheme, GadgetSource::ToyGh, 0, &c, &psi, &EvalOptions::default(), 6);
            assert!(f > 1.0 - 1e-9);
            assert_eq!(rep.gadgets_consumed, 0);
        }
    }

    #[test]
    fn backends_give_the_same_plaintext() {
        let c = QuantumCircuit::new(2, vec![QGate::H(0), QGate::T(0), QGate::Cnot(0, 1), QGate::T(1), QGate::H(1)])
            .unwrap();
        let psi = StateVector::random(2, &mut rng(7), 0).unwrap();
        for backend in [GadgetBackend::StateVector, GadgetBackend::Symbolic] {
            let opts = EvalOptions { backend, ..Default::default() };
            for seed in 0..5 {
                let (f, rep) = round_trip(HeScheme::Transparent, GadgetSource::ToyGh, 3, &c, &psi, &opts, seed);
                assert!(f > 1.0 - 1e-9, "{backend}: {f}");
                assert_eq!(rep.symbolic_gadgets, if backend == GadgetBackend::Symbolic { 2 } else { 0 });
                assert_eq!(rep.recryptions_performed, 2 * 2 * 3);
            }
        }
    }

    #[test]
    fn bp_gadgets_correct_t_gates() {
        let c = QuantumCircuit::new(1, vec![QGate::H(0), QGate::T(0), QGate::H(0), QGate::T(0)]).unwrap();
        let psi = StateVector::random(1, &mut rng(8), 0).unwrap();
        let (f, rep) = round_trip(HeScheme::Transparent, GadgetSource::Bp, 2, &c, &psi, &EvalOptions::default(), 8);
        assert!(f > 1.0 - 1e-9);
        assert_eq!(rep.symbolic_gadgets, 2);
    }

    #[test]
    fn budget_and_scheme_limits() {
        let mut r = rng(9);
        let mut b = keygen(HeScheme::Transparent, 8, 1, GadgetSource::ToyGh, &mut r).unwrap();
        let c = QuantumCircuit::new(1, vec![QGate::T(0), QGate::T(0)]).unwrap();
        let qct = encrypt(&b, plus(1), &mut r).unwrap();
        let err = eval(&mut b, &c, qct, &EvalOptions::default(), &mut r).unwrap_err();
        assert_eq!(err, QheError::OutOfGadgets { need: 2, have: 1 });
        assert_eq!(err.to_string(), "out of gadgets: need 2, have 1");

        let mut toy = keygen(HeScheme::Toy, 8, 1, GadgetSource::ToyGh, &mut r).unwrap();
        let qct = encrypt(&toy, plus(1), &mut r).unwrap();
        let one_t = QuantumCircuit::new(1, vec![QGate::T(0)]).unwrap();
        let err = eval(&mut toy, &one_t, qct, &EvalOptions::default(), &mut r).unwrap_err();
        assert!(matches!(err, QheError::UnsupportedOperation(_)));

        let mut or = keygen(HeScheme::Transparent, 8, 1, GadgetSource::OrExample, &mut r).unwrap();
        let qct = encrypt(&or, plus(1), &mut r).unwrap();
        assert!(matches!(
            eval(&mut or, &one_t, qct, &EvalOptions::default(), &mut r),
            Err(QheError::UnsupportedOperation(_))
        ));
    }

    #[test]
    fn key_index_discipline() {
        let mut r = rng(10);
        let mut b = keygen(HeScheme::Transparent, 8, 4, GadgetSource::ToyGh, &mut r).unwrap();
        let c = QuantumCircuit::new(1, vec![QGate::T(0), QGate::H(0), QGate::T(0)]).unwrap();
        let qct = encrypt(&b, plus(1), &mut r).unwrap();
        let opts = EvalOptions { skip_finalize: true, ..Default::default() };
        let (mid, rep) = eval(&mut b, &c, qct, &opts, &mut r).unwrap();
        assert_eq!((mid.key_index, rep.final_key_index), (2, 2));
        assert_eq!(decrypt(&b, &mid).unwrap_err(), QheError::NotFinalized { current: 2, required: 4 });
        assert_eq!(b.remaining_gadgets(), 2);
        // Continue from the intermediate ciphertext with the remaining budget.
        let tail = QuantumCircuit::new(1, vec![QGate::T(0)]).unwrap();
        let (out, rep) = eval(&mut b, &tail, mid, &EvalOptions::default(), &mut r).unwrap();
        assert_eq!(rep.final_key_index, 4);
        let (plain, _) = decrypt(&b, &out).unwrap();
        let mut expect = plus(1);
        c.apply_plain(&mut expect).unwrap();
        tail.apply_plain(&mut expect).unwrap();
        assert!(fidelity(&plain, &expect).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn decrypt_work_ignores_t_count() {
        let mut counts = Vec::new();
        for t in [0usize, 8] {
            let mut r = rng(11);
            let mut b = keygen(HeScheme::Transparent, 8, 8, GadgetSource::ToyGh, &mut r).unwrap();
            let c = QuantumCircuit::new(2, (0..t).map(|i| QGate::T(i % 2)).collect()).unwrap();
            let qct = encrypt(&b, plus(2), &mut r).unwrap();
            let (out, rep) = eval(&mut b, &c, qct, &EvalOptions::default(), &mut r).unwrap();
            let (_, stats) = decrypt(&b, &out).unwrap();
            counts.push((stats, rep.dec_op_count_estimate));
        }
        assert_eq!(counts[0], counts[1]);
    }

    #[test]
    fn circuit_privacy_keeps_plaintext() {
        let c = QuantumCircuit::new(2, vec![QGate::T(0), QGate::Cnot(0, 1)]).unwrap();
        let psi = StateVector::random(2, &mut rng(12), 0).unwrap();
        let (f, _) = round_trip(HeScheme::Transparent, GadgetSource::ToyGh, 1, &c, &psi, &EvalOptions::private(), 12);
        assert!(f > 1.0 - 1e-9);
    }

    #[test]
    fn circuit_text_round_trip() {
        let text = "# comment\nH 0\nCNOT 0 1\nT 1\n\nP 0\nX 1\nZ 0\n";
        let c = QuantumCircuit::from_text(text, 2).unwrap();
        assert_eq!(c.t_count(), 1);
        assert_eq!(QuantumCircuit::from_text(&c.to_text(), 2).unwrap(), c);
        assert!(matches!(QuantumCircuit::from_text("H 0\nFOO 1", 2), Err(QheError::Parse { line: 2, .. })));
        assert!(matches!(QuantumCircuit::from_text("H 5", 2), Err(QheError::Parse { line: 1, .. })));
        assert!(QuantumCircuit::from_text("CNOT 1 1", 2).is_err());
    }

    #[test]
    fn random_circuits_respect_limits() {
        let mut r = rng(13);
        for _ in 0..200 {
            let c = QuantumCircuit::random(&mut r, 3, 12, 4);
            assert!(c.num_wires() <= 3 && c.gates().len() <= 12 && c.t_count() <= 4);
            QuantumCircuit::new(c.num_wires(), c.gates().to_vec()).unwrap();
        }
    }
}
