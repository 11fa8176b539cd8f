//! Classical homomorphic encryption used to carry the one-time-pad keys.
//!
//! Two deliberately insecure schemes are provided. `Transparent` evaluates
//! any expression (it needs AND for the gadget key updates), `Toy` is the
//! one-bit XOR scheme `c = m ⊕ sk` and only evaluates XOR-linear expressions.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::boolcircuit::BoolCircuit;
use crate::error::{QheError, Result};
use crate::funcexpr::{FuncExpr, Node};

/// Filler bits appended to every `Transparent` ciphertext.
pub const TRANSPARENT_FILLER_BITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeScheme {
    Transparent,
    Toy,
}

impl HeScheme {
    pub fn ciphertext_bits(self) -> usize {
        match self {
            HeScheme::Transparent => 1 + TRANSPARENT_FILLER_BITS,
            HeScheme::Toy => 1,
        }
    }

    pub fn secret_key_bits(self) -> usize {
        1
    }
}

impl fmt::Display for HeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeScheme::Transparent => "transparent",
            HeScheme::Toy => "toy",
        })
    }
}

impl FromStr for HeScheme {
    type Err = QheError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transparent" => Ok(HeScheme::Transparent),
            "toy" => Ok(HeScheme::Toy),
            _ => Err(QheError::Parse { line: 0, message: format!("unknown scheme '{s}'") }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HEKeySet {
    pub scheme: HeScheme,
    pub key_index: usize,
    pub kappa: usize,
    pub pk: Vec<bool>,
    pub sk: Vec<bool>,
    pub evk: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HECiphertext {
    pub payload: Vec<bool>,
    pub key_index: usize,
}

impl HECiphertext {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }
}

/// How a scheme decrypts, as an object gadget builders can consume.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecryptionSpec {
    /// Decryption as a circuit over `sk ∥ ct` bits.
    Boolean(BoolCircuit),
    /// `((w − ⟨v, s⟩) mod p) mod 2` over `Z_p^{κ'}`.
    Arithmetic { modulus: u64, dimension: usize },
}

impl HEKeySet {
    pub fn generate<R: Rng + ?Sized>(scheme: HeScheme, kappa: usize, key_index: usize, rng: &mut R) -> Result<Self> {
        if kappa == 0 {
            return Err(QheError::Precondition("security parameter must be positive".into()));
        }
        let mask: bool = rng.gen();
        Ok(HEKeySet { scheme, key_index, kappa, pk: vec![mask], sk: vec![mask], evk: vec![mask] })
    }

    fn mask(&self) -> bool {
        self.sk[0]
    }

    pub fn enc<R: Rng + ?Sized>(&self, bit: bool, rng: &mut R) -> HECiphertext {
        let mut payload = vec![bit ^ self.pk[0]];
        if self.scheme == HeScheme::Transparent {
            payload.extend((0..TRANSPARENT_FILLER_BITS).map(|_| rng.gen::<bool>()));
        }
        HECiphertext { payload, key_index: self.key_index }
    }

    pub fn enc_string<R: Rng + ?Sized>(&self, bits: &[bool], rng: &mut R) -> Vec<HECiphertext> {
        bits.iter().map(|&b| self.enc(b, rng)).collect()
    }

    fn check(&self, ct: &HECiphertext) -> Result<()> {
        if ct.key_index != self.key_index {
            return Err(QheError::KeyMismatch { expected: self.key_index, found: ct.key_index });
        }
        if ct.payload.len() != self.scheme.ciphertext_bits() {
            return Err(QheError::DimensionMismatch(format!(
                "{} ciphertext must have {} bits, got {}",
                self.scheme,
                self.scheme.ciphertext_bits(),
                ct.payload.len()
            )));
        }
        Ok(())
    }

    pub fn dec(&self, ct: &HECiphertext) -> Result<bool> {
        self.check(ct)?;
        Ok(ct.payload[0] ^ self.mask())
    }

    pub fn dec_string(&self, cts: &[HECiphertext]) -> Result<Vec<bool>> {
        cts.iter().map(|c| self.dec(c)).collect()
    }

    /// Homomorphic evaluation of every output of `f`. Only the evaluation
    /// key is consulted.
    pub fn eval<R: Rng + ?Sized>(&self, f: &FuncExpr, cts: &[HECiphertext], rng: &mut R) -> Result<Vec<HECiphertext>> {
        if f.arity() != cts.len() {
            return Err(QheError::DimensionMismatch(format!(
                "expression arity {} but {} ciphertexts",
                f.arity(),
                cts.len()
            )));
        }
        for ct in cts {
            self.check(ct)?;
        }
        match self.scheme {
            HeScheme::Transparent => {
                let evk = self.evk[0];
                let plain: Vec<bool> = cts.iter().map(|c| c.payload[0] ^ evk).collect();
                let out = f.eval(&plain)?;
                let mut res = Vec::with_capacity(out.len());
                for b in out {
                    let mut payload = vec![b ^ evk];
                    payload.extend((0..TRANSPARENT_FILLER_BITS).map(|_| rng.gen::<bool>()));
                    res.push(HECiphertext { payload, key_index: self.key_index });
                }
                Ok(res)
            }
            HeScheme::Toy => {
                if let Some(n) = f.nodes().iter().find(|n| matches!(n, Node::And(..) | Node::Not(_))) {
                    return Err(QheError::UnsupportedOperation(format!(
                        "toy scheme evaluates XOR-linear expressions only, found {n:?}"
                    )));
                }
                // Track the ciphertext bit and the parity of key contributions.
                let inputs: Vec<(bool, bool)> = cts.iter().map(|c| (c.payload[0], true)).collect();
                let values = f.eval_with(
                    &inputs,
                    |b| (b, false),
                    |x, y| (x.0 ^ y.0, x.1 ^ y.1),
                    |_, _| unreachable!("rejected above"),
                    |_| unreachable!("rejected above"),
                )?;
                Ok(f.outputs()
                    .iter()
                    .map(|&o| {
                        let (bit, keyed) = values[o];
                        let payload = vec![if keyed { bit } else { bit ^ self.evk[0] }];
                        HECiphertext { payload, key_index: self.key_index }
                    })
                    .collect())
            }
        }
    }

    /// Single-output convenience wrapper around [`HEKeySet::eval`].
    pub fn eval_one<R: Rng + ?Sized>(&self, f: &FuncExpr, cts: &[HECiphertext], rng: &mut R) -> Result<HECiphertext> {
        let mut out = self.eval(f, cts, rng)?;
        if out.len() != 1 {
            return Err(QheError::Precondition(format!("expected one output, found {}", out.len())));
        }
        Ok(out.pop().expect("length checked"))
    }

    pub fn decryption_spec(&self) -> DecryptionSpec {
        decryption_spec(self.scheme)
    }
}

pub fn decryption_spec(scheme: HeScheme) -> DecryptionSpec {
    DecryptionSpec::Boolean(BoolCircuit::xor_sk0_ct0(scheme.ciphertext_bits()))
}

/// Moves `ct` from key `from_index` to `target` by homomorphically
/// evaluating the decryption circuit on `enc_sk_from` (the source secret key
/// encrypted bitwise under `target`) and a fresh encryption of `ct`'s bits.
pub fn recrypt<R: Rng + ?Sized>(
    from_index: usize,
    target: &HEKeySet,
    enc_sk_from: &[HECiphertext],
    ct: &HECiphertext,
    rng: &mut R,
) -> Result<HECiphertext> {
    if ct.key_index != from_index {
        return Err(QheError::KeyMismatch { expected: from_index, found: ct.key_index });
    }
    let circuit = match decryption_spec(target.scheme) {
        DecryptionSpec::Boolean(c) => c,
        DecryptionSpec::Arithmetic { .. } => {
            return Err(QheError::UnsupportedOperation("recryption needs a boolean decryption circuit".into()))
        }
    };
    if enc_sk_from.len() != circuit.num_sk_bits() {
        return Err(QheError::Precondition(format!(
            "recryption needs {} encrypted secret-key bits, got {}",
            circuit.num_sk_bits(),
            enc_sk_from.len()
        )));
    }
    if ct.payload.len() != circuit.num_ct_bits() {
        return Err(QheError::DimensionMismatch(format!(
            "ciphertext has {} bits, decryption circuit expects {}",
            ct.payload.len(),
            circuit.num_ct_bits()
        )));
    }
    let mut inputs = enc_sk_from.to_vec();
    inputs.extend(target.enc_string(&ct.payload, rng));
    target.eval_one(&circuit.to_funcexpr(), &inputs, rng)
}

/// `((w − Σ v_i s_i) mod p) mod 2`.
pub fn bv_dec_eval(modulus: u64, s: &[u64], v: &[u64], w: u64) -> Result<bool> {
    if modulus < 2 {
        return Err(QheError::Precondition("modulus must be at least 2".into()));
    }
    if s.len() != v.len() {
        return Err(QheError::DimensionMismatch(format!("|s| = {}, |v| = {}", s.len(), v.len())));
    }
    for &x in s.iter().chain(v).chain(std::iter::once(&w)) {
        if x >= modulus {
            return Err(QheError::RingRange { value: x, modulus });
        }
    }
    let p = modulus as u128;
    let inner = s.iter().zip(v).fold(0u128, |acc, (&a, &b)| (acc + a as u128 * b as u128) % p);
    Ok(((w as u128 + p - inner) % p) % 2 == 1)
}
