//! Fan-in-2 boolean circuits whose inputs are split between secret-key bits
//! and ciphertext bits.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{QheError, Result};
use crate::funcexpr::FuncExpr;

/// Which party's string an input bit belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Owner {
    Sk,
    Ct,
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Owner::Sk => "SK",
            Owner::Ct => "CT",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputRef {
    pub owner: Owner,
    pub index: usize,
}

impl InputRef {
    pub fn sk(index: usize) -> Self {
        InputRef { owner: Owner::Sk, index }
    }

    pub fn ct(index: usize) -> Self {
        InputRef { owner: Owner::Ct, index }
    }

    pub fn read(&self, sk_bits: &[bool], ct_bits: &[bool]) -> Result<bool> {
        let bits = match self.owner {
            Owner::Sk => sk_bits,
            Owner::Ct => ct_bits,
        };
        bits.get(self.index).copied().ok_or(QheError::IndexOutOfRange { index: self.index, size: bits.len() })
    }
}

impl fmt::Display for InputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.owner, self.index)
    }
}

pub type GateId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolGate {
    Input(InputRef),
    Not(GateId),
    And(GateId, GateId),
    Or(GateId, GateId),
    Xor(GateId, GateId),
}

/// A circuit stored as a topologically ordered gate list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolCircuit {
    gates: Vec<BoolGate>,
    output: GateId,
    num_sk_bits: usize,
    num_ct_bits: usize,
}

/// Incremental builder; gates can only refer to earlier gates, so every
/// built circuit is acyclic.
#[derive(Clone, Debug, Default)]
pub struct CircuitBuilder {
    gates: Vec<BoolGate>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, g: BoolGate) -> GateId {
        self.gates.push(g);
        self.gates.len() - 1
    }

    pub fn input(&mut self, r: InputRef) -> GateId {
        self.push(BoolGate::Input(r))
    }

    pub fn sk(&mut self, i: usize) -> GateId {
        self.input(InputRef::sk(i))
    }

    pub fn ct(&mut self, i: usize) -> GateId {
        self.input(InputRef::ct(i))
    }

    pub fn not(&mut self, a: GateId) -> GateId {
        self.push(BoolGate::Not(a))
    }

    pub fn and(&mut self, a: GateId, b: GateId) -> GateId {
        self.push(BoolGate::And(a, b))
    }

    pub fn or(&mut self, a: GateId, b: GateId) -> GateId {
        self.push(BoolGate::Or(a, b))
    }

    pub fn xor(&mut self, a: GateId, b: GateId) -> GateId {
        self.push(BoolGate::Xor(a, b))
    }

    /// Finishes with `output` as the result. Arities default to one more
    /// than the highest referenced index.
    pub fn build(self, output: GateId) -> Result<BoolCircuit> {
        let (mut sk, mut ct) = (0, 0);
        for g in &self.gates {
            if let BoolGate::Input(r) = g {
                match r.owner {
                    Owner::Sk => sk = sk.max(r.index + 1),
                    Owner::Ct => ct = ct.max(r.index + 1),
                }
            }
        }
        BoolCircuit::new(self.gates, output, sk, ct)
    }

    pub fn build_with_arity(self, output: GateId, num_sk: usize, num_ct: usize) -> Result<BoolCircuit> {
        BoolCircuit::new(self.gates, output, num_sk, num_ct)
    }
}

impl BoolCircuit {
    pub fn new(gates: Vec<BoolGate>, output: GateId, num_sk_bits: usize, num_ct_bits: usize) -> Result<Self> {
        for (i, g) in gates.iter().enumerate() {
            let ok = match *g {
                BoolGate::Input(r) => match r.owner {
                    Owner::Sk => r.index < num_sk_bits,
                    Owner::Ct => r.index < num_ct_bits,
                },
                BoolGate::Not(a) => a < i,
                BoolGate::And(a, b) | BoolGate::Or(a, b) | BoolGate::Xor(a, b) => a < i && b < i,
            };
            if !ok {
                return Err(QheError::Precondition(format!("invalid circuit gate {i}: {g:?}")));
            }
        }
        if output >= gates.len() {
            return Err(QheError::Precondition("circuit output refers to a missing gate".into()));
        }
        Ok(BoolCircuit { gates, output, num_sk_bits, num_ct_bits })
    }

    pub fn gates(&self) -> &[BoolGate] {
        &self.gates
    }

    pub fn output(&self) -> GateId {
        self.output
    }

    pub fn num_sk_bits(&self) -> usize {
        self.num_sk_bits
    }

    pub fn num_ct_bits(&self) -> usize {
        self.num_ct_bits
    }

    fn check_arity(&self, sk_bits: &[bool], ct_bits: &[bool]) -> Result<()> {
        if sk_bits.len() != self.num_sk_bits || ct_bits.len() != self.num_ct_bits {
            return Err(QheError::DimensionMismatch(format!(
                "circuit takes {}+{} bits, got {}+{}",
                self.num_sk_bits,
                self.num_ct_bits,
                sk_bits.len(),
                ct_bits.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, sk_bits: &[bool], ct_bits: &[bool]) -> Result<bool> {
        self.check_arity(sk_bits, ct_bits)?;
        let mut v: Vec<bool> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let x = match *g {
                BoolGate::Input(r) => r.read(sk_bits, ct_bits)?,
                BoolGate::Not(a) => !v[a],
                BoolGate::And(a, b) => v[a] & v[b],
                BoolGate::Or(a, b) => v[a] | v[b],
                BoolGate::Xor(a, b) => v[a] ^ v[b],
            };
            v.push(x);
        }
        Ok(v[self.output])
    }

    /// Depth of the output gate; inputs have depth 0 and every other gate
    /// (including NOT) adds one.
    pub fn depth(&self) -> usize {
        self.depths(|_| 1)[self.output]
    }

    /// Number of AND gates on the deepest path to the output.
    pub fn and_depth(&self) -> usize {
        self.depths(|g| matches!(g, BoolGate::And(..)) as usize)[self.output]
    }

    fn depths(&self, weight: impl Fn(&BoolGate) -> usize) -> Vec<usize> {
        let mut d: Vec<usize> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let x = match *g {
                BoolGate::Input(_) => 0,
                BoolGate::Not(a) => d[a] + weight(g),
                BoolGate::And(a, b) | BoolGate::Or(a, b) | BoolGate::Xor(a, b) => d[a].max(d[b]) + weight(g),
            };
            d.push(x);
        }
        d
    }

    pub fn is_and_not_only(&self) -> bool {
        self.gates.iter().all(|g| matches!(g, BoolGate::Input(_) | BoolGate::Not(_) | BoolGate::And(..)))
    }

    /// Rewrites OR and XOR in terms of AND and NOT:
    /// `a ∨ b = ¬(¬a ∧ ¬b)` and `a ⊕ b = ¬(¬(a ∧ ¬b) ∧ ¬(¬a ∧ b))`.
    pub fn desugar(&self) -> BoolCircuit {
        let mut b = CircuitBuilder::new();
        let mut map = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let id = match *g {
                BoolGate::Input(r) => b.input(r),
                BoolGate::Not(x) => b.not(map[x]),
                BoolGate::And(x, y) => b.and(map[x], map[y]),
                BoolGate::Or(x, y) => {
                    let nx = b.not(map[x]);
                    let ny = b.not(map[y]);
                    let a = b.and(nx, ny);
                    b.not(a)
                }
                BoolGate::Xor(x, y) => {
                    let nx = b.not(map[x]);
                    let ny = b.not(map[y]);
                    let l = b.and(map[x], ny);
                    let r = b.and(nx, map[y]);
                    let nl = b.not(l);
                    let nr = b.not(r);
                    let a = b.and(nl, nr);
                    b.not(a)
                }
            };
            map.push(id);
        }
        BoolCircuit::new(b.gates, map[self.output], self.num_sk_bits, self.num_ct_bits)
            .expect("desugaring preserves validity")
    }

    /// The circuit as a single-output expression over input slots
    /// `sk_0 … sk_{k-1}, ct_0 … ct_{n-1}`.
    pub fn to_funcexpr(&self) -> FuncExpr {
        let mut f = FuncExpr::new(self.num_sk_bits + self.num_ct_bits);
        let mut map = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let id = match *g {
                BoolGate::Input(r) => match r.owner {
                    Owner::Sk => f.input(r.index),
                    Owner::Ct => f.input(self.num_sk_bits + r.index),
                },
                BoolGate::Not(a) => f.not(map[a]),
                BoolGate::And(a, b) => f.and(map[a], map[b]),
                BoolGate::Xor(a, b) => f.xor(map[a], map[b]),
                BoolGate::Or(a, b) => {
                    let x = f.xor(map[a], map[b]);
                    let y = f.and(map[a], map[b]);
                    f.xor(x, y)
                }
            };
            map.push(id);
        }
        f.add_output(map[self.output]);
        f
    }

    /// Random circuit: one input gate per bit, then `num_gates` gates over
    /// earlier gates, the last one being the output.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_sk: usize, num_ct: usize, num_gates: usize) -> BoolCircuit {
        assert!(num_sk + num_ct > 0, "a random circuit needs inputs");
        let mut b = CircuitBuilder::new();
        for i in 0..num_sk {
            b.sk(i);
        }
        for i in 0..num_ct {
            b.ct(i);
        }
        let mut last = 0;
        for _ in 0..num_gates {
            let n = b.gates.len();
            let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
            last = match rng.gen_range(0..4) {
                0 => b.not(x),
                1 => b.and(x, y),
                2 => b.or(x, y),
                _ => b.xor(x, y),
            };
        }
        if num_gates == 0 {
            last = rng.gen_range(0..num_sk + num_ct);
        }
        b.build_with_arity(last, num_sk, num_ct).expect("gates refer to earlier gates")
    }

    /// `SK:0 ⊕ CT:0`, the decryption circuit of both test schemes.
    pub fn xor_sk0_ct0(num_ct_bits: usize) -> BoolCircuit {
        let mut b = CircuitBuilder::new();
        let s = b.sk(0);
        let c = b.ct(0);
        let o = b.xor(s, c);
        b.build_with_arity(o, 1, num_ct_bits).expect("valid by construction")
    }
}
