//! Width-5 permutation branching programs and a Barrington-style compiler
//! from fan-in-2 boolean circuits.
//!
//! Permutations act on points from the left to the right: in a program
//! `π₁, π₂, …` a point is first moved by `π₁`, then by `π₂`, and so on.
//! Internally points are `0..5`; text uses 1-based cycle notation.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::boolcircuit::{BoolCircuit, BoolGate, GateId, InputRef, Owner};
use crate::error::{QheError, Result};

pub use crate::boolcircuit::CircuitBuilder;

/// A permutation of `{0,…,4}`; `self.0[x]` is the image of `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Perm5(pub [u8; 5]);

impl Perm5 {
    pub const IDENTITY: Perm5 = Perm5([0, 1, 2, 3, 4]);

    pub fn new(map: [u8; 5]) -> Result<Self> {
        let mut seen = [false; 5];
        for &x in &map {
            if x > 4 || seen[x as usize] {
                return Err(QheError::MalformedProgram(format!("{map:?} is not a permutation of 0..5")));
            }
            seen[x as usize] = true;
        }
        Ok(Perm5(map))
    }

    pub fn apply(&self, x: usize) -> usize {
        self.0[x] as usize
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Perm5) -> Perm5 {
        let mut out = [0u8; 5];
        for (x, o) in out.iter_mut().enumerate() {
            *o = other.0[self.0[x] as usize];
        }
        Perm5(out)
    }

    pub fn inverse(&self) -> Perm5 {
        let mut out = [0u8; 5];
        for x in 0..5 {
            out[self.0[x] as usize] = x as u8;
        }
        Perm5(out)
    }

    pub fn is_identity(&self) -> bool {
        *self == Perm5::IDENTITY
    }

    /// Disjoint cycles of length ≥ 2, each starting at its smallest point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = [false; 5];
        let mut out = Vec::new();
        for start in 0..5 {
            if seen[start] {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut x = self.apply(start);
            while x != start {
                seen[x] = true;
                cyc.push(x);
                x = self.apply(x);
            }
            if cyc.len() > 1 {
                out.push(cyc);
            }
        }
        out
    }

    pub fn is_five_cycle(&self) -> bool {
        let c = self.cycles();
        c.len() == 1 && c[0].len() == 5
    }

    /// The 5-cycle as the point sequence `0, σ(0), σ²(0), …`.
    fn orbit_of_zero(&self) -> [usize; 5] {
        let mut out = [0usize; 5];
        for k in 1..5 {
            out[k] = self.apply(out[k - 1]);
        }
        out
    }

    /// Builds a permutation from 1-based cycles, e.g. `&[&[1,2,3,4,5]]`.
    pub fn from_cycles(cycles: &[&[usize]]) -> Result<Self> {
        let mut map = [0u8, 1, 2, 3, 4];
        let mut used = [false; 5];
        for cyc in cycles {
            for (i, &p) in cyc.iter().enumerate() {
                if !(1..=5).contains(&p) || used[p - 1] {
                    return Err(QheError::MalformedProgram(format!("bad cycle {cyc:?}")));
                }
                used[p - 1] = true;
                map[p - 1] = (cyc[(i + 1) % cyc.len()] - 1) as u8;
            }
        }
        Perm5::new(map)
    }

    pub fn all() -> impl Iterator<Item = Perm5> {
        (0..120usize).map(|mut code| {
            let mut pool: Vec<u8> = (0..5).collect();
            let mut map = [0u8; 5];
            for (i, slot) in map.iter_mut().enumerate() {
                let k = code % (5 - i);
                code /= 5 - i;
                *slot = pool.remove(k);
            }
            Perm5(map)
        })
    }
}

impl fmt::Display for Perm5 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return f.write_str("e");
        }
        for c in cycles {
            f.write_str("(")?;
            for p in c {
                write!(f, "{}", p + 1)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl FromStr for Perm5 {
    type Err = QheError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "e" {
            return Ok(Perm5::IDENTITY);
        }
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.split_once(')'))
                .ok_or_else(|| QheError::MalformedProgram(format!("cannot parse permutation '{s}'")))?;
            let cyc = inner
                .0
                .chars()
                .map(|ch| ch.to_digit(10).map(|d| d as usize))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| QheError::MalformedProgram(format!("cannot parse permutation '{s}'")))?;
            cycles.push(cyc);
            rest = inner.1.trim_start();
        }
        let refs: Vec<&[usize]> = cycles.iter().map(|c| c.as_slice()).collect();
        Perm5::from_cycles(&refs)
    }
}

/// `⟨i, σ¹, σ⁰⟩`: apply `sigma_one` if the referenced bit is 1, else `sigma_zero`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BPInstruction {
    pub input: InputRef,
    pub sigma_one: Perm5,
    pub sigma_zero: Perm5,
}

impl BPInstruction {
    pub fn new(input: InputRef, sigma_one: Perm5, sigma_zero: Perm5) -> Self {
        BPInstruction { input, sigma_one, sigma_zero }
    }

    /// An instruction that always applies the identity.
    pub fn dummy(owner: Owner) -> Self {
        BPInstruction::new(InputRef { owner, index: 0 }, Perm5::IDENTITY, Perm5::IDENTITY)
    }

    /// Constant instructions do not read their bit.
    pub fn is_constant(&self) -> bool {
        self.sigma_one == self.sigma_zero
    }

    pub fn select(&self, sk_bits: &[bool], ct_bits: &[bool]) -> Result<Perm5> {
        if self.is_constant() {
            return Ok(self.sigma_one);
        }
        Ok(if self.input.read(sk_bits, ct_bits)? { self.sigma_one } else { self.sigma_zero })
    }

    pub fn inverse(&self) -> Self {
        BPInstruction::new(self.input, self.sigma_one.inverse(), self.sigma_zero.inverse())
    }
}

impl fmt::Display for BPInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.input, self.sigma_one, self.sigma_zero)
    }
}

/// Serialized as its text form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BranchingProgram {
    instructions: Vec<BPInstruction>,
    accepting_cycle: Perm5,
    num_sk_bits: usize,
    num_ct_bits: usize,
}

impl BranchingProgram {
    pub fn new(
        instructions: Vec<BPInstruction>,
        accepting_cycle: Perm5,
        num_sk_bits: usize,
        num_ct_bits: usize,
    ) -> Result<Self> {
        if !accepting_cycle.is_five_cycle() {
            return Err(QheError::MalformedProgram(format!(
                "accepting permutation {accepting_cycle} is not a 5-cycle"
            )));
        }
        for (l, ins) in instructions.iter().enumerate() {
            let arity = match ins.input.owner {
                Owner::Sk => num_sk_bits,
                Owner::Ct => num_ct_bits,
            };
            if !ins.is_constant() && ins.input.index >= arity {
                return Err(QheError::MalformedProgram(format!(
                    "instruction {l} reads {} beyond arity {arity}",
                    ins.input
                )));
            }
        }
        Ok(BranchingProgram { instructions, accepting_cycle, num_sk_bits, num_ct_bits })
    }

    pub fn instructions(&self) -> &[BPInstruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn accepting_cycle(&self) -> Perm5 {
        self.accepting_cycle
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
                "program takes {}+{} bits, got {}+{}",
                self.num_sk_bits,
                self.num_ct_bits,
                sk_bits.len(),
                ct_bits.len()
            )));
        }
        Ok(())
    }

    /// Product of the selected permutations, first instruction first.
    pub fn compose_on_input(&self, sk_bits: &[bool], ct_bits: &[bool]) -> Result<Perm5> {
        self.check_arity(sk_bits, ct_bits)?;
        let mut prod = Perm5::IDENTITY;
        for ins in &self.instructions {
            prod = prod.then(&ins.select(sk_bits, ct_bits)?);
        }
        Ok(prod)
    }

    pub fn eval(&self, sk_bits: &[bool], ct_bits: &[bool]) -> Result<bool> {
        let prod = self.compose_on_input(sk_bits, ct_bits)?;
        if prod.is_identity() {
            Ok(false)
        } else if prod == self.accepting_cycle {
            Ok(true)
        } else {
            Err(QheError::MalformedProgram(format!(
                "product {prod} is neither e nor the accepting cycle {}",
                self.accepting_cycle
            )))
        }
    }

    /// Reverses the instruction order and inverts every permutation.
    pub fn invert(&self) -> BranchingProgram {
        BranchingProgram {
            instructions: self.instructions.iter().rev().map(BPInstruction::inverse).collect(),
            accepting_cycle: self.accepting_cycle.inverse(),
            num_sk_bits: self.num_sk_bits,
            num_ct_bits: self.num_ct_bits,
        }
    }

    /// Inserts identity dummies so owners run CT, SK, CT, SK, … and the
    /// program ends on SK.
    pub fn alternate(&self) -> BranchingProgram {
        let mut out = Vec::with_capacity(2 * self.instructions.len() + 2);
        let mut expected = Owner::Ct;
        for ins in &self.instructions {
            if ins.input.owner != expected {
                out.push(BPInstruction::dummy(expected));
            }
            out.push(*ins);
            expected = flip(ins.input.owner);
        }
        if expected == Owner::Sk && !out.is_empty() {
            out.push(BPInstruction::dummy(Owner::Sk));
        }
        BranchingProgram { instructions: out, ..self.clone() }
    }

    pub fn is_alternating(&self) -> bool {
        self.instructions.len().is_multiple_of(2)
            && self
                .instructions
                .iter()
                .enumerate()
                .all(|(i, ins)| ins.input.owner == if i % 2 == 0 { Owner::Ct } else { Owner::Sk })
    }

    /// The four-instruction OR program over one ciphertext bit (the first
    /// variable) and one secret-key bit (the second).
    pub fn or_example() -> BranchingProgram {
        let p = |s: &str| s.parse::<Perm5>().expect("literal permutation");
        let a = InputRef::ct(0);
        let b = InputRef::sk(0);
        let instructions = vec![
            BPInstruction::new(a, Perm5::IDENTITY, p("(12345)")),
            BPInstruction::new(b, Perm5::IDENTITY, p("(12453)")),
            BPInstruction::new(a, Perm5::IDENTITY, p("(54321)")),
            BPInstruction::new(b, p("(14235)"), p("(15243)")),
        ];
        let tmp = BranchingProgram { instructions, accepting_cycle: p("(12345)"), num_sk_bits: 1, num_ct_bits: 1 };
        let accept = tmp.compose_on_input(&[true], &[true]).expect("arity fixed");
        BranchingProgram { accepting_cycle: accept, ..tmp }
    }

    /// Text form: `accept`, `sk`, `ct` header lines then one
    /// `OWNER:index σ¹ σ⁰` instruction per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("accept {}\nsk {}\nct {}\n", self.accepting_cycle, self.num_sk_bits, self.num_ct_bits);
        for ins in &self.instructions {
            s.push_str(&ins.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut accept = None;
        let (mut sk, mut ct) = (None, None);
        let mut instructions = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| QheError::Parse { line: n + 1, message: m };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["accept", p] => accept = Some(p.parse::<Perm5>().map_err(|e| err(e.to_string()))?),
                ["sk", k] => sk = Some(k.parse::<usize>().map_err(|e| err(e.to_string()))?),
                ["ct", k] => ct = Some(k.parse::<usize>().map_err(|e| err(e.to_string()))?),
                [input, one, zero] => {
                    let (owner, idx) = input.split_once(':').ok_or_else(|| err(format!("bad input '{input}'")))?;
                    let owner = match owner {
                        "SK" => Owner::Sk,
                        "CT" => Owner::Ct,
                        _ => return Err(err(format!("bad owner '{owner}'"))),
                    };
                    let index = idx.parse::<usize>().map_err(|e| err(e.to_string()))?;
                    let one = one.parse::<Perm5>().map_err(|e| err(e.to_string()))?;
                    let zero = zero.parse::<Perm5>().map_err(|e| err(e.to_string()))?;
                    instructions.push(BPInstruction::new(InputRef { owner, index }, one, zero));
                }
                _ => return Err(err(format!("unrecognized line '{line}'"))),
            }
        }
        let accept = accept.ok_or(QheError::Parse { line: 0, message: "missing accept line".into() })?;
        BranchingProgram::new(instructions, accept, sk.unwrap_or(0), ct.unwrap_or(0))
    }
}

impl TryFrom<String> for BranchingProgram {
    type Error = QheError;

    fn try_from(s: String) -> Result<Self> {
        BranchingProgram::from_text(&s)
    }
}

impl From<BranchingProgram> for String {
    fn from(p: BranchingProgram) -> String {
        p.to_text()
    }
}

fn flip(o: Owner) -> Owner {
    match o {
        Owner::Sk => Owner::Ct,
        Owner::Ct => Owner::Sk,
    }
}

/// 5-cycles `α, β` whose commutator `α;β;α⁻¹;β⁻¹` is again a 5-cycle,
/// found by exhaustive search over S₅ and cached.
pub fn commutator_cycles() -> (Perm5, Perm5, Perm5) {
    static FOUND: OnceLock<(Perm5, Perm5, Perm5)> = OnceLock::new();
    *FOUND.get_or_init(|| {
        let cycles: Vec<Perm5> = Perm5::all().filter(Perm5::is_five_cycle).collect();
        for a in &cycles {
            for b in &cycles {
                let comm = a.then(b).then(&a.inverse()).then(&b.inverse());
                if comm.is_five_cycle() {
                    return (*a, *b, comm);
                }
            }
        }
        unreachable!("S5 contains 5-cycles with a 5-cycle commutator")
    })
}

/// `θ` with `θ⁻¹;from;θ = to` for 5-cycles `from` and `to`.
fn conjugator(from: &Perm5, to: &Perm5) -> Perm5 {
    let (g, s) = (from.orbit_of_zero(), to.orbit_of_zero());
    let mut map = [0u8; 5];
    for k in 0..5 {
        map[g[k]] = s[k] as u8;
    }
    Perm5(map)
}

fn conj(theta: &Perm5, p: &Perm5) -> Perm5 {
    theta.inverse().then(p).then(theta)
}

/// Compiles a circuit into a width-5 program. OR and XOR are desugared to
/// AND/NOT first; the program length is at most `4^(AND-depth)`.
pub fn compile(circuit: &BoolCircuit) -> BranchingProgram {
    let c = circuit.desugar();
    let (_, _, accept) = commutator_cycles();
    let mut instructions = Vec::new();
    build(&c, c.output(), accept, &mut instructions);
    BranchingProgram::new(instructions, accept, c.num_sk_bits(), c.num_ct_bits())
        .expect("compiled programs are well formed")
}

// Appends a program whose product is `target` when `gate` is 1 and e otherwise.
fn build(c: &BoolCircuit, gate: GateId, target: Perm5, out: &mut Vec<BPInstruction>) {
    match c.gates()[gate] {
        BoolGate::Input(r) => out.push(BPInstruction::new(r, target, Perm5::IDENTITY)),
        BoolGate::Not(g) => {
            build(c, g, target.inverse(), out);
            let last = out.last_mut().expect("child programs are non-empty");
            last.sigma_one = last.sigma_one.then(&target);
            last.sigma_zero = last.sigma_zero.then(&target);
        }
        BoolGate::And(g, h) => {
            let (alpha, beta, comm) = commutator_cycles();
            let theta = conjugator(&comm, &target);
            let a = conj(&theta, &alpha);
            let b = conj(&theta, &beta);
            build(c, g, a, out);
            build(c, h, b, out);
            build(c, g, a.inverse(), out);
            build(c, h, b.inverse(), out);
        }
        BoolGate::Or(..) | BoolGate::Xor(..) => unreachable!("circuit was desugared"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: u32, n: usize) -> Vec<bool> {
        (0..n).map(|i| v >> i & 1 == 1).collect()
    }

    #[test]
    fn cycle_notation_round_trip() {
        for p in Perm5::all() {
            let s = p.to_string();
            assert_eq!(s.parse::<Perm5>().unwrap(), p, "{s}");
        }
        assert_eq!("(12345)".parse::<Perm5>().unwrap().0, [1, 2, 3, 4, 0]);
        assert!("(1123)".parse::<Perm5>().is_err());
    }

    #[test]
    fn all_has_120_distinct() {
        let mut v: Vec<Perm5> = Perm5::all().collect();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 120);
        assert_eq!(v.iter().filter(|p| p.is_five_cycle()).count(), 24);
    }

    #[test]
    fn composition_is_left_to_right() {
        let a: Perm5 = "(12)".parse().unwrap();
        let b: Perm5 = "(23)".parse().unwrap();
        // 1 -a-> 2 -b-> 3
        assert_eq!(a.then(&b).apply(0), 2);
    }

    #[test]
    fn or_example_trace_on_zero_zero() {
        let p = BranchingProgram::or_example();
        let mut point = 0;
        let mut trace = vec![point + 1];
        for ins in p.instructions() {
            point = ins.select(&[false], &[false]).unwrap().apply(point);
            trace.push(point + 1);
        }
        assert_eq!(trace, vec![1, 2, 4, 3, 1]);
        assert!(p.compose_on_input(&[false], &[false]).unwrap().is_identity());
    }

    #[test]
    fn or_example_computes_or() {
        let p = BranchingProgram::or_example();
        assert_eq!(p.len(), 4);
        assert!(p.accepting_cycle().is_five_cycle());
        for a in [false, true] {
            for b in [false, true] {
                assert_eq!(p.eval(&[b], &[a]).unwrap(), a | b);
            }
        }
        assert!(p.is_alternating());
        assert_eq!(p.alternate(), p);
    }

    #[test]
    fn inverted_or_starts_with_last_input() {
        let p = BranchingProgram::or_example();
        let inv = p.invert();
        assert_eq!(inv.instructions()[0].input, p.instructions()[3].input);
        assert_eq!(inv.invert(), p);
    }

    #[test]
    fn empty_program_rejects_everything() {
        let p = BranchingProgram::new(vec![], "(12345)".parse().unwrap(), 1, 1).unwrap();
        for v in 0..4 {
            let b = bits(v, 2);
            assert!(!p.eval(&b[..1], &b[1..]).unwrap());
        }
    }

    #[test]
    fn commutator_is_verified() {
        let (a, b, c) = commutator_cycles();
        assert!(a.is_five_cycle() && b.is_five_cycle() && c.is_five_cycle());
        assert_eq!(a.then(&b).then(&a.inverse()).then(&b.inverse()), c);
    }

    #[test]
    fn identity_and_not_circuits() {
        let mut b = CircuitBuilder::new();
        let x = b.ct(0);
        let id = b.build(x).unwrap();
        let mut b = CircuitBuilder::new();
        let x = b.ct(0);
        let n = b.not(x);
        let neg = b.build(n).unwrap();
        let pid = compile(&id);
        let pneg = compile(&neg);
        assert_eq!(pid.len(), 1);
        assert_eq!(pneg.len(), 1);
        for v in [false, true] {
            assert_eq!(pid.eval(&[], &[v]).unwrap(), v);
            assert_eq!(pneg.eval(&[], &[v]).unwrap(), !v);
        }
    }

    #[test]
    fn two_sk_in_a_row_get_one_ct_dummy() {
        let accept: Perm5 = "(12345)".parse().unwrap();
        let p = BranchingProgram::new(
            vec![
                BPInstruction::new(InputRef::ct(0), accept, Perm5::IDENTITY),
                BPInstruction::new(InputRef::sk(0), Perm5::IDENTITY, Perm5::IDENTITY),
                BPInstruction::new(InputRef::sk(1), Perm5::IDENTITY, Perm5::IDENTITY),
            ],
            accept,
            2,
            1,
        )
        .unwrap();
        let q = p.alternate();
        assert_eq!(q.len(), 4);
        assert!(q.is_alternating());
        assert!(q.instructions()[2].is_constant());
        assert_eq!(q.instructions()[2].input.owner, Owner::Ct);
        for v in 0..8 {
            let b = bits(v, 3);
            assert_eq!(q.compose_on_input(&b[..2], &b[2..]).unwrap(), p.compose_on_input(&b[..2], &b[2..]).unwrap());
        }
    }

    #[test]
    fn text_round_trip() {
        let p = BranchingProgram::or_example();
        let text = p.to_text();
        assert!(text.contains("CT:0 e (12345)"));
        assert_eq!(BranchingProgram::from_text(&text).unwrap(), p);
        assert!(matches!(
            BranchingProgram::from_text("accept (12345)\nXX:0 e e"),
            Err(QheError::Parse { line: 2, .. })
        ));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<BranchingProgram>(&json).unwrap(), p);
    }

    #[test]
    fn non_five_cycle_accept_rejected() {
        assert!(BranchingProgram::new(vec![], "(12)".parse().unwrap(), 0, 0).is_err());
    }
}
