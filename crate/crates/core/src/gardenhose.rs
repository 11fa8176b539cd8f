//! Garden-hose protocols: two players share pipes and, depending on their
//! private inputs, connect pipe ends on their own side. Water poured in at
//! the `in` terminal flows until it leaves through an unconnected end; the
//! side it leaves on is the protocol's output.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

use crate::error::{QheError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Alice,
    Bob,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Alice => Side::Bob,
            Side::Bob => Side::Alice,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Alice => "Alice",
            Side::Bob => "Bob",
        })
    }
}

/// A pipe end on one player's side. Pipes are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    In,
    Pipe(usize),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::In => f.write_str("in"),
            Endpoint::Pipe(k) => write!(f, "pipe{k}"),
        }
    }
}

/// Hose connections made by one player for one input value.
pub type Matching = Vec<(Endpoint, Endpoint)>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GHProtocol {
    pub num_pipes: usize,
    /// Side holding the `in` terminal.
    pub in_side: Side,
    /// Exiting on this side means output 1.
    pub output_one_side: Side,
    /// Name of Alice's input (for example "sk").
    pub alice_input: String,
    /// Name of Bob's input (for example "ct").
    pub bob_input: String,
    /// `alice_strategy[x]` is Alice's matching on input value `x`.
    pub alice_strategy: Vec<Matching>,
    pub bob_strategy: Vec<Matching>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowResult {
    pub exit_side: Side,
    pub exit_endpoint: Endpoint,
    /// Every endpoint the water touches, with the side it is on.
    pub path: Vec<(Side, Endpoint)>,
}

impl FlowResult {
    pub fn output(&self, protocol: &GHProtocol) -> bool {
        self.exit_side == protocol.output_one_side
    }

    /// Renders e.g. `in → pipe1 → pipe3 → out(Bob)`.
    pub fn render(&self) -> String {
        let mut parts = vec!["in".to_string()];
        let mut last = None;
        for (_, ep) in &self.path {
            if let Endpoint::Pipe(k) = ep {
                if last != Some(*k) {
                    parts.push(format!("pipe{k}"));
                    last = Some(*k);
                }
            }
        }
        parts.push(format!("out({})", self.exit_side));
        parts.join(" → ")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub issues: Vec<String>,
    pub inputs_checked: usize,
}

impl GHProtocol {
    pub fn strategy(&self, side: Side) -> &[Matching] {
        match side {
            Side::Alice => &self.alice_strategy,
            Side::Bob => &self.bob_strategy,
        }
    }

    fn matching(&self, side: Side, input: usize) -> Result<&Matching> {
        let strat = self.strategy(side);
        strat.get(input).ok_or_else(|| {
            QheError::MalformedProtocol(format!("{side} has no strategy for input {input} (domain {})", strat.len()))
        })
    }

    /// Partner of `ep` under `m`, if connected.
    pub fn partner(m: &Matching, ep: Endpoint) -> Option<Endpoint> {
        m.iter().find_map(|&(a, b)| {
            if a == ep {
                Some(b)
            } else if b == ep {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn eval_flow(&self, alice_input: usize, bob_input: usize) -> Result<FlowResult> {
        let alice = self.matching(Side::Alice, alice_input)?;
        let bob = self.matching(Side::Bob, bob_input)?;
        let mut side = self.in_side;
        let mut ep = Endpoint::In;
        let mut path = vec![(side, ep)];
        let mut seen: HashSet<(Side, Endpoint)> = HashSet::from([(side, ep)]);
        loop {
            let m = if side == Side::Alice { alice } else { bob };
            let Some(next) = Self::partner(m, ep) else {
                return Ok(FlowResult { exit_side: side, exit_endpoint: ep, path });
            };
            let Endpoint::Pipe(k) = next else {
                return Err(QheError::MalformedProtocol("water returned to the in terminal".into()));
            };
            if k == 0 || k > self.num_pipes {
                return Err(QheError::MalformedProtocol(format!("pipe {k} out of range 1..={}", self.num_pipes)));
            }
            for step in [(side, next), (side.other(), next)] {
                if !seen.insert(step) {
                    return Err(QheError::MalformedProtocol(format!("cycle at {} {}", step.0, step.1)));
                }
                path.push(step);
            }
            side = side.other();
            ep = next;
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        for side in [Side::Alice, Side::Bob] {
            for (x, m) in self.strategy(side).iter().enumerate() {
                let mut used = HashSet::new();
                for &(a, b) in m {
                    if a == b {
                        issues.push(format!("{side} input {x}: {a} connected to itself"));
                    }
                    for ep in [a, b] {
                        match ep {
                            Endpoint::In if side != self.in_side => {
                                issues.push(format!("{side} input {x}: in terminal is on {}'s side", self.in_side))
                            }
                            Endpoint::Pipe(k) if k == 0 || k > self.num_pipes => {
                                issues.push(format!("{side} input {x}: pipe {k} out of range"))
                            }
                            _ => {}
                        }
                        if !used.insert(ep) {
                            issues.push(format!("{side} input {x}: endpoint {ep} used twice"));
                        }
                    }
                }
            }
        }
        let mut checked = 0;
        if issues.is_empty() {
            for a in 0..self.alice_strategy.len() {
                for b in 0..self.bob_strategy.len() {
                    checked += 1;
                    if let Err(e) = self.eval_flow(a, b) {
                        issues.push(format!("inputs ({a}, {b}): {e}"));
                    }
                }
            }
        }
        ValidationReport { valid: issues.is_empty(), issues, inputs_checked: checked }
    }

    /// Three-pipe protocol computing `sk ⊕ c`. Bob holds `in` and the
    /// ciphertext bit `c`; Alice holds `sk`. Pipes are numbered top-down:
    /// Bob connects `in` to pipe 1 (c = 0) or pipe 2 (c = 1), and Alice
    /// connects pipe 3 to pipe 1 (sk = 0) or pipe 2 (sk = 1). Water leaving
    /// on Bob's side means 0.
    pub fn toy_dec() -> GHProtocol {
        use Endpoint::*;
        GHProtocol {
            num_pipes: 3,
            in_side: Side::Bob,
            output_one_side: Side::Alice,
            alice_input: "sk".into(),
            bob_input: "ct".into(),
            alice_strategy: vec![vec![(Pipe(1), Pipe(3))], vec![(Pipe(2), Pipe(3))]],
            bob_strategy: vec![vec![(In, Pipe(1))], vec![(In, Pipe(2))]],
        }
    }
}

/// One block of the modular-addition chain: `p` tracks wired `x ↦ x + q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BvBlock {
    /// Which coordinate of `s` the block adds.
    pub coord: usize,
    /// Which bit of `v[coord]` switches the block on.
    pub bit: usize,
    /// `2^bit · s[coord] mod p`.
    pub addend: u64,
}

/// Chain of permutation blocks adding `⟨v, s⟩ mod p` to a track index.
/// Alice wires each block from `s`; Bob routes through the blocks whose bit
/// of `v` is set, skipping the rest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BvChain {
    pub modulus: u64,
    pub dimension: usize,
    pub blocks: Vec<BvBlock>,
}

/// One hop of a traced route: the block used and the tracks it connected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BvHop {
    pub block: usize,
    pub in_track: u64,
    pub out_track: u64,
}

pub fn bits_per_coordinate(modulus: u64) -> usize {
    (63 - modulus.leading_zeros() as usize) + 1
}

impl BvChain {
    pub fn new(modulus: u64, dimension: usize, s: &[u64]) -> Result<Self> {
        if modulus < 2 {
            return Err(QheError::Precondition("modulus must be at least 2".into()));
        }
        if modulus > 1 << 16 {
            return Err(QheError::Precondition(format!("modulus {modulus} too large for explicit wiring")));
        }
        if s.len() != dimension {
            return Err(QheError::DimensionMismatch(format!("|s| = {}, dimension {dimension}", s.len())));
        }
        if let Some(&bad) = s.iter().find(|&&x| x >= modulus) {
            return Err(QheError::RingRange { value: bad, modulus });
        }
        let nbits = bits_per_coordinate(modulus);
        let mut blocks = Vec::with_capacity(dimension * nbits);
        for (coord, &si) in s.iter().enumerate() {
            for bit in 0..nbits {
                let addend = ((1u128 << bit) * si as u128 % modulus as u128) as u64;
                blocks.push(BvBlock { coord, bit, addend });
            }
        }
        Ok(BvChain { modulus, dimension, blocks })
    }

    /// Track pairs `(in, out)` of one block.
    pub fn block_wiring(&self, block: usize) -> Vec<(u64, u64)> {
        let q = self.blocks[block].addend;
        (0..self.modulus).map(|x| (x, (x + q) % self.modulus)).collect()
    }

    pub fn block_used(&self, block: usize, v: &[u64]) -> bool {
        let b = &self.blocks[block];
        v[b.coord] >> b.bit & 1 == 1
    }

    /// Follows the flow entering track 0 of the first used block; returns the
    /// hops and the final track.
    pub fn route(&self, v: &[u64]) -> Result<(Vec<BvHop>, u64)> {
        if v.len() != self.dimension {
            return Err(QheError::DimensionMismatch(format!("|v| = {}, dimension {}", v.len(), self.dimension)));
        }
        if let Some(&bad) = v.iter().find(|&&x| x >= self.modulus) {
            return Err(QheError::RingRange { value: bad, modulus: self.modulus });
        }
        let mut track = 0u64;
        let mut hops = Vec::new();
        for block in 0..self.blocks.len() {
            if !self.block_used(block, v) {
                continue;
            }
            let wiring = self.block_wiring(block);
            let out = wiring
                .iter()
                .find(|(i, _)| *i == track)
                .map(|(_, o)| *o)
                .ok_or_else(|| QheError::MalformedProtocol(format!("block {block} has no track {track}")))?;
            hops.push(BvHop { block, in_track: track, out_track: out });
            track = out;
        }
        Ok((hops, track))
    }
}
