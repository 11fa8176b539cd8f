//! T-gate correction gadgets.
//!
//! A gadget is a set of EPR pairs over labels `1..=2m`, some carrying an
//! inverse phase gate, prepared by the key holder from the secret key. The
//! evaluator consumes it with Bell measurements over labels `0..=2m`, where
//! label 0 is the qubit to correct, and follows the key-update recurrence to
//! learn the new one-time-pad keys.

mod build;
mod homomorphic;
mod symbolic;

pub use build::{
    bp_gadget, bp_plan, bv_gadget, bv_plan, bv_total_blocks, generate_gh_physical, gh_gadget, gh_plan, PhysicalGadget,
};
pub use homomorphic::{
    encrypt_gadget_info, key_update_expr, key_update_expr_steps, key_update_homomorphic, key_update_inputs,
    ClassicalGadgetInfo, HomomorphicUpdate,
};
pub use symbolic::{symbolic_consume, PairTracker, SymbolicRun};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QheError, Result};
use crate::quantum::{BellOutcome, Gate, StateVector};

/// Which construction produced a gadget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GadgetSourceTag {
    Bp,
    Gh,
    Bv,
}

/// An EPR pair of a gadget. The inverse phase gate and Pauli masks act on
/// `s`; a qubit entering a marked pair must enter at `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecPair {
    pub s: usize,
    pub t: usize,
}

impl SpecPair {
    pub fn contains(&self, l: usize) -> bool {
        self.s == l || self.t == l
    }

    pub fn other(&self, l: usize) -> usize {
        if self.s == l {
            self.t
        } else {
            self.s
        }
    }
}

/// Classical description of a gadget.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetSpec {
    pub m: usize,
    pub pairs: Vec<SpecPair>,
    /// Inverse-phase marks, one per pair.
    pub p: Vec<bool>,
    pub source: GadgetSourceTag,
    pub sk_keyset_index: usize,
    pub classical_key_index: usize,
}

impl GadgetSpec {
    pub fn new(pairs: Vec<SpecPair>, p: Vec<bool>, source: GadgetSourceTag) -> Result<Self> {
        let spec = GadgetSpec { m: pairs.len(), pairs, p, source, sk_keyset_index: 0, classical_key_index: 1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_qubits(&self) -> usize {
        2 * self.m
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(QheError::MalformedGadget("a gadget needs at least one pair".into()));
        }
        if self.pairs.len() != self.m || self.p.len() != self.m {
            return Err(QheError::MalformedGadget(format!(
                "m = {} but {} pairs and {} marks",
                self.m,
                self.pairs.len(),
                self.p.len()
            )));
        }
        let mut seen = vec![false; 2 * self.m + 1];
        for pr in &self.pairs {
            for l in [pr.s, pr.t] {
                if l == 0 || l > 2 * self.m {
                    return Err(QheError::MalformedGadget(format!("label {l} outside 1..={}", 2 * self.m)));
                }
                if seen[l] {
                    return Err(QheError::MalformedGadget(format!("label {l} used twice")));
                }
                seen[l] = true;
            }
        }
        Ok(())
    }

    pub fn pair_containing(&self, l: usize) -> Option<usize> {
        self.pairs.iter().position(|p| p.contains(l))
    }
}

/// Pauli masks applied to the `s` side of each pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetMasks {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
}

impl GadgetMasks {
    pub fn zero(m: usize) -> Self {
        GadgetMasks { x: vec![false; m], z: vec![false; m] }
    }

    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        GadgetMasks { x: (0..m).map(|_| rng.gen()).collect(), z: (0..m).map(|_| rng.gen()).collect() }
    }

    /// The masks whose bits are given by the integer `code` (x bits low).
    pub fn from_code(m: usize, code: u64) -> Self {
        GadgetMasks {
            x: (0..m).map(|i| code >> i & 1 == 1).collect(),
            z: (0..m).map(|i| code >> (m + i) & 1 == 1).collect(),
        }
    }
}

/// The evaluator's Bell-measurement pairing over labels `0..=2m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub pairs: Vec<(usize, usize)>,
    pub unmeasured_label: usize,
}

impl MeasurementPlan {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.pairs.len() != m {
            return Err(QheError::MalformedGadget(format!("plan has {} pairs, gadget has {m}", self.pairs.len())));
        }
        let mut seen = vec![false; 2 * m + 1];
        for &(u, v) in &self.pairs {
            for l in [u, v] {
                if l > 2 * m {
                    return Err(QheError::MalformedGadget(format!("plan label {l} outside 0..={}", 2 * m)));
                }
                if seen[l] {
                    return Err(QheError::MalformedGadget(format!("plan label {l} used twice")));
                }
                seen[l] = true;
            }
        }
        let free: Vec<usize> = (0..=2 * m).filter(|&l| !seen[l]).collect();
        if free != [self.unmeasured_label] {
            return Err(QheError::MalformedGadget(format!(
                "uncovered labels {free:?}, declared output {}",
                self.unmeasured_label
            )));
        }
        Ok(())
    }

    pub fn pair_containing(&self, l: usize) -> Option<usize> {
        self.pairs.iter().position(|&(u, v)| u == l || v == l)
    }
}

/// Result of the key-update recurrence. The corrected qubit sits at
/// `location` in state `P^q X^a Z^b |ψ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyUpdate {
    pub a: bool,
    pub b: bool,
    pub location: usize,
    pub q: bool,
}

/// Follows the qubit from label 0 through the plan and the gadget, updating
/// the pad keys `(a, b)` and the residual phase flag `q` (initially `a`).
pub fn key_update_plaintext(
    spec: &GadgetSpec,
    plan: &MeasurementPlan,
    outcomes: &[BellOutcome],
    masks: &GadgetMasks,
    a: bool,
    b: bool,
) -> Result<KeyUpdate> {
    let m = spec.m;
    if outcomes.len() != m || masks.x.len() != m || masks.z.len() != m || plan.pairs.len() != m {
        return Err(QheError::DimensionMismatch(format!(
            "m = {m}: {} outcomes, {}/{} masks, {} plan pairs",
            outcomes.len(),
            masks.x.len(),
            masks.z.len(),
            plan.pairs.len()
        )));
    }
    let (mut a, mut b, mut q, mut r) = (a, b, a, 0usize);
    for _ in 0..=m {
        if r == plan.unmeasured_label {
            return Ok(KeyUpdate { a, b, location: r, q });
        }
        let i = plan
            .pair_containing(r)
            .ok_or_else(|| QheError::MalformedGadget(format!("path breaks at label {r}: no measurement")))?;
        let o = outcomes[i];
        a ^= o.c;
        b ^= o.d ^ (q & o.c);
        let (u, v) = plan.pairs[i];
        let entered = if u == r { v } else { u };
        let j = spec
            .pair_containing(entered)
            .ok_or_else(|| QheError::MalformedGadget(format!("path breaks at label {entered}: no EPR pair")))?;
        let (pj, xj, zj) = (spec.p[j], masks.x[j], masks.z[j]);
        b ^= zj ^ (pj & !q) ^ (xj & (pj ^ q));
        q ^= pj;
        a ^= xj;
        r = spec.pairs[j].other(entered);
    }
    Err(QheError::MalformedGadget("path does not reach the output label".into()))
}

/// Prepares `γ_{x,z}(g)` on `2m` fresh qubits appended to `sv`. Returns the
/// qubit index of every label (`None` at label 0).
pub fn instantiate(spec: &GadgetSpec, masks: &GadgetMasks, sv: &mut StateVector) -> Result<Vec<Option<usize>>> {
    spec.validate()?;
    let first = sv.add_qubits(2 * spec.m)?;
    prepare(spec, masks, sv, first)
}

/// `γ_{x,z}(g)` alone, with label `l` on qubit `l - 1`.
pub fn gamma_state(spec: &GadgetSpec, masks: &GadgetMasks, seed: u64) -> Result<StateVector> {
    spec.validate()?;
    let mut sv = StateVector::new(2 * spec.m, seed)?;
    prepare(spec, masks, &mut sv, 0)?;
    Ok(sv)
}

fn prepare(spec: &GadgetSpec, masks: &GadgetMasks, sv: &mut StateVector, first: usize) -> Result<Vec<Option<usize>>> {
    if masks.x.len() != spec.m || masks.z.len() != spec.m {
        return Err(QheError::DimensionMismatch(format!("masks for m = {}", spec.m)));
    }
    let map: Vec<Option<usize>> = std::iter::once(None).chain((0..2 * spec.m).map(|k| Some(first + k))).collect();
    for (i, pr) in spec.pairs.iter().enumerate() {
        let (t, s) = (map[pr.t].expect("set above"), map[pr.s].expect("set above"));
        sv.create_epr(t, s)?;
        if spec.p[i] {
            sv.apply_gate(Gate::Pdg, s)?;
        }
        if masks.z[i] {
            sv.apply_gate(Gate::Z, s)?;
        }
        if masks.x[i] {
            sv.apply_gate(Gate::X, s)?;
        }
    }
    Ok(map)
}

/// Outcomes per plan pair and the qubit now holding the corrected state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsumeResult {
    pub outcomes: Vec<BellOutcome>,
    pub output_qubit: usize,
    /// Post-measurement index of every qubit that was in the register
    /// before consumption (`None` if measured).
    pub survivor_map: Vec<Option<usize>>,
}

/// Runs the plan's Bell measurements in order. `labels[l]` is the qubit of
/// label `l` for `l ≥ 1`; label 0 is `input_qubit`.
pub fn consume(
    labels: &[Option<usize>],
    plan: &MeasurementPlan,
    input_qubit: usize,
    sv: &mut StateVector,
) -> Result<ConsumeResult> {
    let m = plan.pairs.len();
    plan.validate(m)?;
    if labels.len() != 2 * m + 1 {
        return Err(QheError::DimensionMismatch(format!("{} labels for m = {m}", labels.len())));
    }
    let mut qubit: Vec<Option<usize>> = labels.to_vec();
    qubit[0] = Some(input_qubit);
    let mut survivors: Vec<Option<usize>> = (0..sv.num_qubits()).map(Some).collect();
    let mut outcomes = Vec::with_capacity(m);
    for &(u, v) in &plan.pairs {
        let (qu, qv) = match (qubit[u], qubit[v]) {
            (Some(x), Some(y)) if x != y => (x, y),
            _ => return Err(QheError::MalformedGadget(format!("labels {u} and {v} do not name two live qubits"))),
        };
        let (out, remap) = sv.bell_measure(qu, qv)?;
        outcomes.push(out);
        for q in qubit.iter_mut().chain(survivors.iter_mut()) {
            *q = q.and_then(|x| remap.get(x));
        }
    }
    let output_qubit =
        qubit[plan.unmeasured_label].ok_or_else(|| QheError::MalformedGadget("output label was measured".into()))?;
    Ok(ConsumeResult { outcomes, output_qubit, survivor_map: survivors })
}

/// A random gadget with `m` pairs and a random plan, with every pair on
/// the path from label 0 oriented so the qubit enters at `t`.
pub fn random_instance<R: Rng + ?Sized>(m: usize, rng: &mut R) -> (GadgetSpec, MeasurementPlan) {
    let mut labels: Vec<usize> = (1..=2 * m).collect();
    labels.shuffle(rng);
    let mut pairs: Vec<SpecPair> = labels.chunks(2).map(|c| SpecPair { t: c[0], s: c[1] }).collect();
    let p: Vec<bool> = (0..m).map(|_| rng.gen()).collect();
    let mut plan_labels: Vec<usize> = (0..=2 * m).collect();
    plan_labels.shuffle(rng);
    let unmeasured_label = plan_labels.pop().expect("2m + 1 labels");
    let plan = MeasurementPlan { pairs: plan_labels.chunks(2).map(|c| (c[0], c[1])).collect(), unmeasured_label };
    let mut r = 0;
    while r != unmeasured_label {
        let (u, v) = plan.pairs[plan.pair_containing(r).expect("plan covers every other label")];
        let entered = if u == r { v } else { u };
        let j = pairs.iter().position(|pr| pr.contains(entered)).expect("spec covers 1..=2m");
        pairs[j] = SpecPair { t: entered, s: pairs[j].other(entered) };
        r = pairs[j].s;
    }
    (GadgetSpec::new(pairs, p, GadgetSourceTag::Gh).expect("valid by construction"), plan)
}

#[cfg(test)]
mod tests;
