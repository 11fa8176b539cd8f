//! Gadget constructions from branching programs, garden-hose protocols and
//! the modular-addition chain.

use crate::barrington::{BranchingProgram, Perm5};
use crate::boolcircuit::Owner;
use crate::error::{QheError, Result};
use crate::gardenhose::{bits_per_coordinate, BvChain, Endpoint, GHProtocol, Side};
use crate::quantum::{Gate, StateVector};

use super::{GadgetMasks, GadgetSourceTag, GadgetSpec, MeasurementPlan, SpecPair};

fn check_alternating(program: &BranchingProgram) -> Result<()> {
    if program.is_empty() {
        return Err(QheError::Precondition("empty program gives a gadget with m = 0".into()));
    }
    if !program.is_alternating() {
        return Err(QheError::Precondition("program must alternate CT, SK, … and end with SK".into()));
    }
    Ok(())
}

fn select(program_ins: &crate::barrington::BPInstruction, owner: Owner, bits: &[bool]) -> Result<Perm5> {
    debug_assert_eq!(program_ins.input.owner, owner);
    match owner {
        Owner::Sk => program_ins.select(bits, &[]),
        Owner::Ct => program_ins.select(&[], bits),
    }
}

// Layer j holds in-qubits 1+10j..=5+10j and out-qubits 6+10j..=10+10j.
fn bp_in(j: usize, k: usize) -> usize {
    1 + 10 * j + k
}

fn bp_out(j: usize, k: usize) -> usize {
    1 + 10 * j + 5 + k
}

/// Gadget from an alternating program (CT, SK, …, SK) of length `L`, run
/// forwards and then inverted. Every SK instruction of the doubled program
/// becomes a layer of five EPR pairs `(k_in, σ(k)_out)`, so the gadget has
/// `L` layers and `10L` qubits. Out-positions 2..5 of the last forward layer
/// carry inverse phase gates.
pub fn bp_gadget(sk_bits: &[bool], program: &BranchingProgram) -> Result<GadgetSpec> {
    check_alternating(program)?;
    if sk_bits.len() != program.num_sk_bits() {
        return Err(QheError::DimensionMismatch(format!(
            "program reads {} key bits, got {}",
            program.num_sk_bits(),
            sk_bits.len()
        )));
    }
    let half = program.len() / 2;
    let inverse = program.invert();
    let forward = program.instructions().iter().skip(1).step_by(2);
    let backward = inverse.instructions().iter().step_by(2);
    let mut pairs = Vec::with_capacity(5 * program.len());
    let mut p = Vec::with_capacity(5 * program.len());
    for (j, ins) in forward.chain(backward).enumerate() {
        let sigma = select(ins, Owner::Sk, sk_bits)?;
        for k in 0..5 {
            let target = sigma.apply(k);
            pairs.push(SpecPair { t: bp_in(j, k), s: bp_out(j, target) });
            p.push(j + 1 == half && target != 0);
        }
    }
    GadgetSpec::new(pairs, p, GadgetSourceTag::Bp)
}

/// Measurement plan for [`bp_gadget`] from the ciphertext bits. Depends
/// only on `ct_bits`.
pub fn bp_plan(ct_bits: &[bool], program: &BranchingProgram) -> Result<MeasurementPlan> {
    check_alternating(program)?;
    if ct_bits.len() != program.num_ct_bits() {
        return Err(QheError::DimensionMismatch(format!(
            "program reads {} ciphertext bits, got {}",
            program.num_ct_bits(),
            ct_bits.len()
        )));
    }
    let half = program.len() / 2;
    let layers = 2 * half;
    let inverse = program.invert();
    let forward_ct: Vec<Perm5> =
        program.instructions().iter().step_by(2).map(|ins| select(ins, Owner::Ct, ct_bits)).collect::<Result<_>>()?;
    let backward_ct: Vec<Perm5> = inverse
        .instructions()
        .iter()
        .skip(1)
        .step_by(2)
        .map(|ins| select(ins, Owner::Ct, ct_bits))
        .collect::<Result<_>>()?;
    // Connection applied between layer j and j+1.
    let between = |j: usize| -> Perm5 {
        if j + 1 < half {
            forward_ct[j + 1]
        } else if j + 1 == half {
            Perm5::IDENTITY
        } else {
            backward_ct[j - half]
        }
    };
    let start = forward_ct[0].apply(0);
    let mut pairs = vec![(0, bp_in(0, start))];
    for j in 0..layers - 1 {
        let sigma = between(j);
        for k in 0..5 {
            pairs.push((bp_out(j, k), bp_in(j + 1, sigma.apply(k))));
        }
    }
    for k in (0..5).filter(|&k| k != start) {
        pairs.push((bp_out(layers - 1, k), bp_in(0, k)));
    }
    let plan = MeasurementPlan { pairs, unmeasured_label: bp_out(layers - 1, start) };
    plan.validate(5 * layers)?;
    Ok(plan)
}

fn check_gh(protocol: &GHProtocol) -> Result<()> {
    let report = protocol.validate();
    if !report.valid {
        return Err(QheError::MalformedProtocol(report.issues.join("; ")));
    }
    if protocol.in_side != Side::Bob || protocol.output_one_side != Side::Alice {
        return Err(QheError::Precondition(
            "gadget doubling needs the in terminal on Bob's side and Alice-side exit meaning 1".into(),
        ));
    }
    Ok(())
}

fn pipe_of(ep: Endpoint) -> Result<usize> {
    match ep {
        Endpoint::Pipe(k) => Ok(k),
        Endpoint::In => Err(QheError::MalformedProtocol("unexpected in terminal".into())),
    }
}

/// Gadget from a garden-hose protocol run forwards (pipes `1..=N`) and in
/// reverse (pipes `N+1..=2N`). Label `k` is Bob's end of pipe `k`. Alice's
/// connections become EPR pairs on both copies; each pipe Alice leaves open
/// is joined to its mirror with an inverse phase gate.
pub fn gh_gadget(protocol: &GHProtocol, alice_input: usize) -> Result<GadgetSpec> {
    check_gh(protocol)?;
    let n = protocol.num_pipes;
    let matching = protocol
        .alice_strategy
        .get(alice_input)
        .ok_or_else(|| QheError::MalformedProtocol(format!("Alice has no strategy for input {alice_input}")))?;
    let mut pairs = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut open = vec![true; n + 1];
    for &(u, v) in matching {
        let (k, l) = (pipe_of(u)?, pipe_of(v)?);
        open[k] = false;
        open[l] = false;
        pairs.push(SpecPair { t: k, s: l });
        p.push(false);
        pairs.push(SpecPair { t: n + k, s: n + l });
        p.push(false);
    }
    for k in (1..=n).filter(|&k| open[k]) {
        pairs.push(SpecPair { t: k, s: n + k });
        p.push(true);
    }
    GadgetSpec::new(pairs, p, GadgetSourceTag::Gh)
}

/// Bob's measurements for [`gh_gadget`]: his connections on both copies,
/// with `in` of the first copy as label 0 and `in` of the second copy as
/// the output position; pipes he leaves open are joined to their mirrors.
pub fn gh_plan(protocol: &GHProtocol, bob_input: usize) -> Result<MeasurementPlan> {
    check_gh(protocol)?;
    let n = protocol.num_pipes;
    let matching = protocol
        .bob_strategy
        .get(bob_input)
        .ok_or_else(|| QheError::MalformedProtocol(format!("Bob has no strategy for input {bob_input}")))?;
    let mut pairs = Vec::with_capacity(n);
    let mut open = vec![true; n + 1];
    let mut unmeasured = 0;
    for &(u, v) in matching {
        match (u, v) {
            (Endpoint::In, Endpoint::Pipe(l)) | (Endpoint::Pipe(l), Endpoint::In) => {
                open[l] = false;
                pairs.push((0, l));
                unmeasured = n + l;
            }
            (Endpoint::Pipe(k), Endpoint::Pipe(l)) => {
                open[k] = false;
                open[l] = false;
                pairs.push((k, l));
                pairs.push((n + k, n + l));
            }
            _ => return Err(QheError::MalformedProtocol("in terminal connected to itself".into())),
        }
    }
    for k in (1..=n).filter(|&k| open[k]) {
        pairs.push((k, n + k));
    }
    let plan = MeasurementPlan { pairs, unmeasured_label: unmeasured };
    plan.validate(n)?;
    Ok(plan)
}

/// A garden-hose gadget produced the physical way: one EPR pair per pipe
/// of both copies, after which Alice performs her Bell measurements.
#[derive(Clone, Debug)]
pub struct PhysicalGadget {
    pub spec: GadgetSpec,
    /// Alice's outcomes, which act as the gadget's Pauli masks.
    pub masks: GadgetMasks,
    /// Qubit of every label (`None` at label 0).
    pub labels: Vec<Option<usize>>,
    /// Post-generation index of every qubit that was in the register before.
    pub survivor_map: Vec<Option<usize>>,
}

/// Creates `2N` pipe EPR pairs `(Alice_k, Bob_k)` in `sv`, applies `P†` to
/// Alice's copy-A end of every open pipe and Bell-measures Alice's ends as
/// [`gh_gadget`] pairs them. The Bob ends then hold `γ_{x,z}` of the
/// returned spec with `(x, z)` equal to Alice's outcomes.
pub fn generate_gh_physical(protocol: &GHProtocol, alice_input: usize, sv: &mut StateVector) -> Result<PhysicalGadget> {
    let spec = gh_gadget(protocol, alice_input)?;
    let n = protocol.num_pipes;
    let before = sv.num_qubits();
    let first = sv.add_qubits(4 * n)?;
    // Pipe k: Alice end at first + 2(k-1), Bob end at first + 2(k-1) + 1.
    let mut alice: Vec<Option<usize>> = vec![None; 2 * n + 1];
    let mut bob: Vec<Option<usize>> = vec![None; 2 * n + 1];
    for k in 1..=2 * n {
        let (a, b) = (first + 2 * (k - 1), first + 2 * (k - 1) + 1);
        sv.create_epr(a, b)?;
        alice[k] = Some(a);
        bob[k] = Some(b);
    }
    let mut survivors: Vec<Option<usize>> = (0..before).map(Some).collect();
    let mut masks = GadgetMasks::zero(spec.m);
    for (i, pr) in spec.pairs.iter().enumerate() {
        let (at, as_) = (alice[pr.t].expect("live"), alice[pr.s].expect("live"));
        if spec.p[i] {
            sv.apply_gate(Gate::Pdg, at)?;
        }
        let (out, remap) = sv.bell_measure(at, as_)?;
        masks.x[i] = out.c;
        masks.z[i] = out.d;
        for q in alice.iter_mut().chain(bob.iter_mut()).chain(survivors.iter_mut()) {
            *q = q.and_then(|x| remap.get(x));
        }
    }
    Ok(PhysicalGadget { spec, masks, labels: bob, survivor_map: survivors })
}

/// Number of addition blocks `K = κ'(⌊log₂ p⌋ + 1)`; the gadget has
/// `2K + 1` blocks of `2p` qubits.
pub fn bv_total_blocks(modulus: u64, dimension: usize) -> usize {
    dimension * bits_per_coordinate(modulus)
}

fn bv_in(p: usize, block: usize, x: usize) -> usize {
    1 + 2 * p * block + x
}

fn bv_out(p: usize, block: usize, x: usize) -> usize {
    1 + 2 * p * block + p + x
}

/// Gadget for `((w − ⟨v, s⟩) mod p) mod 2`: the chain's addition blocks,
/// a phase block with `P†` on odd tracks, then the addition blocks again in
/// reverse order subtracting their addends.
pub fn bv_gadget(chain: &BvChain) -> Result<GadgetSpec> {
    let p = chain.modulus as usize;
    let k = chain.blocks.len();
    let mut pairs = Vec::with_capacity(p * (2 * k + 1));
    let mut marks = Vec::with_capacity(p * (2 * k + 1));
    for (b, blk) in chain.blocks.iter().enumerate() {
        let q = blk.addend as usize;
        for x in 0..p {
            pairs.push(SpecPair { t: bv_in(p, b, x), s: bv_out(p, b, (x + q) % p) });
            marks.push(false);
        }
    }
    for y in 0..p {
        pairs.push(SpecPair { t: bv_in(p, k, y), s: bv_out(p, k, y) });
        marks.push(y % 2 == 1);
    }
    for r in 0..k {
        let q = chain.blocks[k - 1 - r].addend as usize;
        for x in 0..p {
            pairs.push(SpecPair { t: bv_in(p, k + 1 + r, x), s: bv_out(p, k + 1 + r, (x + p - q) % p) });
            marks.push(false);
        }
    }
    GadgetSpec::new(pairs, marks, GadgetSourceTag::Bv)
}

/// Bob's plan for [`bv_gadget`] from the ciphertext `(v, w)`.
pub fn bv_plan(modulus: u64, dimension: usize, v: &[u64], w: u64) -> Result<MeasurementPlan> {
    if v.len() != dimension {
        return Err(QheError::DimensionMismatch(format!("|v| = {}, dimension {dimension}", v.len())));
    }
    for &x in v.iter().chain(std::iter::once(&w)) {
        if x >= modulus {
            return Err(QheError::RingRange { value: x, modulus });
        }
    }
    let p = modulus as usize;
    let nbits = bits_per_coordinate(modulus);
    let k = dimension * nbits;
    let forward_used = |b: usize| v[b / nbits] >> (b % nbits) & 1 == 1;
    let used: Vec<bool> = (0..2 * k + 1)
        .map(|b| match b {
            b if b < k => forward_used(b),
            b if b == k => true,
            b => forward_used(2 * k - b),
        })
        .collect();
    let order: Vec<usize> = (0..2 * k + 1).filter(|&b| used[b]).collect();
    let w = w as usize;
    let reflect = |x: usize| (w + p - x) % p;
    let link = |from: Option<usize>, to: usize, x: usize| {
        if to == k || from == Some(k) {
            reflect(x)
        } else {
            x
        }
    };
    let mut pairs = Vec::with_capacity(p * (2 * k + 1));
    let first = order[0];
    let entry = link(None, first, 0);
    pairs.push((0, bv_in(p, first, entry)));
    for win in order.windows(2) {
        for x in 0..p {
            pairs.push((bv_out(p, win[0], x), bv_in(p, win[1], link(Some(win[0]), win[1], x))));
        }
    }
    let last = *order.last().expect("phase block is always used");
    let exit = if last == k { entry } else { 0 };
    let first_left = (0..p).filter(|&x| x != entry).map(|x| bv_in(p, first, x));
    let last_left = (0..p).filter(|&x| x != exit).map(|x| bv_out(p, last, x));
    pairs.extend(last_left.zip(first_left));
    for b in (0..2 * k + 1).filter(|&b| !used[b]) {
        for x in 0..p {
            pairs.push((bv_in(p, b, x), bv_out(p, b, x)));
        }
    }
    let plan = MeasurementPlan { pairs, unmeasured_label: bv_out(p, last, exit) };
    plan.validate(p * (2 * k + 1))?;
    Ok(plan)
}
