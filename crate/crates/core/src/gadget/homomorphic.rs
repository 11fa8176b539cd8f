//! The key-update recurrence as a boolean expression, evaluated under the
//! classical homomorphic scheme.
//!
//! The qubit's location is a one-hot vector over labels `0..=2m`. Finding
//! the pair that contains it is an XOR of ANDs against membership matrices,
//! so the expression has no data-dependent control flow.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classical_he::{HECiphertext, HEKeySet};
use crate::error::{QheError, Result};
use crate::funcexpr::{FuncExpr, NodeId};
use crate::quantum::BellOutcome;

use super::{GadgetMasks, GadgetSpec, MeasurementPlan};

/// Encrypted classical part of a gadget: the pair structure as a membership
/// matrix, the marks, the masks and the secret key it was built from. All
/// lengths depend only on `m` and the key length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalGadgetInfo {
    pub key_index: usize,
    pub m: usize,
    /// Iterations of the update loop. Public and structural: `m` in general,
    /// smaller when every path through the gadget is known to be shorter.
    pub steps: usize,
    /// Row `i`, column `l - 1`: label `l` belongs to pair `i`.
    pub enc_member: Vec<HECiphertext>,
    pub enc_p: Vec<HECiphertext>,
    pub enc_x: Vec<HECiphertext>,
    pub enc_z: Vec<HECiphertext>,
    pub enc_sk: Vec<HECiphertext>,
}

impl ClassicalGadgetInfo {
    pub fn total_bits(&self) -> usize {
        [&self.enc_member, &self.enc_p, &self.enc_x, &self.enc_z, &self.enc_sk]
            .iter()
            .flat_map(|v| v.iter())
            .map(|c| c.len())
            .sum()
    }
}

pub fn encrypt_gadget_info<R: Rng + ?Sized>(
    spec: &GadgetSpec,
    masks: &GadgetMasks,
    sk_bits: &[bool],
    keyset: &HEKeySet,
    rng: &mut R,
) -> ClassicalGadgetInfo {
    let m = spec.m;
    let mut member = Vec::with_capacity(m * 2 * m);
    for pr in &spec.pairs {
        for l in 1..=2 * m {
            member.push(pr.contains(l));
        }
    }
    ClassicalGadgetInfo {
        key_index: keyset.key_index,
        m,
        steps: m,
        enc_member: keyset.enc_string(&member, rng),
        enc_p: keyset.enc_string(&spec.p, rng),
        enc_x: keyset.enc_string(&masks.x, rng),
        enc_z: keyset.enc_string(&masks.z, rng),
        enc_sk: keyset.enc_string(sk_bits, rng),
    }
}

/// Input slots of [`key_update_expr`].
struct Layout {
    m: usize,
}

impl Layout {
    fn a(&self) -> usize {
        0
    }
    fn b(&self) -> usize {
        1
    }
    fn spec_member(&self, i: usize, l: usize) -> usize {
        2 + i * 2 * self.m + (l - 1)
    }
    fn p(&self, i: usize) -> usize {
        2 + 2 * self.m * self.m + i
    }
    fn x(&self, i: usize) -> usize {
        self.p(self.m) + i
    }
    fn z(&self, i: usize) -> usize {
        self.x(self.m) + i
    }
    fn plan_member(&self, i: usize, l: usize) -> usize {
        self.z(self.m) + i * (2 * self.m + 1) + l
    }
    fn c(&self, i: usize) -> usize {
        self.plan_member(self.m, 0) + i
    }
    fn d(&self, i: usize) -> usize {
        self.c(self.m) + i
    }
    fn arity(&self) -> usize {
        self.d(self.m)
    }
}

/// Expression computing `(a', b', q)` of the key-update recurrence for a
/// gadget with `m` pairs. Inputs, in order: `a`, `b`, the gadget membership
/// matrix (`m × 2m`), `p`, `x`, `z`, the plan membership matrix
/// (`m × (2m+1)`), `c`, `d`.
pub fn key_update_expr(m: usize) -> FuncExpr {
    key_update_expr_steps(m, m)
}

/// [`key_update_expr`] unrolled for `steps` iterations. Correct whenever
/// the path from label 0 to the output crosses at most `steps` pairs; once
/// the output is reached no plan pair matches and the state stays fixed.
pub fn key_update_expr_steps(m: usize, steps: usize) -> FuncExpr {
    let lay = Layout { m };
    let mut f = FuncExpr::new(lay.arity());
    let n = 2 * m + 1;
    let inputs: Vec<NodeId> = (0..lay.arity()).map(|s| f.input(s)).collect();
    let zero = f.constant(false);
    let one = f.constant(true);
    let mut r: Vec<NodeId> = (0..n).map(|l| if l == 0 { one } else { zero }).collect();
    let mut a = inputs[lay.a()];
    let mut b = inputs[lay.b()];
    let mut q = a;
    for _ in 0..steps {
        let hitp: Vec<NodeId> = (0..m)
            .map(|i| {
                let terms: Vec<NodeId> = (0..n).map(|l| f.and(r[l], inputs[lay.plan_member(i, l)])).collect();
                f.xor_all(&terms)
            })
            .collect();
        let any = f.xor_all(&hitp);
        let cs: Vec<NodeId> = (0..m).map(|i| f.and(hitp[i], inputs[lay.c(i)])).collect();
        let ds: Vec<NodeId> = (0..m).map(|i| f.and(hitp[i], inputs[lay.d(i)])).collect();
        let c = f.xor_all(&cs);
        let d = f.xor_all(&ds);
        let r_mid: Vec<NodeId> = (0..n)
            .map(|l| {
                let terms: Vec<NodeId> = (0..m).map(|i| f.and(hitp[i], inputs[lay.plan_member(i, l)])).collect();
                let flip = f.xor_all(&terms);
                f.xor(r[l], flip)
            })
            .collect();
        a = f.xor(a, c);
        let qc = f.and(q, c);
        let dq = f.xor(d, qc);
        b = f.xor(b, dq);

        let hits: Vec<NodeId> = (0..m)
            .map(|i| {
                let terms: Vec<NodeId> = (1..n).map(|l| f.and(r_mid[l], inputs[lay.spec_member(i, l)])).collect();
                let h = f.xor_all(&terms);
                f.and(any, h)
            })
            .collect();
        let pick = |f: &mut FuncExpr, slot: &dyn Fn(usize) -> usize| {
            let terms: Vec<NodeId> = (0..m).map(|i| f.and(hits[i], inputs[slot(i)])).collect();
            f.xor_all(&terms)
        };
        let pj = pick(&mut f, &|i| lay.p(i));
        let xj = pick(&mut f, &|i| lay.x(i));
        let zj = pick(&mut f, &|i| lay.z(i));
        // b ^= z ⊕ p(1+q) ⊕ x(p+q)
        let pq = f.and(pj, q);
        let p_not_q = f.xor(pj, pq);
        let p_plus_q = f.xor(pj, q);
        let x_term = f.and(xj, p_plus_q);
        let t1 = f.xor(zj, p_not_q);
        let t2 = f.xor(t1, x_term);
        b = f.xor(b, t2);
        q = f.xor(q, pj);
        a = f.xor(a, xj);
        r = (0..n)
            .map(|l| {
                if l == 0 {
                    return r_mid[0];
                }
                let terms: Vec<NodeId> = (0..m).map(|i| f.and(hits[i], inputs[lay.spec_member(i, l)])).collect();
                let flip = f.xor_all(&terms);
                f.xor(r_mid[l], flip)
            })
            .collect();
    }
    f.add_output(a);
    f.add_output(b);
    f.add_output(q);
    f
}

/// Plaintext input vector for [`key_update_expr`], used by tests and to
/// cross-check the homomorphic path.
pub fn key_update_inputs(
    spec: &GadgetSpec,
    masks: &GadgetMasks,
    plan: &MeasurementPlan,
    outcomes: &[BellOutcome],
    a: bool,
    b: bool,
) -> Vec<bool> {
    let m = spec.m;
    let mut v = vec![a, b];
    for pr in &spec.pairs {
        v.extend((1..=2 * m).map(|l| pr.contains(l)));
    }
    v.extend(&spec.p);
    v.extend(&masks.x);
    v.extend(&masks.z);
    v.extend(plan_bits(plan, m));
    v.extend(outcomes.iter().map(|o| o.c));
    v.extend(outcomes.iter().map(|o| o.d));
    v
}

fn plan_bits(plan: &MeasurementPlan, m: usize) -> Vec<bool> {
    let mut v = Vec::with_capacity(m * (2 * m + 1));
    for &(u, w) in &plan.pairs {
        v.extend((0..=2 * m).map(|l| l == u || l == w));
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomomorphicUpdate {
    pub a: HECiphertext,
    pub b: HECiphertext,
    pub q: HECiphertext,
    pub node_count: usize,
}

/// Runs the key update under `keyset`. The evaluator's own bits (plan and
/// outcomes) are encrypted fresh under the same key first.
pub fn key_update_homomorphic<R: Rng + ?Sized>(
    info: &ClassicalGadgetInfo,
    plan: &MeasurementPlan,
    outcomes: &[BellOutcome],
    enc_a: &HECiphertext,
    enc_b: &HECiphertext,
    keyset: &HEKeySet,
    rng: &mut R,
) -> Result<HomomorphicUpdate> {
    let m = info.m;
    for idx in [info.key_index, enc_a.key_index, enc_b.key_index] {
        if idx != keyset.key_index {
            return Err(QheError::KeyMismatch { expected: keyset.key_index, found: idx });
        }
    }
    plan.validate(m)?;
    if outcomes.len() != m {
        return Err(QheError::DimensionMismatch(format!("{} outcomes for m = {m}", outcomes.len())));
    }
    let f = key_update_expr_steps(m, info.steps);
    let mut cts = vec![enc_a.clone(), enc_b.clone()];
    cts.extend(info.enc_member.iter().cloned());
    cts.extend(info.enc_p.iter().cloned());
    cts.extend(info.enc_x.iter().cloned());
    cts.extend(info.enc_z.iter().cloned());
    cts.extend(keyset.enc_string(&plan_bits(plan, m), rng));
    let cs: Vec<bool> = outcomes.iter().map(|o| o.c).collect();
    let ds: Vec<bool> = outcomes.iter().map(|o| o.d).collect();
    cts.extend(keyset.enc_string(&cs, rng));
    cts.extend(keyset.enc_string(&ds, rng));
    let mut out = keyset.eval(&f, &cts, rng)?;
    let q = out.pop().expect("three outputs");
    let b = out.pop().expect("three outputs");
    let a = out.pop().expect("three outputs");
    Ok(HomomorphicUpdate { a, b, q, node_count: f.size() })
}
