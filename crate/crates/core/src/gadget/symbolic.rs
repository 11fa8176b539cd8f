//! Symbolic gadget consumption by tracking EPR pairs and their operators.
//!
//! Every live qubit is half of a maximally entangled pair `(u, v)` in state
//! `(I_u ⊗ M_v)|Φ+⟩`. A Bell measurement on halves of two different pairs
//! has a uniform outcome and splices them into one pair; a measurement on
//! both halves of one pair has outcome probabilities `|tr(X^c Z^d M)/2|²`.
//! The input qubit is paired with a reference, so the final operator on the
//! output label is exactly what happened to the input.

use rand::Rng;

use crate::error::{QheError, Result};
use crate::quantum::{sample_bell_outcome, BellOutcome, Mat2};

use super::{GadgetMasks, GadgetSpec, KeyUpdate, MeasurementPlan};

/// `partner[u] = (v, M)` with the pair in state `(I_u ⊗ M_v)|Φ+⟩`.
#[derive(Clone, Debug)]
pub struct PairTracker {
    partner: Vec<Option<(usize, Mat2)>>,
}

impl PairTracker {
    pub fn new(num_labels: usize) -> Self {
        PairTracker { partner: vec![None; num_labels] }
    }

    /// Adds the pair `(I_u ⊗ M_v)|Φ+⟩`.
    pub fn add_pair(&mut self, u: usize, v: usize, m: Mat2) -> Result<()> {
        for l in [u, v] {
            if l >= self.partner.len() || self.partner[l].is_some() || u == v {
                return Err(QheError::MalformedGadget(format!("cannot add pair ({u}, {v})")));
            }
        }
        self.partner[u] = Some((v, m));
        self.partner[v] = Some((u, m.transpose()));
        Ok(())
    }

    pub fn partner(&self, u: usize) -> Option<(usize, Mat2)> {
        self.partner.get(u).copied().flatten()
    }

    /// Outcome probabilities of a Bell measurement on `(u, v)`.
    pub fn bell_probabilities(&self, u: usize, v: usize) -> Result<[f64; 4]> {
        let (pu, m) = self.live(u)?;
        self.live(v)?;
        if pu != v {
            return Ok([0.25; 4]);
        }
        let mut probs = [0.0; 4];
        for (i, pr) in probs.iter_mut().enumerate() {
            let o = BellOutcome::from_index(i);
            *pr = ((Mat2::pauli(o.c, o.d) * m).trace() / 2.0).norm_sqr();
        }
        Ok(probs)
    }

    fn live(&self, u: usize) -> Result<(usize, Mat2)> {
        self.partner(u).ok_or_else(|| QheError::MalformedGadget(format!("label {u} is not a live qubit")))
    }

    /// Applies the Bell outcome `o` on `(u, v)` and removes both labels.
    pub fn project(&mut self, u: usize, v: usize, o: BellOutcome) -> Result<()> {
        let (pu, m1_from_u) = self.live(u)?;
        let (pv, m2) = self.live(v)?;
        if u == v {
            return Err(QheError::MalformedGadget(format!("label {u} measured with itself")));
        }
        self.partner[u] = None;
        self.partner[v] = None;
        if pu == v {
            return Ok(());
        }
        // Seen from u's partner the pair is (I_pu ⊗ M1_u).
        let m1 = m1_from_u.transpose();
        let joined = m2 * Mat2::pauli(o.c, o.d) * m1;
        self.partner[pu] = Some((pv, joined));
        self.partner[pv] = Some((pu, joined.transpose()));
        Ok(())
    }

    pub fn measure<R: Rng + ?Sized>(&mut self, u: usize, v: usize, rng: &mut R) -> Result<BellOutcome> {
        let probs = self.bell_probabilities(u, v)?;
        let o = sample_bell_outcome(rng, probs);
        self.project(u, v, o)?;
        Ok(o)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicRun {
    pub outcomes: Vec<BellOutcome>,
    pub output_label: usize,
    /// The operator the gadget applied to the input qubit.
    pub operator: Mat2,
}

impl SymbolicRun {
    /// Checks that the gadget turned `P^a X^a Z^b` on the input into
    /// `P^q X^a' Z^b'` as `k` predicts, up to global phase.
    pub fn corrects(&self, a: bool, b: bool, k: &KeyUpdate) -> bool {
        let input = Mat2::p().pow(a as u32) * Mat2::pauli(a, b);
        let output = Mat2::p().pow(k.q as u32) * Mat2::pauli(k.a, k.b);
        (self.operator * input).eq_up_to_phase(&output, 1e-9)
    }
}

/// Consumes `γ_{x,z}(spec)` along `plan` without amplitudes, drawing
/// outcomes from `rng` exactly as the statevector backend would.
pub fn symbolic_consume<R: Rng + ?Sized>(
    spec: &GadgetSpec,
    masks: &GadgetMasks,
    plan: &MeasurementPlan,
    rng: &mut R,
) -> Result<SymbolicRun> {
    spec.validate()?;
    plan.validate(spec.m)?;
    let m = spec.m;
    let reference = 2 * m + 1;
    let mut tr = PairTracker::new(2 * m + 2);
    tr.add_pair(reference, 0, Mat2::IDENTITY)?;
    for (i, pr) in spec.pairs.iter().enumerate() {
        let mut op = Mat2::pauli(masks.x[i], masks.z[i]);
        if spec.p[i] {
            op = op * Mat2::p().dagger();
        }
        tr.add_pair(pr.t, pr.s, op)?;
    }
    let mut outcomes = Vec::with_capacity(m);
    for &(u, v) in &plan.pairs {
        outcomes.push(tr.measure(u, v, rng)?);
    }
    let (out, operator) =
        tr.partner(reference).ok_or_else(|| QheError::MalformedGadget("reference lost its partner".into()))?;
    if out != plan.unmeasured_label {
        return Err(QheError::MalformedGadget(format!(
            "input ended at label {out}, plan declares {}",
            plan.unmeasured_label
        )));
    }
    Ok(SymbolicRun { outcomes, output_label: out, operator })
}
