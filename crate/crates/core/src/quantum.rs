//! Exact statevector simulation of small qubit registers.
//!
//! Qubit `q` of a register is bit `q` of the basis-state index. Measured
//! qubits are removed from the register; operations that remove qubits return
//! the old-to-new index map so callers can follow their wires.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::error::{QheError, Result};

pub const DEFAULT_QUBIT_CAP: usize = 16;
pub const NORM_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A 2x2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn x() -> Mat2 {
        Mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn z() -> Mat2 {
        Mat2([[ONE, ZERO], [ZERO, -ONE]])
    }

    pub fn p() -> Mat2 {
        Mat2([[ONE, ZERO], [ZERO, I]])
    }

    pub fn h() -> Mat2 {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Mat2([[h, h], [h, -h]])
    }

    pub fn t() -> Mat2 {
        Mat2([[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]])
    }

    /// `X^a Z^b`.
    pub fn pauli(a: bool, b: bool) -> Mat2 {
        let mut m = Mat2::IDENTITY;
        if a {
            m = m * Mat2::x();
        }
        if b {
            m = m * Mat2::z();
        }
        m
    }

    pub fn pow(self, e: u32) -> Mat2 {
        (0..e).fold(Mat2::IDENTITY, |acc, _| acc * self)
    }

    pub fn dagger(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn transpose(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Equality up to a global phase: |tr(A† B)| = ||A|| ||B||.
    pub fn eq_up_to_phase(&self, other: &Mat2, tol: f64) -> bool {
        let inner = (self.dagger() * *other).trace().norm();
        let na = (self.dagger() * *self).trace().re.sqrt();
        let nb = (other.dagger() * *other).trace().re.sqrt();
        (inner - na * nb).abs() < tol
    }

    /// If this matrix is a Pauli `X^a Z^b` up to phase, return `(a, b)`.
    pub fn as_pauli(&self, tol: f64) -> Option<(bool, bool)> {
        for a in [false, true] {
            for b in [false, true] {
                if self.eq_up_to_phase(&Mat2::pauli(a, b), tol) {
                    return Some((a, b));
                }
            }
        }
        None
    }
}

impl std::ops::Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}

/// Single-qubit gates understood by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    X,
    Z,
    P,
    Pdg,
    H,
    T,
    Tdg,
}

impl Gate {
    pub fn matrix(self) -> Mat2 {
        match self {
            Gate::X => Mat2::x(),
            Gate::Z => Mat2::z(),
            Gate::P => Mat2::p(),
            Gate::Pdg => Mat2::p().dagger(),
            Gate::H => Mat2::h(),
            Gate::T => Mat2::t(),
            Gate::Tdg => Mat2::t().dagger(),
        }
    }
}

/// Outcome of a Bell measurement. Under the library's convention, when the
/// first measured qubit carried |ψ⟩ and the second was half of an EPR pair,
/// the other half is left in `X^c Z^d |ψ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BellOutcome {
    pub c: bool,
    pub d: bool,
}

impl BellOutcome {
    pub fn index(self) -> usize {
        (self.c as usize) << 1 | self.d as usize
    }

    pub fn from_index(i: usize) -> Self {
        BellOutcome { c: i & 2 != 0, d: i & 1 != 0 }
    }
}

/// Draws a Bell outcome from probabilities ordered `(c,d) = 00, 01, 10, 11`.
/// Every backend samples through this function so that runs sharing a seed
/// agree outcome for outcome.
pub fn sample_bell_outcome<R: Rng + ?Sized>(rng: &mut R, probs: [f64; 4]) -> BellOutcome {
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if u < acc {
            return BellOutcome::from_index(i);
        }
    }
    BellOutcome::from_index(last_nonzero)
}

/// Maps indices of a register before a measurement to indices after it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexRemap(Vec<Option<usize>>);

impl IndexRemap {
    pub fn get(&self, old: usize) -> Option<usize> {
        self.0.get(old).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.0
    }
}

/// A pure state of `num_qubits` qubits together with the generator used to
/// sample its measurements.
#[derive(Clone)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
    rng: ChaCha8Rng,
    cap: usize,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateVector").field("num_qubits", &self.num_qubits).field("cap", &self.cap).finish()
    }
}

impl StateVector {
    /// `|0…0⟩` on `n` qubits with the default cap.
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        Self::with_cap(n, seed, DEFAULT_QUBIT_CAP)
    }

    pub fn with_cap(n: usize, seed: u64, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(QheError::Precondition("a register needs at least one qubit".into()));
        }
        if n > cap {
            return Err(QheError::Resource { requested: n, cap });
        }
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[0] = ONE;
        Ok(StateVector { num_qubits: n, amplitudes, rng: ChaCha8Rng::seed_from_u64(seed), cap })
    }

    /// Builds a state from explicit amplitudes, normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>, seed: u64) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QheError::DimensionMismatch(format!("{len} is not a power of two ≥ 2")));
        }
        let n = len.trailing_zeros() as usize;
        if n > DEFAULT_QUBIT_CAP {
            return Err(QheError::Resource { requested: n, cap: DEFAULT_QUBIT_CAP });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QheError::Precondition("zero vector".into()));
        }
        Ok(StateVector {
            num_qubits: n,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cap: DEFAULT_QUBIT_CAP,
        })
    }

    /// Haar-ish random state (normalized complex Gaussian amplitudes).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R, seed: u64) -> Result<Self> {
        let amps = (0..1usize << n).map(|_| Complex64::new(gaussian(rng), gaussian(rng))).collect();
        Self::from_amplitudes(amps, seed)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn set_cap(&mut self, cap: usize) {
        self.cap = cap;
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(QheError::IndexOutOfRange { index: q, size: self.num_qubits });
        }
        Ok(())
    }

    /// Appends `k` qubits in `|0⟩`; returns the index of the first new one.
    pub fn add_qubits(&mut self, k: usize) -> Result<usize> {
        let n = self.num_qubits + k;
        if n > self.cap {
            return Err(QheError::Resource { requested: n, cap: self.cap });
        }
        let first = self.num_qubits;
        self.amplitudes.resize(1 << n, ZERO);
        self.num_qubits = n;
        Ok(first)
    }

    /// Tensors another register onto the high end of this one.
    pub fn tensor(&mut self, other: &StateVector) -> Result<usize> {
        let n = self.num_qubits + other.num_qubits;
        if n > self.cap {
            return Err(QheError::Resource { requested: n, cap: self.cap });
        }
        let first = self.num_qubits;
        let mut amps = vec![ZERO; 1 << n];
        for (hi, b) in other.amplitudes.iter().enumerate() {
            if *b == ZERO {
                continue;
            }
            for (lo, a) in self.amplitudes.iter().enumerate() {
                amps[(hi << first) | lo] = a * b;
            }
        }
        self.amplitudes = amps;
        self.num_qubits = n;
        Ok(first)
    }

    /// Reorders qubits so that new qubit `i` is old qubit `order[i]`.
    pub fn permute_qubits(&mut self, order: &[usize]) -> Result<()> {
        let n = self.num_qubits;
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(QheError::DimensionMismatch(format!("{} entries for {n} qubits", order.len())));
        }
        for &o in order {
            self.check(o)?;
            if std::mem::replace(&mut seen[o], true) {
                return Err(QheError::Precondition(format!("qubit {o} listed twice")));
            }
        }
        let mut amps = vec![ZERO; self.amplitudes.len()];
        for (old, a) in self.amplitudes.iter().enumerate() {
            let new = order.iter().enumerate().fold(0, |acc, (i, &o)| acc | ((old >> o & 1) << i));
            amps[new] = *a;
        }
        self.amplitudes = amps;
        Ok(())
    }

    pub fn apply_matrix(&mut self, m: &Mat2, q: usize) -> Result<()> {
        self.check(q)?;
        let bit = 1usize << q;
        let [[m00, m01], [m10, m11]] = m.0;
        // Blocks of 2·bit amplitudes: the lower half has qubit q = 0.
        for block in self.amplitudes.chunks_exact_mut(bit << 1) {
            let (lo, hi) = block.split_at_mut(bit);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a0, *a1);
                *a0 = m00 * x + m01 * y;
                *a1 = m10 * x + m11 * y;
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: Gate, q: usize) -> Result<()> {
        self.check(q)?;
        let bit = 1usize << q;
        match gate {
            Gate::X => {
                for block in self.amplitudes.chunks_exact_mut(bit << 1) {
                    let (lo, hi) = block.split_at_mut(bit);
                    lo.swap_with_slice(hi);
                }
                Ok(())
            }
            Gate::Z => {
                for block in self.amplitudes.chunks_exact_mut(bit << 1) {
                    block[bit..].iter_mut().for_each(|a| *a = -*a);
                }
                Ok(())
            }
            _ => self.apply_matrix(&gate.matrix(), q),
        }
    }

    /// Applies `X^a Z^b` as an operator (Z first, then X).
    pub fn apply_pauli(&mut self, a: bool, b: bool, q: usize) -> Result<()> {
        if b {
            self.apply_gate(Gate::Z, q)?;
        }
        if a {
            self.apply_gate(Gate::X, q)?;
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check(control)?;
        self.check(target)?;
        if control == target {
            return Err(QheError::Precondition("CNOT control equals target".into()));
        }
        let cb = 1usize << control;
        let tb = 1usize << target;
        // Walk only indices with the control set and the target clear.
        let (lo, hi) = (cb.min(tb), cb.max(tb));
        for base in (0..self.amplitudes.len()).step_by(hi << 1) {
            for mid in (base..base + hi).step_by(lo << 1) {
                for i in mid..mid + lo {
                    let i = i | cb;
                    self.amplitudes.swap(i, i | tb);
                }
            }
        }
        Ok(())
    }

    /// Prepares `(|00⟩+|11⟩)/√2` on two qubits that are currently `|0⟩`.
    pub fn create_epr(&mut self, q1: usize, q2: usize) -> Result<()> {
        self.check(q1)?;
        self.check(q2)?;
        if q1 == q2 {
            return Err(QheError::Precondition("EPR pair needs two distinct qubits".into()));
        }
        debug_assert!(self.qubit_is_zero(q1) && self.qubit_is_zero(q2), "create_epr expects both qubits in |0⟩");
        self.apply_gate(Gate::H, q1)?;
        self.apply_cnot(q1, q2)
    }

    fn qubit_is_zero(&self, q: usize) -> bool {
        let bit = 1usize << q;
        self.amplitudes.chunks_exact(bit << 1).all(|block| block[bit..].iter().all(|a| a.norm_sqr() < 1e-20))
    }

    /// Bell-basis probabilities of the pair `(q1, q2)`, ordered `00,01,10,11`.
    pub fn bell_probabilities(&self, q1: usize, q2: usize) -> Result<[f64; 4]> {
        self.check_pair(q1, q2, "Bell measurement")?;
        let mut rotated = self.clone();
        rotated.rotate_bell(q1, q2)?;
        Ok(rotated.rotated_probabilities(q1, q2))
    }

    fn check_pair(&self, q1: usize, q2: usize, what: &str) -> Result<()> {
        self.check(q1)?;
        self.check(q2)?;
        if q1 == q2 {
            return Err(QheError::Precondition(format!("{what} needs two distinct qubits")));
        }
        Ok(())
    }

    // Bell state (X^c Z^d ⊗ I)|Φ+⟩ on (q1,q2) maps to |d⟩_{q1} |c⟩_{q2}.
    fn rotate_bell(&mut self, q1: usize, q2: usize) -> Result<()> {
        self.apply_cnot(q1, q2)?;
        self.apply_gate(Gate::H, q1)
    }

    fn rotated_probabilities(&self, q1: usize, q2: usize) -> [f64; 4] {
        let mut probs = [0.0; 4];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let d = (i >> q1) & 1;
            let c = (i >> q2) & 1;
            probs[c << 1 | d] += a.norm_sqr();
        }
        probs
    }

    /// Measures `(q1, q2)` in the Bell basis, removes both qubits and
    /// returns the outcome with the index map for the survivors.
    pub fn bell_measure(&mut self, q1: usize, q2: usize) -> Result<(BellOutcome, IndexRemap)> {
        self.check_pair(q1, q2, "Bell measurement")?;
        self.rotate_bell(q1, q2)?;
        let probs = self.rotated_probabilities(q1, q2);
        let outcome = sample_bell_outcome(&mut self.rng, probs);
        let remap = self.remove_two(q1, q2, outcome)?;
        Ok((outcome, remap))
    }

    /// Projects `(q1, q2)` onto the given Bell outcome and removes them.
    pub fn project_bell(&mut self, q1: usize, q2: usize, outcome: BellOutcome) -> Result<IndexRemap> {
        self.check_pair(q1, q2, "Bell projection")?;
        self.rotate_bell(q1, q2)?;
        self.remove_two(q1, q2, outcome)
    }

    // Keeps the amplitudes with q1 = d and q2 = c after rotation, drops both
    // qubits and renormalizes.
    fn remove_two(&mut self, q1: usize, q2: usize, outcome: BellOutcome) -> Result<IndexRemap> {
        let n = self.num_qubits;
        if n <= 2 {
            // Nothing would remain; keep a single dummy qubit in |0⟩.
            let p = self.rotated_probabilities(q1, q2)[outcome.index()];
            if p < 1e-300 {
                return Err(QheError::Precondition("projected onto a zero-probability outcome".into()));
            }
            self.amplitudes = vec![ONE, ZERO];
            self.num_qubits = 1;
            return Ok(IndexRemap(vec![None; n]));
        }
        let (lo, hi) = (q1.min(q2), q1.max(q2));
        let fixed = (outcome.d as usize) << q1 | (outcome.c as usize) << q2;
        let low_mask = (1usize << lo) - 1;
        let mid_mask = (1usize << (hi - 1)) - 1 - low_mask;
        let mut amps = vec![ZERO; 1 << (n - 2)];
        for (j, amp) in amps.iter_mut().enumerate() {
            // Spread j back out around the two removed bit positions.
            let i = (j & low_mask) | (j & mid_mask) << 1 | (j & !(low_mask | mid_mask)) << 2 | fixed;
            *amp = self.amplitudes[i];
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(QheError::Precondition("projected onto a zero-probability outcome".into()));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        let mut map = vec![None; n];
        for (new, old) in (0..n).filter(|&q| q != q1 && q != q2).enumerate() {
            map[old] = Some(new);
        }
        self.amplitudes = amps;
        self.num_qubits = n - 2;
        Ok(IndexRemap(map))
    }

    /// Reduced density matrix on `qubits`, in the given order (the first
    /// listed qubit becomes bit 0 of the reduced index).
    pub fn reduced_density(&self, qubits: &[usize]) -> Result<DensityMatrix> {
        for &q in qubits {
            self.check(q)?;
        }
        let k = qubits.len();
        let rest: Vec<usize> = (0..self.num_qubits).filter(|q| !qubits.contains(q)).collect();
        if rest.len() + k != self.num_qubits {
            return Err(QheError::Precondition("repeated qubit in subset".into()));
        }
        let dim = 1usize << k;
        let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
        let compose = |sub: usize, env: usize| {
            let mut i = 0usize;
            for (b, &q) in qubits.iter().enumerate() {
                i |= ((sub >> b) & 1) << q;
            }
            for (b, &q) in rest.iter().enumerate() {
                i |= ((env >> b) & 1) << q;
            }
            i
        };
        for env in 0..1usize << rest.len() {
            for r in 0..dim {
                let ar = self.amplitudes[compose(r, env)];
                if ar == ZERO {
                    continue;
                }
                for c in 0..dim {
                    rho[(r, c)] += ar * self.amplitudes[compose(c, env)].conj();
                }
            }
        }
        Ok(DensityMatrix { num_qubits: k, matrix: rho })
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(&self.amplitudes)
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    fidelity_amplitudes(a.amplitudes(), b.amplitudes())
}

pub fn fidelity_amplitudes(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(QheError::DimensionMismatch(format!("{} vs {}", a.len(), b.len())));
    }
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok(inner.norm_sqr().min(1.0))
}

/// A density matrix on `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(amplitudes: &[Complex64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        let matrix = &v * v.adjoint();
        DensityMatrix { num_qubits: amplitudes.len().trailing_zeros() as usize, matrix }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let matrix = DMatrix::<Complex64>::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
        DensityMatrix { num_qubits, matrix }
    }

    pub fn zeros(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        DensityMatrix { num_qubits, matrix: DMatrix::zeros(dim, dim) }
    }

    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || !dim.is_power_of_two() {
            return Err(QheError::DimensionMismatch(format!("{}x{}", dim, matrix.ncols())));
        }
        Ok(DensityMatrix { num_qubits: dim.trailing_zeros() as usize, matrix })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `self += weight · other`.
    pub fn accumulate(&mut self, other: &DensityMatrix, weight: f64) -> Result<()> {
        if self.matrix.shape() != other.matrix.shape() {
            return Err(QheError::DimensionMismatch("density matrices differ in size".into()));
        }
        self.matrix += &other.matrix * Complex64::new(weight, 0.0);
        Ok(())
    }

    /// `U ρ U†` with `U` acting on qubit `q`.
    pub fn conjugate(&self, u: &Mat2, q: usize) -> Result<DensityMatrix> {
        if q >= self.num_qubits {
            return Err(QheError::IndexOutOfRange { index: q, size: self.num_qubits });
        }
        let dim = self.matrix.nrows();
        let full = DMatrix::from_fn(dim, dim, |r, c| {
            let mask = 1usize << q;
            if r & !mask != c & !mask {
                ZERO
            } else {
                u.0[(r >> q) & 1][(c >> q) & 1]
            }
        });
        Ok(DensityMatrix { num_qubits: self.num_qubits, matrix: &full * &self.matrix * full.adjoint() })
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().collect()
    }

    /// Checks the density-matrix invariants at the library tolerances.
    pub fn is_valid(&self) -> bool {
        self.hermiticity_error() < 1e-12
            && (self.trace() - ONE).norm() < 1e-12
            && self.eigenvalues().iter().all(|&l| l >= -1e-10)
    }
}

/// `½ ‖ρ − σ‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.matrix.shape() != b.matrix.shape() {
        return Err(QheError::DimensionMismatch(format!("{} vs {} qubits", a.num_qubits, b.num_qubits)));
    }
    let diff = &a.matrix - &b.matrix;
    let h = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
    let sum: f64 = h.symmetric_eigenvalues().iter().map(|l| l.abs()).sum();
    Ok((0.5 * sum).min(1.0))
}
