use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qhe_lab_core::quantum::{fidelity, trace_distance, BellOutcome, DensityMatrix, Gate, StateVector};

const GATES: [Gate; 7] = [Gate::X, Gate::Z, Gate::H, Gate::P, Gate::Pdg, Gate::T, Gate::Tdg];

fn random_state(n: usize, seed: u64) -> StateVector {
    StateVector::random(n, &mut ChaCha8Rng::seed_from_u64(seed), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm(n in 1usize..=5, seed: u64, steps in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sv = random_state(n, seed);
        for _ in 0..steps {
            let q = rng.gen_range(0..n);
            if n > 1 && rng.gen_bool(0.3) {
                let t = (q + rng.gen_range(1..n)) % n;
                sv.apply_cnot(q, t).unwrap();
            } else {
                sv.apply_gate(GATES[rng.gen_range(0..GATES.len())], q).unwrap();
            }
        }
        prop_assert!((sv.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn teleportation_leaves_pauli_image(seed: u64, outcome in 0usize..4) {
        // Qubit 0 holds ψ; (1, 2) is an EPR pair; measure (0, 1).
        let psi = random_state(1, seed);
        let mut sv = StateVector::from_amplitudes(psi.amplitudes().to_vec(), seed).unwrap();
        sv.add_qubits(2).unwrap();
        sv.create_epr(1, 2).unwrap();
        let o = BellOutcome::from_index(outcome);
        let probs = sv.bell_probabilities(0, 1).unwrap();
        prop_assert!((probs[outcome] - 0.25).abs() < 1e-12);
        let remap = sv.project_bell(0, 1, o).unwrap();
        let q = remap.get(2).unwrap();
        prop_assert_eq!(sv.num_qubits(), 1);
        prop_assert_eq!(q, 0);
        let mut want = psi.clone();
        want.apply_pauli(o.c, o.d, 0).unwrap();
        prop_assert!(fidelity(&sv, &want).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn one_time_pad_mixes_completely(n in 1usize..=2, seed: u64) {
        let psi = random_state(n, seed);
        let mut avg = DensityMatrix::zeros(n);
        let pads = 1u32 << (2 * n);
        for code in 0..pads {
            let mut sv = psi.clone();
            for w in 0..n {
                sv.apply_pauli(code >> (2 * w) & 1 == 1, code >> (2 * w + 1) & 1 == 1, w).unwrap();
            }
            avg.accumulate(&sv.density(), 1.0 / pads as f64).unwrap();
        }
        let d = trace_distance(&avg, &DensityMatrix::maximally_mixed(n)).unwrap();
        prop_assert!(d < 1e-12, "distance {}", d);
    }

    #[test]
    fn bell_measurement_is_a_distribution(n in 2usize..=5, seed: u64) {
        let mut sv = random_state(n, seed);
        let q1 = (seed % n as u64) as usize;
        let q2 = (q1 + 1) % n;
        let probs = sv.bell_probabilities(q1, q2).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let (o, _) = sv.bell_measure(q1, q2).unwrap();
        prop_assert!(probs[o.index()] > 0.0);
        prop_assert!((sv.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn permutation_round_trips(n in 1usize..=5, seed: u64) {
        let sv = random_state(n, seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut inverse = vec![0; n];
        for (i, &o) in order.iter().enumerate() {
            inverse[o] = i;
        }
        let mut moved = sv.clone();
        moved.permute_qubits(&order).unwrap();
        moved.permute_qubits(&inverse).unwrap();
        prop_assert!(fidelity(&moved, &sv).unwrap() > 1.0 - 1e-12);
    }
}
