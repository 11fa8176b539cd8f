use super::*;
use crate::barrington::BranchingProgram;
use crate::classical_he::{HEKeySet, HeScheme};
use crate::funcexpr::FuncExpr;
use crate::gardenhose::{BvChain, GHProtocol};
use crate::quantum::{fidelity_amplitudes, trace_distance, DensityMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sorted_pairs(spec: &GadgetSpec) -> Vec<((usize, usize), bool)> {
    let mut v: Vec<_> = spec.pairs.iter().zip(&spec.p).map(|(pr, &p)| ((pr.t.min(pr.s), pr.t.max(pr.s)), p)).collect();
    v.sort();
    v
}

// State P^a X^a Z^b |ψ⟩ as the output of T on an encrypted qubit.
fn prepare_input(psi: &StateVector, a: bool, b: bool, seed: u64) -> StateVector {
    let mut sv = StateVector::from_amplitudes(psi.amplitudes().to_vec(), seed).unwrap();
    sv.apply_pauli(a, b, 0).unwrap();
    if a {
        sv.apply_gate(Gate::P, 0).unwrap();
    }
    sv
}

fn expected_output(psi: &StateVector, k: &KeyUpdate) -> Vec<num_complex::Complex64> {
    let mut sv = StateVector::from_amplitudes(psi.amplitudes().to_vec(), 0).unwrap();
    sv.apply_pauli(k.a, k.b, 0).unwrap();
    if k.q {
        sv.apply_gate(Gate::P, 0).unwrap();
    }
    sv.amplitudes().to_vec()
}

/// Consumes `spec` on the statevector and checks the output against the
/// recurrence; returns the recurrence result.
fn statevector_round(
    spec: &GadgetSpec,
    masks: &GadgetMasks,
    plan: &MeasurementPlan,
    psi: &StateVector,
    a: bool,
    b: bool,
    seed: u64,
) -> (KeyUpdate, Vec<BellOutcome>) {
    let mut sv = prepare_input(psi, a, b, seed);
    let labels = instantiate(spec, masks, &mut sv).unwrap();
    let res = consume(&labels, plan, 0, &mut sv).unwrap();
    assert_eq!(sv.num_qubits(), 1);
    let k = key_update_plaintext(spec, plan, &res.outcomes, masks, a, b).unwrap();
    let f = fidelity_amplitudes(sv.amplitudes(), &expected_output(psi, &k)).unwrap();
    assert!(f > 1.0 - 1e-9, "fidelity {f}");
    (k, res.outcomes)
}

fn operator_matches(run: &SymbolicRun, a: bool, b: bool, k: &KeyUpdate) -> bool {
    run.corrects(a, b, k)
}

#[test]
fn trivial_single_pair() {
    let spec = GadgetSpec::new(vec![SpecPair { t: 1, s: 2 }], vec![false], GadgetSourceTag::Gh).unwrap();
    let plan = MeasurementPlan { pairs: vec![(0, 1)], unmeasured_label: 2 };
    let k = key_update_plaintext(&spec, &plan, &[BellOutcome::default()], &GadgetMasks::zero(1), false, false).unwrap();
    assert_eq!(k, KeyUpdate { a: false, b: false, location: 2, q: false });
}

#[test]
fn path_may_leave_through_t() {
    let spec = GadgetSpec::new(vec![SpecPair { t: 1, s: 2 }], vec![false], GadgetSourceTag::Gh).unwrap();
    let plan = MeasurementPlan { pairs: vec![(0, 2)], unmeasured_label: 1 };
    let k = key_update_plaintext(&spec, &plan, &[BellOutcome::default()], &GadgetMasks::zero(1), false, false).unwrap();
    assert_eq!(k.location, 1);
}

#[test]
fn spec_validation() {
    assert!(GadgetSpec::new(vec![], vec![], GadgetSourceTag::Bp).is_err());
    assert!(GadgetSpec::new(vec![SpecPair { t: 1, s: 1 }], vec![false], GadgetSourceTag::Bp).is_err());
    assert!(GadgetSpec::new(vec![SpecPair { t: 1, s: 3 }], vec![false], GadgetSourceTag::Bp).is_err());
    let plan = MeasurementPlan { pairs: vec![(0, 1)], unmeasured_label: 1 };
    assert!(plan.validate(1).is_err());
}

#[test]
fn toy_gadget_structure() {
    let p = GHProtocol::toy_dec();
    let g0 = gh_gadget(&p, 0).unwrap();
    let g1 = gh_gadget(&p, 1).unwrap();
    assert_eq!(g0.m, 3);
    assert_eq!(sorted_pairs(&g0), vec![((1, 3), false), ((2, 5), true), ((4, 6), false)]);
    assert_eq!(sorted_pairs(&g1), vec![((1, 4), true), ((2, 3), false), ((5, 6), false)]);
    // The qubit leaves through the second copy's in terminal.
    assert_eq!(gh_plan(&p, 0).unwrap().unmeasured_label, 4);
    assert_eq!(gh_plan(&p, 1).unwrap().unmeasured_label, 5);
}

#[test]
fn gh_requires_alice_one_convention() {
    let mut p = GHProtocol::toy_dec();
    p.output_one_side = crate::gardenhose::Side::Bob;
    assert!(matches!(gh_gadget(&p, 0), Err(QheError::Precondition(_))));
}

#[test]
fn toy_gadget_soundness_statevector() {
    let p = GHProtocol::toy_dec();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sk in 0..2 {
        let spec = gh_gadget(&p, sk).unwrap();
        for c in 0..2 {
            let plan = gh_plan(&p, c).unwrap();
            for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
                for seed in 0..10 {
                    let psi = StateVector::random(1, &mut rng, 0).unwrap();
                    let masks = GadgetMasks::random(spec.m, &mut rng);
                    let (k, _) = statevector_round(&spec, &masks, &plan, &psi, a, b, seed);
                    assert_eq!(k.location, plan.unmeasured_label);
                    assert_eq!(k.q, a ^ (sk ^ c == 1), "sk={sk} c={c} a={a}");
                }
            }
        }
    }
}

#[test]
fn physical_toy_generation_matches_gamma() {
    let p = GHProtocol::toy_dec();
    for sk in 0..2 {
        for seed in 0..8 {
            let mut sv = StateVector::new(1, seed).unwrap();
            let phys = generate_gh_physical(&p, sk, &mut sv).unwrap();
            assert_eq!(sv.num_qubits(), 7);
            let order: Vec<usize> = (1..=6).map(|l| phys.labels[l].unwrap()).collect();
            let got = sv.reduced_density(&order).unwrap();
            let want = gamma_state(&phys.spec, &phys.masks, 0).unwrap().density();
            assert!(trace_distance(&got, &want).unwrap() < 1e-9);
        }
    }
}

#[test]
fn or_program_gadget_shape() {
    let prog = BranchingProgram::or_example();
    assert!(prog.is_alternating());
    for sk in [false, true] {
        let spec = bp_gadget(&[sk], &prog).unwrap();
        assert_eq!(spec.num_qubits(), 10 * prog.len());
        assert_eq!(spec.p.iter().filter(|&&x| x).count(), 4);
    }
    // Layer 1 of the gadget is the second SK instruction ⟨SK:0, (14235), (15243)⟩
    // and layer 0 the first, ⟨SK:0, e, (12453)⟩. With sk = 0 layer 0 wires
    // k_in to σ(k)_out for σ = (12453).
    let spec = bp_gadget(&[false], &prog).unwrap();
    let sigma: crate::barrington::Perm5 = "(12453)".parse().unwrap();
    for k in 0..5 {
        assert_eq!(spec.pairs[k], SpecPair { t: 1 + k, s: 6 + sigma.apply(k) });
    }
    assert!(bp_gadget(&[false], &BranchingProgram::new(vec![], prog.accepting_cycle(), 1, 1).unwrap()).is_err());
}

#[test]
fn or_plan_first_pair_and_independence() {
    let prog = BranchingProgram::or_example();
    let plan = bp_plan(&[false], &prog).unwrap();
    // CT:0 = 0 selects (12345), which sends track 0 to track 1.
    assert_eq!(plan.pairs[0], (0, 2));
    for ct in [false, true] {
        let plan = bp_plan(&[ct], &prog).unwrap();
        plan.validate(5 * prog.len()).unwrap();
    }
    assert!(bp_plan(&[], &prog).is_err());
}

#[test]
fn or_gadget_symbolic_soundness() {
    let prog = BranchingProgram::or_example();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sk in [false, true] {
        let spec = bp_gadget(&[sk], &prog).unwrap();
        for ct in [false, true] {
            let plan = bp_plan(&[ct], &prog).unwrap();
            for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
                let masks = GadgetMasks::random(spec.m, &mut rng);
                let run = symbolic_consume(&spec, &masks, &plan, &mut rng).unwrap();
                let k = key_update_plaintext(&spec, &plan, &run.outcomes, &masks, a, b).unwrap();
                assert_eq!(k.location, plan.unmeasured_label);
                assert_eq!(k.q, a ^ (sk | ct));
                assert!(operator_matches(&run, a, b, &k));
            }
        }
    }
}

#[test]
fn bv_gadget_symbolic_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for p in [2u64, 3, 5] {
        for s0 in 0..p {
            for s1 in 0..p {
                let s = [s0, s1];
                let chain = BvChain::new(p, 2, &s).unwrap();
                let spec = bv_gadget(&chain).unwrap();
                let k_blocks = bv_total_blocks(p, 2);
                assert_eq!(spec.num_qubits(), 2 * p as usize * (2 * k_blocks + 1));
                for _ in 0..4 {
                    let v = [rng.gen_range(0..p), rng.gen_range(0..p)];
                    let w = rng.gen_range(0..p);
                    let plan = bv_plan(p, 2, &v, w).unwrap();
                    let dec = crate::classical_he::bv_dec_eval(p, &s, &v, w).unwrap();
                    let a: bool = rng.gen();
                    let b: bool = rng.gen();
                    let masks = GadgetMasks::random(spec.m, &mut rng);
                    let run = symbolic_consume(&spec, &masks, &plan, &mut rng).unwrap();
                    let k = key_update_plaintext(&spec, &plan, &run.outcomes, &masks, a, b).unwrap();
                    assert_eq!(k.q, a ^ dec, "p={p} s={s:?} v={v:?} w={w}");
                    assert!(operator_matches(&run, a, b, &k));
                }
            }
        }
    }
}

#[test]
fn backends_agree_on_random_gadgets() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for m in 1..=6 {
        for _ in 0..10 {
            let (spec, plan) = random_instance(m, &mut rng);
            let masks = GadgetMasks::random(m, &mut rng);
            let psi = StateVector::random(1, &mut rng, 0).unwrap();
            let (a, b) = (rng.gen(), rng.gen());
            let seed: u64 = rng.gen();
            let (k_sv, out_sv) = statevector_round(&spec, &masks, &plan, &psi, a, b, seed);
            let mut srng = ChaCha8Rng::seed_from_u64(seed);
            let run = symbolic_consume(&spec, &masks, &plan, &mut srng).unwrap();
            let k_sym = key_update_plaintext(&spec, &plan, &run.outcomes, &masks, a, b).unwrap();
            assert_eq!(out_sv, run.outcomes);
            assert_eq!(k_sv, k_sym);
            assert_eq!(run.output_label, k_sym.location);
            assert!(operator_matches(&run, a, b, &k_sym));
        }
    }
}

#[test]
fn measurement_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (spec, plan) = random_instance(4, &mut rng);
        let masks = GadgetMasks::random(4, &mut rng);
        let psi = StateVector::random(1, &mut rng, 0).unwrap();
        let (a, b) = (rng.gen(), rng.gen());
        // Fix the outcomes per pair, then project in two different orders.
        let outcomes: Vec<BellOutcome> = (0..4).map(|_| BellOutcome::from_index(rng.gen_range(0..4))).collect();
        let mut perm: Vec<usize> = (0..4).collect();
        let mut results = Vec::new();
        for _ in 0..2 {
            perm.shuffle(&mut rng);
            let mut sv = prepare_input(&psi, a, b, 0);
            let labels = instantiate(&spec, &masks, &mut sv).unwrap();
            let mut qubit = labels.clone();
            qubit[0] = Some(0);
            let mut ok = true;
            for &i in &perm {
                let (u, v) = plan.pairs[i];
                match sv.project_bell(qubit[u].unwrap(), qubit[v].unwrap(), outcomes[i]) {
                    Ok(remap) => {
                        for q in qubit.iter_mut() {
                            *q = q.and_then(|x| remap.get(x));
                        }
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            results.push(ok.then(|| sv.amplitudes().to_vec()));
        }
        match (&results[0], &results[1]) {
            (Some(x), Some(y)) => assert!(fidelity_amplitudes(x, y).unwrap() > 1.0 - 1e-9),
            (None, None) => {}
            _ => panic!("outcome possible in one order only"),
        }
    }
}

#[test]
fn mixedness_of_gadget_states() {
    for m in 1..=3 {
        for marks in [vec![false; m], (0..m).map(|i| i % 2 == 0).collect::<Vec<_>>()] {
            let pairs: Vec<SpecPair> = (0..m).map(|i| SpecPair { t: 2 * i + 1, s: 2 * i + 2 }).collect();
            let spec = GadgetSpec::new(pairs, marks, GadgetSourceTag::Gh).unwrap();
            let mut avg = DensityMatrix::zeros(2 * m);
            let total = 1u64 << (2 * m);
            for code in 0..total {
                let st = gamma_state(&spec, &GadgetMasks::from_code(m, code), 0).unwrap();
                avg.accumulate(&st.density(), 1.0 / total as f64).unwrap();
            }
            let d = trace_distance(&avg, &DensityMatrix::maximally_mixed(2 * m)).unwrap();
            assert!(d < 1e-9, "m={m} distance {d}");
        }
    }
}

#[test]
fn key_update_expression_matches_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in 1..=5 {
        let f: FuncExpr = key_update_expr(m);
        for _ in 0..20 {
            let (spec, plan) = random_instance(m, &mut rng);
            let masks = GadgetMasks::random(m, &mut rng);
            let outcomes: Vec<BellOutcome> = (0..m).map(|_| BellOutcome::from_index(rng.gen_range(0..4))).collect();
            let (a, b) = (rng.gen(), rng.gen());
            let want = key_update_plaintext(&spec, &plan, &outcomes, &masks, a, b).unwrap();
            let got = f.eval(&key_update_inputs(&spec, &masks, &plan, &outcomes, a, b)).unwrap();
            assert_eq!(got, vec![want.a, want.b, want.q]);
        }
    }
}

#[test]
fn homomorphic_update_toy_exhaustive() {
    let p = GHProtocol::toy_dec();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ks = HEKeySet::generate(HeScheme::Transparent, 8, 1, &mut rng).unwrap();
    let mut size = 0;
    for sk in 0..2 {
        let spec = gh_gadget(&p, sk).unwrap();
        for c in 0..2 {
            let plan = gh_plan(&p, c).unwrap();
            for code in 0..64 {
                let masks = GadgetMasks::from_code(3, code);
                let info = encrypt_gadget_info(&spec, &masks, &[sk == 1], &ks, &mut rng);
                let outcomes: Vec<BellOutcome> = (0..3).map(|_| BellOutcome::from_index(rng.gen_range(0..4))).collect();
                for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
                    let want = key_update_plaintext(&spec, &plan, &outcomes, &masks, a, b).unwrap();
                    let (ea, eb) = (ks.enc(a, &mut rng), ks.enc(b, &mut rng));
                    let up = key_update_homomorphic(&info, &plan, &outcomes, &ea, &eb, &ks, &mut rng).unwrap();
                    assert_eq!((ks.dec(&up.a).unwrap(), ks.dec(&up.b).unwrap()), (want.a, want.b));
                    assert_eq!(ks.dec(&up.q).unwrap(), want.q);
                    size = up.node_count;
                }
            }
        }
    }
    assert!(size <= 500 * 9, "expression has {size} nodes");
}

#[test]
fn homomorphic_update_needs_and() {
    let p = GHProtocol::toy_dec();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ks = HEKeySet::generate(HeScheme::Toy, 8, 1, &mut rng).unwrap();
    let spec = gh_gadget(&p, 0).unwrap();
    let masks = GadgetMasks::zero(3);
    let info = encrypt_gadget_info(&spec, &masks, &[false], &ks, &mut rng);
    let plan = gh_plan(&p, 0).unwrap();
    let (ea, eb) = (ks.enc(false, &mut rng), ks.enc(false, &mut rng));
    let r = key_update_homomorphic(&info, &plan, &[BellOutcome::default(); 3], &ea, &eb, &ks, &mut rng);
    assert!(matches!(r, Err(QheError::UnsupportedOperation(_))));
    let other = HEKeySet::generate(HeScheme::Toy, 8, 2, &mut rng).unwrap();
    let r = key_update_homomorphic(&info, &plan, &[BellOutcome::default(); 3], &ea, &eb, &other, &mut rng);
    assert!(matches!(r, Err(QheError::KeyMismatch { .. })));
}

#[test]
fn gadget_info_length_is_key_independent() {
    let p = GHProtocol::toy_dec();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ks = HEKeySet::generate(HeScheme::Transparent, 8, 1, &mut rng).unwrap();
    let lens: Vec<usize> = (0..2)
        .map(|sk| {
            let spec = gh_gadget(&p, sk).unwrap();
            encrypt_gadget_info(&spec, &GadgetMasks::random(3, &mut rng), &[sk == 1], &ks, &mut rng).total_bits()
        })
        .collect();
    assert_eq!(lens[0], lens[1]);
}
