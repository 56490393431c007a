use proptest::prelude::*;
use qadv::models::{
    build_qcnn, build_variational_classifier, predict_from_probs, ClassifierModel, ModelMeta,
};
use qadv::simulator::{
    apply_gate, haar_random_state, hs_distance_pure, measure_probabilities, overlap_fidelity,
    trace_distance_pure, GateOp,
};
use qadv::{CircuitSpec, QcnnSize, StateVector};

fn gate_strategy(n: usize) -> impl Strategy<Value = GateOp> {
    prop_oneof![
        (0..n, -7.0..7.0f64).prop_map(|(q, a)| GateOp::rx(q, a)),
        (0..n, -7.0..7.0f64).prop_map(|(q, a)| GateOp::rz(q, a)),
        (0..n, 1..n).prop_map(move |(c, off)| GateOp::cnot(c, (c + off) % n)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gate_then_inverse_is_identity(seed in 0u64..10_000, gates in prop::collection::vec(gate_strategy(4), 1..12)) {
        let psi = haar_random_state(4, seed).unwrap();
        let mut s = psi.clone();
        for g in &gates {
            s = apply_gate(&s, g).unwrap();
        }
        for g in gates.iter().rev() {
            s = apply_gate(&s, &g.inverse()).unwrap();
        }
        for (a, b) in s.amplitudes().iter().zip(psi.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn full_register_probabilities_are_squared_amplitudes(seed in 0u64..10_000) {
        let psi = haar_random_state(3, seed).unwrap();
        let p = measure_probabilities(&psi, &[0, 1, 2]).unwrap();
        for (pi, a) in p.iter().zip(psi.amplitudes()) {
            prop_assert!((pi - a.norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_state_distance_identities(s1 in 0u64..10_000, s2 in 10_000u64..20_000) {
        let a = haar_random_state(3, s1).unwrap();
        let b = haar_random_state(3, s2).unwrap();
        let f = overlap_fidelity(&a, &b).unwrap();
        let d = trace_distance_pure(&a, &b).unwrap();
        prop_assert!((d * d - (1.0 - f * f)).abs() < 1e-12);
        prop_assert!((hs_distance_pure(&a, &b).unwrap() - 2f64.sqrt() * d).abs() < 1e-12);
    }

    #[test]
    fn forward_probabilities_sum_to_one(model_seed in 0u64..1000, input_seed in 0u64..1000, depth in 1usize..4) {
        let m = build_variational_classifier(3, depth, model_seed).unwrap();
        let p = m.forward(&haar_random_state(3, input_seed).unwrap()).unwrap();
        prop_assert!(p[0] >= 0.0 && p[1] >= 0.0);
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn predict_invariant_under_monotone_rescaling(p1 in 0.0..1.0f64, scale in 0.01..100.0f64, shift in -5.0..5.0f64) {
        let p = [1.0 - p1, p1];
        let g = |x: f64| scale * x + shift;
        prop_assert_eq!(predict_from_probs(&p), predict_from_probs(&[g(p[0]), g(p[1])]));
    }
}

#[test]
fn forward_sums_to_one_for_qcnn_members() {
    for (k, size) in [QcnnSize::Small, QcnnSize::Large].into_iter().enumerate() {
        let m = build_qcnn(8, size, k as u64).unwrap();
        for seed in 0..50 {
            let p = m.forward(&haar_random_state(8, seed).unwrap()).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn zero_angle_qcnn_on_basis_input_keeps_readout() {
    // All CNOT controls are |0> on |0...0>, so the readout stays |1>.
    let spec = CircuitSpec::qcnn(8, QcnnSize::Small).unwrap();
    let n = spec.param_count;
    let m = ClassifierModel::with_params(spec, vec![0.0; n], ModelMeta::default()).unwrap();
    let p = m.forward(&StateVector::zero(8).unwrap()).unwrap();
    assert!((p[1] - 1.0).abs() < 1e-12);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let m = build_variational_classifier(4, 3, 11).unwrap();
    m.save(&path).unwrap();
    let back = ClassifierModel::load(&path).unwrap();
    let psi = haar_random_state(4, 3).unwrap();
    assert_eq!(m.forward(&psi).unwrap(), back.forward(&psi).unwrap());
}
