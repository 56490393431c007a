use std::path::PathBuf;
use std::time::{Duration, Instant};

use qadv::attacks::{
    risk_curve, transfer_attack_eval, universal_example_search, universal_perturbation_search,
    AttackConfig, PerturbationLayer,
};
use qadv::bounds::{
    density_hs_distance, density_trace_distance, estimate_quantum_risk, evaluate_named,
    haar_error_rate, lemma_a1_min_epsilon, levy_min_epsilon, theorem1_min_epsilon,
    verify_hoeffding, BoundQuery,
};
use qadv::circuit::Circuit;
use qadv::data::{
    build_mnist_dataset, free_fermion_ground_energy, generate_ising_dataset, ising_ground_state,
    load_mnist_idx, synthetic_digit_images, LabeledDataset, LabeledSample, SampleMeta,
};
use qadv::models::{build_member, build_qcnn, build_variational_classifier, default_roster};
use qadv::simulator::{haar_random_state, squared_fidelity, GateOp};
use qadv::training::{
    evaluate, gradient_finite_difference, gradient_parameter_shift, train, TrainConfig,
};
use qadv::{ClassifierModel, QcnnSize};

const N_IN: usize = 8;
const TRAIN_EPOCHS: usize = 10;
/// Roster ids of the three-classifier subset.
const SUBSET: [usize; 3] = [1, 3, 6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Ensemble {
    models: Vec<ClassifierModel>,
    test: LabeledDataset,
}

impl Ensemble {
    fn member(&self, id: usize) -> &ClassifierModel {
        &self.models[id - 1]
    }

    fn subset(&self) -> Vec<&ClassifierModel> {
        SUBSET.iter().map(|&id| self.member(id)).collect()
    }
}

fn train_roster(train_set: &LabeledDataset, val: &LabeledDataset) -> Vec<ClassifierModel> {
    default_roster()
        .iter()
        .map(|entry| {
            let init = build_member(entry, N_IN, 100 + entry.id as u64).unwrap();
            let cfg = TrainConfig {
                epochs: TRAIN_EPOCHS,
                seed: entry.id as u64,
                ..Default::default()
            };
            train(&init, train_set, val, &cfg).unwrap().0
        })
        .collect()
}

fn ising_ensemble() -> Ensemble {
    let (train_set, test) = generate_ising_dataset(N_IN, 300, 100, 7).unwrap();
    let (val, _) = generate_ising_dataset(N_IN, 100, 1, 8).unwrap();
    Ensemble {
        models: train_roster(&train_set, &val),
        test,
    }
}

fn haar_batch(n_in: usize, n: usize, seed: u64) -> Vec<LabeledSample> {
    (0..n)
        .map(|i| LabeledSample {
            state: haar_random_state(n_in, seed * 97 + i as u64).unwrap(),
            label: (i % 2) as u8,
            meta: SampleMeta::Ising { j_x: 0.5 },
        })
        .collect()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let n_in = 3 + (k as usize % 6);
        let model = if n_in == 8 && k % 2 == 0 {
            build_qcnn(
                8,
                if k % 4 == 0 {
                    QcnnSize::Small
                } else {
                    QcnnSize::Large
                },
                k,
            )
            .unwrap()
        } else {
            build_variational_classifier(n_in, 1 + (k as usize % 2), k).unwrap()
        };
        let batch = haar_batch(n_in, 2, k);
        let ps = gradient_parameter_shift(&model, &batch).unwrap();
        let fd = gradient_finite_difference(&model, &batch, 1e-5).unwrap();
        for (a, b) in ps.iter().zip(&fd) {
            worst = worst.max((a - b).abs());
        }
    }
    let took = start.elapsed();
    outcome(
        worst <= 1e-6 && took < Duration::from_secs(60),
        format!(
            "max |shift - fd| = {worst:.2e} over 20 pairs ({:.1}s)",
            took.as_secs_f64()
        ),
    )
}

fn physics_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for l in 2..=8 {
        for j in [0.2, 0.6, 1.0, 1.4, 1.8] {
            let (dense, _) = ising_ground_state(l, j).unwrap();
            worst = worst.max((dense - free_fermion_ground_energy(l, j).unwrap()).abs());
        }
    }
    let took = start.elapsed();
    outcome(
        worst <= 1e-8 && took < Duration::from_secs(60),
        format!(
            "max |dense - free fermion| = {worst:.2e} ({:.1}s)",
            took.as_secs_f64()
        ),
    )
}

fn training_accuracy(ens: &Ensemble) -> Outcome {
    let accs: Vec<f64> = ens
        .models
        .iter()
        .map(|m| evaluate(m, &ens.test).unwrap().0)
        .collect();
    let good = accs.iter().filter(|&&a| a >= 0.90).count();
    outcome(
        good >= 6,
        format!("{good}/8 members >= 0.90 after {TRAIN_EPOCHS} epochs, accuracies {accs:?}"),
    )
}

fn universal_examples(ens: &Ensemble) -> Outcome {
    let subset = ens.subset();
    let samples = ens.test.samples();
    let baseline = samples
        .iter()
        .filter(|s| {
            subset
                .iter()
                .all(|m| m.predict(&s.state).unwrap() != s.label)
        })
        .count() as f64
        / samples.len() as f64;
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.02).collect();
    let cfg = AttackConfig {
        max_iters: 40,
        ..Default::default()
    };
    let reports = risk_curve(&subset, samples, &grid, &cfg).unwrap();
    let risks: Vec<f64> = reports.iter().map(|r| r.risk).collect();
    let monotone = risks.windows(2).all(|w| w[1] >= w[0]);
    let at_018 = reports[9].risk;
    outcome(
        at_018 >= 0.25 && monotone && risks[0] == baseline,
        format!("risk(0.18) = {at_018:.2} (need >= 0.25), risk(0) = {} vs baseline {baseline}, monotone {monotone}, curve {risks:?}", risks[0]),
    )
}

fn transfer(ens: &Ensemble) -> Outcome {
    let subset = ens.subset();
    let surrogate = subset[0];
    let eps_grid = [0.06, 0.12, 0.18];
    let mut lines = Vec::new();
    let mut pass = true;
    let mut white = vec![Vec::new(); eps_grid.len()];
    let mut blind = vec![Vec::new(); eps_grid.len()];
    for seed in 0..5u64 {
        let (_, test) = generate_ising_dataset(N_IN, 1, 40, 1000 + seed).unwrap();
        for (k, &eps) in eps_grid.iter().enumerate() {
            let cfg = AttackConfig {
                epsilon_budget: eps,
                max_iters: 40,
                seed,
                ..Default::default()
            };
            white[k].push(
                universal_example_search(&subset, test.samples(), &cfg)
                    .unwrap()
                    .risk,
            );
            blind[k].push(
                transfer_attack_eval(surrogate, &subset, test.samples(), &cfg)
                    .unwrap()
                    .risk,
            );
        }
    }
    for (k, eps) in eps_grid.iter().enumerate() {
        let (wm, ws) = mean_se(&white[k]);
        let (tm, ts) = mean_se(&blind[k]);
        let joint = (ws * ws + ts * ts).sqrt();
        pass &= tm <= wm + joint;
        lines.push(format!(
            "eps {eps}: transfer {tm:.3} vs white-box {wm:.3} (se {joint:.3})"
        ));
    }
    outcome(pass, lines.join("; "))
}

fn universal_perturbation(ens: &Ensemble) -> Outcome {
    let cfg = AttackConfig {
        step_alpha: 0.02,
        epsilon_budget: 1.0,
        max_iters: 200,
        ..Default::default()
    };
    let (_, report) =
        universal_perturbation_search(ens.member(2), ens.test.samples(), &cfg).unwrap();
    let t = &report.trajectory;
    let ascending = t.windows(2).all(|w| w[1].loss >= w[0].loss);
    let first = t.first().unwrap();
    let last = t.last().unwrap();
    let min_acc = t.iter().map(|p| p.accuracy).fold(1.0, f64::min);
    outcome(
        ascending && (0.35..=0.65).contains(&last.accuracy),
        format!(
            "{} accepted steps, loss {:.3} -> {:.3}, accuracy {:.2} -> min {:.2} -> final {:.2}, eps proxy {:.3}, ascending {ascending}",
            t.len() - 1,
            first.loss,
            last.loss,
            first.accuracy,
            min_acc,
            last.accuracy,
            last.epsilon_proxy
        ),
    )
}

fn mnist_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os("QADV_MNIST_DIR")?);
    let needed = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"];
    needed.iter().all(|f| dir.join(f).exists()).then_some(dir)
}

fn digit_fidelity() -> Outcome {
    let (images, real) = match mnist_dir() {
        Some(dir) => (
            load_mnist_idx(
                &dir.join("train-images-idx3-ubyte"),
                &dir.join("train-labels-idx1-ubyte"),
            )
            .unwrap(),
            true,
        ),
        None => (synthetic_digit_images((1, 9), 150, 21), false),
    };
    let (train_set, test) = build_mnist_dataset(&images, (1, 9), 200, 50, 22).unwrap();
    let (val, _) = build_mnist_dataset(&images, (1, 9), 50, 2, 23).unwrap();
    let models = train_roster(&train_set, &val);
    let refs: Vec<&ClassifierModel> = models.iter().collect();
    let cfg = AttackConfig {
        epsilon_budget: 0.3,
        ..Default::default()
    };
    let report = universal_example_search(&refs, test.samples(), &cfg).unwrap();
    let fid = report.mean_fidelity_fooled;
    let (pass, source) = if real {
        (report.risk >= 0.5 && fid >= 0.90, "MNIST")
    } else {
        (report.risk > 0.0 && fid >= 0.85, "synthetic digits")
    };
    outcome(
        pass,
        format!(
            "{source}: success {:.2} against all 8, mean fidelity of fooled {fid:.3}",
            report.risk
        ),
    )
}

fn bound_evaluators() -> Outcome {
    let text = include_str!("fixtures/bounds_oracle.txt");
    let names = [
        "theorem1",
        "lemma_a1",
        "levy",
        "hoeffding",
        "qnfl",
        "qnfl_unitary",
    ];
    let mut worst = 0.0f64;
    let mut rows = 0;
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        let (lhs, rhs) = line.split_once('|').unwrap();
        let f: Vec<f64> = lhs.split_whitespace().map(|v| v.parse().unwrap()).collect();
        let q = BoundQuery {
            d: f[0] as usize,
            k: f[1] as usize,
            mu: f[2],
            r: f[3],
            alpha: f[4],
            beta: f[5],
            n: f[6] as usize,
            delta: f[7],
            n_train: f[8] as usize,
            d_prime: f[9] as usize,
        };
        for (name, want) in names.iter().zip(rhs.split_whitespace()) {
            let want: f64 = want.parse().unwrap();
            let got = evaluate_named(name, &q).unwrap();
            worst = worst.max((got - want).abs() / want.abs().max(1e-2));
        }
        rows += 1;
    }
    let mut identity = 0.0f64;
    for (d, mu, r) in [(4, 1.0, 0.0), (256, 0.3, 0.5), (1024, 0.05, 0.9)] {
        let t = theorem1_min_epsilon(d, 1, mu, r).unwrap();
        identity = identity
            .max((t - lemma_a1_min_epsilon(d, mu, r).unwrap()).abs())
            .max((t - levy_min_epsilon(2f64.sqrt(), 0.25, d, mu, r).unwrap()).abs() / t.max(1e-2));
    }
    outcome(
        rows == 50 && worst <= 1e-12 && identity <= 1e-14,
        format!("{rows} grid points, max relative error {worst:.2e}, identity gap {identity:.2e}"),
    )
}

fn hoeffding_coverage() -> Outcome {
    let start = Instant::now();
    let model = build_variational_classifier(4, 2, 31).unwrap();
    let truth = build_variational_classifier(4, 2, 32).unwrap();
    let coverage = verify_hoeffding(&model, &truth, None, 100_000, 1000, 200, 0.05, 9).unwrap();
    let took = start.elapsed();
    outcome(
        coverage >= 0.95 && took < Duration::from_secs(120),
        format!(
            "coverage {coverage:.3} (n=200, delta=0.05, 1000 trials, {:.1}s)",
            took.as_secs_f64()
        ),
    )
}

fn risk_invariance() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for k in 0..3u64 {
        let model = build_variational_classifier(4, 1 + k as usize, 40 + k).unwrap();
        let truth = build_variational_classifier(4, 2, 50 + k).unwrap();
        let angles = (0..12)
            .map(|i| 0.3 * (i as f64 + 1.0) * (k as f64 + 1.0))
            .collect();
        let layer = PerturbationLayer::new(4, angles).unwrap();
        let (plain, s0) = haar_error_rate(&model, &truth, None, 10_000, 60 + k).unwrap();
        let (moved, s1) = haar_error_rate(&model, &truth, Some(&layer), 10_000, 70 + k).unwrap();
        let sigma = (s0 * s0 + s1 * s1).sqrt();
        pass &= (plain - moved).abs() <= 3.0 * sigma;
        lines.push(format!("{plain:.4} vs {moved:.4} (sigma {sigma:.4})"));
    }
    outcome(pass, lines.join("; "))
}

fn quantum_risk() -> Outcome {
    let c = Circuit::from_gates(
        2,
        &[GateOp::rx(0, 0.4), GateOp::cnot(0, 1), GateOp::rz(1, 1.1)],
    )
    .unwrap();
    let (same, _) = estimate_quantum_risk(&c, &c, 1000, 1).unwrap();
    let id = Circuit::new(1, 0);
    let x = Circuit::from_gates(1, &[GateOp::rx(0, std::f64::consts::PI)]).unwrap();
    let (mean, se) = estimate_quantum_risk(&id, &x, 100_000, 2).unwrap();
    outcome(
        same == 0.0 && (mean - 8.0 / 3.0).abs() <= 3.0 * se,
        format!("t = V gives {same}; X vs identity {mean:.5} +- {se:.5} (target 8/3)"),
    )
}

fn distance_identities() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..1000u64 {
        let a = haar_random_state(3, 2 * k).unwrap();
        let b = haar_random_state(3, 2 * k + 1).unwrap();
        let f = squared_fidelity(&a, &b).unwrap();
        let tr = density_trace_distance(&a, &b).unwrap();
        let hs = density_hs_distance(&a, &b).unwrap();
        worst = worst
            .max((tr - (1.0 - f).sqrt()).abs())
            .max((hs - 2f64.sqrt() * tr).abs());
    }
    outcome(
        worst <= 1e-10,
        format!("max deviation {worst:.2e} over 1000 pure pairs"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    };
    report(1, "gradient oracle", gradient_oracle());
    report(2, "physics oracle", physics_oracle());
    let ens = ising_ensemble();
    report(3, "training accuracy", training_accuracy(&ens));
    report(4, "universal examples", universal_examples(&ens));
    report(5, "transfer attack", transfer(&ens));
    report(6, "universal perturbation", universal_perturbation(&ens));
    report(7, "digit fidelity", digit_fidelity());
    report(8, "bound evaluators", bound_evaluators());
    report(9, "hoeffding coverage", hoeffding_coverage());
    report(10, "risk invariance", risk_invariance());
    report(11, "quantum risk estimator", quantum_risk());
    report(12, "distance identities", distance_identities());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
