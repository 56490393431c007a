//! Closed-form robustness bounds and Monte-Carlo estimators over Haar-random
//! inputs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attacks::PerturbationLayer;
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::models::ClassifierModel;
use crate::simulator::{haar_random_state_with, StateVector, C64};

/// Inputs for the bound evaluators; each evaluator reads only its own fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundQuery {
    pub d: usize,
    pub k: usize,
    pub mu: f64,
    pub r: f64,
    pub delta: f64,
    pub n: usize,
    pub n_train: usize,
    pub d_prime: usize,
    pub alpha: f64,
    pub beta: f64,
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(domain(format!("dimension d = {d} must be >= 2")));
    }
    Ok(())
}

fn check_mu_r(mu: f64, r: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(domain(format!("mu = {mu} must lie in (0, 1]")));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(domain(format!("R = {r} must lie in [0, 1)")));
    }
    Ok(())
}

/// Smallest perturbation that can guarantee universal risk `R0` against `k`
/// classifiers: `sqrt((4/d) ln(2k / (mu_min (1 - R0))))`.
pub fn theorem1_min_epsilon(d: usize, k: usize, mu_min: f64, r0: f64) -> Result<f64> {
    check_dim(d)?;
    if k == 0 {
        return Err(domain("ensemble size k must be >= 1"));
    }
    check_mu_r(mu_min, r0)?;
    Ok((4.0 / d as f64 * (2.0 * k as f64 / (mu_min * (1.0 - r0))).ln()).sqrt())
}

/// Single-classifier form: `sqrt((4/d) ln(2 / (mu (1 - R))))`.
pub fn lemma_a1_min_epsilon(d: usize, mu: f64, r: f64) -> Result<f64> {
    theorem1_min_epsilon(d, 1, mu, r)
}

/// Normal Levy family form: `sqrt((1/(beta d)) ln(alpha^2 / (mu (1 - R))))`.
pub fn levy_min_epsilon(alpha: f64, beta: f64, d: usize, mu: f64, r: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(domain(format!(
            "alpha = {alpha} and beta = {beta} must be > 0"
        )));
    }
    check_dim(d)?;
    check_mu_r(mu, r)?;
    let arg = alpha * alpha / (mu * (1.0 - r));
    if arg < 1.0 {
        return Err(domain(format!(
            "logarithm argument alpha^2 / (mu (1 - R)) = {arg} is below 1"
        )));
    }
    Ok((arg.ln() / (beta * d as f64)).sqrt())
}

/// `max(0, sum(risks) - (k - 1))`.
pub fn union_risk_lower_bound(risks: &[f64]) -> Result<f64> {
    if let Some(r) = risks.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(domain(format!("risk {r} outside [0, 1]")));
    }
    let k = risks.len() as f64;
    Ok((risks.iter().sum::<f64>() - (k - 1.0)).max(0.0))
}

/// `sqrt(ln(2/delta) / (2n))`.
pub fn hoeffding_deviation(n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("sample count n must be >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    Ok(((2.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// `1 - d' (N^2 + d + 1) / (d (d + 1))`, unclamped (may be negative).
pub fn qnfl_classifier_bound(d: usize, d_prime: usize, n_train: usize) -> Result<f64> {
    check_dim(d)?;
    if d_prime == 0 {
        return Err(domain("label count d' must be >= 1"));
    }
    let (d, dp, n) = (d as f64, d_prime as f64, n_train as f64);
    Ok(1.0 - dp * (n * n + d + 1.0) / (d * (d + 1.0)))
}

/// [`qnfl_classifier_bound`] clamped at zero.
pub fn qnfl_classifier_bound_clamped(d: usize, d_prime: usize, n_train: usize) -> Result<f64> {
    Ok(qnfl_classifier_bound(d, d_prime, n_train)?.max(0.0))
}

/// `1 - (N^2 + d + 1) / (d (d + 1))`, unclamped.
pub fn qnfl_unitary_bound(d: usize, n_train: usize) -> Result<f64> {
    qnfl_classifier_bound(d, 1, n_train)
}

/// `1 - |<a|b>|^2` via the Lagrange identity
/// `|a|^2 |b|^2 - |<a|b>|^2 = (1/2) sum_ij |a_i b_j - a_j b_i|^2`, which is
/// exactly zero when `a` and `b` are bitwise equal.
fn infidelity(a: &[C64], b: &[C64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            s += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
        }
    }
    s
}

fn check_unitary_circuit(c: &Circuit) -> Result<()> {
    if c.n_params() != 0 {
        return Err(domain(
            "circuits must be parameter-free (bind parameters first)",
        ));
    }
    Ok(())
}

/// Haar-average squared trace norm `|| t psi psi^dag t^dag - V psi psi^dag V^dag ||_1^2`
/// with `||A||_1 = Tr|A|`, i.e. `4 (1 - |<psi| t^dag V |psi>|^2)` per sample.
///
/// Returns the sample mean and its standard error.
pub fn estimate_quantum_risk(
    truth: &Circuit,
    hypothesis: &Circuit,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_unitary_circuit(truth)?;
    check_unitary_circuit(hypothesis)?;
    if truth.n_qubits() != hypothesis.n_qubits() {
        return Err(Error::DimensionMismatch {
            left: truth.n_qubits(),
            right: hypothesis.n_qubits(),
        });
    }
    if n_samples == 0 {
        return Err(Error::InsufficientData("n_samples must be >= 1".into()));
    }
    let n = truth.n_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..n_samples)
        .map(|_| haar_random_state_with(n, &mut rng))
        .collect::<Result<Vec<StateVector>>>()?;
    let values: Vec<f64> = states
        .par_iter()
        .map(|psi| {
            let a = truth.run(&[], psi).expect("validated circuit");
            let b = hypothesis.run(&[], psi).expect("validated circuit");
            4.0 * infidelity(a.amplitudes(), b.amplitudes())
        })
        .collect();
    Ok(mean_and_stderr(&values))
}

/// Trace norm convention with the 1/2 factor: `(1/2) Tr|A|`.
pub fn estimate_quantum_risk_halved(
    truth: &Circuit,
    hypothesis: &Circuit,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (m, s) = estimate_quantum_risk(truth, hypothesis, n_samples, seed)?;
    Ok((m / 4.0, s / 4.0))
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn disagrees(
    model: &ClassifierModel,
    truth: &ClassifierModel,
    layer: Option<&PerturbationLayer>,
    psi: &StateVector,
) -> Result<bool> {
    let input = match layer {
        Some(l) => l.apply(psi)?,
        None => psi.clone(),
    };
    Ok(model.predict(&input)? != truth.predict(&input)?)
}

/// Fraction of `n` Haar-random inputs (optionally passed through `layer`)
/// on which `model` and the reference `truth` classifier disagree, with its
/// binomial standard error.
pub fn haar_error_rate(
    model: &ClassifierModel,
    truth: &ClassifierModel,
    layer: Option<&PerturbationLayer>,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if model.n_in() != truth.n_in() {
        return Err(Error::DimensionMismatch {
            left: model.n_in(),
            right: truth.n_in(),
        });
    }
    if n == 0 {
        return Err(Error::InsufficientData("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..n)
        .map(|_| haar_random_state_with(model.n_in(), &mut rng))
        .collect::<Result<Vec<StateVector>>>()?;
    let wrong: Vec<bool> = states
        .par_iter()
        .map(|psi| disagrees(model, truth, layer, psi))
        .collect::<Result<_>>()?;
    let rate = wrong.iter().filter(|&&w| w).count() as f64 / n as f64;
    Ok((rate, (rate * (1.0 - rate) / n as f64).sqrt()))
}

/// Splits a master seed into independent per-trial seeds.
fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Coverage of the Hoeffding interval for the empirical error rate.
///
/// The true risk is first estimated from `oracle_samples` Haar inputs; each
/// of `trials` experiments then draws `n` fresh inputs and checks whether
/// its error rate lies within `hoeffding_deviation(n, delta)` of it.
#[allow(clippy::too_many_arguments)]
pub fn verify_hoeffding(
    model: &ClassifierModel,
    truth: &ClassifierModel,
    layer: Option<&PerturbationLayer>,
    oracle_samples: usize,
    trials: usize,
    n: usize,
    delta: f64,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InsufficientData("trials must be >= 1".into()));
    }
    let bound = hoeffding_deviation(n, delta)?;
    let (mu, _) = haar_error_rate(model, truth, layer, oracle_samples, seed)?;
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t));
            let mut wrong = 0usize;
            for _ in 0..n {
                let psi = haar_random_state_with(model.n_in(), &mut rng)?;
                wrong += usize::from(disagrees(model, truth, layer, &psi)?);
            }
            Ok((wrong as f64 / n as f64 - mu).abs() <= bound)
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / trials as f64)
}

fn density(psi: &StateVector) -> DMatrix<C64> {
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    &v * v.adjoint()
}

fn check_same_dim(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch {
            left: a.n_qubits(),
            right: b.n_qubits(),
        });
    }
    Ok(())
}

/// `(1/2) Tr|rho - sigma|` from the eigenvalues of the density-matrix
/// difference.
pub fn density_trace_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    check_same_dim(a, b)?;
    let diff = density(a) - density(b);
    let eig = SymmetricEigen::new(diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|e| e.abs()).sum::<f64>())
}

/// `sqrt(Tr (rho - sigma)^2)`.
pub fn density_hs_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    check_same_dim(a, b)?;
    let diff = density(a) - density(b);
    Ok(diff.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
}

/// Evaluates a named bound on a [`BoundQuery`].
pub fn evaluate_named(name: &str, q: &BoundQuery) -> Result<f64> {
    match name {
        "theorem1" => theorem1_min_epsilon(q.d, q.k, q.mu, q.r),
        "lemma_a1" => lemma_a1_min_epsilon(q.d, q.mu, q.r),
        "levy" => levy_min_epsilon(q.alpha, q.beta, q.d, q.mu, q.r),
        "hoeffding" => hoeffding_deviation(q.n, q.delta),
        "qnfl" => qnfl_classifier_bound(q.d, q.d_prime, q.n_train),
        "qnfl_unitary" => qnfl_unitary_bound(q.d, q.n_train),
        other => Err(domain(format!("unknown bound `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::GateOp;

    #[test]
    fn closed_form_examples() {
        let ln2 = std::f64::consts::LN_2.sqrt();
        assert!((theorem1_min_epsilon(4, 1, 1.0, 0.0).unwrap() - ln2).abs() < 1e-15);
        let a = theorem1_min_epsilon(64, 3, 0.2, 0.4).unwrap();
        let b = theorem1_min_epsilon(128, 3, 0.2, 0.4).unwrap();
        assert!((a / b - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(levy_min_epsilon(1.0, 1.0, 100, 1.0, 0.0).unwrap(), 0.0);
        assert!(
            (hoeffding_deviation(1, 2.0 / std::f64::consts::E.powi(2)).unwrap() - 1.0).abs()
                < 1e-15
        );
        assert_eq!(union_risk_lower_bound(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((union_risk_lower_bound(&[0.9, 0.9, 0.9]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(union_risk_lower_bound(&[0.1, 0.1]).unwrap(), 0.0);
        assert_eq!(qnfl_classifier_bound(2, 2, 0).unwrap(), 0.0);
        assert!((qnfl_unitary_bound(2, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(theorem1_min_epsilon(1, 1, 0.5, 0.5).is_err());
        assert!(theorem1_min_epsilon(4, 0, 0.5, 0.5).is_err());
        assert!(theorem1_min_epsilon(4, 1, 0.0, 0.5).is_err());
        assert!(theorem1_min_epsilon(4, 1, 0.5, 1.0).is_err());
        assert!(levy_min_epsilon(0.5, 1.0, 4, 1.0, 0.0).is_err());
        assert!(hoeffding_deviation(0, 0.1).is_err());
        assert!(union_risk_lower_bound(&[1.2]).is_err());
    }

    #[test]
    fn identical_channels_have_zero_risk() {
        let c = Circuit::from_gates(2, &[GateOp::rx(0, 0.3), GateOp::cnot(0, 1)]).unwrap();
        let (m, s) = estimate_quantum_risk(&c, &c, 200, 1).unwrap();
        assert_eq!((m, s), (0.0, 0.0));
    }
}
