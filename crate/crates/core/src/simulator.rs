//! Exact pure-state simulation on dense amplitude vectors.
//!
//! Qubit 0 is the most significant bit of the basis-state index, so the
//! amplitude of `|q0 q1 ... q(n-1)>` sits at index `q0*2^(n-1) + ... + q(n-1)`.
//! Rotations follow `R_P(theta) = exp(-i theta P / 2)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Normalization tolerance for states accepted from callers.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Normalized pure state on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps an amplitude vector, checking length and normalization.
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidQuery(
                "a state needs at least one qubit".into(),
            ));
        }
        if amps.len() != 1usize << n_qubits {
            return Err(Error::LengthMismatch {
                expected: 1usize << n_qubits,
                found: amps.len(),
            });
        }
        let norm = norm_of(&amps);
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Rescales `amps` to unit norm. The length must be a power of two.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidQuery(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let norm = norm_of(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if n_qubits == 0 || index >= dim {
            return Err(Error::InvalidQuery(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Skips the normalization check; callers guarantee the invariant.
    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1usize << n_qubits);
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amps)
    }

    /// `|self> (x) |other>`, with `self` on the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector::from_raw(self.n_qubits + other.n_qubits, amps)
    }

    pub fn apply(&self, gate: &GateOp) -> Result<StateVector> {
        apply_gate(self, gate)
    }
}

pub(crate) fn norm_of(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rx,
    Rz,
    Cnot,
}

/// A concrete gate with its angle bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    /// Radians; ignored for CNOT.
    pub angle: f64,
}

impl GateOp {
    pub fn rx(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Rx,
            target,
            control: None,
            angle,
        }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Rz,
            target,
            control: None,
            angle,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
            angle: 0.0,
        }
    }

    pub fn inverse(&self) -> Self {
        match self.kind {
            GateKind::Cnot => *self,
            _ => Self {
                angle: -self.angle,
                ..*self
            },
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::InvalidGate(format!(
                "target {} out of range for {n_qubits} qubits",
                self.target
            )));
        }
        match (self.kind, self.control) {
            (GateKind::Cnot, Some(c)) if c >= n_qubits => Err(Error::InvalidGate(format!(
                "control {c} out of range for {n_qubits} qubits"
            ))),
            (GateKind::Cnot, Some(c)) if c == self.target => {
                Err(Error::InvalidGate(format!("control equals target ({c})")))
            }
            (GateKind::Cnot, None) => Err(Error::InvalidGate("CNOT without control".into())),
            (GateKind::Rx | GateKind::Rz, Some(_)) => {
                Err(Error::InvalidGate("rotation gates take no control".into()))
            }
            _ if !self.angle.is_finite() => Err(Error::InvalidGate(format!(
                "non-finite angle {}",
                self.angle
            ))),
            _ => Ok(()),
        }
    }
}

/// Returns `gate |state>`.
pub fn apply_gate(state: &StateVector, gate: &GateOp) -> Result<StateVector> {
    gate.validate(state.n_qubits)?;
    let mut amps = state.amps.clone();
    apply_in_place(&mut amps, state.n_qubits, gate);
    Ok(StateVector::from_raw(state.n_qubits, amps))
}

#[inline]
fn qubit_mask(n_qubits: usize, qubit: usize) -> usize {
    1usize << (n_qubits - 1 - qubit)
}

/// Unchecked in-place kernel; `gate` must already be validated for `n_qubits`.
pub(crate) fn apply_in_place(amps: &mut [C64], n_qubits: usize, gate: &GateOp) {
    match gate.kind {
        GateKind::Rx => {
            let (s, c) = (gate.angle * 0.5).sin_cos();
            let mis = C64::new(0.0, -s);
            for_each_pair(amps, qubit_mask(n_qubits, gate.target), |a, b| {
                let (x, y) = (*a, *b);
                *a = x * c + y * mis;
                *b = x * mis + y * c;
            });
        }
        GateKind::Rz => {
            let (s, c) = (gate.angle * 0.5).sin_cos();
            let lo = C64::new(c, -s);
            let hi = C64::new(c, s);
            for_each_pair(amps, qubit_mask(n_qubits, gate.target), |a, b| {
                *a *= lo;
                *b *= hi;
            });
        }
        GateKind::Cnot => {
            let cmask = qubit_mask(n_qubits, gate.control.expect("validated CNOT"));
            let tmask = qubit_mask(n_qubits, gate.target);
            for i in 0..amps.len() {
                if i & cmask != 0 && i & tmask == 0 {
                    amps.swap(i, i | tmask);
                }
            }
        }
    }
}

#[inline]
fn for_each_pair(amps: &mut [C64], mask: usize, mut f: impl FnMut(&mut C64, &mut C64)) {
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        let (lo, hi) = amps[base..base + 2 * mask].split_at_mut(mask);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            f(a, b);
        }
        base += 2 * mask;
    }
}

/// Marginal outcome probabilities on `qubits`; the first listed qubit is the
/// most significant bit of the outcome index.
pub fn measure_probabilities(state: &StateVector, qubits: &[usize]) -> Result<Vec<f64>> {
    if qubits.is_empty() {
        return Err(Error::InvalidQuery("empty qubit list".into()));
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q >= state.n_qubits {
            return Err(Error::InvalidQuery(format!(
                "qubit {q} out of range for {} qubits",
                state.n_qubits
            )));
        }
        if qubits[..i].contains(&q) {
            return Err(Error::InvalidQuery(format!("duplicate qubit {q}")));
        }
    }
    let masks: Vec<usize> = qubits
        .iter()
        .map(|&q| qubit_mask(state.n_qubits, q))
        .collect();
    let mut probs = vec![0.0; 1usize << qubits.len()];
    for (i, a) in state.amps.iter().enumerate() {
        let outcome = masks
            .iter()
            .fold(0usize, |acc, &m| (acc << 1) | usize::from(i & m != 0));
        probs[outcome] += a.norm_sqr();
    }
    Ok(probs)
}

/// Probability that `qubit` reads `outcome` (0 or 1); no validation.
pub(crate) fn qubit_probability(amps: &[C64], n_qubits: usize, qubit: usize, outcome: u8) -> f64 {
    let mask = qubit_mask(n_qubits, qubit);
    let want = if outcome == 0 { 0 } else { mask };
    amps.iter()
        .enumerate()
        .filter(|(i, _)| i & mask == want)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

fn check_pair(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch {
            left: a.n_qubits,
            right: b.n_qubits,
        });
    }
    Ok(())
}

/// `<a|b>`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    check_pair(a, b)?;
    Ok(inner(&a.amps, &b.amps))
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Square-root fidelity `|<a|b>|`, clamped to `[0, 1]`.
pub fn overlap_fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner_product(a, b)?.norm().min(1.0))
}

/// Probability fidelity `|<a|b>|^2`; the figure reported in experiment summaries.
pub fn squared_fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr().min(1.0))
}

/// `1 - |<a|b>|^2` from the phase-aligned difference `|b - e^{i phi} a|^2 =
/// 2 (1 - |<a|b>|)`, which avoids the cancellation of the direct form and is
/// exactly zero for equal states.
pub(crate) fn pure_infidelity(a: &[C64], b: &[C64]) -> f64 {
    let ov = inner(a, b);
    let r = ov.norm();
    let phase = if r > 0.0 { ov / r } else { C64::new(1.0, 0.0) };
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (y - phase * x).norm_sqr())
        .sum();
    (0.5 * diff * (1.0 + r.min(1.0))).clamp(0.0, 1.0)
}

/// Pure-state trace distance `sqrt(1 - |<a|b>|^2)`.
pub fn trace_distance_pure(a: &StateVector, b: &StateVector) -> Result<f64> {
    inner_product(a, b)?;
    Ok(pure_infidelity(a.amplitudes(), b.amplitudes()).sqrt())
}

/// Hilbert-Schmidt distance `sqrt(Tr[(rho - sigma)^2])` of two pure states.
pub fn hs_distance_pure(a: &StateVector, b: &StateVector) -> Result<f64> {
    inner_product(a, b)?;
    Ok((2.0 * pure_infidelity(a.amplitudes(), b.amplitudes())).sqrt())
}

/// Haar-random state: normalized vector of i.i.d. standard complex Gaussians.
pub fn haar_random_state(n_qubits: usize, seed: u64) -> Result<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_state_with(n_qubits, &mut rng)
}

pub fn haar_random_state_with<R: rand::Rng + ?Sized>(
    n_qubits: usize,
    rng: &mut R,
) -> Result<StateVector> {
    if n_qubits == 0 {
        return Err(Error::InvalidQuery("n_qubits must be >= 1".into()));
    }
    let amps: Vec<C64> = (0..1usize << n_qubits)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect();
    StateVector::normalized(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn rx_pi_flips_with_phase() {
        let s = StateVector::zero(1)
            .unwrap()
            .apply(&GateOp::rx(0, PI))
            .unwrap();
        assert!(close(s.amplitudes()[0], C64::new(0.0, 0.0)));
        assert!(close(s.amplitudes()[1], C64::new(0.0, -1.0)));
    }

    #[test]
    fn cnot_truth_table() {
        // |10> has index 2 with qubit 0 as MSB.
        let s = StateVector::basis(2, 0b10).unwrap();
        let out = s.apply(&GateOp::cnot(0, 1)).unwrap();
        assert_eq!(out, StateVector::basis(2, 0b11).unwrap());
        let s = StateVector::basis(2, 0b01).unwrap();
        assert_eq!(s.apply(&GateOp::cnot(0, 1)).unwrap(), s);
        assert_eq!(
            s.apply(&GateOp::cnot(1, 0)).unwrap(),
            StateVector::basis(2, 0b11).unwrap()
        );
    }

    #[test]
    fn rz_on_zero_is_phase() {
        let theta = 0.731;
        let s = StateVector::zero(1)
            .unwrap()
            .apply(&GateOp::rz(0, theta))
            .unwrap();
        assert!(close(s.amplitudes()[0], C64::from_polar(1.0, -theta / 2.0)));
        let p = measure_probabilities(&s, &[0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0);
    }

    #[test]
    fn invalid_gates_rejected() {
        let s = StateVector::zero(2).unwrap();
        assert!(matches!(
            s.apply(&GateOp::rx(2, 0.1)),
            Err(Error::InvalidGate(_))
        ));
        assert!(matches!(
            s.apply(&GateOp::cnot(1, 1)),
            Err(Error::InvalidGate(_))
        ));
        assert!(matches!(
            s.apply(&GateOp::cnot(3, 0)),
            Err(Error::InvalidGate(_))
        ));
    }

    #[test]
    fn measurement_queries() {
        let s = StateVector::zero(2).unwrap();
        assert_eq!(measure_probabilities(&s, &[1]).unwrap(), vec![1.0, 0.0]);
        let h = 1.0 / 2f64.sqrt();
        let bell = StateVector::new(
            2,
            vec![
                C64::new(h, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(h, 0.0),
            ],
        )
        .unwrap();
        let p = measure_probabilities(&bell, &[0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!(measure_probabilities(&s, &[]).is_err());
        assert!(measure_probabilities(&s, &[0, 0]).is_err());
        assert!(measure_probabilities(&s, &[2]).is_err());
    }

    #[test]
    fn measurement_order_follows_query_order() {
        let s = StateVector::basis(3, 0b100).unwrap();
        assert_eq!(
            measure_probabilities(&s, &[2, 0]).unwrap(),
            vec![0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(
            measure_probabilities(&s, &[0, 2]).unwrap(),
            vec![0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn full_register_probabilities_match_squared_moduli() {
        let s = haar_random_state(3, 11).unwrap();
        let p = measure_probabilities(&s, &[0, 1, 2]).unwrap();
        for (pi, a) in p.iter().zip(s.amplitudes()) {
            assert!((pi - a.norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn distances_on_reference_pairs() {
        let psi = haar_random_state(2, 5).unwrap();
        assert!((overlap_fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
        assert!(trace_distance_pure(&psi, &psi).unwrap() < 1e-7);
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(overlap_fidelity(&zero, &one).unwrap(), 0.0);
        assert_eq!(trace_distance_pure(&zero, &one).unwrap(), 1.0);
        assert!((hs_distance_pure(&zero, &one).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        for theta in [0.1, 1.3, 2.9, 4.0] {
            let rot = zero.apply(&GateOp::rx(0, theta)).unwrap();
            let f = overlap_fidelity(&zero, &rot).unwrap();
            assert!((f - (theta / 2.0).cos().abs()).abs() < 1e-12);
        }
        assert!(matches!(
            overlap_fidelity(&zero, &psi),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn haar_is_deterministic_and_normalized() {
        let a = haar_random_state(4, 99).unwrap();
        let b = haar_random_state(4, 99).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-10);
        assert_ne!(a, haar_random_state(4, 100).unwrap());
        assert!((haar_random_state(1, 3).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn haar_first_moment() {
        // E|<0|psi>|^2 = 1/d for Haar states.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| haar_random_state_with(3, &mut rng).unwrap().amplitudes()[0].norm_sqr())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.125).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            StateVector::new(1, vec![C64::new(1.0, 0.0); 2]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            StateVector::new(2, vec![C64::new(1.0, 0.0); 2]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(StateVector::normalized(vec![C64::new(0.0, 0.0); 4]).is_err());
        assert!(StateVector::normalized(vec![C64::new(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn tensor_orders_leading_qubits_first() {
        let one = StateVector::basis(1, 1).unwrap();
        let zero = StateVector::basis(2, 0).unwrap();
        assert_eq!(one.tensor(&zero), StateVector::basis(3, 0b100).unwrap());
    }
}
