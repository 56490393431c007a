//! Parameterized gate sequences.
//!
//! A [`Circuit`] is a template: each rotation angle is either fixed or a
//! scaled reference into a parameter vector. Parameters may be referenced by
//! several gates (weight sharing); derivative routines account for every
//! occurrence separately.

use crate::error::{Error, Result};
use crate::simulator::{
    apply_in_place, inner, qubit_probability, GateKind, GateOp, StateVector, C64,
};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    /// `scale * params[index]`.
    Param {
        index: usize,
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Angle,
}

impl ParamGate {
    fn bind(&self, params: &[f64]) -> GateOp {
        let angle = match self.angle {
            Angle::Fixed(a) => a,
            Angle::Param { index, scale } => scale * params[index],
        };
        GateOp {
            kind: self.kind,
            target: self.target,
            control: self.control,
            angle,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<ParamGate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_params: usize) -> Self {
        Self {
            n_qubits,
            n_params,
            gates: Vec::new(),
        }
    }

    /// Parameter-free circuit from concrete gates.
    pub fn from_gates(n_qubits: usize, gates: &[GateOp]) -> Result<Self> {
        let mut c = Self::new(n_qubits, 0);
        for g in gates {
            g.validate(n_qubits)?;
            c.gates.push(ParamGate {
                kind: g.kind,
                target: g.target,
                control: g.control,
                angle: Angle::Fixed(g.angle),
            });
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[ParamGate] {
        &self.gates
    }

    pub fn rx(&mut self, target: usize, angle: Angle) {
        self.push(GateKind::Rx, target, None, angle);
    }

    pub fn rz(&mut self, target: usize, angle: Angle) {
        self.push(GateKind::Rz, target, None, angle);
    }

    pub fn cnot(&mut self, control: usize, target: usize) {
        self.push(GateKind::Cnot, target, Some(control), Angle::Fixed(0.0));
    }

    /// Appends `other`, shifting its parameter indices by `param_offset`.
    pub fn append(&mut self, other: &Circuit, param_offset: usize) {
        assert_eq!(self.n_qubits, other.n_qubits, "qubit count mismatch");
        assert!(
            param_offset + other.n_params <= self.n_params,
            "parameter range overflow"
        );
        for g in &other.gates {
            let angle = match g.angle {
                Angle::Param { index, scale } => Angle::Param {
                    index: index + param_offset,
                    scale,
                },
                fixed => fixed,
            };
            self.gates.push(ParamGate { angle, ..*g });
        }
    }

    fn push(&mut self, kind: GateKind, target: usize, control: Option<usize>, angle: Angle) {
        assert!(target < self.n_qubits, "target {target} out of range");
        if let Some(c) = control {
            assert!(c < self.n_qubits && c != target, "bad control {c}");
        }
        if let Angle::Param { index, .. } = angle {
            assert!(
                index < self.n_params,
                "parameter index {index} out of range"
            );
        }
        self.gates.push(ParamGate {
            kind,
            target,
            control,
            angle,
        });
    }

    pub fn bind(&self, params: &[f64]) -> Result<Vec<GateOp>> {
        self.check_params(params)?;
        Ok(self.gates.iter().map(|g| g.bind(params)).collect())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::LengthMismatch {
                expected: self.n_params,
                found: params.len(),
            });
        }
        Ok(())
    }

    pub fn run(&self, params: &[f64], state: &StateVector) -> Result<StateVector> {
        self.check_params(params)?;
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: state.n_qubits(),
            });
        }
        let mut amps = state.amplitudes().to_vec();
        self.run_in_place(params, &mut amps);
        Ok(StateVector::from_raw(self.n_qubits, amps))
    }

    /// Unchecked; `params` and `amps` must match the circuit.
    pub(crate) fn run_in_place(&self, params: &[f64], amps: &mut [C64]) {
        for g in &self.gates {
            apply_in_place(amps, self.n_qubits, &g.bind(params));
        }
    }

    /// Runs with the angle of gate `occurrence` offset by `shift`.
    pub(crate) fn run_shifted(
        &self,
        params: &[f64],
        amps: &mut [C64],
        occurrence: usize,
        shift: f64,
    ) {
        for (i, g) in self.gates.iter().enumerate() {
            let mut op = g.bind(params);
            if i == occurrence {
                op.angle += shift;
            }
            apply_in_place(amps, self.n_qubits, &op);
        }
    }

    /// Applies `U(params)^dagger`.
    pub(crate) fn run_inverse_in_place(&self, params: &[f64], amps: &mut [C64]) {
        for g in self.gates.iter().rev() {
            apply_in_place(amps, self.n_qubits, &g.bind(params).inverse());
        }
    }

    /// Indices of gates whose angle depends on a parameter, with that
    /// parameter's index and scale.
    pub(crate) fn parameter_occurrences(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.gates
            .iter()
            .enumerate()
            .filter_map(|(i, g)| match g.angle {
                Angle::Param { index, scale } => Some((i, index, scale)),
                Angle::Fixed(_) => None,
            })
    }

    /// Probability `q` that `qubit` reads `outcome` after the circuit, and
    /// `dq/dparams`, by reverse-mode (adjoint) differentiation.
    ///
    /// Uses `d/dtheta R_P(theta) = R_P(theta + pi) / 2` for both rotation kinds.
    pub(crate) fn outcome_probability_gradient(
        &self,
        params: &[f64],
        input: &[C64],
        qubit: usize,
        outcome: u8,
    ) -> (f64, Vec<f64>) {
        let n = self.n_qubits;
        let mut phi = input.to_vec();
        self.run_in_place(params, &mut phi);
        let q = qubit_probability(&phi, n, qubit, outcome);
        let mut lambda = project(&phi, n, qubit, outcome);

        let mut grad = vec![0.0; self.n_params];
        let mut scratch = vec![C64::new(0.0, 0.0); phi.len()];
        for g in self.gates.iter().rev() {
            let op = g.bind(params);
            apply_in_place(&mut phi, n, &op.inverse());
            if let Angle::Param { index, scale } = g.angle {
                scratch.copy_from_slice(&phi);
                let deriv = GateOp {
                    angle: op.angle + PI,
                    ..op
                };
                apply_in_place(&mut scratch, n, &deriv);
                // dq = 2 Re <lambda| dU |phi>, dU = R(theta + pi) / 2.
                grad[index] += scale * inner(&lambda, &scratch).re;
            }
            apply_in_place(&mut lambda, n, &op.inverse());
        }
        (q, grad)
    }
}

/// Projects `amps` onto the subspace where `qubit` reads `outcome`.
pub(crate) fn project(amps: &[C64], n_qubits: usize, qubit: usize, outcome: u8) -> Vec<C64> {
    let mask = 1usize << (n_qubits - 1 - qubit);
    let want = if outcome == 0 { 0 } else { mask };
    amps.iter()
        .enumerate()
        .map(|(i, a)| {
            if i & mask == want {
                *a
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}
