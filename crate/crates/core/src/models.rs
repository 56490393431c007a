//! Classifier architectures: layered variational circuits and QCNNs.
//!
//! Every model acts on `n_in` input qubits plus one readout qubit appended
//! last (least significant) and prepared in `|1>`. The label is read from the
//! readout qubit: `y = 1` iff `P(y=1) >= P(y=0)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Angle, Circuit};
use crate::error::{Error, Result};
use crate::simulator::{qubit_probability, StateVector, C64};
use crate::textfmt::{fmt_f64, parse_f64, parse_u64, parse_usize, write_atomic, Document};

/// Number of labels produced by the binary readout.
pub const LABEL_SET_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcnnSize {
    /// 8-angle conv units, 1-angle pooling.
    Small,
    /// 12-angle conv units, 2-angle pooling.
    Large,
}

impl QcnnSize {
    fn conv_params(self) -> usize {
        match self {
            QcnnSize::Small => 8,
            QcnnSize::Large => 12,
        }
    }

    fn pool_params(self) -> usize {
        match self {
            QcnnSize::Small => 1,
            QcnnSize::Large => 2,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            QcnnSize::Small => "small",
            QcnnSize::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Variational { depth: usize },
    Qcnn { size: QcnnSize },
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Variational { depth } => write!(f, "variational(depth={depth})"),
            Architecture::Qcnn { size } => write!(f, "qcnn({})", size.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// Rotation unit A (X then Z per qubit), CNOT entangler, rotation unit B.
    Variational {
        qubits: Vec<usize>,
        entangler: Vec<(usize, usize)>,
        rotation_a: usize,
        rotation_b: usize,
    },
    /// Translationally shared two-qubit unit on each pair.
    Conv {
        label: String,
        pairs: Vec<(usize, usize)>,
        first_param: usize,
        size: QcnnSize,
    },
    /// Controlled rotations from the discarded qubit (first) onto the kept one.
    Pool {
        label: String,
        pairs: Vec<(usize, usize)>,
        first_param: usize,
        size: QcnnSize,
    },
    /// Independent rotations, CNOT chain, independent rotations.
    FullyConnected {
        label: String,
        qubits: Vec<usize>,
        first_param: usize,
    },
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match self {
            LayerSpec::Variational { qubits, .. } => 4 * qubits.len(),
            LayerSpec::Conv { size, .. } => size.conv_params(),
            LayerSpec::Pool { size, .. } => size.pool_params(),
            LayerSpec::FullyConnected { qubits, .. } => 4 * qubits.len(),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            LayerSpec::Variational { .. } => "V",
            LayerSpec::Conv { label, .. }
            | LayerSpec::Pool { label, .. }
            | LayerSpec::FullyConnected { label, .. } => label,
        }
    }

    fn emit(&self, c: &mut Circuit) {
        let p = |index: usize| Angle::Param { index, scale: 1.0 };
        match self {
            LayerSpec::Variational {
                qubits,
                entangler,
                rotation_a,
                rotation_b,
            } => {
                for (k, &q) in qubits.iter().enumerate() {
                    c.rx(q, p(rotation_a + 2 * k));
                    c.rz(q, p(rotation_a + 2 * k + 1));
                }
                for &(ctl, tgt) in entangler {
                    c.cnot(ctl, tgt);
                }
                for (k, &q) in qubits.iter().enumerate() {
                    c.rx(q, p(rotation_b + 2 * k));
                    c.rz(q, p(rotation_b + 2 * k + 1));
                }
            }
            LayerSpec::Conv {
                pairs,
                first_param,
                size,
                ..
            } => {
                for &(a, b) in pairs {
                    let mut k = *first_param;
                    let mut xz = |c: &mut Circuit, q: usize| {
                        c.rx(q, p(k));
                        c.rz(q, p(k + 1));
                        k += 2;
                    };
                    xz(c, a);
                    xz(c, b);
                    c.cnot(a, b);
                    xz(c, a);
                    xz(c, b);
                    if *size == QcnnSize::Large {
                        c.cnot(b, a);
                        xz(c, a);
                        xz(c, b);
                    }
                }
            }
            LayerSpec::Pool {
                pairs,
                first_param,
                size,
                ..
            } => {
                for &(discard, keep) in pairs {
                    let mut k = *first_param;
                    if *size == QcnnSize::Large {
                        controlled_rz(c, discard, keep, k);
                        k += 1;
                    }
                    hadamard(c, keep);
                    controlled_rz(c, discard, keep, k);
                    hadamard(c, keep);
                }
            }
            LayerSpec::FullyConnected {
                qubits,
                first_param,
                ..
            } => {
                let n = qubits.len();
                for (k, &q) in qubits.iter().enumerate() {
                    c.rx(q, p(first_param + 2 * k));
                    c.rz(q, p(first_param + 2 * k + 1));
                }
                for w in qubits.windows(2) {
                    c.cnot(w[0], w[1]);
                }
                for (k, &q) in qubits.iter().enumerate() {
                    c.rx(q, p(first_param + 2 * n + 2 * k));
                    c.rz(q, p(first_param + 2 * n + 2 * k + 1));
                }
            }
        }
    }
}

/// Hadamard up to global phase: `H ~ RZ(pi/2) RX(pi/2) RZ(pi/2)`.
fn hadamard(c: &mut Circuit, q: usize) {
    c.rz(q, Angle::Fixed(FRAC_PI_2));
    c.rx(q, Angle::Fixed(FRAC_PI_2));
    c.rz(q, Angle::Fixed(FRAC_PI_2));
}

/// Controlled `RZ(params[index])`: `RZ(t/2) CNOT RZ(-t/2) CNOT` on the target.
fn controlled_rz(c: &mut Circuit, control: usize, target: usize, index: usize) {
    c.rz(target, Angle::Param { index, scale: 0.5 });
    c.cnot(control, target);
    c.rz(target, Angle::Param { index, scale: -0.5 });
    c.cnot(control, target);
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub n_in: usize,
    pub m_readout: usize,
    pub architecture: Architecture,
    pub layers: Vec<LayerSpec>,
    pub param_count: usize,
}

impl CircuitSpec {
    pub fn variational(n_in: usize, depth: usize) -> Result<Self> {
        if n_in == 0 || depth == 0 {
            return Err(Error::Build(
                "variational circuit needs n_in >= 1 and depth >= 1".into(),
            ));
        }
        let n = n_in + 1;
        let qubits: Vec<usize> = (0..n).collect();
        let entangler: Vec<(usize, usize)> = (0..n - 1).map(|k| (k, k + 1)).collect();
        let layers: Vec<LayerSpec> = (0..depth)
            .map(|i| LayerSpec::Variational {
                qubits: qubits.clone(),
                entangler: entangler.clone(),
                rotation_a: i * 4 * n,
                rotation_b: i * 4 * n + 2 * n,
            })
            .collect();
        Ok(Self::from_layers(
            n_in,
            Architecture::Variational { depth },
            layers,
        ))
    }

    /// Three conv stages (C1..C6) separated by two pooling stages (P1, P2),
    /// then a fully connected layer. Pooling keeps the odd member of each
    /// neighboring pair, so the readout qubit (last) always survives.
    pub fn qcnn(n_in: usize, size: QcnnSize) -> Result<Self> {
        let n = n_in + 1;
        if n < 4 {
            return Err(Error::Build(format!(
                "QCNN needs at least 4 qubits including readout, got {n}"
            )));
        }
        let mut active: Vec<usize> = (0..n).collect();
        let mut layers = Vec::new();
        let mut next = 0;
        for stage in 0..3 {
            let even: Vec<(usize, usize)> = active.chunks_exact(2).map(|w| (w[0], w[1])).collect();
            let odd: Vec<(usize, usize)> = if active.len() == 2 {
                even.clone()
            } else {
                active[1..].chunks_exact(2).map(|w| (w[0], w[1])).collect()
            };
            for (j, pairs) in [even, odd].into_iter().enumerate() {
                let layer = LayerSpec::Conv {
                    label: format!("C{}", 2 * stage + j + 1),
                    pairs,
                    first_param: next,
                    size,
                };
                next += layer.param_count();
                layers.push(layer);
            }
            if stage < 2 && active.len() >= 3 {
                let pairs: Vec<(usize, usize)> =
                    active.chunks_exact(2).map(|w| (w[0], w[1])).collect();
                let layer = LayerSpec::Pool {
                    label: format!("P{}", stage + 1),
                    pairs: pairs.clone(),
                    first_param: next,
                    size,
                };
                next += layer.param_count();
                layers.push(layer);
                active.retain(|q| !pairs.iter().any(|&(d, _)| d == *q));
            }
        }
        layers.push(LayerSpec::FullyConnected {
            label: "FC".into(),
            qubits: active,
            first_param: next,
        });
        Ok(Self::from_layers(n_in, Architecture::Qcnn { size }, layers))
    }

    fn from_layers(n_in: usize, architecture: Architecture, layers: Vec<LayerSpec>) -> Self {
        let param_count = layers.iter().map(LayerSpec::param_count).sum();
        Self {
            n_in,
            m_readout: 1,
            architecture,
            layers,
            param_count,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_in + self.m_readout
    }

    pub fn readout_qubit(&self) -> usize {
        self.n_in
    }

    pub fn compile(&self) -> Circuit {
        let mut c = Circuit::new(self.n_qubits(), self.param_count);
        for layer in &self.layers {
            layer.emit(&mut c);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelMeta {
    pub name: String,
    pub seed: u64,
    /// Free-form training metadata carried through checkpoints.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    spec: CircuitSpec,
    circuit: Circuit,
    params: Vec<f64>,
    pub meta: ModelMeta,
}

impl ClassifierModel {
    /// Wraps a spec with explicit parameters.
    pub fn with_params(spec: CircuitSpec, params: Vec<f64>, meta: ModelMeta) -> Result<Self> {
        if params.len() != spec.param_count {
            return Err(Error::LengthMismatch {
                expected: spec.param_count,
                found: params.len(),
            });
        }
        let circuit = spec.compile();
        Ok(Self {
            spec,
            circuit,
            params,
            meta,
        })
    }

    /// Angles drawn uniformly from `[0, 2 pi)`.
    pub fn random(spec: CircuitSpec, name: impl Into<String>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..spec.param_count)
            .map(|_| rng.random::<f64>() * TAU)
            .collect();
        let meta = ModelMeta {
            name: name.into(),
            seed,
            extra: BTreeMap::new(),
        };
        Self::with_params(spec, params, meta).expect("param count matches spec")
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn n_in(&self) -> usize {
        self.spec.n_in
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count
    }

    pub fn label_set_size(&self) -> usize {
        LABEL_SET_SIZE
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.spec.param_count {
            return Err(Error::LengthMismatch {
                expected: self.spec.param_count,
                found: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub(crate) fn check_input(&self, input: &StateVector) -> Result<()> {
        if input.n_qubits() != self.spec.n_in {
            return Err(Error::DimensionMismatch {
                left: self.spec.n_in,
                right: input.n_qubits(),
            });
        }
        Ok(())
    }

    /// Full-register amplitudes of `|input> (x) |1>`.
    pub(crate) fn prepare(&self, input: &[C64]) -> Vec<C64> {
        let mut full = vec![C64::new(0.0, 0.0); 2 * input.len()];
        for (i, a) in input.iter().enumerate() {
            full[2 * i + 1] = *a;
        }
        full
    }

    /// Readout probabilities of the already evolved full register.
    pub(crate) fn readout(&self, full: &[C64]) -> [f64; 2] {
        let n = self.spec.n_qubits();
        let r = self.spec.readout_qubit();
        [
            qubit_probability(full, n, r, 0),
            qubit_probability(full, n, r, 1),
        ]
    }

    /// Unchecked forward pass with an explicit parameter vector.
    pub(crate) fn forward_with(&self, params: &[f64], input: &[C64]) -> [f64; 2] {
        let mut full = self.prepare(input);
        self.circuit.run_in_place(params, &mut full);
        self.readout(&full)
    }

    pub fn forward(&self, input: &StateVector) -> Result<[f64; 2]> {
        self.check_input(input)?;
        Ok(self.forward_with(&self.params, input.amplitudes()))
    }

    pub fn predict(&self, input: &StateVector) -> Result<u8> {
        Ok(predict_from_probs(&self.forward(input)?))
    }

    pub fn to_text(&self) -> String {
        let mut d = Document::new(CHECKPOINT_MAGIC);
        d.set("name", &self.meta.name);
        d.set("seed", self.meta.seed);
        match self.spec.architecture {
            Architecture::Variational { depth } => {
                d.set("architecture", "variational");
                d.set("depth", depth);
            }
            Architecture::Qcnn { size } => {
                d.set("architecture", "qcnn");
                d.set("qcnn_size", size.as_str());
            }
        }
        d.set("n_in", self.spec.n_in);
        d.set("m_readout", self.spec.m_readout);
        d.set("label_set_size", LABEL_SET_SIZE);
        d.set("param_count", self.spec.param_count);
        for (k, v) in &self.meta.extra {
            d.set(format!("meta.{k}"), v);
        }
        d.section("params", self.params.iter().map(|&x| fmt_f64(x)).collect());
        d.render()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let d = Document::parse(text, CHECKPOINT_MAGIC)?;
        let n_in = parse_usize("n_in", d.require("n_in")?)?;
        let m_readout = parse_usize("m_readout", d.require("m_readout")?)?;
        if m_readout != 1 {
            return Err(Error::parse(
                "m_readout",
                "only a single readout qubit is supported",
            ));
        }
        let label_set_size = parse_usize("label_set_size", d.require("label_set_size")?)?;
        if label_set_size != LABEL_SET_SIZE {
            return Err(Error::parse(
                "label_set_size",
                "only binary readout is supported",
            ));
        }
        let spec = match d.require("architecture")? {
            "variational" => {
                CircuitSpec::variational(n_in, parse_usize("depth", d.require("depth")?)?)?
            }
            "qcnn" => {
                let size = match d.require("qcnn_size")? {
                    "small" => QcnnSize::Small,
                    "large" => QcnnSize::Large,
                    other => return Err(Error::parse("qcnn_size", format!("unknown `{other}`"))),
                };
                CircuitSpec::qcnn(n_in, size)?
            }
            other => return Err(Error::parse("architecture", format!("unknown `{other}`"))),
        };
        let declared = parse_usize("param_count", d.require("param_count")?)?;
        if declared != spec.param_count {
            return Err(Error::parse(
                "param_count",
                format!(
                    "declared {declared}, architecture implies {}",
                    spec.param_count
                ),
            ));
        }
        let params = d
            .find_section("params")?
            .lines
            .iter()
            .map(|l| parse_f64("params", l))
            .collect::<Result<Vec<f64>>>()?;
        if params.len() != declared {
            return Err(Error::parse(
                "params",
                format!("expected {declared} values, found {}", params.len()),
            ));
        }
        let extra = d
            .header
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v.clone())))
            .collect();
        let meta = ModelMeta {
            name: d.require("name")?.to_string(),
            seed: parse_u64("seed", d.require("seed")?)?,
            extra,
        };
        Self::with_params(spec, params, meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub const CHECKPOINT_MAGIC: &str = "qadv-checkpoint v1";

/// `1` iff `P(y=1) >= P(y=0)`; ties go to 1.
pub fn predict_from_probs(probs: &[f64; 2]) -> u8 {
    u8::from(probs[1] >= probs[0])
}

pub fn forward(model: &ClassifierModel, input: &StateVector) -> Result<[f64; 2]> {
    model.forward(input)
}

pub fn predict(model: &ClassifierModel, input: &StateVector) -> Result<u8> {
    model.predict(input)
}

/// Multi-layer variational classifier on `n_in + 1` qubits.
pub fn build_variational_classifier(
    n_in: usize,
    depth: usize,
    seed: u64,
) -> Result<ClassifierModel> {
    let spec = CircuitSpec::variational(n_in, depth)?;
    Ok(ClassifierModel::random(
        spec,
        format!("variational-d{depth}"),
        seed,
    ))
}

pub fn build_qcnn(n_in: usize, size: QcnnSize, seed: u64) -> Result<ClassifierModel> {
    let spec = CircuitSpec::qcnn(n_in, size)?;
    Ok(ClassifierModel::random(
        spec,
        format!("qcnn-{}", size.as_str()),
        seed,
    ))
}

/// Roster entry: classifier number and architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RosterEntry {
    pub id: usize,
    pub architecture: Architecture,
}

/// The eight-member ensemble: two QCNNs, then variational depths 5 through 10.
pub fn default_roster() -> Vec<RosterEntry> {
    let mut roster = vec![
        RosterEntry {
            id: 1,
            architecture: Architecture::Qcnn {
                size: QcnnSize::Small,
            },
        },
        RosterEntry {
            id: 2,
            architecture: Architecture::Qcnn {
                size: QcnnSize::Large,
            },
        },
    ];
    roster.extend((5..=10).enumerate().map(|(i, depth)| RosterEntry {
        id: i + 3,
        architecture: Architecture::Variational { depth },
    }));
    roster
}

/// Instantiates a roster entry with random initial angles.
pub fn build_member(entry: &RosterEntry, n_in: usize, seed: u64) -> Result<ClassifierModel> {
    let spec = match entry.architecture {
        Architecture::Variational { depth } => CircuitSpec::variational(n_in, depth)?,
        Architecture::Qcnn { size } => CircuitSpec::qcnn(n_in, size)?,
    };
    Ok(ClassifierModel::random(
        spec,
        format!("classifier-{}", entry.id),
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{apply_gate, haar_random_state, measure_probabilities, GateOp};

    #[test]
    fn variational_param_counts() {
        assert_eq!(CircuitSpec::variational(8, 5).unwrap().param_count, 180);
        let counts: Vec<usize> = (5..=10)
            .map(|d| build_variational_classifier(8, d, 0).unwrap().param_count())
            .collect();
        assert_eq!(counts, vec![180, 216, 252, 288, 324, 360]);
    }

    #[test]
    fn qcnn_layout_and_counts() {
        let small = CircuitSpec::qcnn(8, QcnnSize::Small).unwrap();
        let large = CircuitSpec::qcnn(8, QcnnSize::Large).unwrap();
        let labels: Vec<&str> = small.layers.iter().map(LayerSpec::label).collect();
        assert_eq!(
            labels,
            vec!["C1", "C2", "P1", "C3", "C4", "P2", "C5", "C6", "FC"]
        );
        assert_eq!(small.param_count, 62);
        assert_eq!(large.param_count, 88);
        match small.layers.last().unwrap() {
            LayerSpec::FullyConnected { qubits, .. } => assert_eq!(qubits, &vec![3, 7, 8]),
            _ => unreachable!(),
        }
        assert!(CircuitSpec::qcnn(2, QcnnSize::Small).is_err());
        assert!(CircuitSpec::qcnn(3, QcnnSize::Small).is_ok());
    }

    #[test]
    fn zero_angle_variational_reads_one_on_zero_input() {
        let spec = CircuitSpec::variational(3, 2).unwrap();
        let m = ClassifierModel::with_params(spec, vec![0.0; 32], ModelMeta::default()).unwrap();
        let p = m.forward(&StateVector::zero(3).unwrap()).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-12);
        assert_eq!(m.predict(&StateVector::zero(3).unwrap()).unwrap(), 1);
    }

    #[test]
    fn zero_angle_variational_equals_entangler_skeleton() {
        let spec = CircuitSpec::variational(3, 2).unwrap();
        let m = ClassifierModel::with_params(spec, vec![0.0; 32], ModelMeta::default()).unwrap();
        let psi = haar_random_state(3, 4).unwrap();
        let mut s = psi.tensor(&StateVector::basis(1, 1).unwrap());
        for _ in 0..2 {
            for k in 0..3 {
                s = apply_gate(&s, &GateOp::cnot(k, k + 1)).unwrap();
            }
        }
        let expect = measure_probabilities(&s, &[3]).unwrap();
        let got = m.forward(&psi).unwrap();
        assert!((expect[0] - got[0]).abs() < 1e-12 && (expect[1] - got[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_angle_qcnn_equals_cnot_skeleton() {
        for size in [QcnnSize::Small, QcnnSize::Large] {
            let spec = CircuitSpec::qcnn(8, size).unwrap();
            let n = spec.param_count;
            let m = ClassifierModel::with_params(spec.clone(), vec![0.0; n], ModelMeta::default())
                .unwrap();
            let psi = haar_random_state(8, 9).unwrap();
            let mut s = psi.tensor(&StateVector::basis(1, 1).unwrap());
            // With all angles zero the pooling units reduce to H H = I and only
            // the conv/FC CNOTs remain.
            for layer in &spec.layers {
                match layer {
                    LayerSpec::Conv { pairs, .. } => {
                        for &(a, b) in pairs {
                            s = apply_gate(&s, &GateOp::cnot(a, b)).unwrap();
                            if size == QcnnSize::Large {
                                s = apply_gate(&s, &GateOp::cnot(b, a)).unwrap();
                            }
                        }
                    }
                    LayerSpec::FullyConnected { qubits, .. } => {
                        for w in qubits.windows(2) {
                            s = apply_gate(&s, &GateOp::cnot(w[0], w[1])).unwrap();
                        }
                    }
                    _ => {}
                }
            }
            let expect = measure_probabilities(&s, &[8]).unwrap();
            let got = m.forward(&psi).unwrap();
            assert!((expect[1] - got[1]).abs() < 1e-12, "{size:?}");
        }
    }

    #[test]
    fn conv_weight_sharing_acts_identically_on_every_pair() {
        let spec = CircuitSpec::qcnn(7, QcnnSize::Small).unwrap();
        let circuit = spec.compile();
        let LayerSpec::Conv {
            pairs, first_param, ..
        } = &spec.layers[0]
        else {
            unreachable!()
        };
        // Every pair in C1 references the same 8 angles, once per pair.
        for k in 0..8 {
            let uses: Vec<usize> = circuit
                .gates()
                .iter()
                .filter_map(|g| match g.angle {
                    Angle::Param { index, .. } if index == first_param + k => Some(g.target),
                    _ => None,
                })
                .collect();
            assert_eq!(uses.len(), pairs.len());
        }
    }

    #[test]
    fn tie_rule_and_argmax() {
        assert_eq!(predict_from_probs(&[0.5, 0.5]), 1);
        assert_eq!(predict_from_probs(&[0.9, 0.1]), 0);
        assert_eq!(predict_from_probs(&[0.1, 0.9]), 1);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = build_variational_classifier(3, 1, 0).unwrap();
        assert!(matches!(
            m.forward(&StateVector::zero(2).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut m = build_qcnn(5, QcnnSize::Large, 17).unwrap();
        m.meta.extra.insert("train_accuracy".into(), "0.93".into());
        let text = m.to_text();
        let back = ClassifierModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        let psi = haar_random_state(5, 1).unwrap();
        let a = m.forward(&psi).unwrap();
        let b = back.forward(&psi).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn malformed_checkpoints_name_the_field() {
        let m = build_variational_classifier(2, 1, 3).unwrap();
        let text = m.to_text();
        let bad = text.replace("param_count = 12", "param_count = 13");
        assert!(matches!(
            ClassifierModel::from_text(&bad),
            Err(Error::Parse { ref field, .. }) if field == "param_count"
        ));
        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            ClassifierModel::from_text(truncated),
            Err(Error::Parse { .. })
        ));
        let bad_float = text.replacen("e0\n", "x0\n", 1);
        assert!(matches!(
            ClassifierModel::from_text(&bad_float),
            Err(Error::Parse { ref field, .. }) if field == "params"
        ));
    }

    #[test]
    fn roster_has_eight_distinct_members() {
        let roster = default_roster();
        assert_eq!(roster.len(), 8);
        let depths: Vec<usize> = roster
            .iter()
            .filter_map(|e| match e.architecture {
                Architecture::Variational { depth } => Some(depth),
                _ => None,
            })
            .collect();
        assert_eq!(depths, vec![5, 6, 7, 8, 9, 10]);
    }
}
