//! Adversarial attacks on classifier ensembles.
//!
//! Perturbation strength is the pure-state trace distance
//! `sqrt(1 - |<clean|adv>|^2)` between the clean and perturbed input.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::circuit::{project, Angle, Circuit};
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::models::{predict_from_probs, ClassifierModel};
use crate::simulator::{inner, norm_of, pure_infidelity, StateVector, C64};
use crate::textfmt::{fmt_f64, Document};
use crate::training::DEFAULT_PROB_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    WhiteBox,
    Transfer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub step_alpha: f64,
    /// Trace-distance radius of the allowed perturbation.
    pub epsilon_budget: f64,
    pub max_iters: usize,
    pub mode: AttackMode,
    pub seed: u64,
    /// Stop a sample's iteration as soon as every attacked model errs.
    pub stop_on_fool: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            step_alpha: 0.02,
            epsilon_budget: 0.1,
            max_iters: 100,
            mode: AttackMode::WhiteBox,
            seed: 0,
            stop_on_fool: true,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_alpha > 0.0 && self.step_alpha.is_finite()) {
            return Err(Error::Domain("step_alpha must be > 0".into()));
        }
        if !(self.epsilon_budget >= 0.0 && self.epsilon_budget.is_finite()) {
            return Err(Error::Domain("epsilon_budget must be >= 0".into()));
        }
        Ok(())
    }

    fn with_budget(&self, epsilon: f64) -> Self {
        Self {
            epsilon_budget: epsilon,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub index: usize,
    pub label: u8,
    pub initial_loss: Vec<f64>,
    pub final_loss: Vec<f64>,
    /// One entry per evaluated model.
    pub fooled: Vec<bool>,
    /// Squared overlap `|<clean|adv>|^2`.
    pub fidelity: f64,
    pub trace_distance: f64,
    pub iterations: usize,
}

impl SampleRecord {
    pub fn fooled_all(&self) -> bool {
        !self.fooled.is_empty() && self.fooled.iter().all(|&f| f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub epsilon_proxy: f64,
    pub loss: f64,
    pub accuracy: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub epsilon: f64,
    pub seed: u64,
    pub model_names: Vec<String>,
    pub records: Vec<SampleRecord>,
    /// Fraction of samples misclassified by every evaluated model.
    pub risk: f64,
    pub mean_fidelity: f64,
    /// Mean fidelity over the samples that fool every model (`NaN` if none).
    pub mean_fidelity_fooled: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl AttackReport {
    fn from_records(
        epsilon: f64,
        seed: u64,
        models: &[&ClassifierModel],
        records: Vec<SampleRecord>,
    ) -> Self {
        let n = records.len().max(1) as f64;
        let fooled: Vec<&SampleRecord> = records.iter().filter(|r| r.fooled_all()).collect();
        let mean_fidelity_fooled = if fooled.is_empty() {
            f64::NAN
        } else {
            fooled.iter().map(|r| r.fidelity).sum::<f64>() / fooled.len() as f64
        };
        Self {
            epsilon,
            seed,
            model_names: models.iter().map(|m| m.name().to_string()).collect(),
            risk: fooled.len() as f64 / n,
            mean_fidelity: records.iter().map(|r| r.fidelity).sum::<f64>() / n,
            mean_fidelity_fooled,
            records,
            trajectory: Vec::new(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.records.len()
    }

    pub fn to_text(&self) -> String {
        let mut d = Document::new(REPORT_MAGIC);
        d.set("epsilon", fmt_f64(self.epsilon));
        d.set("seed", self.seed);
        d.set("models", self.model_names.join(","));
        d.set("n_samples", self.records.len());
        d.set("risk", fmt_f64(self.risk));
        d.set("mean_fidelity", fmt_f64(self.mean_fidelity));
        d.set("mean_fidelity_fooled", fmt_f64(self.mean_fidelity_fooled));
        let join = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";");
        d.section(
            "samples",
            self.records
                .iter()
                .map(|r| {
                    let fooled: String = r
                        .fooled
                        .iter()
                        .map(|&f| if f { '1' } else { '0' })
                        .collect();
                    format!(
                        "{} {} {} {} {} {} {} {}",
                        r.index,
                        r.label,
                        r.iterations,
                        fmt_f64(r.fidelity),
                        fmt_f64(r.trace_distance),
                        fooled,
                        join(&r.initial_loss),
                        join(&r.final_loss)
                    )
                })
                .collect(),
        );
        if !self.trajectory.is_empty() {
            d.section(
                "trajectory",
                self.trajectory
                    .iter()
                    .map(|p| {
                        format!(
                            "{} {} {} {} {}",
                            p.iteration,
                            fmt_f64(p.epsilon_proxy),
                            fmt_f64(p.loss),
                            fmt_f64(p.accuracy),
                            fmt_f64(p.step)
                        )
                    })
                    .collect(),
            );
        }
        d.render()
    }
}

pub const REPORT_MAGIC: &str = "qadv-attack-report v1";

fn check_models(models: &[&ClassifierModel], n_in: usize) -> Result<()> {
    if models.is_empty() {
        return Err(Error::InsufficientData("empty model list".into()));
    }
    for m in models {
        if m.n_in() != n_in {
            return Err(Error::DimensionMismatch {
                left: m.n_in(),
                right: n_in,
            });
        }
    }
    Ok(())
}

fn sample_loss(model: &ClassifierModel, amps: &[C64], label: u8) -> (f64, bool) {
    let p = model.forward_with(model.params(), amps);
    (
        -p[label as usize].max(DEFAULT_PROB_FLOOR).ln(),
        predict_from_probs(&p) != label,
    )
}

/// Gradient of the summed cross-entropy with respect to the conjugate input
/// amplitudes.
///
/// For `q = <psi,1| U^dag P U |psi,1>` the derivative is
/// `(I (x) <1|) U^dag P U (|psi> (x) |1>)`, chained through `dL/dq = -1/q`.
fn amplitude_gradient(models: &[&ClassifierModel], amps: &[C64], label: u8) -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0); amps.len()];
    for m in models {
        let n = m.spec().n_qubits();
        let r = m.spec().readout_qubit();
        let mut full = m.prepare(amps);
        m.circuit().run_in_place(m.params(), &mut full);
        let mut lam = project(&full, n, r, label);
        let q: f64 = lam.iter().map(|a| a.norm_sqr()).sum();
        m.circuit().run_inverse_in_place(m.params(), &mut lam);
        let w = -1.0 / q.max(DEFAULT_PROB_FLOOR);
        for (gi, pair) in g.iter_mut().zip(lam.chunks_exact(2)) {
            *gi += pair[1] * w;
        }
    }
    g
}

/// Pulls `psi` back along the geodesic toward `clean` until its trace
/// distance equals `epsilon` (no-op if already inside the ball).
fn project_to_ball(clean: &[C64], psi: &mut [C64], epsilon: f64) {
    let ov = inner(clean, psi);
    if pure_infidelity(clean, psi).sqrt() <= epsilon {
        return;
    }
    let phase = if ov.norm() > 0.0 {
        ov.conj() / ov.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let cos = ov.norm();
    let mut chi: Vec<C64> = psi
        .iter()
        .zip(clean)
        .map(|(p, c)| p * phase - c * cos)
        .collect();
    let chi_norm = norm_of(&chi);
    chi.iter_mut().for_each(|x| *x /= chi_norm);
    let sin_t = epsilon.min(1.0);
    let cos_t = (1.0 - sin_t * sin_t).sqrt();
    for ((p, c), x) in psi.iter_mut().zip(clean).zip(&chi) {
        *p = c * cos_t + x * sin_t;
    }
}

fn finish_record(
    models: &[&ClassifierModel],
    index: usize,
    clean: &StateVector,
    adv: &[C64],
    label: u8,
    iterations: usize,
) -> SampleRecord {
    let initial: Vec<(f64, bool)> = models
        .iter()
        .map(|m| sample_loss(m, clean.amplitudes(), label))
        .collect();
    let last: Vec<(f64, bool)> = models.iter().map(|m| sample_loss(m, adv, label)).collect();
    let fidelity = inner(clean.amplitudes(), adv).norm_sqr().min(1.0);
    SampleRecord {
        index,
        label,
        initial_loss: initial.iter().map(|x| x.0).collect(),
        final_loss: last.iter().map(|x| x.0).collect(),
        fooled: last.iter().map(|x| x.1).collect(),
        fidelity,
        trace_distance: pure_infidelity(clean.amplitudes(), adv).sqrt(),
        iterations,
    }
}

/// qBIM from an explicit starting state inside the budget ball around `clean`.
fn qbim_from(
    models: &[&ClassifierModel],
    clean: &StateVector,
    start: &[C64],
    label: u8,
    config: &AttackConfig,
) -> Result<(Vec<C64>, usize)> {
    let mut psi = start.to_vec();
    if config.epsilon_budget == 0.0 {
        return Ok((clean.amplitudes().to_vec(), 0));
    }
    let mut iters = 0;
    while iters < config.max_iters {
        if config.stop_on_fool && models.iter().all(|m| sample_loss(m, &psi, label).1) {
            break;
        }
        let g = amplitude_gradient(models, &psi, label);
        let gn = norm_of(&g);
        if !gn.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite amplitude gradient at iteration {iters}"
            )));
        }
        if gn == 0.0 {
            break;
        }
        for (p, gi) in psi.iter_mut().zip(&g) {
            *p += gi * (config.step_alpha / gn);
        }
        let n = norm_of(&psi);
        psi.iter_mut().for_each(|p| *p /= n);
        project_to_ball(clean.amplitudes(), &mut psi, config.epsilon_budget);
        iters += 1;
    }
    Ok((psi, iters))
}

/// Iterative ascent on the summed loss of `models` within the trace-distance
/// ball of radius `epsilon_budget` around the sample.
pub fn qbim_state_attack(
    models: &[&ClassifierModel],
    sample: &LabeledSample,
    config: &AttackConfig,
) -> Result<(StateVector, SampleRecord)> {
    config.validate()?;
    check_models(models, sample.state.n_qubits())?;
    let (adv, iters) = qbim_from(
        models,
        &sample.state,
        sample.state.amplitudes(),
        sample.label,
        config,
    )?;
    let record = finish_record(models, 0, &sample.state, &adv, sample.label, iters);
    Ok((StateVector::from_raw(sample.state.n_qubits(), adv), record))
}

fn attack_all(
    crafted_on: &[&ClassifierModel],
    evaluated_on: &[&ClassifierModel],
    samples: &[LabeledSample],
    starts: Option<&[Vec<C64>]>,
    config: &AttackConfig,
) -> Result<(Vec<Vec<C64>>, Vec<SampleRecord>)> {
    config.validate()?;
    let n_in = samples
        .first()
        .ok_or_else(|| Error::InsufficientData("empty test set".into()))?
        .state
        .n_qubits();
    check_models(crafted_on, n_in)?;
    check_models(evaluated_on, n_in)?;
    let out: Vec<(Vec<C64>, SampleRecord)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let start = starts.map_or(s.state.amplitudes(), |st| st[i].as_slice());
            let (adv, iters) = qbim_from(crafted_on, &s.state, start, s.label, config)?;
            let rec = finish_record(evaluated_on, i, &s.state, &adv, s.label, iters);
            Ok((adv, rec))
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().unzip())
}

/// Universal adversarial examples against a whole ensemble; the risk is the
/// fraction of samples every model misclassifies after the attack.
pub fn universal_example_search(
    models: &[&ClassifierModel],
    test_set: &[LabeledSample],
    config: &AttackConfig,
) -> Result<AttackReport> {
    let (_, records) = attack_all(models, models, test_set, None, config)?;
    Ok(AttackReport::from_records(
        config.epsilon_budget,
        config.seed,
        models,
        records,
    ))
}

/// Adversarial states and reports for an ascending grid of budgets.
///
/// Each budget starts from the previous budget's states, and a sample that
/// already fools every model keeps its state, so risk is non-decreasing.
pub fn risk_curve(
    models: &[&ClassifierModel],
    test_set: &[LabeledSample],
    epsilon_grid: &[f64],
    config: &AttackConfig,
) -> Result<Vec<AttackReport>> {
    if epsilon_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("epsilon grid must be ascending".into()));
    }
    let mut states: Vec<Vec<C64>> = test_set
        .iter()
        .map(|s| s.state.amplitudes().to_vec())
        .collect();
    let mut fooled = vec![false; test_set.len()];
    let mut reports = Vec::with_capacity(epsilon_grid.len());
    for &eps in epsilon_grid {
        let cfg = config.with_budget(eps);
        let (adv, mut records) = attack_all(models, models, test_set, Some(&states), &cfg)?;
        for (i, (new_state, rec)) in adv.into_iter().zip(records.iter_mut()).enumerate() {
            if fooled[i] {
                *rec = finish_record(
                    models,
                    i,
                    &test_set[i].state,
                    &states[i],
                    test_set[i].label,
                    0,
                );
            } else {
                states[i] = new_state;
                fooled[i] = rec.fooled_all();
            }
        }
        reports.push(AttackReport::from_records(
            eps,
            config.seed,
            models,
            records,
        ));
    }
    Ok(reports)
}

/// `epsilon,risk,mean_fidelity,n_samples,seed` rows for a risk curve.
pub fn risk_curve_csv(reports: &[AttackReport]) -> String {
    let mut out = String::from("epsilon,risk,mean_fidelity,n_samples,seed\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epsilon,
            r.risk,
            r.mean_fidelity,
            r.n_samples(),
            r.seed
        );
    }
    out
}

/// Non-adaptive black-box attack: states are crafted with white-box qBIM
/// against `surrogate` alone (using the full iteration budget, since the
/// targets cannot be queried), then scored on every target.
pub fn transfer_attack_eval(
    surrogate: &ClassifierModel,
    targets: &[&ClassifierModel],
    test_set: &[LabeledSample],
    config: &AttackConfig,
) -> Result<AttackReport> {
    let cfg = AttackConfig {
        mode: AttackMode::Transfer,
        stop_on_fool: false,
        ..config.clone()
    };
    let (_, records) = attack_all(&[surrogate], targets, test_set, None, &cfg)?;
    Ok(AttackReport::from_records(
        config.epsilon_budget,
        config.seed,
        targets,
        records,
    ))
}

/// Product of single-qubit rotations `RZ(gamma) RX(beta) RZ(alpha)` on every
/// input qubit; angles are stored as `[alpha, beta, gamma]` per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationLayer {
    n_qubits: usize,
    angles: Vec<f64>,
}

impl PerturbationLayer {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            angles: vec![0.0; 3 * n_qubits],
        }
    }

    pub fn new(n_qubits: usize, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != 3 * n_qubits {
            return Err(Error::LengthMismatch {
                expected: 3 * n_qubits,
                found: angles.len(),
            });
        }
        Ok(Self { n_qubits, angles })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn is_identity(&self) -> bool {
        self.angles.iter().all(|&a| a == 0.0)
    }

    fn circuit(&self) -> Circuit {
        let mut c = Circuit::new(self.n_qubits, 3 * self.n_qubits);
        let p = |index| Angle::Param { index, scale: 1.0 };
        for q in 0..self.n_qubits {
            c.rz(q, p(3 * q));
            c.rx(q, p(3 * q + 1));
            c.rz(q, p(3 * q + 2));
        }
        c
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.circuit().run(&self.angles, state)
    }

    /// `L^dagger`: applies each qubit's triple reversed and negated.
    pub fn apply_inverse(&self, state: &StateVector) -> Result<StateVector> {
        let c = self.circuit();
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: state.n_qubits(),
            });
        }
        let mut amps = state.amplitudes().to_vec();
        c.run_inverse_in_place(&self.angles, &mut amps);
        Ok(StateVector::from_raw(self.n_qubits, amps))
    }

    fn apply_raw(
        &self,
        c: &Circuit,
        angles: &[f64],
        amps: &[C64],
        shift: Option<(usize, f64)>,
    ) -> Vec<C64> {
        let mut out = amps.to_vec();
        match shift {
            Some((occ, s)) => c.run_shifted(angles, &mut out, occ, s),
            None => c.run_in_place(angles, &mut out),
        }
        out
    }
}

/// Fraction of samples misclassified after applying `layer`.
pub fn empirical_error_rate(
    model: &ClassifierModel,
    layer: &PerturbationLayer,
    samples: &[LabeledSample],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("empty sample list".into()));
    }
    let errors: Vec<bool> = samples
        .par_iter()
        .map(|s| {
            let pert = layer.apply(&s.state)?;
            Ok(model.predict(&pert)? != s.label)
        })
        .collect::<Result<_>>()?;
    Ok(errors.iter().filter(|&&e| e).count() as f64 / samples.len() as f64)
}

struct LayerEval {
    loss: f64,
    accuracy: f64,
    epsilon_proxy: f64,
}

fn evaluate_layer(
    model: &ClassifierModel,
    c: &Circuit,
    layer: &PerturbationLayer,
    angles: &[f64],
    samples: &[LabeledSample],
) -> LayerEval {
    let rows: Vec<(f64, bool, f64)> = samples
        .par_iter()
        .map(|s| {
            let pert = layer.apply_raw(c, angles, s.state.amplitudes(), None);
            let (loss, wrong) = sample_loss(model, &pert, s.label);
            (
                loss,
                !wrong,
                pure_infidelity(s.state.amplitudes(), &pert).sqrt(),
            )
        })
        .collect();
    let n = rows.len() as f64;
    LayerEval {
        loss: rows.iter().map(|r| r.0).sum::<f64>() / n,
        accuracy: rows.iter().filter(|r| r.1).count() as f64 / n,
        epsilon_proxy: rows.iter().map(|r| r.2).sum::<f64>() / n,
    }
}

/// Parameter-shift gradient of the mean loss with respect to layer angles:
/// the shift rule gives `dq/dangle` for the label probability `q`, chained
/// through `dL/dq = -1/q`.
fn layer_gradient(
    model: &ClassifierModel,
    c: &Circuit,
    layer: &PerturbationLayer,
    angles: &[f64],
    samples: &[LabeledSample],
) -> Vec<f64> {
    let occurrences: Vec<(usize, usize, f64)> = c.parameter_occurrences().collect();
    let h = std::f64::consts::FRAC_PI_2;
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| {
            let q_at = |shift: Option<(usize, f64)>| {
                let pert = layer.apply_raw(c, angles, s.state.amplitudes(), shift);
                model.forward_with(model.params(), &pert)[s.label as usize]
            };
            let q = q_at(None);
            let slope = if q > DEFAULT_PROB_FLOOR {
                -1.0 / q
            } else {
                0.0
            };
            let mut g = vec![0.0; angles.len()];
            for &(occ, index, scale) in &occurrences {
                let dq = (q_at(Some((occ, h))) - q_at(Some((occ, -h)))) / 2.0;
                g[index] += slope * scale * dq;
            }
            g
        })
        .collect();
    let mut acc = vec![0.0; angles.len()];
    for row in &rows {
        for (a, r) in acc.iter_mut().zip(row) {
            *a += r;
        }
    }
    acc.iter_mut().for_each(|a| *a /= rows.len() as f64);
    acc
}

/// Maximum number of consecutive step halvings before the search stops.
const MAX_HALVINGS: usize = 12;

/// One perturbation layer shared by every test sample, grown by sign-gradient
/// ascent on the mean loss of a frozen classifier.
///
/// A candidate step that lowers the loss is rejected and retried at half
/// size. The search stops at `max_iters` accepted steps, when the mean trace
/// distance between clean and perturbed samples would exceed
/// `epsilon_budget`, or when halving no longer finds an ascent step.
pub fn universal_perturbation_search(
    model: &ClassifierModel,
    test_set: &[LabeledSample],
    config: &AttackConfig,
) -> Result<(PerturbationLayer, AttackReport)> {
    config.validate()?;
    let n_in = test_set
        .first()
        .ok_or_else(|| Error::InsufficientData("empty test set".into()))?
        .state
        .n_qubits();
    check_models(&[model], n_in)?;
    let mut layer = PerturbationLayer::identity(n_in);
    let c = layer.circuit();
    let mut eval = evaluate_layer(model, &c, &layer, layer.angles(), test_set);
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        epsilon_proxy: eval.epsilon_proxy,
        loss: eval.loss,
        accuracy: eval.accuracy,
        step: 0.0,
    }];
    let mut accepted = 0;
    'outer: while accepted < config.max_iters {
        let grad = layer_gradient(model, &c, &layer, layer.angles(), test_set);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite layer gradient at step {accepted}"
            )));
        }
        let mut step = config.step_alpha;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = layer
                .angles
                .iter()
                .zip(&grad)
                .map(|(a, &g)| if g == 0.0 { *a } else { a + step * g.signum() })
                .collect();
            let e = evaluate_layer(model, &c, &layer, &cand, test_set);
            if e.epsilon_proxy > config.epsilon_budget {
                break 'outer;
            }
            if e.loss >= eval.loss {
                layer.angles = cand;
                eval = e;
                accepted += 1;
                trajectory.push(TrajectoryPoint {
                    iteration: accepted,
                    epsilon_proxy: eval.epsilon_proxy,
                    loss: eval.loss,
                    accuracy: eval.accuracy,
                    step,
                });
                continue 'outer;
            }
            step /= 2.0;
        }
        break;
    }
    let records = test_set
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let pert = layer.apply_raw(&c, layer.angles(), s.state.amplitudes(), None);
            finish_record(&[model], i, &s.state, &pert, s.label, accepted)
        })
        .collect();
    let mut report = AttackReport::from_records(eval.epsilon_proxy, config.seed, &[model], records);
    report.trajectory = trajectory;
    Ok((layer, report))
}

/// `iteration,epsilon_proxy,loss,accuracy,step` rows.
pub fn trajectory_csv(points: &[TrajectoryPoint]) -> String {
    let mut out = String::from("iteration,epsilon_proxy,loss,accuracy,step\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.iteration, p.epsilon_proxy, p.loss, p.accuracy, p.step
        );
    }
    out
}
