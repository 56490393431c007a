//! Cross-entropy training with Adam, gradient routines and evaluation.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{LabeledDataset, LabeledSample};
use crate::error::{Error, Result};
use crate::models::{predict_from_probs, ClassifierModel};

pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub prob_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 10,
            epochs: 20,
            seed: 0,
            prob_floor: DEFAULT_PROB_FLOOR,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain("learning_rate must be > 0".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch_size must be >= 1".into()));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 1.0) {
            return Err(Error::Domain("prob_floor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (0 if none ran).
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            );
        }
        out
    }
}

/// `-ln(max(probs[label], floor))`.
pub fn cross_entropy(probs: &[f64], label: u8, floor: f64) -> Result<f64> {
    let sum: f64 = probs.iter().sum();
    if probs.len() != 2
        || probs.iter().any(|p| !(0.0..=1.0 + 1e-8).contains(p))
        || (sum - 1.0).abs() > 1e-8
    {
        return Err(Error::Domain(format!(
            "malformed probability vector {probs:?}"
        )));
    }
    if label > 1 {
        return Err(Error::Domain(format!("label {label} outside {{0,1}}")));
    }
    Ok(-probs[label as usize].max(floor).ln())
}

fn check_batch(model: &ClassifierModel, batch: &[LabeledSample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    for s in batch {
        model.check_input(&s.state)?;
    }
    Ok(())
}

/// `dL/dq` for `L = -ln(max(q, floor))`.
fn loss_slope(q: f64, floor: f64) -> f64 {
    if q > floor {
        -1.0 / q
    } else {
        0.0
    }
}

/// Per-sample gradients reduced in index order, so the result does not
/// depend on thread scheduling.
fn mean_of(rows: Vec<Vec<f64>>, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    let count = rows.len() as f64;
    for row in rows {
        for (a, r) in acc.iter_mut().zip(row) {
            *a += r;
        }
    }
    acc.iter_mut().for_each(|a| *a /= count);
    acc
}

/// Batch-mean loss gradient from the parameter-shift rule.
///
/// Each gate that references a parameter is shifted by `+-pi/2` on its own
/// angle; shared parameters accumulate `scale * [q(+) - q(-)] / 2` over every
/// occurrence.
pub fn gradient_parameter_shift(
    model: &ClassifierModel,
    batch: &[LabeledSample],
) -> Result<Vec<f64>> {
    check_batch(model, batch)?;
    let circuit = model.circuit();
    let params = model.params();
    let readout = model.spec().readout_qubit();
    let n = model.spec().n_qubits();
    let occurrences: Vec<(usize, usize, f64)> = circuit.parameter_occurrences().collect();
    let rows = batch
        .par_iter()
        .map(|s| {
            let full = model.prepare(s.state.amplitudes());
            let q_at = |occ: usize, shift: f64| {
                let mut amps = full.clone();
                circuit.run_shifted(params, &mut amps, occ, shift);
                crate::simulator::qubit_probability(&amps, n, readout, s.label)
            };
            let q = model.forward_with(params, s.state.amplitudes())[s.label as usize];
            let slope = loss_slope(q, DEFAULT_PROB_FLOOR);
            let mut g = vec![0.0; model.param_count()];
            for &(occ, index, scale) in &occurrences {
                let plus = q_at(occ, std::f64::consts::FRAC_PI_2);
                let minus = q_at(occ, -std::f64::consts::FRAC_PI_2);
                g[index] += slope * scale * (plus - minus) / 2.0;
            }
            g
        })
        .collect();
    Ok(mean_of(rows, model.param_count()))
}

/// Mean loss over a batch at explicit parameters.
fn batch_loss(model: &ClassifierModel, params: &[f64], batch: &[LabeledSample], floor: f64) -> f64 {
    let losses: Vec<f64> = batch
        .par_iter()
        .map(|s| {
            let q = model.forward_with(params, s.state.amplitudes())[s.label as usize];
            -q.max(floor).ln()
        })
        .collect();
    losses.iter().sum::<f64>() / losses.len() as f64
}

/// Central differences of the batch-mean loss, `[L(t+h) - L(t-h)] / 2h`.
pub fn gradient_finite_difference(
    model: &ClassifierModel,
    batch: &[LabeledSample],
    h: f64,
) -> Result<Vec<f64>> {
    check_batch(model, batch)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain("finite-difference step must be > 0".into()));
    }
    let base = model.params().to_vec();
    Ok((0..base.len())
        .map(|k| {
            let mut up = base.clone();
            let mut dn = base.clone();
            up[k] += h;
            dn[k] -= h;
            let lu = batch_loss(model, &up, batch, DEFAULT_PROB_FLOOR);
            let ld = batch_loss(model, &dn, batch, DEFAULT_PROB_FLOOR);
            (lu - ld) / (2.0 * h)
        })
        .collect())
}

/// Batch-mean loss and its gradient by reverse-mode differentiation of the
/// simulated circuit. Equal to the parameter-shift result up to rounding and
/// used by [`train`] because it costs a constant number of circuit passes.
pub fn loss_and_gradient(
    model: &ClassifierModel,
    params: &[f64],
    batch: &[LabeledSample],
    floor: f64,
) -> Result<(f64, Vec<f64>)> {
    check_batch(model, batch)?;
    if params.len() != model.param_count() {
        return Err(Error::LengthMismatch {
            expected: model.param_count(),
            found: params.len(),
        });
    }
    let readout = model.spec().readout_qubit();
    let rows: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|s| {
            let full = model.prepare(s.state.amplitudes());
            let (q, mut g) = model
                .circuit()
                .outcome_probability_gradient(params, &full, readout, s.label);
            let slope = loss_slope(q, floor);
            g.iter_mut().for_each(|x| *x *= slope);
            (-q.max(floor).ln(), g)
        })
        .collect();
    let loss = rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64;
    let grad = mean_of(rows.into_iter().map(|r| r.1).collect(), params.len());
    Ok((loss, grad))
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &[f64],
    grads: &[f64],
    state: &AdamState,
    config: &TrainConfig,
) -> Result<(Vec<f64>, AdamState)> {
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != params.len() {
            return Err(Error::LengthMismatch {
                expected: params.len(),
                found: len,
            });
        }
    }
    let t = state.t + 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let mut next = AdamState {
        m: Vec::with_capacity(params.len()),
        v: Vec::with_capacity(params.len()),
        t,
    };
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let m = b1 * state.m[i] + (1.0 - b1) * grads[i];
        let v = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        let step = config.learning_rate * (m / c1) / ((v / c2).sqrt() + config.adam_epsilon);
        out.push(params[i] - step);
        next.m.push(m);
        next.v.push(v);
    }
    Ok((out, next))
}

/// Accuracy and mean cross-entropy over a dataset.
pub fn evaluate(model: &ClassifierModel, dataset: &LabeledDataset) -> Result<(f64, f64)> {
    evaluate_with_floor(model, dataset, DEFAULT_PROB_FLOOR)
}

fn evaluate_with_floor(
    model: &ClassifierModel,
    dataset: &LabeledDataset,
    floor: f64,
) -> Result<(f64, f64)> {
    check_batch(model, dataset.samples())?;
    let rows: Vec<(bool, f64)> = dataset
        .samples()
        .par_iter()
        .map(|s| {
            let p = model.forward_with(model.params(), s.state.amplitudes());
            (
                predict_from_probs(&p) == s.label,
                -p[s.label as usize].max(floor).ln(),
            )
        })
        .collect();
    let n = rows.len() as f64;
    let correct = rows.iter().filter(|r| r.0).count() as f64;
    let loss = rows.iter().map(|r| r.1).sum::<f64>() / n;
    Ok((correct / n, loss))
}

/// Mini-batch Adam training; returns the parameters of the epoch with the
/// highest validation accuracy (earliest on ties).
pub fn train(
    model: &ClassifierModel,
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(ClassifierModel, TrainHistory)> {
    config.validate()?;
    check_batch(model, train_set.samples())?;
    check_batch(model, val_set.samples())?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((model.clone(), history));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = model.clone();
    let mut params = model.params().to_vec();
    let mut adam = AdamState::new(params.len());
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let samples = train_set.samples();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<LabeledSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (loss, grad) = loss_and_gradient(&current, &params, &batch, config.prob_floor)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence(format!(
                    "non-finite loss {loss} at epoch {epoch} (step {})",
                    adam.t + 1
                )));
            }
            let (next, state) = adam_step(&params, &grad, &adam, config)?;
            params = next;
            adam = state;
        }
        current.set_params(params.clone())?;
        let (train_acc, train_loss) = evaluate_with_floor(&current, train_set, config.prob_floor)?;
        let (val_acc, val_loss) = evaluate_with_floor(&current, val_set, config.prob_floor)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite evaluation loss at epoch {epoch}"
            )));
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
        if best.as_ref().is_none_or(|(acc, _)| val_acc > *acc) {
            best = Some((val_acc, params.clone()));
            history.best_epoch = epoch;
        }
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    current.set_params(best_params)?;
    Ok((current, history))
}

pub fn save_checkpoint(model: &ClassifierModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<ClassifierModel> {
    ClassifierModel::load(path)
}
