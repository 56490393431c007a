use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qadv::attacks::{
    risk_curve, transfer_attack_eval, universal_example_search, universal_perturbation_search,
    AttackConfig, AttackReport,
};
use qadv::bounds::{evaluate_named, theorem1_min_epsilon, BoundQuery};
use qadv::data::{
    build_mnist_dataset, generate_ising_dataset, load_mnist_idx, synthetic_digit_images,
    LabeledDataset, RawImage, Split,
};
use qadv::models::build_member;
use qadv::textfmt::write_atomic;
use qadv::training::{evaluate, train};
use qadv::ClassifierModel;
use rayon::prelude::*;

use crate::config::{parse_epsilon_grid, ExperimentConfig, Task};
use crate::csv::Table;

pub const MNIST_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_LABELS: &str = "train-labels-idx1-ubyte";

/// A configured run rooted at an output directory.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub hash: String,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, out: PathBuf) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        Ok(Self { cfg, out, hash })
    }

    fn table(&self, extra: &[(&str, String)], header: &[&str]) -> Table {
        let mut meta = vec![
            ("seed", self.cfg.seed.to_string()),
            ("config_hash", self.hash.clone()),
        ];
        meta.extend(extra.iter().cloned());
        Table::new(&meta, header)
    }

    pub fn dataset_path(&self, split: &str) -> PathBuf {
        self.out.join("data").join(format!("{split}.txt"))
    }

    pub fn checkpoint_path(&self, id: usize) -> PathBuf {
        self.out
            .join("checkpoints")
            .join(format!("classifier-{id}.txt"))
    }

    fn history_path(&self, id: usize) -> PathBuf {
        self.out
            .join("history")
            .join(format!("classifier-{id}.csv"))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out.join("summary.csv")
    }

    pub fn attack_path(&self, name: &str) -> PathBuf {
        self.out.join("attacks").join(name)
    }

    fn write_manifest(&self) -> Result<()> {
        let text = format!(
            "seed = {}\nconfig_hash = \"{}\"\n\n{}",
            self.cfg.seed,
            self.hash,
            toml::to_string(&self.cfg)?
        );
        write_atomic(&self.out.join("run.toml"), &text)?;
        Ok(())
    }

    fn load_dataset(&self, split: &str) -> Result<LabeledDataset> {
        let path = self.dataset_path(split);
        if !path.exists() {
            bail!(
                "dataset cache {} is missing; run `qadv ingest` first",
                path.display()
            );
        }
        LabeledDataset::load(&path).with_context(|| format!("loading {}", path.display()))
    }

    fn load_member(&self, id: usize) -> Result<ClassifierModel> {
        let path = self.checkpoint_path(id);
        if !path.exists() {
            bail!(
                "checkpoint for classifier-{id} is missing at {}; run `qadv train` first",
                path.display()
            );
        }
        ClassifierModel::load(&path)
            .with_context(|| format!("loading classifier-{id} from {}", path.display()))
    }

    fn load_members(&self, ids: &[usize]) -> Result<Vec<ClassifierModel>> {
        ids.iter().map(|&id| self.load_member(id)).collect()
    }
}

fn digit_images(cfg: &ExperimentConfig) -> Result<Vec<RawImage>> {
    let digits = (cfg.data.digits[0], cfg.data.digits[1]);
    match cfg.task {
        Task::Synthetic => Ok(synthetic_digit_images(digits, cfg.data.per_class, cfg.seed)),
        Task::Mnist => {
            let images = cfg.data.mnist_dir.join(MNIST_IMAGES);
            let labels = cfg.data.mnist_dir.join(MNIST_LABELS);
            for p in [&images, &labels] {
                if !p.exists() {
                    bail!(
                        "MNIST file {} not found; expected {} and {} under data.mnist_dir",
                        p.display(),
                        MNIST_IMAGES,
                        MNIST_LABELS
                    );
                }
            }
            Ok(load_mnist_idx(&images, &labels)?)
        }
        Task::Ising => unreachable!("ising has no images"),
    }
}

/// Generates and caches the train, validation and test splits.
pub fn ingest(run: &Run) -> Result<Vec<PathBuf>> {
    let cfg = &run.cfg;
    let d = &cfg.data;
    let (train_set, val, test) = match cfg.task {
        Task::Ising => {
            let (train_set, test) =
                generate_ising_dataset(d.n_qubits, d.n_train, d.n_test, cfg.seed)?;
            let (val, _) =
                generate_ising_dataset(d.n_qubits, d.n_val, 1, cfg.seed.wrapping_add(1))?;
            (train_set, val, test)
        }
        Task::Mnist | Task::Synthetic => {
            if d.n_qubits != 8 {
                bail!("image tasks encode 16x16 pixels on 8 qubits; set data.n_qubits = 8");
            }
            let images = digit_images(cfg)?;
            let digits = (d.digits[0], d.digits[1]);
            let (pool, test) =
                build_mnist_dataset(&images, digits, d.n_train + d.n_val, d.n_test, cfg.seed)?;
            let (fit, held) = pool.samples().split_at(d.n_train);
            (
                LabeledDataset::new(fit.to_vec(), Split::Train, cfg.seed)?,
                LabeledDataset::new(held.to_vec(), Split::Train, cfg.seed)?,
                test,
            )
        }
    };
    run.write_manifest()?;
    let mut written = Vec::new();
    for (name, ds) in [("train", &train_set), ("val", &val), ("test", &test)] {
        let path = run.dataset_path(name);
        ds.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemberStatus {
    Trained { accuracy: f64 },
    Resumed { accuracy: f64 },
    Failed(String),
}

/// Trains every roster member, skipping members whose checkpoint exists.
pub fn train_roster(run: &Run) -> Result<Vec<(usize, MemberStatus)>> {
    let cfg = &run.cfg;
    let train_set = run.load_dataset("train")?;
    let val = run.load_dataset("val")?;
    let test = run.load_dataset("test")?;
    let n_in = test.n_qubits().context("empty test set")?;
    let roster = cfg.roster()?;
    let outcomes: Vec<(usize, MemberStatus, Option<ClassifierModel>)> = roster
        .par_iter()
        .map(|entry| {
            let path = run.checkpoint_path(entry.id);
            if path.exists() {
                let m = run.load_member(entry.id)?;
                let accuracy = evaluate(&m, &test)?.0;
                return Ok((entry.id, MemberStatus::Resumed { accuracy }, Some(m)));
            }
            let init = build_member(
                entry,
                n_in,
                cfg.seed.wrapping_mul(1000).wrapping_add(entry.id as u64),
            )?;
            match train(&init, &train_set, &val, &cfg.train_config(entry.id)) {
                Ok((mut model, history)) => {
                    let extra = &mut model.meta.extra;
                    extra.insert("master_seed".into(), cfg.seed.to_string());
                    extra.insert("config_hash".into(), run.hash.clone());
                    extra.insert("best_epoch".into(), history.best_epoch.to_string());
                    let mut t = run.table(
                        &[("model", model.name().to_string())],
                        &["epoch", "train_loss", "train_acc", "val_loss", "val_acc"],
                    );
                    for r in &history.epochs {
                        t.push(vec![
                            r.epoch.to_string(),
                            r.train_loss.to_string(),
                            r.train_acc.to_string(),
                            r.val_loss.to_string(),
                            r.val_acc.to_string(),
                        ]);
                    }
                    t.save(&run.history_path(entry.id))?;
                    model.save(&path)?;
                    let accuracy = evaluate(&model, &test)?.0;
                    Ok((entry.id, MemberStatus::Trained { accuracy }, Some(model)))
                }
                Err(e) => Ok((entry.id, MemberStatus::Failed(e.to_string()), None)),
            }
        })
        .collect::<Result<_>>()?;
    let mut summary = run.table(&[], &["classifier", "structure", "n_params", "accuracy"]);
    for (entry, (id, status, model)) in roster.iter().zip(&outcomes) {
        let n_params = model
            .as_ref()
            .map_or(String::from("-"), |m| m.param_count().to_string());
        let acc = match status {
            MemberStatus::Trained { accuracy } | MemberStatus::Resumed { accuracy } => {
                accuracy.to_string()
            }
            MemberStatus::Failed(_) => "failed".into(),
        };
        summary.push(vec![
            format!("classifier-{id}"),
            entry.architecture.to_string(),
            n_params,
            acc,
        ]);
    }
    summary.save(&run.summary_path())?;
    run.write_manifest()?;
    Ok(outcomes.into_iter().map(|(id, s, _)| (id, s)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    UniversalExample,
    UniversalPerturbation,
    Transfer,
}

pub struct AttackArgs {
    pub subset: Vec<usize>,
    pub grid: Vec<f64>,
}

impl AttackArgs {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            subset: cfg.attack.subset.clone(),
            grid: parse_epsilon_grid(&cfg.attack.epsilon_grid)?,
        })
    }
}

fn subset_label(ids: &[usize]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn curve_row(r: &AttackReport, seed: u64) -> Vec<String> {
    vec![
        r.epsilon.to_string(),
        r.risk.to_string(),
        r.mean_fidelity.to_string(),
        r.mean_fidelity_fooled.to_string(),
        r.n_samples().to_string(),
        seed.to_string(),
    ]
}

/// Runs one attack campaign and returns the CSV it wrote.
pub fn attack(run: &Run, kind: AttackKind, args: &AttackArgs) -> Result<PathBuf> {
    let test = run.load_dataset("test")?;
    let base = run.cfg.attack_config();
    let seed = run.cfg.seed;
    match kind {
        AttackKind::UniversalExample => {
            let models = run.load_members(&args.subset)?;
            let refs: Vec<&ClassifierModel> = models.iter().collect();
            let reports = risk_curve(&refs, test.samples(), &args.grid, &base)?;
            let mut t = run.table(
                &[("subset", subset_label(&args.subset))],
                &[
                    "epsilon",
                    "risk",
                    "mean_fidelity",
                    "mean_fidelity_fooled",
                    "n_samples",
                    "seed",
                ],
            );
            for r in &reports {
                t.push(curve_row(r, seed));
                write_atomic(
                    &run.attack_path(&format!("universal_example/eps_{:.4}.txt", r.epsilon)),
                    &r.to_text(),
                )?;
            }
            let path = run.attack_path("universal_example.csv");
            t.save(&path)?;
            Ok(path)
        }
        AttackKind::Transfer => {
            let surrogate = run.load_member(run.cfg.attack.surrogate)?;
            let models = run.load_members(&args.subset)?;
            let refs: Vec<&ClassifierModel> = models.iter().collect();
            let mut t = run.table(
                &[
                    ("subset", subset_label(&args.subset)),
                    ("surrogate", run.cfg.attack.surrogate.to_string()),
                ],
                &[
                    "epsilon",
                    "mode",
                    "risk",
                    "mean_fidelity",
                    "n_samples",
                    "seed",
                ],
            );
            for &eps in &args.grid {
                let cfg = AttackConfig {
                    epsilon_budget: eps,
                    ..base.clone()
                };
                let white = universal_example_search(&refs, test.samples(), &cfg)?;
                let blind = transfer_attack_eval(&surrogate, &refs, test.samples(), &cfg)?;
                for (mode, r) in [("white_box", &white), ("transfer", &blind)] {
                    t.push(vec![
                        eps.to_string(),
                        mode.into(),
                        r.risk.to_string(),
                        r.mean_fidelity.to_string(),
                        r.n_samples().to_string(),
                        seed.to_string(),
                    ]);
                }
            }
            let path = run.attack_path("transfer.csv");
            t.save(&path)?;
            Ok(path)
        }
        AttackKind::UniversalPerturbation => {
            let id = run.cfg.attack.classifier;
            let model = run.load_member(id)?;
            let cfg = AttackConfig {
                epsilon_budget: run.cfg.attack.perturbation_budget,
                max_iters: run.cfg.attack.perturbation_iters,
                ..base
            };
            let (layer, report) = universal_perturbation_search(&model, test.samples(), &cfg)?;
            let mut t = run.table(
                &[("classifier", id.to_string())],
                &["iteration", "epsilon", "loss", "accuracy", "step", "seed"],
            );
            for p in &report.trajectory {
                t.push(vec![
                    p.iteration.to_string(),
                    p.epsilon_proxy.to_string(),
                    p.loss.to_string(),
                    p.accuracy.to_string(),
                    p.step.to_string(),
                    seed.to_string(),
                ]);
            }
            let angles: String = layer.angles().iter().map(|a| format!("{a}\n")).collect();
            write_atomic(
                &run.attack_path("universal_perturbation_layer.txt"),
                &angles,
            )?;
            write_atomic(
                &run.attack_path("universal_perturbation.txt"),
                &report.to_text(),
            )?;
            let path = run.attack_path("universal_perturbation.csv");
            t.save(&path)?;
            Ok(path)
        }
    }
}

/// Keys each bound requires, with the accepted spellings.
fn required_keys(name: &str) -> Result<&'static [&'static str]> {
    Ok(match name {
        "theorem1" => &["d", "k", "mu", "r"],
        "lemma_a1" => &["d", "mu", "r"],
        "levy" => &["alpha", "beta", "d", "mu", "r"],
        "hoeffding" => &["n", "delta"],
        "qnfl" => &["d", "d_prime", "n_train"],
        "qnfl_unitary" => &["d", "n_train"],
        other => bail!("unknown bound `{other}`; expected theorem1, lemma_a1, levy, hoeffding, qnfl or qnfl_unitary"),
    })
}

fn canonical_key(key: &str) -> Option<&'static str> {
    Some(match key {
        "d" => "d",
        "k" => "k",
        "mu" | "mu_min" => "mu",
        "r" | "R" | "R0" | "r0" => "r",
        "delta" => "delta",
        "n" => "n",
        "N" | "n_train" => "n_train",
        "dprime" | "d_prime" => "d_prime",
        "alpha" => "alpha",
        "beta" => "beta",
        _ => return None,
    })
}

/// Evaluates a named bound from `key=value` arguments and renders the input
/// echo with the result.
pub fn bounds(name: &str, args: &[String]) -> Result<String> {
    let required = required_keys(name)?;
    let mut q = BoundQuery::default();
    let mut seen = Vec::new();
    let mut out = format!("[bound]\nname = {name}\n");
    for arg in args {
        let (raw_key, value) = arg
            .split_once('=')
            .with_context(|| format!("argument `{arg}` is not key=value"))?;
        let key = canonical_key(raw_key).with_context(|| format!("unknown key `{raw_key}`"))?;
        let bad = || format!("bad value `{value}` for {raw_key}");
        match key {
            "d" => q.d = value.parse().with_context(bad)?,
            "k" => q.k = value.parse().with_context(bad)?,
            "mu" => q.mu = value.parse().with_context(bad)?,
            "r" => q.r = value.parse().with_context(bad)?,
            "delta" => q.delta = value.parse().with_context(bad)?,
            "n" => q.n = value.parse().with_context(bad)?,
            "n_train" => q.n_train = value.parse().with_context(bad)?,
            "d_prime" => q.d_prime = value.parse().with_context(bad)?,
            "alpha" => q.alpha = value.parse().with_context(bad)?,
            _ => q.beta = value.parse().with_context(bad)?,
        }
        let _ = writeln!(out, "{raw_key} = {value}");
        seen.push(key);
    }
    let missing: Vec<&str> = required
        .iter()
        .filter(|k| !seen.contains(k))
        .copied()
        .collect();
    if !missing.is_empty() {
        bail!("bound `{name}` needs {}", missing.join(", "));
    }
    let value = evaluate_named(name, &q).with_context(|| format!("evaluating {name}"))?;
    let _ = writeln!(out, "value = {value}");
    Ok(out)
}

fn missing(out: &mut String, path: &Path) {
    let _ = writeln!(out, "[missing] {}", path.display());
}

/// Joins run artifacts into one structured text report.
pub fn report(run: &Run) -> Result<String> {
    if !run.out.is_dir() || std::fs::read_dir(&run.out)?.next().is_none() {
        bail!("run directory {} is empty or missing", run.out.display());
    }
    let mut out = String::from("# qadv run report\n");
    let _ = writeln!(out, "seed = {}", run.cfg.seed);
    let _ = writeln!(out, "config_hash = {}", run.hash);
    let d = 1usize << run.cfg.data.n_qubits;
    let _ = writeln!(out, "dimension = {d}");

    out.push_str("\n[training]\n");
    let mut error_rates = std::collections::BTreeMap::new();
    match Table::load(&run.summary_path()) {
        Ok(t) => {
            out.push_str("classifier,structure,n_params,accuracy\n");
            for row in &t.rows {
                let _ = writeln!(out, "{}", row.join(","));
                if let Ok(acc) = row[3].parse::<f64>() {
                    error_rates.insert(row[0].clone(), 1.0 - acc);
                }
            }
        }
        Err(_) => missing(&mut out, &run.summary_path()),
    }

    out.push_str("\n[universal_examples]\n");
    let path = run.attack_path("universal_example.csv");
    match Table::load(&path) {
        Ok(t) => {
            let subset: Vec<String> = t
                .meta
                .get("subset")
                .map(|s| s.split(',').map(|id| format!("classifier-{id}")).collect())
                .unwrap_or_default();
            let mu_min = subset
                .iter()
                .map(|name| error_rates.get(name).copied())
                .collect::<Option<Vec<f64>>>()
                .and_then(|v| v.into_iter().reduce(f64::min));
            let _ = writeln!(out, "subset = {}", subset.join(","));
            match mu_min {
                Some(mu) => _ = writeln!(out, "mu_min = {mu}"),
                None => out.push_str("mu_min = [missing]\n"),
            }
            out.push_str("epsilon,risk,mean_fidelity,theorem1_floor_hs,theorem1_floor_trace\n");
            let (ie, ir, im) = (
                t.column("epsilon"),
                t.column("risk"),
                t.column("mean_fidelity"),
            );
            let (Some(ie), Some(ir), Some(im)) = (ie, ir, im) else {
                bail!(
                    "{} lacks epsilon/risk/mean_fidelity columns",
                    path.display()
                );
            };
            for row in &t.rows {
                let risk: f64 = row[ir].parse().unwrap_or(f64::NAN);
                let floor = mu_min
                    .filter(|&mu| mu > 0.0)
                    .and_then(|mu| theorem1_min_epsilon(d, subset.len().max(1), mu, risk).ok());
                let (hs, tr) = match floor {
                    Some(f) => (f.to_string(), (f / 2f64.sqrt()).to_string()),
                    None => ("n/a".into(), "n/a".into()),
                };
                let _ = writeln!(out, "{},{},{},{hs},{tr}", row[ie], row[ir], row[im]);
            }
        }
        Err(_) => missing(&mut out, &path),
    }

    out.push_str("\n[transfer]\n");
    let path = run.attack_path("transfer.csv");
    match Table::load(&path) {
        Ok(t) => {
            out.push_str(&t.header.join(","));
            out.push('\n');
            for row in &t.rows {
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        Err(_) => missing(&mut out, &path),
    }

    out.push_str("\n[universal_perturbation]\n");
    let path = run.attack_path("universal_perturbation.csv");
    match Table::load(&path) {
        Ok(t) if !t.rows.is_empty() => {
            let first = &t.rows[0];
            let last = &t.rows[t.rows.len() - 1];
            let _ = writeln!(
                out,
                "classifier = {}",
                t.meta.get("classifier").map_or("?", String::as_str)
            );
            let _ = writeln!(out, "accepted_steps = {}", t.rows.len() - 1);
            let _ = writeln!(
                out,
                "initial = epsilon {} loss {} accuracy {}",
                first[1], first[2], first[3]
            );
            let _ = writeln!(
                out,
                "final = epsilon {} loss {} accuracy {}",
                last[1], last[2], last[3]
            );
        }
        _ => missing(&mut out, &path),
    }
    write_atomic(&run.out.join("report.txt"), &out)?;
    Ok(out)
}
