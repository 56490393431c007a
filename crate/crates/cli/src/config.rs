use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qadv::attacks::AttackConfig;
use qadv::models::{Architecture, RosterEntry};
use qadv::training::TrainConfig;
use qadv::QcnnSize;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ising,
    Mnist,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataSection,
    pub roster: RosterSection,
    pub training: TrainingSection,
    pub attack: AttackSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Chain length for Ising, encoded qubits for images.
    pub n_qubits: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub digits: [u8; 2],
    pub mnist_dir: PathBuf,
    pub per_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RosterSection {
    pub qcnn: Vec<String>,
    pub variational_depths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub step_alpha: f64,
    pub max_iters: usize,
    pub epsilon_grid: String,
    pub subset: Vec<usize>,
    pub surrogate: usize,
    pub classifier: usize,
    pub perturbation_budget: f64,
    pub perturbation_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Ising,
            seed: 7,
            out: PathBuf::from("runs/default"),
            data: DataSection::default(),
            roster: RosterSection::default(),
            training: TrainingSection::default(),
            attack: AttackSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            n_qubits: 8,
            n_train: 300,
            n_val: 100,
            n_test: 100,
            digits: [1, 9],
            mnist_dir: PathBuf::from("data/mnist"),
            per_class: 200,
        }
    }
}

impl Default for RosterSection {
    fn default() -> Self {
        Self {
            qcnn: vec!["small".into(), "large".into()],
            variational_depths: (5..=10).collect(),
        }
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
        }
    }
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            step_alpha: 0.02,
            max_iters: 40,
            epsilon_grid: "0:0.02:0.2".into(),
            subset: vec![1, 3, 6],
            surrogate: 1,
            classifier: 2,
            perturbation_budget: 1.0,
            perturbation_iters: 200,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let roster = self.roster()?;
        if roster.is_empty() {
            bail!("roster is empty");
        }
        parse_epsilon_grid(&self.attack.epsilon_grid)?;
        self.train_config(0).validate()?;
        self.attack_config().validate()?;
        for &id in self
            .attack
            .subset
            .iter()
            .chain([&self.attack.surrogate, &self.attack.classifier])
        {
            if id == 0 || id > roster.len() {
                bail!(
                    "classifier {id} is not in the roster (1..={})",
                    roster.len()
                );
            }
        }
        Ok(())
    }

    /// QCNNs first, then variational circuits, numbered from 1.
    pub fn roster(&self) -> Result<Vec<RosterEntry>> {
        let mut arch = Vec::new();
        for s in &self.roster.qcnn {
            let size = match s.as_str() {
                "small" => QcnnSize::Small,
                "large" => QcnnSize::Large,
                other => bail!("unknown qcnn size `{other}` (expected small or large)"),
            };
            arch.push(Architecture::Qcnn { size });
        }
        arch.extend(
            self.roster
                .variational_depths
                .iter()
                .map(|&depth| Architecture::Variational { depth }),
        );
        Ok(arch
            .into_iter()
            .enumerate()
            .map(|(i, architecture)| RosterEntry {
                id: i + 1,
                architecture,
            })
            .collect())
    }

    pub fn train_config(&self, member_id: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            epochs: self.training.epochs,
            seed: self.seed.wrapping_add(member_id as u64),
            ..Default::default()
        }
    }

    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            step_alpha: self.attack.step_alpha,
            max_iters: self.attack.max_iters,
            seed: self.seed,
            ..Default::default()
        }
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses `start:step:stop` (inclusive) or a comma-separated ascending list.
pub fn parse_epsilon_grid(spec: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("bad epsilon grid `{spec}`"))?;
        let [start, step, stop] = parts[..] else {
            bail!("epsilon grid `{spec}` must be start:step:stop");
        };
        if !(step > 0.0 && step.is_finite()) || stop < start {
            bail!("epsilon grid `{spec}` needs step > 0 and stop >= start");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("bad epsilon grid `{spec}`"))?
    };
    if grid.is_empty() || grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        bail!("epsilon grid `{spec}` must hold non-negative values");
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        bail!("epsilon grid `{spec}` must be ascending");
    }
    Ok(grid)
}

pub fn parse_subset(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .with_context(|| format!("bad classifier id `{p}`"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let g = parse_epsilon_grid("0:0.02:0.2").unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 0.2).abs() < 1e-12);
        assert_eq!(parse_epsilon_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_epsilon_grid("0.2,0.1").is_err());
        assert!(parse_epsilon_grid("0:0:1").is_err());
        assert!(parse_epsilon_grid("a:b").is_err());
    }

    #[test]
    fn default_roster_matches_library() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.roster().unwrap(), qadv::models::default_roster());
        cfg.validate().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let a = ExperimentConfig::default();
        let text = toml::to_string(&a).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), a);
        assert!(toml::from_str::<ExperimentConfig>("sede = 3").is_err());
        let partial: ExperimentConfig =
            toml::from_str("task = \"synthetic\"\n[data]\nn_train = 20\n").unwrap();
        assert_eq!(partial.task, Task::Synthetic);
        assert_eq!(partial.data.n_test, 100);
    }
}
