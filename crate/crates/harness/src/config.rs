//! Plain-text experiment configuration.
//!
//! ```text
//! # comment
//! seed = 7
//! arch = dncnn-d5-c16-k3-ch1
//!
//! [pretrain]
//! steps = 2000
//! lr = 1e-3
//! ```
//!
//! Keys before the first section header are global. Unknown sections and
//! keys are rejected, as are repeated keys. Relative paths are resolved
//! against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use mdn_core::adapt::{AdaptConfig, AdaptMode, BlindSpotConfig, MetaConfig, PretrainConfig};
use mdn_core::corpus::TextureConfig;
use mdn_core::lab::VarianceLabConfig;
use mdn_core::nn::LossKind;
use mdn_core::Arch;

use crate::error::{HarnessError, Result};

/// Where images come from. Without a directory a seeded toy corpus is
/// generated.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub train_dir: Option<PathBuf>,
    pub eval_dir: Option<PathBuf>,
    pub toy_train: usize,
    pub toy_eval: usize,
    pub toy: TextureConfig,
    /// Noise level of the evaluation images.
    pub eval_sigma255: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_dir: None,
            eval_dir: None,
            toy_train: 32,
            toy_eval: 10,
            toy: TextureConfig::default(),
            eval_sigma255: 20.0,
        }
    }
}

/// Evaluation during meta-training.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaEvalConfig {
    /// Evaluate at `t = 0`, every `every` outer steps and at `T`; 0 only
    /// evaluates the endpoints.
    pub every: usize,
    /// Adaptation rounds run from `theta_t` before scoring.
    pub rounds: usize,
}

impl Default for MetaEvalConfig {
    fn default() -> Self {
        Self { every: 0, rounds: 5 }
    }
}

/// Knobs specific to the comparison experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentKnobs {
    pub scales: Vec<f64>,
    pub patch_sizes: Vec<usize>,
    /// Side of the images cropped for the patch-size experiment.
    pub patch_image: usize,
    /// Side of the central region scored by the patch-size experiment.
    pub patch_measure: usize,
    /// Noise level for meta-vs-finetune and the blind-spot comparison.
    pub compare_sigma255: f64,
    /// Rounds for meta-vs-finetune.
    pub compare_rounds: usize,
}

impl Default for ExperimentKnobs {
    fn default() -> Self {
        Self {
            scales: vec![0.4, 0.6, 0.8, 1.0, 1.2],
            patch_sizes: vec![64, 96, 128],
            patch_image: 128,
            patch_measure: 64,
            compare_sigma255: 40.0,
            compare_rounds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabKnobs {
    pub variance: VarianceLabConfig,
    pub decomposition_trials: usize,
    pub convergence_n: Vec<usize>,
    pub convergence_m: usize,
    pub convergence_trials: usize,
}

impl Default for LabKnobs {
    fn default() -> Self {
        Self {
            variance: VarianceLabConfig::default(),
            decomposition_trials: 100_000,
            convergence_n: vec![1, 10, 100, 1000],
            convergence_m: 4,
            convergence_trials: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathsConfig {
    pub out: PathBuf,
    pub theta0: Option<PathBuf>,
    pub theta_meta: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            theta0: None,
            theta_meta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub arch: Arch,
    pub data: DataConfig,
    pub pretrain: PretrainConfig,
    pub meta: MetaConfig,
    pub meta_eval: MetaEvalConfig,
    pub adapt: AdaptConfig,
    pub blindspot: BlindSpotConfig,
    pub experiment: ExperimentKnobs,
    pub lab: LabKnobs,
    pub paths: PathsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            arch: Arch::DEFAULT,
            data: DataConfig::default(),
            pretrain: PretrainConfig::default(),
            meta: MetaConfig::default(),
            meta_eval: MetaEvalConfig::default(),
            adapt: AdaptConfig::default(),
            blindspot: BlindSpotConfig::default(),
            experiment: ExperimentKnobs::default(),
            lab: LabKnobs::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// Adaptation mode as written in the file; resolved once parsing is done.
#[derive(Debug, Clone, Copy)]
struct ModeKeys {
    blind: bool,
    sigma_max: f64,
    sigma: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            HarnessError::Usage(msg) => HarnessError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| HarnessError::usage(format!("line {}: {msg}", lineno + 1));
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("malformed section header {line:?}")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(at(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert((section.clone(), key.to_string())) {
                return Err(at(format!("duplicate key {key:?}")));
            }
            cfg.set(&section, key, value, base).map_err(|e| at(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `section.key=value` style overrides (global keys have no
    /// section prefix). Relative paths resolve against the working directory.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (lhs, value) = assignment
            .split_once('=')
            .ok_or_else(|| HarnessError::usage(format!("override {assignment:?} is not key=value")))?;
        let (section, key) = match lhs.trim().split_once('.') {
            Some((s, k)) => (s.trim(), k.trim()),
            None => ("", lhs.trim()),
        };
        if !section.is_empty() && !SECTIONS.contains(&section) {
            return Err(HarnessError::usage(format!("unknown section {section:?}")));
        }
        self.set(section, key, value.trim(), Path::new("."))?;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.pretrain.validate()?;
        self.meta.validate()?;
        self.adapt.validate()?;
        if self.lab.variance.m_values.is_empty() || self.lab.convergence_n.is_empty() {
            return Err(HarnessError::usage("lab M and N lists must not be empty"));
        }
        if self.experiment.patch_measure > self.experiment.patch_image {
            return Err(HarnessError::usage("patch_measure exceeds patch_image"));
        }
        if self.experiment.patch_sizes.iter().any(|&p| p < self.experiment.patch_measure || p > self.experiment.patch_image) {
            return Err(HarnessError::usage(
                "patch sizes must lie between patch_measure and patch_image",
            ));
        }
        Ok(())
    }

    fn mode_keys(&self) -> ModeKeys {
        match self.adapt.mode {
            AdaptMode::Blind { sigma_max255 } => ModeKeys {
                blind: true,
                sigma_max: sigma_max255,
                sigma: None,
            },
            AdaptMode::NonBlind { sigma255 } => ModeKeys {
                blind: false,
                sigma_max: 50.0,
                sigma: Some(sigma255),
            },
        }
    }

    fn set_mode(&mut self, keys: ModeKeys) -> Result<()> {
        self.adapt.mode = if keys.blind {
            AdaptMode::Blind { sigma_max255: keys.sigma_max }
        } else {
            AdaptMode::NonBlind {
                sigma255: keys
                    .sigma
                    .ok_or_else(|| HarnessError::usage("non-blind adaptation needs adapt.sigma"))?,
            }
        };
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, v: &str, base: &Path) -> Result<()> {
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match (section, key) {
            ("", "seed") => self.seed = num(key, v)?,
            ("", "arch") => self.arch = num(key, v)?,

            ("data", "train") => self.data.train_dir = Some(path(v)),
            ("data", "eval") => self.data.eval_dir = Some(path(v)),
            ("data", "toy_train") => self.data.toy_train = num(key, v)?,
            ("data", "toy_eval") => self.data.toy_eval = num(key, v)?,
            ("data", "toy_size") => {
                let s = num(key, v)?;
                self.data.toy.height = s;
                self.data.toy.width = s;
            }
            ("data", "toy_motif") => self.data.toy.motif = num(key, v)?,
            ("data", "toy_jitter") => self.data.toy.tile_jitter = num(key, v)?,
            ("data", "sigma") => self.data.eval_sigma255 = num(key, v)?,

            ("pretrain", "steps") => self.pretrain.steps = num(key, v)?,
            ("pretrain", "lr") => self.pretrain.adam.lr = num(key, v)?,
            ("pretrain", "batch") => self.pretrain.batch = num(key, v)?,
            ("pretrain", "patch") => self.pretrain.patch = num(key, v)?,
            ("pretrain", "sigma_max") => self.pretrain.sigma_max255 = num(key, v)?,
            ("pretrain", "augment") => self.pretrain.augment = num(key, v)?,
            ("pretrain", "log_every") => self.pretrain.log_every = num(key, v)?,

            ("meta", "outer_steps") => self.meta.outer_steps = num(key, v)?,
            ("meta", "inner_steps") => self.meta.inner_steps = num(key, v)?,
            ("meta", "epsilon") => self.meta.epsilon = num(key, v)?,
            ("meta", "lr") => self.meta.adam.lr = num(key, v)?,
            ("meta", "batch") => self.meta.batch = num(key, v)?,
            ("meta", "patch") => self.meta.patch = num(key, v)?,
            ("meta", "sigma_max") => self.meta.sigma_max255 = num(key, v)?,
            ("meta", "eval_every") => self.meta_eval.every = num(key, v)?,
            ("meta", "eval_rounds") => self.meta_eval.rounds = num(key, v)?,

            ("adapt", "rounds") => self.adapt.rounds = num(key, v)?,
            ("adapt", "inner_steps") => self.adapt.inner_steps = num(key, v)?,
            ("adapt", "epsilon") => self.adapt.epsilon = num(key, v)?,
            ("adapt", "lr") => self.adapt.adam.lr = num(key, v)?,
            ("adapt", "scale") => self.adapt.scale = num(key, v)?,
            ("adapt", "loss") => self.adapt.loss = num::<LossKind>(key, v)?,
            ("adapt", "mode") => {
                let mut keys = self.mode_keys();
                keys.blind = match v {
                    "blind" => true,
                    "nonblind" | "non-blind" => false,
                    _ => return Err(HarnessError::usage(format!("mode must be blind or nonblind, not {v:?}"))),
                };
                if !keys.blind && keys.sigma.is_none() {
                    keys.sigma = Some(self.data.eval_sigma255);
                }
                self.set_mode(keys)?;
            }
            ("adapt", "sigma_max") => {
                let mut keys = self.mode_keys();
                keys.sigma_max = num(key, v)?;
                self.set_mode(keys)?;
            }
            ("adapt", "sigma") => {
                let mut keys = self.mode_keys();
                keys.sigma = Some(num(key, v)?);
                self.set_mode(keys)?;
            }

            ("blindspot", "rounds") => self.blindspot.rounds = num(key, v)?,
            ("blindspot", "patch") => self.blindspot.patch = num(key, v)?,
            ("blindspot", "batch") => self.blindspot.batch = num(key, v)?,
            ("blindspot", "radius") => self.blindspot.radius = num(key, v)?,
            ("blindspot", "lr") => self.blindspot.adam.lr = num(key, v)?,

            ("experiment", "scales") => self.experiment.scales = list(key, v)?,
            ("experiment", "patch_sizes") => self.experiment.patch_sizes = list(key, v)?,
            ("experiment", "patch_image") => self.experiment.patch_image = num(key, v)?,
            ("experiment", "patch_measure") => self.experiment.patch_measure = num(key, v)?,
            ("experiment", "compare_sigma") => self.experiment.compare_sigma255 = num(key, v)?,
            ("experiment", "compare_rounds") => self.experiment.compare_rounds = num(key, v)?,

            ("lab", "trials") => self.lab.variance.trials = num(key, v)?,
            ("lab", "sigma_n") => self.lab.variance.sigma_n255 = num(key, v)?,
            ("lab", "sigma_residual") => self.lab.variance.sigma_residual255 = num(key, v)?,
            ("lab", "sigma_r") => self.lab.variance.sigma_r255 = num(key, v)?,
            ("lab", "n") => self.lab.variance.n = num(key, v)?,
            ("lab", "m_values") => self.lab.variance.m_values = list(key, v)?,
            ("lab", "patch_len") => self.lab.variance.patch_len = num(key, v)?,
            ("lab", "decomposition_trials") => self.lab.decomposition_trials = num(key, v)?,
            ("lab", "convergence_n") => self.lab.convergence_n = list(key, v)?,
            ("lab", "convergence_m") => self.lab.convergence_m = num(key, v)?,
            ("lab", "convergence_trials") => self.lab.convergence_trials = num(key, v)?,

            ("paths", "out") => self.paths.out = path(v),
            ("paths", "theta0") => self.paths.theta0 = Some(path(v)),
            ("paths", "theta_meta") => self.paths.theta_meta = Some(path(v)),

            _ => {
                let full = if section.is_empty() {
                    key.to_string()
                } else {
                    format!("{section}.{key}")
                };
                return Err(HarnessError::usage(format!("unknown key {full:?}")));
            }
        }
        Ok(())
    }
}

const SECTIONS: &[&str] = &["data", "pretrain", "meta", "adapt", "blindspot", "experiment", "lab", "paths"];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| HarnessError::usage(format!("cannot parse {key} = {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|p| num(key, p.trim())).collect()
}
