//! TOML run configuration with `[problem]`, `[qmc]`, `[pod]`, `[nn]` and
//! `[study]` sections.
//!
//! Parsing fills defaults, rejects unknown keys, validates every section and
//! returns a [`RunConfig`] that the compute stages take by reference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{RankMode, StudyConfig};
use crate::nn::{AdamWConfig, PlateauConfig, SizingConfig, TrainConfig};
use crate::problem::{
    ExpansionField, FemSpace, HolomorphyProfile, ModelProblemConfig, ProblemKind,
};
use crate::qmc::{QmcConfig, RateConfig, Sequence};
use crate::{Error, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ProblemSection {
    kind: ProblemKind,
    n_dof: usize,
    s: usize,
    theta: Option<f64>,
    amplitude: Option<f64>,
    n_modes: Option<usize>,
    p: Option<f64>,
    absorption: Option<f64>,
    reaction: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            kind: ProblemKind::RealDiffusion,
            n_dof: 256,
            s: 64,
            theta: None,
            amplitude: None,
            n_modes: None,
            p: None,
            absorption: None,
            reaction: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct QmcSection {
    n_points: usize,
    start_index: u64,
    sequence: Sequence,
    alpha: f64,
}

impl Default for QmcSection {
    fn default() -> Self {
        QmcSection {
            n_points: 256,
            start_index: 1,
            sequence: Sequence::Halton,
            alpha: RateConfig::default().alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodRankRule {
    /// Tail criterion; `tolerance` defaults to `1/(100 sqrt(N))`.
    Tolerance,
    Apriori,
    /// Exactly `fixed_rank` modes, capped at the numerical rank.
    Fixed,
    /// Every numerically nonzero mode.
    Full,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PodSection {
    rank: PodRankRule,
    tolerance: Option<f64>,
    fixed_rank: Option<usize>,
}

impl Default for PodSection {
    fn default() -> Self {
        PodSection {
            rank: PodRankRule::Tolerance,
            tolerance: None,
            fixed_rank: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NnSection {
    max_epochs: usize,
    batch_size: Option<usize>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    plateau_factor: f64,
    plateau_patience: usize,
    plateau_threshold: f64,
    plateau_cooldown: usize,
    plateau_min_lr: f64,
    plateau_eps: f64,
    stop_threshold: Option<f64>,
    seed: u64,
    width: Option<usize>,
    hidden_layers: Option<usize>,
}

impl Default for NnSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let (o, p) = (t.optimizer, t.plateau);
        NnSection {
            max_epochs: t.max_epochs,
            batch_size: t.batch_size,
            lr: o.lr,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
            weight_decay: o.weight_decay,
            plateau_factor: p.factor,
            plateau_patience: p.patience,
            plateau_threshold: p.threshold,
            plateau_cooldown: p.cooldown,
            plateau_min_lr: p.min_lr,
            plateau_eps: p.eps,
            stop_threshold: None,
            seed: t.seed,
            width: None,
            hidden_layers: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct StudySection {
    n_grid: Vec<usize>,
    rank: RankMode,
    test_set_size: usize,
    test_start_index: Option<u64>,
    train: bool,
    record_timings: bool,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            n_grid: (6..=12).map(|k| 1usize << k).collect(),
            rank: RankMode::Tolerance,
            test_set_size: 256,
            test_start_index: None,
            train: false,
            record_timings: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    problem: ProblemSection,
    qmc: QmcSection,
    pod: PodSection,
    nn: NnSection,
    study: StudySection,
}

/// How the POD stage picks its rank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodSettings {
    pub rule: PodRankRule,
    pub tolerance: Option<f64>,
    pub fixed_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnSettings {
    /// `stop_threshold` here is a placeholder when `auto_threshold` is set.
    pub train: TrainConfig,
    /// Use `N^(-α)` as the stopping threshold.
    pub auto_threshold: bool,
    /// Explicit `(width, hidden_layers)` instead of the a-priori rule.
    pub shape: Option<(usize, usize)>,
}

impl NnSettings {
    /// Training settings for `n_samples` samples.
    pub fn train_config(&self, n_samples: usize, alpha: f64) -> TrainConfig {
        if self.auto_threshold {
            self.train.clone().with_sample_threshold(n_samples, alpha)
        } else {
            self.train.clone()
        }
    }

    pub fn sizing(&self, n_samples: usize, rates: &RateConfig) -> Result<SizingConfig> {
        match self.shape {
            Some((width, hidden_layers)) => Ok(SizingConfig {
                n: (width as f64).sqrt().round() as usize,
                width,
                hidden_layers,
            }),
            None => crate::nn::size_apriori(n_samples, rates),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub n_grid: Vec<usize>,
    pub rank_mode: RankMode,
    pub test_set_size: usize,
    pub test_start_index: Option<u64>,
    pub train: bool,
    pub record_timings: bool,
}

/// Validated configuration of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ModelProblemConfig,
    pub qmc: QmcConfig,
    pub rates: RateConfig,
    pub pod: PodSettings,
    pub nn: NnSettings,
    pub study: StudySettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_toml_str("").expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {}", e.message())))?;
        let cfg = freeze(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.qmc.validate()?;
        self.rates.validate()?;
        if self.qmc.s != self.problem.s {
            return Err(Error::Config("qmc dimension differs from problem.s".into()));
        }
        if let Some(t) = self.pod.tolerance {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::Config("pod: tolerance must be positive".into()));
            }
        }
        if self.pod.rule == PodRankRule::Fixed && self.pod.fixed_rank.is_none() {
            return Err(Error::Config(
                "pod: rank = \"fixed\" needs fixed_rank".into(),
            ));
        }
        self.nn.train.validate()?;
        if let Some((w, l)) = self.nn.shape {
            if w == 0 || l == 0 {
                return Err(Error::Config(
                    "nn: width and hidden_layers must be positive".into(),
                ));
            }
        }
        self.study_config().validate()
    }

    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            problem: self.problem.clone(),
            n_grid: self.study.n_grid.clone(),
            rates: self.rates,
            rank_mode: self.study.rank_mode,
            test_set_size: self.study.test_set_size,
            test_start_index: self.study.test_start_index,
            train: self.study.train.then(|| self.nn.train.clone()),
            record_timings: self.study.record_timings,
        }
    }
}

fn freeze(raw: RawConfig) -> Result<RunConfig> {
    let p = raw.problem;
    let mut problem = match p.kind {
        ProblemKind::RealDiffusion => ModelProblemConfig::real_diffusion(p.n_dof, p.s),
        ProblemKind::ComplexReaction => ModelProblemConfig::complex_reaction(p.n_dof, p.s),
    };
    problem.fem = FemSpace::new(p.n_dof);
    problem.field = ExpansionField {
        theta: p.theta.unwrap_or(problem.field.theta),
        amplitude: p.amplitude.unwrap_or(problem.field.amplitude),
        n_modes: p.n_modes.unwrap_or(problem.field.n_modes),
    };
    problem.profile = HolomorphyProfile {
        p: p.p.unwrap_or(problem.profile.p),
    };
    if let Some(a) = p.absorption {
        problem.absorption = a;
    }
    if let Some(r) = p.reaction {
        problem.reaction = r;
    }

    let q = raw.qmc;
    let qmc = QmcConfig {
        s: problem.s,
        n_points: q.n_points,
        start_index: q.start_index,
        sequence: q.sequence,
    };
    let rates = RateConfig {
        alpha: q.alpha,
        p: problem.profile.p,
    };

    let pod = PodSettings {
        rule: raw.pod.rank,
        tolerance: raw.pod.tolerance,
        fixed_rank: raw.pod.fixed_rank,
    };

    let n = raw.nn;
    let shape = match (n.width, n.hidden_layers) {
        (Some(w), Some(l)) => Some((w, l)),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "nn: width and hidden_layers must be given together".into(),
            ))
        }
    };
    let nn = NnSettings {
        train: TrainConfig {
            max_epochs: n.max_epochs,
            batch_size: n.batch_size,
            optimizer: AdamWConfig {
                lr: n.lr,
                beta1: n.beta1,
                beta2: n.beta2,
                eps: n.eps,
                weight_decay: n.weight_decay,
            },
            plateau: PlateauConfig {
                factor: n.plateau_factor,
                patience: n.plateau_patience,
                threshold: n.plateau_threshold,
                cooldown: n.plateau_cooldown,
                min_lr: n.plateau_min_lr,
                eps: n.plateau_eps,
            },
            stop_threshold: n
                .stop_threshold
                .unwrap_or(TrainConfig::default().stop_threshold),
            seed: n.seed,
        },
        auto_threshold: n.stop_threshold.is_none(),
        shape,
    };

    let s = raw.study;
    let study = StudySettings {
        n_grid: s.n_grid,
        rank_mode: s.rank,
        test_set_size: s.test_set_size,
        test_start_index: s.test_start_index,
        train: s.train,
        record_timings: s.record_timings,
    };
    Ok(RunConfig {
        problem,
        qmc,
        rates,
        pod,
        nn,
        study,
    })
}
