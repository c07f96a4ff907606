use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{loss_and_grad, AffineNorm, Mlp};
use super::optim::{AdamW, AdamWConfig};
use super::scheduler::{PlateauConfig, ReduceLrOnPlateau};
use crate::pod::ReducedCoefficients;
use crate::qmc::ParamPoint;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub optimizer: AdamWConfig,
    pub plateau: PlateauConfig,
    /// Training stops once the epoch loss drops below this value.
    pub stop_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 50_000,
            batch_size: None,
            optimizer: AdamWConfig::default(),
            plateau: PlateauConfig::default(),
            stop_threshold: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Sets the stopping threshold to `N^(-α)`.
    pub fn with_sample_threshold(mut self, n_samples: usize, alpha: f64) -> Self {
        self.stop_threshold = (n_samples as f64).powf(-alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.optimizer;
        let p = &self.plateau;
        let positive = [o.lr, o.eps, p.factor, self.stop_threshold];
        if positive.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::Config(
                "train: lr, eps, plateau factor and stop threshold must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(Error::Config("train: Adam betas must lie in [0,1)".into()));
        }
        if o.weight_decay < 0.0 || p.threshold < 0.0 || p.eps < 0.0 || p.min_lr < 0.0 {
            return Err(Error::Config(
                "train: negative regularisation setting".into(),
            ));
        }
        if p.factor >= 1.0 {
            return Err(Error::Config(
                "train: plateau factor must be below 1".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("train: max_epochs must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("train: batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Threshold,
    MaxEpochs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Full training-set loss of the parameters at the start of each epoch.
    pub loss: Vec<f64>,
    pub lr: Vec<f64>,
    pub best_loss: Vec<f64>,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn final_best(&self) -> f64 {
        self.best_loss.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn epochs(&self) -> usize {
        self.loss.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,best_loss,lr\n");
        for (i, ((l, b), r)) in self
            .loss
            .iter()
            .zip(&self.best_loss)
            .zip(&self.lr)
            .enumerate()
        {
            out.push_str(&format!("{},{l:e},{b:e},{r:e}\n", i + 1));
        }
        out
    }
}

/// Fits the network to the reduced coefficients of the training points by
/// AdamW on the mean squared error. Targets are min-max normalised first;
/// the returned network carries that normalisation and the best parameters
/// seen during training.
pub fn train(
    model: Mlp,
    inputs: &[ParamPoint],
    targets: &[ReducedCoefficients],
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainHistory)> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::dim("training targets", inputs.len(), targets.len()));
    }
    if let Some(t) = targets.iter().find(|t| t.values.len() != model.n_outputs()) {
        return Err(Error::dim(
            "training target width",
            model.n_outputs(),
            t.values.len(),
        ));
    }
    if let Some(x) = inputs.iter().find(|x| x.dim() != model.n_inputs()) {
        return Err(Error::dim(
            "training input width",
            model.n_inputs(),
            x.dim(),
        ));
    }

    let mut model = model;
    let raw_targets: Vec<Vec<f64>> = targets.iter().map(|t| t.values.clone()).collect();
    model.output_norm = AffineNorm::min_max(&raw_targets, model.n_outputs());
    let normed: Vec<Vec<f64>> = raw_targets
        .iter()
        .map(|t| model.output_norm.normalize(t))
        .collect();
    let xs: Vec<&[f64]> = inputs.iter().map(|p| p.coords()).collect();
    let ts: Vec<&[f64]> = normed.iter().map(Vec::as_slice).collect();

    let mut opt = AdamW::new(model.params.len(), cfg.optimizer);
    let mut sched = ReduceLrOnPlateau::new(cfg.plateau);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c);
    let mut order: Vec<usize> = (0..xs.len()).collect();

    let mut history = TrainHistory {
        loss: Vec::new(),
        lr: Vec::new(),
        best_loss: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
    };
    let mut best = f64::INFINITY;
    let mut best_params = model.params.clone();

    for epoch in 0..cfg.max_epochs {
        let (loss, grad) = loss_and_grad(&model, &xs, &ts)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at epoch {}",
                epoch + 1
            )));
        }
        history.loss.push(loss);
        history.lr.push(opt.lr());
        if loss < best {
            best = loss;
            best_params.copy_from_slice(&model.params);
        }
        history.best_loss.push(best);
        if loss < cfg.stop_threshold {
            history.stop_reason = StopReason::Threshold;
            break;
        }
        match cfg.batch_size {
            Some(b) if b < xs.len() => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(b) {
                    let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i]).collect();
                    let bt: Vec<&[f64]> = chunk.iter().map(|&i| ts[i]).collect();
                    let (_, g) = loss_and_grad(&model, &bx, &bt)?;
                    opt.step(&mut model.params, &g);
                }
            }
            _ => opt.step(&mut model.params, &grad),
        }
        let lr = sched.step(loss, opt.lr());
        opt.set_lr(lr);
    }
    model.params = best_params;
    log::debug!(
        "training finished after {} epochs, best loss {best:e} ({:?})",
        history.epochs(),
        history.stop_reason
    );
    Ok((model, history))
}

/// Reduced coefficients predicted for a parameter point, in physical units.
pub fn predict_coeffs(model: &Mlp, y: &ParamPoint) -> Result<ReducedCoefficients> {
    if y.dim() != model.n_inputs() {
        return Err(Error::dim("prediction input", model.n_inputs(), y.dim()));
    }
    Ok(ReducedCoefficients {
        values: model.forward(y.coords()),
    })
}
