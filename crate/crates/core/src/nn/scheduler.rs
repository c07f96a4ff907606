use serde::{Deserialize, Serialize};

/// Settings of [`ReduceLrOnPlateau`]; the defaults are the customary ones
/// except for `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    /// Relative improvement a loss needs to count as better than the best.
    pub threshold: f64,
    pub cooldown: usize,
    pub min_lr: f64,
    /// Reductions smaller than this are skipped.
    pub eps: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.1,
            patience: 10,
            threshold: 1e-4,
            cooldown: 0,
            min_lr: 0.0,
            eps: 1e-20,
        }
    }
}

/// Lowers the learning rate once the monitored loss stops improving.
#[derive(Clone, Debug)]
pub struct ReduceLrOnPlateau {
    cfg: PlateauConfig,
    best: f64,
    bad_epochs: usize,
    cooldown_left: usize,
}

impl ReduceLrOnPlateau {
    pub fn new(cfg: PlateauConfig) -> Self {
        ReduceLrOnPlateau {
            cfg,
            best: f64::INFINITY,
            bad_epochs: 0,
            cooldown_left: 0,
        }
    }

    /// Feeds one epoch's loss and returns the learning rate to use next.
    pub fn step(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best * (1.0 - self.cfg.threshold) {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        if self.cooldown_left > 0 {
            self.cooldown_left -= 1;
            self.bad_epochs = 0;
        }
        if self.bad_epochs > self.cfg.patience {
            self.cooldown_left = self.cfg.cooldown;
            self.bad_epochs = 0;
            let reduced = (lr * self.cfg.factor).max(self.cfg.min_lr);
            if lr - reduced > self.cfg.eps {
                return reduced;
            }
        }
        lr
    }
}
