//! Halton quasi-Monte Carlo points on `[0,1)^s`, their rescaling to the
//! parameter cube `[-1,1)^s`, and equal-weight quadrature.

use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::{Error, Result};

/// Low-discrepancy sequence family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    #[default]
    Halton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmcConfig {
    /// Truncation dimension.
    pub s: usize,
    pub n_points: usize,
    /// Sequence index of the first point. Index 0 is the origin, so the
    /// default skips it.
    pub start_index: u64,
    pub sequence: Sequence,
}

impl QmcConfig {
    pub fn new(s: usize, n_points: usize) -> Self {
        QmcConfig {
            s,
            n_points,
            start_index: 1,
            sequence: Sequence::Halton,
        }
    }

    pub fn with_start(mut self, start_index: u64) -> Self {
        self.start_index = start_index;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::Config("qmc: s must be at least 1".into()));
        }
        if self.n_points == 0 {
            return Err(Error::Config("qmc: n_points must be at least 1".into()));
        }
        if self
            .start_index
            .checked_add(self.n_points as u64)
            .is_none_or(|end| end >= 1 << 52)
        {
            return Err(Error::Config(
                "qmc: sequence indices must stay below 2^52".into(),
            ));
        }
        Ok(())
    }
}

/// Convergence exponents used by the a-priori rank and network-size rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    /// QMC rate `alpha = 1 - delta`, taken in the `delta -> 0` limit.
    pub alpha: f64,
    /// Summability exponent of the parametric holomorphy, `0 < p < 1`.
    pub p: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            alpha: 1.0,
            p: 4.0 / 9.0,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "rates: alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!(
                "rates: p must lie in (0,1), got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// A truncated parameter vector `y` in `[-1,1]^s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(c) = coords.iter().find(|c| c.is_nan() || c.abs() > 1.0) {
            return Err(Error::Config(format!(
                "parameter coordinate {c} lies outside [-1,1]"
            )));
        }
        Ok(ParamPoint(coords))
    }

    pub fn zeros(s: usize) -> Self {
        ParamPoint(vec![0.0; s])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Same point with every coordinate beyond `s_sub` set to zero.
    pub fn truncated(&self, s_sub: usize) -> Self {
        let mut c = self.0.clone();
        for v in c.iter_mut().skip(s_sub) {
            *v = 0.0;
        }
        ParamPoint(c)
    }

    /// Zero-padded (or truncated) copy of length `s`.
    pub fn resized(&self, s: usize) -> Self {
        let mut c = self.0.clone();
        c.resize(s, 0.0);
        ParamPoint(c)
    }
}

const SMALL_PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

/// The first `count` primes in increasing order.
pub fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = SMALL_PRIMES.iter().copied().take(count).collect();
    let mut candidate = *primes.last().unwrap_or(&1) + 1;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Digit reversal of `index` in `base`, mirrored about the radix point.
pub fn radical_inverse(index: u64, base: u64) -> f64 {
    debug_assert!(base >= 2);
    let base = base as u128;
    let mut i = index as u128;
    let mut reversed: u128 = 0;
    let mut denom: u128 = 1;
    while i > 0 {
        reversed = reversed * base + i % base;
        denom *= base;
        i /= base;
    }
    let x = reversed as f64 / denom as f64;
    // `denom` above 2^53 can round the quotient up to 1.
    x.min(1.0 - f64::EPSILON / 2.0)
}

pub fn halton_points(cfg: &QmcConfig) -> Result<Vec<Vec<f64>>> {
    halton_points_with(cfg, Execution::default())
}

pub fn halton_points_with(cfg: &QmcConfig, exec: Execution) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let bases = first_primes(cfg.s);
    Ok(exec::map_indices(cfg.n_points, exec, |k| {
        let index = cfg.start_index + k as u64;
        bases.iter().map(|&b| radical_inverse(index, b)).collect()
    }))
}

/// Componentwise `y = 2x - 1`.
pub fn to_parameter_cube(points: &[Vec<f64>]) -> Vec<ParamPoint> {
    points
        .iter()
        .map(|x| ParamPoint(x.iter().map(|&v| 2.0 * v - 1.0).collect()))
        .collect()
}

/// Halton points already rescaled to the parameter cube.
pub fn parameter_points(cfg: &QmcConfig) -> Result<Vec<ParamPoint>> {
    Ok(to_parameter_cube(&halton_points(cfg)?))
}

/// Equal-weight quadrature estimate.
pub fn qmc_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("qmc_mean needs at least one value"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
