use serde::{Deserialize, Serialize};

use crate::qmc::RateConfig;
use crate::Result;

/// Network size derived from the sample count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizingConfig {
    pub n: usize,
    /// Width of every hidden layer, `n²`.
    pub width: usize,
    /// `ceil(max{1, log2(n)/2}) + 2`.
    pub hidden_layers: usize,
}

impl SizingConfig {
    pub fn from_n(n: usize) -> Self {
        let n = n.max(1);
        let depth = (0.5 * (n as f64).log2()).max(1.0).ceil() as usize;
        SizingConfig {
            n,
            width: n * n,
            hidden_layers: depth + 2,
        }
    }

    /// Layer widths for `inputs` parameters and `outputs` regression targets.
    pub fn dims(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut dims = vec![inputs];
        dims.extend(std::iter::repeat_n(self.width, self.hidden_layers));
        dims.push(outputs);
        dims
    }
}

/// `n = ceil(N^(αp/(2-p)))`, width `n²`, `ceil(max{1, log2(n)/2}) + 2`
/// hidden layers.
pub fn size_apriori(n_samples: usize, rates: &RateConfig) -> Result<SizingConfig> {
    rates.validate()?;
    let exponent = rates.alpha * rates.p / (2.0 - rates.p);
    let n = (n_samples.max(1) as f64).powf(exponent).ceil() as usize;
    Ok(SizingConfig::from_n(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sizes() {
        let rates = RateConfig::default();
        assert_eq!(
            size_apriori(4096, &rates).unwrap(),
            SizingConfig {
                n: 11,
                width: 121,
                hidden_layers: 4
            }
        );
        assert_eq!(
            size_apriori(1, &rates).unwrap(),
            SizingConfig {
                n: 1,
                width: 1,
                hidden_layers: 3
            }
        );
        let s = size_apriori(256, &rates).unwrap();
        assert_eq!((s.n, s.width), (5, 25));
        assert!(size_apriori(4, &RateConfig { alpha: 1.0, p: 0.0 }).is_err());
    }

    #[test]
    fn dims_layout() {
        let s = SizingConfig::from_n(3);
        assert_eq!(s.dims(2, 6), vec![2, 9, 9, 9, 6]);
    }
}
