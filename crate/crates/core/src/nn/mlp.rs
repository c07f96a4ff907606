use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-coordinate affine map `z = (x - shift) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineNorm {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineNorm {
    pub fn identity(n: usize) -> Self {
        AffineNorm {
            shift: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    /// Maps each coordinate's observed range onto `[-1,1]`. Constant
    /// coordinates are only shifted.
    pub fn min_max(data: &[Vec<f64>], width: usize) -> Self {
        let mut lo = vec![f64::INFINITY; width];
        let mut hi = vec![f64::NEG_INFINITY; width];
        for row in data {
            for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
                *l = l.min(v);
                *h = h.max(v);
            }
        }
        let mut norm = AffineNorm::identity(width);
        for i in 0..width {
            if lo[i] > hi[i] {
                continue;
            }
            norm.shift[i] = 0.5 * (lo[i] + hi[i]);
            let half = 0.5 * (hi[i] - lo[i]);
            if half > 0.0 {
                norm.scale[i] = half;
            }
        }
        norm
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (s, c))| (v - s) / c)
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (s, c))| v * c + s)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.shift.len() != self.scale.len() {
            return Err(Error::dim(
                "normalisation",
                self.shift.len(),
                self.scale.len(),
            ));
        }
        if self.scale.iter().chain(&self.shift).any(|v| !v.is_finite()) || self.scale.contains(&0.0)
        {
            return Err(Error::Config("normalisation is not invertible".into()));
        }
        Ok(())
    }
}

/// Fully connected network `A_L ∘ tanh ∘ A_{L-1} ∘ … ∘ tanh ∘ A_1`.
///
/// All weights and biases live in one flat vector: layer `k` contributes its
/// `dims[k+1] × dims[k]` weight matrix in row-major order followed by its
/// bias vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub params: Vec<f64>,
    pub input_norm: AffineNorm,
    pub output_norm: AffineNorm,
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Zero-parameter network with identity normalisations.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "network dims must have at least two positive entries, got {dims:?}"
            )));
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
            input_norm: AffineNorm::identity(dims[0]),
            output_norm: AffineNorm::identity(dims[dims.len() - 1]),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..m.n_layers() {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = m.offsets(k);
            for p in &mut m.params[w..w + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(m)
    }

    /// Rebuilds a network from stored parts, checking every invariant.
    pub fn from_parts(
        dims: Vec<usize>,
        params: Vec<f64>,
        input_norm: AffineNorm,
        output_norm: AffineNorm,
    ) -> Result<Self> {
        let mut m = Self::zeros(&dims)?;
        if params.len() != m.params.len() {
            return Err(Error::dim(
                "network parameters",
                m.params.len(),
                params.len(),
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        input_norm.validate()?;
        output_norm.validate()?;
        if input_norm.dim() != m.n_inputs() || output_norm.dim() != m.n_outputs() {
            return Err(Error::Config(
                "normalisation widths do not match the network".into(),
            ));
        }
        m.params = params;
        m.input_norm = input_norm;
        m.output_norm = output_norm;
        Ok(m)
    }

    /// Number of affine maps `L`.
    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn n_inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn n_outputs(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    /// Offsets of layer `k`'s weights and biases in `params`.
    fn offsets(&self, k: usize) -> (usize, usize) {
        let w = param_count(&self.dims[..=k]);
        (w, w + self.dims[k] * self.dims[k + 1])
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        let (w, b) = self.offsets(k);
        &self.params[w..b]
    }

    pub fn biases(&self, k: usize) -> &[f64] {
        let (_, b) = self.offsets(k);
        &self.params[b..b + self.dims[k + 1]]
    }

    pub fn weights_mut(&mut self, k: usize) -> &mut [f64] {
        let (w, b) = self.offsets(k);
        &mut self.params[w..b]
    }

    pub fn biases_mut(&mut self, k: usize) -> &mut [f64] {
        let (_, b) = self.offsets(k);
        let n = self.dims[k + 1];
        &mut self.params[b..b + n]
    }

    fn weight_mat(&self, k: usize) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(self.weights(k), self.dims[k + 1], self.dims[k])
    }

    /// Column-major `n_inputs × batch` matrix of normalised inputs.
    fn input_matrix(&self, inputs: &[&[f64]]) -> Mat<f64> {
        let mut x = Mat::<f64>::zeros(self.n_inputs(), inputs.len());
        for (j, row) in inputs.iter().enumerate() {
            for (i, v) in self.input_norm.normalize(row).into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        x
    }

    /// Activations of every layer for a batch, input first.
    fn activations(&self, x: Mat<f64>) -> Vec<Mat<f64>> {
        let batch = x.ncols();
        let mut acts = vec![x];
        for k in 0..self.n_layers() {
            let mut z = Mat::<f64>::zeros(self.dims[k + 1], batch);
            matmul(
                z.as_mut(),
                Accum::Replace,
                self.weight_mat(k),
                acts[k].as_ref(),
                1.0,
                Par::Seq,
            );
            let bias = self.biases(k);
            let hidden = k + 1 < self.n_layers();
            for j in 0..batch {
                for (i, b) in bias.iter().enumerate() {
                    let v = z[(i, j)] + b;
                    z[(i, j)] = if hidden { v.tanh() } else { v };
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Network output in normalised target space.
    pub fn forward_raw(&self, x: &[f64]) -> Vec<f64> {
        let out = self.forward_raw_batch(&[x]);
        out.into_iter().next().unwrap_or_default()
    }

    pub fn forward_raw_batch(&self, inputs: &[&[f64]]) -> Vec<Vec<f64>> {
        let acts = self.activations(self.input_matrix(inputs));
        let out = &acts[acts.len() - 1];
        (0..inputs.len())
            .map(|j| (0..out.nrows()).map(|i| out[(i, j)]).collect())
            .collect()
    }

    /// Network output mapped back through the output normalisation.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.output_norm.denormalize(&self.forward_raw(x))
    }

    pub fn forward_batch(&self, inputs: &[&[f64]]) -> Vec<Vec<f64>> {
        self.forward_raw_batch(inputs)
            .into_iter()
            .map(|z| self.output_norm.denormalize(&z))
            .collect()
    }
}

/// Mean over the batch of `||target - forward_raw(x)||²` and its gradient
/// with respect to `m.params`, by reverse-mode differentiation.
pub fn loss_and_grad(m: &Mlp, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() {
        return Err(Error::Empty("loss_and_grad needs a nonempty batch"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::dim("batch targets", inputs.len(), targets.len()));
    }
    if let Some(x) = inputs.iter().find(|x| x.len() != m.n_inputs()) {
        return Err(Error::dim("network input", m.n_inputs(), x.len()));
    }
    if let Some(t) = targets.iter().find(|t| t.len() != m.n_outputs()) {
        return Err(Error::dim("network target", m.n_outputs(), t.len()));
    }
    let batch = inputs.len();
    let acts = m.activations(m.input_matrix(inputs));
    let out = &acts[m.n_layers()];

    let mut loss = 0.0;
    let mut delta = Mat::<f64>::zeros(m.n_outputs(), batch);
    for (j, t) in targets.iter().enumerate() {
        for (i, &tv) in t.iter().enumerate() {
            let r = out[(i, j)] - tv;
            loss += r * r;
            delta[(i, j)] = 2.0 * r / batch as f64;
        }
    }
    loss /= batch as f64;

    let mut grad = vec![0.0; m.params.len()];
    for k in (0..m.n_layers()).rev() {
        let (w_off, b_off) = m.offsets(k);
        let (rows, cols) = (m.dims[k + 1], m.dims[k]);
        {
            let gw = MatMut::from_row_major_slice_mut(&mut grad[w_off..b_off], rows, cols);
            matmul(
                gw,
                Accum::Replace,
                delta.as_ref(),
                acts[k].as_ref().transpose(),
                1.0,
                Par::Seq,
            );
        }
        for i in 0..rows {
            grad[b_off + i] = (0..batch).map(|j| delta[(i, j)]).sum();
        }
        if k > 0 {
            let mut prev = Mat::<f64>::zeros(cols, batch);
            matmul(
                prev.as_mut(),
                Accum::Replace,
                m.weight_mat(k).transpose(),
                delta.as_ref(),
                1.0,
                Par::Seq,
            );
            let a = &acts[k];
            for j in 0..batch {
                for i in 0..cols {
                    let t = a[(i, j)];
                    prev[(i, j)] *= 1.0 - t * t;
                }
            }
            delta = prev;
        }
    }
    Ok((loss, grad))
}
