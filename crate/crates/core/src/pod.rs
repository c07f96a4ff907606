//! Empirical proper orthogonal decomposition in the X inner product.
//!
//! With `M = L Lᵀ` the bidiagonal Cholesky factorisation of the Gram matrix,
//! the singular pairs of `Lᵀ S / sqrt(N)` give `σ_i` and the X-orthonormal
//! modes `ζ_i = L⁻ᵀ u_i`. These coincide with the eigenpairs of the N × N
//! correlation matrix `C = (1/N) S* M S`, which is also exposed.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::problem::{GramMatrix, ModelProblem, ModelProblemConfig, SolutionVector};
use crate::qmc::{ParamPoint, RateConfig};
use crate::{Error, Result};

/// Singular values at or below this fraction of `σ_1` are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Galerkin solutions stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub params: Vec<ParamPoint>,
    pub n_dof: usize,
    /// Column-major `n_dof × N` coefficient matrix.
    pub data: Vec<Complex64>,
    pub problem_meta: Option<ModelProblemConfig>,
    pub gram_id: String,
}

impl SnapshotSet {
    pub fn new(
        params: Vec<ParamPoint>,
        n_dof: usize,
        data: Vec<Complex64>,
        problem_meta: Option<ModelProblemConfig>,
        gram_id: impl Into<String>,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Empty("snapshot set needs at least one sample"));
        }
        let s = params[0].dim();
        if let Some(p) = params.iter().find(|p| p.dim() != s) {
            return Err(Error::dim("snapshot parameters", s, p.dim()));
        }
        if data.len() != n_dof * params.len() {
            return Err(Error::dim(
                "snapshot matrix",
                n_dof * params.len(),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("snapshot matrix".into()));
        }
        Ok(SnapshotSet {
            params,
            n_dof,
            data,
            problem_meta,
            gram_id: gram_id.into(),
        })
    }

    pub fn from_columns(
        params: Vec<ParamPoint>,
        columns: &[Vec<Complex64>],
        gram_id: impl Into<String>,
    ) -> Result<Self> {
        let n_dof = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n_dof) {
            return Err(Error::dim("snapshot column", n_dof, c.len()));
        }
        if columns.len() != params.len() {
            return Err(Error::dim("snapshot columns", params.len(), columns.len()));
        }
        let data = columns.concat();
        Self::new(params, n_dof, data, None, gram_id)
    }

    pub fn n_samples(&self) -> usize {
        self.params.len()
    }

    pub fn s(&self) -> usize {
        self.params[0].dim()
    }

    pub fn column(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.n_dof..(n + 1) * self.n_dof]
    }

    /// True when every imaginary part is `+0.0`.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|v| v.im.to_bits() == 0)
    }

    fn as_mat(&self) -> MatRef<'_, Complex64> {
        MatRef::from_column_major_slice(&self.data, self.n_dof, self.n_samples())
    }
}

pub fn assemble_snapshots(problem: &ModelProblem, points: &[ParamPoint]) -> Result<SnapshotSet> {
    assemble_snapshots_with(problem, points, Execution::default())
}

/// Solves the problem at every point; column `n` is `u_h(points[n])`.
pub fn assemble_snapshots_with(
    problem: &ModelProblem,
    points: &[ParamPoint],
    exec: Execution,
) -> Result<SnapshotSet> {
    if points.is_empty() {
        return Err(Error::Empty("snapshot assembly needs parameter points"));
    }
    let sols = problem.solve_many(points, exec)?;
    let data: Vec<Complex64> = sols
        .iter()
        .flat_map(|u| u.coefficients.iter().copied())
        .collect();
    SnapshotSet::new(
        points.to_vec(),
        problem.n_dof(),
        data,
        Some(problem.config().clone()),
        problem.gram().id.clone(),
    )
}

/// How the retained rank `J` was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RankSelection {
    /// Every numerically nonzero mode.
    Full,
    Tolerance(f64),
    Apriori,
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedBasis {
    pub n_dof: usize,
    pub rank: usize,
    /// Column-major `n_dof × rank`, column `i` is `ζ_i` in FEM coefficients.
    pub basis: Vec<Complex64>,
    /// Nonincreasing, `min(n_dof, N)` entries, including discarded modes.
    pub singular_values: Vec<f64>,
    pub selection: RankSelection,
    pub n_samples: usize,
    pub s: usize,
    pub gram_id: String,
}

impl ReducedBasis {
    pub fn column(&self, i: usize) -> &[Complex64] {
        &self.basis[i * self.n_dof..(i + 1) * self.n_dof]
    }

    /// First `j` modes of this basis.
    pub fn truncated(&self, j: usize, selection: RankSelection) -> Result<Self> {
        if j > self.rank {
            return Err(Error::dim("basis truncation", self.rank, j));
        }
        Ok(ReducedBasis {
            rank: j,
            basis: self.basis[..j * self.n_dof].to_vec(),
            selection,
            ..self.clone()
        })
    }

    /// `Σ_{i>j} σ_i²`.
    pub fn tail(&self, j: usize) -> f64 {
        tail_sums(&self.singular_values)[j.min(self.singular_values.len())]
    }

    /// `max |Φ* M Φ - I|`.
    pub fn orthonormality_defect(&self, g: &GramMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.rank {
            let mz = g.apply(self.column(j));
            for i in 0..self.rank {
                let ip: Complex64 = self
                    .column(i)
                    .iter()
                    .zip(&mz)
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }

    /// Content hash used to tie model files to the basis they were trained on.
    pub fn fingerprint(&self) -> String {
        let mut h = Fnv::new();
        h.write_u64(self.n_dof as u64);
        h.write_u64(self.rank as u64);
        for v in &self.basis {
            h.write_u64(v.re.to_bits());
            h.write_u64(v.im.to_bits());
        }
        for v in &self.singular_values {
            h.write_u64(v.to_bits());
        }
        format!("{:016x}", h.0)
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodDiagnostics {
    /// `ε_{h,s,N}` of the returned basis: `Σ_{i>rank} σ_i²`.
    pub empirical_error: f64,
    /// Entry `j` is `Σ_{i>j} σ_i²`, for `j = 0..=len(σ)`.
    pub tail_per_rank: Vec<f64>,
    /// Set when the snapshot matrix is numerically zero.
    pub degenerate: bool,
}

/// Suffix sums of squares, accumulated from the small end.
fn tail_sums(sigma: &[f64]) -> Vec<f64> {
    let mut tails = vec![0.0; sigma.len() + 1];
    for i in (0..sigma.len()).rev() {
        tails[i] = tails[i + 1] + sigma[i] * sigma[i];
    }
    tails
}

fn apply_gram_columns(snap: &SnapshotSet, g: &GramMatrix) -> Vec<Complex64> {
    (0..snap.n_samples())
        .flat_map(|n| g.apply(snap.column(n)))
        .collect()
}

/// `C = (1/N) S* M S`.
pub fn correlation_matrix(snap: &SnapshotSet, g: &GramMatrix) -> Result<Mat<Complex64>> {
    if g.dim() != snap.n_dof {
        return Err(Error::dim("correlation matrix gram", snap.n_dof, g.dim()));
    }
    let n = snap.n_samples();
    let ms = apply_gram_columns(snap, g);
    let ms = MatRef::from_column_major_slice(&ms, snap.n_dof, n);
    let mut c = Mat::<Complex64>::zeros(n, n);
    matmul(
        c.as_mut(),
        Accum::Replace,
        snap.as_mat().adjoint(),
        ms,
        Complex64::new(1.0 / n as f64, 0.0),
        Par::Seq,
    );
    Ok(c)
}

/// Eigenvalues of the correlation matrix `C`, largest first.
pub fn correlation_eigenvalues(snap: &SnapshotSet, g: &GramMatrix) -> Result<Vec<f64>> {
    let c = correlation_matrix(snap, g)?;
    let evd = c
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::Eigen)?;
    let n = snap.n_samples();
    Ok((0..n).rev().map(|i| evd.S()[i].re).collect())
}

/// Lower bidiagonal Cholesky factor `M = L Lᵀ` of the Gram matrix, returned as
/// its diagonal and subdiagonal.
fn gram_cholesky(g: &GramMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = g.dim();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    for i in 0..n {
        let pivot = g.diag[i] - if i > 0 { l[i - 1] * l[i - 1] } else { 0.0 };
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(Error::Config("gram matrix is not positive definite".into()));
        }
        d[i] = pivot.sqrt();
        if i + 1 < n {
            l[i] = g.off[i] / d[i];
        }
    }
    Ok((d, l))
}

/// `Lᵀ v` for the bidiagonal factor.
fn apply_lt(d: &[f64], l: &[f64], v: &[Complex64]) -> Vec<Complex64> {
    (0..v.len())
        .map(|i| {
            let next = if i + 1 < v.len() {
                l[i] * v[i + 1]
            } else {
                ZERO
            };
            d[i] * v[i] + next
        })
        .collect()
}

/// Solves `Lᵀ x = u` by back substitution.
fn solve_lt(d: &[f64], l: &[f64], u: &[Complex64]) -> Vec<Complex64> {
    let n = u.len();
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let next = if i + 1 < n { l[i] * x[i + 1] } else { ZERO };
        x[i] = (u[i] - next) / d[i];
    }
    x
}

/// Thin SVD of the weighted snapshot matrix `Lᵀ S / sqrt(N)`: singular values
/// in nonincreasing order with the left and right singular vectors as
/// complex columns. Real snapshots take the real path.
struct WeightedSvd {
    sigma: Vec<f64>,
    left: Vec<Vec<Complex64>>,
    right: Vec<Vec<Complex64>>,
}

fn columns_of<T: Copy>(
    m: MatRef<'_, T>,
    count: usize,
    lift: impl Fn(T) -> Complex64,
) -> Vec<Vec<Complex64>> {
    (0..count)
        .map(|j| (0..m.nrows()).map(|i| lift(m[(i, j)])).collect())
        .collect()
}

fn weighted_svd(snap: &SnapshotSet, d: &[f64], l: &[f64]) -> Result<WeightedSvd> {
    let n = snap.n_samples();
    let scale = 1.0 / (n as f64).sqrt();
    let weighted: Vec<Complex64> = (0..n)
        .flat_map(|k| apply_lt(d, l, snap.column(k)))
        .map(|z| z * scale)
        .collect();
    let k = n.min(snap.n_dof);
    if snap.is_real() {
        let re: Vec<f64> = weighted.iter().map(|z| z.re).collect();
        let svd = MatRef::from_column_major_slice(&re, snap.n_dof, n)
            .thin_svd()
            .map_err(|_| Error::Eigen)?;
        let lift = |x: f64| Complex64::new(x, 0.0);
        Ok(WeightedSvd {
            sigma: (0..k).map(|i| svd.S()[i]).collect(),
            left: columns_of(svd.U(), k, lift),
            right: columns_of(svd.V(), k, lift),
        })
    } else {
        let svd = MatRef::from_column_major_slice(&weighted, snap.n_dof, n)
            .thin_svd()
            .map_err(|_| Error::Eigen)?;
        Ok(WeightedSvd {
            sigma: (0..k).map(|i| svd.S()[i].re).collect(),
            left: columns_of(svd.U(), k, |z| z),
            right: columns_of(svd.V(), k, |z| z),
        })
    }
}

/// Rotation that makes the largest-magnitude entry of `v` real and positive.
fn phase_of(v: &[Complex64]) -> Complex64 {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() {
            best = i;
        }
    }
    let pivot = v.get(best).copied().unwrap_or(ZERO);
    let r = pivot.norm();
    if r > 0.0 {
        pivot.conj() / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Full-rank POD basis of the snapshots together with its singular values.
///
/// The singular values of `Lᵀ S / sqrt(N)` are those of the correlation
/// matrix route (`λ_i(C) = σ_i²`), but are resolved down to round-off
/// relative to `σ_1` instead of its square root. The right singular vectors
/// are the eigenvectors `ψ_i` of `C`, and `ζ_i = L⁻ᵀ u_i = S ψ_i / (σ_i sqrt(N))`.
pub fn pod_basis(snap: &SnapshotSet, g: &GramMatrix) -> Result<(ReducedBasis, PodDiagnostics)> {
    if g.dim() != snap.n_dof {
        return Err(Error::dim("pod gram", snap.n_dof, g.dim()));
    }
    let n = snap.n_samples();
    let (d, l) = gram_cholesky(g)?;
    let svd = weighted_svd(snap, &d, &l)?;
    let sigma = svd.sigma;
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma
        .iter()
        .take_while(|&&s| sigma_max > 0.0 && s > RANK_CUTOFF * sigma_max)
        .count();

    let columns: Vec<Vec<Complex64>> = (0..rank)
        .map(|i| {
            let rot = phase_of(&svd.right[i]);
            let u: Vec<Complex64> = svd.left[i].iter().map(|z| z * rot).collect();
            solve_lt(&d, &l, &u)
        })
        .collect();
    let tails = tail_sums(&sigma);
    let basis = ReducedBasis {
        n_dof: snap.n_dof,
        rank,
        basis: columns.concat(),
        singular_values: sigma,
        selection: RankSelection::Full,
        n_samples: n,
        s: snap.s(),
        gram_id: g.id.clone(),
    };
    let diagnostics = PodDiagnostics {
        empirical_error: tails[rank],
        tail_per_rank: tails,
        degenerate: rank == 0,
    };
    if diagnostics.degenerate {
        log::warn!("snapshot matrix is numerically zero; the reduced basis is empty");
    }
    Ok((basis, diagnostics))
}

/// Smallest `J` with `Σ_{i>J} σ_i² <= τ²`, capped at the basis rank.
pub fn rank_by_tolerance(basis: &ReducedBasis, tau: f64) -> usize {
    let tails = tail_sums(&basis.singular_values);
    (0..=basis.rank)
        .find(|&j| tails[j] <= tau * tau)
        .unwrap_or(basis.rank)
}

/// The a-priori POD tolerance `τ = 1/(100 sqrt(N))`.
pub fn default_tolerance(n: usize) -> f64 {
    1.0 / (100.0 * (n as f64).sqrt())
}

/// `J = ceil(N^(α / (2 (1/p - 1))))`.
pub fn rank_apriori(n: usize, rates: &RateConfig) -> Result<usize> {
    rates.validate()?;
    if n == 0 {
        return Err(Error::Config("rank_apriori: N must be at least 1".into()));
    }
    let exponent = rates.alpha / (2.0 * (1.0 / rates.p - 1.0));
    Ok(((n as f64).powf(exponent).ceil() as usize).max(1))
}

/// `(Φ* M u)_i = <u, ζ_i>_X`.
pub fn project_coeffs(
    u: &[Complex64],
    basis: &ReducedBasis,
    g: &GramMatrix,
) -> Result<Vec<Complex64>> {
    if u.len() != basis.n_dof {
        return Err(Error::dim("projection", basis.n_dof, u.len()));
    }
    if g.dim() != basis.n_dof {
        return Err(Error::dim("projection gram", basis.n_dof, g.dim()));
    }
    let mu = g.apply(u);
    Ok((0..basis.rank)
        .map(|i| {
            basis
                .column(i)
                .iter()
                .zip(&mu)
                .map(|(z, w)| z.conj() * w)
                .sum()
        })
        .collect())
}

/// Real and imaginary parts stacked as `(Re c, Im c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoefficients {
    pub values: Vec<f64>,
}

impl ReducedCoefficients {
    pub fn rank(&self) -> usize {
        self.values.len() / 2
    }

    pub fn merge(&self) -> Vec<Complex64> {
        let j = self.rank();
        (0..j)
            .map(|i| Complex64::new(self.values[i], self.values[i + j]))
            .collect()
    }
}

pub fn split_real_imag(c: &[Complex64]) -> ReducedCoefficients {
    let mut values: Vec<f64> = c.iter().map(|z| z.re).collect();
    values.extend(c.iter().map(|z| z.im));
    ReducedCoefficients { values }
}

/// `Σ_i (a_i + i b_i) ζ_i`.
pub fn reconstruct(rc: &ReducedCoefficients, basis: &ReducedBasis) -> Result<Vec<Complex64>> {
    if rc.values.len() != 2 * basis.rank {
        return Err(Error::dim(
            "reconstruction",
            2 * basis.rank,
            rc.values.len(),
        ));
    }
    let mut out = vec![ZERO; basis.n_dof];
    for (i, c) in rc.merge().into_iter().enumerate() {
        for (o, z) in out.iter_mut().zip(basis.column(i)) {
            *o += c * z;
        }
    }
    Ok(out)
}

/// `||u - P u||²_X` for the X-orthogonal projection onto the basis span.
pub fn projection_error_sqr(u: &[Complex64], basis: &ReducedBasis, g: &GramMatrix) -> Result<f64> {
    let coeffs = project_coeffs(u, basis, g)?;
    let pu = reconstruct(&split_real_imag(&coeffs), basis)?;
    let r: Vec<Complex64> = u.iter().zip(&pu).map(|(a, b)| a - b).collect();
    Ok(g.norm_sqr(&r))
}

/// `(1/N) Σ_n ||u_n - P u_n||²_X` evaluated by direct projection.
pub fn empirical_pod_error(
    snap: &SnapshotSet,
    basis: &ReducedBasis,
    g: &GramMatrix,
) -> Result<f64> {
    let errs = exec::try_map_indices(snap.n_samples(), Execution::default(), |n| {
        projection_error_sqr(snap.column(n), basis, g)
    })?;
    Ok(errs.iter().sum::<f64>() / snap.n_samples() as f64)
}

/// Regression targets: split projected coefficients of every snapshot.
pub fn project_snapshots(
    snap: &SnapshotSet,
    basis: &ReducedBasis,
    g: &GramMatrix,
) -> Result<Vec<ReducedCoefficients>> {
    (0..snap.n_samples())
        .map(|n| Ok(split_real_imag(&project_coeffs(snap.column(n), basis, g)?)))
        .collect()
}

/// Projection of a single solution, split into real and imaginary parts.
pub fn project_solution(
    u: &SolutionVector,
    basis: &ReducedBasis,
    g: &GramMatrix,
) -> Result<ReducedCoefficients> {
    Ok(split_real_imag(&project_coeffs(&u.coefficients, basis, g)?))
}
