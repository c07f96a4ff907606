//! Parametric variational problems on `(0,1)` discretised with P1 elements.
//!
//! Two model problems are built in. Both use the H¹₀ energy product
//! `<u,v>_X = ∫ u' conj(v')` and the load `f = 1`:
//!
//! * `RealDiffusion`: `-(a(x,y) u')' = 1` with `a = 1 + Σ y_j ψ_j`,
//! * `ComplexReaction`: `-u'' + c (1 + iη + Σ y_j ψ_j) u = 1`,
//!
//! where `ψ_j(x) = A j^(-θ) sin(jπx)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::qmc::ParamPoint;
use crate::tridiag::Tridiagonal;
use crate::{Error, Result};

/// Affine expansion `ψ_j(x) = A j^(-θ) sin(jπx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionField {
    pub theta: f64,
    pub amplitude: f64,
    pub n_modes: usize,
}

impl ExpansionField {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 1.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!(
                "field: theta must exceed 1, got {}",
                self.theta
            )));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "field: amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.n_modes == 0 {
            return Err(Error::Config("field: n_modes must be at least 1".into()));
        }
        Ok(())
    }

    /// Mode amplitude `A j^(-θ)` for `j >= 1`.
    pub fn mode_amplitude(&self, j: usize) -> f64 {
        self.amplitude * (j as f64).powf(-self.theta)
    }

    pub fn mode(&self, j: usize, x: f64) -> f64 {
        self.mode_amplitude(j) * (j as f64 * PI * x).sin()
    }

    /// `A Σ_{j≥1} j^(-θ)`, an upper bound for `sup_x |Σ y_j ψ_j(x)|` over the
    /// whole cube, independent of how many modes are active.
    pub fn sup_bound(&self) -> f64 {
        self.amplitude * zeta(self.theta)
    }
}

/// Riemann zeta for real `s > 1` by Euler–Maclaurin summation.
fn zeta(s: f64) -> f64 {
    const K: usize = 1000;
    let head: f64 = (1..=K).map(|j| (j as f64).powf(-s)).sum();
    let k = K as f64;
    head + k.powf(1.0 - s) / (s - 1.0) - 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
}

/// Summability exponent of the parametric regularity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolomorphyProfile {
    pub p: f64,
}

impl HolomorphyProfile {
    /// Predicted decay exponent of the dimension-truncation error in `s`.
    pub fn rate_truncation(&self) -> f64 {
        1.0 / self.p - 1.0
    }

    /// Predicted decay exponent of the POD error in `J`.
    pub fn rate_pod(&self) -> f64 {
        1.0 / self.p - 1.0
    }

    pub fn validate(&self, field: &ExpansionField) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!(
                "profile: p must lie in (0,1), got {}",
                self.p
            )));
        }
        // j^(-θ) ∈ ℓ^p needs pθ > 1; the borderline pθ = 1 is accepted because
        // the reference setting θ = 9/4, p = 4/9 sits exactly on it.
        if self.p * field.theta < 1.0 - 1e-12 {
            return Err(Error::Config(format!(
                "profile: p = {} is below 1/theta = {}",
                self.p,
                1.0 / field.theta
            )));
        }
        Ok(())
    }
}

/// Uniform P1 space on `(0,1)` with `n_dof` interior nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FemSpace {
    pub n_dof: usize,
}

impl FemSpace {
    pub fn new(n_dof: usize) -> Self {
        FemSpace { n_dof }
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_dof as f64 + 1.0)
    }

    /// Coordinates of the interior nodes.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n_dof).map(|i| i as f64 * h).collect()
    }

    fn n_elements(&self) -> usize {
        self.n_dof + 1
    }
}

/// Symmetric tridiagonal Gram matrix of the X inner product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub id: String,
}

impl GramMatrix {
    pub fn from_bands(diag: Vec<f64>, off: Vec<f64>, id: impl Into<String>) -> Result<Self> {
        if off.len() + 1 != diag.len().max(1) {
            return Err(Error::dim(
                "gram bands",
                diag.len().saturating_sub(1),
                off.len(),
            ));
        }
        if diag.iter().any(|&d| d.is_nan() || d <= 0.0) {
            return Err(Error::Config("gram: diagonal must be positive".into()));
        }
        Ok(GramMatrix {
            diag,
            off,
            id: id.into(),
        })
    }

    pub fn identity(n: usize) -> Self {
        GramMatrix {
            diag: vec![1.0; n],
            off: vec![0.0; n.saturating_sub(1)],
            id: format!("identity:n={n}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.off[i]
        } else if j + 1 == i {
            self.off[j]
        } else {
            0.0
        }
    }

    /// `M v`, assuming `v.len() == self.dim()`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = v[i] * self.diag[i];
                if i > 0 {
                    acc += v[i - 1] * self.off[i - 1];
                }
                if i + 1 < n {
                    acc += v[i + 1] * self.off[i];
                }
                acc
            })
            .collect()
    }

    /// `u* M v`, assuming matching lengths.
    pub fn inner(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let mv = self.apply(v);
        u.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self, v: &[Complex64]) -> f64 {
        self.inner(v, v).re.max(0.0)
    }
}

/// Stiffness matrix of the H¹₀ product: `2/h` on the diagonal, `-1/h` beside it.
pub fn assemble_gram(fem: &FemSpace) -> GramMatrix {
    let h = fem.h();
    GramMatrix {
        diag: vec![2.0 / h; fem.n_dof],
        off: vec![-1.0 / h; fem.n_dof.saturating_sub(1)],
        id: format!("h10-p1-uniform:n_dof={}", fem.n_dof),
    }
}

/// `sqrt(v* M v)`.
pub fn x_norm(g: &GramMatrix, v: &[Complex64]) -> Result<f64> {
    if v.len() != g.dim() {
        return Err(Error::dim("x_norm", g.dim(), v.len()));
    }
    Ok(g.norm_sqr(v).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionVector {
    pub coefficients: Vec<Complex64>,
    pub param: ParamPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    RealDiffusion,
    ComplexReaction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelProblemConfig {
    pub kind: ProblemKind,
    pub fem: FemSpace,
    /// Number of active parameters.
    pub s: usize,
    pub field: ExpansionField,
    pub profile: HolomorphyProfile,
    /// Absorption `η` of the complex reaction term.
    pub absorption: f64,
    /// Scale `c` of the whole reaction term. Zero turns `ComplexReaction`
    /// into the Poisson problem.
    pub reaction: f64,
}

impl ModelProblemConfig {
    pub fn real_diffusion(n_dof: usize, s: usize) -> Self {
        ModelProblemConfig {
            kind: ProblemKind::RealDiffusion,
            fem: FemSpace::new(n_dof),
            s,
            field: ExpansionField {
                theta: 2.25,
                amplitude: 0.4,
                n_modes: s.max(1),
            },
            profile: HolomorphyProfile { p: 4.0 / 9.0 },
            absorption: 0.0,
            reaction: 0.0,
        }
    }

    pub fn complex_reaction(n_dof: usize, s: usize) -> Self {
        ModelProblemConfig {
            kind: ProblemKind::ComplexReaction,
            fem: FemSpace::new(n_dof),
            s,
            field: ExpansionField {
                theta: 2.25,
                amplitude: 0.3,
                n_modes: s.max(1),
            },
            profile: HolomorphyProfile { p: 4.0 / 9.0 },
            absorption: 1.0,
            reaction: 1.0,
        }
    }

    /// Remaining ellipticity after subtracting the worst-case perturbation.
    /// Must be positive for a valid configuration.
    pub fn coercivity_margin(&self) -> f64 {
        match self.kind {
            ProblemKind::RealDiffusion => 1.0 - self.field.sup_bound(),
            // the reaction real part stays >= 1/2 when A ζ(θ) <= 1/2
            ProblemKind::ComplexReaction => 0.5 - self.field.sup_bound() + f64::MIN_POSITIVE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fem.n_dof < 2 {
            return Err(Error::Config(format!(
                "problem: n_dof must be at least 2, got {}",
                self.fem.n_dof
            )));
        }
        self.field.validate()?;
        self.profile.validate(&self.field)?;
        if self.field.n_modes < self.s {
            return Err(Error::Config(format!(
                "problem: n_modes = {} is below s = {}",
                self.field.n_modes, self.s
            )));
        }
        if !(self.absorption >= 0.0 && self.absorption.is_finite()) {
            return Err(Error::Config("problem: absorption must be >= 0".into()));
        }
        if !(self.reaction >= 0.0 && self.reaction.is_finite()) {
            return Err(Error::Config("problem: reaction must be >= 0".into()));
        }
        if self.coercivity_margin() <= 0.0 {
            return Err(Error::Coercivity(format!(
                "A·ζ(θ) = {:.6} leaves no margin for {:?}",
                self.field.sup_bound(),
                self.kind
            )));
        }
        Ok(())
    }

    /// Same problem on a mesh refined by an integer factor.
    pub fn refined(&self, factor: usize) -> Self {
        let mut cfg = self.clone();
        cfg.fem.n_dof = factor * (self.fem.n_dof + 1) - 1;
        cfg
    }
}

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// A validated model problem with its per-element mode integrals cached.
#[derive(Clone, Debug)]
pub struct ModelProblem {
    cfg: ModelProblemConfig,
    gram: GramMatrix,
    /// `[j][e]`: `∫_e ψ_{j+1}`.
    diffusion_table: Vec<Vec<f64>>,
    /// `[j][e]`: `∫_e ψ_{j+1} φ_l φ_l`, `∫_e ψ_{j+1} φ_l φ_r`, `∫_e ψ_{j+1} φ_r φ_r`.
    reaction_table: Vec<Vec<[f64; 3]>>,
}

impl ModelProblem {
    pub fn new(cfg: &ModelProblemConfig) -> Result<Self> {
        cfg.validate()?;
        let fem = cfg.fem;
        let h = fem.h();
        let n_el = fem.n_elements();
        let mut diffusion_table = Vec::new();
        let mut reaction_table = Vec::new();
        for j in 1..=cfg.s {
            let amp = cfg.field.mode_amplitude(j);
            let k = j as f64 * PI;
            match cfg.kind {
                ProblemKind::RealDiffusion => {
                    diffusion_table.push(
                        (0..n_el)
                            .map(|e| {
                                let mid = (e as f64 + 0.5) * h;
                                // cos(k x0) - cos(k x1) without cancellation
                                amp * 2.0 * (k * mid).sin() * (0.5 * k * h).sin() / k
                            })
                            .collect(),
                    );
                }
                ProblemKind::ComplexReaction => {
                    reaction_table.push(
                        (0..n_el)
                            .map(|e| {
                                let mid = (e as f64 + 0.5) * h;
                                let mut acc = [0.0; 3];
                                for (t, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                                    let x = mid + 0.5 * h * t;
                                    let psi = amp * (k * x).sin() * w * 0.5 * h;
                                    let (l, r) = (0.5 * (1.0 - t), 0.5 * (1.0 + t));
                                    acc[0] += psi * l * l;
                                    acc[1] += psi * l * r;
                                    acc[2] += psi * r * r;
                                }
                                acc
                            })
                            .collect(),
                    );
                }
            }
        }
        Ok(ModelProblem {
            cfg: cfg.clone(),
            gram: assemble_gram(&fem),
            diffusion_table,
            reaction_table,
        })
    }

    pub fn config(&self) -> &ModelProblemConfig {
        &self.cfg
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn n_dof(&self) -> usize {
        self.cfg.fem.n_dof
    }

    /// Load vector of `f = 1`: `∫ φ_i = h`.
    pub fn load(&self) -> Vec<Complex64> {
        vec![Complex64::new(self.cfg.fem.h(), 0.0); self.n_dof()]
    }

    /// Galerkin matrix `A_ij = a(φ_j, φ_i; y)`.
    pub fn system_matrix(&self, y: &ParamPoint) -> Result<Tridiagonal> {
        if y.dim() != self.cfg.s {
            return Err(Error::dim("parameter point", self.cfg.s, y.dim()));
        }
        let n = self.n_dof();
        let h = self.cfg.fem.h();
        let yc = y.coords();
        let mut a = Tridiagonal::zeros(n);
        for e in 0..self.cfg.fem.n_elements() {
            let (stiff, m_ll, m_lr, m_rr) = match self.cfg.kind {
                ProblemKind::RealDiffusion => {
                    let integral: f64 = h + yc
                        .iter()
                        .zip(&self.diffusion_table)
                        .map(|(yj, row)| yj * row[e])
                        .sum::<f64>();
                    let zero = Complex64::new(0.0, 0.0);
                    (integral / (h * h), zero, zero, zero)
                }
                ProblemKind::ComplexReaction => {
                    let c = self.cfg.reaction;
                    let base = Complex64::new(c, c * self.cfg.absorption);
                    let mut pert = [0.0; 3];
                    for (yj, row) in yc.iter().zip(&self.reaction_table) {
                        for (p, r) in pert.iter_mut().zip(row[e]) {
                            *p += yj * r;
                        }
                    }
                    (
                        1.0 / h,
                        base * (h / 3.0) + c * pert[0],
                        base * (h / 6.0) + c * pert[1],
                        base * (h / 3.0) + c * pert[2],
                    )
                }
            };
            // element e joins nodes e and e+1; dof i is node i+1
            let left = e.checked_sub(1);
            let right = (e < n).then_some(e);
            if let Some(l) = left {
                a.diag[l] += stiff + m_ll;
            }
            if let Some(r) = right {
                a.diag[r] += stiff + m_rr;
            }
            if let (Some(l), Some(_)) = (left, right) {
                a.upper[l] += m_lr - stiff;
                a.lower[l] += m_lr - stiff;
            }
        }
        if a.diag
            .iter()
            .chain(&a.upper)
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite("system assembly".into()));
        }
        Ok(a)
    }

    pub fn solve(&self, y: &ParamPoint) -> Result<SolutionVector> {
        let a = self.system_matrix(y)?;
        let coefficients = a.solve(&self.load())?;
        Ok(SolutionVector {
            coefficients,
            param: y.clone(),
        })
    }

    /// Solution with every coordinate beyond `s_sub` set to zero.
    pub fn solve_truncated(&self, y: &ParamPoint, s_sub: usize) -> Result<SolutionVector> {
        if s_sub > y.dim() {
            return Err(Error::dim("truncation dimension", y.dim(), s_sub));
        }
        self.solve(&y.truncated(s_sub))
    }

    pub fn solve_many(
        &self,
        points: &[ParamPoint],
        exec: Execution,
    ) -> Result<Vec<SolutionVector>> {
        exec::try_map_indices(points.len(), exec, |i| self.solve(&points[i]))
    }
}

pub fn solve(cfg: &ModelProblemConfig, y: &ParamPoint) -> Result<SolutionVector> {
    ModelProblem::new(cfg)?.solve(y)
}

pub fn solve_truncated(
    cfg: &ModelProblemConfig,
    y: &ParamPoint,
    s_sub: usize,
) -> Result<SolutionVector> {
    ModelProblem::new(cfg)?.solve_truncated(y, s_sub)
}

/// Piecewise-linear interpolation of a coarse solution onto the mesh refined
/// by `factor`.
pub fn inject(coarse: &[Complex64], factor: usize) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let node = |k: usize| {
        if k == 0 || k > coarse.len() {
            zero
        } else {
            coarse[k - 1]
        }
    };
    let n_fine = factor * (coarse.len() + 1) - 1;
    (1..=n_fine)
        .map(|m| {
            let k = m / factor;
            let t = (m % factor) as f64 / factor as f64;
            node(k) * (1.0 - t) + node(k + 1) * t
        })
        .collect()
}

/// `max_y ||u_{h/r}(y) - I u_h(y)||_X` over the given points, a computable
/// stand-in for the Galerkin best-approximation error.
pub fn galerkin_error_probe(
    cfg: &ModelProblemConfig,
    points: &[ParamPoint],
    refinement: usize,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("galerkin_error_probe needs parameter points"));
    }
    if refinement == 0 {
        return Err(Error::Config("refinement factor must be at least 1".into()));
    }
    let coarse = ModelProblem::new(cfg)?;
    let fine = ModelProblem::new(&cfg.refined(refinement))?;
    let errs = exec::try_map_indices(points.len(), Execution::default(), |i| {
        let uc = coarse.solve(&points[i])?;
        let uf = fine.solve(&points[i])?;
        let diff: Vec<Complex64> = uf
            .coefficients
            .iter()
            .zip(inject(&uc.coefficients, refinement))
            .map(|(a, b)| a - b)
            .collect();
        x_norm(fine.gram(), &diff)
    })?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmc::{parameter_points, QmcConfig};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gram_by_hand() {
        let g = assemble_gram(&FemSpace::new(2));
        assert!((g.diag[0] - 6.0).abs() < 1e-14 && (g.diag[1] - 6.0).abs() < 1e-14);
        assert!((g.off[0] + 3.0).abs() < 1e-14);
        let g1 = assemble_gram(&FemSpace::new(1));
        assert_eq!(g1.diag, vec![4.0]);
        assert!(g1.off.is_empty());
        let g = assemble_gram(&FemSpace::new(17));
        for i in 0..17 {
            for j in 0..17 {
                assert_eq!(g.entry(i, j), g.entry(j, i));
            }
        }
    }

    #[test]
    fn x_norm_cases() {
        let g1 = assemble_gram(&FemSpace::new(1));
        assert_eq!(x_norm(&g1, &[c(1.0)]).unwrap(), 2.0);
        let g = assemble_gram(&FemSpace::new(5));
        assert_eq!(x_norm(&g, &[c(0.0); 5]).unwrap(), 0.0);
        let v: Vec<Complex64> = (0..5)
            .map(|i| Complex64::new(i as f64, 1.0 - i as f64))
            .collect();
        let iv: Vec<Complex64> = v.iter().map(|z| z * Complex64::i()).collect();
        assert!((x_norm(&g, &v).unwrap() - x_norm(&g, &iv).unwrap()).abs() < 1e-12);
        assert!(matches!(x_norm(&g, &v[..3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn poisson_is_nodally_exact() {
        let cfg = ModelProblemConfig::real_diffusion(31, 4);
        let p = ModelProblem::new(&cfg).unwrap();
        let u = p.solve(&ParamPoint::zeros(4)).unwrap();
        for (x, v) in cfg.fem.nodes().iter().zip(&u.coefficients) {
            assert!((v.re - x * (1.0 - x) / 2.0).abs() < 1e-14);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn reaction_switched_off_is_poisson() {
        let mut cfg = ModelProblemConfig::complex_reaction(31, 4);
        cfg.absorption = 0.0;
        cfg.reaction = 0.0;
        let u = solve(&cfg, &ParamPoint::zeros(4)).unwrap();
        for (x, v) in cfg.fem.nodes().iter().zip(&u.coefficients) {
            assert!((v.re - x * (1.0 - x) / 2.0).abs() < 1e-14);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn opposite_parameters_give_distinct_solutions() {
        let cfg = ModelProblemConfig::real_diffusion(64, 1);
        let p = ModelProblem::new(&cfg).unwrap();
        let y = ParamPoint::new(vec![0.7]).unwrap();
        let my = ParamPoint::new(vec![-0.7]).unwrap();
        let a = p.solve(&y).unwrap().coefficients;
        let b = p.solve(&my).unwrap().coefficients;
        let d: Vec<Complex64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
        assert!(x_norm(p.gram(), &d).unwrap() > 1e-3);
    }

    #[test]
    fn residual_and_coercivity() {
        for cfg in [
            ModelProblemConfig::real_diffusion(200, 16),
            ModelProblemConfig::complex_reaction(200, 16),
        ] {
            let p = ModelProblem::new(&cfg).unwrap();
            for y in parameter_points(&QmcConfig::new(16, 20)).unwrap() {
                let a = p.system_matrix(&y).unwrap();
                let u = p.solve(&y).unwrap().coefficients;
                assert!(a.relative_residual(&u, &p.load()) <= 1e-12);
                let au = a.apply(&u);
                let energy: Complex64 = u.iter().zip(&au).map(|(x, z)| x.conj() * z).sum();
                assert!(energy.re > 0.0);
            }
        }
    }

    #[test]
    fn complex_problem_has_imaginary_part() {
        let cfg = ModelProblemConfig::complex_reaction(40, 2);
        let u = solve(&cfg, &ParamPoint::zeros(2)).unwrap();
        assert!(u.coefficients.iter().any(|v| v.im.abs() > 1e-6));
    }

    #[test]
    fn truncated_solves() {
        let cfg = ModelProblemConfig::real_diffusion(64, 8);
        let p = ModelProblem::new(&cfg).unwrap();
        let y = parameter_points(&QmcConfig::new(8, 3))
            .unwrap()
            .pop()
            .unwrap();
        assert_eq!(p.solve_truncated(&y, 8).unwrap(), p.solve(&y).unwrap());
        assert_eq!(
            p.solve_truncated(&y, 0).unwrap().coefficients,
            p.solve(&ParamPoint::zeros(8)).unwrap().coefficients
        );
        let mut head = y.coords()[..4].to_vec();
        head.extend([0.0; 4]);
        assert_eq!(
            p.solve_truncated(&y, 4).unwrap().coefficients,
            p.solve(&ParamPoint::new(head).unwrap())
                .unwrap()
                .coefficients
        );
        assert!(p.solve_truncated(&y, 9).is_err());
    }

    #[test]
    fn invalid_configurations() {
        let mut cfg = ModelProblemConfig::real_diffusion(32, 4);
        cfg.field.amplitude = 0.8;
        assert!(matches!(cfg.validate(), Err(Error::Coercivity(_))));
        let mut cfg = ModelProblemConfig::complex_reaction(32, 4);
        cfg.field.amplitude = 0.4;
        assert!(matches!(cfg.validate(), Err(Error::Coercivity(_))));
        let mut cfg = ModelProblemConfig::real_diffusion(32, 4);
        cfg.field.n_modes = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelProblemConfig::real_diffusion(32, 4);
        cfg.profile.p = 0.3;
        assert!(cfg.validate().is_err());
        assert!(ModelProblemConfig::real_diffusion(1, 4).validate().is_err());
        let p = ModelProblem::new(&ModelProblemConfig::real_diffusion(8, 3)).unwrap();
        assert!(p.solve(&ParamPoint::zeros(2)).is_err());
    }

    #[test]
    fn zeta_matches_known_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-12);
        assert!((zeta(2.25) - 1.460_211_866_158_65).abs() < 1e-12);
    }

    #[test]
    fn injection_identity_and_linearity() {
        let u: Vec<Complex64> = (0..5).map(|i| c(i as f64)).collect();
        assert_eq!(inject(&u, 1), u);
        let fine = inject(&[c(2.0)], 2);
        assert_eq!(fine, vec![c(1.0), c(2.0), c(1.0)]);
    }

    #[test]
    fn probe_is_zero_without_refinement() {
        let cfg = ModelProblemConfig::real_diffusion(16, 2);
        let y = parameter_points(&QmcConfig::new(2, 4)).unwrap();
        assert_eq!(galerkin_error_probe(&cfg, &y, 1).unwrap(), 0.0);
        assert!(galerkin_error_probe(&cfg, &[], 2).is_err());
    }

    #[test]
    fn probe_decreases_under_refinement() {
        let y = parameter_points(&QmcConfig::new(4, 8)).unwrap();
        let probes: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                galerkin_error_probe(&ModelProblemConfig::real_diffusion(n, 4), &y, 2).unwrap()
            })
            .collect();
        assert!(probes[0] > probes[1] && probes[1] > probes[2], "{probes:?}");
    }
}
