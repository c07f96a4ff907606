//! Error estimators for each part of the surrogate error, log-log rate fits,
//! and the N-convergence and truncation studies.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::nn::{self, size_apriori, Mlp, TrainConfig};
use crate::pod::{self, RankSelection, ReducedBasis};
use crate::problem::{x_norm, ModelProblem, ModelProblemConfig};
use crate::qmc::{self, ParamPoint, QmcConfig, RateConfig};
use crate::{Error, Result};

/// Root-mean-square errors over a held-out point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    /// `sqrt(mean ||u_h - P u_h||²_X)`.
    pub pod: f64,
    /// `sqrt(mean |π_proj - π_net|²)` over the 2J real outputs.
    pub coefficients: f64,
    /// `sqrt(mean ||u_h - R(π_net)||²_X)`.
    pub total: f64,
}

fn diff(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().sum::<f64>() / values.len() as f64).sqrt()
}

fn check_basis(problem: &ModelProblem, basis: &ReducedBasis) -> Result<()> {
    if basis.n_dof != problem.n_dof() {
        return Err(Error::dim(
            "basis against problem",
            problem.n_dof(),
            basis.n_dof,
        ));
    }
    Ok(())
}

/// `sqrt((1/N_test) Σ ||u_h(y) - P u_h(y)||²_X)` over the test points.
pub fn pod_generalization_error(
    problem: &ModelProblem,
    basis: &ReducedBasis,
    test_points: &[ParamPoint],
) -> Result<f64> {
    pod_generalization_error_with(problem, basis, test_points, Execution::default())
}

pub fn pod_generalization_error_with(
    problem: &ModelProblem,
    basis: &ReducedBasis,
    test_points: &[ParamPoint],
    exec: Execution,
) -> Result<f64> {
    if test_points.is_empty() {
        return Err(Error::Empty("test points"));
    }
    check_basis(problem, basis)?;
    let g = problem.gram();
    let errs = exec::try_map_indices(test_points.len(), exec, |i| {
        let u = problem.solve(&test_points[i])?;
        pod::projection_error_sqr(&u.coefficients, basis, g)
    })?;
    Ok(rms(&errs))
}

/// `sqrt((1/N_test) Σ ||u_h(y) - R(π_net(y))||²_X)`: the surrogate error
/// against the Galerkin solution.
pub fn surrogate_l2_error(
    model: &Mlp,
    problem: &ModelProblem,
    basis: &ReducedBasis,
    test_points: &[ParamPoint],
) -> Result<f64> {
    Ok(error_breakdown(model, problem, basis, test_points)?.total)
}

/// All three errors from one pass of test solves.
pub fn error_breakdown(
    model: &Mlp,
    problem: &ModelProblem,
    basis: &ReducedBasis,
    test_points: &[ParamPoint],
) -> Result<ErrorBreakdown> {
    error_breakdown_with(model, problem, basis, test_points, Execution::default())
}

pub fn error_breakdown_with(
    model: &Mlp,
    problem: &ModelProblem,
    basis: &ReducedBasis,
    test_points: &[ParamPoint],
    exec: Execution,
) -> Result<ErrorBreakdown> {
    if test_points.is_empty() {
        return Err(Error::Empty("test points"));
    }
    check_basis(problem, basis)?;
    if model.n_outputs() != 2 * basis.rank {
        return Err(Error::dim(
            "model outputs against basis",
            2 * basis.rank,
            model.n_outputs(),
        ));
    }
    let g = problem.gram();
    let parts = exec::try_map_indices(test_points.len(), exec, |i| {
        let y = &test_points[i];
        let u = problem.solve(y)?;
        let exact = pod::project_solution(&u, basis, g)?;
        let pu = pod::reconstruct(&exact, basis)?;
        let pred = nn::predict_coeffs(model, y)?;
        let ru = pod::reconstruct(&pred, basis)?;
        let coeff: f64 = exact
            .values
            .iter()
            .zip(&pred.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok([
            g.norm_sqr(&diff(&u.coefficients, &pu)),
            coeff,
            g.norm_sqr(&diff(&u.coefficients, &ru)),
        ])
    })?;
    let col = |k: usize| rms(&parts.iter().map(|p| p[k]).collect::<Vec<_>>());
    Ok(ErrorBreakdown {
        pod: col(0),
        coefficients: col(1),
        total: col(2),
    })
}

/// Least-squares slope of `log(err)` against `log(n)`. Nonpositive errors are
/// skipped with a warning.
pub fn fit_rate(ns: &[f64], errs: &[f64]) -> Result<f64> {
    if ns.len() != errs.len() {
        return Err(Error::dim("fit_rate", ns.len(), errs.len()));
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .filter(|(n, e)| {
            let ok = **n > 0.0 && **e > 0.0 && e.is_finite();
            if !ok {
                log::warn!("fit_rate: skipping unusable pair ({n}, {e})");
            }
            ok
        })
        .map(|(n, e)| (n.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Insufficient(format!(
            "fit_rate needs at least 3 positive pairs, got {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Insufficient(
            "fit_rate needs distinct abscissae".into(),
        ));
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// `τ = 1/(100 sqrt(N))` on the tail of squared singular values.
    Tolerance,
    /// `J = ceil(N^(α/(2(1/p-1))))`.
    Apriori,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub problem: ModelProblemConfig,
    pub n_grid: Vec<usize>,
    pub rates: RateConfig,
    pub rank_mode: RankMode,
    pub test_set_size: usize,
    /// Halton index of the first test point; defaults to just past the
    /// largest training segment.
    pub test_start_index: Option<u64>,
    /// Network training settings; `None` skips the network stage. The stop
    /// threshold is replaced by `N^(-α)` for every row.
    pub train: Option<TrainConfig>,
    pub record_timings: bool,
}

impl StudyConfig {
    pub fn new(problem: ModelProblemConfig, n_grid: Vec<usize>) -> Self {
        StudyConfig {
            problem,
            n_grid,
            rates: RateConfig::default(),
            rank_mode: RankMode::Tolerance,
            test_set_size: 256,
            test_start_index: None,
            train: None,
            record_timings: true,
        }
    }

    const TRAIN_START: u64 = 1;

    pub fn test_start(&self) -> u64 {
        self.test_start_index.unwrap_or_else(|| {
            Self::TRAIN_START + self.n_grid.iter().copied().max().unwrap_or(0) as u64
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.rates.validate()?;
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::Config("study: n_grid needs positive entries".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "study: n_grid must be strictly increasing".into(),
            ));
        }
        if self.test_set_size == 0 {
            return Err(Error::Config(
                "study: test_set_size must be positive".into(),
            ));
        }
        let max_n = *self.n_grid.last().unwrap_or(&0) as u64;
        let start = self.test_start();
        if start < Self::TRAIN_START + max_n
            && start + self.test_set_size as u64 > Self::TRAIN_START
        {
            return Err(Error::Config(
                "study: test segment overlaps the training segments".into(),
            ));
        }
        if let Some(t) = &self.train {
            t.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub s: usize,
    pub j: usize,
    pub net_n: usize,
    pub width: usize,
    pub hidden_layers: usize,
    pub pod_tail: f64,
    pub pod_gen_err: f64,
    pub nn_train_mse: Option<f64>,
    pub nn_gen_err: Option<f64>,
    pub total_l2_err: Option<f64>,
    pub sample_secs: f64,
    pub pod_secs: f64,
    pub train_secs: f64,
}

impl StudyRow {
    /// Equality on everything except the wall-clock columns.
    pub fn same_results(&self, other: &StudyRow) -> bool {
        let strip = |r: &StudyRow| StudyRow {
            sample_secs: 0.0,
            pod_secs: 0.0,
            train_secs: 0.0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    /// Fitted log-log slopes against N, keyed by CSV column.
    pub slopes: BTreeMap<String, f64>,
}

pub const STUDY_CSV_HEADER: &str = "N,s,J,n,width,hidden_layers,pod_tail,pod_gen_err,nn_train_mse,nn_gen_err,total_l2_err,sample_secs,pod_secs,train_secs";

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(STUDY_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:e},{:e},{},{},{},{:.6},{:.6},{:.6}\n",
                r.n,
                r.s,
                r.j,
                r.net_n,
                r.width,
                r.hidden_layers,
                r.pod_tail,
                r.pod_gen_err,
                opt_field(r.nn_train_mse),
                opt_field(r.nn_gen_err),
                opt_field(r.total_l2_err),
                r.sample_secs,
                r.pod_secs,
                r.train_secs
            ));
        }
        out
    }

    pub fn same_results(&self, other: &StudyReport) -> bool {
        self.slopes == other.slopes
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.same_results(b))
    }
}

type RowField = fn(&StudyRow) -> Option<f64>;

fn secs(t: Instant, record: bool) -> f64 {
    if record {
        t.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn halton_segment(s: usize, n: usize, start: u64) -> Result<Vec<ParamPoint>> {
    qmc::parameter_points(&QmcConfig::new(s, n).with_start(start))
}

/// Runs the sample → POD → network → evaluation pipeline for every N of the
/// grid and fits convergence slopes.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let problem = ModelProblem::new(&cfg.problem)?;
    let g = problem.gram();
    let s = cfg.problem.s;
    let test_points = halton_segment(s, cfg.test_set_size, cfg.test_start())?;
    let mut rows = Vec::with_capacity(cfg.n_grid.len());

    for &n in &cfg.n_grid {
        let t0 = Instant::now();
        let train_points =
            halton_segment(s, n, StudyConfig::TRAIN_START).map_err(|e| e.at_stage("sample", n))?;
        let snap = pod::assemble_snapshots(&problem, &train_points)
            .map_err(|e| e.at_stage("sample", n))?;
        let sample_secs = secs(t0, cfg.record_timings);

        let t0 = Instant::now();
        let (full, _) = pod::pod_basis(&snap, g).map_err(|e| e.at_stage("pod", n))?;
        let (j, selection) = match cfg.rank_mode {
            RankMode::Tolerance => {
                let tau = pod::default_tolerance(n);
                (
                    pod::rank_by_tolerance(&full, tau),
                    RankSelection::Tolerance(tau),
                )
            }
            RankMode::Apriori => {
                let j = pod::rank_apriori(n, &cfg.rates).map_err(|e| e.at_stage("pod", n))?;
                (j.min(full.rank), RankSelection::Apriori)
            }
        };
        let basis = full
            .truncated(j, selection)
            .map_err(|e| e.at_stage("pod", n))?;
        let pod_tail = basis.tail(j);
        let pod_secs = secs(t0, cfg.record_timings);

        let sizing = size_apriori(n, &cfg.rates)?;
        let t0 = Instant::now();
        let (nn_train_mse, nn_gen_err, total_l2_err, pod_gen_err) = match &cfg.train {
            Some(tc) if j > 0 => {
                let targets =
                    pod::project_snapshots(&snap, &basis, g).map_err(|e| e.at_stage("train", n))?;
                let tc = tc.clone().with_sample_threshold(n, cfg.rates.alpha);
                let model = Mlp::init(&sizing.dims(s, 2 * j), tc.seed)?;
                let (model, history) = nn::train(model, &train_points, &targets, &tc)
                    .map_err(|e| e.at_stage("train", n))?;
                let errs = error_breakdown(&model, &problem, &basis, &test_points)
                    .map_err(|e| e.at_stage("eval", n))?;
                (
                    Some(history.final_best()),
                    Some(errs.coefficients),
                    Some(errs.total),
                    errs.pod,
                )
            }
            _ => {
                let e = pod_generalization_error(&problem, &basis, &test_points)
                    .map_err(|e| e.at_stage("eval", n))?;
                (None, None, None, e)
            }
        };
        let train_secs = secs(t0, cfg.record_timings);
        log::info!("N={n}: J={j}, pod_gen_err={pod_gen_err:e}");

        rows.push(StudyRow {
            n,
            s,
            j,
            net_n: sizing.n,
            width: sizing.width,
            hidden_layers: sizing.hidden_layers,
            pod_tail,
            pod_gen_err,
            nn_train_mse,
            nn_gen_err,
            total_l2_err,
            sample_secs,
            pod_secs,
            train_secs,
        });
    }

    let mut slopes = BTreeMap::new();
    if rows.len() >= 3 {
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let columns: [(&str, RowField); 5] = [
            ("pod_tail", |r| Some(r.pod_tail)),
            ("pod_gen_err", |r| Some(r.pod_gen_err)),
            ("nn_train_mse", |r| r.nn_train_mse),
            ("nn_gen_err", |r| r.nn_gen_err),
            ("total_l2_err", |r| r.total_l2_err),
        ];
        for (name, get) in columns {
            let vals: Option<Vec<f64>> = rows.iter().map(get).collect();
            if let Some(vals) = vals {
                if let Ok(slope) = fit_rate(&ns, &vals) {
                    slopes.insert(name.to_string(), slope);
                }
            }
        }
    }
    Ok(StudyReport { rows, slopes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationStudy {
    pub s_values: Vec<usize>,
    /// `max_y ||u_h^(2s') - u_h^(s')||_X` for each `s'`.
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
}

/// Measures the dimension-truncation error on a fixed probe set.
/// `cfg.s` must be at least twice the largest entry of `s_grid`.
pub fn truncation_study(
    cfg: &ModelProblemConfig,
    s_grid: &[usize],
    probe_points: &[ParamPoint],
) -> Result<TruncationStudy> {
    if s_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "truncation study: s_grid must be increasing".into(),
        ));
    }
    if probe_points.is_empty() {
        return Err(Error::Empty("truncation study probe points"));
    }
    if let Some(&top) = s_grid.last() {
        if 2 * top > cfg.s {
            return Err(Error::Config(format!(
                "truncation study: problem s = {} is below 2 × {top}",
                cfg.s
            )));
        }
    }
    let problem = ModelProblem::new(cfg)?;
    let mut errors = Vec::with_capacity(s_grid.len());
    for &sp in s_grid {
        let errs = exec::try_map_indices(probe_points.len(), Execution::default(), |i| {
            let y = probe_points[i].resized(cfg.s);
            let fine = problem.solve_truncated(&y, 2 * sp)?;
            let coarse = problem.solve_truncated(&y, sp)?;
            x_norm(
                problem.gram(),
                &diff(&fine.coefficients, &coarse.coefficients),
            )
        })?;
        errors.push(errs.into_iter().fold(0.0, f64::max));
    }
    let slope = if s_grid.len() >= 3 {
        let xs: Vec<f64> = s_grid.iter().map(|&v| v as f64).collect();
        fit_rate(&xs, &errors).ok()
    } else {
        None
    };
    Ok(TruncationStudy {
        s_values: s_grid.to_vec(),
        errors,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::split_real_imag;

    #[test]
    fn fit_rate_examples() {
        let ns = [4.0, 16.0, 64.0, 256.0];
        let errs: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        assert!((fit_rate(&ns, &errs).unwrap() + 0.5).abs() < 1e-10);
        assert!(fit_rate(&ns, &[2.0; 4]).unwrap().abs() < 1e-12);
        assert!((fit_rate(&[1.0, 4.0, 16.0], &[1.0, 0.25, 0.0625]).unwrap() + 1.0).abs() < 1e-12);
        assert!(fit_rate(&[1.0, 2.0], &[1.0, 0.5]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 4.0], &[1.0, 0.0, 0.25]).is_err());
        // zero entries are skipped, not fatal, when enough remain
        let s = fit_rate(&[1.0, 2.0, 4.0, 8.0], &[1.0, 0.0, 0.25, 0.125]).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
    }

    fn setup(n: usize) -> (ModelProblem, ReducedBasis, Vec<ParamPoint>) {
        let cfg = ModelProblemConfig::real_diffusion(48, 8);
        let problem = ModelProblem::new(&cfg).unwrap();
        let pts = halton_segment(8, n, 1).unwrap();
        let snap = pod::assemble_snapshots(&problem, &pts).unwrap();
        let (basis, _) = pod::pod_basis(&snap, problem.gram()).unwrap();
        (problem, basis, pts)
    }

    #[test]
    fn full_basis_reproduces_training_points() {
        let (problem, basis, pts) = setup(16);
        let e = pod_generalization_error(&problem, &basis, &pts).unwrap();
        assert!(e < 1e-7, "{e}");
    }

    #[test]
    fn empty_basis_measures_solution_norms() {
        let (problem, basis, _) = setup(16);
        let test = halton_segment(8, 10, 100).unwrap();
        let empty = basis.truncated(0, RankSelection::Fixed).unwrap();
        let e = pod_generalization_error(&problem, &empty, &test).unwrap();
        let norms: Vec<f64> = test
            .iter()
            .map(|y| {
                problem
                    .gram()
                    .norm_sqr(&problem.solve(y).unwrap().coefficients)
            })
            .collect();
        assert!((e - rms(&norms)).abs() < 1e-14);
    }

    #[test]
    fn zero_network_error_is_solution_norm() {
        let (problem, basis, _) = setup(16);
        let b = basis.truncated(3, RankSelection::Fixed).unwrap();
        let model = Mlp::zeros(&[8, 4, 6]).unwrap();
        let test = halton_segment(8, 10, 100).unwrap();
        let total = surrogate_l2_error(&model, &problem, &b, &test).unwrap();
        let norms: Vec<f64> = test
            .iter()
            .map(|y| {
                problem
                    .gram()
                    .norm_sqr(&problem.solve(y).unwrap().coefficients)
            })
            .collect();
        assert!((total - rms(&norms)).abs() < 1e-12);
    }

    #[test]
    fn exact_coefficients_leave_only_projection_error() {
        let (problem, basis, _) = setup(16);
        let b = basis.truncated(2, RankSelection::Fixed).unwrap();
        let y = halton_segment(8, 1, 500).unwrap();
        let u = problem.solve(&y[0]).unwrap();
        let exact =
            split_real_imag(&pod::project_coeffs(&u.coefficients, &b, problem.gram()).unwrap());
        // a 1-layer network with zero weights whose bias is the exact answer
        let mut model = Mlp::zeros(&[8, 4]).unwrap();
        model.biases_mut(0).copy_from_slice(&exact.values);
        let bd = error_breakdown(&model, &problem, &b, &y).unwrap();
        assert!(bd.coefficients < 1e-14);
        assert!((bd.total - bd.pod).abs() < 1e-12);
    }

    #[test]
    fn truncation_study_cases() {
        let cfg = ModelProblemConfig::real_diffusion(64, 16);
        let probes = halton_segment(16, 4, 1).unwrap();
        let one = truncation_study(&cfg, &[4], &probes).unwrap();
        assert_eq!(one.errors.len(), 1);
        assert!(one.slope.is_none());
        // modes beyond s = 8 are zero in a probe of dimension 8
        let short: Vec<ParamPoint> = probes.iter().map(|p| p.truncated(8)).collect();
        let z = truncation_study(&cfg, &[8], &short).unwrap();
        assert_eq!(z.errors[0], 0.0);
        assert!(truncation_study(&cfg, &[4, 16], &probes).is_err());
    }

    #[test]
    fn single_row_study_has_no_slopes() {
        let mut cfg = StudyConfig::new(ModelProblemConfig::real_diffusion(32, 4), vec![64]);
        cfg.test_set_size = 16;
        cfg.train = Some(TrainConfig {
            max_epochs: 5,
            ..Default::default()
        });
        let r = run_study(&cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.slopes.is_empty());
        let row = &r.rows[0];
        assert!(
            row.nn_train_mse.is_some() && row.nn_gen_err.is_some() && row.total_l2_err.is_some()
        );
        assert!(r.to_csv().starts_with(STUDY_CSV_HEADER));
    }

    #[test]
    fn study_validation() {
        let mut cfg = StudyConfig::new(ModelProblemConfig::real_diffusion(32, 4), vec![64, 32]);
        assert!(run_study(&cfg).is_err());
        cfg.n_grid = vec![32, 64];
        cfg.test_start_index = Some(10);
        assert!(run_study(&cfg).is_err());
    }
}
