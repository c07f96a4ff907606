//! Subcommands of the `podnn` binary. Each one reads its inputs, runs one
//! pipeline stage and writes its artefacts; nothing here is numerical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{self, StudyReport};
use crate::config::{PodRankRule, RunConfig};
use crate::io;
use crate::nn::{self, Mlp, StopReason};
use crate::pod::{self, PodDiagnostics, RankSelection, ReducedBasis, SnapshotSet};
use crate::problem::{ModelProblem, ModelProblemConfig};
use crate::qmc;
use crate::{Error, Result};

/// Halton points in `[-1,1]^s`, one per row, shortest round-trip decimals.
pub fn cmd_qmc(cfg: &RunConfig, out: &Path) -> Result<()> {
    let points = qmc::parameter_points(&cfg.qmc)?;
    let mut csv = String::new();
    for p in &points {
        let row: Vec<String> = p.coords().iter().map(|v| format!("{v:?}")).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Ok(fs::write(out, csv)?)
}

/// Snapshot file for the configured problem at the configured QMC points.
pub fn cmd_sample(cfg: &RunConfig, out: &Path) -> Result<()> {
    let n = cfg.qmc.n_points;
    let problem = ModelProblem::new(&cfg.problem)?;
    let points = qmc::parameter_points(&cfg.qmc).map_err(|e| e.at_stage("sample", n))?;
    let snap = pod::assemble_snapshots(&problem, &points).map_err(|e| e.at_stage("sample", n))?;
    io::write_snapshots(out, &snap)
}

/// Rebuilds the problem a snapshot set came from, falling back to the run
/// configuration, and checks the Gram identifier.
fn problem_for(snap: &SnapshotSet, cfg: &RunConfig) -> Result<ModelProblem> {
    let pc: &ModelProblemConfig = snap.problem_meta.as_ref().unwrap_or(&cfg.problem);
    let problem = ModelProblem::new(pc)?;
    if !snap.gram_id.is_empty() && snap.gram_id != problem.gram().id {
        return Err(Error::Format(format!(
            "snapshot Gram id `{}` does not match `{}`",
            snap.gram_id,
            problem.gram().id
        )));
    }
    if problem.n_dof() != snap.n_dof {
        return Err(Error::Format(format!(
            "snapshot file has {} dofs, problem has {}",
            snap.n_dof,
            problem.n_dof()
        )));
    }
    Ok(problem)
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct PodReport<'a> {
    n_samples: usize,
    rank: usize,
    selection: RankSelection,
    fingerprint: String,
    singular_values: &'a [f64],
    tail_per_rank: &'a [f64],
    full_rank: usize,
    degenerate: bool,
}

/// Picks the retained rank according to the `[pod]` section.
pub fn select_rank(full: &ReducedBasis, cfg: &RunConfig) -> Result<ReducedBasis> {
    let n = full.n_samples;
    let (j, sel) = match cfg.pod.rule {
        PodRankRule::Full => (full.rank, RankSelection::Full),
        PodRankRule::Tolerance => {
            let tau = cfg
                .pod
                .tolerance
                .unwrap_or_else(|| pod::default_tolerance(n));
            (
                pod::rank_by_tolerance(full, tau),
                RankSelection::Tolerance(tau),
            )
        }
        PodRankRule::Apriori => (pod::rank_apriori(n, &cfg.rates)?, RankSelection::Apriori),
        PodRankRule::Fixed => (
            cfg.pod.fixed_rank.unwrap_or(full.rank),
            RankSelection::Fixed,
        ),
    };
    if j > full.rank {
        log::warn!(
            "requested rank {j} exceeds the numerical rank {}; capping",
            full.rank
        );
    }
    full.truncated(j.min(full.rank), sel)
}

/// Reduced basis file at `out`, diagnostics JSON next to it.
pub fn cmd_pod(snapshots: &Path, cfg: &RunConfig, out: &Path) -> Result<()> {
    let snap = io::read_snapshots(snapshots)?;
    let n = snap.n_samples();
    let problem = problem_for(&snap, cfg)?;
    let (full, diag): (ReducedBasis, PodDiagnostics) =
        pod::pod_basis(&snap, problem.gram()).map_err(|e| e.at_stage("pod", n))?;
    let basis = select_rank(&full, cfg).map_err(|e| e.at_stage("pod", n))?;
    io::write_basis(out, &basis)?;
    let report = PodReport {
        n_samples: n,
        rank: basis.rank,
        selection: basis.selection,
        fingerprint: basis.fingerprint(),
        singular_values: &basis.singular_values,
        tail_per_rank: &diag.tail_per_rank,
        full_rank: full.rank,
        degenerate: diag.degenerate,
    };
    Ok(fs::write(with_extension(out, "json"), to_json(&report)?)?)
}

/// Model file at `out`, training history CSV next to it.
pub fn cmd_train(snapshots: &Path, basis_path: &Path, cfg: &RunConfig, out: &Path) -> Result<()> {
    let snap = io::read_snapshots(snapshots)?;
    let basis = io::read_basis(basis_path)?;
    let n = snap.n_samples();
    let problem = problem_for(&snap, cfg)?;
    if basis.gram_id != snap.gram_id || basis.n_dof != snap.n_dof {
        return Err(Error::Format(
            "basis and snapshots come from different problems".into(),
        ));
    }
    if basis.rank == 0 {
        return Err(Error::Empty("basis has no modes to regress").at_stage("train", n));
    }
    let targets = pod::project_snapshots(&snap, &basis, problem.gram())
        .map_err(|e| e.at_stage("train", n))?;
    let sizing = cfg.nn.sizing(n, &cfg.rates)?;
    let tc = cfg.nn.train_config(n, cfg.rates.alpha);
    let model = Mlp::init(&sizing.dims(snap.s(), 2 * basis.rank), tc.seed)?;
    let (model, history) =
        nn::train(model, &snap.params, &targets, &tc).map_err(|e| e.at_stage("train", n))?;
    if history.stop_reason == StopReason::MaxEpochs {
        log::warn!(
            "training hit max_epochs = {} with best loss {:e} above {:e}",
            tc.max_epochs,
            history.final_best(),
            tc.stop_threshold
        );
    }
    io::write_model(out, &model, &basis.fingerprint())?;
    Ok(fs::write(with_extension(out, "csv"), history.to_csv())?)
}

#[derive(Debug, Serialize)]
pub struct EvalMetrics {
    pub test_set_size: usize,
    pub test_start_index: u64,
    pub rank: usize,
    pub pod_gen_err: f64,
    pub nn_coeff_err: f64,
    pub total_l2_err: f64,
    pub basis_fingerprint: String,
}

/// Errors of a trained model on the held-out Halton segment of `[study]`.
pub fn cmd_eval(model_path: &Path, basis_path: &Path, cfg: &RunConfig) -> Result<String> {
    let (model, basis_id) = io::read_model(model_path)?;
    let basis = io::read_basis(basis_path)?;
    if basis_id != basis.fingerprint() {
        return Err(Error::Format(format!(
            "model was trained against basis {basis_id}, got {}",
            basis.fingerprint()
        )));
    }
    let problem = ModelProblem::new(&cfg.problem)?;
    if problem.gram().id != basis.gram_id {
        return Err(Error::Format(
            "basis does not belong to the configured problem".into(),
        ));
    }
    let sc = cfg.study_config();
    let start = sc.test_start();
    let test_cfg = qmc::QmcConfig::new(cfg.problem.s, sc.test_set_size).with_start(start);
    let points = qmc::parameter_points(&test_cfg)?;
    let bd = analysis::error_breakdown(&model, &problem, &basis, &points)
        .map_err(|e| e.at_stage("eval", basis.n_samples))?;
    to_json(&EvalMetrics {
        test_set_size: points.len(),
        test_start_index: start,
        rank: basis.rank,
        pod_gen_err: bd.pod,
        nn_coeff_err: bd.coefficients,
        total_l2_err: bd.total,
        basis_fingerprint: basis.fingerprint(),
    })
}

#[derive(Serialize)]
struct StudySidecar<'a> {
    config: &'a analysis::StudyConfig,
    slopes: &'a std::collections::BTreeMap<String, f64>,
    /// `nn_train_mse / nn_gen_err²` per row, when the network stage ran.
    mse_to_generalization: Vec<Option<f64>>,
}

/// `report.csv` and `report.json` in `out_dir`.
pub fn cmd_study(cfg: &RunConfig, out_dir: &Path) -> Result<StudyReport> {
    let sc = cfg.study_config();
    let report = analysis::run_study(&sc)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("report.csv"), report.to_csv())?;
    let ratios = report
        .rows
        .iter()
        .map(|r| match (r.nn_train_mse, r.nn_gen_err) {
            (Some(m), Some(g)) if g > 0.0 => Some(m / (g * g)),
            _ => None,
        })
        .collect();
    let sidecar = StudySidecar {
        config: &sc,
        slopes: &report.slopes,
        mse_to_generalization: ratios,
    };
    fs::write(out_dir.join("report.json"), to_json(&sidecar)?)?;
    Ok(report)
}

/// One-line JSON error record for scripts driving the binary.
pub fn error_line(err: &Error) -> String {
    let mut chain = String::new();
    let mut source = std::error::Error::source(err);
    while let Some(s) = source {
        let _ = write!(chain, "; {s}");
        source = s.source();
    }
    serde_json::json!({
        "error": err.kind(),
        "stage": err.stage(),
        "message": format!("{err}{chain}"),
    })
    .to_string()
}
