//! The work behind each subcommand, kept separate from argument parsing.

use std::f64::consts::PI;
use std::path::Path;

use uzawa_core::driver::RhoRule;
use uzawa_core::oracle::{
    fd_direct_kkt_solve, fd_projected_uzawa_run, fd_uzawa_run, gauss_seidel_adjoint_run, FdHistory, Grid1D,
};
use uzawa_core::{rho_alpha_sweep, run_deep_uzawa, ConstraintKind, RunRecord, TargetSpec, Variant};

use crate::config::{ExperimentConfig, ExperimentTag, OracleScheme};
use crate::error::{CliError, Result};
use crate::gradcheck::{run_grad_check, CheckLine};
use crate::output::{emit_csv, emit_fd_history, write_csv, ResidualSign};

/// The resolved configuration written to `meta.txt`.
pub fn config_meta(config: &ExperimentConfig) -> Vec<(String, String)> {
    let u = &config.uzawa;
    let mut entries = vec![
        ("tag".to_string(), config.tag.to_string()),
        ("alpha".to_string(), u.problem.alpha.to_string()),
    ];
    let mut add = |k: &str, v: String| entries.push((k.to_string(), v));
    if let ConstraintKind::AllenCahn { epsilon } = u.problem.kind {
        add("epsilon", epsilon.to_string());
    }
    match u.variant {
        Variant::Plain => {
            add("variant", "plain".into());
            add("rho", u.rho.to_string());
        }
        Variant::Augmented { beta } => {
            add("variant", "augmented".into());
            add("beta", beta.to_string());
        }
    }
    add("n_uz", u.n_uz.to_string());
    add("n_sgd", u.n_sgd.to_string());
    add("lr", u.lr.to_string());
    add("seed", u.seed.to_string());
    add("grid_n", u.grid_n.to_string());
    let hidden: Vec<String> = u.network.hidden.iter().map(usize::to_string).collect();
    add("hidden", hidden.join(","));
    add("activation", u.network.activation.name().into());
    add(
        "batch_size",
        u.batch_size.map_or("full".to_string(), |b| b.to_string()),
    );
    add("refined_eval", u.refined_eval.to_string());
    if let Some(image) = &config.image {
        add("image", image.display().to_string());
    }
    entries
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Summary {
    Run {
        updates: usize,
        final_state_error: Option<f64>,
        final_control_error: Option<f64>,
    },
    Oracle(Vec<String>),
    Sweep(usize),
    Checks(Vec<CheckLine>),
}

fn final_relative(record: &RunRecord) -> (Option<f64>, Option<f64>) {
    (
        record.relative_state_error().last().copied(),
        record.relative_control_error().last().copied(),
    )
}

/// Runs the experiment the config describes and writes its outputs under `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Summary> {
    match config.tag {
        ExperimentTag::GradCheck => return grad_check(),
        ExperimentTag::FdOracle => return oracle(config, out),
        _ => {}
    }
    let record = run_deep_uzawa(&config.uzawa)?;
    emit_csv(&record, out, &config_meta(config))?;
    if let Some(k) = record.diverged_at {
        return Err(CliError::Diverged(k));
    }
    let (final_state_error, final_control_error) = final_relative(&record);
    Ok(Summary::Run {
        updates: record.updates(),
        final_state_error,
        final_control_error,
    })
}

fn oracle_target(config: &ExperimentConfig, grid: &Grid1D) -> Result<Vec<f64>> {
    let problem = &config.uzawa.problem;
    let bad_tag = || CliError::Config {
        key: "tag".into(),
        line: None,
        reason: format!(
            "the finite-difference oracle handles 1D Poisson problems only, not {}",
            config.tag
        ),
    };
    if problem.kind != ConstraintKind::Poisson || config.uzawa.domain.dim() != 1 {
        return Err(bad_tag());
    }
    let alpha = problem.alpha;
    match problem.target {
        TargetSpec::Sine1D => Ok(grid.sample(|x| (1.0 + alpha * PI.powi(4)) * (PI * x).sin())),
        TargetSpec::Constant(c) => Ok(grid.sample(|_| c)),
        _ => Err(bad_tag()),
    }
}

/// Runs the finite-difference iterations selected by `oracle_scheme`, one
/// subdirectory per scheme.
pub fn oracle(config: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let grid = Grid1D::new(config.uzawa.grid_n)?;
    let target = oracle_target(config, &grid)?;
    let alpha = config.uzawa.problem.alpha;
    let rho = config.uzawa.rho;
    let iters = config.oracle_iters;
    let scheme = config.oracle_scheme;
    let wanted = |s: OracleScheme| scheme == OracleScheme::All || scheme == s;
    let mut meta = config_meta(config);
    meta.push(("oracle_iters".into(), iters.to_string()));
    let mut written = Vec::new();
    let mut diverged = None;
    let mut emit = |name: &str, history: FdHistory, sign: ResidualSign| -> Result<()> {
        let mut entries = meta.clone();
        entries.push(("scheme".into(), name.into()));
        emit_fd_history(&history, &grid, alpha, &target, sign, &out.join(name), &entries)?;
        if let Some(k) = history.diverged_at {
            diverged.get_or_insert(k);
        }
        written.push(name.to_string());
        Ok(())
    };
    if wanted(OracleScheme::Uzawa) {
        emit("uzawa", fd_uzawa_run(&grid, alpha, rho, &target, iters)?, ResidualSign::Plus)?;
    }
    if wanted(OracleScheme::Projected) {
        emit(
            "projected",
            fd_projected_uzawa_run(&grid, alpha, rho, &target, iters)?,
            ResidualSign::Minus,
        )?;
    }
    if wanted(OracleScheme::GaussSeidel) {
        emit(
            "gauss_seidel",
            gauss_seidel_adjoint_run(&grid, alpha, &target, iters)?,
            ResidualSign::Minus,
        )?;
    }
    if wanted(OracleScheme::Direct) {
        let solution = fd_direct_kkt_solve(&grid, alpha, &target)?;
        let dir = out.join("direct");
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        write_csv(&dir.join("State.csv"), &["state"], solution.u.iter().map(|&v| vec![v]))?;
        write_csv(&dir.join("Control.csv"), &["control"], solution.f.iter().map(|&v| vec![v]))?;
        write_csv(&dir.join("Multiplier.csv"), &["multiplier"], solution.z.iter().map(|&v| vec![v]))?;
        let mut entries = meta.clone();
        entries.push(("scheme".into(), "direct".into()));
        if let Some(exact) = &config.uzawa.exact {
            let u_star: Vec<f64> = grid.nodes().iter().map(|&x| exact.eval(&[x]).0).collect();
            let f_star: Vec<f64> = grid.nodes().iter().map(|&x| exact.eval(&[x]).1).collect();
            entries.push(("state_l2_error".into(), grid.l2_distance(&solution.u, &u_star).to_string()));
            entries.push(("control_l2_error".into(), grid.l2_distance(&solution.f, &f_star).to_string()));
        }
        let text: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let path = dir.join("meta.txt");
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        written.push("direct".into());
    }
    match diverged {
        Some(k) => Err(CliError::Diverged(k)),
        None => Ok(Summary::Oracle(written)),
    }
}

/// One Deep Uzawa run per `α`, each in `out/alpha_<α>`, plus `Sweep.csv`.
pub fn sweep(config: &ExperimentConfig, alphas: &[f64], rule: RhoRule, out: &Path) -> Result<Summary> {
    if let Some(bad) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(CliError::Config {
            key: "alphas".into(),
            line: None,
            reason: format!("every α must be positive and finite, got {bad}"),
        });
    }
    if matches!(config.tag, ExperimentTag::FdOracle | ExperimentTag::GradCheck | ExperimentTag::AcImage) {
        return Err(CliError::Config {
            key: "tag".into(),
            line: None,
            reason: format!("sweeps are not available for {}", config.tag),
        });
    }
    let records = rho_alpha_sweep(&config.uzawa, alphas, rule)?;
    let mut rows = Vec::new();
    let mut diverged = None;
    for (&alpha, record) in alphas.iter().zip(&records) {
        let mut run_config = config.clone();
        run_config.uzawa = uzawa_core::driver::config_for_alpha(&config.uzawa, alpha, rule);
        emit_csv(record, &out.join(format!("alpha_{alpha:e}")), &config_meta(&run_config))?;
        let (state, control) = final_relative(record);
        rows.push(vec![
            alpha,
            run_config.uzawa.rho,
            state.unwrap_or(f64::NAN),
            control.unwrap_or(f64::NAN),
            record.diverged_at.map_or(-1.0, |k| k as f64),
        ]);
        if let Some(k) = record.diverged_at {
            diverged.get_or_insert(k);
        }
    }
    write_csv(
        &out.join("Sweep.csv"),
        &[
            "alpha",
            "rho",
            "final_relative_state_error",
            "final_relative_control_error",
            "diverged_at",
        ],
        rows,
    )?;
    match diverged {
        Some(k) => Err(CliError::Diverged(k)),
        None => Ok(Summary::Sweep(records.len())),
    }
}

/// Runs the derivative checks; fails if any case exceeds its tolerance.
pub fn grad_check() -> Result<Summary> {
    let lines = run_grad_check()?;
    if let Some(bad) = lines.iter().find(|l| !l.passed()) {
        return Err(CliError::CheckFailed(format!(
            "{}: error {:e} exceeds {:e}",
            bad.name, bad.error, bad.tolerance
        )));
    }
    Ok(Summary::Checks(lines))
}
