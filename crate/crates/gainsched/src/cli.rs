//! Command-line front end. Three subcommands cover the full workflow:
//! `certify` builds and audits the gain table, `train` learns a scheduling
//! policy over it, `eval` rolls a policy (or one fixed gain) out on the
//! standard maneuver and writes plot-ready series.
//!
//! Exit codes: 0 success, 1 internal/io error, 2 configuration error,
//! 3 certification failure, 4 divergence (training collapse or an aborted
//! evaluation rollout).

use crate::config::{ConfigError, RunConfig};
use crate::dqn::{self, CheckpointMeta, DqnError, EpisodeStats, TrainError};
use crate::dynamics::QuadState;
use crate::env::{Observation, QuadEnv, Termination};
use crate::gains::{build_action_table, validate_bounds, ActionTable, GainError};
use crate::logging::{self, LogError};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "gainsched", about = "Quadcopter gain-scheduling workbench", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the gain library, certify every entry, and write the audit.
    Certify(CommonArgs),
    /// Train the scheduling policy; writes a checkpoint and learning curve.
    Train(CommonArgs),
    /// Roll out a trained policy or a fixed gain and log the episode.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; built-in defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configured value.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the configured value.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "policy", required = true, multiple = true)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint whose greedy policy schedules the gains.
    #[arg(long, group = "policy")]
    pub checkpoint: Option<PathBuf>,
    /// Certified action index held for the whole episode; takes precedence
    /// over --checkpoint when both are given.
    #[arg(long, group = "policy")]
    pub fixed_gain: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid environment config: {0}")]
    Env(String),
    #[error("checkpoint does not fit this run: {0}")]
    CheckpointMismatch(String),
    #[error("--fixed-gain {index} is out of range for a table of {len} actions")]
    FixedGainRange { index: usize, len: usize },
    #[error("evaluation rollout aborted: {0}")]
    EvalDiverged(String),
    #[error("dwell violation in logged rollout: actions changed {interval} steps apart at step {step}")]
    DwellViolation { step: usize, interval: usize },
}

impl CliError {
    /// Process exit code for this error per the documented contract.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Env(_)
            | CliError::Dqn(_)
            | CliError::CheckpointMismatch(_)
            | CliError::FixedGainRange { .. } => 2,
            CliError::Gain(GainError::CertificationFailed { .. }) => 3,
            CliError::Gain(_) => 2,
            CliError::Train(TrainError::Diverged { .. }) => 4,
            CliError::Train(TrainError::Invalid(_)) => 2,
            CliError::EvalDiverged(_) => 4,
            CliError::Log(_) | CliError::Io(_) | CliError::DwellViolation { .. } => 1,
        }
    }
}

/// Load the configuration (or defaults) and apply flag overrides.
fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn build_table(config: &RunConfig) -> Result<Arc<ActionTable>, CliError> {
    let table =
        build_action_table(config.gains.nominal_poles, config.gains.scale_grid, config.yaw_gains())?;
    Ok(Arc::new(table))
}

fn build_env(config: &RunConfig, table: Arc<ActionTable>) -> Result<QuadEnv, CliError> {
    QuadEnv::new(table, config.vehicle_params(), config.episode_config())
        .map_err(|e| CliError::Env(e.to_string()))
}

fn expected_bounds(config: &RunConfig) -> [[f64; 2]; 14] {
    // Validated to hold exactly 14 rows at load time.
    let mut bounds = [[0.0; 2]; 14];
    for (dst, src) in bounds.iter_mut().zip(&config.gains.bounds) {
        *dst = *src;
    }
    bounds
}

/// Every applied gain change in a logged rollout must be separated by at
/// least `dwell_steps` steps.
fn check_dwell(
    actions: impl IntoIterator<Item = usize>,
    dwell_steps: usize,
) -> Result<(), CliError> {
    let mut last_change: Option<usize> = None;
    let mut prev_action: Option<usize> = None;
    for (step, action) in actions.into_iter().enumerate() {
        if let Some(prev) = prev_action {
            if action != prev {
                if let Some(last) = last_change {
                    let interval = step - last;
                    if interval < dwell_steps {
                        return Err(CliError::DwellViolation { step, interval });
                    }
                }
                last_change = Some(step);
            }
        } else {
            last_change = Some(step);
        }
        prev_action = Some(action);
    }
    Ok(())
}

pub fn run_certify(args: &CommonArgs) -> Result<(), CliError> {
    let config = resolve_config(args)?;
    let table = build_table(&config)?;
    std::fs::create_dir_all(&config.out_dir)?;

    let actions_path = config.out_dir.join("actions.csv");
    logging::write_actions_csv(&actions_path, &table)?;

    let report = validate_bounds(&table, &expected_bounds(&config), config.gains.bounds_tolerance);
    let report_path = config.out_dir.join("bounds_report.txt");
    logging::write_bounds_report(&report_path, &report)?;

    let worst = (0..table.len())
        .map(|i| table.certificate(i).max_real)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "certified {} gain vectors; worst closed-loop margin max Re(lambda) = {worst:.4}",
        table.len()
    );
    let deviations = report.deviations().len();
    if deviations == 0 {
        println!("envelope audit: all 14 components within the expected bounds");
    } else {
        println!(
            "envelope audit: {deviations} of 14 components deviate from the expected bounds \
             (itemized in {})",
            report_path.display()
        );
    }
    println!("wrote {}", actions_path.display());
    Ok(())
}

pub fn run_train(args: &CommonArgs) -> Result<(), CliError> {
    let config = resolve_config(args)?;
    let table = build_table(&config)?;
    let mut env = build_env(&config, table)?;
    std::fs::create_dir_all(&config.out_dir)?;

    let mut collected: Vec<EpisodeStats> = Vec::with_capacity(config.train.episodes);
    let outcome = dqn::train(&mut env, &config.train, config.seed, |s| {
        if (s.episode + 1) % 10 == 0 || s.episode == 0 {
            eprintln!(
                "episode {:>4} return {:>10.3} loss {:>9.4} eps {:.3}",
                s.episode, s.ret, s.mean_loss, s.epsilon
            );
        }
        collected.push(s.clone());
    });

    let curve_path = config.out_dir.join("curve.csv");
    match outcome {
        Ok(result) => {
            logging::write_curve_csv(&curve_path, &result.stats)?;
            let ckpt_path = config.out_dir.join("checkpoint.ckpt");
            dqn::save_checkpoint(
                &ckpt_path,
                &result.net,
                &CheckpointMeta {
                    seed: config.seed,
                    train_steps: result.train_steps,
                    train_config: Some(config.train.clone()),
                },
            )?;
            let tail = result.stats.iter().rev().take(30).collect::<Vec<_>>();
            let mean = tail.iter().map(|s| s.ret).sum::<f64>() / tail.len().max(1) as f64;
            println!("final {}-episode mean return: {mean:.4}", tail.len());
            println!("wrote {} and {}", curve_path.display(), ckpt_path.display());
            Ok(())
        }
        Err(err) => {
            // Keep the partial curve for post-mortems before reporting.
            logging::write_curve_csv(&curve_path, &collected)?;
            Err(err.into())
        }
    }
}

pub fn run_eval(args: &EvalArgs) -> Result<(), CliError> {
    let config = resolve_config(&args.common)?;
    let table = build_table(&config)?;
    let mut env = build_env(&config, Arc::clone(&table))?;
    std::fs::create_dir_all(&config.out_dir)?;

    env.reset_from(QuadState::hover_at(config.eval_start()));
    let outcomes = match (args.fixed_gain, &args.checkpoint) {
        (Some(index), _) => {
            if index >= table.len() {
                return Err(CliError::FixedGainRange { index, len: table.len() });
            }
            dqn::fixed_action_episode(&mut env, index)
        }
        (None, Some(path)) => {
            let (net, _meta) = dqn::load_checkpoint(path)?;
            let sizes = net.sizes();
            if sizes.first() != Some(&Observation::LEN) || sizes.last() != Some(&table.len()) {
                return Err(CliError::CheckpointMismatch(format!(
                    "network maps {:?} but this run needs {} inputs and {} actions",
                    sizes,
                    Observation::LEN,
                    table.len()
                )));
            }
            dqn::greedy_episode(&mut env, &net)
        }
        (None, None) => unreachable!("clap group requires a policy flag"),
    };

    check_dwell(
        outcomes.iter().map(|o| o.transition.action),
        config.episode_config().dwell_steps,
    )?;
    let rollout_path = config.out_dir.join("rollout.csv");
    logging::write_rollout_csv(&rollout_path, &outcomes)?;
    let figures = logging::write_figure_csvs(&config.out_dir, &outcomes, config.episode.t_f)?;

    let last = outcomes.last().expect("episode has at least one step");
    println!(
        "episode finished after {} steps; final-step reward {:.6}",
        outcomes.len(),
        last.transition.reward
    );
    if let Some(errors) = &last.info.errors {
        println!(
            "final position error {:.6} m, final speed {:.6} m/s",
            errors.e_r.norm(),
            errors.e_v.norm()
        );
    }
    println!("wrote {} and {} figure files", rollout_path.display(), figures.len());

    if let Some(term @ Termination::Failure(_)) = last.transition.termination {
        return Err(CliError::EvalDiverged(term.tag().to_string()));
    }
    Ok(())
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Certify(args) => run_certify(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::error::ErrorKind;

    fn parse(argv: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(argv)
    }

    #[test]
    fn eval_requires_a_policy_flag() {
        let err = parse(&["gainsched", "eval"]).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::MissingRequiredArgument);
    }

    #[test]
    fn eval_accepts_either_policy_flag() {
        let cli = parse(&["gainsched", "eval", "--fixed-gain", "17"]).unwrap();
        match cli.command {
            Command::Eval(args) => assert_eq!(args.fixed_gain, Some(17)),
            _ => panic!("parsed wrong command"),
        }
        let cli = parse(&["gainsched", "eval", "--checkpoint", "x.ckpt"]).unwrap();
        match cli.command {
            Command::Eval(args) => assert!(args.checkpoint.is_some()),
            _ => panic!("parsed wrong command"),
        }
    }

    #[test]
    fn fixed_gain_takes_precedence_over_checkpoint() {
        let cli = parse(&[
            "gainsched",
            "eval",
            "--checkpoint",
            "missing.ckpt",
            "--fixed-gain",
            "0",
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let args = match cli.command {
            Command::Eval(mut args) => {
                args.common.out = Some(dir.path().to_path_buf());
                args
            }
            _ => panic!("parsed wrong command"),
        };
        // The checkpoint path does not exist; fixed-gain mode must not touch it.
        run_eval(&args).unwrap();
        assert!(dir.path().join("rollout.csv").exists());
    }

    #[test]
    fn common_flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"seed": 7, "out_dir": "left"}"#).unwrap();
        let args = CommonArgs {
            config: Some(path),
            seed: Some(99),
            out: Some(PathBuf::from("right")),
        };
        let config = resolve_config(&args).unwrap();
        assert_eq!(config.seed, 99);
        assert_eq!(config.out_dir, PathBuf::from("right"));
    }

    #[test]
    fn config_error_exits_2_and_cert_failure_exits_3() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"unknown_key": 1}"#).unwrap();
        let args =
            CommonArgs { config: Some(path), seed: None, out: Some(dir.path().to_path_buf()) };
        let err = run_certify(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let pole_path = dir.path().join("pole.json");
        std::fs::write(
            &pole_path,
            r#"{"gains": {"nominal_poles": [0.5, -5.0, -7.5, -10.0]}}"#,
        )
        .unwrap();
        let args =
            CommonArgs { config: Some(pole_path), seed: None, out: Some(dir.path().to_path_buf()) };
        let err = run_certify(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2, "invalid pole input is a config error");
    }

    #[test]
    fn certify_writes_actions_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let args = CommonArgs { config: None, seed: None, out: Some(dir.path().to_path_buf()) };
        run_certify(&args).unwrap();
        let actions = logging::read_actions_csv(&dir.path().join("actions.csv")).unwrap();
        assert_eq!(actions.len(), 625);
        assert!(actions.iter().all(|a| a.max_real < -1e-6));
        let report = std::fs::read_to_string(dir.path().join("bounds_report.txt")).unwrap();
        assert!(report.contains("summary:"));
    }

    #[test]
    fn fixed_gain_out_of_range_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let args = EvalArgs {
            common: CommonArgs { config: None, seed: None, out: Some(dir.path().to_path_buf()) },
            checkpoint: None,
            fixed_gain: Some(625),
        };
        let err = run_eval(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn fixed_gain_eval_writes_rollout_and_figures() {
        let dir = tempfile::tempdir().unwrap();
        let args = EvalArgs {
            common: CommonArgs { config: None, seed: None, out: Some(dir.path().to_path_buf()) },
            checkpoint: None,
            fixed_gain: Some(312),
        };
        run_eval(&args).unwrap();
        let rows = logging::read_rollout_csv(&dir.path().join("rollout.csv")).unwrap();
        assert_eq!(rows.len(), 1000);
        assert!(rows.iter().all(|r| r.action == 312));
        assert_eq!(rows.last().unwrap().term, "time_limit");
        for name in [
            "fig_gains.csv",
            "fig_errors.csv",
            "fig_position.csv",
            "fig_attitude.csv",
            "fig_inputs.csv",
            "fig_reward.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
    }

    #[test]
    fn dwell_check_flags_fast_switches() {
        assert!(check_dwell([3, 3, 3, 3].into_iter(), 10).is_ok());
        // The first action is selected at step 0, so a change at step 2 is
        // only 2 steps after the last selection.
        let err = check_dwell([0, 0, 1, 1, 2].into_iter(), 10).unwrap_err();
        match err {
            CliError::DwellViolation { step, interval } => {
                assert_eq!(step, 2);
                assert_eq!(interval, 2);
            }
            other => panic!("expected dwell violation, got {other:?}"),
        }
        assert!(check_dwell([0, 0, 1, 1, 2].into_iter(), 2).is_ok());
    }
}
