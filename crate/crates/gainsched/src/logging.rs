//! CSV artifacts. Every file has a fixed documented header row; floats are
//! written with Rust's shortest round-trip formatting, so reading a file
//! back reproduces the original values bitwise. Writers take the in-memory
//! records produced by the simulator and trainer; matching readers exist for
//! every schema so logs can be audited programmatically.

use crate::dqn::EpisodeStats;
use crate::env::StepOutcome;
use crate::gains::{decode_action, ActionTable, BoundsReport};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn schema_err(path: &Path, message: impl Into<String>) -> LogError {
    LogError::Schema { path: path.to_path_buf(), message: message.into() }
}

fn parse_f64(path: &Path, field: &str, raw: &str) -> Result<f64, LogError> {
    raw.parse::<f64>()
        .map_err(|_| schema_err(path, format!("field {field}: cannot parse {raw:?} as f64")))
}

fn parse_usize(path: &Path, field: &str, raw: &str) -> Result<usize, LogError> {
    raw.parse::<usize>()
        .map_err(|_| schema_err(path, format!("field {field}: cannot parse {raw:?} as usize")))
}

fn check_header(path: &Path, expected: &[String], reader: &mut csv::Reader<std::fs::File>) -> Result<(), LogError> {
    let headers = reader.headers()?.clone();
    let actual: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    if actual != expected {
        return Err(schema_err(
            path,
            format!("header mismatch: expected {expected:?}, found {actual:?}"),
        ));
    }
    Ok(())
}

/// Column names of the per-step rollout log. All rows are post-step: `t` is
/// the time after the step and the state columns are the state it produced.
pub fn rollout_header() -> Vec<String> {
    let mut h = vec![
        "t", "rx", "ry", "rz", "vx", "vy", "vz", "phi", "theta", "psi", "wx", "wy", "wz",
        "t_dev", "t_dev_rate", "action",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for i in 1..=14 {
        h.push(format!("k{i}"));
    }
    h.extend(["reward", "u_t", "tau_x", "tau_y", "tau_z", "rd_x", "rd_y", "rd_z", "term"].map(String::from));
    h
}

/// One parsed rollout row.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRow {
    pub t: f64,
    pub state: [f64; 14],
    pub action: usize,
    pub gains: [f64; 14],
    pub reward: f64,
    /// Commanded second derivative of thrust; NaN on aborted steps where no
    /// input was applied.
    pub u_t: f64,
    pub tau: [f64; 3],
    pub r_d: [f64; 3],
    /// Termination tag; empty while the episode is running.
    pub term: String,
}

pub fn write_rollout_csv(path: &Path, outcomes: &[StepOutcome]) -> Result<(), LogError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(rollout_header())?;
    for out in outcomes {
        let mut rec: Vec<String> = Vec::with_capacity(39);
        rec.push(fmt(out.info.t));
        for v in out.info.state.to_array() {
            rec.push(fmt(v));
        }
        rec.push(out.transition.action.to_string());
        for k in out.info.gains {
            rec.push(fmt(k));
        }
        rec.push(fmt(out.transition.reward));
        match &out.info.physical_input {
            Some(input) => {
                rec.push(fmt(input.t_ddot));
                rec.push(fmt(input.tau.x));
                rec.push(fmt(input.tau.y));
                rec.push(fmt(input.tau.z));
            }
            None => {
                for _ in 0..4 {
                    rec.push(fmt(f64::NAN));
                }
            }
        }
        rec.push(fmt(out.info.reference.pos.x));
        rec.push(fmt(out.info.reference.pos.y));
        rec.push(fmt(out.info.reference.pos.z));
        rec.push(out.transition.termination.map(|t| t.tag()).unwrap_or("").to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rollout_csv(path: &Path) -> Result<Vec<RolloutRow>, LogError> {
    let mut reader = csv::Reader::from_path(path)?;
    check_header(path, &rollout_header(), &mut reader)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 39 {
            return Err(schema_err(path, format!("expected 39 columns, found {}", record.len())));
        }
        let f = |i: usize| parse_f64(path, &rollout_header()[i], &record[i]);
        let mut state = [0.0; 14];
        for (i, s) in state.iter_mut().enumerate() {
            *s = f(1 + i)?;
        }
        let mut gains = [0.0; 14];
        for (i, g) in gains.iter_mut().enumerate() {
            *g = f(16 + i)?;
        }
        rows.push(RolloutRow {
            t: f(0)?,
            state,
            action: parse_usize(path, "action", &record[15])?,
            gains,
            reward: f(30)?,
            u_t: f(31)?,
            tau: [f(32)?, f(33)?, f(34)?],
            r_d: [f(35)?, f(36)?, f(37)?],
            term: record[38].to_string(),
        });
    }
    Ok(rows)
}

pub fn curve_header() -> Vec<String> {
    ["episode", "return", "mean_loss", "epsilon", "env_steps"]
        .map(String::from)
        .to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    pub ret: f64,
    pub mean_loss: f64,
    pub epsilon: f64,
    pub env_steps: usize,
}

pub fn write_curve_csv(path: &Path, stats: &[EpisodeStats]) -> Result<(), LogError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(curve_header())?;
    for s in stats {
        w.write_record(&[
            s.episode.to_string(),
            fmt(s.ret),
            fmt(s.mean_loss),
            fmt(s.epsilon),
            s.env_steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>, LogError> {
    let mut reader = csv::Reader::from_path(path)?;
    check_header(path, &curve_header(), &mut reader)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 5 {
            return Err(schema_err(path, format!("expected 5 columns, found {}", record.len())));
        }
        rows.push(CurveRow {
            episode: parse_usize(path, "episode", &record[0])?,
            ret: parse_f64(path, "return", &record[1])?,
            mean_loss: parse_f64(path, "mean_loss", &record[2])?,
            epsilon: parse_f64(path, "epsilon", &record[3])?,
            env_steps: parse_usize(path, "env_steps", &record[4])?,
        });
    }
    Ok(rows)
}

pub fn actions_header() -> Vec<String> {
    let mut h = vec![
        "index".to_string(),
        "jerk_level".to_string(),
        "accel_level".to_string(),
        "vel_level".to_string(),
        "pos_level".to_string(),
    ];
    for i in 1..=14 {
        h.push(format!("k{i}"));
    }
    h.extend(["max_real", "min_gap", "union_mismatch"].map(String::from));
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRow {
    pub index: usize,
    pub levels: [usize; 4],
    pub gains: [f64; 14],
    pub max_real: f64,
    pub min_gap: f64,
    pub union_mismatch: f64,
}

/// Per-action table: every gain vector with its certificate.
pub fn write_actions_csv(path: &Path, table: &ActionTable) -> Result<(), LogError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(actions_header())?;
    for index in 0..table.len() {
        let levels = decode_action(index);
        let cert = table.certificate(index);
        let mut rec: Vec<String> = vec![index.to_string()];
        rec.extend(levels.iter().map(|l| l.to_string()));
        rec.extend(table.gain(index).as_array().iter().map(|v| fmt(*v)));
        rec.push(fmt(cert.max_real));
        rec.push(fmt(cert.min_gap));
        rec.push(fmt(cert.union_mismatch));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_actions_csv(path: &Path) -> Result<Vec<ActionRow>, LogError> {
    let mut reader = csv::Reader::from_path(path)?;
    check_header(path, &actions_header(), &mut reader)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 22 {
            return Err(schema_err(path, format!("expected 22 columns, found {}", record.len())));
        }
        let mut levels = [0usize; 4];
        for (i, l) in levels.iter_mut().enumerate() {
            *l = parse_usize(path, &actions_header()[1 + i], &record[1 + i])?;
        }
        let mut gains = [0.0; 14];
        for (i, g) in gains.iter_mut().enumerate() {
            *g = parse_f64(path, &actions_header()[5 + i], &record[5 + i])?;
        }
        rows.push(ActionRow {
            index: parse_usize(path, "index", &record[0])?,
            levels,
            gains,
            max_real: parse_f64(path, "max_real", &record[19])?,
            min_gap: parse_f64(path, "min_gap", &record[20])?,
            union_mismatch: parse_f64(path, "union_mismatch", &record[21])?,
        });
    }
    Ok(rows)
}

/// Human-readable audit of the table envelope against expected bounds, one
/// line per gain component plus a summary.
pub fn write_bounds_report(path: &Path, report: &BoundsReport) -> Result<(), LogError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "gain envelope audit (tolerance {} on each endpoint)",
        report.tolerance
    )?;
    for row in &report.rows {
        let marker = if row.matches(report.tolerance) { "ok" } else { "DEVIATES" };
        writeln!(
            out,
            "k{:<2} observed [{:.6}, {:.6}]  expected [{:.6}, {:.6}]  {marker}",
            row.component, row.observed_min, row.observed_max, row.expected_min, row.expected_max
        )?;
    }
    let deviations = report.deviations();
    if deviations.is_empty() {
        writeln!(out, "summary: all 14 components match the expected envelope")?;
    } else {
        writeln!(
            out,
            "summary: {} of {} components deviate from the expected envelope: {}",
            deviations.len(),
            report.rows.len(),
            deviations
                .iter()
                .map(|r| format!("k{}", r.component))
                .collect::<Vec<_>>()
                .join(", ")
        )?;
    }
    out.flush()?;
    Ok(())
}

fn figure_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn write_simple_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), LogError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready per-figure series for one episode. Writes six files into
/// `dir` and returns their paths:
///
/// - `fig_gains.csv`: applied action index and the 14 active gains
/// - `fig_errors.csv`: the 14 tracking error components
/// - `fig_position.csv`: position vs reference with an `in_blend` marker
/// - `fig_attitude.csv`: Euler angles
/// - `fig_inputs.csv`: realized thrust second derivative and torques
/// - `fig_reward.csv`: per-step reward and running return
pub fn write_figure_csvs(
    dir: &Path,
    outcomes: &[StepOutcome],
    t_f: f64,
) -> Result<Vec<PathBuf>, LogError> {
    let gains_path = figure_path(dir, "fig_gains.csv");
    let mut header = vec!["t".to_string(), "action".to_string()];
    for i in 1..=14 {
        header.push(format!("k{i}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_simple_csv(
        &gains_path,
        &header_refs,
        outcomes.iter().map(|o| {
            let mut rec = vec![fmt(o.info.t), o.transition.action.to_string()];
            rec.extend(o.info.gains.iter().map(|k| fmt(*k)));
            rec
        }),
    )?;

    let errors_path = figure_path(dir, "fig_errors.csv");
    write_simple_csv(
        &errors_path,
        &[
            "t", "e_rx", "e_ry", "e_rz", "e_vx", "e_vy", "e_vz", "e_ax", "e_ay", "e_az",
            "e_jx", "e_jy", "e_jz", "psi", "psi_dot",
        ],
        outcomes.iter().filter_map(|o| {
            o.info.errors.as_ref().map(|e| {
                let z = e.to_z();
                let mut rec = vec![fmt(o.info.t)];
                rec.extend(z.iter().map(|v| fmt(*v)));
                rec
            })
        }),
    )?;

    let position_path = figure_path(dir, "fig_position.csv");
    write_simple_csv(
        &position_path,
        &["t", "rx", "ry", "rz", "rd_x", "rd_y", "rd_z", "in_blend"],
        outcomes.iter().map(|o| {
            vec![
                fmt(o.info.t),
                fmt(o.info.state.r.x),
                fmt(o.info.state.r.y),
                fmt(o.info.state.r.z),
                fmt(o.info.reference.pos.x),
                fmt(o.info.reference.pos.y),
                fmt(o.info.reference.pos.z),
                if o.info.t < t_f { "1" } else { "0" }.to_string(),
            ]
        }),
    )?;

    let attitude_path = figure_path(dir, "fig_attitude.csv");
    write_simple_csv(
        &attitude_path,
        &["t", "phi", "theta", "psi"],
        outcomes.iter().map(|o| {
            vec![
                fmt(o.info.t),
                fmt(o.info.state.eta.x),
                fmt(o.info.state.eta.y),
                fmt(o.info.state.eta.z),
            ]
        }),
    )?;

    let inputs_path = figure_path(dir, "fig_inputs.csv");
    write_simple_csv(
        &inputs_path,
        &["t", "u_t", "tau_x", "tau_y", "tau_z"],
        outcomes.iter().map(|o| match &o.info.physical_input {
            Some(input) => vec![
                fmt(o.info.t),
                fmt(input.t_ddot),
                fmt(input.tau.x),
                fmt(input.tau.y),
                fmt(input.tau.z),
            ],
            None => vec![
                fmt(o.info.t),
                fmt(f64::NAN),
                fmt(f64::NAN),
                fmt(f64::NAN),
                fmt(f64::NAN),
            ],
        }),
    )?;

    let reward_path = figure_path(dir, "fig_reward.csv");
    let mut cumulative = 0.0;
    let reward_rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            cumulative += o.transition.reward;
            vec![fmt(o.info.t), fmt(o.transition.reward), fmt(cumulative)]
        })
        .collect();
    write_simple_csv(&reward_path, &["t", "reward", "cumulative"], reward_rows.into_iter())?;

    Ok(vec![gains_path, errors_path, position_path, attitude_path, inputs_path, reward_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{ErrorState, VirtualInput};
    use crate::dynamics::{PhysicalInput, QuadState};
    use crate::env::{FailureKind, Observation, StepInfo, Termination, Transition};
    use crate::trajectory::ReferenceSample;
    use nalgebra::Vector3;

    fn synthetic_outcome(t: f64, action: usize, reward: f64, failed: bool) -> StepOutcome {
        let mut state = QuadState::hover_at(Vector3::new(0.1, -0.25, 1.0 + t));
        state.v = Vector3::new(1e-17, -3.25e4, 0.125);
        state.eta = Vector3::new(0.01, -0.02, 0.003);
        let obs = Observation { state: state.to_array(), phase: (t / 5.0).min(1.0) };
        let errors = ErrorState {
            e_r: Vector3::new(0.1, 0.2, -0.3),
            e_v: Vector3::new(0.0, -1.5, 2.5e-9),
            e_a: Vector3::zeros(),
            e_j: Vector3::new(4.0, 5.0, 6.0),
            psi: 0.003,
            psi_dot: -0.125,
        };
        let (virtual_input, physical_input) = if failed {
            (None, None)
        } else {
            (
                Some(VirtualInput { t_ddot: 0.5, eta_ddot: Vector3::new(1.0, 2.0, 3.0) }),
                Some(PhysicalInput { t_ddot: 0.5, tau: Vector3::new(0.01, -0.02, 0.03) }),
            )
        };
        StepOutcome {
            transition: Transition {
                obs,
                action,
                reward,
                next_obs: obs,
                termination: if failed {
                    Some(Termination::Failure(FailureKind::AttitudeLimit))
                } else {
                    None
                },
            },
            info: StepInfo {
                proposed_action: action,
                action,
                switched: false,
                gains: [1.5; 14],
                virtual_input,
                physical_input,
                reference: ReferenceSample {
                    pos: Vector3::new(0.1, 0.2, 1.5),
                    vel: Vector3::zeros(),
                    acc: Vector3::zeros(),
                    jerk: Vector3::zeros(),
                    snap: Vector3::zeros(),
                },
                errors: if failed { None } else { Some(errors) },
                t,
                state,
            },
        }
    }

    #[test]
    fn rollout_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rollout.csv");
        let outcomes = vec![
            synthetic_outcome(0.01, 3, -0.5, false),
            synthetic_outcome(0.02, 3, -1.25e-7, false),
            synthetic_outcome(0.03, 17, -100.0, true),
        ];
        write_rollout_csv(&path, &outcomes).unwrap();
        let rows = read_rollout_csv(&path).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, out) in rows.iter().zip(&outcomes) {
            assert_eq!(row.t, out.info.t);
            assert_eq!(row.state, out.info.state.to_array());
            assert_eq!(row.action, out.transition.action);
            assert_eq!(row.reward, out.transition.reward);
            assert_eq!(row.r_d, [0.1, 0.2, 1.5]);
        }
        assert_eq!(rows[0].term, "");
        assert_eq!(rows[2].term, "attitude_limit");
        assert_eq!(rows[0].u_t, 0.5);
        assert!(rows[2].u_t.is_nan(), "aborted step logs no applied input");
    }

    #[test]
    fn curve_round_trips_bitwise() {
        use crate::dqn::EpisodeStats;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let stats = vec![
            EpisodeStats {
                episode: 0,
                ret: -123.456789,
                mean_loss: 0.0,
                epsilon: 1.0,
                env_steps: 1000,
                steps: 1000,
                failed: false,
            },
            EpisodeStats {
                episode: 1,
                ret: -1e-18,
                mean_loss: 17.25,
                epsilon: 0.981,
                env_steps: 1350,
                steps: 350,
                failed: true,
            },
        ];
        write_curve_csv(&path, &stats).unwrap();
        let rows = read_curve_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].ret, -123.456789);
        assert_eq!(rows[1].ret, -1e-18);
        assert_eq!(rows[1].mean_loss, 17.25);
        assert_eq!(rows[1].env_steps, 1350);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(matches!(read_curve_csv(&path), Err(LogError::Schema { .. })));
    }

    #[test]
    fn figure_files_have_expected_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let outcomes: Vec<StepOutcome> = (1..=20)
            .map(|i| synthetic_outcome(i as f64 * 0.5, 3, -0.1, false))
            .collect();
        let files = write_figure_csvs(dir.path(), &outcomes, 5.0).unwrap();
        assert_eq!(files.len(), 6);
        for f in &files {
            assert!(f.exists(), "{} missing", f.display());
        }
        let position = std::fs::read_to_string(dir.path().join("fig_position.csv")).unwrap();
        let lines: Vec<&str> = position.lines().collect();
        assert_eq!(lines[0], "t,rx,ry,rz,rd_x,rd_y,rd_z,in_blend");
        assert_eq!(lines.len(), 21);
        // Blend marker flips to 0 once t reaches 5.0 (rows 10 onward).
        assert!(lines[9].ends_with(",1"));
        assert!(lines[10].ends_with(",0"));
        let reward = std::fs::read_to_string(dir.path().join("fig_reward.csv")).unwrap();
        let last = reward.lines().last().unwrap();
        let cumulative: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
        assert!((cumulative - (-2.0)).abs() < 1e-12);
    }
}
