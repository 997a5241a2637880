//! Run configuration: one JSON document covering the vehicle, the episode,
//! the gain library, training, and evaluation. Every section has defaults;
//! unknown keys are rejected so typos fail loudly instead of silently
//! running a different experiment.

use crate::dqn::TrainConfig;
use crate::dynamics::VehicleParams;
use crate::env::{AbortLimits, EpisodeConfig, RewardWeights, SpawnConfig};
use crate::gains::{
    DEFAULT_NOMINAL_POLES, DEFAULT_SCALE_GRID, DEFAULT_YAW_GAINS, REFERENCE_GAIN_BOUNDS,
};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    /// Mass [kg].
    pub mass: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Principal inertia diagonal (Ixx, Iyy, Izz) [kg m^2].
    pub inertia: [f64; 3],
}

impl Default for VehicleSection {
    fn default() -> Self {
        let p = VehicleParams::default();
        Self {
            mass: p.mass,
            gravity: p.gravity,
            inertia: [p.inertia.x, p.inertia.y, p.inertia.z],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnSection {
    /// Cube center [m].
    pub center: [f64; 3],
    /// Cube half-width [m].
    pub half_width: f64,
    /// Attitude half-range [deg].
    pub attitude_half_angle_deg: f64,
}

impl Default for SpawnSection {
    fn default() -> Self {
        let s = SpawnConfig::default();
        Self {
            center: [s.center.x, s.center.y, s.center.z],
            half_width: s.half_width,
            attitude_half_angle_deg: s.attitude_half_angle.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    /// Roll/pitch abort limit [deg].
    pub attitude_limit_deg: f64,
    /// Distance-from-target abort limit [m].
    pub position_limit: f64,
    /// Flat reward paid on an abort step.
    pub abort_reward: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        let l = AbortLimits::default();
        Self {
            attitude_limit_deg: l.attitude_limit.to_degrees(),
            position_limit: l.position_limit,
            abort_reward: l.abort_reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    /// Control/integration period [s].
    pub dt: f64,
    /// Episode duration [s].
    pub episode_length: f64,
    /// Reference blend duration [s].
    pub t_f: f64,
    /// Hover target [m].
    pub r_star: [f64; 3],
    pub spawn: SpawnSection,
    pub limits: LimitsSection,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        let e = EpisodeConfig::default();
        Self {
            dt: e.dt,
            episode_length: e.episode_length,
            t_f: e.t_f,
            r_star: [e.r_star.x, e.r_star.y, e.r_star.z],
            spawn: SpawnSection::default(),
            limits: LimitsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub w_r: f64,
    pub w_v: f64,
    pub w_eta: f64,
    pub w_omega: f64,
    pub w_u: f64,
    pub w_s: f64,
    pub penalize_physical_input: bool,
}

impl Default for RewardSection {
    fn default() -> Self {
        let w = RewardWeights::default();
        Self {
            w_r: w.w_r,
            w_v: w.w_v,
            w_eta: w.w_eta,
            w_omega: w.w_omega,
            w_u: w.w_u,
            w_s: w.w_s,
            penalize_physical_input: w.penalize_physical_input,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSection {
    /// Nominal closed-loop pole family for the translational axes.
    pub nominal_poles: [f64; 4],
    /// Per-level pole scale factors (strictly increasing, positive).
    pub scale_grid: [f64; 5],
    /// Yaw (rate, angle) gain pair shared by every action.
    pub yaw_gains: [f64; 2],
    /// Minimum steps between applied gain switches.
    pub dwell_steps: usize,
    /// Expected componentwise [min, max] envelope for the audit, k1..k14.
    pub bounds: Vec<[f64; 2]>,
    /// Audit tolerance on each envelope endpoint.
    pub bounds_tolerance: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        Self {
            nominal_poles: DEFAULT_NOMINAL_POLES,
            scale_grid: DEFAULT_SCALE_GRID,
            yaw_gains: [DEFAULT_YAW_GAINS.0, DEFAULT_YAW_GAINS.1],
            dwell_steps: 10,
            bounds: REFERENCE_GAIN_BOUNDS.to_vec(),
            bounds_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Evaluation start position [m] (attitude level, all rates zero).
    pub r0: [f64; 3],
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { r0: [0.0, 0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub vehicle: VehicleSection,
    pub episode: EpisodeSection,
    pub reward: RewardSection,
    pub gains: GainsSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    /// Directory all artifacts are written to.
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            vehicle: VehicleSection::default(),
            episode: EpisodeSection::default(),
            reward: RewardSection::default(),
            gains: GainsSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.gains.bounds.len() != 14 {
            return Err(ConfigError::Invalid(format!(
                "gains.bounds must list 14 components, got {}",
                self.gains.bounds.len()
            )));
        }
        if !(self.gains.bounds_tolerance > 0.0) {
            return Err(ConfigError::Invalid("gains.bounds_tolerance must be positive".into()));
        }
        if !(self.vehicle.mass > 0.0) || !(self.vehicle.gravity > 0.0) {
            return Err(ConfigError::Invalid("vehicle mass and gravity must be positive".into()));
        }
        if self.vehicle.inertia.iter().any(|i| !(*i > 0.0)) {
            return Err(ConfigError::Invalid("vehicle inertia entries must be positive".into()));
        }
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        VehicleParams {
            mass: self.vehicle.mass,
            gravity: self.vehicle.gravity,
            inertia: Vector3::new(
                self.vehicle.inertia[0],
                self.vehicle.inertia[1],
                self.vehicle.inertia[2],
            ),
        }
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            dt: self.episode.dt,
            episode_length: self.episode.episode_length,
            t_f: self.episode.t_f,
            spawn: SpawnConfig {
                center: Vector3::from(self.episode.spawn.center),
                half_width: self.episode.spawn.half_width,
                attitude_half_angle: self.episode.spawn.attitude_half_angle_deg.to_radians(),
            },
            r_star: Vector3::from(self.episode.r_star),
            limits: AbortLimits {
                attitude_limit: self.episode.limits.attitude_limit_deg.to_radians(),
                position_limit: self.episode.limits.position_limit,
                abort_reward: self.episode.limits.abort_reward,
            },
            weights: RewardWeights {
                w_r: self.reward.w_r,
                w_v: self.reward.w_v,
                w_eta: self.reward.w_eta,
                w_omega: self.reward.w_omega,
                w_u: self.reward.w_u,
                w_s: self.reward.w_s,
                penalize_physical_input: self.reward.penalize_physical_input,
            },
            dwell_steps: self.gains.dwell_steps,
        }
    }

    pub fn yaw_gains(&self) -> (f64, f64) {
        (self.gains.yaw_gains[0], self.gains.yaw_gains[1])
    }

    pub fn eval_start(&self) -> Vector3<f64> {
        Vector3::from(self.eval.r0)
    }
}
