//! Quadcopter simulation and learned gain scheduling.

pub mod cli;
pub mod config;
pub mod controller;
pub mod dqn;
pub mod dynamics;
pub mod env;
pub mod gains;
pub mod logging;
pub mod trajectory;

pub use config::{ConfigError, RunConfig};
pub use controller::{ControlError, ErrorState, ExternalInput, InversionMaps, VirtualInput};
pub use dqn::{QNetwork, ReplayBuffer, TrainConfig, TrainResult};
pub use dynamics::{PhysicalInput, QuadState, VehicleParams};
pub use env::{
    EpisodeConfig, FailureKind, Observation, QuadEnv, RewardWeights, StepInfo, StepOutcome,
    Termination, Transition,
};
pub use gains::{ActionTable, Certificate, DwellGuard, GainVector, LevelGains};
pub use logging::LogError;
pub use trajectory::{QuinticBlend, ReferenceSample, ReferenceTrajectory};
