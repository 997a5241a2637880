//! Episodic environment: fly the vehicle from a randomized spawn to a hover
//! target along a quintic blend reference, choosing one certified gain vector
//! per control step.
//!
//! One instance is single-threaded mutable state. Transitions are plain
//! values and safe to hand elsewhere.

use crate::controller::{
    derive_errors, external_input, inversion_maps, physical_input, virtual_input, ControlError,
    ErrorState, VirtualInput,
};
use crate::dynamics::{rk4_step, DynamicsError, PhysicalInput, QuadState, VehicleParams};
use crate::gains::{ActionTable, DwellGuard};
use crate::trajectory::{ReferenceSample, ReferenceTrajectory};
use nalgebra::{Vector3, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
}

/// Reward weights. All penalty weights are nonnegative so the reward is
/// never positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    /// Position error weight.
    pub w_r: f64,
    /// Velocity error weight.
    pub w_v: f64,
    /// Attitude deviation weight.
    pub w_eta: f64,
    /// Body-rate weight.
    pub w_omega: f64,
    /// Input magnitude weight.
    pub w_u: f64,
    /// Switch penalty, charged when the applied action changes.
    pub w_s: f64,
    /// Penalize the realized input (thrust acceleration, torques) instead of
    /// the commanded virtual input (thrust acceleration, Euler accelerations).
    pub penalize_physical_input: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_r: 4.0,
            w_v: 1.0,
            w_eta: 1.0,
            w_omega: 0.1,
            w_u: 1e-4,
            w_s: 0.01,
            penalize_physical_input: false,
        }
    }
}

/// Initial-state distribution: position uniform in a cube, roll/pitch/yaw
/// uniform in a symmetric interval, everything else zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnConfig {
    /// Cube center [m].
    pub center: Vector3<f64>,
    /// Cube half-width [m]. Zero collapses the distribution to the center.
    pub half_width: f64,
    /// Attitude half-range [rad] for each Euler angle.
    pub attitude_half_angle: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            center: Vector3::zeros(),
            half_width: 1.0,
            attitude_half_angle: 5.0_f64.to_radians(),
        }
    }
}

/// Episode abort limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbortLimits {
    /// Roll/pitch magnitude limit [rad].
    pub attitude_limit: f64,
    /// Distance from the hover target beyond which the episode aborts [m].
    pub position_limit: f64,
    /// Flat reward paid on an abort step.
    pub abort_reward: f64,
}

impl Default for AbortLimits {
    fn default() -> Self {
        Self {
            attitude_limit: 80.0_f64.to_radians(),
            position_limit: 20.0,
            abort_reward: -100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    /// Control/integration period [s].
    pub dt: f64,
    /// Episode duration [s].
    pub episode_length: f64,
    /// Blend duration of the reference [s].
    pub t_f: f64,
    pub spawn: SpawnConfig,
    /// Hover target [m].
    pub r_star: Vector3<f64>,
    pub limits: AbortLimits,
    pub weights: RewardWeights,
    /// Minimum number of steps between applied gain changes.
    pub dwell_steps: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            episode_length: 10.0,
            t_f: 5.0,
            spawn: SpawnConfig::default(),
            r_star: Vector3::new(1.0, 1.0, 1.5),
            limits: AbortLimits::default(),
            weights: RewardWeights::default(),
            dwell_steps: 10,
        }
    }
}

impl EpisodeConfig {
    /// Number of control steps in a full episode.
    pub fn steps(&self) -> usize {
        (self.episode_length / self.dt).round() as usize
    }

    fn validate(&self) -> Result<(), EnvError> {
        if !(self.dt > 0.0) {
            return Err(EnvError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_f > 0.0) || self.episode_length < self.t_f {
            return Err(EnvError::InvalidConfig(format!(
                "need episode_length >= t_f > 0, got episode_length = {}, t_f = {}",
                self.episode_length, self.t_f
            )));
        }
        let w = &self.weights;
        if [w.w_r, w.w_v, w.w_eta, w.w_omega, w.w_u, w.w_s]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(EnvError::InvalidConfig("reward weights must be nonnegative".into()));
        }
        if !(self.limits.attitude_limit > 0.0)
            || self.limits.attitude_limit >= std::f64::consts::FRAC_PI_2
        {
            return Err(EnvError::InvalidConfig(format!(
                "attitude limit must lie in (0, pi/2) rad, got {}",
                self.limits.attitude_limit
            )));
        }
        if !(self.limits.position_limit > 0.0) {
            return Err(EnvError::InvalidConfig("position limit must be positive".into()));
        }
        if !(self.spawn.half_width >= 0.0) || !(self.spawn.attitude_half_angle >= 0.0) {
            return Err(EnvError::InvalidConfig("spawn ranges must be nonnegative".into()));
        }
        Ok(())
    }
}

/// What the policy sees: the 14 physical states plus a phase variable that
/// ramps from 0 to 1 over the blend and saturates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub state: [f64; 14],
    /// min(t / t_f, 1).
    pub phase: f64,
}

impl Observation {
    pub const LEN: usize = 15;

    pub fn to_array(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        out[..14].copy_from_slice(&self.state);
        out[14] = self.phase;
        out
    }
}

/// Why an episode aborted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Roll or pitch magnitude exceeded the configured limit.
    AttitudeLimit,
    /// Distance from the hover target exceeded the configured limit.
    PositionLimit,
    /// Specific thrust fell below the inversion floor.
    ThrustCollapse,
    /// Input map determinant fell below the inversion floor.
    SingularInversion,
    /// Euler kinematics singular (pitch at +-90 degrees).
    AttitudeSingularity,
    /// A state component left the representable range.
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The episode ran its full length. Value estimates should bootstrap
    /// through this boundary; it is not a property of the state.
    TimeLimit,
    Failure(FailureKind),
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::Failure(_))
    }

    /// Stable tag for logs.
    pub fn tag(&self) -> &'static str {
        match self {
            Termination::TimeLimit => "time_limit",
            Termination::Failure(FailureKind::AttitudeLimit) => "attitude_limit",
            Termination::Failure(FailureKind::PositionLimit) => "position_limit",
            Termination::Failure(FailureKind::ThrustCollapse) => "thrust_collapse",
            Termination::Failure(FailureKind::SingularInversion) => "singular_inversion",
            Termination::Failure(FailureKind::AttitudeSingularity) => "attitude_singularity",
            Termination::Failure(FailureKind::NonFinite) => "non_finite",
        }
    }
}

/// One replay record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    /// Action actually applied (after the dwell filter).
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    pub termination: Option<Termination>,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.termination.is_some()
    }
}

/// Diagnostics for logging, all post-step unless noted.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// Action requested by the policy (pre dwell filter).
    pub proposed_action: usize,
    /// Action applied.
    pub action: usize,
    /// Whether the applied action changed from the previous step.
    pub switched: bool,
    /// Gains applied over this step.
    pub gains: [f64; 14],
    /// Commanded virtual input; absent when the controller aborted.
    pub virtual_input: Option<VirtualInput>,
    /// Realized input; absent when the controller aborted.
    pub physical_input: Option<PhysicalInput>,
    /// Reference at the post-step time.
    pub reference: ReferenceSample,
    /// Tracking errors at the post-step state; absent on failure steps.
    pub errors: Option<ErrorState>,
    /// Time after the step [s].
    pub t: f64,
    /// State after the step.
    pub state: QuadState,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub transition: Transition,
    pub info: StepInfo,
}

/// Everything needed to resume an episode mid-flight.
#[derive(Debug, Clone)]
pub struct EnvSnapshot {
    state: QuadState,
    t: f64,
    step_idx: usize,
    dwell: DwellGuard,
    prev_action: Option<usize>,
    done: bool,
    reference: ReferenceTrajectory,
}

/// Reward of one step from post-step quantities. `u` is the 4-component
/// input the config selects (virtual by default). Never positive for
/// nonnegative weights.
#[allow(clippy::too_many_arguments)]
pub fn reward_fn(
    e_r: &Vector3<f64>,
    e_v: &Vector3<f64>,
    eta: &Vector3<f64>,
    omega: &Vector3<f64>,
    u: &Vector4<f64>,
    action: usize,
    prev_action: Option<usize>,
    weights: &RewardWeights,
) -> f64 {
    let switched = prev_action.is_some_and(|p| p != action);
    -(weights.w_r * e_r.norm_squared()
        + weights.w_v * e_v.norm_squared()
        + weights.w_eta * eta.norm_squared()
        + weights.w_omega * omega.norm_squared())
        - weights.w_u * u.norm_squared()
        - if switched { weights.w_s } else { 0.0 }
}

pub struct QuadEnv {
    table: Arc<ActionTable>,
    params: VehicleParams,
    config: EpisodeConfig,
    state: QuadState,
    reference: ReferenceTrajectory,
    t: f64,
    step_idx: usize,
    dwell: DwellGuard,
    prev_action: Option<usize>,
    done: bool,
}

impl QuadEnv {
    pub fn new(
        table: Arc<ActionTable>,
        params: VehicleParams,
        config: EpisodeConfig,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        if table.is_empty() {
            return Err(EnvError::InvalidConfig("action table is empty".into()));
        }
        let reference = ReferenceTrajectory::new(config.spawn.center, config.r_star, config.t_f)
            .expect("validated t_f");
        let dwell = DwellGuard::new(config.dwell_steps);
        Ok(Self {
            table,
            params,
            config,
            state: QuadState::hover_at(Vector3::zeros()),
            reference,
            t: 0.0,
            step_idx: 0,
            dwell,
            prev_action: None,
            done: true,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn table(&self) -> &Arc<ActionTable> {
        &self.table
    }

    pub fn state(&self) -> &QuadState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Current observation.
    pub fn observation(&self) -> Observation {
        Observation {
            state: self.state.to_array(),
            phase: (self.t / self.config.t_f).min(1.0),
        }
    }

    /// Start a fresh episode from a sampled spawn state. Deterministic: the
    /// same seed reproduces the same episode start.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spawn = &self.config.spawn;
        let r0 = Vector3::new(
            spawn.center.x + spawn.half_width * rng.random_range(-1.0..1.0),
            spawn.center.y + spawn.half_width * rng.random_range(-1.0..1.0),
            spawn.center.z + spawn.half_width * rng.random_range(-1.0..1.0),
        );
        let eta = Vector3::new(
            spawn.attitude_half_angle * rng.random_range(-1.0..1.0),
            spawn.attitude_half_angle * rng.random_range(-1.0..1.0),
            spawn.attitude_half_angle * rng.random_range(-1.0..1.0),
        );
        let mut state = QuadState::hover_at(r0);
        state.eta = eta;
        self.begin_episode(state)
    }

    /// Start an episode from an exact state (the reference still blends from
    /// the state's position to the configured target).
    pub fn reset_from(&mut self, state: QuadState) -> Observation {
        self.begin_episode(state)
    }

    fn begin_episode(&mut self, state: QuadState) -> Observation {
        self.reference = ReferenceTrajectory::new(state.r, self.config.r_star, self.config.t_f)
            .expect("validated t_f");
        self.state = state;
        self.t = 0.0;
        self.step_idx = 0;
        self.dwell = DwellGuard::new(self.config.dwell_steps);
        self.prev_action = None;
        self.done = false;
        self.observation()
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            state: self.state,
            t: self.t,
            step_idx: self.step_idx,
            dwell: self.dwell.clone(),
            prev_action: self.prev_action,
            done: self.done,
            reference: self.reference.clone(),
        }
    }

    pub fn restore(&mut self, snapshot: &EnvSnapshot) {
        self.state = snapshot.state;
        self.t = snapshot.t;
        self.step_idx = snapshot.step_idx;
        self.dwell = snapshot.dwell.clone();
        self.prev_action = snapshot.prev_action;
        self.done = snapshot.done;
        self.reference = snapshot.reference.clone();
    }

    /// Advance one control step. The proposed action is filtered by the
    /// dwell guard; the applied gains drive the controller, the resulting
    /// input is held over `dt`, and the reward is computed from post-step
    /// quantities. Panics when called on a terminated episode.
    pub fn step(&mut self, proposed_action: usize) -> StepOutcome {
        assert!(!self.done, "step called on a terminated episode; call reset first");
        assert!(
            proposed_action < self.table.len(),
            "action index {proposed_action} out of range for table of {}",
            self.table.len()
        );
        let obs = self.observation();
        let action = self.dwell.filter(proposed_action, self.step_idx);
        let prev_action = self.prev_action;
        let switched = prev_action.is_some_and(|p| p != action);
        let gains = *self.table.gain(action);
        self.prev_action = Some(action);

        let controller_result: Result<(VirtualInput, PhysicalInput), ControlError> = (|| {
            let sample = self.reference.sample(self.t);
            let errors = derive_errors(&self.state, &sample, &self.params)?;
            let s = external_input(&errors, &gains);
            let maps = inversion_maps(&self.state, &self.params)?;
            let u = virtual_input(&maps, &s)?;
            let input = physical_input(&self.state, &u, &self.params)?;
            Ok((u, input))
        })();

        let (u, input) = match controller_result {
            Ok(pair) => pair,
            Err(err) => {
                return self.abort(obs, proposed_action, action, switched, gains, None, None, failure_kind(&err));
            }
        };

        let next_state = match rk4_step(&self.state, &input, &self.params, self.config.dt) {
            Ok(s) => s,
            Err(DynamicsError::SingularAttitude { .. }) => {
                return self.abort(
                    obs,
                    proposed_action,
                    action,
                    switched,
                    gains,
                    Some(u),
                    Some(input),
                    FailureKind::AttitudeSingularity,
                );
            }
        };

        self.state = next_state;
        self.step_idx += 1;
        self.t = self.step_idx as f64 * self.config.dt;

        if let Some(kind) = self.post_step_failure() {
            return self.abort(obs, proposed_action, action, switched, gains, Some(u), Some(input), kind);
        }

        let sample = self.reference.sample(self.t);
        let errors = match derive_errors(&self.state, &sample, &self.params) {
            Ok(e) => e,
            Err(_) => {
                return self.abort(
                    obs,
                    proposed_action,
                    action,
                    switched,
                    gains,
                    Some(u),
                    Some(input),
                    FailureKind::AttitudeSingularity,
                );
            }
        };

        let penalized = if self.config.weights.penalize_physical_input {
            Vector4::new(input.t_ddot, input.tau.x, input.tau.y, input.tau.z)
        } else {
            u.to_vector()
        };
        let reward = reward_fn(
            &errors.e_r,
            &errors.e_v,
            &self.state.eta,
            &self.state.omega,
            &penalized,
            action,
            prev_action,
            &self.config.weights,
        );

        let termination = if self.step_idx >= self.config.steps() {
            self.done = true;
            Some(Termination::TimeLimit)
        } else {
            None
        };

        StepOutcome {
            transition: Transition {
                obs,
                action,
                reward,
                next_obs: self.observation(),
                termination,
            },
            info: StepInfo {
                proposed_action,
                action,
                switched,
                gains: *gains.as_array(),
                virtual_input: Some(u),
                physical_input: Some(input),
                reference: sample,
                errors: Some(errors),
                t: self.t,
                state: self.state,
            },
        }
    }

    fn post_step_failure(&self) -> Option<FailureKind> {
        if !self.state.is_finite() {
            return Some(FailureKind::NonFinite);
        }
        if self.state.eta.x.abs() > self.config.limits.attitude_limit
            || self.state.eta.y.abs() > self.config.limits.attitude_limit
        {
            return Some(FailureKind::AttitudeLimit);
        }
        if (self.state.r - self.config.r_star).norm() > self.config.limits.position_limit {
            return Some(FailureKind::PositionLimit);
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn abort(
        &mut self,
        obs: Observation,
        proposed_action: usize,
        action: usize,
        switched: bool,
        gains: crate::gains::GainVector,
        u: Option<VirtualInput>,
        input: Option<PhysicalInput>,
        kind: FailureKind,
    ) -> StepOutcome {
        self.done = true;
        let sample = self.reference.sample(self.t);
        StepOutcome {
            transition: Transition {
                obs,
                action,
                reward: self.config.limits.abort_reward,
                next_obs: self.observation(),
                termination: Some(Termination::Failure(kind)),
            },
            info: StepInfo {
                proposed_action,
                action,
                switched,
                gains: *gains.as_array(),
                virtual_input: u,
                physical_input: input,
                reference: sample,
                errors: None,
                t: self.t,
                state: self.state,
            },
        }
    }
}

fn failure_kind(err: &ControlError) -> FailureKind {
    match err {
        ControlError::Singular(_) => FailureKind::AttitudeSingularity,
        ControlError::ThrustCollapse { .. } => FailureKind::ThrustCollapse,
        ControlError::SingularInversion { .. } => FailureKind::SingularInversion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::{
        build_action_table, encode_action, DEFAULT_NOMINAL_POLES, DEFAULT_SCALE_GRID,
        DEFAULT_YAW_GAINS,
    };
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn shared_table() -> Arc<ActionTable> {
        static TABLE: OnceLock<Arc<ActionTable>> = OnceLock::new();
        TABLE
            .get_or_init(|| {
                Arc::new(
                    build_action_table(
                        DEFAULT_NOMINAL_POLES,
                        DEFAULT_SCALE_GRID,
                        DEFAULT_YAW_GAINS,
                    )
                    .unwrap(),
                )
            })
            .clone()
    }

    fn make_env(config: EpisodeConfig) -> QuadEnv {
        QuadEnv::new(shared_table(), VehicleParams::default(), config).unwrap()
    }

    fn mid_action() -> usize {
        encode_action([2, 2, 2, 2])
    }

    #[test]
    fn reset_is_deterministic() {
        let mut env = make_env(EpisodeConfig::default());
        let a = env.reset(42);
        let b = env.reset(42);
        assert_eq!(a.to_array(), b.to_array());
        let c = env.reset(43);
        assert_ne!(a.to_array(), c.to_array());
    }

    #[test]
    fn reset_respects_spawn_ranges() {
        let config = EpisodeConfig::default();
        let mut env = make_env(config.clone());
        for seed in 0..32 {
            let obs = env.reset(seed);
            assert_eq!(obs.phase, 0.0);
            let s = obs.state;
            for i in 0..3 {
                assert!(s[i].abs() <= config.spawn.half_width);
                assert!(s[3 + i].abs() == 0.0, "velocity starts at zero");
                assert!(s[6 + i].abs() <= config.spawn.attitude_half_angle);
                assert_eq!(s[9 + i], 0.0, "rates start at zero");
            }
            assert_eq!(s[12], 0.0);
            assert_eq!(s[13], 0.0);
        }
    }

    #[test]
    fn zero_width_spawn_is_exact() {
        let mut config = EpisodeConfig::default();
        config.spawn.center = Vector3::new(0.25, -0.5, 1.0);
        config.spawn.half_width = 0.0;
        config.spawn.attitude_half_angle = 0.0;
        let mut env = make_env(config);
        let obs = env.reset(7);
        assert_eq!(obs.state[0], 0.25);
        assert_eq!(obs.state[1], -0.5);
        assert_eq!(obs.state[2], 1.0);
        assert_eq!(obs.state[6], 0.0);
        assert_eq!(obs.state[7], 0.0);
        assert_eq!(obs.state[8], 0.0);
    }

    #[test]
    fn hover_on_target_with_held_action_earns_zero_reward() {
        let mut config = EpisodeConfig::default();
        config.r_star = Vector3::new(0.0, 0.0, 1.0);
        config.spawn.center = config.r_star;
        config.spawn.half_width = 0.0;
        config.spawn.attitude_half_angle = 0.0;
        let mut env = make_env(config);
        env.reset(0);
        for _ in 0..20 {
            let out = env.step(mid_action());
            assert_eq!(out.transition.reward, 0.0);
            assert!(out.transition.termination.is_none());
        }
    }

    #[test]
    fn phase_ramps_and_saturates() {
        let mut env = make_env(EpisodeConfig::default());
        env.reset(3);
        let mut last_phase = 0.0;
        let mut saturated = 0;
        for _ in 0..env.config().steps() {
            let out = env.step(mid_action());
            let phase = out.transition.next_obs.phase;
            assert!(phase >= last_phase, "phase must be nondecreasing");
            if out.info.t >= env.config().t_f {
                assert_eq!(phase, 1.0);
                saturated += 1;
            }
            last_phase = phase;
            if out.transition.done() {
                break;
            }
        }
        assert!(saturated >= 500);
    }

    #[test]
    fn full_episode_is_exactly_one_thousand_steps() {
        let mut env = make_env(EpisodeConfig::default());
        env.reset(11);
        let mut steps = 0;
        loop {
            let out = env.step(mid_action());
            steps += 1;
            if let Some(term) = out.transition.termination {
                assert_eq!(term, Termination::TimeLimit);
                assert!(!term.is_failure());
                break;
            }
            assert!(steps < 2000, "episode failed to terminate");
        }
        assert_eq!(steps, 1000);
    }

    #[test]
    fn near_free_fall_aborts_with_flat_penalty() {
        let params = VehicleParams::default();
        let mut env = make_env(EpisodeConfig::default());
        let mut state = QuadState::hover_at(Vector3::new(0.0, 0.0, 1.0));
        state.t_dev = -0.99 * params.hover_thrust();
        env.reset_from(state);
        let out = env.step(mid_action());
        assert_eq!(
            out.transition.termination,
            Some(Termination::Failure(FailureKind::ThrustCollapse))
        );
        assert_eq!(out.transition.reward, -100.0);
        assert!(env.is_done());
        assert!(out.info.virtual_input.is_none());
    }

    #[test]
    fn far_spawn_aborts_on_position_limit() {
        let mut env = make_env(EpisodeConfig::default());
        let state = QuadState::hover_at(Vector3::new(25.0, 0.0, 0.0));
        env.reset_from(state);
        let out = env.step(mid_action());
        assert_eq!(
            out.transition.termination,
            Some(Termination::Failure(FailureKind::PositionLimit))
        );
        assert_eq!(out.transition.reward, -100.0);
    }

    #[test]
    #[should_panic(expected = "terminated episode")]
    fn stepping_a_done_episode_panics() {
        let mut env = make_env(EpisodeConfig::default());
        env.step(0);
    }

    #[test]
    fn dwell_guard_gates_applied_switches() {
        let mut env = make_env(EpisodeConfig::default());
        env.reset(5);
        let a = mid_action();
        let b = encode_action([2, 2, 2, 3]);
        let mut applied = Vec::new();
        for i in 0..60 {
            let proposed = if i % 2 == 0 { a } else { b };
            let out = env.step(proposed);
            applied.push(out.transition.action);
            assert!(out.transition.termination.is_none());
        }
        let mut change_steps = Vec::new();
        for i in 1..applied.len() {
            if applied[i] != applied[i - 1] {
                change_steps.push(i);
            }
        }
        assert!(!change_steps.is_empty(), "switches must eventually pass the guard");
        for w in change_steps.windows(2) {
            assert!(w[1] - w[0] >= env.config().dwell_steps);
        }
    }

    #[test]
    fn snapshot_restore_replays_bitwise() {
        let mut env = make_env(EpisodeConfig::default());
        env.reset(9);
        let actions = [0usize, 0, 0, 312, 312, 312, 624, 624, 624, 100, 100, 100];
        for a in &actions[..6] {
            env.step(*a);
        }
        let snap = env.snapshot();
        let first: Vec<_> = actions[6..]
            .iter()
            .map(|a| {
                let out = env.step(*a);
                (out.transition.reward, out.transition.next_obs.to_array())
            })
            .collect();
        env.restore(&snap);
        let second: Vec<_> = actions[6..]
            .iter()
            .map(|a| {
                let out = env.step(*a);
                (out.transition.reward, out.transition.next_obs.to_array())
            })
            .collect();
        assert_eq!(first, second);
    }

    #[test]
    fn reward_examples_by_hand() {
        let w = RewardWeights::default();
        let zero = Vector3::zeros();
        let u0 = Vector4::zeros();
        assert_eq!(reward_fn(&zero, &zero, &zero, &zero, &u0, 3, Some(3), &w), 0.0);
        assert_eq!(reward_fn(&zero, &zero, &zero, &zero, &u0, 3, Some(4), &w), -0.01);
        assert_eq!(reward_fn(&zero, &zero, &zero, &zero, &u0, 3, None, &w), 0.0);
        let e_r = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(reward_fn(&e_r, &zero, &zero, &zero, &u0, 3, Some(3), &w), -4.0);
    }

    #[test]
    fn reward_is_never_positive() {
        use rand::Rng;
        use rand::SeedableRng;
        let w = RewardWeights::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let v = |rng: &mut rand_chacha::ChaCha8Rng| {
                Vector3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                )
            };
            let u = Vector4::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            );
            let e_r = v(&mut rng);
            let e_v = v(&mut rng);
            let eta = v(&mut rng);
            let omega = v(&mut rng);
            let a = rng.random_range(0..625);
            let p = rng.random_range(0..625);
            assert!(reward_fn(&e_r, &e_v, &eta, &omega, &u, a, Some(p), &w) <= 0.0);
        }
    }

    #[test]
    fn blend_tracking_settles_to_target() {
        // A certified mid-grid gain flown open-loop over the full episode
        // must land on the hover target: a smoke check of the whole
        // controller-plant loop before the learned scheduler enters.
        let mut env = make_env(EpisodeConfig::default());
        env.reset(21);
        let out = loop {
            let out = env.step(mid_action());
            if out.transition.done() {
                assert_eq!(out.transition.termination, Some(Termination::TimeLimit));
                break out;
            }
        };
        let errors = out.info.errors.unwrap();
        assert!(errors.e_r.norm() < 1e-3, "position error {}", errors.e_r.norm());
        assert!(out.info.state.v.norm() < 1e-3);
        let info_state = out.info.state;
        assert_relative_eq!(
            Vector3::new(info_state.r.x, info_state.r.y, info_state.r.z),
            env.config().r_star,
            epsilon = 1e-3
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let table = shared_table();
        let params = VehicleParams::default();
        let mut c = EpisodeConfig::default();
        c.dt = 0.0;
        assert!(QuadEnv::new(table.clone(), params.clone(), c).is_err());
        let mut c = EpisodeConfig::default();
        c.t_f = 12.0;
        assert!(QuadEnv::new(table.clone(), params.clone(), c).is_err());
        let mut c = EpisodeConfig::default();
        c.weights.w_r = -1.0;
        assert!(QuadEnv::new(table.clone(), params.clone(), c).is_err());
        let mut c = EpisodeConfig::default();
        c.limits.attitude_limit = 2.0;
        assert!(QuadEnv::new(table, params, c).is_err());
    }
}
