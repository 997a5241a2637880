//! Snap-based tracking controller.
//!
//! The outer loop works in flat coordinates: position error and its first
//! three derivatives plus yaw error form a 14-dimensional error state z whose
//! dynamics are chains of integrators driven by commanded snap s_r and
//! commanded yaw acceleration s_psi. A gain vector maps z linearly to those
//! commands. The inner maps invert the vehicle model exactly: commanded snap
//! and yaw acceleration translate into second derivative of thrust u_T and
//! Euler-angle acceleration u_eta through the affine relation s = M u + n,
//! and u_eta is realized as a body torque by inverting the attitude
//! kinematics (exact feedback linearization, no small-angle approximation).

use crate::dynamics::{
    euler_kinematic_matrix, euler_kinematic_matrix_dot, rotation_matrix, DynamicsError,
    PhysicalInput, QuadState, VehicleParams,
};
use crate::gains::GainVector;
use crate::trajectory::ReferenceSample;
use nalgebra::{Matrix4, SVector, Vector3, Vector4};
use thiserror::Error;

/// Thrust-collapse guard: the inversion degenerates as the specific thrust
/// f = (m g + T_dev)/m approaches zero (three columns of M scale with f), so
/// states with f below this fraction of g abort instead of inverting.
pub const THRUST_COLLAPSE_FRACTION: f64 = 0.05;
/// Determinant guard for the input map.
pub const MIN_INPUT_MAP_DET: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Singular(#[from] DynamicsError),
    #[error(
        "thrust acceleration {f:.4} m/s^2 below collapse threshold {threshold:.4} m/s^2"
    )]
    ThrustCollapse { f: f64, threshold: f64 },
    #[error("input map near-singular: |det M| = {det:.3e}")]
    SingularInversion { det: f64 },
}

/// Tracking error state z = (e_r, e_v, e_a, e_j, psi, psi_dot).
///
/// Errors are state minus reference; acceleration and jerk of the vehicle
/// are reconstructed from the model (they are not stored states).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    /// Position error [m].
    pub e_r: Vector3<f64>,
    /// Velocity error [m/s].
    pub e_v: Vector3<f64>,
    /// Acceleration error [m/s^2].
    pub e_a: Vector3<f64>,
    /// Jerk error [m/s^3].
    pub e_j: Vector3<f64>,
    /// Yaw angle [rad] (regulated to zero).
    pub psi: f64,
    /// Yaw rate [rad/s].
    pub psi_dot: f64,
}

impl ErrorState {
    /// Flatten to the 14-vector ordering used by the error dynamics.
    pub fn to_z(&self) -> SVector<f64, 14> {
        let mut z = SVector::<f64, 14>::zeros();
        for i in 0..3 {
            z[i] = self.e_r[i];
            z[3 + i] = self.e_v[i];
            z[6 + i] = self.e_a[i];
            z[9 + i] = self.e_j[i];
        }
        z[12] = self.psi;
        z[13] = self.psi_dot;
        z
    }

    pub fn norm(&self) -> f64 {
        self.to_z().norm()
    }
}

/// Commanded snap and yaw acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalInput {
    /// Commanded snap [m/s^4].
    pub s_r: Vector3<f64>,
    /// Commanded yaw acceleration [rad/s^2].
    pub s_psi: f64,
}

impl ExternalInput {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.s_r.x, self.s_r.y, self.s_r.z, self.s_psi)
    }
}

/// Second derivative of thrust deviation and commanded Euler-angle
/// acceleration, the feedback-linearizing inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualInput {
    /// u_T = second time derivative of the thrust deviation [N/s^2].
    pub t_ddot: f64,
    /// u_eta = commanded Euler-angle acceleration [rad/s^2].
    pub eta_ddot: Vector3<f64>,
}

impl VirtualInput {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.t_ddot, self.eta_ddot.x, self.eta_ddot.y, self.eta_ddot.z)
    }

    pub fn from_vector(u: &Vector4<f64>) -> Self {
        Self {
            t_ddot: u[0],
            eta_ddot: Vector3::new(u[1], u[2], u[3]),
        }
    }
}

/// Affine maps of the input relation s = M u + n, with the scalars the
/// guards are based on.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionMaps {
    pub m: Matrix4<f64>,
    pub n: Vector4<f64>,
    /// Specific thrust f = (m g + T_dev)/m [m/s^2].
    pub f: f64,
    pub det: f64,
}

/// Model acceleration a = -g e3 + f R e3 [m/s^2].
pub fn model_acceleration(state: &QuadState, params: &VehicleParams) -> Vector3<f64> {
    let f = (params.mass * params.gravity + state.t_dev) / params.mass;
    let r = rotation_matrix(&state.eta);
    Vector3::new(0.0, 0.0, -params.gravity) + f * (r * Vector3::z())
}

/// Model jerk j = (T_dev_rate/m) R e3 + f R (omega x e3) [m/s^3].
pub fn model_jerk(state: &QuadState, params: &VehicleParams) -> Vector3<f64> {
    let f = (params.mass * params.gravity + state.t_dev) / params.mass;
    let r = rotation_matrix(&state.eta);
    (state.t_dev_rate / params.mass) * (r * Vector3::z())
        + f * (r * state.omega.cross(&Vector3::z()))
}

/// Tracking errors of the state against a reference sample. Acceleration and
/// jerk come from the flat model; yaw rate needs the attitude kinematics and
/// therefore inherits its singularity.
pub fn derive_errors(
    state: &QuadState,
    reference: &ReferenceSample,
    params: &VehicleParams,
) -> Result<ErrorState, DynamicsError> {
    let e = euler_kinematic_matrix(state.eta.x, state.eta.y)?;
    let eta_dot = e * state.omega;
    Ok(ErrorState {
        e_r: state.r - reference.pos,
        e_v: state.v - reference.vel,
        e_a: model_acceleration(state, params) - reference.acc,
        e_j: model_jerk(state, params) - reference.jerk,
        psi: state.eta.z,
        psi_dot: eta_dot.z,
    })
}

/// Linear feedback s = -K z: each translational axis is driven by one gain
/// per error derivative level, yaw by the rate/angle pair.
pub fn external_input(errors: &ErrorState, gains: &GainVector) -> ExternalInput {
    let k = gains;
    let s_r = -k.jerk().component_mul(&errors.e_j)
        - k.accel().component_mul(&errors.e_a)
        - k.vel().component_mul(&errors.e_v)
        - k.pos().component_mul(&errors.e_r);
    let s_psi = -k.yaw_rate() * errors.psi_dot - k.yaw_angle() * errors.psi;
    ExternalInput { s_r, s_psi }
}

/// Build M and n at the current state:
///
/// snap = (1/m) k_b u_T + f R ((E^-1 u_eta) x e3) + n_r,
/// n_r  = -f R ((E^-1 E_dot omega) x e3) + 2 (T_dev_rate/m) R (omega x e3)
///        + f R (omega x (omega x e3)),
/// psi_ddot = u_eta_3,
///
/// where k_b = R e3 is the body thrust axis. Row 4 of M is (0,0,0,1) with
/// n_4 = 0 exactly.
pub fn inversion_maps(
    state: &QuadState,
    params: &VehicleParams,
) -> Result<InversionMaps, ControlError> {
    let f = (params.mass * params.gravity + state.t_dev) / params.mass;
    let threshold = THRUST_COLLAPSE_FRACTION * params.gravity;
    if f < threshold {
        return Err(ControlError::ThrustCollapse { f, threshold });
    }
    let e = euler_kinematic_matrix(state.eta.x, state.eta.y)?;
    let eta_dot = e * state.omega;
    let e_dot = euler_kinematic_matrix_dot(state.eta.x, state.eta.y, &eta_dot)?;
    let e_inv = e.try_inverse().ok_or(ControlError::SingularInversion { det: 0.0 })?;
    let r = rotation_matrix(&state.eta);
    let e3 = Vector3::z();
    let k_b = r * e3;

    let mut m = Matrix4::zeros();
    let col_t = k_b / params.mass;
    for i in 0..3 {
        m[(i, 0)] = col_t[i];
    }
    for j in 0..3 {
        let mut basis = Vector3::zeros();
        basis[j] = 1.0;
        let col = f * (r * (e_inv * basis).cross(&e3));
        for i in 0..3 {
            m[(i, 1 + j)] = col[i];
        }
    }
    m[(3, 3)] = 1.0;

    let n_r = -f * (r * (e_inv * (e_dot * state.omega)).cross(&e3))
        + 2.0 * (state.t_dev_rate / params.mass) * (r * state.omega.cross(&e3))
        + f * (r * state.omega.cross(&state.omega.cross(&e3)));
    let n = Vector4::new(n_r.x, n_r.y, n_r.z, 0.0);
    let det = m.determinant();
    Ok(InversionMaps { m, n, f, det })
}

/// Solve u = M^-1 (s - n), guarding against a near-singular map.
pub fn virtual_input(
    maps: &InversionMaps,
    s: &ExternalInput,
) -> Result<VirtualInput, ControlError> {
    if maps.det.abs() < MIN_INPUT_MAP_DET {
        return Err(ControlError::SingularInversion { det: maps.det });
    }
    let rhs = s.to_vector() - maps.n;
    let u = maps
        .m
        .lu()
        .solve(&rhs)
        .ok_or(ControlError::SingularInversion { det: maps.det })?;
    Ok(VirtualInput::from_vector(&u))
}

/// Realize the commanded Euler-angle acceleration as a body torque:
///
/// tau = I E^-1 u_eta - I E^-1 E_dot omega + omega x (I omega),
///
/// so that the closed kinematic chain gives eta_ddot = u_eta exactly. The
/// thrust channel passes through unchanged.
pub fn physical_input(
    state: &QuadState,
    u: &VirtualInput,
    params: &VehicleParams,
) -> Result<PhysicalInput, ControlError> {
    let e = euler_kinematic_matrix(state.eta.x, state.eta.y)?;
    let eta_dot = e * state.omega;
    let e_dot = euler_kinematic_matrix_dot(state.eta.x, state.eta.y, &eta_dot)?;
    let e_inv = e.try_inverse().ok_or(ControlError::SingularInversion { det: 0.0 })?;
    let i_omega = params.inertia.component_mul(&state.omega);
    let omega_dot_cmd = e_inv * (u.eta_ddot - e_dot * state.omega);
    let tau = params.inertia.component_mul(&omega_dot_cmd) + state.omega.cross(&i_omega);
    Ok(PhysicalInput {
        t_ddot: u.t_ddot,
        tau,
    })
}
