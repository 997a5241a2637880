//! Rigid-body quadcopter model with second-order thrust dynamics.
//!
//! The state keeps the total thrust as a deviation `T` from the hover value
//! `m*g`, together with its rate, so the commanded quantity is the thrust
//! second derivative. Attitude uses 3-2-1 (yaw-pitch-roll) Euler angles and
//! body angular rates; the two are related by the Euler kinematic matrix
//! `E(phi, theta)`, which is singular at pitch +-90 degrees.

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

/// Errors raised by the plant model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    /// The Euler kinematic matrix is not invertible near pitch +-90 degrees.
    #[error("euler kinematics singular: |cos(theta)| = {cos_theta:.3e} at theta = {theta:.6} rad")]
    SingularAttitude { theta: f64, cos_theta: f64 },
}

/// Physical constants of the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// Vehicle mass [kg].
    pub mass: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Principal moments of inertia (Ixx, Iyy, Izz) [kg m^2].
    pub inertia: Vector3<f64>,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            gravity: 9.81,
            inertia: Vector3::new(0.02, 0.02, 0.04),
        }
    }
}

impl VehicleParams {
    /// Hover thrust magnitude `m*g` [N].
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Full vehicle state, 14 scalar components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    /// Inertial position [m].
    pub r: Vector3<f64>,
    /// Inertial velocity [m/s].
    pub v: Vector3<f64>,
    /// 3-2-1 Euler angles (roll phi, pitch theta, yaw psi) [rad].
    pub eta: Vector3<f64>,
    /// Body angular rates (p, q, r) [rad/s].
    pub omega: Vector3<f64>,
    /// Thrust deviation from the hover value m*g [N].
    pub t_dev: f64,
    /// Rate of the thrust deviation [N/s].
    pub t_dev_rate: f64,
}

impl QuadState {
    /// Hover equilibrium at a given position: zero rates, level attitude,
    /// thrust at exactly the hover value.
    pub fn hover_at(r: Vector3<f64>) -> Self {
        Self {
            r,
            v: Vector3::zeros(),
            eta: Vector3::zeros(),
            omega: Vector3::zeros(),
            t_dev: 0.0,
            t_dev_rate: 0.0,
        }
    }

    /// Flatten to the canonical component order
    /// (r, v, eta, omega, t_dev, t_dev_rate).
    pub fn to_array(&self) -> [f64; 14] {
        [
            self.r.x,
            self.r.y,
            self.r.z,
            self.v.x,
            self.v.y,
            self.v.z,
            self.eta.x,
            self.eta.y,
            self.eta.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.t_dev,
            self.t_dev_rate,
        ]
    }

    /// Rebuild from the canonical component order.
    pub fn from_array(a: &[f64; 14]) -> Self {
        Self {
            r: Vector3::new(a[0], a[1], a[2]),
            v: Vector3::new(a[3], a[4], a[5]),
            eta: Vector3::new(a[6], a[7], a[8]),
            omega: Vector3::new(a[9], a[10], a[11]),
            t_dev: a[12],
            t_dev_rate: a[13],
        }
    }

    /// `self + h * rate`, treating both as flat 14-vectors.
    pub fn add_scaled(&self, rate: &QuadState, h: f64) -> QuadState {
        QuadState {
            r: self.r + rate.r * h,
            v: self.v + rate.v * h,
            eta: self.eta + rate.eta * h,
            omega: self.omega + rate.omega * h,
            t_dev: self.t_dev + rate.t_dev * h,
            t_dev_rate: self.t_dev_rate + rate.t_dev_rate * h,
        }
    }

    /// True when every component is finite.
    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Inputs of the physical plant: thrust second derivative and body torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalInput {
    /// Second derivative of the thrust deviation [N/s^2].
    pub t_ddot: f64,
    /// Body torques (tau_phi, tau_theta, tau_psi) [N m].
    pub tau: Vector3<f64>,
}

impl PhysicalInput {
    pub fn zero() -> Self {
        Self {
            t_ddot: 0.0,
            tau: Vector3::zeros(),
        }
    }
}

/// Rotation matrix from body to inertial frame for 3-2-1 Euler angles,
/// `R = Rz(psi) * Ry(theta) * Rx(phi)`. Column 3 is the body thrust axis
/// expressed in the inertial frame.
pub fn rotation_matrix(eta: &Vector3<f64>) -> Matrix3<f64> {
    *Rotation3::from_euler_angles(eta.x, eta.y, eta.z).matrix()
}

/// Euler kinematic matrix `E(phi, theta)` mapping body rates to Euler-angle
/// rates, `eta_dot = E * omega`.
pub fn euler_kinematic_matrix(phi: f64, theta: f64) -> Result<Matrix3<f64>, DynamicsError> {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    if ct.abs() < 1e-6 {
        return Err(DynamicsError::SingularAttitude {
            theta,
            cos_theta: ct,
        });
    }
    let tt = st / ct;
    Ok(Matrix3::new(
        1.0,
        sp * tt,
        cp * tt,
        0.0,
        cp,
        -sp,
        0.0,
        sp / ct,
        cp / ct,
    ))
}

/// Time derivative of the Euler kinematic matrix by the chain rule through
/// `(phi_dot, theta_dot)`; `eta_dot` is the full Euler-rate vector.
pub fn euler_kinematic_matrix_dot(
    phi: f64,
    theta: f64,
    eta_dot: &Vector3<f64>,
) -> Result<Matrix3<f64>, DynamicsError> {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    if ct.abs() < 1e-6 {
        return Err(DynamicsError::SingularAttitude {
            theta,
            cos_theta: ct,
        });
    }
    let tt = st / ct;
    let sec2 = 1.0 / (ct * ct);
    let de_dphi = Matrix3::new(
        0.0,
        cp * tt,
        -sp * tt,
        0.0,
        -sp,
        -cp,
        0.0,
        cp / ct,
        -sp / ct,
    );
    let de_dtheta = Matrix3::new(
        0.0,
        sp * sec2,
        cp * sec2,
        0.0,
        0.0,
        0.0,
        0.0,
        sp * st * sec2,
        cp * st * sec2,
    );
    Ok(de_dphi * eta_dot.x + de_dtheta * eta_dot.y)
}

/// Continuous-time state derivative.
///
/// r_dot = v
/// v_dot = -g e3 + ((m g + T) / m) R(eta) e3
/// eta_dot = E(phi, theta) omega
/// I omega_dot = tau - omega x (I omega)
/// T_dot = T_rate, T_rate_dot = t_ddot
pub fn dynamics_rhs(
    x: &QuadState,
    input: &PhysicalInput,
    params: &VehicleParams,
) -> Result<QuadState, DynamicsError> {
    let e = euler_kinematic_matrix(x.eta.x, x.eta.y)?;
    let rot = rotation_matrix(&x.eta);
    let thrust_accel = (params.hover_thrust() + x.t_dev) / params.mass;
    let v_dot = Vector3::new(0.0, 0.0, -params.gravity) + rot.column(2) * thrust_accel;
    let i_omega = params.inertia.component_mul(&x.omega);
    let omega_dot = (input.tau - x.omega.cross(&i_omega)).component_div(&params.inertia);
    Ok(QuadState {
        r: x.v,
        v: v_dot,
        eta: e * x.omega,
        omega: omega_dot,
        t_dev: x.t_dev_rate,
        t_dev_rate: input.t_ddot,
    })
}

/// One classical RK4 step with the input held constant over the interval.
pub fn rk4_step(
    x: &QuadState,
    input: &PhysicalInput,
    params: &VehicleParams,
    dt: f64,
) -> Result<QuadState, DynamicsError> {
    let k1 = dynamics_rhs(x, input, params)?;
    let k2 = dynamics_rhs(&x.add_scaled(&k1, 0.5 * dt), input, params)?;
    let k3 = dynamics_rhs(&x.add_scaled(&k2, 0.5 * dt), input, params)?;
    let k4 = dynamics_rhs(&x.add_scaled(&k3, dt), input, params)?;
    let mut out = x.add_scaled(&k1, dt / 6.0);
    out = out.add_scaled(&k2, dt / 3.0);
    out = out.add_scaled(&k3, dt / 3.0);
    out = out.add_scaled(&k4, dt / 6.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Recover 3-2-1 Euler angles from a rotation matrix away from pitch
    /// +-90 degrees.
    fn euler_from_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
        let theta = (-r[(2, 0)]).asin();
        let phi = r[(2, 1)].atan2(r[(2, 2)]);
        let psi = r[(1, 0)].atan2(r[(0, 0)]);
        Vector3::new(phi, theta, psi)
    }

    #[test]
    fn rotation_identity_at_zero_attitude() {
        let r = rotation_matrix(&Vector3::zeros());
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn rotation_pitch_tilts_thrust_axis_forward() {
        // Column 3 of the 3-2-1 composition is
        // (cos(phi) sin(theta) cos(psi) + sin(phi) sin(psi),
        //  cos(phi) sin(theta) sin(psi) - sin(phi) cos(psi),
        //  cos(phi) cos(theta)).
        let eps = 1e-4;
        let r = rotation_matrix(&Vector3::new(0.0, std::f64::consts::FRAC_PI_2 - eps, 0.0));
        let k_b = r.column(2);
        assert_relative_eq!(k_b[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(k_b[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k_b[2], eps, epsilon = 1e-7);
    }

    #[test]
    fn rotation_is_orthonormal_for_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let eta = Vector3::new(
                rng.random_range(-3.1..3.1),
                rng.random_range(-1.5..1.5),
                rng.random_range(-3.1..3.1),
            );
            let r = rotation_matrix(&eta);
            let gram = r.transpose() * r;
            assert_abs_diff_eq!(gram, Matrix3::identity(), epsilon = 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn euler_kinematics_identity_at_level_attitude() {
        let e = euler_kinematic_matrix(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(e, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn euler_kinematics_rejects_gimbal_lock() {
        let err = euler_kinematic_matrix(0.0, std::f64::consts::FRAC_PI_2).unwrap_err();
        assert!(matches!(err, DynamicsError::SingularAttitude { .. }));
    }

    #[test]
    fn euler_kinematics_matches_rotation_flow() {
        // Advance the attitude along the exact rigid-body flow
        // R(h) = R exp([omega]x h) and difference the extracted Euler angles.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = 1e-6;
        for _ in 0..100 {
            let eta = Vector3::new(
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
                rng.random_range(-2.8..2.8),
            );
            let omega = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let r0 = rotation_matrix(&eta);
            let step = |s: f64| {
                let rs = r0 * Rotation3::from_scaled_axis(omega * s).matrix();
                euler_from_rotation(&rs)
            };
            let fd = (step(h) - step(-h)) / (2.0 * h);
            let e = euler_kinematic_matrix(eta.x, eta.y).unwrap();
            assert_abs_diff_eq!(fd, e * omega, epsilon = 1e-6);
        }
    }

    #[test]
    fn euler_kinematics_dot_is_zero_for_stationary_attitude() {
        let ed = euler_kinematic_matrix_dot(0.3, -0.2, &Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(ed, Matrix3::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn euler_kinematics_dot_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = 1e-6;
        for _ in 0..100 {
            let phi = rng.random_range(-1.2..1.2);
            let theta = rng.random_range(-1.2..1.2);
            let eta_dot = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let e0 = euler_kinematic_matrix(phi - h * eta_dot.x, theta - h * eta_dot.y).unwrap();
            let e1 = euler_kinematic_matrix(phi + h * eta_dot.x, theta + h * eta_dot.y).unwrap();
            let fd = (e1 - e0) / (2.0 * h);
            let ed = euler_kinematic_matrix_dot(phi, theta, &eta_dot).unwrap();
            assert_abs_diff_eq!(fd, ed, epsilon = 1e-5);
        }
    }

    #[test]
    fn euler_kinematics_dot_roll_pattern_at_level_attitude() {
        // d/dphi of E at (0, 0) is [[0,0,0],[0,0,-1],[0,1,0]].
        let ed = euler_kinematic_matrix_dot(0.0, 0.0, &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_abs_diff_eq!(ed, expected, epsilon = 1e-15);
    }

    #[test]
    fn hover_equilibrium_has_zero_rate() {
        let params = VehicleParams::default();
        let x = QuadState::hover_at(Vector3::new(1.0, -2.0, 3.0));
        let rate = dynamics_rhs(&x, &PhysicalInput::zero(), &params).unwrap();
        assert_eq!(rate.to_array(), [0.0; 14]);
    }

    #[test]
    fn doubled_thrust_accelerates_upward_at_g() {
        let params = VehicleParams::default();
        let mut x = QuadState::hover_at(Vector3::zeros());
        x.t_dev = params.hover_thrust();
        let rate = dynamics_rhs(&x, &PhysicalInput::zero(), &params).unwrap();
        assert_abs_diff_eq!(
            rate.v,
            Vector3::new(0.0, 0.0, params.gravity),
            epsilon = 1e-12
        );
    }

    #[test]
    fn euler_equation_gyroscopic_coupling() {
        // With I = diag(0.02, 0.02, 0.04) and omega = (0, 1, 1):
        // omega_dot_x = (Iyy - Izz) / Ixx * q * r = -1.
        let params = VehicleParams::default();
        let mut x = QuadState::hover_at(Vector3::zeros());
        x.omega = Vector3::new(0.0, 1.0, 1.0);
        let rate = dynamics_rhs(&x, &PhysicalInput::zero(), &params).unwrap();
        assert_relative_eq!(rate.omega.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rate.omega.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rate.omega.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_total_thrust_conserves_horizontal_velocity_exactly() {
        let params = VehicleParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..100 {
            let x = QuadState {
                r: Vector3::new(rng.random(), rng.random(), rng.random()),
                v: Vector3::new(rng.random(), rng.random(), rng.random()),
                eta: Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ),
                omega: Vector3::new(rng.random(), rng.random(), rng.random()),
                t_dev: -params.hover_thrust(),
                t_dev_rate: 0.0,
            };
            let rate = dynamics_rhs(&x, &PhysicalInput::zero(), &params).unwrap();
            assert_eq!(rate.v.x, 0.0);
            assert_eq!(rate.v.y, 0.0);
            assert_eq!(rate.v.z, -params.gravity);
        }
    }

    #[test]
    fn rk4_fixed_point_at_hover() {
        let params = VehicleParams::default();
        let x = QuadState::hover_at(Vector3::new(0.5, 0.5, 2.0));
        let next = rk4_step(&x, &PhysicalInput::zero(), &params, 0.01).unwrap();
        assert_eq!(next.to_array(), x.to_array());
    }

    #[test]
    fn rk4_free_fall_matches_closed_form() {
        let params = VehicleParams::default();
        let mut x = QuadState::hover_at(Vector3::new(0.0, 0.0, 10.0));
        x.v = Vector3::new(0.3, -0.2, 0.0);
        x.t_dev = -params.hover_thrust();
        let dt = 0.01;
        for _ in 0..100 {
            x = rk4_step(&x, &PhysicalInput::zero(), &params, dt).unwrap();
        }
        let t = 1.0;
        assert_abs_diff_eq!(x.r.x, 0.3 * t, epsilon = 1e-10);
        assert_abs_diff_eq!(x.r.y, -0.2 * t, epsilon = 1e-10);
        assert_abs_diff_eq!(x.r.z, 10.0 - 0.5 * params.gravity * t * t, epsilon = 1e-10);
    }

    /// Endpoint error of an RK4 run at step `dt` against a much finer RK4
    /// reference, on a forced trajectory with constant input.
    fn rk4_endpoint_error(dt: f64, ref_dt: f64, horizon: f64) -> f64 {
        let params = VehicleParams::default();
        let input = PhysicalInput {
            t_ddot: 0.3,
            tau: Vector3::new(0.004, 0.002, 0.001),
        };
        let x0 = QuadState {
            r: Vector3::zeros(),
            v: Vector3::new(0.1, -0.1, 0.05),
            eta: Vector3::new(0.02, -0.03, 0.01),
            omega: Vector3::new(0.05, 0.04, 0.03),
            t_dev: 0.0,
            t_dev_rate: 0.0,
        };
        let run = |step: f64| {
            let n = (horizon / step).round() as usize;
            let mut x = x0;
            for _ in 0..n {
                x = rk4_step(&x, &input, &params, step).unwrap();
            }
            x
        };
        let coarse = run(dt).to_array();
        let fine = run(ref_dt).to_array();
        coarse
            .iter()
            .zip(fine.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn rk4_is_fourth_order() {
        let e1 = rk4_endpoint_error(0.01, 5e-4, 1.0);
        let e2 = rk4_endpoint_error(0.005, 5e-4, 1.0);
        let order = (e1 / e2).log2();
        assert!(
            (3.7..=4.3).contains(&order),
            "observed order {order:.3} (errors {e1:.3e}, {e2:.3e})"
        );
    }

    #[test]
    fn state_array_round_trip() {
        let x = QuadState {
            r: Vector3::new(1.0, 2.0, 3.0),
            v: Vector3::new(4.0, 5.0, 6.0),
            eta: Vector3::new(0.1, 0.2, 0.3),
            omega: Vector3::new(7.0, 8.0, 9.0),
            t_dev: -1.5,
            t_dev_rate: 0.25,
        };
        assert_eq!(QuadState::from_array(&x.to_array()), x);
    }

    proptest! {
        #[test]
        fn rotation_matrices_are_special_orthogonal(
            phi in -3.0f64..3.0,
            theta in -1.4f64..1.4,
            psi in -3.0f64..3.0,
        ) {
            let r = rotation_matrix(&Vector3::new(phi, theta, psi));
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn kinematic_matrix_derivative_matches_finite_differences(
            phi in -1.2f64..1.2,
            theta in -1.2f64..1.2,
            dphi in -2.0f64..2.0,
            dtheta in -2.0f64..2.0,
            dpsi in -2.0f64..2.0,
        ) {
            let eta_dot = Vector3::new(dphi, dtheta, dpsi);
            let de = euler_kinematic_matrix_dot(phi, theta, &eta_dot).unwrap();
            let h = 1e-6;
            let plus = euler_kinematic_matrix(phi + h * dphi, theta + h * dtheta).unwrap();
            let minus = euler_kinematic_matrix(phi - h * dphi, theta - h * dtheta).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            prop_assert!((de - fd).norm() < 1e-5 * (1.0 + de.norm()));
        }
    }
}
