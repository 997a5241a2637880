//! Point-to-point position references blended by a quintic polynomial.
//!
//! The blend `beta(t)` rises from 0 at t = 0 to 1 at the arrival time `T_f`
//! with its first four derivatives vanishing at `T_f`, so the reference can
//! be held constant afterwards with four continuous derivatives at the
//! joint. The first derivative at t = 0 is 5 / T_f, not zero: the reference
//! departs with a velocity step, which the tracking loop absorbs.

use nalgebra::{SMatrix, SVector, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("blend duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("blend endpoint system is singular")]
    SingularEndpointSystem,
}

/// Quintic blend polynomial with value 0 at t = 0, value 1 at `t_f`, and
/// derivatives 1 through 4 equal to zero at `t_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuinticBlend {
    /// Polynomial coefficients in powers of (t - t_f), constant term first.
    /// Centering at the arrival time keeps the nearly flat end of the blend
    /// free of cancellation, so the vanishing derivatives evaluate to their
    /// true tiny magnitudes instead of rounding noise.
    c: [f64; 6],
    t_f: f64,
}

/// Value and first four derivatives of the blend at a query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendSample {
    pub value: f64,
    /// Derivatives 1 through 4 [1/s .. 1/s^4].
    pub deriv: [f64; 4],
}

impl QuinticBlend {
    /// Solve the six endpoint conditions for the coefficients rather than
    /// hard-coding the closed form, so construction self-verifies the
    /// stated boundary behavior. The solution is
    /// `beta(t) = 1 - (1 - t/t_f)^5`.
    pub fn new(t_f: f64) -> Result<Self, TrajectoryError> {
        if !(t_f > 0.0) {
            return Err(TrajectoryError::NonPositiveDuration(t_f));
        }
        // Rows: beta(0) = 0, beta(t_f) = 1, beta^(k)(t_f) = 0 for k = 1..4.
        // Unknowns: coefficients of sum_i c_i (t - t_f)^i.
        let mut a = SMatrix::<f64, 6, 6>::zeros();
        let mut rhs = SVector::<f64, 6>::zeros();
        for i in 0..6usize {
            a[(0, i)] = (-t_f).powi(i as i32);
        }
        rhs[0] = 0.0;
        for (row, order) in (1..6).zip(0..5) {
            for i in order..6usize {
                // d^order/dt^order of (t - t_f)^i evaluated at t_f is zero
                // except when i == order, where it is order!.
                if i == order {
                    let mut coeff = 1.0;
                    for k in 0..order {
                        coeff *= (i - k) as f64;
                    }
                    a[(row, i)] = coeff;
                }
            }
            rhs[row] = if order == 0 { 1.0 } else { 0.0 };
        }
        let c = a
            .lu()
            .solve(&rhs)
            .ok_or(TrajectoryError::SingularEndpointSystem)?;
        Ok(Self {
            c: [c[0], c[1], c[2], c[3], c[4], c[5]],
            t_f,
        })
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// Evaluate the blend and its first four derivatives. For `t >= t_f`
    /// returns exactly (1, 0, 0, 0, 0) so the post-arrival hold is bitwise
    /// constant.
    pub fn eval(&self, t: f64) -> BlendSample {
        if t >= self.t_f {
            return BlendSample {
                value: 1.0,
                deriv: [0.0; 4],
            };
        }
        let s = t.max(0.0) - self.t_f;
        let mut out = [0.0; 5];
        // Horner evaluation of the polynomial and its derivatives.
        for order in 0..5usize {
            let mut acc = 0.0;
            for i in (order..6).rev() {
                let mut coeff = self.c[i];
                for k in 0..order {
                    coeff *= (i - k) as f64;
                }
                acc = acc * s + coeff;
            }
            out[order] = acc;
        }
        BlendSample {
            value: out[0],
            deriv: [out[1], out[2], out[3], out[4]],
        }
    }
}

/// Desired position and its derivatives at a query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    /// Desired position [m].
    pub pos: Vector3<f64>,
    /// Desired velocity [m/s].
    pub vel: Vector3<f64>,
    /// Desired acceleration [m/s^2].
    pub acc: Vector3<f64>,
    /// Desired jerk [m/s^3].
    pub jerk: Vector3<f64>,
    /// Desired snap [m/s^4].
    pub snap: Vector3<f64>,
}

/// Straight-line reference from `r0` to `r_star` blended by the quintic,
/// held at `r_star` after the arrival time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    r0: Vector3<f64>,
    r_star: Vector3<f64>,
    blend: QuinticBlend,
}

impl ReferenceTrajectory {
    pub fn new(r0: Vector3<f64>, r_star: Vector3<f64>, t_f: f64) -> Result<Self, TrajectoryError> {
        Ok(Self {
            r0,
            r_star,
            blend: QuinticBlend::new(t_f)?,
        })
    }

    pub fn r0(&self) -> Vector3<f64> {
        self.r0
    }

    pub fn r_star(&self) -> Vector3<f64> {
        self.r_star
    }

    pub fn t_f(&self) -> f64 {
        self.blend.t_f()
    }

    /// Sample `r_d(t) = (1 - beta(t)) r0 + beta(t) r_star` and derivatives.
    pub fn sample(&self, t: f64) -> ReferenceSample {
        if t >= self.blend.t_f() {
            return ReferenceSample {
                pos: self.r_star,
                vel: Vector3::zeros(),
                acc: Vector3::zeros(),
                jerk: Vector3::zeros(),
                snap: Vector3::zeros(),
            };
        }
        let b = self.blend.eval(t);
        let delta = self.r_star - self.r0;
        ReferenceSample {
            pos: self.r0 + delta * b.value,
            vel: delta * b.deriv[0],
            acc: delta * b.deriv[1],
            jerk: delta * b.deriv[2],
            snap: delta * b.deriv[3],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn coefficients_match_closed_form() {
        // beta(t) = 1 - (1 - t/T)^5 = 1 + (t - T)^5 / T^5, so in the basis
        // centered at the arrival time the only nonzero coefficients are the
        // constant 1 and the quintic 1/T^5.
        let t_f = 5.0;
        let blend = QuinticBlend::new(t_f).unwrap();
        let expected = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0 / t_f.powi(5)];
        for (got, want) in blend.c.iter().zip(expected.iter()) {
            assert_relative_eq!(got, want, epsilon = 1e-13, max_relative = 1e-12);
        }
    }

    #[test]
    fn blend_endpoint_conditions() {
        let blend = QuinticBlend::new(5.0).unwrap();
        let start = blend.eval(0.0);
        assert_abs_diff_eq!(start.value, 0.0, epsilon = 1e-14);
        let end = blend.eval(5.0);
        assert_eq!(end.value, 1.0);
        assert_eq!(end.deriv, [0.0; 4]);
    }

    #[test]
    fn blend_midpoint_value() {
        let blend = QuinticBlend::new(5.0).unwrap();
        assert_relative_eq!(blend.eval(2.5).value, 0.96875, epsilon = 1e-12);
    }

    #[test]
    fn blend_departure_rate() {
        let t_f = 5.0;
        let blend = QuinticBlend::new(t_f).unwrap();
        assert_relative_eq!(blend.eval(0.0).deriv[0], 5.0 / t_f, epsilon = 1e-12);
    }

    #[test]
    fn blend_derivatives_vanish_approaching_arrival() {
        // Close to the joint the derivatives follow the closed forms
        // 5 u^4 / T, 20 u^3 / T^2, 60 u^2 / T^3, 120 u / T^4 in magnitude,
        // with u = 1 - t/T, so each goes to zero and the hold is C^4. The
        // fourth derivative decays only linearly (slope 120 / T^5).
        let t_f = 5.0;
        let blend = QuinticBlend::new(t_f).unwrap();
        for eps_rel in [1e-7, 1e-9] {
            let eps = eps_rel * t_f;
            let s = blend.eval(t_f - eps);
            let u = eps / t_f;
            assert_relative_eq!(s.deriv[0], 5.0 * u.powi(4) / t_f, max_relative = 1e-9);
            assert_relative_eq!(
                s.deriv[1],
                -20.0 * u.powi(3) / t_f.powi(2),
                max_relative = 1e-9
            );
            assert_relative_eq!(
                s.deriv[2],
                60.0 * u.powi(2) / t_f.powi(3),
                max_relative = 1e-9
            );
            assert_relative_eq!(s.deriv[3], -120.0 * u / t_f.powi(4), max_relative = 1e-9);
        }
        // At one part in 1e9 of the duration every derivative is far below
        // 1e-8, the continuity budget of the arrival joint.
        let s = blend.eval(t_f * (1.0 - 1e-9));
        for d in s.deriv {
            assert!(d.abs() < 1e-8, "derivative {d:e} too large at the joint");
        }
    }

    #[test]
    fn blend_rejects_bad_duration() {
        assert!(QuinticBlend::new(0.0).is_err());
        assert!(QuinticBlend::new(-1.0).is_err());
    }

    #[test]
    fn reference_starts_at_r0() {
        let r0 = Vector3::new(1.0, -2.0, 0.5);
        let r_star = Vector3::new(0.0, 0.0, 1.5);
        let traj = ReferenceTrajectory::new(r0, r_star, 5.0).unwrap();
        let s = traj.sample(0.0);
        assert_abs_diff_eq!(s.pos, r0, epsilon = 1e-14);
    }

    #[test]
    fn reference_holds_exactly_after_arrival() {
        let r0 = Vector3::new(1.0, -2.0, 0.5);
        let r_star = Vector3::new(0.0, 0.0, 1.5);
        let traj = ReferenceTrajectory::new(r0, r_star, 5.0).unwrap();
        for t in [5.0, 5.01, 7.3, 100.0] {
            let s = traj.sample(t);
            assert_eq!(s.pos, r_star);
            assert_eq!(s.vel, Vector3::zeros());
            assert_eq!(s.acc, Vector3::zeros());
            assert_eq!(s.jerk, Vector3::zeros());
            assert_eq!(s.snap, Vector3::zeros());
        }
    }

    #[test]
    fn degenerate_segment_is_constant() {
        let r0 = Vector3::new(0.3, 0.3, 1.0);
        let traj = ReferenceTrajectory::new(r0, r0, 5.0).unwrap();
        for t in [0.0, 1.7, 4.99, 5.0, 9.0] {
            let s = traj.sample(t);
            assert_eq!(s.pos, r0);
            assert_eq!(s.vel, Vector3::zeros());
            assert_eq!(s.snap, Vector3::zeros());
        }
    }

    #[test]
    fn blend_derivatives_match_finite_differences() {
        // Central differences carry O(h^2) truncation plus rounding noise of
        // order 1e-16 / h, so 1e-5 relative agreement is what the oracle can
        // resolve, not a statement about the polynomial itself.
        let blend = QuinticBlend::new(5.0).unwrap();
        let h = 1e-5;
        for t in [0.5, 1.0, 2.0, 3.3, 4.4] {
            let s = blend.eval(t);
            let fd1 = (blend.eval(t + h).value - blend.eval(t - h).value) / (2.0 * h);
            assert_relative_eq!(s.deriv[0], fd1, max_relative = 1e-5, epsilon = 1e-10);
            let fd2 = (blend.eval(t + h).deriv[0] - blend.eval(t - h).deriv[0]) / (2.0 * h);
            assert_relative_eq!(s.deriv[1], fd2, max_relative = 1e-5, epsilon = 1e-10);
            let fd3 = (blend.eval(t + h).deriv[1] - blend.eval(t - h).deriv[1]) / (2.0 * h);
            assert_relative_eq!(s.deriv[2], fd3, max_relative = 1e-5, epsilon = 1e-10);
            let fd4 = (blend.eval(t + h).deriv[2] - blend.eval(t - h).deriv[2]) / (2.0 * h);
            assert_relative_eq!(s.deriv[3], fd4, max_relative = 1e-5, epsilon = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn blend_matches_closed_form_for_any_duration(
            t_f in 0.05f64..60.0,
            tau in 0.0f64..1.0,
        ) {
            let blend = QuinticBlend::new(t_f).unwrap();
            let s = blend.eval(tau * t_f);
            let u = 1.0 - tau;
            prop_assert!((s.value - (1.0 - u.powi(5))).abs() < 1e-9);
            prop_assert!(s.value >= -1e-12 && s.value <= 1.0 + 1e-12);
        }

        #[test]
        fn reference_stays_on_the_segment_and_holds_after_arrival(
            r0 in proptest::array::uniform3(-20.0f64..20.0),
            r_star in proptest::array::uniform3(-20.0f64..20.0),
            t_f in 0.05f64..60.0,
            tau in 0.0f64..2.0,
        ) {
            let traj =
                ReferenceTrajectory::new(Vector3::from(r0), Vector3::from(r_star), t_f).unwrap();
            let s = traj.sample(tau * t_f);
            if tau >= 1.0 {
                prop_assert_eq!(s.pos, traj.r_star());
                prop_assert_eq!(s.vel, Vector3::zeros());
                prop_assert_eq!(s.acc, Vector3::zeros());
                prop_assert_eq!(s.jerk, Vector3::zeros());
                prop_assert_eq!(s.snap, Vector3::zeros());
            } else {
                for axis in 0..3 {
                    let lo = r0[axis].min(r_star[axis]) - 1e-9;
                    let hi = r0[axis].max(r_star[axis]) + 1e-9;
                    prop_assert!(s.pos[axis] >= lo && s.pos[axis] <= hi);
                }
            }
        }
    }
}
