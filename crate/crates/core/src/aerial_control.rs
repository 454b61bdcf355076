//! Cascaded attitude control and the closed-form tilt-rotor mixer.
//!
//! Outer loop: proportional control on the quaternion error, producing a
//! body-rate demand. Inner loop: rate PID producing a torque demand. The
//! mixer inverts the allocation map to tilt angles and rotor thrusts.

use thiserror::Error;

use crate::aerial_plant::RigidBodyState;
use crate::config::{ControllerGains, VehicleParams};
use crate::math::{quat_error, Quaternion, Vec3};
use crate::scalar::Real;

/// Below this error-vector norm the outer loop uses the small-angle limit.
pub const SMALL_ANGLE_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ControlError {
    #[error("invalid setpoint: collective force {f_d} N must be positive and finite")]
    InvalidSetpoint { f_d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeSetpoint<T> {
    pub q_d: Quaternion<T>,
    /// Desired collective force along body z (N).
    pub f_d: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RatePidState<T> {
    pub integral: Vec3<T>,
    pub prev_error: Vec3<T>,
    /// False until the first update; the first update has no derivative kick.
    pub primed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorCommand<T> {
    pub theta1_cmd: T,
    pub theta2_cmd: T,
    pub f1_cmd: T,
    pub f2_cmd: T,
}

impl<T: Real> ActuatorCommand<T> {
    pub fn within_limits(&self, p: &VehicleParams<T>) -> bool {
        let tilt_ok = |t: T| t.abs() <= p.max_tilt;
        let thrust_ok = |f: T| f >= T::zero() && f <= p.max_thrust_per_rotor;
        tilt_ok(self.theta1_cmd) && tilt_ok(self.theta2_cmd) && thrust_ok(self.f1_cmd) && thrust_ok(self.f2_cmd)
    }

    pub fn is_finite(&self) -> bool {
        self.theta1_cmd.is_finite() && self.theta2_cmd.is_finite() && self.f1_cmd.is_finite() && self.f2_cmd.is_finite()
    }
}

/// Which actuator channels the mixer had to clamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Saturation {
    pub theta1: bool,
    pub theta2: bool,
    pub f1: bool,
    pub f2: bool,
}

impl Saturation {
    pub fn any(&self) -> bool {
        self.theta1 || self.theta2 || self.f1 || self.f2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixerOutput<T> {
    /// Clamped command sent to the actuators.
    pub command: ActuatorCommand<T>,
    /// Exact inverse before clamping.
    pub unclamped: ActuatorCommand<T>,
    pub saturation: Saturation,
}

/// Rate-loop gains with the anti-windup bound resolved per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGains<T> {
    pub kp: Vec3<T>,
    pub ki: Vec3<T>,
    pub kd: Vec3<T>,
    /// Largest magnitude the integral state may reach, per axis.
    pub integral_limit: Vec3<T>,
}

impl<T: Real> RateGains<T> {
    /// Bounds the integral so `ki · integral` stays within the configured
    /// share of each axis's torque authority.
    pub fn from_config(g: &ControllerGains<T>, p: &VehicleParams<T>) -> Self {
        let authority = p.torque_authority();
        let bound = |ki: T, auth: T| {
            if ki == T::zero() {
                T::infinity()
            } else {
                g.rate_integral_fraction * auth / ki.abs()
            }
        };
        Self {
            kp: g.kp_rt,
            ki: g.ki_rt,
            kd: g.kd_rt,
            integral_limit: Vec3::new(
                bound(g.ki_rt.x, authority.x),
                bound(g.ki_rt.y, authority.y),
                bound(g.ki_rt.z, authority.z),
            ),
        }
    }

    pub fn unbounded(kp: Vec3<T>, ki: Vec3<T>, kd: Vec3<T>) -> Self {
        Self { kp, ki, kd, integral_limit: Vec3::splat(T::infinity()) }
    }
}

/// Body-rate demand from the attitude error.
///
/// The error quaternion is the rotation from the current attitude to the
/// desired one, in body axes. `sign(η)` selects the shorter rotation and the
/// angle is taken on `|η|`, so `q_d` and `-q_d` give identical output.
pub fn attitude_outer_loop<T: Real>(q_d: &Quaternion<T>, q: &Quaternion<T>, kp_att: &Vec3<T>) -> Vec3<T> {
    let e = quat_error(q, q_d);
    let n = e.eps.norm();
    let sign = if e.eta < T::zero() { -T::one() } else { T::one() };
    let gain = if n < T::lit(SMALL_ANGLE_EPS) {
        // φ / sin(φ/2) → 2
        T::two()
    } else {
        let phi = T::two() * n.atan2(e.eta.abs());
        phi / (phi * T::half()).sin()
    };
    kp_att.component_mul(&e.eps) * (sign * gain)
}

/// Rate PID: trapezoidal integral, backward-difference derivative.
pub fn rate_inner_loop<T: Real>(
    omega_d: &Vec3<T>,
    omega: &Vec3<T>,
    st: &RatePidState<T>,
    gains: &RateGains<T>,
    dt: T,
) -> (Vec3<T>, RatePidState<T>) {
    let err = *omega_d - *omega;
    let prev = if st.primed { st.prev_error } else { err };
    let lim = gains.integral_limit;
    let raw = st.integral + (err + prev) * (T::half() * dt);
    let integral = Vec3::new(
        raw.x.clamp_to(-lim.x, lim.x),
        raw.y.clamp_to(-lim.y, lim.y),
        raw.z.clamp_to(-lim.z, lim.z),
    );
    let deriv = (err - prev) / dt;
    let torque = gains.kp.component_mul(&err) + gains.ki.component_mul(&integral) + gains.kd.component_mul(&deriv);
    (torque, RatePidState { integral, prev_error: err, primed: true })
}

/// Exact inverse of the allocation map, clamped to actuator limits.
pub fn mixer_inverse<T: Real>(tau_d: &Vec3<T>, f_d: T, p: &VehicleParams<T>) -> Result<MixerOutput<T>, ControlError> {
    if !(f_d > T::zero()) || !f_d.is_finite() {
        return Err(ControlError::InvalidSetpoint { f_d: f_d.to_f64_lossy() });
    }
    let (d, h) = (p.rotor_separation, p.tilt_axis_offset);
    // Vertical (cos) and tilt (sin) thrust components of each rotor.
    let b1 = f_d * T::half() + tau_d.x / d;
    let b2 = f_d * T::half() - tau_d.x / d;
    let a1 = tau_d.y / (T::two() * h) + tau_d.z / d;
    let a2 = tau_d.y / (T::two() * h) - tau_d.z / d;
    let unclamped = ActuatorCommand {
        theta1_cmd: a1.atan2(b1),
        theta2_cmd: a2.atan2(b2),
        f1_cmd: a1.hypot(b1),
        f2_cmd: a2.hypot(b2),
    };
    let tilt = |t: T| (t.clamp_to(-p.max_tilt, p.max_tilt), t.abs() > p.max_tilt);
    let thrust = |f: T| (f.clamp_to(T::zero(), p.max_thrust_per_rotor), f > p.max_thrust_per_rotor);
    let (theta1_cmd, s_t1) = tilt(unclamped.theta1_cmd);
    let (theta2_cmd, s_t2) = tilt(unclamped.theta2_cmd);
    let (f1_cmd, s_f1) = thrust(unclamped.f1_cmd);
    let (f2_cmd, s_f2) = thrust(unclamped.f2_cmd);
    Ok(MixerOutput {
        command: ActuatorCommand { theta1_cmd, theta2_cmd, f1_cmd, f2_cmd },
        unclamped,
        saturation: Saturation { theta1: s_t1, theta2: s_t2, f1: s_f1, f2: s_f2 },
    })
}

/// Full aerial cascade with its own loop decimation.
#[derive(Debug, Clone)]
pub struct AttitudeController<T> {
    kp_att: Vec3<T>,
    rate: RateGains<T>,
    outer_every: u64,
    tick: u64,
    omega_d: Vec3<T>,
    state: RatePidState<T>,
}

impl<T: Real> AttitudeController<T> {
    /// `outer_every`: rate-loop ticks per attitude-loop tick (≥ 1).
    pub fn new(g: &ControllerGains<T>, p: &VehicleParams<T>, outer_every: u64) -> Self {
        Self {
            kp_att: g.kp_att,
            rate: RateGains::from_config(g, p),
            outer_every: outer_every.max(1),
            tick: 0,
            omega_d: Vec3::zeros(),
            state: RatePidState::default(),
        }
    }

    pub fn reset(&mut self) {
        self.tick = 0;
        self.omega_d = Vec3::zeros();
        self.state = RatePidState::default();
    }

    pub fn rate_demand(&self) -> Vec3<T> {
        self.omega_d
    }

    /// One rate-loop tick of length `dt`.
    pub fn update(
        &mut self,
        sp: &AttitudeSetpoint<T>,
        s: &RigidBodyState<T>,
        p: &VehicleParams<T>,
        dt: T,
    ) -> Result<MixerOutput<T>, ControlError> {
        if self.tick % self.outer_every == 0 {
            self.omega_d = attitude_outer_loop(&sp.q_d, &s.q, &self.kp_att);
        }
        self.tick += 1;
        let (tau_d, next) = rate_inner_loop(&self.omega_d, &s.omega_b, &self.state, &self.rate, dt);
        self.state = next;
        mixer_inverse(&tau_d, sp.f_d, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aerial_plant::{wrench_from_actuators, ActuatorState};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params() -> VehicleParams<f64> {
        VehicleParams::default()
    }

    fn forward(cmd: &ActuatorCommand<f64>, p: &VehicleParams<f64>) -> (f64, Vec3<f64>) {
        let a = ActuatorState { theta1: cmd.theta1_cmd, theta2: cmd.theta2_cmd, f1: cmd.f1_cmd, f2: cmd.f2_cmd };
        let w = wrench_from_actuators(&a, p);
        (w.collective(), w.torque_b)
    }

    #[test]
    fn zero_attitude_error_gives_zero_rate() {
        let q = Quaternion::new(0.7, 0.1, -0.5, 0.3).normalized();
        let w = attitude_outer_loop(&q, &q, &Vec3::splat(5.0));
        assert!(w.max_abs() < 1e-15);
    }

    #[test]
    fn small_roll_error_drives_back() {
        // body rolled +0.002 rad, desired level
        let q = Quaternion::<f64>::from_axis_angle(&Vec3::new(1.0, 0.0, 0.0), 0.002);
        let w = attitude_outer_loop(&Quaternion::identity(), &q, &Vec3::splat(5.0));
        assert!((w.x - -0.01).abs() < 0.01 * 1e-3, "{w:?}");
        assert_eq!(w.y, 0.0);
        assert_eq!(w.z, 0.0);
    }

    #[test]
    fn half_turn_error_magnitude_is_pi() {
        let q_d = Quaternion::new(0.0, 0.0, 0.0, 1.0);
        let w = attitude_outer_loop(&q_d, &Quaternion::identity(), &Vec3::splat(1.0));
        assert_abs_diff_eq!(w.norm(), PI, epsilon = 1e-12);
    }

    #[test]
    fn antipodal_error_is_zero() {
        let q = Quaternion::new(-1.0, 0.0, 0.0, 0.0);
        let w = attitude_outer_loop(&Quaternion::identity(), &q, &Vec3::splat(3.0));
        assert_eq!(w.norm(), 0.0);
    }

    #[test]
    fn continuous_across_small_angle_switch() {
        let kp = Vec3::splat(1.0);
        let at = |n: f64| {
            let axis = Vec3::new(0.3, -0.4, 0.5);
            let angle = 2.0 * n.asin();
            attitude_outer_loop(&Quaternion::from_axis_angle(&axis, angle), &Quaternion::identity(), &kp)
        };
        let below = at(SMALL_ANGLE_EPS - 1e-9);
        let above = at(SMALL_ANGLE_EPS + 1e-9);
        assert!((below - above).max_abs() < 1e-8);
    }

    #[test]
    fn rate_loop_zero_error_and_pure_p() {
        let g = RateGains::unbounded(Vec3::splat(2.0), Vec3::splat(0.0), Vec3::splat(0.0));
        let w = Vec3::new(0.3, -1.0, 2.0);
        let (t, _) = rate_inner_loop(&w, &w, &RatePidState::default(), &g, 0.001);
        assert_eq!(t, Vec3::zeros());
        let (t, _) =
            rate_inner_loop(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros(), &RatePidState::default(), &g, 0.001);
        assert_eq!(t, Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn rate_integral_trapezoid_sum() {
        // constant error 1 on x: ten trapezoids of width 0.01 sum to 0.1
        let g = RateGains::unbounded(Vec3::zeros(), Vec3::splat(1.0), Vec3::zeros());
        let mut st = RatePidState::default();
        let mut t = Vec3::zeros();
        for _ in 0..10 {
            (t, st) = rate_inner_loop(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros(), &st, &g, 0.01);
        }
        assert_abs_diff_eq!(t.x, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(st.integral.x, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn rate_derivative_backward_difference() {
        let g = RateGains::unbounded(Vec3::zeros(), Vec3::zeros(), Vec3::splat(0.5));
        let (_, st) = rate_inner_loop(&Vec3::zeros(), &Vec3::zeros(), &RatePidState::default(), &g, 0.01);
        let (t, _) = rate_inner_loop(&Vec3::new(0.2, 0.0, 0.0), &Vec3::zeros(), &st, &g, 0.01);
        assert_abs_diff_eq!(t.x, 0.5 * 0.2 / 0.01, epsilon = 1e-12);
    }

    #[test]
    fn rate_integral_is_clamped() {
        let p = params();
        let g = RateGains::from_config(&ControllerGains::default(), &p);
        let mut st = RatePidState::default();
        for _ in 0..100_000 {
            (_, st) = rate_inner_loop(&Vec3::splat(50.0), &Vec3::zeros(), &st, &g, 0.001);
        }
        let auth = p.torque_authority();
        let frac = ControllerGains::default().rate_integral_fraction;
        assert_abs_diff_eq!(g.ki.x * st.integral.x, frac * auth.x, epsilon = 1e-12);
        assert_abs_diff_eq!(g.ki.z * st.integral.z, frac * auth.z, epsilon = 1e-12);
    }

    #[test]
    fn hover_split() {
        let p = params();
        let out = mixer_inverse(&Vec3::zeros(), 1.5 * 9.81, &p).unwrap();
        assert_eq!(out.command.theta1_cmd, 0.0);
        assert_eq!(out.command.theta2_cmd, 0.0);
        assert_abs_diff_eq!(out.command.f1_cmd, 7.3575, epsilon = 1e-12);
        assert_abs_diff_eq!(out.command.f2_cmd, 7.3575, epsilon = 1e-12);
        assert!(!out.saturation.any());
    }

    #[test]
    fn pitch_torque_by_hand() {
        // H = 0.05: a = 0.1 / (2·0.05) = 1, b = 10 / 2 = 5
        let p = params();
        let out = mixer_inverse(&Vec3::new(0.0, 0.1, 0.0), 10.0, &p).unwrap();
        let theta = 1.0f64.atan2(5.0);
        assert_abs_diff_eq!(theta, 0.1974, epsilon = 1e-4);
        assert_abs_diff_eq!(out.command.theta1_cmd, theta, epsilon = 1e-15);
        assert_abs_diff_eq!(out.command.theta2_cmd, theta, epsilon = 1e-15);
        assert_abs_diff_eq!(out.command.f1_cmd, 26f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(out.command.f1_cmd, 5.0990, epsilon = 1e-4);
        let (f, tau) = forward(&out.command, &p);
        assert_abs_diff_eq!(f, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tau.y, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn invalid_collective_rejected() {
        let p = params();
        for f in [0.0, -1.0, f64::NAN] {
            assert!(matches!(mixer_inverse(&Vec3::zeros(), f, &p), Err(ControlError::InvalidSetpoint { .. })));
        }
    }

    #[test]
    fn saturation_reported_not_error() {
        let p = params();
        let out = mixer_inverse(&Vec3::new(0.0, 5.0, 0.0), 1.0, &p).unwrap();
        assert!(out.saturation.theta1 && out.saturation.theta2);
        assert!(out.command.within_limits(&p));
        let out = mixer_inverse(&Vec3::zeros(), 100.0, &p).unwrap();
        assert!(out.saturation.f1 && out.saturation.f2);
        assert_eq!(out.command.f1_cmd, p.max_thrust_per_rotor);
    }

    #[test]
    fn controller_decimates_outer_loop() {
        let p = params();
        let g = ControllerGains::default();
        let mut c = AttitudeController::new(&g, &p, 4);
        let sp = AttitudeSetpoint { q_d: Quaternion::identity(), f_d: p.weight() };
        let mut s = RigidBodyState::default();
        c.update(&sp, &s, &p, 0.001).unwrap();
        assert_eq!(c.rate_demand(), Vec3::zeros());
        s.q = Quaternion::from_axis_angle(&Vec3::new(1.0, 0.0, 0.0), 0.1);
        for _ in 0..3 {
            c.update(&sp, &s, &p, 0.001).unwrap();
            assert_eq!(c.rate_demand(), Vec3::zeros());
        }
        c.update(&sp, &s, &p, 0.001).unwrap();
        assert!(c.rate_demand().x < 0.0);
    }

    fn unit_quat() -> impl Strategy<Value = Quaternion<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z).normalized())
    }

    proptest! {
        #[test]
        fn double_cover_invariance(q_d in unit_quat(), q in unit_quat()) {
            let kp = Vec3::new(5.0, 4.0, 3.0);
            let a = attitude_outer_loop(&q_d, &q, &kp);
            let b = attitude_outer_loop(&q_d.neg(), &q, &kp);
            let c = attitude_outer_loop(&q_d, &q.neg(), &kp);
            prop_assert!((a - b).max_abs() < 1e-12);
            prop_assert!((a - c).max_abs() < 1e-12);
        }

        #[test]
        fn zero_gain_rate_loop_is_silent(
            wd in prop::array::uniform3(-10.0..10.0f64), w in prop::array::uniform3(-10.0..10.0f64)
        ) {
            let g = RateGains::unbounded(Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
            let mut st = RatePidState::default();
            for _ in 0..3 {
                let (t, next) = rate_inner_loop(&Vec3::from(wd), &Vec3::from(w), &st, &g, 0.004);
                prop_assert_eq!(t, Vec3::zeros());
                st = next;
            }
        }

        #[test]
        fn mixer_round_trip(
            f_d in 1.0..25.0f64, tx in -1.0..1.0f64, ty in -0.3..0.3f64, tz in -0.5..0.5f64
        ) {
            let p = params();
            let tau = Vec3::new(tx, ty, tz);
            let out = mixer_inverse(&tau, f_d, &p).unwrap();
            let (f, t) = forward(&out.unclamped, &p);
            let scale = f_d.max(tau.max_abs());
            prop_assert!((f - f_d).abs() <= 1e-9 * scale);
            prop_assert!((t - tau).max_abs() <= 1e-9 * scale);
            if !out.saturation.any() {
                prop_assert_eq!(out.command, out.unclamped);
            }
        }

        #[test]
        fn mirror_swaps_rotors(
            f_d in 1.0..25.0f64, tx in -1.0..1.0f64, ty in -0.3..0.3f64, tz in -0.5..0.5f64
        ) {
            let p = params();
            let a = mixer_inverse(&Vec3::new(tx, ty, tz), f_d, &p).unwrap().unclamped;
            let b = mixer_inverse(&Vec3::new(-tx, ty, -tz), f_d, &p).unwrap().unclamped;
            prop_assert!((a.theta1_cmd - b.theta2_cmd).abs() < 1e-12);
            prop_assert!((a.theta2_cmd - b.theta1_cmd).abs() < 1e-12);
            prop_assert!((a.f1_cmd - b.f2_cmd).abs() < 1e-12);
            prop_assert!((a.f2_cmd - b.f1_cmd).abs() < 1e-12);
        }
    }
}
