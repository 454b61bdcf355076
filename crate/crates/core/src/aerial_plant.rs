//! Rigid-body bicopter dynamics with first-order actuator lags.
//!
//! Inertial frame is NED, so gravity is `+z`. Collective thrust acts along
//! body `-z` (body "up"); the applied body force is therefore `[0, 0, -F]`.

use thiserror::Error;

use crate::aerial_control::ActuatorCommand;
use crate::config::VehicleParams;
use crate::integrate::rk4;
use crate::math::{skew, Quaternion, Vec3};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DynamicsError {
    #[error("simulation diverged: state is no longer finite")]
    Diverged,
    #[error("vehicle fell: pitch {delta} rad reached the horizontal")]
    Fallen { delta: f64 },
}

/// Aerial 6-DOF state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState<T> {
    /// Inertial position, NED (m).
    pub pos: Vec3<T>,
    /// Inertial velocity (m/s).
    pub vel: Vec3<T>,
    /// Body-to-inertial attitude.
    pub q: Quaternion<T>,
    /// Body angular velocity (rad/s).
    pub omega_b: Vec3<T>,
}

impl<T: Real> Default for RigidBodyState<T> {
    fn default() -> Self {
        Self { pos: Vec3::zeros(), vel: Vec3::zeros(), q: Quaternion::identity(), omega_b: Vec3::zeros() }
    }
}

impl<T: Real> RigidBodyState<T> {
    pub fn to_array(&self) -> [T; 13] {
        let q = self.q.to_array();
        [
            self.pos.x, self.pos.y, self.pos.z, self.vel.x, self.vel.y, self.vel.z, q[0], q[1], q[2], q[3],
            self.omega_b.x, self.omega_b.y, self.omega_b.z,
        ]
    }

    pub fn from_array(a: &[T; 13]) -> Self {
        Self {
            pos: Vec3::new(a[0], a[1], a[2]),
            vel: Vec3::new(a[3], a[4], a[5]),
            q: Quaternion::new(a[6], a[7], a[8], a[9]),
            omega_b: Vec3::new(a[10], a[11], a[12]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn rotational_energy(&self, p: &VehicleParams<T>) -> T {
        T::half() * self.omega_b.dot(&p.inertia.mul_vec(&self.omega_b))
    }

    /// Angular momentum expressed in the inertial frame, `R · J · Ω`.
    pub fn angular_momentum_inertial(&self, p: &VehicleParams<T>) -> Vec3<T> {
        self.q.rotate(&p.inertia.mul_vec(&self.omega_b))
    }
}

/// Actual (lagged) tilt angles and rotor thrusts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorState<T> {
    pub theta1: T,
    pub theta2: T,
    pub f1: T,
    pub f2: T,
}

impl<T: Real> ActuatorState<T> {
    pub fn zero() -> Self {
        Self { theta1: T::zero(), theta2: T::zero(), f1: T::zero(), f2: T::zero() }
    }

    /// Level hover: no tilt, half the weight on each rotor.
    pub fn hover_trim(p: &VehicleParams<T>) -> Self {
        let f = p.hover_thrust_per_rotor();
        Self { theta1: T::zero(), theta2: T::zero(), f1: f, f2: f }
    }

    pub fn within_limits(&self, p: &VehicleParams<T>) -> bool {
        let tilt_ok = |t: T| t.abs() <= p.max_tilt;
        let thrust_ok = |f: T| f >= T::zero() && f <= p.max_thrust_per_rotor;
        tilt_ok(self.theta1) && tilt_ok(self.theta2) && thrust_ok(self.f1) && thrust_ok(self.f2)
    }
}

/// Force and torque on the body, in body axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyWrench<T> {
    pub force_b: Vec3<T>,
    pub torque_b: Vec3<T>,
}

impl<T: Real> BodyWrench<T> {
    /// Collective thrust magnitude `F = F1 cos θ1 + F2 cos θ2`.
    pub fn collective(&self) -> T {
        -self.force_b.z
    }
}

/// Rotor torques and collective force produced by the actuators.
pub fn wrench_from_actuators<T: Real>(a: &ActuatorState<T>, p: &VehicleParams<T>) -> BodyWrench<T> {
    let half_d = p.rotor_separation * T::half();
    let (s1, c1) = a.theta1.sin_cos();
    let (s2, c2) = a.theta2.sin_cos();
    let torque_b = Vec3::new(
        (a.f1 * c1 - a.f2 * c2) * half_d,
        (a.f1 * s1 + a.f2 * s2) * p.tilt_axis_offset,
        (a.f1 * s1 - a.f2 * s2) * half_d,
    );
    let collective = a.f1 * c1 + a.f2 * c2;
    BodyWrench { force_b: Vec3::new(T::zero(), T::zero(), -collective), torque_b }
}

/// Time derivative of [`RigidBodyState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyDerivative<T> {
    pub pos_dot: Vec3<T>,
    pub vel_dot: Vec3<T>,
    pub q_dot: Quaternion<T>,
    pub omega_dot: Vec3<T>,
}

impl<T: Real> RigidBodyDerivative<T> {
    pub fn to_array(&self) -> [T; 13] {
        let q = self.q_dot.to_array();
        [
            self.pos_dot.x, self.pos_dot.y, self.pos_dot.z, self.vel_dot.x, self.vel_dot.y, self.vel_dot.z, q[0],
            q[1], q[2], q[3], self.omega_dot.x, self.omega_dot.y, self.omega_dot.z,
        ]
    }
}

/// Newton-Euler equations for the rigid body under gravity and `w`.
pub fn rigid_body_derivative<T: Real>(
    s: &RigidBodyState<T>,
    w: &BodyWrench<T>,
    p: &VehicleParams<T>,
) -> RigidBodyDerivative<T> {
    let j_inv = p.inertia.inverse().expect("inertia validated positive-definite");
    rigid_body_derivative_with(s, w, p, &j_inv)
}

fn rigid_body_derivative_with<T: Real>(
    s: &RigidBodyState<T>,
    w: &BodyWrench<T>,
    p: &VehicleParams<T>,
    j_inv: &crate::math::Mat3<T>,
) -> RigidBodyDerivative<T> {
    let gravity = Vec3::new(T::zero(), T::zero(), p.weight());
    let vel_dot = (gravity + s.q.rotate(&w.force_b)) / p.mass;
    let j_omega = p.inertia.mul_vec(&s.omega_b);
    let gyro = skew(&s.omega_b).mul_vec(&j_omega);
    let omega_dot = j_inv.mul_vec(&(w.torque_b - gyro));
    let omega_q = Quaternion { eta: T::zero(), eps: s.omega_b };
    let qd = s.q.mul_raw(&omega_q);
    let q_dot = Quaternion { eta: qd.eta * T::half(), eps: qd.eps * T::half() };
    RigidBodyDerivative { pos_dot: s.vel, vel_dot, q_dot, omega_dot }
}

/// Exact first-order lag toward `cmd` over `dt`, then clamped to limits.
pub fn actuator_step<T: Real>(
    a: &ActuatorState<T>,
    cmd: &ActuatorCommand<T>,
    dt: T,
    p: &VehicleParams<T>,
) -> ActuatorState<T> {
    let servo = T::one() - (-dt / p.servo_time_constant).exp();
    let rotor = T::one() - (-dt / p.rotor_time_constant).exp();
    let lag = |x: T, target: T, k: T| x + (target - x) * k;
    let tilt = |t: T| t.clamp_to(-p.max_tilt, p.max_tilt);
    let thrust = |f: T| f.clamp_to(T::zero(), p.max_thrust_per_rotor);
    ActuatorState {
        theta1: tilt(lag(a.theta1, cmd.theta1_cmd, servo)),
        theta2: tilt(lag(a.theta2, cmd.theta2_cmd, servo)),
        f1: thrust(lag(a.f1, cmd.f1_cmd, rotor)),
        f2: thrust(lag(a.f2, cmd.f2_cmd, rotor)),
    }
}

/// Advances the rigid body by `dt` with the actuators held constant.
pub fn step_rk4<T: Real>(
    s: &RigidBodyState<T>,
    a: &ActuatorState<T>,
    dt: T,
    p: &VehicleParams<T>,
) -> Result<RigidBodyState<T>, DynamicsError> {
    let w = wrench_from_actuators(a, p);
    step_rk4_wrench(s, &w, dt, p)
}

/// As [`step_rk4`], for an arbitrary body wrench.
pub fn step_rk4_wrench<T: Real>(
    s: &RigidBodyState<T>,
    w: &BodyWrench<T>,
    dt: T,
    p: &VehicleParams<T>,
) -> Result<RigidBodyState<T>, DynamicsError> {
    let j_inv = p.inertia.inverse().ok_or(DynamicsError::Diverged)?;
    let y = rk4(&s.to_array(), dt, |y| {
        rigid_body_derivative_with(&RigidBodyState::from_array(y), w, p, &j_inv).to_array()
    });
    let mut next = RigidBodyState::from_array(&y);
    next.q = next.q.normalized();
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::Diverged)
    }
}
