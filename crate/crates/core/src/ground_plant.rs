//! Two-wheeled inverted pendulum driven by geared wheel motors.
//!
//! Planar frame: x forward, y left, heading `gamma` counter-clockwise.
//! Pitch `delta` is positive nose-up, the same sense as the aerial Euler
//! pitch. Wheel 1 is the left wheel, wheel 2 the right.

use crate::aerial_plant::DynamicsError;
use crate::config::VehicleParams;
use crate::integrate::rk4;
use crate::math::Mat3;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundState<T> {
    pub x: T,
    pub y: T,
    pub gamma: T,
    pub gamma_dot: T,
    /// Forward speed of the axle (m/s).
    pub v: T,
    pub delta: T,
    pub delta_dot: T,
}

impl<T: Real> GroundState<T> {
    pub fn upright() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [T; 7] {
        [self.x, self.y, self.gamma, self.gamma_dot, self.v, self.delta, self.delta_dot]
    }

    pub fn from_array(a: &[T; 7]) -> Self {
        Self { x: a[0], y: a[1], gamma: a[2], gamma_dot: a[3], v: a[4], delta: a[5], delta_dot: a[6] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn has_fallen(&self) -> bool {
        self.delta.abs() >= T::FRAC_PI_2()
    }
}

/// Motor-side wheel speed commands (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelCommand<T> {
    pub omega_whl1: T,
    pub omega_whl2: T,
}

/// Wheel torques applied between body and wheel (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelTorques<T> {
    pub left: T,
    pub right: T,
}

/// Lumped mass-matrix coefficients of the pendulum-on-axle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwipCoefficients<T> {
    /// Translational inertia including wheel rotation.
    pub a11: T,
    /// Coupling term, body mass times COM height.
    pub a12: T,
    /// Body pitch inertia about the axle.
    pub a22: T,
    pub yaw_inertia: T,
    /// Gravity torque coefficient: M_b · g · l.
    pub mgl: T,
}

impl<T: Real> TwipCoefficients<T> {
    pub fn new(p: &VehicleParams<T>) -> Self {
        let r = p.wheel_radius;
        let mb = p.body_mass();
        let l = p.com_height;
        let half_track = p.rotor_separation * T::half();
        let wheel_equiv = p.wheel_mass + p.wheel_inertia / (r * r);
        Self {
            a11: mb + T::two() * wheel_equiv,
            a12: mb * l,
            a22: p.inertia.get(1, 1) + mb * l * l,
            yaw_inertia: p.inertia.get(2, 2) + T::two() * wheel_equiv * half_track * half_track,
            mgl: mb * p.gravity * l,
        }
    }
}

/// Wheel spin rates relative to the body (left, right), wheel side (rad/s).
pub fn wheel_speeds<T: Real>(s: &GroundState<T>, p: &VehicleParams<T>) -> (T, T) {
    let r = p.wheel_radius;
    let turn = s.gamma_dot * p.rotor_separation * T::half();
    ((s.v - turn) / r + s.delta_dot, (s.v + turn) / r + s.delta_dot)
}

/// State derivative without the fall check. The body may swing through
/// horizontal; used where the full pendulum motion is wanted.
pub fn twip_derivative_free<T: Real>(s: &GroundState<T>, tq: &WheelTorques<T>, p: &VehicleParams<T>) -> [T; 7] {
    let c = TwipCoefficients::new(p);
    let r = p.wheel_radius;
    let (wl, wr) = wheel_speeds(s, p);
    let ul = tq.left - p.wheel_friction * wl;
    let ur = tq.right - p.wheel_friction * wr;
    let u = ul + ur;
    let (sd, cd) = s.delta.sin_cos();
    let m12 = -c.a12 * cd;
    let r1 = u / r - c.a12 * sd * s.delta_dot * s.delta_dot;
    let r2 = u + c.mgl * sd;
    let det = c.a11 * c.a22 - m12 * m12;
    let v_dot = (c.a22 * r1 - m12 * r2) / det;
    let delta_ddot = (c.a11 * r2 - m12 * r1) / det;
    let gamma_ddot = p.rotor_separation / (T::two() * r) * (ur - ul) / c.yaw_inertia;
    let (sg, cg) = s.gamma.sin_cos();
    [s.v * cg, s.v * sg, s.gamma_dot, gamma_ddot, v_dot, s.delta_dot, delta_ddot]
}

pub fn twip_derivative<T: Real>(
    s: &GroundState<T>,
    tq: &WheelTorques<T>,
    p: &VehicleParams<T>,
) -> Result<[T; 7], DynamicsError> {
    if s.has_fallen() {
        return Err(DynamicsError::Fallen { delta: s.delta.to_f64_lossy() });
    }
    Ok(twip_derivative_free(s, tq, p))
}

/// Proportional wheel-speed servo. Motor-side commands are geared down to
/// wheel side, compared with the wheel speed relative to the body, and the
/// resulting torque is clamped to the motor limit.
pub fn wheel_velocity_tracking<T: Real>(s: &GroundState<T>, cmd: &WheelCommand<T>, p: &VehicleParams<T>) -> WheelTorques<T> {
    let (wl, wr) = wheel_speeds(s, p);
    let lim = p.wheel_torque_limit;
    let servo = |cmd: T, w: T| (p.wheel_servo_gain * (p.motor_to_wheel_speed(cmd) - w)).clamp_to(-lim, lim);
    WheelTorques { left: servo(cmd.omega_whl1, wl), right: servo(cmd.omega_whl2, wr) }
}

/// Total mechanical energy, zero potential at the axle height.
pub fn twip_energy<T: Real>(s: &GroundState<T>, p: &VehicleParams<T>) -> T {
    let c = TwipCoefficients::new(p);
    let h = T::half();
    h * c.a11 * s.v * s.v - c.a12 * s.delta.cos() * s.v * s.delta_dot
        + h * c.a22 * s.delta_dot * s.delta_dot
        + h * c.yaw_inertia * s.gamma_dot * s.gamma_dot
        + c.mgl * s.delta.cos()
}

/// One RK4 step with torques held over the step. Fails when the state
/// leaves the finite range or the body reaches horizontal.
pub fn step_rk4<T: Real>(
    s: &GroundState<T>,
    tq: &WheelTorques<T>,
    dt: T,
    p: &VehicleParams<T>,
) -> Result<GroundState<T>, DynamicsError> {
    if s.has_fallen() {
        return Err(DynamicsError::Fallen { delta: s.delta.to_f64_lossy() });
    }
    let next = step_rk4_free(s, tq, dt, p);
    if !next.is_finite() {
        return Err(DynamicsError::Diverged);
    }
    if next.has_fallen() {
        return Err(DynamicsError::Fallen { delta: next.delta.to_f64_lossy() });
    }
    Ok(next)
}

pub fn step_rk4_free<T: Real>(s: &GroundState<T>, tq: &WheelTorques<T>, dt: T, p: &VehicleParams<T>) -> GroundState<T> {
    let y = rk4(&s.to_array(), dt, |y| twip_derivative_free(&GroundState::from_array(y), tq, p));
    GroundState::from_array(&y)
}

/// Jacobian of the zero-torque dynamics at the upright rest state, by
/// central differences. Row/column order follows `GroundState::to_array`.
pub fn linearize_upright<T: Real>(p: &VehicleParams<T>) -> [[T; 7]; 7] {
    let h = T::lit(1e-6);
    let zero = WheelTorques::default();
    let mut a = [[T::zero(); 7]; 7];
    for j in 0..7 {
        let mut plus = [T::zero(); 7];
        let mut minus = [T::zero(); 7];
        plus[j] = h;
        minus[j] = -h;
        let fp = twip_derivative_free(&GroundState::from_array(&plus), &zero, p);
        let fm = twip_derivative_free(&GroundState::from_array(&minus), &zero, p);
        for i in 0..7 {
            a[i][j] = (fp[i] - fm[i]) / (T::two() * h);
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TurnRadius<T> {
    /// Signed radius; positive turns left.
    Finite(T),
    /// Zero yaw rate.
    Straight,
}

/// Steady turn radius `v / gamma_dot`.
pub fn circle_kinematics_check<T: Real>(v: T, gamma_dot: T) -> TurnRadius<T> {
    if gamma_dot == T::zero() {
        TurnRadius::Straight
    } else {
        TurnRadius::Finite(v / gamma_dot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle<T> {
    pub cx: T,
    pub cy: T,
    pub radius: T,
}

/// Algebraic least-squares circle fit. Needs three or more points that are
/// not collinear.
pub fn fit_circle<T: Real>(pts: &[(T, T)]) -> Option<Circle<T>> {
    if pts.len() < 3 {
        return None;
    }
    let n = T::lit(pts.len() as f64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    // Solve u² + v² = 2a·u + 2b·v + c in centered coordinates.
    let mut ata = Mat3::zeros();
    let mut atb = [T::zero(); 3];
    for &(px, py) in pts {
        let (u, w) = (px - mx, py - my);
        let row = [T::two() * u, T::two() * w, T::one()];
        let rhs = u * u + w * w;
        for i in 0..3 {
            for j in 0..3 {
                ata.m[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * rhs;
        }
    }
    let inv = ata.inverse()?;
    let sol = inv.mul_vec(&atb.into());
    let r2 = sol.z + sol.x * sol.x + sol.y * sol.y;
    if !(r2 > T::zero()) || !r2.is_finite() {
        return None;
    }
    Some(Circle { cx: sol.x + mx, cy: sol.y + my, radius: r2.sqrt() })
}
