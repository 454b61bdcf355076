//! Ground-mode cascade: velocity error to pitch setpoint, pitch PID to a
//! common wheel speed, yaw-rate error to a differential wheel speed.

use crate::config::{ControllerGains, VehicleParams};
use crate::ground_plant::{GroundState, WheelCommand};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundSetpoint<T> {
    pub v_d: T,
    pub omega_gamma_d: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundPidState<T> {
    pub integral: T,
    pub prev_error: T,
    /// Low-pass filtered pitch-error rate.
    pub filtered_rate: T,
    pub primed: bool,
}

/// Splits a command into its common and differential parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeTerms<T> {
    pub pitch_setpoint: T,
    pub pitch_error: T,
    pub common: T,
    pub differential: T,
}

/// Clamps `common ∓ differential` into `±limit`, giving up common mode first.
pub fn saturate_wheels<T: Real>(common: T, differential: T, limit: T) -> (T, T) {
    if common.abs() + differential.abs() <= limit {
        return (common, differential);
    }
    if differential.abs() <= limit {
        (common.signum() * (limit - differential.abs()), differential)
    } else {
        (T::zero(), differential.signum() * limit)
    }
}

/// Evaluates the cascade without saturation.
pub fn cascade_terms<T: Real>(
    sp: &GroundSetpoint<T>,
    s: &GroundState<T>,
    st: &GroundPidState<T>,
    g: &ControllerGains<T>,
    p: &VehicleParams<T>,
    dt: T,
) -> (CascadeTerms<T>, GroundPidState<T>) {
    let v_d = sp.v_d.clamp_to(-g.max_speed, g.max_speed);
    let wg_d = sp.omega_gamma_d.clamp_to(-g.max_yaw_rate, g.max_yaw_rate);
    let lim = g.pitch_setpoint_limit;
    let pitch_setpoint = (g.kv_whl * (v_d - s.v)).clamp_to(-lim, lim);
    let err = pitch_setpoint - s.delta;

    let prev = if st.primed { st.prev_error } else { err };
    let i_lim = if g.ki_whl == T::zero() {
        T::infinity()
    } else {
        g.ground_integral_fraction * p.motor_speed_limit / g.ki_whl.abs()
    };
    let integral = (st.integral + (err + prev) * (T::half() * dt)).clamp_to(-i_lim, i_lim);
    let raw_rate = (err - prev) / dt;
    let rc = T::one() / (T::two() * T::PI() * g.pitch_derivative_cutoff_hz);
    let alpha = dt / (dt + rc);
    let filtered_rate = st.filtered_rate + alpha * (raw_rate - st.filtered_rate);

    let common = g.kp_whl * err + g.ki_whl * integral + g.kd_whl * filtered_rate;
    let differential = g.kgamma_whl * (wg_d - s.gamma_dot);
    (
        CascadeTerms { pitch_setpoint, pitch_error: err, common, differential },
        GroundPidState { integral, prev_error: err, filtered_rate, primed: true },
    )
}

/// One controller tick: motor-side wheel speed commands.
pub fn ground_cascade<T: Real>(
    sp: &GroundSetpoint<T>,
    s: &GroundState<T>,
    st: &GroundPidState<T>,
    g: &ControllerGains<T>,
    p: &VehicleParams<T>,
    dt: T,
) -> (WheelCommand<T>, GroundPidState<T>) {
    let (terms, next) = cascade_terms(sp, s, st, g, p, dt);
    let (c, d) = saturate_wheels(terms.common, terms.differential, p.motor_speed_limit);
    (WheelCommand { omega_whl1: c - d, omega_whl2: c + d }, next)
}

/// Stateful wrapper holding the PID memory and the last command.
#[derive(Debug, Clone)]
pub struct GroundController<T> {
    state: GroundPidState<T>,
    command: WheelCommand<T>,
}

impl<T: Real> Default for GroundController<T> {
    fn default() -> Self {
        Self { state: GroundPidState::default(), command: WheelCommand::default() }
    }
}

impl<T: Real> GroundController<T> {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn command(&self) -> WheelCommand<T> {
        self.command
    }

    pub fn state(&self) -> GroundPidState<T> {
        self.state
    }

    pub fn update(
        &mut self,
        sp: &GroundSetpoint<T>,
        s: &GroundState<T>,
        g: &ControllerGains<T>,
        p: &VehicleParams<T>,
        dt: T,
    ) -> WheelCommand<T> {
        let (cmd, next) = ground_cascade(sp, s, &self.state, g, p, dt);
        self.state = next;
        self.command = cmd;
        cmd
    }
}
