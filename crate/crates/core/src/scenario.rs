//! Scripted scenarios: mode schedule, setpoints and disturbances, run
//! through the plants and controllers at fixed steps.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aerial_control::{AttitudeController, AttitudeSetpoint};
use crate::aerial_plant::{actuator_step, step_rk4, ActuatorState, DynamicsError, RigidBodyState};
use crate::config::VehicleConfig;
use crate::ground_control::{GroundController, GroundSetpoint};
use crate::ground_plant::{self, wheel_speeds, wheel_velocity_tracking, GroundState, WheelCommand};
use crate::log::{LogRow, Mode, SimLog};
use crate::math::{EulerZYX, Quaternion, Vec3};

/// Roll bound for landing (rad).
pub const LANDING_MAX_ROLL_DEG: f64 = 5.0;
/// Largest descent rate allowed at landing (m/s, NED down).
pub const LANDING_MAX_DESCENT: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub t: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetpointEntry {
    /// Attitude as `[yaw, pitch, roll]` in degrees; collective defaults to the weight.
    Aerial {
        t: f64,
        attitude_deg: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        force_n: Option<f64>,
    },
    Ground {
        t: f64,
        v_d: f64,
        #[serde(default)]
        omega_gamma_d: f64,
    },
}

impl SetpointEntry {
    pub fn t(&self) -> f64 {
        match self {
            SetpointEntry::Aerial { t, .. } | SetpointEntry::Ground { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Disturbance {
    /// Instant change of pitch rate (rad/s).
    PitchKick { t: f64, rate: f64 },
    /// Instant change of body angular velocity (rad/s).
    AngularImpulse { t: f64, omega: [f64; 3] },
}

impl Disturbance {
    pub fn t(&self) -> f64 {
        match self {
            Disturbance::PitchKick { t, .. } | Disturbance::AngularImpulse { t, .. } => *t,
        }
    }
}

/// Starting state, given as a 6-DOF pose. A ground start maps it onto the
/// planar model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// `[yaw, pitch, roll]` in degrees.
    pub attitude_deg: [f64; 3],
    pub omega_b: [f64; 3],
    /// Start aerial runs with the rotors at hover thrust instead of zero.
    pub hover_trim: bool,
}

impl Default for InitialState {
    fn default() -> Self {
        Self { position: [0.0; 3], velocity: [0.0; 3], attitude_deg: [0.0; 3], omega_b: [0.0; 3], hover_trim: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub dt_plant: f64,
    pub dt_control: f64,
    /// Spacing of log rows; defaults to `dt_control`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_interval: Option<f64>,
    #[serde(default)]
    pub initial: InitialState,
    pub mode_schedule: Vec<ModeEntry>,
    #[serde(default)]
    pub setpoint_schedule: Vec<SetpointEntry>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
}

/// `n` when `x / unit` is within rounding of the integer `n ≥ 1`.
fn whole_multiple(x: f64, unit: f64) -> Option<u64> {
    let r = x / unit;
    let n = r.round();
    (n >= 1.0 && (r - n).abs() <= 1e-9 * n).then_some(n as u64)
}

/// First plant step at or after time `t`.
fn step_at(t: f64, dt: f64) -> u64 {
    (t / dt - 1e-9).ceil().max(0.0) as u64
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn log_interval(&self) -> f64 {
        self.log_interval.unwrap_or(self.dt_control)
    }

    /// Mode scheduled at time `t`.
    pub fn mode_at(&self, t: f64) -> Mode {
        let k = step_at(t, self.dt_plant);
        self.mode_schedule
            .iter()
            .take_while(|e| step_at(e.t, self.dt_plant) <= k)
            .last()
            .map_or(Mode::Aerial, |e| e.mode)
    }

    pub fn validate(&self, cfg: &VehicleConfig<f64>) -> Result<(), ScenarioError> {
        let mut issues = Vec::new();
        let mut bad = |m: String| issues.push(m);
        let g = &cfg.gains;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.dt_plant > 0.0 && self.dt_plant.is_finite()) {
            bad(format!("dt_plant must be positive, got {}", self.dt_plant));
        } else {
            if whole_multiple(self.dt_control, self.dt_plant).is_none() {
                bad(format!("dt_control {} is not a whole multiple of dt_plant {}", self.dt_control, self.dt_plant));
            }
            if whole_multiple(self.log_interval(), self.dt_plant).is_none() {
                bad(format!("log_interval {} is not a whole multiple of dt_plant", self.log_interval()));
            }
        }
        match self.mode_schedule.first() {
            None => bad("mode_schedule is empty".into()),
            Some(e) if e.t != 0.0 => bad("mode_schedule must start at t = 0".into()),
            _ => {}
        }
        let times = |v: Vec<f64>, what: &str, strict: bool, bad: &mut dyn FnMut(String)| {
            for w in v.windows(2) {
                if w[1] < w[0] || (strict && w[1] == w[0]) {
                    bad(format!("{what} is not time-sorted at t = {}", w[1]));
                }
            }
            if v.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                bad(format!("{what} has a negative or non-finite time"));
            }
        };
        times(self.mode_schedule.iter().map(|e| e.t).collect(), "mode_schedule", true, &mut bad);
        times(self.setpoint_schedule.iter().map(|e| e.t()).collect(), "setpoint_schedule", false, &mut bad);
        times(self.disturbances.iter().map(|e| e.t()).collect(), "disturbances", false, &mut bad);
        for sp in &self.setpoint_schedule {
            match sp {
                SetpointEntry::Aerial { t, attitude_deg, force_n } => {
                    if attitude_deg[1].abs() >= 90.0 || attitude_deg.iter().any(|a| !a.is_finite()) {
                        bad(format!("aerial setpoint at t = {t}: pitch must be inside (-90, 90) degrees"));
                    }
                    if let Some(f) = force_n {
                        if !(*f > 0.0 && f.is_finite()) {
                            bad(format!("aerial setpoint at t = {t}: force_n must be positive"));
                        }
                    }
                }
                SetpointEntry::Ground { t, v_d, omega_gamma_d } => {
                    if !(v_d.abs() <= g.max_speed) {
                        bad(format!("ground setpoint at t = {t}: |v_d| exceeds max_speed {}", g.max_speed));
                    }
                    if !(omega_gamma_d.abs() <= g.max_yaw_rate) {
                        bad(format!("ground setpoint at t = {t}: |omega_gamma_d| exceeds max_yaw_rate {}", g.max_yaw_rate));
                    }
                }
            }
        }
        let init = &self.initial;
        let all = init.position.iter().chain(&init.velocity).chain(&init.attitude_deg).chain(&init.omega_b);
        if all.clone().any(|v| !v.is_finite()) {
            bad("initial state has a non-finite value".into());
        }
        if init.attitude_deg[1].abs() >= 90.0 {
            bad("initial pitch must be inside (-90, 90) degrees".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(issues))
        }
    }
}

/// Planar state to 6-DOF pose. Heading is counter-clockwise from north
/// with y to the left, so east = −y and yaw = −γ.
pub fn ground_to_rigid(g: &GroundState<f64>, z: f64) -> RigidBodyState<f64> {
    let yaw = -g.gamma;
    let q = EulerZYX::new(yaw, g.delta, 0.0).to_quaternion().unwrap_or_else(|_| Quaternion::identity());
    let yaw_rate = -g.gamma_dot;
    RigidBodyState {
        pos: Vec3::new(g.x, -g.y, z),
        vel: Vec3::new(g.v * g.gamma.cos(), -g.v * g.gamma.sin(), 0.0),
        q,
        omega_b: Vec3::new(-g.delta.sin() * yaw_rate, g.delta_dot, g.delta.cos() * yaw_rate),
    }
}

/// 6-DOF pose to planar state; roll and vertical motion are dropped.
pub fn rigid_to_ground(s: &RigidBodyState<f64>) -> GroundState<f64> {
    let e = s.q.to_euler();
    let (sr, cr) = e.phi.sin_cos();
    let w = s.omega_b;
    let pitch_rate = w.y * cr - w.z * sr;
    let yaw_rate = (w.y * sr + w.z * cr) / e.omega.cos();
    GroundState {
        x: s.pos.x,
        y: -s.pos.y,
        gamma: -e.kappa,
        gamma_dot: -yaw_rate,
        v: s.vel.x * e.kappa.cos() + s.vel.y * e.kappa.sin(),
        delta: e.omega,
        delta_dot: pitch_rate,
    }
}

struct Runner<'a> {
    sc: &'a Scenario,
    cfg: &'a VehicleConfig<f64>,
    mode: Mode,
    rigid: RigidBodyState<f64>,
    act: ActuatorState<f64>,
    act_cmd: crate::aerial_control::ActuatorCommand<f64>,
    ground: GroundState<f64>,
    ground_z: f64,
    att: AttitudeController<f64>,
    gnd: GroundController<f64>,
    wheel_cmd: WheelCommand<f64>,
    aerial_sp: AttitudeSetpoint<f64>,
    ground_sp: GroundSetpoint<f64>,
    ticks_in_mode: u64,
    ground_every: u64,
    pending: Vec<String>,
    log: SimLog,
}

impl<'a> Runner<'a> {
    fn new(sc: &'a Scenario, cfg: &'a VehicleConfig<f64>) -> Self {
        let p = &cfg.vehicle;
        let g = &cfg.gains;
        let dt_c = sc.dt_control;
        let outer_every = ((1.0 / g.attitude_loop_hz) / dt_c).round().max(1.0) as u64;
        let ground_every = ((1.0 / g.ground_loop_hz) / dt_c).round().max(1.0) as u64;
        let init = &sc.initial;
        let [yaw, pitch, roll] = init.attitude_deg;
        let rigid = RigidBodyState {
            pos: Vec3::from(init.position),
            vel: Vec3::from(init.velocity),
            q: EulerZYX::from_degrees(yaw, pitch, roll).to_quaternion().expect("validated pitch"),
            omega_b: Vec3::from(init.omega_b),
        };
        let mode = sc.mode_schedule[0].mode;
        let act = if mode == Mode::Aerial && init.hover_trim { ActuatorState::hover_trim(p) } else { ActuatorState::zero() };
        let act_cmd = crate::aerial_control::ActuatorCommand {
            theta1_cmd: act.theta1,
            theta2_cmd: act.theta2,
            f1_cmd: act.f1,
            f2_cmd: act.f2,
        };
        Self {
            sc,
            cfg,
            mode,
            rigid,
            act,
            act_cmd,
            ground: rigid_to_ground(&rigid),
            ground_z: rigid.pos.z,
            att: AttitudeController::new(g, p, outer_every),
            gnd: GroundController::default(),
            wheel_cmd: WheelCommand::default(),
            aerial_sp: AttitudeSetpoint { q_d: Quaternion::identity(), f_d: p.weight() },
            ground_sp: GroundSetpoint::default(),
            ticks_in_mode: 0,
            ground_every,
            pending: Vec::new(),
            log: SimLog::default(),
        }
    }

    /// Ends the run, flagging the last logged row.
    fn terminate(&mut self, event: &str) {
        let mut events = std::mem::take(&mut self.pending);
        events.push(event.to_string());
        match self.log.rows.last_mut() {
            Some(r) => r.events.extend(events),
            None => self.pending = events,
        }
        self.log.terminal = Some(event.to_string());
    }

    fn switch_mode(&mut self, to: Mode) -> Result<(), &'static str> {
        if to == self.mode {
            return Ok(());
        }
        match to {
            Mode::Ground => {
                let e = self.rigid.q.to_euler();
                if e.phi.abs() >= LANDING_MAX_ROLL_DEG.to_radians() || self.rigid.vel.z >= LANDING_MAX_DESCENT {
                    return Err("transition_refused");
                }
                self.ground = rigid_to_ground(&self.rigid);
                self.ground_z = self.rigid.pos.z;
                self.gnd.reset();
                self.wheel_cmd = WheelCommand::default();
            }
            Mode::Aerial => {
                self.rigid = ground_to_rigid(&self.ground, self.ground_z);
                self.att.reset();
            }
        }
        self.act = ActuatorState::zero();
        self.act_cmd = Default::default();
        self.mode = to;
        self.ticks_in_mode = 0;
        self.pending.push(format!("mode_{to}"));
        Ok(())
    }

    fn apply_setpoint(&mut self, sp: &SetpointEntry) {
        match sp {
            SetpointEntry::Aerial { attitude_deg, force_n, .. } => {
                let [y, p, r] = *attitude_deg;
                self.aerial_sp = AttitudeSetpoint {
                    q_d: EulerZYX::from_degrees(y, p, r).to_quaternion().expect("validated pitch"),
                    f_d: force_n.unwrap_or(self.cfg.vehicle.weight()),
                };
            }
            SetpointEntry::Ground { v_d, omega_gamma_d, .. } => {
                self.ground_sp = GroundSetpoint { v_d: *v_d, omega_gamma_d: *omega_gamma_d };
            }
        }
        self.pending.push("setpoint".into());
    }

    fn apply_disturbance(&mut self, d: &Disturbance) {
        match (d, self.mode) {
            (Disturbance::PitchKick { rate, .. }, Mode::Ground) => self.ground.delta_dot += rate,
            (Disturbance::PitchKick { rate, .. }, Mode::Aerial) => self.rigid.omega_b.y += rate,
            (Disturbance::AngularImpulse { omega, .. }, Mode::Aerial) => self.rigid.omega_b += Vec3::from(*omega),
            (Disturbance::AngularImpulse { omega, .. }, Mode::Ground) => {
                self.ground.delta_dot += omega[1];
                self.ground.gamma_dot -= omega[2];
            }
        }
        self.pending.push("disturbance".into());
    }

    fn control(&mut self) -> Result<(), &'static str> {
        let p = &self.cfg.vehicle;
        let g = &self.cfg.gains;
        let dt = self.sc.dt_control;
        match self.mode {
            Mode::Aerial => {
                let out = self.att.update(&self.aerial_sp, &self.rigid, p, dt).map_err(|_| "nonfinite_command")?;
                if !out.command.is_finite() {
                    return Err("nonfinite_command");
                }
                if out.saturation.any() {
                    self.pending.push("saturation".into());
                }
                self.act_cmd = out.command;
            }
            Mode::Ground => {
                if self.ticks_in_mode % self.ground_every == 0 {
                    let dt_g = dt * self.ground_every as f64;
                    let cmd = self.gnd.update(&self.ground_sp, &self.ground, g, p, dt_g);
                    if !(cmd.omega_whl1.is_finite() && cmd.omega_whl2.is_finite()) {
                        return Err("nonfinite_command");
                    }
                    self.wheel_cmd = cmd;
                }
            }
        }
        self.ticks_in_mode += 1;
        Ok(())
    }

    fn row(&mut self, t: f64) -> LogRow {
        let p = &self.cfg.vehicle;
        let (rigid, ground, wheel) = match self.mode {
            Mode::Aerial => (self.rigid, rigid_to_ground(&self.rigid), (0.0, 0.0)),
            Mode::Ground => (ground_to_rigid(&self.ground, self.ground_z), self.ground, wheel_speeds(&self.ground, p)),
        };
        LogRow {
            t,
            mode: Some(self.mode),
            pos: rigid.pos.to_array(),
            vel: rigid.vel.to_array(),
            q: rigid.q.to_array(),
            omega_b: rigid.omega_b.to_array(),
            delta: ground.delta,
            v_fwd: ground.v,
            gamma: ground.gamma,
            gamma_dot: ground.gamma_dot,
            theta: [self.act.theta1, self.act.theta2],
            thrust: [self.act.f1, self.act.f2],
            wheel: [wheel.0, wheel.1],
            power_w: self.cfg.power.instantaneous(self.mode, self.act.f1 + self.act.f2, p.weight()),
            events: std::mem::take(&mut self.pending),
        }
    }

    fn integrate(&mut self) -> Result<(), DynamicsError> {
        let p = &self.cfg.vehicle;
        let dt = self.sc.dt_plant;
        match self.mode {
            Mode::Aerial => {
                self.act = actuator_step(&self.act, &self.act_cmd, dt, p);
                self.rigid = step_rk4(&self.rigid, &self.act, dt, p)?;
            }
            Mode::Ground => {
                let tq = wheel_velocity_tracking(&self.ground, &self.wheel_cmd, p);
                self.ground = ground_plant::step_rk4(&self.ground, &tq, dt, p)?;
            }
        }
        Ok(())
    }

    fn run(mut self) -> SimLog {
        let sc = self.sc;
        let dt = sc.dt_plant;
        let steps = whole_multiple(sc.duration, dt).unwrap_or_else(|| (sc.duration / dt).ceil() as u64);
        let control_every = whole_multiple(sc.dt_control, dt).expect("validated");
        let log_every = whole_multiple(sc.log_interval(), dt).expect("validated");
        let (mut i_mode, mut i_sp, mut i_dist) = (1usize, 0usize, 0usize);
        if sc.mode_schedule[0].mode == Mode::Ground && self.ground.has_fallen() {
            self.terminate("fallen");
            return self.log;
        }
        for k in 0..=steps {
            while i_mode < sc.mode_schedule.len() && step_at(sc.mode_schedule[i_mode].t, dt) <= k {
                if let Err(e) = self.switch_mode(sc.mode_schedule[i_mode].mode) {
                    self.terminate(e);
                    return self.log;
                }
                i_mode += 1;
            }
            while i_sp < sc.setpoint_schedule.len() && step_at(sc.setpoint_schedule[i_sp].t(), dt) <= k {
                let sp = sc.setpoint_schedule[i_sp].clone();
                self.apply_setpoint(&sp);
                i_sp += 1;
            }
            while i_dist < sc.disturbances.len() && step_at(sc.disturbances[i_dist].t(), dt) <= k {
                let d = sc.disturbances[i_dist].clone();
                self.apply_disturbance(&d);
                i_dist += 1;
            }
            if k % control_every == 0 {
                if let Err(e) = self.control() {
                    self.terminate(e);
                    return self.log;
                }
            }
            if k % log_every == 0 {
                let row = self.row(k as f64 * dt);
                if !row.is_finite() {
                    self.terminate("diverged");
                    return self.log;
                }
                self.log.rows.push(row);
            }
            if k == steps {
                break;
            }
            if let Err(e) = self.integrate() {
                let name = match e {
                    DynamicsError::Diverged => "diverged",
                    DynamicsError::Fallen { .. } => "fallen",
                };
                self.terminate(name);
                return self.log;
            }
        }
        self.log
    }
}

/// Runs a validated scenario. Failures during the run end the log early with
/// a terminal event; they are reported through `SimLog::terminal`.
pub fn run_scenario(sc: &Scenario, cfg: &VehicleConfig<f64>) -> Result<SimLog, ScenarioError> {
    cfg.validate().map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
    sc.validate(cfg)?;
    Ok(Runner::new(sc, cfg).run())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(mode: Mode, duration: f64) -> Scenario {
        Scenario {
            name: "t".into(),
            duration,
            dt_plant: 0.001,
            dt_control: 0.001,
            log_interval: Some(0.01),
            initial: InitialState::default(),
            mode_schedule: vec![ModeEntry { t: 0.0, mode }],
            setpoint_schedule: vec![],
            disturbances: vec![],
        }
    }

    #[test]
    fn hover_holds_trim() {
        let cfg = VehicleConfig::default();
        let log = run_scenario(&base(Mode::Aerial, 2.0), &cfg).unwrap();
        assert_eq!(log.terminal, None);
        assert_eq!(log.len(), 201);
        for r in &log.rows {
            assert_eq!(r.q, [1.0, 0.0, 0.0, 0.0]);
            assert_eq!(r.pos, [0.0; 3]);
        }
    }

    #[test]
    fn pose_mapping_round_trip() {
        let g = GroundState { x: 1.0, y: -2.0, gamma: 0.7, gamma_dot: 0.3, v: 0.4, delta: 0.1, delta_dot: -0.2 };
        let back = rigid_to_ground(&ground_to_rigid(&g, 0.0));
        for (a, b) in g.to_array().iter().zip(back.to_array().iter()) {
            assert!((a - b).abs() < 1e-12, "{g:?} {back:?}");
        }
    }

    #[test]
    fn validation_reports_problems() {
        let cfg = VehicleConfig::default();
        let mut sc = base(Mode::Aerial, -1.0);
        sc.dt_control = 0.0015;
        sc.mode_schedule = vec![ModeEntry { t: 1.0, mode: Mode::Ground }, ModeEntry { t: 0.5, mode: Mode::Aerial }];
        sc.setpoint_schedule.push(SetpointEntry::Ground { t: 0.0, v_d: 10.0, omega_gamma_d: 0.0 });
        match sc.validate(&cfg) {
            Err(ScenarioError::Invalid(v)) => assert!(v.len() >= 5, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"name":"x","duration":1,"dt_plant":0.001,"dt_control":0.001,"mode_schedule":[],"bogus":1}"#;
        assert!(matches!(Scenario::from_json_str(text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn refused_landing_terminates() {
        let cfg = VehicleConfig::default();
        let mut sc = base(Mode::Aerial, 1.0);
        sc.initial.velocity = [0.0, 0.0, 1.0];
        sc.initial.hover_trim = true;
        sc.mode_schedule.push(ModeEntry { t: 0.5, mode: Mode::Ground });
        let log = run_scenario(&sc, &cfg).unwrap();
        assert_eq!(log.terminal.as_deref(), Some("transition_refused"));
        assert!(log.rows.last().unwrap().events.contains(&"transition_refused".to_string()));
        assert!(log.rows.iter().all(|r| r.mode == Some(Mode::Aerial)));
    }

    #[test]
    fn unbalanced_ground_falls() {
        let mut cfg = VehicleConfig::default();
        cfg.gains.kp_whl = 0.0;
        cfg.gains.ki_whl = 0.0;
        cfg.gains.kd_whl = 0.0;
        let mut sc = base(Mode::Ground, 5.0);
        sc.initial.attitude_deg = [0.0, 5.0, 0.0];
        let log = run_scenario(&sc, &cfg).unwrap();
        assert_eq!(log.terminal.as_deref(), Some("fallen"));
        assert!(log.rows.iter().all(|r| r.is_finite()));
    }
}
