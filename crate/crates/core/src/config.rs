//! Vehicle constants, controller gains and the power model.
//!
//! The on-disk format is a single flat JSON object with snake_case keys.
//! Keys that are absent take the shipped default; unknown keys are rejected.
//! Every invariant is checked on load and all violations are reported
//! together, each naming its field.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat3, Vec3};
use crate::scalar::Real;

/// Physical constants of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct VehicleParams<T> {
    /// Total mass (kg).
    pub mass: T,
    /// Body inertia about the center of mass (kg·m²).
    pub inertia: Mat3<T>,
    /// Lateral distance between the two rotors, `D` (m). Also the wheel track.
    pub rotor_separation: T,
    /// Vertical offset from the center of mass to the rotor tilt axis, `H` (m).
    pub tilt_axis_offset: T,
    pub wheel_radius: T,
    /// Motor-to-wheel speed ratio: `wheel = motor * gear_ratio`.
    pub gear_ratio: T,
    pub max_thrust_per_rotor: T,
    pub max_tilt: T,
    pub servo_time_constant: T,
    pub rotor_time_constant: T,
    pub gravity: T,
    /// Mass of one wheel (kg).
    pub wheel_mass: T,
    /// Spin inertia of one wheel about its axle (kg·m²).
    pub wheel_inertia: T,
    /// Height of the body center of mass above the axle when upright (m).
    pub com_height: T,
    /// Viscous friction between wheel and body (N·m·s/rad).
    pub wheel_friction: T,
    /// Proportional gain of the wheel speed servo (N·m·s/rad).
    pub wheel_servo_gain: T,
    pub wheel_torque_limit: T,
    /// Limit on commanded motor speed (rad/s, motor side).
    pub motor_speed_limit: T,
}

/// Gains and loop rates for both control cascades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ControllerGains<T> {
    pub kp_att: Vec3<T>,
    pub kp_rt: Vec3<T>,
    pub ki_rt: Vec3<T>,
    pub kd_rt: Vec3<T>,
    /// Share of per-axis torque authority the rate integral may command.
    pub rate_integral_fraction: T,
    pub kv_whl: T,
    pub kp_whl: T,
    pub ki_whl: T,
    pub kd_whl: T,
    pub kgamma_whl: T,
    /// Share of the motor speed limit the pitch integral may command.
    pub ground_integral_fraction: T,
    pub rate_loop_hz: T,
    pub attitude_loop_hz: T,
    pub ground_loop_hz: T,
    pub pitch_derivative_cutoff_hz: T,
    /// Bound on the pitch setpoint produced by the velocity loop (rad).
    pub pitch_setpoint_limit: T,
    pub max_speed: T,
    pub max_yaw_rate: T,
}

/// Steady power draw per locomotion mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PowerModel<T> {
    pub aerial_power_w: T,
    pub ground_power_w: T,
    pub per_kg_aerial: T,
    pub per_kg_ground: T,
    /// Scale aerial power by `((F1 + F2) / mg)^1.5`.
    pub effort_scaled: bool,
}

/// Everything a simulation needs from the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct VehicleConfig<T> {
    #[serde(flatten)]
    pub vehicle: VehicleParams<T>,
    #[serde(flatten)]
    pub gains: ControllerGains<T>,
    #[serde(flatten)]
    pub power: PowerModel<T>,
}

/// Thrust of one rotor at 55 % throttle (kg-force).
pub const THRUST_AT_55_PCT_KGF: f64 = 0.811;

impl<T: Real> VehicleParams<T> {
    /// Weight of the vehicle (N).
    pub fn weight(&self) -> T {
        self.mass * self.gravity
    }

    pub fn hover_thrust_per_rotor(&self) -> T {
        self.weight() * T::half()
    }

    /// Wheel-side speed for a motor-side speed.
    pub fn motor_to_wheel_speed(&self, motor: T) -> T {
        motor * self.gear_ratio
    }

    /// Mass of the body excluding both wheels.
    pub fn body_mass(&self) -> T {
        self.mass - T::two() * self.wheel_mass
    }

    /// Largest torque each axis can produce with both rotors inside limits.
    pub fn torque_authority(&self) -> Vec3<T> {
        let (d, h, f) = (self.rotor_separation, self.tilt_axis_offset, self.max_thrust_per_rotor);
        let s = self.max_tilt.sin();
        Vec3::new(f * d * T::half(), T::two() * h * f * s, d * f * s)
    }

    pub fn cast<U: Real>(&self) -> VehicleParams<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        VehicleParams {
            mass: c(self.mass),
            inertia: self.inertia.cast(),
            rotor_separation: c(self.rotor_separation),
            tilt_axis_offset: c(self.tilt_axis_offset),
            wheel_radius: c(self.wheel_radius),
            gear_ratio: c(self.gear_ratio),
            max_thrust_per_rotor: c(self.max_thrust_per_rotor),
            max_tilt: c(self.max_tilt),
            servo_time_constant: c(self.servo_time_constant),
            rotor_time_constant: c(self.rotor_time_constant),
            gravity: c(self.gravity),
            wheel_mass: c(self.wheel_mass),
            wheel_inertia: c(self.wheel_inertia),
            com_height: c(self.com_height),
            wheel_friction: c(self.wheel_friction),
            wheel_servo_gain: c(self.wheel_servo_gain),
            wheel_torque_limit: c(self.wheel_torque_limit),
            motor_speed_limit: c(self.motor_speed_limit),
        }
    }
}

impl Default for VehicleParams<f64> {
    fn default() -> Self {
        let wheel_radius = 0.125;
        let wheel_mass = 0.15;
        Self {
            mass: 1.5,
            inertia: Mat3::diag(0.01, 0.02, 0.02),
            rotor_separation: 0.25,
            tilt_axis_offset: 0.05,
            wheel_radius,
            gear_ratio: 16.0 / 25.0,
            max_thrust_per_rotor: 14.5,
            max_tilt: 0.6,
            servo_time_constant: 0.05,
            rotor_time_constant: 0.02,
            gravity: 9.81,
            wheel_mass,
            wheel_inertia: 0.5 * wheel_mass * wheel_radius * wheel_radius,
            com_height: 0.03,
            wheel_friction: 0.005,
            wheel_servo_gain: 0.1,
            wheel_torque_limit: 2.0,
            motor_speed_limit: 300.0,
        }
    }
}

impl Default for ControllerGains<f64> {
    fn default() -> Self {
        Self {
            kp_att: Vec3::new(6.0, 6.0, 3.0),
            kp_rt: Vec3::new(0.15, 0.25, 0.2),
            ki_rt: Vec3::new(0.05, 0.05, 0.05),
            kd_rt: Vec3::new(0.002, 0.002, 0.0),
            rate_integral_fraction: 0.5,
            kv_whl: -0.2,
            kp_whl: 60.0,
            ki_whl: 60.0,
            kd_whl: 3.0,
            kgamma_whl: 60.0,
            ground_integral_fraction: 0.5,
            rate_loop_hz: 1000.0,
            attitude_loop_hz: 250.0,
            ground_loop_hz: 250.0,
            pitch_derivative_cutoff_hz: 30.0,
            pitch_setpoint_limit: 15f64.to_radians(),
            max_speed: 2.0,
            max_yaw_rate: 2.0,
        }
    }
}

impl Default for PowerModel<f64> {
    fn default() -> Self {
        Self {
            aerial_power_w: 691.4,
            ground_power_w: 4.5,
            per_kg_aerial: 460.9,
            per_kg_ground: 3.0,
            effort_scaled: false,
        }
    }
}

impl Default for VehicleConfig<f64> {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            gains: ControllerGains::default(),
            power: PowerModel::default(),
        }
    }
}

/// One failed invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid config: {}", join_issues(.0))]
    Invalid(Vec<FieldIssue>),
}

fn join_issues(issues: &[FieldIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ConfigError {
    /// Names of the offending fields, for invariant violations.
    pub fn fields(&self) -> Vec<&'static str> {
        match self {
            ConfigError::Invalid(issues) => issues.iter().map(|i| i.field).collect(),
            _ => Vec::new(),
        }
    }
}

struct Checker {
    issues: Vec<FieldIssue>,
}

impl Checker {
    fn check(&mut self, field: &'static str, ok: bool, message: impl Into<String>) {
        if !ok {
            self.issues.push(FieldIssue { field, message: message.into() });
        }
    }

    fn positive<T: Real>(&mut self, field: &'static str, v: T) {
        self.check(field, v.is_finite() && v > T::zero(), format!("must be finite and > 0 (got {v})"));
    }

    fn non_negative<T: Real>(&mut self, field: &'static str, v: T) {
        self.check(field, v.is_finite() && v >= T::zero(), format!("must be finite and >= 0 (got {v})"));
    }

    fn finite<T: Real>(&mut self, field: &'static str, v: T) {
        self.check(field, v.is_finite(), format!("must be finite (got {v})"));
    }

    fn finite_vec<T: Real>(&mut self, field: &'static str, v: &Vec3<T>) {
        self.check(field, v.is_finite(), "all components must be finite");
    }
}

impl<T: Real> VehicleConfig<T> {
    /// Checks every invariant, returning all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker { issues: Vec::new() };
        let v = &self.vehicle;
        c.positive("mass", v.mass);
        let inertia_ok = (0..3).all(|r| (0..3).all(|k| v.inertia.get(r, k).is_finite()))
            && v.inertia.is_symmetric(T::lit(1e-12))
            && v.inertia.is_positive_definite();
        c.check("inertia", inertia_ok, "must be finite, symmetric and positive-definite");
        c.positive("rotor_separation", v.rotor_separation);
        c.positive("tilt_axis_offset", v.tilt_axis_offset);
        c.positive("wheel_radius", v.wheel_radius);
        c.positive("gear_ratio", v.gear_ratio);
        c.positive("max_thrust_per_rotor", v.max_thrust_per_rotor);
        c.check(
            "max_tilt",
            v.max_tilt > T::zero() && v.max_tilt < T::FRAC_PI_2(),
            format!("must lie in (0, pi/2) (got {})", v.max_tilt),
        );
        c.positive("servo_time_constant", v.servo_time_constant);
        c.positive("rotor_time_constant", v.rotor_time_constant);
        c.non_negative("gravity", v.gravity);
        c.non_negative("wheel_mass", v.wheel_mass);
        c.check(
            "wheel_mass",
            !(v.body_mass() <= T::zero()),
            "two wheels must weigh less than the whole vehicle",
        );
        c.non_negative("wheel_inertia", v.wheel_inertia);
        c.non_negative("com_height", v.com_height);
        c.non_negative("wheel_friction", v.wheel_friction);
        c.positive("wheel_servo_gain", v.wheel_servo_gain);
        c.positive("wheel_torque_limit", v.wheel_torque_limit);
        c.positive("motor_speed_limit", v.motor_speed_limit);

        let g = &self.gains;
        c.finite_vec("kp_att", &g.kp_att);
        c.finite_vec("kp_rt", &g.kp_rt);
        c.finite_vec("ki_rt", &g.ki_rt);
        c.finite_vec("kd_rt", &g.kd_rt);
        c.check(
            "rate_integral_fraction",
            g.rate_integral_fraction >= T::zero() && g.rate_integral_fraction <= T::one(),
            "must lie in [0, 1]",
        );
        c.finite("kv_whl", g.kv_whl);
        c.finite("kp_whl", g.kp_whl);
        c.finite("ki_whl", g.ki_whl);
        c.finite("kd_whl", g.kd_whl);
        c.finite("kgamma_whl", g.kgamma_whl);
        c.check(
            "ground_integral_fraction",
            g.ground_integral_fraction >= T::zero() && g.ground_integral_fraction <= T::one(),
            "must lie in [0, 1]",
        );
        c.positive("rate_loop_hz", g.rate_loop_hz);
        c.positive("attitude_loop_hz", g.attitude_loop_hz);
        c.check(
            "rate_loop_hz",
            !(g.rate_loop_hz < g.attitude_loop_hz),
            "must be >= attitude_loop_hz",
        );
        c.positive("ground_loop_hz", g.ground_loop_hz);
        c.positive("pitch_derivative_cutoff_hz", g.pitch_derivative_cutoff_hz);
        c.check(
            "pitch_setpoint_limit",
            g.pitch_setpoint_limit > T::zero() && g.pitch_setpoint_limit < T::FRAC_PI_2(),
            "must lie in (0, pi/2)",
        );
        c.positive("max_speed", g.max_speed);
        c.positive("max_yaw_rate", g.max_yaw_rate);

        let p = &self.power;
        c.non_negative("aerial_power_w", p.aerial_power_w);
        c.non_negative("ground_power_w", p.ground_power_w);
        c.non_negative("per_kg_aerial", p.per_kg_aerial);
        c.non_negative("per_kg_ground", p.per_kg_ground);

        if c.issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(c.issues))
        }
    }
}

impl VehicleConfig<f64> {
    /// Parses and validates a JSON config document.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let known = match serde_json::to_value(Self::default())? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        let unknown: Vec<String> = raw.keys().filter(|k| !known.contains_key(*k)).cloned().collect();
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let mut merged = known;
        merged.extend(raw);
        let cfg: Self = serde_json::from_value(serde_json::Value::Object(merged))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Loads `path`; see [`VehicleConfig::from_json_str`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n")
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
    }
}

/// Splits a loaded config into its three parts.
pub fn load_params(
    path: impl AsRef<Path>,
) -> Result<(VehicleParams<f64>, ControllerGains<f64>, PowerModel<f64>), ConfigError> {
    let cfg = VehicleConfig::load(path)?;
    Ok((cfg.vehicle, cfg.gains, cfg.power))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_values() {
        let cfg = VehicleConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.vehicle.mass, 1.5);
        assert_eq!(cfg.vehicle.gear_ratio, 0.64);
        assert_eq!(cfg.vehicle.wheel_radius, 0.125);
        assert!(cfg.power.aerial_power_w > cfg.power.ground_power_w);
        assert!(cfg.vehicle.hover_thrust_per_rotor() < cfg.vehicle.max_thrust_per_rotor);
    }

    #[test]
    fn max_thrust_from_linear_extrapolation() {
        // 811 g at 55 % throttle, scaled linearly to 100 %.
        let standard_gravity = 9.80665;
        let extrapolated = THRUST_AT_55_PCT_KGF / 0.55 * standard_gravity;
        assert!((extrapolated - 14.46).abs() < 0.01, "{extrapolated}");
        let default = VehicleParams::default().max_thrust_per_rotor;
        assert_eq!(default, 14.5);
        assert!((default - extrapolated).abs() < 0.1);
    }

    #[test]
    fn negative_mass_names_field() {
        let err = VehicleConfig::from_json_str(r#"{"mass": -1.0}"#).unwrap_err();
        assert_eq!(err.fields()[0], "mass");
        assert!(err.to_string().contains("mass"));
    }

    #[test]
    fn all_violations_reported() {
        let err = VehicleConfig::from_json_str(
            r#"{"mass": 0.0, "max_tilt": 2.0, "inertia": [[1,0,0],[0,-1,0],[0,0,1]], "attitude_loop_hz": 5000}"#,
        )
        .unwrap_err();
        let fields = err.fields();
        for f in ["mass", "max_tilt", "inertia", "rate_loop_hz"] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn asymmetric_inertia_rejected() {
        let err = VehicleConfig::from_json_str(r#"{"inertia": [[1,0.5,0],[0,1,0],[0,0,1]]}"#).unwrap_err();
        assert_eq!(err.fields(), vec!["inertia"]);
    }

    #[test]
    fn unknown_and_malformed() {
        assert!(matches!(
            VehicleConfig::from_json_str(r#"{"mas": 1.0}"#),
            Err(ConfigError::UnknownKeys(k)) if k == vec!["mas".to_string()]
        ));
        assert!(matches!(VehicleConfig::from_json_str("{not json"), Err(ConfigError::Parse(_))));
        assert!(matches!(VehicleConfig::from_json_str(r#"{"mass": "heavy"}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(VehicleConfig::load("/nonexistent/cfg.json"), Err(ConfigError::Io { .. })));
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let mut cfg = VehicleConfig::default();
        cfg.vehicle.com_height = 0.1 + 0.2; // not exactly representable in short decimal
        cfg.gains.kp_att = Vec3::new(1.0 / 3.0, 2.0f64.sqrt(), 1e-17);
        let once = VehicleConfig::from_json_str(&cfg.to_json_string()).unwrap();
        let twice = VehicleConfig::from_json_str(&once.to_json_string()).unwrap();
        assert_eq!(once, cfg);
        assert_eq!(twice, once);
        assert_eq!(once.vehicle.com_height.to_bits(), cfg.vehicle.com_height.to_bits());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        VehicleConfig::default().save(&path).unwrap();
        let (v, g, p) = load_params(&path).unwrap();
        assert_eq!(v, VehicleParams::default());
        assert_eq!(g, ControllerGains::default());
        assert_eq!(p, PowerModel::default());
    }

    #[test]
    fn gear_scaling_and_cast() {
        let v = VehicleParams::default();
        assert!((v.motor_to_wheel_speed(25.0) - 16.0).abs() < 1e-12);
        let f: VehicleParams<f32> = v.cast();
        assert_eq!(f.mass, 1.5f32);
        assert!((f.hover_thrust_per_rotor() - 7.3575).abs() < 1e-5);
    }
}
