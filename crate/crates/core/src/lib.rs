//! Simulation and control library for a twin tilt-rotor vehicle that also
//! drives on its rotor-hub wheels as a two-wheeled balancer.

pub mod aerial_control;
pub mod aerial_plant;
pub mod config;
pub mod ground_control;
pub mod ground_plant;
pub mod integrate;
pub mod log;
pub mod math;
pub mod metrics;
pub mod mixcheck;
pub mod rng;
pub mod scalar;
pub mod scenario;

pub use scalar::Real;

/// Double-precision aliases.
pub type Vector3 = math::Vec3<f64>;
pub type Matrix3 = math::Mat3<f64>;
pub type Quat = math::Quaternion<f64>;
pub type Euler = math::EulerZYX<f64>;
pub type Params = config::VehicleParams<f64>;
pub type Gains = config::ControllerGains<f64>;
pub type Config = config::VehicleConfig<f64>;
pub type RigidState = aerial_plant::RigidBodyState<f64>;
pub type Actuators = aerial_plant::ActuatorState<f64>;
pub type Command = aerial_control::ActuatorCommand<f64>;
pub type Attitude = aerial_control::AttitudeController<f64>;
pub type TwipState = ground_plant::GroundState<f64>;
pub type WheelCmd = ground_plant::WheelCommand<f64>;
pub type Balancer = ground_control::GroundController<f64>;
