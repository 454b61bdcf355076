//! Seeded round-trip check of the mixer against the forward allocation map.

use serde::Serialize;

use crate::aerial_control::mixer_inverse;
use crate::aerial_plant::{wrench_from_actuators, ActuatorState};
use crate::config::VehicleParams;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixcheckReport {
    pub samples: usize,
    pub seed: u64,
    /// Largest `‖w' − w‖∞ / ‖w‖∞` over the samples, with w = (F, τx, τy, τz).
    pub max_rel_error: f64,
    /// Samples whose exact inverse needed clamping (should be zero).
    pub saturated: usize,
}

/// Draws actuator states uniformly inside the limits, maps them forward to a
/// wrench, inverts that wrench and maps it forward again. Every drawn wrench
/// is reachable, so the comparison needs no rejection step.
pub fn mixcheck(samples: usize, seed: u64, p: &VehicleParams<f64>) -> MixcheckReport {
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    let mut saturated = 0;
    let f_min = 0.05 * p.max_thrust_per_rotor;
    for _ in 0..samples {
        let a = ActuatorState {
            theta1: rng.uniform(-p.max_tilt, p.max_tilt),
            theta2: rng.uniform(-p.max_tilt, p.max_tilt),
            f1: rng.uniform(f_min, p.max_thrust_per_rotor),
            f2: rng.uniform(f_min, p.max_thrust_per_rotor),
        };
        let w = wrench_from_actuators(&a, p);
        let out = mixer_inverse(&w.torque_b, w.collective(), p).expect("collective is positive inside the envelope");
        if out.saturation.any() {
            saturated += 1;
        }
        let c = out.unclamped;
        let back = wrench_from_actuators(
            &ActuatorState { theta1: c.theta1_cmd, theta2: c.theta2_cmd, f1: c.f1_cmd, f2: c.f2_cmd },
            p,
        );
        let dw = [
            back.collective() - w.collective(),
            back.torque_b.x - w.torque_b.x,
            back.torque_b.y - w.torque_b.y,
            back.torque_b.z - w.torque_b.z,
        ];
        let scale = w.collective().abs().max(w.torque_b.max_abs());
        let err = dw.iter().fold(0.0f64, |m, d| m.max(d.abs())) / scale;
        worst = worst.max(err);
    }
    MixcheckReport { samples, seed, max_rel_error: worst, saturated }
}
