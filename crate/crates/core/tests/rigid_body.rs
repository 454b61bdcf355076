use wheelrotor_core::aerial_plant::{step_rk4_wrench, BodyWrench, RigidBodyState};
use wheelrotor_core::config::VehicleParams;
use wheelrotor_core::math::{Mat3, Quaternion, Vec3};

fn free_params() -> VehicleParams<f64> {
    VehicleParams { gravity: 0.0, inertia: Mat3::diag(0.01, 0.02, 0.03), ..VehicleParams::default() }
}

fn no_wrench() -> BodyWrench<f64> {
    BodyWrench { force_b: Vec3::zeros(), torque_b: Vec3::zeros() }
}

fn tumbling() -> RigidBodyState<f64> {
    RigidBodyState {
        q: Quaternion::new(0.9, 0.1, -0.3, 0.2).normalized(),
        omega_b: Vec3::new(1.0, 2.0, -0.5),
        ..RigidBodyState::default()
    }
}

fn propagate(dt: f64, t_end: f64) -> RigidBodyState<f64> {
    let p = free_params();
    let n = (t_end / dt).round() as usize;
    let mut s = tumbling();
    for _ in 0..n {
        s = step_rk4_wrench(&s, &no_wrench(), dt, &p).unwrap();
    }
    s
}

#[test]
fn torque_free_tumble_conserves_energy_and_momentum() {
    let p = free_params();
    let mut s = tumbling();
    let e0 = s.rotational_energy(&p);
    let h0 = s.angular_momentum_inertial(&p);
    let (mut de, mut dh): (f64, f64) = (0.0, 0.0);
    for _ in 0..10_000 {
        s = step_rk4_wrench(&s, &no_wrench(), 1e-3, &p).unwrap();
        de = de.max(((s.rotational_energy(&p) - e0) / e0).abs());
        dh = dh.max((s.angular_momentum_inertial(&p) - h0).norm() / h0.norm());
        assert!((s.q.norm() - 1.0).abs() <= 1e-9);
    }
    assert!(de < 1e-6, "energy drift {de}");
    assert!(dh < 1e-6, "momentum drift {dh}");
}

#[test]
fn fourth_order_convergence() {
    // Successive differences under step halving shrink by 2^4.
    let a = propagate(0.02, 1.0);
    let b = propagate(0.01, 1.0);
    let c = propagate(0.005, 1.0);
    let diff = |x: &RigidBodyState<f64>, y: &RigidBodyState<f64>| {
        x.to_array().iter().zip(y.to_array().iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
    };
    let ratio = diff(&a, &b) / diff(&b, &c);
    assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
}
