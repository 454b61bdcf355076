//! Power, energy and noise figures.

use serde::Serialize;
use thiserror::Error;

use crate::config::PowerModel;
use crate::log::{Mode, SimLog};
use crate::scalar::Real;

/// Sound level meter range (dB).
pub const DB_RANGE: (f64, f64) = (30.0, 130.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{name} = {value} dB is outside the instrument range [30, 130]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("no data: the log is empty")]
    NoData,
}

/// Rounds to two decimals for presentation.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Percentage of aerial power saved by driving.
pub fn power_efficiency<T: Real>(p_a: T, p_g: T) -> Result<T, MetricsError> {
    if !(p_a > T::zero()) || !p_a.is_finite() {
        return Err(MetricsError::InvalidInput(format!("aerial power must be positive, got {p_a}")));
    }
    if !(p_g >= T::zero()) || !p_g.is_finite() {
        return Err(MetricsError::InvalidInput(format!("ground power must be non-negative, got {p_g}")));
    }
    Ok((T::one() - p_g / p_a) * T::lit(100.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseReport {
    pub avg_ambient_db: f64,
    pub avg_ground_db: f64,
    pub avg_aerial_db: f64,
    pub ground_vs_aerial_reduction_pct: f64,
    pub ground_vs_ambient_increase_pct: f64,
}

/// Percent changes on the dB values themselves.
pub fn noise_percentages(ambient: f64, ground: f64, aerial: f64) -> Result<NoiseReport, MetricsError> {
    for (name, value) in [("ambient", ambient), ("ground", ground), ("aerial", aerial)] {
        if !(DB_RANGE.0..=DB_RANGE.1).contains(&value) {
            return Err(MetricsError::OutOfRange { name, value });
        }
    }
    Ok(NoiseReport {
        avg_ambient_db: ambient,
        avg_ground_db: ground,
        avg_aerial_db: aerial,
        ground_vs_aerial_reduction_pct: (aerial - ground) / aerial * 100.0,
        ground_vs_ambient_increase_pct: (ground - ambient) / ambient * 100.0,
    })
}

impl<T: Real> PowerModel<T> {
    /// Electrical power drawn in `mode`. With effort scaling on, aerial power
    /// follows `(ΣF / weight)^1.5`.
    pub fn instantaneous(&self, mode: Mode, thrust_sum: T, weight: T) -> T {
        match mode {
            Mode::Ground => self.ground_power_w,
            Mode::Aerial if self.effort_scaled => {
                let ratio = (thrust_sum / weight).max(T::zero());
                self.aerial_power_w * ratio * ratio.sqrt()
            }
            Mode::Aerial => self.aerial_power_w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    /// Mean logged power over aerial samples (W).
    pub p_aerial: Option<f64>,
    /// Mean logged power over ground samples (W).
    pub p_ground: Option<f64>,
    /// Efficiency between the two mode averages, when both modes occur.
    pub efficiency_pct: Option<f64>,
    pub energy_wh: f64,
    pub aerial_energy_wh: f64,
    pub ground_energy_wh: f64,
    pub duration_s: f64,
}

/// Trapezoidal energy of the logged power column.
///
/// Each interval is attributed to the mode of its left sample. Power comes
/// from the `power_w` column, which the simulator fills from the power model,
/// so a log read back from CSV integrates the same way.
pub fn integrate_energy(log: &SimLog) -> Result<EnergyReport, MetricsError> {
    let rows = &log.rows;
    if rows.is_empty() {
        return Err(MetricsError::NoData);
    }
    let (mut e_a, mut e_g) = (0.0, 0.0);
    for w in rows.windows(2) {
        let e = 0.5 * (w[0].power_w + w[1].power_w) * (w[1].t - w[0].t);
        match w[0].mode() {
            Mode::Aerial => e_a += e,
            Mode::Ground => e_g += e,
        }
    }
    let mean = |m: Mode| {
        let (n, s) = rows.iter().filter(|r| r.mode() == m).fold((0usize, 0.0), |(n, s), r| (n + 1, s + r.power_w));
        (n > 0).then(|| s / n as f64)
    };
    let (p_a, p_g) = (mean(Mode::Aerial), mean(Mode::Ground));
    let efficiency_pct = match (p_a, p_g) {
        (Some(a), Some(g)) => power_efficiency(a, g).ok(),
        _ => None,
    };
    Ok(EnergyReport {
        p_aerial: p_a,
        p_ground: p_g,
        efficiency_pct,
        energy_wh: (e_a + e_g) / 3600.0,
        aerial_energy_wh: e_a / 3600.0,
        ground_energy_wh: e_g / 3600.0,
        duration_s: rows[rows.len() - 1].t - rows[0].t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::LogRow;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn constant_log(mode: Mode, p: f64, seconds: usize, dt: f64) -> SimLog {
        let n = (seconds as f64 / dt).round() as usize;
        SimLog {
            rows: (0..=n).map(|k| LogRow { t: k as f64 * dt, mode: Some(mode), power_w: p, ..Default::default() }).collect(),
            terminal: None,
        }
    }

    #[test]
    fn efficiency_headline() {
        let e = power_efficiency(691.4, 4.5).unwrap();
        assert_eq!(round2(e), 99.35);
        assert_eq!(format!("{e:.2}"), "99.35");
        assert_eq!(power_efficiency(300.0, 300.0).unwrap(), 0.0);
        assert_eq!(power_efficiency(300.0, 0.0).unwrap(), 100.0);
        assert!(power_efficiency(0.0, 1.0).is_err());
        assert!(power_efficiency(-5.0, 1.0).is_err());
        assert!(power_efficiency(5.0, -1.0).is_err());
    }

    #[test]
    fn noise_headline() {
        let r = noise_percentages(44.89, 52.42, 88.14).unwrap();
        assert_eq!(round2(r.ground_vs_aerial_reduction_pct), 40.53);
        assert_eq!(round2(r.ground_vs_ambient_increase_pct), 16.77);
        // exact rational values before rounding
        assert_eq!(r.ground_vs_aerial_reduction_pct, (88.14 - 52.42) / 88.14 * 100.0);
        assert_eq!(noise_percentages(40.0, 60.0, 60.0).unwrap().ground_vs_aerial_reduction_pct, 0.0);
        assert_eq!(noise_percentages(40.0, 40.0, 60.0).unwrap().ground_vs_ambient_increase_pct, 0.0);
        assert!(matches!(noise_percentages(20.0, 40.0, 60.0), Err(MetricsError::OutOfRange { name: "ambient", .. })));
        assert!(noise_percentages(40.0, 40.0, 131.0).is_err());
    }

    #[test]
    fn constant_power_energy() {
        let g = integrate_energy(&constant_log(Mode::Ground, 4.5, 60, 0.01)).unwrap();
        assert_abs_diff_eq!(g.energy_wh, 0.075, epsilon = 1e-12);
        assert_eq!(g.p_aerial, None);
        let a = integrate_energy(&constant_log(Mode::Aerial, 691.4, 60, 0.01)).unwrap();
        assert_abs_diff_eq!(a.energy_wh, 691.4 / 60.0, epsilon = 1e-9);
        assert_eq!(format!("{:.4}", a.energy_wh), "11.5233");
    }

    #[test]
    fn piecewise_hand_sum() {
        // samples at 0, 1, 2, 3 s: aerial 100, aerial 100, ground 10, ground 10
        let modes = [Mode::Aerial, Mode::Aerial, Mode::Ground, Mode::Ground];
        let power = [100.0, 100.0, 10.0, 10.0];
        let log = SimLog {
            rows: (0..4)
                .map(|k| LogRow { t: k as f64, mode: Some(modes[k]), power_w: power[k], ..Default::default() })
                .collect(),
            terminal: None,
        };
        let r = integrate_energy(&log).unwrap();
        // intervals: 100, (100 + 10)/2 = 55, 10  → 165 J
        assert_abs_diff_eq!(r.energy_wh * 3600.0, 165.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.aerial_energy_wh * 3600.0, 155.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.ground_energy_wh * 3600.0, 10.0, epsilon = 1e-12);
        assert_eq!(r.efficiency_pct, Some(90.0));
    }

    #[test]
    fn empty_log_is_no_data() {
        assert_eq!(integrate_energy(&SimLog::default()), Err(MetricsError::NoData));
    }

    #[test]
    fn effort_scaling() {
        let pm = PowerModel { effort_scaled: true, ..PowerModel::default() };
        assert_abs_diff_eq!(pm.instantaneous(Mode::Aerial, 14.715, 14.715), 691.4, epsilon = 1e-12);
        assert_abs_diff_eq!(pm.instantaneous(Mode::Aerial, 4.0, 1.0), 691.4 * 8.0, epsilon = 1e-9);
        assert_eq!(pm.instantaneous(Mode::Ground, 4.0, 1.0), 4.5);
        assert_eq!(PowerModel::default().instantaneous(Mode::Aerial, 1.0, 14.0), 691.4);
    }

    proptest! {
        #[test]
        fn efficiency_scale_invariant(pa in 1.0..1e4f64, frac in 0.0..1.0f64, k in 1e-3..1e3f64) {
            let pg = pa * frac;
            let a = power_efficiency(pa, pg).unwrap();
            let b = power_efficiency(k * pa, k * pg).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn energy_additive(p1 in prop::collection::vec(0.0..800.0f64, 2..40), p2 in prop::collection::vec(0.0..800.0f64, 1..40)) {
            let dt = 0.01;
            let mk = |ps: &[f64], t0: usize, mode: Mode| SimLog {
                rows: ps.iter().enumerate().map(|(k, &p)| LogRow {
                    t: (t0 + k) as f64 * dt, mode: Some(mode), power_w: p, ..Default::default()
                }).collect(),
                terminal: None,
            };
            let a = mk(&p1, 0, Mode::Aerial);
            let mut tail = vec![*p1.last().unwrap()];
            tail.extend(&p2);
            let b = mk(&tail, p1.len() - 1, Mode::Ground);
            let whole = integrate_energy(&a.concat(&b).unwrap()).unwrap();
            let ea = integrate_energy(&a).unwrap();
            let eb = integrate_energy(&b).unwrap();
            prop_assert!((whole.energy_wh - (ea.energy_wh + eb.energy_wh)).abs() <= 1e-12 * (1.0 + whole.energy_wh));
        }
    }
}
