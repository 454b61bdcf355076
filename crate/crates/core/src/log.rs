//! Uniformly sampled simulation log and its CSV form.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Aerial,
    Ground,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Aerial => "aerial",
            Mode::Ground => "ground",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aerial" => Ok(Mode::Aerial),
            "ground" => Ok(Mode::Ground),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

pub const COLUMNS: [&str; 27] = [
    "t", "mode", "x", "y", "z", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz", "delta", "v_fwd", "gamma",
    "gamma_dot", "theta1", "theta2", "f1", "f2", "w_whl1", "w_whl2", "power_w", "event",
];

/// Number of numeric columns between `mode` and `event`.
const NUMERIC: usize = 24;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogRow {
    pub t: f64,
    pub mode: Option<Mode>,
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub q: [f64; 4],
    pub omega_b: [f64; 3],
    pub delta: f64,
    pub v_fwd: f64,
    pub gamma: f64,
    pub gamma_dot: f64,
    pub theta: [f64; 2],
    pub thrust: [f64; 2],
    /// Wheel speeds relative to the body, wheel side (rad/s).
    pub wheel: [f64; 2],
    pub power_w: f64,
    pub events: Vec<String>,
}

impl LogRow {
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Aerial)
    }

    fn numeric(&self) -> [f64; NUMERIC] {
        let [x, y, z] = self.pos;
        let [vx, vy, vz] = self.vel;
        let [qw, qx, qy, qz] = self.q;
        let [wx, wy, wz] = self.omega_b;
        [
            x, y, z, vx, vy, vz, qw, qx, qy, qz, wx, wy, wz, self.delta, self.v_fwd, self.gamma, self.gamma_dot,
            self.theta[0], self.theta[1], self.thrust[0], self.thrust[1], self.wheel[0], self.wheel[1], self.power_w,
        ]
    }

    fn from_numeric(t: f64, mode: Mode, v: &[f64; NUMERIC], events: Vec<String>) -> Self {
        Self {
            t,
            mode: Some(mode),
            pos: [v[0], v[1], v[2]],
            vel: [v[3], v[4], v[5]],
            q: [v[6], v[7], v[8], v[9]],
            omega_b: [v[10], v[11], v[12]],
            delta: v[13],
            v_fwd: v[14],
            gamma: v[15],
            gamma_dot: v[16],
            theta: [v[17], v[18]],
            thrust: [v[19], v[20]],
            wheel: [v[21], v[22]],
            power_w: v[23],
            events,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.numeric().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<LogRow>,
    /// Set when the run ended early; names the failure.
    pub terminal: Option<String>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log has no rows")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad log format at line {line}: {message}")]
    Format { line: usize, message: String },
}

/// `%.9g`: nine significant digits, trailing zeros removed, exponent form
/// outside `[1e-5, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl SimLog {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn to_csv_string(&self) -> Result<String, LogError> {
        if self.rows.is_empty() {
            return Err(LogError::Empty);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for r in &self.rows {
            let mut rec = Vec::with_capacity(COLUMNS.len());
            rec.push(format_sig9(r.t));
            rec.push(r.mode().to_string());
            rec.extend(r.numeric().iter().map(|v| format_sig9(*v)));
            rec.push(r.events.join("|"));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| LogError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv_str(text: &str) -> Result<Self, LogError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rd.headers()?.clone();
        if header.iter().ne(COLUMNS.iter().copied()) {
            return Err(LogError::Format { line: 1, message: "unexpected header".into() });
        }
        let mut log = SimLog::default();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |message: String| LogError::Format { line, message };
            let num = |j: usize| -> Result<f64, LogError> {
                rec[j].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", COLUMNS[j])))
            };
            let t = num(0)?;
            let mode: Mode = rec[1].parse().map_err(bad)?;
            let mut v = [0.0; NUMERIC];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = num(k + 2)?;
            }
            let ev = &rec[COLUMNS.len() - 1];
            let events = if ev.is_empty() { Vec::new() } else { ev.split('|').map(String::from).collect() };
            log.rows.push(LogRow::from_numeric(t, mode, &v, events));
        }
        log.terminal = log.rows.last().and_then(|r| r.events.iter().find(|e| is_terminal_event(e)).cloned());
        Ok(log)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    /// Appends `other`, which must start on this log's last sample. The shared
    /// sample is kept once.
    pub fn concat(&self, other: &SimLog) -> Option<SimLog> {
        let (last, first) = (self.rows.last()?, other.rows.first()?);
        if last.t != first.t {
            return None;
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().skip(1).cloned());
        Some(SimLog { rows, terminal: other.terminal.clone() })
    }
}

/// Events that end a run.
pub const TERMINAL_EVENTS: [&str; 4] = ["diverged", "fallen", "nonfinite_command", "transition_refused"];

pub fn is_terminal_event(e: &str) -> bool {
    TERMINAL_EVENTS.contains(&e)
}

/// Writes the log as CSV. An empty log is rejected before any file is made.
pub fn export_csv(log: &SimLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    let text = log.to_csv_string()?;
    std::fs::write(path, text)?;
    Ok(())
}
