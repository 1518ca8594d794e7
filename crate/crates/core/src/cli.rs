//! Command-line front end.
//!
//! ```text
//! qbattery simulate|scan|peaks [--scenario NAME] [--config FILE] [--out FILE]
//!                              [--jobs N] [--window W] [--fit] [--KEY VALUE]...
//! qbattery verify [fast|full] [--KEY VALUE]...
//! ```
//!
//! Configuration is flat `key=value` text with `#` comments. A scenario
//! preset is applied first, then the config file, then command-line
//! overrides. Frequencies are in units of ω0, durations in gt/π and pulse
//! intervals in `(1000/π)gτ`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use thiserror::Error;

use crate::analysis::{
    fit_charging_curve, match_peaks, predict_peaks, scan_tau, tau_from_scaled, tau_scaled, AnalysisError,
    ScanResult, TauGrid,
};
use crate::engine::{
    floquet_operator, rabi_oracle, run_schedule, run_stroboscopic, EngineError,
    EnergyTimeSeries, Phase, PulseSchedule, RabiRegime, Sampling,
};
use crate::model::{
    build_hmc, build_hmcb, eigenbasis_mc, initial_state, ket1, ket_minus, ket_plus, tilde_state, ModelError,
    ModelParams,
};
use crate::qcore::{herm_eig, C64};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SCENARIOS: [&str; 9] = [
    "fig2a", "fig2b", "fig2c", "fig2d", "fig3", "figS1", "figS2", "figS3", "figS4",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{source_name}:{line}: {msg}")]
    ConfigLine {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error("key '{key}': {msg}")]
    ConfigKey { key: String, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("invalid parameters: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

fn engine_is_input_error(e: &EngineError) -> bool {
    matches!(
        e,
        EngineError::ScheduleEmpty
            | EngineError::InvalidPhase { .. }
            | EngineError::InvalidSampling(_)
            | EngineError::InvalidArgument(_)
            | EngineError::RegimeMismatch { .. }
            | EngineError::Model(_)
    )
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::ConfigLine { .. }
            | CliError::ConfigKey { .. }
            | CliError::Io { .. }
            | CliError::Model(_) => EXIT_CONFIG,
            CliError::Engine(e) if engine_is_input_error(e) => EXIT_CONFIG,
            CliError::Analysis(AnalysisError::InvalidGrid(_) | AnalysisError::InvalidArgument(_)) => EXIT_CONFIG,
            CliError::Analysis(AnalysisError::Engine(e)) if engine_is_input_error(e) => EXIT_CONFIG,
            CliError::Engine(_) | CliError::Analysis(_) => EXIT_NUMERIC,
            CliError::VerifyFailed { .. } => EXIT_VERIFY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Scan,
    Peaks,
    Verify(VerifyLevel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseSpec {
    Free { duration: f64 },
    Pulsed { duration: f64, tau_scaled: f64 },
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub omega0: f64,
    pub g: f64,
    pub gamma: f64,
    pub mu: f64,
    /// `None` selects the resonant value.
    pub omega1: Option<f64>,
    pub schedule: Vec<PhaseSpec>,
    /// Free-phase sample spacing in gt/π.
    pub sample_dt: f64,
    pub pulse_stride: usize,
    pub fit: bool,
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    pub grid_refine: usize,
    pub grid_halfwidth: f64,
    /// Explicit τ list in scaled units; overrides the start/stop/step grid.
    pub grid: Option<Vec<f64>>,
    /// Scan window in gt/π.
    pub window: f64,
    pub n_max: usize,
    pub out: Option<String>,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            omega0: 1.0,
            g: 0.01,
            gamma: 1.0,
            mu: 1.0,
            omega1: None,
            schedule: Vec::new(),
            sample_dt: 0.005,
            pulse_stride: 1,
            fit: false,
            grid_start: 0.5,
            grid_stop: 50.0,
            grid_step: 0.25,
            grid_refine: 5,
            grid_halfwidth: 1.0,
            grid: None,
            window: 150.0,
            n_max: 3,
            out: None,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("expected a number, got '{v}'"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got '{v}'"))
    }
}

fn parse_positive(v: &str) -> Result<f64, String> {
    let x = parse_f64(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {x}"))
    }
}

fn parse_count(v: &str) -> Result<usize, String> {
    let n: usize = v.trim().parse().map_err(|_| format!("expected a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("must be >= 1".into());
    }
    Ok(n)
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

/// `free D; pulsed D S; ...` with D in gt/π and S in (1000/π)gτ.
pub fn parse_schedule(v: &str) -> Result<Vec<PhaseSpec>, String> {
    let mut out = Vec::new();
    for (k, part) in v.split(';').map(str::trim).filter(|s| !s.is_empty()).enumerate() {
        let words: Vec<&str> = part.split_whitespace().collect();
        let phase = match words.as_slice() {
            ["free", d] => PhaseSpec::Free {
                duration: parse_positive(d).map_err(|e| format!("phase {k}: duration {e}"))?,
            },
            ["pulsed", d, s] => PhaseSpec::Pulsed {
                duration: parse_positive(d).map_err(|e| format!("phase {k}: duration {e}"))?,
                tau_scaled: parse_positive(s).map_err(|e| format!("phase {k}: interval {e}"))?,
            },
            _ => return Err(format!("phase {k}: expected 'free D' or 'pulsed D S', got '{part}'")),
        };
        out.push(phase);
    }
    if out.is_empty() {
        return Err("schedule is empty".into());
    }
    Ok(out)
}

fn format_schedule(s: &[PhaseSpec]) -> String {
    s.iter()
        .map(|p| match p {
            PhaseSpec::Free { duration } => format!("free {duration}"),
            PhaseSpec::Pulsed { duration, tau_scaled } => format!("pulsed {duration} {tau_scaled}"),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn preset(name: &str) -> Option<Vec<(&'static str, &'static str)>> {
    const BASE: [(&str, &str); 4] = [("omega0", "1"), ("g", "0.01"), ("gamma", "1"), ("mu", "1")];
    let extra: &'static [(&'static str, &'static str)] = match name {
        "fig2a" => &[("omega1", "1.4142135623730951"), ("schedule", "free 1")],
        "fig2b" => &[("omega1", "resonant"), ("schedule", "pulsed 0.5 1")],
        "fig2c" => &[("omega1", "resonant"), ("schedule", "free 0.5; pulsed 0.5 1; free 0.5")],
        "fig2d" => &[("omega1", "resonant"), ("schedule", "pulsed 3 10")],
        "figS1" => &[("omega1", "resonant"), ("schedule", "pulsed 1 1"), ("fit", "true")],
        "figS2" => &[("omega1", "resonant"), ("schedule", "pulsed 80 84"), ("fit", "true")],
        "fig3" => &[("omega1", "resonant"), ("grid_start", "0.5"), ("grid_stop", "50")],
        "figS3" => &[
            ("gamma", "0.7"),
            ("omega1", "resonant"),
            ("grid_start", "0.5"),
            ("grid_stop", "30"),
        ],
        "figS4" => &[
            ("mu", "2"),
            ("omega1", "resonant"),
            ("grid_start", "0.5"),
            ("grid_stop", "30"),
        ],
        _ => return None,
    };
    let mut all: Vec<(&'static str, &'static str)> = BASE.to_vec();
    all.extend([
        ("grid_step", "0.25"),
        ("grid_refine", "5"),
        ("grid_halfwidth", "1"),
        ("window", "150"),
    ]);
    all.extend_from_slice(extra);
    Some(all)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "omega0" => self.omega0 = parse_positive(v)?,
            "g" => self.g = parse_positive(v)?,
            "gamma" => self.gamma = parse_positive(v)?,
            "mu" => self.mu = parse_positive(v)?,
            "omega1" => {
                self.omega1 = if v == "resonant" { None } else { Some(parse_positive(v)?) };
            }
            "schedule" => self.schedule = parse_schedule(v)?,
            "sample_dt" => self.sample_dt = parse_positive(v)?,
            "pulse_stride" => self.pulse_stride = parse_count(v)?,
            "fit" => self.fit = parse_bool(v)?,
            "grid_start" => self.grid_start = parse_positive(v)?,
            "grid_stop" => self.grid_stop = parse_positive(v)?,
            "grid_step" => self.grid_step = parse_positive(v)?,
            "grid_refine" => self.grid_refine = parse_count(v)?,
            "grid_halfwidth" => {
                let x = parse_f64(v)?;
                if x < 0.0 {
                    return Err(format!("must be >= 0, got {x}"));
                }
                self.grid_halfwidth = x;
            }
            "grid" => {
                self.grid = Some(
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(parse_positive)
                        .collect::<Result<_, _>>()?,
                );
            }
            "window" => self.window = parse_positive(v)?,
            "n_max" => self.n_max = parse_count(v)?,
            "out" => self.out = Some(v.to_string()),
            "jobs" => self.jobs = parse_count(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Builds a config from a preset (if any) followed by ordered overrides.
    pub fn resolve(entries: &[ConfigEntry]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(e) = entries.iter().rev().find(|e| e.key == "scenario") {
            let name = e.value.trim();
            let kvs = preset(name).ok_or_else(|| e.error(format!(
                "unknown scenario '{name}' (known: {})",
                SCENARIOS.join(", ")
            )))?;
            for (k, v) in kvs {
                cfg.set(k, v).expect("preset values are valid");
            }
            cfg.scenario = Some(name.to_string());
        }
        for e in entries.iter().filter(|e| e.key != "scenario") {
            cfg.set(&e.key, &e.value).map_err(|msg| e.error(msg))?;
        }
        Ok(cfg)
    }

    /// The full configuration of a named preset.
    pub fn scenario(name: &str) -> Result<Self, CliError> {
        Self::resolve(&[ConfigEntry {
            key: "scenario".into(),
            value: name.into(),
            source_name: "scenario".into(),
            line: None,
        }])
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(self.omega0, self.g, self.gamma, self.mu, self.omega1)?)
    }

    /// Physics and sampling settings in canonical order, one `# key=value`
    /// line each. Output path and thread count are excluded.
    pub fn header(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# qbattery {VERSION} {command}");
        if let Some(name) = &self.scenario {
            let _ = writeln!(s, "# scenario={name}");
        }
        let omega1 = self.omega1.map_or_else(|| "resonant".to_string(), |w| w.to_string());
        let mut kv: Vec<(&str, String)> = vec![
            ("omega0", self.omega0.to_string()),
            ("g", self.g.to_string()),
            ("gamma", self.gamma.to_string()),
            ("mu", self.mu.to_string()),
            ("omega1", omega1),
        ];
        match command {
            "simulate" => kv.extend([
                ("schedule", format_schedule(&self.schedule)),
                ("sample_dt", self.sample_dt.to_string()),
                ("pulse_stride", self.pulse_stride.to_string()),
                ("fit", self.fit.to_string()),
            ]),
            "scan" => {
                if let Some(grid) = &self.grid {
                    let list: Vec<String> = grid.iter().map(f64::to_string).collect();
                    kv.push(("grid", list.join(",")));
                } else {
                    kv.extend([
                        ("grid_start", self.grid_start.to_string()),
                        ("grid_stop", self.grid_stop.to_string()),
                        ("grid_step", self.grid_step.to_string()),
                        ("grid_refine", self.grid_refine.to_string()),
                        ("grid_halfwidth", self.grid_halfwidth.to_string()),
                    ]);
                }
                kv.push(("window", self.window.to_string()));
            }
            "peaks" => kv.push(("n_max", self.n_max.to_string())),
            _ => {}
        }
        for (k, v) in kv {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }

    pub fn pulse_schedule(&self, p: &ModelParams) -> Result<PulseSchedule, CliError> {
        if self.schedule.is_empty() {
            return Err(CliError::ConfigKey {
                key: "schedule".into(),
                msg: "no schedule given (set schedule= or pick a simulate scenario)".into(),
            });
        }
        let to_time = |d: f64| d * PI / p.g();
        let phases = self
            .schedule
            .iter()
            .map(|s| match *s {
                PhaseSpec::Free { duration } => Phase::free(to_time(duration)),
                PhaseSpec::Pulsed { duration, tau_scaled } => {
                    Phase::pulsed(tau_from_scaled(p.g(), tau_scaled), to_time(duration))
                }
            })
            .collect();
        Ok(PulseSchedule::new(phases)?)
    }

    pub fn sampling(&self, p: &ModelParams) -> Sampling {
        Sampling {
            free_dt: Some(self.sample_dt * PI / p.g()),
            pulse_stride: self.pulse_stride,
        }
    }

    pub fn tau_grid(&self, p: &ModelParams) -> Result<TauGrid, CliError> {
        if let Some(list) = &self.grid {
            return Ok(TauGrid::new(list.iter().map(|&s| tau_from_scaled(p.g(), s)).collect())?);
        }
        if self.grid_stop < self.grid_start {
            return Err(AnalysisError::InvalidGrid(format!(
                "grid_stop {} is below grid_start {}",
                self.grid_stop, self.grid_start
            ))
            .into());
        }
        let tau1 = tau_scaled(p.g(), 2.0 * PI / p.lambda4());
        let n = ((self.grid_stop + self.grid_halfwidth) / tau1).floor() as usize;
        let centers: Vec<f64> = (1..=n).map(|k| k as f64 * tau1).collect();
        Ok(TauGrid::scaled(
            p.g(),
            self.grid_start,
            self.grid_stop,
            self.grid_step,
            self.grid_refine,
            &centers,
            self.grid_halfwidth,
        )?)
    }
}

/// One `key=value` assignment with its origin for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    pub source_name: String,
    pub line: Option<usize>,
}

impl ConfigEntry {
    fn error(&self, msg: String) -> CliError {
        match self.line {
            Some(line) => CliError::ConfigLine {
                source_name: self.source_name.clone(),
                line,
                msg: format!("{}: {msg}", self.key),
            },
            None => CliError::ConfigKey {
                key: self.key.clone(),
                msg,
            },
        }
    }
}

pub fn parse_config_text(text: &str, source_name: &str) -> Result<Vec<ConfigEntry>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::ConfigLine {
                source_name: source_name.to_string(),
                line: i + 1,
                msg: format!("expected key=value, got '{line}'"),
            });
        };
        out.push(ConfigEntry {
            key: k.trim().to_string(),
            value: v.trim().to_string(),
            source_name: source_name.to_string(),
            line: Some(i + 1),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: RunConfig,
}

/// Parses arguments after the program name.
pub fn parse_args(args: &[String]) -> Result<Invocation, CliError> {
    let usage = || {
        CliError::Usage(
            "qbattery <simulate|scan|peaks|verify [fast|full]> [--scenario NAME] [--config FILE] \
             [--out FILE] [--jobs N] [--window W] [--fit] [--KEY VALUE]..."
                .into(),
        )
    };
    let mut it = args.iter().peekable();
    let mut command = match it.next().map(String::as_str) {
        Some("simulate") => Command::Simulate,
        Some("scan") => Command::Scan,
        Some("peaks") => Command::Peaks,
        Some("verify") => Command::Verify(VerifyLevel::Fast),
        _ => return Err(usage()),
    };
    if command == Command::Verify(VerifyLevel::Fast) {
        match it.peek().map(|s| s.as_str()) {
            Some("fast") => {
                it.next();
            }
            Some("full") => {
                it.next();
                command = Command::Verify(VerifyLevel::Full);
            }
            _ => {}
        }
    }

    let mut file_entries = Vec::new();
    let mut cli_entries = Vec::new();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!("unexpected argument '{arg}'")));
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.replace('-', "_"), Some(v.to_string())),
            None => (flag.replace('-', "_"), None),
        };
        if key == "fit" && inline.is_none() {
            cli_entries.push(ConfigEntry {
                key,
                value: "true".into(),
                source_name: "command line".into(),
                line: None,
            });
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("--{flag} needs a value")))?,
        };
        if key == "config" {
            let text = std::fs::read_to_string(&value).map_err(|e| CliError::Io {
                path: value.clone(),
                msg: e.to_string(),
            })?;
            file_entries.extend(parse_config_text(&text, &value)?);
        } else {
            cli_entries.push(ConfigEntry {
                key,
                value,
                source_name: "command line".into(),
                line: None,
            });
        }
    }
    file_entries.extend(cli_entries);
    Ok(Invocation {
        command,
        config: RunConfig::resolve(&file_entries)?,
    })
}

/// Twelve significant digits in scientific notation, `-0` printed as `0`.
pub fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

pub struct SimulateOutput {
    pub csv: String,
    pub summary: String,
}

pub fn render_simulate(cfg: &RunConfig) -> Result<SimulateOutput, CliError> {
    let p = cfg.params()?;
    let schedule = cfg.pulse_schedule(&p)?;
    let run = run_schedule(&p, &schedule, &cfg.sampling(&p))?;
    let s = &run.series;

    let mut csv = cfg.header("simulate");
    csv.push_str("t,gt_over_pi,E_c,E_b,phase_index\n");
    for i in 0..s.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_num(s.times[i]),
            fmt_num(s.gt_over_pi(i)),
            fmt_num(s.ec[i]),
            fmt_num(s.eb[i]),
            s.phase_index[i]
        );
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "samples: {}", s.len());
    for (k, (req, n)) in schedule.requested().iter().zip(schedule.pulse_counts()).enumerate() {
        if *n > 0 {
            let actual = schedule.phases()[k].duration;
            if (actual - req.duration).abs() > 0.0 {
                let _ = writeln!(
                    summary,
                    "phase {k}: {n} pulses, duration rounded from {:.6} to {:.6} (gt/pi)",
                    req.duration * p.g() / PI,
                    actual * p.g() / PI
                );
            } else {
                let _ = writeln!(summary, "phase {k}: {n} pulses");
            }
        }
    }
    let _ = writeln!(summary, "max E_b: {:.6} (capacity 2*omega1 = {:.6})", s.max_eb(), p.battery_capacity());
    if cfg.fit {
        let fit = fit_charging_curve(s, &p)?;
        let _ = writeln!(
            summary,
            "fit: A = {:.6} ({:.4} x 2*omega1), T = {:.6} (gT/pi = {:.6}, {:.4} x pi/(2g)), residual = {:.3e}, resolved = {}",
            fit.a,
            fit.a / p.battery_capacity(),
            fit.t_charge,
            p.g() * fit.t_charge / PI,
            fit.t_charge / (PI / (2.0 * p.g())),
            fit.residual,
            fit.resolved
        );
    }
    Ok(SimulateOutput { csv, summary })
}

pub struct ScanOutput {
    pub csv: String,
    pub summary: String,
    pub scan: ScanResult,
}

pub fn render_scan(cfg: &RunConfig) -> Result<ScanOutput, CliError> {
    let p = cfg.params()?;
    let grid = cfg.tau_grid(&p)?;
    let window = cfg.window * PI / p.g();
    let scan = scan_tau(&p, &grid, window, cfg.jobs)?;
    let g = p.g();

    let mut csv = cfg.header("scan");
    csv.push_str("tau,tau_scaled,A,T,residual,resolved,is_detected_peak,nearest_predicted_peak\n");
    for (i, (tau, fit)) in scan.taus.iter().zip(&scan.fits).enumerate() {
        let nearest = scan.nearest_predicted(*tau).map_or_else(String::new, |t| fmt_num(tau_scaled(g, t)));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt_num(*tau),
            fmt_num(tau_scaled(g, *tau)),
            fmt_num(fit.a),
            fmt_num(fit.t_charge),
            fmt_num(fit.residual),
            u8::from(fit.resolved),
            u8::from(scan.detected_peaks.contains(&i)),
            nearest
        );
    }

    let mut summary = String::new();
    let censored = scan.fits.iter().filter(|f| !f.resolved).count();
    let _ = writeln!(summary, "grid points: {} ({censored} censored)", scan.taus.len());
    let predicted: Vec<String> = scan
        .predicted_peaks
        .iter()
        .map(|&t| format!("{:.4}", tau_scaled(g, t)))
        .collect();
    let _ = writeln!(summary, "predicted peaks (tau_scaled): {}", predicted.join(", "));
    for m in match_peaks(&scan, &scan.detected_peaks) {
        let nearest = m
            .nearest
            .map_or_else(|| "none".to_string(), |(n, t)| format!("n={n} at {:.4}", tau_scaled(g, t)));
        let _ = writeln!(
            summary,
            "detected peak at {:.4} (T = {:.4} x pi/(2g)); nearest prediction {nearest}; {}",
            tau_scaled(g, m.tau),
            scan.fits[m.representative].t_charge / (PI / (2.0 * g)),
            if m.matched { "matched" } else { "unmatched" }
        );
    }
    match &scan.valley {
        Some(v) => {
            let _ = writeln!(
                summary,
                "valley slope T/tau = {:.3} over {} valleys (relative rms {:.3e})",
                v.slope,
                v.indices.len(),
                v.residual
            );
        }
        None => summary.push_str("valley slope: fewer than 3 valleys\n"),
    }
    Ok(ScanOutput { csv, summary, scan })
}

pub fn render_peaks(cfg: &RunConfig) -> Result<String, CliError> {
    let p = cfg.params()?;
    let mut csv = cfg.header("peaks");
    csv.push_str("n,tau,tau_scaled\n");
    for (n, tau) in predict_peaks(&p, cfg.n_max)?.into_iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", n + 1, fmt_num(tau), fmt_num(tau_scaled(p.g(), tau)));
    }
    Ok(csv)
}

fn emit(cfg: &RunConfig, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io_err = |path: &str, e: std::io::Error| CliError::Io {
        path: path.to_string(),
        msg: e.to_string(),
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| io_err("stdout", e)),
    }
}

/// Runs one invocation and returns the process exit status.
pub fn run(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match dispatch(args, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let inv = parse_args(args)?;
    let cfg = &inv.config;
    match inv.command {
        Command::Simulate => {
            let out = render_simulate(cfg)?;
            emit(cfg, &out.csv, stdout)?;
            let _ = stderr.write_all(out.summary.as_bytes());
        }
        Command::Scan => {
            let out = render_scan(cfg)?;
            emit(cfg, &out.csv, stdout)?;
            let _ = stderr.write_all(out.summary.as_bytes());
        }
        Command::Peaks => emit(cfg, &render_peaks(cfg)?, stdout)?,
        Command::Verify(level) => {
            let p = cfg.params()?;
            let report = verify(&p, level, cfg.jobs);
            let _ = stdout.write_all(report.text.as_bytes());
            if report.failed > 0 {
                return Err(CliError::VerifyFailed {
                    failed: report.failed,
                    total: report.total,
                });
            }
        }
    }
    Ok(())
}

pub struct VerifyReport {
    pub text: String,
    pub total: usize,
    pub failed: usize,
}

type CheckFn = fn(&ModelParams, usize) -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn first_max(s: &EnergyTimeSeries) -> Option<(f64, f64)> {
    let max = s.max_eb();
    (1..s.len().saturating_sub(1))
        .find(|&j| s.eb[j] >= 0.9 * max && s.eb[j] > s.eb[j - 1] && s.eb[j] >= s.eb[j + 1])
        .map(|j| (s.times[j], s.eb[j]))
}

fn s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check_spectrum(p: &ModelParams, _: usize) -> Result<String, String> {
    let e = herm_eig(&build_hmc(p)).map_err(s)?;
    let want = [-SQRT_2, -SQRT_2, SQRT_2, SQRT_2];
    let dev = e.values.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(dev < 1e-10, || format!("eigenvalues {:?} deviate by {dev:.2e}", e.values))?;
    Ok(format!("max deviation {dev:.1e}"))
}

fn check_hermitian(p: &ModelParams, _: usize) -> Result<String, String> {
    let dev = build_hmcb(p).hermitian_deviation().max(build_hmc(p).hermitian_deviation());
    ensure(dev <= 1e-12, || format!("hermitian deviation {dev:.2e}"))?;
    Ok(format!("deviation {dev:.1e}"))
}

fn check_eigenbasis(p: &ModelParams, _: usize) -> Result<String, String> {
    let h = build_hmc(p);
    let mut worst: f64 = 0.0;
    for (v, lambda) in eigenbasis_mc(p) {
        let hv = h.mul_slice(v.amplitudes());
        let r = hv
            .iter()
            .zip(v.amplitudes())
            .map(|(a, b)| (a - b * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r);
    }
    ensure(worst < 1e-10, || format!("residual {worst:.2e}"))?;
    Ok(format!("max residual {worst:.1e}"))
}

fn check_floquet_phases(p: &ModelParams, _: usize) -> Result<String, String> {
    let cases = [(1.0, 1.0), (0.7, 1.0), (1.0, 2.0)];
    let mut worst: f64 = 0.0;
    for (gamma, mu) in cases {
        let q = ModelParams::new(p.omega0(), p.g(), gamma, mu, None).map_err(s)?;
        let one_tilde = tilde_state(&ket1(), &q);
        let minus = one_tilde.kron(&ket_minus());
        let plus = one_tilde.kron(&ket_plus());
        for n in 1..=5 {
            let tau = 2.0 * PI * n as f64 / q.lambda4();
            let u = floquet_operator(&q, tau, false).map_err(s)?;
            let phase = C64::from_polar(1.0, -q.lambda3() * tau);
            let d1 = dist(&u.apply(&minus), minus.amplitudes(), C64::new(-1.0, 0.0));
            let d2 = dist(&u.apply(&plus), plus.amplitudes(), -phase);
            worst = worst.max(d1).max(d2);
        }
    }
    ensure(worst < 1e-9, || format!("deviation {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn dist(got: &[C64], v: &[C64], factor: C64) -> f64 {
    got.iter().zip(v).map(|(a, b)| (a - factor * b).norm_sqr()).sum::<f64>().sqrt()
}

fn check_unitarity_and_norm(p: &ModelParams, _: usize) -> Result<String, String> {
    let tau = tau_from_scaled(p.g(), 1.0);
    let u = floquet_operator(p, tau, true).map_err(s)?;
    let dev = u.matrix.unitarity_deviation();
    ensure(dev < 1e-12, || format!("Floquet operator unitarity deviation {dev:.2e}"))?;
    let mut psi = initial_state(p).amplitudes().to_vec();
    let mut buf = vec![C64::new(0.0, 0.0); 8];
    for _ in 0..1_000_000 {
        u.matrix.mul_slice_into(&psi, &mut buf);
        std::mem::swap(&mut psi, &mut buf);
    }
    let norm_dev = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs();
    ensure(norm_dev < 1e-9, || format!("norm drift {norm_dev:.2e} after 1e6 pulses"))?;
    Ok(format!("unitarity {dev:.1e}, norm drift {norm_dev:.1e} after 1e6 pulses"))
}

fn check_energy_conservation(p: &ModelParams, _: usize) -> Result<String, String> {
    let schedule = PulseSchedule::new(vec![Phase::free(3.0 * PI / p.g())]).map_err(s)?;
    let run = run_schedule(p, &schedule, &Sampling::default()).map_err(s)?;
    let h = build_hmcb(p);
    let e0 = crate::qcore::expectation(&initial_state(p), &h).map_err(s)?;
    let e1 = crate::qcore::expectation(&run.final_state, &h).map_err(s)?;
    let drift = (e1 - e0).abs();
    ensure(drift < 1e-10, || format!("energy drift {drift:.2e}"))?;
    Ok(format!("drift {drift:.1e}"))
}

fn check_strobe_vs_stepwise(p: &ModelParams, _: usize) -> Result<String, String> {
    let q = p.with_omega1(p.resonant_omega1()).map_err(s)?;
    let tau = tau_from_scaled(q.g(), 1.0);
    let n = 500;
    let strobe = run_stroboscopic(&q, tau, n, 1).map_err(s)?;
    let sched = PulseSchedule::single_pulsed(tau, n).map_err(s)?;
    let step = run_schedule(&q, &sched, &Sampling::default()).map_err(s)?.series;
    ensure(strobe.len() == step.len(), || format!("{} vs {} samples", strobe.len(), step.len()))?;
    let dev = (0..step.len())
        .map(|i| (strobe.eb[i] - step.eb[i]).abs().max((strobe.ec[i] - step.ec[i]).abs()))
        .fold(0.0, f64::max);
    ensure(dev < 1e-9, || format!("max deviation {dev:.2e}"))?;
    Ok(format!("max deviation {dev:.1e} over {n} pulses"))
}

fn check_fit_idempotence(p: &ModelParams, _: usize) -> Result<String, String> {
    let q = p.with_omega1(p.resonant_omega1()).map_err(s)?;
    let (a, t) = (0.8 * q.battery_capacity(), PI / (2.0 * q.g()));
    let times: Vec<f64> = (0..400).map(|i| i as f64 * 2.5 * t / 399.0).collect();
    let ec: Vec<f64> = times
        .iter()
        .map(|&x| q.lambda3() + 0.5 * a * ((PI * x / t).cos() - 1.0))
        .collect();
    let eb: Vec<f64> = ec.iter().map(|e| q.lambda3() - e).collect();
    let n = times.len();
    let series = EnergyTimeSeries::new(times, ec, eb, vec![0; n], q.g()).map_err(s)?;
    let fit = fit_charging_curve(&series, &q).map_err(s)?;
    let dev = rel_err(fit.a, a).max(rel_err(fit.t_charge, t));
    ensure(dev < 1e-9, || format!("relative deviation {dev:.2e}"))?;
    Ok(format!("relative deviation {dev:.1e}"))
}

fn check_csv_determinism(p: &ModelParams, _: usize) -> Result<String, String> {
    let cfg = RunConfig {
        omega0: p.omega0(),
        g: p.g(),
        gamma: p.gamma(),
        mu: p.mu(),
        schedule: vec![
            PhaseSpec::Free { duration: 0.1 },
            PhaseSpec::Pulsed {
                duration: 0.1,
                tau_scaled: 1.0,
            },
        ],
        grid: Some(vec![1.0, 2.0, 3.0, 4.0, 5.0]),
        window: 2.0,
        ..RunConfig::default()
    };
    let a = render_simulate(&cfg).map_err(s)?.csv;
    let b = render_simulate(&cfg).map_err(s)?.csv;
    ensure(a == b, || "simulate output differs between runs".into())?;
    let one = render_scan(&RunConfig { jobs: 1, ..cfg.clone() }).map_err(s)?.csv;
    let many = render_scan(&RunConfig { jobs: 4, ..cfg }).map_err(s)?.csv;
    ensure(one == many, || "scan output depends on the thread count".into())?;
    Ok(format!("{} + {} bytes identical", a.len(), one.len()))
}

fn check_oracles(p: &ModelParams, _: usize) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for regime in [RabiRegime::BareResonant, RabiRegime::PulsedDenseResonant] {
        let q = p.with_omega1(regime.required_omega1(p)).map_err(s)?;
        let span = PI / regime.effective_coupling(&q);
        let schedule = match regime {
            RabiRegime::BareResonant => PulseSchedule::new(vec![Phase::free(span)]),
            RabiRegime::PulsedDenseResonant => PulseSchedule::new(vec![Phase::pulsed(tau_from_scaled(q.g(), 1.0), span)]),
        }
        .map_err(s)?;
        let series = run_schedule(&q, &schedule, &Sampling::default()).map_err(s)?.series;
        for i in 0..series.len() {
            let (_, eb) = rabi_oracle(&q, regime, series.times[i]).map_err(s)?;
            worst = worst.max((series.eb[i] - eb).abs() / q.battery_capacity());
        }
    }
    ensure(worst < 0.03, || format!("oracle deviation {worst:.3} of capacity"))?;
    Ok(format!("max deviation {:.2}% of capacity", 100.0 * worst))
}

fn check_fig2a(p: &ModelParams, _: usize) -> Result<String, String> {
    let q = p.with_omega1(RabiRegime::BareResonant.required_omega1(p)).map_err(s)?;
    let schedule = PulseSchedule::new(vec![Phase::free(PI / q.g())]).map_err(s)?;
    let free = run_schedule(&q, &schedule, &Sampling::default()).map_err(s)?.series;
    let (t, e) = first_max(&free).ok_or("no maximum")?;
    ensure(rel_err(e, 2.0 * SQRT_2) < 0.02, || format!("first maximum {e:.4}"))?;
    let t_want = PI / (SQRT_2 * q.g());
    ensure(rel_err(t, t_want) < 0.02, || format!("first maximum at gt/pi {:.4}", q.g() * t / PI))?;

    let n = (t_want / tau_from_scaled(q.g(), 1.0)).floor() as usize;
    let pulsed = run_stroboscopic(&q, tau_from_scaled(q.g(), 1.0), n, 1).map_err(s)?;
    let frac = pulsed.max_eb() / (2.0 * SQRT_2);
    ensure(frac < 0.05, || format!("pulsed max E_b {frac:.3} of capacity"))?;
    Ok(format!("E_b max {e:.4} at gt/pi {:.4}; pulsed max {:.1e} of capacity", q.g() * t / PI, frac))
}

fn check_fig2b(p: &ModelParams, _: usize) -> Result<String, String> {
    let q = p.with_omega1(p.resonant_omega1()).map_err(s)?;
    let tau = tau_from_scaled(q.g(), 1.0);
    let series = run_stroboscopic(&q, tau, 1000, 1).map_err(s)?;
    let fit = fit_charging_curve(&series, &q).map_err(s)?;
    let (t, e) = first_max(&series).ok_or("no maximum")?;
    ensure(rel_err(e, SQRT_2) < 0.02, || format!("first maximum {e:.4}"))?;
    ensure(rel_err(t, PI / (2.0 * q.g())) < 0.02, || format!("first maximum at {t:.4}"))?;
    ensure(fit.residual < 0.02, || format!("fit residual {:.3e}", fit.residual))?;
    let free = PulseSchedule::new(vec![Phase::free(PI / q.g())]).map_err(s)?;
    let bare = run_schedule(&q, &free, &Sampling::default()).map_err(s)?.series;
    let frac = bare.max_eb() / SQRT_2;
    ensure(frac < 0.05, || format!("unpulsed max E_b {frac:.3} of capacity"))?;
    Ok(format!(
        "A = {:.4}, T = {:.4} x pi/(2g), residual {:.1e}; unpulsed max {frac:.1e}",
        fit.a,
        fit.t_charge * 2.0 * q.g() / PI,
        fit.residual
    ))
}

fn check_fig2c(p: &ModelParams, _: usize) -> Result<String, String> {
    let cfg = RunConfig::scenario("fig2c").map_err(s)?;
    let q = ModelParams::new(p.omega0(), p.g(), p.gamma(), p.mu(), None).map_err(s)?;
    let schedule = cfg.pulse_schedule(&q).map_err(s)?;
    let series = run_schedule(&q, &schedule, &cfg.sampling(&q)).map_err(s)?.series;
    let mut drifts = Vec::new();
    for k in [0, 2] {
        let r = series.phase_range(k);
        let lo = series.eb[r.clone()].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = series.eb[r].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        drifts.push((hi - lo) / SQRT_2);
    }
    let charged = series.eb[series.phase_range(1).end - 1];
    ensure(drifts.iter().all(|d| *d < 0.01), || format!("storing drifts {drifts:?}"))?;
    ensure(rel_err(charged, SQRT_2) < 0.02, || format!("charged to {charged:.4}"))?;
    Ok(format!("drifts {:.1e}, {:.1e}; charged to {charged:.4}", drifts[0], drifts[1]))
}

fn check_fig2d(p: &ModelParams, _: usize) -> Result<String, String> {
    let q = p.with_omega1(p.resonant_omega1()).map_err(s)?;
    let tau = tau_from_scaled(q.g(), 10.0);
    let series = run_stroboscopic(&q, tau, 300, 1).map_err(s)?;
    let (t, e) = first_max(&series).ok_or("no maximum")?;
    let gt = q.g() * t / PI;
    ensure(rel_err(gt, SQRT_2) < 0.03, || format!("first full charge at gt/pi {gt:.4}"))?;
    ensure(rel_err(e, SQRT_2) < 0.03, || format!("capacity {e:.4}"))?;
    Ok(format!("full charge {e:.4} at gt/pi {gt:.4}"))
}

fn check_figs2(p: &ModelParams, _: usize) -> Result<String, String> {
    let q = p.with_omega1(p.resonant_omega1()).map_err(s)?;
    let tau = tau_from_scaled(q.g(), 84.0);
    let n = (80.0 * PI / q.g() / tau).floor() as usize;
    let series = run_stroboscopic(&q, tau, n, 1).map_err(s)?;
    let fit = fit_charging_curve(&series, &q).map_err(s)?;
    let t_units = fit.t_charge * 2.0 * q.g() / PI;
    let a_units = fit.a / SQRT_2;
    ensure(rel_err(t_units, 76.6) < 0.05, || format!("T = {t_units:.3} x pi/(2g)"))?;
    ensure(rel_err(a_units, 0.59) < 0.05, || format!("A = {a_units:.4} x sqrt2"))?;
    Ok(format!("T = {t_units:.3} x pi/(2g), A = {a_units:.4} x sqrt2"))
}

fn scan_preset(name: &str, p: &ModelParams, jobs: usize) -> Result<ScanResult, String> {
    let mut cfg = RunConfig::scenario(name).map_err(s)?;
    cfg.omega0 = p.omega0();
    cfg.g = p.g();
    if name == "fig3" {
        cfg.gamma = p.gamma();
        cfg.mu = p.mu();
    }
    cfg.jobs = jobs;
    Ok(render_scan(&cfg).map_err(s)?.scan)
}

/// Scaled positions of the first detected peak runs, each with its match flag.
fn matched_positions(scan: &ScanResult) -> Vec<(f64, f64, Option<usize>, bool)> {
    let g = scan.params.g();
    match_peaks(scan, &scan.detected_peaks)
        .into_iter()
        .map(|m| (tau_scaled(g, m.tau), tau_scaled(g, m.local_step), m.nearest.map(|x| x.0), m.matched))
        .collect()
}

fn check_fig3(p: &ModelParams, jobs: usize) -> Result<String, String> {
    let scan = scan_preset("fig3", p, jobs)?;
    let peaks = matched_positions(&scan);
    for n in 1..=3 {
        let want = 10.0 * SQRT_2 * n as f64;
        ensure(
            peaks.iter().any(|&(at, step, _, _)| (at - want).abs() <= step * (1.0 + 1e-9)),
            || format!("no detection within one grid step of {want:.3}; detections {peaks:?}"),
        )?;
    }
    let slope = scan.valley_slope().ok_or("fewer than 3 valleys")?;
    ensure(rel_err(slope, 110.0) < 0.15, || format!("valley slope {slope:.2}"))?;
    let pos: Vec<String> = peaks.iter().map(|x| format!("{:.2}", x.0)).collect();
    Ok(format!("peaks at {}; valley slope {slope:.2}", pos.join(", ")))
}

fn check_first_peak(name: &str, want: f64, p: &ModelParams, jobs: usize) -> Result<String, String> {
    let scan = scan_preset(name, p, jobs)?;
    let peaks = matched_positions(&scan);
    let &(at, step, _, _) = peaks.first().ok_or("no detections")?;
    ensure((at - want).abs() <= step * (1.0 + 1e-9), || {
        format!("first detection at {at:.3}, expected {want} within {step:.3}")
    })?;
    Ok(format!("first peak at {at:.3}"))
}

fn check_figs3(p: &ModelParams, jobs: usize) -> Result<String, String> {
    check_first_peak("figS3", 12.21, p, jobs)
}

fn check_figs4(p: &ModelParams, jobs: usize) -> Result<String, String> {
    check_first_peak("figS4", 7.07, p, jobs)
}

/// Runs the invariant suite; `Full` adds the figure reproductions.
pub fn verify(p: &ModelParams, level: VerifyLevel, jobs: usize) -> VerifyReport {
    let mut checks: Vec<(&str, CheckFn)> = vec![
        ("spectrum", check_spectrum),
        ("hermiticity", check_hermitian),
        ("eigenbasis residual", check_eigenbasis),
        ("floquet eigenphases", check_floquet_phases),
        ("unitarity and norm", check_unitarity_and_norm),
        ("free-phase energy conservation", check_energy_conservation),
        ("stroboscopic vs stepwise", check_strobe_vs_stepwise),
        ("fit idempotence", check_fit_idempotence),
        ("csv determinism", check_csv_determinism),
        ("rabi oracles", check_oracles),
    ];
    if level == VerifyLevel::Full {
        checks.extend::<[(&str, CheckFn); 8]>([
            ("fig2a bare charging and suppression", check_fig2a),
            ("fig2b pulsed charging", check_fig2b),
            ("fig2c cycle", check_fig2c),
            ("fig2d slow pulsing", check_fig2d),
            ("figS2 fit", check_figs2),
            ("fig3 peaks and valleys", check_fig3),
            ("figS3 first peak", check_figs3),
            ("figS4 first peak", check_figs4),
        ]);
    }
    let mut text = String::new();
    let mut failed = 0;
    for (name, f) in &checks {
        let start = Instant::now();
        let result = f(p, jobs);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        match result {
            Ok(detail) => {
                let _ = writeln!(text, "PASS  {name:<38} {ms:>10.1} ms  {detail}");
            }
            Err(detail) => {
                failed += 1;
                let _ = writeln!(text, "FAIL  {name:<38} {ms:>10.1} ms  {detail}");
            }
        }
    }
    let _ = writeln!(text, "{} of {} checks passed", checks.len() - failed, checks.len());
    VerifyReport {
        text,
        total: checks.len(),
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn presets_resolve() {
        for name in SCENARIOS {
            let inv = parse_args(&args(&format!("simulate --scenario {name}"))).unwrap();
            assert_eq!(inv.config.scenario.as_deref(), Some(name));
            inv.config.params().unwrap();
        }
    }

    #[test]
    fn overrides_apply_after_preset() {
        let inv = parse_args(&args("scan --gamma 0.5 --scenario figS3 --jobs 2 --window 20")).unwrap();
        assert_eq!(inv.config.gamma, 0.5);
        assert_eq!(inv.config.jobs, 2);
        assert_eq!(inv.config.window, 20.0);
        let inv = parse_args(&args("simulate --fit --scenario fig2b")).unwrap();
        assert!(inv.config.fit);
        assert_eq!(
            parse_args(&args("verify full")).unwrap().command,
            Command::Verify(VerifyLevel::Full)
        );
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        for bad in [
            "simulate --bogus 1",
            "simulate --scenario fig9",
            "simulate --g -1",
            "simulate --schedule free",
            "simulate --schedule",
            "frobnicate",
            "scan stray",
        ] {
            let e = parse_args(&args(bad)).unwrap_err();
            assert_eq!(e.exit_code(), EXIT_CONFIG, "{bad}: {e}");
        }
    }

    #[test]
    fn config_text_reports_lines() {
        let entries = parse_config_text("# comment\ng = 0.02\n\nmu=2 # trailing\n", "x.cfg").unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].line, Some(4));
        let cfg = RunConfig::resolve(&entries).unwrap();
        assert_eq!((cfg.g, cfg.mu), (0.02, 2.0));

        let e = parse_config_text("g=1\nnot a pair\n", "x.cfg").unwrap_err();
        assert_eq!(e.to_string(), "x.cfg:2: expected key=value, got 'not a pair'");
        let entries = parse_config_text("g=1\nwidth=3\n", "x.cfg").unwrap();
        let e = RunConfig::resolve(&entries).unwrap_err();
        assert_eq!(e.to_string(), "x.cfg:2: width: unknown key");
    }

    #[test]
    fn schedule_syntax() {
        let s = parse_schedule("free 0.5; pulsed 0.5 1 ;free 0.25").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[1], PhaseSpec::Pulsed { duration: 0.5, tau_scaled: 1.0 });
        assert_eq!(format_schedule(&s), "free 0.5; pulsed 0.5 1; free 0.25");
        assert!(parse_schedule("free 0").is_err());
        assert!(parse_schedule(" ; ").is_err());
        assert!(parse_schedule("pulsed 1").is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(SQRT_2), "1.41421356237e0");
        assert_eq!(fmt_num(-0.0), "0.00000000000e0");
        assert_eq!(fmt_num(-1.5e-7), "-1.50000000000e-7");
    }

    #[test]
    fn peaks_table() {
        let cfg = parse_args(&args("peaks")).unwrap().config;
        let csv = render_peaks(&cfg).unwrap();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "n,tau,tau_scaled");
        assert_eq!(rows.len(), 4);
        assert!(rows[1].ends_with(",1.41421356237e1"));
        assert!(rows[3].ends_with(",4.24264068712e1"));
        let one = parse_args(&args("peaks --n_max 1 --gamma 0.7")).unwrap().config;
        let csv = render_peaks(&one).unwrap();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].ends_with(",1.22065556157e1"), "{}", rows[1]);
    }

    #[test]
    fn header_echoes_config() {
        let cfg = parse_args(&args("simulate --scenario fig2c")).unwrap().config;
        let h = cfg.header("simulate");
        assert!(h.lines().all(|l| l.starts_with("# ")));
        assert!(h.contains("# scenario=fig2c\n"));
        assert!(h.contains("# schedule=free 0.5; pulsed 0.5 1; free 0.5\n"));
        assert!(h.contains("# omega1=resonant\n"));
    }

    #[test]
    fn verify_fast_passes_and_detects_mutation() {
        let p = ModelParams::baseline(0.01).unwrap();
        let report = verify(&p, VerifyLevel::Fast, 2);
        assert_eq!(report.failed, 0, "{}", report.text);
        let bad = ModelParams::new(1.0, 0.01, 1.0, 1.01, None).unwrap();
        let report = verify(&bad, VerifyLevel::Fast, 2);
        assert!(report.failed >= 1, "{}", report.text);
    }

    #[test]
    fn exit_code_classes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(&args("simulate --schedule free 0"), &mut out, &mut err), EXIT_CONFIG);
        assert!(out.is_empty());
        assert_eq!(run(&args("scan --grid ,"), &mut out, &mut err), EXIT_CONFIG);
        assert_eq!(run(&args("scan --grid_start 5 --grid_stop 1"), &mut out, &mut err), EXIT_CONFIG);
        assert_eq!(run(&args("peaks --n_max 2"), &mut out, &mut err), EXIT_OK);
        assert!(!out.is_empty());
    }
}
