//! Scenario configuration: a sectioned key-value text format in which every
//! dimensioned number carries an explicit unit suffix.
//!
//! Sections are `[carrier]`, `[cavity]`, `[pump]`, `[qcf]`, `[homodyne]`,
//! `[loops]`, and `[budget]`. Unknown sections and keys are rejected, as are
//! bare numbers for dimensioned quantities. Dimensionless values are written
//! bare (ratios may also use `%`). Serialization uses base SI units and
//! round-trips losslessly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

/// Parse or validation failure, with the line it came from when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config error (line {n}): {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierSection {
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Log,
    AudioBandWindows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavitySection {
    pub fwhm_hz: f64,
    pub fsr_hz: f64,
    pub escape_efficiency: f64,
    pub grid_lo_hz: f64,
    pub grid_hi_hz: f64,
    pub grid_points: usize,
    pub grid: GridKind,
}

/// Pump strength named by convention: the classical cavity gain or the
/// below-threshold pump ratio, never both.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSection {
    pub classical_gain: Option<f64>,
    pub pump_ratio: Option<f64>,
    pub pump_power_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcfSection {
    pub offset_hz: f64,
    pub power_w: f64,
    pub amplitude: f64,
    /// Single-pass gain convention, used by the error-signal algebra.
    pub single_pass_gain: f64,
    pub phi_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneSection {
    pub lo_power_w: f64,
    pub lo_amplitude: f64,
    pub lo_phase_rad: f64,
    pub splitter_ratio: f64,
    pub mode_matching: f64,
    pub total_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServoKeys {
    pub p_gain: f64,
    pub i_corner_hz: f64,
    pub actuator_limit: f64,
    pub set_point: f64,
    pub polarity: f64,
    pub random_walk: f64,
    pub lines: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopsSection {
    pub dt_s: f64,
    pub duration_s: f64,
    pub threshold_rad: f64,
    pub detuning_tolerance_hz: f64,
    pub seed: u64,
    pub trace_stride: usize,
    pub random_start: bool,
    pub initial_phi_rad: f64,
    pub initial_lo_phase_rad: f64,
    pub initial_detuning_hz: f64,
    pub pdh_mod_freq_hz: f64,
    pub co_resonance_offset_hz: f64,
    pub pump: ServoKeys,
    pub lo: ServoKeys,
    pub cavity: ServoKeys,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSection {
    pub faraday: f64,
    pub mode_matching: f64,
    pub propagation: f64,
    pub photodiode: f64,
    pub heterodyne_freq_hz: f64,
    pub schnupp_asymmetry_m: f64,
    pub signal_band_hz: (f64, f64),
    pub input_squeezing_db: f64,
    pub reflectivity_overrides: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub carrier: CarrierSection,
    pub cavity: CavitySection,
    pub pump: PumpSection,
    pub qcf: QcfSection,
    pub homodyne: HomodyneSection,
    pub loops: LoopsSection,
    pub budget: BudgetSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let servo_phase = ServoKeys {
            p_gain: 400.0,
            i_corner_hz: 5.0,
            actuator_limit: 500.0,
            set_point: 0.0,
            polarity: 1.0,
            random_walk: 0.0,
            lines: Vec::new(),
        };
        Self {
            carrier: CarrierSection {
                wavelength_m: 1.064e-6,
            },
            cavity: CavitySection {
                fwhm_hz: 28.9e6,
                fsr_hz: 4e9,
                escape_efficiency: 1.0,
                grid_lo_hz: 10.0,
                grid_hi_hz: 50e6,
                grid_points: 400,
                grid: GridKind::Log,
            },
            pump: PumpSection {
                classical_gain: Some(10.0),
                pump_ratio: None,
                pump_power_w: 0.06,
            },
            qcf: QcfSection {
                offset_hz: 40e6,
                power_w: 440e-6,
                amplitude: 1.0,
                single_pass_gain: 10.0,
                phi_rad: 0.0,
            },
            homodyne: HomodyneSection {
                lo_power_w: 88e-6,
                lo_amplitude: 1.0,
                lo_phase_rad: 0.0,
                splitter_ratio: 0.5,
                mode_matching: 0.943,
                total_efficiency: 0.71,
            },
            loops: LoopsSection {
                dt_s: 1e-4,
                duration_s: 1.0,
                threshold_rad: 1e-3,
                detuning_tolerance_hz: 10e3,
                seed: 42,
                trace_stride: 20,
                random_start: true,
                initial_phi_rad: 0.0,
                initial_lo_phase_rad: 0.0,
                initial_detuning_hz: 0.0,
                pdh_mod_freq_hz: 153.8e6,
                co_resonance_offset_hz: 0.0,
                pump: servo_phase.clone(),
                lo: ServoKeys {
                    set_point: PI / 2.0,
                    ..servo_phase.clone()
                },
                cavity: ServoKeys {
                    actuator_limit: 20e6,
                    ..servo_phase
                },
            },
            budget: BudgetSection {
                faraday: 0.95,
                mode_matching: 0.943,
                propagation: 1.0,
                photodiode: 1.0,
                heterodyne_freq_hz: 14.9e6,
                schnupp_asymmetry_m: 0.1,
                signal_band_hz: (10.0, 10e3),
                input_squeezing_db: 6.0,
                reflectivity_overrides: vec![(29.8e6, 0.96)],
            },
        }
    }
}

const FREQ_UNITS: &[(&str, f64)] = &[
    ("mHz", 1e-3),
    ("Hz", 1.0),
    ("kHz", 1e3),
    ("MHz", 1e6),
    ("GHz", 1e9),
];
const POWER_UNITS: &[(&str, f64)] = &[
    ("W", 1.0),
    ("mW", 1e-3),
    ("uW", 1e-6),
    ("µW", 1e-6),
    ("nW", 1e-9),
    ("pW", 1e-12),
];
const LENGTH_UNITS: &[(&str, f64)] = &[
    ("m", 1.0),
    ("cm", 1e-2),
    ("mm", 1e-3),
    ("um", 1e-6),
    ("µm", 1e-6),
    ("nm", 1e-9),
];
const ANGLE_UNITS: &[(&str, f64)] = &[
    ("rad", 1.0),
    ("mrad", 1e-3),
    ("urad", 1e-6),
    ("deg", PI / 180.0),
];
const TIME_UNITS: &[(&str, f64)] = &[
    ("s", 1.0),
    ("ms", 1e-3),
    ("us", 1e-6),
    ("µs", 1e-6),
    ("min", 60.0),
];
const PER_SECOND_UNITS: &[(&str, f64)] = &[("/s", 1.0), ("1/s", 1.0)];
const DB_UNITS: &[(&str, f64)] = &[("dB", 1.0)];
const RW_ANGLE_UNITS: &[(&str, f64)] = &[
    ("rad/sqrt(s)", 1.0),
    ("mrad/sqrt(s)", 1e-3),
    ("urad/sqrt(s)", 1e-6),
];
const RW_FREQ_UNITS: &[(&str, f64)] = &[
    ("Hz/sqrt(s)", 1.0),
    ("kHz/sqrt(s)", 1e3),
    ("MHz/sqrt(s)", 1e6),
];

fn split_number_unit(raw: &str) -> (String, String) {
    let trimmed = raw.trim();
    match trimmed.find(|c: char| c.is_whitespace()) {
        Some(pos) => (
            trimmed[..pos].to_string(),
            trimmed[pos..].trim().to_string(),
        ),
        None => {
            if let Some(stripped) = trimmed.strip_suffix('%') {
                (stripped.to_string(), "%".to_string())
            } else {
                (trimmed.to_string(), String::new())
            }
        }
    }
}

fn parse_dimensioned(raw: &str, units: &[(&str, f64)], line: usize) -> Result<f64, ConfigError> {
    let (num, unit) = split_number_unit(raw);
    let value: f64 = num
        .parse()
        .map_err(|_| err(line, format!("`{num}` is not a number")))?;
    if unit.is_empty() {
        let expected: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
        return Err(err(
            line,
            format!(
                "`{raw}` is missing a unit; expected one of {}",
                expected.join(", ")
            ),
        ));
    }
    for (token, factor) in units {
        if unit == *token {
            return Ok(value * factor);
        }
    }
    let expected: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
    Err(err(
        line,
        format!("unknown unit `{unit}`; expected one of {}", expected.join(", ")),
    ))
}

/// Dimensionless value: bare number, or a percentage when `allow_percent`.
fn parse_bare(raw: &str, allow_percent: bool, line: usize) -> Result<f64, ConfigError> {
    let (num, unit) = split_number_unit(raw);
    let value: f64 = num
        .parse()
        .map_err(|_| err(line, format!("`{num}` is not a number")))?;
    match unit.as_str() {
        "" => Ok(value),
        "%" if allow_percent => Ok(value / 100.0),
        other => Err(err(
            line,
            format!("`{other}` is not valid here; this value is dimensionless"),
        )),
    }
}

fn parse_pair(
    raw: &str,
    line: usize,
    first: impl Fn(&str, usize) -> Result<f64, ConfigError>,
    second: impl Fn(&str, usize) -> Result<f64, ConfigError>,
) -> Result<(f64, f64), ConfigError> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(err(line, format!("`{raw}` must be two comma-separated values")));
    }
    Ok((first(parts[0], line)?, second(parts[1], line)?))
}

fn check_range(
    value: f64,
    lo: f64,
    hi: f64,
    key: &str,
    line: usize,
) -> Result<f64, ConfigError> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(err(
            line,
            format!("{key} = {value} is outside the valid range [{lo}, {hi}]"),
        ));
    }
    Ok(value)
}

impl ScenarioConfig {
    /// Parse a config document; errors carry the offending line number.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        // defaults for exactly-one-of keys are cleared once the user sets one
        let mut pump_convention_line: Option<(usize, &'static str)> = None;
        let mut user_overrides = false;
        let mut user_lines = [false; 3];
        let mut section = String::new();
        let mut seen: HashMap<String, usize> = HashMap::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let n = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(n, format!("malformed section header `{line}`")))?
                    .trim();
                match name {
                    "carrier" | "cavity" | "pump" | "qcf" | "homodyne" | "loops" | "budget" => {
                        section = name.to_string();
                    }
                    other => return Err(err(n, format!("unknown section `[{other}]`"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(n, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if section.is_empty() {
                return Err(err(n, format!("key `{key}` appears before any section")));
            }
            let full = format!("{section}.{key}");
            let repeatable = matches!(
                full.as_str(),
                "budget.reflectivity_override" | "loops.pump_line" | "loops.lo_line"
                    | "loops.cavity_line"
            );
            if !repeatable {
                if let Some(prev) = seen.insert(full.clone(), n) {
                    return Err(err(
                        n,
                        format!("duplicate key `{key}` in [{section}] (first set on line {prev})"),
                    ));
                }
            }

            let freq = |v: &str| parse_dimensioned(v, FREQ_UNITS, n);
            let ratio =
                |v: &str| parse_bare(v, true, n).and_then(|x| check_range(x, 0.0, 1.0, key, n));
            let angle = |v: &str| parse_dimensioned(v, ANGLE_UNITS, n);

            match full.as_str() {
                "carrier.wavelength" => {
                    cfg.carrier.wavelength_m = check_range(
                        parse_dimensioned(value, LENGTH_UNITS, n)?,
                        1e-9,
                        1e-3,
                        key,
                        n,
                    )?;
                }
                "cavity.fwhm" => {
                    cfg.cavity.fwhm_hz = check_range(freq(value)?, 1.0, 1e12, key, n)?;
                }
                "cavity.fsr" => {
                    cfg.cavity.fsr_hz = check_range(freq(value)?, 1.0, 1e15, key, n)?;
                }
                "cavity.escape_efficiency" => cfg.cavity.escape_efficiency = ratio(value)?,
                "cavity.grid_lo" => {
                    cfg.cavity.grid_lo_hz = check_range(freq(value)?, 1e-3, 1e12, key, n)?;
                }
                "cavity.grid_hi" => {
                    cfg.cavity.grid_hi_hz = check_range(freq(value)?, 1e-3, 1e12, key, n)?;
                }
                "cavity.grid_points" => {
                    cfg.cavity.grid_points = parse_integer(value, 2, 1_000_000, key, n)? as usize;
                }
                "cavity.grid" => {
                    cfg.cavity.grid = match value {
                        "log" => GridKind::Log,
                        "audio-band-windows" => GridKind::AudioBandWindows,
                        other => {
                            return Err(err(
                                n,
                                format!(
                                    "unknown grid `{other}`; expected `log` or `audio-band-windows`"
                                ),
                            ))
                        }
                    };
                }
                "pump.classical_gain" => {
                    let v = parse_bare(value, false, n)?;
                    check_range(v, 1.0, 1e6, key, n)?;
                    if let Some((l, other)) = pump_convention_line {
                        if other == "pump_ratio" {
                            return Err(err(
                                n,
                                format!("classical_gain conflicts with pump_ratio on line {l}; name exactly one pump convention"),
                            ));
                        }
                    }
                    pump_convention_line = Some((n, "classical_gain"));
                    cfg.pump.classical_gain = Some(v);
                    cfg.pump.pump_ratio = None;
                }
                "pump.pump_ratio" => {
                    let v = parse_bare(value, false, n)?;
                    if !(0.0..1.0).contains(&v) {
                        return Err(err(
                            n,
                            format!("pump_ratio = {v} must lie in [0, 1) (below threshold)"),
                        ));
                    }
                    if let Some((l, other)) = pump_convention_line {
                        if other == "classical_gain" {
                            return Err(err(
                                n,
                                format!("pump_ratio conflicts with classical_gain on line {l}; name exactly one pump convention"),
                            ));
                        }
                    }
                    pump_convention_line = Some((n, "pump_ratio"));
                    cfg.pump.pump_ratio = Some(v);
                    cfg.pump.classical_gain = None;
                }
                "pump.pump_power" => {
                    cfg.pump.pump_power_w =
                        check_range(parse_dimensioned(value, POWER_UNITS, n)?, 0.0, 1e3, key, n)?;
                }
                "qcf.offset" => {
                    cfg.qcf.offset_hz = check_range(freq(value)?, 1e-3, 1e12, key, n)?;
                }
                "qcf.power" => {
                    cfg.qcf.power_w =
                        check_range(parse_dimensioned(value, POWER_UNITS, n)?, 0.0, 1e3, key, n)?;
                }
                "qcf.amplitude" => {
                    cfg.qcf.amplitude =
                        check_range(parse_bare(value, false, n)?, 0.0, 1e9, key, n)?;
                }
                "qcf.single_pass_gain" => {
                    cfg.qcf.single_pass_gain =
                        check_range(parse_bare(value, false, n)?, 1.0, 1e6, key, n)?;
                }
                "qcf.phi" => cfg.qcf.phi_rad = angle(value)?,
                "homodyne.lo_power" => {
                    cfg.homodyne.lo_power_w = check_range(
                        parse_dimensioned(value, POWER_UNITS, n)?,
                        1e-15,
                        1e3,
                        key,
                        n,
                    )?;
                }
                "homodyne.lo_amplitude" => {
                    cfg.homodyne.lo_amplitude =
                        check_range(parse_bare(value, false, n)?, 0.0, 1e9, key, n)?;
                }
                "homodyne.lo_phase" => cfg.homodyne.lo_phase_rad = angle(value)?,
                "homodyne.splitter_ratio" => cfg.homodyne.splitter_ratio = ratio(value)?,
                "homodyne.mode_matching" => cfg.homodyne.mode_matching = ratio(value)?,
                "homodyne.total_efficiency" => cfg.homodyne.total_efficiency = ratio(value)?,
                "loops.dt" => {
                    cfg.loops.dt_s = check_range(
                        parse_dimensioned(value, TIME_UNITS, n)?,
                        1e-12,
                        1.0,
                        key,
                        n,
                    )?;
                }
                "loops.duration" => {
                    cfg.loops.duration_s = check_range(
                        parse_dimensioned(value, TIME_UNITS, n)?,
                        1e-9,
                        1e6,
                        key,
                        n,
                    )?;
                }
                "loops.threshold" => {
                    cfg.loops.threshold_rad = check_range(angle(value)?, 1e-12, PI, key, n)?;
                }
                "loops.detuning_tolerance" => {
                    cfg.loops.detuning_tolerance_hz =
                        check_range(freq(value)?, 1e-3, 1e12, key, n)?;
                }
                "loops.seed" => {
                    cfg.loops.seed = value
                        .parse()
                        .map_err(|_| err(n, format!("`{value}` is not a valid seed")))?;
                }
                "loops.trace_stride" => {
                    cfg.loops.trace_stride = parse_integer(value, 1, 1_000_000, key, n)? as usize;
                }
                "loops.random_start" => {
                    cfg.loops.random_start = parse_bool(value, n)?;
                }
                "loops.initial_phi" => cfg.loops.initial_phi_rad = angle(value)?,
                "loops.initial_lo_phase" => cfg.loops.initial_lo_phase_rad = angle(value)?,
                "loops.initial_detuning" => {
                    cfg.loops.initial_detuning_hz = parse_dimensioned(value, FREQ_UNITS, n)?;
                }
                "loops.pdh_mod_freq" => {
                    cfg.loops.pdh_mod_freq_hz = check_range(freq(value)?, 1.0, 1e12, key, n)?;
                }
                "loops.co_resonance_offset" => {
                    cfg.loops.co_resonance_offset_hz = parse_dimensioned(value, FREQ_UNITS, n)?;
                }
                _ => {
                    if let Some(rest) = full.strip_prefix("loops.") {
                        if parse_servo_key(&mut cfg.loops, rest, value, n, &mut user_lines)? {
                            continue;
                        }
                    }
                    match full.as_str() {
                        "budget.faraday" => cfg.budget.faraday = ratio(value)?,
                        "budget.mode_matching" => cfg.budget.mode_matching = ratio(value)?,
                        "budget.propagation" => cfg.budget.propagation = ratio(value)?,
                        "budget.photodiode" => cfg.budget.photodiode = ratio(value)?,
                        "budget.heterodyne_freq" => {
                            cfg.budget.heterodyne_freq_hz =
                                check_range(freq(value)?, 0.0, 1e12, key, n)?;
                        }
                        "budget.schnupp_asymmetry" => {
                            cfg.budget.schnupp_asymmetry_m = check_range(
                                parse_dimensioned(value, LENGTH_UNITS, n)?,
                                0.0,
                                1e4,
                                key,
                                n,
                            )?;
                        }
                        "budget.signal_band" => {
                            let hz = |v: &str, n: usize| parse_dimensioned(v, FREQ_UNITS, n);
                            let (lo, hi) = parse_pair(value, n, hz, hz)?;
                            if hi <= lo {
                                return Err(err(
                                    n,
                                    format!("signal_band upper edge {hi} Hz must exceed {lo} Hz"),
                                ));
                            }
                            cfg.budget.signal_band_hz = (lo, hi);
                        }
                        "budget.input_squeezing" => {
                            cfg.budget.input_squeezing_db = check_range(
                                parse_dimensioned(value, DB_UNITS, n)?,
                                1e-3,
                                60.0,
                                key,
                                n,
                            )?;
                        }
                        "budget.reflectivity_override" => {
                            let hz = |v: &str, n: usize| parse_dimensioned(v, FREQ_UNITS, n);
                            let (f, r) = parse_pair(value, n, hz, |v, n| {
                                parse_bare(v, true, n)
                                    .and_then(|x| check_range(x, 0.0, 1.0, "override", n))
                            })?;
                            if !user_overrides {
                                cfg.budget.reflectivity_overrides.clear();
                                user_overrides = true;
                            }
                            cfg.budget.reflectivity_overrides.push((f, r));
                        }
                        _ => {
                            return Err(err(
                                n,
                                format!("unknown key `{key}` in section [{section}]"),
                            ))
                        }
                    }
                }
            }
        }

        if cfg.cavity.fwhm_hz >= cfg.cavity.fsr_hz {
            let line = seen.get("cavity.fwhm").or(seen.get("cavity.fsr")).copied();
            return Err(ConfigError {
                line,
                message: format!(
                    "cavity fwhm ({} Hz) must be below the free spectral range ({} Hz)",
                    cfg.cavity.fwhm_hz, cfg.cavity.fsr_hz
                ),
            });
        }
        if cfg.cavity.grid_hi_hz <= cfg.cavity.grid_lo_hz {
            let line = seen.get("cavity.grid_hi").copied();
            return Err(ConfigError {
                line,
                message: "cavity grid_hi must exceed grid_lo".into(),
            });
        }
        Ok(cfg)
    }

    /// Canonical text form: every key, base SI units, lossless floats.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let c = &self.carrier;
        s.push_str("[carrier]\n");
        s.push_str(&format!("wavelength = {} m\n", c.wavelength_m));

        let cav = &self.cavity;
        s.push_str("\n[cavity]\n");
        s.push_str(&format!("fwhm = {} Hz\n", cav.fwhm_hz));
        s.push_str(&format!("fsr = {} Hz\n", cav.fsr_hz));
        s.push_str(&format!("escape_efficiency = {}\n", cav.escape_efficiency));
        s.push_str(&format!("grid_lo = {} Hz\n", cav.grid_lo_hz));
        s.push_str(&format!("grid_hi = {} Hz\n", cav.grid_hi_hz));
        s.push_str(&format!("grid_points = {}\n", cav.grid_points));
        s.push_str(&format!(
            "grid = {}\n",
            match cav.grid {
                GridKind::Log => "log",
                GridKind::AudioBandWindows => "audio-band-windows",
            }
        ));

        let p = &self.pump;
        s.push_str("\n[pump]\n");
        if let Some(g) = p.classical_gain {
            s.push_str(&format!("classical_gain = {g}\n"));
        }
        if let Some(x) = p.pump_ratio {
            s.push_str(&format!("pump_ratio = {x}\n"));
        }
        s.push_str(&format!("pump_power = {} W\n", p.pump_power_w));

        let q = &self.qcf;
        s.push_str("\n[qcf]\n");
        s.push_str(&format!("offset = {} Hz\n", q.offset_hz));
        s.push_str(&format!("power = {} W\n", q.power_w));
        s.push_str(&format!("amplitude = {}\n", q.amplitude));
        s.push_str(&format!("single_pass_gain = {}\n", q.single_pass_gain));
        s.push_str(&format!("phi = {} rad\n", q.phi_rad));

        let h = &self.homodyne;
        s.push_str("\n[homodyne]\n");
        s.push_str(&format!("lo_power = {} W\n", h.lo_power_w));
        s.push_str(&format!("lo_amplitude = {}\n", h.lo_amplitude));
        s.push_str(&format!("lo_phase = {} rad\n", h.lo_phase_rad));
        s.push_str(&format!("splitter_ratio = {}\n", h.splitter_ratio));
        s.push_str(&format!("mode_matching = {}\n", h.mode_matching));
        s.push_str(&format!("total_efficiency = {}\n", h.total_efficiency));

        let l = &self.loops;
        s.push_str("\n[loops]\n");
        s.push_str(&format!("dt = {} s\n", l.dt_s));
        s.push_str(&format!("duration = {} s\n", l.duration_s));
        s.push_str(&format!("threshold = {} rad\n", l.threshold_rad));
        s.push_str(&format!(
            "detuning_tolerance = {} Hz\n",
            l.detuning_tolerance_hz
        ));
        s.push_str(&format!("seed = {}\n", l.seed));
        s.push_str(&format!("trace_stride = {}\n", l.trace_stride));
        s.push_str(&format!("random_start = {}\n", l.random_start));
        s.push_str(&format!("initial_phi = {} rad\n", l.initial_phi_rad));
        s.push_str(&format!(
            "initial_lo_phase = {} rad\n",
            l.initial_lo_phase_rad
        ));
        s.push_str(&format!(
            "initial_detuning = {} Hz\n",
            l.initial_detuning_hz
        ));
        s.push_str(&format!("pdh_mod_freq = {} Hz\n", l.pdh_mod_freq_hz));
        s.push_str(&format!(
            "co_resonance_offset = {} Hz\n",
            l.co_resonance_offset_hz
        ));
        for (prefix, servo, rw_unit, act_unit, line_unit) in [
            ("pump", &l.pump, "rad/sqrt(s)", "rad", "rad"),
            ("lo", &l.lo, "rad/sqrt(s)", "rad", "rad"),
            ("cavity", &l.cavity, "Hz/sqrt(s)", "Hz", "Hz"),
        ] {
            s.push_str(&format!("{prefix}_p_gain = {} /s\n", servo.p_gain));
            s.push_str(&format!("{prefix}_i_corner = {} Hz\n", servo.i_corner_hz));
            s.push_str(&format!(
                "{prefix}_actuator_limit = {} {act_unit}\n",
                servo.actuator_limit
            ));
            s.push_str(&format!(
                "{prefix}_set_point = {} {act_unit}\n",
                servo.set_point
            ));
            s.push_str(&format!("{prefix}_polarity = {}\n", servo.polarity as i8));
            s.push_str(&format!(
                "{prefix}_random_walk = {} {rw_unit}\n",
                servo.random_walk
            ));
            for (f, a) in &servo.lines {
                s.push_str(&format!("{prefix}_line = {f} Hz, {a} {line_unit}\n"));
            }
        }

        let b = &self.budget;
        s.push_str("\n[budget]\n");
        s.push_str(&format!("faraday = {}\n", b.faraday));
        s.push_str(&format!("mode_matching = {}\n", b.mode_matching));
        s.push_str(&format!("propagation = {}\n", b.propagation));
        s.push_str(&format!("photodiode = {}\n", b.photodiode));
        s.push_str(&format!("heterodyne_freq = {} Hz\n", b.heterodyne_freq_hz));
        s.push_str(&format!(
            "schnupp_asymmetry = {} m\n",
            b.schnupp_asymmetry_m
        ));
        s.push_str(&format!(
            "signal_band = {} Hz, {} Hz\n",
            b.signal_band_hz.0, b.signal_band_hz.1
        ));
        s.push_str(&format!("input_squeezing = {} dB\n", b.input_squeezing_db));
        for (f, r) in &b.reflectivity_overrides {
            s.push_str(&format!("reflectivity_override = {f} Hz, {r}\n"));
        }
        s
    }
}

fn parse_integer(raw: &str, lo: i64, hi: i64, key: &str, line: usize) -> Result<i64, ConfigError> {
    let v: i64 = raw
        .trim()
        .parse()
        .map_err(|_| err(line, format!("`{raw}` is not an integer")))?;
    if v < lo || v > hi {
        return Err(err(
            line,
            format!("{key} = {v} is outside the valid range [{lo}, {hi}]"),
        ));
    }
    Ok(v)
}

fn parse_bool(raw: &str, line: usize) -> Result<bool, ConfigError> {
    match raw.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(err(line, format!("`{other}` is not `true` or `false`"))),
    }
}

/// Servo and disturbance keys shared by the three loops; returns true when
/// the key was recognized.
fn parse_servo_key(
    loops: &mut LoopsSection,
    rest: &str,
    value: &str,
    n: usize,
    user_lines: &mut [bool; 3],
) -> Result<bool, ConfigError> {
    let (prefix, field) = match rest.split_once('_') {
        Some(pair) => pair,
        None => return Ok(false),
    };
    let (index, is_cavity) = match prefix {
        "pump" => (0usize, false),
        "lo" => (1, false),
        "cavity" => (2, true),
        _ => return Ok(false),
    };
    let servo = match index {
        0 => &mut loops.pump,
        1 => &mut loops.lo,
        _ => &mut loops.cavity,
    };
    let native_units = if is_cavity { FREQ_UNITS } else { ANGLE_UNITS };
    match field {
        "p_gain" => {
            servo.p_gain = check_range(
                parse_dimensioned(value, PER_SECOND_UNITS, n)?,
                1e-9,
                1e12,
                rest,
                n,
            )?;
        }
        "i_corner" => {
            servo.i_corner_hz =
                check_range(parse_dimensioned(value, FREQ_UNITS, n)?, 0.0, 1e9, rest, n)?;
        }
        "actuator_limit" => {
            servo.actuator_limit =
                check_range(parse_dimensioned(value, native_units, n)?, 1e-12, 1e12, rest, n)?;
        }
        "set_point" => {
            servo.set_point = parse_dimensioned(value, native_units, n)?;
        }
        "polarity" => {
            let v = parse_integer(value, -1, 1, rest, n)?;
            if v == 0 {
                return Err(err(n, "polarity must be 1 or -1".to_string()));
            }
            servo.polarity = v as f64;
        }
        "random_walk" => {
            let units = if is_cavity { RW_FREQ_UNITS } else { RW_ANGLE_UNITS };
            servo.random_walk =
                check_range(parse_dimensioned(value, units, n)?, 0.0, 1e12, rest, n)?;
        }
        "line" => {
            let amp_units = native_units;
            let (f, a) = parse_pair(
                value,
                n,
                |v, n| parse_dimensioned(v, FREQ_UNITS, n),
                |v, n| parse_dimensioned(v, amp_units, n),
            )?;
            if !user_lines[index] {
                servo.lines.clear();
                user_lines[index] = true;
            }
            servo.lines.push((f, a));
        }
        _ => return Ok(false),
    }
    Ok(true)
}
