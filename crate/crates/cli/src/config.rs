//! Flat `key = value` configuration files with unit-suffixed numbers.
//!
//! Frequencies are always given "over 2 pi" in Hz-family units and converted
//! to angular frequencies once, here. Times are seconds-family, powers
//! watts-family. Lines starting with `#` are comments, so a run manifest is
//! itself a valid configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use pairsim_core::model::{CavityMode, ProcessConfig, ProcessOrder};
use pairsim_core::Real;

use crate::CliError;

const TWO_PI: Real = std::f64::consts::TAU;

/// Parsed configuration with use-tracking so that unknown keys are rejected.
pub struct Settings {
    values: BTreeMap<String, String>,
    used: std::cell::RefCell<BTreeSet<String>>,
    /// Resolved `key = value` pairs (including defaults), echoed into the
    /// run manifest so the manifest reproduces the run.
    resolved: std::cell::RefCell<BTreeMap<String, String>>,
}

fn unit_multiplier(unit: &str, family: &str) -> Option<Real> {
    let table: &[(&str, Real)] = match family {
        "frequency" => &[
            ("Hz", 1.0),
            ("kHz", 1e3),
            ("MHz", 1e6),
            ("GHz", 1e9),
            ("THz", 1e12),
        ],
        "time" => &[
            ("s", 1.0),
            ("ms", 1e-3),
            ("us", 1e-6),
            ("ns", 1e-9),
            ("ps", 1e-12),
        ],
        "power" => &[
            ("W", 1.0),
            ("mW", 1e-3),
            ("uW", 1e-6),
            ("nW", 1e-9),
            ("pW", 1e-12),
        ],
        "temperature" => &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6)],
        _ => return None,
    };
    table.iter().find(|(u, _)| *u == unit).map(|(_, m)| *m)
}

fn parse_unit_number(raw: &str, family: Option<&str>, key: &str) -> Result<Real, CliError> {
    let mut parts = raw.split_whitespace();
    let number = parts
        .next()
        .ok_or_else(|| CliError::config(format!("empty value for `{key}`")))?;
    let value: Real = number
        .parse()
        .map_err(|_| CliError::config(format!("`{key}`: cannot parse number `{number}`")))?;
    match (parts.next(), family) {
        (None, _) => Ok(value),
        (Some(unit), Some(fam)) => unit_multiplier(unit, fam)
            .map(|m| value * m)
            .ok_or_else(|| {
                CliError::config(format!("`{key}`: unit `{unit}` is not a {fam} unit"))
            }),
        (Some(unit), None) => Err(CliError::config(format!(
            "`{key}`: unexpected unit `{unit}` on a dimensionless value"
        ))),
    }
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::Io)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let key = key.trim().to_string();
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::config(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            values,
            used: Default::default(),
            resolved: Default::default(),
        })
    }

    fn raw(&self, key: &str) -> Option<String> {
        let v = self.values.get(key).cloned();
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    fn record(&self, key: &str, shown: String) {
        self.resolved.borrow_mut().insert(key.to_string(), shown);
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Angular frequency (rad/s) from a Hz-family "over 2 pi" value.
    pub fn freq(&self, key: &str, default_rad: Option<Real>) -> Result<Real, CliError> {
        let rad = match self.raw(key) {
            Some(raw) => parse_unit_number(&raw, Some("frequency"), key)? * TWO_PI,
            None => default_rad.ok_or_else(|| {
                CliError::config(format!("missing required frequency key `{key}`"))
            })?,
        };
        self.record(key, format!("{} Hz", rad / TWO_PI));
        Ok(rad)
    }

    /// List of angular frequencies; comma-separated, one optional trailing
    /// unit applying to every entry.
    pub fn freq_list(&self, key: &str, default_rad: &[Real]) -> Result<Vec<Real>, CliError> {
        let rads = match self.raw(key) {
            Some(raw) => {
                let entries: Vec<&str> = raw.split(',').map(str::trim).collect();
                // A unit on the last entry applies to all.
                let mut unit_scale = 1.0;
                let mut cleaned: Vec<String> = Vec::new();
                for (i, e) in entries.iter().enumerate() {
                    let mut parts = e.split_whitespace();
                    let num = parts.next().unwrap_or_default().to_string();
                    if let Some(unit) = parts.next() {
                        if i + 1 == entries.len() {
                            unit_scale = unit_multiplier(unit, "frequency").ok_or_else(|| {
                                CliError::config(format!("`{key}`: bad unit `{unit}`"))
                            })?;
                        } else {
                            return Err(CliError::config(format!(
                                "`{key}`: units belong on the final list entry only"
                            )));
                        }
                    }
                    cleaned.push(num);
                }
                cleaned
                    .iter()
                    .map(|n| {
                        n.parse::<Real>().map(|v| v * unit_scale * TWO_PI).map_err(|_| {
                            CliError::config(format!("`{key}`: cannot parse `{n}`"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            None => default_rad.to_vec(),
        };
        let shown: Vec<String> = rads.iter().map(|r| format!("{}", r / TWO_PI)).collect();
        self.record(key, format!("{} Hz", shown.join(", ")));
        Ok(rads)
    }

    pub fn time(&self, key: &str, default_s: Option<Real>) -> Result<Real, CliError> {
        let v = match self.raw(key) {
            Some(raw) => parse_unit_number(&raw, Some("time"), key)?,
            None => default_s
                .ok_or_else(|| CliError::config(format!("missing required time key `{key}`")))?,
        };
        self.record(key, format!("{v} s"));
        Ok(v)
    }

    pub fn power(&self, key: &str, default_w: Real) -> Result<Real, CliError> {
        let v = match self.raw(key) {
            Some(raw) => parse_unit_number(&raw, Some("power"), key)?,
            None => default_w,
        };
        self.record(key, format!("{v} W"));
        Ok(v)
    }

    pub fn number(&self, key: &str, default: Option<Real>) -> Result<Real, CliError> {
        let v = match self.raw(key) {
            Some(raw) => parse_unit_number(&raw, None, key)?,
            None => {
                default.ok_or_else(|| CliError::config(format!("missing required key `{key}`")))?
            }
        };
        self.record(key, format!("{v}"));
        Ok(v)
    }

    pub fn integer(&self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = match self.raw(key) {
            Some(raw) => raw
                .parse::<usize>()
                .map_err(|_| CliError::config(format!("`{key}`: expected an integer")))?,
            None => default,
        };
        self.record(key, format!("{v}"));
        Ok(v)
    }

    pub fn boolean(&self, key: &str, default: bool) -> Result<bool, CliError> {
        let v = match self.raw(key) {
            Some(raw) => match raw.as_str() {
                "true" | "yes" | "on" => true,
                "false" | "no" | "off" => false,
                other => {
                    return Err(CliError::config(format!(
                        "`{key}`: expected true/false, got `{other}`"
                    )))
                }
            },
            None => default,
        };
        self.record(key, format!("{v}"));
        Ok(v)
    }

    pub fn string(&self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        let v = match self.raw(key) {
            Some(raw) => raw,
            None => default
                .map(str::to_string)
                .ok_or_else(|| CliError::config(format!("missing required key `{key}`")))?,
        };
        self.record(key, v.clone());
        Ok(v)
    }

    /// Error on any key the command never consumed (typo protection).
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(format!(
                "unknown key(s): {}",
                unknown
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }

    /// The resolved configuration (requested keys with their effective
    /// values, defaults included), formatted as config-file lines.
    pub fn resolved_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.resolved.borrow().iter() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Build the process configuration shared by the physics subcommands.
    ///
    /// `gamma_si_over_2pi` sets equal signal/idler linewidths; individual
    /// `gamma_s_over_2pi` / `gamma_i_over_2pi` override it. A pump mode (and
    /// with it the triply resonant layout) exists exactly when
    /// `gamma_p_over_2pi` is present.
    pub fn process_config(&self) -> Result<ProcessConfig<Real>, CliError> {
        let gamma_si = if self.has("gamma_si_over_2pi") {
            Some(self.freq("gamma_si_over_2pi", None)?)
        } else {
            None
        };
        let gamma_s = self.freq("gamma_s_over_2pi", gamma_si)?;
        let gamma_i = self.freq("gamma_i_over_2pi", Some(gamma_si.unwrap_or(gamma_s)))?;
        let kappa_s = self.number("kappa_s", Some(1.0))?;
        let kappa_i = self.number("kappa_i", Some(1.0))?;
        let order = ProcessOrder::from_index(self.integer("process_order", 1)? as u8)
            .map_err(|e| CliError::config(e.to_string()))?;
        let mismatch = self.freq("delta_over_2pi", Some(0.0))?;
        let pump = if self.has("gamma_p_over_2pi") {
            let gamma_p = self.freq("gamma_p_over_2pi", None)?;
            let kappa_p = self.number("kappa_p", Some(0.5))?;
            Some(
                CavityMode::from_linewidth(gamma_p, kappa_p)
                    .map_err(|e| CliError::config(e.to_string()))?,
            )
        } else {
            None
        };
        let pump_detuning = if pump.is_some() {
            self.freq("delta_p_over_2pi", Some(0.0))?
        } else {
            0.0
        };
        let drive_ratio = self.number("pump_drive_ratio", Some(1e-3))?;
        let pump_power = self.power("pump_power", 1.0)?;

        let signal = CavityMode::from_linewidth(gamma_s, kappa_s)
            .map_err(|e| CliError::config(e.to_string()))?;
        let idler = CavityMode::from_linewidth(gamma_i, kappa_i)
            .map_err(|e| CliError::config(e.to_string()))?;
        let cfg = ProcessConfig {
            signal,
            idler,
            pump,
            mismatch_delta: mismatch,
            pump_detuning,
            order,
            coupling_strength: 1.0,
            pump_drive: pump_power,
        }
        .with_drive_ratio(drive_ratio);
        cfg.validate().map_err(|e| CliError::config(e.to_string()))
    }
}
