//! Experiment configuration: newline-delimited `key=value` pairs.
//!
//! Blank lines and lines starting with `#` are ignored. Missing keys take
//! their defaults; `delta` defaults to `alpha/2`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid};
use crate::params::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiMode {
    /// `Π` solved from `G` at every stage.
    Full,
    /// `Π` kept in the special-solution shape with a projected amplitude.
    Special,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationMode {
    /// Rates chosen so that `L_K(ε)(z_min)` is stationary for the full right-hand side.
    Full,
    /// Leading two-term balance only.
    Reduced,
}

impl FromStr for PiMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "special" => Ok(Self::Special),
            _ => Err(format!("pi_mode must be `full` or `special`, got `{s}`")),
        }
    }
}

impl FromStr for ModulationMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "reduced" => Ok(Self::Reduced),
            _ => Err(format!("modulation must be `full` or `reduced`, got `{s}`")),
        }
    }
}

impl fmt::Display for PiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Special => "special",
        })
    }
}

impl fmt::Display for ModulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Reduced => "reduced",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub alpha: f64,
    pub delta: f64,
    pub k: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub nz: usize,
    pub ntheta: usize,
    pub dt: f64,
    pub s_max: f64,
    /// Relative share of the initial energy carried by `ε`.
    pub eps0_amplitude: f64,
    /// Relative share of the initial energy carried by `Π̃`.
    pub pi0_amplitude: f64,
    /// `E(0) = ν α^{3/2}`
    pub nu: f64,
    pub seed: u64,
    pub pi_mode: PiMode,
    pub modulation: ModulationMode,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            delta: 0.025,
            k: 0,
            z_min: 1e-2,
            z_max: 1e4,
            nz: 512,
            ntheta: 128,
            dt: 0.005,
            s_max: 5.0,
            eps0_amplitude: 1.0,
            pi0_amplitude: 1.0,
            nu: 0.01,
            seed: 1,
            pi_mode: PiMode::Full,
            modulation: ModulationMode::Full,
        }
    }
}

const KEYS: [&str; 15] = [
    "alpha",
    "delta",
    "k",
    "z_min",
    "z_max",
    "nz",
    "ntheta",
    "dt",
    "s_max",
    "eps0_amplitude",
    "pi0_amplitude",
    "nu",
    "seed",
    "pi_mode",
    "modulation",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Config { line, msg: format!("{key}: {e}") })
}

/// Parse configuration text, applying defaults and checking ranges.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Config { line, msg: format!("expected key=value, got `{body}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::Config { line, msg: format!("unknown key `{key}`") });
        };
        if seen.iter().any(|(k, _)| *k == known) {
            return Err(Error::Config { line, msg: format!("duplicate key `{key}`") });
        }
        seen.push((known, line));
        match known {
            "alpha" => cfg.alpha = parse_value(line, key, value)?,
            "delta" => cfg.delta = parse_value(line, key, value)?,
            "k" => cfg.k = parse_value(line, key, value)?,
            "z_min" => cfg.z_min = parse_value(line, key, value)?,
            "z_max" => cfg.z_max = parse_value(line, key, value)?,
            "nz" => cfg.nz = parse_value(line, key, value)?,
            "ntheta" => cfg.ntheta = parse_value(line, key, value)?,
            "dt" => cfg.dt = parse_value(line, key, value)?,
            "s_max" => cfg.s_max = parse_value(line, key, value)?,
            "eps0_amplitude" => cfg.eps0_amplitude = parse_value(line, key, value)?,
            "pi0_amplitude" => cfg.pi0_amplitude = parse_value(line, key, value)?,
            "nu" => cfg.nu = parse_value(line, key, value)?,
            "seed" => cfg.seed = parse_value(line, key, value)?,
            "pi_mode" => cfg.pi_mode = parse_value(line, key, value)?,
            "modulation" => cfg.modulation = parse_value(line, key, value)?,
            _ => unreachable!(),
        }
    }
    if !seen.iter().any(|(k, _)| *k == "delta") {
        cfg.delta = cfg.alpha / 2.0;
    }
    let line_of = |key: &str| seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l);
    cfg.check().map_err(|(key, msg)| Error::Config { line: line_of(key), msg })?;
    Ok(cfg)
}

impl Config {
    /// First violated constraint as `(key, message)`.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let finite = |key: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err((key, format!("{key} must be finite")))
            }
        };
        for (key, v) in [
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("z_min", self.z_min),
            ("z_max", self.z_max),
            ("dt", self.dt),
            ("s_max", self.s_max),
            ("eps0_amplitude", self.eps0_amplitude),
            ("pi0_amplitude", self.pi0_amplitude),
            ("nu", self.nu),
        ] {
            finite(key, v)?;
        }
        let rules: [(&'static str, bool, &str); 11] = [
            ("alpha", self.alpha > 0.0 && self.alpha <= 0.2, "alpha must satisfy 0 < alpha <= 0.2"),
            ("delta", (0.0..1.0).contains(&self.delta), "delta must satisfy 0 <= delta < 1"),
            ("z_min", self.z_min > 0.0 && self.z_min < 1.0, "z_min must satisfy 0 < z_min < 1"),
            ("z_max", self.z_max > 1.0, "z_max must satisfy z_max > 1"),
            ("nz", self.nz >= 8, "nz must be at least 8"),
            ("ntheta", self.ntheta >= 8, "ntheta must be at least 8"),
            ("dt", self.dt > 0.0, "dt must be positive"),
            ("s_max", self.s_max > 0.0, "s_max must be positive"),
            ("eps0_amplitude", self.eps0_amplitude >= 0.0, "eps0_amplitude must be non-negative"),
            ("pi0_amplitude", self.pi0_amplitude >= 0.0, "pi0_amplitude must be non-negative"),
            ("nu", self.nu >= 0.0, "nu must be non-negative"),
        ];
        for (key, ok, msg) in rules {
            if !ok {
                return Err((key, msg.to_string()));
            }
        }
        Ok(())
    }

    pub fn parameters(&self) -> Result<Parameters> {
        Parameters::new(self.alpha, self.delta, self.k)
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        make_grid(self.z_min, self.z_max, self.nz, self.ntheta)
    }

    /// Target initial energy `ν α^{3/2}`.
    pub fn initial_energy(&self) -> f64 {
        self.nu * self.alpha.powf(1.5)
    }
}

/// Effective configuration, one `key=value` per line in canonical order;
/// parsing the output gives back the same configuration.
impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha={:?}", self.alpha)?;
        writeln!(f, "delta={:?}", self.delta)?;
        writeln!(f, "k={}", self.k)?;
        writeln!(f, "z_min={:?}", self.z_min)?;
        writeln!(f, "z_max={:?}", self.z_max)?;
        writeln!(f, "nz={}", self.nz)?;
        writeln!(f, "ntheta={}", self.ntheta)?;
        writeln!(f, "dt={:?}", self.dt)?;
        writeln!(f, "s_max={:?}", self.s_max)?;
        writeln!(f, "eps0_amplitude={:?}", self.eps0_amplitude)?;
        writeln!(f, "pi0_amplitude={:?}", self.pi0_amplitude)?;
        writeln!(f, "nu={:?}", self.nu)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "pi_mode={}", self.pi_mode)?;
        writeln!(f, "modulation={}", self.modulation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_defaults() {
        let c = parse_config("alpha=0.05\nnz=512").unwrap();
        assert_eq!(c, Config { alpha: 0.05, nz: 512, ..Config::default() });
        assert_eq!(parse_config("").unwrap(), Config::default());
    }

    #[test]
    fn delta_follows_alpha_unless_given() {
        assert_eq!(parse_config("alpha=0.1").unwrap().delta, 0.05);
        assert_eq!(parse_config("alpha=0.1\ndelta=0.3").unwrap().delta, 0.3);
    }

    #[test]
    fn range_error_names_constraint() {
        let err = parse_config("nz=64\nalpha=0.5").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("alpha <= 0.2"), "{msg}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn malformed_and_unknown_lines_report_line_numbers() {
        let cases = ["alpha=0.05\n\nnonsense", "# c\nbogus=1", "nz=abc", "alpha=0.1\nalpha=0.1", "pi_mode=half"];
        let lines = [3, 2, 1, 2, 1];
        for (text, want) in cases.iter().zip(lines) {
            match parse_config(text) {
                Err(Error::Config { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn display_round_trips() {
        let c = Config {
            alpha: 0.013,
            delta: 0.2,
            seed: 99,
            pi_mode: PiMode::Special,
            modulation: ModulationMode::Reduced,
            ..Config::default()
        };
        assert_eq!(parse_config(&c.to_string()).unwrap(), c);
    }
}
