//! Flat `key = value` experiment configuration and the cell-value override
//! document used by the `inequality` command.
//!
//! ```text
//! # measured apparatus
//! switch_efficiency = 0.85
//! visibility_E = 0.95
//! visibility_P = 0.94
//! mode = counts
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::hardy::{Estimate, WeakValueReport};
use crate::optics::{Arm, ArmPair, ImperfectionParams, SwitchResidual};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Exact oracle values.
    Analytic,
    /// Pointer protocol with exact probabilities.
    Noiseless,
    /// Pointer protocol with Poisson counts and bootstrap error bars.
    Counts,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Analytic => "analytic",
            Mode::Noiseless => "noiseless",
            Mode::Counts => "counts",
        }
    }
}

impl FromStr for Mode {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(Mode::Analytic),
            "noiseless" => Ok(Mode::Noiseless),
            "counts" => Ok(Mode::Counts),
            _ => Err("expected analytic, noiseless or counts"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub g_e: f64,
    pub g_p: f64,
    pub g_sigma_e: f64,
    pub g_sigma_p: f64,
    pub switch_efficiency: f64,
    pub visibility_e: f64,
    pub visibility_p: f64,
    pub switch_residual: SwitchResidual,
    pub mean_pairs: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub mode: Mode,
    pub sweep_g: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            g_e: 0.05,
            g_p: 0.05,
            g_sigma_e: 0.0,
            g_sigma_p: 0.0,
            switch_efficiency: 1.0,
            visibility_e: 1.0,
            visibility_p: 1.0,
            switch_residual: SwitchResidual::Inverted,
            mean_pairs: 1.0e5,
            n_bootstrap: 1000,
            seed: 0,
            mode: Mode::Analytic,
            sweep_g: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

impl ExperimentConfig {
    pub fn imperfections(&self) -> ImperfectionParams {
        ImperfectionParams {
            switch_efficiency: self.switch_efficiency,
            visibility_e: self.visibility_e,
            visibility_p: self.visibility_p,
            residual: self.switch_residual,
        }
    }

    /// Key/value pairs in canonical order, floats with 17 significant digits.
    /// Feeding the lines back through [`parse_config`] reproduces `self`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let sweep = self
            .sweep_g
            .iter()
            .map(|g| fmt_f64(*g))
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("g_E", fmt_f64(self.g_e)),
            ("g_P", fmt_f64(self.g_p)),
            ("g_sigma_E", fmt_f64(self.g_sigma_e)),
            ("g_sigma_P", fmt_f64(self.g_sigma_p)),
            ("switch_efficiency", fmt_f64(self.switch_efficiency)),
            ("visibility_E", fmt_f64(self.visibility_e)),
            ("visibility_P", fmt_f64(self.visibility_p)),
            ("switch_residual", self.switch_residual.name().to_string()),
            ("mean_pairs", fmt_f64(self.mean_pairs)),
            ("n_bootstrap", self.n_bootstrap.to_string()),
            ("seed", self.seed.to_string()),
            ("mode", self.mode.name().to_string()),
            ("sweep_g", sweep),
        ]
    }

    pub fn render(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigErrorKind> {
        let value = value.trim();
        match key {
            "g_E" => self.g_e = coupling(key, value)?,
            "g_P" => self.g_p = coupling(key, value)?,
            "g_sigma_E" => self.g_sigma_e = real_in(key, value, 0.0, f64::MAX, "finite, >= 0")?,
            "g_sigma_P" => self.g_sigma_p = real_in(key, value, 0.0, f64::MAX, "finite, >= 0")?,
            "switch_efficiency" => {
                self.switch_efficiency = real_in(key, value, 0.0, 1.0, "[0, 1]")?
            }
            "visibility_E" => self.visibility_e = real_in(key, value, 0.0, 1.0, "[0, 1]")?,
            "visibility_P" => self.visibility_p = real_in(key, value, 0.0, 1.0, "[0, 1]")?,
            "switch_residual" => {
                self.switch_residual = match value {
                    "in_phase" => SwitchResidual::InPhase,
                    "inverted" => SwitchResidual::Inverted,
                    _ => return Err(invalid(key, value, "expected in_phase or inverted")),
                }
            }
            "mean_pairs" => {
                let v = real(key, value)?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(out_of_range(key, value, "finite, > 0"));
                }
                self.mean_pairs = v;
            }
            "n_bootstrap" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| invalid(key, value, "expected a non-negative integer"))?;
                if !(MIN_BOOTSTRAP..=MAX_BOOTSTRAP).contains(&n) {
                    return Err(out_of_range(key, value, "[100, 10000000]"));
                }
                self.n_bootstrap = n;
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| invalid(key, value, "expected an unsigned 64-bit integer"))?
            }
            "mode" => self.mode = value.parse().map_err(|e| invalid(key, value, e))?,
            "sweep_g" => {
                let grid = value
                    .split(',')
                    .map(|v| coupling(key, v.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
                self.sweep_g = grid;
            }
            _ => {
                return Err(ConfigErrorKind::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

pub const MIN_BOOTSTRAP: usize = 100;
pub const MAX_BOOTSTRAP: usize = 10_000_000;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    /// Command-line override, counted from 1.
    Argument(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Argument(n) => write!(f, "override {n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigErrorKind {
    #[error("malformed line, expected `key = value`")]
    Malformed,
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("duplicate key `{key}`")]
    Duplicate { key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: &'static str,
    },
    #[error("value `{value}` for `{key}` out of range: {expected}")]
    OutOfRange {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("missing required key `{key}`")]
    Missing { key: String },
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{location}: {kind}")]
pub struct ConfigError {
    pub location: Location,
    pub kind: ConfigErrorKind,
}

impl ConfigErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigErrorKind::Malformed => "malformed",
            ConfigErrorKind::UnknownKey { .. } => "unknown_key",
            ConfigErrorKind::Duplicate { .. } => "duplicate",
            ConfigErrorKind::Invalid { .. } => "invalid",
            ConfigErrorKind::OutOfRange { .. } => "out_of_range",
            ConfigErrorKind::Missing { .. } => "missing",
        }
    }
}

impl ConfigError {
    pub fn argument(&self) -> Option<usize> {
        match self.location {
            Location::Argument(n) => Some(n),
            Location::Line(_) => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self.location {
            Location::Line(n) => Some(n),
            Location::Argument(_) => None,
        }
    }
}

fn invalid(key: &str, value: &str, reason: &'static str) -> ConfigErrorKind {
    ConfigErrorKind::Invalid {
        key: key.to_string(),
        value: value.to_string(),
        reason,
    }
}

fn out_of_range(key: &str, value: &str, expected: &'static str) -> ConfigErrorKind {
    ConfigErrorKind::OutOfRange {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

fn real(key: &str, value: &str) -> Result<f64, ConfigErrorKind> {
    value
        .parse::<f64>()
        .map_err(|_| invalid(key, value, "expected a real number"))
}

fn real_in(
    key: &str,
    value: &str,
    lo: f64,
    hi: f64,
    expected: &'static str,
) -> Result<f64, ConfigErrorKind> {
    let v = real(key, value)?;
    if v.is_finite() && v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(out_of_range(key, value, expected))
    }
}

fn coupling(key: &str, value: &str) -> Result<f64, ConfigErrorKind> {
    let v = real(key, value)?;
    if v > 0.0 && v <= std::f64::consts::FRAC_PI_2 {
        Ok(v)
    } else {
        Err(out_of_range(key, value, "(0, pi/2]"))
    }
}

/// Splits a document into `(line number, key, value)` triples, skipping
/// blank lines and `#` comments.
fn assignments(text: &str) -> impl Iterator<Item = Result<(usize, &str, &str), ConfigError>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        let n = i + 1;
        Some(match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
                Ok((n, k.trim(), v.trim()))
            }
            _ => Err(ConfigError {
                location: Location::Line(n),
                kind: ConfigErrorKind::Malformed,
            }),
        })
    })
}

/// Parses a configuration document; omitted keys keep their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen = std::collections::HashSet::new();
    for item in assignments(text) {
        let (n, key, value) = item?;
        let at = |kind| ConfigError {
            location: Location::Line(n),
            kind,
        };
        if !seen.insert(key.to_string()) {
            return Err(at(ConfigErrorKind::Duplicate {
                key: key.to_string(),
            }));
        }
        cfg.set(key, value).map_err(at)?;
    }
    Ok(cfg)
}

/// Applies `--key value` pairs (leading dashes already stripped) on top of
/// `cfg`. Later pairs win.
pub fn apply_overrides<'a, I>(cfg: &mut ExperimentConfig, pairs: I) -> Result<(), ConfigError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    for (i, (key, value)) in pairs.into_iter().enumerate() {
        cfg.set(key, value).map_err(|kind| ConfigError {
            location: Location::Argument(i + 1),
            kind,
        })?;
    }
    Ok(())
}

const VALUE_KEYS: [(&str, Cell); 8] = [
    ("N_IE_IP", Cell::Joint(ArmPair::new(Arm::Inner, Arm::Inner))),
    ("N_IE_OP", Cell::Joint(ArmPair::new(Arm::Inner, Arm::Outer))),
    ("N_OE_IP", Cell::Joint(ArmPair::new(Arm::Outer, Arm::Inner))),
    ("N_OE_OP", Cell::Joint(ArmPair::new(Arm::Outer, Arm::Outer))),
    ("N_IE", Cell::SingleE(Arm::Inner)),
    ("N_OE", Cell::SingleE(Arm::Outer)),
    ("N_IP", Cell::SingleP(Arm::Inner)),
    ("N_OP", Cell::SingleP(Arm::Outer)),
];

#[derive(Clone, Copy)]
enum Cell {
    Joint(ArmPair),
    SingleE(Arm),
    SingleP(Arm),
}

/// Parses a table of externally supplied weak values, e.g. measured data:
///
/// ```text
/// N_IE_IP = 0.245 +- 0.068
/// N_IE = 0.926
/// N_IP = 0.924
/// ```
///
/// `N_IE_IP`, `N_IE` and `N_IP` are required; the other cells are optional.
pub fn parse_values(text: &str) -> Result<WeakValueReport, ConfigError> {
    let mut report = WeakValueReport {
        joint: Default::default(),
        single_e: Default::default(),
        single_p: Default::default(),
    };
    let mut seen = std::collections::HashSet::new();
    for item in assignments(text) {
        let (n, key, value) = item?;
        let at = |kind| ConfigError {
            location: Location::Line(n),
            kind,
        };
        let cell = VALUE_KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, c)| *c)
            .ok_or_else(|| {
                at(ConfigErrorKind::UnknownKey {
                    key: key.to_string(),
                })
            })?;
        if !seen.insert(key) {
            return Err(at(ConfigErrorKind::Duplicate {
                key: key.to_string(),
            }));
        }
        let (v, s) = match value.split_once("+-") {
            Some((v, s)) => (v.trim(), Some(s.trim())),
            None => (value, None),
        };
        let parse = |x: &str| -> Result<f64, ConfigError> {
            match x.parse::<f64>() {
                Ok(f) if f.is_finite() => Ok(f),
                _ => Err(at(invalid(key, value, "expected a finite real number"))),
            }
        };
        let est = Estimate {
            value: parse(v)?,
            sigma: match s {
                Some(s) => {
                    let s = parse(s)?;
                    if s < 0.0 {
                        return Err(at(out_of_range(key, value, "sigma >= 0")));
                    }
                    s
                }
                None => 0.0,
            },
        };
        match cell {
            Cell::Joint(p) => report.joint.insert(p, est),
            Cell::SingleE(a) => report.single_e.insert(a, est),
            Cell::SingleP(a) => report.single_p.insert(a, est),
        };
    }
    for required in ["N_IE_IP", "N_IE", "N_IP"] {
        if !seen.contains(required) {
            return Err(ConfigError {
                location: Location::Line(text.lines().count()),
                kind: ConfigErrorKind::Missing {
                    key: required.to_string(),
                },
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), ExperimentConfig::default());
        assert_eq!(
            parse_config("# only a comment\n\n   \n").unwrap(),
            ExperimentConfig::default()
        );
        let d = ExperimentConfig::default();
        assert_eq!(d.imperfections(), ImperfectionParams::ideal());
        assert_eq!((d.g_e, d.mode, d.seed), (0.05, Mode::Analytic, 0));
    }

    #[test]
    fn measured_imperfection_point() {
        let cfg = parse_config(
            "switch_efficiency = 0.85\nvisibility_E = 0.95  # E IFM\nvisibility_P = 0.94\n",
        )
        .unwrap();
        assert_eq!(
            cfg.imperfections(),
            ImperfectionParams::measured_apparatus()
        );
    }

    #[test]
    fn out_of_range_names_key_and_line() {
        let err = parse_config("\nswitch_efficiency = 1.5").unwrap_err();
        assert_eq!(err.line(), Some(2));
        match &err.kind {
            ConfigErrorKind::OutOfRange { key, .. } => assert_eq!(key, "switch_efficiency"),
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("switch_efficiency"));
    }

    #[test]
    fn rejects_bad_documents() {
        let cases = [
            ("bogus = 1", 1),
            ("g_E = 0.1\nno equals sign", 2),
            ("g_E =", 1),
            ("= 3", 1),
            ("g_E = 0.1\ng_E = 0.2", 2),
            ("g_E = 0", 1),
            ("g_E = 2", 1),
            ("g_E = nan", 1),
            ("mean_pairs = 0", 1),
            ("mean_pairs = inf", 1),
            ("n_bootstrap = 10", 1),
            ("n_bootstrap = -4", 1),
            ("seed = -1", 1),
            ("mode = fast", 1),
            ("sweep_g = 0.1,,0.2", 1),
            ("g_sigma_E = -0.1", 1),
            ("switch_residual = maybe", 1),
        ];
        for (doc, line) in cases {
            let err = parse_config(doc).unwrap_err();
            assert_eq!(err.line(), Some(line), "{doc}");
        }
    }

    #[test]
    fn overrides_win_and_report_position() {
        let mut cfg = parse_config("g_E = 0.1").unwrap();
        apply_overrides(&mut cfg, [("g_E", "0.2"), ("mode", "counts")]).unwrap();
        assert_eq!((cfg.g_e, cfg.mode), (0.2, Mode::Counts));
        let err = apply_overrides(&mut cfg, [("seed", "3"), ("nope", "1")]).unwrap_err();
        assert_eq!(err.location, Location::Argument(2));
    }

    #[test]
    fn values_document() {
        let r = parse_values("N_IE_IP = 0.245 +- 0.068\nN_IE = 0.926\nN_IP = 0.924\n").unwrap();
        let ii = r.joint[&ArmPair::new(Arm::Inner, Arm::Inner)];
        assert_eq!((ii.value, ii.sigma), (0.245, 0.068));
        assert!(parse_values("N_IE = 0.9\nN_IP = 0.9").is_err());
        assert!(parse_values("N_IE_IP = x\nN_IE = 0.9\nN_IP = 0.9").is_err());
        assert!(parse_values("N_XX = 1").is_err());
        assert!(parse_values("N_IE_IP = 0.1 +- -1\nN_IE = 0.9\nN_IP = 0.9").is_err());
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        let g = 1e-6..std::f64::consts::FRAC_PI_2;
        (
            (g.clone(), g.clone(), 0.0..1.0f64, 0.0..1.0f64),
            (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, any::<bool>()),
            (
                1.0..1e9f64,
                MIN_BOOTSTRAP..100_000usize,
                any::<u64>(),
                0..3u8,
            ),
            prop::collection::vec(g, 1..6),
        )
            .prop_map(
                |((g_e, g_p, se, sp), (eps, ve, vp, inv), (mp, nb, seed, m), sweep)| {
                    ExperimentConfig {
                        g_e,
                        g_p,
                        g_sigma_e: se,
                        g_sigma_p: sp,
                        switch_efficiency: eps,
                        visibility_e: ve,
                        visibility_p: vp,
                        switch_residual: if inv {
                            SwitchResidual::Inverted
                        } else {
                            SwitchResidual::InPhase
                        },
                        mean_pairs: mp,
                        n_bootstrap: nb,
                        seed,
                        mode: [Mode::Analytic, Mode::Noiseless, Mode::Counts][m as usize],
                        sweep_g: sweep,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn render_round_trips(cfg in arb_config()) {
            prop_assert_eq!(parse_config(&cfg.render()).unwrap(), cfg);
        }

        #[test]
        fn parser_never_panics(doc in "\\PC*") {
            let _ = parse_config(&doc);
            let _ = parse_values(&doc);
        }
    }
}
