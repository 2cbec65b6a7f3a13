//! Command execution and machine-readable reports.
//!
//! Every report embeds the resolved configuration. CSV output starts with the
//! configuration as `# key = value` comment lines (the same syntax as a config
//! file) followed by a fixed header per command. JSON output has the stable
//! top-level fields `command`, `config` and one payload field per command.
//! Floats are printed with 17 significant digits in both formats.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Map, Number, Value};

use crate::config::{fmt_f64, ExperimentConfig};
use crate::counting::{full_table_run, TableRun};
use crate::error::{Error, Result};
use crate::hardy::{
    analytic_report, analytic_weak_value, classical_inequality_check, Estimate, InequalityCheck,
    Occupation, WeakValueReport,
};
use crate::optics::{Arm, ArmPair};
use crate::weakmeas::extract_pair;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Simulated table in the configured mode.
    Table,
    /// Oracle table.
    Analytic,
    /// Noiseless extraction error over the `sweep_g` grid.
    Sweep,
    /// Classical inequality record.
    Inequality,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Table => "table",
            Command::Analytic => "analytic",
            Command::Sweep => "sweep",
            Command::Inequality => "inequality",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}`, expected csv or json")),
        }
    }
}

pub const TABLE_CSV_HEADER: &str = "quantity,arm_E,arm_P,value,sigma";
pub const SWEEP_CSV_HEADER: &str = "g,arm_pair,extracted,analytic,abs_error";
pub const INEQUALITY_CSV_HEADER: &str = "lhs,rhs,violated";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub g: f64,
    pub pair: ArmPair,
    pub extracted: f64,
    pub analytic: f64,
    pub abs_error: f64,
}

/// Noiseless joint extraction with `g_E = g_P = g` against the oracle.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let imp = cfg.imperfections();
    let mut rows = Vec::with_capacity(cfg.sweep_g.len() * 4);
    for &g in &cfg.sweep_g {
        for pair in ArmPair::all() {
            let analytic = analytic_weak_value(&Occupation::joint(pair), &imp)
                .map_err(|e| e.in_pair(pair))?
                .re;
            let extracted = extract_pair(pair, g, g, &imp)
                .map_err(|e| e.in_pair(pair))?
                .joint;
            rows.push(SweepRow {
                g,
                pair,
                extracted,
                analytic,
                abs_error: (extracted - analytic).abs(),
            });
        }
    }
    Ok(rows)
}

/// Output of [`execute`] before formatting.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Table {
        report: WeakValueReport,
        inequality: InequalityCheck,
    },
    Sweep(Vec<SweepRow>),
    Inequality(InequalityCheck),
}

/// Runs a command. `values`, when given, replaces the simulation as the
/// source of the `inequality` record.
pub fn run_command(
    command: Command,
    cfg: &ExperimentConfig,
    values: Option<&WeakValueReport>,
) -> Result<Payload> {
    Ok(match command {
        Command::Analytic => {
            let report = analytic_report(&cfg.imperfections())?;
            let inequality = classical_inequality_check(&report)?;
            Payload::Table { report, inequality }
        }
        Command::Table => {
            let TableRun {
                report, inequality, ..
            } = full_table_run(cfg)?;
            Payload::Table { report, inequality }
        }
        Command::Sweep => Payload::Sweep(sweep(cfg)?),
        Command::Inequality => {
            let check = match values {
                Some(v) => classical_inequality_check(v)?,
                None => full_table_run(cfg)?.inequality,
            };
            Payload::Inequality(check)
        }
    })
}

/// Runs a command and renders its report document.
pub fn execute(
    command: Command,
    cfg: &ExperimentConfig,
    format: OutputFormat,
    values: Option<&WeakValueReport>,
) -> Result<String> {
    let payload = run_command(command, cfg, values)?;
    render(command, cfg, &payload, format)
}

pub fn render(
    command: Command,
    cfg: &ExperimentConfig,
    payload: &Payload,
    format: OutputFormat,
) -> Result<String> {
    check_finite(payload)?;
    Ok(match format {
        OutputFormat::Csv => render_csv(cfg, payload),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&render_json(command, cfg, payload))
                .expect("serializing a Value cannot fail");
            s.push('\n');
            s
        }
    })
}

fn check_finite(payload: &Payload) -> Result<()> {
    let ok = match payload {
        Payload::Table { report, inequality } => {
            cells(report)
                .iter()
                .all(|c| c.3.value.is_finite() && c.3.sigma.is_finite())
                && inequality.lhs.is_finite()
                && inequality.rhs.is_finite()
        }
        Payload::Sweep(rows) => rows
            .iter()
            .all(|r| r.extracted.is_finite() && r.analytic.is_finite()),
        Payload::Inequality(c) => c.lhs.is_finite() && c.rhs.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite("report"))
    }
}

/// `(quantity, arm_E, arm_P, estimate)` rows in table order.
fn cells(report: &WeakValueReport) -> Vec<(&'static str, &'static str, &'static str, Estimate)> {
    let mut out = Vec::new();
    for (pair, est) in &report.joint {
        out.push(("joint", pair.arm_e.symbol(), pair.arm_p.symbol(), *est));
    }
    for (arm, est) in &report.single_e {
        out.push(("single", arm.symbol(), "", *est));
    }
    for (arm, est) in &report.single_p {
        out.push(("single", "", arm.symbol(), *est));
    }
    out
}

fn render_csv(cfg: &ExperimentConfig, payload: &Payload) -> String {
    let mut out = String::new();
    for (k, v) in cfg.entries() {
        let _ = writeln!(out, "# {k} = {v}");
    }
    match payload {
        Payload::Table { report, inequality } => {
            let _ = writeln!(out, "{TABLE_CSV_HEADER}");
            for (q, e, p, est) in cells(report) {
                let _ = writeln!(
                    out,
                    "{q},{e},{p},{},{}",
                    fmt_f64(est.value),
                    fmt_f64(est.sigma)
                );
            }
            let _ = writeln!(out, "inequality_lhs,,,{},", fmt_f64(inequality.lhs));
            let _ = writeln!(out, "inequality_rhs,,,{},", fmt_f64(inequality.rhs));
            let _ = writeln!(out, "inequality_violated,,,{},", inequality.violated);
        }
        Payload::Sweep(rows) => {
            let _ = writeln!(out, "{SWEEP_CSV_HEADER}");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{}{},{},{},{}",
                    fmt_f64(r.g),
                    r.pair.arm_e.symbol(),
                    r.pair.arm_p.symbol(),
                    fmt_f64(r.extracted),
                    fmt_f64(r.analytic),
                    fmt_f64(r.abs_error)
                );
            }
        }
        Payload::Inequality(c) => {
            let _ = writeln!(out, "{INEQUALITY_CSV_HEADER}");
            let _ = writeln!(out, "{},{},{}", fmt_f64(c.lhs), fmt_f64(c.rhs), c.violated);
        }
    }
    out
}

fn num(x: f64) -> Value {
    Value::Number(Number::from_str(&fmt_f64(x)).expect("finite floats format as JSON numbers"))
}

fn config_json(cfg: &ExperimentConfig) -> Value {
    let mut m = Map::new();
    m.insert("g_E".into(), num(cfg.g_e));
    m.insert("g_P".into(), num(cfg.g_p));
    m.insert("g_sigma_E".into(), num(cfg.g_sigma_e));
    m.insert("g_sigma_P".into(), num(cfg.g_sigma_p));
    m.insert("switch_efficiency".into(), num(cfg.switch_efficiency));
    m.insert("visibility_E".into(), num(cfg.visibility_e));
    m.insert("visibility_P".into(), num(cfg.visibility_p));
    m.insert("switch_residual".into(), json!(cfg.switch_residual.name()));
    m.insert("mean_pairs".into(), num(cfg.mean_pairs));
    m.insert("n_bootstrap".into(), json!(cfg.n_bootstrap));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("mode".into(), json!(cfg.mode.name()));
    m.insert(
        "sweep_g".into(),
        Value::Array(cfg.sweep_g.iter().map(|g| num(*g)).collect()),
    );
    Value::Object(m)
}

fn inequality_json(c: &InequalityCheck) -> Value {
    json!({ "lhs": num(c.lhs), "rhs": num(c.rhs), "violated": c.violated })
}

fn estimate_json(e: &Estimate) -> (Value, Value) {
    (num(e.value), num(e.sigma))
}

fn arm_json(arm: Arm) -> Value {
    json!(arm.symbol())
}

fn render_json(command: Command, cfg: &ExperimentConfig, payload: &Payload) -> Value {
    let mut doc = Map::new();
    doc.insert("command".into(), json!(command.name()));
    doc.insert("config".into(), config_json(cfg));
    match payload {
        Payload::Table { report, inequality } => {
            let joint: Vec<Value> = report
                .joint
                .iter()
                .map(|(pair, e)| {
                    let (v, s) = estimate_json(e);
                    json!({ "arm_E": arm_json(pair.arm_e), "arm_P": arm_json(pair.arm_p), "value": v, "sigma": s })
                })
                .collect();
            let single = |m: &std::collections::BTreeMap<Arm, Estimate>| -> Vec<Value> {
                m.iter()
                    .map(|(arm, e)| {
                        let (v, s) = estimate_json(e);
                        json!({ "arm": arm_json(*arm), "value": v, "sigma": s })
                    })
                    .collect()
            };
            doc.insert(
                "table".into(),
                json!({
                    "joint": joint,
                    "single_E": single(&report.single_e),
                    "single_P": single(&report.single_p),
                }),
            );
            doc.insert("inequality".into(), inequality_json(inequality));
        }
        Payload::Sweep(rows) => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "g": num(r.g),
                        "arm_pair": format!("{}{}", r.pair.arm_e.symbol(), r.pair.arm_p.symbol()),
                        "extracted": num(r.extracted),
                        "analytic": num(r.analytic),
                        "abs_error": num(r.abs_error),
                    })
                })
                .collect();
            doc.insert("rows".into(), Value::Array(rows));
        }
        Payload::Inequality(c) => {
            doc.insert("inequality".into(), inequality_json(c));
        }
    }
    Value::Object(doc)
}
