use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hardy_weak::config::{
    apply_overrides, parse_config, parse_values, ConfigError, ExperimentConfig,
};
use hardy_weak::report::{execute, Command, OutputFormat};

const EXIT_CONFIG: u8 = 1;
const EXIT_PIPELINE: u8 = 2;

/// Joint weak measurements on a simulated Hardy interferometer pair.
///
/// Any config key can be overridden after the subcommand as `--key value` or
/// `--key=value`. Overrides win over the config file.
#[derive(Parser, Debug)]
#[command(
    name = "hardy-weak",
    version,
    after_help = "Config overrides: --<key> <value> or --<key>=<value>, e.g. --g_E 0.1 --mode counts"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulated weak-value table in the configured mode.
    Table(Common),
    /// Oracle weak-value table.
    Analytic(Common),
    /// Extraction error over the `sweep_g` grid.
    Sweep(Common),
    /// Classical inequality check, from `--values` or from a simulated table.
    Inequality(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Config file (`key = value` per line).
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, short, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Measured weak values (`N_IE_IP = 0.245 +- 0.04` per line).
    #[arg(long)]
    values: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

/// Flags owned by clap; every other `--key` is a config override.
const OWN_FLAGS: &[(&str, bool)] = &[
    ("--config", true),
    ("-c", true),
    ("--format", true),
    ("-f", true),
    ("--out", true),
    ("-o", true),
    ("--values", true),
    ("--threads", true),
    ("--help", false),
    ("-h", false),
    ("--version", false),
    ("-V", false),
];

/// Separates config overrides from the arguments clap understands.
fn partition_args(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut own = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    // program name and subcommand
    own.extend(it.by_ref().take(2));
    while let Some(tok) = it.next() {
        let name = tok.split_once('=').map_or(tok.as_str(), |(k, _)| k);
        match OWN_FLAGS.iter().find(|(f, _)| *f == name) {
            Some((_, takes_value)) => {
                let inline = tok.contains('=');
                own.push(tok);
                if *takes_value && !inline {
                    own.extend(it.next());
                }
            }
            None => {
                let inline = tok.contains('=') || !tok.starts_with("--");
                overrides.push(tok);
                if !inline {
                    overrides.extend(it.next());
                }
            }
        }
    }
    (own, overrides)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

struct Failure {
    exit: u8,
    body: serde_json::Value,
}

impl Failure {
    fn config(err: &ConfigError, source: &str) -> Self {
        Failure {
            exit: EXIT_CONFIG,
            body: json!({
                "kind": err.kind.code(),
                "message": err.to_string(),
                "source": source,
                "line": err.line(),
                "argument": err.argument(),
            }),
        }
    }

    fn usage(message: String) -> Self {
        Failure {
            exit: EXIT_CONFIG,
            body: json!({ "kind": "usage", "message": message }),
        }
    }

    fn io(path: &std::path::Path, err: std::io::Error, exit: u8) -> Self {
        Failure {
            exit,
            body: json!({
                "kind": "io",
                "message": format!("{}: {err}", path.display()),
            }),
        }
    }

    fn pipeline(err: &hardy_weak::Error) -> Self {
        Failure {
            exit: EXIT_PIPELINE,
            body: json!({ "kind": err.code(), "message": err.to_string() }),
        }
    }
}

/// Splits `--key value` / `--key=value` tokens into pairs.
fn split_overrides(tokens: &[String]) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let Some(body) = tok.strip_prefix("--") else {
            return Err(Failure::usage(format!(
                "unexpected argument `{tok}`, overrides look like `--key value`"
            )));
        };
        if let Some((k, v)) = body.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| Failure::usage(format!("override `{tok}` has no value")))?;
            out.push((body.to_string(), v.clone()));
        }
    }
    Ok(out)
}

fn resolve_config(args: &Common, overrides: &[String]) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e, EXIT_CONFIG))?;
            parse_config(&text).map_err(|e| Failure::config(&e, &path.display().to_string()))?
        }
        None => ExperimentConfig::default(),
    };
    let pairs = split_overrides(overrides)?;
    apply_overrides(
        &mut cfg,
        pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())),
    )
    .map_err(|e| Failure::config(&e, "command line"))?;
    Ok(cfg)
}

fn run(cli: Cli, overrides: &[String]) -> Result<(), Failure> {
    let (command, args) = match cli.command {
        Cmd::Table(a) => (Command::Table, a),
        Cmd::Analytic(a) => (Command::Analytic, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Inequality(a) => (Command::Inequality, a),
    };
    let cfg = resolve_config(&args, overrides)?;
    let values = match &args.values {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e, EXIT_CONFIG))?;
            Some(
                parse_values(&text)
                    .map_err(|e| Failure::config(&e, &path.display().to_string()))?,
            )
        }
        None => None,
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let format = match args.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let doc = execute(command, &cfg, format, values.as_ref()).map_err(|e| Failure::pipeline(&e))?;
    match &args.out {
        Some(path) => fs::write(path, doc).map_err(|e| Failure::io(path, e, EXIT_PIPELINE))?,
        None => print!("{doc}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let (own, overrides) = partition_args(std::env::args().collect());
    let cli = match Cli::try_parse_from(own) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            let f = Failure::usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{rendered}");
            eprintln!("{}", json!({ "error": f.body }));
            return ExitCode::from(f.exit);
        }
    };
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.body }));
            ExitCode::from(f.exit)
        }
    }
}
