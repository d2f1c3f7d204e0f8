//! Experiment runner for the discounted-loss Sarmanov model.
//!
//! Subcommands:
//!   run <spec.toml>       execute the experiment, write curve.csv / summary.json
//!   validate <spec.toml>  print the model validation report as JSON
//!   version               print the library version
//!
//! Flags (override the corresponding spec fields):
//!   `--seed <u64>  --workers <usize>  --out-dir <path>`
//!
//! Exit codes: 0 success, 1 usage/IO, 2 invalid model or spec,
//! 3 theorem-hypothesis violation, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use sarmanov_ruin::error::Error;
use sarmanov_ruin::experiment::{self, ExperimentSpec};

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::InvalidModel(_) => 2,
        Error::Hypothesis(_) => 3,
        Error::Numerical(_) => 4,
    }
}

struct Cli {
    subcommand: String,
    spec_path: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    out_dir: Option<PathBuf>,
}

fn usage() -> &'static str {
    "usage: ruinsim <run|validate|version> [spec.toml] [--seed N] [--workers N] [--out-dir DIR]"
}

fn parse_args(args: &[String]) -> Result<Cli, String> {
    let mut cli = Cli {
        subcommand: String::new(),
        spec_path: None,
        seed: None,
        workers: None,
        out_dir: None,
    };
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--seed" => {
                i += 1;
                let v = args.get(i).ok_or("--seed requires a value")?;
                cli.seed = Some(v.parse().map_err(|_| "--seed requires a u64")?);
            }
            "--workers" => {
                i += 1;
                let v = args.get(i).ok_or("--workers requires a value")?;
                cli.workers = Some(v.parse().map_err(|_| "--workers requires an integer")?);
            }
            "--out-dir" => {
                i += 1;
                let v = args.get(i).ok_or("--out-dir requires a path")?;
                cli.out_dir = Some(PathBuf::from(v));
            }
            arg if cli.subcommand.is_empty() => cli.subcommand = arg.to_string(),
            arg if cli.spec_path.is_none() => cli.spec_path = Some(PathBuf::from(arg)),
            arg => return Err(format!("unexpected argument {arg}")),
        }
        i += 1;
    }
    if cli.subcommand.is_empty() {
        return Err("missing subcommand".into());
    }
    Ok(cli)
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec, ExitCode> {
    let path = cli.spec_path.as_ref().ok_or_else(|| {
        eprintln!("error: missing spec file\n{}", usage());
        ExitCode::from(1)
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    let mut spec = ExperimentSpec::from_toml(&text).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(workers) = cli.workers {
        spec.workers = workers;
    }
    if let Some(dir) = &cli.out_dir {
        spec.out_dir = Some(dir.clone());
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(&args) {
        Ok(cli) => cli,
        Err(msg) => {
            eprintln!("error: {msg}\n{}", usage());
            return ExitCode::from(1);
        }
    };

    match cli.subcommand.as_str() {
        "version" => {
            println!("ruinsim {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        "validate" => {
            let spec = match load_spec(&cli) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match spec.model.validate() {
                Ok(report) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&report).expect("report serializes")
                    );
                    if report.is_valid() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!(
                            "error: invalid model: {}",
                            report.failure_message().unwrap_or_default()
                        );
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
        "run" => {
            let spec = match load_spec(&cli) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let out_dir = match spec.out_dir.clone() {
                Some(d) => d,
                None => {
                    eprintln!(
                        "error: no output directory (set out_dir in the spec or pass --out-dir)"
                    );
                    return ExitCode::from(1);
                }
            };
            match experiment::run(&spec, &out_dir) {
                Ok(output) => {
                    println!("wrote {}", output.summary_path.display());
                    if let Some(p) = output.curve_path {
                        println!("wrote {}", p.display());
                    }
                    if let Some(p) = output.samples_path {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
        other => {
            eprintln!("error: unknown subcommand {other}\n{}", usage());
            ExitCode::from(1)
        }
    }
}
