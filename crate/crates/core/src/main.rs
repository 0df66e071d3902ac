use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rcm_lab::cli::{self, Entry, EXIT_CONFIG, EXIT_RUNTIME};
use rcm_lab::error::Error;

#[derive(Parser)]
#[command(name = "rcm", version, about = "Random conductance model laboratory")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Allow writing into an existing output directory.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an environment and store it.
    GenEnv,
    /// Heat kernel columns from one source.
    Heat,
    /// Sample random walk paths.
    Walk,
    /// Run a verification experiment.
    Verify { experiment: String },
    /// Summarize a finished experiment directory.
    Report { dir: PathBuf },
}

fn run(args: Args) -> Result<u8, Error> {
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(rcm_lab::error::Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Solver(e.to_string()))?;
    }
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut entries = cli::parse_entries(&text)?;
    let (name, experiment) = match &args.command {
        Command::GenEnv => ("gen-env", None),
        Command::Heat => ("heat", None),
        Command::Walk => ("walk", None),
        Command::Verify { experiment } => ("verify", Some(experiment.clone())),
        Command::Report { .. } => ("report", None),
    };
    let mut set = |key: &str, value: String, override_file: bool| -> Result<(), Error> {
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) if override_file => e.value = value,
            Some(e) if e.value != value => {
                return Err(Error::Config(format!(
                    "line {}: key `{key}`: `{}` conflicts with `{value}` on the command line",
                    e.line, e.value
                )))
            }
            Some(_) => {}
            None => entries.push(Entry {
                line: 0,
                key: key.to_string(),
                value,
            }),
        }
        Ok(())
    };
    set("command", name.to_string(), false)?;
    if let Some(x) = experiment {
        set("experiment", x, false)?;
    }
    if let Some(s) = args.seed {
        set("seed", s.to_string(), true)?;
    }
    if let Some(o) = &args.out {
        set("out", o.display().to_string(), true)?;
    }
    let cfg = cli::resolve(entries)?;

    let dir = match &args.command {
        Command::Report { dir } => dir.clone(),
        _ => {
            let dir = cfg
                .out
                .clone()
                .ok_or_else(|| Error::Config("missing required key `out` (or --out)".into()))?;
            cli::prepare_output(&dir, args.force)?;
            std::fs::write(dir.join("config.txt"), cfg.echo_text())?;
            dir
        }
    };
    let (status, summary) = cli::execute(&cfg, &dir)?;
    println!("{summary}");
    Ok(status)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(args) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            })
        }
    }
}
