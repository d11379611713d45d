use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use covertfas::config::Config;
use covertfas::sweep::{run_eval, run_sweep, run_validate, write_sweep_csv};
use covertfas::Error;

#[derive(Parser)]
#[command(name = "covertfas", version, about = "Covert-link metrics for fluid antenna receivers and wardens")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in parameter set (paper-sec4, paper-sec4-cop); the config file overrides it
    #[arg(long)]
    preset: Option<String>,
    /// Master seed; defaults to qmc.seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (standard output when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every metric at one operating point and print JSON
    Eval(Common),
    /// Run the [sweep] section and write CSV
    Sweep(Common),
    /// Compare closed forms with the Monte Carlo oracle
    Validate(Common),
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(c: &Common) -> Result<(Config, u64), Error> {
    if c.config.is_none() && c.preset.is_none() {
        return Err(Error::Config("either --config or --preset is required".into()));
    }
    let cfg = Config::load(c.config.as_deref().map(Path::new), c.preset.as_deref())?;
    let seed = c.seed.unwrap_or(cfg.qmc.seed);
    Ok((cfg, seed))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Eval(c) => {
            let (cfg, seed) = load(&c)?;
            let rec = run_eval(&cfg, seed)?;
            let json = serde_json::to_string_pretty(&rec).expect("record serialises");
            let mut out = open_out(&c.out)?;
            writeln!(out, "{json}").map_err(|source| Error::Io { path: "<out>".into(), source })?;
        }
        Command::Sweep(c) => {
            let (cfg, seed) = load(&c)?;
            let rows = run_sweep(&cfg, seed)?;
            write_sweep_csv(&rows, open_out(&c.out)?)?;
        }
        Command::Validate(c) => {
            let (cfg, seed) = load(&c)?;
            let report = run_validate(&cfg, seed)?;
            if let Some(path) = &c.out {
                report.write_csv(open_out(&Some(path.clone()))?)?;
            }
            print!("{}", report.summary());
            if !report.all_pass() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("COVERTFAS_THREADS") {
        match v.parse::<usize>() {
            Ok(n) => {
                // 0 leaves rayon's automatic choice
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => eprintln!("warning: ignoring COVERTFAS_THREADS={v}"),
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
