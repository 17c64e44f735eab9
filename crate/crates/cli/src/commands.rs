//! Command-line interface.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use tripassist::{run_experiment, Arm, City, CityConfig, ExperimentConfig};

use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "tripassist", version, about = "Cooperative design assistant for day-trip planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random city and write it as a POI file.
    GenCity(GenCityArgs),
    /// Run the assisted-vs-unassisted experiment and write the results table.
    Simulate(SimulateArgs),
    /// Serve interactive design sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenCityArgs {
    /// Number of points of interest.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "arm", multiple = false)]
pub struct ArmArgs {
    /// Only the assisted arm.
    #[arg(long, group = "arm")]
    pub assisted: bool,
    /// Only the unassisted arm.
    #[arg(long, group = "arm")]
    pub unassisted: bool,
    /// Both arms with paired seeds (the default).
    #[arg(long, group = "arm")]
    pub both: bool,
}

impl ArmArgs {
    pub fn arms(&self) -> Vec<Arm> {
        if self.assisted {
            vec![Arm::Assisted]
        } else if self.unassisted {
            vec![Arm::Unassisted]
        } else {
            vec![Arm::Assisted, Arm::Unassisted]
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON experiment config; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub arm: ArmArgs,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub pois: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Results table (CSV); stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace records (JSON lines).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn experiment_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.runs {
            config.n_runs = v;
        }
        if let Some(v) = self.iterations {
            config.n_iterations = v;
        }
        if let Some(v) = self.pois {
            config.n_pois = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.particles {
            config.assistant.n_particles = v;
        }
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if config.n_runs < 2 {
            return Err(CliError::Usage("an experiment needs at least 2 runs".into()));
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, env = "TRIPASSIST_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Directory for per-session event logs; sessions found there are
    /// restored at startup.
    #[arg(long)]
    pub event_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit code 2).
    Usage(String),
    /// Failure while running (exit code 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCity(args) => gen_city(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Serve(args) => serve(&args),
    }
}

fn gen_city(args: &GenCityArgs) -> Result<(), CliError> {
    let city = City::generate(args.n as usize, args.seed, &CityConfig::default()).map_err(runtime)?;
    match &args.out {
        Some(path) => city.save(path).map_err(runtime),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", city.to_json()).map_err(runtime)
        }
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = args.experiment_config()?;
    let result = run_experiment(&config, &args.arm.arms()).map_err(runtime)?;
    if let Some(path) = &args.trace {
        result.write_trace(path).map_err(runtime)?;
    }
    match &args.out {
        Some(path) => {
            result.write_csv(path).map_err(runtime)?;
            println!("{}", result.summary());
        }
        None => {
            print!("{}", result.to_csv());
            eprintln!("{}", result.summary());
        }
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    if let Some(dir) = &args.event_dir {
        server::prepare_event_dir(dir).map_err(runtime)?;
    }
    let state = Arc::new(AppState::new(args.event_dir.clone()));
    let restored = state.restore().map_err(runtime)?;
    if restored > 0 {
        eprintln!("restored {restored} session(s)");
    }
    let addr = SocketAddr::new(args.host, args.port);
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)?
        .block_on(server::serve(addr, state))
        .map_err(runtime)
}
