use clap::{Parser, Subcommand};
use psc_rsma::alloc::check_feasible;
use psc_rsma::compress::{
    accuracy, comm_overhead, comp_overhead, compress, reconstruct, serialize, CompressOptions,
    MessageRole, TieRule,
};
use psc_rsma::harness::{run_sweep_with, ExperimentConfig, HarnessError, ScenarioGenerator};
use psc_rsma::kg::{build_kg, parse_triples, SampleDataset};
use psc_rsma::phy::{read_channels_csv, write_channels_csv};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "psc-rsma", version, about = "Semantic compression and energy-efficient allocation over a rate-splitting downlink")]
struct Cli {
    /// Print the default configuration and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per point, policy and trial.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Replay channel vectors from a CSV file in every trial.
        #[arg(long)]
        channels: Option<PathBuf>,
    },
    /// Report constraint slacks at the reference allocation.
    Feasibility {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        channels: Option<PathBuf>,
    },
    /// Compress one message against a sample file and print the plan.
    Compress {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        message: PathBuf,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        /// Coding parameters are taken from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lossy_ties: bool,
    },
    /// Write the channel vectors of one trial as CSV.
    Channels {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Infeasible(String),
    Other(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Targets { .. } => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut config = match path {
        Some(p) => ExperimentConfig::parse(&read(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn generator(config: &ExperimentConfig, channels: Option<&Path>) -> Result<ScenarioGenerator, Failure> {
    let g = ScenarioGenerator::new(config)?;
    match channels {
        Some(p) => {
            let h = read_channels_csv(File::open(p).map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?)
                .map_err(|e| Failure::Other(e.to_string()))?;
            Ok(g.with_channels(h)?)
        }
        None => Ok(g),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.print_config {
        print!("{}", ExperimentConfig::default().to_text());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::Config("no command given; see --help".into()));
    };
    match command {
        Command::Sweep {
            config,
            out,
            seed,
            channels,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let result = run_sweep_with(&generator(&config, channels.as_deref())?)?;
            let file = File::create(&out).map_err(|e| Failure::Other(format!("{}: {e}", out.display())))?;
            result.write_csv(BufWriter::new(file))?;
            let feasible = result.rows.iter().filter(|r| r.allocation.is_some()).count();
            eprintln!("{} rows, {} feasible, written to {}", result.rows.len(), feasible, out.display());
            if result.all_infeasible() {
                return Err(Failure::Infeasible("every trial is infeasible".into()));
            }
        }
        Command::Feasibility {
            config,
            trial,
            seed,
            channels,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let scenario = generator(&config, channels.as_deref())?.scenario(trial)?;
            let report = check_feasible(&scenario);
            for (kind, slack) in &report.slacks {
                println!("{kind:<32} {slack:>12.4e}");
            }
            if !report.feasible() {
                let (kind, slack) = report.most_violated().expect("infeasible report has a violation");
                return Err(Failure::Infeasible(format!("infeasible: {kind} (slack {slack:.4e})")));
            }
            println!("feasible");
        }
        Command::Compress {
            dataset,
            message,
            rounds,
            config,
            lossy_ties,
        } => {
            let config = load_config(config.as_deref(), None)?;
            let coding = config.coding().map_err(|e| Failure::Config(e.to_string()))?;
            let ds = SampleDataset::parse(&read(&dataset)?).map_err(|e| Failure::Other(format!("{}: {e}", dataset.display())))?;
            let kg = build_kg(&ds).map_err(|e| Failure::Other(e.to_string()))?;
            let msg = parse_triples(&read(&message)?, kg.symbols()).map_err(|e| Failure::Other(format!("{}: {e}", message.display())))?;
            let rule = if lossy_ties || config.lossy_ties {
                TieRule::LowestRelation
            } else {
                TieRule::Strict
            };
            let opts = CompressOptions {
                max_rounds: rounds,
                tie_rule: rule,
            };
            let other = |e: psc_rsma::compress::CompressError| Failure::Other(e.to_string());
            let plan = compress(&kg, MessageRole::Shared, &msg, &opts).map_err(other)?;
            for (i, round) in plan.rounds.iter().enumerate() {
                println!("round {}: {} matrices, {} degenerate", i + 1, round.matrices_built, round.degenerated.len());
                for d in &round.degenerated {
                    println!("  {}", kg.symbols().display(&d.triple));
                }
            }
            let payload = serialize(&plan, &msg).map_err(other)?;
            let bytes = payload.to_bytes(&coding).map_err(other)?;
            let recovered = reconstruct(&kg, &payload, rule).map_err(other)?;
            println!("triples       {}", msg.len());
            println!("omega         {}", plan.scr);
            if !msg.is_empty() {
                println!("comm_bits     {}", comm_overhead(plan.scr, msg.len(), &coding).map_err(other)?);
                println!("accuracy      {}", accuracy(&msg, &recovered).map_err(other)?);
            }
            println!("comp_cycles   {}", comp_overhead(&plan, &kg, &coding));
            println!("payload_bytes {}", bytes.len());
        }
        Command::Channels {
            config,
            trial,
            seed,
            out,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let scenario = generator(&config, None)?.scenario(trial)?;
            let file = File::create(&out).map_err(|e| Failure::Other(format!("{}: {e}", out.display())))?;
            write_channels_csv(scenario.channels().channels(), BufWriter::new(file))
                .map_err(|e| Failure::Other(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("{m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
