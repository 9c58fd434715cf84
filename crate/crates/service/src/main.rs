use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use irp_core::{generate, parse_instance, serialize_instance, GeneratorConfig, Instance, SearchMode};
use irp_service::{http, parse_reference_point, run_batch, Registry, RegistryConfig, RunRequest};

#[derive(Parser)]
#[command(name = "irp", version, about = "Bi-objective inventory routing with reference-point guided search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        customers: usize,
        #[arg(long, default_value_t = 30)]
        horizon: u32,
        #[arg(long, default_value_t = 150)]
        capacity: u32,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the rough front and print it as CSV.
    Approx {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand the whole front without a direction.
    Offline(RunArgs),
    /// Search toward a reference point.
    Guided(RunArgs),
    /// Start the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory for sessions and run logs.
        #[arg(long, default_value = "irp-data")]
        data: PathBuf,
        #[arg(long, default_value_t = irp_service::registry::DEFAULT_MAX_CONCURRENT_RUNS)]
        max_runs: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 50_000)]
    budget: u64,
    /// Evaluations before the cone-exit rule applies.
    #[arg(long)]
    warmup: Option<u64>,
    /// Reference point as "g1,g2".
    #[arg(long)]
    rp: Option<String>,
    #[arg(long, default_value = "")]
    rp_label: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    stride: Option<u64>,
    /// Run log file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the final archive as CSV.
    #[arg(long)]
    front: Option<PathBuf>,
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("in {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn batch(mode: SearchMode, args: RunArgs) -> Result<()> {
    let instance = read_instance(&args.instance)?;
    let reference_point = args
        .rp
        .as_deref()
        .map(|text| parse_reference_point(text, &args.rp_label))
        .transpose()?;
    let request = RunRequest {
        reference_point,
        cone_warmup_evals: args.warmup,
        seed: args.seed,
        trace_stride: args.stride,
        ..RunRequest::new(mode, args.budget)
    };
    let (config, run, log) = run_batch(&instance, &request)?;
    emit(args.out.as_deref(), &log.render())?;
    if let Some(path) = &args.front {
        emit(Some(path), &run.archive.to_csv())?;
    }
    eprintln!(
        "{:?}: {} evaluations, archive {}, {:?}",
        config.mode, run.evaluations, run.archive.len(), run.trace.termination_reason
    );
    if let Some((member, value)) = run.most_preferred(&config) {
        let o = member.solution.outcome;
        eprintln!("most preferred: g1={} g2={} achievement={value}", o.inventory, o.routing);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            seed,
            customers,
            horizon,
            capacity,
            out,
        } => {
            let instance = generate(&GeneratorConfig {
                n_customers: customers,
                horizon,
                vehicle_capacity: capacity,
                seed,
                ..GeneratorConfig::default()
            })?;
            emit(out.as_deref(), &serialize_instance(&instance))
        }
        Command::Approx { instance, out } => {
            let instance = read_instance(&instance)?;
            let front = irp_core::construct_initial_front(&instance)?;
            emit(out.as_deref(), &front.to_csv())
        }
        Command::Offline(args) => batch(SearchMode::Offline, args),
        Command::Guided(args) => {
            if args.rp.is_none() {
                bail!("guided runs need --rp \"g1,g2\"");
            }
            batch(SearchMode::Guided, args)
        }
        Command::Serve {
            port,
            host,
            data,
            max_runs,
        } => {
            let registry = Registry::open(RegistryConfig {
                max_concurrent_runs: max_runs,
                data_dir: Some(data),
            })?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(http::serve(Arc::new(registry), SocketAddr::new(host, port)))?;
            Ok(())
        }
    }
}
