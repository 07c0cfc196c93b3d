use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use otfs_lab::harness::{run_experiment, write_csv, SimConfig};
use otfs_lab::layout::{LayoutSummary, Scheme};
use otfs_lab::{GridDims, LayoutParams};

#[derive(Parser)]
#[command(name = "otfs-lab", version, about = "Delay-Doppler link simulation with embedded pilot estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo BER experiment and write one CSV row per SNR point.
    Run {
        /// Flat `key = value` configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `seed` key of the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print pilot and guard overhead of frame layouts.
    Layout(LayoutArgs),
}

#[derive(Args)]
struct LayoutArgs {
    /// Scheme name, or `all`.
    #[arg(long, default_value = "all")]
    scheme: String,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 512)]
    m: usize,
    #[arg(long, default_value_t = 15e3)]
    delta_f: f64,
    #[arg(long, default_value_t = 20)]
    l_tau: usize,
    #[arg(long, default_value_t = 4)]
    k_nu: usize,
    /// Extra Doppler guard; defaults to 2 for the reduced-guard and downlink
    /// schemes and 0 elsewhere.
    #[arg(long)]
    k_hat: Option<usize>,
    /// Antennas or users for the multi-stream schemes.
    #[arg(long, default_value_t = 3)]
    streams: usize,
}

fn layout_table(args: &LayoutArgs) -> anyhow::Result<()> {
    let dims = GridDims::new(args.n, args.m, args.delta_f)?;
    let schemes: Vec<Scheme> = if args.scheme.eq_ignore_ascii_case("all") {
        Scheme::ALL.to_vec()
    } else {
        vec![args.scheme.parse()?]
    };
    println!("{}  formula", LayoutSummary::HEADER);
    for scheme in schemes {
        let k_hat = match scheme {
            Scheme::SisoInteger | Scheme::SisoFracFull => 0,
            Scheme::SisoFracReduced | Scheme::MultiUserDownlink => args.k_hat.unwrap_or(2),
            Scheme::Mimo | Scheme::MultiUserUplink => args.k_hat.unwrap_or(0),
        };
        let streams = if scheme.is_siso() { 1 } else { args.streams };
        let layout = LayoutParams::new(scheme, dims, args.l_tau, args.k_nu)
            .k_hat(k_hat)
            .streams(streams)
            .build()
            .with_context(|| format!("building {scheme} layout"))?;
        println!("{}  {:>7}", layout.summary(), layout.table_overhead());
    }
    Ok(())
}

fn run(config: &PathBuf, seed: Option<u64>, out: &PathBuf) -> anyhow::Result<()> {
    let mut cfg = SimConfig::load(config).with_context(|| format!("reading {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.prepare().context("invalid configuration")?;
    let rows = run_experiment(&cfg)?;
    if rows.is_empty() {
        bail!("experiment produced no rows");
    }
    write_csv(&rows, out).with_context(|| format!("writing {}", out.display()))?;
    println!("{:>8} {:>8} {:>10} {:>12} {:>8} {:>8}", "snr_d", "snr_p", "bits", "ber", "miss", "time_s");
    for r in &rows {
        println!(
            "{:>8.2} {:>8.2} {:>10} {:>12.4e} {:>8.4} {:>8.2}",
            r.snr_d_db, r.snr_p_db, r.bits, r.ber, r.miss_rate, r.wall_time_s
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, seed, out } => run(config, *seed, out),
        Command::Layout(args) => layout_table(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
