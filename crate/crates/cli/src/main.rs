use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irstrack::sim::Scheme;
use irstrack_cli::output::{Manifest, OutputDir};
use irstrack_cli::{commands, CliError, RunConfig, EXIT_NOT_CONVERGED};

/// Codebook-based user tracking for IRS-assisted mmWave links.
///
/// Config keys can also be set through `IRSTRACK_<SECTION>__<KEY>`
/// environment variables, e.g. `IRSTRACK_CAMPAIGN__TRAJECTORIES=3`.
#[derive(Debug, Parser)]
#[command(name = "irstrack", version)]
struct Cli {
    /// TOML run configuration; reference defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Comma-separated schemes: proposed, hierarchical, perfect, focusing.
    #[arg(long, global = true, value_delimiter = ',')]
    scheme: Option<Vec<String>>,
    /// Comma-separated transmit powers in dBm.
    #[arg(long = "ptx-sweep", global = true, value_delimiter = ',', allow_negative_numbers = true)]
    ptx_sweep: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the direction-estimation beam shape for every codebook size.
    DesignCodebook,
    /// Monte-Carlo direction-estimation error versus MSNR.
    Estimate,
    /// One trajectory: per-slot metrics, reconfiguration log and
    /// prediction-error series.
    Track,
    /// Monte-Carlo SNR, rate and loss probability versus transmit power.
    Campaign,
    /// Central-codeword patterns of the quadratic and optimized codebooks.
    BeamPattern,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::DesignCodebook => "design-codebook",
            Command::Estimate => "estimate",
            Command::Track => "track",
            Command::Campaign => "campaign",
            Command::BeamPattern => "beam-pattern",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &cli.scheme {
        for s in list {
            Scheme::parse(s)?;
        }
        cfg.campaign.schemes = list.clone();
    }
    if let Some(p) = &cli.ptx_sweep {
        cfg.campaign.ptx_dbm = p.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = resolve(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let mut out = OutputDir::create(&cli.out, Manifest::new(cli.command.name(), &cfg))?;
    out.config(&cfg)?;
    let code = match cli.command {
        Command::DesignCodebook => {
            if commands::design_codebook(&cfg, &mut out)? {
                0
            } else {
                log::warn!("a design stopped at its iteration cap");
                EXIT_NOT_CONVERGED
            }
        }
        Command::Estimate => {
            for p in commands::estimate(&cfg, &mut out)? {
                println!("{:16} {:6.1} dB  mse {:.4e}", p.scheme.as_str(), p.msnr_db, p.mse());
            }
            0
        }
        Command::Track => {
            commands::track(&cfg, &mut out)?;
            0
        }
        Command::Campaign => {
            let r = commands::campaign(&cfg, &mut out)?;
            for row in &r.rows {
                println!(
                    "{:12} M={:<3} {:6.1} dBm  snr {:7.2} dB  rate {:7.3}  loss {:.3}",
                    row.scheme.as_str(),
                    row.m_count,
                    row.ptx_dbm,
                    row.mean_snr_db,
                    row.mean_rate,
                    row.loss_prob
                );
            }
            0
        }
        Command::BeamPattern => {
            commands::beam_pattern(&cfg, &mut out)?;
            0
        }
    };
    for p in out.written() {
        println!("{}", p.display());
    }
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
