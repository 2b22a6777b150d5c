use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mprobe::campaign::{self, CampaignError, RunConfig, RECORDS_FILE};

/// Local geometry diagnostics for generative maps.
#[derive(Parser)]
#[command(name = "mprobe", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Run seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a geometric record for every (seed, condition) cell.
    Diagnose,
    /// Subsampled Spearman correlations between record metrics.
    Correlate(RecordsArg),
    /// Induced slerp trajectories and paired condition statistics.
    Trajectory,
    /// LC/PHFE detection AUROC with raw LC and LS baselines.
    Ood(RecordsArg),
    /// Jacobian-norm and Laplacian heatmaps for one cell.
    Heatmap {
        /// Cell seed.
        #[arg(long)]
        cell: u64,
        #[arg(long)]
        condition: String,
    },
    /// Medians, transfer efficiency and Δη against the reference condition.
    HfTransfer(RecordsArg),
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Args)]
struct RecordsArg {
    /// Records file; defaults to records.jsonl in the output directory.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print a configuration with every default filled in.
    Init {
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(global: &Global) -> Result<RunConfig, CampaignError> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &global.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(jobs) = global.jobs {
        config.jobs = jobs;
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summaries serialize"));
}

fn run(cli: Cli) -> Result<(), CampaignError> {
    if let Command::Config(ConfigCommand::Init { output }) = &cli.command {
        let text = RunConfig::default().to_toml();
        return match output {
            Some(path) => std::fs::write(path, text).map_err(|source| CampaignError::Io { path: path.clone(), source }),
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    let config = load_config(&cli.global)?;
    let records = |arg: &RecordsArg| arg.records.clone().unwrap_or_else(|| config.out_dir.join(RECORDS_FILE));
    match &cli.command {
        Command::Diagnose => print_json(&campaign::cmd_diagnose(&config)?),
        Command::Correlate(arg) => {
            for row in campaign::cmd_correlate(&config, &records(arg))? {
                let s = &row.summary;
                println!(
                    "{:<12} rho({}, {}) = {:+.3} ± {:.3}  (n={}, runs={})",
                    row.condition, row.x, row.y, s.rho_mean, s.rho_std, s.subsample_size, s.runs
                );
            }
        }
        Command::Trajectory => {
            let report = campaign::cmd_trajectory(&config)?;
            for p in &report.comparisons {
                let mc = p.monte_carlo.as_ref().expect("monte carlo attached");
                println!(
                    "{:<10} {} vs {}: R = {:.4} ± {:.4}  frac = {:.3}",
                    p.metric, p.condition_b, p.condition_a, mc.ratio_mean, mc.ratio_std, p.frac
                );
            }
        }
        Command::Ood(arg) => {
            let report = campaign::cmd_ood(&config, &records(arg))?;
            println!("AUROC LC/PHFE = {:.4}", report.lc_over_phfe.auroc);
            println!("AUROC LC      = {:.4}", report.auroc_lc);
            match report.auroc_ls {
                Some(a) => println!("AUROC LS      = {a:.4}"),
                None => println!("AUROC LS      = n/a"),
            }
        }
        Command::Heatmap { cell, condition } => {
            let out = campaign::cmd_heatmap(&config, *cell, condition)?;
            for path in [&out.jacobian_png, &out.jacobian_csv, &out.laplacian_png, &out.laplacian_csv] {
                println!("{}", path.display());
            }
        }
        Command::HfTransfer(arg) => {
            for row in campaign::cmd_hf_transfer(&config, &records(arg))? {
                println!(
                    "{:<12} PHFE {:.4e}  HFE {:.4e}  Top10 {:.4}  eta {:.4e}",
                    row.condition, row.median_phfe, row.median_hfe, row.median_top10, row.eta
                );
            }
        }
        Command::Config(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mprobe: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
