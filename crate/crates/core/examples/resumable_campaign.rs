//! A diagnose campaign that is interrupted and resumed, followed by the
//! correlation, detection and high-frequency summaries over its records.
//!
//! `cargo run --release --example resumable_campaign [out_dir]`

use std::fs;
use std::path::PathBuf;

use mprobe::campaign::{self, ConditionConfig, RunConfig, RECORDS_FILE};
use mprobe::generators::BuiltinKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "campaign-out".into()));
    let mut config = RunConfig::default();
    config.out_dir = out.clone();
    config.seeds.count = 60;
    config.conditions = vec![
        ConditionConfig::builtin("normal", BuiltinKind::CoupledFamily),
        ConditionConfig::builtin("ood", BuiltinKind::DecoupledFamily),
    ];
    let _ = fs::remove_dir_all(&out);

    let first = campaign::cmd_diagnose(&config)?;
    let records = out.join(RECORDS_FILE);
    let full = fs::read(&records)?;

    // Simulate a crash: keep a third of the file, cutting through a line.
    fs::write(&records, &full[..full.len() / 3])?;
    let resumed = campaign::cmd_diagnose(&config)?;
    println!(
        "first run computed {} cells; after the crash {} were kept and {} recomputed; identical = {}",
        first.computed,
        resumed.resumed,
        resumed.computed,
        fs::read(&records)? == full
    );

    for row in campaign::cmd_correlate(&config, &records)? {
        println!("{:<7} rho({}, {}) = {:+.3} ± {:.3}", row.condition, row.x, row.y, row.summary.rho_mean, row.summary.rho_std);
    }
    let ood = campaign::cmd_ood(&config, &records)?;
    println!("AUROC LC/PHFE = {:.3}, LC = {:.3}, LS = {:?}", ood.lc_over_phfe.auroc, ood.auroc_lc, ood.auroc_ls);
    for row in campaign::cmd_hf_transfer(&config, &records)? {
        println!("{:<7} η = {:.4e}  Δη = {:?}", row.condition, row.eta, row.delta_eta);
    }
    Ok(())
}
