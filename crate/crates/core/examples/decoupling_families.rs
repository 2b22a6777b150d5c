//! Coupled vs decoupled synthetic families: LC tracks PHFE in one and not
//! the other, and the LC/PHFE ratio separates them while raw LS does not.
//!
//! `cargo run --release --example decoupling_families [seeds]`

use mprobe::generators::{make_builtin, BuiltinKind, BuiltinParams};
use mprobe::geometry::{diagnose_point, sample_orthonormal_basis, DiagnosticSettings, LatentPoint};
use mprobe::stats::{self, Label};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let latent_dim = 16;
    let basis = sample_orthonormal_basis(latent_dim, 8, 0)?;
    let settings = DiagnosticSettings::default();

    let mut scores = Vec::new();
    let mut ls_scores = Vec::new();
    let mut labels = Vec::new();
    for (kind, label) in [(BuiltinKind::CoupledFamily, Label::Normal), (BuiltinKind::DecoupledFamily, Label::Ood)] {
        let (mut lc, mut phfe, mut knob) = (Vec::new(), Vec::new(), Vec::new());
        for seed in 0..n {
            let g = make_builtin(kind, &BuiltinParams::default(), seed)?;
            let z = LatentPoint::gaussian(seed, latent_dim);
            let d = diagnose_point(&g, &basis, &z, seed, &settings)?;
            knob.push(g.family_knob().unwrap_or_default());
            scores.push(stats::ood_score(d.lc, d.phfe, stats::RATIO_FLOOR));
            ls_scores.push(d.ls.unwrap_or(f64::NEG_INFINITY));
            labels.push(label);
            lc.push(d.lc);
            phfe.push(d.phfe);
        }
        println!(
            "{kind:?}: rho(LC, PHFE) = {:+.3}  rho(knob, PHFE) = {:+.3}  rho(knob, LC) = {:+.3}",
            stats::spearman(&lc, &phfe)?,
            stats::spearman(&knob, &phfe)?,
            stats::spearman(&knob, &lc)?,
        );
    }
    let positive: Vec<bool> = labels.iter().map(|l| *l == Label::Ood).collect();
    println!("AUROC(LC/PHFE) = {:.3}", stats::auroc(&scores, &positive)?);
    println!("AUROC(LS)      = {:.3}", stats::auroc(&ls_scores, &positive)?);
    Ok(())
}
