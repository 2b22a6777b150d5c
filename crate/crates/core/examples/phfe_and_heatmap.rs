//! PHFE, HFE and Top-k concentration for a family member, plus the
//! Jacobian-norm and Laplacian heatmaps written as PNG and CSV.
//!
//! `cargo run --example phfe_and_heatmap [out_dir]`

use std::path::PathBuf;

use mprobe::generators::{Builtin, FamilyVariant, Generator};
use mprobe::geometry::{self, LatentPoint};
use mprobe::imaging::{self, EnergyMode, Upsample};
use mprobe::stats;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "heatmaps".into()));
    std::fs::create_dir_all(&out)?;
    let basis = geometry::sample_orthonormal_basis(16, 8, 0)?;
    for variant in [FamilyVariant::Coupled, FamilyVariant::Decoupled] {
        let g = Builtin::family(variant, 16, 3)?;
        let z = LatentPoint::gaussian(3, 16);
        let image = g.evaluate(&z)?;
        let jac = geometry::fd_jacobian(&g, &z, &basis, 1e-3)?;
        let spectrum = geometry::eigendecompose(&geometry::metric_tensor(&jac)?)?;
        let p1 = geometry::principal_projection(&jac, &spectrum)?;
        let phfe = imaging::phfe(&p1, EnergyMode::Variance);
        let hfe = imaging::hfe(&image);
        println!(
            "{variant:?}: PHFE = {phfe:.4e} (MAV {:.4e})  HFE = {hfe:.4e}  η = {:.4e}  Top10-HF = {:.4}",
            imaging::phfe(&p1, EnergyMode::Mav),
            stats::transfer_efficiency(hfe, phfe, stats::RATIO_FLOOR),
            imaging::topk_hf_share(&image, 10.0, imaging::TOPK_FLOOR),
        );
        let name = format!("{variant:?}").to_lowercase();
        let maps = [
            ("jacobian", imaging::jacobian_norm_map(&jac, g.descriptor().output_shape)?),
            ("laplacian", imaging::laplacian_magnitude_map(&p1)?),
        ];
        for (kind, map) in maps {
            let rgb = imaging::render_heatmap(&map, (256, 256), Upsample::Nearest)?;
            imaging::write_png(&rgb, &out.join(format!("{name}_{kind}.png")))?;
            map.write_csv(&out.join(format!("{name}_{kind}.csv")))?;
        }
    }
    println!("heatmaps written to {}", out.display());
    Ok(())
}
