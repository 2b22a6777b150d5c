use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, CampaignError, ConditionSource, RunConfig};
use crate::geometry::{principal_projection, sample_orthonormal_basis, LatentPoint, Probe};
use crate::imaging::{self, HeatMap, Upsample};
use crate::seeding::{derive_seed, stream};

/// Rendered heatmaps are upsampled so their longer side is at least this.
const MIN_RENDER_SIDE: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapOutputs {
    pub jacobian_png: PathBuf,
    pub jacobian_csv: PathBuf,
    pub laplacian_png: PathBuf,
    pub laplacian_csv: PathBuf,
    pub jacobian: HeatMap,
    pub laplacian: HeatMap,
}

/// `heatmap` subcommand: the pixel-wise Jacobian norm map and `|∇²P₁|` for
/// one `(seed, condition)` cell, each as a PNG and a raw CSV of normalized
/// values. Uses the same basis and latent as `diagnose` for that cell.
pub fn cmd_heatmap(config: &RunConfig, seed: u64, condition: &str) -> Result<HeatmapOutputs, CampaignError> {
    config.validate()?;
    let cond = config
        .condition(condition)
        .ok_or_else(|| CampaignError::Config(format!("unknown condition {condition:?}")))?;
    let generator = ConditionSource::resolve(cond)?.generator(seed)?;
    let descriptor = generator.descriptor();
    let basis = sample_orthonormal_basis(descriptor.latent_dim, config.probe.subspace_dim, derive_seed(config.seed, stream::BASIS))
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    let settings = config.settings();
    let probe = Probe::new(generator.as_ref(), &basis)
        .with_fd(settings.fd)
        .with_degeneracy_tolerance(settings.degeneracy_tolerance);
    let z = LatentPoint::gaussian(seed, descriptor.latent_dim);
    let gen_err = |e: crate::geometry::GeometryError| CampaignError::Generator(e.to_string());
    let (j, spectrum) = probe.spectrum(&z).map_err(gen_err)?;
    let p1 = principal_projection(&j, &spectrum).map_err(gen_err)?;
    let img_err = |e: imaging::ImagingError| CampaignError::Data(e.to_string());
    let jacobian = imaging::jacobian_norm_map(&j, descriptor.output_shape).map_err(img_err)?;
    let laplacian = imaging::laplacian_magnitude_map(&p1).map_err(img_err)?;

    ensure_dir(&config.out_dir)?;
    let stem = format!("heatmap_{condition}_{seed}");
    let path = |kind: &str, ext: &str| config.out_dir.join(format!("{stem}_{kind}.{ext}"));
    let (h, w) = (jacobian.height, jacobian.width);
    let scale = (MIN_RENDER_SIDE / h.max(w)).max(1);
    for (map, kind) in [(&jacobian, "jacobian"), (&laplacian, "laplacian")] {
        let rgb = imaging::render_heatmap(map, (h * scale, w * scale), Upsample::Bilinear).map_err(img_err)?;
        imaging::write_png(&rgb, &path(kind, "png")).map_err(img_err)?;
        map.write_csv(&path(kind, "csv")).map_err(img_err)?;
    }
    Ok(HeatmapOutputs {
        jacobian_png: path("jacobian", "png"),
        jacobian_csv: path("jacobian", "csv"),
        laplacian_png: path("laplacian", "png"),
        laplacian_csv: path("laplacian", "csv"),
        jacobian,
        laplacian,
    })
}
