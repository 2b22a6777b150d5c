//! Spectral isolation and per-axis coupling on a random-feature generator,
//! compared across two latent regions.

use mprobe::generators::Builtin;
use mprobe::geometry::{self, LatentPoint};
use mprobe::imaging::Shape;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generator = Builtin::random_feature(12, 48, Shape::new(1, 8, 8), 3)?;
    let basis = geometry::sample_orthonormal_basis(12, 6, 11)?;
    let mut profiles = Vec::new();
    for (label, scale) in [("typical", 1.0), ("far", 4.0)] {
        let z = LatentPoint::new(LatentPoint::gaussian(5, 12).as_slice().iter().map(|v| v * scale).collect())?;
        let jac = geometry::fd_jacobian(&generator, &z, &basis, 1e-3)?;
        let base = geometry::eigendecompose(&geometry::metric_tensor(&jac)?)?;
        let profile = geometry::spectral_isolation(&generator, &z, &basis, &base, 1e-2, 8, 1e-3, 5, 1e-8)?;
        println!(
            "{label:<8} SIS = {:10.3}  principal |cos| = {:.4}  axes = {:?}",
            profile.sis,
            profile.principal,
            profile.summary_axes().iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()
        );
        profiles.push(profile);
    }
    let ratio = geometry::dimensional_coupling_ratio(&profiles[0], &profiles[1])?;
    println!("coupling ratio per axis: {ratio:.3?}");
    Ok(())
}
