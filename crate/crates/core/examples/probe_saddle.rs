//! Probe the saddle map `G(z₁, z₂) = (z₁², z₂)`: metric tensor, spectrum,
//! Local Scaling and Local Complexity away from and near the eigenvalue
//! crossing at `|2z₁| = 1`.

use mprobe::generators::Builtin;
use mprobe::geometry::{self, FiniteDifference, LatentPoint, NeighborhoodSpec, Probe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let saddle = Builtin::saddle();
    let basis = geometry::SubspaceBasis::identity(2, 2)?;
    let probe = Probe::new(&saddle, &basis).with_fd(FiniteDifference::central(1e-4));

    for z1 in [2.0, 1.0, 0.51, 0.5, 0.2] {
        let z = LatentPoint::new(vec![z1, 0.0])?;
        let (_, spectrum) = probe.spectrum(&z)?;
        let spec = NeighborhoodSpec { radius: 1e-2, count: 8, seed: 7 };
        let lc = probe.neighborhood(&z, &spectrum, &spec)?.local_complexity();
        println!(
            "z1 = {z1:<5} λ = ({:.4}, {:.4})  LS = {:+.4}  LC = {:.4e}  flags = {:?}",
            spectrum.eigenvalues[0],
            spectrum.eigenvalues[1],
            geometry::local_scaling(&spectrum, 1e-12),
            lc.value,
            lc.flags,
        );
    }
    Ok(())
}
