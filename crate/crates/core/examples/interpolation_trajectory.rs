//! Slerp paths pushed through two samplers sharing endpoints: the identity
//! and a curl field that rotates latents by an angle growing with `‖z‖`.
//! Reports paired `frac` and Monte Carlo ratios of tortuosity.

use mprobe::generators::Builtin;
use mprobe::trajectory::{self, PairedComparison};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let identity = Builtin::identity(4);
    let curl = Builtin::curl(4, 1.0)?;
    let (mut tau_id, mut tau_curl) = (Vec::new(), Vec::new());
    for pair in 0..100 {
        let (a, b) = trajectory::endpoint_pair(0, pair, 4)?;
        let path = trajectory::build_path(&a, &b, trajectory::DEFAULT_STEPS)?;
        let eps = trajectory::TORTUOSITY_EPS;
        tau_id.push(trajectory::induce_trajectory(&identity, &path, "identity", pair, eps)?.tortuosity);
        let rec = trajectory::induce_trajectory(&curl, &path, "curl", pair, eps)?;
        if pair == 0 {
            println!(
                "pair 0 under curl: L = {:.4}  D = {:.4}  τ = {:.4}  Δ90/95/max = {:.4}/{:.4}/{:.4}",
                rec.length, rec.endpoint_distance, rec.tortuosity, rec.q90, rec.q95, rec.max
            );
        }
        tau_curl.push(rec.tortuosity);
    }
    let cmp = PairedComparison::new("tortuosity", "identity", "curl", tau_id, tau_curl)?.with_monte_carlo(800, 0.8, 0)?;
    let mc = cmp.monte_carlo.as_ref().expect("attached");
    println!(
        "R_τ = {:.4} ± {:.4} over {} resamples, frac(τ) = {:.2}",
        mc.ratio_mean, mc.ratio_std, mc.resamples, cmp.frac
    );
    Ok(())
}
