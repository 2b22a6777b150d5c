//! Serve a built-in generator over `MPROBE/1` on a local TCP port and probe
//! it through the client exactly as a remote model would be.

use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use mprobe::generators::{protocol, Builtin, Endpoint, ExternalGenerator, Generator};
use mprobe::geometry::{diagnose_point, sample_orthonormal_basis, DiagnosticSettings, LatentPoint};
use mprobe::imaging::Shape;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let served = Builtin::random_feature(6, 24, Shape::new(1, 4, 4), 1)?;
    let local = served.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let g = served.clone();
            thread::spawn(move || {
                let reader = stream.try_clone().expect("clone stream");
                if let Err(e) = protocol::serve(&g, reader, stream) {
                    eprintln!("session ended: {e}");
                }
            });
        }
    });

    let endpoint: Endpoint = format!("tcp://{addr}").parse()?;
    let remote = ExternalGenerator::connect(&endpoint, Duration::from_secs(5), 4)?;
    let d = remote.descriptor();
    println!("connected to {endpoint}: E = {}, output {}, concurrent_safe = {}", d.latent_dim, d.output_shape, d.concurrent_safe);

    let z = LatentPoint::gaussian(9, 6);
    let over_wire = remote.evaluate(&z)?;
    // Latents and outputs both cross the wire as f32.
    let z32 = LatentPoint::new(z.as_slice().iter().map(|&v| f64::from(v as f32)).collect())?;
    let f32_local: Vec<f64> = local.evaluate(&z32)?.data().iter().map(|&v| f64::from(v as f32)).collect();
    println!("round trip bit-exact at f32: {}", over_wire.data() == f32_local.as_slice());

    let basis = sample_orthonormal_basis(6, 4, 0)?;
    // f32 transport quantizes outputs, so use a step well above its resolution.
    let settings = DiagnosticSettings { fd: mprobe::geometry::FiniteDifference::central(1e-2), ..Default::default() };
    let record = diagnose_point(&remote, &basis, &z, 9, &settings)?.into_record(9, "remote");
    println!("{}", serde_json::to_string(&record)?);
    Ok(())
}
