use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mprobe")).args(args).output().expect("spawn mprobe")
}

fn write_config(dir: &Path) -> String {
    let text = format!(
        r#"
seed = 3
out_dir = "{}"
jobs = 2

[probe]
subspace_dim = 2

[seeds]
count = 12

[trajectory]
n_mc = 50

[stats]
reference = "normal"
subsample_n = 8
runs = 3
n_boot = 50

[[conditions]]
name = "normal"
builtin = "random_feature"
params = {{ latent_dim = 2, hidden = 12, output_shape = [1, 6, 6] }}

[[conditions]]
name = "ood"
builtin = "curl_sampler"
params = {{ latent_dim = 2, omega = 1.5 }}
"#,
        dir.join("out").display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    for args in [
        vec!["diagnose"],
        vec!["correlate"],
        vec!["ood"],
        vec!["hf-transfer"],
        vec!["trajectory"],
        vec!["heatmap", "--cell", "4", "--condition", "normal"],
    ] {
        let mut full = vec!["--config", cfg.as_str()];
        full.extend(args.iter());
        let o = mprobe(&full);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for file in [
        "records.jsonl",
        "manifest.json",
        "correlate.csv",
        "correlate.json",
        "ood.json",
        "ood_scores.csv",
        "hf_transfer.csv",
        "trajectories.jsonl",
        "trajectory_summary.csv",
        "trajectory_paired.csv",
        "trajectory_paired.json",
        "heatmap_normal_4_jacobian.png",
        "heatmap_normal_4_laplacian.csv",
    ] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    let png = fs::read(out.join("heatmap_normal_4_jacobian.png")).unwrap();
    assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    let summary = fs::read_to_string(out.join("trajectory_summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("pair,condition,L,D,tau,E,q90,q95,max"));
    assert_eq!(summary.lines().count(), 1 + 24);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let other = dir.path().join("elsewhere");
    let o = mprobe(&["--config", &cfg, "--out-dir", other.to_str().unwrap(), "--jobs", "1", "diagnose"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(other.join("records.jsonl").is_file());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_init_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("default.toml");
    let o = mprobe(&["config", "init", "--output", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let parsed = mprobe::campaign::RunConfig::from_toml(&text).unwrap();
    assert_eq!(parsed, mprobe::campaign::RunConfig::default());
    let stdout = mprobe(&["config", "init"]);
    assert_eq!(String::from_utf8(stdout.stdout).unwrap(), text);
}

#[test]
fn exit_codes_follow_the_error_taxonomy() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mprobe(&["frobnicate"]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\nunknown_key = 2\n").unwrap();
    assert_eq!(mprobe(&["--config", bad.to_str().unwrap(), "diagnose"]).status.code(), Some(1));

    let unreachable = dir.path().join("remote.toml");
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    fs::write(
        &unreachable,
        format!(
            "out_dir = \"{}\"\n[[conditions]]\nname = \"normal\"\nendpoint = \"tcp://127.0.0.1:{port}\"\ntimeout_secs = 1.0\n",
            dir.path().join("o").display()
        ),
    )
    .unwrap();
    assert_eq!(mprobe(&["--config", unreachable.to_str().unwrap(), "diagnose"]).status.code(), Some(2));

    let missing = dir.path().join("nope.jsonl");
    let o = mprobe(&["--out-dir", dir.path().to_str().unwrap(), "correlate", "--records", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let garbled = dir.path().join("garbled.jsonl");
    fs::write(&garbled, "{not json}\n").unwrap();
    let o = mprobe(&["--out-dir", dir.path().to_str().unwrap(), "ood", "--records", garbled.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
