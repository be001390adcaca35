use std::fs;
use std::process::Command;

fn isac() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isac"))
}

fn small_config(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "seed = 5\n[comm]\ntrials = 4\n[sensing]\ntrials = 3\ndoppler_taps = [64]\n[ccdf]\ntrials = 10\nsizes = [15]\n",
    )
    .unwrap();
    path
}

#[test]
fn run_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = |name: &str| dir.path().join(name);
    for name in ["a.csv", "b.csv"] {
        let status = isac()
            .args(["run", "--experiment", "nmse", "--snr", "0:10:5", "--trials", "3"])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(out(name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read_to_string(out("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(out("b.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "experiment,snr_db,metric,value,stderr,trials,seed,config_hash");
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(!a.contains('\r'));
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&fields[..3], ["nmse", "0", "nmse_ofdm"]);
    assert_eq!(fields[5], "3");
    assert_eq!(fields[6], "5");
    assert_eq!(fields[7].len(), 16);
}

#[test]
fn seed_override_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let ok = isac()
            .args(["run", "--experiment", "ccdf", "--seed", seed])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&path)
            .status()
            .unwrap()
            .success();
        assert!(ok);
        fs::read_to_string(path).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("2", "b.csv");
    let hash = |s: &str| s.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string();
    assert_ne!(hash(&a), hash(&b));
}

#[test]
fn map_dumps_correlation_surface() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let output = isac().args(["map", "--snr", "20"]).arg("--config").arg(&cfg).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,l,vd"));
    // N = 64 Doppler rows by L_cp = 8 delay columns
    assert_eq!(lines.count(), 64 * 8);
}

#[test]
fn bad_inputs_fail_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[comm]\ncp_length = 4\n").unwrap();
    let out = dir.path().join("x.csv");
    let status = isac()
        .args(["run", "--experiment", "nmse"])
        .arg("--config")
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(!status.success());
    assert!(!out.exists());

    let cfg = small_config(dir.path());
    let status = isac()
        .args(["run", "--experiment", "fig9"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(!status.success());
}
