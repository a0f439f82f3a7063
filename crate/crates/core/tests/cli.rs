use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gfast-sim"))
}

#[test]
fn profiles_lists_all() {
    let out = bin().arg("profiles").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["gfast106", "gfast212", "vdsl17"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn run_writes_rates_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.conf");
    fs::write(
        &cfg,
        "profile=gfast106\nlines=3\nlength_m=150\nmethods=none,zf,mac_sum\nseeds=1\ntone_step=64\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--jobs", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let rates = fs::read_to_string(out_dir.join("rates.csv")).unwrap();
    let mut lines = rates.lines();
    assert_eq!(
        lines.next(),
        Some("length_m,method,seed,user,rate_mbps,rate_df_mbps")
    );
    // 3 users for none and zf, one aggregate row for mac_sum
    assert_eq!(lines.count(), 7);
    assert!(rates.contains(",mac_sum,1,sum,"));
    assert!(!out_dir.join("tones.csv").exists());
}

#[test]
fn bad_config_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "length_m=100\nseeds=1\nmethods=magic\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("magic"), "{err}");

    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.conf"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 5);
}
