use std::path::Path;
use std::process::Command;

fn run(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_superres2d"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

#[test]
fn kernel_dump_writes_a_headed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&["kernel-dump", "--f-c", "20", "--samples", "11"], dir.path());
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("kernel_dump.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "tau_over_lambda_c,k,k1_over_fc,k2_over_fc2,k3_over_fc3");
    assert_eq!(lines.count(), 11);
}

#[test]
fn certificate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["certificate", "--r", "4", "--separation", "1.68", "--seed", "9", "--fast", "--grid", "64"];
    let (ca, _) = run(&args, a.path());
    let (cb, _) = run(&args, b.path());
    assert_eq!((ca, cb), (0, 0));
    for f in ["certificate.json", "certificate_report.json", "q_modulus.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn crowded_alternating_support_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(
        &model,
        r#"{"sources": [{"t": [0.5, 0.5], "d": [1.0, 0.0]}, {"t": [0.515, 0.5], "d": [-1.0, 0.0]}]}"#,
    )
    .unwrap();
    let (code, _) = run(&["certificate", "--model", model.to_str().unwrap(), "--fast"], dir.path());
    assert_eq!(code, 2);
    assert!(dir.path().join("certificate_report.json").exists());
}

#[test]
fn empty_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(&model, r#"{"sources": []}"#).unwrap();
    let (code, _) = run(&["recover", "--model", model.to_str().unwrap()], dir.path());
    assert_eq!(code, 1);
}

#[test]
fn recover_single_source_matches() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(&model, r#"{"sources": [{"t": [0.3, 0.7], "d": [1.0, 0.0]}]}"#).unwrap();
    let (code, stdout) = run(&["recover", "--model", model.to_str().unwrap(), "--f-c", "3"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    let score = std::fs::read_to_string(dir.path().join("score.json")).unwrap();
    assert!(score.contains("\"success\":true"), "{score}");
    for f in ["dual_c.csv", "sdp_diagnostics.json", "peaks.json", "measurements.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
