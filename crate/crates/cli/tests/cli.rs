use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn snipmine(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snipmine"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthetic data with a structural-only classifier, which skips the
/// correspondence model and keeps the run short.
fn structural_fixture(dir: &Path, flavor: &str) {
    let o = snipmine(dir, &["synth", "--flavor", flavor, "--out", "."]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = std::fs::read_to_string(dir.join("snipmine.toml")).unwrap();
    let cfg = cfg
        .replace(
            "feature_sets = [\"full\", \"structural-only\", \"correspondence-only\"]",
            "feature_sets = [\"structural-only\"]",
        )
        .replace("cross_lingual = false", "cross_lingual = true");
    std::fs::write(dir.join("snipmine.toml"), cfg).unwrap();
}

#[test]
fn missing_artifact_is_a_user_error_naming_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    structural_fixture(dir.path(), "a");
    let o = snipmine(dir.path(), &["candidates"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run `ingest` first"), "{}", stderr(&o));
}

#[test]
fn bad_usage_and_bad_config_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(snipmine(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(snipmine(dir.path(), &["ingest"]).status.code(), Some(1));
    std::fs::write(dir.path().join("snipmine.toml"), "language = \"python\"\nbogus = 1\n").unwrap();
    let o = snipmine(dir.path(), &["ingest"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
    assert_eq!(snipmine(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn run_then_mine_with_limits() {
    let dir = tempfile::tempdir().unwrap();
    structural_fixture(dir.path(), "a");
    let o = snipmine(dir.path(), &["run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("structural-only") && out.contains("random"), "{out}");
    for f in ["report.json", "curves.csv", "pr.svg", "roc.svg", "mined.jsonl"] {
        assert!(dir.path().join("work/reports").join(f).exists(), "{f}");
    }

    let o = snipmine(dir.path(), &["mine", "--top-k", "3", "--min-prob", "0.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mined = std::fs::read_to_string(dir.path().join("work/reports/mined.jsonl")).unwrap();
    assert_eq!(mined.lines().count(), 4, "header plus three pairs");

    // the mining threshold is not part of the config hash
    assert!(snipmine(dir.path(), &["evaluate"]).status.success());
    let o = snipmine(dir.path(), &["mine", "--min-prob", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn changed_config_refuses_stale_artifacts_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    structural_fixture(dir.path(), "a");
    assert!(snipmine(dir.path(), &["ingest"]).status.success());
    let o = snipmine(dir.path(), &["--seed", "7", "candidates"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("config hash mismatch"), "{}", stderr(&o));
    assert!(snipmine(dir.path(), &["--seed", "7", "--force", "candidates"]).status.success());
}

#[test]
fn transfer_across_languages() {
    let src = tempfile::tempdir().unwrap();
    let dst = tempfile::tempdir().unwrap();
    structural_fixture(src.path(), "a");
    structural_fixture(dst.path(), "b");
    assert!(snipmine(src.path(), &["run"]).status.success());
    for stage in ["ingest", "candidates", "featurize"] {
        let o = snipmine(dst.path(), &[stage]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let model = src.path().join("work/models/classifier-structural-only.txt");
    let data = dst.path().join("snipmine.toml");
    let o = snipmine(
        src.path(),
        &["transfer", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dst.path().join("work/features/transfer-predictions.jsonl").exists());
    assert!(dst.path().join("work/reports/transfer-report.json").exists());
}

#[test]
fn serve_annotation_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    structural_fixture(dir.path(), "a");
    assert!(snipmine(dir.path(), &["ingest"]).status.success());
    let mut child = Command::new(env!("CARGO_BIN_EXE_snipmine"))
        .current_dir(dir.path())
        .args(["serve-annotation", "--port", "0", "--store-path", "live.jsonl"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_string();

    let mut s = TcpStream::connect(&addr).unwrap();
    write!(s, "GET /api/progress HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    // 320 how-to questions in the synthetic dump, all of them in the plan
    assert!(resp.contains("\"plan_size\":320"), "{resp}");
}
