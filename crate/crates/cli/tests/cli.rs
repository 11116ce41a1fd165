//! Process-level tests of the `amalgam` binary: exit-code contract, report
//! determinism, generator round trips.

use std::path::PathBuf;
use std::process::Command;

fn amalgam() -> Command {
    Command::new(env!("CARGO_BIN_EXE_amalgam"))
}

fn pauli_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances/pauli-states.json")
}

#[test]
fn pauli_states_passes_with_exit_zero() {
    let out = amalgam()
        .args(["run"])
        .arg(pauli_path())
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("restriction_identity"));
    assert!(stdout.trim_end().ends_with("PASS"));
}

#[test]
fn cp_violation_exits_two_with_diagnostic() {
    // A₁ carries the identity representation, A₂ the transpose map: the
    // Gram–Choi form of the transpose has a negative eigenvalue
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transpose.json");
    let s = 1.4142135623730951_f64;
    let file = serde_json::json!({
        "schema_version": "1",
        "name": "transpose-rejection",
        "mode": "boca",
        "depth": 2,
        "base": {"blocks": [1]},
        "algebras": [{"blocks": [2]}, {"blocks": [2]}],
        "embeddings": [
            [[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]],
            [[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]]
        ],
        "maps": {
            "target_dim": 2,
            "actions": [
                [
                    [[[s,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]],
                    [[[0.0,0.0],[s,0.0]],[[0.0,0.0],[0.0,0.0]]],
                    [[[0.0,0.0],[0.0,0.0]],[[s,0.0],[0.0,0.0]]],
                    [[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[s,0.0]]]
                ],
                [
                    [[[s,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]],
                    [[[0.0,0.0],[0.0,0.0]],[[s,0.0],[0.0,0.0]]],
                    [[[0.0,0.0],[s,0.0]],[[0.0,0.0],[0.0,0.0]]],
                    [[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[s,0.0]]]
                ]
            ]
        }
    });
    std::fs::write(&path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
    let out = amalgam().arg("run").arg(&path).output().expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("completely positive"),
        "diagnostic missing: {stdout}"
    );
}

#[test]
fn malformed_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    // ragged matrix rows
    std::fs::write(
        &path,
        r#"{"schema_version":"1","name":"bad","mode":"boca","depth":1,
            "base":{"blocks":[1]},"algebras":[{"blocks":[2]}],
            "embeddings":[[[[[1.0,0.0]],[[0.0,0.0],[1.0,0.0]]]]],
            "maps":{"target_dim":1,"actions":[[[[[1.0,0.0]]],[[[0.0,0.0]]],[[[0.0,0.0]]],[[[0.0,0.0]]]]]}}"#,
    )
    .unwrap();
    let out = amalgam().arg("run").arg(&path).output().expect("binary runs");
    assert_eq!(out.status.code(), Some(1));

    let out = amalgam()
        .args(["run", "/definitely/not/a/file.json"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generated_instance_round_trips_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen0.json");
    let out = amalgam()
        .args(["gen", "--seed", "0", "--out"])
        .arg(&path)
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let out = amalgam().arg("run").arg(&path).output().expect("binary runs");
    assert!(out.status.success());
}

#[test]
fn gen_is_byte_deterministic() {
    let out1 = amalgam()
        .args(["gen", "--seed", "7", "--profile", "linear-only"])
        .output()
        .expect("binary runs");
    let out2 = amalgam()
        .args(["gen", "--seed", "7", "--profile", "linear-only"])
        .output()
        .expect("binary runs");
    assert!(out1.status.success());
    assert_eq!(out1.stdout, out2.stdout);
}

#[test]
fn report_digest_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    for r in [&r1, &r2] {
        let out = amalgam()
            .args(["run"])
            .arg(pauli_path())
            .arg("--report")
            .arg(r)
            .env("REPORT_DIGEST", "1")
            .output()
            .expect("binary runs");
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stdout).contains("digest: sha256:"));
    }
    let rep1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&r1).unwrap()).unwrap();
    let rep2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&r2).unwrap()).unwrap();
    assert_eq!(rep1["digest"], rep2["digest"]);
    assert_eq!(rep1["pass"], serde_json::Value::Bool(true));
}

#[test]
fn depth_override_controls_evaluation() {
    // at depth 1 the two-letter element in the pauli file cannot evaluate
    let out = amalgam()
        .args(["run"])
        .arg(pauli_path())
        .args(["--depth", "1"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("insufficient depth"), "{stdout}");
}

#[test]
fn mode_override_rejects_linear_only_under_boca() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lin.json");
    let out = amalgam()
        .args(["gen", "--seed", "1", "--profile", "linear-only", "--out"])
        .arg(&path)
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    // its own mode passes
    let out = amalgam().arg("run").arg(&path).output().expect("binary runs");
    assert!(out.status.success());
    // forcing the strong hypothesis fails with the multiplicativity message
    let out = amalgam()
        .arg("run")
        .arg(&path)
        .args(["--mode", "boca"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("multiplicative"));
}
