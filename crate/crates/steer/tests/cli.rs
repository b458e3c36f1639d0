use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn steer(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steer"))
        .current_dir(dir)
        .env_remove("MOTION_SKELETON")
        .env_remove("MOTION_CODEC")
        .env_remove("MOTION_INDEX")
        .env_remove("MOTION_LISTEN_ADDR")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = steer(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr record");
    serde_json::from_str(line).unwrap()
}

#[test]
fn pipeline_from_corpus_to_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let made = ok(d, &["synth-corpus", "--out", "corpus", "--clips-per-label", "2"]);
    assert_eq!(made["clips"], 10);
    ok(d, &["fit-codec", "--corpus", "corpus", "--out", "codec.tns", "--stride", "2"]);
    ok(d, &["build-index", "--corpus", "corpus", "--codec", "codec.tns", "--out", "index.tns", "--stride", "2"]);
    std::fs::write(d.join("tl.tsv"), "0\t3\tstand\n3\t6\twave left hand\n6\t10\twalk\n").unwrap();
    let r = ok(
        d,
        &[
            "rollout", "--timeline", "tl.tsv", "--codec", "codec.tns", "--index", "index.tns", "--out", "gen.clip",
            "--commands-out", "log.tsv",
        ],
    );
    assert_eq!(r["frames"], 500);

    let rt = ok(d, &["roundtrip-check", "--clip", "gen.clip"]);
    assert_eq!(rt["details"]["within_tolerance"], true);
    assert_eq!(ok(d, &["validate", "--clip", "gen.clip"])["issues"].as_array().unwrap().len(), 0);

    ok(
        d,
        &[
            "replay", "--commands", "log.tsv", "--frames", "500", "--codec", "codec.tns", "--index", "index.tns",
            "--out", "replay.clip",
        ],
    );
    assert_eq!(std::fs::read(d.join("gen.clip")).unwrap(), std::fs::read(d.join("replay.clip")).unwrap());

    let gen = ok(d, &["eval-gen", "--corpus", "corpus", "--clip", "gen.clip", "--commands", "log.tsv"]);
    assert_eq!(gen["kind"], "generation");
    for key in ["fid", "diversity", "r_at_1", "mm_dist", "peak_jerk", "auj"] {
        assert!(gen["metrics"][key].is_number(), "{key}");
    }
    let track = ok(d, &["eval-track", "--policy", "gen.clip", "--reference", "gen.clip"]);
    assert_eq!(track["metrics"]["success_rate"], 1.0);
    assert_eq!(track["metrics"]["g_mpjpe_mm"], 0.0);

    ok(d, &["encode", "--clip", "gen.clip", "--out", "f.tns"]);
    ok(d, &["decode", "--features", "f.tns", "--out", "back.clip"]);
    assert_eq!(ok(d, &["validate", "--clip", "back.clip"])["frames"], 499);
}

#[test]
fn environment_selects_the_skeleton() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = Command::new(env!("CARGO_BIN_EXE_steer"))
        .current_dir(d)
        .env("MOTION_SKELETON", "builtin:biped5")
        .args(["export-fk-vectors", "--out", "fk.json", "--count", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(d.join("fk.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], "steer-fk-vectors/1");
    assert_eq!(v["skeleton"]["name"], "biped5");
    assert_eq!(v["cases"].as_array().unwrap().len(), 4);
}

#[test]
fn failures_are_json_records() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = steer(d, &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["code"], "usage");

    let out = steer(d, &["validate", "--clip", "missing.clip"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"]["code"], "io");

    std::fs::write(d.join("bad.clip"), b"STEERCLIP 9\n{}\n").unwrap();
    let out = steer(d, &["roundtrip-check", "--clip", "bad.clip"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"]["code"], "version_mismatch");

    let out = steer(d, &["rollout", "--timeline", "x.tsv", "--out", "y.clip"]);
    assert_eq!(out.status.code(), Some(1));

    let out = steer(d, &["--skeleton", "builtin:nope", "validate", "--clip", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_record(&out)["error"]["message"].as_str().unwrap().contains("nope"));
}

#[test]
fn skeleton_mismatch_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("tl.tsv"), "0\t1\tstand\n").unwrap();
    ok(d, &["rollout", "--timeline", "tl.tsv", "--generator", "hold", "--out", "h.clip"]);
    let out = steer(d, &["--skeleton", "builtin:biped5", "roundtrip-check", "--clip", "h.clip"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"]["code"], "skeleton_mismatch");
}
