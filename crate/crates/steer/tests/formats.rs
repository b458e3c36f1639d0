//! Loaders under random corruption: every input either parses or yields a
//! structured error, and nothing panics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steer::clip::MotionClip;
use steer::core::corpus::clean_template;
use steer::core::kinematics::builtin::{biped5, humanoid29};
use steer::protocol::parse_inbound;
use steer::skeleton_file::{parse_skeleton, write_skeleton};
use steer::spans::{parse_command_log, parse_spans, write_command_log, CommandLogEntry};
use steer::tensor::{Tensor, TensorFile};

fn mutate(rng: &mut ChaCha8Rng, bytes: &[u8]) -> Vec<u8> {
    let mut out = bytes.to_vec();
    match rng.random_range(0..4) {
        0 => out.truncate(rng.random_range(0..=out.len())),
        1 => {
            for _ in 0..rng.random_range(1..8) {
                if out.is_empty() {
                    break;
                }
                let i = rng.random_range(0..out.len());
                out[i] = rng.random();
            }
        }
        2 => {
            let i = rng.random_range(0..=out.len());
            let extra: Vec<u8> = (0..rng.random_range(1..16)).map(|_| rng.random()).collect();
            out.splice(i..i, extra);
        }
        _ => {
            if !out.is_empty() {
                let i = rng.random_range(0..out.len());
                let j = rng.random_range(i..=out.len());
                out.drain(i..j);
            }
        }
    }
    out
}

#[test]
fn corrupted_clips_never_panic() {
    let skel = biped5();
    let clip = MotionClip::new(&skel, clean_template("walk", &skel, 20).unwrap()).unwrap();
    let bytes = clip.to_bytes();
    assert_eq!(MotionClip::from_bytes(&bytes).unwrap(), clip);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rejected = 0;
    for _ in 0..3000 {
        let m = mutate(&mut rng, &bytes);
        match MotionClip::from_bytes(&m) {
            Ok(c) => {
                assert_eq!(c.frames.len(), c.header.frame_count);
            }
            Err(e) => {
                rejected += 1;
                assert!(!e.to_string().is_empty());
            }
        }
    }
    assert!(rejected > 2000);
}

#[test]
fn corrupted_tensor_files_never_panic() {
    let mut f = TensorFile::new();
    f.insert("a", Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]))
        .insert("names", Tensor::Strings(vec!["stand".into(), "walk".into()]));
    let bytes = f.to_bytes();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3000 {
        let _ = TensorFile::from_bytes(&mutate(&mut rng, &bytes));
    }
}

#[test]
fn corrupted_text_formats_never_panic() {
    let skel_text = write_skeleton(&humanoid29());
    let spans = "# steer-spans 1\n0.0\t2.0\tstand\n2.0\t9.0\twave left hand\n";
    let log = write_command_log(&[
        CommandLogEntry {
            motion_index: 0,
            command: "stand".into(),
        },
        CommandLogEntry {
            motion_index: 8,
            command: "walk".into(),
        },
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let s = String::from_utf8_lossy(&mutate(&mut rng, skel_text.as_bytes())).into_owned();
        let _ = parse_skeleton(&s);
        let s = String::from_utf8_lossy(&mutate(&mut rng, spans.as_bytes())).into_owned();
        let _ = parse_spans(&s);
        let s = String::from_utf8_lossy(&mutate(&mut rng, log.as_bytes())).into_owned();
        let _ = parse_command_log(&s);
    }
}

#[test]
fn corrupted_protocol_lines_get_error_replies() {
    let good = r#"{"type":"command","text":"wave left hand","client_time_ms":12.5}"#;
    assert!(parse_inbound(good).is_ok());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let s = String::from_utf8_lossy(&mutate(&mut rng, good.as_bytes())).into_owned();
        if let Err(reply) = parse_inbound(&s) {
            assert!(reply.to_line().contains("\"type\":\"error\""));
        }
    }
}

#[test]
fn non_finite_values_are_rejected() {
    let skel = biped5();
    let mut frames = clean_template("stand", &skel, 5).unwrap();
    frames[2].q[1] = f64::NAN;
    assert!(MotionClip::new(&skel, frames).is_err());
    let spans = "0.0\tinf\tstand\n";
    assert!(parse_spans(spans).is_err());
}
