//! Command-line front end.
//!
//! Failures print one JSON record `{"error": {"code": ..., "message": ...}}`
//! on stderr. The exit status is 2 for usage errors and 1 for everything
//! else, including a failed `roundtrip-check` or `validate`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steer_core::corpus::{
    build_retrieval_index, generate_synthetic_corpus, training_windows, SyntheticCorpusSpec, DEFAULT_LABELS,
};
use steer_core::diffusion::{PcaCodec, PcaFitOptions, DEFAULT_CFG_SCALE, DEFAULT_STEPS};
use steer_core::features::{decode_features, encode_features, FeatureLayout, InitialPose};
use steer_core::geometry::distance;
use steer_core::primitive::{stream_session, T_FUTURE, T_HISTORY};
use steer_core::text::{HashedBagOfWords, DEFAULT_TEXT_DIM};
use steer_core::{Quat, SkeletonSpec};

use crate::artifacts::{
    build_generator, load_corpus, save_codec, save_corpus, save_index, GeneratorConfig, GeneratorKind, IndexArtifact,
};
use crate::clip::{load_clip, save_clip, validate_clip, MotionClip};
use crate::fk_vectors::export_fk_vectors;
use crate::latency::{measure_latency, read_log, write_log, MIN_LATENCY_EVENTS};
use crate::report::{evaluate_generation, evaluate_tracking, Report, DEFAULT_THETA_M};
use crate::server::{default_seed_pose, replay_offline, start_server, SessionConfig, DEFAULT_LISTEN_ADDR};
use crate::skeleton_file::load_skeleton;
use crate::spans::{parse_command_log, parse_timeline, write_command_log, CommandLogEntry};
use crate::tensor::{Tensor, TensorFile};

/// Largest reconstruction error accepted by `roundtrip-check`.
pub const ROUNDTRIP_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "steer", version, about = "Text-steered humanoid motion streaming toolkit")]
pub struct Cli {
    /// Skeleton file, or `builtin:humanoid29` / `builtin:biped5`.
    #[arg(long, global = true, env = "MOTION_SKELETON", default_value = "builtin:humanoid29")]
    pub skeleton: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GeneratorArgs {
    #[arg(long, value_enum, default_value = "retrieval")]
    pub generator: GeneratorKind,
    /// PCA codec container written by `fit-codec`.
    #[arg(long, env = "MOTION_CODEC")]
    pub codec: Option<PathBuf>,
    /// Retrieval index container written by `build-index`.
    #[arg(long, env = "MOTION_INDEX")]
    pub index: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CFG_SCALE, allow_negative_numbers = true)]
    pub cfg_scale: f64,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Add noise on the final reverse step as well.
    #[arg(long)]
    pub terminal_noise: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl GeneratorArgs {
    fn config(&self) -> GeneratorConfig {
        GeneratorConfig {
            kind: self.generator,
            codec: self.codec.clone(),
            index: self.index.clone(),
            cfg_scale: self.cfg_scale,
            steps: self.steps,
            terminal_noise: self.terminal_noise,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a clip into a feature container.
    Encode {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a feature container back into a clip.
    Decode {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode and decode a clip; exit 0 iff the reconstruction is within 1e-9.
    RoundtripCheck {
        #[arg(long)]
        clip: PathBuf,
    },
    /// Check a clip against the skeleton.
    Validate {
        #[arg(long)]
        clip: PathBuf,
    },
    /// Write a procedural labelled corpus into a directory.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        clips_per_label: usize,
        #[arg(long, default_value_t = 200)]
        min_frames: usize,
        #[arg(long, default_value_t = 300)]
        max_frames: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        /// Comma-separated labels.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
    },
    /// Fit the PCA latent codec on corpus windows.
    FitCodec {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 16)]
        latent_dim: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        allow_rank_deficient: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the retrieval index over corpus windows.
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = "MOTION_CODEC")]
        codec: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = DEFAULT_TEXT_DIM)]
        text_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        history_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        text_weight: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offline streaming session driven by a text-stream file.
    Rollout {
        #[arg(long)]
        timeline: PathBuf,
        /// Seconds; defaults to the timeline's duration.
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        gen: GeneratorArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        commands_out: Option<PathBuf>,
    },
    /// Regenerate a session from a command log.
    Replay {
        #[arg(long)]
        commands: PathBuf,
        /// Keep only the first N frames.
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        gen: GeneratorArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generation-quality metrics of a generated clip against a corpus.
    EvalGen {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        commands: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tracking-fidelity metrics of executed against reference clips.
    EvalTrack {
        #[arg(long, num_args = 1.., required = true)]
        policy: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        reference: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THETA_M)]
        theta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the streaming server.
    Serve {
        #[arg(long, env = "MOTION_LISTEN_ADDR", default_value = DEFAULT_LISTEN_ADDR)]
        listen: String,
        #[command(flatten)]
        gen: GeneratorArgs,
        #[arg(long, default_value_t = steer_core::primitive::DEFAULT_BUFFER_BLOCKS)]
        buffer_blocks: usize,
        /// Stop after this many seconds instead of waiting for Ctrl-C.
        #[arg(long)]
        duration: Option<f64>,
        /// Session event log (JSON lines) written on shutdown.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Command log written on shutdown.
        #[arg(long)]
        commands_out: Option<PathBuf>,
    },
    /// Latency statistics of a session event log.
    Latency {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = MIN_LATENCY_EVENTS)]
        min_events: usize,
    },
    /// Write forward-kinematics test vectors for client implementations.
    ExportFkVectors {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_entry() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            error_record("usage", &e.to_string());
            return 2;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<crate::Error>().map(crate::Error::code))
                .unwrap_or("error");
            error_record(code, &chain_message(&e));
            1
        }
    }
}

/// Joins the context chain, skipping causes already spelled out by the
/// message above them.
fn chain_message(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if parts.last().is_some_and(|prev| prev.contains(&text)) {
            continue;
        }
        parts.push(text);
    }
    parts.join(": ")
}

fn error_record(code: &str, message: &str) {
    let rec = serde_json::json!({ "error": { "code": code, "message": message.trim_end() } });
    let _ = writeln!(std::io::stderr(), "{rec}");
}

fn emit(report: &Report, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn read_clip(path: &Path, skeleton: &SkeletonSpec) -> anyhow::Result<MotionClip> {
    let c = load_clip(path).with_context(|| format!("reading {}", path.display()))?;
    c.check_skeleton(skeleton)
        .with_context(|| format!("clip {}", path.display()))?;
    Ok(c)
}

pub fn run(cli: Cli) -> anyhow::Result<i32> {
    let skeleton = load_skeleton(&cli.skeleton).with_context(|| format!("loading skeleton {}", cli.skeleton))?;
    match cli.command {
        Command::Encode { clip, out } => {
            let c = read_clip(&clip, &skeleton)?;
            let enc = encode_features(&c.frames)?;
            for w in &enc.warnings {
                log::warn!("{w:?}");
            }
            let layout = FeatureLayout::layout_of(enc.features.first().context("clip has no frames")?);
            let init = &enc.init;
            let mut f = TensorFile::new();
            f.insert("layout", Tensor::row(vec![layout.n_q as f64, layout.n_c as f64]))
                .insert(
                    "features",
                    Tensor::matrix(enc.features.len(), layout.dim(), layout.flatten_all(&enc.features)),
                )
                .insert(
                    "init",
                    Tensor::row(init.position.iter().chain(&init.orientation.to_array()).copied().collect()),
                );
            f.save(&out)?;
            Ok(0)
        }
        Command::Decode { features, out } => {
            let f = TensorFile::load(&features)?;
            let lay = f.matrix("layout")?.2;
            if lay.len() != 2 {
                bail!("feature container layout must hold n_q and n_c");
            }
            let layout = FeatureLayout::new(lay[0] as usize, lay[1] as usize);
            let frames = layout.unflatten_all(f.matrix("features")?.2)?;
            let init = f.matrix("init")?.2;
            if init.len() != 7 {
                bail!("initial pose must hold 7 values");
            }
            let init = InitialPose {
                position: [init[0], init[1], init[2]],
                orientation: Quat::from_array([init[3], init[4], init[5], init[6]]),
            };
            save_clip(&MotionClip::new(&skeleton, decode_features(&frames, &init)?)?, &out)?;
            Ok(0)
        }
        Command::RoundtripCheck { clip } => {
            let c = read_clip(&clip, &skeleton)?;
            let enc = encode_features(&c.frames)?;
            let dec = decode_features(&enc.features, &enc.init)?;
            let (mut pos, mut rot, mut joint) = (0.0f64, 0.0f64, 0.0f64);
            for (a, b) in c.frames.iter().zip(&dec) {
                pos = pos.max(distance(a.root_position, b.root_position));
                rot = rot.max(a.root_orientation.angle_to(b.root_orientation));
                for (x, y) in a.q.iter().zip(&b.q) {
                    joint = joint.max((x - y).abs());
                }
            }
            let ok = pos <= ROUNDTRIP_TOL && joint <= ROUNDTRIP_TOL && rot <= ROUNDTRIP_TOL;
            let mut r = Report::new("roundtrip");
            r.metric("max_position_error_m", pos)
                .metric("max_rotation_error_rad", rot)
                .metric("max_joint_error_rad", joint)
                .detail("frames_compared", dec.len())
                .detail("tolerance", ROUNDTRIP_TOL)
                .detail("within_tolerance", ok);
            emit(&r, None)?;
            if !ok {
                error_record("tolerance_exceeded", "round-trip error exceeds 1e-9");
                return Ok(1);
            }
            Ok(0)
        }
        Command::Validate { clip } => {
            let c = load_clip(&clip)?;
            let report = validate_clip(&c, &skeleton);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.is_ok() {
                error_record("validation_failed", &format!("{} issues", report.issues.len()));
                return Ok(1);
            }
            Ok(0)
        }
        Command::SynthCorpus {
            out,
            seed,
            clips_per_label,
            min_frames,
            max_frames,
            noise,
            labels,
        } => {
            let spec = SyntheticCorpusSpec {
                labels: labels.unwrap_or_else(|| DEFAULT_LABELS.iter().map(|s| s.to_string()).collect()),
                clips_per_label,
                min_frames,
                max_frames,
                noise,
                seed,
            };
            let corpus = generate_synthetic_corpus(&spec, &skeleton)?;
            let m = save_corpus(&out, &corpus, &skeleton, seed, noise)?;
            println!("{}", serde_json::json!({"clips": m.clips.len(), "labels": m.labels}));
            Ok(0)
        }
        Command::FitCodec {
            corpus,
            latent_dim,
            stride,
            allow_rank_deficient,
            out,
        } => {
            let c = load_corpus(&corpus)?;
            let (w, _) = training_windows(&c.clips, T_HISTORY, T_FUTURE, stride)?;
            let codec = PcaCodec::fit(
                &w,
                latent_dim,
                PcaFitOptions {
                    allow_rank_deficient,
                    ..Default::default()
                },
            )?;
            save_codec(&codec, &out)?;
            println!(
                "{}",
                serde_json::json!({"windows": w.len(), "latent_dim": latent_dim, "residual_variance": codec.residual_variance()})
            );
            Ok(0)
        }
        Command::BuildIndex {
            corpus,
            codec,
            stride,
            text_dim,
            history_weight,
            text_weight,
            out,
        } => {
            let c = load_corpus(&corpus)?;
            let codec = crate::artifacts::load_codec(&codec)?;
            let (w, l) = training_windows(&c.clips, T_HISTORY, T_FUTURE, stride)?;
            let enc = HashedBagOfWords { dim: text_dim };
            let index = build_retrieval_index(&w, &l, &codec, &enc)?.with_weights(history_weight, text_weight);
            let n = index.len();
            save_index(&IndexArtifact { index, text_dim }, &out)?;
            println!("{}", serde_json::json!({"entries": n}));
            Ok(0)
        }
        Command::Rollout {
            timeline,
            duration,
            gen,
            out,
            commands_out,
        } => {
            let tl = parse_timeline(&std::fs::read_to_string(&timeline)?)?;
            let g = build_generator(&gen.config())?;
            let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
            let seed_pose = default_seed_pose(&skeleton);
            let s = stream_session(&tl, &g, &seed_pose, duration.unwrap_or(tl.duration()), &mut rng)?;
            let t = g.t_future();
            save_clip(&MotionClip::new(&skeleton, s.frames.clone())?, &out)?;
            if let Some(p) = commands_out {
                let log: Vec<CommandLogEntry> = s
                    .block_commands
                    .iter()
                    .enumerate()
                    .map(|(b, c)| CommandLogEntry {
                        motion_index: b * t,
                        command: c.clone(),
                    })
                    .collect();
                std::fs::write(p, write_command_log(&log))?;
            }
            println!("{}", serde_json::json!({"frames": s.frames.len(), "blocks": s.block_commands.len()}));
            Ok(0)
        }
        Command::Replay {
            commands,
            frames,
            gen,
            out,
        } => {
            let log = parse_command_log(&std::fs::read_to_string(&commands)?)?;
            let g = build_generator(&gen.config())?;
            let mut frames_out = replay_offline(&g, &default_seed_pose(&skeleton), gen.seed, &log)?;
            if let Some(n) = frames {
                frames_out.truncate(n);
            }
            let frames = frames_out;
            let n = frames.len();
            save_clip(&MotionClip::new(&skeleton, frames.into_iter().map(|f| f.frame).collect())?, &out)?;
            println!("{}", serde_json::json!({"frames": n}));
            Ok(0)
        }
        Command::EvalGen {
            corpus,
            clip,
            commands,
            seed,
            out,
        } => {
            let c = load_corpus(&corpus)?;
            let generated = read_clip(&clip, &c.skeleton)?;
            let log = parse_command_log(&std::fs::read_to_string(&commands)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = evaluate_generation(&c.embedder()?, &c.clips, &generated.frames, &log, &mut rng)?;
            emit(&r, out.as_deref())?;
            Ok(0)
        }
        Command::EvalTrack {
            policy,
            reference,
            theta,
            out,
        } => {
            if policy.len() != reference.len() {
                bail!("{} policy clips but {} reference clips", policy.len(), reference.len());
            }
            let pairs = policy
                .iter()
                .zip(&reference)
                .map(|(p, r)| Ok((read_clip(p, &skeleton)?.frames, read_clip(r, &skeleton)?.frames)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            emit(&evaluate_tracking(&skeleton, &pairs, theta)?, out.as_deref())?;
            Ok(0)
        }
        Command::Serve {
            listen,
            gen,
            buffer_blocks,
            duration,
            log,
            commands_out,
        } => {
            let g = build_generator(&gen.config())?;
            let mut config = SessionConfig::new(skeleton);
            config.listen = listen;
            config.seed = gen.seed;
            config.buffer_blocks = buffer_blocks;
            let handle = start_server(config, g)?;
            eprintln!("listening on {}", handle.local_addr());
            let (tx, rx) = std::sync::mpsc::channel();
            ctrlc::set_handler(move || {
                let _ = tx.send(());
            })
            .context("installing the Ctrl-C handler")?;
            let started = Instant::now();
            loop {
                if rx.recv_timeout(Duration::from_millis(50)).is_ok() {
                    break;
                }
                if duration.is_some_and(|d| started.elapsed().as_secs_f64() >= d) {
                    break;
                }
            }
            let record = handle.shutdown();
            if let Some(p) = log {
                write_log(&record.events, std::io::BufWriter::new(std::fs::File::create(p)?))?;
            }
            if let Some(p) = commands_out {
                std::fs::write(p, write_command_log(&record.command_log))?;
            }
            if let Some(e) = record.generator_error {
                bail!("generator stopped: {e}");
            }
            Ok(0)
        }
        Command::Latency { log, min_events } => {
            let events = read_log(std::io::BufReader::new(std::fs::File::open(&log)?))?;
            println!("{}", serde_json::to_string_pretty(&measure_latency(&events, min_events)?)?);
            Ok(0)
        }
        Command::ExportFkVectors { out, count, seed } => {
            let v = export_fk_vectors(&skeleton, count.max(1), seed)?;
            std::fs::write(out, serde_json::to_string_pretty(&v)?)?;
            Ok(0)
        }
    }
}
