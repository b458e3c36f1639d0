//! Streaming motion server.
//!
//! Three kinds of threads cooperate:
//!
//! * one receiver per client parses inbound lines, answers pings, and
//!   writes commands into a single pending-command slot (last writer wins);
//! * the generator runs once per block period, latches the pending command,
//!   generates one block, and pushes it into the motion buffer;
//! * the emitter pops one frame per frame period and broadcasts it to every
//!   client, repeating the last frame when the buffer is empty.
//!
//! Frame messages carry two indices: `frame_index` counts emitter ticks and
//! never skips, while `motion_index` identifies the generated frame shown
//! and repeats while the emitter holds.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steer_core::primitive::{init_rollout, rollout_step_embedded, run_blocks, IDLE_COMMAND, T_FUTURE};
use steer_core::{Quat, RawMotionFrame, SkeletonSpec, FRAME_RATE_HZ};

use crate::artifacts::DynGenerator;
use crate::error::{Error, Result};
use crate::latency::LogEvent;
use crate::protocol::{parse_inbound, Inbound, Outbound, SkeletonWire, MAX_LINE_BYTES, PROTOCOL_VERSION};
use crate::shared_buffer::SharedMotionBuffer;
use crate::spans::CommandLogEntry;

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:7878";

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub listen: String,
    pub skeleton: SkeletonSpec,
    /// Emitter period; the generator period is this times `frames_per_block`.
    pub frame_period: Duration,
    pub frames_per_block: usize,
    pub buffer_blocks: usize,
    pub seed: u64,
    pub seed_pose: RawMotionFrame,
    /// Delay between the first generator step and the first emitter tick.
    pub emitter_lead: Duration,
    /// Emitter ticks between status broadcasts.
    pub status_every: u64,
}

impl SessionConfig {
    pub fn new(skeleton: SkeletonSpec) -> Self {
        let seed_pose = default_seed_pose(&skeleton);
        Self {
            listen: DEFAULT_LISTEN_ADDR.into(),
            skeleton,
            frame_period: Duration::from_micros((1e6 / FRAME_RATE_HZ) as u64),
            frames_per_block: T_FUTURE,
            buffer_blocks: steer_core::primitive::DEFAULT_BUFFER_BLOCKS,
            seed: 0,
            seed_pose,
            emitter_lead: Duration::from_millis(40),
            status_every: 50,
        }
    }

    pub fn generator_period(&self) -> Duration {
        self.frame_period * self.frames_per_block as u32
    }
}

/// Standing at the origin facing +x, with the lower ankle 4 cm above the
/// ground, all joints at zero.
pub fn default_seed_pose(skeleton: &SkeletonSpec) -> RawMotionFrame {
    let q = vec![0.0; skeleton.n_q()];
    let z = steer_core::forward_kinematics(skeleton, [0.0; 3], Quat::IDENTITY, &q)
        .map(|p| {
            let (l, r) = skeleton.ankles;
            0.04 - p.link_positions[l + 1][2].min(p.link_positions[r + 1][2])
        })
        .unwrap_or(0.0);
    RawMotionFrame::standing([0.0, 0.0, z], Quat::IDENTITY, q)
}

/// A generated frame with its position in the motion stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFrame {
    pub motion_index: u64,
    pub frame: RawMotionFrame,
    pub command: String,
}

/// Everything a session produced, returned on shutdown.
#[derive(Debug, Clone, Default)]
pub struct SessionRecord {
    pub events: Vec<LogEvent>,
    pub command_log: Vec<CommandLogEntry>,
    /// Every generated frame, in motion order.
    pub generated: Vec<StreamFrame>,
    pub frames_emitted: u64,
    pub underruns: u64,
    pub overruns: u64,
    pub generator_error: Option<String>,
}

struct Client {
    writer: Mutex<TcpStream>,
    alive: AtomicBool,
}

impl Client {
    fn send(&self, line: &str) -> bool {
        if !self.alive.load(Ordering::Acquire) {
            return false;
        }
        let ok = self
            .writer
            .lock()
            .map(|mut w| w.write_all(line.as_bytes()).and_then(|_| w.flush()).is_ok())
            .unwrap_or(false);
        if !ok {
            self.close();
        }
        ok
    }

    fn close(&self) {
        self.alive.store(false, Ordering::Release);
        if let Ok(w) = self.writer.lock() {
            let _ = w.shutdown(Shutdown::Both);
        }
    }
}

struct Shared {
    start: Instant,
    stop: AtomicBool,
    pending: Mutex<String>,
    clients: Mutex<Vec<Arc<Client>>>,
    log: Mutex<Vec<LogEvent>>,
    record: Mutex<SessionRecord>,
    buffer: SharedMotionBuffer<StreamFrame>,
    generator_steps: AtomicU64,
    hello: String,
    generator_period_ms: f64,
}

impl Shared {
    fn now_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    fn log(&self, e: LogEvent) {
        self.log.lock().expect("log lock").push(e);
    }

    fn broadcast(&self, line: &str) {
        let clients: Vec<Arc<Client>> = self.clients.lock().expect("clients lock").clone();
        let mut dead = false;
        for c in &clients {
            dead |= !c.send(line);
        }
        if dead {
            self.clients
                .lock()
                .expect("clients lock")
                .retain(|c| c.alive.load(Ordering::Acquire));
        }
    }

    fn status(&self) -> Outbound {
        Outbound::Status {
            buffer_depth: self.buffer.depth(),
            underruns: self.buffer.underrun_count(),
            overruns: self.buffer.overrun_count(),
            generator_period_ms: self.generator_period_ms,
            generator_steps: self.generator_steps.load(Ordering::Acquire),
        }
    }
}

/// A running server; dropping it without [`shutdown`](Self::shutdown)
/// leaves the threads running until the process exits.
pub struct ServerHandle {
    shared: Arc<Shared>,
    addr: SocketAddr,
    threads: Vec<JoinHandle<()>>,
    receivers: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn is_stopping(&self) -> bool {
        self.shared.stop.load(Ordering::Acquire)
    }

    /// Stops the loops, sends a final status to every client, closes all
    /// connections, and returns the session record.
    pub fn shutdown(self) -> SessionRecord {
        self.shared.stop.store(true, Ordering::Release);
        for t in self.threads {
            let _ = t.join();
        }
        self.shared.broadcast(&self.shared.status().to_line());
        for c in self.shared.clients.lock().expect("clients lock").drain(..) {
            c.close();
        }
        for t in self.receivers.lock().expect("receivers lock").drain(..) {
            let _ = t.join();
        }
        let mut record = std::mem::take(&mut *self.shared.record.lock().expect("record lock"));
        record.events = std::mem::take(&mut *self.shared.log.lock().expect("log lock"));
        record.underruns = self.shared.buffer.underrun_count();
        record.overruns = self.shared.buffer.overrun_count();
        record
    }
}

/// Binds the listen address and starts the session threads.
pub fn start_server(config: SessionConfig, generator: DynGenerator) -> Result<ServerHandle> {
    if generator.t_future() != config.frames_per_block {
        return Err(Error::format(
            "session config",
            format!(
                "generator emits {} frames per block, config expects {}",
                generator.t_future(),
                config.frames_per_block
            ),
        ));
    }
    if config.frame_period.is_zero() || config.buffer_blocks == 0 {
        return Err(Error::format("session config", "frame period and buffer size must be positive"));
    }
    let listener = TcpListener::bind(&config.listen)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let state = init_rollout(&config.seed_pose)?;
    let hello = Outbound::Hello {
        protocol_version: PROTOCOL_VERSION,
        frame_rate: 1.0 / config.frame_period.as_secs_f64(),
        frames_per_block: config.frames_per_block,
        idle_command: IDLE_COMMAND.into(),
        skeleton: SkeletonWire::from(&config.skeleton),
    }
    .to_line();
    let neutral = StreamFrame {
        motion_index: 0,
        frame: config.seed_pose.clone(),
        command: IDLE_COMMAND.into(),
    };
    let shared = Arc::new(Shared {
        start: Instant::now(),
        stop: AtomicBool::new(false),
        pending: Mutex::new(IDLE_COMMAND.into()),
        clients: Mutex::new(Vec::new()),
        log: Mutex::new(Vec::new()),
        record: Mutex::new(SessionRecord::default()),
        buffer: SharedMotionBuffer::new(config.buffer_blocks, neutral),
        generator_steps: AtomicU64::new(0),
        hello,
        generator_period_ms: config.generator_period().as_secs_f64() * 1e3,
    });
    let receivers = Arc::new(Mutex::new(Vec::new()));

    let acceptor = {
        let shared = shared.clone();
        let receivers = receivers.clone();
        std::thread::Builder::new()
            .name("steer-accept".into())
            .spawn(move || accept_loop(listener, shared, receivers))?
    };
    let producer = {
        let shared = shared.clone();
        let period = config.generator_period();
        let seed = config.seed;
        std::thread::Builder::new()
            .name("steer-generator".into())
            .spawn(move || generator_loop(shared, generator, state, seed, period))?
    };
    let emitter = {
        let shared = shared.clone();
        let config = config.clone();
        std::thread::Builder::new()
            .name("steer-emitter".into())
            .spawn(move || emitter_loop(shared, &config))?
    };
    Ok(ServerHandle {
        shared,
        addr,
        threads: vec![producer, emitter, acceptor],
        receivers,
    })
}

fn sleep_until(deadline: Instant, shared: &Shared) -> bool {
    loop {
        if shared.stop.load(Ordering::Acquire) {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        std::thread::sleep((deadline - now).min(Duration::from_millis(5)));
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, receivers: Arc<Mutex<Vec<JoinHandle<()>>>>) {
    while !shared.stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("client connected from {peer}");
                if let Err(e) = add_client(stream, &shared, &receivers) {
                    log::warn!("dropping client {peer}: {e}");
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn add_client(
    stream: TcpStream,
    shared: &Arc<Shared>,
    receivers: &Arc<Mutex<Vec<JoinHandle<()>>>>,
) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_write_timeout(Some(Duration::from_millis(500)))?;
    let reader = stream.try_clone()?;
    let client = Arc::new(Client {
        writer: Mutex::new(stream),
        alive: AtomicBool::new(true),
    });
    if !client.send(&shared.hello) {
        return Err(std::io::Error::other("hello failed"));
    }
    shared.clients.lock().expect("clients lock").push(client.clone());
    let shared = shared.clone();
    let h = std::thread::Builder::new()
        .name("steer-recv".into())
        .spawn(move || receive_loop(reader, client, shared))?;
    receivers.lock().expect("receivers lock").push(h);
    Ok(())
}

fn receive_loop(stream: TcpStream, client: Arc<Client>, shared: Arc<Shared>) {
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = match reader.by_ref().take(MAX_LINE_BYTES as u64 + 1).read_until(b'\n', &mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        let terminated = buf.last() == Some(&b'\n');
        if !terminated && n > MAX_LINE_BYTES {
            client.send(
                &Outbound::Error {
                    code: "line_too_long".into(),
                    message: format!("lines are limited to {MAX_LINE_BYTES} bytes"),
                }
                .to_line(),
            );
            let mut skip = Vec::new();
            if reader.read_until(b'\n', &mut skip).map_or(true, |k| k == 0) {
                break;
            }
            continue;
        }
        let Ok(line) = std::str::from_utf8(&buf) else {
            client.send(
                &Outbound::Error {
                    code: "invalid_utf8".into(),
                    message: "messages must be UTF-8".into(),
                }
                .to_line(),
            );
            continue;
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let t_ms = shared.now_ms();
        match parse_inbound(line) {
            Ok(Inbound::Command { text, client_time_ms }) => {
                let text = text.trim().to_string();
                if text.is_empty() {
                    client.send(
                        &Outbound::Error {
                            code: "empty_command".into(),
                            message: "command text is empty".into(),
                        }
                        .to_line(),
                    );
                    continue;
                }
                // Log before publishing so the receipt precedes any latch of it.
                shared.log(LogEvent::CommandReceived {
                    t_ms,
                    text: text.clone(),
                    client_time_ms,
                });
                *shared.pending.lock().expect("pending lock") = text;
            }
            Ok(Inbound::Ping { nonce }) => {
                let server_time_ms = shared.now_ms();
                client.send(&Outbound::Pong { nonce, server_time_ms }.to_line());
                shared.log(LogEvent::Pong {
                    t_ms,
                    duration_ms: shared.now_ms() - t_ms,
                });
            }
            Err(reply) => {
                client.send(&reply.to_line());
            }
        }
    }
    client.close();
}

fn generator_loop(
    shared: Arc<Shared>,
    generator: DynGenerator,
    mut state: steer_core::primitive::RolloutState,
    seed: u64,
    period: Duration,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = Instant::now();
    let mut step: u32 = 0;
    loop {
        if !sleep_until(origin + period * step, &shared) {
            break;
        }
        let command = shared.pending.lock().expect("pending lock").clone();
        let t0 = Instant::now();
        let text = generator.embed(&command);
        let t1 = Instant::now();
        let block = match rollout_step_embedded(&mut state, &*generator, &command, text.as_ref(), &mut rng) {
            Ok(b) => b,
            Err(e) => {
                log::error!("generator failed: {e}");
                shared.record.lock().expect("record lock").generator_error = Some(e.to_string());
                shared.broadcast(
                    &Outbound::Error {
                        code: "generator_failed".into(),
                        message: e.to_string(),
                    }
                    .to_line(),
                );
                break;
            }
        };
        let t2 = Instant::now();
        let first = block.first_frame as u64;
        let frames: Vec<StreamFrame> = block
            .frames
            .into_iter()
            .enumerate()
            .map(|(i, frame)| StreamFrame {
                motion_index: first + i as u64,
                frame,
                command: command.clone(),
            })
            .collect();
        {
            let mut r = shared.record.lock().expect("record lock");
            r.command_log.push(CommandLogEntry {
                motion_index: first as usize,
                command: command.clone(),
            });
            r.generated.extend(frames.iter().cloned());
        }
        shared.buffer.push_block(frames);
        shared.generator_steps.fetch_add(1, Ordering::AcqRel);
        let t_ms = (t0 - shared.start).as_secs_f64() * 1e3;
        shared.log(LogEvent::Embed {
            t_ms,
            duration_ms: (t1 - t0).as_secs_f64() * 1e3,
        });
        shared.log(LogEvent::Generate {
            t_ms,
            duration_ms: (t2 - t1).as_secs_f64() * 1e3,
            motion_index: first,
            command,
        });
        step += 1;
    }
}

fn emitter_loop(shared: Arc<Shared>, config: &SessionConfig) {
    let origin = Instant::now() + config.emitter_lead;
    let mut tick: u64 = 0;
    let mut on_air: Option<String> = None;
    loop {
        if !sleep_until(origin + config.frame_period * tick as u32, &shared) {
            break;
        }
        let popped = shared.buffer.pop_frame();
        let t_ms = shared.now_ms();
        let f = &popped.frame;
        if popped.held {
            shared.log(LogEvent::Underrun { t_ms, frame_index: tick });
        } else if on_air.as_deref() != Some(f.command.as_str()) {
            shared.log(LogEvent::CommandOnAir {
                t_ms,
                frame_index: tick,
                motion_index: f.motion_index,
                command: f.command.clone(),
            });
            on_air = Some(f.command.clone());
        }
        let msg = Outbound::Frame {
            frame_index: tick,
            motion_index: f.motion_index,
            held: popped.held,
            time_ms: t_ms,
            root_position: f.frame.root_position,
            root_quaternion: f.frame.root_orientation.to_array(),
            q: f.frame.q.clone(),
            contacts: f.frame.contacts.clone(),
            active_command: f.command.clone(),
        };
        shared.broadcast(&msg.to_line());
        tick += 1;
        shared.record.lock().expect("record lock").frames_emitted = tick;
        if config.status_every > 0 && tick.is_multiple_of(config.status_every) {
            shared.broadcast(&shared.status().to_line());
        }
    }
}

/// Regenerates a session offline from its command log: one block per log
/// entry, same seed and seed pose. Returns the generated frames in order.
pub fn replay_offline(
    generator: &DynGenerator,
    seed_pose: &RawMotionFrame,
    seed: u64,
    command_log: &[CommandLogEntry],
) -> Result<Vec<StreamFrame>> {
    let t = generator.t_future();
    for (b, e) in command_log.iter().enumerate() {
        if e.motion_index != b * t {
            return Err(Error::format(
                "command log",
                format!("entry {b} starts at frame {}, expected {}", e.motion_index, b * t),
            ));
        }
    }
    let mut state = init_rollout(seed_pose)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let commands: Vec<String> = command_log.iter().map(|e| e.command.clone()).collect();
    let session = run_blocks(&mut state, &**generator, &commands, &mut rng)?;
    Ok(session
        .frames
        .into_iter()
        .zip(session.frame_commands)
        .enumerate()
        .map(|(i, (frame, command))| StreamFrame {
            motion_index: i as u64,
            frame,
            command,
        })
        .collect())
}
