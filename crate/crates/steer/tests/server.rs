use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use steer::core::kinematics::builtin::biped5;
use steer::core::primitive::HoldGenerator;
use steer::latency::{end_to_end, LogEvent};
use steer::protocol::MAX_LINE_BYTES;
use steer::server::{replay_offline, start_server, ServerHandle, SessionConfig};

fn start() -> ServerHandle {
    let mut config = SessionConfig::new(biped5());
    config.listen = "127.0.0.1:0".into();
    start_server(config, Box::new(HoldGenerator::default())).unwrap()
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Conn {
    fn open(handle: &ServerHandle) -> Self {
        let s = TcpStream::connect(handle.local_addr()).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        Self {
            writer: s.try_clone().unwrap(),
            reader: BufReader::new(s),
        }
    }

    fn send_raw(&mut self, bytes: &[u8]) {
        self.writer.write_all(bytes).unwrap();
    }

    fn send(&mut self, v: Value) {
        self.send_raw(format!("{v}\n").as_bytes());
    }

    fn recv(&mut self) -> Value {
        let mut line = String::new();
        assert!(self.reader.read_line(&mut line).unwrap() > 0, "connection closed");
        serde_json::from_str(&line).unwrap()
    }

    /// Reads until a message of type `ty` arrives, returning it and every
    /// frame seen on the way.
    fn until(&mut self, ty: &str) -> (Value, Vec<Value>) {
        let mut frames = Vec::new();
        loop {
            let m = self.recv();
            if m["type"] == ty {
                return (m, frames);
            }
            if m["type"] == "frame" {
                frames.push(m);
            }
        }
    }

    fn frames_for(&mut self, d: Duration) -> Vec<Value> {
        let end = Instant::now() + d;
        let mut out = Vec::new();
        while Instant::now() < end {
            let m = self.recv();
            if m["type"] == "frame" {
                out.push(m);
            }
        }
        out
    }
}

#[test]
fn hello_describes_the_stream() {
    let h = start();
    let mut c = Conn::open(&h);
    let hello = c.recv();
    assert_eq!(hello["type"], "hello");
    assert_eq!(hello["protocol_version"], 1);
    assert_eq!(hello["frame_rate"], 50.0);
    assert_eq!(hello["frames_per_block"], 8);
    assert_eq!(hello["idle_command"], "stand");
    assert_eq!(hello["skeleton"]["name"], "biped5");
    assert_eq!(hello["skeleton"]["joints"].as_array().unwrap().len(), 5);
    drop(c);
    h.shutdown();
}

#[test]
fn ping_is_answered_and_bad_input_keeps_the_connection() {
    let h = start();
    let mut c = Conn::open(&h);
    c.recv();
    c.send(json!({"type": "ping", "nonce": {"k": [1, 2]}}));
    let (pong, _) = c.until("pong");
    assert_eq!(pong["nonce"], json!({"k": [1, 2]}));
    assert!(pong["server_time_ms"].as_f64().unwrap() >= 0.0);

    c.send_raw(b"not json\n");
    let (err, _) = c.until("error");
    assert_eq!(err["code"], "malformed_message");
    c.send(json!({"type": "teleport"}));
    c.until("error");
    c.send(json!({"type": "command", "text": "   "}));
    let (err, _) = c.until("error");
    assert_eq!(err["code"], "empty_command");
    c.send_raw(&[0xff, 0xfe, b'\n']);
    let (err, _) = c.until("error");
    assert_eq!(err["code"], "invalid_utf8");
    let mut long = vec![b'a'; MAX_LINE_BYTES + 10];
    long.push(b'\n');
    c.send_raw(&long);
    let (err, _) = c.until("error");
    assert_eq!(err["code"], "line_too_long");

    c.send(json!({"type": "ping", "nonce": "still here"}));
    let (pong, _) = c.until("pong");
    assert_eq!(pong["nonce"], "still here");
    drop(c);
    h.shutdown();
}

#[test]
fn commands_latch_on_block_boundaries() {
    let h = start();
    let mut c = Conn::open(&h);
    c.recv();
    let mut frames = c.frames_for(Duration::from_millis(500));
    assert!(frames.iter().all(|f| f["active_command"] == "stand"));
    c.send(json!({"type": "command", "text": "wave left hand", "client_time_ms": 1.0}));
    frames.extend(c.frames_for(Duration::from_millis(800)));
    c.send(json!({"type": "command", "text": "walk"}));
    frames.extend(c.frames_for(Duration::from_millis(800)));

    for w in frames.windows(2) {
        assert_eq!(w[1]["frame_index"].as_u64().unwrap(), w[0]["frame_index"].as_u64().unwrap() + 1);
    }
    let mut switches = 0;
    for w in frames.windows(2) {
        if w[0]["active_command"] != w[1]["active_command"] {
            switches += 1;
            assert_eq!(w[1]["motion_index"].as_u64().unwrap() % 8, 0, "{}", w[1]);
            assert_eq!(w[1]["held"], false);
        }
    }
    assert_eq!(switches, 2);
    assert_eq!(frames.last().unwrap()["active_command"], "walk");
    drop(c);

    let record = h.shutdown();
    assert_eq!(record.underruns, 0);
    let latencies = end_to_end(&record.events);
    assert_eq!(latencies.len(), 2);
    for l in &latencies {
        assert!(*l > 0.0 && *l < 1000.0, "{l}");
    }
    assert!(record
        .events
        .iter()
        .any(|e| matches!(e, LogEvent::CommandReceived { text, client_time_ms: Some(t), .. } if text == "wave left hand" && *t == 1.0)));
}

#[test]
fn every_client_sees_the_same_stream() {
    let h = start();
    let mut a = Conn::open(&h);
    let mut b = Conn::open(&h);
    a.recv();
    b.recv();
    let fa = a.frames_for(Duration::from_millis(400));
    let fb = b.frames_for(Duration::from_millis(400));
    let common: Vec<_> = fa
        .iter()
        .filter_map(|x| fb.iter().find(|y| y["frame_index"] == x["frame_index"]).map(|y| (x, y)))
        .collect();
    assert!(common.len() > 5);
    for (x, y) in common {
        assert_eq!(x, y);
    }
    drop((a, b));
    h.shutdown();
}

#[test]
fn recorded_session_replays_offline() {
    let h = start();
    let mut c = Conn::open(&h);
    c.recv();
    c.frames_for(Duration::from_millis(300));
    c.send(json!({"type": "command", "text": "walk"}));
    c.frames_for(Duration::from_millis(500));
    drop(c);
    let record = h.shutdown();
    assert!(record.command_log.iter().any(|e| e.command == "walk"));
    let seed_pose = SessionConfig::new(biped5()).seed_pose;
    let replay = replay_offline(&(Box::new(HoldGenerator::default()) as _), &seed_pose, 0, &record.command_log).unwrap();
    assert_eq!(replay, record.generated);
}
