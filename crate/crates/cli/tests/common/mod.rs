//! Fixture builders, a binary runner and a local chat-completions mock.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use eegunify::formats::{rawsidecar::write_rawsidecar, write_edf};
use eegunify::{Event, Recording, Unit};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const FS: f64 = 256.0;

/// Runs the binary in `cwd` with the LLM environment cleared.
pub fn eegunify(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegunify"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EEGUNIFY_LLM_BASE_URL")
        .env_remove("EEGUNIFY_LLM_MODEL")
        .env_remove("EEGUNIFY_LLM_API_KEY")
        .env_remove("EEGUNIFY_LLM_REQUESTS_PER_MINUTE")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Alpha-dominated EEG-like signal in microvolts.
pub fn eeg(seed: u64, names: &[&str], fs: f64, seconds: f64) -> Recording {
    let n = (fs * seconds).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 4.0).unwrap();
    let data = Array2::from_shape_fn((names.len(), n), |(c, i)| {
        let t = i as f64 / fs;
        let phase = 0.9 * c as f64 + seed as f64;
        20.0 * (2.0 * std::f64::consts::PI * 10.0 * t + phase).sin()
            + 6.0 * (2.0 * std::f64::consts::PI * 6.0 * t + 2.0 * phase).sin()
            + noise.sample(&mut rng)
    });
    Recording::new(
        data,
        fs,
        names.iter().map(|s| s.to_string()).collect(),
        vec![Unit::Microvolt; names.len()],
        Vec::new(),
        "",
    )
    .unwrap()
}

/// A single sinusoid of `freq` Hz on every channel.
pub fn tone(names: &[&str], fs: f64, seconds: f64, freq: f64, amp: f64) -> Recording {
    let n = (fs * seconds).round() as usize;
    let data = Array2::from_shape_fn((names.len(), n), |(c, i)| {
        amp * (2.0 * std::f64::consts::PI * freq * i as f64 / fs + c as f64).sin()
    });
    Recording::new(
        data,
        fs,
        names.iter().map(|s| s.to_string()).collect(),
        vec![Unit::Microvolt; names.len()],
        Vec::new(),
        "",
    )
    .unwrap()
}

/// Writes `time,<channels>,marker` rows; `markers` are (onset sample, code).
pub fn write_csv(rec: &Recording, path: &Path, markers: &[(usize, &str)]) {
    let mut s = String::from("time");
    for name in rec.channel_names() {
        s.push(',');
        s.push_str(name);
    }
    s.push_str(",marker\n");
    let fs = rec.sampling_rate();
    let data = rec.data();
    for i in 0..rec.n_samples() {
        s.push_str(&format!("{:.6}", i as f64 / fs));
        for c in 0..rec.n_channels() {
            s.push_str(&format!(",{:.6}", data[[c, i]]));
        }
        // Each marker lasts 8 samples.
        let code = markers
            .iter()
            .find(|(at, _)| (*at..*at + 8).contains(&i))
            .map_or("0", |(_, c)| *c);
        s.push_str(&format!(",{code}\n"));
    }
    std::fs::write(path, s).unwrap();
}

pub struct FixtureSet {
    pub root: PathBuf,
    pub clinic: PathBuf,
    pub lab: PathBuf,
}

/// Six files across EDF, CSV, MAT and raw+sidecar under two tags.
pub fn fixture_set(root: &Path) -> FixtureSet {
    let clinic = root.join("ds_clinic");
    let lab = root.join("ds_lab");
    std::fs::create_dir_all(&clinic).unwrap();
    std::fs::create_dir_all(&lab).unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");

    let c1 = eeg(1, &["Cz", "C3", "C4", "Pz"], FS, 10.0).with_events(vec![
        Event::new(1.0, 0.0, "stim"),
        Event::new(4.0, 0.0, "stim"),
        Event::new(7.5, 0.5, "rest"),
    ]);
    write_edf(&c1, clinic.join("c1.edf")).unwrap();
    let c2 = eeg(2, &["Cz", "C3", "C4", "Pz"], FS, 10.0);
    write_csv(&c2, &clinic.join("c2.csv"), &[(512, "1"), (1280, "2")]);
    std::fs::copy(fixtures.join("mat_a.mat"), clinic.join("mat_a.mat")).unwrap();

    let l1 = eeg(3, &["Fz", "Cz", "C3", "C4"], 512.0, 10.0);
    write_rawsidecar(&l1, lab.join("l1.raw")).unwrap();
    let l2 = eeg(4, &["Cz", "C3", "C4", "Oz"], 200.0, 12.0).with_events(vec![
        Event::new(2.0, 0.0, "go"),
        Event::new(11.5, 0.0, "late"),
    ]);
    write_edf(&l2, lab.join("l2.edf")).unwrap();
    std::fs::copy(fixtures.join("mat_b.mat"), lab.join("mat_b.mat")).unwrap();

    FixtureSet {
        root: root.to_path_buf(),
        clinic,
        lab,
    }
}

/// Chat-completions response body carrying `content`.
pub fn envelope(content: &str) -> String {
    serde_json::json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

/// Answers one HTTP request per scripted reply, then stops listening.
pub struct MockLlm {
    pub base_url: String,
    requests: Arc<Mutex<Vec<String>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockLlm {
    pub fn start(replies: Vec<(u16, String)>) -> MockLlm {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else {
                    return;
                };
                let mut reader = BufReader::new(stream);
                let mut length = 0usize;
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut payload = vec![0; length];
                reader.read_exact(&mut payload).unwrap();
                seen.lock().unwrap().push(format!(
                    "{}{}",
                    request_line,
                    String::from_utf8_lossy(&payload)
                ));
                let mut stream = reader.into_inner();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        MockLlm {
            base_url,
            requests,
            handle: Some(handle),
        }
    }

    /// Request line plus body of every request received so far.
    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }

    pub fn join(mut self) -> Vec<String> {
        if let Some(h) = self.handle.take() {
            h.join().unwrap();
        }
        self.requests()
    }
}
