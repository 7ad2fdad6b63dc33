//! Subprocess execution of composed test programs.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

/// Cap on captured stdout/stderr per stream.
pub const OUTPUT_CAP: usize = 1 << 20;

pub const PYTHON_ENV: &str = "PROCURE_PY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Exited(i32),
    /// Terminated by a signal or otherwise without an exit code.
    Crashed,
    TimedOut,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("interpreter `{0}` could not be started: {1}")]
    Unavailable(String, String),
    #[error("sandbox I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

pub fn interpreter() -> PathBuf {
    std::env::var_os(PYTHON_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("python3"))
}

fn capped_reader<R: Read + Send + 'static>(mut r: R) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match r.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = OUTPUT_CAP.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

/// Runs `program` as a script in a fresh interpreter process inside a
/// temporary working directory.
pub fn run_script(program: &str, timeout: Duration) -> Result<RunResult, SandboxError> {
    let dir = tempfile::tempdir()?;
    let script = dir.path().join("main.py");
    std::fs::write(&script, program)?;
    let python = interpreter();
    let start = Instant::now();
    let mut child = Command::new(&python)
        .arg("-B")
        .arg(&script)
        .current_dir(dir.path())
        .env("PYTHONHASHSEED", "0")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SandboxError::Unavailable(python.display().to_string(), e.to_string()))?;
    let out = capped_reader(child.stdout.take().expect("piped stdout"));
    let err = capped_reader(child.stderr.take().expect("piped stderr"));
    let status = match child.wait_timeout(timeout)? {
        Some(s) => match s.code() {
            Some(c) => RunStatus::Exited(c),
            None => RunStatus::Crashed,
        },
        None => {
            let _ = child.kill();
            let _ = child.wait();
            RunStatus::TimedOut
        }
    };
    let elapsed = start.elapsed();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    Ok(RunResult { status, stdout, stderr, elapsed })
}
