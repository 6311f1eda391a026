//! Run untrusted candidate programs against instances.
//!
//! A candidate is a source file handed to a configurable runner command. The
//! instance goes in on stdin as `{"requirements": ..., "catalog": ...}` and a
//! selection is expected back on stdout as
//! `{"selection": {"variables": [...]}}`. Each run gets its own temporary
//! directory and process group; the whole group is killed with `SIGKILL` when
//! the wall-clock limit passes. On Linux the child's address space is capped
//! with `RLIMIT_AS`, and a private network namespace is requested when
//! allowed (unprivileged users usually get `EPERM`, which is ignored).
//!
//! Exit code conventions: status 0 means the program finished and its stdout
//! is parsed; any other status, or death by signal, is a runtime error.
//! Syntax errors are only reported by the optional compile-check command.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{check_feasibility, score, Instance, Selection};
use crate::pool::parallel_map;

/// Placeholder replaced by the candidate's source path in runner commands.
pub const FILE_PLACEHOLDER: &str = "{file}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Valid,
    Timeout,
    ConstraintViolation,
    SyntaxError,
    RuntimeError,
    JsonParseError,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Valid,
        Outcome::Timeout,
        Outcome::ConstraintViolation,
        Outcome::SyntaxError,
        Outcome::RuntimeError,
        Outcome::JsonParseError,
    ];

    /// Short name used in metrics files.
    pub fn error_type(self) -> &'static str {
        match self {
            Outcome::Valid => "none",
            Outcome::Timeout => "timeout",
            Outcome::ConstraintViolation => "constraint",
            Outcome::SyntaxError => "syntax",
            Outcome::RuntimeError => "runtime",
            Outcome::JsonParseError => "json_parse",
        }
    }

    pub fn from_error_type(name: &str) -> Option<Outcome> {
        Outcome::ALL.into_iter().find(|o| o.error_type() == name)
    }

    /// The program ran to completion with exit status 0.
    pub fn executed(self) -> bool {
        matches!(self, Outcome::Valid | Outcome::ConstraintViolation | Outcome::JsonParseError)
    }
}

/// Normalize line endings to `\n`, strip trailing whitespace from every line
/// and drop trailing blank lines.
pub fn canonicalize(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    let mut out = lines.join("\n");
    let kept = out.trim_end_matches('\n').len();
    out.truncate(kept);
    out
}

/// Hex SHA-256 of the canonical form.
pub fn source_hash(text: &str) -> String {
    let digest = Sha256::digest(canonicalize(text).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub source_text: String,
    pub source_hash: String,
    pub origin: String,
}

impl Candidate {
    pub fn new(source_text: impl Into<String>, origin: impl Into<String>) -> Candidate {
        let source_text = source_text.into();
        Candidate { source_hash: source_hash(&source_text), source_text, origin: origin.into() }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Candidate> {
        Ok(Candidate::new(std::fs::read_to_string(path)?, path.display().to_string()))
    }
}

/// Pull the body of the single `<code>...</code>` block out of a model
/// generation. Returns `None` for zero or several blocks. A Markdown fence
/// wrapping the whole body is removed.
pub fn extract_code_block(text: &str) -> Option<Candidate> {
    if text.matches("<code>").count() != 1 || text.matches("</code>").count() != 1 {
        return None;
    }
    let start = text.find("<code>")? + "<code>".len();
    let end = text.find("</code>")?;
    if end < start {
        return None;
    }
    let mut body = text[start..end].trim();
    if let Some(rest) = body.strip_prefix("```") {
        if let (Some(nl), Some(stripped)) = (rest.find('\n'), rest.strip_suffix("```")) {
            body = stripped[nl.min(stripped.len())..].trim();
        }
    }
    Some(Candidate::new(canonicalize(body), "generation"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRun {
    pub instance_uuid: String,
    pub outcome: Outcome,
    /// Present for `Valid` and `ConstraintViolation`.
    pub selection: Option<Selection>,
    /// Recomputed from the selection, never taken from the candidate.
    pub score: Option<f64>,
    pub n_vio: usize,
    pub elapsed_sec: f64,
    pub stderr_excerpt: String,
}

impl CandidateRun {
    pub fn feasible(&self) -> bool {
        self.outcome == Outcome::Valid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunnerConfig {
    /// Program and arguments; `{file}` is replaced by the source path and
    /// appended when absent.
    pub command: Vec<String>,
    /// Optional compile-only check run once per distinct source. A nonzero
    /// exit marks every run of that source as a syntax error.
    pub compile_command: Option<Vec<String>>,
    pub compile_timeout_sec: f64,
    /// File name the source is written to inside the run directory.
    pub file_name: String,
    /// Address-space cap for the child, in MiB.
    pub memory_limit_mb: Option<u64>,
    pub deny_network: bool,
    pub stderr_excerpt_bytes: usize,
    pub max_stdout_bytes: usize,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            command: vec!["python3".into(), FILE_PLACEHOLDER.into()],
            compile_command: Some(vec!["python3".into(), "-m".into(), "py_compile".into(), FILE_PLACEHOLDER.into()]),
            compile_timeout_sec: 30.0,
            file_name: "candidate.py".into(),
            memory_limit_mb: Some(2048),
            deny_network: true,
            stderr_excerpt_bytes: 2000,
            max_stdout_bytes: 16 << 20,
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("runner command is empty")]
    EmptyCommand,
    #[error("runner {program:?} cannot be executed: {source}")]
    RunnerNotExecutable { program: String, source: std::io::Error },
    #[error("timeout must be positive and finite, got {0}")]
    BadTimeout(f64),
    #[error("sandbox I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

struct Exec {
    status: Option<ExitStatus>,
    timed_out: bool,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    elapsed: f64,
}

/// Executes candidates under one [`RunnerConfig`]. Safe to share between
/// threads; compile-check verdicts are cached by source hash.
#[derive(Debug)]
pub struct Harness {
    pub config: RunnerConfig,
    compile_cache: Mutex<HashMap<String, Option<String>>>,
}

impl Harness {
    pub fn new(config: RunnerConfig) -> Harness {
        Harness { config, compile_cache: Mutex::new(HashMap::new()) }
    }

    /// Check that the runner program can be started at all.
    pub fn check_runner(&self) -> Result<(), SandboxError> {
        let program = self.config.command.first().ok_or(SandboxError::EmptyCommand)?;
        match Command::new(program).arg("--version").stdout(Stdio::null()).stderr(Stdio::null()).status() {
            Ok(_) => Ok(()),
            Err(source) => Err(SandboxError::RunnerNotExecutable { program: program.clone(), source }),
        }
    }

    pub fn run(&self, cand: &Candidate, inst: &Instance, timeout_sec: f64) -> Result<CandidateRun, SandboxError> {
        if !(timeout_sec.is_finite() && timeout_sec > 0.0) {
            return Err(SandboxError::BadTimeout(timeout_sec));
        }
        let failed = |outcome, elapsed_sec, stderr: String| CandidateRun {
            instance_uuid: inst.uuid.clone(),
            outcome,
            selection: None,
            score: None,
            n_vio: 0,
            elapsed_sec,
            stderr_excerpt: stderr,
        };
        if let Some(diag) = self.compile_check(cand)? {
            return Ok(failed(Outcome::SyntaxError, 0.0, diag));
        }
        let dir = tempfile::tempdir()?;
        let path = dir.path().join(&self.config.file_name);
        std::fs::write(&path, &cand.source_text)?;
        let argv = expand(&self.config.command, &path)?;
        let exec = self.execute(&argv, dir.path(), Some(inst.candidate_payload().into_bytes()), timeout_sec)?;
        let stderr = self.excerpt(&exec.stderr);
        if exec.timed_out {
            return Ok(failed(Outcome::Timeout, exec.elapsed, stderr));
        }
        if !exec.status.is_some_and(|s| s.success()) {
            return Ok(failed(Outcome::RuntimeError, exec.elapsed, stderr));
        }
        let Some(sel) = parse_selection(&exec.stdout, inst.n()) else {
            return Ok(failed(Outcome::JsonParseError, exec.elapsed, stderr));
        };
        let report = check_feasibility(inst, &sel).expect("indices checked while parsing");
        Ok(CandidateRun {
            instance_uuid: inst.uuid.clone(),
            outcome: if report.feasible { Outcome::Valid } else { Outcome::ConstraintViolation },
            score: Some(score(inst, &sel).expect("indices checked while parsing")),
            selection: Some(sel),
            n_vio: report.n_vio,
            elapsed_sec: exec.elapsed,
            stderr_excerpt: stderr,
        })
    }

    /// Run one candidate over many instances. Results follow input order.
    pub fn run_batch(
        &self,
        cand: &Candidate,
        instances: &[Instance],
        timeout_sec: f64,
        workers: usize,
    ) -> Result<Vec<CandidateRun>, SandboxError> {
        if instances.is_empty() {
            return Ok(Vec::new());
        }
        self.compile_check(cand)?;
        parallel_map(instances, workers, |_, inst| self.run(cand, inst, timeout_sec)).into_iter().collect()
    }

    /// `Some(diagnostic)` when the compile check rejects the source.
    fn compile_check(&self, cand: &Candidate) -> Result<Option<String>, SandboxError> {
        let Some(template) = &self.config.compile_command else {
            return Ok(None);
        };
        if let Some(v) = self.compile_cache.lock().unwrap().get(&cand.source_hash) {
            return Ok(v.clone());
        }
        let dir = tempfile::tempdir()?;
        let path = dir.path().join(&self.config.file_name);
        std::fs::write(&path, &cand.source_text)?;
        let argv = expand(template, &path)?;
        let exec = self.execute(&argv, dir.path(), None, self.config.compile_timeout_sec)?;
        let verdict = if exec.timed_out || !exec.status.is_some_and(|s| s.success()) {
            Some(self.excerpt(&exec.stderr))
        } else {
            None
        };
        self.compile_cache.lock().unwrap().insert(cand.source_hash.clone(), verdict.clone());
        Ok(verdict)
    }

    fn excerpt(&self, bytes: &[u8]) -> String {
        let text = String::from_utf8_lossy(bytes);
        let limit = self.config.stderr_excerpt_bytes;
        if text.len() <= limit {
            return text.into_owned();
        }
        let mut cut = text.len() - limit;
        while !text.is_char_boundary(cut) {
            cut += 1;
        }
        format!("...{}", &text[cut..])
    }

    fn execute(&self, argv: &[String], dir: &Path, stdin: Option<Vec<u8>>, timeout_sec: f64) -> Result<Exec, SandboxError> {
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .current_dir(dir)
            .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        let mem = self.config.memory_limit_mb;
        let deny_network = self.config.deny_network;
        // SAFETY: only async-signal-safe libc calls run between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                if let Some(mb) = mem {
                    let bytes = (mb as libc::rlim_t).saturating_mul(1 << 20);
                    let lim = libc::rlimit { rlim_cur: bytes, rlim_max: bytes };
                    libc::setrlimit(libc::RLIMIT_AS, &lim);
                }
                if deny_network {
                    libc::unshare(libc::CLONE_NEWNET);
                }
                Ok(())
            });
        }
        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|source| SandboxError::RunnerNotExecutable { program: argv[0].clone(), source })?;
        let pgid = child.id() as libc::pid_t;
        let writer = match (stdin, child.stdin.take()) {
            (Some(bytes), Some(mut pipe)) => Some(std::thread::spawn(move || {
                let _ = pipe.write_all(&bytes);
            })),
            _ => None,
        };
        let cap = self.config.max_stdout_bytes;
        let out_pipe = child.stdout.take().expect("stdout piped");
        let err_pipe = child.stderr.take().expect("stderr piped");
        let out_reader = std::thread::spawn(move || drain(out_pipe, cap));
        let err_reader = std::thread::spawn(move || drain(err_pipe, 1 << 20));

        let deadline = start + Duration::from_secs_f64(timeout_sec);
        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if Instant::now() >= deadline {
                timed_out = true;
                break None;
            }
            std::thread::sleep(Duration::from_millis(2));
        };
        let elapsed = start.elapsed().as_secs_f64();
        // Also reaps stray grandchildren that would keep the pipes open.
        // SAFETY: signalling our own child's process group.
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
        let status = match status {
            Some(s) => Some(s),
            None => {
                child.wait()?;
                None
            }
        };
        if let Some(w) = writer {
            let _ = w.join();
        }
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        Ok(Exec { status, timed_out, stdout, stderr, elapsed })
    }
}

fn drain<R: Read>(mut pipe: R, cap: usize) -> Vec<u8> {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        match pipe.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(k) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..k.min(room)]);
            }
        }
    }
    kept
}

fn expand(template: &[String], path: &Path) -> Result<Vec<String>, SandboxError> {
    if template.is_empty() {
        return Err(SandboxError::EmptyCommand);
    }
    let file = path.display().to_string();
    let mut argv: Vec<String> = template.iter().map(|a| a.replace(FILE_PLACEHOLDER, &file)).collect();
    if !template.iter().any(|a| a.contains(FILE_PLACEHOLDER)) {
        argv.push(file);
    }
    Ok(argv)
}

/// Read the first JSON document on stdout. Out-of-range or non-integer
/// indices count as a malformed answer.
pub fn parse_selection(stdout: &[u8], n: usize) -> Option<Selection> {
    let doc = serde_json::Deserializer::from_slice(stdout).into_iter::<serde_json::Value>().next()?.ok()?;
    let vars = doc.get("selection")?.get("variables")?.as_array()?;
    let mut out = Vec::with_capacity(vars.len());
    for v in vars {
        let i = usize::try_from(v.as_u64()?).ok()?;
        if i >= n {
            return None;
        }
        out.push(i);
    }
    Some(Selection::new(out))
}
