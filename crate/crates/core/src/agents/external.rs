//! External agents: a subprocess speaking the wire protocol over stdio, or an
//! HTTP endpoint accepting one request per POST.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde_json::json;

use super::parse::parse_action;
use super::protocol::{decode_response, WireRequest, WireResponse};
use super::{Agent, AgentDescriptor, AgentError, AgentRng, Decision, DecisionContext};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq)]
pub enum Transport {
    /// Program and arguments; spawned on first use.
    Stdio { command: Vec<String> },
    Http { url: String },
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Process {
    fn spawn(command: &[String]) -> Result<Process, AgentError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| AgentError::Config("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AgentError::DeadEndpoint(format!("cannot start '{program}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Process { child, stdin, lines: rx })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalAgent {
    id: String,
    transport: Transport,
    timeout: Duration,
    process: Option<Process>,
    http: Option<ureq::Agent>,
}

impl std::fmt::Debug for ExternalAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalAgent")
            .field("id", &self.id)
            .field("transport", &self.transport)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalAgent {
    pub fn new(id: impl Into<String>, transport: Transport, timeout: Duration) -> Result<Self, AgentError> {
        if let Transport::Stdio { command } = &transport {
            if command.is_empty() {
                return Err(AgentError::Config("stdio agent needs a command".into()));
            }
        }
        Ok(ExternalAgent {
            id: id.into(),
            transport,
            timeout,
            process: None,
            http: None,
        })
    }

    /// Sends one request and returns the decoded response.
    pub fn exchange(&mut self, request: &WireRequest) -> Result<WireResponse, AgentError> {
        let line = request.to_line();
        match self.transport.clone() {
            Transport::Stdio { command } => self.exchange_stdio(&command, &line),
            Transport::Http { url } => self.exchange_http(&url, &line),
        }
    }

    fn exchange_stdio(&mut self, command: &[String], line: &str) -> Result<WireResponse, AgentError> {
        if self.process.is_none() {
            self.process = Some(Process::spawn(command)?);
        }
        let proc = self.process.as_mut().expect("spawned");
        let sent = writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush());
        if let Err(e) = sent {
            self.shutdown();
            return Err(AgentError::DeadEndpoint(format!("write failed: {e}")));
        }
        let reply = proc.lines.recv_timeout(self.timeout);
        match reply {
            Ok(Ok(text)) => decode_response(&text),
            Ok(Err(e)) => {
                self.shutdown();
                Err(AgentError::DeadEndpoint(format!("read failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                // A late reply would desynchronise the stream, so the
                // process is not reused.
                self.shutdown();
                Err(AgentError::Timeout(self.timeout.as_millis() as u64))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.shutdown();
                Err(AgentError::DeadEndpoint("process closed its output".into()))
            }
        }
    }

    fn exchange_http(&mut self, url: &str, line: &str) -> Result<WireResponse, AgentError> {
        let timeout = self.timeout;
        let agent = self
            .http
            .get_or_insert_with(|| ureq::AgentBuilder::new().timeout(timeout).build());
        let timeout_ms = timeout.as_millis() as u64;
        let response = agent
            .post(url)
            .set("Content-Type", "application/json")
            .send_string(line);
        let body = match response {
            Ok(r) => r.into_string().map_err(|e| io_error(e, timeout_ms))?,
            Err(ureq::Error::Status(code, r)) => {
                let body = r.into_string().unwrap_or_default();
                return match decode_response(&body) {
                    Err(AgentError::Remote(c)) => Err(AgentError::Remote(c)),
                    _ => Err(AgentError::Remote(format!("http_{code}"))),
                };
            }
            Err(ureq::Error::Transport(t)) => return Err(transport_error(t, timeout_ms)),
        };
        let trimmed = body.trim_end_matches(['\r', '\n']);
        if trimmed.contains('\n') {
            return Err(AgentError::Schema("more than one line in response body".into()));
        }
        decode_response(trimmed)
    }

    fn shutdown(&mut self) {
        if let Some(p) = self.process.take() {
            p.kill();
        }
    }
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock)
}

fn io_error(e: std::io::Error, timeout_ms: u64) -> AgentError {
    if is_timeout(&e) {
        AgentError::Timeout(timeout_ms)
    } else {
        AgentError::DeadEndpoint(e.to_string())
    }
}

fn transport_error(t: ureq::Transport, timeout_ms: u64) -> AgentError {
    use std::error::Error as _;
    let timed_out = t
        .source()
        .and_then(|s| s.downcast_ref::<std::io::Error>())
        .is_some_and(is_timeout);
    if timed_out {
        AgentError::Timeout(timeout_ms)
    } else {
        AgentError::DeadEndpoint(t.to_string())
    }
}

impl Drop for ExternalAgent {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Agent for ExternalAgent {
    fn next_action(
        &mut self,
        ctx: &DecisionContext<'_>,
        _rng: &mut AgentRng,
    ) -> Result<Decision, AgentError> {
        let response = self.exchange(&WireRequest::from_context(ctx))?;
        let action = parse_action(&response.action, ctx.game.actions(ctx.role))?;
        Ok(Decision {
            action,
            reasoning: response.reasoning,
        })
    }

    fn reset(&mut self) {
        self.shutdown();
    }

    fn descriptor(&self) -> AgentDescriptor {
        let params = match &self.transport {
            Transport::Stdio { command } => json!({ "command": command }),
            Transport::Http { url } => json!({ "url": url }),
        };
        let kind = match self.transport {
            Transport::Stdio { .. } => "external:stdio",
            Transport::Http { .. } => "external:http",
        };
        let mut params = params;
        params["timeout_ms"] = json!(self.timeout.as_millis() as u64);
        AgentDescriptor {
            id: self.id.clone(),
            kind: kind.into(),
            params,
        }
    }
}
