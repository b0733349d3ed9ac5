//! Golden request/response cases for the wire protocol, run against the
//! `equilens-echo` test double and a one-file HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use equilens::agents::{
    AgentSpec, DecisionContext, ExternalAgent, Mode, ScriptedKind, Transport, WireRequest, PROTOCOL,
};
use equilens::engine::{run_match, MatchConfig, MatchRecord, MatchStatus, PromptTemplate};
use equilens::game::{make_game, JointHistory, Player};

pub const ECHO: &str = env!("CARGO_BIN_EXE_equilens-echo");

pub struct Case {
    pub name: &'static str,
    pub run: fn() -> Result<(), String>,
}

fn stdio(behaviour: &str, timeout_ms: Option<u64>) -> AgentSpec {
    AgentSpec::Stdio {
        id: "echo".into(),
        command: vec![ECHO.to_string(), behaviour.to_string()],
        timeout_ms,
    }
}

fn http(url: String, timeout_ms: Option<u64>) -> AgentSpec {
    AgentSpec::Http {
        id: "http".into(),
        url,
        timeout_ms,
    }
}

fn play(spec: AgentSpec, opponent: ScriptedKind, mode: Mode, rounds: usize) -> MatchRecord {
    let mut a = spec.build().expect("agent builds");
    let mut b = AgentSpec::scripted("b", opponent).build().unwrap();
    let cfg = MatchConfig::new(make_game("pd").unwrap(), mode, 1, "echo", "b").with_rounds(rounds);
    run_match(a.as_mut(), b.as_mut(), &cfg, &PromptTemplate::builtin("v1").unwrap()).unwrap()
}

fn expect_rounds(r: &MatchRecord, want: &[(usize, usize)]) -> Result<(), String> {
    if !r.is_valid() {
        return Err(format!("match invalid: {:?} {:?}", r.status, r.diagnostics));
    }
    if r.history.rounds != want {
        return Err(format!("rounds {:?}, want {want:?}", r.history.rounds));
    }
    Ok(())
}

fn expect_invalid(r: &MatchRecord, code: &str, round: usize) -> Result<(), String> {
    match &r.status {
        MatchStatus::Invalid { code: c, round: k } if c == code && *k == round => Ok(()),
        other => Err(format!("status {other:?}, want invalid '{code}' at round {round}")),
    }
}

fn fixed_label() -> Result<(), String> {
    let r = play(stdio("fixed:Cooperate", None), ScriptedKind::AlwaysDefect, Mode::Direct, 3);
    expect_rounds(&r, &[(0, 1), (0, 1), (0, 1)])
}

fn case_insensitive_label() -> Result<(), String> {
    let r = play(stdio("fixed:dEfEcT", None), ScriptedKind::AlwaysCoop, Mode::Direct, 2);
    expect_rounds(&r, &[(1, 0), (1, 0)])
}

fn history_is_forwarded() -> Result<(), String> {
    let r = play(stdio("tit-for-tat", None), ScriptedKind::AlwaysDefect, Mode::Direct, 3);
    expect_rounds(&r, &[(0, 1), (1, 1), (1, 1)])
}

fn reasoning_is_kept() -> Result<(), String> {
    let r = play(stdio("cot:Defect", None), ScriptedKind::AlwaysCoop, Mode::Cot, 2);
    expect_rounds(&r, &[(1, 0), (1, 0)])?;
    let text = r.reasoning_log[1].a.clone().unwrap_or_default();
    if !text.starts_with("Round 2.") || !text.ends_with("Final answer: Defect") {
        return Err(format!("reasoning '{text}'"));
    }
    Ok(())
}

fn missing_action_is_schema_error() -> Result<(), String> {
    expect_invalid(&play(stdio("missing-action", None), ScriptedKind::AlwaysCoop, Mode::Direct, 3), "schema", 1)
}

fn non_json_is_schema_error() -> Result<(), String> {
    expect_invalid(&play(stdio("garbage", None), ScriptedKind::AlwaysCoop, Mode::Direct, 3), "schema", 1)
}

fn slow_agent_times_out() -> Result<(), String> {
    let start = Instant::now();
    let r = play(stdio("sleep:3000:Cooperate", Some(200)), ScriptedKind::AlwaysCoop, Mode::Direct, 3);
    let took = start.elapsed();
    expect_invalid(&r, "timeout", 1)?;
    if took > Duration::from_millis(2000) {
        return Err(format!("timeout took {took:?}"));
    }
    Ok(())
}

fn exited_process_is_dead_endpoint() -> Result<(), String> {
    expect_invalid(&play(stdio("exit", None), ScriptedKind::AlwaysCoop, Mode::Direct, 3), "dead_endpoint", 1)
}

fn missing_program_is_dead_endpoint() -> Result<(), String> {
    let spec = AgentSpec::Stdio {
        id: "none".into(),
        command: vec!["/nonexistent/agent-binary".into()],
        timeout_ms: None,
    };
    expect_invalid(&play(spec, ScriptedKind::AlwaysCoop, Mode::Direct, 2), "dead_endpoint", 1)
}

fn remote_error_is_reported() -> Result<(), String> {
    let r = play(stdio("error:overloaded", None), ScriptedKind::AlwaysCoop, Mode::Direct, 3);
    expect_invalid(&r, "remote", 1)?;
    if !r.diagnostics.iter().any(|d| d.message.contains("overloaded")) {
        return Err(format!("diagnostics {:?}", r.diagnostics));
    }
    Ok(())
}

fn one_retry_on_unparseable() -> Result<(), String> {
    let r = play(stdio("unparseable-once:Cooperate", None), ScriptedKind::AlwaysCoop, Mode::Direct, 3);
    expect_rounds(&r, &[(0, 0), (0, 0), (0, 0)])?;
    let codes: Vec<&str> = r.diagnostics.iter().map(|d| d.code.as_str()).collect();
    if codes != ["unparseable_action"] {
        return Err(format!("diagnostics {codes:?}"));
    }
    Ok(())
}

fn second_unparseable_is_final() -> Result<(), String> {
    let r = play(stdio("fixed:banana", None), ScriptedKind::AlwaysCoop, Mode::Direct, 3);
    expect_invalid(&r, "unparseable_action", 1)?;
    if r.diagnostics.len() != 2 {
        return Err(format!("diagnostics {:?}", r.diagnostics));
    }
    Ok(())
}

fn golden_request_line() -> Result<(), String> {
    let g = make_game("pd").unwrap();
    let h = JointHistory::from_rounds(g.clone(), &[(0, 1)]).unwrap();
    let ctx = DecisionContext {
        game: &g,
        history: &h,
        role: Player::A,
        mode: Mode::Direct,
        round: 2,
        prompt: "go",
        temperature: 0.7,
    };
    let want = concat!(
        r#"{"protocol":"equilens/1","round":2,"role":"A","mode":"direct","#,
        r#""game":{"name":"pd","actions_a":["Cooperate","Defect"],"actions_b":["Cooperate","Defect"],"#,
        r#""payoffs":[[[3.0,3.0],[0.0,5.0]],[[5.0,0.0],[1.0,1.0]]]},"#,
        r#""history":[{"a":"Cooperate","b":"Defect"}],"prompt":"go"}"#
    );
    let got = WireRequest::from_context(&ctx).to_line();
    if got != want {
        return Err(format!("request line\n got {got}\nwant {want}"));
    }
    let mut agent = ExternalAgent::new(
        "echo",
        Transport::Stdio {
            command: vec![ECHO.into(), "tit-for-tat".into()],
        },
        Duration::from_secs(10),
    )
    .map_err(|e| e.to_string())?;
    let resp = agent.exchange(&WireRequest::from_context(&ctx)).map_err(|e| e.to_string())?;
    if resp.action != "Defect" || resp.reasoning.is_some() {
        return Err(format!("response {resp:?}"));
    }
    Ok(())
}

fn echo_rejects_bad_requests() -> Result<(), String> {
    let mut child = Command::new(ECHO)
        .arg("first-action")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut stdin = child.stdin.take().unwrap();
    let mut out = BufReader::new(child.stdout.take().unwrap());
    let good = format!(
        r#"{{"protocol":"{PROTOCOL}","round":1,"role":"B","mode":"direct","game":{{"name":"pd","actions_a":["Cooperate","Defect"],"actions_b":["Cooperate","Defect"],"payoffs":[[[3,3],[0,5]],[[5,0],[1,1]]]}},"history":[],"prompt":""}}"#
    );
    let lines = [
        ("{\"protocol\":\"other/9\"}", r#"{"error":"bad_request"}"#),
        ("not json", r#"{"error":"bad_request"}"#),
        (good.as_str(), r#"{"action":"Cooperate","reasoning":null}"#),
    ];
    for (req, want) in lines {
        writeln!(stdin, "{req}").map_err(|e| e.to_string())?;
        let mut got = String::new();
        out.read_line(&mut got).map_err(|e| e.to_string())?;
        if got.trim_end() != want {
            return Err(format!("reply '{}' to '{req}', want '{want}'", got.trim_end()));
        }
    }
    drop(stdin);
    let _ = child.wait();
    Ok(())
}

/// Serves `n` POST requests on a local port. `reply(body)` gives the status
/// line, response body and a delay.
pub fn serve(n: usize, reply: fn(&str) -> (u16, String, u64)) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/decide", listener.local_addr().unwrap());
    thread::spawn(move || {
        for stream in listener.incoming().take(n) {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            let (status, text, delay) = reply(&String::from_utf8_lossy(&body));
            thread::sleep(Duration::from_millis(delay));
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    url
}

fn http_round_trip() -> Result<(), String> {
    let url = serve(3, |body| {
        let req: WireRequest = serde_json::from_str(body).expect("valid request");
        let action = if req.history.is_empty() { "Cooperate" } else { "Defect" };
        (200, format!(r#"{{"action":"{action}","reasoning":"r{}"}}"#, req.round), 0)
    });
    let r = play(http(url, Some(5000)), ScriptedKind::AlwaysCoop, Mode::Cot, 3);
    expect_rounds(&r, &[(0, 0), (1, 0), (1, 0)])?;
    if r.reasoning_log[2].a.as_deref() != Some("r3") {
        return Err(format!("reasoning {:?}", r.reasoning_log[2]));
    }
    Ok(())
}

fn http_error_status() -> Result<(), String> {
    let url = serve(1, |_| (503, r#"{"error":"busy"}"#.into(), 0));
    let r = play(http(url, Some(5000)), ScriptedKind::AlwaysCoop, Mode::Direct, 2);
    expect_invalid(&r, "remote", 1)
}

fn http_malformed_body() -> Result<(), String> {
    let url = serve(1, |_| (200, r#"{"action":"Cooperate","extra":1}"#.into(), 0));
    expect_invalid(&play(http(url, Some(5000)), ScriptedKind::AlwaysCoop, Mode::Direct, 2), "schema", 1)
}

fn http_timeout() -> Result<(), String> {
    let url = serve(1, |_| (200, r#"{"action":"Cooperate"}"#.into(), 2000));
    let start = Instant::now();
    let r = play(http(url, Some(200)), ScriptedKind::AlwaysCoop, Mode::Direct, 2);
    expect_invalid(&r, "timeout", 1)?;
    if start.elapsed() > Duration::from_millis(1500) {
        return Err(format!("timeout took {:?}", start.elapsed()));
    }
    Ok(())
}

fn http_unreachable() -> Result<(), String> {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/decide");
    expect_invalid(&play(http(url, Some(1000)), ScriptedKind::AlwaysCoop, Mode::Direct, 2), "dead_endpoint", 1)
}

pub const CASES: &[Case] = &[
    Case { name: "fixed label", run: fixed_label },
    Case { name: "case-insensitive label", run: case_insensitive_label },
    Case { name: "history forwarded", run: history_is_forwarded },
    Case { name: "reasoning kept", run: reasoning_is_kept },
    Case { name: "missing action", run: missing_action_is_schema_error },
    Case { name: "non-JSON reply", run: non_json_is_schema_error },
    Case { name: "stdio timeout", run: slow_agent_times_out },
    Case { name: "process exit", run: exited_process_is_dead_endpoint },
    Case { name: "missing program", run: missing_program_is_dead_endpoint },
    Case { name: "remote error", run: remote_error_is_reported },
    Case { name: "one retry", run: one_retry_on_unparseable },
    Case { name: "second unparseable", run: second_unparseable_is_final },
    Case { name: "golden request line", run: golden_request_line },
    Case { name: "bad request", run: echo_rejects_bad_requests },
    Case { name: "http round trip", run: http_round_trip },
    Case { name: "http error status", run: http_error_status },
    Case { name: "http malformed body", run: http_malformed_body },
    Case { name: "http timeout", run: http_timeout },
    Case { name: "http unreachable", run: http_unreachable },
];

/// Runs every case; returns the failures.
pub fn run_all() -> Vec<String> {
    CASES
        .iter()
        .filter_map(|c| (c.run)().err().map(|e| format!("{}: {e}", c.name)))
        .collect()
}
