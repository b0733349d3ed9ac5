//! Test double for the `equilens/1` wire protocol over stdio.
//!
//! Usage: `equilens-echo <behaviour>`, one of
//!
//! * `fixed:<label>`            always answers `<label>`
//! * `first-action`             answers the first action of its role
//! * `tit-for-tat`              copies the opponent's last move
//! * `cot:<label>`              free-text reasoning ending in `<label>`
//! * `missing-action`           omits the `action` field
//! * `garbage`                  writes a line that is not JSON
//! * `sleep:<ms>:<label>`       waits before answering
//! * `exit`                     exits without answering
//! * `error:<code>`             answers `{"error": code}`
//! * `unparseable-once:<label>` answers `banana` once, then `<label>`
//!
//! A request line that does not parse gets `{"error":"bad_request"}` and the
//! process keeps serving.

use std::io::{self, BufRead, Write};
use std::thread;
use std::time::Duration;

use equilens::agents::{WireRequest, PROTOCOL};
use equilens::Player;
use serde_json::json;

fn opponent_last(req: &WireRequest) -> Option<String> {
    req.history.last().map(|r| match req.role {
        Player::A => r.b.clone(),
        Player::B => r.a.clone(),
    })
}

fn main() {
    let behaviour = std::env::args().nth(1).unwrap_or_else(|| "first-action".into());
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    let mut calls = 0usize;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let req: WireRequest = match serde_json::from_str(&line) {
            Ok(r) if protocol_ok(&r) => r,
            _ => {
                let _ = writeln!(stdout, "{}", json!({ "error": "bad_request" }));
                let _ = stdout.flush();
                continue;
            }
        };
        calls += 1;
        let labels = req.game.actions(req.role).clone();
        let reply = match behaviour.split(':').collect::<Vec<_>>().as_slice() {
            ["fixed", label] => json!({ "action": label, "reasoning": null }),
            ["first-action"] => json!({ "action": labels[0], "reasoning": null }),
            ["tit-for-tat"] => {
                let action = opponent_last(&req).unwrap_or_else(|| labels[0].clone());
                json!({ "action": action, "reasoning": null })
            }
            ["cot", label] => {
                let text = format!(
                    "Round {}. I should {} to build trust... Final answer: {label}",
                    req.round,
                    labels[0].to_lowercase()
                );
                json!({ "action": text, "reasoning": text })
            }
            ["missing-action"] => json!({ "reasoning": null }),
            ["garbage"] => {
                let _ = writeln!(stdout, "this is not json");
                let _ = stdout.flush();
                continue;
            }
            ["sleep", ms, label] => {
                thread::sleep(Duration::from_millis(ms.parse().unwrap_or(1000)));
                json!({ "action": label, "reasoning": null })
            }
            ["exit"] => return,
            ["error", code] => json!({ "error": code }),
            ["unparseable-once", label] => {
                let action = if calls == 1 { "banana" } else { label };
                json!({ "action": action, "reasoning": null })
            }
            _ => {
                eprintln!("equilens-echo: unknown behaviour '{behaviour}'");
                std::process::exit(2);
            }
        };
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
}

fn protocol_ok(r: &WireRequest) -> bool {
    r.protocol == PROTOCOL
}
