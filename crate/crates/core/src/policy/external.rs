//! Line protocol for policies living in another process.
//!
//! ```text
//! -> HELLO keytrace-sat 1
//! <- READY
//! -> QUERY <n> | <token stream>
//! <- DECIDE <signed int>   or   PASS
//! ```
//!
//! Every message is one `\n`-terminated line. The token stream is the text
//! form of `z(F, K)` and `n` is the formula's variable count. A child that
//! exits, closes its stdout or misses the per-query deadline is killed and
//! the policy abstains for the rest of the run. Malformed replies abstain for
//! that query only. Each of these events counts as one failure.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::BranchingPolicy;
use crate::cnf::{Formula, Lit};
use crate::keytrace::{cnf_tokens, deserialize, serialize_with_cnf, KeyTrace, Token, TokenStream};
use crate::{Error, Result};

pub const HANDSHAKE_REQUEST: &str = "HELLO keytrace-sat 1";
pub const HANDSHAKE_RESPONSE: &str = "READY";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(2000);

#[derive(Debug)]
pub struct ExternPolicy {
    command: String,
    timeout: Duration,
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    lines: Option<Receiver<String>>,
    failures: u64,
    cache: Option<(Formula, Vec<Token>)>,
}

/// Starts `command` under `sh -c` and performs the handshake.
///
/// Only a failure to spawn is an error; a child that fails the handshake
/// yields a policy that always abstains, with one failure recorded.
pub fn extern_policy(command: &str, timeout: Duration) -> Result<ExternPolicy> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;
    let stdin = child.stdin.take();
    let stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let mut policy = ExternPolicy {
        command: command.to_string(),
        timeout,
        child: Some(child),
        stdin,
        lines: Some(rx),
        failures: 0,
        cache: None,
    };
    match policy.exchange(HANDSHAKE_REQUEST) {
        Some(reply) if reply.trim() == HANDSHAKE_RESPONSE => {}
        Some(_) => policy.fail(),
        None => {}
    }
    Ok(policy)
}

impl ExternPolicy {
    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn is_alive(&self) -> bool {
        self.child.is_some()
    }

    /// Sends one line and waits for one reply. Transport problems kill the
    /// child, record a failure and return `None`.
    fn exchange(&mut self, request: &str) -> Option<String> {
        let stdin = self.stdin.as_mut()?;
        let sent = writeln!(stdin, "{request}").and_then(|_| stdin.flush());
        if sent.is_err() {
            self.fail();
            return None;
        }
        match self.lines.as_ref()?.recv_timeout(self.timeout) {
            Ok(line) => Some(line),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => {
                self.fail();
                None
            }
        }
    }

    fn fail(&mut self) {
        self.failures += 1;
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stdin = None;
        self.lines = None;
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Drop for ExternPolicy {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl BranchingPolicy for ExternPolicy {
    fn name(&self) -> &str {
        "extern"
    }

    fn query(&mut self, formula: &Formula, prefix: &KeyTrace) -> Option<Lit> {
        self.child.as_ref()?;
        if self.cache.as_ref().is_none_or(|(f, _)| f != formula) {
            self.cache = Some((formula.clone(), cnf_tokens(formula)));
        }
        let cnf = &self.cache.as_ref().expect("cache filled above").1;
        let z = serialize_with_cnf(cnf, prefix);
        let reply = self.exchange(&format!("QUERY {} | {z}", formula.num_vars()))?;
        match parse_response(&reply) {
            Some(answer) => answer,
            None => {
                self.failures += 1;
                None
            }
        }
    }

    fn failures(&self) -> u64 {
        self.failures
    }
}

/// `Some(answer)` for a well-formed reply, `None` if malformed.
fn parse_response(line: &str) -> Option<Option<Lit>> {
    let mut words = line.split_whitespace();
    let reply = match (words.next()?, words.next(), words.next()) {
        ("PASS", None, _) => None,
        ("DECIDE", Some(v), None) => Some(Lit::new(v.parse().ok()?)?),
        _ => return None,
    };
    Some(reply)
}

fn parse_query(line: &str) -> Result<(Formula, KeyTrace)> {
    let bad = || Error::TokenFormat(format!("malformed query `{line}`"));
    let rest = line.strip_prefix("QUERY ").ok_or_else(bad)?;
    let (n, stream) = rest.split_once(" | ").ok_or_else(bad)?;
    let n: u32 = n.trim().parse().map_err(|_| bad())?;
    deserialize(&TokenStream::parse(stream)?, n)
}

/// Answers protocol requests from `input` with `policy` until end of input.
///
/// Queries that cannot be decoded are answered with `PASS`.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    policy: &mut dyn BranchingPolicy,
) -> Result<()> {
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(line) if line.trim() == HANDSHAKE_REQUEST => {
            writeln!(output, "{HANDSHAKE_RESPONSE}")?;
            output.flush()?;
        }
        Some(line) => {
            return Err(Error::TokenFormat(format!("expected `{HANDSHAKE_REQUEST}`, got `{line}`")))
        }
        None => return Ok(()),
    }
    for line in lines {
        let line = line?;
        let answer = parse_query(line.trim_end()).ok().and_then(|(f, k)| policy.query(&f, &k));
        match answer {
            Some(lit) => writeln!(output, "DECIDE {}", lit.value())?,
            None => writeln!(output, "PASS")?,
        }
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdcl::{solve, solve_with, SolverConfig};
    use crate::gen::generate_dataset;
    use crate::keytrace::tests::{golden_formula, golden_keytrace};
    use crate::keytrace::serialize;
    use crate::policy::{expert_policy, Budget, NoPolicy, Schedule};

    fn lit(v: i32) -> Lit {
        Lit::new(v).unwrap()
    }

    #[test]
    fn response_grammar() {
        assert_eq!(parse_response("PASS"), Some(None));
        assert_eq!(parse_response("DECIDE -4"), Some(Some(lit(-4))));
        assert_eq!(parse_response("DECIDE 0"), None);
        assert_eq!(parse_response("DECIDE"), None);
        assert_eq!(parse_response("DECIDE 1 2"), None);
        assert_eq!(parse_response("decide 1"), None);
        assert_eq!(parse_response(""), None);
    }

    #[test]
    fn serve_answers_expert_queries() {
        let f = golden_formula();
        let z = serialize(&f, &KeyTrace::new()).unwrap();
        let input = format!("{HANDSHAKE_REQUEST}\nQUERY 4 | {z}\nQUERY 4 | garbage\n");
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, &mut expert_policy(&golden_keytrace())).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "READY\nDECIDE -4\nPASS\n");
    }

    #[test]
    fn serve_requires_handshake() {
        let mut out = Vec::new();
        assert!(serve("QUERY 1 | [CNF] [SEP] [D]\n".as_bytes(), &mut out, &mut NoPolicy).is_err());
    }

    #[test]
    fn pass_responder_matches_vsids() {
        let f = generate_dataset(20, 20, 1, 4.1, 4.4, 3).unwrap().remove(0).formula;
        let cfg = SolverConfig::default();
        let base = solve(&f, &cfg);
        let script = "read h; echo READY; while read q; do echo PASS; done";
        let mut p = extern_policy(script, DEFAULT_TIMEOUT).unwrap();
        let r = solve_with::<f64>(&f, &cfg, &mut p, Budget::new(5, Schedule::FrontLoaded));
        assert_eq!(r.trail, base.trail);
        assert_eq!(r.stats.policy_queries, 5.min(base.stats.decisions));
        assert_eq!(r.stats.extern_failures, 0);
    }

    #[test]
    fn out_of_range_reply_falls_back() {
        let f = generate_dataset(20, 20, 1, 4.1, 4.4, 4).unwrap().remove(0).formula;
        let script = "read h; echo READY; while read q; do echo DECIDE 999; done";
        let mut p = extern_policy(script, DEFAULT_TIMEOUT).unwrap();
        let r = solve_with::<f64>(&f, &SolverConfig::default(), &mut p, Budget::unlimited());
        assert_eq!(r.stats.policy_accepted, 0);
        assert_eq!(r.trail, solve(&f, &SolverConfig::default()).trail);
    }

    #[test]
    fn crash_disables_policy() {
        let f = generate_dataset(20, 20, 1, 4.1, 4.4, 5).unwrap().remove(0).formula;
        let script = "read h; echo READY; read q; echo DECIDE 1; exit 0";
        let mut p = extern_policy(script, DEFAULT_TIMEOUT).unwrap();
        let r = solve_with::<f64>(&f, &SolverConfig::default(), &mut p, Budget::new(4, Schedule::FrontLoaded));
        assert_eq!(r.stats.policy_accepted, 1);
        assert_eq!(r.stats.extern_failures, 1);
        assert!(!p.is_alive());
    }

    #[test]
    fn timeout_and_malformed_replies() {
        let f = golden_formula();
        let slow = "read h; echo READY; read q; sleep 5";
        let mut p = extern_policy(slow, Duration::from_millis(100)).unwrap();
        assert_eq!(p.query(&f, &KeyTrace::new()), None);
        assert_eq!(p.failures(), 1);
        assert!(!p.is_alive());
        assert_eq!(p.query(&f, &KeyTrace::new()), None);
        assert_eq!(p.failures(), 1);

        let noisy = "read h; echo READY; while read q; do echo maybe; done";
        let mut p = extern_policy(noisy, DEFAULT_TIMEOUT).unwrap();
        assert_eq!(p.query(&f, &KeyTrace::new()), None);
        assert_eq!(p.query(&f, &KeyTrace::new()), None);
        assert_eq!(p.failures(), 2);
        assert!(p.is_alive());

        let rude = "read h; echo NOPE";
        let p = extern_policy(rude, DEFAULT_TIMEOUT).unwrap();
        assert_eq!(p.failures(), 1);
        assert!(!p.is_alive());
    }
}
