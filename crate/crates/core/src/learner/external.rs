//! Subprocess adapter for ILP systems outside this crate.
//!
//! The request is written to a scratch directory as `bk.bk`, `exs.exs` and
//! `bias.bias`; the command is run with that directory as its last argument
//! and must print the learned clauses (`.rules` format) on stdout and exit 0.
//! Exit code 1 means "no hypothesis". Anything else is an error.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{verify, Outcome, SolveError, Solver, SolverRequest, SolverResult, SolverStats};
use crate::logic::{parse_program, print_examples, print_program};

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalSolver {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalSolver {
            program: program.into(),
            args: Vec::new(),
        }
    }

    pub fn arg(mut self, a: impl Into<String>) -> Self {
        self.args.push(a.into());
        self
    }
}

impl Solver for ExternalSolver {
    fn name(&self) -> &str {
        "external"
    }

    fn solve(&self, req: &SolverRequest) -> Result<SolverResult, SolveError> {
        let start = Instant::now();
        req.check()?;
        let dir = tempfile::tempdir()?;
        std::fs::write(dir.path().join("bk.bk"), print_program(&req.background))?;
        std::fs::write(dir.path().join("exs.exs"), print_examples(&req.examples))?;
        std::fs::write(dir.path().join("bias.bias"), req.bias.to_text())?;

        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            stdout.read_to_string(&mut buf).map(|_| buf)
        });

        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if start.elapsed() > req.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SolverResult {
                    outcome: Outcome::Timeout,
                    stats: SolverStats {
                        elapsed: start.elapsed(),
                        ..Default::default()
                    },
                });
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let out = reader
            .join()
            .map_err(|_| SolveError::External("stdout reader panicked".into()))??;

        let outcome = match status.code() {
            Some(0) => {
                let h = parse_program(&out).map_err(|e| SolveError::External(format!("unparseable output: {e}")))?;
                // Untrusted output: only a verified program counts as a hypothesis.
                if verify(&req.background, &h, &req.examples).is_consistent() {
                    Outcome::Hypothesis(h)
                } else {
                    Outcome::NoHypothesis
                }
            }
            Some(1) => Outcome::NoHypothesis,
            other => return Err(SolveError::External(format!("exit status {other:?}"))),
        };
        Ok(SolverResult {
            outcome,
            stats: SolverStats {
                elapsed: start.elapsed(),
                ..Default::default()
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_bias, parse_examples, parse_facts, Program, RUNWAY_BIAS};
    use std::os::unix::fs::PermissionsExt;

    fn script(body: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("solver.sh");
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        (dir, path)
    }

    fn request() -> SolverRequest {
        SolverRequest::new(
            parse_facts("landing_runway(a2,r1).\ncross_runway(a1,r1).").unwrap(),
            parse_examples("pos(collision(a1,a2)).\nneg(collision(a2,a1)).").unwrap(),
            parse_bias(RUNWAY_BIAS).unwrap(),
        )
    }

    #[test]
    fn reads_rules_from_stdout_and_sees_the_bundle() {
        let (_d, path) = script(
            "test -f \"$1/bk.bk\" && test -f \"$1/exs.exs\" && test -f \"$1/bias.bias\" || exit 3\n\
             grep -q 'pos(collision(a1,a2))' \"$1/exs.exs\" || exit 4\n\
             echo 'collision(A,B):- landing_runway(B,R),cross_runway(A,R).'",
        );
        let res = ExternalSolver::new(path).solve(&request()).unwrap();
        assert_eq!(res.hypothesis().map(Program::len), Some(1));
    }

    #[test]
    fn unverified_output_is_not_a_hypothesis() {
        let (_d, path) = script("echo 'collision(A,B):- landing_runway(A,R),cross_runway(B,S).'");
        let res = ExternalSolver::new(path).solve(&request()).unwrap();
        assert_eq!(res.outcome, Outcome::NoHypothesis);
    }

    #[test]
    fn exit_codes_and_timeout() {
        let (_d, path) = script("exit 1");
        assert_eq!(ExternalSolver::new(path).solve(&request()).unwrap().outcome, Outcome::NoHypothesis);
        let (_d, path) = script("exit 7");
        assert!(matches!(ExternalSolver::new(path).solve(&request()), Err(SolveError::External(_))));
        let (_d, path) = script("sleep 5");
        let req = request().with_timeout(Duration::from_millis(50));
        assert_eq!(ExternalSolver::new(path).solve(&req).unwrap().outcome, Outcome::Timeout);
    }
}
