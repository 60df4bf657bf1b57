//! Named pass/fail checks that print one line each and keep going after a failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Outcome of one check: a short detail line, or the reason it failed.
pub type Outcome = Result<String, String>;

/// Fails the surrounding check with `msg` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Debug, Default)]
pub struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    /// Runs `f`, printing `PASS` or `FAIL` with its detail and wall time. Panics count as failures.
    pub fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) -> bool {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let ok = outcome.is_ok();
        match outcome {
            Ok(detail) => {
                self.passed += 1;
                println!("PASS  {name}  [{secs:.2}s] {detail}");
            }
            Err(reason) => {
                self.failed += 1;
                println!("FAIL  {name}  [{secs:.2}s] {reason}");
            }
        }
        ok
    }

    pub fn failed(&self) -> usize {
        self.failed
    }

    /// Prints the tally and returns the process exit code.
    pub fn finish(&self) -> std::process::ExitCode {
        println!("{} passed, {} failed", self.passed, self.failed);
        if self.failed == 0 {
            std::process::ExitCode::SUCCESS
        } else {
            std::process::ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_failures_and_panics() {
        let mut r = Report::default();
        assert!(r.check("ok", || Ok("fine".into())));
        assert!(!r.check("err", || Err("bad".into())));
        assert!(!r.check("panic", || panic!("boom")));
        assert_eq!(r.failed(), 2);
        assert_eq!(ensure(false, || "x".into()), Err("x".to_string()));
    }
}
