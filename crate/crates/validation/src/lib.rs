//! Outcome bookkeeping for the acceptance suite.

use std::fmt::Write as _;

/// One numbered criterion made of named checks.
#[derive(Debug)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    checks: Vec<(String, bool, String)>,
}

impl Criterion {
    pub fn new(id: u32, name: &'static str) -> Self {
        Self {
            id,
            name,
            checks: Vec::new(),
        }
    }

    /// Records a check; `detail` should state the measured value and the bound.
    pub fn check(&mut self, label: impl Into<String>, pass: bool, detail: impl Into<String>) -> bool {
        self.checks.push((label.into(), pass, detail.into()));
        pass
    }

    /// Records a failure that prevented the remaining checks from running.
    pub fn abort(&mut self, reason: impl Into<String>) {
        self.checks.push(("aborted".into(), false, reason.into()));
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.1)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.1).count()
    }

    /// Summary line followed by one indented line per check.
    pub fn report(&self, seconds: f64) -> String {
        let mut s = format!(
            "{} criterion {} ({}): {}/{} checks passed in {:.1} s\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.checks.len() - self.failures(),
            self.checks.len(),
            seconds
        );
        for (label, pass, detail) in &self.checks {
            let _ = writeln!(s, "    [{}] {label}: {detail}", if *pass { "ok" } else { "FAILED" });
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_criterion_does_not_pass() {
        let mut c = Criterion::new(1, "x");
        assert!(!c.passed());
        c.check("a", true, "1 <= 2");
        assert!(c.passed());
        c.check("b", false, "3 <= 2");
        assert!(!c.passed());
        assert_eq!(c.failures(), 1);
        assert!(c.report(0.0).starts_with("FAIL criterion 1 (x): 1/2"));
    }
}
