//! Acceptance checks for the bottom-up summarizer: exhaustive oracles,
//! finite-difference gradient checks and end-to-end runs on a synthetic
//! corpus. The `acceptance` test target prints one verdict per criterion.

pub mod gradients;
pub mod oracles;
pub mod scenarios;

/// One verdict line.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub criterion: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(criterion: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            criterion,
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<34} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.detail
        )
    }
}
