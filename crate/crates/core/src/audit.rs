//! Pass/fail records for sampled inequality checks.

use std::fmt;

/// Outcome of one audited inequality.
///
/// The margin convention is `lhs - rhs` for an inequality `lhs <= rhs`, so a
/// positive margin is a violation and `passed` holds exactly when the worst
/// margin does not exceed the tolerance. An audit whose hypothesis did not
/// hold evaluates nothing: its worst margin stays at `-inf` and the reason is
/// kept in `inapplicable`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub witness: Option<String>,
    pub samples: usize,
    pub tolerance: f64,
    pub inapplicable: Option<String>,
    pub flags: Vec<String>,
}

impl AuditReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            worst_margin: f64::NEG_INFINITY,
            witness: None,
            samples: 0,
            tolerance,
            inapplicable: None,
            flags: Vec::new(),
        }
    }

    pub fn inapplicable(name: impl Into<String>, tolerance: f64, reason: impl Into<String>) -> Self {
        let mut report = Self::new(name, tolerance);
        report.inapplicable = Some(reason.into());
        report
    }

    /// Records one evaluated margin. Returns `false` once the report has
    /// failed so sweeps can stop at the first violation.
    pub fn record(&mut self, margin: f64, witness: impl FnOnce() -> String) -> bool {
        self.samples += 1;
        // NaN margins count as violations.
        let violated = !(margin <= self.tolerance);
        if violated || margin > self.worst_margin {
            self.worst_margin = if margin.is_nan() { f64::INFINITY } else { margin };
        }
        if violated {
            self.passed = false;
            self.witness = Some(witness());
        }
        !violated
    }

    pub fn flag(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.flags.contains(&note) {
            self.flags.push(note);
        }
    }

    /// Folds another report's samples into this one, keeping the first
    /// failure's witness.
    pub fn absorb(&mut self, other: &AuditReport) {
        self.samples += other.samples;
        if other.worst_margin > self.worst_margin {
            self.worst_margin = other.worst_margin;
        }
        if !other.passed && self.passed {
            self.passed = false;
            self.witness = other.witness.clone();
        }
        for f in &other.flags {
            self.flag(f.clone());
        }
    }

    pub fn is_inapplicable(&self) -> bool {
        self.inapplicable.is_some()
    }

    /// Whether the stored verdict agrees with the margin invariant.
    pub fn is_consistent(&self) -> bool {
        self.passed == (self.worst_margin <= self.tolerance)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.inapplicable.is_some() {
            "SKIP"
        } else if self.passed {
            "PASS"
        } else {
            "FAIL"
        };
        write!(
            f,
            "[{verdict}] {} (worst margin {:e}, tol {:e}, {} samples)",
            self.name, self.worst_margin, self.tolerance, self.samples
        )?;
        if let Some(reason) = &self.inapplicable {
            write!(f, " inapplicable: {reason}")?;
        }
        if let Some(w) = &self.witness {
            write!(f, " witness: {w}")?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_coords(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| format!("{c}")).collect();
    format!("({})", parts.join(" "))
}
