//! Verification outcomes shared by the check operations.

use std::fmt;

use crate::algebra::AlgebraElement;

/// Outcome of a symbolic identity check: either a pass, or the first order
/// at which the identity breaks together with concrete witness elements.
#[derive(Clone, Debug)]
pub enum CheckOutcome {
    Pass,
    Fail {
        order: usize,
        witnesses: Vec<AlgebraElement>,
        residual: AlgebraElement,
    },
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CheckOutcome::Pass)
    }

    pub fn failure_order(&self) -> Option<usize> {
        match self {
            CheckOutcome::Pass => None,
            CheckOutcome::Fail { order, .. } => Some(*order),
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckOutcome::Pass => write!(f, "pass"),
            CheckOutcome::Fail { order, witnesses, residual } => {
                write!(f, "fail at order {order} on (")?;
                for (i, w) in witnesses.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{w}")?;
                }
                write!(f, "), residual {residual}")
            }
        }
    }
}

/// A named list of check outcomes, used by multi-part verifications.
#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub items: Vec<(String, CheckOutcome)>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: impl Into<String>, outcome: CheckOutcome) {
        self.items.push((label.into(), outcome));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|(_, o)| o.passed())
    }

    pub fn first_failure(&self) -> Option<&(String, CheckOutcome)> {
        self.items.iter().find(|(_, o)| !o.passed())
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, outcome) in &self.items {
            writeln!(f, "{label}: {outcome}")?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}
