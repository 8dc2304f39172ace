//! Serializable result records shared between the library and the CLI.
//!
//! Reports are plain data with a stable field order (struct fields plus
//! `BTreeMap`s), so identical inputs serialize to identical bytes. The
//! timestamp is the only nondeterministic field and is optional for that
//! reason.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

fn is_false(b: &bool) -> bool {
    !*b
}

/// One per-query row of a bound computation.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub value: f64,
    pub cumulative: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax_x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax_y: Option<usize>,
}

/// Outcome of a single named check: the worst violation seen, the tolerance
/// it was held to, and the verdict. Warning-level records document known
/// out-of-range instances without failing a suite.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub max_violation: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub warning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    /// Pass iff the observed violation is within tolerance.
    pub fn new(name: impl Into<String>, max_violation: f64, tol: f64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            max_violation,
            tol,
            pass: max_violation <= tol,
            warning: false,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> CheckRecord {
        self.note = Some(note.into());
        self
    }

    /// Downgrade to a warning: recorded, displayed, but not fatal.
    pub fn as_warning(mut self) -> CheckRecord {
        self.warning = true;
        self
    }
}

/// Where a report came from: crate version, the seed that drove any sampled
/// computation, an optional wall-clock stamp, and an echo of the
/// configuration needed to reproduce it.
#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, serde_json::Value>,
}

impl Provenance {
    pub fn new() -> Provenance {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            timestamp: None,
            config: BTreeMap::new(),
        }
    }

    pub fn stamped() -> Provenance {
        let mut p = Provenance::new();
        p.timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        p
    }
}

/// The result of a bound calculator: either a query count T, a plain value
/// (success-probability style bounds), or the explicit "unbounded" verdict
/// when every step norm vanishes.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub bound_name: String,
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub unbounded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_step: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<CheckRecord>,
    pub provenance: Provenance,
}

impl BoundReport {
    pub fn new(bound_name: impl Into<String>, problem: impl Into<String>) -> BoundReport {
        BoundReport {
            bound_name: bound_name.into(),
            problem: problem.into(),
            t: None,
            value: None,
            unbounded: false,
            target: None,
            parameters: BTreeMap::new(),
            per_step: Vec::new(),
            verdicts: Vec::new(),
            provenance: Provenance::new(),
        }
    }

    pub fn set_param(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.parameters.insert(key.to_string(), value.into());
    }
}

/// A named collection of checks with an aggregate verdict. Warnings do not
/// affect `pass`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
    pub provenance: Provenance,
}

impl SuiteReport {
    pub fn from_checks(suite: impl Into<String>, checks: Vec<CheckRecord>) -> SuiteReport {
        let pass = checks.iter().all(|c| c.pass || c.warning);
        SuiteReport {
            suite: suite.into(),
            pass,
            checks,
            provenance: Provenance::new(),
        }
    }
}
