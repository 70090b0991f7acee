//! Sampling harnesses that hold the closed-form bounds against simulation.
//!
//! Every empirical tail is reported with a simultaneous DKW band. A bound
//! passes at `t` when the upper band lies below it, is violated when the
//! lower band lies above it, and is inconclusive otherwise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{tail_bound, BoundConstants, BoundKind};
use crate::error::Result;
use crate::exec::CHUNK_SIZE;

pub mod coupling;
pub mod dpsi;
pub mod hoeffding;

pub use coupling::{sum_size_bias_coupling, verify_coupling_bound, CouplingDraw, CouplingSummary, SumCouplingConfig, Violation};
pub use dpsi::{estimate_d_psi, DPsiEstimate, DPsiMode};
pub use hoeffding::{simulate_hoeffding, HoeffdingConfig, LipschitzFn, LipschitzReport};

/// Confidence level of the tail bands.
pub const CONFIDENCE: f64 = 0.99;
/// Significance of the distributional checks on coupled samples.
pub const KS_ALPHA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Inconclusive,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Skipped,
    Pass,
    Inconclusive,
    Violated,
}

impl Outcome {
    /// Combination of two outcomes; skipped entries never dominate.
    pub fn and(self, other: Outcome) -> Outcome {
        match (self, other) {
            (Outcome::Skipped, o) | (o, Outcome::Skipped) => o,
            (a, b) => a.max(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Hoeffding,
    SumCoupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub empirical: f64,
    pub band_lo: f64,
    pub band_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    /// Column label, e.g. `bound_16`.
    pub label: String,
    pub kind: BoundKind,
    pub constants: BoundConstants,
    /// Bound values on the report's t grid; empty when skipped.
    pub values: Vec<f64>,
    pub status: Vec<Status>,
    pub outcome: Outcome,
    /// Grid point where `band_hi - bound` is largest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundEvaluation {
    pub fn skipped(label: &str, kind: BoundKind, constants: BoundConstants, note: impl Into<String>) -> Self {
        BoundEvaluation {
            label: label.to_string(),
            kind,
            constants,
            values: Vec::new(),
            status: Vec::new(),
            outcome: Outcome::Skipped,
            worst_t: None,
            note: Some(note.into()),
        }
    }

    /// Compares a bound curve with the banded empirical tail.
    pub fn evaluate(label: &str, kind: BoundKind, constants: BoundConstants, tails: &[TailPoint]) -> Result<Self> {
        let values = tails
            .iter()
            .map(|p| tail_bound(kind, &constants, p.t))
            .collect::<Result<Vec<f64>>>()?;
        let status: Vec<Status> = tails
            .iter()
            .zip(&values)
            .map(|(p, &b)| classify(p, b))
            .collect();
        let outcome = status.iter().fold(Outcome::Pass, |o, s| {
            o.and(match s {
                Status::Pass => Outcome::Pass,
                Status::Inconclusive => Outcome::Inconclusive,
                Status::Violated => Outcome::Violated,
            })
        });
        let worst_t = tails
            .iter()
            .zip(&values)
            .max_by(|a, b| (a.0.band_hi - a.1).total_cmp(&(b.0.band_hi - b.1)))
            .map(|(p, _)| p.t);
        Ok(BoundEvaluation {
            label: label.to_string(),
            kind,
            constants,
            values,
            status,
            outcome,
            worst_t,
            note: None,
        })
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn classify(p: &TailPoint, bound: f64) -> Status {
    let slack = 1e-15;
    if p.band_hi <= bound + slack {
        Status::Pass
    } else if p.band_lo > bound + slack {
        Status::Violated
    } else {
        Status::Inconclusive
    }
}

/// `P(Z >= t)` from sorted samples with a band of half-width `eps`. Samples
/// within `tol` below `t` are counted, which errs on the conservative side.
pub fn empirical_tail(sorted: &[f64], t_grid: &[f64], eps: f64, tol: f64) -> Vec<TailPoint> {
    let n = sorted.len() as f64;
    t_grid
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&v| v < t - tol);
            let empirical = (sorted.len() - below) as f64 / n;
            TailPoint {
                t,
                empirical,
                band_lo: (empirical - eps).max(0.0),
                band_hi: (empirical + eps).min(1.0),
            }
        })
        .collect()
}

/// Locates draw `index` as `(chunk, offset)` in the chunked random streams.
pub fn seed_path(index: usize) -> (usize, usize) {
    (index / CHUNK_SIZE, index % CHUNK_SIZE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub seed: u64,
    pub n_samples: usize,
    /// How draws map to random streams, for replay.
    pub rng: String,
    pub confidence: f64,
    pub dkw_epsilon: f64,
    pub tails: Vec<TailPoint>,
    pub bounds: Vec<BoundEvaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSummary>,
    pub constants: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    pub outcome: Outcome,
}

pub(crate) fn rng_description() -> String {
    format!("chacha8 seeded from the root seed; draw i uses stream i / {CHUNK_SIZE}, position i % {CHUNK_SIZE}")
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn bound(&self, label: &str) -> Option<&BoundEvaluation> {
        self.bounds.iter().find(|b| b.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows of `t, empirical, band_hi` followed by one column per bound.
    /// Skipped bounds keep their column with empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,empirical,band_hi");
        for b in &self.bounds {
            out.push(',');
            out.push_str(&b.label);
        }
        out.push('\n');
        for (i, p) in self.tails.iter().enumerate() {
            out.push_str(&format!("{},{},{}", p.t, p.empirical, p.band_hi));
            for b in &self.bounds {
                out.push(',');
                if let Some(v) = b.values.get(i) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}
