//! Size-bias coupling for sums of independent nonnegative variables.
//!
//! `Y^s = Y - X_I + X_I^s` with `P(I = i) = mu_i / sum_j mu_j`. The replaced
//! summand is drawn as `X_I^s = F_{s,I}^{-1}(U_I)` from the same uniform that
//! produced `X_I`, which realizes `X_I^s <= X_I + c_I` whenever the law of
//! `X_I^s` is dominated by that of `X_I + c_I`.

use std::collections::BTreeMap;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{empirical_tail, rng_description, seed_path, BoundEvaluation, Experiment, ExperimentReport, Outcome, CONFIDENCE, KS_ALPHA};
use crate::bounds::{BoundConstants, BoundKind};
use crate::dist::{convolve, dkw_epsilon, empirical_ks, Distribution, Kind};
use crate::error::{invalid, Result, SteinError};
use crate::exec::{run_draws, Exec};
use crate::quad::linspace;
use crate::transforms::size_bias;
use crate::verifiers::find_min_shift;

/// Number of violating draws kept verbatim in a report.
const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumCouplingConfig {
    pub components: Vec<Distribution>,
    /// Per-component shifts; certified by search when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<f64>>,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingDraw {
    pub y: f64,
    /// `X_I^s - X_I`, so that `Y^s = y + gap`.
    pub gap: f64,
    pub index: usize,
}

impl CouplingDraw {
    pub fn ys(&self) -> f64 {
        self.y + self.gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub draw: usize,
    pub chunk: usize,
    pub offset: usize,
    pub index: usize,
    pub y: f64,
    pub ys: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub means: Vec<f64>,
    pub shifts: Vec<f64>,
    /// `certified` or `supplied` per component.
    pub shift_sources: Vec<String>,
    pub max_shift: f64,
    pub max_gap: f64,
    pub min_gap: f64,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_ys: Option<f64>,
    pub ks_threshold: f64,
}

pub(crate) struct Prepared {
    pub laws: Vec<Distribution>,
    pub biased: Vec<Distribution>,
    pub cumulative: Vec<f64>,
    pub means: Vec<f64>,
}

pub(crate) fn prepare(cfg: &SumCouplingConfig) -> Result<Prepared> {
    if cfg.components.is_empty() {
        return Err(invalid("components", "need at least one component"));
    }
    if cfg.n_samples == 0 {
        return Err(invalid("n_samples", "must be positive"));
    }
    let biased = cfg
        .components
        .iter()
        .map(|d| Ok(size_bias(d)?.output))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = cfg.components.iter().map(|d| d.mean()).collect();
    let total: f64 = means.iter().sum();
    let mut acc = 0.0;
    let cumulative = means
        .iter()
        .map(|m| {
            acc += m / total;
            acc
        })
        .collect();
    Ok(Prepared {
        laws: cfg.components.clone(),
        biased,
        cumulative,
        means,
    })
}

fn value(d: &Distribution, u: f64) -> f64 {
    if d.is_point_mass() {
        d.hull().0
    } else {
        d.quantile(u)
    }
}

pub(crate) fn draw_with(p: &Prepared, seed: u64, n: usize, exec: Exec) -> Vec<CouplingDraw> {
    let m = p.laws.len();
    run_draws(exec, seed, n, |rng, _, _| {
        let mut y = 0.0;
        let mut us = Vec::with_capacity(m);
        let mut xs = Vec::with_capacity(m);
        for d in &p.laws {
            let u: f64 = rng.sample(Open01);
            let x = value(d, u);
            y += x;
            us.push(u);
            xs.push(x);
        }
        let v: f64 = rng.sample(Open01);
        let index = p.cumulative.iter().position(|&c| v <= c).unwrap_or(m - 1);
        let gap = value(&p.biased[index], us[index]) - xs[index];
        CouplingDraw { y, gap, index }
    })
}

/// Paired draws of `(Y, Y^s)`.
pub fn sum_size_bias_coupling(cfg: &SumCouplingConfig, exec: Exec) -> Result<Vec<CouplingDraw>> {
    let p = prepare(cfg)?;
    Ok(draw_with(&p, cfg.seed, cfg.n_samples, exec))
}

/// Law of the sum of the components, when all are discrete.
pub fn sum_law(components: &[Distribution]) -> Result<Distribution> {
    let mut it = components.iter();
    let first = it.next().ok_or_else(|| invalid("components", "need at least one component"))?;
    if first.kind() != Kind::Discrete {
        return Err(SteinError::WrongKind { expected: "discrete" });
    }
    it.try_fold(first.clone(), |acc, d| convolve(&acc, d))
}

fn resolve_shifts(cfg: &SumCouplingConfig) -> Result<(Vec<f64>, Vec<String>)> {
    match &cfg.shifts {
        Some(s) => {
            if s.len() != cfg.components.len() {
                return Err(SteinError::DimensionMismatch(format!(
                    "{} shifts for {} components",
                    s.len(),
                    cfg.components.len()
                )));
            }
            if let Some(c) = s.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
                return Err(invalid("shifts", format!("must be finite and nonnegative, got {c}")));
            }
            Ok((s.clone(), vec!["supplied".to_string(); s.len()]))
        }
        None => {
            let mut out = Vec::with_capacity(cfg.components.len());
            for (i, d) in cfg.components.iter().enumerate() {
                let c = find_min_shift(d, 0.0)?.ok_or_else(|| {
                    SteinError::Unsupported(format!("no certified shift for component {i}; supply shifts explicitly"))
                })?;
                out.push(c);
            }
            Ok((out, vec!["certified".to_string(); cfg.components.len()]))
        }
    }
}

/// Checks `Y^s <= Y + max_i c_i` on every draw and compares the tail of `Y`
/// with the gamma-function bound for `c = max_i c_i`, `mu = sum_i mu_i`.
pub fn verify_coupling_bound(cfg: &SumCouplingConfig, exec: Exec) -> Result<ExperimentReport> {
    let p = prepare(cfg)?;
    let (shifts, sources) = resolve_shifts(cfg)?;
    let max_shift = shifts.iter().copied().fold(0.0, f64::max);
    let draws = draw_with(&p, cfg.seed, cfg.n_samples, exec);
    let n = draws.len();
    let slack = 1e-9 * (1.0 + max_shift);

    let mut violations = Vec::new();
    let mut violation_count = 0;
    let (mut max_gap, mut min_gap) = (f64::NEG_INFINITY, f64::INFINITY);
    for (i, d) in draws.iter().enumerate() {
        max_gap = max_gap.max(d.gap);
        min_gap = min_gap.min(d.gap);
        if d.gap > max_shift + slack {
            violation_count += 1;
            if violations.len() < MAX_LISTED {
                let (chunk, offset) = seed_path(i);
                violations.push(Violation {
                    draw: i,
                    chunk,
                    offset,
                    index: d.index,
                    y: d.y,
                    ys: d.ys(),
                });
            }
        }
    }

    let mut notes = Vec::new();
    let mut flags = BTreeMap::new();
    flags.insert("coupling_bound_holds".into(), violation_count == 0);
    let ks_threshold = dkw_epsilon(n, KS_ALPHA);
    let (mut ks_y, mut ks_ys) = (None, None);
    match sum_law(&p.laws) {
        Ok(law) => {
            let y: Vec<f64> = draws.iter().map(|d| d.y).collect();
            let ys: Vec<f64> = draws.iter().map(|d| d.ys()).collect();
            let a = empirical_ks(&law, &y);
            let b = empirical_ks(&size_bias(&law)?.output, &ys);
            flags.insert("y_marginal_ok".into(), a <= ks_threshold);
            flags.insert("ys_marginal_ok".into(), b <= ks_threshold);
            ks_y = Some(a);
            ks_ys = Some(b);
        }
        Err(SteinError::WrongKind { .. }) => {
            notes.push("continuous components: marginal checks against the exact sum law skipped".into());
        }
        Err(e) => return Err(e),
    }

    let mu: f64 = p.means.iter().sum();
    let var_y: f64 = p.laws.iter().map(|d| d.variance()).sum();
    let mut y_sorted: Vec<f64> = draws.iter().map(|d| d.y).collect();
    y_sorted.sort_by(f64::total_cmp);
    let y_max = y_sorted.last().copied().unwrap_or(0.0).max(mu);
    let t_grid = linspace(0.0, y_max, 41);
    let eps = dkw_epsilon(n, 1.0 - CONFIDENCE);
    let tol = 1e-12 * (1.0 + y_max);
    let tails = empirical_tail(&y_sorted, &t_grid, eps, tol);
    let k = BoundConstants {
        c: Some(max_shift),
        mu: Some(mu),
        ..Default::default()
    };
    let gamma = if max_shift > 0.0 {
        BoundEvaluation::evaluate("bound_gamma", BoundKind::GammaFunction, k, &tails)?
    } else {
        BoundEvaluation::skipped("bound_gamma", BoundKind::GammaFunction, k, "all shifts vanish, so Y^s = Y")
    };

    let mut outcome = gamma.outcome;
    let marginal_ok = flags.get("y_marginal_ok").copied().unwrap_or(true) && flags.get("ys_marginal_ok").copied().unwrap_or(true);
    if violation_count > 0 || !marginal_ok {
        outcome = Outcome::Violated;
    } else {
        outcome = outcome.and(Outcome::Pass);
    }
    if violation_count > 0 {
        notes.push(format!("{violation_count} draws exceed Y + max c_i; replay from the listed seed paths"));
    }
    let mut constants = BTreeMap::new();
    constants.insert("mu".into(), mu);
    constants.insert("var_y".into(), var_y);
    constants.insert("max_shift".into(), max_shift);
    constants.insert("max_gap".into(), max_gap);
    Ok(ExperimentReport {
        experiment: Experiment::SumCoupling,
        seed: cfg.seed,
        n_samples: n,
        rng: rng_description(),
        confidence: CONFIDENCE,
        dkw_epsilon: eps,
        tails,
        bounds: vec![gamma],
        lipschitz: None,
        coupling: Some(CouplingSummary {
            means: p.means.clone(),
            shifts,
            shift_sources: sources,
            max_shift,
            max_gap,
            min_gap,
            violation_count,
            violations,
            ks_y,
            ks_ys,
            ks_threshold,
        }),
        constants,
        flags,
        notes,
        outcome,
    })
}
