//! Hoeffding's permutation statistic `Y = sum_i a_{i, pi(i)}`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{empirical_tail, rng_description, BoundEvaluation, Experiment, ExperimentReport, Outcome, TailPoint, CONFIDENCE};
use crate::bounds::{BoundConstants, BoundKind};
use crate::dist::dkw_epsilon;
use crate::error::{invalid, Result, SteinError};
use crate::exec::{run_draws, Exec};

/// Registered 1-Lipschitz functions of `(a_{1 pi(1)}, ..., a_{n pi(n)})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzFn {
    Sum,
    Max,
    Norm,
}

impl LipschitzFn {
    pub fn constant(self) -> f64 {
        1.0
    }

    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            LipschitzFn::Sum => v.iter().sum(),
            LipschitzFn::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            LipschitzFn::Norm => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoeffdingConfig {
    pub matrix: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub seed: u64,
    /// Defaults to `0, 0.25, ..., sum_i c_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub function: LipschitzFn,
    pub l: f64,
    /// Centering constant; exact for `sum`, the sample mean otherwise.
    pub ez: f64,
    pub ez_exact: bool,
    pub tails: Vec<TailPoint>,
    pub bound: BoundEvaluation,
}

fn validate(a: &[Vec<f64>]) -> Result<usize> {
    let n = a.len();
    if n < 2 {
        return Err(invalid("matrix", format!("need at least 2 rows, got {n}")));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(SteinError::DimensionMismatch(format!(
                "matrix must be square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(invalid(&format!("matrix[{i}][{j}]"), "must be finite"));
        }
    }
    Ok(n)
}

/// `c_i = max_j a_ij - min_j a_ij`.
pub fn row_ranges(a: &[Vec<f64>]) -> Vec<f64> {
    a.iter()
        .map(|r| {
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect()
}

/// `E Y = sum_i (1/n) sum_j a_ij`.
pub fn exact_mean(a: &[Vec<f64>]) -> f64 {
    let n = a.len() as f64;
    a.iter().map(|r| r.iter().sum::<f64>() / n).sum()
}

/// Uniform permutations of `0..n`, one per draw.
pub fn sample_permutations(n: usize, seed: u64, count: usize, exec: Exec) -> Vec<Vec<usize>> {
    run_draws(exec, seed, count, |rng, _, _| {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        p
    })
}

/// Draws `(Y, f(a_{i pi(i)}))`; the second entry is 0 without `f`.
pub fn draw_statistics(a: &[Vec<f64>], f: Option<LipschitzFn>, seed: u64, count: usize, exec: Exec) -> Vec<(f64, f64)> {
    let n = a.len();
    run_draws(exec, seed, count, |rng, _, _| {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        let v: Vec<f64> = (0..n).map(|i| a[i][p[i]]).collect();
        let y = v.iter().sum();
        (y, f.map_or(0.0, |f| f.eval(&v)))
    })
}

fn default_grid(sum_c: f64) -> Vec<f64> {
    if !(sum_c > 0.0) {
        return vec![0.0, 0.25, 0.5, 1.0];
    }
    let steps = (sum_c / 0.25 + 1e-9).floor() as usize;
    (0..=steps).map(|k| 0.25 * k as f64).collect()
}

/// Upper end of the two-sided chi-square interval for a variance.
fn variance_upper(s2: f64, n: usize, alpha: f64) -> f64 {
    if !(s2 > 0.0) || n < 2 {
        return s2.max(0.0);
    }
    let df = (n - 1) as f64;
    match ChiSquared::new(df) {
        Ok(chi) => df * s2 / chi.inverse_cdf(alpha / 2.0),
        Err(_) => s2,
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Simulates `Y - EY` under uniform permutations and compares its banded
/// tail with the bounded-differences bound and the two sub-gamma bounds.
pub fn simulate_hoeffding(cfg: &HoeffdingConfig, exec: Exec) -> Result<ExperimentReport> {
    let a = &cfg.matrix;
    let n = validate(a)?;
    if cfg.n_samples == 0 {
        return Err(invalid("n_samples", "must be positive"));
    }
    let c = row_ranges(a);
    let sum_c: f64 = c.iter().sum();
    let sum_c2: f64 = c.iter().map(|x| x * x).sum();
    let ey = exact_mean(a);
    let t_grid = match &cfg.t_grid {
        Some(g) => {
            if let Some(t) = g.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
                return Err(invalid("t_grid", format!("values must be finite and nonnegative, got {t}")));
            }
            g.clone()
        }
        None => default_grid(sum_c),
    };
    let mut notes = Vec::new();
    if cfg.n_samples < 10_000 {
        notes.push(format!("{} samples is below report grade (10^4)", cfg.n_samples));
    }

    let draws = draw_statistics(a, cfg.lipschitz, cfg.seed, cfg.n_samples, exec);
    let m = draws.len();
    let scale = a.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs())) * n as f64;
    let tol = 1e-12 * scale;
    let centered: Vec<f64> = draws.iter().map(|d| d.0 - ey).collect();
    let mean_hat = centered.iter().sum::<f64>() / m as f64;
    let var_hat = if m > 1 {
        centered.iter().map(|y| (y - mean_hat).powi(2)).sum::<f64>() / (m - 1) as f64
    } else {
        0.0
    };
    let var_upper = variance_upper(var_hat, m, 1.0 - CONFIDENCE);
    let eps = dkw_epsilon(m, 1.0 - CONFIDENCE);
    let sorted_y = sorted(centered);
    let tails = empirical_tail(&sorted_y, &t_grid, eps, tol);

    let k16 = BoundConstants {
        sum_c2: Some(sum_c2),
        ..Default::default()
    };
    let mut b16 = BoundEvaluation::evaluate("bound_16", BoundKind::HoeffdingStat, k16, &tails)?;
    if sum_c2 == 0.0 {
        // Y is constant: the bound is 1 at t = 0 and 0 beyond, so the
        // empirical tail itself must vanish for t > 0.
        let exact = sorted_y.iter().all(|v| v.abs() <= tol);
        for (s, p) in b16.status.iter_mut().zip(&tails) {
            *s = if p.t == 0.0 || p.empirical == 0.0 {
                super::Status::Pass
            } else {
                super::Status::Violated
            };
        }
        b16.outcome = if b16.status.iter().all(|s| *s == super::Status::Pass) {
            Outcome::Pass
        } else {
            Outcome::Violated
        };
        b16 = b16.with_note(format!(
            "all row ranges vanish; Y - EY is identically {} so the tail must be 0 for t > 0",
            if exact { "0" } else { "constant" }
        ));
    }
    let k8 = BoundConstants {
        ey: Some(ey),
        ..Default::default()
    };
    let b8 = if ey < 0.0 {
        let msg = format!("EY = {ey} is negative; this bound is stated for a nonnegative mean");
        notes.push(msg.clone());
        BoundEvaluation::skipped("bound_8", BoundKind::Chatterjee, k8, msg)
    } else {
        BoundEvaluation::evaluate("bound_8", BoundKind::Chatterjee, k8, &tails)?
    };
    let k9 = BoundConstants {
        var_y: Some(var_upper),
        ..Default::default()
    };
    let b9 = BoundEvaluation::evaluate("bound_9", BoundKind::Goldstein, k9, &tails)?.with_note(format!(
        "VarY replaced by the upper end {var_upper} of its {}% chi-square interval (sample value {var_hat})",
        CONFIDENCE * 100.0
    ));

    // Where the sub-Gaussian curve must sit below each sub-gamma curve.
    let cross_9 = ((sum_c2 - 2.0 * var_upper) / 16.0).max(0.0);
    let cross_8 = ((sum_c2 - 4.0 * ey) / 2.0).max(0.0);
    let mut ordering = true;
    for (i, p) in tails.iter().enumerate() {
        if sum_c2 < 2.0 * var_upper + 16.0 * p.t && b16.values[i] > b9.values[i] {
            ordering = false;
            notes.push(format!("bound_16 exceeds bound_9 at t = {} past the crossover {cross_9}", p.t));
        }
        if !b8.values.is_empty() && sum_c2 < 4.0 * ey + 2.0 * p.t && b16.values[i] > b8.values[i] {
            ordering = false;
            notes.push(format!("bound_16 exceeds bound_8 at t = {} past the crossover {cross_8}", p.t));
        }
    }

    let lipschitz = match cfg.lipschitz {
        None => None,
        Some(f) => {
            let (ez, exact) = match f {
                LipschitzFn::Sum => (ey, true),
                _ => (draws.iter().map(|d| d.1).sum::<f64>() / m as f64, false),
            };
            let z = sorted(draws.iter().map(|d| d.1 - ez).collect());
            let tz = empirical_tail(&z, &t_grid, eps, tol);
            let k = BoundConstants {
                l: Some(f.constant()),
                sum_c2: Some(sum_c2),
                ..Default::default()
            };
            let mut bound = if sum_c2 > 0.0 {
                BoundEvaluation::evaluate("bound_17", BoundKind::HoeffdingLipschitz, k, &tz)?
            } else {
                BoundEvaluation::skipped("bound_17", BoundKind::HoeffdingLipschitz, k, "all row ranges vanish")
            };
            if !exact {
                bound = bound.with_note("EZ estimated by the sample mean");
            }
            Some(LipschitzReport {
                function: f,
                l: f.constant(),
                ez,
                ez_exact: exact,
                tails: tz,
                bound,
            })
        }
    };

    let mut outcome = b16.outcome.and(b8.outcome).and(b9.outcome);
    if let Some(l) = &lipschitz {
        outcome = outcome.and(l.bound.outcome);
    }
    let mut constants = BTreeMap::new();
    constants.insert("n".into(), n as f64);
    constants.insert("ey".into(), ey);
    constants.insert("sum_c".into(), sum_c);
    constants.insert("sum_c2".into(), sum_c2);
    constants.insert("var_y_hat".into(), var_hat);
    constants.insert("var_y_upper".into(), var_upper);
    constants.insert("crossover_16_8".into(), cross_8);
    constants.insert("crossover_16_9".into(), cross_9);
    let mut flags = BTreeMap::new();
    flags.insert("ordering_consistent".into(), ordering);
    Ok(ExperimentReport {
        experiment: Experiment::Hoeffding,
        seed: cfg.seed,
        n_samples: m,
        rng: rng_description(),
        confidence: CONFIDENCE,
        dkw_epsilon: eps,
        tails,
        bounds: vec![b16, b8, b9],
        lipschitz,
        coupling: None,
        constants,
        flags,
        notes,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
    }

    fn cfg(matrix: Vec<Vec<f64>>, n_samples: usize) -> HoeffdingConfig {
        HoeffdingConfig {
            matrix,
            n_samples,
            seed: 7,
            t_grid: None,
            lipschitz: None,
        }
    }

    fn rank(p: &[usize]) -> usize {
        // Lehmer code
        let n = p.len();
        let mut r = 0;
        for i in 0..n {
            let smaller = p[i + 1..].iter().filter(|&&v| v < p[i]).count();
            r = r * (n - i) + smaller;
        }
        r
    }

    #[test]
    fn permutations_are_uniform() {
        let draws = 1_000_000;
        let perms = sample_permutations(4, 3, draws, Exec::default());
        let mut counts = [0usize; 24];
        for p in &perms {
            counts[rank(p)] += 1;
        }
        let e = draws as f64 / 24.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        let crit = ChiSquared::new(23.0).unwrap().inverse_cdf(1.0 - 1e-3);
        assert!(chi2 < crit, "chi2 {chi2} vs {crit}");
    }

    #[test]
    fn constant_matrix_is_degenerate() {
        let r = simulate_hoeffding(&cfg(vec![vec![7.0; 5]; 5], 2000), Exec::default()).unwrap();
        assert_eq!(r.constants["sum_c2"], 0.0);
        let b = r.bound("bound_16").unwrap();
        assert_eq!(b.outcome, Outcome::Pass);
        assert!(r.tails.iter().skip(1).all(|p| p.empirical == 0.0));
    }

    #[test]
    fn fixed_points_respect_the_bound() {
        let n = 10;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let r = simulate_hoeffding(&cfg(a, 100_000), Exec::default()).unwrap();
        assert_eq!(r.constants["sum_c2"], 10.0);
        assert!((r.constants["ey"] - 1.0).abs() < 1e-12);
        let b = r.bound("bound_16").unwrap();
        for (p, v) in r.tails.iter().zip(&b.values) {
            // the point estimate stays under the curve everywhere
            assert!(p.empirical <= *v, "t = {}", p.t);
        }
        assert!(!b.status.contains(&crate::montecarlo::Status::Violated));
        assert!(r.flags["ordering_consistent"]);
    }

    #[test]
    fn negative_mean_skips_bound_8() {
        let a: Vec<Vec<f64>> = random_matrix(4, 1).into_iter().map(|r| r.into_iter().map(|v| v - 2.0).collect()).collect();
        let r = simulate_hoeffding(&cfg(a, 1000), Exec::default()).unwrap();
        assert_eq!(r.bound("bound_8").unwrap().outcome, Outcome::Skipped);
        assert!(r.to_csv().lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn lipschitz_functions() {
        assert_eq!(LipschitzFn::Max.eval(&[1.0, 3.0, 2.0]), 3.0);
        assert_eq!(LipschitzFn::Norm.eval(&[3.0, 4.0]), 5.0);
        let mut c = cfg(random_matrix(6, 2), 5000);
        c.lipschitz = Some(LipschitzFn::Sum);
        let r = simulate_hoeffding(&c, Exec::default()).unwrap();
        let l = r.lipschitz.as_ref().unwrap();
        assert!(l.ez_exact);
        assert_eq!(l.tails, r.tails);
        c.lipschitz = Some(LipschitzFn::Norm);
        let r = simulate_hoeffding(&c, Exec::default()).unwrap();
        assert!(!r.lipschitz.unwrap().ez_exact);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(
            simulate_hoeffding(&cfg(vec![vec![1.0, 2.0], vec![3.0]], 10), Exec::default()),
            Err(SteinError::DimensionMismatch(_))
        ));
        assert!(simulate_hoeffding(&cfg(vec![vec![1.0]], 10), Exec::default()).is_err());
    }

    #[test]
    fn reports_are_deterministic_across_executors() {
        let c = cfg(random_matrix(8, 5), 20_000);
        let a = simulate_hoeffding(&c, Exec::Sequential).unwrap().to_json().unwrap();
        let b = simulate_hoeffding(&c, Exec::Parallel).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}
