//! The Berry–Esseen inputs `D = E|E[1 - (mu/sigma)(Y^s - Y) | Y]|` and
//! `Psi = sqrt(Var E[Y^s - Y | Y])` under the sum coupling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::coupling::{draw_with, prepare, sum_law, SumCouplingConfig};
use crate::dist::{Distribution, Kind};
use crate::error::{invalid, Result, SteinError};
use crate::exec::Exec;
use crate::transforms::size_bias;

/// Number of batches for the batch-means intervals.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DPsiMode {
    #[default]
    Exact,
    Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPsiEstimate {
    pub mode: DPsiMode,
    pub d: f64,
    pub psi: f64,
    /// 95% batch-means intervals in sampling mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ci: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_ci: Option<[f64; 2]>,
    pub mu: f64,
    pub sigma: f64,
    /// `mu Psi / sigma^2`, the cruder replacement for `D`.
    pub d_from_psi: f64,
}

/// `|1 - (mu/sigma) m|`, with a degenerate `sigma = 0` contributing only
/// through nonzero `m`.
fn d_term(mu: f64, sigma: f64, m: f64) -> f64 {
    if m == 0.0 {
        1.0
    } else {
        (1.0 - mu / sigma * m).abs()
    }
}

/// `E[X^s - X | X = x_k]` per atom under the quantile coupling, from the
/// overlap of the CDF intervals of `X` and `X^s`.
pub fn conditional_gap(d: &Distribution) -> Result<Vec<f64>> {
    if d.kind() != Kind::Discrete {
        return Err(SteinError::WrongKind { expected: "discrete" });
    }
    let x = d.support();
    if d.is_point_mass() {
        return Ok(vec![0.0; x.len()]);
    }
    let sb = size_bias(d)?.output;
    let p = d.weights();
    let q = sb.weights();
    let (tp, tq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    let mut out = vec![0.0; x.len()];
    let (mut k, mut l) = (0, 0);
    let (mut fk, mut gl) = (p[0] / tp, q[0] / tq);
    let mut lo = 0.0;
    while k < x.len() && l < x.len() {
        let hi = fk.min(gl);
        if hi > lo {
            out[k] += (hi - lo) * (sb.support()[l] - x[k]);
            lo = hi;
        }
        if fk <= gl {
            k += 1;
            if k < x.len() {
                fk += p[k] / tp;
            }
        } else {
            l += 1;
            if l < x.len() {
                gl += q[l] / tq;
            }
        }
    }
    for (o, &w) in out.iter_mut().zip(p) {
        *o = if w > 0.0 { *o / (w / tp) } else { 0.0 };
    }
    Ok(out)
}

fn reject_continuous(components: &[Distribution]) -> Result<()> {
    if components.iter().any(|d| d.kind() != Kind::Discrete) {
        return Err(SteinError::Unsupported(
            "D and Psi need discrete components; for continuous laws use the zero-bias bound, which needs neither".into(),
        ));
    }
    Ok(())
}

fn exact(cfg: &SumCouplingConfig) -> Result<DPsiEstimate> {
    let comps = &cfg.components;
    let law = sum_law(comps)?;
    let means: Vec<f64> = comps.iter().map(|d| d.mean()).collect();
    let total: f64 = means.iter().sum();
    let (mu, sigma) = (law.mean(), law.variance().max(0.0).sqrt());
    let ys = law.support();
    let py = law.weights();
    let mut m = vec![0.0; ys.len()];
    for (i, d) in comps.iter().enumerate() {
        let h = conditional_gap(d)?;
        let others: Vec<Distribution> = comps
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, d)| d.clone())
            .collect();
        let rest = if others.is_empty() {
            Distribution::point_mass(0.0)?
        } else {
            sum_law(&others)?
        };
        let w = means[i] / total;
        for (j, &y) in ys.iter().enumerate() {
            if py[j] <= 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for (k, &x) in d.support().iter().enumerate() {
                let v = y - x;
                let r = rest.pmf_at(v, 1e-9 * v.abs().max(1.0));
                acc += h[k] * d.weights()[k] * r;
            }
            m[j] += w * acc / py[j];
        }
    }
    let mass: f64 = py.iter().sum();
    let d: f64 = py.iter().zip(&m).map(|(p, &v)| p * d_term(mu, sigma, v)).sum::<f64>() / mass;
    let mean_m: f64 = py.iter().zip(&m).map(|(p, v)| p * v).sum::<f64>() / mass;
    let var_m: f64 = py.iter().zip(&m).map(|(p, v)| p * (v - mean_m).powi(2)).sum::<f64>() / mass;
    let psi = var_m.max(0.0).sqrt();
    Ok(DPsiEstimate {
        mode: DPsiMode::Exact,
        d,
        psi,
        d_ci: None,
        psi_ci: None,
        mu,
        sigma,
        d_from_psi: if sigma > 0.0 { mu * psi / (sigma * sigma) } else { 0.0 },
    })
}

/// `(D, Psi)` from draws binned on the exact value of `Y`.
fn binned(draws: &[(f64, f64)], mu: f64, sigma: f64) -> (f64, f64) {
    let mut bins: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for &(y, gap) in draws {
        let e = bins.entry((y * 1e9).round() as i64).or_insert((0.0, 0.0));
        e.0 += 1.0;
        e.1 += gap;
    }
    let n = draws.len() as f64;
    let mut d = 0.0;
    let mut mean = 0.0;
    for &(c, s) in bins.values() {
        let m = s / c;
        d += c / n * d_term(mu, sigma, m);
        mean += c / n * m;
    }
    let var: f64 = bins.values().map(|&(c, s)| c / n * (s / c - mean).powi(2)).sum();
    (d, var.max(0.0).sqrt())
}

fn interval(values: &[f64]) -> [f64; 2] {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0)).sqrt();
    let q = StudentsT::new(0.0, 1.0, b - 1.0).map_or(2.093, |t| t.inverse_cdf(0.975));
    let half = q * sd / b.sqrt();
    [mean - half, mean + half]
}

fn sampling(cfg: &SumCouplingConfig, exec: Exec) -> Result<DPsiEstimate> {
    if cfg.n_samples < 2 * BATCHES {
        return Err(invalid("n_samples", format!("sampling mode needs at least {} draws", 2 * BATCHES)));
    }
    let p = prepare(cfg)?;
    let mu: f64 = p.means.iter().sum();
    let sigma = p.laws.iter().map(|d| d.variance()).sum::<f64>().max(0.0).sqrt();
    let draws: Vec<(f64, f64)> = draw_with(&p, cfg.seed, cfg.n_samples, exec)
        .into_iter()
        .map(|d| (d.y, d.gap))
        .collect();
    let (d, psi) = binned(&draws, mu, sigma);
    let size = draws.len() / BATCHES;
    let (ds, ps): (Vec<f64>, Vec<f64>) = (0..BATCHES).map(|b| binned(&draws[b * size..(b + 1) * size], mu, sigma)).unzip();
    Ok(DPsiEstimate {
        mode: DPsiMode::Sampling,
        d,
        psi,
        d_ci: Some(interval(&ds)),
        psi_ci: Some(interval(&ps)),
        mu,
        sigma,
        d_from_psi: if sigma > 0.0 { mu * psi / (sigma * sigma) } else { 0.0 },
    })
}

/// Estimates `D` and `Psi` for the sum of the configured components.
pub fn estimate_d_psi(cfg: &SumCouplingConfig, mode: DPsiMode, exec: Exec) -> Result<DPsiEstimate> {
    if cfg.components.is_empty() {
        return Err(invalid("components", "need at least one component"));
    }
    reject_continuous(&cfg.components)?;
    match mode {
        DPsiMode::Exact => exact(cfg),
        DPsiMode::Sampling => sampling(cfg, exec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{build_distribution, DistSpec, Family};

    fn cfg(components: Vec<Distribution>) -> SumCouplingConfig {
        SumCouplingConfig {
            components,
            shifts: None,
            n_samples: 100_000,
            seed: 3,
        }
    }

    fn bern(p: f64) -> Distribution {
        build_distribution(&DistSpec::family(Family::Bernoulli, &[("p", p)])).unwrap()
    }

    #[test]
    fn poisson_has_unit_gap() {
        let l = 4.0;
        let p = build_distribution(&DistSpec::family(Family::Poisson, &[("lambda", l)])).unwrap();
        let h = conditional_gap(&p).unwrap();
        assert!(h.iter().zip(p.weights()).all(|(g, w)| *w < 1e-6 || (g - 1.0).abs() < 1e-6));
        let e = estimate_d_psi(&cfg(vec![p]), DPsiMode::Exact, Exec::default()).unwrap();
        assert!(e.psi < 1e-6, "{}", e.psi);
        assert!((e.d - (1.0 - l.sqrt()).abs()).abs() < 1e-6, "{}", e.d);
    }

    #[test]
    fn point_masses() {
        let c = cfg(vec![Distribution::point_mass(1.0).unwrap(), Distribution::point_mass(2.0).unwrap()]);
        let e = estimate_d_psi(&c, DPsiMode::Exact, Exec::default()).unwrap();
        assert_eq!((e.d, e.psi), (1.0, 0.0));
    }

    /// Enumerates (x1, x2, I, X_I^s) directly. For a Bernoulli law the size
    /// bias is the point mass at 1, so the replaced summand becomes 1.
    fn brute_force(p: f64) -> (f64, f64) {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new(); // (y, gap, prob)
        for x1 in [0.0, 1.0] {
            for x2 in [0.0, 1.0] {
                let px = |x: f64| if x == 1.0 { p } else { 1.0 - p };
                let base = px(x1) * px(x2);
                for (i, xi) in [x1, x2].into_iter().enumerate() {
                    let _ = i;
                    rows.push((x1 + x2, 1.0 - xi, base * 0.5));
                }
            }
        }
        let mu = 2.0 * p;
        let sigma = (2.0 * p * (1.0 - p)).sqrt();
        let mut by_y: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for (y, g, w) in rows {
            let e = by_y.entry(y as i64).or_default();
            e.0 += w;
            e.1 += w * g;
        }
        let d: f64 = by_y.values().map(|(w, s)| w * (1.0 - mu / sigma * (s / w)).abs()).sum();
        let mean: f64 = by_y.values().map(|(_, s)| s).sum();
        let var: f64 = by_y.values().map(|(w, s)| w * (s / w - mean).powi(2)).sum();
        (d, var.sqrt())
    }

    #[test]
    fn two_bernoullis_match_enumeration() {
        for p in [0.2, 0.5, 0.7] {
            let e = estimate_d_psi(&cfg(vec![bern(p), bern(p)]), DPsiMode::Exact, Exec::default()).unwrap();
            let (d, psi) = brute_force(p);
            assert!((e.d - d).abs() < 1e-12, "{} vs {d}", e.d);
            assert!((e.psi - psi).abs() < 1e-12, "{} vs {psi}", e.psi);
            assert!((psi - (2.0 * p * (1.0 - p)).sqrt() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_agrees_with_exact() {
        let c = cfg(vec![bern(0.3), bern(0.6), Distribution::new(Kind::Discrete, vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap()]);
        let e = estimate_d_psi(&c, DPsiMode::Exact, Exec::default()).unwrap();
        let s = estimate_d_psi(&c, DPsiMode::Sampling, Exec::default()).unwrap();
        let [lo, hi] = s.d_ci.unwrap();
        let w = hi - lo;
        assert!(e.d > lo - w && e.d < hi + w, "{} not near [{lo}, {hi}]", e.d);
        assert!((e.psi - s.psi).abs() < 0.02, "{} vs {}", e.psi, s.psi);
    }

    #[test]
    fn continuous_components_are_rejected() {
        let u = build_distribution(&DistSpec::family(Family::Uniform, &[("a", 0.0), ("b", 1.0)])).unwrap();
        assert!(matches!(
            estimate_d_psi(&cfg(vec![u]), DPsiMode::Exact, Exec::default()),
            Err(SteinError::Unsupported(_))
        ));
    }
}
