//! Closed-form tail bounds, Berry–Esseen bounds and the K² aggregation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SteinError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Subgaussian,
    Subgamma,
    GammaFunction,
    Chatterjee,
    Goldstein,
    HoeffdingStat,
    HoeffdingLipschitz,
}

/// Named constants feeding a tail bound. Only the ones a kind needs are read.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ey: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    let v = v.ok_or(SteinError::MissingConstant(name))?;
    if !v.is_finite() {
        return Err(invalid(name, "must be finite"));
    }
    Ok(v)
}

fn positive(v: Option<f64>, name: &'static str) -> Result<f64> {
    let v = need(v, name)?;
    if v <= 0.0 {
        return Err(invalid(name, format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn nonnegative(v: Option<f64>, name: &'static str) -> Result<f64> {
    let v = need(v, name)?;
    if v < 0.0 {
        return Err(invalid(name, format!("must be nonnegative, got {v}")));
    }
    Ok(v)
}

/// `exp(-num / den)` with the conventions `0/0 = 0` and `x/0 = inf` for `x > 0`.
fn exp_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        1.0
    } else if den <= 0.0 {
        0.0
    } else {
        (-num / den).exp()
    }
}

/// Value of the bound of kind `kind` at `t >= 0`, clamped to `[0, 1]`.
pub fn tail_bound(kind: BoundKind, k: &BoundConstants, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    let t2 = t * t;
    let v = match kind {
        BoundKind::Subgaussian => exp_ratio(t2, 2.0 * positive(k.k2, "k2")?),
        BoundKind::Subgamma => {
            let k2 = positive(k.k2, "k2")?;
            let c = nonnegative(k.c, "c")?;
            exp_ratio(t2, 2.0 * (k2 + c * t))
        }
        BoundKind::GammaFunction => {
            let mu = positive(k.mu, "mu")?;
            let c = positive(k.c, "c")?;
            if t <= mu {
                1.0
            } else {
                ((t - mu) / c - (t / c) * (t / mu).ln()).exp()
            }
        }
        BoundKind::Chatterjee => {
            let ey = nonnegative(k.ey, "ey")?;
            2.0 * exp_ratio(t2, 4.0 * ey + 2.0 * t)
        }
        BoundKind::Goldstein => {
            let var = nonnegative(k.var_y, "var_y")?;
            2.0 * exp_ratio(t2, 2.0 * var + 16.0 * t)
        }
        BoundKind::HoeffdingStat => exp_ratio(t2, nonnegative(k.sum_c2, "sum_c2")?),
        BoundKind::HoeffdingLipschitz => {
            let l = positive(k.l, "l")?;
            let s = nonnegative(k.sum_c2, "sum_c2")?;
            exp_ratio(t2, l * l * s)
        }
    };
    Ok(v.clamp(0.0, 1.0))
}

/// A tail bound with its constants bound in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub kind: BoundKind,
    pub constants: BoundConstants,
}

impl BoundCurve {
    /// Validates the constants once by evaluating at `t = 0`.
    pub fn new(kind: BoundKind, constants: BoundConstants) -> Result<Self> {
        tail_bound(kind, &constants, 0.0)?;
        Ok(BoundCurve { kind, constants })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        tail_bound(self.kind, &self.constants, t)
    }

    /// `(t, bound(t))` over a grid.
    pub fn table(&self, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
        ts.iter().map(|&t| Ok((t, self.eval(t)?))).collect()
    }
}

/// `sum_i sigma_i^{2-2n} prod_j k_ji^2`, with `k[j][i] = k_ji`, in log space.
pub fn aggregate_k2(sigma: &[f64], k: &[Vec<f64>]) -> Result<f64> {
    let n = sigma.len();
    if n == 0 {
        return Err(SteinError::DimensionMismatch("no variables".into()));
    }
    if k.len() != n || k.iter().any(|row| row.len() != n) {
        return Err(SteinError::DimensionMismatch(format!("k must be {n} x {n}")));
    }
    if let Some(i) = sigma.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(invalid("sigma", format!("entry {i} must be positive")));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut log_term = (2.0 - 2.0 * n as f64) * sigma[i].ln();
        for row in k {
            let kji = row[i];
            if !(kji >= 0.0) || !kji.is_finite() {
                return Err(invalid("k", format!("entry for column {i} must be nonnegative")));
            }
            log_term += 2.0 * kji.ln();
        }
        total += log_term.exp();
    }
    Ok(total)
}

/// Parameters of the four worked reductions of the K² formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum K2Spec {
    /// `k[j][i]` is read only for `j` in `neighborhoods[i]`, which must contain `i`.
    Neighborhood {
        sigma: Vec<f64>,
        k: Vec<Vec<f64>>,
        neighborhoods: Vec<Vec<usize>>,
    },
    Linear { a: Vec<f64>, k: Vec<Vec<f64>> },
    Bounded {
        intervals: Vec<(f64, f64)>,
        sigma: Vec<f64>,
        #[serde(default)]
        independent: bool,
    },
    Mcdiarmid { c: Vec<f64> },
}

pub fn specialize_k2(spec: &K2Spec) -> Result<f64> {
    match spec {
        K2Spec::Neighborhood {
            sigma,
            k,
            neighborhoods,
        } => {
            let n = sigma.len();
            if k.len() != n || k.iter().any(|r| r.len() != n) || neighborhoods.len() != n {
                return Err(SteinError::DimensionMismatch(format!(
                    "sigma, k and neighborhoods must describe {n} variables"
                )));
            }
            let mut total = 0.0;
            for (i, nb) in neighborhoods.iter().enumerate() {
                if !nb.contains(&i) {
                    return Err(invalid("neighborhoods", format!("N_{i} must contain {i}")));
                }
                if let Some(&j) = nb.iter().find(|&&j| j >= n) {
                    return Err(invalid("neighborhoods", format!("index {j} out of range")));
                }
                let mut log_term = (2.0 - 2.0 * nb.len() as f64) * sigma[i].ln();
                for &j in nb {
                    log_term += 2.0 * k[j][i].ln();
                }
                total += log_term.exp();
            }
            Ok(total)
        }
        K2Spec::Linear { a, k } => {
            let n = a.len();
            if k.len() != n || k.iter().any(|r| r.len() != n) {
                return Err(SteinError::DimensionMismatch(format!("k must be {n} x {n}")));
            }
            if let Some(i) = a.iter().position(|x| !(*x >= 0.0)) {
                return Err(invalid("a", format!("entry {i} must be nonnegative")));
            }
            let norm2: f64 = a.iter().map(|x| x * x).sum();
            if norm2 == 0.0 {
                return Err(invalid("a", "must not be the zero vector"));
            }
            let total: f64 = (0..n)
                .map(|i| a[i] * a[i] * k.iter().map(|row| row[i] * row[i]).product::<f64>())
                .sum();
            Ok(total / norm2)
        }
        K2Spec::Bounded {
            intervals,
            sigma,
            independent,
        } => {
            let n = intervals.len();
            if sigma.len() != n {
                return Err(SteinError::DimensionMismatch("one sigma per interval".into()));
            }
            for (i, &(a, b)) in intervals.iter().enumerate() {
                if !(a < 0.0 && 0.0 < b) {
                    return Err(invalid("intervals", format!("interval {i} must satisfy a < 0 < b")));
                }
            }
            if *independent {
                return Ok(0.5 * intervals.iter().map(|&(a, b)| (a * a).max(b * b)).sum::<f64>());
            }
            let nf = n as f64;
            let mut total = 0.0;
            for (i, &(a, b)) in intervals.iter().enumerate() {
                let log_m = (a.abs().max(b.abs())).ln();
                total += ((2.0 - 2.0 * nf) * sigma[i].ln() + 2.0 * nf * log_m).exp() * 0.5;
            }
            Ok(total)
        }
        K2Spec::Mcdiarmid { c } => {
            if let Some(i) = c.iter().position(|x| !(*x >= 0.0)) {
                return Err(invalid("c", format!("entry {i} must be nonnegative")));
            }
            Ok(c.iter().map(|x| x * x).sum::<f64>() / 8.0)
        }
    }
}

/// The `(sigma, k)` instance of [`aggregate_k2`] that a specialization reduces.
pub fn aggregate_instance(spec: &K2Spec) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    match spec {
        K2Spec::Neighborhood {
            sigma,
            k,
            neighborhoods,
        } => {
            let n = sigma.len();
            let mut kk = vec![vec![0.0; n]; n];
            for i in 0..n {
                for (j, row) in kk.iter_mut().enumerate() {
                    row[i] = if neighborhoods[i].contains(&j) { k[j][i] } else { sigma[i] };
                }
            }
            Ok((sigma.clone(), kk))
        }
        K2Spec::Linear { a, k } => {
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sigma: Vec<f64> = a.iter().map(|x| x / norm).collect();
            let kk = k
                .iter()
                .map(|row| row.iter().enumerate().map(|(i, v)| sigma[i] * v).collect())
                .collect();
            Ok((sigma, kk))
        }
        K2Spec::Bounded {
            intervals,
            sigma,
            independent,
        } => {
            let n = intervals.len();
            let mut kk = vec![vec![0.0; n]; n];
            for (i, &(a, b)) in intervals.iter().enumerate() {
                let m = (a * a).max(b * b);
                for (j, row) in kk.iter_mut().enumerate() {
                    row[i] = if i == j {
                        (m / 2.0).sqrt()
                    } else if *independent {
                        sigma[i]
                    } else {
                        m.sqrt()
                    };
                }
            }
            Ok((sigma.clone(), kk))
        }
        K2Spec::Mcdiarmid { c } => {
            let intervals = c.iter().map(|x| (-x / 2.0, x / 2.0)).collect();
            let sigma = c.iter().map(|x| x / 2.0).collect();
            aggregate_instance(&K2Spec::Bounded {
                intervals,
                sigma,
                independent: false,
            })
        }
    }
}

/// Constant of the zero-bias Kolmogorov bound, `1 + 1/sqrt(2 pi) + sqrt(2 pi)/4`.
pub fn zero_bias_constant() -> f64 {
    let r = (2.0 * PI).sqrt();
    1.0 + 1.0 / r + r / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BerryEsseenKind {
    ZeroBias,
    SizeBiasD,
    SizeBiasPsi,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BerryEsseenInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    /// Coupling bound `|X^s - X| <= A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    /// Coupling bound `|X - X*| <= delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Kolmogorov-distance bound to the normal. Not clamped.
pub fn berry_esseen_bound(kind: BerryEsseenKind, input: &BerryEsseenInput) -> Result<f64> {
    match kind {
        BerryEsseenKind::ZeroBias => Ok(zero_bias_constant() * nonnegative(input.delta, "delta")?),
        BerryEsseenKind::SizeBiasD => {
            let mu = positive(input.mu, "mu")?;
            let s2 = positive(input.sigma2, "sigma2")?;
            let a = nonnegative(input.a, "a")?;
            let d = nonnegative(input.d, "d")?;
            let s = s2.sqrt();
            let inner = (11.0 * a * a / s + 5.0 * s2 * d / mu).sqrt() + 2.0 * a / s.sqrt();
            Ok(mu / (6.0 * s2) * inner * inner)
        }
        BerryEsseenKind::SizeBiasPsi => {
            let mu = positive(input.mu, "mu")?;
            let s2 = positive(input.sigma2, "sigma2")?;
            let a = nonnegative(input.a, "a")?;
            let psi = nonnegative(input.psi, "psi")?;
            let s = s2.sqrt();
            Ok(6.0 * mu * a * a / (s2 * s) + 2.0 * mu * psi / s2)
        }
    }
}
