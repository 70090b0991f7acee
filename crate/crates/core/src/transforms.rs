//! Zero-bias, size-bias and directional zero-bias transforms.

use serde::{Deserialize, Serialize};

use crate::dist::{Axis, Distribution, JointDistribution, Kind};
use crate::error::{Result, SteinError};
use crate::quad;

/// Largest mean offset accepted as centered.
pub const CENTER_TOLERANCE: f64 = 1e-8;
/// Mass defects above this are surfaced as warnings.
pub const DEFECT_TOLERANCE: f64 = 1e-6;
/// Cells used when a discrete law is mapped to a density grid.
const DISCRETE_CELLS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    ZeroBias,
    SizeBias,
    Directional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Total mass minus one before renormalization.
    pub mass_defect: f64,
    pub hull: (f64, f64),
    /// Largest gap between the integrated density and the closed-form CDF.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdf_check: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformResult {
    pub output: Distribution,
    pub input_ref: String,
    pub kind: TransformKind,
    pub diagnostics: Diagnostics,
}

fn describe(d: &Distribution) -> String {
    let kind = match d.kind() {
        Kind::Continuous => "continuous",
        Kind::Discrete => "discrete",
    };
    format!(
        "{kind}, {} points on [{}, {}], mean {:e}, variance {}",
        d.support().len(),
        d.lo(),
        d.hi(),
        d.mean(),
        d.variance()
    )
}

fn require_centered(d: &Distribution) -> Result<()> {
    if d.mean().abs() > CENTER_TOLERANCE {
        return Err(SteinError::NotCentered {
            offset: d.mean(),
            tolerance: CENTER_TOLERANCE,
        });
    }
    if d.is_point_mass() || !(d.variance() > 0.0) {
        return Err(SteinError::ZeroVariance);
    }
    Ok(())
}

fn finish(
    kind: TransformKind,
    input_ref: String,
    output: Distribution,
    mass_defect: f64,
    cdf_check: Option<f64>,
) -> TransformResult {
    let mut warnings = Vec::new();
    if mass_defect.abs() > DEFECT_TOLERANCE {
        warnings.push(format!(
            "mass defect {mass_defect:e} exceeds {DEFECT_TOLERANCE:e}; the grid is under-resolved"
        ));
    }
    if let Some(c) = cdf_check {
        if c > DEFECT_TOLERANCE {
            warnings.push(format!("CDF cross-check gap {c:e} exceeds {DEFECT_TOLERANCE:e}"));
        }
    }
    let hull = output.hull();
    TransformResult {
        output,
        input_ref,
        kind,
        diagnostics: Diagnostics {
            mass_defect,
            hull,
            cdf_check,
            warnings,
        },
    }
}

/// Law of `X*` with density `E[X 1{X > t}] / sigma^2`.
///
/// The tail expectation is accumulated from the right for `t > 0` and from
/// the left for `t <= 0`. Discrete input yields a density on a grid spanning
/// the atom hull, aligned with the atoms when they sit on a lattice.
pub fn zero_bias(d: &Distribution) -> Result<TransformResult> {
    require_centered(d)?;
    match d.kind() {
        Kind::Continuous => zero_bias_continuous(d),
        Kind::Discrete => zero_bias_discrete(d),
    }
}

fn zero_bias_continuous(d: &Distribution) -> Result<TransformResult> {
    let x = d.support();
    let f = d.weights();
    let n = x.len();
    let xf: Vec<f64> = x.iter().zip(f).map(|(a, b)| a * b).collect();
    let x2f: Vec<f64> = x.iter().zip(&xf).map(|(a, b)| a * b).collect();
    let first = quad::cubic_cells(x, &xf);
    let second = quad::cubic_cells(x, &x2f);
    let sigma2: f64 = second.iter().sum();
    // right[i] = E[X 1{X > x_i}], left[i] = E[X 1{X <= x_i}]
    let right = quad::suffix(&first);
    let left = quad::prefix(&first);
    let g: Vec<f64> = (0..n)
        .map(|i| {
            let v = if x[i] > 0.0 { right[i] } else { -left[i] };
            (v / sigma2).max(0.0)
        })
        .collect();
    let mass = quad::trapezoid(x, &g);
    let second_left = quad::prefix(&second);
    let output = Distribution::with_truncation(Kind::Continuous, x.to_vec(), g, d.truncation())?;
    // P(X* <= x_k) = (E[X^2 1{X <= x_k}] - x_k E[X 1{X <= x_k}]) / sigma^2
    let check = (0..n)
        .map(|k| {
            let closed = (second_left[k] - x[k] * left[k]) / sigma2;
            (closed - output.cdf(x[k])).abs()
        })
        .fold(0.0f64, f64::max);
    Ok(finish(TransformKind::ZeroBias, describe(d), output, mass - 1.0, Some(check)))
}

fn zero_bias_discrete(d: &Distribution) -> Result<TransformResult> {
    let a = d.support();
    let p = d.weights();
    let m = a.len();
    let sigma2: f64 = a.iter().zip(p).map(|(x, q)| x * x * q).sum();
    let ap: Vec<f64> = a.iter().zip(p).map(|(x, q)| x * q).collect();
    let a2p: Vec<f64> = a.iter().zip(&ap).map(|(x, q)| x * q).collect();
    let suffix = quad::suffix(&ap);
    let prefix = quad::prefix(&ap);
    let prefix2 = quad::prefix(&a2p);
    let (lo, hi) = (a[0], a[m - 1]);
    let cells = match quad::lattice_divisions(a, DISCRETE_CELLS, 1e-9) {
        Some(q) => q * DISCRETE_CELLS.div_ceil(q),
        None => DISCRETE_CELLS,
    };
    let x = quad::linspace(lo, hi, cells + 1);
    let tol = 1e-9 * (hi - lo);
    // E[X 1{X > t}] with atoms strictly above index boundary k
    let above = |k: usize, t: f64| if t > 0.0 { suffix[k] } else { -prefix[k] };
    let mut interior_atoms = Vec::new();
    let g: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(node, &t)| {
            let k = a.partition_point(|&v| v <= t + tol);
            let at_atom = k > 0 && (a[k - 1] - t).abs() <= tol;
            let v = if !at_atom {
                above(k, t)
            } else {
                let j = k - 1;
                let right_limit = above(k, t);
                let left_limit = right_limit + ap[j];
                if j == 0 {
                    right_limit
                } else if j == m - 1 {
                    left_limit
                } else {
                    interior_atoms.push(node);
                    right_limit + 0.5 * ap[j]
                }
            };
            (v / sigma2).max(0.0)
        })
        .collect();
    let mass = quad::trapezoid(&x, &g);
    let output = Distribution::with_truncation(Kind::Continuous, x.clone(), g, d.truncation())?;
    // closed form at nodes away from interior atoms, where the linear
    // interpolant cannot represent the density jump
    let check = x
        .iter()
        .enumerate()
        .filter(|(i, _)| interior_atoms.binary_search(i).is_err())
        .map(|(_, &t)| {
            let k = a.partition_point(|&v| v <= t + tol);
            let closed = (prefix2[k] - t * prefix[k]) / sigma2;
            (closed - output.cdf(t)).abs()
        })
        .fold(0.0f64, f64::max);
    Ok(finish(TransformKind::ZeroBias, describe(d), output, mass - 1.0, Some(check)))
}

/// Law of `X^s` with weights `x f(x) / mu` on the input grid.
pub fn size_bias(d: &Distribution) -> Result<TransformResult> {
    if let Some(i) = d
        .support()
        .iter()
        .zip(d.weights())
        .position(|(&x, &w)| x < 0.0 && w > 0.0)
    {
        return Err(SteinError::NegativeSupport { x: d.support()[i] });
    }
    let mu = d.mean();
    if !(mu > 0.0) {
        return Err(SteinError::NonPositiveMean(mu));
    }
    let w: Vec<f64> = d
        .support()
        .iter()
        .zip(d.weights())
        .map(|(x, f)| x.max(0.0) * f / mu)
        .collect();
    let mass = match d.kind() {
        Kind::Continuous => quad::trapezoid(d.support(), &w),
        Kind::Discrete => w.iter().sum(),
    };
    let output = Distribution::with_truncation(d.kind(), d.support().to_vec(), w, d.truncation())?;
    Ok(finish(TransformKind::SizeBias, describe(d), output, mass - 1.0, None))
}

/// Law of the other coordinate under the zero bias in direction `direction`:
/// density `sum_i w_i (x_i^2 / sigma^2) f(x_i, y)` over the direction axis.
pub fn directional_zero_bias(j: &JointDistribution, direction: Axis) -> Result<TransformResult> {
    let marginal = j.marginal(direction);
    require_centered(marginal)?;
    let sigma2 = marginal.variance();
    let qw = j.axis_weights(direction);
    let (dir_grid, out_grid, out_axis) = match direction {
        Axis::First => (j.xs(), j.ys(), Axis::Second),
        Axis::Second => (j.ys(), j.xs(), Axis::First),
    };
    let out: Vec<f64> = (0..out_grid.len())
        .map(|o| {
            (0..dir_grid.len())
                .map(|i| {
                    let f = match direction {
                        Axis::First => j.weights()[i][o],
                        Axis::Second => j.weights()[o][i],
                    };
                    qw[i] * dir_grid[i] * dir_grid[i] / sigma2 * f
                })
                .sum()
        })
        .collect();
    let ow = j.axis_weights(out_axis);
    let mass: f64 = out.iter().zip(&ow).map(|(f, q)| f * q).sum();
    let output = Distribution::new(j.kind(), out_grid.to_vec(), out)?;
    let input_ref = format!(
        "joint {} x {} grid, direction {:?} with variance {}",
        j.xs().len(),
        j.ys().len(),
        direction,
        sigma2
    );
    Ok(finish(TransformKind::Directional, input_ref, output, mass - 1.0, None))
}
