//! `stein`: command-line front end for the transforms, order checks, bounds,
//! certificates and sampling harnesses of `stein-core`.
//!
//! Exit codes: 0 on success, 2 when a check ran and failed (the report is
//! still written), 1 on usage or input errors. Data goes to `--out` or
//! standard output; diagnostics go to standard error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use stein_core::bounds::{
    aggregate_instance, aggregate_k2, berry_esseen_bound, specialize_k2, tail_bound, BerryEsseenInput,
    BerryEsseenKind, BoundConstants, BoundKind, K2Spec,
};
use stein_core::dist::Axis;
use stein_core::montecarlo::{
    estimate_d_psi, simulate_hoeffding, verify_coupling_bound, DPsiMode, ExperimentReport, HoeffdingConfig,
    LipschitzFn, Outcome, SumCouplingConfig,
};
use stein_core::orders::{check_convex, check_sign_sequence, check_st, check_weighted, OrderVerdict};
use stein_core::transforms::{directional_zero_bias, size_bias, zero_bias};
use stein_core::verifiers::{
    check_density_shift, check_kernel_domination, check_mgf_condition, check_phi_prime, check_strong_logconcavity,
    find_min_shift, verify_subgaussian_equivalence, Certificate,
};
use stein_core::{build_distribution, DistSpec, Distribution, Exec, JointDistribution, Kind};

const CHECK_FAILED: u8 = 2;
const USAGE_ERROR: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "stein", version, about = "Stein-type transforms, stochastic orders and concentration bounds")]
struct Cli {
    /// Root seed; required by stochastic subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, written atomically. Standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Run sampling on one thread instead of the worker pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Zero-bias, size-bias or directional zero-bias transform of a distribution.
    Transform(TransformArgs),
    /// Decide a stochastic order between two distributions.
    OrderCheck(OrderArgs),
    /// Evaluate a tail bound, a Berry-Esseen bound or the K^2 constant.
    Bound(BoundArgs),
    /// Build a certificate for one of the verifiable claims.
    Verify(VerifyArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TransformKind {
    ZeroBias,
    SizeBias,
    Directional,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long, value_enum)]
    kind: TransformKind,
    /// Distribution spec (or a transform result) in JSON.
    #[arg(long, required_unless_present = "joint")]
    spec: Option<PathBuf>,
    /// Joint distribution in JSON, for the directional transform.
    #[arg(long)]
    joint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AxisArg::First)]
    axis: AxisArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AxisArg {
    First,
    Second,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OrderArg {
    St,
    Convex,
    Weighted,
    SignSequence,
}

#[derive(Args, Debug)]
struct OrderArgs {
    #[arg(long, value_enum)]
    order: OrderArg,
    /// The smaller law.
    #[arg(long)]
    x: PathBuf,
    /// The larger law.
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    /// Expected sign pattern of `F_y - F_x`, e.g. `+-+`.
    #[arg(long)]
    expected: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BoundArg {
    #[value(name = "zero-bias-BE", alias = "zero-bias-be")]
    ZeroBiasBe,
    #[value(name = "size-bias-d")]
    SizeBiasD,
    #[value(name = "size-bias-psi")]
    SizeBiasPsi,
    Subgaussian,
    Subgamma,
    GammaFunction,
    Chatterjee,
    Goldstein,
    HoeffdingStat,
    HoeffdingLipschitz,
    K2,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundArg,
    /// Points at which to evaluate a tail bound, comma separated.
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    var_y: Option<f64>,
    #[arg(long)]
    ey: Option<f64>,
    #[arg(long)]
    sum_c2: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    /// JSON array of component laws; fills mu, sigma2, D and Psi exactly.
    #[arg(long)]
    components: Option<PathBuf>,
    /// K^2 instance in JSON, for `--kind k2`.
    #[arg(long)]
    k2_spec: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ClaimArg {
    Mgf,
    StrongLogconcavity,
    #[value(alias = "theorem3")]
    Subgaussian,
    Kernel,
    PhiPrime,
    Shift,
    MinShift,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    claim: ClaimArg,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    k2: Option<f64>,
    /// Shift constant of the size-bias domination.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long)]
    x_l: Option<f64>,
    #[arg(long)]
    x_r: Option<f64>,
    /// Reference law for the kernel claim.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    x0: Option<f64>,
    /// Constant kernel bound; derived from the reference law when absent.
    #[arg(long)]
    a_y: Option<f64>,
    /// Lambda grid for the MGF claims, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Tail of the permutation statistic sum_i a[i][pi(i)].
    Hoeffding {
        /// Square matrix as headerless CSV.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long, value_enum)]
        lipschitz: Option<LipschitzArg>,
    },
    /// Size-bias coupling of a sum of independent nonnegative laws.
    SumCoupling {
        /// JSON array of component laws.
        #[arg(long)]
        components: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Per-component shifts, comma separated; certified when absent.
        #[arg(long, value_delimiter = ',')]
        shifts: Vec<f64>,
    },
    /// Sampling estimate of D and Psi for a sum of independent laws.
    DPsi {
        #[arg(long)]
        components: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LipschitzArg {
    Sum,
    Max,
    Norm,
}

/// Result of a subcommand: the payload to write and whether the check passed.
struct Output {
    json: String,
    csv: Option<String>,
    passed: bool,
}

impl Output {
    fn json<T: Serialize>(value: &T, passed: bool) -> Result<Self> {
        Ok(Output {
            json: serde_json::to_string_pretty(value)?,
            csv: None,
            passed,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let out = match &cli.command {
        Command::Transform(a) => transform(a, cli.format)?,
        Command::OrderCheck(a) => order_check(a)?,
        Command::Bound(a) => bound(a, cli.format)?,
        Command::Verify(a) => verify(a)?,
        Command::Simulate(a) => simulate(a, cli.seed, exec)?,
    };
    emit(cli, &out)?;
    Ok(out.passed)
}

fn emit(cli: &Cli, out: &Output) -> Result<()> {
    let primary = match cli.format {
        Format::Json => &out.json,
        Format::Csv => out
            .csv
            .as_ref()
            .ok_or_else(|| anyhow!("--format csv is not available for this subcommand"))?,
    };
    match &cli.out {
        Some(path) => {
            write_atomic(path, primary)?;
            if cli.format == Format::Json {
                if let Some(csv) = &out.csv {
                    write_atomic(&path.with_extension("csv"), csv)?;
                }
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(primary.as_bytes())?;
            if !primary.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    if !contents.ends_with('\n') {
        tmp.write_all(b"\n")?;
    }
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

/// A distribution spec, or the `output` of a transform result.
fn dist_from_value(mut v: Value, origin: &str) -> Result<Distribution> {
    if let Some(inner) = v.get_mut("output") {
        v = inner.take();
    }
    let spec: DistSpec = serde_json::from_value(v).with_context(|| format!("invalid distribution in {origin}"))?;
    build_distribution(&spec).with_context(|| format!("invalid distribution in {origin}"))
}

fn load_dist(path: &Path) -> Result<Distribution> {
    dist_from_value(read_json(path)?, &path.display().to_string())
}

fn load_components(path: &Path) -> Result<Vec<Distribution>> {
    let v = read_json(path)?;
    let Value::Array(items) = v else {
        bail!("{} must hold a JSON array of distributions", path.display());
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| dist_from_value(item, &format!("{} [{i}]", path.display())))
        .collect()
}

fn load_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("malformed CSV in {}", path.display()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .with_context(|| format!("{} row {} column {}: `{cell}` is not a number", path.display(), i + 1, j + 1))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn transform(a: &TransformArgs, format: Format) -> Result<Output> {
    let result = match a.kind {
        TransformKind::ZeroBias => zero_bias(&load_dist(required(&a.spec, "--spec")?)?)?,
        TransformKind::SizeBias => size_bias(&load_dist(required(&a.spec, "--spec")?)?)?,
        TransformKind::Directional => {
            let joint: JointDistribution = match &a.joint {
                Some(p) => serde_json::from_value(read_json(p)?).with_context(|| format!("invalid joint law in {}", p.display()))?,
                None => bail!("missing required flag --joint for --kind directional"),
            };
            let axis = match a.axis {
                AxisArg::First => Axis::First,
                AxisArg::Second => Axis::Second,
            };
            directional_zero_bias(&joint, axis)?
        }
    };
    for w in &result.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = Output::json(&result, true)?;
    if format == Format::Csv {
        let header = match result.output.kind() {
            Kind::Discrete => "x,p\n",
            Kind::Continuous => "x,f\n",
        };
        let mut csv = String::from(header);
        for (x, w) in result.output.support().iter().zip(result.output.weights()) {
            csv.push_str(&format!("{x},{w}\n"));
        }
        out.csv = Some(csv);
    }
    Ok(out)
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| anyhow!("missing required flag {flag}"))
}

fn order_check(a: &OrderArgs) -> Result<Output> {
    let x = load_dist(&a.x)?;
    let y = load_dist(&a.y)?;
    let verdict: OrderVerdict = match a.order {
        OrderArg::St => check_st(&x, &y),
        OrderArg::Convex => check_convex(&x, &y),
        OrderArg::Weighted => check_weighted(&y, &x, *required(&a.sigma2, "--sigma2")?, *required(&a.k2, "--k2")?)?,
        OrderArg::SignSequence => check_sign_sequence(&x, &y, required(&a.expected, "--expected")?)?,
    };
    if verdict.warning {
        eprintln!("warning: the order holds only within tolerance (margin {:e})", verdict.margin);
    }
    Output::json(&verdict, verdict.holds)
}

fn bound(a: &BoundArgs, format: Format) -> Result<Output> {
    let tail_kind = match a.kind {
        BoundArg::Subgaussian => Some(BoundKind::Subgaussian),
        BoundArg::Subgamma => Some(BoundKind::Subgamma),
        BoundArg::GammaFunction => Some(BoundKind::GammaFunction),
        BoundArg::Chatterjee => Some(BoundKind::Chatterjee),
        BoundArg::Goldstein => Some(BoundKind::Goldstein),
        BoundArg::HoeffdingStat => Some(BoundKind::HoeffdingStat),
        BoundArg::HoeffdingLipschitz => Some(BoundKind::HoeffdingLipschitz),
        _ => None,
    };
    if let Some(kind) = tail_kind {
        if a.t.is_empty() {
            bail!("missing required flag --t for a tail bound");
        }
        let constants = BoundConstants {
            k2: a.k2,
            c: a.c,
            mu: a.mu,
            var_y: a.var_y,
            ey: a.ey,
            sum_c2: a.sum_c2,
            l: a.l,
        };
        #[derive(Serialize)]
        struct Point {
            t: f64,
            bound: f64,
        }
        let points = a
            .t
            .iter()
            .map(|&t| Ok(Point { t, bound: tail_bound(kind, &constants, t)? }))
            .collect::<Result<Vec<Point>>>()?;
        let mut out = Output::json(&points, true)?;
        if format == Format::Csv {
            let mut csv = String::from("t,bound\n");
            for p in &points {
                csv.push_str(&format!("{},{}\n", p.t, p.bound));
            }
            out.csv = Some(csv);
        }
        return Ok(out);
    }
    let value = match a.kind {
        BoundArg::K2 => {
            let path = required(&a.k2_spec, "--k2-spec")?;
            let spec: K2Spec = serde_json::from_value(read_json(path)?)
                .with_context(|| format!("invalid K^2 instance in {}", path.display()))?;
            let special = specialize_k2(&spec)?;
            let (sigma, k) = aggregate_instance(&spec)?;
            let general = aggregate_k2(&sigma, &k)?;
            if ((special - general) / general.abs().max(f64::MIN_POSITIVE)).abs() > 1e-12 {
                eprintln!("warning: specialized K^2 {special} differs from the general formula {general}");
            }
            special
        }
        kind => {
            let be = match kind {
                BoundArg::ZeroBiasBe => BerryEsseenKind::ZeroBias,
                BoundArg::SizeBiasD => BerryEsseenKind::SizeBiasD,
                _ => BerryEsseenKind::SizeBiasPsi,
            };
            let mut input = BerryEsseenInput {
                mu: a.mu,
                sigma2: a.sigma2,
                a: a.a,
                d: a.d,
                psi: a.psi,
                delta: a.delta,
            };
            if let Some(path) = &a.components {
                let cfg = SumCouplingConfig {
                    components: load_components(path)?,
                    shifts: None,
                    n_samples: 0,
                    seed: 0,
                };
                let est = estimate_d_psi(&cfg, DPsiMode::Exact, Exec::Sequential)?;
                input.mu = input.mu.or(Some(est.mu));
                input.sigma2 = input.sigma2.or(Some(est.sigma * est.sigma));
                input.d = input.d.or(Some(est.d));
                input.psi = input.psi.or(Some(est.psi));
            }
            berry_esseen_bound(be, &input)?
        }
    };
    Ok(Output {
        json: value.to_string(),
        csv: Some(format!("value\n{value}\n")),
        passed: true,
    })
}

fn lambda_grid(v: &[f64]) -> Option<&[f64]> {
    (!v.is_empty()).then_some(v)
}

/// Smallest valid kernel bound `a_Y(x) = sup_{t >= x} f_{Y*}(t) / f_Y(t)` on the grid of `Y`.
fn kernel_bound(y: &Distribution) -> Result<impl Fn(f64) -> f64> {
    let star = zero_bias(y)?.output;
    let xs = y.support().to_vec();
    let mut sup: Vec<f64> = xs
        .iter()
        .zip(y.weights())
        .map(|(&t, &f)| if f > 0.0 { star.density_at(t) / f } else { 0.0 })
        .collect();
    for i in (0..sup.len().saturating_sub(1)).rev() {
        sup[i] = sup[i].max(sup[i + 1]);
    }
    Ok(move |x: f64| {
        let i = xs.partition_point(|&t| t < x);
        sup.get(i).copied().unwrap_or(0.0)
    })
}

fn verify(a: &VerifyArgs) -> Result<Output> {
    let d = load_dist(&a.spec)?;
    let cert: Certificate = match a.claim {
        ClaimArg::Mgf => check_mgf_condition(&d, *required(&a.k2, "--k2")?, lambda_grid(&a.lambdas))?,
        ClaimArg::StrongLogconcavity => check_strong_logconcavity(&d, *required(&a.k2, "--k2")?)?,
        ClaimArg::Subgaussian => verify_subgaussian_equivalence(&d, *required(&a.k2, "--k2")?, lambda_grid(&a.lambdas))?,
        ClaimArg::Kernel => {
            let y = load_dist(required(&a.reference, "--reference")?)?;
            let x0 = *required(&a.x0, "--x0")?;
            match a.a_y {
                Some(c) => check_kernel_domination(&d, &y, x0, &move |_| c)?,
                None => check_kernel_domination(&d, &y, x0, &kernel_bound(&y)?)?,
            }
        }
        ClaimArg::PhiPrime => check_phi_prime(&d, *required(&a.x_l, "--x-l")?, *required(&a.x_r, "--x-r")?)?,
        ClaimArg::Shift => check_density_shift(&d, *required(&a.c, "--c")?, a.t0)?,
        ClaimArg::MinShift => {
            let c = find_min_shift(&d, a.t0)?;
            let Some(c) = c else {
                eprintln!("no shift up to the support width satisfies the condition from t0 = {}", a.t0);
                return Output::json(&Value::Null, false);
            };
            eprintln!("smallest certified shift: {c}");
            check_density_shift(&d, c, a.t0)?
        }
    };
    if !cert.is_verified() {
        eprintln!("{:?}: {}", cert.verdict, failing_checks(&cert).join(", "));
    }
    Output::json(&cert, cert.is_verified())
}

fn failing_checks(c: &Certificate) -> Vec<String> {
    c.hypothesis_checks
        .iter()
        .chain(&c.conclusion_checks)
        .filter(|k| !k.holds)
        .map(|k| match k.witness {
            Some(w) => format!("{} (margin {:e} at {w})", k.name, k.margin),
            None => format!("{} (margin {:e})", k.name, k.margin),
        })
        .collect()
}

fn report_output(r: &ExperimentReport) -> Result<Output> {
    if r.outcome == Outcome::Inconclusive {
        eprintln!("warning: some bounds are inconclusive at the sampled confidence");
    }
    for n in &r.notes {
        eprintln!("note: {n}");
    }
    Ok(Output {
        json: r.to_json()?,
        csv: Some(r.to_csv()),
        passed: r.outcome != Outcome::Violated,
    })
}

fn simulate(a: &SimulateArgs, seed: Option<u64>, exec: Exec) -> Result<Output> {
    let seed = seed.ok_or_else(|| anyhow!("missing required flag --seed for simulate"))?;
    let start = std::time::Instant::now();
    let out = match &a.experiment {
        Experiment::Hoeffding { matrix, samples, t, lipschitz } => {
            let cfg = HoeffdingConfig {
                matrix: load_matrix(matrix)?,
                n_samples: *samples,
                seed,
                t_grid: (!t.is_empty()).then(|| t.clone()),
                lipschitz: lipschitz.map(|l| match l {
                    LipschitzArg::Sum => LipschitzFn::Sum,
                    LipschitzArg::Max => LipschitzFn::Max,
                    LipschitzArg::Norm => LipschitzFn::Norm,
                }),
            };
            report_output(&simulate_hoeffding(&cfg, exec)?)?
        }
        Experiment::SumCoupling { components, samples, shifts } => {
            let cfg = SumCouplingConfig {
                components: load_components(components)?,
                shifts: (!shifts.is_empty()).then(|| shifts.clone()),
                n_samples: *samples,
                seed,
            };
            report_output(&verify_coupling_bound(&cfg, exec)?)?
        }
        Experiment::DPsi { components, samples } => {
            let cfg = SumCouplingConfig {
                components: load_components(components)?,
                shifts: None,
                n_samples: *samples,
                seed,
            };
            Output::json(&estimate_d_psi(&cfg, DPsiMode::Sampling, exec)?, true)?
        }
    };
    eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    Ok(out)
}
