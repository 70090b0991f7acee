//! Acceptance criteria, one test each. Every test prints a single
//! `[PASS]` or `[FAIL]` line before asserting, so
//! `cargo test -p stein-core --test acceptance -- --nocapture --test-threads=1`
//! reads as a checklist.

use std::f64::consts::{E, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use stein_core::bounds::{
    aggregate_instance, aggregate_k2, berry_esseen_bound, specialize_k2, BerryEsseenInput, BerryEsseenKind, K2Spec,
};
use stein_core::dist::{build_distribution, DistSpec, Distribution, Family};
use stein_core::montecarlo::{
    estimate_d_psi, simulate_hoeffding, sum_size_bias_coupling, verify_coupling_bound, DPsiMode, HoeffdingConfig,
    Outcome, Status, SumCouplingConfig,
};
use stein_core::transforms::{size_bias, zero_bias};
use stein_core::verifiers::{
    check_density_shift, check_strong_logconcavity, verify_subgaussian_equivalence, Verdict,
};
use stein_core::Exec;

fn verdict(id: &str, title: &str, pass: bool, detail: String) {
    println!("[{}] {id} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} failed: {detail}");
}

fn fam(f: Family, p: &[(&str, f64)]) -> Distribution {
    build_distribution(&DistSpec::family(f, p)).unwrap()
}

fn centered(f: Family, p: &[(&str, f64)]) -> Distribution {
    let mut s = DistSpec::family(f, p);
    s.center = true;
    build_distribution(&s).unwrap()
}

#[test]
fn ac01_gaussian_fixed_point() {
    let start = Instant::now();
    let g = fam(Family::Gaussian, &[("mean", 0.0), ("var", 1.0)]);
    let z = zero_bias(&g).unwrap().output;
    let elapsed = start.elapsed().as_secs_f64();
    let phi = Normal::new(0.0, 1.0).unwrap();
    let d = z
        .support()
        .iter()
        .map(|&x| (z.cdf(x) - phi.cdf(x)).abs())
        .fold(0.0f64, f64::max);
    verdict(
        "AC-1",
        "gaussian fixed point",
        d < 1e-5 && elapsed < 1.0,
        format!("d_Kol = {d:.3e} (< 1e-5) on {} points, {elapsed:.3} s (< 1 s)", z.support().len()),
    );
}

#[test]
fn ac02_bernoulli_zero_bias_is_uniform() {
    let b = fam(Family::CenteredBernoulli, &[("p", 0.5)]);
    let z = zero_bias(&b).unwrap().output;
    // E[X 1{X > w}] / Var X, summed over the two atoms
    let atoms = [(-0.5, 0.5), (0.5, 0.5)];
    let var: f64 = atoms.iter().map(|(x, p)| x * x * p).sum();
    let oracle = |w: f64| atoms.iter().filter(|(x, _)| *x > w).map(|(x, p)| x * p).sum::<f64>() / var;
    let mut err = 0.0f64;
    for (&x, &f) in z.support().iter().zip(z.weights()) {
        let target = if x <= -0.5 {
            oracle(-0.5 + 1e-12)
        } else if x >= 0.5 {
            oracle(0.5 - 1e-12)
        } else {
            oracle(x)
        };
        err = err.max((f - target).abs());
    }
    let hull = z.hull();
    verdict(
        "AC-2",
        "zero bias of centered Bernoulli(1/2) is uniform(-1/2, 1/2)",
        err < 1e-6 && (hull.0 + 0.5).abs() < 1e-12 && (hull.1 - 0.5).abs() < 1e-12,
        format!("sup-norm density error {err:.3e} (< 1e-6), hull [{}, {}]", hull.0, hull.1),
    );
}

#[test]
fn ac03_stein_identity_battery() {
    let laws = [
        ("gaussian(0,2)", fam(Family::Gaussian, &[("mean", 0.0), ("var", 2.0)])),
        ("uniform(-1,1)", fam(Family::Uniform, &[("a", -1.0), ("b", 1.0)])),
        ("centered-bernoulli(0.3)", fam(Family::CenteredBernoulli, &[("p", 0.3)])),
        ("exponential(1) centered", {
            let mut s = DistSpec::family(Family::Exponential, &[("rate", 1.0)]).with_points(16001);
            s.center = true;
            build_distribution(&s).unwrap()
        }),
        ("poisson(3) centered", centered(Family::Poisson, &[("lambda", 3.0)])),
    ];
    type Pair = (&'static str, fn(f64) -> f64, fn(f64) -> f64);
    let tests: [Pair; 4] = [
        ("x", |x| x, |_| 1.0),
        ("x^2", |x| x * x, |x| 2.0 * x),
        ("sin", f64::sin, f64::cos),
        ("tanh", f64::tanh, |x| 1.0 / x.cosh().powi(2)),
    ];
    let mut worst = (0.0f64, String::new());
    for (name, d) in &laws {
        let z = zero_bias(d).unwrap().output;
        for (fname, f, df) in &tests {
            let lhs = d.expect(|x| x * f(x));
            let rhs = d.variance() * z.expect(df);
            let gap = (lhs - rhs).abs();
            if gap > worst.0 {
                worst = (gap, format!("{name}, f = {fname}"));
            }
        }
    }
    verdict(
        "AC-3",
        "Stein identity battery (5 laws x 4 functions)",
        worst.0 < 1e-5,
        format!("max |E[X f(X)] - s^2 E[f'(X*)]| = {:.3e} at {} (< 1e-5)", worst.0, worst.1),
    );
}

#[test]
fn ac04_poisson_size_bias_shift() {
    let mut worst = 0.0f64;
    for l in [0.5, 2.0, 5.0] {
        let d = fam(Family::Poisson, &[("lambda", l)]);
        let s = size_bias(&d).unwrap().output;
        // p(k - 1) by the recursion p(0) = e^-l, p(k) = p(k-1) l / k
        let mut prev = 0.0;
        let mut p = (-l).exp();
        for (k, (&x, &w)) in s.support().iter().zip(s.weights()).enumerate() {
            assert_eq!(x, k as f64);
            let expected = prev;
            worst = worst.max((w - expected).abs());
            prev = p;
            p *= l / (k + 1) as f64;
        }
    }
    verdict(
        "AC-4",
        "size bias of Poisson is X + 1",
        worst < 1e-12,
        format!("max atomwise pmf error {worst:.3e} over lambda in {{0.5, 2, 5}} (< 1e-12)"),
    );
}

/// Density `exp(-(x^2/2 + a x^4 + b x^3))`, recentered. Its potential has
/// second derivative `1 + 12 a x^2 + 6 b x >= 1 - 3 b^2 / (4 a)`.
fn perturbed(a: f64, b: f64) -> (Distribution, f64) {
    let d = Distribution::from_density_fn(-8.0, 8.0, 4001, |x| (-(x * x / 2.0 + a * x.powi(4) + b * x.powi(3))).exp())
        .unwrap()
        .centered()
        .unwrap();
    let curvature = if b == 0.0 { 1.0 } else { 1.0 - 0.75 * b * b / a };
    (d, 1.0 / curvature)
}

#[test]
fn ac05_logconcavity_pipeline() {
    let mut battery: Vec<(String, Distribution, f64)> = vec![
        ("gaussian(0,1)".into(), fam(Family::Gaussian, &[("mean", 0.0), ("var", 1.0)]), 1.0),
        ("gaussian(0,3)".into(), fam(Family::Gaussian, &[("mean", 0.0), ("var", 3.0)]), 3.0),
        ("uniform(-1,1)".into(), fam(Family::Uniform, &[("a", -1.0), ("b", 1.0)]), 1.0),
    ];
    for (a, b) in [(0.05, 0.0), (0.1, 0.0), (0.5, 0.0), (1.0, 0.0), (0.1, 0.3), (0.2, -0.2)] {
        let (d, k2) = perturbed(a, b);
        battery.push((format!("perturbation a={a} b={b}"), d, k2 * 1.001));
    }
    let mut counterexamples = Vec::new();
    let mut certified = 0;
    for (name, d, k2) in &battery {
        let slc = check_strong_logconcavity(d, *k2).unwrap().is_verified();
        let c = verify_subgaussian_equivalence(d, *k2, None).unwrap();
        let doms = c.hypothesis_checks.iter().all(|h| h.holds);
        let mgf = c.conclusion_checks.iter().all(|h| h.holds);
        if slc {
            certified += 1;
        }
        if (slc && !doms) || (doms && !mgf) {
            counterexamples.push(format!("{name} (logconcave {slc}, dominations {doms}, mgf {mgf})"));
        }
    }
    verdict(
        "AC-5",
        "strong log-concavity => weighted dominations => MGF bound",
        counterexamples.is_empty() && certified >= 7,
        format!(
            "{} laws, {certified} certified strongly log-concave, counterexamples: {:?}",
            battery.len(),
            counterexamples
        ),
    );
}

#[test]
fn ac06_berry_esseen_constants() {
    let c = berry_esseen_bound(BerryEsseenKind::ZeroBias, &BerryEsseenInput { delta: Some(1.0), ..Default::default() })
        .unwrap();
    let expected = 1.0 + 1.0 / (2.0 * PI).sqrt() + (2.0 * PI).sqrt() / 4.0;
    let psi = berry_esseen_bound(
        BerryEsseenKind::SizeBiasPsi,
        &BerryEsseenInput {
            mu: Some(2.0),
            sigma2: Some(3.0),
            a: Some(1.0),
            psi: Some(0.5),
            ..Default::default()
        },
    )
    .unwrap();
    // 6 * 2 * 1 / 3^1.5 + 2 * 2 * 0.5 / 3
    let hand = 2.309_401_076_758_503 + 0.666_666_666_666_666_6;
    verdict(
        "AC-6",
        "Berry-Esseen constants",
        (c - expected).abs() < 1e-15 && c <= 2.03 && (psi - hand).abs() < 1e-12,
        format!("zero-bias constant {c} (<= 2.03), psi bound {psi} vs hand value {hand}"),
    );
}

fn random_spec(rng: &mut ChaCha8Rng, which: usize) -> K2Spec {
    let n = rng.random_range(1..=5);
    let pos = |rng: &mut ChaCha8Rng| rng.random_range(0.2..2.0);
    let k: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| pos(rng)).collect()).collect();
    match which {
        0 => {
            let sigma = (0..n).map(|_| pos(rng)).collect();
            let neighborhoods = (0..n)
                .map(|i| (0..n).filter(|&j| j == i || rng.random_bool(0.5)).collect())
                .collect();
            K2Spec::Neighborhood { sigma, k, neighborhoods }
        }
        1 => K2Spec::Linear { a: (0..n).map(|_| pos(rng)).collect(), k },
        2 => K2Spec::Bounded {
            intervals: (0..n).map(|_| (-pos(rng), pos(rng))).collect(),
            sigma: (0..n).map(|_| pos(rng)).collect(),
            independent: rng.random_bool(0.5),
        },
        _ => K2Spec::Mcdiarmid { c: (0..n).map(|_| pos(rng)).collect() },
    }
}

#[test]
fn ac07_k2_specializations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for which in 0..4 {
        for _ in 0..100 {
            let spec = random_spec(&mut rng, which);
            let s = specialize_k2(&spec).unwrap();
            let (sigma, k) = aggregate_instance(&spec).unwrap();
            let a = aggregate_k2(&sigma, &k).unwrap();
            worst = worst.max(((s - a) / a).abs());
        }
    }
    let mc = specialize_k2(&K2Spec::Mcdiarmid { c: vec![2.0; 4] }).unwrap();
    let (sigma, k) = aggregate_instance(&K2Spec::Mcdiarmid { c: vec![2.0; 4] }).unwrap();
    let mc_agg = aggregate_k2(&sigma, &k).unwrap();
    verdict(
        "AC-7",
        "K^2 aggregate matches the four specializations",
        worst < 1e-12 && mc == 2.0 && (mc_agg - 2.0).abs() < 1e-12,
        format!("max relative error {worst:.3e} over 400 instances (< 1e-12); McDiarmid c=(2,2,2,2) gives {mc} / {mc_agg}"),
    );
}

#[test]
fn ac08_hoeffding_experiment() {
    let mut lines = Vec::new();
    let mut all = true;
    for seed in [101u64, 202, 303] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix: Vec<Vec<f64>> = (0..20).map(|_| (0..20).map(|_| rng.random::<f64>()).collect()).collect();
        let cfg = HoeffdingConfig {
            matrix,
            n_samples: 100_000,
            seed,
            t_grid: None,
            lipschitz: None,
        };
        let start = Instant::now();
        let r = simulate_hoeffding(&cfg, Exec::default()).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let b = r.bound("bound_16").unwrap();
        let count = |s: Status| b.status.iter().filter(|x| **x == s).count();
        let first_bad = r
            .tails
            .iter()
            .zip(&b.status)
            .find(|(_, s)| **s != Status::Pass)
            .map(|(p, _)| p.t);
        let ok = b.outcome == Outcome::Pass && secs < 30.0;
        all &= ok;
        lines.push(format!(
            "seed {seed}: sum c^2 = {:.3}, grid 0..{:.2}, pass {} / inconclusive {} / violated {}, first non-pass t = {:?}, band half-width {:.4}, {secs:.2} s",
            r.constants["sum_c2"],
            r.constants["sum_c"],
            count(Status::Pass),
            count(Status::Inconclusive),
            count(Status::Violated),
            first_bad,
            r.dkw_epsilon,
        ));
    }
    verdict(
        "AC-8",
        "DKW upper band below exp(-t^2 / sum c_i^2) on 0:0.25:sum c_i",
        all,
        lines.join("; "),
    );
}

#[test]
fn ac09_poisson_sum_coupling() {
    let comps: Vec<Distribution> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&l| fam(Family::Poisson, &[("lambda", l)]))
        .collect();
    let cfg = SumCouplingConfig {
        components: comps,
        shifts: None,
        n_samples: 100_000,
        seed: 9,
    };
    let draws = sum_size_bias_coupling(&cfg, Exec::default()).unwrap();
    let off = draws.iter().filter(|d| d.gap != 1.0).count();
    let r = verify_coupling_bound(&cfg, Exec::default()).unwrap();
    let c = r.coupling.as_ref().unwrap();
    verdict(
        "AC-9",
        "Poisson (1, 2, 3) size-bias coupling",
        off == 0 && c.violation_count == 0 && c.max_gap == 1.0 && c.max_shift == 1.0,
        format!(
            "{} draws, {off} with Y^s - Y != 1, {} violations of Y^s <= Y + {}",
            draws.len(),
            c.violation_count,
            c.max_shift
        ),
    );
}

#[test]
fn ac10_shift_certificates() {
    let mut worst = 0.0f64;
    let mut all_verified = true;
    for l in [0.5, 2.0, 5.0] {
        let d = fam(Family::Poisson, &[("lambda", l)]);
        let c = check_density_shift(&d, 1.0, 1.0).unwrap();
        all_verified &= c.is_verified();
        worst = worst
            .max(c.hypothesis("shift_condition").unwrap().margin.abs())
            .max(c.conclusion("size_bias_domination").unwrap().margin.abs());
    }
    let e = fam(Family::Exponential, &[("rate", 1.0)]);
    let c = check_density_shift(&e, 1.0, 0.0).unwrap();
    let w = c.witness.unwrap_or(f64::NAN);
    let hw = c.hypothesis("shift_condition").unwrap().witness.unwrap_or(f64::NAN);
    verdict(
        "AC-10",
        "shift certificates",
        all_verified && worst <= 1e-12 && c.verdict == Verdict::ConclusionViolated && (w - E).abs() < 0.05,
        format!(
            "poisson margins <= {worst:.3e} (<= 1e-12); exponential c=1: {:?} with witness {w:.4} (crossover e = {E:.4}), condition first fails at {hw:.4}",
            c.verdict
        ),
    );
}

#[test]
fn ac11_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let matrix: Vec<Vec<f64>> = (0..12).map(|_| (0..12).map(|_| rng.random::<f64>()).collect()).collect();
    let h = HoeffdingConfig {
        matrix,
        n_samples: 50_000,
        seed: 77,
        t_grid: None,
        lipschitz: Some(stein_core::montecarlo::LipschitzFn::Max),
    };
    let s = SumCouplingConfig {
        components: vec![
            fam(Family::Poisson, &[("lambda", 2.0)]),
            Distribution::new(stein_core::Kind::Discrete, vec![0.0, 1.0, 2.0], vec![0.3, 0.4, 0.3]).unwrap(),
        ],
        shifts: None,
        n_samples: 50_000,
        seed: 78,
    };
    let runs = |exec: Exec| {
        (
            simulate_hoeffding(&h, exec).unwrap().to_json().unwrap(),
            verify_coupling_bound(&s, exec).unwrap().to_json().unwrap(),
            serde_json::to_string(&estimate_d_psi(&s, DPsiMode::Sampling, exec).unwrap()).unwrap(),
        )
    };
    let a = runs(Exec::Parallel);
    let b = runs(Exec::Parallel);
    let c = runs(Exec::Sequential);
    verdict(
        "AC-11",
        "stochastic reports are byte-identical under a fixed seed",
        a == b && a == c,
        format!(
            "hoeffding {} bytes, coupling {} bytes, D/Psi {} bytes; repeat identical {}, sequential identical {}",
            a.0.len(),
            a.1.len(),
            a.2.len(),
            a == b,
            a == c
        ),
    );
}
