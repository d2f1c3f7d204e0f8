//! Acceptance suite: every release criterion runs here at its pinned
//! tolerance and prints one pass/fail line. Reference values come from
//! closed forms or test-local quadrature, never from the code under test.
//!
//! The reference configuration ("config A") is F Pareto-type (α = 2,
//! x_m = 1, constant L = 1), G = Uniform(0,1), FGM kernels, θ = 1, with
//! exact constants κ = 1/2, E[Y^α] = 1/3, finite factor(5) = 121/162,
//! infinite factor = 3/4.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;

use sarmanov_ruin::asymptotics::{self, AsymptoticConstants};
use sarmanov_ruin::conditions::{
    self, geometric_grid, SummabilityVariant, SummabilityVerdict, Verdict,
};
use sarmanov_ruin::gof;
use sarmanov_ruin::marginals::{
    DiscountLaw, LongTailedLaw, RegularlyVaryingLaw, SlowlyVaryingForm, SlowlyVaryingSpec,
};
use sarmanov_ruin::sarmanov::{KernelSpec, SarmanovModel};
use sarmanov_ruin::simulate::{self, McMethod};

fn config_a(theta: f64) -> SarmanovModel {
    SarmanovModel::new(
        RegularlyVaryingLaw::pareto_type(2.0, 1.0).unwrap(),
        DiscountLaw::Uniform { b: 1.0 },
        theta,
        KernelSpec::Fgm,
    )
    .unwrap()
}

fn constants_a(theta: f64) -> AsymptoticConstants {
    asymptotics::breiman_constant(&config_a(theta)).unwrap()
}

/// Composite Simpson on [0,1], the test-side quadrature oracle.
fn simpson01<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_01_constants() {
    let t0 = Instant::now();
    let c = constants_a(1.0);
    let f2 = c.finite_horizon_factor(2).unwrap();
    let f5 = c.finite_horizon_factor(5).unwrap();
    let inf = c.infinite_horizon_factor().unwrap();
    let elapsed = t0.elapsed();

    // Independent oracle: Simpson integration against the uniform density.
    let e_y_oracle = simpson01(|y| y * y, 20_000);
    let km_oracle = simpson01(|y| (1.0 - 2.0 * y) * y * y, 20_000);
    let kappa_oracle = e_y_oracle - km_oracle;
    let f2_oracle = (1.0 - e_y_oracle.powi(2)) / (1.0 - e_y_oracle) * kappa_oracle;
    let f5_oracle = (1.0 - e_y_oracle.powi(5)) / (1.0 - e_y_oracle) * kappa_oracle;
    let inf_oracle = kappa_oracle / (1.0 - e_y_oracle);

    let checks = [
        (c.kappa, kappa_oracle, 0.5),
        (c.e_y_alpha, e_y_oracle, 1.0 / 3.0),
        (f2, f2_oracle, 2.0 / 3.0),
        (f5, f5_oracle, 121.0 / 162.0),
        (inf, inf_oracle, 0.75),
    ];
    let pass = checks
        .iter()
        .all(|&(got, oracle, exact)| (got - oracle).abs() < 1e-9 && (got - exact).abs() < 1e-9)
        && elapsed.as_secs_f64() < 1.0;
    report(
        "1 (constants)",
        pass,
        &format!(
            "kappa {:.12}, E[Y^α] {:.12}, factor(2) {f2:.12}, factor(5) {f5:.12}, \
             infinite {inf:.12}, runtime {elapsed:?}",
            c.kappa, c.e_y_alpha
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_twisted_consistency() {
    // Config A plus five seeded random custom-kernel models: the twisted
    // α-moment must equal κ computed from the kernel moment, to 1e-9.
    let mut cases: Vec<(String, SarmanovModel)> = vec![("config A".into(), config_a(1.0))];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    while cases.len() < 6 {
        let alpha = 1.0 + 2.0 * rng.random::<f64>();
        let f = RegularlyVaryingLaw::pareto_type(alpha, 1.0).unwrap();
        let g = match cases.len() % 3 {
            0 => DiscountLaw::Uniform {
                b: 0.5 + rng.random::<f64>(),
            },
            1 => DiscountLaw::ScaledBeta {
                a: 1.0 + 2.0 * rng.random::<f64>(),
                b: 1.0 + 2.0 * rng.random::<f64>(),
                scale: 0.5 + rng.random::<f64>(),
            },
            _ => DiscountLaw::BoundedPareto {
                index: 0.5 + 1.5 * rng.random::<f64>(),
                lo: 0.1 + 0.2 * rng.random::<f64>(),
                hi: 1.0 + rng.random::<f64>(),
            },
        };
        let k1 = 1 + (rng.random::<u32>() % 3);
        let k2 = 1 + (rng.random::<u32>() % 3);
        let bound = |k: u32| if k % 2 == 1 { 1.0 } else { k as f64 / (k as f64 + 1.0) };
        let theta = (2.0 * rng.random::<f64>() - 1.0) * 0.9 / (bound(k1) * bound(k2));
        let label = format!("custom k=({k1},{k2}), θ={theta:.3}, {g:?}");
        let model = SarmanovModel::new(f, g, theta, KernelSpec::CdfPower { k1, k2 }).unwrap();
        cases.push((label, model));
    }

    let mut worst = 0.0_f64;
    let mut pass = true;
    for (label, model) in &cases {
        let alpha = model.f().alpha();
        let twisted = model.twisted_law().unwrap().power_moment(alpha).unwrap();
        let kernel_moment = model
            .g()
            .expect_poly(alpha, |y| model.phi2(y), 1e-11)
            .unwrap();
        let kappa = model.g().power_moment(alpha).unwrap() + model.theta() * model.d1() * kernel_moment;
        let gap = (twisted - kappa).abs();
        worst = worst.max(gap);
        if gap > 1e-9 * kappa.max(1.0) {
            pass = false;
            println!("  twisted mismatch for {label}: {twisted} vs {kappa}");
        }
    }
    report(
        "2 (twisted-law consistency)",
        pass,
        &format!("{} models, worst |E_Gθ[Y^α] - κ| = {worst:.3e}", cases.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_03_product_tail() {
    let m = config_a(1.0);
    let x = 100.0;
    let exact = simulate::exact_product_tail(&m, x).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t0 = Instant::now();
    let est = pool
        .install(|| simulate::product_tail_mc(&m, x, McMethod::Conditional, 1_000_000, 301))
        .unwrap();
    let elapsed = t0.elapsed();
    let ratio = est.value / m.f().tail(x);
    let within_se = (est.value - exact).abs() < 3.0 * est.stderr;
    let within_pct = (ratio - 0.5).abs() < 0.01 * 0.5;
    let fast = elapsed.as_secs_f64() < 10.0;
    let pass = within_se && within_pct && fast;
    report(
        "3 (product tail)",
        pass,
        &format!(
            "estimate {:.6e} ± {:.2e} vs exact {exact:.6e}; ratio {ratio:.6} vs 0.5; \
             single-worker runtime {elapsed:?}",
            est.value, est.stderr
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_finite_horizon_ruin() {
    let m = config_a(1.0);
    let t0 = Instant::now();
    let cond100 = simulate::estimate_finite_ruin(&m, 100.0, 5, McMethod::Conditional, 1_000_000, 401)
        .unwrap();
    let ratio = cond100.value / m.f().tail(100.0);
    let target = 121.0 / 162.0;
    let cond_ok = (ratio - target).abs() < 0.03 * target;

    let crude20 =
        simulate::estimate_finite_ruin(&m, 20.0, 5, McMethod::Crude, 10_000_000, 402).unwrap();
    let cond20 =
        simulate::estimate_finite_ruin(&m, 20.0, 5, McMethod::Conditional, 1_000_000, 403).unwrap();
    let rel_gap = (crude20.value - cond20.value).abs() / cond20.value;
    let crude_ok = rel_gap <= 0.10;
    let elapsed = t0.elapsed();
    let fast = elapsed.as_secs_f64() < 120.0;

    let pass = cond_ok && crude_ok && fast;
    report(
        "4 (finite-horizon ruin)",
        pass,
        &format!(
            "conditional ratio {ratio:.6} vs {target:.6} (ok: {cond_ok}); \
             crude/conditional at x=20: {:.6e} vs {:.6e}, relative gap {rel_gap:.3} \
             against the 0.10 tolerance (ok: {crude_ok}); runtime {elapsed:?}",
            crude20.value, cond20.value
        ),
    );
    assert!(
        pass,
        "the crude-vs-conditional clause demands 10% agreement at x = 20, but \
         Ψ(20,5) genuinely exceeds Σ H̄_i(20) by ~30%: the single-big-jump \
         regime has not set in at x = 20 for α = 2 (both estimators verify \
         against exact quadrature; see the extended x = 100 check, which \
         agrees to ~4%). Recorded in the decisions ledger."
    );
}

/// Extended-suite variant of the sup-sum consistency check at x = 100 with
/// 1e8 crude paths (~25 s): the regime where the asymptotic equivalence is
/// observable. Run with `cargo test -- --ignored`.
#[test]
#[ignore = "extended suite: ~30 s of crude path simulation"]
fn extended_sup_sum_consistency_x100() {
    let m = config_a(1.0);
    let crude =
        simulate::estimate_finite_ruin(&m, 100.0, 5, McMethod::Crude, 100_000_000, 42).unwrap();
    let cond =
        simulate::estimate_finite_ruin(&m, 100.0, 5, McMethod::Conditional, 1_000_000, 43).unwrap();
    let rel_gap = (crude.value - cond.value).abs() / cond.value;
    println!("extended sup-sum: crude {:.6e}, cond {:.6e}, gap {rel_gap:.4}", crude.value, cond.value);
    assert!(rel_gap <= 0.10, "gap {rel_gap}");
}

#[test]
fn criterion_05_infinite_horizon_ruin() {
    let m = config_a(1.0);
    let t0 = Instant::now();
    let est = simulate::estimate_infinite_ruin(&m, 100.0, 1_000_000, 0.01, 501).unwrap();
    let elapsed = t0.elapsed();
    let ratio = est.value / m.f().tail(100.0);
    let ratio_ok = (ratio - 0.75).abs() < 0.05 * 0.75;
    let bound = est.remainder_bound.unwrap();
    let bound_ok = bound <= 0.01 * est.value;
    let fast = elapsed.as_secs_f64() < 120.0;
    let pass = ratio_ok && bound_ok && fast;
    report(
        "5 (infinite-horizon ruin)",
        pass,
        &format!(
            "ratio {ratio:.6} vs 0.75; truncation N = {}, remainder bound {bound:.3e} \
             ({:.3}% of the estimate); runtime {elapsed:?}",
            est.truncation_index.unwrap(),
            100.0 * bound / est.value
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_theta_zero_reduction() {
    let m = config_a(0.0);
    let c = constants_a(0.0);
    let kappa = c.kappa;
    let kappa_ok = (kappa - 1.0 / 3.0).abs() < 1e-9;

    // (3) with θ = 0.
    let exact = simulate::exact_product_tail(&m, 100.0).unwrap();
    let prod = simulate::product_tail_mc(&m, 100.0, McMethod::Conditional, 1_000_000, 601).unwrap();
    let prod_ratio = prod.value / m.f().tail(100.0);
    let prod_ok = (prod.value - exact).abs() < 3.0 * prod.stderr
        && (prod_ratio - kappa).abs() < 0.01 * kappa;

    // (4)'s constant clause with θ = 0.
    let finite_target = c.finite_horizon_factor(5).unwrap();
    let finite = simulate::estimate_finite_ruin(&m, 100.0, 5, McMethod::Conditional, 1_000_000, 602)
        .unwrap();
    let finite_ratio = finite.value / m.f().tail(100.0);
    let finite_ok = (finite_ratio - finite_target).abs() < 0.03 * finite_target;
    let finite_target_ok = (finite_target - 121.0 / 243.0).abs() < 1e-12;

    // (5) with θ = 0.
    let inf_target = c.infinite_horizon_factor().unwrap();
    let inf = simulate::estimate_infinite_ruin(&m, 100.0, 1_000_000, 0.01, 603).unwrap();
    let inf_ratio = inf.value / m.f().tail(100.0);
    let inf_ok = (inf_ratio - 0.5).abs() < 0.05 * 0.5 && (inf_target - 0.5).abs() < 1e-12;

    let pass = kappa_ok && prod_ok && finite_ok && finite_target_ok && inf_ok;
    report(
        "6 (θ=0 reduction)",
        pass,
        &format!(
            "κ {kappa:.9}; product ratio {prod_ratio:.6} vs {kappa:.6}; finite ratio \
             {finite_ratio:.6} vs {finite_target:.6}; infinite ratio {inf_ratio:.6} vs 0.5"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_sampler_suite() {
    let mut pass = true;
    let mut details = Vec::new();
    for (theta, seed) in [(-1.0, 701u64), (0.5, 702), (1.0, 703)] {
        let m = config_a(theta);
        let draws = m.sample_joint(1_000_000, seed).unwrap();
        let n = draws.len() as f64;
        let xs: Vec<f64> = draws.iter().map(|&(x, _)| x).collect();
        let ys: Vec<f64> = draws.iter().map(|&(_, y)| y).collect();
        let px = gof::ks_pvalue(gof::ks_statistic(&xs, |x| m.f().cdf(x)), xs.len());
        let py = gof::ks_pvalue(gof::ks_statistic(&ys, |y| m.g().cdf(y)), ys.len());

        let mean_se = |vals: &[f64]| {
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        };
        let (m1, se1) = mean_se(&draws.iter().map(|&(x, _)| m.phi1(x)).collect::<Vec<_>>());
        let (m2, se2) = mean_se(&draws.iter().map(|&(_, y)| m.phi2(y)).collect::<Vec<_>>());
        let (cross, se_cross) = mean_se(
            &draws
                .iter()
                .map(|&(x, y)| m.phi1(x) * m.phi2(y))
                .collect::<Vec<_>>(),
        );
        let ok = px > 0.01
            && py > 0.01
            && m1.abs() < 4.0 * se1
            && m2.abs() < 4.0 * se2
            && (cross - theta / 9.0).abs() < 4.0 * se_cross;
        pass &= ok;
        details.push(format!(
            "θ={theta}: KS p=({px:.3},{py:.3}), centering ({m1:.1e},{m2:.1e}), \
             cross {cross:.5} vs {:.5}",
            theta / 9.0
        ));
    }
    report("7 (sampler suite)", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_08_dz_diagnostics() {
    let grid = geometric_grid(1.0, 1e6, 200).unwrap();
    let report_a = conditions::dz_report(&config_a(1.0), &grid).unwrap();
    let dz1_ok = report_a.dz1.verdict == Verdict::Pass
        && report_a.dz1.diagnostics[0]
            .values
            .iter()
            .all(|&s| (s - 1.0).abs() < 1e-12);
    let dz4_ok = report_a.dz4.verdict == Verdict::Pass;

    let f3 = RegularlyVaryingLaw::new(
        1.0,
        1.0,
        SlowlyVaryingSpec {
            c: 1.0,
            form: SlowlyVaryingForm::TypeIII {
                u: LongTailedLaw::Weibull {
                    shape: 0.5,
                    rate: 1.0,
                },
            },
        },
    )
    .unwrap();
    let m3 = SarmanovModel::new(
        f3,
        DiscountLaw::Lognormal { mu: 0.0, sigma: 1.0 },
        1.0,
        KernelSpec::Fgm,
    )
    .unwrap();
    let report_3 = conditions::dz_report(&m3, &grid).unwrap();
    let ratios = &report_3.dz3.diagnostics[0].values;
    let start = grid.iter().position(|&x| x >= 1e3).unwrap();
    let strictly_decreasing = ratios[start..].windows(2).all(|w| w[1] < w[0]);

    let pass = dz1_ok && dz4_ok && strictly_decreasing;
    report(
        "8 (DZ diagnostics)",
        pass,
        &format!(
            "config A: DZ1 {:?} (sup ≡ 1: {dz1_ok}), DZ4 {:?}; TypeIII/lognormal DZ3 \
             o-ratio strictly decreasing over the top three decades: {strictly_decreasing}",
            report_a.dz1.verdict, report_a.dz4.verdict
        ),
    );
    assert!(pass);
}

/// Exact P[ζ_i > x] for Y ~ Uniform(0, b): an Erlang(i-1) CDF evaluated at
/// (i-1) ln b - ln x. This is the 1-D log-convolution oracle.
fn erlang_zeta_tail(i: u32, b: f64, x: f64) -> f64 {
    let k = i - 1;
    let t = k as f64 * b.ln() - x.ln();
    if t <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut term = 1.0;
    for j in 0..k {
        if j > 0 {
            term *= t / j as f64;
        }
        sum += term;
    }
    1.0 - (-t).exp() * sum
}

#[test]
fn criterion_09_summability() {
    let grid = geometric_grid(1.0, 1e6, 200).unwrap();

    // Config A: every C_i is exactly 0 by support arithmetic.
    let rep_a = conditions::summability_report(
        &config_a(1.0),
        SummabilityVariant::Dz2,
        12,
        0.5,
        &grid,
        1000,
        901,
    )
    .unwrap();
    let zeros_ok = rep_a.verdict == SummabilityVerdict::Converged
        && rep_a.c_values.iter().all(|c| c.value == 0.0);

    // G = Uniform(0,2), DZ2 variant, against the Erlang oracle.
    let m2 = SarmanovModel::new(
        RegularlyVaryingLaw::pareto_type(2.0, 1.0).unwrap(),
        DiscountLaw::Uniform { b: 2.0 },
        1.0,
        KernelSpec::Fgm,
    )
    .unwrap();
    let rep_2 = conditions::summability_report(
        &m2,
        SummabilityVariant::Dz2,
        12,
        0.5,
        &grid,
        1_000_000,
        902,
    )
    .unwrap();
    let oracle_ok = rep_2.c_values.iter().all(|c| {
        let oracle = grid
            .iter()
            .map(|&x| erlang_zeta_tail(c.i, 2.0, x) * x.powi(2))
            .fold(0.0, f64::max);
        (c.value - oracle).abs() < 5.0 * c.stderr + 0.002 * oracle
    });
    let fit = rep_2.fit.clone().expect("geometric fit present");
    let decay_ok = rep_2.verdict == SummabilityVerdict::Converged && fit.r_hi < 1.0;

    let pass = zeros_ok && oracle_ok && decay_ok;
    report(
        "9 (summability)",
        pass,
        &format!(
            "config A zeros converged: {zeros_ok}; Uniform(0,2) MC matches the Erlang \
             oracle: {oracle_ok}; geometric fit r = {:.4} in [{:.4}, {:.4}], verdict {:?}",
            fit.r, fit.r_lo, fit.r_hi, rep_2.verdict
        ),
    );
    assert!(
        pass,
        "the Uniform(0,2) clause demands a geometric-DECAY fit r < 1, but the \
         exact C_i = sup_x P[ζ_i > x]/F̄(x) sequence GROWS at rate E[Y^α] = 4/3 \
         (the 1-D Erlang log-convolution oracle gives C_2..C_12 ≈ 0.59 → 4.05, \
         ratio → 4/3; E[log Y] < 0 controls P[ζ_i > x] at fixed x, not the sup). \
         The MC report matches the oracle and honestly reports divergence. \
         Recorded in the decisions ledger."
    );
}

#[test]
fn criterion_10_reproducibility() {
    // Fixed (seed = 42, workers = 4): two CLI runs must write byte-identical
    // CSV output.
    let spec_text = r#"
seed = 42
workers = 4

[model]
theta = 1.0

[model.f]
alpha = 2.0
x_m = 1.0

[model.g]
family = "uniform"
b = 1.0

[task]
kind = "product-tail"
x_grid = [10.0, 31.622776601683793, 100.0]
method = "conditional"
n_samples = 200000
"#;
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("exp.toml");
    std::fs::write(&spec_path, spec_text).unwrap();

    let run_once = |out: &str| {
        let out_dir = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_ruinsim"))
            .args([
                "run",
                spec_path.to_str().unwrap(),
                "--seed",
                "42",
                "--workers",
                "4",
                "--out-dir",
                out_dir.to_str().unwrap(),
            ])
            .status()
            .expect("ruinsim runs");
        assert!(status.success());
        std::fs::read(out_dir.join("curve.csv")).unwrap()
    };
    let a = run_once("a");
    let b = run_once("b");
    let pass = a == b;
    report(
        "10 (reproducibility)",
        pass,
        &format!("two runs, {} bytes each, byte-identical: {pass}", a.len()),
    );
    assert!(pass);
}
