//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use rand::Rng;
use sa_lab::bounds::rates::{self, rat, Exact, ExampleParams};
use sa_lab::bounds::{select_dimension, ConditionVariant, ProblemInstance, Strategy};
use sa_lab::cli::run;
use sa_lab::laws::IncrementKind;
use sa_lab::lowerbound::{build_lattice_instance, certificate_check, eta_moments, simulate_u};
use sa_lab::mc::{self, Functional};
use sa_lab::simulate::{empirical_check_montgomery_smith, montgomery_smith_exact, rosenthal_exact, IncrementModel};
use sa_lab::stream::substream;
use sa_lab::Spectrum;
use std::time::Instant;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn exact_exponents() -> Outcome {
    let start = Instant::now();
    let (g, psi) = (rat(4, 1), rat(11, 1));
    let poly = ExampleParams::Polynomial { b: rat(3, 1) };
    let r3 = rates::asymptotic_rate(3, &poly, &g, &psi).map_err(|e| e.to_string())?;
    let r4 = rates::asymptotic_rate(4, &poly, &g, &psi).map_err(|e| e.to_string())?;
    let r5 = rates::asymptotic_rate(5, &ExampleParams::Logarithmic { tau: rat(1, 1) }, &g, &psi).map_err(|e| e.to_string())?;
    let r1 = rates::asymptotic_rate(1, &ExampleParams::Exponential { alpha: rat(1, 1), beta: rat(1, 1) }, &g, &psi)
        .map_err(|e| e.to_string())?;
    let got = [
        r3.aux("r").cloned(),
        r3.aux("delta").cloned(),
        r4.aux("rho").cloned(),
        r4.aux("mu").cloned(),
        r5.aux("epsilon").cloned(),
        Some(r1.governing_order().n_power.0.clone()),
    ];
    let want = [rat(2, 27), rat(2, 5), rat(2, 25), rat(2, 3), rat(1, 52), rat(3, 2)];
    let shown: Vec<String> = got.iter().map(|x| x.clone().map_or("-".into(), |v| Exact(v).to_string())).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = got.iter().zip(&want).all(|(a, b)| a.as_ref() == Some(b)) && elapsed < 1.0;
    ensure(ok, format!("r, δ, ρ, μ, ε, ex1 = {} in {elapsed:.3}s", shown.join(", ")))
}

fn lattice_pipeline() -> Outcome {
    let start = Instant::now();
    let s = Spectrum::polynomial(2.0).unwrap();
    let (inst, u) = single_threaded(|| {
        let inst = build_lattice_instance(&s, 1.0, 10_000, 10_000)?;
        let u = simulate_u(&inst, 10_000, 42)?;
        Ok::<_, sa_lab::Error>((inst, u))
    })
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    // nσ_m² = 10⁴/m² ≥ 1 exactly for m ≤ 100
    let k_oracle = (1..=10_000u64).filter(|m| 10_000 >= m * m).count();
    let mean_gap = (u.mean_u - inst.a).abs();
    let mean_ok = mean_gap <= u.truncation_bracket + 4.0 * u.stderr_u;
    let prob_ok = u.empirical_prob >= inst.feller_floor - 4.0 * u.empirical_prob_stderr;
    ensure(
        inst.k == 100 && k_oracle == 100 && mean_ok && prob_ok && elapsed < 120.0,
        format!(
            "k = {}, |ÊU − a| = {mean_gap:.4} vs {:.4}, P̂ = {:.4} vs floor {:.4} − 4·{:.4}, {elapsed:.1}s single-threaded",
            inst.k,
            u.truncation_bracket + 4.0 * u.stderr_u,
            u.empirical_prob,
            inst.feller_floor,
            u.empirical_prob_stderr
        ),
    )
}

fn pathwise_certificate() -> Outcome {
    let s = Spectrum::polynomial(2.0).unwrap();
    let inst = build_lattice_instance(&s, 1.0, 1_000, 200).map_err(|e| e.to_string())?;
    let c = certificate_check(&inst, 1_000, 7).map_err(|e| e.to_string())?;
    ensure(
        c.violations == 0 && c.paths == 1_000,
        format!("{} violations over {} paths, min slack {:.4}", c.violations, c.paths, c.min_slack),
    )
}

fn gaussian_scaling() -> Outcome {
    let model = IncrementModel::new(IncrementKind::GaussianExact, Spectrum::exponential(1.0, 1.0).unwrap(), 14)
        .map_err(|e| e.to_string())?;
    let grid: Vec<usize> = (7..=13).map(|p| 1usize << p).collect();
    let mut details = Vec::new();
    let mut ok = true;
    for gamma in [2.0, 4.0] {
        let sw = mc::sweep(&model, Functional::GaussianMax, &grid, gamma, 2_000, 11).map_err(|e| e.to_string())?;
        let fit = sw.fit.ok_or("no fit")?;
        let hit = (fit.slope - gamma / 2.0).abs() <= 0.1;
        ok &= hit;
        details.push(format!("γ = {gamma}: slope {:.4} (r² {:.4})", fit.slope, fit.r_squared));
    }
    ensure(ok, details.join("; "))
}

fn maximal_inequality() -> Outcome {
    let s = Spectrum::polynomial(2.0).unwrap();
    let mult: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let mut worst = f64::NEG_INFINITY;
    for n in [8usize, 64] {
        let model = IncrementModel::new(IncrementKind::TwoPointSymmetric, s.clone(), 10).map_err(|e| e.to_string())?;
        let scale = (n as f64 * model.variance()).sqrt();
        let xs: Vec<f64> = mult.iter().map(|m| m * scale).collect();
        let margins = empirical_check_montgomery_smith(&model, n, &xs, 10_000, 5).map_err(|e| e.to_string())?;
        for m in margins {
            worst = worst.max(m.margin - 4.0 * m.stderr);
        }
    }
    let model = IncrementModel::new(IncrementKind::TwoPointSymmetric, s, 1).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = mult.iter().map(|m| m * 2f64.sqrt()).collect();
    let exact_worst = montgomery_smith_exact(&model, 2, &xs)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|m| m.margin)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(
        worst <= 0.0 && exact_worst <= 0.0,
        format!("max(margin − 4·SE) = {worst:.4}, exact n = 2 max margin = {exact_worst}"),
    )
}

fn rosenthal_enumeration() -> Outcome {
    let s = Spectrum::polynomial(2.0).unwrap();
    let model = IncrementModel::new(IncrementKind::TwoPointSymmetric, s.clone(), 2).map_err(|e| e.to_string())?;
    let sig = [s.sigma_sq(1).sqrt(), s.sigma_sq(2).sqrt()];
    let mut oracle = 0.0;
    for mask in 0u32..64 {
        let mut sum = [0.0f64; 2];
        for j in 0..3 {
            for m in 0..2 {
                let bit = (mask >> (2 * j + m)) & 1;
                sum[m] += if bit == 1 { sig[m] } else { -sig[m] };
            }
        }
        let norm_sq = sum[0] * sum[0] + sum[1] * sum[1];
        oracle += norm_sq * norm_sq / 64.0;
    }
    let c = rosenthal_exact(&model, 3, 4.0).map_err(|e| e.to_string())?;
    let diff = (c.sum_moment - oracle).abs();
    ensure(
        diff <= 1e-12 && c.ratio <= 3.0,
        format!("E‖S₃‖⁴ = {} vs oracle {oracle} (|Δ| = {diff:e}), ratio {:.4}", c.sum_moment, c.ratio),
    )
}

fn scale_invariance() -> Outcome {
    let mut rng = substream(2024, 0);
    let mut mismatches = 0;
    let mut positive = 0;
    for _ in 0..100 {
        let len = rng.random_range(1..60);
        let mut v: Vec<f64> = (0..len).map(|_| 10f64.powf(rng.random_range(-4.0..0.0))).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let gamma = rng.random_range(2.0..8.0);
        let n = 10u64.pow(rng.random_range(2..9));
        let moment = 10f64.powf(rng.random_range(-2.0..2.0));
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let pick = |v: Vec<f64>, moment: f64| {
            let inst = ProblemInstance::new(n, gamma, Spectrum::explicit(v)?, moment)?;
            select_dimension(&inst, Strategy::MaxFeasible(ConditionVariant::Thm9))
        };
        let a = pick(v.clone(), moment).map_err(|e| e.to_string())?;
        let b = pick(v.iter().map(|s| c * c * s).collect(), c.powf(gamma) * moment).map_err(|e| e.to_string())?;
        if a.d > 0 {
            positive += 1;
        }
        if a.d != b.d || a.rule != b.rule {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, format!("{mismatches} mismatches in 100 cases ({positive} with d ≥ 1)"))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, Vec<&str>); 4] = [
        ("sweep.csv", vec!["sweep", "--spectrum", "exp:1,1", "--model", "gaussian", "--dim", "8", "--n-grid", "16,32,64,128", "--reps", "300", "--seed", "3", "--format", "csv"]),
        ("sweep.json", vec!["sweep", "--spectrum", "poly:2", "--model", "lattice:1", "--dim", "10", "--n-grid", "16,32,64", "--reps", "200", "--functional", "delta", "--seed", "3"]),
        ("lb.json", vec!["lower-bound", "--spectrum", "poly:2", "--lambda", "1", "--n", "1000", "--reps", "2000", "--paths", "50", "--dim", "200", "--seed", "3"]),
        ("lb.csv", vec!["lower-bound", "--spectrum", "poly:2", "--lambda", "1", "--n", "1000", "--reps", "2000", "--seed", "3", "--format", "csv"]),
    ];
    let mut details = Vec::new();
    for (file, args) in runs {
        let mut bytes = Vec::new();
        for (round, threads) in [(0, "1"), (1, "4")] {
            let path = dir.path().join(format!("{round}-{file}"));
            let mut argv = vec!["sa-lab"];
            argv.extend(&args);
            argv.extend(["--threads", threads, "--output", path.to_str().unwrap()]);
            let code = run(argv, &mut std::io::sink());
            if code != 0 {
                return Err(format!("{file}: exit {code}"));
            }
            bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        if bytes[0] != bytes[1] {
            return Err(format!("{file}: outputs differ"));
        }
        details.push(format!("{file} {}B", bytes[0].len()));
    }
    Ok(format!("identical: {}", details.join(", ")))
}

/// `∫_0^{λ/2} 2 x^p φ_s(x) dx` by composite Simpson.
fn simpson_moment(s: f64, lambda: f64, p: i32) -> f64 {
    let b = lambda / 2.0;
    let steps = 20_000;
    let h = b / steps as f64;
    let norm = 2.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
    let f = |x: f64| norm * x.powi(p) * (-0.5 * (x / s) * (x / s)).exp();
    let mut acc = f(0.0) + f(b);
    for i in 1..steps {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn truncated_moments() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in [0.1, 0.5, 1.0, 2.0, 5.0] {
        for lambda in [0.05, 0.5, 2.0, 8.0] {
            let (m2, m4) = eta_moments(s * s, lambda).map_err(|e| e.to_string())?;
            let (q2, q4) = (simpson_moment(s, lambda, 2), simpson_moment(s, lambda, 4));
            worst = worst.max(((m2 - q2) / q2).abs()).max(((m4 - q4) / q4).abs());
        }
    }
    let (c2, c4) = eta_moments(1.0, 2.0).map_err(|e| e.to_string())?;
    let pinned = (c2 - 0.1987480).abs() < 5e-8 && (c4 - 0.1123027).abs() < 5e-8;
    ensure(
        worst <= 1e-8 && pinned,
        format!("max relative error {worst:.2e} over 20 points, c = 1: ({c2:.7}, {c4:.7})"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("exact rate exponents", exact_exponents),
        ("lattice lower-bound pipeline", lattice_pipeline),
        ("pathwise certificate", pathwise_certificate),
        ("gaussian maximum scaling", gaussian_scaling),
        ("maximal inequality margins", maximal_inequality),
        ("moment inequality enumeration", rosenthal_enumeration),
        ("dimension selection scale invariance", scale_invariance),
        ("cli determinism", cli_determinism),
        ("truncated gaussian moments", truncated_moments),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
