//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::cell::RefCell;
use std::time::Instant;

use fusedlasso::datagen::{gen_image_problem, gen_problem, Scenario, ScenarioKind};
use fusedlasso::oracle::{brute_force_flsa, certify_optimality};
use fusedlasso::{
    majorizer, mm_fit_dense, mm_fit_pcg, perturbed_objective, sb_fit, soft_threshold, spg_fit, FitResult, PenaltyGraph,
    Problem, SolverConfig, SpgConfig,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stopping rule for criteria that compare solutions at the optimum rather
/// than iteration counts: the default relative-change tolerance stops MM on
/// slowly fusing coordinates well before the fixed point.
fn converged() -> SolverConfig {
    SolverConfig {
        delta: 1e-15,
        max_outer_iters: 200_000,
        pcg_tolerance: Some(1e-8),
        ..SolverConfig::default()
    }
}

const LAMBDA_GRID: [(f64, f64); 4] = [(0.1, 0.1), (0.1, 1.0), (1.0, 0.1), (1.0, 1.0)];

struct Outcome {
    pass: bool,
    detail: String,
}

thread_local! {
    /// Worst descent violation over every MM trace produced by the suite.
    static DESCENT: RefCell<(usize, f64, usize)> = const { RefCell::new((0, 0.0, 0)) };
}

fn record_descent(fit: &FitResult) {
    let worst = fit
        .objective_trace
        .windows(2)
        .map(|w| (w[1] - w[0]) / (1.0 + w[0].abs()))
        .fold(f64::NEG_INFINITY, f64::max);
    DESCENT.with(|d| {
        let mut d = d.borrow_mut();
        d.0 += 1;
        d.1 = d.1.max(worst);
        if worst > 1e-12 {
            d.2 += 1;
        }
    });
}

fn mm_dense(problem: &Problem, config: &SolverConfig) -> FitResult {
    let fit = mm_fit_dense(problem, config).expect("mm-dense");
    record_descent(&fit);
    fit
}

fn mm_pcg(problem: &Problem, config: &SolverConfig) -> FitResult {
    let fit = mm_fit_pcg(problem, config).expect("mm-pcg");
    record_descent(&fit);
    fit
}

fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let n = rng.random_range(5..=50);
    let graph = if rng.random_bool(0.5) {
        PenaltyGraph::chain(rng.random_range(2..=40)).unwrap()
    } else {
        PenaltyGraph::lattice(rng.random_range(2..=6)).unwrap()
    };
    let p = graph.p();
    let x = Array2::from_shape_simple_fn((n, p), || gaussian(rng));
    let y = Array1::from_shape_simple_fn(n, || gaussian(rng));
    Problem::new(y, x, graph, rng.random_range(0.01..2.0), rng.random_range(0.01..2.0)).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let eps = 1e-8;
    let (mut worst_above, mut worst_touch) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..20 {
        let prob = random_problem(&mut rng);
        let p = prob.p();
        for pair in 0..1000 {
            let scale = [1e-9, 1e-3, 1.0, 10.0][pair % 4];
            let beta = Array1::from_shape_simple_fn(p, || scale * gaussian(&mut rng));
            let mut anchor = Array1::from_shape_simple_fn(p, || gaussian(&mut rng));
            if pair % 5 == 0 {
                // exact zeros and ties in the anchor
                anchor[0] = 0.0;
                anchor[p - 1] = anchor[p - 2];
            }
            let f = perturbed_objective(&prob, beta.view(), eps).unwrap();
            let g = majorizer(&prob, beta.view(), anchor.view(), eps).unwrap();
            worst_above = worst_above.max((f - g) / (1.0 + f.abs()));
            let fa = perturbed_objective(&prob, anchor.view(), eps).unwrap();
            let ga = majorizer(&prob, anchor.view(), anchor.view(), eps).unwrap();
            worst_touch = worst_touch.max((ga - fa).abs() / fa.abs());
        }
    }
    Outcome {
        pass: worst_above <= 1e-12 && worst_touch <= 1e-12,
        detail: format!(
            "20 problems x 1000 pairs, max (f - g)/(1+|f|) = {worst_above:.2e}, max tangency gap = {worst_touch:.2e}"
        ),
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let config = converged();
    let (mut worst_diff, mut worst_cert, mut failures) = (0.0f64, 0.0f64, 0);
    for i in 0..200 {
        let p = 1 + i % 3;
        let l1 = [0.0, 0.3][(i / 3) % 2];
        let l2 = [0.1, 1.0][(i / 6) % 2];
        let y = Array1::from_shape_simple_fn(p, || rng.random_range(-5.0..5.0));
        let graph = PenaltyGraph::chain(p).unwrap();
        let brute = brute_force_flsa(y.view(), l1, l2, &graph).unwrap();
        let prob = Problem::identity(y, graph, l1, l2).unwrap();
        let fit = mm_dense(&prob, &config);
        let diff = max_abs_diff(&fit.beta, &brute);
        let cert = certify_optimality(&prob, fit.beta.view(), 1e-3).unwrap();
        worst_diff = worst_diff.max(diff);
        worst_cert = worst_cert.max(cert.worst_violation);
        if diff > 1e-3 || !cert.certified {
            failures += 1;
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!(
            "200 instances, {failures} failing, max |mm - brute| = {worst_diff:.2e}, max certificate violation = {worst_cert:.2e}"
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let config = converged();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let y = Array1::from_shape_simple_fn(30, || 2.0 * gaussian(&mut rng));
        let l1 = rng.random_range(0.05..1.0);
        let l2 = rng.random_range(0.05..1.0);
        let graph = PenaltyGraph::chain(30).unwrap();
        let full = Problem::identity(y.clone(), graph.clone(), l1, l2).unwrap();
        let fused = full.with_lambdas(0.0, l2).unwrap();
        let a = mm_dense(&full, &config).beta;
        let b = mm_dense(&fused, &config).beta.mapv(|v| soft_threshold(v, l1));
        worst = worst.max(max_abs_diff(&a, &b));
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("50 instances p=30, max |fit(l1,l2) - S(fit(0,l2), l1)| = {worst:.2e}"),
    }
}

fn criterion_5() -> Outcome {
    let g = gen_problem(&Scenario::new(ScenarioKind::C1, 100, 200, 505)).unwrap();
    let config = converged();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (l1, l2) in LAMBDA_GRID {
        let prob = g.problem.with_lambdas(l1, l2).unwrap();
        let objs = [
            mm_dense(&prob, &config).final_objective(),
            mm_pcg(&prob, &config).final_objective(),
            sb_fit(&prob, &config).unwrap().final_objective(),
            spg_fit(&prob, &config, &SpgConfig::default())
                .unwrap()
                .final_objective(),
        ];
        let min = objs.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = objs.iter().map(|f| (f - min) / min.abs()).fold(0.0, f64::max);
        worst = worst.max(spread);
        parts.push(format!(
            "({l1},{l2}): mm {:.6} pcg {:.6} sb {:.6} spg {:.6}",
            objs[0], objs[1], objs[2], objs[3]
        ));
    }
    Outcome {
        pass: worst <= 1e-3,
        detail: format!("max relative gap to best = {worst:.2e}; {}", parts.join("; ")),
    }
}

fn mean(v: &[usize]) -> f64 {
    v.iter().sum::<usize>() as f64 / v.len() as f64
}

fn criterion_6_and_10() -> (Outcome, Outcome) {
    let config = SolverConfig::default();
    let seeds = [601u64, 602, 603];
    let mut mm_200 = Vec::new();
    let mut mm_1000 = Vec::new();
    let mut sb_1000 = Vec::new();
    let mut spg_200 = Vec::new();
    for &seed in &seeds {
        let small = gen_problem(&Scenario::new(ScenarioKind::C1, 1000, 200, seed))
            .unwrap()
            .problem
            .with_lambdas(0.1, 0.1)
            .unwrap();
        mm_200.push(mm_dense(&small, &config).iterations);
        spg_200.push(spg_fit(&small, &config, &SpgConfig::default()).unwrap().iterations);
        let large = gen_problem(&Scenario::new(ScenarioKind::C1, 1000, 1000, seed))
            .unwrap()
            .problem
            .with_lambdas(0.1, 0.1)
            .unwrap();
        mm_1000.push(mm_dense(&large, &config).iterations);
        sb_1000.push(sb_fit(&large, &config).unwrap().iterations);
    }
    let (a, b) = (mean(&mm_200), mean(&mm_1000));
    let six = Outcome {
        pass: a <= 10.0 && b <= 60.0,
        detail: format!(
            "mean mm iterations p=200: {a:.1} (<= 10), p=1000: {b:.1} (<= 60); runs {mm_200:?} {mm_1000:?}"
        ),
    };
    let (c, d) = (mean(&sb_1000), mean(&spg_200));
    let ten = Outcome {
        pass: c <= 60.0 && d <= 150.0,
        detail: format!(
            "mean sb iterations p=1000: {c:.1} (<= 60), spg p=200: {d:.1} (<= 150); runs {sb_1000:?} {spg_200:?}"
        ),
    };
    (six, ten)
}

fn criterion_7() -> Outcome {
    let config = SolverConfig::default();
    let mut means = Vec::new();
    for kind in [ScenarioKind::C1, ScenarioKind::C2, ScenarioKind::C3] {
        let problems: Vec<Problem> = [701u64, 702, 703]
            .iter()
            .map(|&s| gen_problem(&Scenario::new(kind, 1000, 1000, s)).unwrap().problem)
            .collect();
        for (l1, l2) in LAMBDA_GRID {
            let its: Vec<usize> = problems
                .iter()
                .map(|p| mm_dense(&p.with_lambdas(l1, l2).unwrap(), &config).iterations)
                .collect();
            means.push((kind, l1, l2, mean(&its)));
        }
    }
    let max = means.iter().map(|m| m.3).fold(0.0, f64::max);
    let min = means.iter().map(|m| m.3).fold(f64::INFINITY, f64::min);
    let cells: Vec<String> = means
        .iter()
        .map(|(k, a, b, m)| format!("{k}({a},{b})={m:.1}"))
        .collect();
    Outcome {
        pass: max / min < 5.0,
        detail: format!("span {:.2} (< 5); {}", max / min, cells.join(" ")),
    }
}

fn criterion_8() -> Outcome {
    let config = SolverConfig {
        delta: 1e-10,
        max_outer_iters: 200_000,
        ..SolverConfig::default()
    };
    let mut worst_diff = 0.0f64;
    let mut worst_res = 0.0f64;
    for i in 0..10u64 {
        let (l1, l2) = LAMBDA_GRID[i as usize % 4];
        let scenario = if i < 5 {
            Scenario::new(ScenarioKind::C1, 100, 200, 800 + i)
        } else {
            Scenario::new(ScenarioKind::C4, 100, 16, 800 + i)
        };
        let prob = gen_problem(&scenario).unwrap().problem.with_lambdas(l1, l2).unwrap();
        let dense = mm_dense(&prob, &config);
        let pcg = mm_pcg(&prob, &config);
        worst_diff = worst_diff.max(max_abs_diff(&dense.beta, &pcg.beta));
        worst_res = pcg.inner_residuals.iter().cloned().fold(worst_res, f64::max);
    }
    Outcome {
        pass: worst_diff <= 1e-4 && worst_res <= config.delta,
        detail: format!(
            "10 instances, max |pcg - dense| = {worst_diff:.2e}, max inner relative residual = {worst_res:.2e}"
        ),
    }
}

fn criterion_9() -> Outcome {
    let config = converged();
    let g = gen_image_problem(64, 0.3, 909).unwrap();
    let mse = |v: &Array1<f64>| (v - &g.beta_true).mapv(|d| d * d).mean().unwrap();
    let noisy = mse(g.problem.y());
    let mut pass = true;
    let mut parts = Vec::new();
    for l2 in [0.1, 1.0] {
        let prob = g.problem.with_lambdas(0.0, l2).unwrap();
        let mm = mm_dense(&prob, &config);
        let sb = sb_fit(&prob, &config).unwrap();
        let (fm, fs) = (mm.final_objective(), sb.final_objective());
        let gap = (fm - fs).abs() / fm.min(fs);
        let cert = certify_optimality(&prob, mm.beta.view(), 1e-2).unwrap();
        let denoised = mse(&mm.beta);
        pass &= gap <= 1e-3 && cert.certified && denoised < noisy;
        parts.push(format!(
            "l2={l2}: mm {fm:.4} sb {fs:.4} gap {gap:.2e}, certificate {:.2e}, mse {denoised:.4} vs noisy {noisy:.4}",
            cert.worst_violation
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    fn run(results: &mut Vec<(u32, &str, Outcome, f64)>, id: u32, name: &'static str, f: fn() -> Outcome) {
        let t = Instant::now();
        let o = f();
        println!("criterion {id:>2} finished in {:.1}s", t.elapsed().as_secs_f64());
        results.push((id, name, o, t.elapsed().as_secs_f64()));
    }
    run(&mut results, 1, "majorization", criterion_1);
    run(&mut results, 3, "oracle equivalence", criterion_3);
    run(&mut results, 4, "soft-threshold identity", criterion_4);
    run(&mut results, 5, "cross-solver agreement", criterion_5);
    let t = Instant::now();
    let (six, ten) = criterion_6_and_10();
    let secs = t.elapsed().as_secs_f64();
    results.push((6, "iteration counts at full scale", six, secs));
    results.push((10, "baseline iteration counts", ten, 0.0));
    run(&mut results, 7, "mm stability across scenarios", criterion_7);
    run(&mut results, 8, "pcg correctness", criterion_8);
    run(&mut results, 9, "image denoising", criterion_9);
    let (traces, worst, bad) = DESCENT.with(|d| *d.borrow());
    results.push((
        2,
        "descent",
        Outcome {
            pass: bad == 0 && traces > 0,
            detail: format!("{traces} mm traces, {bad} violating, max (f_next - f)/(1+|f|) = {worst:.2e}"),
        },
        0.0,
    ));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (id, name, o, secs) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("criterion {id:>2} [{tag}] {name} ({secs:.1}s): {}", o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
