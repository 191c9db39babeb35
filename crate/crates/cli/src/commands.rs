use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use fusedlasso::datagen::{gen_problem, Scenario, ScenarioKind, DEFAULT_IMAGE_NOISE_SD};
use fusedlasso::io::{read_pgm, read_problem_dir, write_pgm, write_problem_dir, write_vector, GrayImage, ProblemMeta};
use fusedlasso::{PenaltyGraph, Problem, SolverConfig, SpgConfig, Termination};
use ndarray::Array1;
use rayon::prelude::*;

use crate::record::{write_trace, RunRecord};
use crate::{CliError, Solver};

pub const DEFAULT_LAMBDAS: [(f64, f64); 4] = [(0.1, 0.1), (0.1, 1.0), (1.0, 0.1), (1.0, 1.0)];
pub const DEFAULT_IMAGE_LAMBDAS: [(f64, f64); 2] = [(0.0, 0.1), (0.0, 1.0)];

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: ScenarioKind,
    /// Sample size (ignored for c5)
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of coefficients (c1, c2, c3)
    #[arg(long)]
    pub p: Option<usize>,
    /// Image side (c4, c5)
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise standard deviation (c5)
    #[arg(long, default_value_t = DEFAULT_IMAGE_NOISE_SD)]
    pub noise_sd: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Split Bregman augmentation constant (default ||y|| / n)
    #[arg(long)]
    pub sb_mu: Option<f64>,
    /// Smoothing accuracy of the proximal gradient baseline
    #[arg(long, default_value_t = 1e-4)]
    pub eps_spg: f64,
}

impl SolverArgs {
    pub fn config(&self) -> Result<(SolverConfig, SpgConfig), CliError> {
        let config = SolverConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            max_outer_iters: self.max_iters,
            sb_mu: self.sb_mu,
            ..SolverConfig::default()
        };
        config.validate()?;
        if !(self.eps_spg > 0.0 && self.eps_spg.is_finite()) {
            return Err(CliError::Input(format!(
                "eps-spg must be positive, got {}",
                self.eps_spg
            )));
        }
        Ok((config, SpgConfig { eps_spg: self.eps_spg }))
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Problem directory written by `gen`
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub solver: Solver,
    #[arg(long)]
    pub lambda1: f64,
    #[arg(long)]
    pub lambda2: f64,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// Record path; beta.csv and trace.csv are written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub suite: ScenarioKind,
    /// p for c1 to c3, q for c4 and c5
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Pairs `lambda1:lambda2`, comma separated
    #[arg(long, value_delimiter = ',', value_parser = parse_lambda_pair)]
    pub lambdas: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solvers: Vec<Solver>,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub lambda2: f64,
    #[arg(long, value_enum, default_value_t = Solver::MmDense)]
    pub solver: Solver,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    s.parse().map_err(|e: fusedlasso::FlrError| e.to_string())
}

fn parse_lambda_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lambda1:lambda2, got {s:?}"))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| *v >= 0.0 && v.is_finite())
            .ok_or_else(|| format!("bad penalty {t:?}"))
    };
    Ok((num(a)?, num(b)?))
}

fn scenario_from(
    kind: ScenarioKind,
    n: usize,
    p: Option<usize>,
    q: Option<usize>,
    seed: u64,
) -> Result<Scenario, CliError> {
    let size = if kind.is_image() {
        q.ok_or_else(|| CliError::Input(format!("{kind} needs --q")))?
    } else {
        p.ok_or_else(|| CliError::Input(format!("{kind} needs --p")))?
    };
    let n = if kind == ScenarioKind::C5 { size * size } else { n };
    Ok(Scenario::new(kind, n, size, seed))
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let scenario = Scenario {
        noise_sd: args.noise_sd,
        ..scenario_from(args.scenario, args.n, args.p, args.q, args.seed)?
    };
    let g = gen_problem(&scenario)?;
    let meta = ProblemMeta::for_scenario(&g.problem, &scenario);
    write_problem_dir(&args.out, &g.problem, &meta)?;
    Ok(())
}

fn sibling(out: &Path, name: &str) -> PathBuf {
    out.parent().map_or_else(|| PathBuf::from(name), |d| d.join(name))
}

/// Runs one fit and writes the record, `beta.csv` and `trace.csv`. A run
/// that stops at the iteration cap is still written, then reported as an
/// error.
pub fn cmd_fit(args: &FitArgs) -> Result<RunRecord, CliError> {
    let (config, spg) = args.solver_args.config()?;
    let (base, _) = read_problem_dir(&args.input)?;
    let problem = base.with_lambdas(args.lambda1, args.lambda2)?;
    if args.solver == Solver::MmPcg && !fusedlasso::pcg::supports_graph(&problem) {
        return Err(CliError::Input(format!(
            "mm-pcg needs a chain or lattice graph (bandwidth w with w^2 <= p); got bandwidth {} for p = {}; use mm-dense instead",
            problem.graph().bandwidth(),
            problem.p()
        )));
    }
    let fit = args.solver.run(&problem, &config, &spg)?;

    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let trace_path = sibling(&args.out, "trace.csv");
    write_trace(fs::File::create(&trace_path)?, &fit.objective_trace)?;
    write_vector(fs::File::create(sibling(&args.out, "beta.csv"))?, &fit.beta)?;
    let record = RunRecord::from_fit(
        args.solver,
        args.input.display().to_string(),
        args.lambda1,
        args.lambda2,
        &config,
        &spg,
        &fit,
        Some(trace_path.display().to_string()),
    );
    fs::write(&args.out, record.to_json()?)?;
    if fit.termination == Termination::MaxIters {
        return Err(CliError::NotConverged(format!(
            "{} stopped at the cap of {} iterations",
            args.solver, config.max_outer_iters
        )));
    }
    Ok(record)
}

/// One row of the benchmark table; `rep` is `None` for mean rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub solver: Solver,
    pub size: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rep: Option<usize>,
    pub iterations: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub objective: Option<f64>,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

pub const BENCH_HEADER: &str =
    "suite,solver,size,lambda1,lambda2,rep,iterations,wall_time_s,objective,termination,error";

impl BenchRow {
    pub fn to_csv(&self, suite: ScenarioKind) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{suite},{},{},{},{},{},{},{},{},{},{}",
            self.solver,
            self.size,
            self.lambda1,
            self.lambda2,
            self.rep.map_or_else(|| "mean".to_string(), |r| r.to_string()),
            opt(self.iterations),
            opt(self.wall_time_s),
            opt(self.objective),
            match self.termination {
                Some(Termination::Converged) => "converged",
                Some(Termination::MaxIters) => "max_iters",
                None => "",
            },
            self.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        )
    }
}

/// Runs every (solver, size, penalty pair, rep) cell, in parallel, and
/// returns per-run rows followed by mean rows, both in sorted order.
pub fn run_bench(args: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let (config, spg) = args.solver_args.config()?;
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    let lambdas: Vec<(f64, f64)> = match (args.lambdas.is_empty(), args.suite) {
        (false, _) => args.lambdas.clone(),
        (true, ScenarioKind::C5) => DEFAULT_IMAGE_LAMBDAS.to_vec(),
        (true, _) => DEFAULT_LAMBDAS.to_vec(),
    };
    let solvers = if args.solvers.is_empty() {
        Solver::ALL.to_vec()
    } else {
        args.solvers.clone()
    };

    let mut instances = Vec::new();
    for &size in &args.sizes {
        for rep in 0..args.reps {
            let (p, q) = if args.suite.is_image() {
                (None, Some(size))
            } else {
                (Some(size), None)
            };
            let scenario = scenario_from(args.suite, args.n, p, q, args.seed + rep as u64)?;
            scenario.validate()?;
            instances.push((size, rep, scenario));
        }
    }
    let problems: Vec<(usize, usize, Result<Problem, String>)> = instances
        .par_iter()
        .map(|(size, rep, s)| {
            (
                *size,
                *rep,
                gen_problem(s).map(|g| g.problem).map_err(|e| e.to_string()),
            )
        })
        .collect();

    let mut cells = Vec::new();
    for (size, rep, prob) in &problems {
        for &solver in &solvers {
            for &(l1, l2) in &lambdas {
                cells.push((solver, *size, l1, l2, *rep, prob));
            }
        }
    }
    let mut rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|&(solver, size, l1, l2, rep, prob)| {
            let mut row = BenchRow {
                solver,
                size,
                lambda1: l1,
                lambda2: l2,
                rep: Some(rep),
                iterations: None,
                wall_time_s: None,
                objective: None,
                termination: None,
                error: None,
            };
            let result = prob
                .as_ref()
                .map_err(|e| e.clone())
                .and_then(|p| p.with_lambdas(l1, l2).map_err(|e| e.to_string()))
                .and_then(|p| solver.run(&p, &config, &spg).map_err(|e| e.to_string()));
            match result {
                Ok(fit) => {
                    row.iterations = Some(fit.iterations as f64);
                    row.wall_time_s = Some(fit.wall_time);
                    row.objective = Some(fit.final_objective());
                    row.termination = Some(fit.termination);
                }
                Err(e) => row.error = Some(e),
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.solver, a.size, a.lambda1, a.lambda2, a.rep)
            .partial_cmp(&(b.solver, b.size, b.lambda1, b.lambda2, b.rep))
            .expect("finite penalties")
    });

    let mut groups: BTreeMap<_, Vec<&BenchRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in &rows {
        let k = (r.solver, r.size, r.lambda1.to_bits(), r.lambda2.to_bits());
        if !groups.contains_key(&k) {
            order.push(k);
        }
        groups.entry(k).or_default().push(r);
    }
    let mut means = Vec::new();
    for k in order {
        let runs = &groups[&k];
        let ok: Vec<&&BenchRow> = runs.iter().filter(|r| r.error.is_none()).collect();
        let avg = |f: fn(&BenchRow) -> Option<f64>| {
            (!ok.is_empty()).then(|| ok.iter().filter_map(|r| f(r)).sum::<f64>() / ok.len() as f64)
        };
        let failed = runs.len() - ok.len();
        means.push(BenchRow {
            solver: k.0,
            size: k.1,
            lambda1: f64::from_bits(k.2),
            lambda2: f64::from_bits(k.3),
            rep: None,
            iterations: avg(|r| r.iterations),
            wall_time_s: avg(|r| r.wall_time_s),
            objective: avg(|r| r.objective),
            termination: None,
            error: (failed > 0).then(|| format!("{failed} of {} runs failed", runs.len())),
        });
    }
    rows.extend(means);
    Ok(rows)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let rows = run_bench(args)?;
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in &rows {
        out.push_str(&r.to_csv(args.suite));
        out.push('\n');
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(&args.out)?.write_all(out.as_bytes())?;
    Ok(rows)
}

/// Denoises a square P5 image: standardize, solve on the lattice with
/// `lambda1 = 0`, undo the standardization, clamp to `[0, 255]`.
pub fn cmd_denoise(args: &DenoiseArgs) -> Result<RunRecord, CliError> {
    let (config, spg) = args.solver_args.config()?;
    let img =
        read_pgm(fs::File::open(&args.input).map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?)?;
    if img.width != img.height || img.width == 0 {
        return Err(CliError::Input(format!(
            "image must be square, got {}x{}",
            img.width, img.height
        )));
    }
    let q = img.width;
    let v = Array1::from_iter(img.pixels.iter().map(|&b| b as f64));
    let mean = v.sum() / v.len() as f64;
    let sd = (v.mapv(|x| (x - mean) * (x - mean)).sum() / v.len() as f64).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let y = v.mapv(|x| (x - mean) / scale);
    let problem = Problem::identity(y, PenaltyGraph::lattice(q)?, 0.0, args.lambda2)?;
    let fit = args.solver.run(&problem, &config, &spg)?;
    let pixels = fit
        .beta
        .iter()
        .map(|b| (b * scale + mean).round().clamp(0.0, 255.0) as u8)
        .collect();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_pgm(
        fs::File::create(&args.out)?,
        &GrayImage {
            width: q,
            height: q,
            pixels,
        },
    )?;
    let record = RunRecord::from_fit(
        args.solver,
        args.input.display().to_string(),
        0.0,
        args.lambda2,
        &config,
        &spg,
        &fit,
        None,
    );
    if fit.termination == Termination::MaxIters {
        return Err(CliError::NotConverged(format!(
            "{} stopped at the cap of {} iterations",
            args.solver, config.max_outer_iters
        )));
    }
    Ok(record)
}
