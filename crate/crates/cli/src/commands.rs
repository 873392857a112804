use std::fmt;
use std::time::Instant;

use anyhow::{Context, Result};
use hcd::datagen::{add_gaussian_noise, random_dictionary, PRNG_NAME};
use hcd::{
    brute_force_l0, compute_metrics, extract_patches, generate, plain_iht_homotopy, solve_hcd,
    DenseVector, Dictionary, Distribution, GenSpec, GrayImage, Metrics, PhiStar, Problem,
    RunTrace, Solution, SolverParams,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{usage, ExperimentConfig, Method, SweepParam, SweepSpec};
use crate::io::{fmt_f64, output_path, read_problem, write_matrix, write_text, write_vector};

const SCHEMA_VERSION: u32 = 1;

/// A solver cap was hit while running under `--strict` (exit code 3).
#[derive(Debug)]
pub struct StrictCapWarning(pub Vec<String>);

impl fmt::Display for StrictCapWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "solver caps reached under --strict: {}", self.0.join("; "))
    }
}

impl std::error::Error for StrictCapWarning {}

fn finish(cfg: &ExperimentConfig, warnings: Vec<String>) -> Result<()> {
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if cfg.strict && !warnings.is_empty() {
        return Err(StrictCapWarning(warnings).into());
    }
    Ok(())
}

/// Where problem instances come from.
enum Workload {
    /// Fresh synthetic instance per trial, seeded `seed + t`.
    Synthetic(GenSpec),
    /// The same problem loaded from files for every trial.
    Fixed(Problem<f64>),
    /// Patch `t` of an image over one shared random dictionary.
    Patches {
        dictionary: Dictionary<f64>,
        patches: Vec<DenseVector<f64>>,
        pixel_noise: f64,
        seed: u64,
    },
}

impl Workload {
    fn build(cfg: &ExperimentConfig, trials: usize) -> Result<Self> {
        if let Some(prefix) = &cfg.input {
            return Ok(Self::Fixed(read_problem(prefix, cfg.normalize)?));
        }
        if let Some(src) = &cfg.pgm {
            let image = GrayImage::open(&src.path)?;
            let seed = cfg.gen.seed;
            let (matrix, _) =
                random_dictionary(Distribution::Normal, src.patch * src.patch, src.atoms, seed)?;
            return Ok(Self::Patches {
                dictionary: Dictionary::new(matrix),
                patches: extract_patches(&image, src.patch, trials, seed)?,
                pixel_noise: src.pixel_noise,
                seed,
            });
        }
        Ok(Self::Synthetic(cfg.gen.clone()))
    }

    fn instance(&self, t: usize) -> Result<(u64, Problem<f64>)> {
        match self {
            Self::Synthetic(spec) => {
                let spec = GenSpec {
                    seed: spec.seed.wrapping_add(t as u64),
                    ..spec.clone()
                };
                Ok((spec.seed, generate(&spec)?.problem))
            }
            Self::Fixed(p) => Ok((0, p.clone())),
            Self::Patches {
                dictionary,
                patches,
                pixel_noise,
                seed,
            } => {
                let seed = seed.wrapping_add(t as u64);
                let mut x = patches[t].clone();
                add_gaussian_noise(&mut x, *pixel_noise, seed);
                Ok((seed, Problem::new(dictionary.clone(), x, None)?))
            }
        }
    }
}

struct Run {
    method: Method,
    solution: Solution<f64>,
    metrics: Metrics,
}

fn solve_one(
    problem: &Problem<f64>,
    method: Method,
    params: &SolverParams<f64>,
    max_support: Option<usize>,
) -> Result<(Solution<f64>, f64)> {
    let start = Instant::now();
    let solution = match method {
        Method::Hcd => solve_hcd(problem, params, &vec![0.0; problem.atoms()])?,
        Method::Iht => plain_iht_homotopy(problem, params)?,
        Method::Oracle => {
            let max = max_support.unwrap_or(problem.atoms());
            let r = brute_force_l0(problem, params.lambda_tgt, max)?;
            Solution {
                alpha: r.alpha,
                objective: r.objective,
                lambda_tgt: params.lambda_tgt,
                trace: RunTrace::default(),
            }
        }
    };
    Ok((solution, start.elapsed().as_secs_f64()))
}

/// Runs every configured method on one problem. The oracle goes first so its
/// optimum can serve as the reference objective for the others; otherwise
/// the objective of the generating code is used when known.
fn run_methods(
    problem: &Problem<f64>,
    cfg: &ExperimentConfig,
    params: &SolverParams<f64>,
) -> Vec<(Method, Result<Run>)> {
    let mut order = cfg.methods.clone();
    order.sort_by_key(|m| *m != Method::Oracle);
    order.dedup();

    let mut phi_star = PhiStar::from_truth(problem, params.lambda_tgt).and_then(Result::ok);
    let mut out = Vec::new();
    for method in order {
        let run = solve_one(problem, method, params, cfg.max_support).and_then(|(solution, wall)| {
            if method == Method::Oracle {
                phi_star = Some(PhiStar::oracle(solution.objective));
            }
            let metrics = compute_metrics(problem, &solution, phi_star, wall)?;
            Ok(Run {
                method,
                solution,
                metrics,
            })
        });
        out.push((method, run));
    }
    // report in the order requested
    out.sort_by_key(|(m, _)| cfg.methods.iter().position(|x| x == m));
    out
}

fn write_run(prefix: &str, run: &Run, lambda_tgt: f64) -> Result<()> {
    let name = run.method.as_str();
    let trace = &run.solution.trace;
    write_vector(&output_path(prefix, "solution.csv")?, &run.solution.alpha)?;
    write_text(
        &output_path(prefix, "metrics.json")?,
        &run.metrics.to_json(name, lambda_tgt, &trace.cap_warnings)?,
    )?;
    write_text(&output_path(prefix, "trace.json")?, &trace.to_json(name)?)?;
    let path = output_path(prefix, "trace.csv")?;
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn summary_line(run: &Run) -> String {
    let m = &run.metrics;
    let gap = m
        .obj_gap
        .map_or_else(|| "n/a".to_string(), |g| format!("{g:.3e}"));
    format!(
        "{}: objective {:.6e}, recon_error {:.3e}, nnz {}, obj_gap {gap}, {:.3}s",
        run.method.as_str(),
        m.objective,
        m.recon_error,
        m.nnz,
        m.wall_time_s
    )
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    spec: &'a GenSpec,
    prng: &'a str,
    column_pre_norms: &'a [f64],
    files: [&'a str; 3],
}

pub fn gen(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.input.is_some() || cfg.pgm.is_some() {
        return Err(usage("gen only produces synthetic instances"));
    }
    let g = generate::<f64>(&cfg.gen)?;
    let p = &g.problem;
    let prefix = &cfg.output;
    write_matrix(&output_path(prefix, "dictionary.csv")?, p.matrix())?;
    write_vector(&output_path(prefix, "signal.csv")?, p.signal())?;
    write_vector(
        &output_path(prefix, "truth.csv")?,
        p.truth().expect("generated problems carry a truth"),
    )?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        spec: &cfg.gen,
        prng: PRNG_NAME,
        column_pre_norms: &g.column_pre_norms,
        files: ["dictionary.csv", "signal.csv", "truth.csv"],
    };
    write_text(
        &output_path(prefix, "manifest.json")?,
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "wrote {}x{} instance with {} nonzeros to {prefix}*",
        p.dim(),
        p.atoms(),
        cfg.gen.s
    );
    Ok(())
}

/// Solves one instance. With several methods, each method's files carry a
/// `<method>_` infix after the prefix.
pub fn solve(cfg: &ExperimentConfig) -> Result<()> {
    let (_, problem) = Workload::build(cfg, 1)?.instance(0)?;
    let mut warnings = Vec::new();
    for (method, run) in run_methods(&problem, cfg, &cfg.params) {
        let run = run.with_context(|| format!("method {}", method.as_str()))?;
        let prefix = if cfg.methods.len() > 1 {
            format!("{}{}_", cfg.output, method.as_str())
        } else {
            cfg.output.clone()
        };
        write_run(&prefix, &run, cfg.params.lambda_tgt)?;
        println!("{}", summary_line(&run));
        warnings.extend(
            run.solution
                .trace
                .cap_warnings
                .iter()
                .map(|w| format!("{}: {w}", method.as_str())),
        );
    }
    finish(cfg, warnings)
}

#[derive(Serialize)]
struct SweepRow {
    param: &'static str,
    value: f64,
    seed: u64,
    method: &'static str,
    objective: f64,
    obj_gap: Option<f64>,
    recon_error: f64,
    nnz: usize,
    stages: usize,
    total_middle_iters: usize,
    /// Admissions per stage, `;`-separated.
    middle_iters_per_stage: String,
    /// Final support, `;`-separated.
    support: String,
    wall_time_s: f64,
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn sweep(cfg: &ExperimentConfig, spec: &SweepSpec) -> Result<()> {
    if spec.values.is_empty() {
        return Err(usage("sweep needs at least one value"));
    }
    let workload = Workload::build(cfg, cfg.trials)?;
    let summary_path = output_path(&cfg.output, "sweep_summary.csv")?;
    let mut summary = crate::io::csv_writer(&summary_path)?;
    let mut warnings = Vec::new();
    for t in 0..cfg.trials {
        let (seed, problem) = workload.instance(t)?;
        for (i, &value) in spec.values.iter().enumerate() {
            let mut params = cfg.params.clone();
            match spec.param {
                SweepParam::LambdaTgt => params.lambda_tgt = value,
                SweepParam::Eta => params.eta = value,
            }
            params.validate().map_err(|e| usage(e.to_string()))?;
            for (method, run) in run_methods(&problem, cfg, &params) {
                let run = run.with_context(|| format!("method {}", method.as_str()))?;
                let name = method.as_str();
                let trace = &run.solution.trace;
                let stem = format!("sweep{i}_seed{seed}_{name}_");
                write_text(
                    &output_path(&cfg.output, &format!("{stem}metrics.json"))?,
                    &run.metrics.to_json(name, params.lambda_tgt, &trace.cap_warnings)?,
                )?;
                write_text(
                    &output_path(&cfg.output, &format!("{stem}trace.json"))?,
                    &trace.to_json(name)?,
                )?;
                summary.serialize(SweepRow {
                    param: spec.param.as_str(),
                    value,
                    seed,
                    method: name,
                    objective: run.metrics.objective,
                    obj_gap: run.metrics.obj_gap,
                    recon_error: run.metrics.recon_error,
                    nnz: run.metrics.nnz,
                    stages: trace.stages.len(),
                    total_middle_iters: trace.total_middle_iters,
                    middle_iters_per_stage: join(trace.stages.iter().map(|s| s.middle_iters)),
                    support: join(run.solution.support()),
                    wall_time_s: run.metrics.wall_time_s,
                })?;
                println!("{} = {}, seed {seed}: {}", spec.param.as_str(), fmt_f64(value), summary_line(&run));
                warnings.extend(trace.cap_warnings.iter().map(|w| format!("{name} seed {seed}: {w}")));
            }
        }
    }
    summary.flush()?;
    finish(cfg, warnings)
}

#[derive(Debug, Clone, Serialize)]
struct TrialRow {
    seed: u64,
    method: &'static str,
    status: &'static str,
    error: Option<String>,
    objective: Option<f64>,
    obj_gap: Option<f64>,
    phi_star_source: Option<&'static str>,
    recon_error: Option<f64>,
    nnz: Option<usize>,
    support_recovered: Option<bool>,
    stages: Option<usize>,
    total_middle_iters: Option<usize>,
    cap_warnings: usize,
    wall_time_s: Option<f64>,
}

impl TrialRow {
    fn failed(seed: u64, method: Method, err: &anyhow::Error) -> Self {
        Self {
            seed,
            method: method.as_str(),
            status: "error",
            error: Some(format!("{err:#}")),
            objective: None,
            obj_gap: None,
            phi_star_source: None,
            recon_error: None,
            nnz: None,
            support_recovered: None,
            stages: None,
            total_middle_iters: None,
            cap_warnings: 0,
            wall_time_s: None,
        }
    }

    fn ok(seed: u64, run: &Run) -> Self {
        let m = &run.metrics;
        let trace = &run.solution.trace;
        Self {
            seed,
            method: run.method.as_str(),
            status: "ok",
            error: None,
            objective: Some(m.objective),
            obj_gap: m.obj_gap,
            phi_star_source: m.phi_star.map(|p| match p.source {
                hcd::PhiStarSource::Truth => "truth",
                hcd::PhiStarSource::Oracle => "oracle",
            }),
            recon_error: Some(m.recon_error),
            nnz: Some(m.nnz),
            support_recovered: m.support_recovered,
            stages: Some(trace.stages.len()),
            total_middle_iters: Some(trace.total_middle_iters),
            cap_warnings: trace.cap_warnings.len(),
            wall_time_s: Some(m.wall_time_s),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
struct Stat {
    mean: f64,
    median: f64,
}

fn stat(values: impl IntoIterator<Item = f64>) -> Option<Stat> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    Some(Stat {
        mean: v.iter().sum::<f64>() / n as f64,
        median,
    })
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    method: &'static str,
    trials: usize,
    failed: usize,
    recon_error: Option<Stat>,
    objective: Option<Stat>,
    obj_gap: Option<Stat>,
    nnz: Option<Stat>,
    total_middle_iters: Option<Stat>,
    wall_time_s: Option<Stat>,
    /// Fraction of trials with a known truth whose support was recovered.
    support_recovery_rate: Option<f64>,
}

fn summarize(method: Method, rows: &[&TrialRow]) -> SummaryRow {
    let ok: Vec<_> = rows.iter().filter(|r| r.status == "ok").collect();
    let known: Vec<bool> = ok.iter().filter_map(|r| r.support_recovered).collect();
    SummaryRow {
        method: method.as_str(),
        trials: rows.len(),
        failed: rows.len() - ok.len(),
        recon_error: stat(ok.iter().filter_map(|r| r.recon_error)),
        objective: stat(ok.iter().filter_map(|r| r.objective)),
        obj_gap: stat(ok.iter().filter_map(|r| r.obj_gap)),
        nnz: stat(ok.iter().filter_map(|r| r.nnz.map(|n| n as f64))),
        total_middle_iters: stat(ok.iter().filter_map(|r| r.total_middle_iters.map(|n| n as f64))),
        wall_time_s: stat(ok.iter().filter_map(|r| r.wall_time_s)),
        support_recovery_rate: (!known.is_empty())
            .then(|| known.iter().filter(|b| **b).count() as f64 / known.len() as f64),
    }
}

const SUMMARY_HEADER: [&str; 17] = [
    "method",
    "trials",
    "failed",
    "mean_recon_error",
    "median_recon_error",
    "mean_objective",
    "median_objective",
    "mean_obj_gap",
    "median_obj_gap",
    "mean_nnz",
    "median_nnz",
    "mean_total_middle_iters",
    "median_total_middle_iters",
    "mean_wall_time_s",
    "median_wall_time_s",
    "support_recovery_rate",
    "schema_version",
];

fn summary_record(s: &SummaryRow) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut rec = vec![s.method.to_string(), s.trials.to_string(), s.failed.to_string()];
    for st in [s.recon_error, s.objective, s.obj_gap, s.nnz, s.total_middle_iters, s.wall_time_s] {
        rec.push(opt(st.map(|x| x.mean)));
        rec.push(opt(st.map(|x| x.median)));
    }
    rec.push(opt(s.support_recovery_rate));
    rec.push(SCHEMA_VERSION.to_string());
    rec
}

/// Runs every method over `trials` instances on a worker pool.
///
/// Failed trials are recorded and the run continues; results are sorted by
/// seed so output does not depend on scheduling.
pub fn bench(cfg: &ExperimentConfig) -> Result<()> {
    let workload = Workload::build(cfg, cfg.trials)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building worker pool")?;

    let mut per_trial: Vec<(usize, Vec<TrialRow>, Vec<String>)> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| match workload.instance(t) {
                Err(e) => {
                    let seed = cfg.gen.seed.wrapping_add(t as u64);
                    let rows = cfg.methods.iter().map(|&m| TrialRow::failed(seed, m, &e)).collect();
                    (t, rows, Vec::new())
                }
                Ok((seed, problem)) => {
                    let mut warnings = Vec::new();
                    let rows = run_methods(&problem, cfg, &cfg.params)
                        .into_iter()
                        .map(|(method, run)| match run {
                            Ok(run) => {
                                warnings.extend(run.solution.trace.cap_warnings.iter().map(|w| {
                                    format!("{} seed {seed}: {w}", method.as_str())
                                }));
                                TrialRow::ok(seed, &run)
                            }
                            Err(e) => TrialRow::failed(seed, method, &e),
                        })
                        .collect();
                    (t, rows, warnings)
                }
            })
            .collect()
    });
    per_trial.sort_by_key(|(t, _, _)| *t);

    let rows: Vec<TrialRow> = per_trial.iter().flat_map(|(_, r, _)| r.clone()).collect();
    let warnings: Vec<String> = per_trial.into_iter().flat_map(|(_, _, w)| w).collect();

    let mut w = crate::io::csv_writer(&output_path(&cfg.output, "bench_trials.csv")?)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut methods = cfg.methods.clone();
    methods.dedup();
    let summaries: Vec<SummaryRow> = methods
        .iter()
        .map(|&m| {
            let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.method == m.as_str()).collect();
            summarize(m, &mine)
        })
        .collect();
    let mut w = crate::io::csv_writer(&output_path(&cfg.output, "bench_summary.csv")?)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in &summaries {
        w.write_record(summary_record(s))?;
    }
    w.flush()?;
    write_text(
        &output_path(&cfg.output, "bench_summary.json")?,
        &serde_json::to_string_pretty(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "lambda_tgt": cfg.params.lambda_tgt,
            "eta": cfg.params.eta,
            "methods": summaries,
        }))?,
    )?;

    for s in &summaries {
        let show = |st: Option<Stat>| st.map_or("n/a".into(), |x| format!("{:.3e}/{:.3e}", x.mean, x.median));
        println!(
            "{}: {}/{} ok, recon_error {}, nnz {}, obj_gap {}, wall {} (mean/median)",
            s.method,
            s.trials - s.failed,
            s.trials,
            show(s.recon_error),
            show(s.nnz),
            show(s.obj_gap),
            show(s.wall_time_s),
        );
    }
    for r in rows.iter().filter(|r| r.status == "error") {
        eprintln!(
            "trial failed: seed {} {}: {}",
            r.seed,
            r.method,
            r.error.as_deref().unwrap_or_default()
        );
    }
    finish(cfg, warnings)
}

#[derive(Serialize)]
struct OracleRow {
    seed: u64,
    method: &'static str,
    objective: f64,
    oracle_objective: f64,
    gap: f64,
    support_match: bool,
}

/// Compares the configured methods against the exhaustive oracle on
/// `trials` instances.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<()> {
    let workload = Workload::build(cfg, cfg.trials)?;
    let mut methods: Vec<Method> = cfg.methods.iter().copied().filter(|m| *m != Method::Oracle).collect();
    methods.dedup();
    if methods.is_empty() {
        methods.push(Method::Hcd);
    }
    let mut w = crate::io::csv_writer(&output_path(&cfg.output, "oracle_check.csv")?)?;
    let mut tallies = vec![(0usize, 0usize, f64::INFINITY); methods.len()];
    let mut warnings = Vec::new();
    for t in 0..cfg.trials {
        let (seed, problem) = workload.instance(t)?;
        let (oracle, _) = solve_one(&problem, Method::Oracle, &cfg.params, cfg.max_support)?;
        for (i, &m) in methods.iter().enumerate() {
            let (sol, _) = solve_one(&problem, m, &cfg.params, cfg.max_support)?;
            let gap = sol.objective - oracle.objective;
            let support_match = sol.support() == oracle.support() && gap.abs() <= 1e-10;
            w.serialize(OracleRow {
                seed,
                method: m.as_str(),
                objective: sol.objective,
                oracle_objective: oracle.objective,
                gap,
                support_match,
            })?;
            let tally = &mut tallies[i];
            tally.0 += usize::from(support_match);
            tally.1 += usize::from(gap < -1e-10);
            tally.2 = tally.2.min(gap);
            warnings.extend(sol.trace.cap_warnings.iter().map(|x| format!("{} seed {seed}: {x}", m.as_str())));
        }
    }
    w.flush()?;
    for (m, (matched, below, min_gap)) in methods.iter().zip(&tallies) {
        println!(
            "{}: matches oracle in {matched}/{}, below oracle in {below}, min gap {min_gap:.3e}",
            m.as_str(),
            cfg.trials
        );
    }
    finish(cfg, warnings)
}
