use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hcd::datagen::Distribution;
use hcd::{brute_force_l0, generate, GenSpec};
use serde_json::Value;
use tempfile::TempDir;

fn hcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hcd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn prefix(dir: &TempDir, name: &str) -> String {
    format!("{}/{name}", dir.path().display())
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_values(path: impl AsRef<Path>) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap()[1].parse().unwrap())
        .collect()
}

fn write_problem(pre: &str, columns: &[Vec<f64>], signal: &[f64]) {
    let rows = columns[0].len();
    let mut dict = (0..columns.len()).map(|j| format!("c{j}")).collect::<Vec<_>>().join(",");
    for i in 0..rows {
        dict.push('\n');
        dict.push_str(&columns.iter().map(|c| format!("{:?}", c[i])).collect::<Vec<_>>().join(","));
    }
    fs::write(format!("{pre}dictionary.csv"), dict + "\n").unwrap();
    let mut sig = String::from("index,value\n");
    for (i, v) in signal.iter().enumerate() {
        sig.push_str(&format!("{i},{v:?}\n"));
    }
    fs::write(format!("{pre}signal.csv"), sig).unwrap();
}

fn small_gen(dir: &TempDir, name: &str, extra: &[&str]) -> String {
    let pre = prefix(dir, name);
    let mut args = vec!["gen", "--d", "30", "--k", "60", "--s", "3", "--seed", "5", "--out", &pre];
    args.extend_from_slice(extra);
    ok(&args);
    pre
}

#[test]
fn gen_is_deterministic_and_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let a = small_gen(&dir, "a/", &["--sigma", "0.01"]);
    let b = small_gen(&dir, "b/", &["--sigma", "0.01"]);
    for f in ["dictionary.csv", "signal.csv", "truth.csv", "manifest.json"] {
        assert_eq!(
            fs::read(format!("{a}{f}")).unwrap(),
            fs::read(format!("{b}{f}")).unwrap(),
            "{f} differs"
        );
    }

    let g = generate::<f64>(&GenSpec {
        dist: Distribution::Normal,
        d: 30,
        k: 60,
        s: 3,
        sigma: 0.01,
        seed: 5,
    })
    .unwrap();
    let signal = read_values(format!("{a}signal.csv"));
    assert!(signal.iter().zip(g.problem.signal().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    let truth = read_values(format!("{a}truth.csv"));
    assert_eq!(truth.as_slice(), g.problem.truth().unwrap().as_slice());
    let mut r = csv::Reader::from_path(format!("{a}dictionary.csv")).unwrap();
    for (i, rec) in r.records().enumerate() {
        for (j, field) in rec.unwrap().iter().enumerate() {
            let v: f64 = field.parse().unwrap();
            assert_eq!(v.to_bits(), g.problem.matrix().get(i, j).to_bits());
        }
    }

    let m = json(format!("{a}manifest.json"));
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["spec"]["s"], 3);
    assert_eq!(m["prng"], "ChaCha8Rng");
    assert_eq!(m["column_pre_norms"].as_array().unwrap().len(), 60);
}

#[test]
fn gen_rejects_invalid_spec_as_usage_error() {
    let out = hcd(&["gen", "--k", "10", "--s", "11", "--out", "/nonexistent/never/"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(hcd(&["gen", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(hcd(&["sweep", "--param", "tau", "--values", "1"]).status.code(), Some(1));
    assert_eq!(hcd(&["solve", "--eta", "1.5"]).status.code(), Some(1));
}

#[test]
fn solve_generated_instance_writes_all_outputs() {
    let dir = TempDir::new().unwrap();
    let data = small_gen(&dir, "data/", &[]);
    let out = prefix(&dir, "run/x_");
    ok(&["solve", "--input", &data, "--out", &out]);

    let m = json(format!("{out}metrics.json"));
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["method"], "hcd");
    assert_eq!(m["nnz"], 3);
    assert_eq!(m["support_recovered"], true);
    assert_eq!(m["phi_star"]["source"], "truth");
    assert!(m["recon_error"].as_f64().unwrap() < 1e-6);

    let t = json(format!("{out}trace.json"));
    assert_eq!(t["schema_version"], 1);
    let stages = t["stages"].as_array().unwrap();
    assert_eq!(stages.last().unwrap()["lambda"], 0.01);

    let rows = fs::read_to_string(format!("{out}trace.csv")).unwrap();
    assert!(rows.starts_with("stage,lambda,checkpoint,kind,objective,nnz"));
    assert_eq!(read_values(format!("{out}solution.csv")).len(), 60);
}

#[test]
fn solve_zero_signal() {
    let dir = TempDir::new().unwrap();
    let pre = prefix(&dir, "z_");
    let eye: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| f64::from(u8::from(i == j))).collect()).collect();
    write_problem(&pre, &eye, &[0.0; 4]);
    let out = prefix(&dir, "o_");
    ok(&["solve", "--input", &pre, "--out", &out]);
    assert_eq!(read_values(format!("{out}solution.csv")), vec![0.0; 4]);
    assert_eq!(json(format!("{out}metrics.json"))["nnz"], 0);
}

#[test]
fn unnormalized_dictionary_needs_flag() {
    let dir = TempDir::new().unwrap();
    let pre = prefix(&dir, "u_");
    write_problem(&pre, &[vec![3.0, 4.0], vec![0.0, 2.0]], &[3.0, 4.0]);
    let out = prefix(&dir, "o_");
    assert_eq!(hcd(&["solve", "--input", &pre, "--out", &out]).status.code(), Some(2));
    ok(&["solve", "--input", &pre, "--normalize", "--out", &out]);
    let alpha = read_values(format!("{out}solution.csv"));
    assert!((alpha[0] - 5.0).abs() < 1e-12 && alpha[1] == 0.0);
}

#[test]
fn table_i_regime_through_the_binary() {
    let dir = TempDir::new().unwrap();
    let out = prefix(&dir, "t_");
    ok(&["solve", "--seed", "1", "--out", &out]);
    let m = json(format!("{out}metrics.json"));
    assert_eq!(m["nnz"], 20);
    assert!(m["recon_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn oracle_method_reports_global_optimum() {
    let dir = TempDir::new().unwrap();
    let out = prefix(&dir, "o/");
    ok(&[
        "solve", "--d", "10", "--k", "12", "--s", "2", "--sigma", "0.05", "--seed", "3",
        "--method", "oracle,hcd", "--out", &out,
    ]);
    let g = generate::<f64>(&GenSpec {
        dist: Distribution::Normal,
        d: 10,
        k: 12,
        s: 2,
        sigma: 0.05,
        seed: 3,
    })
    .unwrap();
    let best = brute_force_l0(&g.problem, 0.01, 12).unwrap();
    let oracle = json(format!("{out}oracle_metrics.json"));
    assert_eq!(oracle["objective"].as_f64().unwrap(), best.objective);
    let hcd_metrics = json(format!("{out}hcd_metrics.json"));
    assert_eq!(hcd_metrics["phi_star"]["source"], "oracle");
    assert!(hcd_metrics["obj_gap"].as_f64().unwrap() >= -1e-10);
}

#[test]
fn oracle_budget_is_a_usage_error() {
    let out = hcd(&["solve", "--d", "20", "--k", "40", "--s", "2", "--method", "oracle", "--out", "/nonexistent/"]);
    assert_eq!(out.status.code(), Some(1));
}

fn strip_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn single_value_sweep_matches_solve() {
    let dir = TempDir::new().unwrap();
    let common = ["--d", "40", "--k", "100", "--s", "4", "--sigma", "0.01", "--seed", "9"];
    let solve_out = prefix(&dir, "solve_");
    let mut args = vec!["solve", "--out", &solve_out];
    args.extend_from_slice(&common);
    ok(&args);
    let sweep_out = prefix(&dir, "sweep/");
    let mut args = vec!["sweep", "--param", "lambda-tgt", "--values", "0.01", "--out", &sweep_out];
    args.extend_from_slice(&common);
    ok(&args);

    assert_eq!(
        strip_wall_time(json(format!("{solve_out}metrics.json"))),
        strip_wall_time(json(format!("{sweep_out}sweep0_seed9_hcd_metrics.json")))
    );
    assert_eq!(
        json(format!("{solve_out}trace.json")),
        json(format!("{sweep_out}sweep0_seed9_hcd_trace.json"))
    );
}

#[test]
fn eta_sweep_stage_counts_increase() {
    let dir = TempDir::new().unwrap();
    let out = prefix(&dir, "eta_");
    ok(&[
        "sweep", "--param", "eta", "--values", "0.2,0.5,0.8", "--d", "100", "--k", "300", "--s", "8",
        "--sigma", "0.01", "--dist", "uniform", "--out", &out,
    ]);
    let mut r = csv::Reader::from_path(format!("{out}sweep_summary.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (stages, support) = (col("stages"), col("support"));
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    let counts: Vec<usize> = rows.iter().map(|r| r[stages].parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
    assert!(rows.iter().all(|r| r[support] == rows[0][support]));
}

#[test]
fn bench_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, threads: &str| {
        let out = prefix(&dir, name);
        ok(&[
            "bench", "--d", "30", "--k", "60", "--s", "3", "--sigma", "0.01", "--trials", "6",
            "--method", "hcd,iht", "--threads", threads, "--out", &out,
        ]);
        out
    };
    let (a, b) = (run("a_", "1"), run("b_", "3"));
    let strip = |p: &str| -> Vec<Vec<String>> {
        let mut r = csv::Reader::from_path(p).unwrap();
        let wall = r.headers().unwrap().iter().position(|h| h == "wall_time_s").unwrap();
        r.records()
            .map(|rec| {
                rec.unwrap()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != wall)
                    .map(|(_, f)| f.to_string())
                    .collect()
            })
            .collect()
    };
    let rows = strip(&format!("{a}bench_trials.csv"));
    assert_eq!(rows, strip(&format!("{b}bench_trials.csv")));
    assert_eq!(rows.len(), 12);

    let summary = fs::read_to_string(format!("{a}bench_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("hcd,6,0,") && lines[2].starts_with("iht,6,0,"));
    let j = json(format!("{a}bench_summary.json"));
    assert_eq!(j["schema_version"], 1);
    assert_eq!(j["methods"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_with_oracle_reference() {
    let dir = TempDir::new().unwrap();
    let out = prefix(&dir, "o_");
    ok(&[
        "bench", "--d", "20", "--k", "16", "--s", "2", "--trials", "5", "--method", "hcd,oracle",
        "--out", &out,
    ]);
    let mut r = csv::Reader::from_path(format!("{out}bench_trials.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|x| x == name).unwrap();
    let (method, gap, source) = (col("method"), col("obj_gap"), col("phi_star_source"));
    for rec in r.records().map(Result::unwrap).filter(|r| &r[method] == "hcd") {
        assert_eq!(&rec[source], "oracle");
        assert!(rec[gap].parse::<f64>().unwrap() >= -1e-10);
    }
}

#[test]
fn bench_records_failed_trials_and_continues() {
    let dir = TempDir::new().unwrap();
    let out = prefix(&dir, "f_");
    // K = 40 exceeds the oracle budget, so every oracle trial fails
    ok(&[
        "bench", "--d", "20", "--k", "40", "--s", "2", "--trials", "2", "--method", "hcd,oracle",
        "--out", &out,
    ]);
    let text = fs::read_to_string(format!("{out}bench_trials.csv")).unwrap();
    assert_eq!(text.matches(",oracle,error,").count(), 2);
    assert_eq!(text.matches(",hcd,ok,").count(), 2);
}

#[test]
fn strict_mode_escalates_cap_warnings() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"gen": {"d": 40, "k": 80, "s": 4}, "params": {"max_outer": 2}}"#).unwrap();
    let out = prefix(&dir, "s_");
    let cfg = cfg.to_str().unwrap();
    ok(&["solve", "--config", cfg, "--out", &out]);
    assert_eq!(hcd(&["solve", "--config", cfg, "--strict", "--out", &out]).status.code(), Some(3));
    let m = json(format!("{out}metrics.json"));
    assert!(!m["cap_warnings"].as_array().unwrap().is_empty());
}

#[test]
fn config_values_yield_to_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"gen": {"d": 40, "k": 80, "s": 4}, "params": {"lambda_tgt": 0.5}, "output": "unused/"}"#,
    )
    .unwrap();
    let out = prefix(&dir, "c_");
    ok(&["solve", "--config", cfg.to_str().unwrap(), "--lambda-tgt", "0.02", "--out", &out]);
    let m = json(format!("{out}metrics.json"));
    assert_eq!(m["lambda_tgt"], 0.02);

    fs::write(&cfg, r#"{"trails": 2}"#).unwrap();
    assert_eq!(hcd(&["solve", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn pgm_patches() {
    let dir = TempDir::new().unwrap();
    let image = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/synthetic64.pgm");
    let out = prefix(&dir, "p_");
    ok(&["bench", "--pgm", image, "--trials", "3", "--atoms", "128", "--out", &out]);
    let j = json(format!("{out}bench_summary.json"));
    let hcd_row = &j["methods"][0];
    assert_eq!(hcd_row["failed"], 0);
    assert!(hcd_row["obj_gap"].is_null());
    assert_eq!(
        hcd(&["solve", "--pgm", image, "--patch", "65", "--out", &out]).status.code(),
        Some(1)
    );
}

#[test]
fn oracle_check_writes_comparison() {
    let dir = TempDir::new().unwrap();
    let out = prefix(&dir, "oc_");
    let res = ok(&[
        "oracle-check", "--d", "20", "--k", "16", "--s", "2", "--trials", "4", "--out", &out,
    ]);
    assert!(String::from_utf8_lossy(&res.stdout).contains("hcd: matches oracle in"));
    let text = fs::read_to_string(format!("{out}oracle_check.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
}
