//! `magkit` — command-line front door for the magnitude / weighting toolkit.
//!
//! Subcommands: `weight`, `magnitude-fn`, `approx-bench`, `outlier`,
//! `fetch-odds`, `active-learn`, `graph-weight`.
//! Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.
#![allow(clippy::needless_range_loop)]

mod errors;
mod fetch;
mod io;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use errors::{CliError, CliResult};
use io::{atomic_write, fmt_float, read_edge_list, read_points, ColumnRef};
use magkit_core::active::{run_al, RunConfig, Strategy};
use magkit_core::approx::{scatter_report, weight_approx_kde, weight_approx_rect};
use magkit_core::graph::{graph_weighting, GraphMetric, GraphWeighting};
use magkit_core::outlier::{self, evaluate, default_t_grid, split_dataset, t_search};
use magkit_core::space::{pairwise_distances, Metric, PointCloud, ScaleParameter};
use magkit_core::weighting::{log_grid, magnitude_function, similarity_matrix, weighting_vector};

#[derive(Parser)]
#[command(name = "magkit", version, about = "Metric-space magnitude and weighting-vector toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L1,
    L2,
    Linf,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::L1 => Metric::L1,
            MetricArg::L2 => Metric::L2,
            MetricArg::Linf => Metric::Linf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphMetricArg {
    ShortestPath,
    Resistance,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Weighting,
    Uncertainty,
}

#[derive(Subcommand)]
enum Command {
    /// Exact weighting vector of a point cloud.
    Weight {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "l2")]
        metric: MetricArg,
        #[arg(long)]
        t: f64,
        /// Column (index or header name) holding labels, excluded from geometry.
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Magnitude function over a logarithmic scale grid.
    #[command(name = "magnitude-fn")]
    MagnitudeFn {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "l2")]
        metric: MetricArg,
        #[arg(long, default_value_t = 1e-3)]
        t_min: f64,
        #[arg(long, default_value_t = 1e2)]
        t_max: f64,
        #[arg(long, default_value_t = 50)]
        per_decade: usize,
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact-vs-approximate weighting benchmark (timings and errors).
    #[command(name = "approx-bench")]
    ApproxBench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        t: f64,
        /// Box half-width for the rectangle-count estimator.
        #[arg(long)]
        h: f64,
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighting-score outlier detector with scale search.
    Outlier {
        /// Inlier pool; with --labels-col and no --eval, rows labeled 1 are
        /// treated as the labeled outliers of the benchmark protocol.
        #[arg(long)]
        inliers: PathBuf,
        /// Separate labeled evaluation file (split into validation/test).
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long)]
        labels_col: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// `paper` or a comma-separated list of scales.
        #[arg(long, default_value = "paper")]
        t_grid: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Download a named benchmark dataset (network use is opt-in).
    #[command(name = "fetch-odds")]
    FetchOdds {
        #[arg(long)]
        name: String,
        #[arg(long)]
        dir: PathBuf,
        /// Without this flag the command only reports what it would do.
        #[arg(long)]
        allow_network: bool,
        /// Explicit checksum pin for the raw download.
        #[arg(long)]
        sha256: Option<String>,
    },
    /// Active-learning experiment over seeded runs.
    #[command(name = "active-learn")]
    ActiveLearn {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        labels_col: String,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        budget: usize,
        /// Number of seeded runs (seeds 0..n).
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-8)]
        ridge: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighting vector of a graph metric space.
    #[command(name = "graph-weight")]
    GraphWeight {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long, value_enum, default_value = "resistance")]
        metric: GraphMetricArg,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("MAGKIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn scale_of(t: f64) -> CliResult<ScaleParameter<f64>> {
    ScaleParameter::new(t).map_err(CliError::from)
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Weight { input, metric, t, label_col, out } => {
            let col = label_col.as_deref().map(ColumnRef::parse);
            let loaded = read_points(&input, col.as_ref())?;
            let zeta = similarity_matrix(
                &pairwise_distances(&loaded.cloud, metric.into()),
                scale_of(t)?,
            );
            let w = weighting_vector(&zeta)?;
            let mut csv = String::from("index,weight\n");
            for (i, v) in w.weights().iter().enumerate() {
                csv.push_str(&format!("{i},{}\n", fmt_float(*v)));
            }
            atomic_write(&out, csv.as_bytes())?;
            println!(
                "n = {}, magnitude = {}, residual = {:.3e}",
                w.len(),
                fmt_float(w.magnitude()),
                w.residual()
            );
            Ok(())
        }

        Command::MagnitudeFn { input, metric, t_min, t_max, per_decade, label_col, out } => {
            let col = label_col.as_deref().map(ColumnRef::parse);
            let loaded = read_points(&input, col.as_ref())?;
            let grid = log_grid(t_min, t_max, per_decade)?;
            let dist = pairwise_distances(&loaded.cloud, metric.into());
            let series = magnitude_function(&dist, &grid)?;
            let mut csv = String::from("t,magnitude\n");
            for (t, m) in series.ts().iter().zip(series.mags()) {
                match m {
                    Some(v) => csv.push_str(&format!("{},{}\n", fmt_float(*t), fmt_float(*v))),
                    None => csv.push_str(&format!("{},nan\n", fmt_float(*t))),
                }
            }
            atomic_write(&out, csv.as_bytes())?;
            println!(
                "{} grid points, {} solved, {} gaps",
                series.len(),
                series.len() - series.gap_count(),
                series.gap_count()
            );
            Ok(())
        }

        Command::ApproxBench { input, t, h, label_col, out } => {
            let col = label_col.as_deref().map(ColumnRef::parse);
            let loaded = read_points(&input, col.as_ref())?;
            let report = approx_bench(&loaded.cloud, t, h)?;
            atomic_write(&out, serde_json::to_string_pretty(&report).unwrap().as_bytes())?;
            println!(
                "exact {:.3}s, kde {:.3}s, rect {:.3}s ({:.0}x)",
                report.exact_seconds, report.kde_seconds, report.rect_seconds, report.rect_speedup
            );
            Ok(())
        }

        Command::Outlier { inliers, eval, labels_col, k, t_grid, seed, out } => {
            let report = outlier_pipeline(&inliers, eval.as_deref(), &labels_col, k, &t_grid, seed)?;
            atomic_write(&out, serde_json::to_string_pretty(&report).unwrap().as_bytes())?;
            println!(
                "best t = {}, test auc = {:.4}, prec@{k} = {:.3}",
                report.best_t, report.test.auc, report.test.precision_at_k
            );
            Ok(())
        }

        Command::FetchOdds { name, dir, allow_network, sha256 } => {
            let spec = fetch::dataset(&name)?;
            if !allow_network {
                println!(
                    "offline: not fetching {name}; re-run with --allow-network to download {} into {}",
                    spec.url,
                    dir.display()
                );
                return Ok(());
            }
            let fetched =
                fetch::fetch_dataset(spec, &dir, sha256.as_deref(), &fetch::https_download)?;
            println!(
                "{}: {} (sha256 {}{})",
                name,
                fetched.csv_path.display(),
                fetched.sha256,
                if fetched.downloaded { ", downloaded" } else { ", cached" }
            );
            Ok(())
        }

        Command::ActiveLearn {
            pool,
            labels_col,
            strategy,
            budget,
            seeds,
            t,
            gamma,
            ridge,
            out,
        } => {
            let col = ColumnRef::parse(&labels_col);
            let loaded = read_points(&pool, Some(&col))?;
            let raw_labels = loaded
                .labels
                .ok_or_else(|| CliError::usage("error: --labels-col is required".to_string()))?;
            let labels = to_signed_labels(&raw_labels)?;
            let strategy = match strategy {
                StrategyArg::Weighting => Strategy::Weighting,
                StrategyArg::Uncertainty => Strategy::Uncertainty,
            };
            let csv = active_learn_curves(
                &loaded.cloud,
                &labels,
                strategy,
                budget,
                seeds,
                t,
                gamma,
                ridge,
            )?;
            atomic_write(&out, csv.as_bytes())?;
            println!("{seeds} runs written");
            Ok(())
        }

        Command::GraphWeight { edges, metric, t, out } => {
            let graph = read_edge_list(&edges)?;
            let metric = match metric {
                GraphMetricArg::ShortestPath => GraphMetric::ShortestPath,
                GraphMetricArg::Resistance => GraphMetric::Resistance,
            };
            match graph_weighting::<f64>(&graph, metric, scale_of(t)?)? {
                GraphWeighting::Solved(w) => {
                    let mut csv = String::from("node,weight\n");
                    for (i, v) in w.weights().iter().enumerate() {
                        csv.push_str(&format!("{i},{}\n", fmt_float(*v)));
                    }
                    atomic_write(&out, csv.as_bytes())?;
                    println!(
                        "n = {}, magnitude = {}, residual = {:.3e}",
                        w.len(),
                        fmt_float(w.magnitude()),
                        w.residual()
                    );
                    Ok(())
                }
                GraphWeighting::Singular(rep) => {
                    let suggestion = rep
                        .suggested_t
                        .map(|s| format!("; the space is scattered for t > {s:.4}"))
                        .unwrap_or_default();
                    Err(CliError::numeric(format!(
                        "error: similarity matrix singular at t = {t} (pivot {:.3e}){suggestion}",
                        rep.pivot
                    )))
                }
            }
        }
    }
}

#[derive(Serialize)]
struct ApproxErrors {
    l2: f64,
    linf: f64,
}

#[derive(Serialize)]
struct ApproxBenchReport {
    schema: u32,
    n: usize,
    d: usize,
    t: f64,
    h: f64,
    is_scattered: bool,
    /// Error bound of the kernel-density approximation; null when the space
    /// is not scattered at this scale (bound not applicable).
    kde_bound: Option<f64>,
    exact_seconds: f64,
    kde_seconds: f64,
    rect_seconds: f64,
    rect_speedup: f64,
    magnitude: f64,
    kde_error: ApproxErrors,
    rect_normalized_error: ApproxErrors,
    rect_unnormalized_error: ApproxErrors,
}

fn error_pair(exact: &[f64], approx: &[f64]) -> ApproxErrors {
    let l2 = exact
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let linf = exact
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ApproxErrors { l2, linf }
}

fn approx_bench(cloud: &PointCloud<f64>, t: f64, h: f64) -> CliResult<ApproxBenchReport> {
    let tv = scale_of(t)?;
    let t0 = Instant::now();
    let dist = pairwise_distances(cloud, Metric::L2);
    let zeta = similarity_matrix(&dist, tv);
    let w = weighting_vector(&zeta)?;
    let exact_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let kde = weight_approx_kde(&zeta);
    let kde_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let rect_norm = weight_approx_rect(cloud, h, true)?;
    let rect_seconds = t2.elapsed().as_secs_f64();
    let rect_unnorm = weight_approx_rect(cloud, h, false)?;

    let rep = scatter_report(&dist, tv);
    Ok(ApproxBenchReport {
        schema: 1,
        n: cloud.len(),
        d: cloud.dim(),
        t,
        h,
        is_scattered: rep.is_scattered,
        kde_bound: rep.bound,
        exact_seconds,
        kde_seconds,
        rect_seconds,
        rect_speedup: exact_seconds / rect_seconds.max(1e-12),
        magnitude: w.magnitude(),
        kde_error: error_pair(w.weights(), &kde),
        rect_normalized_error: error_pair(w.weights(), &rect_norm),
        rect_unnormalized_error: error_pair(w.weights(), &rect_unnorm),
    })
}

#[derive(Serialize)]
struct MetricsOut {
    precision_at_k: f64,
    recall_at_k: f64,
    f1_at_k: f64,
    auc: f64,
}

impl From<outlier::EvalMetrics> for MetricsOut {
    fn from(m: outlier::EvalMetrics) -> Self {
        Self {
            precision_at_k: m.precision_at_k,
            recall_at_k: m.recall_at_k,
            f1_at_k: m.f1_at_k,
            auc: m.auc,
        }
    }
}

#[derive(Serialize)]
struct OutlierReport {
    schema: u32,
    seed: u64,
    k: usize,
    train_size: usize,
    validation_size: usize,
    test_size: usize,
    /// Exact-duplicate rows removed before fitting / scoring.
    dropped_duplicate_train: usize,
    dropped_duplicate_eval: usize,
    grid: Vec<GridPoint>,
    best_t: f64,
    test: MetricsOut,
}

#[derive(Serialize)]
struct GridPoint {
    t: f64,
    validation_auc: Option<f64>,
}

fn parse_t_grid(arg: &str) -> CliResult<Vec<ScaleParameter<f64>>> {
    if arg == "paper" || arg == "default" {
        return Ok(default_t_grid());
    }
    let mut ts = Vec::new();
    for tok in arg.split(',') {
        let v: f64 = tok
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("error: bad t-grid value {tok:?}")))?;
        ts.push(scale_of(v)?);
    }
    ts.sort_by(|a, b| a.get().partial_cmp(&b.get()).unwrap());
    if ts.is_empty() {
        return Err(CliError::usage("error: empty t grid".to_string()));
    }
    Ok(ts)
}

fn outlier_pipeline(
    inlier_path: &std::path::Path,
    eval_path: Option<&std::path::Path>,
    labels_col: &str,
    k: usize,
    t_grid: &str,
    seed: u64,
) -> CliResult<OutlierReport> {
    let grid = parse_t_grid(t_grid)?;
    let col = ColumnRef::parse(labels_col);

    let (train_pool, validation, validation_labels, test, test_labels, dropped_train, dropped_eval);
    match eval_path {
        None => {
            // Single labeled file: the benchmark split protocol.
            let loaded = read_points(inlier_path, Some(&col))?;
            let labels = loaded
                .labels
                .ok_or_else(|| CliError::usage("error: --labels-col required".to_string()))?;
            let inlier_idx: Vec<usize> =
                (0..loaded.cloud.len()).filter(|&i| labels[i] <= 0.5).collect();
            let outlier_idx: Vec<usize> =
                (0..loaded.cloud.len()).filter(|&i| labels[i] > 0.5).collect();
            let (inliers, kept_in) = loaded.cloud.select(&inlier_idx).dedup_exact();
            let (outliers, kept_out) = loaded.cloud.select(&outlier_idx).dedup_exact();
            dropped_train = inlier_idx.len() - kept_in.len();
            dropped_eval = outlier_idx.len() - kept_out.len();
            let split = split_dataset(&inliers, Some(&outliers), seed)?;
            train_pool = split.train;
            validation = split.validation;
            validation_labels = split.validation_labels;
            test = split.test;
            test_labels = split.test_labels;
        }
        Some(eval_path) => {
            // Two files: inlier pool plus a labeled evaluation set that is
            // split into validation/test halves, stratified by label.
            let pool = read_points(inlier_path, None)?;
            let (inliers, kept) = pool.cloud.dedup_exact();
            dropped_train = pool.cloud.len() - kept.len();
            let eval = read_points(eval_path, Some(&col))?;
            let labels = eval
                .labels
                .ok_or_else(|| CliError::usage("error: --labels-col required".to_string()))?;
            let (dedup_eval, kept_eval) = eval.cloud.dedup_exact();
            dropped_eval = eval.cloud.len() - kept_eval.len();
            let labels: Vec<bool> = kept_eval.iter().map(|&i| labels[i] > 0.5).collect();
            let (val_idx, test_idx) = stratified_halves(&labels, seed);
            validation = dedup_eval.select(&val_idx);
            validation_labels = val_idx.iter().map(|&i| labels[i]).collect();
            test = dedup_eval.select(&test_idx);
            test_labels = test_idx.iter().map(|&i| labels[i]).collect();
            train_pool = inliers;
        }
    }

    let search = t_search(&train_pool, &validation, &validation_labels, &grid, seed)?;
    let model = outlier::fit(&train_pool, search.best_t, seed)?.with_k(k);

    // Queries that exactly duplicate a training point cannot be scored.
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut dropped_degenerate = 0usize;
    for i in 0..test.len() {
        match outlier::score(&model, test.point(i)) {
            Ok(s) => {
                scores.push(s);
                labels.push(test_labels[i]);
            }
            Err(magkit_core::Error::DegenerateAugmentation { .. }) => dropped_degenerate += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let k_eff = k.min(scores.len());
    let metrics = evaluate(&scores, &labels, k_eff)?;

    Ok(OutlierReport {
        schema: 1,
        seed,
        k: k_eff,
        train_size: train_pool.len(),
        validation_size: validation.len(),
        test_size: scores.len(),
        dropped_duplicate_train: dropped_train,
        dropped_duplicate_eval: dropped_eval + dropped_degenerate,
        grid: search
            .grid
            .iter()
            .map(|&(t, auc)| GridPoint { t: t.get(), validation_auc: auc })
            .collect(),
        best_t: search.best_t.get(),
        test: metrics.into(),
    })
}

/// Deterministic stratified split into two halves.
fn stratified_halves(labels: &[bool], seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let half = members.len() / 2;
        first.extend_from_slice(&members[..half]);
        second.extend_from_slice(&members[half..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

fn to_signed_labels(raw: &[f64]) -> CliResult<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in raw {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    if distinct.len() != 2 {
        return Err(CliError::data(format!(
            "error: need exactly 2 label values, found {}",
            distinct.len()
        )));
    }
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(raw
        .iter()
        .map(|&v| if v == distinct[0] { -1.0 } else { 1.0 })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn active_learn_curves(
    pool: &PointCloud<f64>,
    labels: &[f64],
    strategy: Strategy,
    budget: usize,
    seeds: u64,
    t: f64,
    gamma: f64,
    ridge: f64,
) -> CliResult<String> {
    use std::collections::BTreeMap;
    let mut by_spent: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for seed in 0..seeds {
        let cfg = RunConfig { strategy, budget, seed, t: scale_of(t)?, gamma, ridge };
        let out = run_al(pool, labels, &cfg)?;
        for &(spent, acc) in &out.state.curve {
            by_spent.entry(spent).or_default().push(acc);
        }
    }
    let mut csv = String::from("labels_spent,mean_accuracy,stdev_accuracy,runs\n");
    for (spent, accs) in by_spent {
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        csv.push_str(&format!(
            "{spent},{},{},{}\n",
            fmt_float(mean),
            fmt_float(var.sqrt()),
            accs.len()
        ));
    }
    Ok(csv)
}
