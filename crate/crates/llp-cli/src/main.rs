//! Command-line front end wiring the library into reproducible
//! experiments: synthetic or CSV-backed bag generation, plug-in training
//! with cross-validated regularization, evaluation, pairing and merging
//! reports, bound calculators, the proportion-matching failure demo, and
//! the consistency sweep.
//!
//! Every command writes its fully resolved configuration next to its
//! outputs; replaying that file reproduces the run bit-exactly. All
//! randomness derives from the single `--seed` value via named stages.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage or config error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use llp_mcm::bags::{
    sample_bag_cibm, sample_bag_ciim, sample_lps, Bag, ClassConditionals, LpDistribution,
};
use llp_mcm::bounds::{
    merged_bags_bound, paired_bags_bound, sr_relu_network, sr_rkhs_ball, MergedBoundInputs,
    PairedBoundInputs, SrConstants,
};
use llp_mcm::data::{
    assemble_bags, load_csv, read_bag_dir, read_labeled_csv, write_bag_dir, write_labeled_csv,
    ColumnMeta, Dataset, Preprocessor, Schema,
};
use llp_mcm::eval::{ber, epr, epr_counterexample, roc_auc, roc_points, LabeledTestSet};
use llp_mcm::loss::Loss;
use llp_mcm::model::DecisionFunction;
use llp_mcm::pairing::{
    merge_bm, merge_bp, optimal_weights, pair_optimal, pair_sorted, PairingReport, WeightMode,
};
use llp_mcm::seed::derive_seed;
use llp_mcm::train::{
    consistency_sweep, train_llp, MergeConfig, MergeScheme, PairingStrategy, SweepProblem,
    TrainConfig,
};
use llp_mcm::{Error, Result};

use config::{parse_floats, parse_usizes, ConfigMap};

#[derive(Parser)]
#[command(
    name = "llp",
    version,
    about = "Learning from label proportions via paired-bag contamination models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate bags (synthetic samplers or a CSV dataset) plus a held-out test set.
    Simulate(SimulateArgs),
    /// Train on a bag manifest directory, writing a model and run report.
    Train(TrainArgs),
    /// Score a model on a labeled CSV: AUC, BER, ROC points, optional proportion risk.
    Evaluate(EvaluateArgs),
    /// Pair bags and report contaminations, weights, and the matching objective.
    Pair(PairArgs),
    /// Merge bags into big-bag pairs and report the merged proportions.
    Merge(MergeArgs),
    /// Evaluate a generalization bound from a JSON input file.
    Bound(BoundArgs),
    /// Print the thresholds showing proportion matching is not BER-optimal.
    EprDemo,
    /// Run the consistency sweep over a schedule of pair counts.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory for the manifest, bag files, and test set.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ingest this CSV instead of sampling synthetic class conditionals.
    #[arg(long, requires = "schema")]
    from_csv: Option<PathBuf>,
    /// JSON column schema for `--from-csv`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Comma-separated positive-class mean (negatives mirror it).
    #[arg(long)]
    means: Option<String>,
    #[arg(long)]
    scale: Option<f64>,
    /// Generation model: `ciim` (independent labels) or `cibm` (dependent).
    #[arg(long)]
    model: Option<String>,
    /// Within-bag label dependence for `cibm`, in [0, 1].
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    bag_size: Option<usize>,
    /// Total training instances; the number of bags is total / bag-size.
    #[arg(long, conflicts_with = "n_bags")]
    total: Option<usize>,
    /// Fixed number of bags (total then grows with bag size).
    #[arg(long)]
    n_bags: Option<usize>,
    /// Label-proportion distribution: `constant`, `uniform`, or `walk`.
    #[arg(long)]
    lp_dist: Option<String>,
    #[arg(long)]
    lp_value: Option<f64>,
    #[arg(long)]
    lp_lo: Option<f64>,
    #[arg(long)]
    lp_hi: Option<f64>,
    #[arg(long)]
    lp_start: Option<f64>,
    #[arg(long)]
    lp_scale: Option<f64>,
    /// Synthetic test instances per class.
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Bag manifest directory (from `simulate`).
    #[arg(long)]
    bags: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    loss: Option<String>,
    /// Comma-separated ridge grid.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// `bag` (squared gaps) or `instance` (size-weighted squared gaps).
    #[arg(long)]
    weight_mode: Option<String>,
    /// `sorted` or `optimal`.
    #[arg(long)]
    pairing: Option<String>,
    /// Enable merging with this scheme: `bp` or `bm`.
    #[arg(long)]
    merge_scheme: Option<String>,
    /// Small-bag pairs per merged pair.
    #[arg(long)]
    merge_k: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled CSV whose last column is the +1/-1 label.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also report the empirical proportion risk over these bags.
    #[arg(long)]
    bags: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    epr_exponent: f64,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    bags: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "optimal")]
    strategy: String,
    #[arg(long, default_value = "bag")]
    weight_mode: String,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long)]
    bags: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "bm")]
    scheme: String,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "bag")]
    weight_mode: String,
}

#[derive(Args)]
struct BoundArgs {
    /// JSON file: `{"sr": ..., "paired": ...}` or `{"sr": ..., "merged": ...}`.
    #[arg(long)]
    inputs: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated pair counts.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    bag_size: Option<usize>,
    #[arg(long)]
    lambda_coeff: Option<f64>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    means: Option<String>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    lp_lo: Option<f64>,
    #[arg(long)]
    lp_hi: Option<f64>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Pair(args) => cmd_pair(args),
        Command::Merge(args) => cmd_merge(args),
        Command::Bound(args) => cmd_bound(args),
        Command::EprDemo => cmd_epr_demo(),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for data-dependent computation failures, 2 for usage/config errors.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegeneratePairs { .. }
        | Error::DegenerateFolds
        | Error::PoolExhausted { .. }
        | Error::ZeroVariance(_) => 1,
        _ => 2,
    }
}

fn lp_dist_from(
    cfg: &mut ConfigMap,
    kind: Option<String>,
    value: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    start: Option<f64>,
    scale: Option<f64>,
) -> Result<LpDistribution> {
    let kind = cfg.resolve("lp-dist", kind, "uniform".to_string())?;
    match kind.as_str() {
        "constant" => Ok(LpDistribution::Constant { value: cfg.resolve("lp-value", value, 0.5)? }),
        "uniform" => Ok(LpDistribution::IidUniform {
            lo: cfg.resolve("lp-lo", lo, 0.0)?,
            hi: cfg.resolve("lp-hi", hi, 0.5)?,
        }),
        "walk" => Ok(LpDistribution::CorrelatedWalk {
            start: cfg.resolve("lp-start", start, 0.5)?,
            scale: cfg.resolve("lp-scale", scale, 0.25)?,
        }),
        other => Err(Error::Config(format!("unknown lp distribution `{other}`"))),
    }
}

fn dataset_of(instances: Vec<Vec<f64>>, labels: Vec<i8>, columns: &[ColumnMeta]) -> Dataset {
    Dataset { features: instances, labels, columns: columns.to_vec(), dropped_rows: 0 }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = ConfigMap::load(args.config.as_deref())?;
    let seed = cfg.resolve("seed", args.seed, 0)?;
    let bag_size = cfg.resolve("bag-size", args.bag_size, 8)?;
    let n_bags_flag = cfg.resolve_opt("n-bags", args.n_bags)?;
    let total = match n_bags_flag {
        Some(n_bags) => n_bags * bag_size,
        None => cfg.resolve("total", args.total, 1024)?,
    };
    let lp_dist = lp_dist_from(
        &mut cfg,
        args.lp_dist,
        args.lp_value,
        args.lp_lo,
        args.lp_hi,
        args.lp_start,
        args.lp_scale,
    )?;
    let stage = derive_seed(seed, "simulate");

    let from_csv =
        cfg.resolve_opt("from-csv", args.from_csv.map(|p| p.display().to_string()))?;
    let schema_path = cfg.resolve_opt("schema", args.schema.map(|p| p.display().to_string()))?;

    let (bags, test) = if let Some(csv_path) = &from_csv {
        let schema_path = schema_path
            .ok_or_else(|| Error::Config("`from-csv` requires a `schema`".into()))?;
        let schema = Schema::load(Path::new(&schema_path))?;
        let ds = load_csv(Path::new(csv_path), &schema)?;
        let (raw_bags, raw_test) =
            assemble_bags(&ds, bag_size, &lp_dist, total, derive_seed(stage, "assemble"))?;

        // standardization and one-hot parameters come from the training
        // bags only and are applied unchanged to the test remainder
        let mut train_rows = Vec::new();
        let mut train_labels = Vec::new();
        for bag in &raw_bags {
            train_rows.extend(bag.instances().iter().cloned());
            train_labels
                .extend_from_slice(bag.hidden_labels().expect("assembled bags are labeled"));
        }
        let prep = Preprocessor::fit(&dataset_of(train_rows, train_labels, &ds.columns))?;
        let bags = raw_bags
            .iter()
            .map(|bag| {
                let encoded = prep.transform(&dataset_of(
                    bag.instances().to_vec(),
                    bag.hidden_labels().unwrap().to_vec(),
                    &ds.columns,
                ))?;
                Bag::from_labeled(
                    encoded.features,
                    bag.hidden_labels().unwrap().to_vec(),
                    bag.true_lp(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let encoded_test = prep.transform(&dataset_of(
            raw_test.instances().to_vec(),
            raw_test.labels().to_vec(),
            &ds.columns,
        ))?;
        (bags, LabeledTestSet::new(encoded_test.features, encoded_test.labels)?)
    } else {
        let means = parse_floats(&cfg.resolve("means", args.means, "1,1".to_string())?)?;
        let scale = cfg.resolve("scale", args.scale, 1.0)?;
        let model = cfg.resolve("model", args.model, "ciim".to_string())?;
        let rho = cfg.resolve("rho", args.rho, 0.5)?;
        let test_per_class = cfg.resolve("test-per-class", args.test_per_class, 1000)?;
        if total == 0 || total % bag_size != 0 {
            return Err(Error::Config(format!(
                "total {total} is not a positive multiple of bag size {bag_size}"
            )));
        }
        let cc = ClassConditionals::symmetric_gaussians(means, scale);
        let lps = sample_lps(&lp_dist, total / bag_size, derive_seed(stage, "lps"))?;
        let bags = lps
            .iter()
            .enumerate()
            .map(|(i, &lp)| {
                let bag_seed = derive_seed(stage, &format!("bag-{i}"));
                match model.as_str() {
                    "ciim" => sample_bag_ciim(lp, bag_size, &cc, bag_seed),
                    "cibm" => sample_bag_cibm(lp, bag_size, &cc, rho, bag_seed),
                    other => Err(Error::Config(format!("unknown generation model `{other}`"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let problem =
            SweepProblem { cc, lp_dist: lp_dist.clone(), bag_size, test_per_class };
        let test = llp_mcm::train::sample_test_set(&problem, derive_seed(stage, "test"))?;
        (bags, test)
    };

    std::fs::create_dir_all(&args.out)?;
    write_bag_dir(&args.out, &bags)?;
    write_labeled_csv(&args.out.join("test.csv"), &test)?;
    cfg.write_resolved(&args.out)?;
    println!(
        "wrote {} bags ({} instances) and {} test rows to {}",
        bags.len(),
        bags.iter().map(Bag::len).sum::<usize>(),
        test.len(),
        args.out.display()
    );
    Ok(())
}

fn train_config_from(cfg: &mut ConfigMap, args: &TrainArgs) -> Result<TrainConfig> {
    let defaults = TrainConfig::default();
    let loss = Loss::parse(&cfg.resolve("loss", args.loss.clone(), "logistic".to_string())?)?;
    let lambda_grid = parse_floats(&cfg.resolve(
        "lambda-grid",
        args.lambda_grid.clone(),
        "1,0.1,0.01,0.001,0.0001,0.00001".to_string(),
    )?)?;
    let weight_mode =
        WeightMode::parse(&cfg.resolve("weight-mode", args.weight_mode.clone(), "bag".into())?)?;
    let pairing = match cfg.resolve("pairing", args.pairing.clone(), "optimal".into())?.as_str() {
        "sorted" => PairingStrategy::Sorted,
        "optimal" => PairingStrategy::Optimal,
        other => return Err(Error::Config(format!("unknown pairing strategy `{other}`"))),
    };
    let merge_scheme = cfg.resolve_opt("merge-scheme", args.merge_scheme.clone())?;
    let merge = match merge_scheme {
        Some(scheme) => Some(MergeConfig {
            scheme: MergeScheme::parse(&scheme)?,
            k: cfg.resolve("merge-k", args.merge_k, 2)?,
        }),
        None => None,
    };
    Ok(TrainConfig {
        loss,
        lambda_grid,
        folds: cfg.resolve("folds", args.folds, defaults.folds)?,
        seed: cfg.resolve("seed", args.seed, defaults.seed)?,
        weight_mode,
        pairing,
        merge,
        bandwidth: cfg.resolve_opt("bandwidth", args.bandwidth)?,
        ..defaults
    })
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = ConfigMap::load(args.config.as_deref())?;
    let train_config = train_config_from(&mut cfg, &args)?;
    let bags = read_bag_dir(&args.bags)?;
    let outcome = train_llp(&bags, &train_config)?;

    std::fs::create_dir_all(&args.out)?;
    outcome.model.save(&args.out.join("model.json"))?;
    std::fs::write(
        args.out.join("run_report.json"),
        serde_json::to_string_pretty(&outcome.report)?,
    )?;
    cfg.write_resolved(&args.out)?;
    println!(
        "trained on {} bags ({} pairs, {} excluded): lambda {}, objective {:.6}, {} iterations{}",
        outcome.report.n_bags,
        outcome.report.n_pairs,
        outcome.report.n_pairs_excluded,
        outcome.report.chosen_lambda,
        outcome.report.final_objective,
        outcome.report.iterations,
        if outcome.report.converged { "" } else { " (not converged)" },
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let model = DecisionFunction::load(&args.model)?;
    let test = read_labeled_csv(&args.test)?;
    let scores = model.evaluate_batch(test.instances())?;
    let auc = roc_auc(&scores, test.labels())?;
    let ber_value = ber(&model, &test)?;

    let epr_value = match &args.bags {
        Some(dir) => Some(epr(&model, &read_bag_dir(dir)?, args.epr_exponent)?),
        None => None,
    };

    std::fs::create_dir_all(&args.out)?;
    let mut writer = csv::Writer::from_path(args.out.join("roc.csv"))?;
    writer.write_record(["threshold", "fpr", "tpr"])?;
    for point in roc_points(&scores, test.labels())? {
        writer.serialize((point.threshold, point.fpr, point.tpr))?;
    }
    writer.flush()?;

    let metrics = serde_json::json!({
        "auc": auc,
        "ber": ber_value,
        "epr": epr_value,
        "n_test": test.len(),
    });
    let rendered = serde_json::to_string_pretty(&metrics)?;
    std::fs::write(args.out.join("metrics.json"), &rendered)?;
    println!("{rendered}");
    Ok(())
}

fn cmd_pair(args: PairArgs) -> Result<()> {
    let bags = read_bag_dir(&args.bags)?;
    let pairs = match args.strategy.as_str() {
        "sorted" => pair_sorted(&bags)?,
        "optimal" => pair_optimal(&bags)?,
        other => return Err(Error::Config(format!("unknown pairing strategy `{other}`"))),
    };
    let weights = optimal_weights(&pairs, WeightMode::parse(&args.weight_mode)?)?;
    let report = PairingReport::from_pairs(&pairs, &weights);
    std::fs::create_dir_all(&args.out)?;
    let rendered = serde_json::to_string_pretty(&report)?;
    std::fs::write(args.out.join("pairing.json"), &rendered)?;
    println!("{rendered}");
    Ok(())
}

fn cmd_merge(args: MergeArgs) -> Result<()> {
    let bags = read_bag_dir(&args.bags)?;
    let merged = match MergeScheme::parse(&args.scheme)? {
        MergeScheme::Bp => merge_bp(&bags, args.k)?,
        MergeScheme::Bm => merge_bm(&bags, args.k)?,
    };
    let weights = optimal_weights(&merged, WeightMode::parse(&args.weight_mode)?)?;
    let report = PairingReport::from_merged(&merged, &weights);
    std::fs::create_dir_all(&args.out)?;
    let rendered = serde_json::to_string_pretty(&report)?;
    std::fs::write(args.out.join("merge.json"), &rendered)?;
    println!("{rendered}");
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SrSpec {
    Constants { a: f64, b: f64 },
    RkhsBall { radius: f64, kernel_bound: f64 },
    ReluNetwork { alpha: Vec<f64>, beta: Vec<f64>, xnorm: f64 },
}

#[derive(serde::Deserialize)]
struct BoundRequest {
    sr: SrSpec,
    paired: Option<PairedBoundInputs>,
    merged: Option<MergedBoundInputs>,
}

fn cmd_bound(args: BoundArgs) -> Result<()> {
    let request: BoundRequest = serde_json::from_str(&std::fs::read_to_string(&args.inputs)?)?;
    let sr: SrConstants = match request.sr {
        SrSpec::Constants { a, b } => SrConstants { a, b },
        SrSpec::RkhsBall { radius, kernel_bound } => sr_rkhs_ball(radius, kernel_bound)?,
        SrSpec::ReluNetwork { alpha, beta, xnorm } => sr_relu_network(&alpha, &beta, xnorm)?,
    };
    let rendered = match (request.paired, request.merged) {
        (Some(inputs), None) => serde_json::to_string_pretty(&paired_bags_bound(&inputs, &sr)?)?,
        (None, Some(inputs)) => serde_json::to_string_pretty(&merged_bags_bound(&inputs, &sr)?)?,
        _ => {
            return Err(Error::Config(
                "bound request must contain exactly one of `paired` or `merged`".into(),
            ))
        }
    };
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(out, &rendered)?;
    }
    println!("{rendered}");
    Ok(())
}

fn cmd_epr_demo() -> Result<()> {
    let report = epr_counterexample();
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = ConfigMap::load(args.config.as_deref())?;
    let schedule = parse_usizes(&cfg.resolve("schedule", args.schedule, "16,64,256".into())?)?;
    let bag_size = cfg.resolve("bag-size", args.bag_size, 8)?;
    let lambda_coeff = cfg.resolve("lambda-coeff", args.lambda_coeff, 0.1)?;
    let scheme = MergeScheme::parse(&cfg.resolve("scheme", args.scheme, "bm".into())?)?;
    let means = parse_floats(&cfg.resolve("means", args.means, "1".to_string())?)?;
    let scale = cfg.resolve("scale", args.scale, 1.0)?;
    let lp_lo = cfg.resolve("lp-lo", args.lp_lo, 0.0)?;
    let lp_hi = cfg.resolve("lp-hi", args.lp_hi, 1.0)?;
    let test_per_class = cfg.resolve("test-per-class", args.test_per_class, 1000)?;
    let seed = cfg.resolve("seed", args.seed, 0)?;

    let problem = SweepProblem {
        cc: ClassConditionals::symmetric_gaussians(means, scale),
        lp_dist: LpDistribution::IidUniform { lo: lp_lo, hi: lp_hi },
        bag_size,
        test_per_class,
    };
    let rows = consistency_sweep(&problem, &schedule, lambda_coeff, scheme, seed)?;

    std::fs::create_dir_all(&args.out)?;
    let mut writer = csv::Writer::from_path(args.out.join("sweep.csv"))?;
    writer.write_record(["n_pairs", "k", "merged_pairs", "lambda", "test_ber"])?;
    for row in &rows {
        writer.serialize((row.n_pairs, row.k, row.merged_pairs, row.lambda, row.test_ber))?;
        println!(
            "N {:>6}  K {:>4}  M {:>4}  lambda {:<10.6} test BER {:.4}",
            row.n_pairs, row.k, row.merged_pairs, row.lambda, row.test_ber
        );
    }
    writer.flush()?;
    cfg.write_resolved(&args.out)?;
    Ok(())
}
