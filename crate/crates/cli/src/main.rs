//! `fairbundle` command line: ingest catalogs, train relevance models, run
//! and sweep recommendation sessions, and aggregate traces.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairbundle_core::relevance::{train_mf, MfHyperParams, NormalizationBounds};
use fairbundle_core::seed;

use fairbundle::archive;
use fairbundle::config::ExperimentConfig;
use fairbundle::error::AppError;
use fairbundle::ingest::{
    build_catalog, load_metadata, load_ratings, CompatRule, FilterSpec, GroupRule, RatingsFormat,
};
use fairbundle::session::{aggregate_runs, run_session_with, RunAggregate, SessionContext};
use fairbundle::trace::{read_trace, write_trace};

#[derive(Parser)]
#[command(name = "fairbundle", version, about = "Producer-fair sequential bundle recommendation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a catalog archive from item metadata.
    Ingest(IngestArgs),
    /// Train a relevance model from explicit ratings.
    Train(TrainArgs),
    /// Execute seeded sessions from a config file.
    Run(RunArgs),
    /// Grid-sweep tolerance/weight/pool-size/blend over a base config.
    Sweep(SweepArgs),
    /// Aggregate trace files into a summary table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CompatArg {
    Movie,
    Venue,
    Copurchase,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupByArg {
    Popularity,
    Country,
}

#[derive(Args)]
struct IngestArgs {
    /// Line-delimited JSON item metadata.
    #[arg(long)]
    metadata: PathBuf,
    /// Pairwise compatibility construction.
    #[arg(long, value_enum)]
    compat: CompatArg,
    /// Group assignment rule.
    #[arg(long, value_enum)]
    group_by: GroupByArg,
    /// Ascending popularity cutoffs (group-by popularity).
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<u64>,
    /// Country tag order (group-by country); position = group index.
    #[arg(long, value_delimiter = ',')]
    tags: Vec<String>,
    /// Drop items with fewer interactions than this.
    #[arg(long)]
    min_popularity: Option<u64>,
    /// Keep only items from these countries.
    #[arg(long, value_delimiter = ',')]
    countries: Option<Vec<String>>,
    /// Output catalog archive path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Delimiter-separated user,item,rating[,timestamp] file.
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long, default_value = ",")]
    delimiter: char,
    #[arg(long, default_value_t = 32)]
    factors: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.02)]
    regularization: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model archive path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Base experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Tolerance values to sweep.
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    /// Fairness weights to sweep.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Candidate pool sizes to sweep.
    #[arg(long, value_delimiter = ',')]
    top_m: Vec<usize>,
    /// Blend weights to sweep.
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Trace files (.trace.jsonl) from identically-configured runs.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), AppError> {
    match command {
        Command::Ingest(args) => ingest(args),
        Command::Train(args) => train(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report(args),
    }
}

fn ingest(args: IngestArgs) -> Result<(), AppError> {
    let group_rule = match args.group_by {
        GroupByArg::Popularity => {
            if args.thresholds.is_empty() {
                return Err(AppError::Config("--thresholds required for popularity groups".into()));
            }
            GroupRule::PopularityThresholds(args.thresholds.clone())
        }
        GroupByArg::Country => {
            if args.tags.is_empty() {
                return Err(AppError::Config("--tags required for country groups".into()));
            }
            GroupRule::TagOrder(args.tags.clone())
        }
    };
    let compat_rule = match args.compat {
        CompatArg::Movie => CompatRule::Movie,
        CompatArg::Venue => CompatRule::Venue,
        CompatArg::Copurchase => CompatRule::Copurchase,
    };
    let filter =
        FilterSpec { min_popularity: args.min_popularity, countries: args.countries.clone() };

    let metadata = load_metadata(&args.metadata).map_err(AppError::data)?;
    let (catalog, type_names, build) =
        build_catalog(&metadata, compat_rule, &group_rule, &filter).map_err(AppError::data)?;
    archive::save_catalog(&args.out, &catalog, &type_names).map_err(AppError::data)?;

    println!(
        "catalog: {} items, {} groups, {} types -> {}",
        catalog.len(),
        catalog.group_count(),
        catalog.type_count(),
        args.out.display()
    );
    println!(
        "dropped: {} filtered, {} missing compatibility fields, {} missing group fields",
        build.filtered_out, build.missing_compat_fields, build.missing_group_fields
    );
    if build.dropped_cointeraction_refs > 0 {
        println!("dropped co-interaction references: {}", build.dropped_cointeraction_refs);
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), AppError> {
    let format = RatingsFormat { delimiter: args.delimiter };
    let (table, load) = load_ratings(&args.ratings, &format).map_err(AppError::data)?;
    if load.malformed > 0 || load.duplicate_overwrites > 0 {
        println!(
            "warnings: {} malformed lines skipped, {} duplicate ratings overwritten",
            load.malformed, load.duplicate_overwrites
        );
    }
    let hyper = MfHyperParams {
        factors: args.factors,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        regularization: args.regularization,
        seed: args.seed,
        ..MfHyperParams::default()
    };
    let model = train_mf(&table, &hyper).map_err(AppError::data)?;
    let bounds = NormalizationBounds::from_model(&model);
    archive::save_model(&args.out, &model, &bounds).map_err(AppError::data)?;
    println!(
        "model: {} users x {} items, {} factors, final train RMSE {:.4} -> {}",
        model.users().len(),
        model.items().len(),
        hyper.factors,
        model.epoch_rmse().last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<(), AppError> {
    let config = ExperimentConfig::from_path(&args.config)?;
    let context = SessionContext::prepare(&config)?;
    let repeats = config.session.repeats;
    let mut traces = Vec::with_capacity(repeats as usize);
    let mut total_served = 0u32;

    for rep in 0..repeats {
        let run_seed = if repeats == 1 {
            config.session.seed
        } else {
            seed::derive(config.session.seed, u64::from(rep))
        };
        let trace = run_session_with(&config, run_seed, &context)?;
        total_served += trace.summary.served_steps;
        let prefix = format!("{}-{rep:02}", config.output.prefix);
        let files = write_trace(&config.output.directory, &prefix, &trace)?;
        println!(
            "run {rep}: seed {run_seed}, served {}/{} steps, final fairness {:.4} -> {}",
            trace.summary.served_steps,
            trace.total_users,
            trace.summary.final_fairness,
            files.trace.display()
        );
        traces.push(trace);
    }

    let aggregate = aggregate_runs(&traces)?;
    let agg_path = config.output.directory.join(format!("{}.aggregate.csv", config.output.prefix));
    std::fs::write(&agg_path, aggregate_csv(&config, &aggregate)).map_err(AppError::data)?;
    println!(
        "aggregate over {} runs: quality {:.4} +/- {:.4}, fairness {:.4} +/- {:.4} -> {}",
        aggregate.runs,
        aggregate.mean_quality.mean,
        aggregate.mean_quality.std_dev,
        aggregate.final_fairness.mean,
        aggregate.final_fairness.std_dev,
        agg_path.display()
    );

    if total_served == 0 {
        return Err(AppError::AllStepsInfeasible);
    }
    Ok(())
}

fn aggregate_csv(config: &ExperimentConfig, agg: &RunAggregate) -> String {
    let mut out = String::from(
        "method,epsilon,lambda,top_m,gamma,runs,mean_quality,quality_sd,final_fairness,\
         fairness_sd,infeasible_steps,infeasible_sd,latency_mean_us,family_hash\n",
    );
    out.push_str(&sweep_row(config, agg));
    out
}

fn sweep_row(config: &ExperimentConfig, agg: &RunAggregate) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        config.solver.method,
        config.fairness.epsilon,
        config.solver.lambda,
        config.solver.top_m,
        config.bundle.gamma,
        agg.runs,
        agg.mean_quality.mean,
        agg.mean_quality.std_dev,
        agg.final_fairness.mean,
        agg.final_fairness.std_dev,
        agg.infeasible_steps.mean,
        agg.infeasible_steps.std_dev,
        agg.latency_mean_us.map(|s| s.mean.to_string()).unwrap_or_default(),
        agg.family_hash,
    )
}

fn sweep(args: SweepArgs) -> Result<(), AppError> {
    let base = ExperimentConfig::from_path(&args.config)?;
    let epsilons = or_base(args.epsilon, base.fairness.epsilon);
    let lambdas = or_base(args.lambda, base.solver.lambda);
    let pools = or_base(args.top_m, base.solver.top_m);
    let gammas = or_base(args.gamma, base.bundle.gamma);

    let mut out = String::from(
        "method,epsilon,lambda,top_m,gamma,runs,mean_quality,quality_sd,final_fairness,\
         fairness_sd,infeasible_steps,infeasible_sd,latency_mean_us,family_hash\n",
    );
    for &eps in &epsilons {
        for &lambda in &lambdas {
            for &top_m in &pools {
                for &gamma in &gammas {
                    let mut config = base.clone();
                    config.fairness.epsilon = eps;
                    config.solver.lambda = lambda;
                    config.solver.top_m = top_m;
                    config.bundle.gamma = gamma;
                    config.validate()?;

                    let context = SessionContext::prepare(&config)?;
                    let mut traces = Vec::new();
                    for rep in 0..config.session.repeats {
                        let run_seed = seed::derive(config.session.seed, u64::from(rep));
                        traces.push(run_session_with(&config, run_seed, &context)?);
                    }
                    let agg = aggregate_runs(&traces)?;
                    out.push_str(&sweep_row(&config, &agg));
                    println!(
                        "eps {eps} lambda {lambda} top_m {top_m} gamma {gamma:.3}: \
                         quality {:.4}, fairness {:.4}",
                        agg.mean_quality.mean, agg.final_fairness.mean
                    );
                }
            }
        }
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(AppError::data)?;
        }
    }
    std::fs::write(&args.out, out).map_err(AppError::data)?;
    println!("sweep table -> {}", args.out.display());
    Ok(())
}

fn or_base<T: Copy>(values: Vec<T>, base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values
    }
}

fn report(args: ReportArgs) -> Result<(), AppError> {
    let traces: Vec<_> =
        args.traces.iter().map(read_trace).collect::<Result<_, _>>()?;
    let agg = aggregate_runs(&traces)?;
    let mut out = String::from(
        "runs,mean_quality,quality_sd,final_fairness,fairness_sd,infeasible_steps,\
         infeasible_sd,mean_relative_quality,latency_mean_us,family_hash\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        agg.runs,
        agg.mean_quality.mean,
        agg.mean_quality.std_dev,
        agg.final_fairness.mean,
        agg.final_fairness.std_dev,
        agg.infeasible_steps.mean,
        agg.infeasible_steps.std_dev,
        agg.mean_relative_quality.map(|s| s.mean.to_string()).unwrap_or_default(),
        agg.latency_mean_us.map(|s| s.mean.to_string()).unwrap_or_default(),
        agg.family_hash,
    ));
    match args.out {
        Some(path) => {
            std::fs::write(&path, out).map_err(AppError::data)?;
            println!("report -> {}", path.display());
        }
        None => print!("{out}"),
    }
    Ok(())
}
