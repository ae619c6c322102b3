//! Command-line entry points: scenario generation, chain execution with full
//! output emission, record summarization, and the analytic self-check suite.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical
//! failure, 5 oracle-check failure.

use crate::analysis::{
    bayes_factor_pair, coassignment_probability, density_summary, ess_population_clusters,
    functional_means, partition_posterior, point_partition, similarity_matrix, PartitionLoss,
};
use crate::data::{ingest_csv, preprocess, write_csv, Transform};
use crate::error::{Error, Result};
use crate::records::{read_records_jsonl, write_records_jsonl, ChainRecord};
use crate::sampler::{pseudoprior_collect, run_chain, CUpdateMode, RunStats, SamplerConfig};
use crate::scenarios::{generate_scenario, ScenarioId, ScenarioSpec};
use crate::state::HyperParams;
use crate::validation::{run_all_checks, CheckBudget};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "semihdp",
    about = "Population clustering and homogeneity testing for grouped data \
             under a semi-hierarchical Dirichlet process mixture"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a benchmark scenario dataset as CSV.
    Generate(GenerateArgs),
    /// Run the sampler on a CSV dataset and write records plus summaries.
    Run(RunArgs),
    /// Recompute summaries from a saved record stream.
    Summarize(SummarizeArgs),
    /// Run the analytic self-check suite (closed forms vs simulation).
    OracleCheck(OracleCheckArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Scenario identifier (I..VII).
    #[arg(long)]
    scenario: String,
    /// Observations per population.
    #[arg(long, default_value_t = 100)]
    n_per_group: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct HyperArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    a_kappa: f64,
    #[arg(long, default_value_t = 2.0)]
    b_kappa: f64,
    /// Hold kappa fixed at this value instead of resampling it.
    #[arg(long)]
    fixed_kappa: Option<f64>,
    /// Comma-separated Dirichlet weights over populations; default uniform
    /// 1/I each.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long, default_value_t = 1e-4)]
    trunc_eps: f64,
}

impl HyperArgs {
    fn build(&self, n_groups: usize) -> Result<HyperParams> {
        let mut hyper = HyperParams::defaults(n_groups);
        hyper.alpha = self.alpha;
        hyper.gamma = self.gamma;
        hyper.a_kappa = self.a_kappa;
        hyper.b_kappa = self.b_kappa;
        hyper.fixed_kappa = self.fixed_kappa;
        hyper.trunc_eps = self.trunc_eps;
        if let Some(raw) = &self.eta {
            let eta: Vec<f64> = raw
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad eta entry '{tok}'")))
                })
                .collect::<Result<_>>()?;
            hyper.eta = eta;
        }
        hyper.validate(n_groups)?;
        Ok(hyper)
    }
}

#[derive(Args, Debug, Clone)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 2000)]
    n_burnin: usize,
    #[arg(long, default_value_t = 10_000)]
    n_iter: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// gibbs, metropolised-uniform, or metropolised-l2.
    #[arg(long, default_value = "gibbs")]
    c_update_mode: String,
    #[arg(long, default_value_t = 500)]
    pool_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScheduleArgs {
    fn build(&self) -> Result<SamplerConfig> {
        let config = SamplerConfig {
            n_burnin: self.n_burnin,
            n_iter: self.n_iter,
            thin: self.thin,
            c_update_mode: self.c_update_mode.parse::<CUpdateMode>()?,
            pseudoprior_pool_size: self.pool_size,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Input CSV with `group_id,value` rows.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    outdir: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Variance of the zero-mean Gaussian jitter added before modeling.
    #[arg(long, default_value_t = 0.0)]
    jitter_variance: f64,
    /// Standardize by the pooled mean and standard deviation.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    standardize: bool,
    /// Independent chains, each on its own RNG stream.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[command(flatten)]
    summary: SummaryOptions,
}

#[derive(Args, Debug, Clone)]
struct SummaryOptions {
    /// Density grid as `lo:hi:points`, in the original data scale.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Pass threshold in the original data scale; default is the pooled
    /// mean (model-scale zero).
    #[arg(long)]
    pass_threshold: Option<f64>,
    /// Pairs for Bayes factors, e.g. `1-2,1-3`; default all pairs when the
    /// group count is at most 20.
    #[arg(long)]
    bf_pairs: Option<String>,
    /// Prior odds for the pairwise homogeneity Bayes factor.
    #[arg(long, default_value_t = 1.0)]
    prior_odds: f64,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Record stream written by `run`.
    #[arg(long)]
    records: PathBuf,
    /// Manifest written by `run`; defaults to `manifest.json` next to the
    /// records.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    outdir: PathBuf,
    #[command(flatten)]
    summary: SummaryOptions,
}

#[derive(Args, Debug)]
struct OracleCheckArgs {
    /// Reduced repetition counts for quick runs.
    #[arg(long, default_value_t = false)]
    fast: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Manifest describing one `run` invocation.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct Manifest {
    pub group_ids: Vec<String>,
    pub n_per_group: Vec<usize>,
    pub hyper: HyperParams,
    pub sampler: SamplerConfig,
    pub jitter_variance: f64,
    pub standardize: bool,
    pub transform: Transform,
    pub chains: usize,
    pub wall_time_s: f64,
    pub data_min: f64,
    pub data_max: f64,
    pub run_stats: Vec<RunStats>,
}

pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version print and exit cleanly; real parse errors are
            // configuration errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args).map(|()| 0),
        Command::Run(args) => cmd_run(&args).map(|()| 0),
        Command::Summarize(args) => cmd_summarize(&args).map(|()| 0),
        Command::OracleCheck(args) => cmd_oracle_check(&args),
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let id: ScenarioId = args.scenario.parse()?;
    let spec = ScenarioSpec::new(id, args.n_per_group, args.seed);
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let data = generate_scenario(&spec, &mut rng)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_csv(&args.out, &data)?;
    println!(
        "wrote scenario {id} ({} groups x {} observations) to {}",
        data.n_groups(),
        args.n_per_group,
        args.out.display()
    );
    Ok(())
}

fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid '{raw}' must be lo:hi:points")));
    }
    let lo: f64 = parts[0].parse().map_err(|_| Error::Config(format!("bad grid lo '{raw}'")))?;
    let hi: f64 = parts[1].parse().map_err(|_| Error::Config(format!("bad grid hi '{raw}'")))?;
    let n: usize = parts[2].parse().map_err(|_| Error::Config(format!("bad grid size '{raw}'")))?;
    if !(hi > lo) || n < 2 {
        return Err(Error::Config(format!("degenerate grid '{raw}'")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|k| lo + step * k as f64).collect())
}

fn parse_pairs(raw: &str, n_groups: usize) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for tok in raw.split(',') {
        let (a, b) = tok
            .trim()
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("bad pair '{tok}' (expected i-j)")))?;
        let i: usize =
            a.trim().parse().map_err(|_| Error::Config(format!("bad pair index '{a}'")))?;
        let j: usize =
            b.trim().parse().map_err(|_| Error::Config(format!("bad pair index '{b}'")))?;
        if i == 0 || j == 0 || i > n_groups || j > n_groups || i == j {
            return Err(Error::Config(format!("pair {i}-{j} out of range for {n_groups} groups")));
        }
        out.push((i - 1, j - 1));
    }
    Ok(out)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let started = std::time::Instant::now();
    let raw = ingest_csv(&args.input)?;
    let mut pre_rng = ChaCha12Rng::seed_from_u64(args.schedule.seed);
    pre_rng.set_stream(u64::MAX);
    let (data, transform) = preprocess(&raw, args.jitter_variance, args.standardize, &mut pre_rng)?;
    let hyper = args.hyper.build(data.n_groups())?;
    let config = args.schedule.build()?;
    if args.chains == 0 {
        return Err(Error::Config("chains must be >= 1".into()));
    }
    std::fs::create_dir_all(&args.outdir)?;

    let mut pool_rng = ChaCha12Rng::seed_from_u64(config.seed);
    pool_rng.set_stream(u64::MAX - 1);
    let pool = pseudoprior_collect(&data, &hyper, &config, &mut pool_rng)?;

    let results: Vec<Result<(Vec<ChainRecord>, RunStats)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..args.chains)
            .map(|w| {
                let data = &data;
                let hyper = &hyper;
                let config = &config;
                let pool = &pool;
                scope.spawn(move || {
                    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
                    rng.set_stream(1 + w as u64);
                    run_chain(data, hyper, config, Some(pool), &mut rng)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let mut all_records = Vec::new();
    let mut run_stats = Vec::new();
    for (w, result) in results.into_iter().enumerate() {
        let (records, stats) = result?;
        let name = if w == 0 {
            "records.jsonl".to_string()
        } else {
            format!("records_chain{}.jsonl", w + 1)
        };
        write_records_jsonl(&args.outdir.join(name), &records)?;
        all_records.extend(records);
        run_stats.push(stats);
    }

    let manifest = Manifest {
        group_ids: data.group_ids().to_vec(),
        n_per_group: data.groups().iter().map(Vec::len).collect(),
        hyper,
        sampler: config,
        jitter_variance: args.jitter_variance,
        standardize: args.standardize,
        transform,
        chains: args.chains,
        wall_time_s: started.elapsed().as_secs_f64(),
        data_min: raw.iter_values().fold(f64::INFINITY, f64::min),
        data_max: raw.iter_values().fold(f64::NEG_INFINITY, f64::max),
        run_stats,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
    std::fs::write(args.outdir.join("manifest.json"), manifest_json)?;

    write_summaries(&all_records, &manifest, &args.outdir, &args.summary)?;
    println!(
        "run complete: {} chains, {} records, {:.1}s",
        args.chains,
        all_records.len(),
        manifest.wall_time_s
    );
    Ok(())
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    let records = read_records_jsonl(&args.records)?;
    if records.is_empty() {
        return Err(Error::Data("record stream is empty".into()));
    }
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.records.parent().unwrap_or(Path::new(".")).join("manifest.json"));
    let manifest: Manifest = {
        let raw = std::fs::read_to_string(&manifest_path).map_err(|e| {
            Error::Data(format!("cannot read manifest {}: {e}", manifest_path.display()))
        })?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::Data(format!("bad manifest {}: {e}", manifest_path.display())))?
    };
    std::fs::create_dir_all(&args.outdir)?;
    write_summaries(&records, &manifest, &args.outdir, &args.summary)
}

/// Emit every analysis output: similarity matrix, partition posterior,
/// Bayes factors, per-group density summaries (original scale), and the
/// functional table (model scale, threshold mapped through the transform).
fn write_summaries(
    records: &[ChainRecord],
    manifest: &Manifest,
    outdir: &Path,
    options: &SummaryOptions,
) -> Result<()> {
    let n_groups = manifest.group_ids.len();
    let tf = manifest.transform;

    let sim = similarity_matrix(records)?;
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(outdir.join("similarity.csv"))?);
        writeln!(w, "group,{}", manifest.group_ids.join(","))?;
        for (i, row) in sim.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{},{}", manifest.group_ids[i], cells.join(","))?;
        }
    }

    let posterior = partition_posterior(records)?;
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(outdir.join("partitions.csv"))?);
        writeln!(w, "partition,probability")?;
        let mut rows: Vec<_> = posterior.probs.iter().collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1));
        for (p, prob) in rows {
            writeln!(w, "\"{p}\",{prob}")?;
        }
        let binder = point_partition(records, PartitionLoss::Binder)?;
        let vi = point_partition(records, PartitionLoss::VariationOfInformation)?;
        writeln!(w, "\"point_estimate_binder: {binder}\",")?;
        writeln!(w, "\"point_estimate_vi: {vi}\",")?;
    }

    let pairs = match &options.bf_pairs {
        Some(raw) => parse_pairs(raw, n_groups)?,
        None if n_groups <= 20 => {
            (0..n_groups).flat_map(|i| (i + 1..n_groups).map(move |j| (i, j))).collect()
        }
        None => Vec::new(),
    };
    if !pairs.is_empty() {
        let mut w =
            std::io::BufWriter::new(std::fs::File::create(outdir.join("bayes_factors.csv"))?);
        writeln!(w, "group_i,group_j,posterior_prob,bf01")?;
        for (i, j) in pairs {
            let p = coassignment_probability(records, i, j);
            let bf = bayes_factor_pair(records, i, j, options.prior_odds)?;
            writeln!(
                w,
                "{},{},{p},{bf}",
                manifest.group_ids[i], manifest.group_ids[j]
            )?;
        }
    }

    let grid_original: Vec<f64> = match &options.grid {
        Some(raw) => parse_grid(raw)?,
        None => {
            let span = (manifest.data_max - manifest.data_min).max(1e-6);
            let lo = manifest.data_min - 0.25 * span;
            let hi = manifest.data_max + 0.25 * span;
            let n = 200;
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|k| lo + step * k as f64).collect()
        }
    };
    let grid_model: Vec<f64> = grid_original.iter().map(|&x| tf.forward(x)).collect();
    for g in 0..n_groups {
        let summary = density_summary(records, g, &grid_model)?;
        let path = outdir.join(format!("density_{}.csv", manifest.group_ids[g]));
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "grid,mean,lower95,upper95")?;
        for (k, &x) in grid_original.iter().enumerate() {
            writeln!(
                w,
                "{x},{},{},{}",
                tf.density_to_original(summary.mean[k]),
                tf.density_to_original(summary.lower95[k]),
                tf.density_to_original(summary.upper95[k])
            )?;
        }
    }

    let threshold_model = match options.pass_threshold {
        Some(t) => tf.forward(t),
        None => 0.0,
    };
    {
        let mut w =
            std::io::BufWriter::new(std::fs::File::create(outdir.join("functionals.csv"))?);
        writeln!(w, "group,mean,variance,pearson_skew,mode_skew,pass_prob")?;
        for g in 0..n_groups {
            let f = functional_means(records, g, threshold_model)?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                manifest.group_ids[g], f.mean, f.variance, f.pearson_skew, f.mode_skew, f.pass_prob
            )?;
        }
    }

    if records.len() >= 10 {
        let ess = ess_population_clusters(records)?;
        println!("ess population clusters: {ess:.1} over {} records", records.len());
    }
    Ok(())
}

fn cmd_oracle_check(args: &OracleCheckArgs) -> Result<i32> {
    let budget = if args.fast { CheckBudget::fast() } else { CheckBudget::reference() };
    let reports = run_all_checks(&budget, args.seed);
    let mut failures = 0usize;
    for r in &reports {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} — {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    println!("{} checks, {} failed", reports.len(), failures);
    Ok(if failures == 0 { 0 } else { 5 })
}
