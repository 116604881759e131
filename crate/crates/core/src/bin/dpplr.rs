//! Command-line front end: generate columns, build index files, run
//! lookups, execute the benchmark grid and verify the formal bounds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dp_plr::baselines::{build_crypte, build_dp_bplus, build_special};
use dp_plr::bench::{check_bounds, resolve_cell, run_experiment, ExperimentConfig};
use dp_plr::report::{emit_report, Report, ReportFormat};
use dp_plr::{
    cfc_error_bound, generate_column, AnyIndex, Distribution, DpPlrIndex, Method, PrivacyParams,
    SortedColumn,
};

#[derive(Parser)]
#[command(
    name = "dpplr",
    version,
    about = "Differentially private learned indexes: build, query and benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic column file (JSON).
    Gen(GenArgs),
    /// Build an index file from a column file.
    Build(BuildArgs),
    /// Look up a key (or key range) in an index file.
    Lookup(LookupArgs),
    /// Run the benchmark grid from a config file and emit reports.
    Bench(BenchArgs),
    /// Re-verify the formal bounds recorded in a JSON report.
    Check(CheckArgs),
}

#[derive(Args)]
struct GenArgs {
    /// uniform, lognormal or zipf.
    #[arg(long, default_value = "uniform")]
    dist: String,
    #[arg(long)]
    n_keys: usize,
    #[arg(long)]
    n_tuples: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    /// Column file: .json ({keys, counts, total}) or .csv (one tuple key per line).
    #[arg(long)]
    column: PathBuf,
    /// dp_plr, dp_bplus, crypte or special.
    #[arg(long, default_value = "dp_plr")]
    method: String,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    /// Pessimism multiplier; defaults to sqrt(ln(2/beta)).
    #[arg(long)]
    alpha_s: Option<f64>,
    /// Absolute PLR error bound; overrides --tau-fraction.
    #[arg(long)]
    tau: Option<f64>,
    /// tau as a fraction of the curve error bound.
    #[arg(long, default_value_t = 0.5)]
    tau_fraction: f64,
    /// Overflow dummies per leaf (dp_bplus only).
    #[arg(long, default_value_t = 0)]
    overflow_b: u64,
    /// One-sided shift (special only).
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct LookupArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    key: i64,
    /// Upper key of a range lookup (dp_plr only).
    #[arg(long)]
    to: Option<i64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Write the default config to --config and exit.
    #[arg(long)]
    init_config: bool,
    /// CSV report output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report output path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// JSON report produced by `bench`.
    #[arg(long)]
    report: PathBuf,
    /// Override the failure probability used for the verdicts.
    #[arg(long)]
    beta: Option<f64>,
}

fn load_column(path: &Path) -> Result<SortedColumn> {
    let col = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => SortedColumn::from_tuple_csv(path)?,
        _ => SortedColumn::from_json(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading column file {}", path.display()))?,
        )?,
    };
    Ok(col)
}

fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let dist: Distribution = args.dist.parse()?;
    let col = generate_column(dist, args.n_keys, args.n_tuples, args.seed)?;
    std::fs::write(&args.out, col.to_json()?)?;
    eprintln!(
        "wrote {} ({} keys, {} tuples)",
        args.out.display(),
        col.n_keys(),
        col.total()
    );
    Ok(0)
}

fn cmd_build(args: &BuildArgs) -> Result<i32> {
    let col = load_column(&args.column)?;
    let method: Method = args.method.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let index = match method {
        Method::DpPlr => {
            let alpha_s = args.alpha_s.unwrap_or_else(|| (2.0 / args.beta).ln().sqrt().max(1.0));
            let tau = match args.tau {
                Some(t) => t,
                None => {
                    let probe = PrivacyParams::new(args.epsilon, args.beta, alpha_s, 0.0)?;
                    args.tau_fraction * cfc_error_bound(&probe, col.n_keys())?
                }
            };
            let params = PrivacyParams::new(args.epsilon, args.beta, alpha_s, tau)?;
            AnyIndex::DpPlr(DpPlrIndex::build(&col, &params, &mut rng)?)
        }
        Method::DpBplus => {
            AnyIndex::DpBplus(build_dp_bplus(&col, args.epsilon, args.overflow_b, &mut rng)?)
        }
        Method::Crypte => AnyIndex::Crypte(build_crypte(&col, args.epsilon, &mut rng)?),
        Method::Special => {
            AnyIndex::Special(build_special(&col, args.epsilon, args.mu, &mut rng)?)
        }
    };
    std::fs::write(&args.out, index.to_json()?)?;
    eprintln!(
        "wrote {} ({} index, {} bits)",
        args.out.display(),
        method,
        index.index_size_bits()
    );
    Ok(0)
}

fn cmd_lookup(args: &LookupArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.index)
        .with_context(|| format!("reading index file {}", args.index.display()))?;
    let index = AnyIndex::from_json(&text)?;
    match args.to {
        None => println!("{}", index.lookup(args.key)?),
        Some(hi_key) => match &index {
            AnyIndex::DpPlr(idx) => println!("{}", idx.range_lookup(args.key, hi_key)?),
            _ => bail!("range lookups are only supported for dp_plr indexes"),
        },
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    if args.init_config {
        let cfg = ExperimentConfig::default();
        std::fs::write(&args.config, serde_json::to_string_pretty(&cfg)?)?;
        eprintln!("wrote default config to {}", args.config.display());
        return Ok(0);
    }
    if args.csv.is_none() && args.json.is_none() {
        bail!("nothing to emit: pass --csv and/or --json");
    }
    let cfg: ExperimentConfig = serde_json::from_str(
        &std::fs::read_to_string(&args.config)
            .with_context(|| format!("reading config {}", args.config.display()))?,
    )?;
    cfg.validate()?;
    for n in &cfg.n_keys {
        for eps in &cfg.epsilons {
            let cell = resolve_cell(&cfg, *n, *eps)?;
            eprintln!(
                "cell N={n} epsilon={eps}: tau={:.3} alpha_s={:.3} overflow_b={}",
                cell.tau, cell.alpha_s, cell.overflow_b
            );
        }
    }
    let started = Instant::now();
    let records = run_experiment(&cfg)?;
    let checks = check_bounds(&records, cfg.beta)?;
    if let Some(path) = &args.csv {
        emit_report(&records, &checks, &cfg, ReportFormat::Csv, path)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &args.json {
        emit_report(&records, &checks, &cfg, ReportFormat::Json, path)?;
        eprintln!("wrote {}", path.display());
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    eprintln!(
        "{} records, {} bound checks ({} failed), {:.1}s",
        records.len(),
        checks.len(),
        failed,
        started.elapsed().as_secs_f64()
    );
    for check in &checks {
        print_check(check);
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

fn print_check(check: &dp_plr::bench::BoundCheck) {
    println!(
        "{} method={} metric={} N={} epsilon={} bound={:.3} exceedance={:.4} allowed={:.4}",
        if check.pass { "PASS" } else { "FAIL" },
        check.method,
        check.metric,
        check.n_keys,
        check.epsilon,
        check.bound,
        check.exceedance_freq,
        check.allowed_freq
    );
}

fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let report = Report::from_json_str(
        &std::fs::read_to_string(&args.report)
            .with_context(|| format!("reading report {}", args.report.display()))?,
    )?;
    let beta = args.beta.unwrap_or(report.config.beta);
    let checks = check_bounds(&report.records, beta)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    for check in &checks {
        print_check(check);
    }
    eprintln!("{} checks, {} failed", checks.len(), failed);
    Ok(if failed == 0 { 0 } else { 1 })
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Build(args) => cmd_build(args),
        Command::Lookup(args) => cmd_lookup(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
