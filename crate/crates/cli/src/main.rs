use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use trigfree::expect::{MPolicy, Method};
use trigfree::infer::{Baseline, Link, ZeroKind};
use trigfree_cli::bench::{bench_table, run_bench};
use trigfree_cli::compare::{compare_table, run_compare};
use trigfree_cli::config::{parse_grid, parse_methods, ModelSpec, StudyConfig, StudyKind};
use trigfree_cli::error::{CliError, Result};
use trigfree_cli::expect_cmd::{run_expect, ExpectArgs};
use trigfree_cli::fim_sim::{check_convergence, records_table, run_fim_sim, summary_table};
use trigfree_cli::ingest::{csv_ingest, Schema};
use trigfree_cli::output::{write_file, Table};
use trigfree_cli::regress::{regress_table, run_regress, RegressArgs};
use trigfree_cli::sensitivity::{run_sensitivity, sensitivity_table};

#[derive(Parser)]
#[command(name = "trigfree", version, about = "Trigamma-free expectations, Fisher information and count-model studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate E Ψ₁(ν + Y) (or E Ψ(ν + Y)) for one model and print JSON.
    Expect(ExpectCmd),
    /// Log absolute errors of each approximation over an M grid.
    Compare(StudyCmd),
    /// Errors of approximations built from NB fits to simulated data.
    Sensitivity(StudyCmd),
    /// Simulate, fit and compare approximate Fisher information with the reference.
    FimSim(FimSimCmd),
    /// Time each approximation and count trigamma calls.
    Bench(StudyCmd),
    /// Fit a zero-inflated or hurdle regression to a CSV file.
    Regress(RegressCmd),
    /// Read a CSV file as the regression command would and summarize it.
    IngestCheck(IngestArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// nb, bnb, zinb, zibnb, zanb, zabnb, binomial or beta-binomial.
    #[arg(long)]
    family: String,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Number of trials for binomial families.
    #[arg(long)]
    n: Option<u64>,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        ModelSpec {
            family: self.family.clone(),
            nu: self.nu,
            p: self.p,
            alpha: self.alpha,
            beta: self.beta,
            phi: self.phi,
            n: self.n,
        }
    }
}

#[derive(Args)]
struct ExpectCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Shift ν in E Ψ₁(ν + Y); defaults to --nu.
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long, default_value = "trigamma-free")]
    method: String,
    /// A number, `policy:default` or `policy:tol=<t>`.
    #[arg(long = "M", default_value = "policy:default")]
    m: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StudyCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma list and/or `start:end:step` ranges.
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long, default_value_t = trigfree::expect::DEFAULT_M_REF)]
    m_ref: u64,
    #[arg(long)]
    methods: Option<String>,
    /// Replicates B (timing repetitions for bench).
    #[arg(long, short = 'B')]
    replicates: Option<u64>,
    /// Sample size N of each simulated dataset.
    #[arg(long, short = 'N', default_value_t = 1000)]
    sample_size: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "TRIGFREE_WORKERS")]
    workers: Option<usize>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct FimSimCmd {
    #[command(flatten)]
    study: StudyCmd,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Per-replicate CSV destination.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct IngestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    /// Categorical column; repeat for several.
    #[arg(long = "factor")]
    factors: Vec<String>,
    /// Comma list of covariate columns to keep; all by default.
    #[arg(long)]
    columns: Option<String>,
}

impl IngestArgs {
    fn schema(&self) -> Schema {
        Schema {
            response: self.response.clone(),
            factors: self.factors.clone(),
            columns: self.columns.as_deref().map(split_list),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ZeroArg {
    Inflated,
    Hurdle,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Nb,
    Bnb,
}

#[derive(Args)]
struct RegressCmd {
    #[command(flatten)]
    ingest: IngestArgs,
    #[arg(long, value_enum, default_value = "inflated")]
    zero: ZeroArg,
    #[arg(long, value_enum, default_value = "nb")]
    baseline: BaselineArg,
    /// logit or probit.
    #[arg(long, default_value = "logit")]
    zero_link: String,
    #[arg(long)]
    zero_columns: Option<String>,
    #[arg(long)]
    param_columns: Option<String>,
    #[arg(long, default_value = "trigamma-free")]
    method: String,
    #[arg(long, default_value = "1000,5000,20000")]
    m_grid: String,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Coefficient CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report destination; standard error when absent.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn study_config(kind: StudyKind, cmd: &StudyCmd, grid: &str, methods: &str, replicates: u64) -> Result<StudyConfig> {
    let mut c = StudyConfig::new(kind, cmd.model.spec());
    c.m_grid = parse_grid(cmd.m_grid.as_deref().unwrap_or(grid))?;
    c.methods = parse_methods(cmd.methods.as_deref().unwrap_or(methods))?;
    c.m_ref = cmd.m_ref;
    c.replicates = cmd.replicates.unwrap_or(replicates);
    c.sample_size = cmd.sample_size;
    c.seed = cmd.seed;
    c.workers = cmd.workers.unwrap_or_else(default_workers);
    Ok(c)
}

fn emit(out: &Option<PathBuf>, table: &Table) -> Result<()> {
    let text = table.render();
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn emit_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_file(p, &to_json(value)),
        None => Ok(()),
    }
}

const FIGURE_GRID: &str = "10:200:10";
const ALL_METHODS: &str = "trigamma-free,calibrated,gfwl,monte-carlo";
const DETERMINISTIC: &str = "trigamma-free,calibrated,gfwl";

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Expect(cmd) => {
            let args = ExpectArgs {
                model: cmd.model.spec(),
                shift: cmd.shift,
                method: cmd.method.parse()?,
                policy: cmd.m.parse::<MPolicy>()?,
                seed: cmd.seed,
            };
            print!("{}", to_json(&run_expect(&args)?));
        }
        Command::Compare(cmd) => {
            let cfg = study_config(StudyKind::Compare, &cmd, FIGURE_GRID, ALL_METHODS, 200)?;
            let report = run_compare(&cfg)?;
            emit(&cmd.out, &compare_table(&cfg, &report))?;
            emit_json(&cmd.json, &report)?;
        }
        Command::Sensitivity(cmd) => {
            let cfg = study_config(StudyKind::Sensitivity, &cmd, FIGURE_GRID, ALL_METHODS, 200)?;
            let report = run_sensitivity(&cfg)?;
            emit(&cmd.out, &sensitivity_table(&cfg, &report))?;
            emit_json(&cmd.json, &report)?;
            if report.excluded as f64 > 0.2 * cfg.replicates as f64 {
                return Err(CliError::NonConvergence { failed: report.excluded, total: cfg.replicates as usize });
            }
        }
        Command::FimSim(cmd) => {
            let mut cfg = study_config(
                StudyKind::FimSim,
                &cmd.study,
                "100,150,1000,5000,20000",
                "trigamma-free,monte-carlo",
                200,
            )?;
            cfg.level = cmd.level;
            let report = run_fim_sim(&cfg)?;
            emit(&cmd.study.out, &summary_table(&cfg, &report))?;
            if let Some(path) = &cmd.records {
                write_file(path, &records_table(&cfg, &report).render())?;
            }
            emit_json(&cmd.study.json, &report)?;
            check_convergence(&report)?;
        }
        Command::Bench(cmd) => {
            let cfg = study_config(StudyKind::Bench, &cmd, "10,100,1000,10000,100000", DETERMINISTIC, 10)?;
            let rows = run_bench(&cfg)?;
            emit(&cmd.out, &bench_table(&cfg, &rows))?;
            emit_json(&cmd.json, &rows)?;
        }
        Command::Regress(cmd) => {
            let data = csv_ingest(&cmd.ingest.data, &cmd.ingest.schema())?;
            let args = RegressArgs {
                schema: cmd.ingest.schema(),
                zero: match cmd.zero {
                    ZeroArg::Inflated => ZeroKind::Inflated,
                    ZeroArg::Hurdle => ZeroKind::Hurdle,
                },
                baseline: match cmd.baseline {
                    BaselineArg::Nb => Baseline::Nb,
                    BaselineArg::Bnb => Baseline::Bnb,
                },
                zero_link: cmd.zero_link.parse::<Link>()?,
                zero_columns: cmd.zero_columns.as_deref().map(split_list),
                param_columns: cmd.param_columns.as_deref().map(split_list),
                method: cmd.method.parse::<Method>()?,
                m_grid: parse_grid(&cmd.m_grid)?,
                level: cmd.level,
                seed: cmd.seed,
            };
            let report = run_regress(&data, &args)?;
            emit(&cmd.out, &regress_table(&args, &report))?;
            match &cmd.json {
                Some(_) => emit_json(&cmd.json, &report)?,
                None => eprint!("{}", to_json(&report)),
            }
            if !report.converged {
                return Err(CliError::NonConvergence { failed: 1, total: 1 });
            }
        }
        Command::IngestCheck(args) => {
            let data = csv_ingest(&args.data, &args.schema())?;
            #[derive(Serialize)]
            struct Summary<'a> {
                rows: usize,
                zeros: usize,
                max_response: u64,
                mean_response: f64,
                columns: &'a [String],
            }
            let n = data.n();
            print!(
                "{}",
                to_json(&Summary {
                    rows: n,
                    zeros: data.responses.iter().filter(|&&y| y == 0).count(),
                    max_response: data.responses.iter().copied().max().unwrap_or(0),
                    mean_response: data.responses.iter().map(|&y| y as f64).sum::<f64>() / n.max(1) as f64,
                    columns: &data.names,
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
