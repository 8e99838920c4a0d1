use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rookbench::batchcodes::{scheme_threshold, SchemeDescriptor, SchemeKind};
use rookbench::bench::{bench_delta, write_delta_csv};
use rookbench::exponents::{
    base3_exponents, behrend_exponents, is_3ap_free, is_decodable, min_recovery_bruteforce_with, poly_code_exponents,
    sum_support, ExponentError, SearchLimits,
};
use rookbench::sim::{run_simulation, sweep, write_sweep_csv, EncodeAt, FaultModel, SimConfig, SweepSpec};
use rookbench::{ExponentPair, PrimeField, MERSENNE_61};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Rook codes and baseline schemes for coded batch matrix multiplication.
#[derive(Debug, Parser)]
#[command(name = "rookbench", version)]
struct Cli {
    /// Prime field modulus.
    #[arg(long, global = true, default_value_t = MERSENNE_61)]
    modulus: u64,

    /// Seed for inputs, evaluation points and faults.
    #[arg(long, global = true, env = "ROOKBENCH_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an exponent pair and report its recovery threshold.
    Gen {
        #[arg(long, value_enum)]
        scheme: Construction,
        #[arg(long)]
        n: usize,
        /// Write the pair here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an exponent pair file for decodability.
    Check {
        #[arg(long)]
        exponents: PathBuf,
    },
    /// Exhaustive search for the smallest recovery threshold.
    Minsearch {
        #[arg(long)]
        n: usize,
        /// Largest exponent allowed (default 4(n-1)).
        #[arg(long)]
        max_exponent: Option<u64>,
    },
    /// Run one simulated job and print its report.
    Simulate(SimulateArgs),
    /// Run a grid of simulations and write CSV.
    Sweep(SweepArgs),
    /// Gap-power cost of Behrend encoders as CSV.
    BenchDelta {
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        n_list: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Construction {
    Poly,
    Base3,
    Behrend,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Side {
    Master,
    Workers,
}

impl From<Side> for EncodeAt {
    fn from(s: Side) -> Self {
        match s {
            Side::Master => EncodeAt::Master,
            Side::Workers => EncodeAt::Workers,
        }
    }
}

#[derive(Debug, Args)]
struct JobArgs {
    #[arg(long, default_value_t = 1)]
    rows: usize,
    #[arg(long, default_value_t = 1)]
    inner: usize,
    #[arg(long, default_value_t = 1)]
    cols: usize,
    #[arg(long, default_value_t = 0.0)]
    fail_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    straggle_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    base_delay: f64,
    #[arg(long, value_enum, default_value = "master")]
    encode_at: Side,
    /// Replication factor (replication only).
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl JobArgs {
    fn fault(&self) -> FaultModel {
        FaultModel {
            fail_prob: self.fail_prob,
            straggle_mean: self.straggle_mean,
            base_delay: self.base_delay,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_kind)]
    scheme: SchemeKind,
    #[arg(long)]
    n: usize,
    /// Worker count (default: the threshold, or n*lambda for replication).
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    job: JobArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long = "scheme", alias = "schemes", value_parser = parse_kind, value_delimiter = ',', required = true)]
    schemes: Vec<SchemeKind>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Workers beyond each scheme's threshold.
    #[arg(long, default_value_t = 4)]
    spare: usize,
    #[command(flatten)]
    job: JobArgs,
}

fn parse_kind(s: &str) -> Result<SchemeKind, String> {
    s.parse().map_err(|e: rookbench::scheme::CodeError| e.to_string())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn describe(pair: &ExponentPair) -> String {
    let decodable = is_decodable(pair);
    let mut line = format!("decodable={decodable} L={}", sum_support(pair).len());
    if pair.is_symmetric() {
        line += &format!(" 3ap_free={}", is_3ap_free(pair.p()));
    }
    line + &format!(" max_exponent={}", pair.max_exponent())
}

fn descriptor(scheme: SchemeKind, n: usize, lambda: Option<usize>) -> SchemeDescriptor {
    let desc = SchemeDescriptor::new(scheme, n);
    match (scheme, lambda) {
        (SchemeKind::Replication, l) => desc.with_lambda(l.unwrap_or(2)),
        (_, Some(l)) => desc.with_lambda(l),
        (_, None) => desc,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    PrimeField::new(cli.modulus)?;
    match cli.command {
        Command::Gen { scheme, n, out } => {
            let pair = match scheme {
                Construction::Poly => poly_code_exponents(n),
                Construction::Base3 => base3_exponents(n),
                Construction::Behrend => behrend_exponents(n),
            }?;
            let l = sum_support(&pair).len();
            if pair.max_sum() >= cli.modulus - 1 {
                log::warn!("exponent sums reach {}, too large for GF({})", pair.max_sum(), cli.modulus);
            }
            match out {
                Some(path) => {
                    write_json(Some(&path), &pair)?;
                    println!("L={l} decodable={}", is_decodable(&pair));
                }
                None => {
                    println!("L={l} decodable={}", is_decodable(&pair));
                    println!("{}", serde_json::to_string(&pair)?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { exponents } => {
            let text = fs::read_to_string(&exponents).with_context(|| format!("cannot read {}", exponents.display()))?;
            let pair: ExponentPair =
                serde_json::from_str(&text).with_context(|| format!("{} is not an exponent pair", exponents.display()))?;
            println!("{}", describe(&pair));
            Ok(if is_decodable(&pair) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Minsearch { n, max_exponent } => {
            let limits = SearchLimits::default();
            let budget = max_exponent.unwrap_or((4 * n.saturating_sub(1)) as u64);
            match min_recovery_bruteforce_with(n, budget, &limits) {
                Ok(found) => {
                    println!(
                        "Lmin={} witness={} pairs_examined={} decodable_pairs={}",
                        found.l_min,
                        serde_json::to_string(&found.witness)?,
                        found.pairs_examined,
                        found.decodable_pairs
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(ExponentError::NoDecodablePair { n, max_exponent }) => {
                    println!("Lmin=none n={n} max_exponent={max_exponent}");
                    Ok(ExitCode::from(1))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Simulate(args) => {
            let desc = descriptor(args.scheme, args.n, args.job.lambda);
            let threshold = scheme_threshold(&desc)?;
            let m = args.workers.or(desc.fixed_workers()).unwrap_or(threshold);
            let config = SimConfig {
                descriptor: desc,
                m,
                dims: (args.job.rows, args.job.inner, args.job.cols),
                seed: cli.seed,
                encode_at: args.job.encode_at.into(),
                fault: args.job.fault(),
                modulus: cli.modulus,
            };
            let report = run_simulation(&config)?;
            let summary = format!(
                "success={} verified={} responses_used={} responses_received={} threshold={}",
                report.success, report.verified, report.responses_used, report.responses_received, report.threshold
            );
            match &args.job.out {
                Some(path) => {
                    write_json(Some(path), &report)?;
                    println!("{summary}");
                }
                None => write_json(None, &report)?,
            }
            if let Some(e) = &report.error {
                eprintln!("{e}");
            }
            Ok(if report.success { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Sweep(args) => {
            if args.trials == 0 {
                bail!("--trials must be at least 1");
            }
            let spec = SweepSpec {
                schemes: args.schemes,
                n_values: args.n_list,
                trials: args.trials,
                spare: args.spare,
                lambda: args.job.lambda.unwrap_or(2),
                dims: (args.job.rows, args.job.inner, args.job.cols),
                fault: args.job.fault(),
                encode_at: args.job.encode_at.into(),
                seed: cli.seed,
                modulus: cli.modulus,
            };
            let rows = sweep(&spec)?;
            write_sweep_csv(&rows, output(args.job.out.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BenchDelta { n_list, out } => {
            let rows = bench_delta(&n_list)?;
            write_delta_csv(&rows, output(out.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
