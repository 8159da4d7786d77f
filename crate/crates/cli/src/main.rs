use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use kcm_core::experiments::{run_experiment, ExperimentConfig};
use kcm_core::model::parse_u32_line;
use kcm_core::oracle::{enumerate_strategy, exact_pmf_i};
use kcm_core::rng::stream_rng;
use kcm_core::strategies::{sample_with_strategy, StrategyRegistry};
use kcm_core::verify::{run_suite, Suite, VerifyConfig};
use kcm_core::{
    asymptotic_constants, count_inversions, exact_step_moments, exact_total_moments, greedy_lower_bound, lis_length,
    KcmError, Permutation, SamplerConfig, SamplerMode,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "kcm", version, about = "k-card-minimum random permutations")]
struct Cli {
    /// Worker threads for parallel work.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate permutations.
    Sample {
        n: usize,
        k: u32,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SamplerMode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value = "min")]
        strategy: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Per-permutation I, L and M for permutations read from a file or stdin.
    Stats {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// k used by the greedy lower bound M.
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Exact mean and variance of I, total or at one step.
    Moments {
        n: usize,
        k: u32,
        /// Single step `t` instead of the total.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Exact law of I.
    Pmf {
        n: usize,
        k: u32,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Exhaustive joint law of (I, L) under a strategy.
    Enumerate {
        n: usize,
        k: u32,
        #[arg(long, default_value = "min")]
        strategy: String,
    },
    /// Run a Monte Carlo experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run a named verification suite.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<SamplerMode, String> {
    s.parse().map_err(|e: KcmError| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: KcmError| e.to_string())
}

enum Failure {
    Verification(String),
    Usage(String),
}

impl From<KcmError> for Failure {
    fn from(e: KcmError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w as usize).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = run(cli, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli, out: &mut impl Write) -> CmdResult {
    match cli.command {
        Command::Sample {
            n,
            k,
            mode,
            seed,
            count,
            strategy,
            format,
        } => cmd_sample(out, n, k, mode, seed, count, &strategy, format),
        Command::Stats { input, k, format } => cmd_stats(out, input.as_deref(), k, format),
        Command::Moments { n, k, t, format } => cmd_moments(out, n, k, t, format),
        Command::Pmf { n, k, format } => cmd_pmf(out, n, k, format),
        Command::Enumerate { n, k, strategy } => cmd_enumerate(out, n, k, &strategy),
        Command::Experiment { config, format } => cmd_experiment(out, &config, cli.workers, format),
        Command::Verify { suite, config } => cmd_verify(out, suite, config.as_deref()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    out: &mut impl Write,
    n: usize,
    k: u32,
    mode: Option<SamplerMode>,
    seed: u64,
    count: usize,
    strategy: &str,
    format: Format,
) -> CmdResult {
    let cfg = SamplerConfig::with_mode(n, k, mode.unwrap_or_else(|| SamplerMode::default_for(k)), seed)?;
    let strategy = StrategyRegistry::with_builtins().get(strategy)?;
    strategy.check_params(n, k)?;
    let sampler = cfg.sampler();
    let mut perms = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let mut rng = stream_rng(seed, i);
        let perm = if strategy.name() == "min" {
            sampler.permutation(&mut rng)
        } else {
            sample_with_strategy(strategy.as_ref(), n, k, &mut rng)?
        };
        perms.push(perm);
    }
    match format {
        Format::Json => {
            let cards: Vec<&[u32]> = perms.iter().map(Permutation::cards).collect();
            writeln!(out, "{}", serde_json::to_string(&cards).expect("serializable"))?;
        }
        Format::Text | Format::Csv => {
            for p in &perms {
                writeln!(out, "{}", p.to_text())?;
            }
        }
    }
    Ok(())
}

fn cmd_stats(out: &mut impl Write, input: Option<&Path>, k: u32, format: Format) -> CmdResult {
    if k == 0 {
        return Err(Failure::Usage("k must be >= 1".into()));
    }
    let reader: Box<dyn BufRead> = match input {
        Some(path) => Box::new(BufReader::new(fs::File::open(path)?)),
        None => Box::new(BufReader::new(io::stdin())),
    };
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| KcmError::Parse {
            line: Some(idx + 1),
            reason,
        };
        let cards = parse_u32_line(&line).map_err(|e| parse_err(e.to_string()))?;
        let perm = Permutation::new(cards).map_err(|e| parse_err(e.to_string()))?;
        let m = greedy_lower_bound(&perm, k.min(perm.n().max(1) as u32)).m();
        rows.push((perm.n(), count_inversions(&perm), lis_length(&perm), m));
    }
    match format {
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|&(n, i, l, m)| json!({"n": n, "I": i, "L": l, "M": m}))
                .collect();
            let doc = json!({"schema_version": SCHEMA_VERSION, "k": k, "rows": rows});
            writeln!(out, "{doc}")?;
        }
        Format::Csv | Format::Text => {
            writeln!(out, "n,I,L,M")?;
            for (n, i, l, m) in rows {
                writeln!(out, "{n},{i},{l},{m}")?;
            }
        }
    }
    Ok(())
}

fn cmd_moments(out: &mut impl Write, n: usize, k: u32, t: Option<usize>, format: Format) -> CmdResult {
    let m = match t {
        Some(t) => exact_step_moments(n, k, t)?,
        None => exact_total_moments(n, k)?,
    };
    let c = asymptotic_constants(k)?;
    match format {
        Format::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "n": n,
                "k": k,
                "t": t,
                "mean": m.mean,
                "variance": m.variance,
                "a_k": c.a(),
                "b_k": c.b(),
            });
            writeln!(out, "{doc}")?;
        }
        Format::Csv => {
            writeln!(out, "n,k,t,mean,variance")?;
            let t = t.map(|t| t.to_string()).unwrap_or_default();
            writeln!(out, "{n},{k},{t},{},{}", m.mean, m.variance)?;
        }
        Format::Text => {
            writeln!(out, "mean {}\nvariance {}", m.mean, m.variance)?;
        }
    }
    Ok(())
}

fn cmd_pmf(out: &mut impl Write, n: usize, k: u32, format: Format) -> CmdResult {
    let pmf = exact_pmf_i(n, k)?;
    match format {
        Format::Json | Format::Text => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "n": n,
                "k": k,
                "offset": pmf.support_offset,
                "probs": pmf.probs,
            });
            writeln!(out, "{doc}")?;
        }
        Format::Csv => {
            writeln!(out, "i,prob")?;
            for (j, p) in pmf.probs.iter().enumerate() {
                writeln!(out, "{},{p}", pmf.support_offset + j as i64)?;
            }
        }
    }
    Ok(())
}

fn cmd_enumerate(out: &mut impl Write, n: usize, k: u32, strategy: &str) -> CmdResult {
    let strategy = StrategyRegistry::with_builtins().get(strategy)?;
    let result = enumerate_strategy(n, k, strategy.as_ref())?;
    writeln!(out, "{}", result.to_json())?;
    Ok(())
}

fn read_source(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn cmd_experiment(out: &mut impl Write, path: &Path, workers: Option<u64>, format: Format) -> CmdResult {
    let text = read_source(path)?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("invalid experiment config {}: {e}", path.display())))?;
    if let Some(w) = workers {
        cfg.workers = Some(w as usize);
    }
    let summary = run_experiment(&cfg, &StrategyRegistry::with_builtins())?;
    match format {
        Format::Csv => write!(out, "{}", summary.to_csv())?,
        Format::Json | Format::Text => {
            writeln!(out, "{}", serde_json::to_string_pretty(&summary).expect("serializable"))?
        }
    }
    Ok(())
}

fn cmd_verify(out: &mut impl Write, suite: Suite, config: Option<&Path>) -> CmdResult {
    let cfg = match config {
        Some(path) => serde_json::from_str(&read_source(path)?)
            .map_err(|e| Failure::Usage(format!("invalid verify config {}: {e}", path.display())))?,
        None => VerifyConfig::default(),
    };
    let report = run_suite(suite, &cfg)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"))?;
    eprint!("{}", report.to_table());
    if report.passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.failing().map(|c| c.name.as_str()).collect();
        Err(Failure::Verification(names.join(", ")))
    }
}
