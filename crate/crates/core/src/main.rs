use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use npcsma::experiments::{
    cmd_regions, cmd_simulate, cmd_sweep, cmd_validate, format_region_summary, Axis, CsvTable,
    SimOverrides, SpecFile,
};
use npcsma::Result;

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "npcsma",
    version,
    about = "Stability regions, delay and simulation of slotted non-persistent CSMA with K-exponential backoff"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Stable regions of q against the input rate, with a summary at one rate.
    Regions,
    /// Sweep one of g, q, lambda-hat or n (given as start:stop:step).
    Sweep,
    /// Run one simulation and write its backlog trace.
    Simulate,
    /// Check the analytic model against reference values and simulation.
    Validate,
}

#[derive(Args)]
struct Opts {
    /// JSON experiment file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Backoff scheme: geo (K=1), exp (K=inf) or k (with --cap-k).
    #[arg(long, global = true, value_parser = ["geo", "exp", "k"])]
    scheme: Option<String>,
    /// Cut-off phase K for the k scheme.
    #[arg(long, global = true)]
    cap_k: Option<u32>,
    /// Number of nodes (value, inf, or start:stop:step).
    #[arg(long, global = true)]
    n: Option<String>,
    /// Propagation-delay ratio a = 1/M.
    #[arg(long, global = true)]
    a: Option<f64>,
    /// Aggregate input rate (value or start:stop:step).
    #[arg(long, global = true)]
    lambda_hat: Option<String>,
    /// Retransmission factor (value or start:stop:step).
    #[arg(long, global = true)]
    q: Option<String>,
    /// Attempt rate range for a throughput-vs-G sweep.
    #[arg(long, global = true)]
    g: Option<String>,
    /// Simulation horizon in mini-slots.
    #[arg(long, global = true)]
    horizon: Option<u64>,
    /// Mini-slots discarded before statistics.
    #[arg(long, global = true)]
    warmup: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Mini-slots between backlog samples.
    #[arg(long, global = true)]
    backlog_interval: Option<u64>,
    /// Add simulated columns to a sweep.
    #[arg(long, global = true, conflicts_with = "no_sim")]
    sim: bool,
    /// Skip simulation checks in validate.
    #[arg(long, global = true)]
    no_sim: bool,
    /// CSV output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV path for per-slot attempt counts (simulate).
    #[arg(long, global = true)]
    attempts_out: Option<PathBuf>,
}

fn axis(s: &Option<String>) -> Result<Option<Axis>> {
    s.as_deref().map(str::parse).transpose()
}

impl Opts {
    fn spec_file(&self) -> Result<SpecFile> {
        let flags = SpecFile {
            scheme: self.scheme.clone(),
            cap_k: self.cap_k,
            n: axis(&self.n)?,
            a: self.a,
            lambda_hat: axis(&self.lambda_hat)?,
            q: axis(&self.q)?,
            g: axis(&self.g)?,
            sim: SimOverrides {
                enabled: match (self.sim, self.no_sim) {
                    (true, _) => Some(true),
                    (_, true) => Some(false),
                    _ => None,
                },
                horizon: self.horizon,
                warmup: self.warmup,
                seed: self.seed,
                backlog_interval: self.backlog_interval,
            },
            output_path: self.out.clone(),
            attempts_path: self.attempts_out.clone(),
        };
        let base = match &self.config {
            Some(path) => SpecFile::load(path)?,
            None => SpecFile::default(),
        };
        Ok(base.merge(flags))
    }
}

fn emit(table: &CsvTable, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => table.save(p),
        None => table.write_to(std::io::stdout().lock()),
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let spec = cli.opts.spec_file()?.resolve()?;
    let out = spec.output_path.as_ref();
    match cli.command {
        Command::Regions => {
            let r = cmd_regions(&spec)?;
            emit(&r.table, out)?;
            if let Some(summary) = &r.summary {
                // Keep stdout pure CSV when no file was given.
                let text = format_region_summary(summary);
                if out.is_some() {
                    print!("{text}");
                } else {
                    eprint!("{text}");
                }
            }
        }
        Command::Sweep => emit(&cmd_sweep(&spec)?, out)?,
        Command::Simulate => {
            let r = cmd_simulate(&spec)?;
            if let Some(out) = out {
                r.backlog.save(out)?;
            }
            if let (Some(path), Some(t)) = (&spec.attempts_path, &r.attempts) {
                t.save(path)?;
            }
            let rep = &r.report;
            let mut s = std::io::stdout().lock();
            writeln!(s, "throughput {}", rep.throughput)?;
            writeln!(s, "mean delay {}", rep.mean_delay)?;
            writeln!(s, "mean service time {}", rep.service_mean)?;
            writeln!(s, "service time second moment {}", rep.service_second)?;
            writeln!(s, "mean backlog {}", rep.mean_backlog)?;
            writeln!(s, "final backlog {}", rep.counts.final_backlog)?;
            writeln!(s, "attempt rate {}", rep.measured_attempt_rate)?;
            if let Some(st) = &rep.attempt_stats {
                writeln!(
                    s,
                    "attempts per slot: mean {} variance {} binomial variance {} three-sigma coverage {}",
                    st.mean_attempt_rate, st.variance, st.binomial_variance, st.three_sigma_coverage
                )?;
            }
            if let Some(m) = &r.model_at_measured {
                if let Some(mo) = m.moments {
                    writeln!(s, "model mean service time at measured G {}", mo.mean)?;
                }
                if let Some(d) = m.delay {
                    writeln!(s, "model P-K delay at measured G {}", d.mean_delay)?;
                }
            }
        }
        Command::Validate => {
            let checks = cmd_validate(&spec)?;
            let mut failed = 0;
            for c in &checks {
                println!("{c}");
                failed += usize::from(!c.passed());
            }
            println!(
                "{} of {} checks passed",
                checks.len() - failed,
                checks.len()
            );
            if failed > 0 {
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
