use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use megpc::problems::ProblemName;
use megpc_cli::config::{Method, RunConfig, SurrogateKind};
use megpc_cli::run::{build_surrogate, run, write_outputs};
use megpc_cli::tables::{table, TableOptions};
use megpc_cli::validate::{check_cache, checks};

#[derive(Debug, Parser)]
#[command(
    name = "megpc",
    version,
    about = "Failure probabilities with multi-element gPC surrogates and hybrid sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configured experiment and print its JSON report.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Override a config field, e.g. `--set refinement.theta1=1e-4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Recompute a published table (1 to 5) as CSV.
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        number: u8,
        #[arg(long, default_value_t = 1_000_000)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        delta_m: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the invariant suite; exits nonzero if any check fails.
    Validate {
        /// Also check the partition stored in a surrogate cache.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Build an adaptive surrogate and store it as a cache file.
    Refine {
        #[arg(long)]
        problem: ProblemName,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        theta1: Option<f64>,
        /// Write refinement events as CSV.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

/// Failure of a validation check, reported with the numerical exit status.
#[derive(Debug, thiserror::Error)]
#[error("{0} check(s) failed")]
struct ChecksFailed(usize);

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Estimate { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let out = run(&cfg)?;
            write_outputs(&out)?;
            writeln!(
                std::io::stdout().lock(),
                "{}",
                serde_json::to_string_pretty(&out.report)?
            )?;
        }
        Command::Table {
            number,
            m,
            seed,
            delta_m,
            output,
        } => {
            let t = table(number, &TableOptions { m, seed, delta_m })?;
            match output {
                Some(p) => {
                    t.write_csv(std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?)?
                }
                None => t.write_csv(std::io::stdout().lock())?,
            }
        }
        Command::Validate { cache } => {
            let mut all = checks();
            all.extend(cache.map(|p| check_cache(&p)));
            let mut stdout = std::io::stdout().lock();
            for c in &all {
                writeln!(stdout, "{}", c.line())?;
            }
            let failed = all.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(ChecksFailed(failed).into());
            }
        }
        Command::Refine {
            problem,
            cache,
            order,
            theta1,
            events,
        } => {
            let mut cfg = RunConfig::new(problem, Method::MeGha, 1, 0);
            cfg.surrogate = Some(SurrogateKind::Adaptive);
            cfg.order = order;
            cfg.refinement.theta1 = theta1;
            cfg.output.cache = Some(cache);
            cfg.output.events = events;
            let cfg = cfg.resolve()?;
            let spec = cfg.problem_spec()?;
            let model = spec.model();
            let built = build_surrogate(&cfg, &spec, model.as_ref())?;
            let paths = &cfg.output;
            if let Some(p) = &paths.cache {
                std::fs::write(p, built.surrogate.to_cache().to_json()?)
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = &paths.events {
                let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
                megpc::refine::write_events_csv(&built.events, std::io::BufWriter::new(f))?;
            }
            writeln!(
                std::io::stdout().lock(),
                "{} elements, {} construction calls{}",
                built.surrogate.len(),
                built.construction_calls,
                if built.truncated { ", element cap reached" } else { "" }
            )?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<megpc::Error>().is_some_and(megpc::Error::is_numerical) || e.is::<ChecksFailed>());
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
