use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use proxipair::harness::{
    builtin, generate_instance, run_verification, write_summary, write_trace_csv, Family, HarnessError, InstanceFile,
    LoadedInstance, RunOverrides, RunSummary, VerifyOptions,
};
use proxipair::solvers::SolveResult;

const OUT_ENV: &str = "PROXIPAIR_OUT";

#[derive(Parser)]
#[command(
    name = "proxipair",
    version,
    about = "Best proximity points and pairs on convex pairs in lp spaces"
)]
struct Cli {
    /// Output directory (PROXIPAIR_OUT takes precedence)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Solver tolerance, overriding the run configs
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver configuration and write its trace and summary
    Solve {
        /// Instance file, or the name of a built-in instance
        instance: String,
        /// Run to execute (all runs when omitted)
        #[arg(long)]
        run: Option<String>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Run the verification suite and write a JSON report
    Verify {
        instance: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Generate a random instance with a known separation
    Gen {
        #[arg(long, value_parser = clap::value_parser!(Family))]
        family: Family,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        gap: Option<f64>,
        /// Print the instance instead of writing it
        #[arg(long)]
        stdout: bool,
    },
    /// Time every run of the given instances, solving concurrently
    Bench {
        /// Instances (defaults to the built-ins)
        instances: Vec<String>,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

enum Outcome {
    Ok,
    Failed,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.unwrap_or_else(|| PathBuf::from("proxipair-out")),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn read_instance(arg: &str) -> Result<InstanceFile, HarnessError> {
    let path = Path::new(arg);
    if path.exists() {
        InstanceFile::from_path(path)
    } else {
        builtin(arg).ok_or_else(|| HarnessError::UnknownInstance(arg.to_string()))
    }
}

fn write_run(
    dir: &Path,
    stem: &str,
    loaded: &LoadedInstance,
    summary: &RunSummary,
    res: &SolveResult,
) -> Result<(), HarnessError> {
    let dim = loaded.instance.space().dim();
    write_trace_csv(create(&dir.join(format!("{stem}.trace.csv")))?, &res.trace, dim)?;
    write_summary(create(&dir.join(format!("{stem}.summary.json")))?, summary)
}

fn describe(res: &SolveResult, summary: &RunSummary) -> String {
    if res.converged() {
        format!(
            "{} converged in {} iterations, residual {:.3e}",
            summary.run, summary.iterations, summary.residual
        )
    } else {
        format!(
            "{} did not converge after {} iterations, best gap {:.3e}",
            summary.run, summary.iterations, summary.best_gap
        )
    }
}

fn solve(cli: &Cli, instance: &str, run: Option<&str>, samples: usize) -> Result<Outcome, HarnessError> {
    let loaded = read_instance(instance)?.load(samples, cli.seed.unwrap_or(0))?;
    let overrides = overrides(cli);
    let runs = match run {
        Some(name) => vec![loaded.run(name)?.clone()],
        None => loaded.file.runs.clone(),
    };
    let dir = out_dir(cli.out.clone());
    let mut outcome = Outcome::Ok;
    for run in &runs {
        let res = loaded.solve_run(run, &overrides, samples)?;
        let summary = RunSummary::new(loaded.name(), run, &res);
        write_run(
            &dir,
            &format!("{}.{}", loaded.name(), run.name),
            &loaded,
            &summary,
            &res,
        )?;
        println!("{}", describe(&res, &summary));
        if !res.converged() {
            outcome = Outcome::Failed;
        }
    }
    Ok(outcome)
}

fn overrides(cli: &Cli) -> RunOverrides {
    RunOverrides {
        tol: cli.tol,
        max_iter: cli.max_iter,
        seed: cli.seed,
    }
}

fn verify(cli: &Cli, instance: &str, samples: usize) -> Result<Outcome, HarnessError> {
    let seed = cli.seed.unwrap_or(0);
    let loaded = read_instance(instance)?.load(samples, seed)?;
    let report = run_verification(
        &loaded,
        &VerifyOptions {
            samples,
            seed,
            overrides: overrides(cli),
        },
    )?;
    let path = out_dir(cli.out.clone()).join(format!("{}.verify.json", loaded.name()));
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    for c in &report.checks {
        let flag = if c.passed { "pass" } else { "FAIL" };
        let degenerate = if c.degenerate { " (degenerate)" } else { "" };
        println!("{flag} {:<40} {:.3e}{degenerate}", c.name, c.worst_deviation);
    }
    println!("report written to {}", path.display());
    Ok(if report.passed { Outcome::Ok } else { Outcome::Failed })
}

fn bench(cli: &Cli, instances: &[String], repeat: usize, samples: usize) -> Result<Outcome, HarnessError> {
    let names: Vec<String> = if instances.is_empty() {
        proxipair::harness::BUILTIN_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        instances.to_vec()
    };
    let seed = cli.seed.unwrap_or(0);
    let loaded = names
        .iter()
        .map(|n| read_instance(n)?.load(samples, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<_> = loaded
        .iter()
        .flat_map(|l| l.file.runs.iter().map(move |r| (l, r)))
        .flat_map(|(l, r)| (0..repeat.max(1)).map(move |k| (l, r, k)))
        .collect();
    let dir = out_dir(cli.out.clone()).join("bench");
    let overrides = overrides(cli);
    let rows = jobs
        .par_iter()
        .map(|&(l, r, k)| {
            let start = Instant::now();
            let res = l.solve_run(r, &overrides, samples)?;
            let elapsed = start.elapsed();
            let summary = RunSummary::new(l.name(), r, &res);
            write_run(&dir, &format!("{}.{}.{k}", l.name(), r.name), l, &summary, &res)?;
            Ok((summary, elapsed))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    println!(
        "{:<40} {:<24} {:>10} {:>12} converged",
        "instance", "run", "iterations", "ms"
    );
    let mut outcome = Outcome::Ok;
    for (s, elapsed) in &rows {
        println!(
            "{:<40} {:<24} {:>10} {:>12.3} {}",
            s.instance,
            s.run,
            s.iterations,
            elapsed.as_secs_f64() * 1e3,
            s.converged
        );
        if !s.converged {
            outcome = Outcome::Failed;
        }
    }
    Ok(outcome)
}

fn execute(cli: &Cli) -> Result<Outcome, HarnessError> {
    match &cli.command {
        Command::Solve { instance, run, samples } => solve(cli, instance, run.as_deref(), *samples),
        Command::Verify { instance, samples } => verify(cli, instance, *samples),
        Command::Gen {
            family,
            dim,
            p,
            gap,
            stdout,
        } => {
            let file = generate_instance(*family, cli.seed.unwrap_or(0), *dim, *p, *gap)?;
            let text = file.to_json()?;
            if *stdout {
                print!("{text}");
            } else {
                let path = out_dir(cli.out.clone()).join(format!("{}.json", file.name));
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir).map_err(io_err(dir))?;
                }
                fs::write(&path, text).map_err(io_err(&path))?;
                println!("{}", path.display());
            }
            Ok(Outcome::Ok)
        }
        Command::Bench {
            instances,
            repeat,
            samples,
        } => bench(cli, instances, *repeat, *samples),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
