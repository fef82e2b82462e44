use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iterlab_core::parallel::configured_threads;
use iterlab_core::pdecheck::EquationTag;
use iterlab_core::report::{execute_with_threads, rerun, Outcome, Plan, Range, RunManifest, RunOutput};
use iterlab_core::{Error, Hurst, ProcessModel};

/// Exit status for malformed command lines and invalid parameters.
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "iterlab", version, about = "Verification suites for iterated and subordinated processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct OutDir {
    /// Directory receiving reports, tables and the run manifest.
    #[arg(long, default_value = "iterlab-out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Residual checks of the governing equations.
    VerifyPde {
        /// Comma-separated equation letters or names, e.g. `a,f,l`.
        #[arg(long, value_delimiter = ',', value_parser = parse_tag, required_unless_present = "all", conflicts_with = "all")]
        tags: Vec<EquationTag>,
        /// Run every registered equation.
        #[arg(long)]
        all: bool,
        /// Override the relative residual tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the spatial grid, as `a:b:step`.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        grid: Option<Range>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Two-sample KS checks of the equalities in distribution.
    VerifyIdentities {
        /// Run every shipped case (the default).
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also run perturbed cases that must be rejected.
        #[arg(long)]
        negative_control: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Density table on a grid, as CSV.
    Density {
        /// Model, e.g. `cc`, `j:n=1,H=0.25`, `itfbm:H1=0.6,H2=0.4`.
        #[arg(long, value_parser = parse_model)]
        model: ProcessModel,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Points as `a:b:step` or a single value.
        #[arg(long, value_parser = parse_range, default_value = "-3:3:0.1", allow_hyphen_values = true)]
        x: Range,
        #[command(flatten)]
        out: OutDir,
    },
    /// Reproducible draws of a marginal.
    Sample {
        #[arg(long, value_parser = parse_model)]
        model: ProcessModel,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Closed-form even moments of an iterated chain against Monte Carlo.
    Moments {
        /// Hurst exponents, outermost first.
        #[arg(long, value_delimiter = ',', value_parser = parse_hurst, required = true)]
        chain: Vec<Hurst>,
        /// Half-orders `k` of `E X^{2k}`.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Re-run a manifest and check that every number is reproduced.
    Rerun {
        manifest: PathBuf,
        /// Where to write the re-run outputs; nothing is written if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_tag(s: &str) -> Result<EquationTag, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> Result<Range, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ProcessModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hurst(s: &str) -> Result<Hurst, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: '{s}'"))?;
    Hurst::new(v).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Unsupported(_) => Failure::Usage(e.to_string()),
            e => Failure::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

/// Writes through a temporary file and a rename, so readers never see a
/// partial file.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(contents.as_bytes())?;
    f.sync_all()?;
    fs::rename(tmp, dir.join(name))
}

fn write_outputs(dir: &Path, output: &RunOutput, manifest: Option<&RunManifest>) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for t in &output.tables {
        write_atomic(dir, &t.name, &t.contents)?;
    }
    write_atomic(dir, "reports.jsonl", &output.jsonl())?;
    if let Some(m) = manifest {
        write_atomic(dir, "manifest.json", &m.to_json())?;
    }
    Ok(())
}

fn summary_line(r: &iterlab_core::report::ReportRecord) -> String {
    let mut line = format!("{:<13} {:<12} {:<26}", r.verdict.as_str(), r.kind, r.tag);
    if let Some(v) = r.max_rel_residual {
        line.push_str(&format!(" max_rel={v:.3e}"));
    }
    if let (Some(d), Some(p)) = (r.ks_statistic, r.p_value) {
        line.push_str(&format!(" ks={d:.4e} p={p:.4}"));
    }
    line.push_str(&format!(" {}ms", r.runtime_ms));
    line
}

fn print_moments(output: &RunOutput) {
    println!(
        "{:>4}  {:>24}  {:>14}  {:>12}  {:>7}  verdict",
        "k", "closed form", "monte carlo", "std error", "z"
    );
    for r in &output.records {
        let d = &r.details;
        let k = r.params["k"].as_u64().unwrap_or(0);
        let closed = match d["closed_form"].as_f64() {
            Some(v) => format!("{v:.10e}"),
            None => format!("exp({:.10})", d["log_closed_form"].as_f64().unwrap_or(f64::NAN)),
        };
        let opt = |key: &str, prec: usize| {
            d[key]
                .as_f64()
                .map_or("-".to_string(), |v| format!("{v:.prec$e}"))
        };
        println!(
            "{k:>4}  {closed:>24}  {:>14}  {:>12}  {:>7}  {}",
            opt("mc_estimate", 6),
            opt("std_error", 3),
            d["z"].as_f64().map_or("-".to_string(), |z| format!("{z:.2}")),
            r.verdict.as_str()
        );
    }
}

fn report(plan: &Plan, output: &RunOutput) {
    match plan {
        Plan::Moments { .. } => print_moments(output),
        Plan::Density { .. } | Plan::Sample { .. } => {
            for t in &output.tables {
                print!("{}", t.contents);
            }
        }
        _ => {
            for r in &output.records {
                println!("{}", summary_line(r));
            }
        }
    }
}

fn run_plan(plan: Plan, out: &Path) -> Result<u8, Failure> {
    plan.validate()?;
    let threads = configured_threads()?;
    let output = execute_with_threads(&plan, threads)?;
    let manifest = RunManifest::new(&plan, &output, threads);
    write_outputs(out, &output, Some(&manifest))?;
    report(&plan, &output);
    let code = output.exit_code();
    if !matches!(plan, Plan::Density { .. } | Plan::Sample { .. }) {
        let n = |o: Outcome| output.records.iter().filter(|r| r.verdict == o).count();
        eprintln!(
            "{} pass, {} fail, {} inconclusive; outputs in {}",
            n(Outcome::Pass),
            n(Outcome::Fail),
            n(Outcome::Inconclusive),
            out.display()
        );
    }
    Ok(code as u8)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::VerifyPde {
            tags,
            all,
            tol,
            grid,
            out,
        } => {
            let tags = if all { EquationTag::ALL.to_vec() } else { tags };
            run_plan(Plan::VerifyPde { tags, tol, grid }, &out.out)
        }
        Command::VerifyIdentities {
            all: _,
            samples,
            seed,
            negative_control,
            out,
        } => run_plan(
            Plan::VerifyIdentities {
                samples,
                seed,
                negative_control,
            },
            &out.out,
        ),
        Command::Density { model, t, x, out } => run_plan(Plan::Density { model, t, x }, &out.out),
        Command::Sample {
            model,
            t,
            n,
            seed,
            out,
        } => run_plan(Plan::Sample { model, t, n, seed }, &out.out),
        Command::Moments {
            chain,
            k,
            t,
            samples,
            seed,
            out,
        } => run_plan(
            Plan::Moments {
                hursts: chain,
                k,
                t,
                samples,
                seed,
            },
            &out.out,
        ),
        Command::Rerun { manifest, out } => {
            let text = fs::read_to_string(&manifest)?;
            let m = RunManifest::from_json(&text)?;
            let threads = configured_threads()?;
            let outcome = rerun(&m, threads)?;
            if let Some(dir) = out {
                write_outputs(&dir, &outcome.output, None)?;
            }
            if outcome.reproduced {
                println!("reproduced {} ({} checks, digest {})", m.command, m.verdicts.len(), m.digest);
                Ok(0)
            } else {
                println!("mismatch: manifest digest {}, re-run digest {}", m.digest, outcome.digest);
                Ok(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
