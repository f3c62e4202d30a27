use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use llcartan_core::scenarios::{catalog_json, emit_report, list_scenarios, registry, Format, Scenario, VerificationReport};

#[derive(Parser, Debug)]
#[command(name = "llcartan", version, about = "Numerical verification of Cartan connections on lightlike hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the registered scenarios and their parameters.
    List {
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Run one scenario.
    Run {
        scenario: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run every scenario; options a scenario does not accept are skipped for it.
    VerifyAll {
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args, Debug, Default, Clone)]
struct RunOpts {
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
    /// Any other scenario parameter, e.g. `--set family=0`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, f64)>,
    /// Tolerance for every residual bound that is not an expected failure.
    #[arg(long)]
    tol: Option<f64>,
    /// json, csv or text.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Record wall-clock time per scenario (makes reports run-dependent).
    #[arg(long)]
    timings: bool,
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    m: Option<u32>,
    c: Option<f64>,
    samples: Option<u32>,
    seed: Option<u64>,
    #[serde(alias = "fd-step")]
    fd_step: Option<f64>,
    tol: Option<f64>,
    format: Option<String>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    timings: Option<bool>,
    #[serde(default)]
    set: BTreeMap<String, f64>,
}

fn parse_assignment(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().replace('-', "_"), v))
}

impl RunOpts {
    fn merged(mut self) -> Result<Self> {
        let Some(path) = &self.config else { return Ok(self) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ConfigFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        self.m = self.m.or(cfg.m);
        self.c = self.c.or(cfg.c);
        self.samples = self.samples.or(cfg.samples);
        self.seed = self.seed.or(cfg.seed);
        self.fd_step = self.fd_step.or(cfg.fd_step);
        self.tol = self.tol.or(cfg.tol);
        self.format = self.format.or(cfg.format);
        self.out = self.out.or(cfg.out);
        self.jobs = self.jobs.or(cfg.jobs);
        self.timings = self.timings || cfg.timings.unwrap_or(false);
        let given: Vec<String> = self.set.iter().map(|(k, _)| k.clone()).collect();
        self.set.extend(cfg.set.into_iter().filter(|(k, _)| !given.contains(k)));
        Ok(self)
    }

    fn overrides(&self) -> BTreeMap<String, f64> {
        let mut o: BTreeMap<String, f64> = self.set.iter().cloned().collect();
        let mut put = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                o.insert(k.to_string(), v);
            }
        };
        put("m", self.m.map(f64::from));
        put("c", self.c);
        put("samples", self.samples.map(f64::from));
        put("seed", self.seed.map(|s| s as f64));
        put("fd_step", self.fd_step);
        o
    }

    fn format(&self) -> Result<Format> {
        Ok(self.format.as_deref().unwrap_or("text").parse::<Format>()?)
    }
}

fn run_one(s: &Scenario, overrides: &BTreeMap<String, f64>, opts: &RunOpts) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut report = s.run(overrides).map_err(|e| anyhow!("{}: {e}", s.name))?;
    if let Some(t) = opts.tol {
        report.override_tolerance(t);
    }
    if opts.timings {
        report.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

fn run_many(scenarios: &[Scenario], opts: &RunOpts, strict: bool) -> Result<Vec<Result<VerificationReport>>> {
    let all = opts.overrides();
    let job = |s: &Scenario| {
        let overrides = if strict { all.clone() } else { all.iter().filter(|(k, _)| s.accepts(k)).map(|(k, v)| (k.clone(), *v)).collect() };
        run_one(s, &overrides, opts)
    };
    let jobs = opts.jobs.unwrap_or(1).max(1);
    if jobs == 1 {
        return Ok(scenarios.iter().map(job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(|| scenarios.par_iter().map(job).collect()))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(scenarios: Vec<Scenario>, opts: RunOpts, strict: bool) -> Result<ExitCode> {
    let opts = opts.merged()?;
    let format = opts.format()?;
    let results = run_many(&scenarios, &opts, strict)?;
    let mut reports = Vec::new();
    let mut errors = 0;
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                eprintln!("error: {e:#}");
                errors += 1;
            }
        }
    }
    let mut out = output(&opts.out)?;
    emit_report(&reports, format, &mut out)?;
    out.flush()?;
    let passed = reports.iter().filter(|r| r.all_passed()).count();
    eprintln!("{passed}/{} scenarios passed", scenarios.len());
    for r in &reports {
        for c in r.failures() {
            eprintln!("  failed: {} / {} (residual {:e}, tolerance {:e})", r.scenario, c.id, c.residual, c.tolerance);
        }
    }
    Ok(if errors > 0 {
        ExitCode::from(2)
    } else if passed == reports.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn list(format: &str) -> Result<ExitCode> {
    let entries = list_scenarios();
    let mut out = BufWriter::new(io::stdout().lock());
    match format {
        "json" => catalog_json(&entries, &mut out)?,
        "text" => {
            for e in &entries {
                writeln!(out, "{:<22} {}", e.name, e.summary)?;
                for p in &e.parameters {
                    let flag = match p.name {
                        "seed" | "samples" | "fd_step" | "m" | "c" => format!("--{}", p.name.replace('_', "-")),
                        other => format!("--set {other}="),
                    };
                    writeln!(out, "    {flag:<16} default {:<10} {}", p.default, p.help)?;
                }
            }
        }
        other => return Err(anyhow!("unknown format `{other}`")),
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List { format } => list(&format),
        Command::Run { scenario, opts } => match registry().into_iter().find(|s| s.name == scenario) {
            Some(s) => execute(vec![s], opts, true),
            None => Err(anyhow!("unknown scenario `{scenario}` (see `llcartan list`)")),
        },
        Command::VerifyAll { opts } => execute(registry(), opts, false),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
