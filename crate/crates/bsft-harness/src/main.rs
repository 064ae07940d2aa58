use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bsft::rng::Stream;
use bsft::signal::save_signal;
use bsft_harness::config::ExperimentConfig;
use bsft_harness::experiment::{output_paths, run_experiment, Summary, VERSION};
use bsft_harness::generators::gen_signal;
use bsft_harness::oracle_check::OracleSuite;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bsft", version = VERSION, about = "Block-sparse Fourier transform experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write one generated signal (trial 0 of the configuration) in the binary signal format.
    Gen(Common),
    /// Run the configured trials and write records and a summary.
    Run(Common),
    /// Run the configuration at several sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize << 14, 1 << 16, 1 << 18, 1 << 20])]
        ns: Vec<usize>,
    },
    /// Compare every fast routine with its dense oracle.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Random cases per check.
        #[arg(long, default_value_t = 10)]
        cases: usize,
    },
}

/// Flags override values read from `--config`.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    k0: Option<String>,
    #[arg(long)]
    k1: Option<String>,
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    /// desk or paper.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    tolerance_scale: Option<String>,
    #[arg(long)]
    filter_order: Option<String>,
    #[arg(long)]
    success_constant: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("n", &self.n),
            ("k0", &self.k0),
            ("k1", &self.k1),
            ("snr", &self.snr),
            ("eps", &self.eps),
            ("delta", &self.delta),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("generator", &self.generator),
            ("noise", &self.noise),
            ("preset", &self.preset),
            ("tolerance_scale", &self.tolerance_scale),
            ("filter_order", &self.filter_order),
            ("success_constant", &self.success_constant),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        Ok(cfg)
    }
}

enum Failure {
    Usage(anyhow::Error),
    Check(anyhow::Error),
}

fn usage<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn check<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Check)
}

fn log_config(cfg: &ExperimentConfig) {
    eprintln!("# bsft {VERSION}");
    for line in cfg.to_text().lines() {
        eprintln!("# {line}");
    }
}

fn print_summaries(summaries: &[Summary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Gen(common) => {
            let cfg = usage(common.resolve())?;
            usage(cfg.validate())?;
            log_config(&cfg);
            let out = usage(cfg.out.clone().context("gen needs --out"))?;
            let g = check(gen_signal(&cfg.signal_spec(), &Stream::new(cfg.seed).index(0).child("gen")).map_err(Into::into))?;
            check(save_signal(&g.signal, &out).with_context(|| format!("writing {}", out.display())))?;
            println!("{}", serde_json::json!({ "n": cfg.n, "mu2": g.mu2, "snr": g.snr.is_finite().then_some(g.snr) }));
        }
        Cmd::Run(common) => {
            let cfg = usage(common.resolve())?;
            usage(cfg.validate())?;
            log_config(&cfg);
            let res = check(run_experiment(&cfg, &[]))?;
            check(print_summaries(&res.summaries))?;
            report_outputs(&cfg);
        }
        Cmd::Sweep { common, ns } => {
            let mut cfg = usage(common.resolve())?;
            if let Some(&first) = ns.first() {
                cfg.n = first;
            }
            for &n in &ns {
                usage(ExperimentConfig { n, ..cfg.clone() }.validate())?;
            }
            log_config(&cfg);
            let res = check(run_experiment(&cfg, &ns))?;
            check(print_summaries(&res.summaries))?;
            report_outputs(&cfg);
        }
        Cmd::OracleCheck { common, cases } => {
            let cfg = usage(common.resolve())?;
            log_config(&cfg);
            let suite = OracleSuite {
                n: cfg.n,
                k1: cfg.k1,
                cases,
                seed: cfg.seed,
                tolerance_scale: cfg.tolerance_scale,
                filter_order: cfg.filter_order.unwrap_or(OracleSuite::default().filter_order),
            };
            usage(suite.validate())?;
            let checks = check(suite.run())?;
            let mut failed = Vec::new();
            for c in &checks {
                let note = c.note.as_deref().map(|s| format!("  ({s})")).unwrap_or_default();
                println!(
                    "{:<34} {:<4} max_error {:.3e}  tolerance {:.3e}{note}",
                    c.name,
                    if c.pass { "ok" } else { "FAIL" },
                    c.max_error,
                    c.tolerance
                );
                if !c.pass {
                    failed.push(c.name.clone());
                }
            }
            if !failed.is_empty() {
                return Err(Failure::Check(anyhow::anyhow!("failed checks: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn report_outputs(cfg: &ExperimentConfig) {
    if let Some(out) = &cfg.out {
        let (jsonl, csv, timing) = output_paths(out);
        eprintln!("# wrote {}, {}, {}", jsonl.display(), csv.display(), timing.display());
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
