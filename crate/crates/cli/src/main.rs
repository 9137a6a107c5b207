// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rtlscan_core::checker::CheckerConfig;
use rtlscan_core::llm::{build_provider, Catalog, FixtureStore, ProviderConfig, ProviderKind};
use rtlscan_core::pipeline::{
    compute_metrics, render_metrics, render_summary, run_scan, write_outputs, ContextMode, Labels, ScanConfig,
    ScanReport,
};
use rtlscan_core::{CweId, Variation};

#[derive(Parser)]
#[command(name = "rtlscan", version, about = "Asset-driven CWE scanning for Verilog RTL")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a design manifest for the selected CWEs.
    Scan(ScanArgs),
    /// Precision and false discovery rate of scan reports against labels.
    Metrics(MetricsArgs),
    /// Inspect a replay fixture directory.
    Fixtures {
        #[command(subcommand)]
        cmd: FixturesCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Http,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContextArg {
    Module,
    WholeFile,
}

#[derive(Args)]
struct ScanArgs {
    /// JSON manifest listing the design files.
    #[arg(long)]
    manifest: PathBuf,
    /// CWEs to look for (all supported ones when omitted).
    #[arg(long = "cwe", value_delimiter = ',', num_args = 1..)]
    cwes: Vec<CweId>,
    #[arg(long, default_value = "v0")]
    variation: Variation,
    /// Run every variation, one report directory each.
    #[arg(long)]
    matrix: bool,
    /// Provider settings file (JSON). The API key is read from the
    /// environment variable it names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    #[arg(long)]
    model: Option<String>,
    /// Replay source, or recording target with --record.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Store HTTP responses as replay fixtures.
    #[arg(long)]
    record: bool,
    /// Output directory for report.json, summary.txt and artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the populated assertions as SystemVerilog files.
    #[arg(long)]
    emit_sva: bool,
    /// Write a VCD waveform per counterexample.
    #[arg(long)]
    dump_vcd: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_depth: Option<u32>,
    /// Leave wall-clock data out of the report.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum, default_value = "module")]
    context: ContextArg,
    /// Concurrent units (0: one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct MetricsArgs {
    /// Scan report(s) to aggregate.
    #[arg(long = "report", num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    /// Print the table as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum FixturesCmd {
    /// List stored fixtures.
    Ls {
        #[arg(long)]
        fixtures: PathBuf,
    },
    /// Check that every fixture is well formed and keyed by its digest.
    Verify {
        #[arg(long)]
        fixtures: PathBuf,
    },
}

const DEFAULT_MODEL: &str = "scripted";

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn provider_config(a: &ScanArgs) -> Result<ProviderConfig> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<ProviderConfig>(p)?,
        None => ProviderConfig::replay(DEFAULT_MODEL, ""),
    };
    if a.config.is_none() {
        cfg.fixture_path = None;
    }
    match a.provider {
        Some(ProviderArg::Http) => cfg.provider = ProviderKind::Http,
        Some(ProviderArg::Replay) => cfg.provider = ProviderKind::Replay,
        None => {}
    }
    if let Some(m) = &a.model {
        cfg.model = m.clone();
    }
    if let Some(f) = &a.fixtures {
        cfg.fixture_path = Some(f.clone());
    }
    if a.record {
        if cfg.provider != ProviderKind::Http {
            bail!("--record needs the http provider");
        }
        cfg.record = true;
    }
    Ok(cfg)
}

fn scan_configs(a: &ScanArgs) -> Result<Vec<ScanConfig>> {
    let mut checker = CheckerConfig::default();
    if let Some(s) = a.seed {
        checker.seed = s;
    }
    if let Some(d) = a.max_depth {
        checker.max_depth = d;
    }
    let provider = provider_config(a)?;
    let cwes = if a.cwes.is_empty() {
        CweId::ALL.to_vec()
    } else {
        a.cwes.clone()
    };
    let variations = if a.matrix {
        Variation::ALL.to_vec()
    } else {
        vec![a.variation]
    };
    let cfgs: Vec<ScanConfig> = variations
        .into_iter()
        .map(|variation| ScanConfig {
            manifest: a.manifest.clone(),
            cwes: cwes.clone(),
            variation,
            provider: provider.clone(),
            checker: checker.clone(),
            emit_sva: a.emit_sva,
            dump_vcd: a.dump_vcd,
            context: match a.context {
                ContextArg::Module => ContextMode::Module,
                ContextArg::WholeFile => ContextMode::WholeFile,
            },
            deterministic: a.deterministic,
            jobs: a.jobs,
        })
        .collect();
    for c in &cfgs {
        c.validate()?;
    }
    Ok(cfgs)
}

fn scan(a: &ScanArgs) -> Result<u8> {
    let cfgs = scan_configs(a)?;
    let provider = build_provider(&cfgs[0].provider)?;
    let catalog = Catalog::builtin();
    let mut code = 0;
    for cfg in &cfgs {
        let outcome = run_scan(cfg, provider.as_ref(), &catalog)?;
        let report = &outcome.report;
        print!("{}", render_summary(report));
        for u in report.units.iter() {
            if let Some(e) = &u.error {
                eprintln!("error: {} CWE-{}: {:?}: {}", u.module, u.cwe, e.stage, e.message);
            }
        }
        if let Some(out) = &a.out {
            let dir = if a.matrix {
                out.join(cfg.variation.as_str())
            } else {
                out.clone()
            };
            let written = write_outputs(&dir, report, &outcome.artifacts)?;
            log::info!("wrote {} files under {}", written.len(), dir.display());
        }
        code = code.max(if report.failed_units() > 0 {
            2
        } else if report.flagged() > 0 {
            1
        } else {
            0
        });
    }
    Ok(code)
}

fn metrics(a: &MetricsArgs) -> Result<u8> {
    let reports: Vec<ScanReport> = a.reports.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let labels: Labels = read_json(&a.labels)?;
    let (table, diags) = compute_metrics(&reports, &labels);
    for d in &diags {
        eprintln!("{d}");
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&table)?);
    } else {
        print!("{}", render_metrics(&table));
    }
    Ok(0)
}

fn fixtures(cmd: &FixturesCmd) -> Result<u8> {
    match cmd {
        FixturesCmd::Ls { fixtures } => {
            for f in FixtureStore::new(fixtures).list()? {
                let turns = f.request["messages"].as_array().map_or(0, Vec::len);
                println!("{}  {}  {}  {turns} messages", f.digest, f.model, f.timestamp);
            }
            Ok(0)
        }
        FixturesCmd::Verify { fixtures } => {
            let store = FixtureStore::new(fixtures);
            let problems = store.verify()?;
            for p in &problems {
                println!("{p}");
            }
            let n = store.list().map_or(0, |l| l.len());
            eprintln!("{n} fixtures checked, {} problem(s)", problems.len());
            Ok(u8::from(!problems.is_empty()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Command::Scan(a) => scan(a),
        Command::Metrics(a) => metrics(a),
        Command::Fixtures { cmd } => fixtures(cmd),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
