use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use qbypass::oracle::{oracle_check, ORACLE_ALPHAS};
use qbypass_cli::config::{builtin, BackendChoice, Experiment, SweepConfig};
use qbypass_cli::fit::{fit_rows, fit_table};
use qbypass_cli::output::{read_csv, sidecar, write_outputs};
use qbypass_cli::sweep::run_sweep_with_threads;

#[derive(Parser)]
#[command(name = "qbypass", version, about = "Sweeps, backend cross-checks and fits for the qubit-bypass library")]
struct Cli {
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config's backend: dyad, fock or both.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<BackendChoice>,
    /// Fill the runtime_ms column (makes the CSV differ between runs).
    #[arg(long, global = true)]
    record_runtime: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the sweep described by a TOML config.
    Sweep { config: PathBuf },
    /// Run the checked-in config of an experiment (fig2a, fig2b, ...).
    Figure { id: String },
    /// Compare the dyad engine with the Fock oracle on every protocol.
    OracleCheck,
    /// Refit a sweep CSV and compare against the reference laws.
    Fit { csv: PathBuf },
}

fn parse_backend(s: &str) -> std::result::Result<BackendChoice, String> {
    s.parse().map_err(|e: qbypass_cli::HarnessError| e.to_string())
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn sweep(cli: &Cli, mut config: SweepConfig) -> Result<bool> {
    if let Some(b) = cli.backend {
        config.backend = b;
    }
    log::info!("{}: {} rows", config.experiment, config.row_count());
    let result = run_sweep_with_threads(&config, cli.threads)?;
    let (csv, json) = write_outputs(&result, &cli.out_dir, cli.record_runtime)?;
    let failed = result.rows.iter().filter(|r| !r.ok()).count();
    println!("wrote {} ({} rows, {failed} failed) and {}", csv.display(), result.rows.len(), json.display());
    let fits = sidecar(&result).fits;
    if !fits.is_empty() {
        print!("{}", fit_table(&fits));
    }
    Ok(result.all_ok())
}

fn oracle(cli: &Cli) -> Result<bool> {
    let report = pool(cli.threads)?.install(|| oracle_check(&ORACLE_ALPHAS))?;
    for c in &report.cases {
        println!(
            "{:<22} alpha {:<4} eta {:<4} p {:<4} dim {:>4}  dyad {:.12}  fock {:.12}  diff {:.2e}",
            c.protocol, c.alpha, c.eta, c.p, c.dim, c.dyad, c.fock, c.discrepancy()
        );
    }
    println!("max discrepancy {:.3e} (tolerance {:.0e})", report.max_discrepancy(), report.tolerance);
    std::fs::create_dir_all(&cli.out_dir)?;
    let path = cli.out_dir.join("oracle-check.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report.passed())
}

fn fit(path: &Path) -> Result<bool> {
    let rows = read_csv(path).with_context(|| format!("reading {}", path.display()))?;
    let fits = fit_rows(&rows);
    if fits.is_empty() {
        bail!("{}: no fit model covers these rows", path.display());
    }
    print!("{}", fit_table(&fits));
    Ok(fits.iter().all(|f| f.error.is_none()))
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Sweep { config } => sweep(cli, SweepConfig::load(config)?),
        Cmd::Figure { id } => {
            let e: Experiment = id.parse()?;
            sweep(cli, SweepConfig::parse(builtin(e))?)
        }
        Cmd::OracleCheck => oracle(cli),
        Cmd::Fit { csv } => fit(csv),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
