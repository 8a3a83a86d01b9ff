//! `medis` operator tool.
//!
//! Exit codes: 0 success, 1 validation or operation failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use medis_core::export::ExportView;
use medis_core::intake::{read_bundle, validate_bundle};
use medis_core::lifecycle::GuardTable;
use medis_core::scenario::{self, Script};
use medis_core::service::{export_bytes, EnterpriseStore, ExportFormat};
use medis_core::store::LockFile;
use medis_core::time::{utc_day, ManualClock};
use medis_core::{fixtures, Config, Medis};

#[derive(Debug, Parser)]
#[command(name = "medis", version, about = "Clinical investigation monitoring service and tooling")]
struct Cli {
    /// TOML configuration file; MEDIS_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store directory, overriding the configuration.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Populate the stores with a fixture.
    Seed {
        #[arg(value_enum)]
        profile: Profile,
        /// Dossier count for the random profile.
        #[arg(short, long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Wipe a non-empty store first.
        #[arg(long)]
        force: bool,
        /// Print the fixture script instead of applying it.
        #[arg(long)]
        emit_script: bool,
    },
    /// Check a submission bundle offline.
    Validate {
        dir: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Replay a scenario script against an in-memory service.
    Simulate {
        script: PathBuf,
        /// Also print every dossier's event log.
        #[arg(long)]
        log: bool,
    },
    /// Export one dossier by protocol code or id.
    Export {
        code: String,
        #[arg(long, value_enum, default_value_t = Format::Xml)]
        format: Format,
    },
    /// Print the lifecycle guard table.
    GuardTable,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    Fig4,
    Fig5,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Xml,
    Extract,
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Failed(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("medis: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(m)) => {
            eprintln!("medis: {m}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(dir) = cli.data_dir {
        config.data_dir = Some(dir);
    }
    match cli.command {
        Command::Serve { listen } => serve(config, listen),
        Command::Seed { profile, n, seed, force, emit_script } => {
            let script = match profile {
                Profile::Fig4 => fixtures::fig4(),
                Profile::Fig5 => fixtures::fig5(),
                Profile::Random => fixtures::random(n, seed),
            };
            if emit_script {
                print!("{}", script.render());
                return Ok(ExitCode::SUCCESS);
            }
            seed_store(config, &script, force)
        }
        Command::Validate { dir, json } => validate(&config, &dir, json),
        Command::Simulate { script, log } => simulate(config, &script, log),
        Command::Export { code, format } => export(config, &code, format),
        Command::GuardTable => {
            print!("{}", GuardTable::build().to_tsv());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn data_dir(config: &Config) -> Result<PathBuf, Failure> {
    config
        .data_dir
        .clone()
        .ok_or_else(|| Failure::Usage("no store directory: pass --data-dir or set data_dir".into()))
}

fn serve(mut config: Config, listen: Option<String>) -> Outcome {
    if let Some(l) = listen {
        config.listen = l;
    }
    let _lock = match &config.data_dir {
        Some(dir) => Some(LockFile::acquire(dir)?),
        None => {
            eprintln!("medis: no data_dir configured, serving an in-memory store");
            None
        }
    };
    let addr = config.listen.clone();
    let medis = Arc::new(Medis::open(config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        eprintln!("medis: listening on {}", listener.local_addr()?);
        medis_server::serve(medis, listener).await
    })?;
    Ok(ExitCode::SUCCESS)
}

fn store_is_empty(dir: &Path) -> bool {
    let no_dossiers = fs::read_dir(dir.join("dossiers")).map_or(true, |mut d| d.next().is_none());
    no_dossiers && !dir.join(EnterpriseStore::FILE).exists()
}

fn wipe(dir: &Path) -> std::io::Result<()> {
    for sub in ["dossiers", "objects"] {
        match fs::remove_dir_all(dir.join(sub)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e),
            _ => {}
        }
    }
    match fs::remove_file(dir.join(EnterpriseStore::FILE)) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e),
        _ => Ok(()),
    }
}

fn seed_store(config: Config, script: &Script, force: bool) -> Outcome {
    let dir = data_dir(&config)?;
    let _lock = LockFile::acquire(&dir)?;
    if !store_is_empty(&dir) {
        if !force {
            return Err(Failure::Failed(format!("{} is not empty; use --force to replace it", dir.display())));
        }
        wipe(&dir)?;
    }
    let clock = Arc::new(ManualClock::new(utc_day(2008, 1, 1)));
    let medis = Medis::with_clock(config, clock.clone())?;
    let report = scenario::run(&medis, &clock, script)?;
    for (alias, id) in &report.aliases {
        let d = medis.repository().get(id).expect("seeded dossier exists");
        println!("{alias}\t{}\t{}", d.display_code(), d.state());
    }
    println!("seeded {} dossiers in {} steps", medis.repository().len(), report.steps);
    Ok(ExitCode::SUCCESS)
}

fn validate(config: &Config, dir: &Path, json: bool) -> Outcome {
    let bundle = read_bundle(dir)?;
    let medis = Medis::open(Config { data_dir: None, ..config.clone() })?;
    let report = validate_bundle(&bundle, medis.catalogs());
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(if report.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn simulate(config: Config, path: &Path, log: bool) -> Outcome {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let script = Script::parse(&text).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
    let clock = Arc::new(ManualClock::new(utc_day(2000, 1, 1)));
    let medis = Medis::with_clock(Config { data_dir: None, ..config }, clock.clone())?;
    let report = scenario::run(&medis, &clock, &script).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
    for (alias, id) in &report.aliases {
        let d = medis.repository().get(id).expect("simulated dossier exists");
        println!("{alias}\t{}\t{}", d.display_code(), d.state());
        if log {
            print!("{}", scenario::event_log(&d));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn export(config: Config, code: &str, format: Format) -> Outcome {
    let dir = data_dir(&config)?;
    let _lock = LockFile::acquire(&dir)?;
    let medis = Medis::open(config)?;
    let d = medis
        .repository()
        .resolve(code)
        .filter(|d| d.state().is_submitted())
        .ok_or_else(|| Failure::Failed(format!("no submitted dossier {code}")))?;
    let format = match format {
        Format::Xml => ExportFormat::Xml,
        Format::Extract => ExportFormat::Extract,
    };
    print!("{}", export_bytes(&d, format, ExportView::Full)?);
    Ok(ExitCode::SUCCESS)
}
