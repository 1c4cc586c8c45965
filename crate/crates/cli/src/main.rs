use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gamette_cli::analyze::{self, CommentOptions};
use gamette_cli::bot::BubbleText;
use gamette_cli::cohort::{run_cohort, CohortPlan, Manifest, Mix, Remote};
use gamette_cli::provenance::{write_json, Provenance};
use gamette_cli::simulate::{run_standalone, with_site, write_trajectory};
use gamette_cli::CliError;
use gamette_core::analysis::{BonferroniDivisor, FisherOptions, MonteCarlo, ProfileOptions};
use gamette_core::protocol::{DisruptionSite, Schedule, StudyTag};
use gamette_core::session::{serve, FileStore, ManualClock, ServiceConfig, SessionService};
use gamette_core::sim::ScenarioConfig;

#[derive(Parser)]
#[command(name = "gamette", version, about = "Supply-chain gamette simulator, session server and analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Site {
    None,
    Mn1,
    Mn2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Divisor {
    /// Number of SA levels
    Columns,
    /// Number of cells
    Cells,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bubbles {
    Silent,
    Template,
}

#[derive(Subcommand)]
enum Command {
    /// Run the network with every agent on its own policy.
    Simulate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 39)]
        weeks: u32,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Site::None)]
        disrupt: Site,
        #[arg(long)]
        out: PathBuf,
    },
    /// Play a cohort of bots through the session service.
    Cohort {
        #[arg(long, default_value = "study2")]
        study: StudyTag,
        /// Bot counts, e.g. follower=20,hoarder=20,reactor=20,spike=2,abandon=2
        #[arg(long)]
        mix: Mix,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Chance that a bot departs from its rule in a given week.
        #[arg(long, default_value_t = 0.1)]
        jitter: f64,
        #[arg(long, value_enum, default_value_t = Bubbles::Template)]
        bubbles: Bubbles,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Use a running server instead of an embedded one.
        #[arg(long)]
        connect: Option<SocketAddr>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the analysis pipeline on coded comments and/or session logs.
    Analyze {
        /// Use a bundled dataset instead of --players/--comments.
        #[arg(long, conflicts_with_all = ["players", "comments"])]
        fixture: Option<StudyTag>,
        #[arg(long, requires = "comments")]
        players: Option<PathBuf>,
        #[arg(long, requires = "players")]
        comments: Option<PathBuf>,
        /// Directory of session event logs to profile.
        #[arg(long)]
        logs: Option<PathBuf>,
        /// Cohort manifest with planted profiles, for scoring.
        #[arg(long, requires = "logs")]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Divisor::Columns)]
        bonferroni: Divisor,
        /// Seed for the Monte Carlo fallback of Fisher's test.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Compare the comment tables with the published figures (exit 2 on mismatch).
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Host sessions over newline-delimited JSON on TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: SocketAddr,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1800)]
        idle_timeout_secs: u64,
    },
}

fn command_line() -> String {
    std::env::args().skip(1).collect::<Vec<_>>().join(" ")
}

fn load_scenario(path: Option<&Path>) -> anyhow::Result<(ScenarioConfig, Option<Vec<u8>>)> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let text = String::from_utf8(bytes.clone()).context("scenario is not UTF-8")?;
            Ok((ScenarioConfig::from_toml_str(&text)?, Some(bytes)))
        }
        None => Ok((ScenarioConfig::default(), None)),
    }
}

fn simulate(scenario: Option<PathBuf>, weeks: u32, seed: Option<u64>, disrupt: Site, out: PathBuf) -> Result<(), CliError> {
    let (mut cfg, bytes) = load_scenario(scenario.as_deref())?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let schedule = Schedule::default();
    cfg = match disrupt {
        Site::None => cfg,
        Site::Mn1 => with_site(cfg, DisruptionSite::Mn1, &schedule),
        Site::Mn2 => with_site(cfg, DisruptionSite::Mn2, &schedule),
    };
    let reports = run_standalone(&cfg, weeks).map_err(anyhow::Error::from)?;
    let mut prov = Provenance::new(command_line(), Some(cfg.seed));
    if let (Some(p), Some(b)) = (&scenario, &bytes) {
        prov = prov.with_input(p.display().to_string(), b);
    }
    write_trajectory(&out, &prov, &reports)?;
    println!("{} weeks written to {}", reports.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cohort(
    study: StudyTag,
    mix: Mix,
    seed: u64,
    jitter: f64,
    bubbles: Bubbles,
    scenario: Option<PathBuf>,
    connect: Option<SocketAddr>,
    out: PathBuf,
) -> Result<(), CliError> {
    let schedule = Schedule::default();
    let bubbles = match bubbles {
        Bubbles::Silent => BubbleText::Silent,
        Bubbles::Template => BubbleText::Template,
    };
    let plan = CohortPlan::from_mix(study, seed, mix, jitter, bubbles, &schedule);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut prov = Provenance::new(command_line(), Some(seed));
    let manifest = match connect {
        Some(addr) => run_cohort(&Remote(addr), &plan, &schedule)?,
        None => {
            let (cfg, bytes) = load_scenario(scenario.as_deref())?;
            if let (Some(p), Some(b)) = (&scenario, &bytes) {
                prov = prov.with_input(p.display().to_string(), b);
            }
            let store = FileStore::open(out.join("logs")).map_err(anyhow::Error::from)?;
            let config = ServiceConfig { scenario: cfg, schedule: schedule.clone(), ..ServiceConfig::default() };
            // A frozen clock keeps event logs identical across reruns.
            let svc = SessionService::with_clock(store, config, Arc::new(ManualClock::new(0)))
                .map_err(anyhow::Error::from)?;
            run_cohort(&Arc::new(svc), &plan, &schedule)?
        }
    };
    write_json(&out, "manifest.json", &prov, &manifest)?;
    let done = manifest.sessions.len() - manifest.failures();
    println!("{done}/{} sessions ran; manifest at {}", manifest.sessions.len(), out.join("manifest.json").display());
    for e in manifest.sessions.iter().filter(|e| e.error.is_some()) {
        eprintln!("session {} (seed {}): {}", e.session, e.seed, e.error.as_deref().unwrap_or_default());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_analysis(
    fixture: Option<StudyTag>,
    players: Option<PathBuf>,
    comments: Option<PathBuf>,
    logs: Option<PathBuf>,
    manifest: Option<PathBuf>,
    bonferroni: Divisor,
    seed: u64,
    check: bool,
    out: PathBuf,
) -> Result<(), CliError> {
    let mut prov = Provenance::new(command_line(), Some(seed));
    let schedule = Schedule::default();
    let text = match (fixture, &players, &comments) {
        (Some(study), _, _) => {
            let (p, c) = analyze::fixture(study);
            prov = prov.with_input(format!("fixture:{study}"), format!("{p}{c}").as_bytes());
            Some((p.to_string(), c.to_string()))
        }
        (None, Some(p), Some(c)) => {
            prov = prov.with_file(p)?.with_file(c)?;
            let read = |path: &PathBuf| std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()));
            Some((read(p)?, read(c)?))
        }
        _ => None,
    };
    if text.is_none() && logs.is_none() {
        return Err(CliError::Input(anyhow!("nothing to analyze: pass --fixture, --players/--comments or --logs")));
    }
    let mut failures = Vec::new();
    if let Some((p, c)) = text {
        let opts = CommentOptions {
            divisor: match bonferroni {
                Divisor::Columns => BonferroniDivisor::Columns,
                Divisor::Cells => BonferroniDivisor::Cells,
            },
            fisher: FisherOptions { monte_carlo: Some(MonteCarlo { seed, ..MonteCarlo::default() }), ..FisherOptions::default() },
            schedule: schedule.clone(),
        };
        let (ds, report) = analyze::analyze_comments(&p, &c, &opts).map_err(|e| anyhow!("comments: {e}"))?;
        analyze::write_comment_outputs(&out, &prov, &ds, &report, &schedule)?;
        print!("{}", analyze::summarize_comments(&report));
        if check {
            let study = analyze::single_study(&ds).ok_or_else(|| anyhow!("--check needs players from a single study"))?;
            for line in analyze::check_published(&report, study) {
                println!("{} {}: {}", if line.pass { "PASS" } else { "FAIL" }, line.name, line.detail);
                if !line.pass {
                    failures.push(line.name);
                }
            }
        }
    }
    if let Some(dir) = logs {
        let manifest = manifest.as_deref().map(Manifest::load).transpose()?;
        let decision_logs = analyze::load_decision_logs(&dir)?;
        let run = analyze::profile_logs(decision_logs, manifest.as_ref(), &schedule, &ProfileOptions::default())
            .map_err(|e| anyhow!("logs in {}: {e}", dir.display()))?;
        analyze::write_profile_outputs(&out, &prov, &run)?;
        print!("{}", analyze::summarize_profiles(&run));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join(", ")))
    }
}

fn serve_sessions(listen: SocketAddr, scenario: Option<PathBuf>, data: PathBuf, idle_timeout_secs: u64) -> Result<(), CliError> {
    let (cfg, _) = load_scenario(scenario.as_deref())?;
    let store = FileStore::open(&data).map_err(anyhow::Error::from)?;
    let config = ServiceConfig { scenario: cfg, idle_timeout_ms: idle_timeout_secs * 1000, ..ServiceConfig::default() };
    let svc = Arc::new(SessionService::new(store, config).map_err(anyhow::Error::from)?);
    let listener = TcpListener::bind(listen).with_context(|| format!("binding {listen}"))?;
    eprintln!("listening on {}, logs in {}", listener.local_addr().map_err(anyhow::Error::from)?, data.display());
    let sweeper = Arc::clone(&svc);
    thread::spawn(move || loop {
        thread::sleep(Duration::from_secs(30));
        for id in sweeper.expire_idle() {
            eprintln!("session {id} idle; evicted from memory");
        }
    });
    serve(listener, svc).context("accept loop")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, weeks, seed, disrupt, out } => simulate(scenario, weeks, seed, disrupt, out),
        Command::Cohort { study, mix, seed, jitter, bubbles, scenario, connect, out } => {
            cohort(study, mix, seed, jitter, bubbles, scenario, connect, out)
        }
        Command::Analyze { fixture, players, comments, logs, manifest, bonferroni, seed, check, out } => {
            run_analysis(fixture, players, comments, logs, manifest, bonferroni, seed, check, out)
        }
        Command::Serve { listen, scenario, data, idle_timeout_secs } => {
            serve_sessions(listen, scenario, data, idle_timeout_secs)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
