use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use storeaudit_cli::artifacts::{self, read_json, write_bytes, write_json};
use storeaudit_cli::pipeline::{self, RunOptions};
use storeaudit_cli::settings::{self, Overrides, CONFIG_ENV};
use storeaudit_core::config::AuditConfig;
use storeaudit_core::corpus::{ingest_index_at, load_corpus, save_corpus, Corpus};
use storeaudit_core::discovery::PluginVerdict;
use storeaudit_core::report::{
    build_report, diff_reports, render_diff, render_report, AuditReport, ConsistencyArtifact, Format, ProbeArtifact,
    ScopeArtifact,
};
use storeaudit_core::scoperisk::SeedLexicon;
use storeaudit_fixture::{generate_plan, serve_fixtures, FixturePlan, PlanProfile};
use url::Url;

#[derive(Parser)]
#[command(name = "audit", version, about = "Security audit of an LLM plugin store")]
struct Cli {
    /// JSON config file; flags win over its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// One JSON log line per event (including every fetch) on stderr.
    #[arg(long, global = true)]
    json_logs: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct NetFlags {
    #[arg(long)]
    max_concurrency: Option<u32>,
    #[arg(long)]
    per_host_delay_ms: Option<u64>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    retries: Option<u32>,
    /// Send all traffic to this fixture server instead of the real hosts.
    #[arg(long)]
    base_url: Option<Url>,
}

#[derive(Args, Clone, Default)]
struct ProbeFlags {
    /// Maximum endpoints probed per plugin.
    #[arg(long)]
    budget: Option<u32>,
    /// Keep token values in the transcript.
    #[arg(long)]
    no_redact: bool,
}

impl NetFlags {
    fn overrides(&self, probe: Option<&ProbeFlags>) -> Overrides {
        Overrides {
            max_concurrency: self.max_concurrency,
            per_host_delay_ms: self.per_host_delay_ms,
            timeout_ms: self.timeout_ms,
            retries: self.retries,
            base_url: self.base_url.clone(),
            probe_budget: probe.and_then(|p| p.budget),
            no_redact: probe.is_some_and(|p| p.no_redact),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert an NDJSON store index into a corpus file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long)]
        out: PathBuf,
        /// Fixed creation time (RFC 3339) for reproducible corpora.
        #[arg(long)]
        created_at: Option<DateTime<Utc>>,
    },
    /// Look for each plugin's manifest at its well-known and derived URLs.
    Discover {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for verbatim manifest bodies; defaults to `manifests/` next to `--out`.
        #[arg(long)]
        manifests: Option<PathBuf>,
        #[command(flatten)]
        net: NetFlags,
    },
    /// Replay synthesized API requests with no, leaked and fabricated tokens.
    Probe {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        manifests: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `transcript.jsonl` next to `--out`.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        net: NetFlags,
        #[command(flatten)]
        probe: ProbeFlags,
    },
    /// Compare store listings against their manifests.
    Consistency {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        manifests: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Categorize OAuth scopes by risk.
    Scopes {
        #[arg(long)]
        manifests: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Snapshot label is read from this corpus.
        #[arg(long, required_unless_present = "label")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
        /// Seed lexicon JSON replacing the built-in exemplars.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Aggregate stage artifacts into a report.
    Report {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        findings: PathBuf,
        #[arg(long)]
        scopes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: Format,
    },
    /// Percentage change of every shared metric between two reports.
    Diff {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: Format,
        /// Written to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a fixture plan until interrupted.
    ServeFixtures {
        #[arg(long)]
        plan: PathBuf,
        /// Defaults to the plan's listen port.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Generate a deterministic fixture plan.
    GenPlan {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "paper-tables")]
        profile: PlanProfile,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage in order, artifacts written into `--out`.
    RunAll {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reuse discovery and probe results when their inputs are unchanged.
        #[arg(long)]
        cached: bool,
        #[command(flatten)]
        net: NetFlags,
        #[command(flatten)]
        probe: ProbeFlags,
    },
}

fn init_logging(json: bool) {
    // per-fetch lines only in structured mode unless RUST_LOG asks for them
    let default = if json { "info" } else { "info,storeaudit::fetch=off" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| default.into());
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

/// Config failures exit with 2, everything else with 1.
enum Failure {
    Config(String),
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Fatal(e)
    }
}

fn config_for(file: Option<&Path>, overrides: Overrides) -> Result<AuditConfig, Failure> {
    settings::resolve(file, &overrides).map_err(|e| Failure::Config(e.to_string()))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent()
        .map(|p| p.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

fn corpus_at(path: &Path) -> Result<Corpus> {
    load_corpus(path).map_err(anyhow::Error::from)
}

async fn run(cli: Cli) -> Result<(), Failure> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Ingest {
            input,
            label,
            out,
            created_at,
        } => {
            let f = std::fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let corpus = ingest_index_at(std::io::BufReader::new(f), &label, created_at.unwrap_or_else(Utc::now))
                .with_context(|| format!("reading {}", input.display()))?;
            artifacts::ensure_parent(&out)?;
            save_corpus(&corpus, &out).map_err(anyhow::Error::from)?;
            println!(
                "{} records, {} malformed lines",
                corpus.records.len(),
                corpus.ingest_errors.len()
            );
        }
        Command::Discover {
            corpus,
            out,
            manifests,
            net,
        } => {
            let config = config_for(file, net.overrides(None))?;
            let corpus = corpus_at(&corpus)?;
            let run = pipeline::discover(&corpus, &config).await?;
            write_json(&out, &run.verdicts)?;
            let dir = manifests.unwrap_or_else(|| sibling(&out, artifacts::MANIFESTS));
            artifacts::write_manifests(&dir, &run.manifests)?;
            println!(
                "{} verdicts, {} manifests in {}",
                run.verdicts.len(),
                run.manifests.len(),
                dir.display()
            );
        }
        Command::Probe {
            corpus,
            manifests,
            out,
            transcript,
            net,
            probe,
        } => {
            let config = config_for(file, net.overrides(Some(&probe)))?;
            let corpus = corpus_at(&corpus)?;
            let docs = artifacts::read_manifests(&manifests)?;
            let run = pipeline::probe(&docs, &config).await?;
            let artifact = ProbeArtifact {
                snapshot_label: corpus.snapshot_label,
                plugins: run.plugins,
            };
            write_json(&out, &artifact)?;
            let tpath = transcript.unwrap_or_else(|| sibling(&out, artifacts::TRANSCRIPT));
            artifacts::write_transcript(&tpath, &run.transcript)?;
            println!(
                "{} plugins probed, {} requests",
                artifact.plugins.len(),
                run.transcript.len()
            );
        }
        Command::Consistency { corpus, manifests, out } => {
            let corpus = corpus_at(&corpus)?;
            let docs = artifacts::read_manifests(&manifests)?;
            let artifact = pipeline::consistency(&corpus, &docs);
            write_json(&out, &artifact)?;
            println!("{} findings", artifact.run.discrepancies.findings.len());
        }
        Command::Scopes {
            manifests,
            out,
            corpus,
            label,
            lexicon,
        } => {
            let label = match (label, corpus) {
                (Some(l), _) => l,
                (None, Some(c)) => corpus_at(&c)?.snapshot_label,
                (None, None) => unreachable!("clap requires one of --corpus/--label"),
            };
            let lexicon = match lexicon {
                Some(p) => pipeline::load_lexicon(&p)?,
                None => SeedLexicon::default(),
            };
            let docs = artifacts::read_manifests(&manifests)?;
            let artifact = pipeline::scopes(&label, &docs, &lexicon);
            write_json(&out, &artifact)?;
            println!("{} scoped plugins", artifact.run.assignments.len());
        }
        Command::Report {
            corpus,
            verdicts,
            outcomes,
            findings,
            scopes,
            out,
            format,
        } => {
            let corpus = corpus_at(&corpus)?;
            let verdicts: Vec<PluginVerdict> = read_json(&verdicts)?;
            let outcomes: ProbeArtifact = read_json(&outcomes)?;
            let findings: ConsistencyArtifact = read_json(&findings)?;
            let scopes: ScopeArtifact = read_json(&scopes)?;
            let report =
                build_report(&corpus, &verdicts, &outcomes, &findings, &scopes).map_err(anyhow::Error::from)?;
            write_bytes(&out, &render_report(&report, format))?;
        }
        Command::Diff {
            before,
            after,
            format,
            out,
        } => {
            let before: AuditReport = read_json(&before)?;
            let after: AuditReport = read_json(&after)?;
            let bytes = render_diff(&diff_reports(&before, &after), format);
            match out {
                Some(p) => write_bytes(&p, &bytes)?,
                None => std::io::stdout().write_all(&bytes).context("writing stdout")?,
            }
        }
        Command::ServeFixtures { plan, port } => {
            let text = std::fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let plan = FixturePlan::from_json(&text).with_context(|| format!("parsing {}", plan.display()))?;
            let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port.unwrap_or(plan.listen_port)));
            let server = serve_fixtures(&plan, addr).await.map_err(anyhow::Error::from)?;
            println!("serving {} plugins at {}", plan.plugins.len(), server.base_url());
            tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
            server.shutdown().await;
        }
        Command::GenPlan { seed, profile, out } => {
            let plan = generate_plan(seed, profile);
            plan.validate().map_err(anyhow::Error::from)?;
            write_bytes(&out, plan.to_json().as_bytes())?;
            println!("{} plugins ({}, seed {seed})", plan.plugins.len(), profile.label());
        }
        Command::RunAll {
            corpus,
            out,
            cached,
            net,
            probe,
        } => {
            let config = config_for(file, net.overrides(Some(&probe)))?;
            let summary = pipeline::run_all(&config, &corpus, &out, &RunOptions { cached })
                .await
                .map_err(|e| match e {
                    pipeline::RunError::Config(c) => Failure::Config(c.to_string()),
                    other => Failure::Fatal(other.into()),
                })?;
            println!("report written to {}", summary.path(artifacts::REPORT_JSON).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.json_logs);
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: starting runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
