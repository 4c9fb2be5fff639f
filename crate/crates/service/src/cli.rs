//! `kbts` command line.
//!
//! Exit codes: 0 success, 1 no diagnosis / rejected import, 2 usage error or
//! the rule base could not be loaded.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kbts_core::agent::Agent;
use kbts_core::fuzzy::{BeepPattern, FuzzyEngine};
use kbts_core::inference::forward_chain;
use kbts_core::rule_model::{self, RuleBase};
use kbts_core::{Fact, RuleStore};

use crate::config::ServiceConfig;
use crate::fetch::HttpFetcher;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NO_RESULT: u8 = 1;
pub const EXIT_FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "kbts", version, about = "Knowledge-based PC troubleshooter")]
pub struct Cli {
    /// Service configuration file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Rule-base file; overrides `rulebase_path` from the config.
    #[arg(long, global = true)]
    pub rulebase: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve,
    /// Forward-chain over the given facts and print diagnoses.
    Diagnose {
        #[arg(long = "fact", required = true)]
        facts: Vec<String>,
    },
    /// Classify a POST beep.
    Beep(BeepArgs),
    /// List, import or export the rule base.
    Rules {
        action: RulesAction,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Knowledge acquisition agent.
    Agent {
        #[command(subcommand)]
        action: AgentAction,
    },
}

#[derive(Debug, Args)]
pub struct BeepArgs {
    /// Beep length in seconds.
    #[arg(long, allow_negative_numbers = true)]
    pub seconds: f64,
    /// The beep repeats without end.
    #[arg(long)]
    pub repeating: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RulesAction {
    List,
    Import,
    Export,
}

#[derive(Debug, Subcommand)]
pub enum AgentAction {
    /// Run one acquisition pass now.
    Sync,
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("kbts: {message}");
    ExitCode::from(EXIT_FAILURE)
}

impl Cli {
    fn service_config(&self) -> Result<ServiceConfig, String> {
        let mut config = match &self.config {
            Some(path) => ServiceConfig::load(path).map_err(|e| e.to_string())?,
            None => ServiceConfig::default(),
        };
        if let Some(path) = &self.rulebase {
            config.rulebase_path = path.clone();
        }
        Ok(config)
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let config = match cli.service_config() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Serve => serve(config),
        Command::Diagnose { facts } => diagnose(&config, &facts, &mut out),
        Command::Beep(args) => beep(&config, &args, &mut out),
        Command::Rules { action, file } => rules(&config, action, file, &mut out),
        Command::Agent {
            action: AgentAction::Sync,
        } => agent_sync(&config, &mut out),
    }
}

fn serve(config: ServiceConfig) -> ExitCode {
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail(e),
    };
    match runtime.block_on(crate::server::serve(config, Arc::new(HttpFetcher))) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn load_rulebase(config: &ServiceConfig) -> Result<RuleBase, String> {
    rule_model::load(&config.rulebase_path)
        .map_err(|e| format!("{}: {e}", config.rulebase_path.display()))
}

fn diagnose(config: &ServiceConfig, facts: &[String], out: &mut dyn Write) -> ExitCode {
    let rulebase = match load_rulebase(config) {
        Ok(rb) => rb,
        Err(e) => return fail(e),
    };
    let facts = facts.iter().filter_map(|text| Fact::new("fact", text));
    let diagnoses = forward_chain(&rulebase, facts);
    for d in &diagnoses {
        let _ = writeln!(out, "{} -> {}", d.conclusion, d.solution);
    }
    if diagnoses.is_empty() {
        ExitCode::from(EXIT_NO_RESULT)
    } else {
        ExitCode::SUCCESS
    }
}

fn beep(config: &ServiceConfig, args: &BeepArgs, out: &mut dyn Write) -> ExitCode {
    if args.seconds.is_nan() || args.seconds < 0.0 {
        eprintln!(
            "kbts: --seconds must be a non-negative number, got {}",
            args.seconds
        );
        return ExitCode::from(EXIT_FAILURE);
    }
    let engine = match config.membership() {
        Ok(m) => FuzzyEngine::new(m),
        Err(e) => return fail(e),
    };
    match engine.diagnose_beep(&BeepPattern::new(args.seconds, args.repeating)) {
        Ok(d) => {
            let _ = writeln!(out, "{}: {}", d.linguistic, d.message);
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn rules(
    config: &ServiceConfig,
    action: RulesAction,
    file: Option<PathBuf>,
    out: &mut dyn Write,
) -> ExitCode {
    match action {
        RulesAction::List => {
            let rulebase = match load_rulebase(config) {
                Ok(rb) => rb,
                Err(e) => return fail(e),
            };
            print_table(&rulebase, out);
            ExitCode::SUCCESS
        }
        RulesAction::Export => {
            let rulebase = match load_rulebase(config) {
                Ok(rb) => rb,
                Err(e) => return fail(e),
            };
            match file {
                Some(path) => match rule_model::save(&rulebase, &path) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(format!("{}: {e}", path.display())),
                },
                None => {
                    let _ = out.write_all(rule_model::to_canonical_json(&rulebase).as_bytes());
                    ExitCode::SUCCESS
                }
            }
        }
        RulesAction::Import => {
            let Some(path) = file else {
                return fail("rules import requires --file <path>");
            };
            let imported = match rule_model::load(&path) {
                Ok(rb) => rb,
                Err(e) => {
                    eprintln!(
                        "kbts: import rejected, rule base unchanged: {}: {e}",
                        path.display()
                    );
                    return ExitCode::from(EXIT_NO_RESULT);
                }
            };
            match rule_model::save(&imported, &config.rulebase_path) {
                Ok(()) => {
                    let _ = writeln!(
                        out,
                        "imported {} rules (version {})",
                        imported.len(),
                        imported.version()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(format!("{}: {e}", config.rulebase_path.display())),
            }
        }
    }
}

fn print_table(rulebase: &RuleBase, out: &mut dyn Write) {
    let header = ["IF", "AND", "THEN", "SOLUTION"];
    let rows: Vec<[&str; 4]> = rulebase
        .rules()
        .iter()
        .map(|r| {
            [
                &*r.condition_a,
                &*r.condition_b,
                &*r.conclusion,
                &*r.solution,
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header));
    for row in rows {
        let _ = writeln!(out, "{}", line(row));
    }
}

fn agent_sync(config: &ServiceConfig, out: &mut dyn Write) -> ExitCode {
    if let Err(e) = config.agent.validate_for_sync() {
        return fail(format!(
            "agent sync: {e} (set agent.sources in the config file)"
        ));
    }
    let store = match RuleStore::open(&config.rulebase_path, config.seed_if_missing) {
        Ok(s) => Arc::new(s),
        Err(e) => return fail(format!("{}: {e}", config.rulebase_path.display())),
    };
    let mut agent_config = config.agent.clone();
    agent_config.log_path = Some(config.agent_log_path());
    let agent = Agent::new(store, agent_config, Arc::new(HttpFetcher));
    let report = match agent.sync_now() {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let _ = writeln!(
        out,
        "sync started {} finished {}",
        report.started_at.to_rfc3339(),
        report.finished_at.to_rfc3339()
    );
    for s in &report.sources {
        if s.fetched {
            let _ = writeln!(
                out,
                "  {}: candidates {}, added {}, duplicates {}, malformed {}, conflicts {}",
                s.url, s.candidates, s.added, s.skipped_duplicates, s.malformed, s.conflicts
            );
        } else {
            let _ = writeln!(
                out,
                "  {}: fetch failed: {}",
                s.url,
                s.error.as_deref().unwrap_or("unknown error")
            );
        }
    }
    let _ = writeln!(out, "added: {}", report.added());
    let _ = writeln!(out, "skipped duplicates: {}", report.skipped_duplicates());
    let _ = writeln!(out, "malformed: {}", report.malformed());
    ExitCode::SUCCESS
}
