//! `fm` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fm_core::{
    search, EvaluationMatrix, FacetValueRef, Query, SearchParams, Session, TrainingConfig,
};

use crate::http::{self, AppState};
use crate::repl;
use crate::workspace::{parse_ingest, Workspace};

#[derive(Debug, Parser)]
#[command(
    name = "fm",
    version,
    about = "Faceted folksonomy search with per-reader joint meaning"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: ServiceConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ServiceConfig {
    /// Data directory.
    #[arg(long, global = true, env = "FM_DATA_DIR", default_value = "fm-data")]
    pub data_dir: PathBuf,
    /// Match threshold on the aggregate dissimilarity.
    #[arg(long, global = true, default_value_t = fm_core::DEFAULT_THETA)]
    pub theta: f64,
    /// Weight of lexical matches in the result score.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub alpha: f64,
    /// Weight of joint-meaning support in the result score.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub beta: f64,
    /// Ontology used until one is loaded with `fm ontology`.
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    /// Address for `fm serve`.
    #[arg(long, global = true, default_value = "127.0.0.1:8080")]
    pub listen: String,
}

impl ServiceConfig {
    pub fn params(&self) -> SearchParams {
        SearchParams {
            theta: self.theta,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn open(&self) -> Result<Workspace> {
        Workspace::open(&self.data_dir, self.params(), self.ontology.as_deref())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest JSON-lines files of resources, assignments, associations or
    /// taxonomy records (kinds may be mixed).
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Add facet groups and values from a JSON-lines taxonomy file.
    Taxonomy { file: PathBuf },
    /// Load an ontology. Several files are concatenated in order; with none,
    /// `--ontology` or else the bundled upper ontology is used.
    Ontology { files: Vec<PathBuf> },
    /// Learn matcher weights from labelled concept pairs.
    Train {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = TrainingConfig::default().learning_rate)]
        learning_rate: f64,
        #[arg(long, default_value_t = TrainingConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainingConfig::default().seed)]
        seed: u64,
    },
    /// Rebuild indexes, check ontology groundings and print statistics.
    Index,
    /// Run one query in a throwaway session.
    Query {
        #[arg(long)]
        text: String,
        /// Facet filter `group=value`; repeatable.
        #[arg(long = "filter")]
        filters: Vec<FacetValueRef>,
        #[arg(long, default_value = "reader")]
        reader: String,
    },
    /// Interactive session reading commands from stdin: query TEXT,
    /// commit GROUP=VALUE, retract GROUP, show-jm, commitments, quit.
    Session {
        #[arg(long, default_value = "reader")]
        reader: String,
    },
    /// Score an evaluation matrix.
    Eval {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Run the HTTP service.
    Serve,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn run(cli: Cli, stdin: impl io::BufRead, mut out: impl Write) -> Result<()> {
    let cfg = &cli.config;
    match cli.command {
        Command::Ingest { files } => {
            let mut ws = cfg.open()?;
            for f in files {
                let batch = parse_ingest(&read(&f)?).with_context(|| format!("{}", f.display()))?;
                let s = ws
                    .ingest(batch)
                    .with_context(|| format!("{}", f.display()))?;
                writeln!(
                    out,
                    "{}: {} resource(s), {} assignment(s), {} association(s), {} taxonomy entr(ies)",
                    f.display(),
                    s.resources,
                    s.assignments,
                    s.associations,
                    s.taxonomy
                )?;
            }
        }
        Command::Taxonomy { file } => {
            let mut ws = cfg.open()?;
            let records = fm_core::records::parse_jsonl(&read(&file)?)
                .with_context(|| format!("{}", file.display()))?;
            let added = ws.apply_taxonomy(records)?;
            writeln!(out, "taxonomy: {added} new entr(ies)")?;
        }
        Command::Ontology { files } => {
            let mut ws = cfg.open()?;
            let source = if !files.is_empty() {
                files
                    .iter()
                    .map(|f| read(f))
                    .collect::<Result<Vec<_>>>()?
                    .join("\n")
            } else if let Some(p) = &cfg.ontology {
                read(p)?
            } else {
                fm_core::fixtures::UPPER_ONTOLOGY.to_string()
            };
            let o = ws.load_ontology(&source)?;
            writeln!(
                out,
                "ontology: {} concept(s), depth {}, version {}",
                o.len(),
                o.depth(),
                o.version
            )?;
        }
        Command::Train {
            pairs,
            learning_rate,
            epochs,
            seed,
        } => {
            let mut ws = cfg.open()?;
            let config = TrainingConfig {
                learning_rate,
                epochs,
                seed,
            };
            let w = ws.train(&read(&pairs)?, &config)?;
            let [w1, w2, w3, w4] = w.weights();
            writeln!(
                out,
                "weights v{}: w1={w1:.6} w2={w2:.6} w3={w3:.6} w4={w4:.6}",
                w.version()
            )?;
        }
        Command::Index => {
            let ws = cfg.open()?;
            ws.persist()?;
            let stats = ws.stats();
            writeln!(out, "{}", serde_json::to_string_pretty(&stats)?)?;
            let (ungrounded, dangling) = ws.grounding_report();
            for v in ungrounded {
                writeln!(
                    out,
                    "warning: facet value {v} has no single grounding concept"
                )?;
            }
            for v in dangling {
                writeln!(out, "warning: grounding names unknown facet value {v}")?;
            }
        }
        Command::Query {
            text,
            filters,
            reader,
        } => {
            let ws = cfg.open()?;
            let mut session = Session::open("adhoc", reader, ws.view());
            let query = Query { text, filters };
            let outcome = search(&mut session, &query)?;
            out.write_all(repl::render_outcome(&outcome).as_bytes())?;
        }
        Command::Session { reader } => {
            let ws = cfg.open()?;
            let id = ws.next_session_id()?;
            let mut session = Session::open(id.clone(), reader, ws.view());
            ws.save_session(session.record())?;
            eprintln!("session {id}");
            repl::run(&mut session, stdin, &mut out, |s| {
                ws.save_session(s.record())
            })?;
        }
        Command::Eval { matrix } => {
            let m: EvaluationMatrix = serde_json::from_str(&read(&matrix)?)
                .with_context(|| format!("{}", matrix.display()))?;
            let contributions = m.weighted_contributions()?;
            writeln!(out, "task: {}", m.task)?;
            for (c, x) in m.criteria.iter().zip(&contributions) {
                writeln!(
                    out,
                    "  {:<28} score {:>5.2}  weight {:.2}  weighted {:.4}",
                    c.name, c.score, c.weight, x
                )?;
            }
            writeln!(out, "average: {:.4}", m.average_score()?)?;
            writeln!(out, "weighted: {:.4}", m.weighted_score()?)?;
        }
        Command::Serve => {
            let state = AppState::new(cfg.open()?)?;
            let listen = cfg.listen.clone();
            tokio::runtime::Runtime::new()?.block_on(http::serve(state, &listen))?;
        }
    }
    Ok(())
}

/// Parses `args` and runs the command. Usage errors exit with 2, failures
/// with 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    match run(cli, stdin, stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
