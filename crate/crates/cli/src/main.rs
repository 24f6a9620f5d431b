//! `coevo`: batch access to the engine.
//!
//! Exit codes: 0 success, 1 user or engine error, 2 internal error.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use coevo_core::case;
use coevo_core::history::{Binding, Bindings, EngineError, PrimitiveChange};
use coevo_core::metamodel::load_metamodel_set;
use coevo_core::model::load_model;
use coevo_core::workload::inverse_parity;
use coevo_core::{catalog, check_conformance, migrate, History, MetamodelSet, MigrationRegistry, Model, Recorder};

#[derive(Parser)]
#[command(name = "coevo", version, about = "Coupled metamodel and model evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create, extend, release and replay histories.
    #[command(subcommand)]
    History(HistoryCommand),
    /// Reusable coupled operations.
    #[command(subcommand)]
    Op(OpCommand),
    /// Check and compare models.
    #[command(subcommand)]
    Model(ModelCommand),
    /// The statemachine extraction.
    #[command(subcommand)]
    Case(CaseCommand),
    /// Measurements.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Subcommand)]
enum HistoryCommand {
    /// A new history over the given metamodel files.
    Init {
        #[arg(long = "metamodel", required = true)]
        metamodels: Vec<PathBuf>,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// Seal the open release.
    Release {
        #[arg(long)]
        history: PathBuf,
        /// Release even if the open release is empty.
        #[arg(long)]
        force: bool,
        /// Defaults to rewriting `--history`.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Record an operation or a custom change.
    Apply(ApplyArgs),
    /// Migrate a model through the history.
    Migrate {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        from: usize,
        /// Defaults to the last release, open records included.
        #[arg(long)]
        to: Option<usize>,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    history: PathBuf,
    /// Catalog operation to apply.
    #[arg(long, conflicts_with_all = ["migration", "changes"])]
    name: Option<String>,
    /// `parameter=value`; repeatable.
    #[arg(long = "bind", value_parser = parse_binding)]
    bindings: Vec<(String, Binding)>,
    /// Custom change: id of a registered migration.
    #[arg(long)]
    migration: Option<String>,
    /// Custom change: JSON array of primitive changes.
    #[arg(long)]
    changes: Option<PathBuf>,
    /// Defaults to rewriting `--history`.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OpCommand {
    /// Same as `history apply`.
    Apply(ApplyArgs),
    /// The operation catalog as JSON.
    List,
}

#[derive(Args)]
struct MetamodelSource {
    #[arg(long = "metamodel")]
    metamodels: Vec<PathBuf>,
    /// Use the metamodels of a history instead.
    #[arg(long, conflicts_with = "metamodels")]
    history: Option<PathBuf>,
    /// Release whose metamodels are used; defaults to the current ones.
    #[arg(long, requires = "history")]
    release: Option<usize>,
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Report conformance violations.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        source: MetamodelSource,
    },
    /// Compare two models up to element identity.
    Diff {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        source: MetamodelSource,
    },
}

#[derive(Subcommand)]
enum CaseCommand {
    /// Extract the statemachine of a java model.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// Generate a java model in the state pattern.
    Gen {
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        per_state: usize,
        #[arg(long, default_value_t = 0)]
        pads: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Forward reads against inverse queries, as JSON.
    Inverse {
        #[arg(long, default_value_t = 10_000)]
        size: usize,
        #[arg(long, default_value_t = 10_000)]
        queries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_binding(s: &str) -> Result<(String, Binding), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s}"))?;
    let value = match v {
        "true" => Binding::Bool(true),
        "false" => Binding::Bool(false),
        _ => match v.parse::<i64>() {
            Ok(i) => Binding::Int(i),
            Err(_) => Binding::Str(v.to_string()),
        },
    };
    Ok((k.to_string(), value))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_history(path: &Path) -> Result<History> {
    History::load(&read(path)?).with_context(|| format!("loading history {}", path.display()))
}

fn engine_error(e: EngineError) -> anyhow::Error {
    anyhow::anyhow!(e.messages().join("\n"))
}

fn registry() -> MigrationRegistry {
    case::registry()
}

fn metamodels(source: &MetamodelSource) -> Result<MetamodelSet> {
    match &source.history {
        Some(h) => {
            let history = load_history(h)?;
            let release = source.release.unwrap_or(history.releases().len());
            history.metamodels_at(release, &registry()).map_err(engine_error)
        }
        None => {
            if source.metamodels.is_empty() {
                bail!("give --metamodel files or --history");
            }
            let texts = source.metamodels.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
            Ok(load_metamodel_set(&texts)?)
        }
    }
}

fn load(path: &Path, mms: &MetamodelSet) -> Result<Model> {
    load_model(&read(path)?, mms).with_context(|| format!("loading model {}", path.display()))
}

fn apply(args: ApplyArgs) -> Result<()> {
    let history = load_history(&args.history)?;
    let mut rec = Recorder::new(history, Arc::new(registry())).map_err(engine_error)?;
    let record = match (&args.name, &args.migration, &args.changes) {
        (Some(name), _, _) => {
            let bindings: Bindings = args.bindings.into_iter().collect();
            rec.apply_operation(name, bindings).map_err(engine_error)?
        }
        (None, None, None) => bail!("give --name, or --migration and/or --changes"),
        (None, migration, changes) => {
            let primitives: Vec<PrimitiveChange> = match changes {
                Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => Vec::new(),
            };
            rec.record_custom(primitives, migration.as_deref())
                .map_err(engine_error)?
        }
    };
    eprintln!("recorded {}", record.label());
    write(args.output.as_ref().unwrap_or(&args.history), &rec.history().save())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::History(HistoryCommand::Init { metamodels, output }) => {
            let texts = metamodels.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
            let mms = load_metamodel_set(&texts)?;
            write(&output, &History::create(&mms)?.save())
        }
        Command::History(HistoryCommand::Release { history, force, output }) => {
            let mut h = load_history(&history)?;
            h.release(force)?;
            write(output.as_ref().unwrap_or(&history), &h.save())
        }
        Command::History(HistoryCommand::Apply(args)) | Command::Op(OpCommand::Apply(args)) => apply(args),
        Command::History(HistoryCommand::Migrate {
            history,
            model,
            from,
            to,
            output,
        }) => {
            let h = load_history(&history)?;
            let registry = registry();
            let source = h.metamodels_at(from, &registry).map_err(engine_error)?;
            let input = load(&model, &source)?;
            let to = to.unwrap_or(h.releases().len());
            let out = migrate(&[input], &source, &h, &registry, from, to).map_err(engine_error)?;
            print!("{}", out.report.text());
            write(&output, &out.models[0].save(&out.metamodels))
        }
        Command::Op(OpCommand::List) => {
            println!("{}", serde_json::to_string_pretty(catalog())?);
            Ok(())
        }
        Command::Model(ModelCommand::Check { model, source }) => {
            let mms = metamodels(&source)?;
            let m = load(&model, &mms)?;
            let violations = check_conformance(&m, &mms);
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                bail!("{} conformance violations", violations.len());
            }
            Ok(())
        }
        Command::Model(ModelCommand::Diff { left, right, source }) => {
            let mms = metamodels(&source)?;
            let (a, b) = (load(&left, &mms)?, load(&right, &mms)?);
            let (ca, cb) = (a.canonical_form(&mms), b.canonical_form(&mms));
            if ca == cb {
                println!("isomorphic");
                return Ok(());
            }
            let (la, lb): (Vec<&str>, Vec<&str>) = (ca.lines().collect(), cb.lines().collect());
            for i in 0..la.len().max(lb.len()) {
                match (la.get(i), lb.get(i)) {
                    (Some(x), Some(y)) if x == y => {}
                    (x, y) => {
                        if let Some(x) = x {
                            println!("{}:{} - {x}", left.display(), i + 1);
                        }
                        if let Some(y) = y {
                            println!("{}:{} + {y}", right.display(), i + 1);
                        }
                    }
                }
            }
            bail!("models differ");
        }
        Command::Case(CaseCommand::Run { model, output }) => {
            let mms = case::metamodels();
            let program = load(&model, &mms)?;
            let run = case::run_case(&program, &mms).map_err(engine_error)?;
            print!("{}", run.outcome.report.text());
            write(&output, &run.statemachine.save(&run.outcome.metamodels))
        }
        Command::Case(CaseCommand::Gen {
            states,
            per_state,
            pads,
            seed,
            output,
        }) => {
            let mms = case::metamodels();
            write(&output, &case::gen_fixture(states, per_state, pads, seed).save(&mms))
        }
        Command::Bench(BenchCommand::Inverse { size, queries, seed }) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&inverse_parity(size, queries, seed))?
            );
            Ok(())
        }
        Command::Serve { port, host } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().context("listen address")?;
            eprintln!("listening on {addr}");
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(coevo_service::serve(addr))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(2),
    }
}
