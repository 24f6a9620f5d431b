//! Recording and replaying histories.

use std::sync::Arc;
use std::time::Instant;

use super::primitive::{PrimitiveChange, PrimitiveError};
use super::registry::{MigrationContext, MigrationError, MigrationRegistry, MigrationReport};
use super::transaction::{execute_checked, execute_transaction, TransactionError, Workspace};
use super::{Bindings, ChangeRecord, CustomChange, History, HistoryError, OperationApplication};
use crate::catalog::{self, BindingError, ConstraintFailure};
use crate::metamodel::MetamodelSet;
use crate::model::{Model, ModelError};
use crate::par::{self, ExecMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown operation {0}")]
    UnknownOperation(String),
    #[error("invalid bindings: {}", join(.0))]
    Binding(Vec<BindingError>),
    #[error("constraints violated: {}", join(.0))]
    Constraints(Vec<ConstraintFailure>),
    #[error("unknown migration {0}")]
    UnknownMigration(String),
    #[error("invalid primitive change #{index}: {source}")]
    Primitive { index: usize, source: PrimitiveError },
    #[error(transparent)]
    Transaction(#[from] TransactionError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("record {index} ({label}) failed: {source}")]
    Replay {
        index: usize,
        label: String,
        source: Box<EngineError>,
    },
}

impl EngineError {
    /// Human-readable messages, one per underlying problem.
    pub fn messages(&self) -> Vec<String> {
        match self {
            EngineError::Binding(v) => v.iter().map(ToString::to_string).collect(),
            EngineError::Constraints(v) => v.iter().map(ToString::to_string).collect(),
            EngineError::Transaction(t) if !t.violations().is_empty() => {
                t.violations().iter().map(ToString::to_string).collect()
            }
            other => vec![other.to_string()],
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Applies one record to the workspace as a single transaction. Custom
/// migrations run only when `run_migrations` is set and there are models.
/// Returns the record with old values and positions filled in.
fn apply_record(
    ws: &mut Workspace,
    record: &ChangeRecord,
    registry: &MigrationRegistry,
    report: &mut MigrationReport,
    run_migrations: bool,
) -> Result<ChangeRecord, EngineError> {
    match record {
        ChangeRecord::Operation { operation } => {
            let desc = catalog::find(&operation.op_name)
                .ok_or_else(|| EngineError::UnknownOperation(operation.op_name.clone()))?;
            let resolved = match catalog::resolve_bindings(desc, &ws.metamodels, &operation.bindings, true) {
                Ok(r) => r,
                Err(errors) => {
                    // A constraint already violated by the bound part wins.
                    let partial = catalog::resolve_bindings(desc, &ws.metamodels, &operation.bindings, false);
                    if let Ok(partial) = partial {
                        let failures = catalog::check_constraints(desc, ws, &partial);
                        if !failures.is_empty() {
                            return Err(EngineError::Constraints(failures));
                        }
                    }
                    return Err(EngineError::Binding(errors));
                }
            };
            let failures = catalog::check_constraints(desc, ws, &resolved);
            if !failures.is_empty() {
                return Err(EngineError::Constraints(failures));
            }
            let bindings = resolved.to_bindings(&ws.metamodels);
            execute_checked(ws, |ws| (desc.execute)(ws, &resolved))?;
            Ok(ChangeRecord::Operation {
                operation: OperationApplication {
                    op_name: operation.op_name.clone(),
                    bindings,
                },
            })
        }
        ChangeRecord::Custom { custom } => {
            let migration = match &custom.migration_id {
                Some(id) => Some(
                    registry
                        .get(id)
                        .ok_or_else(|| EngineError::UnknownMigration(id.clone()))?,
                ),
                None => None,
            };
            let mut primitives = custom.primitives.clone();
            let mut primitive_error = None;
            let outcome = execute_checked(ws, |ws| {
                for (index, p) in primitives.iter_mut().enumerate() {
                    if let Err(source) = p.apply(&mut ws.metamodels) {
                        primitive_error = Some(EngineError::Primitive { index, source });
                        return Err(MigrationError::failed("invalid primitive change"));
                    }
                }
                if ws.models.is_empty() {
                    return Ok(());
                }
                if let (Some(run), true) = (&migration, run_migrations) {
                    let started = Instant::now();
                    let Workspace { metamodels, models } = ws;
                    run(&mut MigrationContext {
                        metamodels,
                        models,
                        report: &mut *report,
                    })?;
                    if let Some(id) = &custom.migration_id {
                        report.record_step(id, started.elapsed());
                    }
                }
                for m in &mut ws.models {
                    m.purge_deleted_features(&ws.metamodels);
                }
                Ok(())
            });
            if let Some(e) = primitive_error {
                return Err(e);
            }
            outcome?;
            Ok(ChangeRecord::Custom {
                custom: CustomChange {
                    primitives,
                    migration_id: custom.migration_id.clone(),
                },
            })
        }
    }
}

fn replay_metamodels(
    history: &History,
    upto: usize,
    registry: &MigrationRegistry,
) -> Result<MetamodelSet, EngineError> {
    let mut ws = Workspace::new(history.initial_metamodels()?);
    let mut report = MigrationReport::new();
    for (index, record) in history.releases()[..upto].iter().flatten().enumerate() {
        apply_record(&mut ws, record, registry, &mut report, false).map_err(|e| EngineError::Replay {
            index,
            label: record.label(),
            source: Box::new(e),
        })?;
    }
    Ok(ws.metamodels)
}

impl History {
    /// The metamodels as of the start of release `release` (0 is the
    /// initial snapshot; `releases().len()` includes the open release).
    pub fn metamodels_at(&self, release: usize, registry: &MigrationRegistry) -> Result<MetamodelSet, EngineError> {
        self.check_span(0, release)?;
        replay_metamodels(self, release, registry)
    }

    /// The metamodels after every record.
    pub fn current_metamodels(&self, registry: &MigrationRegistry) -> Result<MetamodelSet, EngineError> {
        replay_metamodels(self, self.releases().len(), registry)
    }
}

/// A recording session: the history, the evolving metamodels, and
/// optionally models that are migrated as records are appended.
#[derive(Debug, Clone)]
pub struct Recorder {
    history: History,
    workspace: Workspace,
    registry: Arc<MigrationRegistry>,
    report: MigrationReport,
}

impl Recorder {
    /// Opens a session positioned after the last record of `history`.
    pub fn new(history: History, registry: Arc<MigrationRegistry>) -> Result<Self, EngineError> {
        let metamodels = history.current_metamodels(&registry)?;
        Ok(Recorder {
            history,
            workspace: Workspace::new(metamodels),
            registry,
            report: MigrationReport::new(),
        })
    }

    /// Attaches models conforming to the current metamodels. Later records
    /// migrate them immediately.
    pub fn attach(&mut self, model: Model) -> Result<(), EngineError> {
        let mut candidate = self.workspace.clone();
        candidate.models.push(model);
        execute_transaction(&mut candidate, |_| Ok(()))?;
        self.workspace = candidate;
        Ok(())
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn into_history(self) -> History {
        self.history
    }

    pub fn metamodels(&self) -> &MetamodelSet {
        &self.workspace.metamodels
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn models(&self) -> &[Model] {
        &self.workspace.models
    }

    pub fn registry(&self) -> &MigrationRegistry {
        &self.registry
    }

    /// Output of migrations run on attached models.
    pub fn report(&self) -> &MigrationReport {
        &self.report
    }

    /// Checks bindings and constraints, runs the operation as a transaction
    /// on the metamodels and attached models, and records it.
    pub fn apply_operation(&mut self, name: &str, bindings: Bindings) -> Result<ChangeRecord, EngineError> {
        let record = ChangeRecord::Operation {
            operation: OperationApplication {
                op_name: name.to_string(),
                bindings,
            },
        };
        self.append(record)
    }

    /// Applies primitive changes and records them with an optional
    /// migration. The migration runs now only if models are attached.
    pub fn record_custom(
        &mut self,
        primitives: Vec<PrimitiveChange>,
        migration_id: Option<&str>,
    ) -> Result<ChangeRecord, EngineError> {
        let record = ChangeRecord::Custom {
            custom: CustomChange {
                primitives,
                migration_id: migration_id.map(str::to_string),
            },
        };
        self.append(record)
    }

    /// Appends an already formed record, applying it first.
    pub fn append(&mut self, record: ChangeRecord) -> Result<ChangeRecord, EngineError> {
        let completed = apply_record(&mut self.workspace, &record, &self.registry, &mut self.report, true)?;
        self.history.append(completed.clone());
        Ok(completed)
    }

    pub fn release(&mut self, force: bool) -> Result<(), EngineError> {
        Ok(self.history.release(force)?)
    }
}

/// Result of a migration run.
#[derive(Debug, Clone)]
pub struct MigrationOutcome {
    pub metamodels: MetamodelSet,
    pub models: Vec<Model>,
    pub report: MigrationReport,
}

/// Migrates models from the start of release `from` to the start of
/// release `to` by replaying records, each as one transaction.
///
/// `source` is the metamodel set the models were loaded against; it must
/// describe the same metamodels as the history at `from`. The inputs are
/// never modified; on failure nothing is returned.
pub fn migrate(
    models: &[Model],
    source: &MetamodelSet,
    history: &History,
    registry: &MigrationRegistry,
    from: usize,
    to: usize,
) -> Result<MigrationOutcome, EngineError> {
    let report = MigrationReport::new();
    history.check_span(from, to)?;
    let start = history.metamodels_at(from, registry)?;
    let models = rebase(models, source, &start)?;
    let mut ws = Workspace {
        metamodels: start,
        models,
    };
    let entry = ws.violations(false);
    if !entry.is_empty() {
        return Err(TransactionError::EntryNotConformant(entry).into());
    }
    let mut report = report;
    let skip: usize = history.releases()[..from].iter().map(Vec::len).sum();
    for (offset, record) in history.releases()[from..to].iter().flatten().enumerate() {
        apply_record(&mut ws, record, registry, &mut report, true).map_err(|e| EngineError::Replay {
            index: skip + offset,
            label: record.label(),
            source: Box::new(e),
        })?;
    }
    Ok(MigrationOutcome {
        metamodels: ws.metamodels,
        models: ws.models,
        report,
    })
}

/// Migrates independent inputs, in parallel when `mode` allows. Results are
/// in input order.
pub fn migrate_batch(
    inputs: &[Model],
    source: &MetamodelSet,
    history: &History,
    registry: &MigrationRegistry,
    from: usize,
    to: usize,
    mode: ExecMode,
) -> Vec<Result<MigrationOutcome, EngineError>> {
    par::map_collect(mode, inputs, |m| {
        migrate(std::slice::from_ref(m), source, history, registry, from, to)
    })
}

/// Re-expresses models over `target` when `source` differs from it.
fn rebase(models: &[Model], source: &MetamodelSet, target: &MetamodelSet) -> Result<Vec<Model>, EngineError> {
    if source == target {
        return Ok(models.to_vec());
    }
    models
        .iter()
        .map(|m| Ok(crate::model::from_doc(&m.to_doc(source, false), target)?))
        .collect()
}
