//! Custom migrations, registered as host code under stable identifiers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::metamodel::{ClassifierId, FeatureId, MetamodelError, MetamodelSet, ResolveError};
use crate::model::{Model, ModelError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MigrationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Metamodel(#[from] MetamodelError),
    #[error("{0}")]
    Failed(String),
}

impl MigrationError {
    pub fn failed(message: impl Into<String>) -> Self {
        MigrationError::Failed(message.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTiming {
    pub name: String,
    pub millis: f64,
}

/// Text and timing output of one migration run.
#[derive(Debug, Clone)]
pub struct MigrationReport {
    started: Instant,
    steps: Vec<StepTiming>,
    lines: Vec<String>,
}

impl Default for MigrationReport {
    fn default() -> Self {
        Self::new()
    }
}

impl MigrationReport {
    pub fn new() -> Self {
        MigrationReport {
            started: Instant::now(),
            steps: Vec::new(),
            lines: Vec::new(),
        }
    }

    pub fn record_step(&mut self, name: &str, elapsed: Duration) {
        self.steps.push(StepTiming {
            name: name.to_string(),
            millis: elapsed.as_secs_f64() * 1000.0,
        });
    }

    pub fn steps(&self) -> &[StepTiming] {
        &self.steps
    }

    pub fn push_line(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Milliseconds since the run started.
    pub fn elapsed_millis(&self) -> f64 {
        self.started.elapsed().as_secs_f64() * 1000.0
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

/// What a custom migration sees: the metamodels after the change group's
/// primitives, and the (softened) models to migrate.
pub struct MigrationContext<'a> {
    pub metamodels: &'a MetamodelSet,
    pub models: &'a mut [Model],
    pub report: &'a mut MigrationReport,
}

impl MigrationContext<'_> {
    pub fn class(&self, fq_name: &str) -> Result<ClassifierId, MigrationError> {
        Ok(self.metamodels.resolve_class(fq_name)?)
    }

    pub fn feature(&self, fq_name: &str) -> Result<FeatureId, MigrationError> {
        Ok(self.metamodels.resolve_feature(fq_name)?)
    }
}

pub type MigrationFn = dyn Fn(&mut MigrationContext<'_>) -> Result<(), MigrationError> + Send + Sync;

/// Identifier to entry point map. Cloning shares the entry points.
#[derive(Clone, Default)]
pub struct MigrationRegistry {
    entries: BTreeMap<String, Arc<MigrationFn>>,
}

impl fmt::Debug for MigrationRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}

impl MigrationRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails if `id` is taken.
    pub fn register<F>(&mut self, id: &str, migration: F) -> Result<(), MigrationError>
    where
        F: Fn(&mut MigrationContext<'_>) -> Result<(), MigrationError> + Send + Sync + 'static,
    {
        if self.entries.contains_key(id) {
            return Err(MigrationError::failed(format!("migration {id} is already registered")));
        }
        self.entries.insert(id.to_string(), Arc::new(migration));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<Arc<MigrationFn>> {
        self.entries.get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
