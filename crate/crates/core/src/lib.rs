//! Coupled evolution of metamodels and models.
//!
//! Metamodel adaptations are recorded in a [`history::History`] as coupled
//! operations: reusable, constraint-guarded operations from the
//! [`catalog`], or custom primitive changes with a registered migration.
//! Replaying a history migrates models recorded against an older metamodel,
//! one transaction per record, checking conformance at every boundary.
//!
//! The [`case`] module carries a complete pipeline built on the engine:
//! extracting a statemachine from the syntax graph of a program written in
//! the state pattern.

pub mod case;
pub mod catalog;
pub mod conformance;
pub mod history;
pub mod json;
pub mod metamodel;
pub mod model;
pub mod par;
pub mod workload;

pub use catalog::{catalog, OperationDescriptor};
pub use conformance::{check_conformance, ConformanceViolation, Rule};
pub use history::{execute_transaction, migrate, ChangeRecord, History, MigrationRegistry, Recorder, Workspace};
pub use metamodel::{ClassifierId, FeatureId, MetamodelSet};
pub use model::{ElementId, Model, Scalar, Slot};
