//! The history model: an append-only, release-structured record of coupled
//! operations, and the engine that records and replays it.

mod engine;
mod primitive;
mod registry;
mod transaction;

pub use engine::{migrate, migrate_batch, EngineError, MigrationOutcome, Recorder};
pub use primitive::{PrimitiveChange, PrimitiveError, Property};
pub use registry::{MigrationContext, MigrationError, MigrationFn, MigrationRegistry, MigrationReport, StepTiming};
pub use transaction::{execute_transaction, TransactionError, Workspace};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::json::to_canonical_string;
use crate::metamodel::{MetamodelDoc, MetamodelError, MetamodelSet};

/// A parameter value as written in a history file or typed by a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Bool(b) => write!(f, "{b}"),
            Binding::Int(i) => write!(f, "{i}"),
            Binding::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Binding {
    fn from(s: &str) -> Self {
        Binding::Str(s.to_string())
    }
}

impl From<bool> for Binding {
    fn from(b: bool) -> Self {
        Binding::Bool(b)
    }
}

impl From<i64> for Binding {
    fn from(i: i64) -> Self {
        Binding::Int(i)
    }
}

pub type Bindings = BTreeMap<String, Binding>;

/// Builds a binding map from `(name, value)` pairs.
pub fn bindings<I, K, V>(pairs: I) -> Bindings
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<Binding>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationApplication {
    #[serde(rename = "opName")]
    pub op_name: String,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomChange {
    pub primitives: Vec<PrimitiveChange>,
    #[serde(rename = "migrationId", default, skip_serializing_if = "Option::is_none")]
    pub migration_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChangeRecord {
    Operation { operation: OperationApplication },
    Custom { custom: CustomChange },
}

impl ChangeRecord {
    /// Short human-readable description used by history views.
    pub fn label(&self) -> String {
        match self {
            ChangeRecord::Operation { operation } => {
                let args: Vec<String> = operation.bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{}({})", operation.op_name, args.join(", "))
            }
            ChangeRecord::Custom { custom } => {
                let n = custom.primitives.len();
                match &custom.migration_id {
                    Some(id) => format!("custom [{id}] ({n} change(s))"),
                    None => format!("custom ({n} change(s))"),
                }
            }
        }
    }

    pub fn is_operation(&self, name: &str) -> bool {
        matches!(self, ChangeRecord::Operation { operation } if operation.op_name == name)
    }

    pub fn migration_id(&self) -> Option<&str> {
        match self {
            ChangeRecord::Custom { custom } => custom.migration_id.as_deref(),
            ChangeRecord::Operation { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("a history needs at least one metamodel")]
    NoMetamodels,
    #[error("the open release is empty; release with force to seal it anyway")]
    EmptyRelease,
    #[error("release span {from}..{to} is outside 0..{count}")]
    BadSpan { from: usize, to: usize, count: usize },
    #[error("malformed history: {0}")]
    Malformed(String),
    #[error(transparent)]
    Metamodel(#[from] MetamodelError),
}

/// History file contents. The last release is the open one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct History {
    metamodels: Vec<String>,
    #[serde(rename = "initialSnapshots")]
    initial_snapshots: BTreeMap<String, MetamodelDoc>,
    releases: Vec<Vec<ChangeRecord>>,
}

impl History {
    /// Starts a history over a snapshot of the given metamodels, with one
    /// open, empty release.
    pub fn create(metamodels: &MetamodelSet) -> Result<Self, HistoryError> {
        let docs = metamodels.to_docs();
        if docs.is_empty() {
            return Err(HistoryError::NoMetamodels);
        }
        Ok(History {
            metamodels: docs.iter().map(|d| d.name.clone()).collect(),
            initial_snapshots: docs.into_iter().map(|d| (d.name.clone(), d)).collect(),
            releases: vec![Vec::new()],
        })
    }

    /// Starts a history from metamodel documents; duplicate names and
    /// unresolvable references are rejected.
    pub fn create_from_docs(docs: &[MetamodelDoc]) -> Result<Self, HistoryError> {
        if docs.is_empty() {
            return Err(HistoryError::NoMetamodels);
        }
        Self::create(&MetamodelSet::from_docs(docs)?)
    }

    pub fn metamodel_names(&self) -> &[String] {
        &self.metamodels
    }

    /// The metamodels the history starts from.
    pub fn initial_metamodels(&self) -> Result<MetamodelSet, HistoryError> {
        let docs: Vec<MetamodelDoc> = self
            .metamodels
            .iter()
            .map(|n| {
                self.initial_snapshots
                    .get(n)
                    .cloned()
                    .ok_or_else(|| HistoryError::Malformed(format!("no initial snapshot for {n}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(MetamodelSet::from_docs(&docs)?)
    }

    /// All releases including the trailing open one.
    pub fn releases(&self) -> &[Vec<ChangeRecord>] {
        &self.releases
    }

    pub fn sealed_releases(&self) -> &[Vec<ChangeRecord>] {
        &self.releases[..self.releases.len() - 1]
    }

    pub fn open_release(&self) -> &[ChangeRecord] {
        self.releases.last().expect("a history always has an open release")
    }

    pub fn records(&self) -> impl Iterator<Item = &ChangeRecord> {
        self.releases.iter().flatten()
    }

    pub fn record_count(&self) -> usize {
        self.releases.iter().map(Vec::len).sum()
    }

    /// Seals the open release and opens a new one.
    pub fn release(&mut self, force: bool) -> Result<(), HistoryError> {
        if self.open_release().is_empty() && !force {
            return Err(HistoryError::EmptyRelease);
        }
        self.releases.push(Vec::new());
        Ok(())
    }

    pub(crate) fn append(&mut self, record: ChangeRecord) {
        self.releases.last_mut().expect("open release").push(record);
    }

    /// Byte-deterministic history file text.
    pub fn save(&self) -> String {
        to_canonical_string(self)
    }

    pub fn load(text: &str) -> Result<Self, HistoryError> {
        let history: History = serde_json::from_str(text)
            .map_err(|e| HistoryError::Malformed(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if history.metamodels.is_empty() {
            return Err(HistoryError::NoMetamodels);
        }
        if history.releases.is_empty() {
            return Err(HistoryError::Malformed(
                "at least the open release must be present".into(),
            ));
        }
        let names: Vec<&String> = history.initial_snapshots.keys().collect();
        let mut listed: Vec<&String> = history.metamodels.iter().collect();
        listed.sort();
        if names != listed {
            return Err(HistoryError::Malformed(
                "metamodel names do not match the initial snapshots".into(),
            ));
        }
        history.initial_metamodels()?;
        Ok(history)
    }

    pub(crate) fn check_span(&self, from: usize, to: usize) -> Result<(), HistoryError> {
        if from > to || to > self.releases.len() {
            return Err(HistoryError::BadSpan {
                from,
                to,
                count: self.releases.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metamodel::load_metamodel;

    fn empty_mm() -> MetamodelSet {
        load_metamodel(r#"{"name":"e","packages":[]}"#).unwrap()
    }

    #[test]
    fn create_from_one_empty_metamodel() {
        let h = History::create(&empty_mm()).unwrap();
        assert_eq!(h.record_count(), 0);
        assert_eq!(h.metamodel_names(), &["e".to_string()]);
        assert_eq!(h.releases().len(), 1);
    }

    #[test]
    fn create_from_nothing_fails() {
        assert_eq!(History::create(&MetamodelSet::new()), Err(HistoryError::NoMetamodels));
        assert_eq!(History::create_from_docs(&[]), Err(HistoryError::NoMetamodels));
    }

    #[test]
    fn duplicate_metamodel_names_are_rejected() {
        let doc = empty_mm().to_docs().remove(0);
        assert!(matches!(
            History::create_from_docs(&[doc.clone(), doc]),
            Err(HistoryError::Metamodel(MetamodelError::DuplicateName(_)))
        ));
    }

    #[test]
    fn release_requires_content_unless_forced() {
        let mut h = History::create(&empty_mm()).unwrap();
        assert_eq!(h.release(false), Err(HistoryError::EmptyRelease));
        h.release(true).unwrap();
        assert_eq!(h.sealed_releases().len(), 1);
        assert!(h.open_release().is_empty());
    }

    #[test]
    fn save_load_round_trip() {
        let mut h = History::create(&empty_mm()).unwrap();
        h.append(ChangeRecord::Custom {
            custom: CustomChange {
                primitives: vec![],
                migration_id: Some("M".into()),
            },
        });
        let text = h.save();
        let back = History::load(&text).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.save(), text);
        assert!(text.contains("\"migrationId\": \"M\""));
        assert!(text.contains("\"initialSnapshots\""));
    }

    #[test]
    fn record_json_shape() {
        let rec = ChangeRecord::Operation {
            operation: OperationApplication {
                op_name: "rename".into(),
                bindings: bindings([("element", Binding::from("m.p.A")), ("flag", Binding::from(true))]),
            },
        };
        let v = serde_json::to_value(&rec).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"kind":"operation","operation":{"opName":"rename","bindings":{"element":"m.p.A","flag":true}}})
        );
        assert_eq!(rec.label(), "rename(element=m.p.A, flag=true)");
    }
}
