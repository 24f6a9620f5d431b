//! Transactions with softened conformance inside and full conformance at
//! the boundary.

use crate::conformance::{check_with, CheckOptions, ConformanceViolation};
use crate::metamodel::{MetamodelError, MetamodelSet};
use crate::model::Model;

use super::registry::MigrationError;

/// Metamodels together with the models that instantiate them.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub metamodels: MetamodelSet,
    pub models: Vec<Model>,
}

impl Workspace {
    pub fn new(metamodels: MetamodelSet) -> Self {
        Workspace {
            metamodels,
            models: Vec::new(),
        }
    }

    /// Violations across all models; each element id is prefixed with the
    /// model's primary resource when there is more than one model.
    pub fn violations(&self, softened: bool) -> Vec<ConformanceViolation> {
        let options = CheckOptions {
            softened,
            ..Default::default()
        };
        let many = self.models.len() > 1;
        self.models
            .iter()
            .enumerate()
            .flat_map(|(i, m)| {
                let prefix = many.then(|| m.primary_uri().map_or_else(|| format!("model{i}"), str::to_string));
                check_with(m, &self.metamodels, options).into_iter().map(move |mut v| {
                    if let Some(p) = &prefix {
                        v.element = format!("{p}#{}", v.element);
                    }
                    v
                })
            })
            .collect()
    }

    /// Canonical text of every metamodel and model, used to compare states.
    pub fn fingerprint(&self) -> String {
        let mut out = self.metamodels.fingerprint();
        for m in &self.models {
            out.push_str(&m.save(&self.metamodels));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransactionError {
    #[error("models do not conform at transaction entry: {}", join(.0))]
    EntryNotConformant(Vec<ConformanceViolation>),
    #[error("transaction rolled back: {0}")]
    Aborted(MigrationError),
    #[error("transaction rolled back, invalid metamodel: {0}")]
    InvalidMetamodel(MetamodelError),
    #[error("transaction rolled back, models do not conform: {}", join(.0))]
    Boundary(Vec<ConformanceViolation>),
}

impl TransactionError {
    pub fn violations(&self) -> &[ConformanceViolation] {
        match self {
            TransactionError::EntryNotConformant(v) | TransactionError::Boundary(v) => v,
            _ => &[],
        }
    }
}

fn join(v: &[ConformanceViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Runs `body` atomically: either it succeeds and every model conforms
/// afterwards, or the workspace is restored to its entry state.
pub fn execute_transaction<T, F>(ws: &mut Workspace, body: F) -> Result<T, TransactionError>
where
    F: FnOnce(&mut Workspace) -> Result<T, MigrationError>,
{
    let entry = ws.violations(false);
    if !entry.is_empty() {
        return Err(TransactionError::EntryNotConformant(entry));
    }
    execute_checked(ws, body)
}

/// [`execute_transaction`] for a workspace already known to conform, e.g.
/// right after a committed transaction.
pub(crate) fn execute_checked<T, F>(ws: &mut Workspace, body: F) -> Result<T, TransactionError>
where
    F: FnOnce(&mut Workspace) -> Result<T, MigrationError>,
{
    let snapshot = ws.clone();
    for m in &mut ws.models {
        m.set_softened(true);
    }
    let outcome = body(ws);
    for m in &mut ws.models {
        m.set_softened(false);
    }
    let failure = match outcome {
        Err(e) => Some(TransactionError::Aborted(e)),
        Ok(value) => match ws.metamodels.validate() {
            Err(e) => Some(TransactionError::InvalidMetamodel(e)),
            Ok(()) => {
                let exit = ws.violations(false);
                if exit.is_empty() {
                    return Ok(value);
                }
                Some(TransactionError::Boundary(exit))
            }
        },
    };
    *ws = snapshot;
    Err(failure.expect("only failures reach here"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformance::Rule;
    use crate::metamodel::load_metamodel;

    const MM: &str = r#"{"name":"sm","packages":[{"name":"sm","classifiers":[
        {"kind":"class","name":"State","abstract":false,"super":[],"features":[]},
        {"kind":"class","name":"Transition","abstract":false,"super":[],"features":[
            {"kind":"reference","name":"source","target":"sm.sm.State","containment":false,"lower":1,"upper":1}]}]}]}"#;

    fn ws() -> Workspace {
        let mut ws = Workspace::new(load_metamodel(MM).unwrap());
        let mut m = Model::new();
        m.create_resource("r").unwrap();
        ws.models.push(m);
        ws
    }

    #[test]
    fn two_phase_construction_commits() {
        let mut ws = ws();
        execute_transaction(&mut ws, |ws| {
            let mms = &ws.metamodels;
            let t = ws.models[0].create_element(mms, "r", mms.resolve_class("sm.sm.Transition")?)?;
            let s = ws.models[0].create_element(mms, "r", mms.resolve_class("sm.sm.State")?)?;
            ws.models[0].set_refs(mms, t, mms.resolve_feature("sm.sm.Transition.source")?, vec![s])?;
            Ok(())
        })
        .unwrap();
        assert_eq!(ws.models[0].len(), 2);
        assert!(!ws.models[0].is_softened());
    }

    #[test]
    fn missing_source_rolls_back() {
        let mut ws = ws();
        let before = ws.fingerprint();
        let err = execute_transaction(&mut ws, |ws| {
            let mms = &ws.metamodels;
            ws.models[0].create_element(mms, "r", mms.resolve_class("sm.sm.Transition")?)?;
            Ok(())
        })
        .unwrap_err();
        assert_eq!(err.violations()[0].rule, Rule::MultiplicityLower);
        assert_eq!(ws.fingerprint(), before);
        assert!(ws.models[0].is_empty());
    }

    #[test]
    fn empty_body_commits_unchanged() {
        let mut ws = ws();
        let before = ws.fingerprint();
        execute_transaction(&mut ws, |_| Ok(())).unwrap();
        assert_eq!(ws.fingerprint(), before);
    }
}
