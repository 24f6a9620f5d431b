use std::sync::Arc;

use axum::http::StatusCode;
use coevo_core::case;
use coevo_core::catalog::{self, OperationDescriptor};
use coevo_core::history::{migrate, Bindings, ChangeRecord, MigrationRegistry};
use coevo_core::metamodel::{MetamodelDoc, MetamodelSet};
use coevo_core::model::load_model;
use coevo_core::{History, Model, Recorder};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::ApiError;

/// Body of `POST /sessions`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// `"case"` loads the statemachine extraction: both metamodels, the
    /// recorded history and F1 as input model.
    pub preset: Option<String>,
    /// Metamodel documents for a fresh history.
    pub metamodels: Option<Vec<MetamodelDoc>>,
    /// An existing history file instead of `metamodels`.
    pub history: Option<Value>,
    /// Input models for migration runs, conforming to the history's initial
    /// metamodels.
    #[serde(default)]
    pub models: Vec<Value>,
}

pub struct Session {
    id: String,
    revision: u64,
    recorder: Recorder,
    /// Initial metamodels the inputs are loaded against.
    source: MetamodelSet,
    inputs: Vec<Model>,
}

fn bad(message: impl Into<String>) -> ApiError {
    ApiError::new(
        StatusCode::UNPROCESSABLE_ENTITY,
        "invalid-session",
        vec![message.into()],
    )
}

impl Session {
    pub fn create(id: &str, body: CreateSession) -> Result<Self, ApiError> {
        let registry = Arc::new(case::registry());
        let (history, mut model_texts) = match (body.preset.as_deref(), body.metamodels, body.history) {
            (Some("case"), None, None) => (case::build_case_history(), vec![case::F1_JAVA_MODEL.to_string()]),
            (Some(other), _, _) if other != "case" => return Err(bad(format!("unknown preset {other}"))),
            (None, Some(docs), None) => {
                let mms = MetamodelSet::from_docs(&docs).map_err(|e| bad(e.to_string()))?;
                (History::create(&mms).map_err(|e| bad(e.to_string()))?, Vec::new())
            }
            (None, None, Some(h)) => (
                History::load(&h.to_string()).map_err(|e| bad(e.to_string()))?,
                Vec::new(),
            ),
            _ => return Err(bad("give exactly one of preset, metamodels or history")),
        };
        model_texts.extend(body.models.iter().map(Value::to_string));
        let source = history.metamodels_at(0, &registry)?;
        let inputs = model_texts
            .iter()
            .enumerate()
            .map(|(i, t)| load_model(t, &source).map_err(|e| bad(format!("model {i}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let recorder = Recorder::new(history, registry)?;
        Ok(Session {
            id: id.to_string(),
            revision: 0,
            recorder,
            source,
            inputs,
        })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn registry(&self) -> &MigrationRegistry {
        self.recorder.registry()
    }

    pub fn check_revision(&self, given: u64) -> Result<(), ApiError> {
        if given != self.revision {
            return Err(ApiError::conflict(format!(
                "stale revision {given}; the session is at {}",
                self.revision
            )));
        }
        Ok(())
    }

    pub fn summary(&self) -> Value {
        let h = self.recorder.history();
        json!({
            "id": self.id,
            "revision": self.revision,
            "metamodelNames": h.metamodel_names(),
            "records": h.record_count(),
            "releases": h.releases().len(),
            "models": self.inputs.iter().map(|m| m.primary_uri()).collect::<Vec<_>>(),
        })
    }

    pub fn metamodel_docs(&self) -> Vec<MetamodelDoc> {
        self.recorder.metamodels().to_docs()
    }

    /// Every catalog operation with bindings prefilled from `selection` and
    /// the constraints those bindings can already be checked against.
    pub fn operations(&self, selection: &[String]) -> Vec<Value> {
        catalog::catalog()
            .iter()
            .map(|d| self.operation_view(d, selection))
            .collect()
    }

    fn operation_view(&self, desc: &OperationDescriptor, selection: &[String]) -> Value {
        let mms = self.recorder.metamodels();
        let bindings = catalog::prefill(desc, mms, selection);
        let messages: Vec<String> = match catalog::resolve_bindings(desc, mms, &bindings, false) {
            Ok(resolved) => catalog::check_constraints(desc, self.recorder.workspace(), &resolved)
                .iter()
                .map(ToString::to_string)
                .collect(),
            Err(errors) => errors.iter().map(ToString::to_string).collect(),
        };
        let mut view = serde_json::to_value(desc).expect("descriptors serialize");
        view["bindings"] = json!(bindings);
        view["applicable"] = json!(messages.is_empty());
        view["messages"] = json!(messages);
        view
    }

    pub fn apply(&mut self, name: &str, bindings: Bindings) -> Result<ChangeRecord, ApiError> {
        let record = self.recorder.apply_operation(name, bindings)?;
        self.revision += 1;
        Ok(record)
    }

    pub fn release(&mut self, force: bool) -> Result<(), ApiError> {
        self.recorder.release(force)?;
        self.revision += 1;
        Ok(())
    }

    pub fn history_view(&self) -> Value {
        let h = self.recorder.history();
        let sealed = h.sealed_releases().len();
        let mut index = 0;
        let releases: Vec<Value> = h
            .releases()
            .iter()
            .enumerate()
            .map(|(r, records)| {
                let records: Vec<Value> = records
                    .iter()
                    .map(|rec| {
                        index += 1;
                        json!({"index": index - 1, "label": rec.label(), "record": rec})
                    })
                    .collect();
                json!({"index": r, "sealed": r < sealed, "records": records})
            })
            .collect();
        json!({
            "revision": self.revision,
            "metamodelNames": h.metamodel_names(),
            "records": h.record_count(),
            "releases": releases,
        })
    }

    pub fn history_text(&self) -> String {
        self.recorder.history().save()
    }

    /// Migrates the input models (or the one whose primary resource is
    /// `uri`) from release `from` (default 0) to `to` (default: through the
    /// open release). The session is not changed.
    pub fn migrate(&self, uri: Option<&str>, from: Option<usize>, to: Option<usize>) -> Result<Value, ApiError> {
        let history = self.recorder.history();
        let inputs: Vec<Model> = match uri {
            Some(u) => {
                let found: Vec<Model> = self
                    .inputs
                    .iter()
                    .filter(|m| m.primary_uri() == Some(u))
                    .cloned()
                    .collect();
                if found.is_empty() {
                    return Err(ApiError::not_found(format!("no input model {u}")));
                }
                found
            }
            None => self.inputs.clone(),
        };
        let from = from.unwrap_or(0);
        let to = to.unwrap_or(history.releases().len());
        let out = migrate(&inputs, &self.source, history, self.registry(), from, to)?;
        let steps: Vec<Value> = out
            .report
            .steps()
            .iter()
            .map(|s| json!({"name": s.name, "millis": s.millis}))
            .collect();
        let models: Vec<Value> = out
            .models
            .iter()
            .map(|m| serde_json::to_value(m.to_doc(&out.metamodels, true)).expect("model docs serialize"))
            .collect();
        Ok(json!({
            "revision": self.revision,
            "from": from,
            "to": to,
            "report": {"steps": steps, "lines": out.report.lines(), "text": out.report.text()},
            "models": models,
        }))
    }
}
