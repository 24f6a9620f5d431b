//! Statemachine extraction from programs written in the state pattern.
//!
//! The pipeline is an ordinary history over the `java` and `sm`
//! metamodels: trace references are created by reusable operations, custom
//! migrations extract states, transitions, triggers and actions, and the
//! traces are deleted again at the end.

mod fixture;
mod migrations;

use std::sync::Arc;

pub use fixture::{
    class_names, expected_statemachine, gen_fixture, gen_fixture_with, program_root, state_name, transition_labels,
    Block, ExpectedTransition, JavaBuilder, PROGRAM_URI,
};
pub use migrations::{extract_actions, extract_states, extract_transitions, extract_triggers, print_time};

use crate::history::{bindings, Binding, EngineError, History, MigrationOutcome, MigrationRegistry, Recorder};
use crate::metamodel::{load_metamodel_set, MetamodelSet};
use crate::model::{load_model, Model, ModelError};

pub const JAVA_METAMODEL: &str = include_str!("../../fixtures/java.mm.json");
pub const SM_METAMODEL: &str = include_str!("../../fixtures/sm.mm.json");
/// `gen_fixture(3, 1, 0, 42)`, committed.
pub const F1_JAVA_MODEL: &str = include_str!("../../fixtures/f1.java-model.json");
/// The statemachine hand-traced from F1.
pub const F1_SM_GOLDEN: &str = include_str!("../../fixtures/f1.sm.golden.json");

pub const STATEMACHINE_URI: &str = "statemachine";

pub const EXTRACT_STATES: &str = "ExtractStates";
pub const EXTRACT_TRANSITIONS: &str = "ExtractTransitions";
pub const EXTRACT_TRIGGERS: &str = "ExtractTriggers";
pub const EXTRACT_ACTIONS: &str = "ExtractActions";
pub const PRINT_TIME: &str = "PrintTime";

pub mod java {
    pub const CLASS: &str = "java.java.Class";
    pub const CLASS_NAME: &str = "java.java.Class.name";
    pub const CLASS_ABSTRACT: &str = "java.java.Class.abstract";
    pub const CLASS_SUPER: &str = "java.java.Class.superClass";
    pub const METHOD: &str = "java.java.Method";
    pub const IF_STATEMENT: &str = "java.java.IfStatement";
    pub const IF_CONDITION: &str = "java.java.IfStatement.condition";
    pub const METHOD_CALL: &str = "java.java.MethodCall";
    pub const METHOD_CALL_NAME: &str = "java.java.MethodCall.methodName";
    pub const METHOD_CALL_ARGUMENTS: &str = "java.java.MethodCall.arguments";
    pub const ELEMENT_REFERENCE: &str = "java.java.ElementReference";
    pub const ELEMENT_REFERENCE_TARGET: &str = "java.java.ElementReference.target";
    pub const STRING_LITERAL: &str = "java.java.StringLiteral";
    pub const STRING_LITERAL_VALUE: &str = "java.java.StringLiteral.value";
}

pub mod sm {
    pub const STATE_MACHINE: &str = "sm.sm.StateMachine";
    pub const STATES: &str = "sm.sm.StateMachine.states";
    pub const TRANSITIONS: &str = "sm.sm.StateMachine.transitions";
    pub const STATE: &str = "sm.sm.State";
    pub const STATE_NAME: &str = "sm.sm.State.name";
    pub const STATE_CLASS: &str = "sm.sm.State.class";
    pub const TRANSITION: &str = "sm.sm.Transition";
    pub const SOURCE: &str = "sm.sm.Transition.source";
    pub const TARGET: &str = "sm.sm.Transition.target";
    pub const TRIGGER: &str = "sm.sm.Transition.trigger";
    pub const ACTION: &str = "sm.sm.Transition.action";
    pub const TRANSITION_REFERENCE: &str = "sm.sm.Transition.reference";
}

/// The `java` and `sm` metamodels.
pub fn metamodels() -> MetamodelSet {
    load_metamodel_set(&[JAVA_METAMODEL, SM_METAMODEL]).expect("case metamodels are valid")
}

/// Registry with the five case migrations.
pub fn registry() -> MigrationRegistry {
    let mut r = MigrationRegistry::new();
    r.register(EXTRACT_STATES, extract_states).expect("fresh registry");
    r.register(EXTRACT_TRANSITIONS, extract_transitions)
        .expect("fresh registry");
    r.register(EXTRACT_TRIGGERS, extract_triggers).expect("fresh registry");
    r.register(EXTRACT_ACTIONS, extract_actions).expect("fresh registry");
    r.register(PRINT_TIME, print_time).expect("fresh registry");
    r
}

fn trace_reference(class: &str, name: &str, target: &str) -> crate::history::Bindings {
    bindings([
        ("class", Binding::from(class)),
        ("name", Binding::from(name)),
        ("target", Binding::from(target)),
        ("containment", Binding::from(false)),
        ("lower", Binding::from(0)),
        ("upper", Binding::from(1)),
    ])
}

/// The recorded extraction: trace `class`, ExtractStates, trace
/// `reference`, ExtractTransitions, ExtractTriggers, ExtractActions,
/// PrintTime, delete both traces, release.
pub fn build_case_history() -> History {
    build_case_recorder().into_history()
}

/// A session positioned after the released case history.
pub fn build_case_recorder() -> Recorder {
    let history = History::create(&metamodels()).expect("two metamodels");
    let mut rec = Recorder::new(history, Arc::new(registry())).expect("empty history replays");
    let step = "case history step";
    rec.apply_operation("createReference", trace_reference(sm::STATE, "class", java::CLASS))
        .expect(step);
    rec.record_custom(vec![], Some(EXTRACT_STATES)).expect(step);
    rec.apply_operation(
        "createReference",
        trace_reference(sm::TRANSITION, "reference", java::ELEMENT_REFERENCE),
    )
    .expect(step);
    for id in [EXTRACT_TRANSITIONS, EXTRACT_TRIGGERS, EXTRACT_ACTIONS, PRINT_TIME] {
        rec.record_custom(vec![], Some(id)).expect(step);
    }
    rec.apply_operation("deleteFeature", bindings([("feature", sm::STATE_CLASS)]))
        .expect(step);
    rec.apply_operation("deleteFeature", bindings([("feature", sm::TRANSITION_REFERENCE)]))
        .expect(step);
    rec.release(false).expect(step);
    rec
}

/// Result of running the pipeline on one program.
#[derive(Debug, Clone)]
pub struct CaseRun {
    /// Just the `statemachine` resource.
    pub statemachine: Model,
    pub outcome: MigrationOutcome,
}

/// Migrates a java model (loaded against [`metamodels`]) through the whole
/// case history and extracts the statemachine resource.
pub fn run_case(program: &Model, source: &MetamodelSet) -> Result<CaseRun, EngineError> {
    run_case_with(program, source, &build_case_history(), &registry())
}

pub fn run_case_with(
    program: &Model,
    source: &MetamodelSet,
    history: &History,
    registry: &MigrationRegistry,
) -> Result<CaseRun, EngineError> {
    let to = history.releases().len();
    let outcome = crate::history::migrate(std::slice::from_ref(program), source, history, registry, 0, to)?;
    let statemachine = outcome.models[0].extract_resources(&outcome.metamodels, &[STATEMACHINE_URI])?;
    Ok(CaseRun { statemachine, outcome })
}

/// The golden statemachine of F1, loaded against `mms`.
pub fn golden(mms: &MetamodelSet) -> Result<Model, ModelError> {
    load_model(F1_SM_GOLDEN, mms)
}

/// The committed F1 program.
pub fn f1_program(mms: &MetamodelSet) -> Result<Model, ModelError> {
    load_model(F1_JAVA_MODEL, mms)
}
