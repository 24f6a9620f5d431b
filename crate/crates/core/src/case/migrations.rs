//! The custom migrations of the statemachine extraction.

use super::{java, sm, STATEMACHINE_URI};
use crate::history::{MigrationContext, MigrationError};
use crate::metamodel::{ClassifierId, FeatureId, MetamodelSet};
use crate::model::{ElementId, Model, Scalar};

/// Finds the unique abstract class named `State`.
fn state_base(model: &Model, mms: &MetamodelSet) -> Result<ElementId, MigrationError> {
    let class = mms.resolve_class(java::CLASS)?;
    let name = mms.resolve_feature(java::CLASS_NAME)?;
    let is_abstract = mms.resolve_feature(java::CLASS_ABSTRACT)?;
    let candidates: Vec<ElementId> = model
        .instances_of(mms, class)
        .into_iter()
        .filter(|c| {
            model.attr_str(*c, name) == Some("State")
                && model.attr(*c, is_abstract).and_then(Scalar::as_bool) == Some(true)
        })
        .collect();
    match candidates.as_slice() {
        [one] => Ok(*one),
        [] => Err(MigrationError::failed("no abstract class named State")),
        many => Err(MigrationError::failed(format!(
            "{} abstract classes are named State",
            many.len()
        ))),
    }
}

/// Concrete transitive subclasses of `base`, found by walking the
/// `superClass` reference backwards (depth first, in document order).
pub(crate) fn concrete_subclasses(
    model: &Model,
    mms: &MetamodelSet,
    base: ElementId,
) -> Result<Vec<ElementId>, MigrationError> {
    let super_class = mms.resolve_feature(java::CLASS_SUPER)?;
    let is_abstract = mms.resolve_feature(java::CLASS_ABSTRACT)?;
    let mut out = Vec::new();
    let mut stack: Vec<ElementId> = model.get_inverse(mms, base, super_class)?.into_iter().rev().collect();
    let mut seen = std::collections::HashSet::new();
    while let Some(c) = stack.pop() {
        if !seen.insert(c) {
            continue;
        }
        if model.attr(c, is_abstract).and_then(Scalar::as_bool) != Some(true) {
            out.push(c);
        }
        let subs = model.get_inverse(mms, c, super_class)?;
        stack.extend(subs.into_iter().rev());
    }
    Ok(out)
}

struct Sm {
    machine: ClassifierId,
    state: ClassifierId,
    transition: ClassifierId,
    states: FeatureId,
    transitions: FeatureId,
    name: FeatureId,
    source: FeatureId,
    target: FeatureId,
}

impl Sm {
    fn resolve(mms: &MetamodelSet) -> Result<Self, MigrationError> {
        Ok(Sm {
            machine: mms.resolve_class(sm::STATE_MACHINE)?,
            state: mms.resolve_class(sm::STATE)?,
            transition: mms.resolve_class(sm::TRANSITION)?,
            states: mms.resolve_feature(sm::STATES)?,
            transitions: mms.resolve_feature(sm::TRANSITIONS)?,
            name: mms.resolve_feature(sm::STATE_NAME)?,
            source: mms.resolve_feature(sm::SOURCE)?,
            target: mms.resolve_feature(sm::TARGET)?,
        })
    }
}

fn machine_of(model: &Model) -> Result<ElementId, MigrationError> {
    model
        .resource_index(STATEMACHINE_URI)
        .and_then(|r| model.resources()[r].roots().first().copied())
        .ok_or_else(|| MigrationError::failed("no statemachine resource; ExtractStates must run first"))
}

fn single(model: &Model, id: ElementId, feature: FeatureId) -> Option<ElementId> {
    model.refs(id, feature).first().copied()
}

pub fn extract_states(ctx: &mut MigrationContext<'_>) -> Result<(), MigrationError> {
    let mms = ctx.metamodels;
    let s = Sm::resolve(mms)?;
    let class_name = mms.resolve_feature(java::CLASS_NAME)?;
    let trace = mms.resolve_feature(sm::STATE_CLASS)?;
    for model in ctx.models.iter_mut() {
        let base = state_base(model, mms)?;
        let classes = concrete_subclasses(model, mms, base)?;
        model.create_resource(STATEMACHINE_URI)?;
        let machine = model.create_element(mms, STATEMACHINE_URI, s.machine)?;
        let mut states = Vec::with_capacity(classes.len());
        for c in classes {
            let state = model.create_element(mms, STATEMACHINE_URI, s.state)?;
            let name = model.attr_str(c, class_name).unwrap_or_default().to_string();
            model.set_attr(mms, state, s.name, Scalar::Str(name))?;
            model.set_refs(mms, state, trace, vec![c])?;
            states.push(state);
        }
        model.set_refs(mms, machine, s.states, states)?;
    }
    Ok(())
}

pub fn extract_transitions(ctx: &mut MigrationContext<'_>) -> Result<(), MigrationError> {
    let mms = ctx.metamodels;
    let s = Sm::resolve(mms)?;
    let state_class = mms.resolve_feature(sm::STATE_CLASS)?;
    let reference = mms.resolve_feature(sm::TRANSITION_REFERENCE)?;
    let target_ref = mms.resolve_feature(java::ELEMENT_REFERENCE_TARGET)?;
    let call = mms.resolve_class(java::METHOD_CALL)?;
    let class = mms.resolve_class(java::CLASS)?;
    let method_name = mms.resolve_feature(java::METHOD_CALL_NAME)?;
    for model in ctx.models.iter_mut() {
        let machine = machine_of(model)?;
        let mut transitions = Vec::new();
        for target_state in model.refs(machine, s.states).to_vec() {
            let Some(target_class) = single(model, target_state, state_class) else {
                continue;
            };
            for r in model.get_inverse(mms, target_class, target_ref)? {
                let Some(m) = model.get_container_of_type(mms, r, call)? else {
                    continue;
                };
                if model.attr_str(m, method_name) != Some("activate") {
                    continue;
                }
                let Some(source_class) = model.get_container_of_type(mms, r, class)? else {
                    continue;
                };
                let Some(source_state) = model.get_inverse(mms, source_class, state_class)?.first().copied() else {
                    continue;
                };
                // Created empty, then filled: valid only at the boundary.
                let t = model.create_element(mms, STATEMACHINE_URI, s.transition)?;
                model.set_refs(mms, t, s.source, vec![source_state])?;
                model.set_refs(mms, t, s.target, vec![target_state])?;
                model.set_refs(mms, t, reference, vec![r])?;
                transitions.push(t);
            }
        }
        let mut all = model.refs(machine, s.transitions).to_vec();
        all.extend(transitions);
        model.set_refs(mms, machine, s.transitions, all)?;
    }
    Ok(())
}

/// First call named `name` in the subtree of `scope` (document order) whose
/// arguments include a string literal; returns that literal's value.
fn first_literal_call(
    model: &Model,
    mms: &MetamodelSet,
    scope: ElementId,
    name: &str,
) -> Result<Option<String>, MigrationError> {
    let call = mms.resolve_class(java::METHOD_CALL)?;
    let literal = mms.resolve_class(java::STRING_LITERAL)?;
    let method_name = mms.resolve_feature(java::METHOD_CALL_NAME)?;
    let arguments = mms.resolve_feature(java::METHOD_CALL_ARGUMENTS)?;
    let value = mms.resolve_feature(java::STRING_LITERAL_VALUE)?;
    for id in model.subtree(mms, scope) {
        if model.class_of(id)? != call || model.attr_str(id, method_name) != Some(name) {
            continue;
        }
        let found = model
            .refs(id, arguments)
            .iter()
            .find(|a| model.class_of(**a).is_ok_and(|c| c == literal))
            .and_then(|a| model.attr_str(*a, value));
        if let Some(v) = found {
            return Ok(Some(v.to_string()));
        }
    }
    Ok(None)
}

fn transitions_with_reference(
    model: &Model,
    mms: &MetamodelSet,
) -> Result<Vec<(ElementId, ElementId)>, MigrationError> {
    let s = Sm::resolve(mms)?;
    let reference = mms.resolve_feature(sm::TRANSITION_REFERENCE)?;
    let machine = machine_of(model)?;
    Ok(model
        .refs(machine, s.transitions)
        .iter()
        .filter_map(|t| single(model, *t, reference).map(|r| (*t, r)))
        .collect())
}

pub fn extract_triggers(ctx: &mut MigrationContext<'_>) -> Result<(), MigrationError> {
    let mms = ctx.metamodels;
    let if_stmt = mms.resolve_class(java::IF_STATEMENT)?;
    let condition = mms.resolve_feature(java::IF_CONDITION)?;
    let trigger = mms.resolve_feature(sm::TRIGGER)?;
    for model in ctx.models.iter_mut() {
        for (t, r) in transitions_with_reference(model, mms)? {
            let Some(guard) = model.get_container_of_type(mms, r, if_stmt)? else {
                continue;
            };
            let Some(cond) = single(model, guard, condition) else {
                continue;
            };
            if let Some(v) = first_literal_call(model, mms, cond, "equals")? {
                model.set_attr(mms, t, trigger, Scalar::Str(v))?;
            }
        }
    }
    Ok(())
}

pub fn extract_actions(ctx: &mut MigrationContext<'_>) -> Result<(), MigrationError> {
    let mms = ctx.metamodels;
    let if_stmt = mms.resolve_class(java::IF_STATEMENT)?;
    let method = mms.resolve_class(java::METHOD)?;
    let action = mms.resolve_feature(sm::ACTION)?;
    for model in ctx.models.iter_mut() {
        for (t, r) in transitions_with_reference(model, mms)? {
            let scope = match model.get_container_of_type(mms, r, if_stmt)? {
                Some(guard) => Some(guard),
                None => model.get_container_of_type(mms, r, method)?,
            };
            let Some(scope) = scope else { continue };
            if let Some(v) = first_literal_call(model, mms, scope, "send")? {
                model.set_attr(mms, t, action, Scalar::Str(v))?;
            }
        }
    }
    Ok(())
}

/// Reports the duration of every preceding step and the total so far.
pub fn print_time(ctx: &mut MigrationContext<'_>) -> Result<(), MigrationError> {
    let lines: Vec<String> = ctx
        .report
        .steps()
        .iter()
        .map(|s| format!("step {} {:.3}", s.name, s.millis))
        .collect();
    for l in lines {
        ctx.report.push_line(l);
    }
    let total = ctx.report.elapsed_millis();
    ctx.report.push_line(format!("total {total:.3}"));
    Ok(())
}
