//! The conformance relation between a model and its metamodels.
//!
//! Every element is checked independently, so the check fans out over
//! elements with rayon when the `parallel` feature is enabled. Results are
//! reported in element creation order either way.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::metamodel::{ClassifierId, FeatureId, FeatureKind, MetamodelSet};
use crate::model::{scalar_fits, ElementId, Model, Placement, Slot};
use crate::par::{self, ExecMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    UnknownClass,
    AbstractInstantiation,
    MissingSlotType,
    MultiplicityLower,
    MultiplicityUpper,
    DanglingReference,
    ContainmentViolation,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::UnknownClass => "unknown-class",
            Rule::AbstractInstantiation => "abstract-instantiation",
            Rule::MissingSlotType => "missing-slot-type",
            Rule::MultiplicityLower => "multiplicity-lower",
            Rule::MultiplicityUpper => "multiplicity-upper",
            Rule::DanglingReference => "dangling-reference",
            Rule::ContainmentViolation => "containment-violation",
        }
    }

    /// Rules suspended inside a transaction. Slot typing is never among them.
    pub const SOFTENED: [Rule; 3] = [
        Rule::MultiplicityLower,
        Rule::DanglingReference,
        Rule::AbstractInstantiation,
    ];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceViolation {
    pub element: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for ConformanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

/// Which rules to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckOptions {
    pub softened: bool,
    pub mode: ExecMode,
}

/// Full conformance check; empty when the model conforms.
pub fn check_conformance(model: &Model, mms: &MetamodelSet) -> Vec<ConformanceViolation> {
    check_with(model, mms, CheckOptions::default())
}

pub fn check_with(model: &Model, mms: &MetamodelSet, options: CheckOptions) -> Vec<ConformanceViolation> {
    let ids: Vec<ElementId> = model.element_ids().collect();
    let info = ClassTable::build(mms, &ids, model);
    let per_element = par::map_collect(options.mode, &ids, |id| {
        check_element(model, mms, &info, *id, options.softened)
    });
    per_element.into_iter().flatten().collect()
}

/// Per-class data looked up once per check instead of once per element.
struct ClassTable {
    features: HashMap<ClassifierId, Vec<FeatureId>>,
}

impl ClassTable {
    fn build(mms: &MetamodelSet, ids: &[ElementId], model: &Model) -> Self {
        let mut features = HashMap::new();
        for id in ids {
            let class = model.element(*id).expect("live").class();
            features.entry(class).or_insert_with(|| mms.all_features(class));
        }
        ClassTable { features }
    }
}

fn check_element(
    model: &Model,
    mms: &MetamodelSet,
    table: &ClassTable,
    id: ElementId,
    softened: bool,
) -> Vec<ConformanceViolation> {
    let mut out = Vec::new();
    let e = model.element(id).expect("live");
    let class = e.class();
    let class_fqn = mms.classifier_fqn(class);
    let violation = |rule: Rule, feature: Option<FeatureId>, message: String| ConformanceViolation {
        element: id.to_string(),
        feature: feature.map(|f| mms.feature_fqn(f)),
        rule,
        message,
    };
    match mms.class(class) {
        None => {
            out.push(violation(
                Rule::UnknownClass,
                None,
                format!("element {id} instantiates {class_fqn}, which is not a class of the metamodel set"),
            ));
            return out;
        }
        Some(data) if data.is_abstract && !softened => out.push(violation(
            Rule::AbstractInstantiation,
            None,
            format!("element {id} instantiates abstract class {class_fqn}"),
        )),
        Some(_) => {}
    }

    match e.placement() {
        Placement::Detached => out.push(violation(
            Rule::ContainmentViolation,
            None,
            format!("element {id} is neither a resource root nor contained"),
        )),
        Placement::Contained { parent, feature } => {
            let ok =
                model.refs(parent, feature).contains(&id) && mms.feature(feature).is_some_and(|f| f.is_containment());
            if !ok {
                out.push(violation(
                    Rule::ContainmentViolation,
                    Some(feature),
                    format!(
                        "element {id} claims container {parent} via {}, which does not contain it",
                        mms.feature_fqn(feature)
                    ),
                ));
            }
        }
        Placement::Root(_) => {}
    }

    let applicable = &table.features[&class];
    for (f, slot) in e.slots() {
        let fqn = mms.feature_fqn(*f);
        let Some(feature) = mms.feature(*f).filter(|_| applicable.contains(f)) else {
            out.push(violation(
                Rule::MissingSlotType,
                Some(*f),
                format!("element {id} has a slot for {fqn}, which {class_fqn} does not declare"),
            ));
            continue;
        };
        match (&feature.kind, slot) {
            (FeatureKind::Attribute(ty), Slot::Value(v)) => {
                if !scalar_fits(mms, ty, v) {
                    out.push(violation(
                        Rule::MissingSlotType,
                        Some(*f),
                        format!("element {id}: value {v} does not fit the type of {fqn}"),
                    ));
                }
            }
            (FeatureKind::Reference { target, .. }, Slot::Refs(targets)) => {
                for t in targets {
                    match model.element(*t) {
                        None => {
                            if !softened {
                                out.push(violation(
                                    Rule::DanglingReference,
                                    Some(*f),
                                    format!("element {id}: {fqn} refers to missing element {t}"),
                                ));
                            }
                        }
                        Some(te) if !mms.conforms_to(te.class(), *target) => out.push(violation(
                            Rule::MissingSlotType,
                            Some(*f),
                            format!(
                                "element {id}: {fqn} refers to {t} of class {}, expected {}",
                                mms.classifier_fqn(te.class()),
                                mms.classifier_fqn(*target)
                            ),
                        )),
                        Some(_) => {}
                    }
                }
            }
            _ => out.push(violation(
                Rule::MissingSlotType,
                Some(*f),
                format!("element {id}: slot kind does not match {fqn}"),
            )),
        }
    }

    for f in applicable {
        let Some(feature) = mms.feature(*f) else { continue };
        let count = match e.slots().get(f) {
            None => 0,
            Some(Slot::Value(_)) => 1,
            Some(Slot::Refs(r)) => r.len() as u32,
        };
        if count < feature.lower && !softened {
            out.push(violation(
                Rule::MultiplicityLower,
                Some(*f),
                format!(
                    "element {id}: {} requires at least {} value(s), found {count}",
                    mms.feature_fqn(*f),
                    feature.lower
                ),
            ));
        }
        if let Some(upper) = feature.upper {
            if count > upper {
                out.push(violation(
                    Rule::MultiplicityUpper,
                    Some(*f),
                    format!(
                        "element {id}: {} allows at most {upper} value(s), found {count}",
                        mms.feature_fqn(*f)
                    ),
                ));
            }
        }
    }
    out
}
