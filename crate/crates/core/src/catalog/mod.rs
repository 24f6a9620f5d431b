//! Reusable coupled operations: parameterized metamodel adaptations with
//! the model migration that restores conformance, guarded by constraints.

mod ops;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::history::{Binding, Bindings, MigrationError, Workspace};
use crate::metamodel::{ClassifierId, FeatureId, MetaElement, MetamodelSet, PackageId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamType {
    ClassRef,
    FeatureRef,
    EnumRef,
    /// A class, enumeration or feature.
    ElementRef,
    PackageRef,
    String,
    Boolean,
    Integer,
    /// A positive integer or `*`.
    UpperBound,
}

impl ParamType {
    pub fn is_metamodel_ref(self) -> bool {
        matches!(
            self,
            ParamType::ClassRef
                | ParamType::FeatureRef
                | ParamType::EnumRef
                | ParamType::ElementRef
                | ParamType::PackageRef
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: ParamType,
}

pub type CheckFn = fn(&Workspace, &Resolved) -> Option<bool>;
pub type ExecuteFn = fn(&mut Workspace, &Resolved) -> Result<(), MigrationError>;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstraintSpec {
    pub id: &'static str,
    pub params: &'static [&'static str],
    pub message: &'static str,
    #[serde(skip)]
    pub check: CheckFn,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperationDescriptor {
    pub name: &'static str,
    pub label: &'static str,
    pub parameters: Vec<ParamSpec>,
    pub constraints: Vec<ConstraintSpec>,
    #[serde(skip)]
    pub execute: ExecuteFn,
}

impl OperationDescriptor {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// A failed constraint, displayed as `C1: message`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintFailure {
    pub id: String,
    pub message: String,
}

impl fmt::Display for ConstraintFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parameter {param}: {message}")]
pub struct BindingError {
    pub param: String,
    pub message: String,
}

/// A binding after resolution against the metamodels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Class(ClassifierId),
    Feature(FeatureId),
    Enum(ClassifierId),
    Element(MetaElement),
    Package(PackageId),
    Str(String),
    Bool(bool),
    Int(i64),
    Upper(Option<u32>),
}

/// Resolved bindings of one operation application.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolved {
    values: BTreeMap<String, Value>,
}

impl Resolved {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn is_bound(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn class(&self, name: &str) -> Option<ClassifierId> {
        match self.get(name)? {
            Value::Class(c) | Value::Enum(c) => Some(*c),
            Value::Element(MetaElement::Classifier(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn feature(&self, name: &str) -> Option<FeatureId> {
        match self.get(name)? {
            Value::Feature(f) | Value::Element(MetaElement::Feature(f)) => Some(*f),
            _ => None,
        }
    }

    pub fn element(&self, name: &str) -> Option<MetaElement> {
        match self.get(name)? {
            Value::Element(e) => Some(*e),
            Value::Class(c) | Value::Enum(c) => Some(MetaElement::Classifier(*c)),
            Value::Feature(f) => Some(MetaElement::Feature(*f)),
            Value::Package(p) => Some(MetaElement::Package(*p)),
            _ => None,
        }
    }

    pub fn package(&self, name: &str) -> Option<PackageId> {
        match self.get(name)? {
            Value::Package(p) => Some(*p),
            _ => None,
        }
    }

    pub fn str(&self, name: &str) -> Option<&str> {
        match self.get(name)? {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn bool(&self, name: &str) -> Option<bool> {
        match self.get(name)? {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.get(name)? {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn upper(&self, name: &str) -> Option<Option<u32>> {
        match self.get(name)? {
            Value::Upper(u) => Some(*u),
            _ => None,
        }
    }

    /// The bindings in the form stored in history records: metamodel
    /// elements by FQN, scalars typed.
    pub fn to_bindings(&self, mms: &MetamodelSet) -> Bindings {
        self.values
            .iter()
            .map(|(k, v)| {
                let b = match v {
                    Value::Class(c) | Value::Enum(c) => Binding::Str(mms.classifier_fqn(*c)),
                    Value::Feature(f) => Binding::Str(mms.feature_fqn(*f)),
                    Value::Element(e) => Binding::Str(element_fqn(mms, *e)),
                    Value::Package(p) => Binding::Str(mms.package_fqn(*p)),
                    Value::Str(s) => Binding::Str(s.clone()),
                    Value::Bool(b) => Binding::Bool(*b),
                    Value::Int(i) => Binding::Int(*i),
                    Value::Upper(Some(n)) => Binding::Int(i64::from(*n)),
                    Value::Upper(None) => Binding::Str("*".into()),
                };
                (k.clone(), b)
            })
            .collect()
    }
}

fn element_fqn(mms: &MetamodelSet, e: MetaElement) -> String {
    match e {
        MetaElement::Package(p) => mms.package_fqn(p),
        MetaElement::Classifier(c) => mms.classifier_fqn(c),
        MetaElement::Feature(f) => mms.feature_fqn(f),
    }
}

/// All operations, in listing order.
pub fn catalog() -> &'static [OperationDescriptor] {
    static CATALOG: OnceLock<Vec<OperationDescriptor>> = OnceLock::new();
    CATALOG.get_or_init(ops::all)
}

pub fn find(name: &str) -> Option<&'static OperationDescriptor> {
    catalog().iter().find(|d| d.name == name)
}

/// Resolves one raw binding for a parameter of type `ty`.
pub fn resolve_value(mms: &MetamodelSet, ty: ParamType, raw: &Binding) -> Result<Value, String> {
    let text = || match raw {
        Binding::Str(s) => Ok(s.as_str()),
        other => Err(format!("expected a name, got {other}")),
    };
    match ty {
        ParamType::ClassRef => {
            let s = text()?;
            mms.resolve_class(s)
                .map(Value::Class)
                .map_err(|_| format!("unknown class {s}"))
        }
        ParamType::FeatureRef => {
            let s = text()?;
            mms.resolve_feature(s)
                .map(Value::Feature)
                .map_err(|_| format!("unknown feature {s}"))
        }
        ParamType::EnumRef => {
            let s = text()?;
            mms.resolve_classifier(s)
                .ok()
                .filter(|c| mms.classifier(*c).and_then(|c| c.literals()).is_some())
                .map(Value::Enum)
                .ok_or_else(|| format!("unknown enumeration {s}"))
        }
        ParamType::ElementRef => {
            let s = text()?;
            match mms.resolve(s) {
                Ok(MetaElement::Package(_)) => Err(format!("{s} is a package, expected a classifier or feature")),
                Ok(e) => Ok(Value::Element(e)),
                Err(e) => Err(format!("unknown element {s} (no {})", e.segment)),
            }
        }
        ParamType::PackageRef => {
            let s = text()?;
            mms.resolve_package(s)
                .map(Value::Package)
                .map_err(|_| format!("unknown package {s}"))
        }
        ParamType::String => match raw {
            Binding::Str(s) => Ok(Value::Str(s.clone())),
            other => Err(format!("expected a string, got {other}")),
        },
        ParamType::Boolean => match raw {
            Binding::Bool(b) => Ok(Value::Bool(*b)),
            Binding::Str(s) if s == "true" || s == "false" => Ok(Value::Bool(s == "true")),
            other => Err(format!("expected a boolean, got {other}")),
        },
        ParamType::Integer => match raw {
            Binding::Int(i) => Ok(Value::Int(*i)),
            Binding::Str(s) => s
                .trim()
                .parse()
                .map(Value::Int)
                .map_err(|_| format!("expected an integer, got {s}")),
            other => Err(format!("expected an integer, got {other}")),
        },
        ParamType::UpperBound => {
            let n = match raw {
                Binding::Str(s) if s == "*" => return Ok(Value::Upper(None)),
                Binding::Int(i) => Some(*i),
                Binding::Str(s) => s.trim().parse::<i64>().ok(),
                Binding::Bool(_) => None,
            };
            n.filter(|n| *n > 0)
                .and_then(|n| u32::try_from(n).ok())
                .map(|n| Value::Upper(Some(n)))
                .ok_or_else(|| format!("expected a positive integer or *, got {raw}"))
        }
    }
}

/// Resolves bindings for `desc`. With `complete`, every parameter must be
/// bound; otherwise unbound parameters are simply absent.
pub fn resolve_bindings(
    desc: &OperationDescriptor,
    mms: &MetamodelSet,
    raw: &Bindings,
    complete: bool,
) -> Result<Resolved, Vec<BindingError>> {
    let mut errors = Vec::new();
    let mut values = BTreeMap::new();
    for name in raw.keys() {
        if desc.param(name).is_none() {
            errors.push(BindingError {
                param: name.clone(),
                message: format!("{} has no parameter {name}", desc.name),
            });
        }
    }
    for p in &desc.parameters {
        match raw.get(p.name) {
            Some(b) => match resolve_value(mms, p.ty, b) {
                Ok(v) => {
                    values.insert(p.name.to_string(), v);
                }
                Err(message) => errors.push(BindingError {
                    param: p.name.to_string(),
                    message,
                }),
            },
            None if complete => errors.push(BindingError {
                param: p.name.to_string(),
                message: "missing".into(),
            }),
            None => {}
        }
    }
    if errors.is_empty() {
        Ok(Resolved { values })
    } else {
        Err(errors)
    }
}

/// Evaluates every constraint whose parameters are all bound; returns the
/// failing ones in declaration order.
pub fn check_constraints(desc: &OperationDescriptor, ws: &Workspace, bindings: &Resolved) -> Vec<ConstraintFailure> {
    desc.constraints
        .iter()
        .filter(|c| c.params.iter().all(|p| bindings.is_bound(p)))
        .filter(|c| !(c.check)(ws, bindings).unwrap_or(true))
        .map(|c| ConstraintFailure {
            id: c.id.to_string(),
            message: c.message.to_string(),
        })
        .collect()
}

/// Binds each selected FQN, in order, to the first still-unbound parameter
/// whose type accepts it.
pub fn prefill(desc: &OperationDescriptor, mms: &MetamodelSet, selection: &[String]) -> Bindings {
    let mut out = Bindings::new();
    for fqn in selection {
        let raw = Binding::Str(fqn.clone());
        let slot = desc
            .parameters
            .iter()
            .filter(|p| p.ty.is_metamodel_ref() && !out.contains_key(p.name))
            .find(|p| resolve_value(mms, p.ty, &raw).is_ok());
        if let Some(p) = slot {
            out.insert(p.name.to_string(), raw);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_operations_with_consistent_constraints() {
        let names: Vec<&str> = catalog().iter().map(|d| d.name).collect();
        assert_eq!(
            names,
            vec![
                "rename",
                "createClass",
                "createAttribute",
                "createReference",
                "deleteFeature",
                "enumToSubclasses",
                "subClassesToEnumeration"
            ]
        );
        for d in catalog() {
            for c in &d.constraints {
                for p in c.params {
                    assert!(d.param(p).is_some(), "{}: {} names unknown parameter {p}", d.name, c.id);
                }
            }
            let mut ids: Vec<&str> = d.constraints.iter().map(|c| c.id).collect();
            ids.dedup();
            assert_eq!(ids.len(), d.constraints.len());
        }
    }

    #[test]
    fn descriptors_serialize_without_functions() {
        let v = serde_json::to_value(find("enumToSubclasses").unwrap()).unwrap();
        assert_eq!(
            v["parameters"][0],
            serde_json::json!({"name":"class","type":"class-ref"})
        );
        assert_eq!(v["constraints"][0]["id"], "C1");
        assert_eq!(
            v["constraints"][0]["message"],
            "attribute must have an enumeration type"
        );
        assert!(v.get("execute").is_none());
    }

    #[test]
    fn upper_bound_values() {
        let mms = MetamodelSet::new();
        let r = |b: Binding| resolve_value(&mms, ParamType::UpperBound, &b);
        assert_eq!(r(Binding::from("*")), Ok(Value::Upper(None)));
        assert_eq!(r(Binding::from(3)), Ok(Value::Upper(Some(3))));
        assert_eq!(r(Binding::from("2")), Ok(Value::Upper(Some(2))));
        assert!(r(Binding::from(0)).is_err());
        assert!(r(Binding::from(true)).is_err());
    }
}
