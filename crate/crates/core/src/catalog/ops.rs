use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{ConstraintSpec, OperationDescriptor, ParamSpec, ParamType, Resolved};
use crate::history::{MigrationError, Workspace};
use crate::metamodel::{
    check_identifier, ClassifierId, FeatureDoc, FeatureKind, MetaElement, MetamodelSet, PackageId, UpperBound,
    ValueType,
};
use crate::model::{ElementId, Scalar, Slot};

pub(super) fn all() -> Vec<OperationDescriptor> {
    vec![
        rename(),
        create_class(),
        create_attribute(),
        create_reference(),
        delete_feature(),
        enum_to_subclasses(),
        subclasses_to_enumeration(),
    ]
}

fn param(name: &'static str, ty: ParamType) -> ParamSpec {
    ParamSpec { name, ty }
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, MigrationError> {
    v.ok_or_else(|| MigrationError::failed(format!("binding {what} is missing or mistyped")))
}

fn is_identifier(name: &str) -> bool {
    check_identifier(name, "").is_ok()
}

fn has_instances(ws: &Workspace, class: ClassifierId) -> bool {
    ws.models.iter().any(|m| m.count_instances(&ws.metamodels, class) > 0)
}

fn package_has(mms: &MetamodelSet, pkg: PackageId, name: &str, except: Option<ClassifierId>) -> bool {
    mms.package(pkg).is_some_and(|p| {
        p.classifiers
            .iter()
            .any(|c| Some(*c) != except && mms.classifier(*c).is_some_and(|c| c.name == name))
    })
}

fn parse_supers(mms: &MetamodelSet, list: &str) -> Option<Vec<ClassifierId>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| mms.resolve_class(s).ok())
        .collect()
}

fn lower_fits(lower: i64, upper: Option<u32>) -> bool {
    lower >= 0 && u32::try_from(lower).is_ok() && upper.is_none_or(|u| lower <= i64::from(u))
}

// ---- rename -----------------------------------------------------------------

fn rename() -> OperationDescriptor {
    OperationDescriptor {
        name: "rename",
        label: "Rename",
        parameters: vec![
            param("element", ParamType::ElementRef),
            param("newName", ParamType::String),
        ],
        constraints: vec![
            ConstraintSpec {
                id: "R1",
                params: &["newName"],
                message: "new name must be an identifier",
                check: |_, b| Some(is_identifier(b.str("newName")?)),
            },
            ConstraintSpec {
                id: "R2",
                params: &["element", "newName"],
                message: "new name must be unique among siblings",
                check: |ws, b| {
                    let mms = &ws.metamodels;
                    let name = b.str("newName")?;
                    Some(match b.element("element")? {
                        MetaElement::Classifier(c) => !package_has(mms, mms.classifier(c)?.package, name, Some(c)),
                        MetaElement::Feature(f) => {
                            let owner = mms.feature(f)?.owner;
                            let mut classes = vec![owner];
                            classes.extend(mms.all_subclasses(owner));
                            !classes
                                .into_iter()
                                .flat_map(|c| mms.all_features(c))
                                .any(|g| g != f && mms.feature(g).is_some_and(|g| g.name == name))
                        }
                        MetaElement::Package(_) => false,
                    })
                },
            },
        ],
        execute: |ws, b| {
            let name = need(b.str("newName"), "newName")?.to_string();
            match need(b.element("element"), "element")? {
                MetaElement::Classifier(c) => {
                    need(ws.metamodels.classifier_mut(c), "element")?.name = name;
                }
                MetaElement::Feature(f) => {
                    need(ws.metamodels.feature_mut(f), "element")?.name = name;
                }
                MetaElement::Package(_) => return Err(MigrationError::failed("packages cannot be renamed")),
            }
            Ok(())
        },
    }
}

// ---- createClass --------------------------------------------------------------

fn create_class() -> OperationDescriptor {
    OperationDescriptor {
        name: "createClass",
        label: "Create Class",
        parameters: vec![
            param("package", ParamType::PackageRef),
            param("name", ParamType::String),
            param("abstract", ParamType::Boolean),
            param("superTypes", ParamType::String),
        ],
        constraints: vec![
            ConstraintSpec {
                id: "CC1",
                params: &["name"],
                message: "name must be an identifier",
                check: |_, b| Some(is_identifier(b.str("name")?)),
            },
            ConstraintSpec {
                id: "CC2",
                params: &["package", "name"],
                message: "name must be unique in the package",
                check: |ws, b| {
                    Some(!package_has(
                        &ws.metamodels,
                        b.package("package")?,
                        b.str("name")?,
                        None,
                    ))
                },
            },
            ConstraintSpec {
                id: "CC3",
                params: &["superTypes"],
                message: "supertypes must be distinct, existing classes",
                check: |ws, b| {
                    let supers = parse_supers(&ws.metamodels, b.str("superTypes")?);
                    Some(supers.is_some_and(|s| s.iter().collect::<HashSet<_>>().len() == s.len()))
                },
            },
            ConstraintSpec {
                id: "CC4",
                params: &["superTypes"],
                message: "features inherited from the supertypes must have distinct names",
                check: |ws, b| {
                    let mms = &ws.metamodels;
                    let supers = parse_supers(mms, b.str("superTypes")?)?;
                    let features: BTreeSet<_> = supers.into_iter().flat_map(|s| mms.all_features(s)).collect();
                    let names: HashSet<&str> = features
                        .iter()
                        .filter_map(|f| mms.feature(*f))
                        .map(|f| f.name.as_str())
                        .collect();
                    Some(names.len() == features.len())
                },
            },
        ],
        execute: |ws, b| {
            let pkg = need(b.package("package"), "package")?;
            let supers = need(
                parse_supers(&ws.metamodels, need(b.str("superTypes"), "superTypes")?),
                "superTypes",
            )?;
            ws.metamodels.add_class(
                pkg,
                need(b.str("name"), "name")?,
                need(b.bool("abstract"), "abstract")?,
                supers,
            );
            Ok(())
        },
    }
}

// ---- createAttribute / createReference ---------------------------------------------

fn fresh_name(ws: &Workspace, b: &Resolved) -> Option<bool> {
    let name = b.str("name")?;
    Some(
        !ws.metamodels
            .feature_names_in_hierarchy(b.class("class")?)
            .contains(name),
    )
}

fn lower_zero_if_populated(ws: &Workspace, b: &Resolved) -> Option<bool> {
    Some(b.int("lower")? == 0 || !has_instances(ws, b.class("class")?))
}

const LOWER_ZERO: &str = "lower bound must be 0 while the class has instances";

fn create_attribute() -> OperationDescriptor {
    OperationDescriptor {
        name: "createAttribute",
        label: "Create Attribute",
        parameters: vec![
            param("class", ParamType::ClassRef),
            param("name", ParamType::String),
            param("valueType", ParamType::String),
            param("lower", ParamType::Integer),
            param("upper", ParamType::UpperBound),
        ],
        constraints: vec![
            ConstraintSpec {
                id: "A1",
                params: &["name"],
                message: "name must be an identifier",
                check: |_, b| Some(is_identifier(b.str("name")?)),
            },
            ConstraintSpec {
                id: "A2",
                params: &["class", "name"],
                message: "name must be unique in the class hierarchy",
                check: fresh_name,
            },
            ConstraintSpec {
                id: "A3",
                params: &["valueType"],
                message: "value type must be string, boolean, integer or an enumeration",
                check: |ws, b| {
                    let ty = b.str("valueType")?;
                    Some(
                        matches!(ty, "string" | "boolean" | "integer")
                            || ws
                                .metamodels
                                .resolve_classifier(ty)
                                .is_ok_and(|c| ws.metamodels.classifier(c).and_then(|c| c.literals()).is_some()),
                    )
                },
            },
            ConstraintSpec {
                id: "A4",
                params: &["lower", "upper"],
                message: "attributes are single-valued: lower must be 0 or 1 and upper must be 1",
                check: |_, b| Some(matches!(b.int("lower")?, 0 | 1) && b.upper("upper")? == Some(1)),
            },
            ConstraintSpec {
                id: "A5",
                params: &["class", "lower"],
                message: LOWER_ZERO,
                check: lower_zero_if_populated,
            },
        ],
        execute: |ws, b| {
            let class = need(b.class("class"), "class")?;
            let doc = FeatureDoc::Attribute {
                name: need(b.str("name"), "name")?.to_string(),
                value_type: need(b.str("valueType"), "valueType")?.to_string(),
                lower: need(b.int("lower").and_then(|l| u32::try_from(l).ok()), "lower")?,
                upper: UpperBound(need(b.upper("upper"), "upper")?),
            };
            ws.metamodels.add_feature_doc(class, &doc, None)?;
            Ok(())
        },
    }
}

fn create_reference() -> OperationDescriptor {
    OperationDescriptor {
        name: "createReference",
        label: "Create Reference",
        parameters: vec![
            param("class", ParamType::ClassRef),
            param("name", ParamType::String),
            param("target", ParamType::ClassRef),
            param("containment", ParamType::Boolean),
            param("lower", ParamType::Integer),
            param("upper", ParamType::UpperBound),
        ],
        constraints: vec![
            ConstraintSpec {
                id: "B1",
                params: &["name"],
                message: "name must be an identifier",
                check: |_, b| Some(is_identifier(b.str("name")?)),
            },
            ConstraintSpec {
                id: "B2",
                params: &["class", "name"],
                message: "name must be unique in the class hierarchy",
                check: fresh_name,
            },
            ConstraintSpec {
                id: "B3",
                params: &["lower", "upper"],
                message: "bounds must satisfy 0 <= lower <= upper",
                check: |_, b| Some(lower_fits(b.int("lower")?, b.upper("upper")?)),
            },
            ConstraintSpec {
                id: "B4",
                params: &["class", "lower"],
                message: LOWER_ZERO,
                check: lower_zero_if_populated,
            },
        ],
        execute: |ws, b| {
            let class = need(b.class("class"), "class")?;
            let target = need(b.class("target"), "target")?;
            let doc = FeatureDoc::Reference {
                name: need(b.str("name"), "name")?.to_string(),
                target: ws.metamodels.classifier_fqn(target),
                containment: need(b.bool("containment"), "containment")?,
                lower: need(b.int("lower").and_then(|l| u32::try_from(l).ok()), "lower")?,
                upper: UpperBound(need(b.upper("upper"), "upper")?),
            };
            ws.metamodels.add_feature_doc(class, &doc, None)?;
            Ok(())
        },
    }
}

// ---- deleteFeature -------------------------------------------------------------

fn delete_feature() -> OperationDescriptor {
    OperationDescriptor {
        name: "deleteFeature",
        label: "Delete Feature",
        parameters: vec![param("feature", ParamType::FeatureRef)],
        constraints: vec![ConstraintSpec {
            id: "D1",
            params: &["feature"],
            message: "containment slots of the feature must be empty",
            check: |ws, b| {
                let f = b.feature("feature")?;
                if !ws.metamodels.feature(f)?.is_containment() {
                    return Some(true);
                }
                Some(
                    ws.models
                        .iter()
                        .all(|m| m.element_ids().all(|id| m.slot(id, f).is_none())),
                )
            },
        }],
        execute: |ws, b| {
            let f = need(b.feature("feature"), "feature")?;
            for m in &mut ws.models {
                m.drop_feature(f);
            }
            ws.metamodels.remove_feature(f)?;
            Ok(())
        },
    }
}

// ---- enumToSubclasses ---------------------------------------------------------------

fn enum_of(mms: &MetamodelSet, b: &Resolved) -> Option<ClassifierId> {
    match mms.feature(b.feature("attribute")?)?.kind {
        FeatureKind::Attribute(ValueType::Enum(e)) => Some(e),
        _ => None,
    }
}

fn enum_to_subclasses() -> OperationDescriptor {
    OperationDescriptor {
        name: "enumToSubclasses",
        label: "Enumeration to Sub Classes",
        parameters: vec![
            param("class", ParamType::ClassRef),
            param("attribute", ParamType::FeatureRef),
        ],
        constraints: vec![
            ConstraintSpec {
                id: "C1",
                params: &["attribute"],
                message: "attribute must have an enumeration type",
                check: |ws, b| Some(enum_of(&ws.metamodels, b).is_some()),
            },
            ConstraintSpec {
                id: "C2",
                params: &["class", "attribute"],
                message: "attribute must belong to the class",
                check: |ws, b| Some(ws.metamodels.feature(b.feature("attribute")?)?.owner == b.class("class")?),
            },
            ConstraintSpec {
                id: "C3",
                params: &["class", "attribute"],
                message: "no classifier in the class's package may be named like a literal",
                check: |ws, b| {
                    let mms = &ws.metamodels;
                    let Some(e) = enum_of(mms, b) else { return Some(true) };
                    let pkg = mms.classifier(b.class("class")?)?.package;
                    Some(
                        !mms.classifier(e)?
                            .literals()?
                            .iter()
                            .any(|l| package_has(mms, pkg, l, None)),
                    )
                },
            },
            ConstraintSpec {
                id: "C4",
                params: &["attribute"],
                message: "attribute must have multiplicity 1..1",
                check: |ws, b| {
                    let f = ws.metamodels.feature(b.feature("attribute")?)?;
                    Some(f.lower == 1 && f.upper == Some(1))
                },
            },
        ],
        execute: |ws, b| {
            let class = need(b.class("class"), "class")?;
            let attr = need(b.feature("attribute"), "attribute")?;
            let Workspace {
                metamodels: mms,
                models,
            } = ws;
            let enum_id = need(enum_of(mms, b), "attribute")?;
            let literals = need(mms.classifier(enum_id).and_then(|c| c.literals()), "attribute")?.to_vec();
            let pkg = need(mms.classifier(class), "class")?.package;

            let mut plan: Vec<Vec<(ElementId, String)>> = Vec::with_capacity(models.len());
            for m in models.iter() {
                let mut per_model = Vec::new();
                for id in m.element_ids() {
                    if m.element(id).is_some_and(|e| e.class() == class) {
                        let literal = m.attr(id, attr).and_then(Scalar::as_str).ok_or_else(|| {
                            MigrationError::failed(format!("element {id} has no value for {}", mms.feature_fqn(attr)))
                        })?;
                        per_model.push((id, literal.to_string()));
                    }
                }
                plan.push(per_model);
            }

            for m in models.iter_mut() {
                m.drop_feature(attr);
            }
            mms.remove_feature(attr)?;
            if let Some(crate::metamodel::ClassifierKind::Class(data)) = mms.classifier_mut(class).map(|c| &mut c.kind)
            {
                data.is_abstract = true;
            }
            let subclasses: BTreeMap<String, ClassifierId> = literals
                .iter()
                .map(|l| (l.clone(), mms.add_class(pkg, l, false, vec![class])))
                .collect();
            if mms.features_typed_by(enum_id).is_empty() {
                mms.remove_classifier(enum_id)?;
            }
            for (m, per_model) in models.iter_mut().zip(plan) {
                for (id, literal) in per_model {
                    let sub = need(subclasses.get(&literal).copied(), "literal")?;
                    m.retype(mms, id, sub)?;
                }
            }
            Ok(())
        },
    }
}

// ---- subClassesToEnumeration ----------------------------------------------------------

fn subclasses_to_enumeration() -> OperationDescriptor {
    OperationDescriptor {
        name: "subClassesToEnumeration",
        label: "Sub Classes to Enumeration",
        parameters: vec![
            param("class", ParamType::ClassRef),
            param("attributeName", ParamType::String),
            param("enumName", ParamType::String),
        ],
        constraints: vec![
            ConstraintSpec {
                id: "S1",
                params: &["class"],
                message: "class must be abstract",
                check: |ws, b| Some(ws.metamodels.class(b.class("class")?)?.is_abstract),
            },
            ConstraintSpec {
                id: "S2",
                params: &["class"],
                message: "class must have at least one subclass",
                check: |ws, b| Some(!ws.metamodels.direct_subclasses(b.class("class")?).is_empty()),
            },
            ConstraintSpec {
                id: "S3",
                params: &["class"],
                message:
                    "every subclass must be concrete, featureless, a leaf, and have the class as its only supertype",
                check: |ws, b| {
                    let mms = &ws.metamodels;
                    let class = b.class("class")?;
                    Some(mms.direct_subclasses(class).into_iter().all(|s| {
                        mms.class(s)
                            .is_some_and(|d| !d.is_abstract && d.features.is_empty() && d.supers == [class])
                            && mms.direct_subclasses(s).is_empty()
                    }))
                },
            },
            ConstraintSpec {
                id: "S4",
                params: &["class"],
                message: "no feature may refer to a subclass",
                check: |ws, b| {
                    let mms = &ws.metamodels;
                    Some(
                        mms.direct_subclasses(b.class("class")?)
                            .into_iter()
                            .all(|s| mms.features_typed_by(s).is_empty()),
                    )
                },
            },
            ConstraintSpec {
                id: "S5",
                params: &["class"],
                message: "subclass names must be distinct",
                check: |ws, b| {
                    let mms = &ws.metamodels;
                    let subs = mms.direct_subclasses(b.class("class")?);
                    let names: HashSet<&str> = subs
                        .iter()
                        .filter_map(|s| mms.classifier(*s))
                        .map(|c| c.name.as_str())
                        .collect();
                    Some(names.len() == subs.len())
                },
            },
            ConstraintSpec {
                id: "S6",
                params: &["class", "attributeName"],
                message: "attribute name must be a fresh identifier in the class hierarchy",
                check: |ws, b| {
                    let name = b.str("attributeName")?;
                    Some(
                        is_identifier(name)
                            && !ws
                                .metamodels
                                .feature_names_in_hierarchy(b.class("class")?)
                                .contains(name),
                    )
                },
            },
            ConstraintSpec {
                id: "S7",
                params: &["class", "enumName"],
                message: "enumeration name must be a fresh identifier in the class's package",
                check: |ws, b| {
                    let mms = &ws.metamodels;
                    let name = b.str("enumName")?;
                    let pkg = mms.classifier(b.class("class")?)?.package;
                    Some(is_identifier(name) && !package_has(mms, pkg, name, None))
                },
            },
        ],
        execute: |ws, b| {
            let class = need(b.class("class"), "class")?;
            let attr_name = need(b.str("attributeName"), "attributeName")?;
            let enum_name = need(b.str("enumName"), "enumName")?;
            let Workspace {
                metamodels: mms,
                models,
            } = ws;
            let subs = mms.direct_subclasses(class);
            let names: Vec<String> = subs
                .iter()
                .map(|s| mms.classifier(*s).map(|c| c.name.clone()))
                .collect::<Option<_>>()
                .ok_or_else(|| MigrationError::failed("unknown subclass"))?;
            let pkg = need(mms.classifier(class), "class")?.package;

            let plan: Vec<Vec<(ElementId, String)>> = models
                .iter()
                .map(|m| {
                    m.element_ids()
                        .filter_map(|id| {
                            let c = m.element(id)?.class();
                            subs.iter().position(|s| *s == c).map(|i| (id, names[i].clone()))
                        })
                        .collect()
                })
                .collect();

            if let Some(crate::metamodel::ClassifierKind::Class(data)) = mms.classifier_mut(class).map(|c| &mut c.kind)
            {
                data.is_abstract = false;
            }
            for (m, per_model) in models.iter_mut().zip(&plan) {
                for (id, _) in per_model {
                    m.retype(mms, *id, class)?;
                }
            }
            for s in &subs {
                mms.remove_classifier(*s)?;
            }
            let enum_id = mms.add_enum(pkg, enum_name, names);
            let attr = mms.add_feature(
                class,
                attr_name,
                FeatureKind::Attribute(ValueType::Enum(enum_id)),
                1,
                Some(1),
                None,
            )?;
            for (m, per_model) in models.iter_mut().zip(plan) {
                for (id, literal) in per_model {
                    m.set_slot(mms, id, attr, Some(Slot::Value(Scalar::Literal(literal))))?;
                }
            }
            Ok(())
        },
    }
}
