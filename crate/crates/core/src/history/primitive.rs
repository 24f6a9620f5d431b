//! Primitive metamodel changes, as recorded by custom change groups.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::metamodel::{
    ClassifierDoc, ClassifierKind, FeatureDoc, FeatureKind, MetaElement, MetamodelError, MetamodelSet, ResolveError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Name,
    Abstract,
    Lower,
    Upper,
    Target,
}

/// One primitive metamodel change. `old` values and positions may be left
/// out when recording; applying a change fills them in, which makes every
/// stored change invertible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PrimitiveChange {
    CreateClassifier {
        package: String,
        classifier: ClassifierDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
    },
    DeleteClassifier {
        classifier: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        old: Option<ClassifierDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
    },
    CreateFeature {
        class: String,
        feature: FeatureDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
    },
    DeleteFeature {
        feature: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        old: Option<FeatureDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
    },
    SetProperty {
        element: String,
        property: Property,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        old: Option<Json>,
        new: Json,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrimitiveError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Metamodel(#[from] MetamodelError),
    #[error("{element}: property {property:?} does not apply")]
    NotApplicable { element: String, property: Property },
    #[error("{element}: bad value {value} for {property:?}")]
    BadValue {
        element: String,
        property: Property,
        value: Json,
    },
    #[error("{element}: recorded old value {recorded} does not match current value {current}")]
    StaleOld {
        element: String,
        recorded: Json,
        current: Json,
    },
    #[error("change is incomplete and cannot be inverted: {0}")]
    Incomplete(String),
}

fn parent_of(fqn: &str) -> &str {
    fqn.rsplit_once('.').map_or("", |(p, _)| p)
}

impl PrimitiveChange {
    /// Applies the change and completes `old` values and positions.
    pub fn apply(&mut self, mms: &mut MetamodelSet) -> Result<(), PrimitiveError> {
        match self {
            PrimitiveChange::CreateClassifier {
                package,
                classifier,
                position,
            } => {
                let pkg = mms.resolve_package(package)?;
                let id = mms.add_classifier_doc(pkg, classifier, *position)?;
                let list = &mms.package(pkg).expect("resolved").classifiers;
                *position = list.iter().position(|c| *c == id);
            }
            PrimitiveChange::DeleteClassifier {
                classifier,
                old,
                position,
            } => {
                let id = mms.resolve_classifier(classifier)?;
                let doc = mms.classifier_doc(id);
                check_old(classifier, old, &doc)?;
                let (_, _, pos) = mms.remove_classifier(id)?;
                *old = Some(doc);
                *position = Some(pos);
            }
            PrimitiveChange::CreateFeature {
                class,
                feature,
                position,
            } => {
                let owner = mms.resolve_class(class)?;
                let id = mms.add_feature_doc(owner, feature, *position)?;
                *position = mms.class(owner).and_then(|c| c.features.iter().position(|f| *f == id));
            }
            PrimitiveChange::DeleteFeature { feature, old, position } => {
                let id = mms.resolve_feature(feature)?;
                let doc = mms.feature_doc(id);
                check_old(feature, old, &doc)?;
                let (_, pos) = mms.remove_feature(id)?;
                *old = Some(doc);
                *position = Some(pos);
            }
            PrimitiveChange::SetProperty {
                element,
                property,
                old,
                new,
            } => {
                let target = mms.resolve(element)?;
                let current = get_property(mms, element, target, *property)?;
                if let Some(recorded) = old.as_ref() {
                    if *recorded != current {
                        return Err(PrimitiveError::StaleOld {
                            element: element.clone(),
                            recorded: recorded.clone(),
                            current,
                        });
                    }
                }
                set_property(mms, element, target, *property, new)?;
                *old = Some(current);
            }
        }
        Ok(())
    }

    /// The change that undoes this one. Only complete changes (as left by
    /// [`apply`](Self::apply)) can be inverted.
    pub fn invert(&self) -> Result<PrimitiveChange, PrimitiveError> {
        let incomplete = |what: &str| PrimitiveError::Incomplete(what.to_string());
        Ok(match self {
            PrimitiveChange::CreateClassifier {
                package,
                classifier,
                position,
            } => PrimitiveChange::DeleteClassifier {
                classifier: format!("{package}.{}", classifier.name()),
                old: Some(classifier.clone()),
                position: *position,
            },
            PrimitiveChange::DeleteClassifier {
                classifier,
                old,
                position,
            } => PrimitiveChange::CreateClassifier {
                package: parent_of(classifier).to_string(),
                classifier: old.clone().ok_or_else(|| incomplete(classifier))?,
                position: *position,
            },
            PrimitiveChange::CreateFeature {
                class,
                feature,
                position,
            } => PrimitiveChange::DeleteFeature {
                feature: format!("{class}.{}", feature.name()),
                old: Some(feature.clone()),
                position: *position,
            },
            PrimitiveChange::DeleteFeature { feature, old, position } => PrimitiveChange::CreateFeature {
                class: parent_of(feature).to_string(),
                feature: old.clone().ok_or_else(|| incomplete(feature))?,
                position: *position,
            },
            PrimitiveChange::SetProperty {
                element,
                property,
                old,
                new,
            } => {
                let old = old.clone().ok_or_else(|| incomplete(element))?;
                let element = match (property, new.as_str()) {
                    (Property::Name, Some(n)) => format!("{}.{n}", parent_of(element)),
                    _ => element.clone(),
                };
                PrimitiveChange::SetProperty {
                    element,
                    property: *property,
                    old: Some(new.clone()),
                    new: old,
                }
            }
        })
    }
}

fn check_old<T: Serialize + PartialEq>(element: &str, old: &Option<T>, current: &T) -> Result<(), PrimitiveError> {
    match old {
        Some(o) if o != current => Err(PrimitiveError::StaleOld {
            element: element.to_string(),
            recorded: serde_json::to_value(o).unwrap_or(Json::Null),
            current: serde_json::to_value(current).unwrap_or(Json::Null),
        }),
        _ => Ok(()),
    }
}

fn upper_json(upper: Option<u32>) -> Json {
    upper.map_or_else(|| Json::from("*"), Json::from)
}

fn get_property(
    mms: &MetamodelSet,
    element: &str,
    target: MetaElement,
    property: Property,
) -> Result<Json, PrimitiveError> {
    let not_applicable = || PrimitiveError::NotApplicable {
        element: element.to_string(),
        property,
    };
    match (target, property) {
        (MetaElement::Classifier(c), Property::Name) => {
            Ok(Json::from(mms.classifier(c).expect("resolved").name.clone()))
        }
        (MetaElement::Classifier(c), Property::Abstract) => mms
            .class(c)
            .map(|d| Json::from(d.is_abstract))
            .ok_or_else(not_applicable),
        (MetaElement::Feature(f), _) => {
            let feature = mms.feature(f).expect("resolved");
            match property {
                Property::Name => Ok(Json::from(feature.name.clone())),
                Property::Lower => Ok(Json::from(feature.lower)),
                Property::Upper => Ok(upper_json(feature.upper)),
                Property::Target => feature
                    .reference_target()
                    .map(|t| Json::from(mms.classifier_fqn(t)))
                    .ok_or_else(not_applicable),
                Property::Abstract => Err(not_applicable()),
            }
        }
        _ => Err(not_applicable()),
    }
}

fn set_property(
    mms: &mut MetamodelSet,
    element: &str,
    target: MetaElement,
    property: Property,
    value: &Json,
) -> Result<(), PrimitiveError> {
    let bad = || PrimitiveError::BadValue {
        element: element.to_string(),
        property,
        value: value.clone(),
    };
    match (target, property) {
        (MetaElement::Classifier(c), Property::Name) => {
            let name = value.as_str().ok_or_else(bad)?;
            crate::metamodel::check_identifier(name, element)?;
            mms.classifier_mut(c).expect("resolved").name = name.to_string();
        }
        (MetaElement::Classifier(c), Property::Abstract) => {
            let flag = value.as_bool().ok_or_else(bad)?;
            match &mut mms.classifier_mut(c).expect("resolved").kind {
                ClassifierKind::Class(data) => data.is_abstract = flag,
                ClassifierKind::Enum { .. } => return Err(bad()),
            }
        }
        (MetaElement::Feature(f), Property::Name) => {
            let name = value.as_str().ok_or_else(bad)?;
            crate::metamodel::check_identifier(name, element)?;
            mms.feature_mut(f).expect("resolved").name = name.to_string();
        }
        (MetaElement::Feature(f), Property::Lower) => {
            let lower = value.as_u64().and_then(|v| u32::try_from(v).ok()).ok_or_else(bad)?;
            mms.feature_mut(f).expect("resolved").lower = lower;
        }
        (MetaElement::Feature(f), Property::Upper) => {
            let upper = match value {
                Json::String(s) if s == "*" => None,
                other => Some(
                    other
                        .as_u64()
                        .and_then(|v| u32::try_from(v).ok())
                        .filter(|v| *v > 0)
                        .ok_or_else(bad)?,
                ),
            };
            mms.feature_mut(f).expect("resolved").upper = upper;
        }
        (MetaElement::Feature(f), Property::Target) => {
            let fqn = value.as_str().ok_or_else(bad)?;
            let class = mms.resolve_class(fqn)?;
            match &mut mms.feature_mut(f).expect("resolved").kind {
                FeatureKind::Reference { target, .. } => *target = class,
                FeatureKind::Attribute(_) => return Err(bad()),
            }
        }
        _ => {
            return Err(PrimitiveError::NotApplicable {
                element: element.to_string(),
                property,
            })
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metamodel::load_metamodel;

    const MM: &str = r#"{"name":"m","packages":[{"name":"p","classifiers":[
        {"kind":"class","name":"A","abstract":false,"super":[],"features":[
            {"kind":"attribute","name":"x","type":"string","lower":0,"upper":1},
            {"kind":"reference","name":"r","target":"m.p.A","containment":false,"lower":0,"upper":"*"}]},
        {"kind":"class","name":"B","abstract":false,"super":[],"features":[]}]}]}"#;

    fn round_trip(mut change: PrimitiveChange) {
        let mut mms = load_metamodel(MM).unwrap();
        let before = mms.fingerprint();
        change.apply(&mut mms).unwrap();
        assert_ne!(mms.fingerprint(), before, "{change:?} changed nothing");
        let mut inverse = change.invert().unwrap();
        inverse.apply(&mut mms).unwrap();
        assert_eq!(mms.fingerprint(), before, "{change:?}");
        mms.validate().unwrap();
    }

    #[test]
    fn every_kind_inverts() {
        round_trip(PrimitiveChange::CreateClassifier {
            package: "m.p".into(),
            classifier: ClassifierDoc::Enum {
                name: "E".into(),
                literals: vec!["L".into()],
            },
            position: Some(0),
        });
        round_trip(PrimitiveChange::DeleteClassifier {
            classifier: "m.p.B".into(),
            old: None,
            position: None,
        });
        round_trip(PrimitiveChange::CreateFeature {
            class: "m.p.B".into(),
            feature: FeatureDoc::Reference {
                name: "a".into(),
                target: "m.p.A".into(),
                containment: true,
                lower: 0,
                upper: crate::metamodel::UpperBound(None),
            },
            position: None,
        });
        round_trip(PrimitiveChange::DeleteFeature {
            feature: "m.p.A.x".into(),
            old: None,
            position: None,
        });
        for (element, property, new) in [
            ("m.p.A", Property::Name, Json::from("Z")),
            ("m.p.A", Property::Abstract, Json::from(true)),
            ("m.p.A.x", Property::Name, Json::from("y")),
            ("m.p.A.r", Property::Lower, Json::from(1)),
            ("m.p.A.r", Property::Upper, Json::from(3)),
            ("m.p.A.r", Property::Target, Json::from("m.p.B")),
        ] {
            round_trip(PrimitiveChange::SetProperty {
                element: element.into(),
                property,
                old: None,
                new,
            });
        }
    }

    #[test]
    fn deleting_a_missing_feature_fails() {
        let mut mms = load_metamodel(MM).unwrap();
        let mut change = PrimitiveChange::DeleteFeature {
            feature: "m.p.A.nope".into(),
            old: None,
            position: None,
        };
        assert!(matches!(change.apply(&mut mms), Err(PrimitiveError::Resolve(_))));
    }

    #[test]
    fn stale_old_value_is_rejected() {
        let mut mms = load_metamodel(MM).unwrap();
        let mut change = PrimitiveChange::SetProperty {
            element: "m.p.A".into(),
            property: Property::Abstract,
            old: Some(Json::from(true)),
            new: Json::from(false),
        };
        assert!(matches!(change.apply(&mut mms), Err(PrimitiveError::StaleOld { .. })));
    }

    #[test]
    fn json_shape_is_kebab_tagged() {
        let change = PrimitiveChange::DeleteFeature {
            feature: "m.p.A.x".into(),
            old: None,
            position: None,
        };
        assert_eq!(
            serde_json::to_value(&change).unwrap(),
            serde_json::json!({"kind":"delete-feature","feature":"m.p.A.x"})
        );
    }
}
