//! JSON document format for metamodels.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{
    ClassData, ClassifierId, ClassifierKind, FeatureId, FeatureKind, MetaElement, MetamodelError, MetamodelSet,
    PackageId, ValueType,
};
use crate::json::to_canonical_string;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetamodelDoc {
    pub name: String,
    pub packages: Vec<PackageDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackageDoc {
    pub name: String,
    pub classifiers: Vec<ClassifierDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClassifierDoc {
    Class {
        name: String,
        #[serde(rename = "abstract")]
        is_abstract: bool,
        #[serde(rename = "super")]
        supers: Vec<String>,
        features: Vec<FeatureDoc>,
    },
    Enum {
        name: String,
        literals: Vec<String>,
    },
}

impl ClassifierDoc {
    pub fn name(&self) -> &str {
        match self {
            ClassifierDoc::Class { name, .. } | ClassifierDoc::Enum { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FeatureDoc {
    Attribute {
        name: String,
        /// `string`, `boolean`, `integer` or the FQN of an enumeration.
        #[serde(rename = "type")]
        value_type: String,
        lower: u32,
        upper: UpperBound,
    },
    Reference {
        name: String,
        target: String,
        containment: bool,
        lower: u32,
        upper: UpperBound,
    },
}

impl FeatureDoc {
    pub fn name(&self) -> &str {
        match self {
            FeatureDoc::Attribute { name, .. } | FeatureDoc::Reference { name, .. } => name,
        }
    }
}

/// Upper multiplicity bound; `"*"` in documents when unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpperBound(pub Option<u32>);

impl Serialize for UpperBound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(n) => s.serialize_u32(n),
            None => s.serialize_str("*"),
        }
    }
}

impl<'de> Deserialize<'de> for UpperBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(UpperBound(Some(n))),
            Raw::Str(s) if s == "*" => Ok(UpperBound(None)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "upper bound must be a positive integer or \"*\", got \"{s}\""
            ))),
        }
    }
}

/// Parses one metamodel document without resolving names.
pub fn parse_metamodel(text: &str) -> Result<MetamodelDoc, MetamodelError> {
    serde_json::from_str(text).map_err(|e| MetamodelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parses and resolves a single self-contained metamodel.
pub fn load_metamodel(text: &str) -> Result<MetamodelSet, MetamodelError> {
    MetamodelSet::from_docs(&[parse_metamodel(text)?])
}

/// Parses and resolves several metamodels that may refer to each other.
pub fn load_metamodel_set<S: AsRef<str>>(texts: &[S]) -> Result<MetamodelSet, MetamodelError> {
    let docs = texts
        .iter()
        .map(|t| parse_metamodel(t.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    MetamodelSet::from_docs(&docs)
}

impl MetamodelSet {
    /// Builds a set from documents. Classifiers are created first, then
    /// supertypes and features are resolved across the whole set.
    pub fn from_docs(docs: &[MetamodelDoc]) -> Result<Self, MetamodelError> {
        let mut set = MetamodelSet::new();
        let mut pending = Vec::new();
        for doc in docs {
            super::check_identifier(&doc.name, "metamodel")?;
            if set.metamodel_index(&doc.name).is_some() {
                return Err(MetamodelError::DuplicateName(doc.name.clone()));
            }
            let mm = set.push_metamodel(&doc.name);
            for p in &doc.packages {
                super::check_identifier(&p.name, &doc.name)?;
                let pkg = set.push_package(mm, &p.name);
                for c in &p.classifiers {
                    let id = set.add_classifier(pkg, c.name(), shell_kind(c), None);
                    pending.push((id, c));
                }
            }
        }
        // Names must be unique before anything resolves by name.
        set.check_names_unique()?;
        for (id, doc) in pending {
            set.fill_classifier(id, doc)?;
        }
        set.validate()?;
        Ok(set)
    }

    fn check_names_unique(&self) -> Result<(), MetamodelError> {
        for mm in &self.metamodels {
            let mut pkgs = std::collections::HashSet::new();
            for p in &mm.packages {
                if !pkgs.insert(&p.name) {
                    return Err(MetamodelError::DuplicateName(format!("{}.{}", mm.name, p.name)));
                }
                let mut names = std::collections::HashSet::new();
                for c in &p.classifiers {
                    let name = &self.classifier(*c).expect("fresh").name;
                    if !names.insert(name) {
                        return Err(MetamodelError::DuplicateName(self.classifier_fqn(*c)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Resolves supertypes and creates features of a classifier whose shell
    /// already exists.
    pub(crate) fn fill_classifier(&mut self, id: ClassifierId, doc: &ClassifierDoc) -> Result<(), MetamodelError> {
        let ClassifierDoc::Class { supers, features, .. } = doc else {
            return Ok(());
        };
        let context = self.classifier_fqn(id);
        let resolved = supers
            .iter()
            .map(|s| {
                self.resolve_class(s).map_err(|_| MetamodelError::Unresolved {
                    reference: s.clone(),
                    context: context.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(ClassifierKind::Class(c)) = self.classifier_mut(id).map(|c| &mut c.kind) {
            c.supers = resolved;
        }
        for f in features {
            self.add_feature_doc(id, f, None)?;
        }
        Ok(())
    }

    /// Creates a feature described by a document on `owner`.
    pub fn add_feature_doc(
        &mut self,
        owner: ClassifierId,
        doc: &FeatureDoc,
        position: Option<usize>,
    ) -> Result<FeatureId, MetamodelError> {
        let context = format!("{}.{}", self.classifier_fqn(owner), doc.name());
        let unresolved = |r: &str| MetamodelError::Unresolved {
            reference: r.to_string(),
            context: context.clone(),
        };
        let (kind, lower, upper) = match doc {
            FeatureDoc::Attribute {
                value_type,
                lower,
                upper,
                ..
            } => {
                let ty = match value_type.as_str() {
                    "string" => ValueType::String,
                    "boolean" => ValueType::Boolean,
                    "integer" => ValueType::Integer,
                    other => {
                        let e = self.resolve_classifier(other).map_err(|_| unresolved(other))?;
                        if self.classifier(e).and_then(|c| c.literals()).is_none() {
                            return Err(unresolved(other));
                        }
                        ValueType::Enum(e)
                    }
                };
                (FeatureKind::Attribute(ty), *lower, upper.0)
            }
            FeatureDoc::Reference {
                target,
                containment,
                lower,
                upper,
                ..
            } => {
                let t = self.resolve_class(target).map_err(|_| unresolved(target))?;
                (
                    FeatureKind::Reference {
                        target: t,
                        containment: *containment,
                    },
                    *lower,
                    upper.0,
                )
            }
        };
        self.add_feature(owner, doc.name(), kind, lower, upper, position)
    }

    /// Creates a classifier (and its features) from a document.
    pub fn add_classifier_doc(
        &mut self,
        package: PackageId,
        doc: &ClassifierDoc,
        position: Option<usize>,
    ) -> Result<ClassifierId, MetamodelError> {
        let id = self.add_classifier(package, doc.name(), shell_kind(doc), position);
        if let Err(e) = self.fill_classifier(id, doc) {
            // Undo the shell so a failed call leaves no trace.
            let _ = self.remove_classifier(id);
            return Err(e);
        }
        Ok(id)
    }

    pub fn to_docs(&self) -> Vec<MetamodelDoc> {
        self.metamodels
            .iter()
            .map(|mm| MetamodelDoc {
                name: mm.name.clone(),
                packages: mm
                    .packages
                    .iter()
                    .map(|p| PackageDoc {
                        name: p.name.clone(),
                        classifiers: p.classifiers.iter().map(|c| self.classifier_doc(*c)).collect(),
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn to_doc(&self, name: &str) -> Option<MetamodelDoc> {
        self.to_docs().into_iter().find(|d| d.name == name)
    }

    pub fn classifier_doc(&self, id: ClassifierId) -> ClassifierDoc {
        let c = self.classifier(id).expect("live classifier");
        match &c.kind {
            ClassifierKind::Class(ClassData {
                is_abstract,
                supers,
                features,
            }) => ClassifierDoc::Class {
                name: c.name.clone(),
                is_abstract: *is_abstract,
                supers: supers.iter().map(|s| self.classifier_fqn(*s)).collect(),
                features: features.iter().map(|f| self.feature_doc(*f)).collect(),
            },
            ClassifierKind::Enum { literals } => ClassifierDoc::Enum {
                name: c.name.clone(),
                literals: literals.clone(),
            },
        }
    }

    pub fn feature_doc(&self, id: FeatureId) -> FeatureDoc {
        let f = self.feature(id).expect("live feature");
        match &f.kind {
            FeatureKind::Attribute(ty) => FeatureDoc::Attribute {
                name: f.name.clone(),
                value_type: match ty {
                    ValueType::String => "string".into(),
                    ValueType::Boolean => "boolean".into(),
                    ValueType::Integer => "integer".into(),
                    ValueType::Enum(e) => self.classifier_fqn(*e),
                },
                lower: f.lower,
                upper: UpperBound(f.upper),
            },
            FeatureKind::Reference { target, containment } => FeatureDoc::Reference {
                name: f.name.clone(),
                target: self.classifier_fqn(*target),
                containment: *containment,
                lower: f.lower,
                upper: UpperBound(f.upper),
            },
        }
    }

    /// Byte-deterministic text of one metamodel.
    pub fn save_metamodel(&self, name: &str) -> Option<String> {
        self.to_doc(name).map(|d| to_canonical_string(&d))
    }

    /// Byte-deterministic text of all metamodels, in set order; used to
    /// compare metamodel states field by field.
    pub fn fingerprint(&self) -> String {
        to_canonical_string(&self.to_docs())
    }

    /// Looks an FQN up and describes what it names, for diagnostics.
    pub fn describe(&self, fq_name: &str) -> Option<&'static str> {
        match self.resolve(fq_name).ok()? {
            MetaElement::Package(_) => Some("package"),
            MetaElement::Classifier(c) if self.class(c).is_some() => Some("class"),
            MetaElement::Classifier(_) => Some("enumeration"),
            MetaElement::Feature(f) if self.feature(f)?.is_reference() => Some("reference"),
            MetaElement::Feature(_) => Some("attribute"),
        }
    }
}

fn shell_kind(doc: &ClassifierDoc) -> ClassifierKind {
    match doc {
        ClassifierDoc::Class { is_abstract, .. } => ClassifierKind::Class(ClassData {
            is_abstract: *is_abstract,
            supers: Vec::new(),
            features: Vec::new(),
        }),
        ClassifierDoc::Enum { literals, .. } => ClassifierKind::Enum {
            literals: literals.clone(),
        },
    }
}
