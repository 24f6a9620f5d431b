//! Metamodels: packages of classes and enumerations, with attribute and
//! reference features.
//!
//! A [`MetamodelSet`] owns every metamodel that models may instantiate.
//! Classifiers and features live in arenas addressed by [`ClassifierId`] and
//! [`FeatureId`], so models keep pointing at the same metamodel element when
//! it is renamed. Names only matter at the boundaries: fully qualified names
//! (`mm.pkg.Class`, `mm.pkg.Class.feature`) are used by serialized documents,
//! history records and operation bindings.

mod format;

pub use format::{
    load_metamodel, load_metamodel_set, parse_metamodel, ClassifierDoc, FeatureDoc, MetamodelDoc, PackageDoc,
    UpperBound,
};

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassifierId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureId(pub(crate) u32);

/// Position of a package: (metamodel index, package index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PackageId {
    pub(crate) metamodel: usize,
    pub(crate) package: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueType {
    String,
    Boolean,
    Integer,
    Enum(ClassifierId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureKind {
    Attribute(ValueType),
    Reference { target: ClassifierId, containment: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub owner: ClassifierId,
    pub kind: FeatureKind,
    pub lower: u32,
    /// `None` is unbounded.
    pub upper: Option<u32>,
}

impl Feature {
    pub fn is_reference(&self) -> bool {
        matches!(self.kind, FeatureKind::Reference { .. })
    }

    pub fn is_containment(&self) -> bool {
        matches!(self.kind, FeatureKind::Reference { containment: true, .. })
    }

    pub fn reference_target(&self) -> Option<ClassifierId> {
        match self.kind {
            FeatureKind::Reference { target, .. } => Some(target),
            FeatureKind::Attribute(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassData {
    pub is_abstract: bool,
    pub supers: Vec<ClassifierId>,
    pub features: Vec<FeatureId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifierKind {
    Class(ClassData),
    Enum { literals: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classifier {
    pub name: String,
    pub package: PackageId,
    pub kind: ClassifierKind,
}

impl Classifier {
    pub fn as_class(&self) -> Option<&ClassData> {
        match &self.kind {
            ClassifierKind::Class(c) => Some(c),
            ClassifierKind::Enum { .. } => None,
        }
    }

    pub fn literals(&self) -> Option<&[String]> {
        match &self.kind {
            ClassifierKind::Enum { literals } => Some(literals),
            ClassifierKind::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Package {
    pub name: String,
    pub classifiers: Vec<ClassifierId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metamodel {
    pub name: String,
    pub packages: Vec<Package>,
}

/// A metamodel element addressed by a fully qualified name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaElement {
    Package(PackageId),
    Classifier(ClassifierId),
    Feature(FeatureId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetamodelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("supertype cycle through {0}")]
    SupertypeCycle(String),
    #[error("unresolved reference {reference} in {context}")]
    Unresolved { reference: String, context: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot resolve '{segment}' in {fq_name}")]
pub struct ResolveError {
    pub fq_name: String,
    /// First path segment that did not resolve.
    pub segment: String,
}

/// All metamodels known to an engine instance, with cross-metamodel
/// references resolved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetamodelSet {
    metamodels: Vec<Metamodel>,
    classifiers: Vec<Option<Classifier>>,
    features: Vec<Option<Feature>>,
}

impl MetamodelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn metamodels(&self) -> &[Metamodel] {
        &self.metamodels
    }

    pub fn metamodel_names(&self) -> Vec<String> {
        self.metamodels.iter().map(|m| m.name.clone()).collect()
    }

    pub fn metamodel_index(&self, name: &str) -> Option<usize> {
        self.metamodels.iter().position(|m| m.name == name)
    }

    pub fn classifier(&self, id: ClassifierId) -> Option<&Classifier> {
        self.classifiers.get(id.0 as usize).and_then(Option::as_ref)
    }

    pub fn feature(&self, id: FeatureId) -> Option<&Feature> {
        self.features.get(id.0 as usize).and_then(Option::as_ref)
    }

    pub fn class(&self, id: ClassifierId) -> Option<&ClassData> {
        self.classifier(id).and_then(Classifier::as_class)
    }

    pub fn package(&self, id: PackageId) -> Option<&Package> {
        self.metamodels
            .get(id.metamodel)
            .and_then(|m| m.packages.get(id.package))
    }

    /// Live classifiers in declaration order.
    pub fn classifier_ids(&self) -> impl Iterator<Item = ClassifierId> + '_ {
        self.metamodels
            .iter()
            .flat_map(|m| m.packages.iter())
            .flat_map(|p| p.classifiers.iter().copied())
    }

    /// Live features in declaration order.
    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.classifier_ids()
            .filter_map(|c| self.class(c))
            .flat_map(|c| c.features.iter().copied())
    }

    pub fn package_fqn(&self, id: PackageId) -> String {
        let mm = &self.metamodels[id.metamodel];
        format!("{}.{}", mm.name, mm.packages[id.package].name)
    }

    pub fn classifier_fqn(&self, id: ClassifierId) -> String {
        match self.classifier(id) {
            Some(c) => format!("{}.{}", self.package_fqn(c.package), c.name),
            None => format!("<deleted classifier #{}>", id.0),
        }
    }

    pub fn feature_fqn(&self, id: FeatureId) -> String {
        match self.feature(id) {
            Some(f) => format!("{}.{}", self.classifier_fqn(f.owner), f.name),
            None => format!("<deleted feature #{}>", id.0),
        }
    }

    /// Resolves `mm.pkg`, `mm.pkg.Classifier` or `mm.pkg.Class.feature`.
    pub fn resolve(&self, fq_name: &str) -> Result<MetaElement, ResolveError> {
        let fail = |segment: &str| ResolveError {
            fq_name: fq_name.to_string(),
            segment: segment.to_string(),
        };
        let segments: Vec<&str> = fq_name.split('.').collect();
        if segments.len() < 2 || segments.len() > 4 {
            return Err(fail(fq_name));
        }
        let mm_index = self.metamodel_index(segments[0]).ok_or_else(|| fail(segments[0]))?;
        let mm = &self.metamodels[mm_index];
        let pkg_index = mm
            .packages
            .iter()
            .position(|p| p.name == segments[1])
            .ok_or_else(|| fail(segments[1]))?;
        let pkg = PackageId {
            metamodel: mm_index,
            package: pkg_index,
        };
        if segments.len() == 2 {
            return Ok(MetaElement::Package(pkg));
        }
        let classifier = mm.packages[pkg_index]
            .classifiers
            .iter()
            .copied()
            .find(|c| self.classifier(*c).is_some_and(|c| c.name == segments[2]))
            .ok_or_else(|| fail(segments[2]))?;
        if segments.len() == 3 {
            return Ok(MetaElement::Classifier(classifier));
        }
        let feature = self
            .class(classifier)
            .and_then(|c| {
                c.features
                    .iter()
                    .copied()
                    .find(|f| self.feature(*f).is_some_and(|f| f.name == segments[3]))
            })
            .ok_or_else(|| fail(segments[3]))?;
        Ok(MetaElement::Feature(feature))
    }

    pub fn resolve_package(&self, fq_name: &str) -> Result<PackageId, ResolveError> {
        match self.resolve(fq_name)? {
            MetaElement::Package(p) => Ok(p),
            _ => Err(ResolveError {
                fq_name: fq_name.to_string(),
                segment: fq_name.to_string(),
            }),
        }
    }

    pub fn resolve_classifier(&self, fq_name: &str) -> Result<ClassifierId, ResolveError> {
        match self.resolve(fq_name)? {
            MetaElement::Classifier(c) => Ok(c),
            _ => Err(ResolveError {
                fq_name: fq_name.to_string(),
                segment: fq_name.rsplit('.').next().unwrap_or(fq_name).to_string(),
            }),
        }
    }

    /// Like [`resolve_classifier`](Self::resolve_classifier) but rejects enumerations.
    pub fn resolve_class(&self, fq_name: &str) -> Result<ClassifierId, ResolveError> {
        let id = self.resolve_classifier(fq_name)?;
        if self.class(id).is_some() {
            Ok(id)
        } else {
            Err(ResolveError {
                fq_name: fq_name.to_string(),
                segment: fq_name.rsplit('.').next().unwrap_or(fq_name).to_string(),
            })
        }
    }

    pub fn resolve_feature(&self, fq_name: &str) -> Result<FeatureId, ResolveError> {
        match self.resolve(fq_name)? {
            MetaElement::Feature(f) => Ok(f),
            _ => Err(ResolveError {
                fq_name: fq_name.to_string(),
                segment: fq_name.rsplit('.').next().unwrap_or(fq_name).to_string(),
            }),
        }
    }

    /// `class` itself followed by its transitive supertypes, breadth first,
    /// without duplicates.
    pub fn all_supertypes(&self, class: ClassifierId) -> Vec<ClassifierId> {
        let mut out = vec![class];
        let mut i = 0;
        while i < out.len() {
            if let Some(c) = self.class(out[i]) {
                for s in &c.supers {
                    if !out.contains(s) {
                        out.push(*s);
                    }
                }
            }
            i += 1;
        }
        out
    }

    /// True when `sub` equals or specializes `sup`.
    pub fn conforms_to(&self, sub: ClassifierId, sup: ClassifierId) -> bool {
        if sub == sup {
            return true;
        }
        let mut stack = vec![sub];
        let mut seen = HashSet::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            if let Some(data) = self.class(c) {
                for s in &data.supers {
                    if *s == sup {
                        return true;
                    }
                    stack.push(*s);
                }
            }
        }
        false
    }

    /// Inherited features first (supertypes in declaration order), then own.
    pub fn all_features(&self, class: ClassifierId) -> Vec<FeatureId> {
        let mut out = Vec::new();
        let mut visited = HashSet::new();
        self.collect_features(class, &mut out, &mut visited);
        out
    }

    fn collect_features(&self, class: ClassifierId, out: &mut Vec<FeatureId>, visited: &mut HashSet<ClassifierId>) {
        if !visited.insert(class) {
            return;
        }
        if let Some(c) = self.class(class) {
            for s in &c.supers {
                self.collect_features(*s, out, visited);
            }
            out.extend(c.features.iter().copied());
        }
    }

    pub fn feature_by_name(&self, class: ClassifierId, name: &str) -> Option<FeatureId> {
        self.all_features(class)
            .into_iter()
            .find(|f| self.feature(*f).is_some_and(|f| f.name == name))
    }

    /// Classes listing `class` as a direct supertype.
    pub fn direct_subclasses(&self, class: ClassifierId) -> Vec<ClassifierId> {
        self.classifier_ids()
            .filter(|c| self.class(*c).is_some_and(|d| d.supers.contains(&class)))
            .collect()
    }

    pub fn all_subclasses(&self, class: ClassifierId) -> Vec<ClassifierId> {
        self.classifier_ids()
            .filter(|c| *c != class && self.class(*c).is_some() && self.conforms_to(*c, class))
            .collect()
    }

    /// Features whose type (reference target or enum attribute type) is `id`.
    pub fn features_typed_by(&self, id: ClassifierId) -> Vec<FeatureId> {
        self.feature_ids()
            .filter(|f| match &self.feature(*f).map(|f| &f.kind) {
                Some(FeatureKind::Reference { target, .. }) => *target == id,
                Some(FeatureKind::Attribute(ValueType::Enum(e))) => *e == id,
                _ => false,
            })
            .collect()
    }

    /// Names visible on `class`: its own and inherited features, plus those
    /// of every subclass (a new feature must not shadow any of them).
    pub fn feature_names_in_hierarchy(&self, class: ClassifierId) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        let mut classes = vec![class];
        classes.extend(self.all_subclasses(class));
        for c in classes {
            for f in self.all_features(c) {
                if let Some(f) = self.feature(f) {
                    names.insert(f.name.clone());
                }
            }
        }
        names
    }

    // ---- mutation ----------------------------------------------------------

    pub(crate) fn push_metamodel(&mut self, name: &str) -> usize {
        self.metamodels.push(Metamodel {
            name: name.to_string(),
            packages: Vec::new(),
        });
        self.metamodels.len() - 1
    }

    pub(crate) fn push_package(&mut self, metamodel: usize, name: &str) -> PackageId {
        let mm = &mut self.metamodels[metamodel];
        mm.packages.push(Package {
            name: name.to_string(),
            classifiers: Vec::new(),
        });
        PackageId {
            metamodel,
            package: mm.packages.len() - 1,
        }
    }

    /// Inserts a classifier at `position` within its package (appends when
    /// `None`). Name uniqueness is left to [`validate`](Self::validate).
    pub fn add_classifier(
        &mut self,
        package: PackageId,
        name: &str,
        kind: ClassifierKind,
        position: Option<usize>,
    ) -> ClassifierId {
        let id = ClassifierId(self.classifiers.len() as u32);
        self.classifiers.push(Some(Classifier {
            name: name.to_string(),
            package,
            kind,
        }));
        let list = &mut self.metamodels[package.metamodel].packages[package.package].classifiers;
        match position {
            Some(p) if p <= list.len() => list.insert(p, id),
            _ => list.push(id),
        }
        id
    }

    pub fn add_class(
        &mut self,
        package: PackageId,
        name: &str,
        is_abstract: bool,
        supers: Vec<ClassifierId>,
    ) -> ClassifierId {
        self.add_classifier(
            package,
            name,
            ClassifierKind::Class(ClassData {
                is_abstract,
                supers,
                features: Vec::new(),
            }),
            None,
        )
    }

    pub fn add_enum(&mut self, package: PackageId, name: &str, literals: Vec<String>) -> ClassifierId {
        self.add_classifier(package, name, ClassifierKind::Enum { literals }, None)
    }

    /// Adds a feature to `owner`, inserting at `position` among its own
    /// features (appends when `None`).
    pub fn add_feature(
        &mut self,
        owner: ClassifierId,
        name: &str,
        kind: FeatureKind,
        lower: u32,
        upper: Option<u32>,
        position: Option<usize>,
    ) -> Result<FeatureId, MetamodelError> {
        let fqn = self.classifier_fqn(owner);
        let id = FeatureId(self.features.len() as u32);
        let class = match self.classifiers.get_mut(owner.0 as usize).and_then(Option::as_mut) {
            Some(Classifier {
                kind: ClassifierKind::Class(c),
                ..
            }) => c,
            _ => return Err(MetamodelError::Invalid(format!("{fqn} is not a class"))),
        };
        match position {
            Some(p) if p <= class.features.len() => class.features.insert(p, id),
            _ => class.features.push(id),
        }
        self.features.push(Some(Feature {
            name: name.to_string(),
            owner,
            kind,
            lower,
            upper,
        }));
        Ok(id)
    }

    /// Removes a feature; returns it with its former position among the
    /// owner's features.
    pub fn remove_feature(&mut self, id: FeatureId) -> Result<(Feature, usize), MetamodelError> {
        let feature = self
            .features
            .get_mut(id.0 as usize)
            .and_then(Option::take)
            .ok_or_else(|| MetamodelError::Invalid(format!("unknown feature #{}", id.0)))?;
        let position = match self.classifiers[feature.owner.0 as usize].as_mut() {
            Some(Classifier {
                kind: ClassifierKind::Class(c),
                ..
            }) => {
                let p = c.features.iter().position(|f| *f == id).unwrap_or(0);
                c.features.retain(|f| *f != id);
                p
            }
            _ => 0,
        };
        Ok((feature, position))
    }

    /// Removes a classifier together with its own features. Fails while any
    /// other classifier or feature still refers to it.
    pub fn remove_classifier(&mut self, id: ClassifierId) -> Result<(Classifier, Vec<Feature>, usize), MetamodelError> {
        let fqn = self.classifier_fqn(id);
        if self.classifier(id).is_none() {
            return Err(MetamodelError::Invalid(format!("unknown classifier {fqn}")));
        }
        let own_features: Vec<FeatureId> = self.class(id).map(|c| c.features.clone()).unwrap_or_default();
        let users: Vec<String> = self
            .features_typed_by(id)
            .into_iter()
            .filter(|f| !own_features.contains(f))
            .map(|f| self.feature_fqn(f))
            .chain(self.direct_subclasses(id).into_iter().map(|c| self.classifier_fqn(c)))
            .collect();
        if !users.is_empty() {
            return Err(MetamodelError::Invalid(format!(
                "{fqn} is still used by {}",
                users.join(", ")
            )));
        }
        let features = own_features
            .into_iter()
            .filter_map(|f| self.features[f.0 as usize].take())
            .collect();
        let classifier = self.classifiers[id.0 as usize].take().expect("checked above");
        let list = &mut self.metamodels[classifier.package.metamodel].packages[classifier.package.package].classifiers;
        let position = list.iter().position(|c| *c == id).unwrap_or(0);
        list.retain(|c| *c != id);
        Ok((classifier, features, position))
    }

    pub fn classifier_mut(&mut self, id: ClassifierId) -> Option<&mut Classifier> {
        self.classifiers.get_mut(id.0 as usize).and_then(Option::as_mut)
    }

    pub fn feature_mut(&mut self, id: FeatureId) -> Option<&mut Feature> {
        self.features.get_mut(id.0 as usize).and_then(Option::as_mut)
    }

    /// Checks every structural invariant: unique names, acyclic supertypes,
    /// valid feature types and bounds, no feature shadowing.
    pub fn validate(&self) -> Result<(), MetamodelError> {
        let mut mm_names = HashSet::new();
        for mm in &self.metamodels {
            if !mm_names.insert(mm.name.as_str()) {
                return Err(MetamodelError::DuplicateName(mm.name.clone()));
            }
            let mut pkg_names = HashSet::new();
            for p in &mm.packages {
                if !pkg_names.insert(p.name.as_str()) {
                    return Err(MetamodelError::DuplicateName(format!("{}.{}", mm.name, p.name)));
                }
                let mut names = HashSet::new();
                for c in &p.classifiers {
                    let classifier = self.classifier(*c).ok_or_else(|| {
                        MetamodelError::Invalid(format!("package {}.{} lists a deleted classifier", mm.name, p.name))
                    })?;
                    check_identifier(&classifier.name, &self.classifier_fqn(*c))?;
                    if !names.insert(classifier.name.as_str()) {
                        return Err(MetamodelError::DuplicateName(self.classifier_fqn(*c)));
                    }
                    if let ClassifierKind::Enum { literals } = &classifier.kind {
                        let mut seen = HashSet::new();
                        for l in literals {
                            check_identifier(l, &self.classifier_fqn(*c))?;
                            if !seen.insert(l) {
                                return Err(MetamodelError::DuplicateName(format!(
                                    "{}.{l}",
                                    self.classifier_fqn(*c)
                                )));
                            }
                        }
                    }
                }
            }
        }
        for c in self.classifier_ids() {
            self.check_acyclic(c)?;
        }
        for c in self.classifier_ids() {
            let Some(data) = self.class(c) else { continue };
            for s in &data.supers {
                if self.class(*s).is_none() {
                    return Err(MetamodelError::Unresolved {
                        reference: format!("supertype #{}", s.0),
                        context: self.classifier_fqn(c),
                    });
                }
            }
            let mut names = HashSet::new();
            for f in self.all_features(c) {
                let feature = self.feature(f).ok_or_else(|| {
                    MetamodelError::Invalid(format!("{} lists a deleted feature", self.classifier_fqn(c)))
                })?;
                if !names.insert(feature.name.as_str()) {
                    return Err(MetamodelError::DuplicateName(format!(
                        "{}.{}",
                        self.classifier_fqn(c),
                        feature.name
                    )));
                }
            }
            for f in &data.features {
                self.check_feature(*f)?;
            }
        }
        Ok(())
    }

    fn check_acyclic(&self, start: ClassifierId) -> Result<(), MetamodelError> {
        // DFS with colouring over the supertype graph.
        fn visit(
            set: &MetamodelSet,
            c: ClassifierId,
            on_path: &mut Vec<ClassifierId>,
            done: &mut HashSet<ClassifierId>,
        ) -> Result<(), MetamodelError> {
            if done.contains(&c) {
                return Ok(());
            }
            if on_path.contains(&c) {
                return Err(MetamodelError::SupertypeCycle(set.classifier_fqn(c)));
            }
            on_path.push(c);
            if let Some(data) = set.class(c) {
                for s in &data.supers {
                    visit(set, *s, on_path, done)?;
                }
            }
            on_path.pop();
            done.insert(c);
            Ok(())
        }
        visit(self, start, &mut Vec::new(), &mut HashSet::new())
    }

    fn check_feature(&self, id: FeatureId) -> Result<(), MetamodelError> {
        let f = self.feature(id).expect("listed features are live");
        let fqn = self.feature_fqn(id);
        check_identifier(&f.name, &fqn)?;
        if let Some(upper) = f.upper {
            if upper == 0 {
                return Err(MetamodelError::Invalid(format!("{fqn}: upper bound must be positive")));
            }
            if f.lower > upper {
                return Err(MetamodelError::Invalid(format!(
                    "{fqn}: lower bound {} exceeds upper bound {upper}",
                    f.lower
                )));
            }
        }
        match &f.kind {
            FeatureKind::Attribute(ty) => {
                if f.upper != Some(1) {
                    return Err(MetamodelError::Invalid(format!(
                        "{fqn}: attributes are single-valued (upper bound must be 1)"
                    )));
                }
                if let ValueType::Enum(e) = ty {
                    if self.classifier(*e).and_then(Classifier::literals).is_none() {
                        return Err(MetamodelError::Unresolved {
                            reference: format!("enumeration #{}", e.0),
                            context: fqn,
                        });
                    }
                }
            }
            FeatureKind::Reference { target, .. } => {
                if self.class(*target).is_none() {
                    return Err(MetamodelError::Unresolved {
                        reference: format!("class #{}", target.0),
                        context: fqn,
                    });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_identifier(name: &str, context: &str) -> Result<(), MetamodelError> {
    let mut chars = name.chars();
    let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(MetamodelError::Invalid(format!(
            "{context}: '{name}' is not an identifier"
        )))
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::String => f.write_str("string"),
            ValueType::Boolean => f.write_str("boolean"),
            ValueType::Integer => f.write_str("integer"),
            ValueType::Enum(id) => write!(f, "enum#{}", id.0),
        }
    }
}
