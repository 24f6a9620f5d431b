//! Models: typed elements with attribute and reference slots, grouped into
//! resources by a containment forest.
//!
//! Every reference slot mutation keeps an [`InverseIndex`] up to date, so
//! [`Model::get_inverse`] costs the size of its answer rather than the size
//! of the model. Results come back in document order: resources in
//! declaration order, each traversed depth first along containment
//! references in feature declaration order. Document ranks are cached and
//! dropped whenever the containment structure changes.

mod format;
mod inverse;

pub(crate) use format::from_doc;
pub use format::{load_model, ElementDoc, ModelDoc, ResourceDoc};
pub use inverse::InverseIndex;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::metamodel::{ClassifierId, FeatureId, FeatureKind, MetamodelSet, ValueType};

/// Opaque element identity assigned by the model. Never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementId(pub(crate) u32);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Str(String),
    Bool(bool),
    Int(i64),
    Literal(String),
}

impl Scalar {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Str(s) | Scalar::Literal(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Scalar::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Str(s) => write!(f, "{s:?}"),
            Scalar::Literal(s) => f.write_str(s),
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    Value(Scalar),
    Refs(Vec<ElementId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Root of the resource at this index.
    Root(usize),
    Contained {
        parent: ElementId,
        feature: FeatureId,
    },
    /// Neither a root nor contained; a conformance violation outside
    /// transactions.
    Detached,
}

#[derive(Debug, Clone)]
pub struct Element {
    class: ClassifierId,
    placement: Placement,
    slots: BTreeMap<FeatureId, Slot>,
}

impl Element {
    pub fn class(&self) -> ClassifierId {
        self.class
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn slots(&self) -> &BTreeMap<FeatureId, Slot> {
        &self.slots
    }
}

#[derive(Debug, Clone)]
pub struct Resource {
    uri: String,
    roots: Vec<ElementId>,
}

impl Resource {
    pub fn uri(&self) -> &str {
        &self.uri
    }

    pub fn roots(&self) -> &[ElementId] {
        &self.roots
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown element {0}")]
    UnknownElement(String),
    #[error("unknown resource {0}")]
    UnknownResource(String),
    #[error("resource {0} already exists")]
    DuplicateResource(String),
    #[error("{0} is not a class")]
    NotAClass(String),
    #[error("cannot instantiate abstract class {0}")]
    AbstractClass(String),
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("feature {feature} is not applicable to class {class}")]
    NotApplicable { feature: String, class: String },
    #[error("{0} is an attribute, not a reference")]
    NotAReference(String),
    #[error("type mismatch for {feature}: {message}")]
    TypeMismatch { feature: String, message: String },
    #[error("containment cycle: {0}")]
    ContainmentCycle(String),
    #[error("{0} is only allowed inside a transaction")]
    RequiresTransaction(&'static str),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// A set of resources over one [`MetamodelSet`].
///
/// Element identities are only meaningful together with the metamodel set
/// the model was built against; operations that interpret slots take it as
/// an argument.
#[derive(Debug, Clone, Default)]
pub struct Model {
    resources: Vec<Resource>,
    elements: Vec<Option<Element>>,
    live: usize,
    index: InverseIndex,
    softened: bool,
    /// Document rank per element slot; `u32::MAX` for dead slots.
    ranks: OnceLock<Vec<u32>>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    // ---- resources ---------------------------------------------------------

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn resource_index(&self, uri: &str) -> Option<usize> {
        self.resources.iter().position(|r| r.uri == uri)
    }

    pub fn create_resource(&mut self, uri: &str) -> Result<usize, ModelError> {
        if self.resource_index(uri).is_some() {
            return Err(ModelError::DuplicateResource(uri.to_string()));
        }
        self.resources.push(Resource {
            uri: uri.to_string(),
            roots: Vec::new(),
        });
        Ok(self.resources.len() - 1)
    }

    /// First resource URI, used to name a model.
    pub fn primary_uri(&self) -> Option<&str> {
        self.resources.first().map(|r| r.uri.as_str())
    }

    // ---- element access ----------------------------------------------------

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.element(id).is_some()
    }

    pub fn element(&self, id: ElementId) -> Option<&Element> {
        self.elements.get(id.0 as usize).and_then(Option::as_ref)
    }

    fn element_mut(&mut self, id: ElementId) -> Option<&mut Element> {
        self.elements.get_mut(id.0 as usize).and_then(Option::as_mut)
    }

    fn live_element(&self, id: ElementId) -> Result<&Element, ModelError> {
        self.element(id)
            .ok_or_else(|| ModelError::UnknownElement(id.to_string()))
    }

    /// Live element ids in creation order.
    pub fn element_ids(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_some())
            .map(|(i, _)| ElementId(i as u32))
    }

    pub fn class_of(&self, id: ElementId) -> Result<ClassifierId, ModelError> {
        Ok(self.live_element(id)?.class)
    }

    pub fn slot(&self, id: ElementId, feature: FeatureId) -> Option<&Slot> {
        self.element(id).and_then(|e| e.slots.get(&feature))
    }

    pub fn attr(&self, id: ElementId, feature: FeatureId) -> Option<&Scalar> {
        match self.slot(id, feature) {
            Some(Slot::Value(v)) => Some(v),
            _ => None,
        }
    }

    pub fn attr_str(&self, id: ElementId, feature: FeatureId) -> Option<&str> {
        self.attr(id, feature).and_then(Scalar::as_str)
    }

    /// Forward navigation: the ordered contents of a reference slot.
    pub fn refs(&self, id: ElementId, feature: FeatureId) -> &[ElementId] {
        match self.slot(id, feature) {
            Some(Slot::Refs(r)) => r,
            _ => &[],
        }
    }

    pub fn placement(&self, id: ElementId) -> Option<Placement> {
        self.element(id).map(|e| e.placement)
    }

    pub fn container(&self, id: ElementId) -> Option<(ElementId, FeatureId)> {
        match self.element(id)?.placement {
            Placement::Contained { parent, feature } => Some((parent, feature)),
            _ => None,
        }
    }

    pub fn index(&self) -> &InverseIndex {
        &self.index
    }

    pub fn is_softened(&self) -> bool {
        self.softened
    }

    pub(crate) fn set_softened(&mut self, softened: bool) {
        self.softened = softened;
    }

    /// Index of the resource the element belongs to, or `None` when its
    /// containment chain ends in a detached element.
    pub fn resource_of(&self, id: ElementId) -> Option<usize> {
        let mut current = id;
        loop {
            match self.element(current)?.placement {
                Placement::Root(r) => return Some(r),
                Placement::Contained { parent, .. } => current = parent,
                Placement::Detached => return None,
            }
        }
    }

    /// True when `ancestor` is `id` or one of its containers.
    pub fn is_ancestor_or_self(&self, ancestor: ElementId, id: ElementId) -> bool {
        let mut current = Some(id);
        while let Some(c) = current {
            if c == ancestor {
                return true;
            }
            current = self.container(c).map(|(p, _)| p);
        }
        false
    }

    /// Nearest element, starting with `id` itself and walking up the
    /// containment chain, whose class equals or specializes `class`.
    pub fn get_container_of_type(
        &self,
        mms: &MetamodelSet,
        id: ElementId,
        class: ClassifierId,
    ) -> Result<Option<ElementId>, ModelError> {
        self.live_element(id)?;
        let mut current = Some(id);
        while let Some(c) = current {
            let e = self.live_element(c)?;
            if mms.conforms_to(e.class, class) {
                return Ok(Some(c));
            }
            current = self.container(c).map(|(p, _)| p);
        }
        Ok(None)
    }

    /// Elements whose `feature` slot contains `target`, in document order.
    pub fn get_inverse(
        &self,
        mms: &MetamodelSet,
        target: ElementId,
        feature: FeatureId,
    ) -> Result<Vec<ElementId>, ModelError> {
        self.live_element(target)?;
        let f = mms
            .feature(feature)
            .ok_or_else(|| ModelError::UnknownFeature(mms.feature_fqn(feature)))?;
        if !f.is_reference() {
            return Err(ModelError::NotAReference(mms.feature_fqn(feature)));
        }
        let sources = self.index.sources(target, feature);
        if sources.len() <= 1 {
            return Ok(sources.to_vec());
        }
        let ranks = self.ranks.get_or_init(|| self.document_ranks(mms));
        let mut out = sources.to_vec();
        out.sort_unstable_by_key(|s| ranks[s.0 as usize]);
        Ok(out)
    }

    fn document_ranks(&self, mms: &MetamodelSet) -> Vec<u32> {
        let mut ranks = vec![u32::MAX; self.elements.len()];
        for (i, id) in self.document_order(mms).into_iter().enumerate() {
            ranks[id.0 as usize] = i as u32;
        }
        ranks
    }

    /// Containment features of `class` in declaration order.
    fn containment_features<'c>(
        mms: &MetamodelSet,
        class: ClassifierId,
        cache: &'c mut HashMap<ClassifierId, Vec<FeatureId>>,
    ) -> &'c [FeatureId] {
        cache.entry(class).or_insert_with(|| {
            mms.all_features(class)
                .into_iter()
                .filter(|f| mms.feature(*f).is_some_and(|f| f.is_containment()))
                .collect()
        })
    }

    fn collect_subtree(
        &self,
        mms: &MetamodelSet,
        root: ElementId,
        out: &mut Vec<ElementId>,
        cache: &mut HashMap<ClassifierId, Vec<FeatureId>>,
    ) {
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let Some(e) = self.element(id) else { continue };
            out.push(id);
            let features = Self::containment_features(mms, e.class, cache);
            let mut children = Vec::new();
            for f in features {
                children.extend_from_slice(self.refs(id, *f));
            }
            // Slots of features no longer declared on the class still hold
            // children until migrated; visit them last.
            for (f, slot) in &e.slots {
                if let Slot::Refs(r) = slot {
                    if !features.contains(f)
                        && r.iter()
                            .any(|c| self.container(*c).is_some_and(|(p, g)| p == id && g == *f))
                    {
                        children.extend_from_slice(r);
                    }
                }
            }
            stack.extend(children.into_iter().rev());
        }
    }

    /// Every live element in document order, followed by detached subtrees
    /// in id order.
    pub fn document_order(&self, mms: &MetamodelSet) -> Vec<ElementId> {
        let mut out = Vec::with_capacity(self.live);
        let mut cache = HashMap::new();
        for r in &self.resources {
            for root in &r.roots {
                self.collect_subtree(mms, *root, &mut out, &mut cache);
            }
        }
        let detached: Vec<ElementId> = self
            .element_ids()
            .filter(|id| matches!(self.element(*id).map(|e| e.placement), Some(Placement::Detached)))
            .collect();
        for d in detached {
            self.collect_subtree(mms, d, &mut out, &mut cache);
        }
        out
    }

    /// The subtree rooted at `id` (inclusive) in document order.
    pub fn subtree(&self, mms: &MetamodelSet, id: ElementId) -> Vec<ElementId> {
        let mut out = Vec::new();
        self.collect_subtree(mms, id, &mut out, &mut HashMap::new());
        out
    }

    /// Direct instances of `class` or of its subclasses, in document order.
    pub fn instances_of(&self, mms: &MetamodelSet, class: ClassifierId) -> Vec<ElementId> {
        self.document_order(mms)
            .into_iter()
            .filter(|id| self.element(*id).is_some_and(|e| mms.conforms_to(e.class, class)))
            .collect()
    }

    pub fn count_instances(&self, mms: &MetamodelSet, class: ClassifierId) -> usize {
        self.elements
            .iter()
            .flatten()
            .filter(|e| mms.conforms_to(e.class, class))
            .count()
    }

    // ---- mutation ----------------------------------------------------------

    fn invalidate(&mut self, _resource: Option<usize>) {
        self.ranks = OnceLock::new();
    }

    fn invalidate_all(&mut self) {
        self.ranks = OnceLock::new();
    }

    fn check_instantiable(&self, mms: &MetamodelSet, class: ClassifierId) -> Result<(), ModelError> {
        let data = mms
            .class(class)
            .ok_or_else(|| ModelError::NotAClass(mms.classifier_fqn(class)))?;
        if data.is_abstract && !self.softened {
            return Err(ModelError::AbstractClass(mms.classifier_fqn(class)));
        }
        Ok(())
    }

    /// Creates an element as a new root of resource `uri`.
    pub fn create_element(
        &mut self,
        mms: &MetamodelSet,
        uri: &str,
        class: ClassifierId,
    ) -> Result<ElementId, ModelError> {
        let r = self
            .resource_index(uri)
            .ok_or_else(|| ModelError::UnknownResource(uri.to_string()))?;
        self.check_instantiable(mms, class)?;
        let id = self.push_element(class, Placement::Root(r));
        self.resources[r].roots.push(id);
        self.invalidate(Some(r));
        Ok(id)
    }

    fn push_element(&mut self, class: ClassifierId, placement: Placement) -> ElementId {
        let id = ElementId(self.elements.len() as u32);
        self.elements.push(Some(Element {
            class,
            placement,
            slots: BTreeMap::new(),
        }));
        self.live += 1;
        id
    }

    /// Sets an attribute value.
    pub fn set_attr(
        &mut self,
        mms: &MetamodelSet,
        id: ElementId,
        feature: FeatureId,
        value: Scalar,
    ) -> Result<(), ModelError> {
        self.set_slot(mms, id, feature, Some(Slot::Value(value)))
    }

    /// Replaces a reference slot's contents.
    pub fn set_refs(
        &mut self,
        mms: &MetamodelSet,
        id: ElementId,
        feature: FeatureId,
        targets: Vec<ElementId>,
    ) -> Result<(), ModelError> {
        self.set_slot(mms, id, feature, Some(Slot::Refs(targets)))
    }

    /// Appends one target to a reference slot.
    pub fn add_ref(
        &mut self,
        mms: &MetamodelSet,
        id: ElementId,
        feature: FeatureId,
        target: ElementId,
    ) -> Result<(), ModelError> {
        let mut targets = self.refs(id, feature).to_vec();
        targets.push(target);
        self.set_refs(mms, id, feature, targets)
    }

    pub fn unset(&mut self, mms: &MetamodelSet, id: ElementId, feature: FeatureId) -> Result<(), ModelError> {
        self.set_slot(mms, id, feature, None)
    }

    /// Replaces the value of one slot (`None` clears it).
    ///
    /// Reference targets must be live, unique and type-compatible. Setting a
    /// containment slot moves the new children out of their previous
    /// placement; children dropped from the slot become detached.
    pub fn set_slot(
        &mut self,
        mms: &MetamodelSet,
        id: ElementId,
        feature: FeatureId,
        value: Option<Slot>,
    ) -> Result<(), ModelError> {
        let element = self.live_element(id)?;
        let fqn = || mms.feature_fqn(feature);
        let f = mms.feature(feature).ok_or_else(|| ModelError::UnknownFeature(fqn()))?;
        if !mms.conforms_to(element.class, f.owner) {
            return Err(ModelError::NotApplicable {
                feature: fqn(),
                class: mms.classifier_fqn(element.class),
            });
        }
        let mismatch = |message: String| ModelError::TypeMismatch {
            feature: fqn(),
            message,
        };
        match (&f.kind, value) {
            (FeatureKind::Attribute(_), None) => {
                self.element_mut(id).expect("live").slots.remove(&feature);
                Ok(())
            }
            (FeatureKind::Attribute(ty), Some(Slot::Value(v))) => {
                let v = coerce_scalar(mms, ty, v).map_err(mismatch)?;
                self.element_mut(id)
                    .expect("live")
                    .slots
                    .insert(feature, Slot::Value(v));
                Ok(())
            }
            (FeatureKind::Attribute(_), Some(Slot::Refs(_))) => {
                Err(mismatch("attribute slots hold a single value".into()))
            }
            (FeatureKind::Reference { .. }, Some(Slot::Value(_))) => {
                Err(mismatch("reference slots hold element lists".into()))
            }
            (FeatureKind::Reference { target, containment }, value) => {
                let targets = match value {
                    Some(Slot::Refs(t)) => t,
                    _ => Vec::new(),
                };
                let mut seen = HashSet::new();
                for t in &targets {
                    let te = self.live_element(*t)?;
                    if !seen.insert(*t) {
                        return Err(mismatch(format!("duplicate reference to {t}")));
                    }
                    if !mms.conforms_to(te.class, *target) {
                        return Err(mismatch(format!(
                            "{t} is a {}, expected {}",
                            mms.classifier_fqn(te.class),
                            mms.classifier_fqn(*target)
                        )));
                    }
                    if *containment && self.is_ancestor_or_self(*t, id) {
                        return Err(ModelError::ContainmentCycle(format!(
                            "{t} cannot be contained by its descendant {id}"
                        )));
                    }
                }
                self.write_refs(id, feature, *containment, targets);
                Ok(())
            }
        }
    }

    /// Writes a validated reference slot, maintaining index and placements.
    fn write_refs(&mut self, id: ElementId, feature: FeatureId, containment: bool, targets: Vec<ElementId>) {
        let old = self.refs(id, feature).to_vec();
        for t in &old {
            self.index.remove(*t, feature, id);
        }
        if containment {
            let resource = self.resource_of(id);
            for t in &old {
                if !targets.contains(t) {
                    if let Some(e) = self.element_mut(*t) {
                        e.placement = Placement::Detached;
                    }
                }
            }
            for t in &targets {
                if !old.contains(t) {
                    self.detach_from_placement(*t);
                    self.element_mut(*t).expect("validated").placement = Placement::Contained { parent: id, feature };
                }
            }
            self.invalidate(resource);
        }
        for t in &targets {
            self.index.insert(*t, feature, id);
        }
        let e = self.element_mut(id).expect("live");
        if targets.is_empty() {
            e.slots.remove(&feature);
        } else {
            e.slots.insert(feature, Slot::Refs(targets));
        }
    }

    /// Removes `id` from its container's slot or its resource's roots and
    /// marks it detached.
    fn detach_from_placement(&mut self, id: ElementId) {
        let Some(placement) = self.placement(id) else { return };
        match placement {
            Placement::Root(r) => {
                self.resources[r].roots.retain(|x| *x != id);
                self.invalidate(Some(r));
            }
            Placement::Contained { parent, feature } => {
                let resource = self.resource_of(parent);
                if let Some(p) = self.element_mut(parent) {
                    if let Some(Slot::Refs(list)) = p.slots.get_mut(&feature) {
                        list.retain(|x| *x != id);
                        if list.is_empty() {
                            p.slots.remove(&feature);
                        }
                    }
                }
                self.index.remove(id, feature, parent);
                self.invalidate(resource);
            }
            Placement::Detached => {}
        }
        if let Some(e) = self.element_mut(id) {
            e.placement = Placement::Detached;
        }
    }

    /// Makes `id` a root of resource `uri`, detaching it from any container.
    pub fn move_to_root(&mut self, id: ElementId, uri: &str) -> Result<(), ModelError> {
        self.live_element(id)?;
        let r = self
            .resource_index(uri)
            .ok_or_else(|| ModelError::UnknownResource(uri.to_string()))?;
        self.detach_from_placement(id);
        self.resources[r].roots.push(id);
        self.element_mut(id).expect("live").placement = Placement::Root(r);
        self.invalidate(Some(r));
        Ok(())
    }

    /// Changes the class of an element in place, keeping its identity,
    /// slots and incoming references. Every existing slot must be
    /// applicable to the new class.
    pub fn retype(&mut self, mms: &MetamodelSet, id: ElementId, class: ClassifierId) -> Result<(), ModelError> {
        self.check_instantiable(mms, class)?;
        let e = self.live_element(id)?;
        for f in e.slots.keys() {
            let owner = mms.feature(*f).map(|f| f.owner);
            if !owner.is_some_and(|o| mms.conforms_to(class, o)) {
                return Err(ModelError::NotApplicable {
                    feature: mms.feature_fqn(*f),
                    class: mms.classifier_fqn(class),
                });
            }
        }
        let resource = self.resource_of(id);
        self.element_mut(id).expect("live").class = class;
        self.invalidate(resource);
        Ok(())
    }

    /// Deletes an element and its containment subtree, and removes every
    /// reference to them from surviving elements.
    pub fn delete_element(&mut self, id: ElementId) -> Result<(), ModelError> {
        self.delete_impl(id, true)
    }

    /// Deletes an element and its subtree but leaves references to them in
    /// place, dangling. Only allowed inside a transaction.
    pub fn remove_element(&mut self, id: ElementId) -> Result<(), ModelError> {
        if !self.softened {
            return Err(ModelError::RequiresTransaction("remove_element"));
        }
        self.delete_impl(id, false)
    }

    fn delete_impl(&mut self, id: ElementId, clean_incoming: bool) -> Result<(), ModelError> {
        self.live_element(id)?;
        let resource = self.resource_of(id);
        self.detach_from_placement(id);
        // The subtree follows containment placements, not feature metadata.
        let mut doomed = vec![id];
        let mut i = 0;
        while i < doomed.len() {
            let current = doomed[i];
            let e = self.element(current).expect("live subtree");
            for (f, slot) in &e.slots {
                if let Slot::Refs(targets) = slot {
                    for t in targets {
                        if self.container(*t).is_some_and(|(p, g)| p == current && g == *f) {
                            doomed.push(*t);
                        }
                    }
                }
            }
            i += 1;
        }
        let doomed_set: HashSet<ElementId> = doomed.iter().copied().collect();
        for d in &doomed {
            let slots: Vec<(FeatureId, Vec<ElementId>)> = self
                .element(*d)
                .expect("live")
                .slots
                .iter()
                .filter_map(|(f, s)| match s {
                    Slot::Refs(r) => Some((*f, r.clone())),
                    Slot::Value(_) => None,
                })
                .collect();
            for (f, targets) in slots {
                for t in targets {
                    self.index.remove(t, f, *d);
                }
            }
        }
        let mut touched = HashSet::new();
        for d in &doomed {
            if clean_incoming {
                let incoming: Vec<(FeatureId, Vec<ElementId>)> = self.index.incoming(*d).to_vec();
                for (f, sources) in incoming {
                    for s in sources {
                        if doomed_set.contains(&s) {
                            continue;
                        }
                        if let Some(e) = self.element_mut(s) {
                            if let Some(Slot::Refs(list)) = e.slots.get_mut(&f) {
                                list.retain(|x| x != d);
                                if list.is_empty() {
                                    e.slots.remove(&f);
                                }
                            }
                        }
                        touched.insert(s);
                    }
                }
                self.index.forget_target(*d);
            }
        }
        for d in &doomed {
            self.elements[d.0 as usize] = None;
            self.live -= 1;
        }
        self.invalidate(resource);
        Ok(())
    }

    /// Clears every slot of `feature` on every element. Children held by a
    /// containment slot become detached.
    pub fn drop_feature(&mut self, feature: FeatureId) {
        let holders: Vec<ElementId> = self
            .element_ids()
            .filter(|id| self.element(*id).is_some_and(|e| e.slots.contains_key(&feature)))
            .collect();
        for id in holders {
            self.drop_slot(id, feature);
        }
    }

    fn drop_slot(&mut self, id: ElementId, feature: FeatureId) {
        let Some(slot) = self.element_mut(id).and_then(|e| e.slots.remove(&feature)) else {
            return;
        };
        if let Slot::Refs(targets) = slot {
            for t in targets {
                self.index.remove(t, feature, id);
                if let Some(e) = self.element_mut(t) {
                    if e.placement == (Placement::Contained { parent: id, feature }) {
                        e.placement = Placement::Detached;
                    }
                }
            }
            self.invalidate_all();
        }
    }

    /// Drops slots whose feature no longer exists in `mms`.
    pub fn purge_deleted_features(&mut self, mms: &MetamodelSet) {
        let stale: Vec<(ElementId, FeatureId)> = self
            .element_ids()
            .flat_map(|id| {
                self.element(id)
                    .expect("live")
                    .slots
                    .keys()
                    .filter(|f| mms.feature(**f).is_none())
                    .map(move |f| (id, *f))
                    .collect::<Vec<_>>()
            })
            .collect();
        for (id, f) in stale {
            self.drop_slot(id, f);
        }
    }

    /// Copies the given resources into a standalone model. Fails when an
    /// element in them references something outside.
    pub fn extract_resources(&self, mms: &MetamodelSet, uris: &[&str]) -> Result<Model, ModelError> {
        let mut doc = self.to_doc(mms, false);
        doc.resources.retain(|r| uris.contains(&r.uri.as_str()));
        let mut keep = HashSet::new();
        let mut cache = HashMap::new();
        for uri in uris {
            let r = self
                .resource_index(uri)
                .ok_or_else(|| ModelError::UnknownResource(uri.to_string()))?;
            let mut out = Vec::new();
            for root in &self.resources[r].roots {
                self.collect_subtree(mms, *root, &mut out, &mut cache);
            }
            keep.extend(out.into_iter().map(|e| e.to_string()));
        }
        doc.elements.retain(|e| keep.contains(&e.id));
        format::from_doc(&doc, mms)
    }
}

fn coerce_scalar(mms: &MetamodelSet, ty: &ValueType, v: Scalar) -> Result<Scalar, String> {
    match (ty, v) {
        (ValueType::String, Scalar::Str(s)) => Ok(Scalar::Str(s)),
        (ValueType::Boolean, Scalar::Bool(b)) => Ok(Scalar::Bool(b)),
        (ValueType::Integer, Scalar::Int(i)) => Ok(Scalar::Int(i)),
        (ValueType::Enum(e), Scalar::Literal(s) | Scalar::Str(s)) => {
            let literals = mms
                .classifier(*e)
                .and_then(|c| c.literals())
                .ok_or_else(|| format!("enumeration {} no longer exists", mms.classifier_fqn(*e)))?;
            if literals.contains(&s) {
                Ok(Scalar::Literal(s))
            } else {
                Err(format!("'{s}' is not a literal of {}", mms.classifier_fqn(*e)))
            }
        }
        (ty, v) => Err(format!("expected {} value, got {v}", describe_type(mms, ty))),
    }
}

pub(crate) fn describe_type(mms: &MetamodelSet, ty: &ValueType) -> String {
    match ty {
        ValueType::Enum(e) => mms.classifier_fqn(*e),
        other => other.to_string(),
    }
}

/// Checks that a stored scalar still fits its attribute type.
pub(crate) fn scalar_fits(mms: &MetamodelSet, ty: &ValueType, v: &Scalar) -> bool {
    coerce_scalar(mms, ty, v.clone()).is_ok_and(|c| &c == v)
}
