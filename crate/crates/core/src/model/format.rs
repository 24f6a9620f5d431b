//! JSON document format for models.
//!
//! Elements are written in document order with slots keyed by feature
//! name. [`Model::canonical_form`] additionally renames ids by document
//! position, which makes two models textually equal exactly when they are
//! isomorphic.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{ElementId, Model, ModelError, Placement, Scalar, Slot};
use crate::json::to_canonical_string;
use crate::metamodel::{FeatureKind, MetamodelSet, ValueType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub resources: Vec<ResourceDoc>,
    pub elements: Vec<ElementDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceDoc {
    pub uri: String,
    pub roots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementDoc {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub slots: BTreeMap<String, Json>,
}

/// Parses a model against the metamodels it instantiates.
///
/// Loading is structural: documents that break conformance rules (abstract
/// classes, multiplicities, detached elements) still load so they can be
/// checked. Unknown classes, features, ids, and double containment cannot be
/// represented and are errors.
pub fn load_model(text: &str, mms: &MetamodelSet) -> Result<Model, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_doc(&doc, mms)
}

pub(crate) fn from_doc(doc: &ModelDoc, mms: &MetamodelSet) -> Result<Model, ModelError> {
    let mut model = Model::new();
    for r in &doc.resources {
        model.create_resource(&r.uri)?;
    }
    let mut ids: HashMap<&str, ElementId> = HashMap::new();
    for e in &doc.elements {
        let class = mms
            .resolve_class(&e.class)
            .map_err(|err| ModelError::Malformed(format!("element {}: {err}", e.id)))?;
        let id = model.push_element(class, Placement::Detached);
        if ids.insert(e.id.as_str(), id).is_some() {
            return Err(ModelError::Malformed(format!("duplicate element id {}", e.id)));
        }
    }
    let lookup = |raw: &str| {
        ids.get(raw)
            .copied()
            .ok_or_else(|| ModelError::Malformed(format!("unknown element id {raw}")))
    };
    for (r, res) in doc.resources.iter().enumerate() {
        for raw in &res.roots {
            let id = lookup(raw)?;
            let e = model.element_mut(id).expect("fresh");
            if e.placement != Placement::Detached {
                return Err(ModelError::Malformed(format!("{raw} is a root more than once")));
            }
            e.placement = Placement::Root(r);
            model.resources[r].roots.push(id);
        }
    }
    for e in &doc.elements {
        let id = lookup(&e.id)?;
        let class = model.element(id).expect("fresh").class;
        for (name, raw_value) in &e.slots {
            let feature = mms.feature_by_name(class, name).ok_or_else(|| {
                ModelError::UnknownFeature(format!("{}.{name} (element {})", mms.classifier_fqn(class), e.id))
            })?;
            let f = mms.feature(feature).expect("resolved");
            let fqn = mms.feature_fqn(feature);
            let mismatch = |message: String| ModelError::TypeMismatch {
                feature: fqn.clone(),
                message: format!("element {}: {message}", e.id),
            };
            let slot = match &f.kind {
                FeatureKind::Attribute(ty) => Slot::Value(scalar_from_json(ty, raw_value).map_err(mismatch)?),
                FeatureKind::Reference { containment, .. } => {
                    let list = raw_value
                        .as_array()
                        .ok_or_else(|| mismatch("expected a list of element ids".into()))?;
                    let mut targets = Vec::with_capacity(list.len());
                    for item in list {
                        let raw = item
                            .as_str()
                            .ok_or_else(|| mismatch("element ids are strings".into()))?;
                        let t = lookup(raw)?;
                        if targets.contains(&t) {
                            return Err(mismatch(format!("duplicate reference to {raw}")));
                        }
                        targets.push(t);
                    }
                    if *containment {
                        for t in &targets {
                            let child = model.element_mut(*t).expect("fresh");
                            if child.placement != Placement::Detached {
                                return Err(ModelError::Malformed(format!(
                                    "element {} has more than one container",
                                    doc.elements[t.0 as usize].id
                                )));
                            }
                            child.placement = Placement::Contained { parent: id, feature };
                        }
                    }
                    for t in &targets {
                        model.index.insert(*t, feature, id);
                    }
                    if targets.is_empty() {
                        continue;
                    }
                    Slot::Refs(targets)
                }
            };
            model.element_mut(id).expect("fresh").slots.insert(feature, slot);
        }
    }
    // A containment chain that never reaches a root or a detached element
    // is a cycle.
    for id in model.element_ids().collect::<Vec<_>>() {
        let mut current = id;
        let mut steps = 0usize;
        while let Some((parent, _)) = model.container(current) {
            current = parent;
            steps += 1;
            if steps > model.live {
                return Err(ModelError::ContainmentCycle(format!("through element {id}")));
            }
        }
    }
    Ok(model)
}

fn scalar_from_json(ty: &ValueType, v: &Json) -> Result<Scalar, String> {
    match (ty, v) {
        (ValueType::String, Json::String(s)) => Ok(Scalar::Str(s.clone())),
        (ValueType::Boolean, Json::Bool(b)) => Ok(Scalar::Bool(*b)),
        (ValueType::Integer, Json::Number(n)) if n.is_i64() => Ok(Scalar::Int(n.as_i64().expect("checked"))),
        (ValueType::Enum(_), Json::String(s)) => Ok(Scalar::Literal(s.clone())),
        (_, other) => Err(format!("value {other} does not fit type {ty}")),
    }
}

fn scalar_to_json(v: &Scalar) -> Json {
    match v {
        Scalar::Str(s) | Scalar::Literal(s) => Json::String(s.clone()),
        Scalar::Bool(b) => Json::Bool(*b),
        Scalar::Int(i) => Json::from(*i),
    }
}

impl Model {
    /// Serializable form. With `renumber`, ids become `e0, e1, …` in
    /// document order.
    pub fn to_doc(&self, mms: &MetamodelSet, renumber: bool) -> ModelDoc {
        let order = self.document_order(mms);
        let names: HashMap<ElementId, String> = order
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, if renumber { format!("e{i}") } else { id.to_string() }))
            .collect();
        let name = |id: &ElementId| names.get(id).cloned().unwrap_or_else(|| format!("dangling:{id}"));
        let resources = self
            .resources
            .iter()
            .map(|r| ResourceDoc {
                uri: r.uri.clone(),
                roots: r.roots.iter().map(name).collect(),
            })
            .collect();
        let elements = order
            .iter()
            .map(|id| {
                let e = self.element(*id).expect("document order lists live elements");
                let slots = e
                    .slots
                    .iter()
                    .map(|(f, slot)| {
                        let key = mms
                            .feature(*f)
                            .map(|f| f.name.clone())
                            .unwrap_or_else(|| format!("deleted#{}", f.0));
                        let value = match slot {
                            Slot::Value(v) => scalar_to_json(v),
                            Slot::Refs(r) => Json::Array(r.iter().map(|t| Json::String(name(t))).collect()),
                        };
                        (key, value)
                    })
                    .collect();
                ElementDoc {
                    id: name(id),
                    class: mms.classifier_fqn(e.class),
                    slots,
                }
            })
            .collect();
        ModelDoc { resources, elements }
    }

    /// Byte-deterministic text. Ids are renamed by document position, so
    /// the text is equal for two models exactly when they are isomorphic.
    pub fn save(&self, mms: &MetamodelSet) -> String {
        to_canonical_string(&self.to_doc(mms, true))
    }

    /// Alias of [`save`](Self::save), named for its use as an isomorphism
    /// witness.
    pub fn canonical_form(&self, mms: &MetamodelSet) -> String {
        self.save(mms)
    }

    /// Structural equality up to element identity.
    pub fn isomorphic(&self, mms: &MetamodelSet, other: &Model, other_mms: &MetamodelSet) -> bool {
        self.canonical_form(mms) == other.canonical_form(other_mms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metamodel::load_metamodel;

    const MM: &str = r#"{"name":"t","packages":[{"name":"t","classifiers":[
        {"kind":"enum","name":"Color","literals":["RED","BLUE"]},
        {"kind":"class","name":"Node","abstract":false,"super":[],"features":[
            {"kind":"attribute","name":"label","type":"string","lower":0,"upper":1},
            {"kind":"attribute","name":"color","type":"t.t.Color","lower":0,"upper":1},
            {"kind":"attribute","name":"n","type":"integer","lower":0,"upper":1},
            {"kind":"reference","name":"kids","target":"t.t.Node","containment":true,"lower":0,"upper":"*"},
            {"kind":"reference","name":"link","target":"t.t.Node","containment":false,"lower":0,"upper":"*"}]}]}]}"#;

    const DOC: &str = r#"{"resources":[{"uri":"r","roots":["a"]}],"elements":[
        {"id":"b","class":"t.t.Node","slots":{"label":"leaf","link":["a"]}},
        {"id":"a","class":"t.t.Node","slots":{"kids":["b"],"color":"BLUE","n":-4}}]}"#;

    #[test]
    fn load_save_load_is_stable() {
        let mms = load_metamodel(MM).unwrap();
        let m = load_model(DOC, &mms).unwrap();
        let saved = m.save(&mms);
        let again = load_model(&saved, &mms).unwrap();
        assert_eq!(saved, again.save(&mms));
        assert!(m.isomorphic(&mms, &again, &mms));
        // Document order puts the root first.
        let doc: ModelDoc = serde_json::from_str(&m.canonical_form(&mms)).unwrap();
        assert_eq!(doc.elements[0].id, "e0");
        assert_eq!(doc.elements[0].slots["kids"], serde_json::json!(["e1"]));
    }

    #[test]
    fn rejects_double_containment_and_unknown_ids() {
        let mms = load_metamodel(MM).unwrap();
        let twice = r#"{"resources":[{"uri":"r","roots":["a"]}],"elements":[
            {"id":"a","class":"t.t.Node","slots":{"kids":["b"]}},
            {"id":"c","class":"t.t.Node","slots":{"kids":["b"]}},
            {"id":"b","class":"t.t.Node"}]}"#;
        assert!(matches!(load_model(twice, &mms), Err(ModelError::Malformed(_))));
        let unknown = r#"{"resources":[{"uri":"r","roots":["zz"]}],"elements":[]}"#;
        assert!(load_model(unknown, &mms).is_err());
    }

    #[test]
    fn rejects_containment_cycles() {
        let mms = load_metamodel(MM).unwrap();
        let cyc = r#"{"resources":[{"uri":"r","roots":[]}],"elements":[
            {"id":"a","class":"t.t.Node","slots":{"kids":["b"]}},
            {"id":"b","class":"t.t.Node","slots":{"kids":["a"]}}]}"#;
        assert!(matches!(load_model(cyc, &mms), Err(ModelError::ContainmentCycle(_))));
    }

    #[test]
    fn rejects_type_errors() {
        let mms = load_metamodel(MM).unwrap();
        let bad = r#"{"resources":[{"uri":"r","roots":["a"]}],"elements":[
            {"id":"a","class":"t.t.Node","slots":{"label":3}}]}"#;
        assert!(matches!(load_model(bad, &mms), Err(ModelError::TypeMismatch { .. })));
        let bad = r#"{"resources":[{"uri":"r","roots":["a"]}],"elements":[
            {"id":"a","class":"t.t.Node","slots":{"nope":3}}]}"#;
        assert!(matches!(load_model(bad, &mms), Err(ModelError::UnknownFeature(_))));
    }
}
