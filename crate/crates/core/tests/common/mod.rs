//! Generators and oracles shared by the property suites.
#![allow(dead_code)]

use coevo_core::metamodel::{load_metamodel, MetamodelSet};
use coevo_core::model::{ElementId, Model, Scalar, Slot};
use coevo_core::{FeatureId, Workspace};
use proptest::prelude::*;

pub const GRAPH_MM: &str = r#"{"name":"g","packages":[{"name":"g","classifiers":[
  {"kind":"class","name":"Root","abstract":false,"super":[],"features":[
    {"kind":"reference","name":"nodes","target":"g.g.Node","containment":true,"lower":0,"upper":"*"}]},
  {"kind":"class","name":"Node","abstract":false,"super":[],"features":[
    {"kind":"attribute","name":"name","type":"string","lower":0,"upper":1},
    {"kind":"reference","name":"kids","target":"g.g.Node","containment":true,"lower":0,"upper":"*"},
    {"kind":"reference","name":"next","target":"g.g.Node","containment":false,"lower":0,"upper":1},
    {"kind":"reference","name":"links","target":"g.g.Node","containment":false,"lower":0,"upper":"*"},
    {"kind":"reference","name":"owner","target":"g.g.Root","containment":false,"lower":0,"upper":1}]},
  {"kind":"class","name":"Leaf","abstract":false,"super":["g.g.Node"],"features":[
    {"kind":"reference","name":"peer","target":"g.g.Leaf","containment":false,"lower":0,"upper":1}]}
]}]}"#;

pub const RESOURCES: [&str; 2] = ["a", "b"];

pub fn graph_mms() -> MetamodelSet {
    load_metamodel(GRAPH_MM).unwrap()
}

/// One step of a random edit script: (opcode, three selectors).
pub type Step = (u8, u32, u32, u32);

pub fn steps(max: usize) -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec((any::<u8>(), any::<u32>(), any::<u32>(), any::<u32>()), 0..max)
}

fn pick<T: Copy>(v: &[T], sel: u32) -> Option<T> {
    (!v.is_empty()).then(|| v[sel as usize % v.len()])
}

/// Runs an edit script: creation, linking, moves, unsets and deletions.
/// Failing edits (cycles, type errors) are skipped. At most `max_live`
/// elements are alive at any time.
pub fn build(mms: &MetamodelSet, script: &[Step], max_live: usize) -> Model {
    let c = |n: &str| mms.resolve_class(&format!("g.g.{n}")).unwrap();
    let f = |n: &str| mms.resolve_feature(&format!("g.g.{n}")).unwrap();
    let (root, node, leaf) = (c("Root"), c("Node"), c("Leaf"));
    let mut m = Model::new();
    for r in RESOURCES {
        m.create_resource(r).unwrap();
    }
    for &(op, a, b, x) in script {
        let live: Vec<ElementId> = m.element_ids().collect();
        let nodes: Vec<ElementId> = live
            .iter()
            .copied()
            .filter(|e| m.class_of(*e).is_ok_and(|k| mms.conforms_to(k, node)))
            .collect();
        let roots: Vec<ElementId> = live.iter().copied().filter(|e| m.class_of(*e) == Ok(root)).collect();
        let leaves: Vec<ElementId> = live.iter().copied().filter(|e| m.class_of(*e) == Ok(leaf)).collect();
        let kind = if x % 3 == 0 { leaf } else { node };
        let creating = matches!(op % 10, 0..=2);
        if creating && live.len() >= max_live {
            continue;
        }
        let _ = match op % 10 {
            0 => {
                let k = if a % 2 == 0 { root } else { kind };
                m.create_element(mms, RESOURCES[b as usize % 2], k).map(|_| ())
            }
            1 | 2 => {
                let uri = m.primary_uri().unwrap().to_string();
                let Ok(child) = m.create_element(mms, &uri, kind) else {
                    continue;
                };
                match (pick(&roots, a), pick(&nodes, b)) {
                    (Some(r), _) if op % 10 == 1 => m.add_ref(mms, r, f("Root.nodes"), child),
                    (_, Some(n)) if n != child => m.add_ref(mms, n, f("Node.kids"), child),
                    _ => Ok(()),
                }
            }
            3 => match (pick(&nodes, a), pick(&nodes, b)) {
                (Some(s), Some(t)) => m.set_refs(mms, s, f("Node.next"), vec![t]),
                _ => Ok(()),
            },
            4 => match (pick(&nodes, a), pick(&nodes, b)) {
                (Some(s), Some(t)) if !m.refs(s, f("Node.links")).contains(&t) => m.add_ref(mms, s, f("Node.links"), t),
                _ => Ok(()),
            },
            5 => match (pick(&nodes, a), pick(&roots, b)) {
                (Some(s), Some(t)) => m.set_refs(mms, s, f("Node.owner"), vec![t]),
                _ => Ok(()),
            },
            6 => match (pick(&leaves, a), pick(&leaves, b)) {
                (Some(s), Some(t)) => m.set_refs(mms, s, f("Leaf.peer"), vec![t]),
                _ => Ok(()),
            },
            7 => match pick(&live, a) {
                Some(e) if x % 4 == 0 => m.delete_element(e),
                _ => Ok(()),
            },
            8 => match (pick(&nodes, a), pick(&nodes, b)) {
                // Moves `t` under `s`; cycles are rejected by the model.
                (Some(s), Some(t)) if !m.refs(s, f("Node.kids")).contains(&t) => m.add_ref(mms, s, f("Node.kids"), t),
                _ => Ok(()),
            },
            _ => match pick(&nodes, a) {
                Some(s) if x % 2 == 0 => m.unset(mms, s, f("Node.links")),
                Some(s) => m.set_attr(mms, s, f("Node.name"), Scalar::Str(format!("n{b}"))),
                None => Ok(()),
            },
        };
    }
    m
}

/// Reference features of the graph metamodel.
pub fn reference_features(mms: &MetamodelSet) -> Vec<FeatureId> {
    mms.feature_ids()
        .filter(|f| mms.feature(*f).is_some_and(|d| d.is_reference()))
        .collect()
}

/// `get_inverse` by full scan: every live element whose `feature` slot holds
/// `target`, in document order.
pub fn brute_inverse(m: &Model, mms: &MetamodelSet, target: ElementId, feature: FeatureId) -> Vec<ElementId> {
    m.document_order(mms)
        .into_iter()
        .filter(|s| m.refs(*s, feature).contains(&target))
        .collect()
}

/// Uncanonicalized state: ids as stored, not renumbered.
pub fn raw_state(ws: &Workspace) -> String {
    let mut out = ws.metamodels.fingerprint();
    for m in &ws.models {
        out.push_str(&serde_json::to_string(&m.to_doc(&ws.metamodels, false)).unwrap());
    }
    out
}

pub fn slot_refs(slot: Option<&Slot>) -> &[ElementId] {
    match slot {
        Some(Slot::Refs(r)) => r,
        _ => &[],
    }
}

pub const ENUM_MM_HEAD: &str = r#"{"name":"e","packages":[{"name":"e","classifiers":[
  {"kind":"class","name":"Shelf","abstract":false,"super":[],"features":[
    {"kind":"reference","name":"items","target":"e.e.Item","containment":true,"lower":0,"upper":"*"}]},
  {"kind":"class","name":"Item","abstract":false,"super":[],"features":[
    {"kind":"attribute","name":"label","type":"string","lower":0,"upper":1},
    {"kind":"attribute","name":"kind","type":"e.e.Kind","lower":1,"upper":1},
    {"kind":"reference","name":"related","target":"e.e.Item","containment":false,"lower":0,"upper":"*"}]},
  {"kind":"enum","name":"Kind","literals":[LITERALS]}
]}]}"#;

/// The one-enum metamodel with literals K0..K{n-1}.
pub fn enum_mms(literals: usize) -> MetamodelSet {
    let lits: Vec<String> = (0..literals).map(|i| format!("\"K{i}\"")).collect();
    load_metamodel(&ENUM_MM_HEAD.replace("LITERALS", &lits.join(","))).unwrap()
}

/// A shelf of items; item `i` has kind `kinds[i]`, a label for every
/// third item, and `related` edges picked by `edges`.
pub fn enum_model(mms: &MetamodelSet, kinds: &[usize], edges: &[(usize, usize)]) -> Model {
    let c = |n: &str| mms.resolve_class(&format!("e.e.{n}")).unwrap();
    let f = |n: &str| mms.resolve_feature(&format!("e.e.{n}")).unwrap();
    let mut m = Model::new();
    m.create_resource("shelf").unwrap();
    let shelf = m.create_element(mms, "shelf", c("Shelf")).unwrap();
    let mut items = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        let item = m.create_element(mms, "shelf", c("Item")).unwrap();
        m.add_ref(mms, shelf, f("Shelf.items"), item).unwrap();
        m.set_attr(mms, item, f("Item.kind"), Scalar::Literal(format!("K{k}")))
            .unwrap();
        if i % 3 == 0 {
            m.set_attr(mms, item, f("Item.label"), Scalar::Str(format!("item {i}")))
                .unwrap();
        }
        items.push(item);
    }
    for (s, t) in edges {
        if items.is_empty() {
            break;
        }
        let (s, t) = (items[s % items.len()], items[t % items.len()]);
        if !m.refs(s, f("Item.related")).contains(&t) {
            m.add_ref(mms, s, f("Item.related"), t).unwrap();
        }
    }
    m
}

// ---- properties -----------------------------------------------------------

use coevo_core::case;
use coevo_core::catalog::{self, ParamType};
use coevo_core::history::{Binding, Bindings};
use coevo_core::metamodel::{ClassifierDoc, FeatureDoc, MetamodelDoc};
use coevo_core::{check_conformance, History, Recorder};
use proptest::test_runner::TestCaseError;
use std::sync::Arc;

/// Every (live element, reference feature) pair answers like the scan.
pub fn check_inverse_oracle(mms: &MetamodelSet, m: &Model) -> Result<usize, TestCaseError> {
    let features = reference_features(mms);
    let mut pairs = 0;
    for target in m.element_ids() {
        for f in &features {
            let fast = m
                .get_inverse(mms, target, *f)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let slow = brute_inverse(m, mms, target, *f);
            prop_assert_eq!(fast, slow, "target {} feature {}", target, mms.feature_fqn(*f));
            pairs += 1;
        }
    }
    Ok(pairs)
}

/// Metamodels as text, with classifiers and features sorted by name.
pub fn unordered_metamodels(mms: &MetamodelSet) -> String {
    let mut docs: Vec<MetamodelDoc> = mms.to_docs();
    for d in &mut docs {
        for p in &mut d.packages {
            p.classifiers.sort_by(|a, b| a.name().cmp(b.name()));
            for c in &mut p.classifiers {
                if let ClassifierDoc::Class { features, .. } = c {
                    features.sort_by(|a: &FeatureDoc, b: &FeatureDoc| a.name().cmp(b.name()));
                }
            }
        }
    }
    serde_json::to_string(&docs).unwrap()
}

fn apply(ws: &mut Workspace, name: &str, b: Bindings) -> Result<(), String> {
    let desc = catalog::find(name).ok_or("unknown operation")?;
    let resolved = catalog::resolve_bindings(desc, &ws.metamodels, &b, true).map_err(|e| format!("{e:?}"))?;
    let failures = catalog::check_constraints(desc, ws, &resolved);
    if !failures.is_empty() {
        return Err(format!("{failures:?}"));
    }
    coevo_core::execute_transaction(ws, |ws| (desc.execute)(ws, &resolved)).map_err(|e| e.to_string())
}

/// enumToSubclasses followed by subClassesToEnumeration restores the model
/// up to isomorphism and the metamodel up to ordering.
pub fn check_enum_round_trip(literals: usize, kinds: &[usize], edges: &[(usize, usize)]) -> Result<(), TestCaseError> {
    let mms = enum_mms(literals);
    let model = enum_model(&mms, kinds, edges);
    let mut ws = Workspace::new(mms.clone());
    ws.models.push(model.clone());
    apply(
        &mut ws,
        "enumToSubclasses",
        bindings_of([("class", "e.e.Item"), ("attribute", "e.e.Item.kind")]),
    )
    .map_err(TestCaseError::fail)?;
    prop_assert!(ws.metamodels.resolve_classifier("e.e.Kind").is_err());
    prop_assert!(check_conformance(&ws.models[0], &ws.metamodels).is_empty());
    apply(
        &mut ws,
        "subClassesToEnumeration",
        bindings_of([("class", "e.e.Item"), ("attributeName", "kind"), ("enumName", "Kind")]),
    )
    .map_err(TestCaseError::fail)?;
    prop_assert_eq!(unordered_metamodels(&ws.metamodels), unordered_metamodels(&mms));
    prop_assert!(ws.models[0].isomorphic(&ws.metamodels, &model, &mms));
    Ok(())
}

pub fn bindings_of<const N: usize>(pairs: [(&str, &str); N]) -> Bindings {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), Binding::from(v)))
        .collect()
}

/// Raw choice of one binding value; interpreted per parameter type.
pub type Pick = (u8, u32);

fn pick_binding(mms: &MetamodelSet, ty: ParamType, (how, sel): Pick) -> Option<Binding> {
    let mut names: Vec<String> = Vec::new();
    match ty {
        ParamType::ClassRef | ParamType::EnumRef | ParamType::ElementRef => {
            names.extend(mms.classifier_ids().map(|c| mms.classifier_fqn(c)));
        }
        _ => {}
    }
    if matches!(ty, ParamType::FeatureRef | ParamType::ElementRef) {
        names.extend(mms.feature_ids().map(|f| mms.feature_fqn(f)));
    }
    if matches!(ty, ParamType::PackageRef | ParamType::ElementRef) {
        names.push("e.e".into());
    }
    let words = [
        "kind", "label", "Kind", "Item", "shelf", "fresh", "K0", "9bad", "", "related",
    ];
    let types = ["string", "boolean", "integer", "e.e.Kind", "e.e.Item", "nope"];
    Some(match (how % 8, ty) {
        (0, _) => return None,
        (1, _) => Binding::from(words[sel as usize % words.len()]),
        (_, ParamType::String) if how % 2 == 0 => Binding::from(types[sel as usize % types.len()]),
        (_, ParamType::String) => Binding::from(words[sel as usize % words.len()]),
        (_, ParamType::Boolean) => Binding::from(sel % 2 == 0),
        (_, ParamType::Integer) => Binding::Int(i64::from(sel % 4) - 1),
        (_, ParamType::UpperBound) if sel % 3 == 0 => Binding::from("*"),
        (_, ParamType::UpperBound) => Binding::Int(i64::from(sel % 3)),
        (_, _) if names.is_empty() => Binding::from(words[sel as usize % words.len()]),
        (_, _) => Binding::from(names[sel as usize % names.len()].as_str()),
    })
}

/// Outcome of one soundness trial.
#[derive(Debug, PartialEq, Eq)]
pub enum Trial {
    /// Bindings did not resolve or a constraint failed.
    Rejected,
    /// Constraints passed and the operation committed.
    Committed,
}

/// Picks an operation and bindings at random over a shelf model (possibly
/// after enumToSubclasses); if every constraint passes, executing must
/// commit and leave the model conformant.
pub fn check_soundness(pre_split: bool, op: usize, picks: &[Pick], kinds: &[usize]) -> Result<Trial, TestCaseError> {
    let mms = enum_mms(3);
    let mut ws = Workspace::new(mms.clone());
    ws.models.push(enum_model(&mms, kinds, &[(0, 1), (2, 0)]));
    if pre_split {
        apply(
            &mut ws,
            "enumToSubclasses",
            bindings_of([("class", "e.e.Item"), ("attribute", "e.e.Item.kind")]),
        )
        .map_err(TestCaseError::fail)?;
    }
    let desc = &catalog::catalog()[op % catalog::catalog().len()];
    let mut raw = Bindings::new();
    for (i, p) in desc.parameters.iter().enumerate() {
        if let Some(b) = pick_binding(&ws.metamodels, p.ty, picks.get(i).copied().unwrap_or((2, 0))) {
            raw.insert(p.name.to_string(), b);
        }
    }
    let Ok(resolved) = catalog::resolve_bindings(desc, &ws.metamodels, &raw, true) else {
        return Ok(Trial::Rejected);
    };
    if !catalog::check_constraints(desc, &ws, &resolved).is_empty() {
        return Ok(Trial::Rejected);
    }
    let history = History::create(&ws.metamodels).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut rec = Recorder::new(history, Arc::new(case::registry())).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let model = coevo_core::model::load_model(&ws.models[0].save(&ws.metamodels), rec.metamodels())
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    rec.attach(model).map_err(|e| TestCaseError::fail(e.to_string()))?;
    if let Err(e) = rec.apply_operation(desc.name, raw.clone()) {
        return Err(TestCaseError::fail(format!(
            "{} {raw:?} passed its constraints but failed: {e}",
            desc.name
        )));
    }
    prop_assert!(check_conformance(&rec.models()[0], rec.metamodels()).is_empty());
    Ok(Trial::Committed)
}

/// Two copies of a generated program migrate to identical bytes.
pub fn check_replay_determinism(n: usize, k: usize, pads: usize, seed: u64) -> Result<(), TestCaseError> {
    let mms = case::metamodels();
    let program = case::gen_fixture_with(&mms, n, k, pads, seed);
    let copy =
        coevo_core::model::load_model(&program.save(&mms), &mms).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let history = case::build_case_history();
    let registry = case::registry();
    let a = case::run_case_with(&program, &mms, &history, &registry).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let b = case::run_case_with(&copy, &mms, &history, &registry).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(a.outcome.models[0].isomorphic(&a.outcome.metamodels, &b.outcome.models[0], &b.outcome.metamodels));
    prop_assert_eq!(
        a.outcome.models[0].save(&a.outcome.metamodels),
        b.outcome.models[0].save(&b.outcome.metamodels)
    );
    prop_assert_eq!(
        a.statemachine.canonical_form(&a.outcome.metamodels),
        b.statemachine.canonical_form(&b.outcome.metamodels)
    );
    Ok(())
}

// ---- transactions -----------------------------------------------------------

use coevo_core::history::{ChangeRecord, CustomChange, MigrationError, MigrationRegistry, OperationApplication};
use serde_json::json;

/// The case migrations plus migrations that break their models.
pub fn adversarial_registry() -> MigrationRegistry {
    let mut r = case::registry();
    r.register("Noop", |_| Ok(())).unwrap();
    r.register("HalfTransition", |ctx| {
        let mms = ctx.metamodels;
        let m = &mut ctx.models[0];
        m.create_resource("half")?;
        let machine = m.create_element(mms, "half", ctx_class(mms, "sm.sm.StateMachine")?)?;
        let t = m.create_element(mms, "half", ctx_class(mms, "sm.sm.Transition")?)?;
        m.add_ref(mms, machine, mms.resolve_feature("sm.sm.StateMachine.transitions")?, t)?;
        Ok(())
    })
    .unwrap();
    r.register("Dangling", |ctx| {
        let mms = ctx.metamodels;
        let m = &mut ctx.models[0];
        let class = mms.resolve_class(case::java::CLASS)?;
        let base = m.instances_of(mms, class)[0];
        m.remove_element(base)?;
        Ok(())
    })
    .unwrap();
    r.register("FailMidway", |ctx| {
        let mms = ctx.metamodels;
        let name = mms.resolve_feature(case::java::CLASS_NAME)?;
        let class = mms.resolve_class(case::java::CLASS)?;
        let m = &mut ctx.models[0];
        for c in m.instances_of(mms, class) {
            m.set_attr(mms, c, name, Scalar::Str("Renamed".into()))?;
        }
        Err(MigrationError::failed("gave up halfway"))
    })
    .unwrap();
    r.register("Orphans", |ctx| {
        let mms = ctx.metamodels;
        let m = &mut ctx.models[0];
        let root = case::program_root(m).ok_or_else(|| MigrationError::failed("no program"))?;
        m.unset(mms, root, mms.resolve_feature("java.java.Model.classes")?)?;
        Ok(())
    })
    .unwrap();
    r.register("Retype", |ctx| {
        let mms = ctx.metamodels;
        let m = &mut ctx.models[0];
        let call = mms.resolve_class(case::java::METHOD_CALL)?;
        let first = m.instances_of(mms, call)[0];
        m.retype(mms, first, mms.resolve_class("java.java.Expression")?)?;
        Ok(())
    })
    .unwrap();
    r
}

fn ctx_class(mms: &MetamodelSet, fqn: &str) -> Result<coevo_core::ClassifierId, MigrationError> {
    Ok(mms.resolve_class(fqn)?)
}

fn custom(primitives: serde_json::Value, migration: Option<&str>) -> ChangeRecord {
    ChangeRecord::Custom {
        custom: CustomChange {
            primitives: serde_json::from_value(primitives).unwrap(),
            migration_id: migration.map(str::to_string),
        },
    }
}

fn operation(name: &str, pairs: &[(&str, Binding)]) -> ChangeRecord {
    ChangeRecord::Operation {
        operation: OperationApplication {
            op_name: name.to_string(),
            bindings: pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        },
    }
}

/// Records that must each be rejected with the session left untouched.
pub fn adversarial_records() -> Vec<(&'static str, ChangeRecord)> {
    let mandatory = json!([{"kind": "create-feature", "class": "java.java.Class",
        "feature": {"kind": "attribute", "name": "visibility", "type": "string", "lower": 1, "upper": 1}}]);
    let s = |v: &str| Binding::from(v);
    vec![
        ("mandatory slot left empty", custom(mandatory, Some("Noop"))),
        ("transition without ends", custom(json!([]), Some("HalfTransition"))),
        ("dangling superclass references", custom(json!([]), Some("Dangling"))),
        ("migration fails after editing", custom(json!([]), Some("FailMidway"))),
        ("classes detached from their model", custom(json!([]), Some("Orphans"))),
        ("instance of an abstract class", custom(json!([]), Some("Retype"))),
        ("unknown migration", custom(json!([]), Some("NoSuchMigration"))),
        (
            "second primitive invalid",
            custom(
                json!([
                    {"kind": "create-feature", "class": "java.java.Class",
                     "feature": {"kind": "attribute", "name": "doc", "type": "string", "lower": 0, "upper": 1}},
                    {"kind": "delete-feature", "feature": "java.java.Class.nope"}
                ]),
                None,
            ),
        ),
        (
            "lower bound above upper bound",
            custom(
                json!([{"kind": "set-property", "element": "java.java.Class.name", "property": "lower", "new": 5}]),
                None,
            ),
        ),
        (
            "deleting a referenced classifier",
            custom(
                json!([{"kind": "delete-classifier", "classifier": "java.java.Statement"}]),
                None,
            ),
        ),
        (
            "stale old value",
            custom(
                json!([{"kind": "set-property", "element": "java.java.Class", "property": "name", "old": "Klass", "new": "Type"}]),
                None,
            ),
        ),
        (
            "mandatory attribute on populated class",
            operation(
                "createAttribute",
                &[
                    ("class", s("java.java.Class")),
                    ("name", s("doc")),
                    ("valueType", s("string")),
                    ("lower", Binding::Int(1)),
                    ("upper", Binding::Int(1)),
                ],
            ),
        ),
        (
            "deleting a populated containment",
            operation("deleteFeature", &[("feature", s("java.java.Model.classes"))]),
        ),
        (
            "rename to a non-identifier",
            operation(
                "rename",
                &[("element", s("java.java.Class")), ("newName", s("9 lives"))],
            ),
        ),
        (
            "rename onto a sibling",
            operation("rename", &[("element", s("java.java.Class")), ("newName", s("Method"))]),
        ),
        (
            "missing binding",
            operation("createClass", &[("package", s("java.java"))]),
        ),
        (
            "unknown element",
            operation("deleteFeature", &[("feature", s("java.java.Nope.x"))]),
        ),
        ("unknown operation", operation("explode", &[])),
        (
            "enum split of a string attribute",
            operation(
                "enumToSubclasses",
                &[
                    ("class", s("java.java.Class")),
                    ("attribute", s("java.java.Class.name")),
                ],
            ),
        ),
    ]
}

/// A session over the case metamodels with `program` attached.
pub fn adversarial_session(program: &Model) -> Recorder {
    let mms = case::metamodels();
    let history = History::create(&mms).unwrap();
    let mut rec = Recorder::new(history, Arc::new(adversarial_registry())).unwrap();
    let rebased = coevo_core::model::load_model(&program.save(&mms), rec.metamodels()).unwrap();
    rec.attach(rebased).unwrap();
    rec
}

/// Applies every adversarial record to `rec`; each must fail and leave the
/// raw state and the history as they were.
pub fn check_adversarial(rec: &mut Recorder) -> Result<usize, String> {
    let mut checked = 0;
    for (what, record) in adversarial_records() {
        let before = raw_state(rec.workspace());
        let records = rec.history().record_count();
        let history = rec.history().save();
        match rec.append(record) {
            Ok(_) => return Err(format!("{what}: committed")),
            Err(_) if raw_state(rec.workspace()) != before => return Err(format!("{what}: state changed")),
            Err(_) if rec.history().record_count() != records || rec.history().save() != history => {
                return Err(format!("{what}: history changed"))
            }
            Err(_) => {}
        }
        if rec.models().iter().any(|m| m.is_softened()) {
            return Err(format!("{what}: model left softened"));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Replays the case history record by record on a session holding
/// `program`, checking conformance after every commit.
pub fn check_committed_records_conform(program: &Model) -> Result<usize, String> {
    let mut rec = adversarial_session(program);
    let history = case::build_case_history();
    let mut committed = 0;
    for (i, record) in history.records().enumerate() {
        rec.append(record.clone()).map_err(|e| format!("record {i}: {e}"))?;
        for m in rec.models() {
            let v = check_conformance(m, rec.metamodels());
            if !v.is_empty() {
                return Err(format!("record {i}: {v:?}"));
            }
        }
        committed += 1;
    }
    Ok(committed)
}
