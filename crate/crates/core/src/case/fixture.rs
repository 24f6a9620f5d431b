//! Seeded generator of program syntax graphs written in the state pattern.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{java, metamodels};
use crate::metamodel::{ClassifierId, FeatureId, MetamodelSet};
use crate::model::{ElementId, Model, ModelError, Scalar};

/// Resource holding generated programs.
pub const PROGRAM_URI: &str = "program.java";

/// Builds java syntax graphs element by element.
pub struct JavaBuilder<'a> {
    mms: &'a MetamodelSet,
    model: Model,
    root: ElementId,
    ids: Ids,
}

struct Ids {
    model: ClassifierId,
    class: ClassifierId,
    method: ClassifierId,
    expr_stmt: ClassifierId,
    if_stmt: ClassifierId,
    call: ClassifierId,
    element_ref: ClassifierId,
    literal: ClassifierId,
    classes: FeatureId,
    class_name: FeatureId,
    class_abstract: FeatureId,
    super_class: FeatureId,
    methods: FeatureId,
    method_name: FeatureId,
    visibility: FeatureId,
    statements: FeatureId,
    expression: FeatureId,
    condition: FeatureId,
    then: FeatureId,
    otherwise: FeatureId,
    method_name_attr: FeatureId,
    arguments: FeatureId,
    target: FeatureId,
    value: FeatureId,
}

/// Where a statement goes.
#[derive(Debug, Clone, Copy)]
pub enum Block {
    Method(ElementId),
    Then(ElementId),
    Else(ElementId),
}

impl<'a> JavaBuilder<'a> {
    pub fn new(mms: &'a MetamodelSet, uri: &str) -> Result<Self, ModelError> {
        let c = |n: &str| mms.resolve_class(&format!("java.java.{n}")).expect("case metamodel");
        let f = |n: &str| mms.resolve_feature(&format!("java.java.{n}")).expect("case metamodel");
        let ids = Ids {
            model: c("Model"),
            class: c("Class"),
            method: c("Method"),
            expr_stmt: c("ExpressionStatement"),
            if_stmt: c("IfStatement"),
            call: c("MethodCall"),
            element_ref: c("ElementReference"),
            literal: c("StringLiteral"),
            classes: f("Model.classes"),
            class_name: f("Class.name"),
            class_abstract: f("Class.abstract"),
            super_class: f("Class.superClass"),
            methods: f("Class.methods"),
            method_name: f("Method.name"),
            visibility: f("Method.visibility"),
            statements: f("Method.statements"),
            expression: f("ExpressionStatement.expression"),
            condition: f("IfStatement.condition"),
            then: f("IfStatement.then"),
            otherwise: f("IfStatement.else"),
            method_name_attr: f("MethodCall.methodName"),
            arguments: f("MethodCall.arguments"),
            target: f("ElementReference.target"),
            value: f("StringLiteral.value"),
        };
        let mut model = Model::new();
        model.create_resource(uri)?;
        let root = model.create_element(mms, uri, ids.model)?;
        Ok(JavaBuilder { mms, model, root, ids })
    }

    fn child(&mut self, parent: ElementId, feature: FeatureId, class: ClassifierId) -> Result<ElementId, ModelError> {
        let uri = self.model.primary_uri().expect("resource").to_string();
        let id = self.model.create_element(self.mms, &uri, class)?;
        self.model.add_ref(self.mms, parent, feature, id)?;
        Ok(id)
    }

    pub fn class(
        &mut self,
        name: &str,
        is_abstract: bool,
        super_class: Option<ElementId>,
    ) -> Result<ElementId, ModelError> {
        let id = self.child(self.root, self.ids.classes, self.ids.class)?;
        self.model
            .set_attr(self.mms, id, self.ids.class_name, Scalar::Str(name.into()))?;
        self.model
            .set_attr(self.mms, id, self.ids.class_abstract, Scalar::Bool(is_abstract))?;
        if let Some(s) = super_class {
            self.model.set_refs(self.mms, id, self.ids.super_class, vec![s])?;
        }
        Ok(id)
    }

    pub fn method(&mut self, class: ElementId, name: &str) -> Result<ElementId, ModelError> {
        let id = self.child(class, self.ids.methods, self.ids.method)?;
        self.model
            .set_attr(self.mms, id, self.ids.method_name, Scalar::Str(name.into()))?;
        self.model
            .set_attr(self.mms, id, self.ids.visibility, Scalar::Literal("PUBLIC".into()))?;
        Ok(id)
    }

    /// Overrides the `PUBLIC` default.
    pub fn visibility(&mut self, method: ElementId, literal: &str) -> Result<(), ModelError> {
        self.model
            .set_attr(self.mms, method, self.ids.visibility, Scalar::Literal(literal.into()))
    }

    fn statement(&mut self, block: Block, class: ClassifierId) -> Result<ElementId, ModelError> {
        match block {
            Block::Method(m) => self.child(m, self.ids.statements, class),
            Block::Then(i) => self.child(i, self.ids.then, class),
            Block::Else(i) => self.child(i, self.ids.otherwise, class),
        }
    }

    /// `if (<condition>) { … } else { … }`; the condition is built by `cond`.
    pub fn if_statement(
        &mut self,
        block: Block,
        cond: impl FnOnce(&mut Self, ElementId) -> Result<(), ModelError>,
    ) -> Result<ElementId, ModelError> {
        let id = self.statement(block, self.ids.if_stmt)?;
        cond(self, id)?;
        Ok(id)
    }

    /// A call used as an if-condition: `cond.call(args)`.
    pub fn condition_call(&mut self, if_stmt: ElementId, name: &str) -> Result<ElementId, ModelError> {
        let id = self.child(if_stmt, self.ids.condition, self.ids.call)?;
        self.model
            .set_attr(self.mms, id, self.ids.method_name_attr, Scalar::Str(name.into()))?;
        Ok(id)
    }

    /// `name(…);` as an expression statement; returns the call.
    pub fn call_statement(&mut self, block: Block, name: &str) -> Result<ElementId, ModelError> {
        let stmt = self.statement(block, self.ids.expr_stmt)?;
        let id = self.child(stmt, self.ids.expression, self.ids.call)?;
        self.model
            .set_attr(self.mms, id, self.ids.method_name_attr, Scalar::Str(name.into()))?;
        Ok(id)
    }

    /// A nested call argument.
    pub fn call_arg(&mut self, call: ElementId, name: &str) -> Result<ElementId, ModelError> {
        let id = self.child(call, self.ids.arguments, self.ids.call)?;
        self.model
            .set_attr(self.mms, id, self.ids.method_name_attr, Scalar::Str(name.into()))?;
        Ok(id)
    }

    pub fn literal_arg(&mut self, call: ElementId, value: &str) -> Result<ElementId, ModelError> {
        let id = self.child(call, self.ids.arguments, self.ids.literal)?;
        self.model
            .set_attr(self.mms, id, self.ids.value, Scalar::Str(value.into()))?;
        Ok(id)
    }

    pub fn reference_arg(&mut self, call: ElementId, target: ElementId) -> Result<ElementId, ModelError> {
        let id = self.child(call, self.ids.arguments, self.ids.element_ref)?;
        self.model.set_refs(self.mms, id, self.ids.target, vec![target])?;
        Ok(id)
    }

    /// The guarded transition pattern:
    /// `if (event.equals("trigger")) { send("action"); activate(Target); }`.
    pub fn transition(
        &mut self,
        method: ElementId,
        trigger: &str,
        action: &str,
        target: ElementId,
    ) -> Result<ElementId, ModelError> {
        let if_stmt = self.if_statement(Block::Method(method), |b, i| {
            let eq = b.condition_call(i, "equals")?;
            b.literal_arg(eq, trigger)?;
            Ok(())
        })?;
        let send = self.call_statement(Block::Then(if_stmt), "send")?;
        self.literal_arg(send, action)?;
        let activate = self.call_statement(Block::Then(if_stmt), "activate")?;
        self.reference_arg(activate, target)?;
        Ok(if_stmt)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn finish(self) -> Model {
        self.model
    }
}

/// Name of state `i`: Idle, Active, Done, then S3, S4, …
pub fn state_name(i: usize) -> String {
    match i {
        0 => "Idle".into(),
        1 => "Active".into(),
        2 => "Done".into(),
        n => format!("S{n}"),
    }
}

/// Trigger and action of the `j`-th generated transition.
pub fn transition_labels(j: usize) -> (String, String) {
    match j {
        0 => ("start".into(), "started".into()),
        1 => ("stop".into(), "stopped".into()),
        n => (format!("t{n}"), format!("a{n}")),
    }
}

/// `(source, target, trigger, action)`, states by index.
pub type ExpectedTransition = (usize, usize, String, String);

/// The statemachine a generated fixture realizes: state names and
/// transitions in generation order.
pub fn expected_statemachine(n_states: usize, per_state: usize) -> (Vec<String>, Vec<ExpectedTransition>) {
    let states = (0..n_states).map(state_name).collect();
    let mut transitions = Vec::new();
    let mut j = 0;
    for i in 0..n_states.saturating_sub(1) {
        for k in 0..per_state {
            let target = i + 1 + (k % (n_states - 1 - i));
            let (t, a) = transition_labels(j);
            transitions.push((i, target, t, a));
            j += 1;
        }
    }
    (states, transitions)
}

/// A java model with an abstract `State` class, `n_states` concrete
/// subclasses that each activate `per_state` successors behind guarded
/// `send` calls, and `pad_classes` unrelated classes. Only the padding
/// depends on `seed`: where pad classes sit among the state classes, their
/// inheritance, and `log` calls that reference arbitrary classes.
pub fn gen_fixture(n_states: usize, per_state: usize, pad_classes: usize, seed: u64) -> Model {
    let mms = metamodels();
    gen_fixture_with(&mms, n_states, per_state, pad_classes, seed)
}

pub fn gen_fixture_with(mms: &MetamodelSet, n_states: usize, per_state: usize, pad_classes: usize, seed: u64) -> Model {
    assert!(n_states >= 1, "a fixture needs at least one state");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = JavaBuilder::new(mms, PROGRAM_URI).expect("fresh model");

    // Slot order: `true` is the next state class, `false` a pad class.
    let mut layout: Vec<bool> = std::iter::repeat_n(true, n_states)
        .chain(std::iter::repeat_n(false, pad_classes))
        .collect();
    layout.shuffle(&mut rng);

    let base = b.class("State", true, None).expect("builder");
    let mut state_classes = Vec::with_capacity(n_states);
    let mut pad_ids: Vec<ElementId> = Vec::with_capacity(pad_classes);
    for is_state in layout {
        if is_state {
            let name = state_name(state_classes.len());
            state_classes.push(b.class(&name, false, Some(base)).expect("builder"));
        } else {
            let sup = if !pad_ids.is_empty() && rng.gen_bool(0.3) {
                Some(pad_ids[rng.gen_range(0..pad_ids.len())])
            } else {
                None
            };
            let name = format!("Pad{}", pad_ids.len());
            pad_ids.push(b.class(&name, false, sup).expect("builder"));
        }
    }

    let (_, transitions) = expected_statemachine(n_states, per_state);
    let handles: Vec<ElementId> = state_classes
        .iter()
        .map(|c| b.method(*c, "handle").expect("builder"))
        .collect();
    for (source, target, trigger, action) in &transitions {
        b.transition(handles[*source], trigger, action, state_classes[*target])
            .expect("builder");
    }

    let all_classes: Vec<ElementId> = state_classes.iter().chain(&pad_ids).copied().collect();
    for (i, pad) in pad_ids.iter().enumerate() {
        let run = b.method(*pad, "run").expect("builder");
        b.visibility(run, "PRIVATE").expect("builder");
        for _ in 0..rng.gen_range(1..=3) {
            let log = b.call_statement(Block::Method(run), "log").expect("builder");
            let target = all_classes[rng.gen_range(0..all_classes.len())];
            b.reference_arg(log, target).expect("builder");
            b.literal_arg(log, &format!("p{i}")).expect("builder");
        }
    }
    b.finish()
}

/// The java resource root of a model built by [`JavaBuilder`].
pub fn program_root(model: &Model) -> Option<ElementId> {
    model
        .resource_index(PROGRAM_URI)
        .and_then(|r| model.resources()[r].roots().first().copied())
}

/// Names of all classes in a java model, in document order.
pub fn class_names(model: &Model, mms: &MetamodelSet) -> Vec<String> {
    let class = mms.resolve_class(java::CLASS).expect("case metamodel");
    let name = mms.resolve_feature(java::CLASS_NAME).expect("case metamodel");
    model
        .instances_of(mms, class)
        .into_iter()
        .filter_map(|id| model.attr_str(id, name).map(str::to_string))
        .collect()
}
