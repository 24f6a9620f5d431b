//! Measurement workloads shared by the CLI, benches and acceptance tests.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::case::{self, java};
use crate::metamodel::MetamodelSet;
use crate::model::{ElementId, Model};

/// Queries timed together; the median is taken over batches.
const BATCH: usize = 100;

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct ParityReport {
    pub elements: usize,
    pub queries: usize,
    /// `None` when no query ran.
    pub forward_median_ns: Option<f64>,
    pub inverse_median_ns: Option<f64>,
}

impl ParityReport {
    pub fn ratio(&self) -> Option<f64> {
        match (self.forward_median_ns, self.inverse_median_ns) {
            (Some(f), Some(i)) if f > 0.0 => Some(i / f),
            (Some(_), Some(_)) => Some(f64::INFINITY),
            _ => None,
        }
    }
}

/// A generated program with at least `min_elements` elements.
pub fn sized_program(min_elements: usize, seed: u64) -> Model {
    let mms = case::metamodels();
    let mut pads = min_elements / 10 + 1;
    loop {
        let m = case::gen_fixture_with(&mms, 8, 2, pads, seed);
        if m.len() >= min_elements {
            return m;
        }
        pads += pads / 4 + 1;
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => None,
        n if n % 2 == 1 => Some(v[n / 2]),
        n => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

/// The `(reference, target)` pairs queried by [`inverse_parity`]; a pure
/// function of the model and the seed.
pub fn parity_queries(model: &Model, mms: &MetamodelSet, queries: usize, seed: u64) -> Vec<(ElementId, ElementId)> {
    let target = mms
        .resolve_feature(java::ELEMENT_REFERENCE_TARGET)
        .expect("case metamodel");
    let reference = mms.resolve_class(java::ELEMENT_REFERENCE).expect("case metamodel");
    let refs = model.instances_of(mms, reference);
    if refs.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..queries)
        .map(|_| {
            let r = refs[rng.gen_range(0..refs.len())];
            (r, model.refs(r, target)[0])
        })
        .collect()
}

/// Times `queries` forward reads of `ElementReference.target` against as
/// many `get_inverse` calls on the same feature, over a generated model of
/// about `model_size` elements. Each query picks a random element
/// reference; the forward read returns its target, the inverse query asks
/// for every reference to that target. Medians are per query.
pub fn inverse_parity(model_size: usize, queries: usize, seed: u64) -> ParityReport {
    let mms = case::metamodels();
    let model = sized_program(model_size, seed);
    let target = mms
        .resolve_feature(java::ELEMENT_REFERENCE_TARGET)
        .expect("case metamodel");
    let picks = parity_queries(&model, &mms, queries, seed);
    // Warm the document order cache and the branch predictors alike.
    for (r, t) in picks.iter().take(BATCH) {
        black_box(model.refs(*r, target));
        black_box(model.get_inverse(&mms, *t, target).expect("live target"));
    }
    let mut forward = Vec::new();
    let mut inverse = Vec::new();
    for chunk in picks.chunks(BATCH) {
        let started = Instant::now();
        for (r, _) in chunk {
            black_box(model.refs(black_box(*r), target).to_vec());
        }
        forward.push(started.elapsed().as_nanos() as f64 / chunk.len() as f64);
        let started = Instant::now();
        for (_, t) in chunk {
            black_box(model.get_inverse(&mms, black_box(*t), target).expect("live target"));
        }
        inverse.push(started.elapsed().as_nanos() as f64 / chunk.len() as f64);
    }
    ParityReport {
        elements: model.len(),
        queries: picks.len(),
        forward_median_ns: median(forward),
        inverse_median_ns: median(inverse),
    }
}
