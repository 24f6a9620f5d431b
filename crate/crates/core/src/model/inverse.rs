//! Incrementally maintained inverse reference index.

use super::ElementId;
use crate::metamodel::FeatureId;

type Incoming = Vec<(FeatureId, Vec<ElementId>)>;

/// Maps a referenced element to, per reference feature, the elements whose
/// slot of that feature contains it. Indexed by element id.
///
/// Sources are kept in insertion order; document order is imposed by the
/// model at query time.
#[derive(Debug, Clone, Default)]
pub struct InverseIndex {
    by_target: Vec<Incoming>,
    targets: usize,
}

impl InverseIndex {
    pub fn sources(&self, target: ElementId, feature: FeatureId) -> &[ElementId] {
        self.incoming(target)
            .iter()
            .find(|(f, _)| *f == feature)
            .map(|(_, s)| s.as_slice())
            .unwrap_or(&[])
    }

    /// Every (feature, sources) pair pointing at `target`.
    pub fn incoming(&self, target: ElementId) -> &[(FeatureId, Vec<ElementId>)] {
        self.by_target.get(target.0 as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn insert(&mut self, target: ElementId, feature: FeatureId, source: ElementId) {
        let i = target.0 as usize;
        if i >= self.by_target.len() {
            self.by_target.resize_with(i + 1, Vec::new);
        }
        let per = &mut self.by_target[i];
        if per.is_empty() {
            self.targets += 1;
        }
        match per.iter_mut().find(|(f, _)| *f == feature) {
            Some((_, sources)) => {
                if !sources.contains(&source) {
                    sources.push(source);
                }
            }
            None => per.push((feature, vec![source])),
        }
    }

    pub(crate) fn remove(&mut self, target: ElementId, feature: FeatureId, source: ElementId) {
        let Some(per) = self.by_target.get_mut(target.0 as usize) else {
            return;
        };
        if per.is_empty() {
            return;
        }
        if let Some(i) = per.iter().position(|(f, _)| *f == feature) {
            per[i].1.retain(|s| *s != source);
            if per[i].1.is_empty() {
                per.swap_remove(i);
            }
        }
        if per.is_empty() {
            self.targets -= 1;
        }
    }

    pub(crate) fn forget_target(&mut self, target: ElementId) {
        if let Some(per) = self.by_target.get_mut(target.0 as usize) {
            if !per.is_empty() {
                per.clear();
                self.targets -= 1;
            }
        }
    }

    /// Number of (target, feature, source) triples.
    pub fn len(&self) -> usize {
        self.by_target
            .iter()
            .flat_map(|per| per.iter())
            .map(|(_, s)| s.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.targets == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_remove_keeps_no_empty_entries() {
        let mut idx = InverseIndex::default();
        let (t, s1, s2) = (ElementId(1), ElementId(2), ElementId(3));
        let f = FeatureId(0);
        idx.insert(t, f, s1);
        idx.insert(t, f, s2);
        idx.insert(t, f, s1);
        assert_eq!(idx.sources(t, f), &[s1, s2]);
        idx.remove(t, f, s1);
        idx.remove(t, f, s2);
        assert!(idx.is_empty());
        assert!(idx.sources(t, FeatureId(9)).is_empty());
    }
}
