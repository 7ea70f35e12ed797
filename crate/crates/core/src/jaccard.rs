//! Jaccard similarity weighted by agreement of grammatical roles among
//! co-occurring words.

use std::collections::BTreeSet;

use crate::corpus::{Role, Sentence};

/// Words present in both sentences, in order of first appearance in the
/// first sentence, with the role each word carries at its first
/// occurrence on either side.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoOccurrence {
    pub words: Vec<String>,
    pub roles: Vec<(Option<Role>, Option<Role>)>,
}

impl CoOccurrence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words whose role is the same, present and not NONE on both sides.
    pub fn matching_roles(&self) -> usize {
        self.roles
            .iter()
            .filter(|(ra, rb)| roles_match(*ra, *rb))
            .count()
    }
}

fn roles_match(a: Option<Role>, b: Option<Role>) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x == y && x != Role::None)
}

fn first_role(s: &Sentence, surface: &str) -> Option<Role> {
    s.tokens
        .iter()
        .find(|t| t.surface() == surface)
        .and_then(|t| t.role)
}

pub fn co_occurrence(a: &Sentence, b: &Sentence) -> CoOccurrence {
    let in_b: BTreeSet<&str> = b.surfaces().collect();
    let mut seen = BTreeSet::new();
    let mut out = CoOccurrence::default();
    for tok in &a.tokens {
        let w = tok.surface();
        if in_b.contains(w) && seen.insert(w) {
            out.words.push(w.to_owned());
            out.roles.push((tok.role, first_role(b, w)));
        }
    }
    out
}

/// Role weight: 1 below three shared words or when no shared word agrees
/// on its role, otherwise `(count + 1) / count`.
pub fn component_weight(c: &CoOccurrence) -> f64 {
    if c.len() < 3 {
        return 1.0;
    }
    match c.matching_roles() {
        0 => 1.0,
        count => (count as f64 + 1.0) / count as f64,
    }
}

/// Unclamped score `alpha * |A ∩ B| / |A ∪ B|`, in `[0, 2]`.
pub fn jaccard_raw(a: &Sentence, b: &Sentence) -> f64 {
    let sa: BTreeSet<&str> = a.surfaces().collect();
    let sb: BTreeSet<&str> = b.surfaces().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    let co = co_occurrence(a, b);
    component_weight(&co) * co.len() as f64 / union as f64
}

/// [`jaccard_raw`] clamped to `[0, 1]`.
pub fn jaccard_score(a: &Sentence, b: &Sentence) -> f64 {
    jaccard_raw(a, b).clamp(0.0, 1.0)
}
