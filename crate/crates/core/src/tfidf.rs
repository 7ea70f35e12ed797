//! Pair-scoped TF-IDF vectors and their cosine similarity.
//!
//! The "document" unit is a sentence pair: IDF counts how many pairs
//! contain a term, and TF counts occurrences across both sentences of the
//! pair divided by the size of their combined vocabulary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use crate::corpus::{Dataset, Sentence};
use crate::error::{Error, Result};

/// Pair-level document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    total_pairs: usize,
    pair_doc_freq: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn from_parts(total_pairs: usize, pair_doc_freq: BTreeMap<String, usize>) -> Result<Self> {
        if total_pairs == 0 {
            return Err(Error::EmptyCorpus);
        }
        if let Some((w, df)) = pair_doc_freq.iter().find(|(_, &df)| df > total_pairs) {
            return Err(Error::format(format!(
                "document frequency {df} of `{w}` exceeds {total_pairs} pairs"
            )));
        }
        Ok(CorpusStats {
            total_pairs,
            pair_doc_freq,
        })
    }

    pub fn total_pairs(&self) -> usize {
        self.total_pairs
    }

    /// Number of pairs containing `term`; 0 when unseen.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.pair_doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn vocabulary_len(&self) -> usize {
        self.pair_doc_freq.len()
    }

    /// `#total_pairs=N` header followed by `term<TAB>doc_freq` lines in
    /// term order.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#total_pairs={}\n", self.total_pairs);
        for (term, df) in &self.pair_doc_freq {
            out.push_str(&format!("{term}\t{df}\n"));
        }
        out
    }

    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut total = None;
        let mut freq = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::format_at(lineno, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#total_pairs=") {
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::format_at(lineno, "bad total_pairs header"))?;
                total = Some(n);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (term, df) = line
                .split_once('\t')
                .ok_or_else(|| Error::format_at(lineno, "expected term<TAB>doc_freq"))?;
            let df = df
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::format_at(lineno, "bad document frequency"))?;
            freq.insert(term.to_owned(), df);
        }
        let total = total.ok_or_else(|| Error::format("missing #total_pairs header"))?;
        CorpusStats::from_parts(total, freq)
    }
}

pub fn build_stats(dataset: &Dataset) -> Result<CorpusStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for pair in dataset.pairs() {
        let present: BTreeSet<&str> = pair.a.surfaces().chain(pair.b.surfaces()).collect();
        for term in present {
            *freq.entry(term.to_owned()).or_insert(0) += 1;
        }
    }
    CorpusStats::from_parts(dataset.len(), freq)
}

/// Occurrences of `term` across both sentences over the number of distinct
/// surfaces in their union. Can exceed 1.
pub fn term_frequency(term: &str, a: &Sentence, b: &Sentence) -> f64 {
    let occurrences = a
        .surfaces()
        .chain(b.surfaces())
        .filter(|s| *s == term)
        .count();
    if occurrences == 0 {
        return 0.0;
    }
    let union: BTreeSet<&str> = a.surfaces().chain(b.surfaces()).collect();
    occurrences as f64 / union.len() as f64
}

/// `ln(total_pairs / (1 + doc_freq))`, floored at zero.
pub fn idf(term: &str, stats: &CorpusStats) -> f64 {
    let ratio = stats.total_pairs as f64 / (1 + stats.doc_freq(term)) as f64;
    ratio.ln().max(0.0)
}

/// Sparse non-negative term weights. Zero weights are never stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TfIdfVector {
    weights: BTreeMap<String, f64>,
}

impl TfIdfVector {
    pub fn from_weights<I, S>(weights: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        TfIdfVector {
            weights: weights
                .into_iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(t, w)| (t.into(), w))
                .collect(),
        }
    }

    pub fn get(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(t, w)| (t.as_str(), *w))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    fn norm_sq(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum()
    }
}

/// TF-IDF vector of `s`, which is one side of the pair `(a, b)`.
pub fn tfidf_vector(s: &Sentence, a: &Sentence, b: &Sentence, stats: &CorpusStats) -> TfIdfVector {
    let distinct: BTreeSet<&str> = s.surfaces().collect();
    TfIdfVector::from_weights(
        distinct
            .into_iter()
            .map(|w| (w, term_frequency(w, a, b) * idf(w, stats))),
    )
}

/// Cosine of two non-negative sparse vectors; 0 when either is empty.
pub fn cosine_sim(u: &TfIdfVector, v: &TfIdfVector) -> f64 {
    let (nu, nv) = (u.norm_sq(), v.norm_sq());
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let dot: f64 = small.iter().map(|(t, w)| w * large.get(t)).sum();
    (dot / (nu * nv).sqrt()).clamp(0.0, 1.0)
}

/// TF-IDF similarity of a sentence pair.
pub fn tfidf_score(a: &Sentence, b: &Sentence, stats: &CorpusStats) -> f64 {
    let u = tfidf_vector(a, a, b, stats);
    let v = tfidf_vector(b, a, b, stats);
    cosine_sim(&u, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Label, LabelKind, LabeledPair};
    use proptest::prelude::*;

    fn sent(s: &str) -> Sentence {
        tokenize(s).unwrap()
    }

    fn pair(a: &str, b: &str) -> LabeledPair {
        LabeledPair {
            id: String::new(),
            a: sent(a),
            b: sent(b),
            label: Label::Binary(true),
        }
    }

    fn dataset(pairs: &[(&str, &str)]) -> Dataset {
        Dataset::new(
            pairs.iter().map(|(a, b)| pair(a, b)).collect(),
            LabelKind::Binary,
        )
        .unwrap()
    }

    fn stats_with(total: usize, term: &str, df: usize) -> CorpusStats {
        CorpusStats::from_parts(total, [(term.to_owned(), df)].into_iter().collect()).unwrap()
    }

    #[test]
    fn stats_counting() {
        let ds = dataset(&[("x y", "y z"), ("p", "q"), ("p", "r"), ("s", "t")]);
        let st = build_stats(&ds).unwrap();
        assert_eq!(st.total_pairs(), 4);
        assert_eq!(st.doc_freq("x"), 1);
        // in both sentences of one pair, counted once
        assert_eq!(st.doc_freq("y"), 1);
        assert_eq!(st.doc_freq("p"), 2);
        assert_eq!(st.doc_freq("nowhere"), 0);
    }

    #[test]
    fn stats_empty() {
        let ds = Dataset::new(vec![], LabelKind::Binary).unwrap();
        assert!(matches!(build_stats(&ds), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn stats_tsv_round_trip() {
        let ds = dataset(&[("x y", "y z"), ("p", "q")]);
        let st = build_stats(&ds).unwrap();
        let back = CorpusStats::from_tsv(st.to_tsv().as_bytes()).unwrap();
        assert_eq!(back, st);
        assert!(CorpusStats::from_tsv("a\t1\n".as_bytes()).is_err());
        assert!(CorpusStats::from_tsv("#total_pairs=1\na\t3\n".as_bytes()).is_err());
    }

    #[test]
    fn tf_examples() {
        let (a, b) = (sent("a b c"), sent("a b d"));
        assert_eq!(term_frequency("a", &a, &b), 0.5);
        assert_eq!(term_frequency("zzz", &a, &b), 0.0);
        let x = sent("x");
        assert_eq!(term_frequency("x", &x, &x), 2.0);
    }

    #[test]
    fn idf_examples() {
        let st = stats_with(4, "w", 1);
        assert!((idf("w", &st) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((idf("unseen", &st) - 4f64.ln()).abs() < 1e-12);
        let st = stats_with(4, "w", 4);
        assert_eq!(idf("w", &st), 0.0);
    }

    #[test]
    fn vector_examples() {
        // tf("a") = 1/2 with union {a, b}; idf = ln 2
        let st = stats_with(4, "a", 1);
        let (a, b) = (sent("a"), sent("b"));
        let v = tfidf_vector(&a, &a, &b, &st);
        assert_eq!(v.len(), 1);
        assert!((v.get("a") - 0.346_573_590_279_972_6).abs() < 1e-4);

        // every term in every pair → floored IDF → empty vector
        let st = CorpusStats::from_parts(1, [("a".to_owned(), 1)].into_iter().collect()).unwrap();
        assert!(tfidf_vector(&a, &a, &a, &st).is_empty());

        let st = CorpusStats::from_parts(10, BTreeMap::new()).unwrap();
        let (a, b) = (sent("p q"), sent("r s"));
        let u = tfidf_vector(&a, &a, &b, &st);
        let v = tfidf_vector(&b, &a, &b, &st);
        assert!(u.iter().all(|(t, _)| v.get(t) == 0.0));
    }

    #[test]
    fn cosine_examples() {
        let u = TfIdfVector::from_weights([("a", 1.0), ("b", 1.0)]);
        let v = TfIdfVector::from_weights([("a", 1.0)]);
        assert!((cosine_sim(&u, &v) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine_sim(&u, &u), 1.0);
        let w = TfIdfVector::from_weights([("c", 2.0)]);
        assert_eq!(cosine_sim(&u, &w), 0.0);
        assert_eq!(cosine_sim(&u, &TfIdfVector::default()), 0.0);
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(
            u in proptest::collection::btree_map("[a-e]", 0.0f64..5.0, 0..5),
            v in proptest::collection::btree_map("[a-e]", 0.0f64..5.0, 0..5),
        ) {
            let u = TfIdfVector::from_weights(u);
            let v = TfIdfVector::from_weights(v);
            let (x, y) = (cosine_sim(&u, &v), cosine_sim(&v, &u));
            prop_assert_eq!(x, y);
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn idf_non_increasing(total in 1usize..50, df in 0usize..49) {
            let df = df.min(total - 1);
            let lo = idf("w", &stats_with(total, "w", df + 1));
            let hi = idf("w", &stats_with(total, "w", df));
            prop_assert!(lo <= hi);
            prop_assert!(lo >= 0.0);
        }

        #[test]
        fn vector_support_within_sentence(a in "[a-f]( [a-f]){0,5}", b in "[a-f]( [a-f]){0,5}") {
            let (sa, sb) = (sent(&a), sent(&b));
            let st = CorpusStats::from_parts(20, BTreeMap::new()).unwrap();
            let v = tfidf_vector(&sa, &sa, &sb, &st);
            for (t, w) in v.iter() {
                prop_assert!(w > 0.0);
                prop_assert!(sa.surfaces().any(|s| s == t));
            }
        }
    }
}
