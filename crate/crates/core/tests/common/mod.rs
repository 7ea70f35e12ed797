//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simfuse::corpus::{tokenize, Dataset, Label, LabelKind, LabeledPair};
use simfuse::embedding::EmbeddingTable;

pub const TOY_DIM: usize = 16;
pub const TOY_VOCAB: usize = 40;

pub fn toy_word(i: usize) -> String {
    format!("w{i:02}")
}

/// Random 16-dim vectors for every toy word.
pub fn toy_table(seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(TOY_DIM, seed).unwrap();
    for i in 0..TOY_VOCAB {
        let v = (0..TOY_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        table.insert(toy_word(i), v).unwrap();
    }
    table
}

fn words(rng: &mut ChaCha8Rng, range: std::ops::Range<usize>) -> String {
    let n = rng.gen_range(3..=6);
    (0..n)
        .map(|_| toy_word(rng.gen_range(range.clone())))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 50 identical-sentence pairs labeled similar followed by 50 pairs whose
/// sides draw from disjoint halves of the vocabulary, labeled different.
pub fn toy_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(100);
    for i in 0..50 {
        let s = words(&mut rng, 0..TOY_VOCAB);
        pairs.push(LabeledPair {
            id: format!("s{i}"),
            a: tokenize(&s).unwrap(),
            b: tokenize(&s).unwrap(),
            label: Label::Binary(true),
        });
    }
    let half = TOY_VOCAB / 2;
    for i in 0..50 {
        let (a, b) = (words(&mut rng, 0..half), words(&mut rng, half..TOY_VOCAB));
        pairs.push(LabeledPair {
            id: format!("d{i}"),
            a: tokenize(&a).unwrap(),
            b: tokenize(&b).unwrap(),
            label: Label::Binary(false),
        });
    }
    Dataset::new(pairs, LabelKind::Binary).unwrap()
}

/// Identical and disjoint halves of [`toy_dataset`].
pub fn is_identical(pair: &LabeledPair) -> bool {
    pair.id.starts_with('s')
}
