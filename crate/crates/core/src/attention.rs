//! Multi-feature attention over a sentence pair.
//!
//! Token weights combine two signals: how strongly each token's vector
//! aligns with the other sentence (row/column sums of the cross-sentence
//! cosine grid) and an edit-distance position term at co-occurring words.
//! The sum goes through a softmax and scales the embedding rows before
//! they reach the convolutional scorer.

use crate::corpus::Sentence;
use crate::embedding::{embed_sentence, EmbeddingTable, SentenceMatrix};
use crate::error::{Error, Result};
use crate::jaccard::co_occurrence;

/// Cosines between the true tokens of two sentences, `n x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGrid {
    pub values: Vec<Vec<f64>>,
    pub n: usize,
    pub m: usize,
}

impl SimilarityGrid {
    pub fn transpose(&self) -> SimilarityGrid {
        let values = (0..self.m)
            .map(|j| (0..self.n).map(|i| self.values[i][j]).collect())
            .collect();
        SimilarityGrid {
            values,
            n: self.m,
            m: self.n,
        }
    }
}

/// Softmax-normalized token weights for each side of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionVectors {
    pub row_weights: Vec<f64>,
    pub col_weights: Vec<f64>,
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (dot(u, u), dot(v, v));
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot(u, v) / (nu * nv).sqrt()).clamp(-1.0, 1.0)
}

pub fn cosine_matrix(a: &SentenceMatrix, b: &SentenceMatrix) -> Result<SimilarityGrid> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "sentence matrices of width {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let values = a
        .true_rows()
        .iter()
        .map(|u| b.true_rows().iter().map(|v| cosine(u, v)).collect())
        .collect();
    Ok(SimilarityGrid {
        values,
        n: a.true_length,
        m: b.true_length,
    })
}

/// Row sums (one per token of the first sentence) and column sums.
pub fn marginal_sums(g: &SimilarityGrid) -> (Vec<f64>, Vec<f64>) {
    let rows = g.values.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..g.m)
        .map(|j| g.values.iter().map(|r| r[j]).sum())
        .collect();
    (rows, cols)
}

/// Character-level Levenshtein distance with unit costs.
pub fn edit_distance(u: &str, v: &str) -> usize {
    let u: Vec<char> = u.chars().collect();
    let v: Vec<char> = v.chars().collect();
    if u.is_empty() {
        return v.len();
    }
    let mut prev: Vec<usize> = (0..=v.len()).collect();
    let mut cur = vec![0; v.len() + 1];
    for (i, cu) in u.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cv) in v.iter().enumerate() {
            let sub = prev[j] + usize::from(cu != cv);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[v.len()]
}

/// Edit-distance position term for every token of `a` and `b`.
///
/// For each co-occurring word at first index `p` in `a`, when `p` is a
/// valid index into `b`, `pos_row[p]` becomes
/// `2 * edit_distance(word, b[p]) / min(n, m)`; `pos_col` is filled the
/// same way from the word's first index in `b`. All other entries are 0.
pub fn position_weights(a: &Sentence, b: &Sentence) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (a.len(), b.len());
    let mut pos_row = vec![0.0; n];
    let mut pos_col = vec![0.0; m];
    let shortest = n.min(m);
    if shortest == 0 {
        return (pos_row, pos_col);
    }
    let scale = 2.0 / shortest as f64;
    for word in co_occurrence(a, b).words {
        if let Some(p) = a.surfaces().position(|s| s == word) {
            if p < m {
                pos_row[p] = scale * edit_distance(&word, b.tokens[p].surface()) as f64;
            }
        }
        if let Some(q) = b.surfaces().position(|s| s == word) {
            if q < n {
                pos_col[q] = scale * edit_distance(&word, a.tokens[q].surface()) as f64;
            }
        }
    }
    (pos_row, pos_col)
}

/// Max-shifted softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn attention_weights(
    row_vec: &[f64],
    pos_row: &[f64],
    col_vec: &[f64],
    pos_col: &[f64],
) -> Result<AttentionVectors> {
    if row_vec.len() != pos_row.len() || col_vec.len() != pos_col.len() {
        return Err(Error::Dimension("attention inputs differ in length".into()));
    }
    let add = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<_>>();
    Ok(AttentionVectors {
        row_weights: softmax(&add(row_vec, pos_row)),
        col_weights: softmax(&add(col_vec, pos_col)),
    })
}

/// Scale each true row by its weight; padding rows stay zero.
pub fn apply_attention(m: &SentenceMatrix, weights: &[f64]) -> Result<SentenceMatrix> {
    if weights.len() != m.true_length {
        return Err(Error::Dimension(format!(
            "{} weights for {} tokens",
            weights.len(),
            m.true_length
        )));
    }
    let mut out = m.clone();
    for (row, w) in out.rows.iter_mut().zip(weights) {
        row.iter_mut().for_each(|x| *x *= w);
    }
    Ok(out)
}

/// Attention-weighted matrices for a pair, ready for the CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct AttendedPair {
    pub a: SentenceMatrix,
    pub b: SentenceMatrix,
    pub weights: AttentionVectors,
}

/// Full attention path: truncate both sentences to `n_max`, embed, build
/// the cosine grid and position terms, normalize, and weight the rows.
pub fn attend(
    table: &EmbeddingTable,
    a: &Sentence,
    b: &Sentence,
    n_max: usize,
) -> Result<AttendedPair> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySentence);
    }
    let (a, b) = (a.truncated(n_max), b.truncated(n_max));
    let ma = embed_sentence(table, &a, n_max);
    let mb = embed_sentence(table, &b, n_max);
    let grid = cosine_matrix(&ma, &mb)?;
    let (row_vec, col_vec) = marginal_sums(&grid);
    let (pos_row, pos_col) = position_weights(&a, &b);
    let weights = attention_weights(&row_vec, &pos_row, &col_vec, &pos_col)?;
    Ok(AttendedPair {
        a: apply_attention(&ma, &weights.row_weights)?,
        b: apply_attention(&mb, &weights.col_weights)?,
        weights,
    })
}
