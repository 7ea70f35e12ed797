//! Word vectors in the word2vec text format and padded sentence matrices.

use std::collections::HashMap;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const DEFAULT_N_MAX: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    oov_seed: u64,
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov_seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(
                "embedding dimension must be at least 1".into(),
            ));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            oov_seed,
        })
    }

    pub fn insert(&mut self, surface: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension(format!(
                "vector of length {} in a table of dimension {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert(surface.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn oov_seed(&self) -> u64 {
        self.oov_seed
    }

    pub fn set_oov_seed(&mut self, seed: u64) {
        self.oov_seed = seed;
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.vectors.contains_key(surface)
    }

    /// Stored vector, or a unit vector derived from `(surface, oov_seed)`.
    pub fn lookup(&self, surface: &str) -> Vec<f64> {
        match self.vectors.get(surface) {
            Some(v) => v.clone(),
            None => self.oov_vector(surface),
        }
    }

    fn oov_vector(&self, surface: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(surface.as_bytes()) ^ self.oov_seed);
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    /// Text serialization: `count dim` header, then entries sorted by
    /// surface with 17 significant digits per component.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<&String> = self.vectors.keys().collect();
        keys.sort();
        let mut out = format!("{} {}\n", keys.len(), self.dim);
        for k in keys {
            out.push_str(k);
            for x in &self.vectors[k] {
                out.push(' ');
                out.push_str(&crate::params_io::fmt_f64(*x));
            }
            out.push('\n');
        }
        out
    }
}

// 64-bit FNV-1a, stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Load `surface v1 ... vd` lines with an optional `count dim` header.
/// The header count is not enforced; its dimension is. Later duplicates
/// replace earlier ones.
pub fn load_text_embeddings<R: BufRead>(reader: R, oov_seed: u64) -> Result<EmbeddingTable> {
    let mut dim: Option<usize> = None;
    let mut vectors = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::format_at(lineno, e.to_string()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if idx == 0 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if d == 0 {
                    return Err(Error::format_at(lineno, "header dimension is zero"));
                }
                dim = Some(d);
                continue;
            }
        }
        let surface = fields[0];
        let values = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::format_at(lineno, format!("non-numeric component `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::format_at(lineno, "entry has no components"));
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format_at(
                    lineno,
                    format!("expected {d} components, found {}", values.len()),
                ));
            }
            Some(_) => {}
        }
        vectors.insert(surface.to_owned(), values);
    }
    let dim = dim.ok_or_else(|| Error::format("embedding file has no entries"))?;
    Ok(EmbeddingTable {
        dim,
        vectors,
        oov_seed,
    })
}

/// `n_max` rows of width `dim`; rows past `true_length` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    pub rows: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub true_length: usize,
}

impl SentenceMatrix {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn n_max(&self) -> usize {
        self.rows.len()
    }

    pub fn true_rows(&self) -> &[Vec<f64>] {
        &self.rows[..self.true_length]
    }

    /// Build from explicit token rows, padded with zeros to `n_max`.
    pub fn from_rows(rows: Vec<Vec<f64>>, n_max: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("ragged sentence matrix".into()));
        }
        if rows.len() > n_max {
            return Err(Error::Dimension(format!(
                "{} rows exceed n_max {n_max}",
                rows.len()
            )));
        }
        let true_length = rows.len();
        let mut rows = rows;
        rows.resize(n_max, vec![0.0; dim]);
        let mask = (0..n_max).map(|i| i < true_length).collect();
        Ok(SentenceMatrix {
            rows,
            mask,
            true_length,
        })
    }
}

/// Look up the first `n_max` tokens in order and zero-pad the rest.
pub fn embed_sentence(table: &EmbeddingTable, s: &Sentence, n_max: usize) -> SentenceMatrix {
    let n_max = n_max.max(1);
    let true_length = s.len().min(n_max);
    let mut rows: Vec<Vec<f64>> = s
        .surfaces()
        .take(true_length)
        .map(|w| table.lookup(w))
        .collect();
    rows.resize(n_max, vec![0.0; table.dim]);
    SentenceMatrix {
        rows,
        mask: (0..n_max).map(|i| i < true_length).collect(),
        true_length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn load_basic() {
        let t = load_text_embeddings("a 1 2 3\nb 4 5 6\n".as_bytes(), 0).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("b"), [4.0, 5.0, 6.0]);
    }

    #[test]
    fn load_dimension_mismatch() {
        let err = load_text_embeddings("a 1 2 3\nb 4 5\n".as_bytes(), 0).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(2), .. }));
        let err = load_text_embeddings("a 1 x 3\n".as_bytes(), 0).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(1), .. }));
    }

    #[test]
    fn header_count_not_enforced() {
        let mut text = String::from("1000 50\n");
        for w in ["a", "b", "c"] {
            text.push_str(w);
            for i in 0..50 {
                text.push_str(&format!(" {i}"));
            }
            text.push('\n');
        }
        let t = load_text_embeddings(text.as_bytes(), 0).unwrap();
        assert_eq!((t.dim(), t.len()), (50, 3));
        assert!(load_text_embeddings("10 4\na 1 2\n".as_bytes(), 0).is_err());
    }

    #[test]
    fn duplicates_last_wins() {
        let t = load_text_embeddings("a 1 2\na 3 4\n".as_bytes(), 0).unwrap();
        assert_eq!(t.lookup("a"), [3.0, 4.0]);
    }

    #[test]
    fn oov_deterministic_unit() {
        let t = load_text_embeddings("a 1 2 3 4\n".as_bytes(), 7).unwrap();
        let u = t.lookup("zebra");
        assert_eq!(u, t.lookup("zebra"));
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_ne!(u, t.lookup("zebras"));

        let mut other = t.clone();
        other.set_oov_seed(8);
        assert_ne!(u, other.lookup("zebra"));
    }

    #[test]
    fn text_round_trip() {
        let t = load_text_embeddings("b 0.1 -2.5e-7\na 1e300 3\n".as_bytes(), 0).unwrap();
        let back = load_text_embeddings(t.to_text().as_bytes(), 0).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn embed_padding_and_truncation() {
        let t = load_text_embeddings("a 1 0\nb 0 1\n".as_bytes(), 0).unwrap();
        let m = embed_sentence(&t, &tokenize("a b").unwrap(), 4);
        assert_eq!(m.mask, [true, true, false, false]);
        assert_eq!(m.rows[1], [0.0, 1.0]);
        assert!(m.rows[2..].iter().all(|r| r.iter().all(|x| *x == 0.0)));

        let m = embed_sentence(&t, &tokenize("a b a b x").unwrap(), 4);
        assert_eq!(m.true_length, 4);
        assert_eq!(m.rows[3], [0.0, 1.0]);
    }
}
