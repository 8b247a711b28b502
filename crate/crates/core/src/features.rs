//! Embedding tables for words, characters, capitalization, and suffixes,
//! plus the word2vec text-format loader.

use crate::corpus::{normalize_word, Vocabulary};
use crate::error::{Error, Result};
use crate::num::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use rand::Rng;
use std::io::{BufRead, Write};

/// A lookup table mapping a vocabulary to fixed-size real vectors.
///
/// Column `i` of the matrix is entry `i`'s vector, so lookup is plain column
/// selection. The padding and unknown columns are ordinary trainable
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<F: Scalar> {
    vocab: Vocabulary,
    dim: usize,
    matrix: Array2<F>,
}

/// Half-width of the uniform initialization interval for a table of
/// `vocab_size` entries and dimension `dim`: `sqrt(6 / (vocab_size + dim))`.
pub fn uniform_radius(vocab_size: usize, dim: usize) -> f64 {
    (6.0 / (vocab_size + dim) as f64).sqrt()
}

impl<F: Scalar> EmbeddingTable<F> {
    /// Initializes every value i.i.d. from `U(-r, r)` with
    /// `r = sqrt(6 / (|V| + dim))`. Deterministic given the generator state.
    pub fn init_uniform(vocab: Vocabulary, dim: usize, rng: &mut impl Rng) -> Self {
        assert!(dim >= 1, "embedding dimension must be >= 1");
        let n = vocab.len();
        let r = uniform_radius(n, dim);
        let matrix =
            Array2::from_shape_simple_fn((dim, n), || F::from_f64(rng.gen_range(-r..r)));
        EmbeddingTable { vocab, dim, matrix }
    }

    /// An all-zero table (used where another component supplies the values).
    pub fn zeros(vocab: Vocabulary, dim: usize) -> Self {
        let n = vocab.len();
        EmbeddingTable {
            vocab,
            dim,
            matrix: Array2::zeros((dim, n)),
        }
    }

    /// Re-bases a loaded table onto a larger vocabulary: entries present in
    /// `source` keep their vectors, new entries are sampled from the uniform
    /// rule computed over the final vocabulary size.
    pub fn from_pretrained(source: &EmbeddingTable<F>, vocab: Vocabulary, rng: &mut impl Rng) -> Self {
        let dim = source.dim;
        let n = vocab.len();
        let r = uniform_radius(n, dim);
        let mut matrix = Array2::zeros((dim, n));
        for i in 0..n {
            let name = vocab.name(i);
            let from = if i < 2 {
                Some(i) // reserved entries keep their loaded vectors
            } else {
                source.vocab.get(name)
            };
            match from {
                Some(j) => matrix.column_mut(i).assign(&source.matrix.column(j)),
                None => {
                    for v in matrix.column_mut(i) {
                        *v = F::from_f64(rng.gen_range(-r..r));
                    }
                }
            }
        }
        EmbeddingTable { vocab, dim, matrix }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<F> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<F> {
        &mut self.matrix
    }

    /// Entry `index`'s vector (column selection).
    pub fn lookup(&self, index: usize) -> ArrayView1<'_, F> {
        self.matrix.column(index)
    }

    pub fn column_mut(&mut self, index: usize) -> ArrayViewMut1<'_, F> {
        self.matrix.column_mut(index)
    }
}

/// Reads the word2vec text format: a `count dim` header line followed by
/// `count` lines of `word v1 … v_dim`. Padding and unknown columns are
/// appended and sampled from the uniform initialization rule.
pub fn load_word2vec_text<F: Scalar>(
    reader: impl BufRead,
    rng: &mut impl Rng,
) -> Result<EmbeddingTable<F>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header line".into(),
        })??;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "header must be `count dim`".into(),
        })?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "header must be `count dim`".into(),
        })?;
    if dim == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "embedding dimension must be positive".into(),
        });
    }

    let mut vocab = Vocabulary::new();
    let mut columns: Vec<Vec<F>> = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "empty row".into(),
        })?;
        let values: std::result::Result<Vec<F>, _> = fields
            .map(|v| v.parse::<f64>().map(F::from_f64))
            .collect();
        let values = values.map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad value: {e}"),
        })?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {dim} values, got {}", values.len()),
            });
        }
        if vocab.get(word).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate word {word:?}"),
            });
        }
        vocab.insert(word);
        columns.push(values);
    }
    if columns.len() != count {
        return Err(Error::Parse {
            line: columns.len() + 2,
            message: format!("header declared {count} entries, found {}", columns.len()),
        });
    }

    let n = vocab.len();
    let r = uniform_radius(n, dim);
    let mut matrix = Array2::zeros((dim, n));
    for reserved in 0..2 {
        for v in matrix.column_mut(reserved) {
            *v = F::from_f64(rng.gen_range(-r..r));
        }
    }
    for (i, column) in columns.iter().enumerate() {
        matrix
            .column_mut(i + 2)
            .assign(&Array1::from_vec(column.clone()));
    }
    Ok(EmbeddingTable { vocab, dim, matrix })
}

/// Writes a table in the word2vec text format (reserved columns omitted).
/// Values print in shortest round-trip form, so save → load is bit-exact.
pub fn save_word2vec_text<F: Scalar>(
    table: &EmbeddingTable<F>,
    mut writer: impl Write,
) -> Result<()> {
    let entries = table.vocab().entries();
    writeln!(writer, "{} {}", entries.len(), table.dim())?;
    for (i, word) in entries.iter().enumerate() {
        write!(writer, "{word}")?;
        for v in table.lookup(i + 2) {
            write!(writer, " {:?}", v.as_f64())?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// The five word-shape classes of the capitalization feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CapClass {
    AllLower,
    FirstUpper,
    AllUpper,
    ContainsUpper,
    Other,
}

impl CapClass {
    pub const ALL: [CapClass; 5] = [
        CapClass::AllLower,
        CapClass::FirstUpper,
        CapClass::AllUpper,
        CapClass::ContainsUpper,
        CapClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CapClass::AllLower => "all_lower",
            CapClass::FirstUpper => "first_upper",
            CapClass::AllUpper => "all_upper",
            CapClass::ContainsUpper => "contains_upper",
            CapClass::Other => "other",
        }
    }

    /// Vocabulary holding the five classes (plus the reserved entries, of
    /// which only padding is ever used).
    pub fn vocabulary() -> Vocabulary {
        Vocabulary::from_entries(Self::ALL.iter().map(|c| c.as_str()))
    }
}

/// Classifies a word's casing. Checked in the order all-lower, all-upper,
/// first-upper, contains-upper; single-character uppercase words count as
/// all-upper, and words with no cased characters fall through to other.
pub fn capitalization_class(surface: &str) -> CapClass {
    let has_lower = surface.chars().any(char::is_lowercase);
    let has_upper = surface.chars().any(char::is_uppercase);
    if has_lower && !has_upper {
        return CapClass::AllLower;
    }
    if has_upper && !has_lower {
        return CapClass::AllUpper;
    }
    if has_upper {
        let first_is_upper = surface.chars().next().is_some_and(char::is_uppercase);
        let upper_count = surface.chars().filter(|c| c.is_uppercase()).count();
        if first_is_upper && upper_count == 1 {
            return CapClass::FirstUpper;
        }
        return CapClass::ContainsUpper;
    }
    CapClass::Other
}

/// The last `min(length, |word|)` characters of the normalized form.
pub fn suffix_feature(surface: &str, length: usize) -> String {
    let normalized = normalize_word(surface);
    let chars: Vec<char> = normalized.chars().collect();
    let start = chars.len().saturating_sub(length);
    chars[start..].iter().collect()
}

/// Configuration of the handcrafted capitalization and suffix features used
/// by the word-only model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandcraftedFeatureSpec {
    pub capitalization: bool,
    pub suffix: bool,
    pub suffix_length: usize,
    pub feature_dim: usize,
}

impl Default for HandcraftedFeatureSpec {
    fn default() -> Self {
        HandcraftedFeatureSpec {
            capitalization: true,
            suffix: true,
            suffix_length: 3,
            feature_dim: 5,
        }
    }
}

impl HandcraftedFeatureSpec {
    /// A spec with both features disabled (word embeddings only).
    pub fn none() -> Self {
        HandcraftedFeatureSpec {
            capitalization: false,
            suffix: false,
            ..Default::default()
        }
    }
}

/// Collects every suffix of every normalized training word, in corpus order.
pub fn build_suffix_vocabulary(
    corpus: &[crate::corpus::LabeledSentence],
    length: usize,
) -> Vocabulary {
    let mut vocab = Vocabulary::new();
    for sentence in corpus {
        for token in sentence.tokens() {
            vocab.insert(&suffix_feature(token.surface(), length));
        }
    }
    vocab
}
