//! Column-format corpus I/O, IOB2 tag codec, word normalization, and
//! vocabulary construction.
//!
//! The on-disk format is one `token SEP tag` pair per line (SEP is a single
//! space by default), with a blank line terminating each sentence. Lines with
//! more than two columns are accepted; the first column is the token and the
//! last is the tag.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Index of the reserved padding entry in every [`Vocabulary`].
pub const PADDING_INDEX: usize = 0;
/// Index of the reserved unknown entry in every [`Vocabulary`].
pub const UNKNOWN_INDEX: usize = 1;

const PADDING_NAME: &str = "<pad>";
const UNKNOWN_NAME: &str = "<unk>";

/// A single token: the surface form as read, plus its normalized form.
///
/// The normalized form (lowercased, digits folded to `0`) drives word-level
/// embedding lookup; the surface form feeds the character-level path so
/// casing and shape information survive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    surface: String,
    normalized: String,
}

impl Token {
    /// Builds a token, rejecting empty or whitespace-containing surfaces.
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(Error::Data("empty token surface".into()));
        }
        if surface.chars().any(char::is_whitespace) {
            return Err(Error::Data(format!(
                "token surface {surface:?} contains whitespace"
            )));
        }
        let normalized = normalize_word(&surface);
        Ok(Token {
            surface,
            normalized,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }
}

/// A tokenized sentence paired with one tag per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    tokens: Vec<Token>,
    tags: Vec<String>,
}

impl LabeledSentence {
    pub fn new(tokens: Vec<Token>, tags: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Data("sentence has no tokens".into()));
        }
        if tokens.len() != tags.len() {
            return Err(Error::Data(format!(
                "sentence has {} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        Ok(LabeledSentence { tokens, tags })
    }

    /// Convenience constructor from `(surface, tag)` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for (surface, tag) in pairs {
            tokens.push(Token::new(surface)?);
            tags.push(tag.to_string());
        }
        Self::new(tokens, tags)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

/// How an individual tag participates in the IOB2 scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

/// Splits a tag into its IOB2 role and entity type.
///
/// Anything that is not `O`, `B-…`, or `I-…` is treated as outside.
pub fn parse_tag(tag: &str) -> TagKind<'_> {
    if let Some(ty) = tag.strip_prefix("B-") {
        if !ty.is_empty() {
            return TagKind::Begin(ty);
        }
    }
    if let Some(ty) = tag.strip_prefix("I-") {
        if !ty.is_empty() {
            return TagKind::Inside(ty);
        }
    }
    TagKind::Outside
}

/// The ordered set of tags seen in a corpus, with a dense index per tag.
///
/// `O` is always present at index 0. For every `I-X` the matching `B-X` is
/// present as well, inserted on demand, so encoded spans always have a valid
/// leftmost tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    /// Collects a tag set from an iterator of tag strings.
    pub fn from_tags<I, S>(tags: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = TagSet {
            names: Vec::new(),
            index: HashMap::new(),
        };
        set.insert("O");
        for tag in tags {
            let tag = tag.as_ref();
            match parse_tag(tag) {
                TagKind::Outside if tag != "O" => {
                    return Err(Error::Data(format!(
                        "tag {tag:?} is not O, B-<type>, or I-<type>"
                    )));
                }
                TagKind::Inside(ty) => {
                    set.insert(&format!("B-{ty}"));
                    set.insert(tag);
                }
                _ => {
                    set.insert(tag);
                }
            }
        }
        Ok(set)
    }

    /// Collects the tag set of a whole corpus.
    pub fn from_corpus(corpus: &[LabeledSentence]) -> Result<Self> {
        Self::from_tags(corpus.iter().flat_map(|s| s.tags().iter()))
    }

    fn insert(&mut self, tag: &str) -> usize {
        if let Some(&i) = self.index.get(tag) {
            return i;
        }
        let i = self.names.len();
        self.names.push(tag.to_string());
        self.index.insert(tag.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Maps a sentence's tags to dense indices, erroring on unseen tags.
    pub fn encode(&self, sentence: &LabeledSentence) -> Result<Vec<usize>> {
        sentence
            .tags()
            .iter()
            .map(|t| {
                self.index_of(t)
                    .ok_or_else(|| Error::Data(format!("tag {t:?} not in tag set")))
            })
            .collect()
    }
}

/// A contiguous entity mention: type plus inclusive token bounds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub entity_type: String,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(entity_type: impl Into<String>, start: usize, end: usize) -> Self {
        Span {
            entity_type: entity_type.into(),
            start,
            end,
        }
    }
}

/// Extracts entity spans from an IOB2 tag sequence.
///
/// `B-X` starts a chunk and `I-X` continues a chunk of the same type. An
/// `I-X` with no live chunk of type `X` to continue also starts one, matching
/// the leniency of the standard chunk evaluation script. Returned spans are
/// ordered by start position and never overlap.
pub fn iob2_decode<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match parse_tag(tag.as_ref()) {
            TagKind::Outside => {
                if let Some((ty, start)) = open.take() {
                    spans.push(Span::new(ty, start, i - 1));
                }
            }
            TagKind::Begin(ty) => {
                if let Some((prev_ty, start)) = open.take() {
                    spans.push(Span::new(prev_ty, start, i - 1));
                }
                open = Some((ty.to_string(), i));
            }
            TagKind::Inside(ty) => match &open {
                Some((prev_ty, _)) if prev_ty == ty => {}
                _ => {
                    if let Some((prev_ty, start)) = open.take() {
                        spans.push(Span::new(prev_ty, start, i - 1));
                    }
                    open = Some((ty.to_string(), i));
                }
            },
        }
    }
    if let Some((ty, start)) = open {
        spans.push(Span::new(ty, start, tags.len() - 1));
    }
    spans
}

/// Renders a span set as an IOB2 tag sequence of the given length.
///
/// Spans must lie within `[0, length)` and must not overlap.
pub fn iob2_encode(spans: &[Span], length: usize) -> Result<Vec<String>> {
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut tags = vec!["O".to_string(); length];
    let mut prev_end: Option<usize> = None;
    for span in sorted {
        if span.start > span.end || span.end >= length {
            return Err(Error::Data(format!(
                "span {}[{},{}] out of bounds for length {length}",
                span.entity_type, span.start, span.end
            )));
        }
        if let Some(prev) = prev_end {
            if span.start <= prev {
                return Err(Error::Data(format!(
                    "span {}[{},{}] overlaps a previous span",
                    span.entity_type, span.start, span.end
                )));
            }
        }
        tags[span.start] = format!("B-{}", span.entity_type);
        for tag in tags.iter_mut().take(span.end + 1).skip(span.start + 1) {
            *tag = format!("I-{}", span.entity_type);
        }
        prev_end = Some(span.end);
    }
    Ok(tags)
}

/// Lowercases a word and folds every ASCII digit to `0`.
///
/// Characters whose lowercase expansion is longer than one character are kept
/// as-is, so the result always has the same character count as the input.
/// Idempotent.
pub fn normalize_word(surface: &str) -> String {
    surface
        .chars()
        .map(|c| {
            if c.is_ascii_digit() {
                '0'
            } else {
                let mut lower = c.to_lowercase();
                match (lower.next(), lower.next()) {
                    (Some(l), None) => l,
                    _ => c,
                }
            }
        })
        .collect()
}

/// Replaces every character outside the roman alphabet (ASCII plus the
/// accented Latin ranges) with `substitute`. Length-preserving; idempotent
/// when `substitute` is itself a roman character.
pub fn fold_non_roman(surface: &str, substitute: char) -> String {
    fn is_roman(c: char) -> bool {
        c.is_ascii()
            || ('\u{00A0}'..='\u{024F}').contains(&c)
            || ('\u{1E00}'..='\u{1EFF}').contains(&c)
    }
    surface
        .chars()
        .map(|c| if is_roman(c) { c } else { substitute })
        .collect()
}

/// A dense text-to-index mapping with reserved padding and unknown entries.
///
/// Indices 0 and 1 are always the padding and unknown entries; real entries
/// start at index 2. Looking up an absent entry yields the unknown index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// An empty vocabulary holding only the reserved entries.
    pub fn new() -> Self {
        Vocabulary {
            names: vec![PADDING_NAME.to_string(), UNKNOWN_NAME.to_string()],
            index: HashMap::new(),
        }
    }

    /// Builds a vocabulary from entries in order, skipping duplicates.
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::new();
        for e in entries {
            vocab.insert(e.as_ref());
        }
        vocab
    }

    /// Total size including the two reserved entries.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Inserts an entry if absent; returns its index either way.
    pub fn insert(&mut self, entry: &str) -> usize {
        if let Some(&i) = self.index.get(entry) {
            return i;
        }
        let i = self.names.len();
        self.names.push(entry.to_string());
        self.index.insert(entry.to_string(), i);
        i
    }

    /// Index of an entry, or the unknown index if absent.
    pub fn lookup(&self, entry: &str) -> usize {
        self.index.get(entry).copied().unwrap_or(UNKNOWN_INDEX)
    }

    /// Index of a single character, or the unknown index if absent.
    pub fn lookup_char(&self, c: char) -> usize {
        let mut buf = [0u8; 4];
        self.lookup(c.encode_utf8(&mut buf))
    }

    /// Exact index of an entry, if present.
    pub fn get(&self, entry: &str) -> Option<usize> {
        self.index.get(entry).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    /// Real entries beyond the reserved two, in index order.
    pub fn entries(&self) -> &[String] {
        &self.names[2..]
    }
}

/// Reads a column-format corpus: one `token SEP tag` per line, blank line
/// between sentences. Lines may carry extra middle columns; the first column
/// is the token and the last is the tag. Empty input yields no sentences.
pub fn read_conll(reader: impl BufRead, separator: char) -> Result<Vec<LabeledSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                sentences.push(LabeledSentence::new(
                    std::mem::take(&mut tokens),
                    std::mem::take(&mut tags),
                )?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(separator).filter(|f| !f.is_empty()).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least 2 columns, got {}", fields.len()),
            });
        }
        tokens.push(Token::new(fields[0]).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?);
        tags.push(fields[fields.len() - 1].to_string());
    }
    if !tokens.is_empty() {
        sentences.push(LabeledSentence::new(tokens, tags)?);
    }
    Ok(sentences)
}

/// Writes a corpus in the column format accepted by [`read_conll`].
pub fn write_conll(
    sentences: &[LabeledSentence],
    mut writer: impl Write,
    separator: char,
) -> Result<()> {
    for sentence in sentences {
        for (token, tag) in sentence.tokens().iter().zip(sentence.tags()) {
            writeln!(writer, "{}{}{}", token.surface(), separator, tag)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// One sentence for tagging: its tokens, plus the gold tags when the input
/// carried them.
pub type TokenizedSentence = (Vec<Token>, Option<Vec<String>>);

/// Token sequences for tagging: like [`read_conll`] but single-column lines
/// are allowed (no tags available). Returns each sentence's tokens plus its
/// gold tags when every line carried one.
pub fn read_tokens(reader: impl BufRead, separator: char) -> Result<Vec<TokenizedSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut tagged = true;
    let mut flush = |tokens: &mut Vec<Token>, tags: &mut Vec<String>, tagged: &mut bool| {
        if !tokens.is_empty() {
            let gold = if *tagged {
                Some(std::mem::take(tags))
            } else {
                tags.clear();
                None
            };
            sentences.push((std::mem::take(tokens), gold));
        }
        *tagged = true;
    };
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags, &mut tagged);
            continue;
        }
        let fields: Vec<&str> = line.split(separator).filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "blank-looking line with separators only".into(),
            });
        }
        tokens.push(Token::new(fields[0]).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?);
        if fields.len() >= 2 {
            tags.push(fields[fields.len() - 1].to_string());
        } else {
            tagged = false;
        }
    }
    flush(&mut tokens, &mut tags, &mut tagged);
    Ok(sentences)
}

/// Builds the word vocabulary (normalized forms), character vocabulary
/// (surface characters), and tag set of a training corpus.
///
/// When a pre-trained word vocabulary is given, its entries come first and
/// training words extend it, so pre-trained embedding columns keep their
/// indices.
pub fn build_vocabularies(
    corpus: &[LabeledSentence],
    pretrained: Option<&Vocabulary>,
) -> Result<(Vocabulary, Vocabulary, TagSet)> {
    if corpus.is_empty() {
        return Err(Error::Data("empty training corpus".into()));
    }
    let mut words = pretrained.cloned().unwrap_or_default();
    let mut chars = Vocabulary::new();
    for sentence in corpus {
        for token in sentence.tokens() {
            words.insert(token.normalized());
            let mut buf = [0u8; 4];
            for c in token.surface().chars() {
                chars.insert(c.encode_utf8(&mut buf));
            }
        }
    }
    let tags = TagSet::from_corpus(corpus)?;
    Ok((words, chars, tags))
}

/// Deterministic development split: every `stride`-th sentence (the last of
/// each block) goes to the dev set, the rest stay in train.
pub fn stride_split(
    corpus: Vec<LabeledSentence>,
    stride: usize,
) -> (Vec<LabeledSentence>, Vec<LabeledSentence>) {
    let mut train = Vec::new();
    let mut dev = Vec::new();
    for (i, sentence) in corpus.into_iter().enumerate() {
        if stride > 0 && i % stride == stride - 1 {
            dev.push(sentence);
        } else {
            train.push(sentence);
        }
    }
    (train, dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    #[test]
    fn read_single_sentence() {
        let input = "Wolff B-PER\n, O\n\n";
        let sentences = read_conll(Cursor::new(input), ' ').unwrap();
        assert_eq!(sentences.len(), 1);
        let s = &sentences[0];
        assert_eq!(s.tokens()[0].surface(), "Wolff");
        assert_eq!(s.tokens()[1].surface(), ",");
        assert_eq!(s.tags(), &["B-PER".to_string(), "O".to_string()]);
    }

    #[test]
    fn read_empty_stream() {
        let sentences = read_conll(Cursor::new(""), ' ').unwrap();
        assert!(sentences.is_empty());
    }

    #[test]
    fn double_blank_lines_do_not_create_empty_sentences() {
        let input = "a O\n\n\nb O\n\n\n";
        let sentences = read_conll(Cursor::new(input), ' ').unwrap();
        assert_eq!(sentences.len(), 2);
    }

    #[test]
    fn missing_sentence_terminator_still_flushes() {
        let input = "a O\nb B-LOC";
        let sentences = read_conll(Cursor::new(input), ' ').unwrap();
        assert_eq!(sentences.len(), 1);
        assert_eq!(sentences[0].len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "a O\n\nbroken\n";
        let err = read_conll(Cursor::new(input), ' ').unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn extra_columns_use_first_and_last() {
        let input = "word POS B-ORG\n\n";
        let sentences = read_conll(Cursor::new(input), ' ').unwrap();
        assert_eq!(sentences[0].tokens()[0].surface(), "word");
        assert_eq!(sentences[0].tags()[0], "B-ORG");
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_word("Bennett"), "bennett");
        assert_eq!(normalize_word("1984"), "0000");
        assert_eq!(normalize_word("0000"), "0000");
        assert_eq!(normalize_word("São"), "são");
    }

    #[test]
    fn fold_non_roman_keeps_latin() {
        assert_eq!(fold_non_roman("São", '#'), "São");
        assert_eq!(fold_non_roman("ναι", '#'), "###");
        assert_eq!(fold_non_roman("a日b", '#'), "a#b");
        // Idempotent with a roman substitute.
        assert_eq!(fold_non_roman(&fold_non_roman("a日b", '#'), '#'), "a#b");
    }

    #[test]
    fn decode_news_style_sentence() {
        let tags = [
            "B-PER", "O", "O", "O", "O", "O", "B-LOC", "O", "O", "O", "B-PER", "I-PER", "O", "O",
            "O", "O", "O", "O", "O", "O", "B-ORG", "I-ORG",
        ];
        let spans = iob2_decode(&tags);
        assert_eq!(
            spans,
            vec![
                Span::new("PER", 0, 0),
                Span::new("LOC", 6, 6),
                Span::new("PER", 10, 11),
                Span::new("ORG", 20, 21),
            ]
        );
    }

    #[test]
    fn decode_all_outside() {
        let spans = iob2_decode(&["O", "O", "O"]);
        assert!(spans.is_empty());
    }

    #[test]
    fn decode_lenient_inside_starts() {
        let spans = iob2_decode(&["I-PER", "I-PER", "O", "I-LOC"]);
        assert_eq!(spans, vec![Span::new("PER", 0, 1), Span::new("LOC", 3, 3)]);
    }

    #[test]
    fn decode_type_change_inside_starts_new_chunk() {
        let spans = iob2_decode(&["B-PER", "I-LOC"]);
        assert_eq!(spans, vec![Span::new("PER", 0, 0), Span::new("LOC", 1, 1)]);
    }

    #[test]
    fn encode_examples() {
        let tags = iob2_encode(&[Span::new("PER", 0, 1)], 3).unwrap();
        assert_eq!(tags, vec!["B-PER", "I-PER", "O"]);
        let tags = iob2_encode(&[], 2).unwrap();
        assert_eq!(tags, vec!["O", "O"]);
    }

    #[test]
    fn encode_news_style_span_set() {
        let spans = [
            Span::new("PER", 0, 0),
            Span::new("LOC", 6, 6),
            Span::new("PER", 10, 11),
            Span::new("ORG", 20, 21),
        ];
        let tags = iob2_encode(&spans, 22).unwrap();
        let expected = [
            "B-PER", "O", "O", "O", "O", "O", "B-LOC", "O", "O", "O", "B-PER", "I-PER", "O", "O",
            "O", "O", "O", "O", "O", "O", "B-ORG", "I-ORG",
        ];
        assert_eq!(tags, expected);
    }

    #[test]
    fn encode_rejects_overlap() {
        let spans = [Span::new("PER", 0, 2), Span::new("LOC", 2, 3)];
        assert!(iob2_encode(&spans, 5).is_err());
    }

    #[test]
    fn encode_rejects_out_of_bounds() {
        assert!(iob2_encode(&[Span::new("PER", 1, 3)], 3).is_err());
    }

    #[test]
    fn tag_set_adds_missing_begin_and_keeps_outside_first() {
        let set = TagSet::from_tags(["I-PER", "O"]).unwrap();
        assert_eq!(set.index_of("O"), Some(0));
        assert!(set.index_of("B-PER").is_some());
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn tag_set_rejects_malformed() {
        assert!(TagSet::from_tags(["B-PER", "X-LOC"]).is_err());
    }

    #[test]
    fn tag_set_size_matches_corpus() {
        let corpus = vec![
            LabeledSentence::from_pairs([("Ana", "B-PER"), ("Silva", "I-PER"), (".", "O")])
                .unwrap(),
        ];
        let set = TagSet::from_corpus(&corpus).unwrap();
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn vocabulary_reserved_and_unknown_lookup() {
        let mut vocab = Vocabulary::new();
        assert_eq!(vocab.len(), 2);
        let i = vocab.insert("casa");
        assert_eq!(i, 2);
        assert_eq!(vocab.lookup("casa"), 2);
        assert_eq!(vocab.lookup("absent"), UNKNOWN_INDEX);
        assert_ne!(PADDING_INDEX, UNKNOWN_INDEX);
    }

    #[test]
    fn build_vocabularies_collects_chars_and_counts() {
        let corpus =
            vec![LabeledSentence::from_pairs([("Ab", "O"), ("a0", "O")]).unwrap()];
        let (words, chars, tags) = build_vocabularies(&corpus, None).unwrap();
        for c in ['A', 'b', 'a', '0'] {
            assert_ne!(chars.lookup_char(c), UNKNOWN_INDEX, "missing char {c}");
        }
        // Normalized forms: "ab" and "a0".
        assert_eq!(words.len(), 2 + 2);
        assert_eq!(tags.len(), 1);
    }

    #[test]
    fn build_vocabularies_extends_pretrained() {
        let pretrained = Vocabulary::from_entries((0..100).map(|i| format!("w{i}")));
        assert_eq!(pretrained.len(), 102);
        let corpus = vec![LabeledSentence::from_pairs([
            ("novoa", "O"),
            ("novob", "O"),
            ("novoc", "O"),
            ("novod", "O"),
            ("novoe", "O"),
            ("w3", "O"),
        ])
        .unwrap()];
        let (words, _, _) = build_vocabularies(&corpus, Some(&pretrained)).unwrap();
        // 100 pretrained + 5 new normalized words + 2 reserved.
        assert_eq!(words.len(), 107);
    }

    #[test]
    fn stride_split_is_five_percent() {
        let corpus: Vec<LabeledSentence> = (0..40)
            .map(|i| LabeledSentence::from_pairs([(format!("w{i}").leak() as &str, "O")]).unwrap())
            .collect();
        let (train, dev) = stride_split(corpus, 20);
        assert_eq!(train.len(), 38);
        assert_eq!(dev.len(), 2);
    }

    fn arb_sentence() -> impl Strategy<Value = LabeledSentence> {
        prop::collection::vec(("[A-Za-z0-9,.]{1,8}", prop::sample::select(vec!["O", "B-PER", "I-PER", "B-LOC"])), 1..8)
            .prop_map(|pairs| {
                LabeledSentence::from_pairs(pairs.iter().map(|(t, g)| (t.as_str(), *g))).unwrap()
            })
    }

    fn arb_span_set() -> impl Strategy<Value = (Vec<Span>, usize)> {
        // Random non-overlapping span set over a sentence of length <= 24.
        (4usize..24, prop::collection::vec((0usize..24, 0usize..3, 0usize..3), 0..6)).prop_map(
            |(len, raw)| {
                let types = ["PER", "LOC", "ORG"];
                let mut spans: Vec<Span> = Vec::new();
                let mut next_free = 0usize;
                for (start, width, ty) in raw {
                    let start = start.min(len - 1).max(next_free);
                    let end = (start + width).min(len - 1);
                    if start <= end && end < len {
                        spans.push(Span::new(types[ty], start, end));
                        next_free = end + 2;
                    }
                }
                (spans, len)
            },
        )
    }

    proptest! {
        #[test]
        fn conll_round_trip(sentences in prop::collection::vec(arb_sentence(), 0..5)) {
            let mut buf = Vec::new();
            write_conll(&sentences, &mut buf, ' ').unwrap();
            let back = read_conll(Cursor::new(buf), ' ').unwrap();
            prop_assert_eq!(back, sentences);
        }

        #[test]
        fn iob2_round_trip((spans, len) in arb_span_set()) {
            let tags = iob2_encode(&spans, len).unwrap();
            let mut decoded = iob2_decode(&tags);
            decoded.sort();
            let mut expected = spans.clone();
            expected.sort();
            prop_assert_eq!(decoded, expected);
        }

        #[test]
        fn decode_never_overlaps(tags in prop::collection::vec(
            prop::sample::select(vec!["O", "B-PER", "I-PER", "B-LOC", "I-LOC"]), 1..16)) {
            let spans = iob2_decode(&tags);
            for w in spans.windows(2) {
                prop_assert!(w[0].end < w[1].start);
            }
        }

        #[test]
        fn normalize_idempotent_and_length_preserving(word in "[A-Za-zÀ-ÿ0-9]{1,12}") {
            let once = normalize_word(&word);
            prop_assert_eq!(once.chars().count(), word.chars().count());
            let twice = normalize_word(&once);
            prop_assert_eq!(once, twice);
        }
    }
}
