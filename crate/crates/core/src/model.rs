//! The complete trainable model: embedding tables, character convolution,
//! window scorer, and transition scores, with the end-to-end forward and
//! backward passes over one sentence.
//!
//! Per-word representations concatenate, in fixed order, the word-level
//! vector (normalized form), the pooled character-level vector (surface
//! form), and the optional capitalization and suffix vectors. Positions
//! outside the sentence use a padding representation built from the padding
//! entry of every active table, with the character path run over a single
//! padding character.

use crate::char_conv::{char_backward, char_forward, CharConvGrads, CharConvParams};
use crate::corpus::{LabeledSentence, TagSet, Token, Vocabulary, PADDING_INDEX};
use crate::error::{Error, Result};
use crate::features::{
    capitalization_class, suffix_feature, CapClass, EmbeddingTable,
};
use crate::inference::{
    log_likelihood, viterbi_decode_masked, ScoreLattice, TransitionMask, TransitionParams,
};
use crate::num::Scalar;
use crate::scorer::{
    assemble_window, score_word_backward, score_word_with_hidden, ModelVariant, ScorerGrads,
    ScorerParams,
};
use crate::trainer::Hyperparameters;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use std::collections::HashMap;

/// One position's representation plus the lookup metadata backward needs.
#[derive(Debug, Clone)]
pub struct WordRep<F: Scalar> {
    pub u: Array1<F>,
    pub word_index: Option<usize>,
    pub char_indices: Vec<usize>,
    pub char_argmax: Vec<usize>,
    pub caps_index: Option<usize>,
    pub suffix_index: Option<usize>,
}

/// Everything the forward pass computed for one sentence, retained for
/// backward.
#[derive(Debug, Clone)]
pub struct SentenceForward<F: Scalar> {
    pub reps: Vec<WordRep<F>>,
    pub pad: WordRep<F>,
    pub windows: Vec<Array1<F>>,
    pub hidden: Vec<Array1<F>>,
    pub lattice: ScoreLattice<F>,
}

/// Gradients for every parameter group. Embedding-table gradients are
/// sparse maps from column index to column gradient.
#[derive(Debug, Clone)]
pub struct ModelGradients<F: Scalar> {
    pub word_columns: HashMap<usize, Array1<F>>,
    pub char: Option<CharConvGrads<F>>,
    pub caps_columns: HashMap<usize, Array1<F>>,
    pub suffix_columns: HashMap<usize, Array1<F>>,
    pub hidden_weights: Array2<F>,
    pub hidden_bias: Array1<F>,
    pub output_weights: Array2<F>,
    pub output_bias: Array1<F>,
    pub transitions: Array2<F>,
    pub start: Array1<F>,
}

/// Identifies one trainable parameter group; also fixes the canonical
/// group order used by persistence and the gradient checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    WordTable,
    CharTable,
    ConvWeights,
    ConvBias,
    CapsTable,
    SuffixTable,
    HiddenWeights,
    HiddenBias,
    OutputWeights,
    OutputBias,
    Transitions,
    Start,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 12] = [
        ParamGroup::WordTable,
        ParamGroup::CharTable,
        ParamGroup::ConvWeights,
        ParamGroup::ConvBias,
        ParamGroup::CapsTable,
        ParamGroup::SuffixTable,
        ParamGroup::HiddenWeights,
        ParamGroup::HiddenBias,
        ParamGroup::OutputWeights,
        ParamGroup::OutputBias,
        ParamGroup::Transitions,
        ParamGroup::Start,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::WordTable => "word_table",
            ParamGroup::CharTable => "char_table",
            ParamGroup::ConvWeights => "conv_weights",
            ParamGroup::ConvBias => "conv_bias",
            ParamGroup::CapsTable => "caps_table",
            ParamGroup::SuffixTable => "suffix_table",
            ParamGroup::HiddenWeights => "hidden_weights",
            ParamGroup::HiddenBias => "hidden_bias",
            ParamGroup::OutputWeights => "output_weights",
            ParamGroup::OutputBias => "output_bias",
            ParamGroup::Transitions => "transitions",
            ParamGroup::Start => "start",
        }
    }
}

/// The full model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F: Scalar> {
    pub variant: ModelVariant,
    pub hp: Hyperparameters,
    pub word_table: Option<EmbeddingTable<F>>,
    pub char_conv: Option<CharConvParams<F>>,
    pub caps_table: Option<EmbeddingTable<F>>,
    pub suffix_table: Option<EmbeddingTable<F>>,
    pub scorer: ScorerParams<F>,
    pub transitions: TransitionParams<F>,
    pub tags: TagSet,
}

impl<F: Scalar> ModelParams<F> {
    /// Initializes a model for the hyperparameters' variant.
    ///
    /// Draws from `rng` in a fixed order (word table, character table,
    /// convolution, capitalization, suffix, scorer), so a seeded generator
    /// fully determines the initialization.
    pub fn init(
        hp: &Hyperparameters,
        word_vocab: Vocabulary,
        char_vocab: Vocabulary,
        suffix_vocab: Option<Vocabulary>,
        tags: TagSet,
        pretrained: Option<&EmbeddingTable<F>>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        hp.validate()?;
        let variant = hp.variant;

        let word_table = if variant.uses_words() {
            Some(match pretrained {
                Some(source) => {
                    if source.dim() != hp.word_dim {
                        return Err(Error::Config(format!(
                            "pre-trained embeddings have dimension {}, expected {}",
                            source.dim(),
                            hp.word_dim
                        )));
                    }
                    EmbeddingTable::from_pretrained(source, word_vocab, rng)
                }
                None => EmbeddingTable::init_uniform(word_vocab, hp.word_dim, rng),
            })
        } else {
            None
        };

        let char_conv = if variant.uses_chars() {
            let table = EmbeddingTable::init_uniform(char_vocab, hp.char_dim, rng);
            Some(CharConvParams::init(
                table,
                hp.conv_units,
                hp.char_window,
                rng,
            ))
        } else {
            None
        };

        let caps_table = if variant.uses_capitalization() {
            Some(EmbeddingTable::init_uniform(
                CapClass::vocabulary(),
                variant.handcrafted.feature_dim,
                rng,
            ))
        } else {
            None
        };

        let suffix_table = if variant.uses_suffix() {
            let vocab = suffix_vocab.ok_or_else(|| {
                Error::Config("suffix features enabled but no suffix vocabulary given".into())
            })?;
            Some(EmbeddingTable::init_uniform(
                vocab,
                variant.handcrafted.feature_dim,
                rng,
            ))
        } else {
            None
        };

        let rep_dim = word_table.as_ref().map_or(0, |t| t.dim())
            + char_conv.as_ref().map_or(0, |c| c.units())
            + caps_table.as_ref().map_or(0, |t| t.dim())
            + suffix_table.as_ref().map_or(0, |t| t.dim());
        if rep_dim == 0 {
            return Err(Error::Config(
                "model variant has an empty word representation".into(),
            ));
        }

        let scorer = ScorerParams::init(
            rep_dim,
            hp.word_window,
            hp.hidden_units,
            tags.len(),
            rng,
        );

        Ok(ModelParams {
            variant,
            hp: hp.clone(),
            word_table,
            char_conv,
            caps_table,
            suffix_table,
            scorer,
            transitions: TransitionParams::zeros(tags.len()),
            tags,
        })
    }

    /// Size of one position's joint representation.
    pub fn rep_dim(&self) -> usize {
        self.word_table.as_ref().map_or(0, |t| t.dim())
            + self.char_conv.as_ref().map_or(0, |c| c.units())
            + self.caps_table.as_ref().map_or(0, |t| t.dim())
            + self.suffix_table.as_ref().map_or(0, |t| t.dim())
    }

    fn representation(&self, surface: &str, normalized: &str) -> Result<WordRep<F>> {
        let mut u = Array1::zeros(self.rep_dim());
        let mut offset = 0;
        let mut word_index = None;
        let mut char_indices = Vec::new();
        let mut char_argmax = Vec::new();
        let mut caps_index = None;
        let mut suffix_index = None;

        if let Some(table) = &self.word_table {
            let idx = table.vocab().lookup(normalized);
            u.slice_mut(ndarray::s![offset..offset + table.dim()])
                .assign(&table.lookup(idx));
            word_index = Some(idx);
            offset += table.dim();
        }
        if let Some(conv) = &self.char_conv {
            char_indices = surface
                .chars()
                .map(|c| conv.char_table.vocab().lookup_char(c))
                .collect();
            let (emb, argmax) = char_forward(conv, &char_indices)?;
            u.slice_mut(ndarray::s![offset..offset + conv.units()])
                .assign(&emb);
            char_argmax = argmax;
            offset += conv.units();
        }
        if let Some(table) = &self.caps_table {
            let idx = table
                .vocab()
                .lookup(capitalization_class(surface).as_str());
            u.slice_mut(ndarray::s![offset..offset + table.dim()])
                .assign(&table.lookup(idx));
            caps_index = Some(idx);
            offset += table.dim();
        }
        if let Some(table) = &self.suffix_table {
            let idx = table
                .vocab()
                .lookup(&suffix_feature(surface, self.variant.handcrafted.suffix_length));
            u.slice_mut(ndarray::s![offset..offset + table.dim()])
                .assign(&table.lookup(idx));
            suffix_index = Some(idx);
            offset += table.dim();
        }
        debug_assert_eq!(offset, u.len());
        Ok(WordRep {
            u,
            word_index,
            char_indices,
            char_argmax,
            caps_index,
            suffix_index,
        })
    }

    /// Joint representation of one token.
    pub fn word_representation(&self, token: &Token) -> Result<WordRep<F>> {
        self.representation(token.surface(), token.normalized())
    }

    /// Representation used for positions outside the sentence: the padding
    /// entry of every table, with the character path run over one padding
    /// character.
    pub fn padding_representation(&self) -> Result<WordRep<F>> {
        let mut u = Array1::zeros(self.rep_dim());
        let mut offset = 0;
        let mut char_indices = Vec::new();
        let mut char_argmax = Vec::new();
        if let Some(table) = &self.word_table {
            u.slice_mut(ndarray::s![offset..offset + table.dim()])
                .assign(&table.lookup(PADDING_INDEX));
            offset += table.dim();
        }
        if let Some(conv) = &self.char_conv {
            char_indices = vec![PADDING_INDEX];
            let (emb, argmax) = char_forward(conv, &char_indices)?;
            u.slice_mut(ndarray::s![offset..offset + conv.units()])
                .assign(&emb);
            char_argmax = argmax;
            offset += conv.units();
        }
        if let Some(table) = &self.caps_table {
            u.slice_mut(ndarray::s![offset..offset + table.dim()])
                .assign(&table.lookup(PADDING_INDEX));
            offset += table.dim();
        }
        if let Some(table) = &self.suffix_table {
            u.slice_mut(ndarray::s![offset..offset + table.dim()])
                .assign(&table.lookup(PADDING_INDEX));
            offset += table.dim();
        }
        debug_assert_eq!(offset, u.len());
        Ok(WordRep {
            u,
            word_index: self.word_table.as_ref().map(|_| PADDING_INDEX),
            char_indices,
            char_argmax,
            caps_index: self.caps_table.as_ref().map(|_| PADDING_INDEX),
            suffix_index: self.suffix_table.as_ref().map(|_| PADDING_INDEX),
        })
    }

    /// Scores every tag for every word, retaining all activations.
    pub fn sentence_emissions(&self, tokens: &[Token]) -> Result<SentenceForward<F>> {
        if tokens.is_empty() {
            return Err(Error::Data("cannot score an empty sentence".into()));
        }
        let reps: Vec<WordRep<F>> = tokens
            .iter()
            .map(|t| self.word_representation(t))
            .collect::<Result<_>>()?;
        let pad = self.padding_representation()?;
        let us: Vec<Array1<F>> = reps.iter().map(|r| r.u.clone()).collect();

        let n = tokens.len();
        let t_count = self.tags.len();
        let mut emissions = Array2::zeros((n, t_count));
        let mut windows = Vec::with_capacity(n);
        let mut hidden = Vec::with_capacity(n);
        for pos in 0..n {
            let window = assemble_window(&us, &pad.u, pos, self.scorer.word_window);
            let (scores, h) = score_word_with_hidden(&self.scorer, window.view());
            emissions.row_mut(pos).assign(&scores);
            windows.push(window);
            hidden.push(h);
        }
        Ok(SentenceForward {
            reps,
            pad,
            windows,
            hidden,
            lattice: ScoreLattice::new(emissions),
        })
    }

    /// Fresh zero gradients shaped like this model.
    pub fn zero_gradients(&self) -> ModelGradients<F> {
        ModelGradients {
            word_columns: HashMap::new(),
            char: self.char_conv.as_ref().map(CharConvGrads::zeros),
            caps_columns: HashMap::new(),
            suffix_columns: HashMap::new(),
            hidden_weights: Array2::zeros(self.scorer.hidden_weights.raw_dim()),
            hidden_bias: Array1::zeros(self.scorer.hidden_bias.raw_dim()),
            output_weights: Array2::zeros(self.scorer.output_weights.raw_dim()),
            output_bias: Array1::zeros(self.scorer.output_bias.raw_dim()),
            transitions: Array2::zeros(self.transitions.transitions.raw_dim()),
            start: Array1::zeros(self.transitions.start.raw_dim()),
        }
    }

    fn rep_backward(&self, rep: &WordRep<F>, d_u: ArrayView1<'_, F>, grads: &mut ModelGradients<F>) {
        let mut offset = 0;
        if let Some(table) = &self.word_table {
            let idx = rep.word_index.expect("word path active");
            let slice = d_u.slice(ndarray::s![offset..offset + table.dim()]);
            grads
                .word_columns
                .entry(idx)
                .or_insert_with(|| Array1::zeros(table.dim()))
                .scaled_add(F::one(), &slice);
            offset += table.dim();
        }
        if let Some(conv) = &self.char_conv {
            let slice = d_u.slice(ndarray::s![offset..offset + conv.units()]);
            char_backward(
                conv,
                &rep.char_indices,
                slice,
                &rep.char_argmax,
                grads.char.as_mut().expect("char grads allocated"),
            );
            offset += conv.units();
        }
        if let Some(table) = &self.caps_table {
            let idx = rep.caps_index.expect("caps path active");
            let slice = d_u.slice(ndarray::s![offset..offset + table.dim()]);
            grads
                .caps_columns
                .entry(idx)
                .or_insert_with(|| Array1::zeros(table.dim()))
                .scaled_add(F::one(), &slice);
            offset += table.dim();
        }
        if let Some(table) = &self.suffix_table {
            let idx = rep.suffix_index.expect("suffix path active");
            let slice = d_u.slice(ndarray::s![offset..offset + table.dim()]);
            grads
                .suffix_columns
                .entry(idx)
                .or_insert_with(|| Array1::zeros(table.dim()))
                .scaled_add(F::one(), &slice);
            offset += table.dim();
        }
        debug_assert_eq!(offset, d_u.len());
    }

    /// Backpropagates emission gradients through the scorer, the window
    /// assembly, and every embedding path. `d_emissions[n][t]` is the
    /// upstream gradient of emission score (n, t).
    pub fn backward(
        &self,
        fwd: &SentenceForward<F>,
        d_emissions: &Array2<F>,
    ) -> ModelGradients<F> {
        let mut grads = self.zero_gradients();
        let n = fwd.reps.len();
        let dim = self.rep_dim();
        let window = self.scorer.word_window;
        let half = (window as isize - 1) / 2;

        let mut d_us: Vec<Array1<F>> = (0..n).map(|_| Array1::zeros(dim)).collect();
        let mut d_pad: Array1<F> = Array1::zeros(dim);

        for pos in 0..n {
            let d_window = score_word_backward(
                &self.scorer,
                fwd.windows[pos].view(),
                fwd.hidden[pos].view(),
                d_emissions.row(pos),
                ScorerGrads {
                    hidden_weights: &mut grads.hidden_weights,
                    hidden_bias: &mut grads.hidden_bias,
                    output_weights: &mut grads.output_weights,
                    output_bias: &mut grads.output_bias,
                },
            );
            for (slot, offset) in (-half..=half).enumerate() {
                let source = pos as isize + offset;
                let block = d_window.slice(ndarray::s![slot * dim..(slot + 1) * dim]);
                if source < 0 || source >= n as isize {
                    d_pad.scaled_add(F::one(), &block);
                } else {
                    d_us[source as usize].scaled_add(F::one(), &block);
                }
            }
        }

        for (rep, d_u) in fwd.reps.iter().zip(&d_us) {
            self.rep_backward(rep, d_u.view(), &mut grads);
        }
        self.rep_backward(&fwd.pad, d_pad.view(), &mut grads);
        grads
    }

    /// Full forward and backward for one labeled sentence.
    ///
    /// Returns the negative log-likelihood (the loss before any update) and
    /// the gradients of the log-likelihood with respect to every parameter.
    pub fn forward_backward(
        &self,
        tokens: &[Token],
        gold: &[usize],
    ) -> Result<(F, ModelGradients<F>)> {
        let fwd = self.sentence_emissions(tokens)?;
        let ll = log_likelihood(&fwd.lattice, &self.transitions, gold);
        let mut grads = self.backward(&fwd, &ll.d_emissions);
        grads.transitions = ll.d_transitions;
        grads.start = ll.d_start;
        Ok((-ll.value, grads))
    }

    /// Gradient-ascent update: every touched parameter moves by
    /// `rate * gradient`. With `freeze_word_table` the word-embedding
    /// columns stay fixed (pre-trained vectors kept as-is).
    pub fn apply_gradients(
        &mut self,
        grads: &ModelGradients<F>,
        rate: F,
        freeze_word_table: bool,
    ) {
        if !freeze_word_table {
            if let Some(table) = &mut self.word_table {
                for (&idx, col) in &grads.word_columns {
                    table.column_mut(idx).scaled_add(rate, col);
                }
            }
        }
        if let (Some(conv), Some(cg)) = (&mut self.char_conv, &grads.char) {
            conv.conv_weights.scaled_add(rate, &cg.conv_weights);
            conv.conv_bias.scaled_add(rate, &cg.conv_bias);
            for (&idx, col) in &cg.char_columns {
                conv.char_table.column_mut(idx).scaled_add(rate, col);
            }
        }
        if let Some(table) = &mut self.caps_table {
            for (&idx, col) in &grads.caps_columns {
                table.column_mut(idx).scaled_add(rate, col);
            }
        }
        if let Some(table) = &mut self.suffix_table {
            for (&idx, col) in &grads.suffix_columns {
                table.column_mut(idx).scaled_add(rate, col);
            }
        }
        self.scorer
            .hidden_weights
            .scaled_add(rate, &grads.hidden_weights);
        self.scorer.hidden_bias.scaled_add(rate, &grads.hidden_bias);
        self.scorer
            .output_weights
            .scaled_add(rate, &grads.output_weights);
        self.scorer.output_bias.scaled_add(rate, &grads.output_bias);
        self.transitions
            .transitions
            .scaled_add(rate, &grads.transitions);
        self.transitions.start.scaled_add(rate, &grads.start);
    }

    /// Decodes the best tag sequence for a token sequence.
    pub fn tag_sentence(&self, tokens: &[Token], mask: Option<&TransitionMask>) -> Result<Vec<String>> {
        let fwd = self.sentence_emissions(tokens)?;
        let (path, _) = viterbi_decode_masked(&fwd.lattice, &self.transitions, mask);
        Ok(path.into_iter().map(|t| self.tags.name(t).to_string()).collect())
    }

    /// The IOB2 decode-time mask for this model's tag set.
    pub fn iob2_mask(&self) -> TransitionMask {
        TransitionMask::iob2(&self.tags)
    }

    /// Checks that every parameter is finite.
    pub fn all_finite(&self) -> bool {
        self.group_order().into_iter().all(|g| {
            self.group_values(g)
                .is_none_or(|vals| vals.iter().all(|v| v.is_finite()))
        })
    }

    /// The parameter groups present in this model, in canonical order.
    pub fn group_order(&self) -> Vec<ParamGroup> {
        ParamGroup::ALL
            .into_iter()
            .filter(|g| self.group_values(*g).is_some())
            .collect()
    }

    /// Flat view of one group's values, if the group exists in this variant.
    pub fn group_values(&self, group: ParamGroup) -> Option<Vec<F>> {
        match group {
            ParamGroup::WordTable => self
                .word_table
                .as_ref()
                .map(|t| t.matrix().iter().copied().collect()),
            ParamGroup::CharTable => self
                .char_conv
                .as_ref()
                .map(|c| c.char_table.matrix().iter().copied().collect()),
            ParamGroup::ConvWeights => self
                .char_conv
                .as_ref()
                .map(|c| c.conv_weights.iter().copied().collect()),
            ParamGroup::ConvBias => self
                .char_conv
                .as_ref()
                .map(|c| c.conv_bias.iter().copied().collect()),
            ParamGroup::CapsTable => self
                .caps_table
                .as_ref()
                .map(|t| t.matrix().iter().copied().collect()),
            ParamGroup::SuffixTable => self
                .suffix_table
                .as_ref()
                .map(|t| t.matrix().iter().copied().collect()),
            ParamGroup::HiddenWeights => {
                Some(self.scorer.hidden_weights.iter().copied().collect())
            }
            ParamGroup::HiddenBias => Some(self.scorer.hidden_bias.iter().copied().collect()),
            ParamGroup::OutputWeights => {
                Some(self.scorer.output_weights.iter().copied().collect())
            }
            ParamGroup::OutputBias => Some(self.scorer.output_bias.iter().copied().collect()),
            ParamGroup::Transitions => {
                Some(self.transitions.transitions.iter().copied().collect())
            }
            ParamGroup::Start => Some(self.transitions.start.iter().copied().collect()),
        }
    }

    /// Mutable flat slice of one group's values (standard row-major layout).
    ///
    /// Panics if the group is absent; pair with [`Self::group_order`].
    pub fn group_slice_mut(&mut self, group: ParamGroup) -> &mut [F] {
        let slice = match group {
            ParamGroup::WordTable => self
                .word_table
                .as_mut()
                .map(|t| t.matrix_mut().as_slice_mut()),
            ParamGroup::CharTable => self
                .char_conv
                .as_mut()
                .map(|c| c.char_table.matrix_mut().as_slice_mut()),
            ParamGroup::ConvWeights => {
                self.char_conv.as_mut().map(|c| c.conv_weights.as_slice_mut())
            }
            ParamGroup::ConvBias => self.char_conv.as_mut().map(|c| c.conv_bias.as_slice_mut()),
            ParamGroup::CapsTable => self
                .caps_table
                .as_mut()
                .map(|t| t.matrix_mut().as_slice_mut()),
            ParamGroup::SuffixTable => self
                .suffix_table
                .as_mut()
                .map(|t| t.matrix_mut().as_slice_mut()),
            ParamGroup::HiddenWeights => Some(self.scorer.hidden_weights.as_slice_mut()),
            ParamGroup::HiddenBias => Some(self.scorer.hidden_bias.as_slice_mut()),
            ParamGroup::OutputWeights => Some(self.scorer.output_weights.as_slice_mut()),
            ParamGroup::OutputBias => Some(self.scorer.output_bias.as_slice_mut()),
            ParamGroup::Transitions => Some(self.transitions.transitions.as_slice_mut()),
            ParamGroup::Start => Some(self.transitions.start.as_slice_mut()),
        };
        slice
            .flatten()
            .unwrap_or_else(|| panic!("group {} absent or non-contiguous", group.name()))
    }
}

impl<F: Scalar> ModelGradients<F> {
    /// Dense flat expansion of one group's gradient, matching the layout of
    /// [`ModelParams::group_slice_mut`]. Sparse table gradients expand to
    /// zeros with touched columns filled in.
    pub fn group_dense(&self, model: &ModelParams<F>, group: ParamGroup) -> Option<Vec<F>> {
        fn expand_columns<F: Scalar>(
            dim: usize,
            vocab_len: usize,
            columns: &HashMap<usize, Array1<F>>,
        ) -> Vec<F> {
            let mut dense = vec![F::zero(); dim * vocab_len];
            for (&idx, col) in columns {
                for r in 0..dim {
                    dense[r * vocab_len + idx] = col[r];
                }
            }
            dense
        }
        match group {
            ParamGroup::WordTable => model
                .word_table
                .as_ref()
                .map(|t| expand_columns(t.dim(), t.vocab().len(), &self.word_columns)),
            ParamGroup::CharTable => model.char_conv.as_ref().map(|c| {
                expand_columns(
                    c.char_table.dim(),
                    c.char_table.vocab().len(),
                    &self.char.as_ref().expect("char grads").char_columns,
                )
            }),
            ParamGroup::ConvWeights => self
                .char
                .as_ref()
                .map(|c| c.conv_weights.iter().copied().collect()),
            ParamGroup::ConvBias => self
                .char
                .as_ref()
                .map(|c| c.conv_bias.iter().copied().collect()),
            ParamGroup::CapsTable => model
                .caps_table
                .as_ref()
                .map(|t| expand_columns(t.dim(), t.vocab().len(), &self.caps_columns)),
            ParamGroup::SuffixTable => model
                .suffix_table
                .as_ref()
                .map(|t| expand_columns(t.dim(), t.vocab().len(), &self.suffix_columns)),
            ParamGroup::HiddenWeights => Some(self.hidden_weights.iter().copied().collect()),
            ParamGroup::HiddenBias => Some(self.hidden_bias.iter().copied().collect()),
            ParamGroup::OutputWeights => Some(self.output_weights.iter().copied().collect()),
            ParamGroup::OutputBias => Some(self.output_bias.iter().copied().collect()),
            ParamGroup::Transitions => Some(self.transitions.iter().copied().collect()),
            ParamGroup::Start => Some(self.start.iter().copied().collect()),
        }
    }
}

/// Maps a labeled sentence's tags to indices and runs forward/backward.
pub fn sentence_loss_and_grads<F: Scalar>(
    model: &ModelParams<F>,
    sentence: &LabeledSentence,
) -> Result<(F, ModelGradients<F>)> {
    let gold = model.tags.encode(sentence)?;
    model.forward_backward(sentence.tokens(), &gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabularies;
    use crate::features::HandcraftedFeatureSpec;
    use crate::scorer::VariantKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_corpus() -> Vec<LabeledSentence> {
        vec![
            LabeledSentence::from_pairs([
                ("Ana", "B-PER"),
                ("mora", "O"),
                ("em", "O"),
                ("Lisboa", "B-LOC"),
            ])
            .unwrap(),
            LabeledSentence::from_pairs([("Rui", "B-PER"), ("Costa", "I-PER"), (".", "O")])
                .unwrap(),
        ]
    }

    fn tiny_hp(kind: VariantKind) -> Hyperparameters {
        let variant = match kind {
            VariantKind::CharWnn => ModelVariant::charwnn(),
            VariantKind::Wnn => ModelVariant::wnn(HandcraftedFeatureSpec::default()),
            VariantKind::CharNn => ModelVariant::charnn(),
        };
        Hyperparameters {
            word_dim: 4,
            word_window: 3,
            char_dim: 3,
            char_window: 3,
            conv_units: 5,
            hidden_units: 6,
            learning_rate: 0.01,
            max_epochs: 1,
            seed: 7,
            variant,
            freeze_word_embeddings: false,
            lr_decay: false,
            decode_mask: false,
        }
    }

    fn build_model(kind: VariantKind) -> (ModelParams<f64>, Vec<LabeledSentence>) {
        let corpus = tiny_corpus();
        let (words, chars, tags) = build_vocabularies(&corpus, None).unwrap();
        let hp = tiny_hp(kind);
        let suffixes = crate::features::build_suffix_vocabulary(&corpus, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let model =
            ModelParams::init(&hp, words, chars, Some(suffixes), tags, None, &mut rng).unwrap();
        (model, corpus)
    }

    #[test]
    fn rep_dims_per_variant() {
        let (m, _) = build_model(VariantKind::CharWnn);
        assert_eq!(m.rep_dim(), 4 + 5);
        let (m, _) = build_model(VariantKind::Wnn);
        assert_eq!(m.rep_dim(), 4 + 5 + 5);
        let (m, _) = build_model(VariantKind::CharNn);
        assert_eq!(m.rep_dim(), 5);
    }

    #[test]
    fn zero_parameters_give_zero_lattice() {
        let (mut m, corpus) = build_model(VariantKind::CharWnn);
        for g in m.group_order() {
            for v in m.group_slice_mut(g).iter_mut() {
                *v = 0.0;
            }
        }
        let fwd = m.sentence_emissions(corpus[0].tokens()).unwrap();
        assert!(fwd.lattice.emissions.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn single_word_sentence_single_row() {
        let (m, _) = build_model(VariantKind::CharWnn);
        let tokens = vec![Token::new("Ana").unwrap()];
        let fwd = m.sentence_emissions(&tokens).unwrap();
        assert_eq!(fwd.lattice.emissions.nrows(), 1);
        assert_eq!(fwd.lattice.emissions.ncols(), m.tags.len());
    }

    #[test]
    fn emission_row_depends_only_on_window() {
        // word_window = 3 ⇒ row 0 sees positions 0 and 1 only; changing
        // the last token must leave row 0 bit-identical.
        let (m, _) = build_model(VariantKind::CharWnn);
        let a = [
            Token::new("Ana").unwrap(),
            Token::new("mora").unwrap(),
            Token::new("em").unwrap(),
            Token::new("Lisboa").unwrap(),
        ];
        let mut b = a.clone();
        b[3] = Token::new("Costa").unwrap();
        let fa = m.sentence_emissions(&a).unwrap();
        let fb = m.sentence_emissions(&b).unwrap();
        for t in 0..m.tags.len() {
            assert_eq!(fa.lattice.emissions[[0, t]], fb.lattice.emissions[[0, t]]);
            assert_eq!(fa.lattice.emissions[[1, t]], fb.lattice.emissions[[1, t]]);
        }
        // And the row inside the window must differ for some tag.
        assert!((0..m.tags.len())
            .any(|t| fa.lattice.emissions[[3, t]] != fb.lattice.emissions[[3, t]]));
    }

    #[test]
    fn charwnn_with_no_conv_units_reduces_to_wnn_without_features() {
        let corpus = tiny_corpus();
        let (words, chars, tags) = build_vocabularies(&corpus, None).unwrap();
        let mut hp = tiny_hp(VariantKind::CharWnn);
        hp.conv_units = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let charwnn =
            ModelParams::<f64>::init(&hp, words.clone(), chars.clone(), None, tags.clone(), None, &mut rng)
                .unwrap();

        let mut wnn_hp = tiny_hp(VariantKind::Wnn);
        wnn_hp.variant = ModelVariant::wnn(HandcraftedFeatureSpec::none());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut wnn =
            ModelParams::<f64>::init(&wnn_hp, words, chars, None, tags, None, &mut rng).unwrap();

        // Align the shared parameters and compare emissions.
        wnn.word_table = charwnn.word_table.clone();
        wnn.scorer = charwnn.scorer.clone();
        wnn.transitions = charwnn.transitions.clone();
        let tokens = corpus[0].tokens();
        let a = charwnn.sentence_emissions(tokens).unwrap();
        let b = wnn.sentence_emissions(tokens).unwrap();
        assert_eq!(a.lattice.emissions, b.lattice.emissions);
    }

    #[test]
    fn loss_is_nonnegative_and_finite() {
        for kind in [VariantKind::CharWnn, VariantKind::Wnn, VariantKind::CharNn] {
            let (m, corpus) = build_model(kind);
            for s in &corpus {
                let (loss, _) = sentence_loss_and_grads(&m, s).unwrap();
                assert!(loss >= 0.0, "{kind:?}: loss {loss} negative");
                assert!(loss.is_finite());
            }
        }
    }

    #[test]
    fn untouched_embedding_columns_have_no_gradient() {
        let (m, corpus) = build_model(VariantKind::CharWnn);
        let (_, grads) = sentence_loss_and_grads(&m, &corpus[1]).unwrap();
        // Sentence 2 is "Rui Costa ." — the column for "lisboa" (from
        // sentence 1) must be untouched.
        let lisboa = m.word_table.as_ref().unwrap().vocab().lookup("lisboa");
        assert!(!grads.word_columns.contains_key(&lisboa));
        // The padding column, by contrast, is always touched.
        assert!(grads.word_columns.contains_key(&PADDING_INDEX));
    }

    #[test]
    fn apply_gradients_updates_only_touched_columns() {
        let (mut m, corpus) = build_model(VariantKind::CharWnn);
        let before = m.word_table.as_ref().unwrap().matrix().clone();
        let (_, grads) = sentence_loss_and_grads(&m, &corpus[1]).unwrap();
        m.apply_gradients(&grads, 0.5, false);
        let after = m.word_table.as_ref().unwrap().matrix();
        let vocab = m.word_table.as_ref().unwrap().vocab();
        let lisboa = vocab.lookup("lisboa");
        for r in 0..m.word_table.as_ref().unwrap().dim() {
            assert_eq!(before[[r, lisboa]], after[[r, lisboa]]);
        }
        let rui = vocab.lookup("rui");
        assert!((0..4).any(|r| before[[r, rui]] != after[[r, rui]]));
    }

    #[test]
    fn freeze_keeps_word_table_fixed() {
        let (mut m, corpus) = build_model(VariantKind::CharWnn);
        let before = m.word_table.as_ref().unwrap().matrix().clone();
        let (_, grads) = sentence_loss_and_grads(&m, &corpus[0]).unwrap();
        m.apply_gradients(&grads, 0.5, true);
        assert_eq!(&before, m.word_table.as_ref().unwrap().matrix());
        // Other parameters still move.
        assert!(grads.hidden_bias.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn zero_rate_changes_nothing() {
        let (mut m, corpus) = build_model(VariantKind::Wnn);
        let snapshot = m.clone();
        let (loss, grads) = sentence_loss_and_grads(&m, &corpus[0]).unwrap();
        assert!(loss > 0.0);
        m.apply_gradients(&grads, 0.0, false);
        assert_eq!(m, snapshot);
    }

    /// End-to-end finite differences over every parameter group.
    fn check_gradients(kind: VariantKind, seed: u64) {
        let corpus = tiny_corpus();
        let (words, chars, tags) = build_vocabularies(&corpus, None).unwrap();
        let suffixes = crate::features::build_suffix_vocabulary(&corpus, 3);
        let hp = tiny_hp(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model: ModelParams<f64> =
            ModelParams::init(&hp, words, chars, Some(suffixes), tags, None, &mut rng).unwrap();
        let sentence = &corpus[0];
        let gold = model.tags.encode(sentence).unwrap();
        let (_, grads) = model.forward_backward(sentence.tokens(), &gold).unwrap();

        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for group in model.group_order() {
            let analytic = grads.group_dense(&model, group).unwrap();
            for (i, &a) in analytic.iter().enumerate() {
                let mut plus = model.clone();
                plus.group_slice_mut(group)[i] += h;
                let mut minus = model.clone();
                minus.group_slice_mut(group)[i] -= h;
                let lp = {
                    let fwd = plus.sentence_emissions(sentence.tokens()).unwrap();
                    log_likelihood(&fwd.lattice, &plus.transitions, &gold).value
                };
                let lm = {
                    let fwd = minus.sentence_emissions(sentence.tokens()).unwrap();
                    log_likelihood(&fwd.lattice, &minus.transitions, &gold).value
                };
                let numeric = (lp - lm) / (2.0 * h);
                assert!(
                    rel(a, numeric) < 1e-6,
                    "{kind:?} {}[{i}]: analytic {a} vs numeric {numeric}",
                    group.name(),
                );
            }
        }
    }

    #[test]
    fn single_emission_entry_gradients_match_finite_differences() {
        // Upstream is a one-hot on one lattice entry, so the backward pass
        // yields d(emission[n][t]) / d(parameter) directly.
        let (model, corpus) = build_model(VariantKind::CharWnn);
        let sentence = &corpus[0];
        let fwd = model.sentence_emissions(sentence.tokens()).unwrap();
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for (pos, tag) in [(0usize, 0usize), (1, 2), (3, 1)] {
            let mut upstream = Array2::zeros((sentence.len(), model.tags.len()));
            upstream[[pos, tag]] = 1.0;
            let grads = model.backward(&fwd, &upstream);
            for group in model.group_order() {
                let analytic = grads.group_dense(&model, group).unwrap();
                for (i, &a) in analytic.iter().enumerate() {
                    let mut plus = model.clone();
                    plus.group_slice_mut(group)[i] += h;
                    let mut minus = model.clone();
                    minus.group_slice_mut(group)[i] -= h;
                    let ep = plus.sentence_emissions(sentence.tokens()).unwrap().lattice;
                    let em = minus.sentence_emissions(sentence.tokens()).unwrap().lattice;
                    let numeric =
                        (ep.emissions[[pos, tag]] - em.emissions[[pos, tag]]) / (2.0 * h);
                    assert!(
                        rel(a, numeric) < 1e-6,
                        "entry ({pos},{tag}) {}[{i}]: {a} vs {numeric}",
                        group.name()
                    );
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_charwnn() {
        check_gradients(VariantKind::CharWnn, 31);
    }

    #[test]
    fn gradients_match_finite_differences_wnn() {
        check_gradients(VariantKind::Wnn, 32);
    }

    #[test]
    fn gradients_match_finite_differences_charnn() {
        check_gradients(VariantKind::CharNn, 33);
    }
}
