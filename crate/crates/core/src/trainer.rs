//! Training: per-sentence stochastic gradient steps on the negative
//! log-likelihood, epoch-level shuffling, dev-set model selection, and a
//! finite-difference gradient checker.

use crate::corpus::{build_vocabularies, LabeledSentence};
use crate::error::{Error, Result};
use crate::features::{build_suffix_vocabulary, EmbeddingTable, HandcraftedFeatureSpec};
use crate::inference::log_likelihood;
use crate::model::{sentence_loss_and_grads, ModelParams, ParamGroup};
use crate::num::Scalar;
use crate::scorer::{ModelVariant, VariantKind};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// All knobs of a training run. The per-variant constructors carry the
/// standard defaults; see [`Hyperparameters::charwnn`].
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Word-embedding dimensions (0 when the variant has no word table).
    pub word_dim: usize,
    /// Word context window size (odd).
    pub word_window: usize,
    /// Character-embedding dimensions (0 when the variant has no char path).
    pub char_dim: usize,
    /// Character context window size (odd).
    pub char_window: usize,
    /// Convolutional units = size of the character-level word embedding.
    pub conv_units: usize,
    /// Hidden units of the window scorer.
    pub hidden_units: usize,
    /// SGD learning rate.
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub variant: ModelVariant,
    /// Keep pre-trained word vectors fixed during supervised training.
    pub freeze_word_embeddings: bool,
    /// Decay the learning rate as rate / (1 + epoch).
    pub lr_decay: bool,
    /// Apply the IOB2 consistency mask when decoding.
    pub decode_mask: bool,
}

impl Hyperparameters {
    /// Defaults for the joint word + character variant:
    /// word dim 100, windows 5/5, char dim 10, 50 conv units, 300 hidden
    /// units, learning rate 0.0075.
    pub fn charwnn() -> Self {
        Hyperparameters {
            word_dim: 100,
            word_window: 5,
            char_dim: 10,
            char_window: 5,
            conv_units: 50,
            hidden_units: 300,
            learning_rate: 0.0075,
            max_epochs: 6,
            seed: 42,
            variant: ModelVariant::charwnn(),
            freeze_word_embeddings: false,
            lr_decay: false,
            decode_mask: false,
        }
    }

    /// Word-only variant: no character path; capitalization and suffix
    /// features (dimension 5, suffix length 3) unless disabled in `features`.
    pub fn wnn(features: HandcraftedFeatureSpec) -> Self {
        Hyperparameters {
            char_dim: 0,
            char_window: 0,
            conv_units: 0,
            variant: ModelVariant::wnn(features),
            ..Self::charwnn()
        }
    }

    /// Character-only variant: char dim 50, 200 conv units, no word table.
    pub fn charnn() -> Self {
        Hyperparameters {
            word_dim: 0,
            char_dim: 50,
            conv_units: 200,
            variant: ModelVariant::charnn(),
            ..Self::charwnn()
        }
    }

    pub fn for_variant(kind: VariantKind) -> Self {
        match kind {
            VariantKind::CharWnn => Self::charwnn(),
            VariantKind::Wnn => Self::wnn(HandcraftedFeatureSpec::default()),
            VariantKind::CharNn => Self::charnn(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let config = |m: String| Err(Error::Config(m));
        if self.word_window.is_multiple_of(2) {
            return config(format!("word window must be odd, got {}", self.word_window));
        }
        if self.hidden_units == 0 {
            return config("hidden units must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.variant.uses_words() && self.word_dim == 0 {
            return config("word dimensions must be >= 1 for this variant".into());
        }
        if self.variant.uses_chars() {
            if self.char_dim == 0 {
                return config("char dimensions must be >= 1 for this variant".into());
            }
            if self.char_window.is_multiple_of(2) {
                return config(format!(
                    "char window must be odd, got {}",
                    self.char_window
                ));
            }
        }
        if self.variant.uses_capitalization() || self.variant.uses_suffix() {
            if self.variant.handcrafted.feature_dim == 0 {
                return config("feature dimension must be >= 1".into());
            }
            if self.variant.uses_suffix() && self.variant.handcrafted.suffix_length == 0 {
                return config("suffix length must be >= 1".into());
            }
        }
        Ok(())
    }

    /// Effective learning rate for a 0-based epoch index.
    pub fn rate_for_epoch(&self, epoch: usize) -> f64 {
        if self.lr_decay {
            self.learning_rate / (1.0 + epoch as f64)
        } else {
            self.learning_rate
        }
    }
}

/// Loss and dev metrics of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
}

/// Mutable training state threaded through SGD steps.
pub struct TrainState<F: Scalar> {
    pub model: ModelParams<F>,
    /// 0-based index of the epoch currently running.
    pub epoch: usize,
    pub history: Vec<EpochStats>,
    pub rng: ChaCha8Rng,
}

/// One stochastic gradient step on a single sentence.
///
/// Runs the full forward and backward pass, then moves every touched
/// parameter by `rate * d(log-likelihood)/d(parameter)` (ascent on the
/// log-likelihood). Returns the loss (negative log-likelihood) from before
/// the update. A non-finite loss aborts without updating.
pub fn sgd_step<F: Scalar>(state: &mut TrainState<F>, sentence: &LabeledSentence) -> Result<F> {
    let (loss, grads) = sentence_loss_and_grads(&state.model, sentence)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    let rate = F::from_f64(state.model.hp.rate_for_epoch(state.epoch));
    let freeze = state.model.hp.freeze_word_embeddings;
    state.model.apply_gradients(&grads, rate, freeze);
    Ok(loss)
}

/// Training report: a header of resolved settings plus per-epoch stats.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub header: Vec<(String, String)>,
    pub epochs: Vec<EpochStats>,
    /// 1-based number of the epoch whose snapshot was returned.
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Line-oriented human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k}={v}");
        }
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "epoch {:>3}  loss {:>12.6}  dev P {:>6.2}  R {:>6.2}  F1 {:>6.2}",
                e.epoch, e.mean_loss, e.dev_precision, e.dev_recall, e.dev_f1
            );
        }
        if let Some(best) = self.best_epoch {
            let _ = writeln!(out, "best_epoch={best}");
        }
        out
    }

    /// Machine-readable `key=value` rendering.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k}={v}");
        }
        for e in &self.epochs {
            let _ = writeln!(out, "epoch.{}.loss={}", e.epoch, e.mean_loss);
            let _ = writeln!(out, "epoch.{}.dev_precision={:.2}", e.epoch, e.dev_precision);
            let _ = writeln!(out, "epoch.{}.dev_recall={:.2}", e.epoch, e.dev_recall);
            let _ = writeln!(out, "epoch.{}.dev_f1={:.2}", e.epoch, e.dev_f1);
        }
        if let Some(best) = self.best_epoch {
            let _ = writeln!(out, "best_epoch={best}");
        }
        out
    }
}

fn report_header<F: Scalar>(
    hp: &Hyperparameters,
    model: &ModelParams<F>,
    train_sentences: usize,
    dev_sentences: usize,
) -> Vec<(String, String)> {
    let mut header: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| header.push((k.to_string(), v));
    push("variant", hp.variant.kind.as_str().to_string());
    if hp.variant.uses_words() {
        push("word_dim", hp.word_dim.to_string());
    }
    push("word_window", hp.word_window.to_string());
    if hp.variant.uses_chars() {
        push("char_dim", hp.char_dim.to_string());
        push("char_window", hp.char_window.to_string());
        push("conv_units", hp.conv_units.to_string());
    }
    push("hidden_units", hp.hidden_units.to_string());
    push("learning_rate", format!("{}", hp.learning_rate));
    push("max_epochs", hp.max_epochs.to_string());
    push("seed", hp.seed.to_string());
    push(
        "freeze_word_embeddings",
        hp.freeze_word_embeddings.to_string(),
    );
    push("lr_decay", hp.lr_decay.to_string());
    push("decode_mask", hp.decode_mask.to_string());
    push("capitalization", hp.variant.uses_capitalization().to_string());
    push("suffix", hp.variant.uses_suffix().to_string());
    if hp.variant.uses_capitalization() {
        push("capitalization_classes", "5".to_string());
    }
    if hp.variant.uses_capitalization() || hp.variant.uses_suffix() {
        push("feature_dim", hp.variant.handcrafted.feature_dim.to_string());
    }
    if hp.variant.uses_suffix() {
        push("suffix_length", hp.variant.handcrafted.suffix_length.to_string());
        if let Some(t) = &model.suffix_table {
            push("suffix_vocab", t.vocab().len().to_string());
        }
    }
    if let Some(t) = &model.word_table {
        push("word_vocab", t.vocab().len().to_string());
    }
    if let Some(c) = &model.char_conv {
        push("char_vocab", c.char_table.vocab().len().to_string());
    }
    push("tags", model.tags.len().to_string());
    push("train_sentences", train_sentences.to_string());
    push("dev_sentences", dev_sentences.to_string());
    header
}

/// Trains a model, selecting the epoch snapshot with the best dev F1
/// (earlier epoch wins ties). With `max_epochs` 0 the initialization is
/// returned unchanged.
pub fn train<F: Scalar>(
    train_corpus: &[LabeledSentence],
    dev_corpus: &[LabeledSentence],
    hp: &Hyperparameters,
    pretrained: Option<&EmbeddingTable<F>>,
) -> Result<(ModelParams<F>, TrainReport)> {
    hp.validate()?;
    if train_corpus.is_empty() {
        return Err(Error::Data("empty training corpus".into()));
    }
    if dev_corpus.is_empty() {
        return Err(Error::Data(
            "empty development corpus (needed for model selection)".into(),
        ));
    }
    let (words, chars, tags) =
        build_vocabularies(train_corpus, pretrained.map(|t| t.vocab()))?;
    let suffixes = if hp.variant.uses_suffix() {
        Some(build_suffix_vocabulary(
            train_corpus,
            hp.variant.handcrafted.suffix_length,
        ))
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let model = ModelParams::init(hp, words, chars, suffixes, tags, pretrained, &mut rng)?;

    let mask = hp.decode_mask.then(|| model.iob2_mask());
    let header = report_header(hp, &model, train_corpus.len(), dev_corpus.len());

    let mut state = TrainState {
        model,
        epoch: 0,
        history: Vec::new(),
        rng,
    };
    let mut best: Option<(f64, usize, ModelParams<F>)> = None;

    let mut order: Vec<usize> = (0..train_corpus.len()).collect();
    for epoch in 0..hp.max_epochs {
        state.epoch = epoch;
        order.shuffle(&mut state.rng);
        let mut total_loss = 0.0;
        for &idx in &order {
            let loss = sgd_step(&mut state, &train_corpus[idx]).map_err(|e| match e {
                Error::NonFiniteLoss => Error::Divergence {
                    epoch: epoch + 1,
                    sentence: idx,
                },
                other => other,
            })?;
            total_loss += loss.as_f64();
        }
        let mean_loss = total_loss / train_corpus.len() as f64;

        let predictions: Vec<Vec<String>> = dev_corpus
            .iter()
            .map(|s| state.model.tag_sentence(s.tokens(), mask.as_ref()))
            .collect::<Result<_>>()?;
        let dev = crate::evaluation::evaluate(dev_corpus, &predictions)?;
        let stats = EpochStats {
            epoch: epoch + 1,
            mean_loss,
            dev_precision: dev.overall.precision(),
            dev_recall: dev.overall.recall(),
            dev_f1: dev.overall.f1(),
        };
        let is_better = best
            .as_ref()
            .is_none_or(|(best_f1, _, _)| stats.dev_f1 > *best_f1);
        if is_better {
            best = Some((stats.dev_f1, epoch + 1, state.model.clone()));
        }
        state.history.push(stats);
    }

    let (best_epoch, model) = match best {
        Some((_, epoch, model)) => (Some(epoch), model),
        None => (None, state.model),
    };
    let report = TrainReport {
        header,
        epochs: state.history,
        best_epoch,
    };
    Ok((model, report))
}

/// Result of checking one parameter group against finite differences.
#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub group: ParamGroup,
    pub max_rel_error: f64,
    pub params_checked: usize,
    pub passed: bool,
}

/// Gradient-check report over every parameter group of a model.
#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    pub groups: Vec<GroupCheck>,
    pub tolerance: f64,
}

impl GradientCheckReport {
    pub fn all_passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_error)
            .fold(0.0, f64::max)
    }
}

/// Relative error used throughout the gradient checks.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients of the log-likelihood against central finite
/// differences at the given step, for every parameter of every group.
/// Intended for small models; cost is two forward passes per parameter.
pub fn gradient_check<F: Scalar>(
    model: &ModelParams<F>,
    sentence: &LabeledSentence,
    step: f64,
    tolerance: f64,
) -> Result<GradientCheckReport> {
    let gold = model.tags.encode(sentence)?;
    let (_, grads) = model.forward_backward(sentence.tokens(), &gold)?;

    let value_of = |m: &ModelParams<F>| -> Result<f64> {
        let fwd = m.sentence_emissions(sentence.tokens())?;
        Ok(log_likelihood(&fwd.lattice, &m.transitions, &gold)
            .value
            .as_f64())
    };

    let mut groups = Vec::new();
    for group in model.group_order() {
        let analytic = grads
            .group_dense(model, group)
            .expect("group present in model");
        let mut max_rel = 0.0f64;
        for (i, &a) in analytic.iter().enumerate() {
            let h = F::from_f64(step);
            let mut plus = model.clone();
            plus.group_slice_mut(group)[i] += h;
            let mut minus = model.clone();
            minus.group_slice_mut(group)[i] -= h;
            let numeric = (value_of(&plus)? - value_of(&minus)?) / (2.0 * step);
            max_rel = max_rel.max(relative_error(a.as_f64(), numeric));
        }
        groups.push(GroupCheck {
            group,
            max_rel_error: max_rel,
            params_checked: analytic.len(),
            passed: max_rel < tolerance,
        });
    }
    Ok(GradientCheckReport { groups, tolerance })
}
