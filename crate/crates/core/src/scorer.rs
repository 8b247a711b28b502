//! Context-window assembly and the two-layer tag scorer.
//!
//! Each word's joint representation is concatenated with its neighbors'
//! (padding representation outside the sentence) into a window vector `r`,
//! which is scored as `W2 · tanh(W1 r + b1) + b2`, one score per tag.

use crate::char_conv::uniform_matrix;
use crate::features::HandcraftedFeatureSpec;
use crate::num::Scalar;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which input paths the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariantKind {
    /// Word embeddings + character convolution.
    CharWnn,
    /// Word embeddings only, optionally with capitalization/suffix features.
    Wnn,
    /// Character convolution only.
    CharNn,
}

impl VariantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::CharWnn => "charwnn",
            VariantKind::Wnn => "wnn",
            VariantKind::CharNn => "charnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "charwnn" => Some(VariantKind::CharWnn),
            "wnn" => Some(VariantKind::Wnn),
            "charnn" => Some(VariantKind::CharNn),
            _ => None,
        }
    }
}

/// A model variant: the kind plus the handcrafted-feature configuration,
/// which only the word-only variant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelVariant {
    pub kind: VariantKind,
    pub handcrafted: HandcraftedFeatureSpec,
}

impl ModelVariant {
    pub fn charwnn() -> Self {
        ModelVariant {
            kind: VariantKind::CharWnn,
            handcrafted: HandcraftedFeatureSpec::none(),
        }
    }

    pub fn wnn(handcrafted: HandcraftedFeatureSpec) -> Self {
        ModelVariant {
            kind: VariantKind::Wnn,
            handcrafted,
        }
    }

    pub fn charnn() -> Self {
        ModelVariant {
            kind: VariantKind::CharNn,
            handcrafted: HandcraftedFeatureSpec::none(),
        }
    }

    pub fn uses_words(&self) -> bool {
        matches!(self.kind, VariantKind::CharWnn | VariantKind::Wnn)
    }

    pub fn uses_chars(&self) -> bool {
        matches!(self.kind, VariantKind::CharWnn | VariantKind::CharNn)
    }

    pub fn uses_capitalization(&self) -> bool {
        self.kind == VariantKind::Wnn && self.handcrafted.capitalization
    }

    pub fn uses_suffix(&self) -> bool {
        self.kind == VariantKind::Wnn && self.handcrafted.suffix
    }
}

/// Parameters of the window scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams<F: Scalar> {
    /// hidden_units × (word_window · rep_dim)
    pub hidden_weights: Array2<F>,
    pub hidden_bias: Array1<F>,
    /// tags × hidden_units
    pub output_weights: Array2<F>,
    pub output_bias: Array1<F>,
    pub word_window: usize,
}

impl<F: Scalar> ScorerParams<F> {
    pub fn init(
        rep_dim: usize,
        word_window: usize,
        hidden_units: usize,
        num_tags: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(word_window % 2 == 1, "word window must be odd");
        let input = rep_dim * word_window;
        ScorerParams {
            hidden_weights: uniform_matrix(hidden_units, input, rng),
            hidden_bias: Array1::zeros(hidden_units),
            output_weights: uniform_matrix(num_tags, hidden_units, rng),
            output_bias: Array1::zeros(num_tags),
            word_window,
        }
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_weights.nrows()
    }

    pub fn num_tags(&self) -> usize {
        self.output_weights.nrows()
    }

    pub fn window_input(&self) -> usize {
        self.hidden_weights.ncols()
    }
}

/// Concatenates the representations of the window centered at `position`,
/// substituting `pad` for positions outside the sentence.
pub fn assemble_window<F: Scalar>(
    reps: &[Array1<F>],
    pad: &Array1<F>,
    position: usize,
    window: usize,
) -> Array1<F> {
    debug_assert!(window % 2 == 1);
    debug_assert!(position < reps.len());
    let dim = pad.len();
    let half = (window as isize - 1) / 2;
    let mut r = Array1::zeros(dim * window);
    for (slot, offset) in (-half..=half).enumerate() {
        let source = position as isize + offset;
        let u = if source < 0 || source >= reps.len() as isize {
            pad
        } else {
            &reps[source as usize]
        };
        r.slice_mut(ndarray::s![slot * dim..(slot + 1) * dim]).assign(u);
    }
    r
}

/// Emission scores for one window vector: `W2 · tanh(W1 r + b1) + b2`.
pub fn score_word<F: Scalar>(params: &ScorerParams<F>, r: ArrayView1<'_, F>) -> Array1<F> {
    score_word_with_hidden(params, r).0
}

/// Like [`score_word`] but also returns the tanh activations for backward.
pub fn score_word_with_hidden<F: Scalar>(
    params: &ScorerParams<F>,
    r: ArrayView1<'_, F>,
) -> (Array1<F>, Array1<F>) {
    debug_assert_eq!(r.len(), params.window_input());
    let hidden = (params.hidden_weights.dot(&r) + &params.hidden_bias).mapv(F::tanh);
    let scores = params.output_weights.dot(&hidden) + &params.output_bias;
    (scores, hidden)
}

/// Mutable views of the scorer's gradient accumulators.
pub struct ScorerGrads<'a, F: Scalar> {
    pub hidden_weights: &'a mut Array2<F>,
    pub hidden_bias: &'a mut Array1<F>,
    pub output_weights: &'a mut Array2<F>,
    pub output_bias: &'a mut Array1<F>,
}

/// Backward through one window: accumulates parameter gradients and returns
/// the gradient flowing back into the window vector.
pub fn score_word_backward<F: Scalar>(
    params: &ScorerParams<F>,
    r: ArrayView1<'_, F>,
    hidden: ArrayView1<'_, F>,
    d_scores: ArrayView1<'_, F>,
    grads: ScorerGrads<'_, F>,
) -> Array1<F> {
    // Output layer.
    for (t, &g) in d_scores.iter().enumerate() {
        if g != F::zero() {
            grads.output_weights.row_mut(t).scaled_add(g, &hidden);
            grads.output_bias[t] += g;
        }
    }
    let d_hidden = params.output_weights.t().dot(&d_scores);
    // tanh' = 1 - tanh^2
    let one = F::one();
    let d_pre: Array1<F> = d_hidden
        .iter()
        .zip(hidden.iter())
        .map(|(&dh, &h)| dh * (one - h * h))
        .collect();
    for (j, &g) in d_pre.iter().enumerate() {
        if g != F::zero() {
            grads.hidden_weights.row_mut(j).scaled_add(g, &r);
            grads.hidden_bias[j] += g;
        }
    }
    params.hidden_weights.t().dot(&d_pre)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rand_vec(n: usize, rng: &mut impl Rng) -> Array1<f64> {
        Array1::from_shape_simple_fn(n, || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn window_for_single_word_sentence() {
        let mut r = rng(1);
        let u = rand_vec(3, &mut r);
        let pad = rand_vec(3, &mut r);
        let reps = vec![u.clone()];
        let window = assemble_window(&reps, &pad, 0, 5);
        let expected: Vec<f64> = pad
            .iter()
            .chain(pad.iter())
            .chain(u.iter())
            .chain(pad.iter())
            .chain(pad.iter())
            .copied()
            .collect();
        assert_eq!(window.to_vec(), expected);
    }

    #[test]
    fn window_at_sentence_start() {
        let mut r = rng(2);
        let reps: Vec<Array1<f64>> = (0..3).map(|_| rand_vec(2, &mut r)).collect();
        let pad = rand_vec(2, &mut r);
        let window = assemble_window(&reps, &pad, 0, 3);
        let expected: Vec<f64> = pad
            .iter()
            .chain(reps[0].iter())
            .chain(reps[1].iter())
            .copied()
            .collect();
        assert_eq!(window.to_vec(), expected);
    }

    #[test]
    fn window_in_the_middle_matches_indexing() {
        let mut r = rng(3);
        let reps: Vec<Array1<f64>> = (0..7).map(|_| rand_vec(2, &mut r)).collect();
        let pad = rand_vec(2, &mut r);
        let window = assemble_window(&reps, &pad, 3, 5);
        for (slot, source) in (1..=5).enumerate() {
            let got = window.slice(ndarray::s![slot * 2..(slot + 1) * 2]);
            assert_eq!(got, reps[source].view(), "slot {slot}");
        }
    }

    #[test]
    fn zero_params_score_zero() {
        let params = ScorerParams::<f64> {
            hidden_weights: Array2::zeros((4, 6)),
            hidden_bias: Array1::zeros(4),
            output_weights: Array2::zeros((3, 4)),
            output_bias: Array1::zeros(3),
            word_window: 3,
        };
        let r = Array1::from_vec(vec![1.0; 6]);
        let s = score_word(&params, r.view());
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_hidden_weights_closed_form() {
        let mut rg = rng(4);
        let mut params = ScorerParams::<f64>::init(2, 3, 4, 3, &mut rg);
        params.hidden_weights.fill(0.0);
        params.hidden_bias = rand_vec(4, &mut rg);
        params.output_bias = rand_vec(3, &mut rg);
        let r = rand_vec(6, &mut rg);
        let s = score_word(&params, r.view());
        let expected =
            params.output_weights.dot(&params.hidden_bias.mapv(f64::tanh)) + &params.output_bias;
        for (a, b) in s.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_matrix_arithmetic_oracle() {
        let mut rg = rng(5);
        let mut params = ScorerParams::<f64>::init(3, 3, 5, 4, &mut rg);
        params.hidden_bias = rand_vec(5, &mut rg);
        params.output_bias = rand_vec(4, &mut rg);
        let r = rand_vec(9, &mut rg);
        let s = score_word(&params, r.view());

        // Independent elementwise re-derivation.
        let mut expected = [0.0; 4];
        let mut hidden = [0.0; 5];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut acc = params.hidden_bias[j];
            for c in 0..9 {
                acc += params.hidden_weights[[j, c]] * r[c];
            }
            *h = acc.tanh();
        }
        for (t, e) in expected.iter_mut().enumerate() {
            let mut acc = params.output_bias[t];
            for (j, h) in hidden.iter().enumerate() {
                acc += params.output_weights[[t, j]] * h;
            }
            *e = acc;
        }
        for (a, b) in s.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn hidden_activations_bounded() {
        let mut rg = rng(6);
        let params = ScorerParams::<f64>::init(2, 3, 8, 3, &mut rg);
        let r = rand_vec(6, &mut rg) * 100.0;
        let (_, hidden) = score_word_with_hidden(&params, r.view());
        for &h in &hidden {
            assert!((-1.0..=1.0).contains(&h));
            assert!(h.is_finite());
        }
    }
}
