//! Character-level word embeddings: a convolution over character windows
//! followed by per-unit max pooling, with exact (sub)gradients.
//!
//! A word of M characters is padded with (window-1)/2 padding characters on
//! each side, giving exactly M windows. Each window's character vectors are
//! concatenated and passed through one affine layer; unit j of the output is
//! the maximum of that unit's pre-activation over all windows. There is no
//! nonlinearity here; the hidden tanh lives in the window scorer.

use crate::corpus::PADDING_INDEX;
use crate::error::{Error, Result};
use crate::features::EmbeddingTable;
use crate::num::Scalar;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use std::collections::HashMap;

/// Parameters of the character convolution: the character table, the
/// convolution weights over one concatenated window, and the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct CharConvParams<F: Scalar> {
    pub char_table: EmbeddingTable<F>,
    /// units × (char_dim · window)
    pub conv_weights: Array2<F>,
    pub conv_bias: Array1<F>,
    pub window: usize,
}

impl<F: Scalar> CharConvParams<F> {
    /// Builds the layer with fan-based uniform weights and zero bias.
    pub fn init(
        char_table: EmbeddingTable<F>,
        units: usize,
        window: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(window % 2 == 1, "character window must be odd");
        let input = char_table.dim() * window;
        CharConvParams {
            char_table,
            conv_weights: uniform_matrix(units, input, rng),
            conv_bias: Array1::zeros(units),
            window,
        }
    }

    /// Number of pooled units, i.e. the size of the word's character-level
    /// embedding, independent of word length.
    pub fn units(&self) -> usize {
        self.conv_weights.nrows()
    }

    fn window_input(&self) -> usize {
        self.char_table.dim() * self.window
    }

    /// Concatenated character vectors of the window starting at `m` in the
    /// padded index sequence.
    fn window_vector(&self, padded: &[usize], m: usize, out: &mut Array1<F>) {
        let d = self.char_table.dim();
        for (p, &ci) in padded[m..m + self.window].iter().enumerate() {
            out.slice_mut(ndarray::s![p * d..(p + 1) * d])
                .assign(&self.char_table.lookup(ci));
        }
    }

    fn padded_indices(&self, chars: &[usize]) -> Vec<usize> {
        let half = (self.window - 1) / 2;
        let mut padded = Vec::with_capacity(chars.len() + 2 * half);
        padded.extend(std::iter::repeat_n(PADDING_INDEX, half));
        padded.extend_from_slice(chars);
        padded.extend(std::iter::repeat_n(PADDING_INDEX, half));
        padded
    }
}

/// Fan-based uniform matrix: `U(-r, r)` with `r = sqrt(6 / (rows + cols))`.
pub fn uniform_matrix<F: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<F> {
    let r = crate::features::uniform_radius(rows, cols);
    Array2::from_shape_simple_fn((rows, cols), || F::from_f64(rng.gen_range(-r..r)))
}

/// Gradients of the character path, accumulated across calls.
///
/// Character-table gradients are sparse: only touched columns appear.
#[derive(Debug, Clone)]
pub struct CharConvGrads<F: Scalar> {
    pub conv_weights: Array2<F>,
    pub conv_bias: Array1<F>,
    pub char_columns: HashMap<usize, Array1<F>>,
}

impl<F: Scalar> CharConvGrads<F> {
    pub fn zeros(params: &CharConvParams<F>) -> Self {
        CharConvGrads {
            conv_weights: Array2::zeros(params.conv_weights.raw_dim()),
            conv_bias: Array1::zeros(params.conv_bias.raw_dim()),
            char_columns: HashMap::new(),
        }
    }
}

/// Forward pass over one word given as character indices.
///
/// Returns the pooled embedding and, per unit, the index of the maximizing
/// window (lowest index on ties) for the backward pass.
pub fn char_forward<F: Scalar>(
    params: &CharConvParams<F>,
    chars: &[usize],
) -> Result<(Array1<F>, Vec<usize>)> {
    if chars.is_empty() {
        return Err(Error::Data("cannot embed an empty word".into()));
    }
    let units = params.units();
    let padded = params.padded_indices(chars);
    let mut best = Array1::zeros(units);
    let mut argmax = vec![0usize; units];
    let mut z = Array1::zeros(params.window_input());
    for m in 0..chars.len() {
        params.window_vector(&padded, m, &mut z);
        let pre = params.conv_weights.dot(&z) + &params.conv_bias;
        if m == 0 {
            best = pre;
        } else {
            for j in 0..units {
                if pre[j] > best[j] {
                    best[j] = pre[j];
                    argmax[j] = m;
                }
            }
        }
    }
    Ok((best, argmax))
}

/// Backward pass matching a prior [`char_forward`] call.
///
/// The gradient flows only through each unit's maximizing window; every other
/// window contributes zero. Accumulates into `grads`.
pub fn char_backward<F: Scalar>(
    params: &CharConvParams<F>,
    chars: &[usize],
    upstream: ArrayView1<'_, F>,
    argmax: &[usize],
    grads: &mut CharConvGrads<F>,
) {
    let units = params.units();
    debug_assert_eq!(upstream.len(), units);
    debug_assert_eq!(argmax.len(), units);
    let d = params.char_table.dim();
    let padded = params.padded_indices(chars);

    // Group units by their winning window so each z_m is built once.
    let mut units_by_window: HashMap<usize, Vec<usize>> = HashMap::new();
    for (j, &m) in argmax.iter().enumerate() {
        if upstream[j] != F::zero() {
            units_by_window.entry(m).or_default().push(j);
        }
    }

    let mut z = Array1::zeros(params.window_input());
    let mut windows: Vec<usize> = units_by_window.keys().copied().collect();
    windows.sort_unstable();
    for m in windows {
        params.window_vector(&padded, m, &mut z);
        for &j in &units_by_window[&m] {
            let g = upstream[j];
            grads.conv_bias[j] += g;
            grads
                .conv_weights
                .row_mut(j)
                .scaled_add(g, &z);
            let w_row = params.conv_weights.row(j);
            for (p, &ci) in padded[m..m + params.window].iter().enumerate() {
                let col = grads
                    .char_columns
                    .entry(ci)
                    .or_insert_with(|| Array1::zeros(d));
                col.scaled_add(g, &w_row.slice(ndarray::s![p * d..(p + 1) * d]));
            }
        }
    }
}
