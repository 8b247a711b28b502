//! Sentence-level structured prediction: tag-path scoring, exact Viterbi
//! decoding, the log-partition function, and the conditional log-likelihood
//! with its gradients.
//!
//! All dynamic programs run in log space with a numerically stable
//! log-sum-exp at every step.

use crate::corpus::{parse_tag, TagKind, TagSet};
use crate::num::Scalar;
use ndarray::{Array1, Array2};

/// Learned transition scores: `transitions[t][u]` scores moving from tag `t`
/// to tag `u`, and `start[t]` scores beginning the sentence at tag `t`.
/// There is no end-of-sentence score.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionParams<F: Scalar> {
    pub transitions: Array2<F>,
    pub start: Array1<F>,
}

impl<F: Scalar> TransitionParams<F> {
    /// Zero-initialized transitions (a neutral starting point).
    pub fn zeros(num_tags: usize) -> Self {
        TransitionParams {
            transitions: Array2::zeros((num_tags, num_tags)),
            start: Array1::zeros(num_tags),
        }
    }

    pub fn num_tags(&self) -> usize {
        self.start.len()
    }
}

/// Per-sentence emission scores: row `n` holds the scores of every tag for
/// word `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLattice<F: Scalar> {
    pub emissions: Array2<F>,
}

impl<F: Scalar> ScoreLattice<F> {
    pub fn new(emissions: Array2<F>) -> Self {
        ScoreLattice { emissions }
    }

    pub fn len(&self) -> usize {
        self.emissions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.nrows() == 0
    }

    pub fn num_tags(&self) -> usize {
        self.emissions.ncols()
    }
}

/// Total score of one tag path: start score of the first tag, transition
/// scores between consecutive tags, and the emission score at every word.
pub fn path_score<F: Scalar>(
    lattice: &ScoreLattice<F>,
    trans: &TransitionParams<F>,
    path: &[usize],
) -> F {
    debug_assert_eq!(path.len(), lattice.len());
    let mut score = trans.start[path[0]] + lattice.emissions[[0, path[0]]];
    for n in 1..path.len() {
        score += trans.transitions[[path[n - 1], path[n]]] + lattice.emissions[[n, path[n]]];
    }
    score
}

/// Optional decode-time mask ruling out tag bigrams. Masked entries never
/// win in [`viterbi_decode_masked`]; they do not affect training.
#[derive(Debug, Clone)]
pub struct TransitionMask {
    pub start_allowed: Vec<bool>,
    pub step_allowed: Array2<bool>,
}

impl TransitionMask {
    /// Builds the IOB2 consistency mask over a tag set: `I-X` may only
    /// follow `B-X` or `I-X`, and no sentence may start with `I-X`.
    pub fn iob2(tags: &TagSet) -> Self {
        let n = tags.len();
        let mut start_allowed = vec![true; n];
        let mut step_allowed = Array2::from_elem((n, n), true);
        for to in 0..n {
            if let TagKind::Inside(ty) = parse_tag(tags.name(to)) {
                start_allowed[to] = false;
                for from in 0..n {
                    let ok = match parse_tag(tags.name(from)) {
                        TagKind::Begin(prev) | TagKind::Inside(prev) => prev == ty,
                        TagKind::Outside => false,
                    };
                    step_allowed[[from, to]] = ok;
                }
            }
        }
        TransitionMask {
            start_allowed,
            step_allowed,
        }
    }
}

/// Exact maximum-score decoding.
///
/// Returns the best path and its score; among equally-scored optima the
/// lexicographically smallest tag-index sequence wins. The best-suffix table
/// is built right-to-left, then the path is read off greedily left-to-right,
/// taking the lowest tag index that still achieves the maximum.
pub fn viterbi_decode<F: Scalar>(
    lattice: &ScoreLattice<F>,
    trans: &TransitionParams<F>,
) -> (Vec<usize>, F) {
    viterbi_decode_masked(lattice, trans, None)
}

/// [`viterbi_decode`] with an optional transition mask.
pub fn viterbi_decode_masked<F: Scalar>(
    lattice: &ScoreLattice<F>,
    trans: &TransitionParams<F>,
    mask: Option<&TransitionMask>,
) -> (Vec<usize>, F) {
    let n = lattice.len();
    let t_count = lattice.num_tags();
    assert!(n >= 1 && t_count >= 1, "lattice must be non-empty");
    let neg_inf = F::neg_infinity();
    let start_ok = |t: usize| mask.is_none_or(|m| m.start_allowed[t]);
    let step_ok = |f: usize, t: usize| mask.is_none_or(|m| m.step_allowed[[f, t]]);

    // best_suffix[n][t]: best score of the path suffix starting at word n
    // with tag t (emissions from n on, transitions within the suffix).
    let mut best_suffix = Array2::from_elem((n, t_count), neg_inf);
    for t in 0..t_count {
        best_suffix[[n - 1, t]] = lattice.emissions[[n - 1, t]];
    }
    for pos in (0..n - 1).rev() {
        for t in 0..t_count {
            let mut best = neg_inf;
            for u in 0..t_count {
                if !step_ok(t, u) {
                    continue;
                }
                let cand = trans.transitions[[t, u]] + best_suffix[[pos + 1, u]];
                if cand > best {
                    best = cand;
                }
            }
            best_suffix[[pos, t]] = lattice.emissions[[pos, t]] + best;
        }
    }

    let mut best = neg_inf;
    let mut first = 0usize;
    for t in 0..t_count {
        if !start_ok(t) {
            continue;
        }
        let cand = trans.start[t] + best_suffix[[0, t]];
        if cand > best {
            best = cand;
            first = t;
        }
    }

    let mut path = Vec::with_capacity(n);
    path.push(first);
    for pos in 1..n {
        let prev = path[pos - 1];
        let mut best = neg_inf;
        let mut arg = 0usize;
        for u in 0..t_count {
            if !step_ok(prev, u) {
                continue;
            }
            let cand = trans.transitions[[prev, u]] + best_suffix[[pos, u]];
            if cand > best {
                best = cand;
                arg = u;
            }
        }
        path.push(arg);
    }
    let score = path_score(lattice, trans, &path);
    (path, score)
}

fn log_sum_exp<F: Scalar>(values: &[F]) -> F {
    let mut max = F::neg_infinity();
    for &v in values {
        if v > max {
            max = v;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let sum: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log of the sum over all tag paths of the exponentiated path score,
/// computed by the forward recursion.
pub fn log_partition<F: Scalar>(lattice: &ScoreLattice<F>, trans: &TransitionParams<F>) -> F {
    let alpha = forward_scores(lattice, trans);
    let last = alpha.row(alpha.nrows() - 1);
    log_sum_exp(last.as_slice().expect("contiguous row"))
}

/// alpha[n][t] = log sum of scores of all partial paths ending at word n
/// with tag t.
fn forward_scores<F: Scalar>(
    lattice: &ScoreLattice<F>,
    trans: &TransitionParams<F>,
) -> Array2<F> {
    let n = lattice.len();
    let t_count = lattice.num_tags();
    assert!(n >= 1 && t_count >= 1, "lattice must be non-empty");
    let mut alpha = Array2::zeros((n, t_count));
    for t in 0..t_count {
        alpha[[0, t]] = trans.start[t] + lattice.emissions[[0, t]];
    }
    let mut scratch = vec![F::zero(); t_count];
    for pos in 1..n {
        for t in 0..t_count {
            for (u, slot) in scratch.iter_mut().enumerate() {
                *slot = alpha[[pos - 1, u]] + trans.transitions[[u, t]];
            }
            alpha[[pos, t]] = lattice.emissions[[pos, t]] + log_sum_exp(&scratch);
        }
    }
    alpha
}

/// beta[n][t] = log sum of scores of all path suffixes leaving word n at tag
/// t (excluding word n's own emission and arrival scores).
fn backward_scores<F: Scalar>(
    lattice: &ScoreLattice<F>,
    trans: &TransitionParams<F>,
) -> Array2<F> {
    let n = lattice.len();
    let t_count = lattice.num_tags();
    let mut beta = Array2::zeros((n, t_count));
    let mut scratch = vec![F::zero(); t_count];
    for pos in (0..n.saturating_sub(1)).rev() {
        for t in 0..t_count {
            for (u, slot) in scratch.iter_mut().enumerate() {
                *slot =
                    trans.transitions[[t, u]] + lattice.emissions[[pos + 1, u]] + beta[[pos + 1, u]];
            }
            beta[[pos, t]] = log_sum_exp(&scratch);
        }
    }
    beta
}

/// Value and gradients of the conditional log-likelihood of one gold path.
#[derive(Debug, Clone)]
pub struct LogLikelihood<F: Scalar> {
    /// `path_score(gold) - log_partition`; always <= 0.
    pub value: F,
    /// d value / d emissions: indicator(gold) - unary marginal.
    pub d_emissions: Array2<F>,
    /// d value / d transitions: gold bigram counts - pairwise marginals.
    pub d_transitions: Array2<F>,
    /// d value / d start: indicator(gold first tag) - first-word marginal.
    pub d_start: Array1<F>,
}

/// Conditional log-likelihood of `gold` with exact gradients, computed by
/// forward-backward in log space.
pub fn log_likelihood<F: Scalar>(
    lattice: &ScoreLattice<F>,
    trans: &TransitionParams<F>,
    gold: &[usize],
) -> LogLikelihood<F> {
    let n = lattice.len();
    let t_count = lattice.num_tags();
    debug_assert_eq!(gold.len(), n);
    let alpha = forward_scores(lattice, trans);
    let beta = backward_scores(lattice, trans);
    let log_z = {
        let last = alpha.row(n - 1);
        log_sum_exp(last.as_slice().expect("contiguous row"))
    };
    let value = path_score(lattice, trans, gold) - log_z;

    let mut d_emissions = Array2::zeros((n, t_count));
    for pos in 0..n {
        for t in 0..t_count {
            let marginal = (alpha[[pos, t]] + beta[[pos, t]] - log_z).exp();
            d_emissions[[pos, t]] = -marginal;
        }
        d_emissions[[pos, gold[pos]]] += F::one();
    }

    let mut d_start = Array1::zeros(t_count);
    for t in 0..t_count {
        d_start[t] = -(alpha[[0, t]] + beta[[0, t]] - log_z).exp();
    }
    d_start[gold[0]] += F::one();

    let mut d_transitions = Array2::zeros((t_count, t_count));
    for pos in 0..n.saturating_sub(1) {
        for t in 0..t_count {
            for u in 0..t_count {
                let marginal = (alpha[[pos, t]]
                    + trans.transitions[[t, u]]
                    + lattice.emissions[[pos + 1, u]]
                    + beta[[pos + 1, u]]
                    - log_z)
                    .exp();
                d_transitions[[t, u]] -= marginal;
            }
        }
        d_transitions[[gold[pos], gold[pos + 1]]] += F::one();
    }

    LogLikelihood {
        value,
        d_emissions,
        d_transitions,
        d_start,
    }
}
