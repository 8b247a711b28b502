//! Rule-generated corpora for convergence tests and demos.
//!
//! Sentences are lowercase filler words; with fixed probability a person
//! mention ("sr" followed by one or two capitalized names, tagged
//! B-PER/I-PER) or a location mention ("em" followed by a capitalized city,
//! tagged B-LOC) is spliced in. The tagging rule is exact, so a model with
//! enough capacity can reach 100% token accuracy.

use crate::corpus::LabeledSentence;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLERS: [&str; 20] = [
    "o", "jogo", "foi", "bom", "hoje", "ontem", "muito", "tempo", "casa", "rua", "ele", "ela",
    "viu", "fez", "dia", "ano", "mes", "vez", "bem", "mal",
];

const NAMES: [&str; 10] = [
    "Silva", "Costa", "Souza", "Pereira", "Gomes", "Martins", "Rocha", "Dias", "Nunes", "Melo",
];

const CITIES: [&str; 6] = ["Lisboa", "Porto", "Madrid", "Sevilha", "Braga", "Faro"];

/// Generates `count` labeled sentences from the fixed rule set,
/// deterministically for a given seed.
pub fn generate_corpus(count: usize, seed: u64) -> Vec<LabeledSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| generate_sentence(&mut rng)).collect()
}

fn generate_sentence(rng: &mut ChaCha8Rng) -> LabeledSentence {
    let filler_count = rng.gen_range(3..=7);
    let mut pairs: Vec<(String, String)> = (0..filler_count)
        .map(|_| {
            let w = *FILLERS.choose(rng).expect("non-empty");
            (w.to_string(), "O".to_string())
        })
        .collect();

    let roll: f64 = rng.gen();
    let mention: Vec<(String, String)> = if roll < 0.5 {
        let mut m = vec![("sr".to_string(), "O".to_string())];
        m.push((NAMES.choose(rng).unwrap().to_string(), "B-PER".to_string()));
        if rng.gen_bool(0.5) {
            m.push((NAMES.choose(rng).unwrap().to_string(), "I-PER".to_string()));
        }
        m
    } else if roll < 0.85 {
        vec![
            ("em".to_string(), "O".to_string()),
            (CITIES.choose(rng).unwrap().to_string(), "B-LOC".to_string()),
        ]
    } else {
        Vec::new()
    };
    if !mention.is_empty() {
        let at = rng.gen_range(0..=pairs.len());
        pairs.splice(at..at, mention);
    }

    LabeledSentence::from_pairs(pairs.iter().map(|(t, g)| (t.as_str(), g.as_str())))
        .expect("generated sentences are well-formed")
}
