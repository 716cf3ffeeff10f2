use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr",
    "pl", "st", "tr", "sh", "ch",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l", "k", "m"];

/// `n` distinct pronounceable nonsense words, none in `exclude`.
pub(crate) fn synthetic_words(
    rng: &mut ChaCha8Rng,
    n: usize,
    exclude: &BTreeSet<String>,
) -> Vec<String> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
        if exclude.contains(&w) || !seen.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn words_are_distinct_and_keyword_sized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let words = synthetic_words(&mut rng, 3000, &BTreeSet::new());
        let set: BTreeSet<_> = words.iter().collect();
        assert_eq!(set.len(), 3000);
        assert!(words
            .iter()
            .all(|w| w.len() >= 4 && w.chars().all(|c| c.is_ascii_lowercase())));
    }
}
