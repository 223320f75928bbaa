//! Seeded fixtures for the benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use walkguard_core::{tokenize, BigramModel, DangerLevel, EmbeddingTable, TokenSequence};

pub const VOCAB: [&str; 32] = [
    "a", "the", "is", "at", "on", "to", "car", "vehicle", "bus", "bike", "person", "dog", "stops",
    "turns", "waits", "crosses", "ahead", "left", "right", "behind", "near", "curb", "step",
    "stairs", "door", "light", "red", "green", "crossing", "road", "path", "pole",
];

pub struct TextFixture {
    pub table: EmbeddingTable,
    pub model: BigramModel,
    pub references: Vec<String>,
    pub candidates: Vec<String>,
}

pub fn sentence(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n` reference/candidate pairs of length `len` over a 32-word vocabulary
/// with 16-dimensional embeddings.
pub fn text_fixture(n: usize, len: usize, seed: u64) -> TextFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(16).unwrap();
    for w in VOCAB {
        let v: Vec<f64> = (0..16).map(|_| rng.random_range(0.05..1.0)).collect();
        table.insert(w, &v).unwrap();
    }
    let references: Vec<String> = (0..n).map(|_| sentence(&mut rng, len)).collect();
    let candidates = (0..n).map(|_| sentence(&mut rng, len)).collect();
    let corpus: Vec<TokenSequence> = references.iter().map(|r| tokenize(r)).collect();
    let model = BigramModel::fit(&corpus, 1.0).unwrap();
    TextFixture {
        table,
        model,
        references,
        candidates,
    }
}

pub fn token_pair(len: usize, seed: u64) -> (TokenSequence, TokenSequence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        tokenize(&sentence(&mut rng, len)),
        tokenize(&sentence(&mut rng, len)),
    )
}

pub fn rewards(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-2.0..6.0)).collect()
}

/// Three 2-d blobs, `per_class` points each.
pub fn blobs(per_class: usize, seed: u64) -> Vec<(Vec<f64>, DangerLevel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[0.0, 3.0], [-2.6, -1.5], [2.6, -1.5]];
    (0..3 * per_class)
        .map(|i| {
            let c = centers[i % 3];
            let x = vec![
                c[0] + rng.random_range(-1.0..1.0),
                c[1] + rng.random_range(-1.0..1.0),
            ];
            (x, DangerLevel::ALL[i % 3])
        })
        .collect()
}

pub fn level_stream(n: usize, seed: u64) -> Vec<DangerLevel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| *DangerLevel::ALL.choose(&mut rng).unwrap())
        .collect()
}
