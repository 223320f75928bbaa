//! Acceptance gate: eight criteria, run in sequence so each one is timed on
//! its own. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use walkguard_core::ead::{
    cross_entropy, focal_loss, loss_gradients, BlendedLoss, DangerLevel, FocalLossConfig,
    MlpClassifier, TrainConfig,
};
use walkguard_core::embed::{cosine_similarity, EmbeddingTable, SynonymMap};
use walkguard_core::grpo::{group_advantages, CandidateGroup};
use walkguard_core::lm::{perplexity, score_tokens, BigramModel, FixedLogProbs, TokenLogProbs};
use walkguard_core::metrics::{lcs_length, rouge_l, rouge_n, trf_score};
use walkguard_core::rewards::{
    accuracy_reward, fluency_from_parts, fluency_reward, keywords_reward, score_candidate,
    simplicity_reward, IdealLength, RewardConfig, RewardDiagnostics, RewardVector, RewardWeights,
    ScoringContext,
};
use walkguard_core::text::{
    extract_keywords, extract_ngrams, mean_token_accuracy, ngram_diversity, tokenize, KeywordSet,
    StopWords, TokenSequence,
};
use walkguard_core::{
    decide_trigger, simulate_stream, train_classifier, FrameRecord, TriggerPolicyConfig,
};

use DangerLevel::{A, B, C};

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

macro_rules! assert_close {
    ($a:expr, $b:expr) => {
        assert_close!($a, $b, TOL)
    };
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!(close(a, b, $tol), "{} = {a}, expected {b}", stringify!($a));
    }};
}

fn seq(tokens: &[&str]) -> TokenSequence {
    TokenSequence::from_tokens(tokens)
}

fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(entries[0].1.len()).unwrap();
    for (tok, v) in entries {
        t.insert(*tok, v).unwrap();
    }
    t
}

fn fixed_scorer(log2_probs: Vec<f64>) -> FixedLogProbs {
    FixedLogProbs(TokenLogProbs::new(log2_probs).unwrap())
}

// 1. Worked examples of the reward, language-model and loss equations.
fn equation_oracles() {
    // tokenization and n-grams
    assert!(tokenize("").is_empty());
    assert_eq!(tokenize("The cat, sat.").tokens(), ["the", "cat", "sat"]);
    assert_eq!(tokenize("A  a A").tokens(), ["a", "a", "a"]);
    let p = extract_ngrams(&seq(&["a", "b", "a", "b"]), 2).unwrap();
    assert_eq!((p.distinct_count(), p.total_count()), (2, 3));
    assert_close!(ngram_diversity(&p), 2.0 / 3.0);
    let p = extract_ngrams(&seq(&["a", "b", "c"]), 1).unwrap();
    assert_eq!((p.distinct_count(), p.total_count()), (3, 3));
    assert_eq!(ngram_diversity(&p), 1.0);
    let p = extract_ngrams(&seq(&["a", "b"]), 3).unwrap();
    assert_eq!((p.distinct_count(), p.total_count()), (0, 0));
    let p = extract_ngrams(&seq(&["a", "a", "a"]), 1).unwrap();
    assert_close!(ngram_diversity(&p), 1.0 / 3.0);

    // mean token accuracy
    let mta = |g: &[&str], a: &[&str]| mean_token_accuracy(&seq(g), &seq(a)).unwrap();
    assert_close!(mta(&["a", "b", "c", "d"], &["a", "b", "x", "d"]), 0.75);
    assert_eq!(mta(&["x", "y"], &["x", "y"]), 1.0);
    assert_close!(mta(&["a", "b", "c"], &["a", "b"]), 2.0 / 3.0);

    // keyword extraction
    let sw = StopWords::new(["a", "is"]);
    let k = extract_keywords(&seq(&["a", "car", "is", "ahead"]), &sw);
    assert_eq!(k.keywords(), ["car", "ahead"]);
    assert!(extract_keywords(&seq(&[]), &sw).is_empty());
    let k = extract_keywords(&seq(&["car", "car"]), &StopWords::new(Vec::<String>::new()));
    assert_eq!(k.keywords(), ["car"]);

    // bigram model: V = 2, three outcomes with <unk>, (1 + 1) / (1 + 3)
    let m = BigramModel::fit(&[seq(&["a", "b"])], 1.0).unwrap();
    assert_close!(m.prob("a", "b"), 0.5);
    let lp = score_tokens(&m, &seq(&["a", "b"])).unwrap();
    assert_eq!(lp.len(), 2);
    assert_close!(lp.as_slice()[0], 0.5f64.log2());
    assert_close!(lp.as_slice()[1], 0.5f64.log2());
    let tiny = BigramModel::fit(&[seq(&["a", "a", "a"])], 1e-12).unwrap();
    assert!(tiny.prob("a", "a") > 1.0 - 1e-9);

    // perplexity
    let ppl = |v: &[f64]| {
        perplexity(&TokenLogProbs::new(v.to_vec()).unwrap())
            .unwrap()
            .value()
    };
    assert_close!(ppl(&[-1.0; 4]), 2.0);
    assert_close!(ppl(&[0.0, 0.0]), 1.0);
    assert_close!(ppl(&[0.0, -2.0]), 2.0);
    let half = score_tokens(&fixed_scorer(vec![-1.0; 4]), &seq(&["w", "x", "y", "z"])).unwrap();
    assert_eq!(half.as_slice(), [-1.0; 4]);

    // cosine similarity
    assert_close!(
        cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
        1.0
    );
    assert_close!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert_close!(
        cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap(),
        0.5f64.sqrt()
    );

    // simplicity: 1 - ((25 - 20) / 20)^2 = 0.9375
    let cfg = RewardConfig::default();
    assert_eq!(simplicity_reward(20, 20, &cfg), 1.0);
    assert_eq!(simplicity_reward(40, 20, &cfg), 0.0);
    assert_close!(simplicity_reward(25, 20, &cfg), 0.9375);

    // fluency: D / (D + PPL)
    assert_close!(fluency_from_parts(1.0, 1.0), 0.5);
    assert_close!(fluency_from_parts(2.0 / 3.0, 2.0), 0.25);
    assert_eq!(fluency_from_parts(0.5, f64::INFINITY), 0.0);
    // composed: [a b a b] has D_2 = 2/3, every token at P = 1/2 gives PPL 2
    let f = fluency_reward(
        &seq(&["a", "b", "a", "b"]),
        &fixed_scorer(vec![-1.0; 4]),
        &cfg,
    )
    .unwrap();
    assert_close!(f.reward, 0.25);

    // accuracy: pooled gen (1.5, 0), pooled annt (0.8, 0.6): cos 0.8, mta 1/2
    let t = table(&[("p", &[1.0, 0.0]), ("r", &[2.0, 0.0]), ("s", &[0.6, 1.2])]);
    let acc = accuracy_reward(&seq(&["p", "r"]), &seq(&["p", "s"]), &t).unwrap();
    assert_close!(acc.cos_sim, 0.8);
    assert_close!(acc.mta, 0.5);
    assert_close!(acc.reward, 1.3);
    let acc = accuracy_reward(&seq(&["p", "s"]), &seq(&["p", "s"]), &t).unwrap();
    assert_close!(acc.reward, 2.0);
    let t = table(&[("x", &[1.0, 0.0]), ("y", &[0.0, 1.0])]);
    assert_close!(
        accuracy_reward(&seq(&["x"]), &seq(&["y"]), &t)
            .unwrap()
            .reward,
        0.0
    );

    // keywords: (1/|K|) sum over keywords of synonym occurrences
    let car = KeywordSet::explicit(["car"]);
    let syn = SynonymMap::from_entries(
        [("car".to_owned(), BTreeSet::from(["vehicle".to_owned()]))],
        0.9,
    );
    let gen = seq(&[
        "a", "car", "and", "a", "vehicle", "then", "another", "vehicle",
    ]);
    assert_close!(keywords_reward(&gen, &car, &syn, false).reward, 3.0);
    let none = KeywordSet::explicit(Vec::<String>::new());
    assert_eq!(
        keywords_reward(&gen, &none, &SynonymMap::singletons(&none), false).reward,
        0.0
    );
    let car_dog = KeywordSet::explicit(["car", "dog"]);
    let r = keywords_reward(
        &seq(&["car"]),
        &car_dog,
        &SynonymMap::singletons(&car_dog),
        false,
    );
    assert_close!(r.reward, 0.5);

    // score_candidate composition
    let vocab = table(&[
        ("car", &[1.0, 0.0, 0.0]),
        ("stops", &[0.0, 1.0, 0.0]),
        ("near", &[0.0, 0.0, 1.0]),
        ("light", &[1.0, 1.0, 0.0]),
    ]);
    let annt = "car stops near light";
    let lm = BigramModel::fit(&[tokenize(annt)], 1.0).unwrap();
    let stop = StopWords::new(Vec::<String>::new());
    let cfg = RewardConfig {
        synonym_threshold: 1.0,
        r_max: 1.5,
        ..RewardConfig::default()
    };
    let ctx = ScoringContext {
        config: &cfg,
        table: &vocab,
        scorer: &lm,
        stopwords: &stop,
    };
    let r = score_candidate(annt, annt, &ctx).unwrap();
    assert_eq!(r.simplicity, 1.5);
    assert_close!(r.accuracy, 2.0);
    assert_close!(r.keywords, 1.0);
    let err = score_candidate("", annt, &ctx).unwrap_err().to_string();
    assert!(err.contains("fluency") && err.contains("accuracy"), "{err}");
    let only_simplicity = RewardConfig {
        weights: RewardWeights {
            simplicity: 1.0,
            fluency: 0.0,
            accuracy: 0.0,
            keywords: 0.0,
        },
        ideal_length: IdealLength::Fixed(6),
        ..RewardConfig::default()
    };
    let r = score_candidate(
        "car stops",
        annt,
        &ScoringContext {
            config: &only_simplicity,
            ..ctx
        },
    )
    .unwrap();
    assert_eq!(r.composite, r.simplicity);

    // cross-entropy and focal loss
    assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], B).unwrap(), 0.0);
    assert_close!(cross_entropy(&[1.0 / 3.0; 3], A).unwrap(), 3f64.ln());
    assert_close!(cross_entropy(&[0.5, 0.25, 0.25], A).unwrap(), 2f64.ln());
    let plain = FocalLossConfig {
        gamma: 0.0,
        alpha: [1.0; 3],
    };
    for dist in [[0.2, 0.3, 0.5], [0.9, 0.05, 0.05], [1.0 / 3.0; 3]] {
        for y in DangerLevel::ALL {
            assert_close!(
                focal_loss(&dist, y, &plain).unwrap(),
                cross_entropy(&dist, y).unwrap(),
                1e-12
            );
        }
    }
    let g2 = FocalLossConfig {
        gamma: 2.0,
        alpha: [1.0; 3],
    };
    assert_eq!(focal_loss(&[0.0, 0.0, 1.0], C, &g2).unwrap(), 0.0);
    assert_close!(
        focal_loss(&[0.5, 0.25, 0.25], A, &g2).unwrap(),
        0.25 * 2f64.ln()
    );
}

// 2. Reward shapes.
fn keywords_scan_oracle(gen: &[String], keywords: &[String], synonyms: &[BTreeSet<String>]) -> f64 {
    if keywords.is_empty() {
        return 0.0;
    }
    let mut total = 0usize;
    for syn in synonyms {
        for s in syn {
            for tok in gen {
                if tok == s {
                    total += 1;
                }
            }
        }
    }
    total as f64 / keywords.len() as f64
}

fn reward_shapes() {
    let cfg = RewardConfig::default();
    for l0 in 1..=40usize {
        let values: Vec<f64> = (0..=4 * l0)
            .map(|l| simplicity_reward(l, l0, &cfg))
            .collect();
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let argmax: Vec<usize> = (0..values.len()).filter(|&l| values[l] == best).collect();
        assert_eq!(argmax, [l0], "L0 = {l0}");
    }

    let ds: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    let ppls: Vec<f64> = (0..20).map(|i| 1.0 + 2.5 * i as f64).collect();
    for (i, &d) in ds.iter().enumerate() {
        for (j, &ppl) in ppls.iter().enumerate() {
            let f = fluency_from_parts(d, ppl);
            assert!((0.0..1.0).contains(&f));
            if j + 1 < ppls.len() {
                assert!(fluency_from_parts(d, ppls[j + 1]) < f, "D {d} PPL {ppl}");
            }
            if i + 1 < ds.len() {
                assert!(fluency_from_parts(ds[i + 1], ppl) > f, "D {d} PPL {ppl}");
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let mut t = EmbeddingTable::new(4).unwrap();
    for w in &words {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..2.0)).collect();
        t.insert(w.clone(), &v).unwrap();
    }
    for _ in 0..50 {
        let len = rng.random_range(1..15);
        let x =
            TokenSequence::from_tokens((0..len).map(|_| words.choose(&mut rng).unwrap().clone()));
        assert_close!(accuracy_reward(&x, &x, &t).unwrap().reward, 2.0);
    }

    for case in 0..200 {
        let nk = rng.random_range(0..5);
        let mut keywords: Vec<String> = words.choose_multiple(&mut rng, nk).cloned().collect();
        keywords.sort();
        let mut synonyms = Vec::new();
        for k in &keywords {
            let mut s: BTreeSet<String> = words
                .iter()
                .filter(|_| rng.random_bool(0.2))
                .cloned()
                .collect();
            s.insert(k.clone());
            synonyms.push(s);
        }
        let len = rng.random_range(0..20);
        let gen: Vec<String> = (0..len)
            .map(|_| words.choose(&mut rng).unwrap().clone())
            .collect();
        let expected = keywords_scan_oracle(&gen, &keywords, &synonyms);
        let set = KeywordSet::explicit(&keywords);
        let map = SynonymMap::from_entries(keywords.iter().cloned().zip(synonyms.clone()), 0.9);
        let got = keywords_reward(&TokenSequence::from_tokens(&gen), &set, &map, false).reward;
        assert_close!(got, expected);
        assert!(close(got, expected, TOL), "case {case}");
    }
}

// 3. GRPO invariants.
fn candidate(composite: f64) -> RewardVector {
    RewardVector {
        simplicity: composite,
        fluency: 0.0,
        accuracy: 0.0,
        keywords: 0.0,
        composite,
        diagnostics: RewardDiagnostics {
            output_length: 1,
            ideal_length: 1,
            perplexity: 1.0,
            ngram_diversity: 1.0,
            cos_sim: 1.0,
            mta: 1.0,
            keyword_counts: Vec::new(),
        },
    }
}

fn group_of(rewards: &[f64]) -> CandidateGroup {
    let mut g = CandidateGroup::new("p");
    for (i, r) in rewards.iter().enumerate() {
        g.push(format!("c{i}"), candidate(*r));
    }
    g
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

fn grpo_invariants() {
    let eps = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let g = rng.random_range(1..=16usize);
        let scale = 10f64.powi(rng.random_range(-3..4));
        let rewards: Vec<f64> = (0..g)
            .map(|_| rng.random_range(-5.0..5.0) * scale)
            .collect();
        let adv = group_advantages(&group_of(&rewards), eps).unwrap();
        let n = g as f64;
        if adv.group_std > 0.0 && g > 1 {
            let mean = adv.advantages.iter().sum::<f64>() / n;
            let var = adv
                .advantages
                .iter()
                .map(|a| (a - mean).powi(2))
                .sum::<f64>()
                / n;
            assert!(mean.abs() <= TOL, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() <= TOL, "std {}", var.sqrt());
        } else {
            assert!(adv.advantages.iter().all(|a| *a == 0.0));
        }

        let c = rng.random_range(-3.0..3.0);
        let shifted: Vec<f64> = rewards.iter().map(|r| r + c).collect();
        let adv_s = group_advantages(&group_of(&shifted), eps).unwrap();
        for (a, b) in adv.advantages.iter().zip(&adv_s.advantages) {
            assert!((a - b).abs() <= TOL, "shift by {c}: {a} vs {b}");
        }

        let k = rng.random_range(0.01..100.0);
        let scaled: Vec<f64> = rewards.iter().map(|r| r * k).collect();
        let adv_k = group_advantages(&group_of(&scaled), eps).unwrap();
        assert_eq!(argsort(&adv.advantages), argsort(&adv_k.advantages));
        assert_eq!(argsort(&adv.advantages), argsort(&rewards));
    }
    for g in [1usize, 4] {
        let adv = group_advantages(&group_of(&vec![0.7; g]), eps).unwrap();
        assert_eq!(adv.advantages, vec![0.0; g]);
    }
}

// 4. Analytic blended-loss gradients against central finite differences.
fn reference_loss(
    clf: &MlpClassifier,
    batch: &[(Vec<f64>, DangerLevel)],
    loss: &BlendedLoss,
) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(x, y)| {
            let p = clf.forward(x).unwrap();
            let ce = cross_entropy(&p, *y).unwrap();
            let fl = focal_loss(&p, *y, &loss.focal).unwrap();
            loss.lambda * ce + (1.0 - loss.lambda) * fl
        })
        .sum();
    total / batch.len() as f64
}

fn gradient_check() {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for net in 0..20 {
        let input = rng.random_range(1..=4);
        let hidden: Vec<usize> = (0..rng.random_range(0..=2))
            .map(|_| rng.random_range(1..=8))
            .collect();
        let mut clf = MlpClassifier::random(input, &hidden, 1.0, &mut rng).unwrap();
        let loss = BlendedLoss {
            focal: FocalLossConfig {
                gamma: rng.random_range(0.0..3.0),
                alpha: [0; 3].map(|_| rng.random_range(0.1..1.0)),
            },
            lambda: rng.random_range(0.0..=1.0),
        };
        let batch: Vec<(Vec<f64>, DangerLevel)> = (0..rng.random_range(1..=5))
            .map(|_| {
                let x = (0..input).map(|_| rng.random_range(-2.0..2.0)).collect();
                (x, DangerLevel::ALL[rng.random_range(0..3)])
            })
            .collect();

        let analytic = loss_gradients(&clf, &batch, &loss).unwrap();
        assert_close!(analytic.loss, reference_loss(&clf, &batch, &loss), 1e-12);
        let grad = analytic.gradients.flatten();
        let params = clf.params();
        assert_eq!(grad.len(), params.len());
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] = params[i] + h;
            clf.set_params(&p).unwrap();
            let up = reference_loss(&clf, &batch, &loss);
            p[i] = params[i] - h;
            clf.set_params(&p).unwrap();
            let down = reference_loss(&clf, &batch, &loss);
            clf.set_params(&params).unwrap();
            let numeric = (up - down) / (2.0 * h);
            // Below 1e-6 in magnitude the difference quotient is dominated by
            // round-off, so the comparison falls back to an absolute 1e-10.
            let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(
                rel < 1e-4,
                "net {net} param {i}: analytic {} numeric {numeric}",
                grad[i]
            );
        }
    }
    println!("    worst relative gradient error {worst:.2e}");
}

// 5. Trigger policy exhaustiveness.
fn majority_oracle(w: &[DangerLevel]) -> bool {
    let current = w[w.len() - 1];
    let elevated = w.iter().filter(|l| **l != A).count();
    current == C || (current == B && elevated * 2 > w.len())
}

fn trigger_exhaustiveness() {
    let policy = TriggerPolicyConfig::default();
    assert_eq!(policy.window, 3);
    let windows: Vec<Vec<DangerLevel>> = (0..81usize)
        .map(|code| {
            (0..4)
                .map(|k| DangerLevel::ALL[code / 3usize.pow(k) % 3])
                .collect()
        })
        .collect();
    let mut fired = 0;
    for w in &windows {
        let d = decide_trigger(w, &policy).unwrap();
        assert_eq!(d, majority_oracle(w), "{w:?}");
        if w[3] == A {
            assert!(!d, "{w:?}");
        }
        if d {
            fired += 1;
            for i in 0..4 {
                for up in DangerLevel::ALL.into_iter().filter(|l| *l > w[i]) {
                    let mut raised = w.clone();
                    raised[i] = up;
                    assert!(
                        decide_trigger(&raised, &policy).unwrap(),
                        "{w:?} -> {raised:?}"
                    );
                }
            }
        }
    }
    assert!(fired > 0 && fired < 81);

    // Padded windows [h3 h2 h1 current]:
    //   f0 A: never          f5 A: never
    //   f1 [A A A B]: 1/4    f6 [A C A B]: 2/4, tie
    //   f2 [A A B B]: 2/4    f7 [C A B B]: 3/4, fires
    //   f3 A: never          f8 [A B B B]: 3/4, fires
    //   f4 C: fires          f9 A: never
    let levels = [A, B, B, A, C, A, B, B, B, A];
    let frames: Vec<FrameRecord> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| FrameRecord::new(format!("f{i}")).with_prediction(*l))
        .collect();
    let d = simulate_stream(&frames, None, &policy).unwrap();
    let fired: Vec<&str> = d
        .iter()
        .filter(|d| d.trigger)
        .map(|d| d.frame_id.as_str())
        .collect();
    assert_eq!(fired, ["f4", "f7", "f8"]);
}

// 6. ROUGE against brute force, TRF hand example.
fn clipped_overlap_oracle(gen: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let grams = |s: &[String]| -> Vec<Vec<String>> {
        if s.len() < n {
            Vec::new()
        } else {
            s.windows(n).map(<[String]>::to_vec).collect()
        }
    };
    let g = grams(gen);
    let mut pool = grams(reference);
    let total_ref = pool.len();
    let mut overlap = 0;
    for gram in &g {
        if let Some(pos) = pool.iter().position(|r| r == gram) {
            pool.swap_remove(pos);
            overlap += 1;
        }
    }
    (overlap, g.len(), total_ref)
}

fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let is_subsequence = |sub: &[&String]| {
        let mut it = b.iter();
        sub.iter().all(|x| it.any(|y| y == *x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| &a[i])
            .collect();
        if sub.len() > best && is_subsequence(&sub) {
            best = sub.len();
        }
    }
    best
}

fn f1_oracle(overlap: usize, gen_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / gen_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

fn metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vocab = ["a", "b", "c", "d", "e"];
    let random_tokens = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.random_range(0..=12);
        (0..len)
            .map(|_| vocab.choose(rng).unwrap().to_string())
            .collect()
    };
    for _ in 0..200 {
        let g = random_tokens(&mut rng);
        let r = random_tokens(&mut rng);
        let (gs, rs) = (
            TokenSequence::from_tokens(&g),
            TokenSequence::from_tokens(&r),
        );
        for n in 1..=3 {
            let (o, gt, rt) = clipped_overlap_oracle(&g, &r, n);
            let score = rouge_n(&gs, &rs, n).unwrap();
            assert_close!(score.f1, f1_oracle(o, gt, rt));
            if gt > 0 {
                assert_close!(score.precision, o as f64 / gt as f64);
            }
        }
        let l = lcs_oracle(&g, &r);
        assert_eq!(lcs_length(&g, &r), l);
        assert_close!(rouge_l(&gs, &rs).f1, f1_oracle(l, g.len(), r.len()));
    }
    assert!((trf_score(&[A, A, A], &[A, B, C]).unwrap() - 0.16667).abs() <= 1e-5);
}

// 7. Classifier training on separable blobs.
fn blobs(seed: u64) -> Vec<(Vec<f64>, DangerLevel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[0.0, 3.0], [-2.6, -1.5], [2.6, -1.5]];
    (0..300)
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

/// Scans directions in 0.5 degree steps for a line that separates the two
/// classes with a strict gap.
fn pairwise_separable(data: &[(Vec<f64>, DangerLevel)], a: DangerLevel, b: DangerLevel) -> bool {
    (0..720).any(|step| {
        let t = (step as f64 * 0.5).to_radians();
        let proj = |l: DangerLevel| -> Vec<f64> {
            data.iter()
                .filter(|(_, y)| *y == l)
                .map(|(x, _)| x[0] * t.cos() + x[1] * t.sin())
                .collect()
        };
        let max_a = proj(a).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let min_b = proj(b).into_iter().fold(f64::INFINITY, f64::min);
        max_a < min_b
    })
}

fn ead_training() {
    let data = blobs(7);
    assert_eq!(data.len(), 300);
    for (a, b) in [(A, B), (A, C), (B, C)] {
        assert!(pairwise_separable(&data, a, b), "{a} / {b} not separable");
    }
    let cfg = TrainConfig::default();
    assert_eq!(cfg.epochs, 4);
    let trained = train_classifier(&data, &cfg).unwrap();
    let acc = trained.final_accuracy().unwrap();
    println!(
        "    final accuracy {acc}, loss history {:?}",
        trained.history.iter().map(|s| s.loss).collect::<Vec<_>>()
    );
    assert!(acc >= 0.95, "accuracy {acc}");
    for w in trained.history.windows(2) {
        assert!(w[1].loss <= w[0].loss, "loss rose: {:?}", trained.history);
    }
}

// 8. End-to-end determinism and error isolation through the binary.
const WORDS: [&str; 24] = [
    "car", "vehicle", "bus", "stops", "ahead", "left", "right", "crossing", "light", "red",
    "green", "the", "a", "is", "at", "near", "curb", "step", "stairs", "door", "open", "person",
    "bike", "wait",
];

fn write_fixtures(dir: &Path, malformed_every: Option<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut emb = format!("{} 6\n", WORDS.len());
    for w in WORDS {
        let v: Vec<String> = (0..6)
            .map(|_| format!("{:.4}", rng.random_range(-1.0..1.0)))
            .collect();
        emb.push_str(&format!("{w} {}\n", v.join(" ")));
    }
    fs::write(dir.join("emb.txt"), emb).unwrap();

    let mut samples = String::new();
    let mut single = String::new();
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        let len = rng.random_range(3..10);
        (0..len)
            .map(|_| *WORDS.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for i in 0..100 {
        if malformed_every.is_some_and(|k| i % k == k - 1) {
            samples.push_str(&format!("{{\"id\": \"s{i}\", \"reference\": \n"));
            continue;
        }
        let reference = sentence(&mut rng);
        let candidates: Vec<String> = (0..4).map(|_| sentence(&mut rng)).collect();
        let group = format!("g{}", i / 2);
        let rec = serde_json::json!({
            "id": format!("s{i}"),
            "reference": reference,
            "candidates": candidates,
            "group_id": group,
        });
        samples.push_str(&format!("{rec}\n"));
        let rec = serde_json::json!({"id": format!("s{i}"), "reference": reference, "candidates": [candidates[0]]});
        single.push_str(&format!("{rec}\n"));
    }
    fs::write(dir.join("samples.jsonl"), samples).unwrap();
    fs::write(dir.join("single.jsonl"), single).unwrap();
}

fn walkguard(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_walkguard"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    out.status.code().expect("terminated by signal")
}

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    assert_eq!(
        walkguard(
            dir,
            &[
                "score",
                "--samples",
                "samples.jsonl",
                "--embeddings",
                "emb.txt",
                "--out",
                "score"
            ]
        ),
        0
    );
    assert_eq!(
        walkguard(
            dir,
            &[
                "advantages",
                "--scores",
                "score/scores.csv",
                "--group-size",
                "8",
                "--out",
                "adv"
            ]
        ),
        0
    );
    assert_eq!(
        walkguard(
            dir,
            &[
                "evaluate",
                "--samples",
                "single.jsonl",
                "--embeddings",
                "emb.txt",
                "--out",
                "eval"
            ]
        ),
        0
    );
    let mut files = Vec::new();
    for sub in ["score", "adv", "eval"] {
        let mut names: Vec<_> = fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        names.sort();
        for p in names {
            let name = p.strip_prefix(dir).unwrap().display().to_string();
            files.push((name, fs::read(&p).unwrap()));
        }
    }
    files
}

fn end_to_end() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            write_fixtures(dir.path(), None);
            pipeline(dir.path())
        })
        .collect();
    assert_eq!(
        runs[0].len(),
        7,
        "{:?}",
        runs[0].iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs between runs", a.0);
    }
    let scores = &runs[0]
        .iter()
        .find(|f| f.0.ends_with("scores.csv"))
        .unwrap()
        .1;
    assert_eq!(scores.iter().filter(|b| **b == b'\n').count(), 1 + 400);

    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path(), Some(20));
    let code = walkguard(
        dir.path(),
        &[
            "score",
            "--samples",
            "samples.jsonl",
            "--embeddings",
            "emb.txt",
            "--out",
            "o",
        ],
    );
    assert_eq!(code, 1);
    let errors = fs::read_to_string(dir.path().join("o/errors.jsonl")).unwrap();
    let lines: Vec<u64> = errors
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["line"]
                .as_u64()
                .unwrap()
        })
        .collect();
    assert_eq!(lines, [20, 40, 60, 80, 100]);
    let mut rdr = csv::Reader::from_path(dir.path().join("o/scores.csv")).unwrap();
    let ids: BTreeSet<String> = rdr.records().map(|r| r.unwrap()[0].to_owned()).collect();
    let expected: BTreeSet<String> = (0..100)
        .filter(|i| i % 20 != 19)
        .map(|i| format!("s{i}"))
        .collect();
    assert_eq!(ids, expected);
}

fn main() {
    let criteria: [(&str, u64, fn()); 8] = [
        ("equation oracles", 1, equation_oracles),
        ("reward shapes", 5, reward_shapes),
        ("GRPO invariants", 5, grpo_invariants),
        ("gradient check", 10, gradient_check),
        ("trigger exhaustiveness", 1, trigger_exhaustiveness),
        ("metric oracles", 5, metric_oracles),
        ("EAD mini-training", 30, ead_training),
        ("end-to-end determinism", 30, end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, budget, body)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(body));
        let elapsed = start.elapsed();
        let budget = Duration::from_secs(budget);
        let verdict = match (&outcome, elapsed <= budget) {
            (Ok(()), true) => "PASS",
            (Ok(()), false) => "FAIL (over time budget)",
            (Err(_), _) => "FAIL",
        };
        if verdict != "PASS" {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {verdict} in {:.3}s (budget {}s)",
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
