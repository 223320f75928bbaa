//! Reward engineering and trigger-timing toolkit for walking-assistance
//! text generation.
//!
//! - [`text`]: tokenization, n-gram statistics, keyword extraction
//! - [`lm`]: token scorers and perplexity, with an add-alpha bigram model
//! - [`embed`]: embedding table, cosine similarity, synonym sets
//! - [`rewards`]: simplicity, fluency, accuracy and keyword rewards
//! - [`grpo`]: group-relative advantages and reward telemetry
//! - [`ead`]: danger classification, focal-loss training, trigger policy
//! - [`metrics`]: ROUGE, keyword density, temporal-redundancy F1

pub mod ead;
pub mod embed;
pub mod error;
pub mod grpo;
pub mod lm;
pub mod metrics;
pub mod rewards;
pub mod text;

pub use ead::{
    decide_trigger, simulate_stream, train_classifier, BlendedLoss, DangerLevel, FocalLossConfig,
    FrameRecord, FrameScorer, MlpClassifier, TrainConfig, TriggerDecision, TriggerPolicyConfig,
    TriggerRule,
};
pub use embed::{cosine_similarity, load_embeddings, EmbeddingTable, SynonymMap};
pub use error::{Component, Error, Result};
pub use grpo::{
    group_advantages, reward_statistics, summarize_rewards, AdvantageVector, CandidateGroup,
    TelemetryRecord, TelemetrySeries,
};
pub use lm::{perplexity, BigramModel, TokenLogProbs, TokenScorer};
pub use metrics::{rouge_l, rouge_n, trf_score, ConfusionTable3, RougeScore};
pub use rewards::{score_candidate, RewardConfig, RewardVector, RewardWeights, ScoringContext};
pub use text::{tokenize, KeywordSet, StopWords, TokenSequence};
