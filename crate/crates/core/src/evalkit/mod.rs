//! Ranking metrics, the fold-in evaluation protocol, a synthetic block-model
//! fixture and the experiment runner.

pub mod experiment;
mod fixture;
mod metrics;
mod protocol;

pub use fixture::{make_fixture, Fixture, SyntheticFixture};
pub use metrics::{ndcg_at_k, recall_at_k};
pub use protocol::{
    evaluate_model, validation_ndcg, FoldInConfig, MetricReport, MetricSummary, Scorer,
    UserMetrics, Validation,
};

/// SplitMix64 finalizer, used to derive independent per-user seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
