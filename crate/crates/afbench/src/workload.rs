//! Seeded query-stream generators.
//!
//! The zipf and active-set kinds approximate the repetition statistics of
//! the Firehose benchmark's power-law and active-set generators; they are
//! labeled `*-approx-firehose` in CSV output to make clear they are
//! stand-ins, not the real generators.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Zipf};

use crate::BenchError;

/// Query keys carry this bit; member keys never do.
pub const NEGATIVE_TAG: u64 = 1 << 63;

/// `n` distinct member keys (top bit clear), deterministic per seed.
pub fn member_keys(n: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x6d65_6d62_6572); // "member"
    let mut seen = HashSet::with_capacity(n as usize);
    let mut out = Vec::with_capacity(n as usize);
    while (out.len() as u64) < n {
        let k = rng.random::<u64>() & !NEGATIVE_TAG;
        if seen.insert(k) {
            out.push(k);
        }
    }
    out
}

/// `n` distinct negative keys (top bit set) drawn from `rng`.
pub fn fresh_negatives(n: u64, rng: &mut ChaCha12Rng) -> Vec<u64> {
    let mut seen = HashSet::with_capacity(n as usize);
    let mut out = Vec::with_capacity(n as usize);
    while (out.len() as u64) < n {
        let k = rng.random::<u64>() | NEGATIVE_TAG;
        if seen.insert(k) {
            out.push(k);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadKind {
    /// Every unique key queried exactly once.
    UniformNegatives,
    /// Zipf-distributed repetitions over the unique-key support.
    Zipf { s: f64 },
    /// Sliding active set with a mid-pool trending bias. `churn` is the
    /// per-step probability of introducing a fresh key (budgeted so the
    /// stream still contains exactly the requested uniques); `trend_width`
    /// is the active-pool size.
    ActiveSetLike { churn: f64, trend_width: usize },
    /// Initial query set for the adversarial-rounds procedure: same stream
    /// shape as uniform negatives.
    Adversarial,
}

impl WorkloadKind {
    /// CSV label; the Firehose stand-ins are marked as approximations.
    pub fn label(&self) -> &'static str {
        match self {
            WorkloadKind::UniformNegatives => "uniform",
            WorkloadKind::Zipf { .. } => "zipf-approx-firehose",
            WorkloadKind::ActiveSetLike { .. } => "activeset-approx-firehose",
            WorkloadKind::Adversarial => "adversarial",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Number of distinct keys in the stream (the `A` of the A/S ratio).
    pub unique_queries: u64,
    /// Total stream length; ignored by the uniform and adversarial kinds,
    /// which query each unique key once.
    pub stream_len: u64,
    pub seed: u64,
}

/// Generate the query stream for `spec`. Deterministic per seed; the
/// stream contains exactly `unique_queries` distinct keys, all negatives.
pub fn gen_workload(spec: &WorkloadSpec) -> Result<Vec<u64>, BenchError> {
    if spec.unique_queries == 0 {
        return Err(BenchError::InvalidSpec("unique_queries must be positive".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed ^ 0x7175_6572_79); // "query"
    match &spec.kind {
        WorkloadKind::UniformNegatives | WorkloadKind::Adversarial => {
            Ok(fresh_negatives(spec.unique_queries, &mut rng))
        }
        WorkloadKind::Zipf { s } => {
            if spec.stream_len < spec.unique_queries {
                return Err(BenchError::InvalidSpec(
                    "stream_len must be at least unique_queries".into(),
                ));
            }
            let support = fresh_negatives(spec.unique_queries, &mut rng);
            let dist = Zipf::new(spec.unique_queries as f64, *s)
                .map_err(|e| BenchError::InvalidSpec(format!("zipf: {e}")))?;
            let mut stream: Vec<u64> = (0..spec.stream_len)
                .map(|_| {
                    let rank = dist.sample(&mut rng) as usize;
                    support[rank - 1]
                })
                .collect();
            patch_in_missing_uniques(&mut stream, &support, &mut rng);
            Ok(stream)
        }
        WorkloadKind::ActiveSetLike { churn, trend_width } => {
            if spec.stream_len < spec.unique_queries {
                return Err(BenchError::InvalidSpec(
                    "stream_len must be at least unique_queries".into(),
                ));
            }
            if *trend_width == 0 {
                return Err(BenchError::InvalidSpec("trend_width must be positive".into()));
            }
            Ok(active_set_stream(spec, *churn, *trend_width, &mut rng))
        }
    }
}

/// The zipf tail may leave a handful of support keys unsampled; swap them
/// over the stream's final duplicates so the unique count stays exact.
fn patch_in_missing_uniques(stream: &mut [u64], support: &[u64], rng: &mut ChaCha12Rng) {
    let present: HashSet<u64> = stream.iter().copied().collect();
    let mut missing: Vec<u64> = support.iter().copied().filter(|k| !present.contains(k)).collect();
    if missing.is_empty() {
        return;
    }
    let mut seen = HashSet::new();
    for slot in (0..stream.len()).rev() {
        if missing.is_empty() {
            break;
        }
        if !seen.insert(stream[slot]) {
            // A duplicate occurrence: safe to overwrite.
            let idx = rng.random_range(0..missing.len());
            stream[slot] = missing.swap_remove(idx);
        }
    }
    assert!(missing.is_empty(), "stream too short to host all unique keys");
}

fn active_set_stream(
    spec: &WorkloadSpec,
    churn: f64,
    trend_width: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<u64> {
    let len = spec.stream_len;
    let uniques = spec.unique_queries;
    let mut pool: VecDeque<u64> = VecDeque::with_capacity(trend_width);
    let mut taken = HashSet::new();
    let mut introduced = 0u64;
    let mut stream = Vec::with_capacity(len as usize);
    for t in 0..len {
        let remaining_steps = len - t;
        let remaining_intros = uniques - introduced;
        let forced = remaining_intros >= remaining_steps || pool.is_empty();
        let paced = churn.max(remaining_intros as f64 / remaining_steps as f64);
        let introduce =
            remaining_intros > 0 && (forced || rng.random::<f64>() < paced);
        if introduce {
            let key = loop {
                let k = rng.random::<u64>() | NEGATIVE_TAG;
                if taken.insert(k) {
                    break k;
                }
            };
            pool.push_back(key);
            if pool.len() > trend_width {
                pool.pop_front();
            }
            introduced += 1;
            stream.push(key);
        } else {
            // Triangular position sampling: keys in the middle of the pool
            // trend hottest, mimicking the bell-shaped popularity curve.
            let a = rng.random_range(0..pool.len());
            let b = rng.random_range(0..pool.len());
            stream.push(pool[(a + b) / 2]);
        }
    }
    debug_assert_eq!(introduced, uniques);
    stream
}
