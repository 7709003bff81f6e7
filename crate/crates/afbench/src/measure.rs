//! False-positive, adaptivity, distribution and throughput measurements.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use adaptive_filters::Filter;

use crate::workload::NEGATIVE_TAG;
use crate::BenchError;

/// False-positive counts over one stream, split by first-vs-repeat
/// occurrences of each key.
#[derive(Debug, Clone, PartialEq)]
pub struct FprReport {
    pub queries: u64,
    pub false_positives: u64,
    pub unique_queries: u64,
    pub unique_false_positives: u64,
    pub repeat_false_positives: u64,
    pub overall_fpr: f64,
    pub unique_fpr: f64,
    pub repeat_fpr: f64,
}

/// Drive `stream` through the adaptive query path and count false
/// positives. Stream keys must be disjoint from the member set; every
/// `Present` verdict is therefore a false positive.
pub fn measure_fpr(
    filter: &mut dyn Filter,
    stream: &[u64],
    members: &HashSet<u64>,
) -> Result<FprReport, BenchError> {
    if stream.is_empty() {
        return Err(BenchError::InvalidStream("empty query stream"));
    }
    if stream.iter().any(|k| members.contains(k)) {
        return Err(BenchError::InvalidStream("stream queries a stored key"));
    }
    let mut seen = HashSet::with_capacity(stream.len());
    let mut fp = 0u64;
    let mut unique_fp = 0u64;
    let mut repeat_fp = 0u64;
    let mut repeats = 0u64;
    for &key in stream {
        let first = seen.insert(key);
        if !first {
            repeats += 1;
        }
        let out = filter.query(key);
        if out.is_present() {
            fp += 1;
            if first {
                unique_fp += 1;
            } else {
                repeat_fp += 1;
            }
        }
    }
    let uniques = seen.len() as u64;
    Ok(FprReport {
        queries: stream.len() as u64,
        false_positives: fp,
        unique_queries: uniques,
        unique_false_positives: unique_fp,
        repeat_false_positives: repeat_fp,
        overall_fpr: fp as f64 / stream.len() as f64,
        unique_fpr: unique_fp as f64 / uniques as f64,
        repeat_fpr: if repeats == 0 {
            0.0
        } else {
            repeat_fp as f64 / repeats as f64
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundsReport {
    /// False-positive rate of each completed round.
    pub per_round_fpr: Vec<f64>,
    /// FPR of the last round (0.0 if no rounds ran).
    pub final_round_fpr: f64,
    /// Surviving query-set size after each round.
    pub survivors: Vec<u64>,
}

/// The adversarial-rounds procedure: rounds of 10 subrounds, each subround
/// querying every surviving member of `q` through the adaptive path. After
/// a round, every key that was never a false positive in it is dropped.
/// Stops when `|Q|/set_size <= 0.01` or after `max_rounds` rounds.
pub fn adversarial_rounds(
    filter: &mut dyn Filter,
    q0: Vec<u64>,
    set_size: u64,
    max_rounds: usize,
) -> RoundsReport {
    const SUBROUNDS: usize = 10;
    let mut q = q0;
    let mut per_round_fpr = Vec::new();
    let mut survivors = Vec::new();
    for _ in 0..max_rounds {
        if q.is_empty() {
            break;
        }
        let mut fp_this_round = vec![false; q.len()];
        let mut fp_count = 0u64;
        let queries = (q.len() * SUBROUNDS) as u64;
        for _ in 0..SUBROUNDS {
            for (i, &key) in q.iter().enumerate() {
                if filter.query(key).is_present() {
                    fp_this_round[i] = true;
                    fp_count += 1;
                }
            }
        }
        per_round_fpr.push(fp_count as f64 / queries as f64);
        q = q
            .into_iter()
            .zip(fp_this_round)
            .filter_map(|(k, was_fp)| was_fp.then_some(k))
            .collect();
        survivors.push(q.len() as u64);
        if (q.len() as f64) <= 0.01 * set_size as f64 {
            break;
        }
    }
    RoundsReport {
        final_round_fpr: per_round_fpr.last().copied().unwrap_or(0.0),
        per_round_fpr,
        survivors,
    }
}

/// One tail cell of the selector-distribution check.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCell {
    pub k: u32,
    pub bound: f64,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistReport {
    /// (1 - eps/n)^(unique_queries) with n = stored elements, as specified.
    pub expected_p0: f64,
    /// Same quantity with the slot count in the collision term; the
    /// physically exact prediction for a filter below load 1.0.
    pub expected_p0_slot_exact: f64,
    pub observed_p0: f64,
    /// Per-run binomial standard deviation of the p0 estimator.
    pub sigma: f64,
    pub p0_pass: bool,
    pub tail: Vec<TailCell>,
    pub pass: bool,
}

/// Compare a pooled selector histogram against the geometric-decay
/// predictions: P(v=0) within `p0_sigmas` per-run standard deviations, and
/// P(v=k) for k in 1..=3 below the closed-form tail bound
/// `eps^k * sum_{i<=k} c^i/i!` times `tail_slack`.
#[allow(clippy::too_many_arguments)]
pub fn selector_distribution_check(
    histogram: &[u64],
    n_elements: u64,
    nslots: u64,
    unique_queries: u64,
    epsilon: f64,
    runs: u64,
    p0_sigmas: f64,
    tail_slack: f64,
) -> DistReport {
    let total: u64 = histogram.iter().sum();
    assert_eq!(total, n_elements * runs, "histogram must cover all elements");
    let c = unique_queries as f64 / n_elements as f64;
    let expected_p0 = (1.0 - epsilon / n_elements as f64).powf(unique_queries as f64);
    let expected_p0_slot_exact = (1.0 - epsilon / nslots as f64).powf(unique_queries as f64);
    let observed_p0 = histogram[0] as f64 / total as f64;
    let sigma = (expected_p0 * (1.0 - expected_p0) / n_elements as f64).sqrt();
    let p0_pass = (observed_p0 - expected_p0).abs() <= p0_sigmas * sigma;
    let mut tail = Vec::new();
    let mut pass = p0_pass;
    for k in 1..=3u32 {
        // eps^k * sum_{i=1..k} c^i / i!
        let mut sum = 0.0;
        let mut term = 1.0;
        for i in 1..=k {
            term *= c / i as f64;
            sum += term;
        }
        let bound = epsilon.powi(k as i32) * sum;
        let observed = histogram.get(k as usize).copied().unwrap_or(0) as f64 / total as f64;
        let cell_pass = observed <= bound * tail_slack;
        pass &= cell_pass;
        tail.push(TailCell {
            k,
            bound,
            observed,
            pass: cell_pass,
        });
    }
    DistReport {
        expected_p0,
        expected_p0_slot_exact,
        observed_p0,
        sigma,
        p0_pass,
        tail,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub load: f64,
    pub insert_ops_per_sec: f64,
    pub query_ops_per_sec: f64,
}

/// Wall-clock inserts/sec and queries/sec at each load point; best of
/// `runs` passes. `remote_delay` spins after every operation that touches
/// the remote store (inserts always do; queries do on a `Present` verdict),
/// to illustrate how filtering saves remote accesses. Zero disables it.
pub fn throughput(
    make: &mut dyn FnMut() -> Box<dyn Filter>,
    member_seed: u64,
    stream: &[u64],
    loads: &[f64],
    runs: u32,
    remote_delay: Duration,
    adaptive_remote: bool,
) -> Result<Vec<ThroughputRow>, BenchError> {
    if stream.is_empty() {
        return Err(BenchError::InvalidStream("empty query stream"));
    }
    if runs == 0 {
        return Err(BenchError::InvalidSpec("runs must be positive".into()));
    }
    let mut rows = Vec::new();
    for &load in loads {
        let mut best_insert = 0.0f64;
        let mut best_query = 0.0f64;
        for run in 0..runs {
            let mut filter = make();
            let keys =
                crate::workload::member_keys((filter.nslots() as f64 * load) as u64, member_seed + run as u64);
            let t0 = Instant::now();
            for &k in &keys {
                filter.insert(k).map_err(BenchError::Filter)?;
                if !remote_delay.is_zero() && adaptive_remote {
                    spin(remote_delay);
                }
            }
            let insert_secs = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let mut present = 0u64;
            for &k in stream {
                if filter.query(k).is_present() {
                    present += 1;
                    if !remote_delay.is_zero() && adaptive_remote {
                        spin(remote_delay);
                    }
                }
            }
            let query_secs = t1.elapsed().as_secs_f64();
            std::hint::black_box(present);
            best_insert = best_insert.max(keys.len() as f64 / insert_secs);
            best_query = best_query.max(stream.len() as f64 / query_secs);
        }
        rows.push(ThroughputRow {
            load,
            insert_ops_per_sec: best_insert,
            query_ops_per_sec: best_query,
        });
    }
    Ok(rows)
}

fn spin(d: Duration) {
    let t = Instant::now();
    while t.elapsed() < d {
        std::hint::spin_loop();
    }
}

/// Histogram entropy in bits per element: sum of p*log2(1/p).
pub fn histogram_entropy_bits(histogram: &[u64]) -> f64 {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return 0.0;
    }
    histogram
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

/// Sanity guard used by harness entry points: all stream keys must be
/// tagged negatives.
pub fn assert_negative_stream(stream: &[u64]) -> Result<(), BenchError> {
    if stream.iter().any(|k| k & NEGATIVE_TAG == 0) {
        return Err(BenchError::InvalidStream("stream contains member-space keys"));
    }
    Ok(())
}
