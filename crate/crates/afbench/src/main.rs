//! Benchmark CLI: reproduces the library's false-positive, adversarial,
//! distribution, space and throughput experiments at desk scale, emitting
//! one CSV row per measured configuration.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use adaptive_filters::coder::{decode_selectors, encode_selectors, SelectorModel};
use adaptive_filters::rsqf::{rank, select};
use afbench::measure::{
    adversarial_rounds, assert_negative_stream, histogram_entropy_bits, measure_fpr,
    selector_distribution_check, throughput,
};
use afbench::metrics::{write_csv, MetricsRow};
use afbench::workload::{gen_workload, WorkloadKind, WorkloadSpec};
use afbench::{fill_to_load, make_filter, BenchError, Filter};

#[derive(Parser)]
#[command(name = "afbench", version, about = "Adaptive-filter benchmark harness")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Filter variant: taf | exaf | rsqf | utaf | uexaf.
    #[arg(long, default_value = "taf")]
    filter: String,
    /// log2 of the slot count.
    #[arg(long, default_value_t = 16)]
    qbits: u32,
    /// Remainder bits; the design FPP is 2^-rbits.
    #[arg(long, default_value_t = 8)]
    rbits: u32,
    /// Fill the filter to this load factor before measuring.
    #[arg(long, default_value_t = 0.95)]
    load: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent repetitions, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct WorkloadArgs {
    /// uniform | zipf | activeset | adversarial.
    #[arg(long, default_value = "uniform")]
    workload: String,
    /// Unique queries as a multiple of the stored-set size (A/S).
    #[arg(long, default_value_t = 1.0)]
    as_ratio: f64,
    /// Zipf exponent for --workload zipf.
    #[arg(long, default_value_t = 1.0)]
    zipf_s: f64,
    /// Total stream length for repeating workloads.
    #[arg(long, default_value_t = 1_000_000)]
    stream_len: u64,
    /// Active-set churn probability per step (0 = paced by A alone).
    #[arg(long, default_value_t = 0.0)]
    churn: f64,
    /// Active-set pool width.
    #[arg(long, default_value_t = 256)]
    trend_width: usize,
    /// Replay a workload file (one decimal 64-bit key per line).
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// False-positive rates over a query stream (adaptive query path).
    Fpr(WorkloadArgs),
    /// Adversarial rounds: repeatedly re-query surviving false positives.
    Adversarial {
        /// Initial |Q|/|S| ratio.
        #[arg(long, default_value_t = 10.0)]
        as_ratio: f64,
        #[arg(long, default_value_t = 8)]
        max_rounds: usize,
    },
    /// Selector-value distribution check after c*n unique negatives.
    Dist {
        /// The c in "c*n unique queries".
        #[arg(long, default_value_t = 4.0)]
        as_ratio: f64,
    },
    /// Space accounting and adaptivity-metadata entropy after c*n uniques.
    Space {
        #[arg(long, default_value_t = 4.0)]
        as_ratio: f64,
    },
    /// Insert/query throughput across a load grid.
    Throughput {
        #[command(flatten)]
        workload: WorkloadArgs,
        /// Comma-separated load grid.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.65, 0.8, 0.95])]
        loads: Vec<f64>,
        /// Simulated remote-access penalty per insert and per positive
        /// query, in nanoseconds (illustrative; default off).
        #[arg(long, default_value_t = 0)]
        remote_delay_ns: u64,
    },
    /// Quick internal sanity checks; exits nonzero on failure.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("afbench: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    let rows = match &cli.cmd {
        Cmd::Fpr(w) => cmd_fpr(&cli.common, w)?,
        Cmd::Adversarial { as_ratio, max_rounds } => {
            cmd_adversarial(&cli.common, *as_ratio, *max_rounds)?
        }
        Cmd::Dist { as_ratio } => cmd_dist(&cli.common, *as_ratio)?,
        Cmd::Space { as_ratio } => cmd_space(&cli.common, *as_ratio)?,
        Cmd::Throughput { workload, loads, remote_delay_ns } => {
            cmd_throughput(&cli.common, workload, loads, *remote_delay_ns)?
        }
        Cmd::Selftest => return cmd_selftest(),
    };
    emit(&cli.common, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn emit(common: &Common, rows: &[MetricsRow]) -> Result<(), BenchError> {
    match &common.csv {
        Some(path) => {
            let mut f = File::create(path)?;
            write_csv(&mut f, rows)?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&mut lock, rows)?;
        }
    }
    Ok(())
}

fn parse_kind(w: &WorkloadArgs) -> Result<WorkloadKind, BenchError> {
    Ok(match w.workload.as_str() {
        "uniform" => WorkloadKind::UniformNegatives,
        "zipf" => WorkloadKind::Zipf { s: w.zipf_s },
        "activeset" => WorkloadKind::ActiveSetLike {
            churn: w.churn,
            trend_width: w.trend_width,
        },
        "adversarial" => WorkloadKind::Adversarial,
        other => {
            return Err(BenchError::InvalidSpec(format!(
                "unknown workload {other:?}; expected uniform|zipf|activeset|adversarial"
            )))
        }
    })
}

fn load_replay(path: &PathBuf) -> Result<Vec<u64>, BenchError> {
    let f = File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let key: u64 = t.parse().map_err(|e| {
            BenchError::InvalidSpec(format!("{}:{}: bad key: {e}", path.display(), lineno + 1))
        })?;
        out.push(key);
    }
    Ok(out)
}

/// Build the query stream for one run: either a replay file or a
/// generated workload with A = as_ratio * |S| unique keys.
fn build_stream(
    w: &WorkloadArgs,
    set_size: u64,
    seed: u64,
) -> Result<(Vec<u64>, String, f64), BenchError> {
    if let Some(path) = &w.replay {
        let stream = load_replay(path)?;
        if stream.is_empty() {
            return Err(BenchError::InvalidStream("replay file holds no keys"));
        }
        let uniques = stream.iter().collect::<HashSet<_>>().len() as f64;
        return Ok((stream, "replay".into(), uniques / set_size as f64));
    }
    let kind = parse_kind(w)?;
    let unique_queries = (w.as_ratio * set_size as f64).round() as u64;
    let spec = WorkloadSpec {
        kind: kind.clone(),
        unique_queries,
        stream_len: w.stream_len,
        seed,
    };
    let stream = gen_workload(&spec)?;
    assert_negative_stream(&stream)?;
    Ok((
        stream,
        kind.label().into(),
        unique_queries as f64 / set_size as f64,
    ))
}

fn base_row(common: &Common, filter: &dyn Filter, workload: &str, seed: u64) -> MetricsRow {
    let stats = filter.stats();
    let mut row = MetricsRow::new(filter.name(), workload, seed);
    row.load = stats.load;
    row.epsilon = (0.5f64).powi(common.rbits as i32);
    row.bits_per_element = stats.bits_per_element;
    row.rebuilds = stats.rebuilds;
    row.adapts = stats.adapts;
    row
}

fn cmd_fpr(common: &Common, w: &WorkloadArgs) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rows = Vec::new();
    for run in 0..common.runs {
        let seed = common.seed + run;
        let mut filter = make_filter(&common.filter, common.qbits, common.rbits, seed)?;
        let members: HashSet<u64> = fill_to_load(filter.as_mut(), common.load, seed)?
            .into_iter()
            .collect();
        let (stream, label, as_ratio) = build_stream(w, members.len() as u64, seed)?;
        let report = measure_fpr(filter.as_mut(), &stream, &members)?;
        eprintln!(
            "fpr[{}] seed={seed} queries={} fp={} overall={:.6} unique={:.6} repeat={:.6}",
            filter.name(),
            report.queries,
            report.false_positives,
            report.overall_fpr,
            report.unique_fpr,
            report.repeat_fpr
        );
        let mut row = base_row(common, filter.as_ref(), &label, seed);
        row.as_ratio = as_ratio;
        row.observed_fpr = report.overall_fpr;
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_adversarial(
    common: &Common,
    as_ratio: f64,
    max_rounds: usize,
) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rows = Vec::new();
    for run in 0..common.runs {
        let seed = common.seed + run;
        let mut filter = make_filter(&common.filter, common.qbits, common.rbits, seed)?;
        let members = fill_to_load(filter.as_mut(), common.load, seed)?;
        let set_size = members.len() as u64;
        let q0 = gen_workload(&WorkloadSpec {
            kind: WorkloadKind::Adversarial,
            unique_queries: (as_ratio * set_size as f64).round() as u64,
            stream_len: 0,
            seed,
        })?;
        let report = adversarial_rounds(filter.as_mut(), q0, set_size, max_rounds);
        eprintln!(
            "adversarial[{}] seed={seed} rounds={} final_fpr={:.6} survivors={:?}",
            filter.name(),
            report.per_round_fpr.len(),
            report.final_round_fpr,
            report.survivors
        );
        let mut row = base_row(common, filter.as_ref(), "adversarial", seed);
        row.as_ratio = as_ratio;
        row.final_round_fpr = report.final_round_fpr;
        rows.push(row);
    }
    Ok(rows)
}

/// Fill, drive c*n unique negatives, return the filter plus the observed
/// overall FPR of the drive.
fn drive_uniques(
    common: &Common,
    as_ratio: f64,
    seed: u64,
) -> Result<(Box<dyn Filter>, f64, u64), BenchError> {
    let mut filter = make_filter(&common.filter, common.qbits, common.rbits, seed)?;
    let members: HashSet<u64> = fill_to_load(filter.as_mut(), common.load, seed)?
        .into_iter()
        .collect();
    let unique_queries = (as_ratio * members.len() as f64).round() as u64;
    let stream = gen_workload(&WorkloadSpec {
        kind: WorkloadKind::UniformNegatives,
        unique_queries,
        stream_len: unique_queries,
        seed,
    })?;
    let report = measure_fpr(filter.as_mut(), &stream, &members)?;
    Ok((filter, report.overall_fpr, unique_queries))
}

fn cmd_dist(common: &Common, as_ratio: f64) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rows = Vec::new();
    let mut pooled: Vec<u64> = Vec::new();
    let mut n_elements = 0u64;
    let mut nslots = 0u64;
    let mut unique_queries = 0u64;
    for run in 0..common.runs {
        let seed = common.seed + run;
        let (filter, fpr, uniques) = drive_uniques(common, as_ratio, seed)?;
        let stats = filter.stats();
        if pooled.len() < stats.histogram.len() {
            pooled.resize(stats.histogram.len(), 0);
        }
        for (i, c) in stats.histogram.iter().enumerate() {
            pooled[i] += c;
        }
        n_elements = filter.occupancy();
        nslots = filter.nslots();
        unique_queries = uniques;
        let mut row = base_row(common, filter.as_ref(), "uniform", seed);
        row.as_ratio = as_ratio;
        row.observed_fpr = fpr;
        rows.push(row);
    }
    let epsilon = (0.5f64).powi(common.rbits as i32);
    let report = selector_distribution_check(
        &pooled,
        n_elements,
        nslots,
        unique_queries,
        epsilon,
        common.runs,
        3.0,
        1.25,
    );
    eprintln!(
        "dist[{}] runs={} P(v=0): observed={:.6} expected={:.6} (slot-exact {:.6}) sigma={:.2e} pass={}",
        common.filter,
        common.runs,
        report.observed_p0,
        report.expected_p0,
        report.expected_p0_slot_exact,
        report.sigma,
        report.p0_pass
    );
    for cell in &report.tail {
        eprintln!(
            "dist[{}] P(v={}) observed={:.3e} bound={:.3e} pass={}",
            common.filter, cell.k, cell.observed, cell.bound, cell.pass
        );
    }
    eprintln!("dist[{}] overall: {}", common.filter, if report.pass { "PASS" } else { "FAIL" });
    Ok(rows)
}

fn cmd_space(common: &Common, as_ratio: f64) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rows = Vec::new();
    for run in 0..common.runs {
        let seed = common.seed + run;
        let (filter, fpr, _) = drive_uniques(common, as_ratio, seed)?;
        let stats = filter.stats();
        let entropy = histogram_entropy_bits(&stats.histogram);
        eprintln!(
            "space[{}] seed={seed} bits/elem={:.3} sidecar-entropy={:.4} bits/elem rebuilds={} adapts={}",
            filter.name(),
            stats.bits_per_element,
            entropy,
            stats.rebuilds,
            stats.adapts
        );
        let mut row = base_row(common, filter.as_ref(), "uniform", seed);
        row.as_ratio = as_ratio;
        row.observed_fpr = fpr;
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_throughput(
    common: &Common,
    w: &WorkloadArgs,
    loads: &[f64],
    remote_delay_ns: u64,
) -> Result<Vec<MetricsRow>, BenchError> {
    let seed = common.seed;
    // Stream sized against the largest load point.
    let max_load = loads.iter().copied().fold(0.0f64, f64::max);
    let set_size = ((1u64 << common.qbits) as f64 * max_load) as u64;
    let (stream, label, as_ratio) = build_stream(w, set_size.max(1), seed)?;
    let name = common.filter.clone();
    let (qbits, rbits) = (common.qbits, common.rbits);
    let adaptive = name != "rsqf";
    let mut make = || make_filter(&name, qbits, rbits, seed).expect("filter config already validated");
    let rows = throughput(
        &mut make,
        seed,
        &stream,
        loads,
        common.runs.max(1) as u32,
        Duration::from_nanos(remote_delay_ns),
        adaptive,
    )?;
    Ok(rows
        .into_iter()
        .map(|r| {
            let mut row = MetricsRow::new(&name, &label, seed);
            row.as_ratio = as_ratio;
            row.load = r.load;
            row.epsilon = (0.5f64).powi(common.rbits as i32);
            row.insert_ops_per_sec = r.insert_ops_per_sec;
            row.query_ops_per_sec = r.query_ops_per_sec;
            row
        })
        .collect())
}

fn cmd_selftest() -> Result<ExitCode, BenchError> {
    let mut failures = 0u32;
    let mut check = |name: &str, ok: bool| {
        println!("selftest {name}: {}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // Word-level rank/select against a bit loop.
    let w = 0xdead_beef_0bad_cafe_u64;
    let rank_ok = (0..64).all(|i| rank(w, i) == (0..=i).filter(|&b| w >> b & 1 == 1).count() as u32);
    let select_ok =
        (0..40).all(|k| select(w, k) == (0..64u32).filter(|&b| w >> b & 1 == 1).nth(k as usize));
    check("rank/select vs bit loop", rank_ok && select_ok);

    // Coder roundtrip on a mixed block.
    let mut vals = [0u8; 64];
    vals[1] = 1;
    vals[9] = 2;
    vals[33] = 1;
    let coder_ok = match encode_selectors(&vals, SelectorModel::Fixed256) {
        Ok(code) => decode_selectors(code, SelectorModel::Fixed256) == vals,
        Err(_) => false,
    };
    check("selector coder roundtrip", coder_ok);

    // No false negatives through fill and adapt traffic.
    let mut fn_ok = true;
    for filter_name in ["taf", "exaf", "utaf", "uexaf", "rsqf"] {
        let mut f = make_filter(filter_name, 10, 8, 7)?;
        let keys = fill_to_load(f.as_mut(), 0.9, 7)?;
        for i in 0..2_000u64 {
            let _ = f.query(afbench::workload::NEGATIVE_TAG | i);
        }
        fn_ok &= keys.iter().all(|&k| f.lookup(k));
    }
    check("no false negatives after adapt traffic", fn_ok);

    // Fresh-negative FPR lands near the design point for the TAF.
    let mut f = make_filter("taf", 14, 8, 11)?;
    let members: HashSet<u64> = fill_to_load(f.as_mut(), 0.95, 11)?.into_iter().collect();
    let stream = gen_workload(&WorkloadSpec {
        kind: WorkloadKind::UniformNegatives,
        unique_queries: 200_000,
        stream_len: 200_000,
        seed: 11,
    })?;
    let fpr = measure_fpr(f.as_mut(), &stream, &members)?.overall_fpr;
    check("taf fresh FPR within [eps/2, 2eps]", (0.5 / 256.0..=2.0 / 256.0).contains(&fpr));

    if failures == 0 {
        println!("selftest: all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("selftest: {failures} check(s) failed");
        Ok(ExitCode::FAILURE)
    }
}
