//! CSV metrics rows shared by every subcommand.

use std::io::Write;

use crate::BenchError;

/// One measured configuration. Fields that a subcommand does not measure
/// stay at their zero values.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub filter: String,
    pub workload: String,
    pub as_ratio: f64,
    pub load: f64,
    pub epsilon: f64,
    pub observed_fpr: f64,
    pub final_round_fpr: f64,
    pub bits_per_element: f64,
    pub rebuilds: u64,
    pub adapts: u64,
    pub insert_ops_per_sec: f64,
    pub query_ops_per_sec: f64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn new(filter: &str, workload: &str, seed: u64) -> Self {
        MetricsRow {
            filter: filter.to_string(),
            workload: workload.to_string(),
            as_ratio: 0.0,
            load: 0.0,
            epsilon: 0.0,
            observed_fpr: 0.0,
            final_round_fpr: 0.0,
            bits_per_element: 0.0,
            rebuilds: 0,
            adapts: 0,
            insert_ops_per_sec: 0.0,
            query_ops_per_sec: 0.0,
            seed,
        }
    }

    pub const HEADER: &'static str = "filter,workload,as_ratio,load,epsilon,observed_fpr,\
final_round_fpr,bits_per_element,rebuilds,adapts,insert_ops_per_sec,query_ops_per_sec,seed";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.filter,
            self.workload,
            self.as_ratio,
            self.load,
            self.epsilon,
            self.observed_fpr,
            self.final_round_fpr,
            self.bits_per_element,
            self.rebuilds,
            self.adapts,
            self.insert_ops_per_sec,
            self.query_ops_per_sec,
            self.seed
        )
    }
}

/// Write a header plus rows to `out`.
pub fn write_csv(out: &mut dyn Write, rows: &[MetricsRow]) -> Result<(), BenchError> {
    writeln!(out, "{}", MetricsRow::HEADER)?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row_have_matching_arity() {
        let row = MetricsRow::new("taf", "uniform", 1);
        assert_eq!(
            MetricsRow::HEADER.split(',').count(),
            row.to_csv().split(',').count()
        );
    }

    #[test]
    fn csv_is_deterministic() {
        let mut row = MetricsRow::new("exaf", "zipf-approx-firehose", 42);
        row.observed_fpr = 0.0039;
        let mut a = Vec::new();
        write_csv(&mut a, std::slice::from_ref(&row)).unwrap();
        let mut b = Vec::new();
        write_csv(&mut b, std::slice::from_ref(&row)).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().contains("approx-firehose"));
    }
}
