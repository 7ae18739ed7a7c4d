//! Per-frame metrics as CSV, one row per frame.

use crate::sim::{MetricsRecord, MetricsSeries};
use std::io::{Read, Write};

pub const METRICS_HEADER: [&str; 9] = [
    "frame",
    "scheme",
    "seed",
    "p_max_dbm",
    "embb_throughput_bps",
    "worst_urllc_latency_s",
    "avg_queue_bits",
    "reward",
    "feasible",
];

/// Writes the header even for an empty series.
pub fn write_metrics<W: Write>(series: &MetricsSeries, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in &series.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> csv::Result<MetricsSeries> {
    let mut r = csv::Reader::from_reader(input);
    let records = r.deserialize::<MetricsRecord>().collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsSeries { records })
}
