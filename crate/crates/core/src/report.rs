//! Session-level telemetry aggregation over classified flows.
//!
//! A classified capture turns into [`SessionRecord`]s (one per flow), which
//! are filtered by confidence and then rolled up three ways: total watch
//! time per group, bandwidth-demand quartiles per group, and hour-of-day
//! usage medians. All aggregation is on downstream volume; upstream bytes
//! ride along for completeness but never enter a statistic.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::IpAddr;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bank::{CascadeResult, Outcome};
use crate::error::ReportError;
use crate::fields::Protocol;
use crate::flow::FlowRecord;

/// One classifier verdict paired with the flow it was issued for.
/// `result` is absent for flows that never reached the classifier
/// (unrecognized provider, unparsed handshake).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub flow: FlowRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<CascadeResult>,
}

pub fn write_predictions_jsonl(
    path: &Path,
    records: &[PredictionRecord],
) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions_jsonl(path: &Path) -> Result<Vec<PredictionRecord>, ReportError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Flattened per-flow session row used by every report aggregate.
///
/// Throughput figures are bits per second computed over the flow's
/// one-second downstream bins, counting only bins that saw traffic, so a
/// flow that idles between bursts is measured by its burst rate rather
/// than diluted toward zero. Both are zero exactly when `down_bytes` is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub client: IpAddr,
    pub client_port: u16,
    pub server: IpAddr,
    pub server_port: u16,
    pub provider: String,
    pub protocol: Option<Protocol>,
    /// Device (operating system) label when any objective resolved one.
    pub device: Option<String>,
    /// Software agent label when any objective resolved one.
    pub agent: Option<String>,
    /// Confidence used for session filtering; see [`CascadeResult::confidence`].
    pub confidence: f64,
    /// Epoch seconds of the first packet.
    pub start: f64,
    /// Epoch seconds of the last packet.
    pub end: f64,
    pub up_bytes: u64,
    pub down_bytes: u64,
    /// Mean downstream rate over active one-second bins, bits per second.
    pub mean_down_bps: f64,
    /// Busiest one-second downstream bin, bits per second.
    pub peak_down_bps: f64,
}

impl SessionRecord {
    pub fn from_flow(flow: &FlowRecord, result: &CascadeResult) -> SessionRecord {
        let (device, agent) = resolved_labels(result);
        let telemetry = &flow.telemetry;
        let active: Vec<u64> = telemetry
            .down_bins
            .values()
            .copied()
            .filter(|b| *b > 0)
            .collect();
        let mean_down_bps = if active.is_empty() {
            0.0
        } else {
            8.0 * active.iter().sum::<u64>() as f64 / active.len() as f64
        };
        let peak_down_bps = 8.0 * active.iter().copied().max().unwrap_or(0) as f64;
        SessionRecord {
            client: flow.client_addr,
            client_port: flow.client_port,
            server: flow.server_addr,
            server_port: flow.server_port,
            provider: flow.provider.to_string(),
            protocol: flow.protocol,
            device,
            agent,
            confidence: result.confidence(),
            start: telemetry.first_ts.as_secs_f64(),
            end: telemetry.last_ts.as_secs_f64(),
            up_bytes: telemetry.up_bytes,
            down_bytes: telemetry.down_bytes,
            mean_down_bps,
            peak_down_bps,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        (self.end - self.start).max(0.0)
    }
}

/// Device and agent labels implied by a cascade outcome. A composite label
/// of the form `os/agent` is split back into its halves; partial outcomes
/// contribute whichever members cleared the threshold; unknown yields none.
fn resolved_labels(result: &CascadeResult) -> (Option<String>, Option<String>) {
    match &result.outcome {
        Outcome::Composite { label, .. } => match label.split_once('/') {
            Some((device, agent)) => (Some(device.to_string()), Some(agent.to_string())),
            None => (Some(label.clone()), None),
        },
        Outcome::Partial { device, agent } => (
            device.as_ref().map(|m| m.label.clone()),
            agent.as_ref().map(|m| m.label.clone()),
        ),
        Outcome::Unknown => (None, None),
    }
}

/// Build session rows from classifier output, skipping flows that carry no
/// verdict.
pub fn session_records(predictions: &[PredictionRecord]) -> Vec<SessionRecord> {
    predictions
        .iter()
        .filter_map(|p| {
            p.result
                .as_ref()
                .map(|result| SessionRecord::from_flow(&p.flow, result))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredSessions {
    pub kept: Vec<SessionRecord>,
    /// Fraction of the input dropped by the confidence threshold;
    /// zero for empty input.
    pub excluded_fraction: f64,
}

/// Keep sessions whose confidence is at least `threshold`.
pub fn filter_confident(records: Vec<SessionRecord>, threshold: f64) -> FilteredSessions {
    let total = records.len();
    let kept: Vec<SessionRecord> = records
        .into_iter()
        .filter(|r| r.confidence >= threshold)
        .collect();
    let excluded_fraction = if total == 0 {
        0.0
    } else {
        (total - kept.len()) as f64 / total as f64
    };
    FilteredSessions {
        kept,
        excluded_fraction,
    }
}

/// Dimension the aggregates are grouped on. Records that lack the label a
/// grouping needs (an unknown-device session grouped by device, say) are
/// left out of that aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    Device,
    Agent,
    Provider,
    ProviderDevice,
    ProviderAgent,
}

impl GroupBy {
    pub fn key(&self, record: &SessionRecord) -> Option<String> {
        match self {
            GroupBy::Device => record.device.clone(),
            GroupBy::Agent => record.agent.clone(),
            GroupBy::Provider => Some(record.provider.clone()),
            GroupBy::ProviderDevice => record
                .device
                .as_ref()
                .map(|d| format!("{}/{}", record.provider, d)),
            GroupBy::ProviderAgent => record
                .agent
                .as_ref()
                .map(|a| format!("{}/{}", record.provider, a)),
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GroupBy::Device => "device",
            GroupBy::Agent => "agent",
            GroupBy::Provider => "provider",
            GroupBy::ProviderDevice => "provider-device",
            GroupBy::ProviderAgent => "provider-agent",
        };
        f.write_str(s)
    }
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<GroupBy, String> {
        match s {
            "device" => Ok(GroupBy::Device),
            "agent" => Ok(GroupBy::Agent),
            "provider" => Ok(GroupBy::Provider),
            "provider-device" => Ok(GroupBy::ProviderDevice),
            "provider-agent" => Ok(GroupBy::ProviderAgent),
            other => Err(format!(
                "unknown grouping {other:?}; expected device, agent, provider, provider-device or provider-agent"
            )),
        }
    }
}

/// Total session duration per group, in hours. Durations are summed per
/// flow, so concurrent flows from one viewer each count in full; treat the
/// result as streaming-hours delivered, not wall-clock viewer hours.
pub fn watch_time(records: &[SessionRecord], group_by: GroupBy) -> BTreeMap<String, f64> {
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for record in records {
        if let Some(key) = group_by.key(record) {
            *totals.entry(key).or_insert(0.0) += record.duration_secs() / 3600.0;
        }
    }
    totals
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linearly interpolated quantile of an ascending-sorted sample: rank
/// `(n - 1) * p` split into its integer and fractional parts, with the
/// fraction interpolating between the straddling order statistics.
/// Returns `None` on an empty sample.
pub fn quantile_linear(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Per-group quartiles of per-session bandwidth demand (mean downstream
/// throughput, megabits per second). Groups only exist where sessions do,
/// so every returned entry has at least one sample; a single-session group
/// reports that session's rate as all three quartiles.
pub fn bandwidth_stats(records: &[SessionRecord], group_by: GroupBy) -> BTreeMap<String, Quartiles> {
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for record in records {
        if let Some(key) = group_by.key(record) {
            samples.entry(key).or_default().push(record.mean_down_bps / 1e6);
        }
    }
    samples
        .into_iter()
        .filter_map(|(key, mut values)| {
            values.sort_by(|a, b| a.total_cmp(b));
            let q1 = quantile_linear(&values, 0.25)?;
            let median = quantile_linear(&values, 0.50)?;
            let q3 = quantile_linear(&values, 0.75)?;
            Some((key, Quartiles { q1, median, q3 }))
        })
        .collect()
}

/// Hour-of-day downstream usage.
///
/// Each session's downstream volume is spread over the local hours it
/// overlaps, pro rata by overlap duration (a zero-length session lands
/// wholly in its start hour). `per_day` keeps the resulting bytes per
/// (group, local day, hour) so volume conservation can be checked exactly;
/// `median` reduces each group's hour column to the median across its
/// observed day span, days without traffic in that hour counting as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyUsage {
    pub per_day: BTreeMap<String, BTreeMap<i64, [f64; 24]>>,
    pub median: BTreeMap<String, [f64; 24]>,
}

/// Local time is derived from a fixed UTC offset in hours; captures that
/// straddle a daylight-saving change should be split by the caller.
pub fn hourly_usage(
    records: &[SessionRecord],
    group_by: GroupBy,
    utc_offset_hours: i32,
) -> HourlyUsage {
    let offset = utc_offset_hours as f64 * 3600.0;
    let mut per_day: BTreeMap<String, BTreeMap<i64, [f64; 24]>> = BTreeMap::new();
    for record in records {
        let Some(key) = group_by.key(record) else {
            continue;
        };
        let volume = record.down_bytes as f64;
        if volume == 0.0 {
            continue;
        }
        let start = record.start + offset;
        let end = record.end + offset;
        let days = per_day.entry(key).or_default();
        let mut add = |t: f64, part: f64| {
            let hour_index = (t / 3600.0).floor() as i64;
            let day = hour_index.div_euclid(24);
            let hour = hour_index.rem_euclid(24) as usize;
            days.entry(day).or_insert([0.0; 24])[hour] += part;
        };
        let duration = end - start;
        if duration <= 0.0 {
            add(start, volume);
            continue;
        }
        let mut t = start;
        while t < end {
            let boundary = ((t / 3600.0).floor() + 1.0) * 3600.0;
            let next = boundary.min(end);
            add(t, volume * (next - t) / duration);
            t = next;
        }
    }

    let mut median = BTreeMap::new();
    for (key, days) in &per_day {
        let first = *days.keys().next().expect("group has at least one day");
        let last = *days.keys().next_back().expect("group has at least one day");
        let mut row = [0.0; 24];
        for (hour, slot) in row.iter_mut().enumerate() {
            let mut samples: Vec<f64> = (first..=last)
                .map(|day| days.get(&day).map_or(0.0, |bins| bins[hour]))
                .collect();
            samples.sort_by(|a, b| a.total_cmp(b));
            *slot = median_of_sorted(&samples);
        }
        median.insert(key.clone(), row);
    }
    HourlyUsage { per_day, median }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Counts surrounding a report run, written alongside the CSV tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub total_flows: usize,
    pub classified_sessions: usize,
    pub confident_sessions: usize,
    pub confidence_threshold: f64,
    pub excluded_fraction: f64,
}

pub fn write_watch_time_csv(
    path: &Path,
    totals: &BTreeMap<String, f64>,
) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["group", "hours"])?;
    for (group, hours) in totals {
        writer.write_record([group.as_str(), &hours.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_bandwidth_csv(
    path: &Path,
    stats: &BTreeMap<String, Quartiles>,
) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["group", "q1_mbps", "median_mbps", "q3_mbps"])?;
    for (group, q) in stats {
        writer.write_record([
            group.as_str(),
            &q.q1.to_string(),
            &q.median.to_string(),
            &q.q3.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_hourly_csv(path: &Path, usage: &HourlyUsage) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["group", "hour", "median_bytes"])?;
    for (group, row) in &usage.median {
        for (hour, bytes) in row.iter().enumerate() {
            writer.write_record([group.as_str(), &hour.to_string(), &bytes.to_string()])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_summary_json(path: &Path, summary: &ReportSummary) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::LabeledConfidence;
    use crate::forest::Prediction;
    use std::collections::BTreeMap;

    fn session(
        provider: &str,
        device: Option<&str>,
        agent: Option<&str>,
        confidence: f64,
        start: f64,
        end: f64,
        down_bytes: u64,
        mean_down_bps: f64,
    ) -> SessionRecord {
        SessionRecord {
            client: "10.0.0.1".parse().unwrap(),
            client_port: 40000,
            server: "142.250.70.14".parse().unwrap(),
            server_port: 443,
            provider: provider.to_string(),
            protocol: Some(Protocol::Tcp),
            device: device.map(str::to_string),
            agent: agent.map(str::to_string),
            confidence,
            start,
            end,
            up_bytes: 100,
            down_bytes,
            mean_down_bps,
            peak_down_bps: mean_down_bps,
        }
    }

    fn prediction(class: &str, confidence: f64) -> Prediction {
        Prediction {
            class: class.to_string(),
            class_index: 0,
            confidence,
            distribution: vec![confidence, 1.0 - confidence],
        }
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        let sorted = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_linear(&sorted, 0.25), Some(2.0));
        assert_eq!(quantile_linear(&sorted, 0.50), Some(3.0));
        assert_eq!(quantile_linear(&sorted, 0.75), Some(4.0));

        let even = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_linear(&even, 0.25), Some(1.75));
        assert_eq!(quantile_linear(&even, 0.50), Some(2.5));
        assert_eq!(quantile_linear(&even, 0.75), Some(3.25));

        let single = [7.5];
        assert_eq!(quantile_linear(&single, 0.25), Some(7.5));
        assert_eq!(quantile_linear(&single, 0.75), Some(7.5));
        assert_eq!(quantile_linear(&[], 0.5), None);
    }

    #[test]
    fn bandwidth_stats_group_quartiles() {
        let records: Vec<SessionRecord> = [1.0, 2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|mbps| {
                session("YT", Some("windows"), None, 0.9, 0.0, 60.0, 1000, mbps * 1e6)
            })
            .chain(std::iter::once(session(
                "NF",
                Some("macos"),
                None,
                0.9,
                0.0,
                60.0,
                1000,
                2.5e6,
            )))
            .collect();
        let stats = bandwidth_stats(&records, GroupBy::Device);
        let windows = &stats["windows"];
        assert_eq!(windows.q1, 2.0);
        assert_eq!(windows.median, 3.0);
        assert_eq!(windows.q3, 4.0);
        let macos = &stats["macos"];
        assert_eq!(macos.q1, 2.5);
        assert_eq!(macos.median, 2.5);
        assert_eq!(macos.q3, 2.5);
    }

    #[test]
    fn session_throughput_uses_active_bins() {
        let mut flow = sample_flow();
        flow.telemetry.down_bins = (0..60).map(|s| (1_700_000_000 + s, 100_000)).collect();
        flow.telemetry.down_bytes = 6_000_000;
        let record = SessionRecord::from_flow(&flow, &composite_result("windows/chrome", 0.9));
        assert_eq!(record.mean_down_bps, 800_000.0);
        assert_eq!(record.peak_down_bps, 800_000.0);

        let mut bursty = sample_flow();
        bursty.telemetry.down_bins =
            BTreeMap::from([(1_700_000_000, 1000), (1_700_000_010, 3000)]);
        bursty.telemetry.down_bytes = 4000;
        let record = SessionRecord::from_flow(&bursty, &composite_result("windows/chrome", 0.9));
        assert_eq!(record.mean_down_bps, 16_000.0);
        assert_eq!(record.peak_down_bps, 24_000.0);
    }

    #[test]
    fn session_throughput_zero_iff_no_downstream() {
        let mut flow = sample_flow();
        flow.telemetry.down_bins = BTreeMap::new();
        flow.telemetry.down_bytes = 0;
        let record = SessionRecord::from_flow(&flow, &composite_result("windows/chrome", 0.9));
        assert_eq!(record.mean_down_bps, 0.0);
        assert_eq!(record.peak_down_bps, 0.0);

        let mut tiny = sample_flow();
        tiny.telemetry.down_bins = BTreeMap::from([(1_700_000_000, 1)]);
        tiny.telemetry.down_bytes = 1;
        let record = SessionRecord::from_flow(&tiny, &composite_result("windows/chrome", 0.9));
        assert!(record.mean_down_bps > 0.0);
        assert!(record.peak_down_bps > 0.0);
    }

    #[test]
    fn filter_keeps_records_at_threshold() {
        let records = vec![
            session("YT", Some("windows"), None, 0.79, 0.0, 10.0, 100, 80.0),
            session("YT", Some("windows"), None, 0.80, 0.0, 10.0, 100, 80.0),
            session("YT", Some("windows"), None, 0.95, 0.0, 10.0, 100, 80.0),
        ];
        let filtered = filter_confident(records, 0.80);
        assert_eq!(filtered.kept.len(), 2);
        assert!((filtered.excluded_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert!(filtered.kept.iter().all(|r| r.confidence >= 0.80));

        let empty = filter_confident(Vec::new(), 0.80);
        assert_eq!(empty.excluded_fraction, 0.0);
    }

    #[test]
    fn watch_time_sums_hours_per_group() {
        let records = vec![
            session("YT", Some("windows"), Some("chrome"), 0.9, 0.0, 1800.0, 100, 80.0),
            session("YT", Some("windows"), Some("edge"), 0.9, 0.0, 1800.0, 100, 80.0),
            session("NF", Some("ios"), Some("native"), 0.9, 0.0, 900.0, 100, 80.0),
            session("NF", None, Some("native"), 0.9, 0.0, 3600.0, 100, 80.0),
        ];
        let by_device = watch_time(&records, GroupBy::Device);
        assert!((by_device["windows"] - 1.0).abs() < 1e-12);
        assert!((by_device["ios"] - 0.25).abs() < 1e-12);
        assert!(!by_device.contains_key("unknown"));

        let by_provider = watch_time(&records, GroupBy::Provider);
        let total: f64 = by_provider.values().sum();
        let expected: f64 = records.iter().map(|r| r.duration_secs() / 3600.0).sum();
        assert!((total - expected).abs() < 1e-9);

        let crossed = watch_time(&records, GroupBy::ProviderAgent);
        assert!((crossed["NF/native"] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn hourly_usage_splits_volume_pro_rata() {
        // 19:30 to 20:30 local on the day starting at epoch 0, offset zero.
        let records = vec![session(
            "YT",
            Some("windows"),
            None,
            0.9,
            19.5 * 3600.0,
            20.5 * 3600.0,
            6000,
            80.0,
        )];
        let usage = hourly_usage(&records, GroupBy::Provider, 0);
        let day = &usage.per_day["YT"][&0];
        assert!((day[19] - 3000.0).abs() < 1e-9);
        assert!((day[20] - 3000.0).abs() < 1e-9);
        assert_eq!(day.iter().sum::<f64>(), 6000.0);
    }

    #[test]
    fn hourly_usage_respects_utc_offset() {
        // 01:00 to 02:00 UTC is 19:00 to 20:00 the previous local day at -6.
        let records = vec![session(
            "YT",
            Some("windows"),
            None,
            0.9,
            86400.0 + 3600.0,
            86400.0 + 7200.0,
            1000,
            80.0,
        )];
        let usage = hourly_usage(&records, GroupBy::Provider, -6);
        let day = &usage.per_day["YT"][&0];
        assert!((day[19] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn hourly_median_finds_planted_peak() {
        // Five days of a 14:00 hour of background, plus a 20:00 spike each day.
        let mut records = Vec::new();
        for day in 0..5 {
            let base = day as f64 * 86400.0;
            records.push(session(
                "YT",
                Some("windows"),
                None,
                0.9,
                base + 14.0 * 3600.0,
                base + 14.0 * 3600.0 + 600.0,
                2_000,
                80.0,
            ));
            records.push(session(
                "YT",
                Some("windows"),
                None,
                0.9,
                base + 20.0 * 3600.0,
                base + 20.0 * 3600.0 + 1800.0,
                50_000,
                80.0,
            ));
        }
        let usage = hourly_usage(&records, GroupBy::Provider, 0);
        let row = &usage.median["YT"];
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 20);
        assert_eq!(row[20], 50_000.0);
        assert_eq!(row[3], 0.0);
    }

    #[test]
    fn hourly_usage_conserves_volume() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let mut records = Vec::new();
        for _ in 0..200 {
            let start = rng.gen_range(0.0..30.0 * 86400.0);
            let duration = rng.gen_range(0.0..8.0 * 3600.0);
            let bytes = rng.gen_range(0..5_000_000u64);
            records.push(session(
                ["YT", "NF", "DN"][rng.gen_range(0..3)],
                Some(["windows", "macos"][rng.gen_range(0..2)]),
                None,
                0.9,
                start,
                start + duration,
                bytes,
                80.0,
            ));
        }
        let usage = hourly_usage(&records, GroupBy::Provider, 3);
        let binned: f64 = usage
            .per_day
            .values()
            .flat_map(|days| days.values())
            .flat_map(|bins| bins.iter())
            .sum();
        let total: f64 = records.iter().map(|r| r.down_bytes as f64).sum();
        assert!((binned - total).abs() / total < 1e-9);
    }

    #[test]
    fn labels_resolve_from_every_outcome() {
        let (device, agent) = resolved_labels(&composite_result("windows/chrome", 0.92));
        assert_eq!(device.as_deref(), Some("windows"));
        assert_eq!(agent.as_deref(), Some("chrome"));

        let partial = CascadeResult {
            outcome: Outcome::Partial {
                device: Some(LabeledConfidence {
                    label: "ios".to_string(),
                    confidence: 0.85,
                }),
                agent: None,
            },
            platform: prediction("ios/safari", 0.6),
            device: Some(prediction("ios", 0.85)),
            agent: Some(prediction("safari", 0.5)),
        };
        let (device, agent) = resolved_labels(&partial);
        assert_eq!(device.as_deref(), Some("ios"));
        assert_eq!(agent, None);

        let unknown = CascadeResult {
            outcome: Outcome::Unknown,
            platform: prediction("ios/safari", 0.4),
            device: Some(prediction("ios", 0.5)),
            agent: Some(prediction("safari", 0.45)),
        };
        assert_eq!(resolved_labels(&unknown), (None, None));
    }

    #[test]
    fn predictions_round_trip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictions.jsonl");
        let records = vec![
            PredictionRecord {
                flow: sample_flow(),
                result: Some(composite_result("windows/chrome", 0.92)),
            },
            PredictionRecord {
                flow: sample_flow(),
                result: None,
            },
        ];
        write_predictions_jsonl(&path, &records).unwrap();
        let back = read_predictions_jsonl(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn csv_outputs_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            session("YT", Some("windows"), Some("chrome"), 0.9, 0.0, 3600.0, 6000, 1.5e6),
            session("NF", Some("macos"), Some("safari"), 0.9, 1800.0, 5400.0, 9000, 2.5e6),
        ];
        let watch = watch_time(&records, GroupBy::Device);
        let stats = bandwidth_stats(&records, GroupBy::Device);
        let usage = hourly_usage(&records, GroupBy::Device, 0);

        let write_all = |tag: &str| {
            let wt = dir.path().join(format!("watch_{tag}.csv"));
            let bw = dir.path().join(format!("bw_{tag}.csv"));
            let hr = dir.path().join(format!("hourly_{tag}.csv"));
            write_watch_time_csv(&wt, &watch).unwrap();
            write_bandwidth_csv(&bw, &stats).unwrap();
            write_hourly_csv(&hr, &usage).unwrap();
            (
                std::fs::read(&wt).unwrap(),
                std::fs::read(&bw).unwrap(),
                std::fs::read(&hr).unwrap(),
            )
        };
        let first = write_all("a");
        let second = write_all("b");
        assert_eq!(first, second);

        let watch_text = String::from_utf8(first.0.clone()).unwrap();
        assert!(watch_text.starts_with("group,hours\n"));
        assert!(watch_text.contains("macos,1"));
        let bw_text = String::from_utf8(first.1.clone()).unwrap();
        assert!(bw_text.starts_with("group,q1_mbps,median_mbps,q3_mbps\n"));
        let hourly_text = String::from_utf8(first.2).unwrap();
        assert_eq!(hourly_text.lines().count(), 1 + 2 * 24);

        let summary = ReportSummary {
            total_flows: 4,
            classified_sessions: 2,
            confident_sessions: 2,
            confidence_threshold: 0.8,
            excluded_fraction: 0.0,
        };
        let path = dir.path().join("summary.json");
        write_summary_json(&path, &summary).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: ReportSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, summary);
    }

    fn sample_flow() -> FlowRecord {
        use crate::flow::{FlowKey, FlowTelemetry};
        use crate::packet::Transport;
        use crate::pcap::Timestamp;
        use crate::provider::{Provider, Role};

        let client: IpAddr = "10.0.0.1".parse().unwrap();
        let server: IpAddr = "142.250.70.14".parse().unwrap();
        FlowRecord {
            key: FlowKey::new(client, 40000, server, 443, Transport::Tcp),
            client_addr: client,
            client_port: 40000,
            server_addr: server,
            server_port: 443,
            provider: Provider::Yt,
            role: Role::Management,
            protocol: Some(Protocol::Tcp),
            chlo_parsed: false,
            fields: None,
            telemetry: FlowTelemetry {
                first_ts: Timestamp::new(1_700_000_000, 0),
                last_ts: Timestamp::new(1_700_000_060, 0),
                up_bytes: 2_000,
                down_bytes: 4_000,
                up_packets: 10,
                down_packets: 12,
                down_bins: BTreeMap::from([(1_700_000_000, 1000), (1_700_000_010, 3000)]),
            },
        }
    }

    fn composite_result(label: &str, confidence: f64) -> CascadeResult {
        CascadeResult {
            outcome: Outcome::Composite {
                label: label.to_string(),
                confidence,
            },
            platform: prediction(label, confidence),
            device: None,
            agent: None,
        }
    }
}
