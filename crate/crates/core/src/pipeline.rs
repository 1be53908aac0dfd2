//! Capture-to-vector extraction: reads a pcap through the flow table and
//! encodes every recovered handshake into an attribute vector.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attr::{encode, AttributeRegistry, AttributeVector, DictionaryStore, EncodeMode};
use crate::error::Error;
use crate::flow::{FlowConfig, FlowRecord, FlowTable};
use crate::packet::decode_packet;
use crate::pcap::{read_pcap, LinkType};
use crate::provider::ProviderTable;
use crate::quic::ParamRegistry;
use crate::synth::FlowLabel;

/// One extracted flow: the finalized flow record plus, when a ClientHello
/// was recovered, its encoded attribute vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractedFlow {
    pub flow: FlowRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vector: Option<AttributeVector>,
}

/// Reads a capture and returns every flow, finalized in event-time order
/// for idle flows and key order for the final drain.
pub fn extract_pcap(
    pcap_path: &Path,
    providers: ProviderTable,
    params: ParamRegistry,
    registry: &AttributeRegistry,
    dicts: &mut DictionaryStore,
    mode: EncodeMode,
) -> Result<Vec<ExtractedFlow>, Error> {
    extract_pcap_with_config(
        pcap_path,
        providers,
        params,
        registry,
        dicts,
        mode,
        FlowConfig::default(),
    )
}

pub fn extract_pcap_with_config(
    pcap_path: &Path,
    providers: ProviderTable,
    params: ParamRegistry,
    registry: &AttributeRegistry,
    dicts: &mut DictionaryStore,
    mode: EncodeMode,
    config: FlowConfig,
) -> Result<Vec<ExtractedFlow>, Error> {
    let (link, packets) = read_pcap(pcap_path)?;
    let link = link.unwrap_or(LinkType::Ethernet);
    let mut table = FlowTable::with_config(providers, params, config);
    let mut out = Vec::new();
    for packet in packets {
        let packet = packet?;
        let view = decode_packet(packet.ts, &packet.data, link);
        for record in table.process(&view) {
            out.push(finish_record(record, registry, dicts, mode)?);
        }
    }
    for record in table.finish() {
        out.push(finish_record(record, registry, dicts, mode)?);
    }
    Ok(out)
}

fn finish_record(
    flow: FlowRecord,
    registry: &AttributeRegistry,
    dicts: &mut DictionaryStore,
    mode: EncodeMode,
) -> Result<ExtractedFlow, Error> {
    let vector = match &flow.fields {
        Some(fields) => Some(encode(fields, registry, dicts, mode)?),
        None => None,
    };
    Ok(ExtractedFlow { flow, vector })
}

pub fn write_flows_jsonl(flows: &[ExtractedFlow], path: &Path) -> Result<(), Error> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for flow in flows {
        serde_json::to_writer(&mut out, flow)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_flows_jsonl(path: &Path) -> Result<Vec<ExtractedFlow>, Error> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut flows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        flows.push(serde_json::from_str(&line)?);
    }
    Ok(flows)
}

/// Pairs extracted flows with synth labels by client/server 5-tuple.
/// Unlabeled flows are skipped; a label without a flow is an error in the
/// capture and is reported by count.
pub struct JoinedLabels<'a> {
    pub pairs: Vec<(&'a ExtractedFlow, &'a FlowLabel)>,
    pub unmatched_labels: usize,
}

pub fn join_labels<'a>(
    flows: &'a [ExtractedFlow],
    labels: &'a [FlowLabel],
) -> JoinedLabels<'a> {
    let mut by_tuple: HashMap<(String, String, u16, u16), &ExtractedFlow> = flows
        .iter()
        .map(|f| {
            (
                (
                    f.flow.client_addr.to_string(),
                    f.flow.server_addr.to_string(),
                    f.flow.client_port,
                    f.flow.server_port,
                ),
                f,
            )
        })
        .collect();
    let mut pairs = Vec::with_capacity(labels.len());
    let mut unmatched = 0;
    for label in labels {
        let key = (
            label.src.clone(),
            label.dst.clone(),
            label.sport,
            label.dport,
        );
        match by_tuple.remove(&key) {
            Some(flow) => pairs.push((flow, label)),
            None => unmatched += 1,
        }
    }
    JoinedLabels {
        pairs,
        unmatched_labels: unmatched,
    }
}
