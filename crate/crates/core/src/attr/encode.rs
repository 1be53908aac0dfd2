//! Fixed-layout numeric encoding of handshake field sets.
//!
//! Every attribute owns a fixed slot range: one slot for scalar kinds,
//! `list_slots` slots for list kinds. The layout is a pure function of
//! (registry, protocol), and its fingerprint ties trained models to the
//! exact layout they saw.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attr::dict::DictionaryStore;
use crate::attr::registry::{extract, AttrId, AttrKind, AttributeRegistry, CostTier};
use crate::error::CodecError;
use crate::fields::{FieldValue, HandshakeFieldSet, Protocol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeMode {
    Train,
    Infer,
}

/// Slot range owned by one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRange {
    pub attr: AttrId,
    pub start: usize,
    pub len: usize,
}

/// The slot layout for one protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotLayout {
    pub protocol: Protocol,
    ranges: Vec<SlotRange>,
    total_slots: usize,
}

impl SlotLayout {
    pub fn new(registry: &AttributeRegistry, protocol: Protocol) -> Self {
        let mut ranges = Vec::new();
        let mut next = 0usize;
        for row in registry.for_protocol(protocol) {
            let len = if row.kind == AttrKind::List {
                row.list_slots
            } else {
                1
            };
            ranges.push(SlotRange {
                attr: row.id,
                start: next,
                len,
            });
            next += len;
        }
        SlotLayout {
            protocol,
            ranges,
            total_slots: next,
        }
    }

    pub fn total_slots(&self) -> usize {
        self.total_slots
    }

    pub fn ranges(&self) -> &[SlotRange] {
        &self.ranges
    }

    pub fn range_of(&self, attr: AttrId) -> Option<SlotRange> {
        self.ranges.iter().copied().find(|r| r.attr == attr)
    }

    /// The attribute owning a slot index.
    pub fn attr_of_slot(&self, slot: usize) -> Option<AttrId> {
        self.ranges
            .iter()
            .find(|r| slot >= r.start && slot < r.start + r.len)
            .map(|r| r.attr)
    }

    /// Slot indices covered by an attribute subset, ascending.
    pub fn slots_for(&self, attrs: &BTreeSet<AttrId>) -> Vec<usize> {
        self.ranges
            .iter()
            .filter(|r| attrs.contains(&r.attr))
            .flat_map(|r| r.start..r.start + r.len)
            .collect()
    }

    /// Content hash of the layout: protocol plus every (label, width) pair
    /// in slot order.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.protocol.to_string().as_bytes());
        for r in &self.ranges {
            hasher.update(b"|");
            hasher.update(r.attr.label().as_bytes());
            hasher.update(b":");
            hasher.update(r.len.to_string().as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// One encoded flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeVector {
    pub protocol: Protocol,
    pub values: Vec<u64>,
    /// List items dropped because their attribute's slots were full.
    pub truncated_items: u32,
}

fn scalar_code(
    value: &FieldValue,
    kind: AttrKind,
    label: &str,
    dicts: &mut DictionaryStore,
    mode: EncodeMode,
) -> Result<u64, CodecError> {
    Ok(match value {
        FieldValue::Absent => 0,
        FieldValue::Num(v) => {
            debug_assert_eq!(kind, AttrKind::Numerical);
            *v
        }
        FieldValue::Len(n) => {
            debug_assert_eq!(kind, AttrKind::Length);
            *n as u64
        }
        FieldValue::Flag(set) => {
            debug_assert_eq!(kind, AttrKind::Presence);
            u64::from(*set)
        }
        FieldValue::Cat(token) => {
            debug_assert_eq!(kind, AttrKind::Categorical);
            match mode {
                EncodeMode::Train => dicts.code_train(label, token)?,
                EncodeMode::Infer => dicts.code_infer(label, token),
            }
        }
        FieldValue::List(_) => unreachable!("list value for scalar attribute {label}"),
    })
}

/// Encodes one field set against the registry's slot layout for its
/// protocol. In train mode new categorical tokens extend `dicts`; in infer
/// mode the store is read-only and unknown tokens become the unseen code.
pub fn encode(
    fields: &HandshakeFieldSet,
    registry: &AttributeRegistry,
    dicts: &mut DictionaryStore,
    mode: EncodeMode,
) -> Result<AttributeVector, CodecError> {
    let layout = SlotLayout::new(registry, fields.protocol);
    let mut values = vec![0u64; layout.total_slots()];
    let mut truncated = 0u32;

    for range in layout.ranges() {
        let row = registry.row(range.attr);
        let label = range.attr.label();
        let value = extract(range.attr, fields);
        match (&value, row.kind) {
            (FieldValue::List(tokens), AttrKind::List) => {
                for (i, token) in tokens.iter().enumerate() {
                    if i >= range.len {
                        truncated += (tokens.len() - range.len) as u32;
                        break;
                    }
                    values[range.start + i] = match mode {
                        EncodeMode::Train => dicts.code_train(label, token)?,
                        EncodeMode::Infer => dicts.code_infer(label, token),
                    };
                }
            }
            (FieldValue::Absent, _) => {}
            (scalar, kind) => {
                values[range.start] = scalar_code(scalar, kind, label, dicts, mode)?;
            }
        }
    }

    Ok(AttributeVector {
        protocol: fields.protocol,
        values,
        truncated_items: truncated,
    })
}

/// Attribute subset for a cost budget: attributes whose importance falls
/// under `cutoff` are dropped when their cost tier is excluded; everything
/// else stays.
pub fn cost_subset(
    registry: &AttributeRegistry,
    protocol: Protocol,
    excluded: &BTreeSet<CostTier>,
    importance: &dyn Fn(AttrId) -> f64,
    cutoff: f64,
) -> BTreeSet<AttrId> {
    registry
        .for_protocol(protocol)
        .filter(|row| !(excluded.contains(&row.cost) && importance(row.id) < cutoff))
        .map(|row| row.id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tls::{ClientHello, TcpHandshakeFields};

    fn tcp_fields() -> HandshakeFieldSet {
        let mut chlo = ClientHello::default();
        chlo.handshake_length = 512;
        chlo.legacy_version = 0x0303;
        chlo.cipher_suites = vec![0x0a0a, 0x1301, 0x1303];
        chlo.compression_methods = vec![0];
        chlo.extensions_length = 400;
        chlo.ext.server_name = Some("www.youtube.com".into());
        chlo.ext.alpn = Some(vec!["h2".into(), "http/1.1".into()]);
        chlo.ext.extended_master_secret = true;
        chlo.ext.record_size_limit = Some(16385);
        HandshakeFieldSet {
            protocol: Protocol::Tcp,
            init_packet_size: 64,
            ttl: 128,
            tcp: Some(TcpHandshakeFields {
                syn: true,
                window_size: 64240,
                mss: Some(1460),
                window_scale: Some(8),
                sack_permitted: true,
                ..Default::default()
            }),
            quic_header: None,
            chlo,
            quic_params: None,
        }
    }

    #[test]
    fn layouts_have_fixed_widths() {
        let reg = AttributeRegistry::default();
        let tcp = SlotLayout::new(&reg, Protocol::Tcp);
        let quic = SlotLayout::new(&reg, Protocol::Quic);
        assert_eq!(tcp.total_slots(), 185);
        assert_eq!(quic.total_slots(), 224);
        assert_ne!(tcp.fingerprint(), quic.fingerprint());
        assert_eq!(tcp.fingerprint(), SlotLayout::new(&reg, Protocol::Tcp).fingerprint());
    }

    #[test]
    fn slot_ranges_are_disjoint_and_cover_the_vector() {
        let reg = AttributeRegistry::default();
        for protocol in [Protocol::Tcp, Protocol::Quic] {
            let layout = SlotLayout::new(&reg, protocol);
            let mut covered = vec![false; layout.total_slots()];
            for r in layout.ranges() {
                for slot in r.start..r.start + r.len {
                    assert!(!covered[slot], "slot {slot} covered twice");
                    covered[slot] = true;
                    assert_eq!(layout.attr_of_slot(slot), Some(r.attr));
                }
            }
            assert!(covered.iter().all(|&c| c));
        }
    }

    #[test]
    fn encodes_known_fields_into_expected_slots() {
        let reg = AttributeRegistry::default();
        let layout = SlotLayout::new(&reg, Protocol::Tcp);
        let mut dicts = DictionaryStore::new();
        let v = encode(&tcp_fields(), &reg, &mut dicts, EncodeMode::Train).unwrap();
        assert_eq!(v.values.len(), 185);
        assert_eq!(v.truncated_items, 0);

        let slot = |attr: AttrId| layout.range_of(attr).unwrap().start;
        assert_eq!(v.values[slot(AttrId::T1)], 64);
        assert_eq!(v.values[slot(AttrId::T2)], 128);
        assert_eq!(v.values[slot(AttrId::T9)], 1);
        assert_eq!(v.values[slot(AttrId::T11)], 64240);
        assert_eq!(v.values[slot(AttrId::T12)], 1460);
        assert_eq!(v.values[slot(AttrId::M1)], 512);
        assert_eq!(v.values[slot(AttrId::M4)], 1);
        assert_eq!(v.values[slot(AttrId::O2)], 15);
        assert_eq!(v.values[slot(AttrId::O13)], 16385);
        assert_eq!(v.values[slot(AttrId::O11)], 1);

        let m3 = layout.range_of(AttrId::M3).unwrap();
        assert_eq!(
            &v.values[m3.start..m3.start + 4],
            &[crate::attr::dict::GREASE_CODE, 1, 2, 0]
        );
        let o7 = layout.range_of(AttrId::O7).unwrap();
        assert_eq!(&v.values[o7.start..o7.start + 3], &[1, 2, 0]);
    }

    #[test]
    fn train_then_infer_is_stable_and_infer_flags_unseen() {
        let reg = AttributeRegistry::default();
        let mut dicts = DictionaryStore::new();
        let trained = encode(&tcp_fields(), &reg, &mut dicts, EncodeMode::Train).unwrap();
        dicts.freeze();
        let inferred = encode(&tcp_fields(), &reg, &mut dicts, EncodeMode::Infer).unwrap();
        assert_eq!(trained, inferred);

        let mut changed = tcp_fields();
        changed.chlo.ext.alpn = Some(vec!["h3".into()]);
        let v = encode(&changed, &reg, &mut dicts, EncodeMode::Infer).unwrap();
        let layout = SlotLayout::new(&reg, Protocol::Tcp);
        let o7 = layout.range_of(AttrId::O7).unwrap();
        assert_eq!(v.values[o7.start], crate::attr::dict::UNSEEN_CODE);

        assert!(matches!(
            encode(&changed, &reg, &mut dicts, EncodeMode::Train),
            Err(CodecError::FrozenDictionary { .. })
        ));
    }

    #[test]
    fn list_overflow_is_counted() {
        let reg = AttributeRegistry::default();
        let mut fields = tcp_fields();
        fields.chlo.ext.alpn = Some((0..11).map(|i| format!("proto{i}")).collect());
        let mut dicts = DictionaryStore::new();
        let v = encode(&fields, &reg, &mut dicts, EncodeMode::Train).unwrap();
        assert_eq!(v.truncated_items, 3);
        let layout = SlotLayout::new(&reg, Protocol::Tcp);
        let o7 = layout.range_of(AttrId::O7).unwrap();
        assert_eq!(o7.len, 8);
        assert!(v.values[o7.start..o7.start + 8].iter().all(|&c| c != 0));
    }

    #[test]
    fn cost_subset_respects_cutoff_and_exclusions() {
        let reg = AttributeRegistry::default();
        let unimportant = |_: AttrId| 0.05;
        let important = |_: AttrId| 0.5;

        let all: BTreeSet<CostTier> = BTreeSet::new();
        let full = cost_subset(&reg, Protocol::Tcp, &all, &unimportant, 0.1);
        assert_eq!(full.len(), 42);

        let mut high_only = BTreeSet::new();
        high_only.insert(CostTier::High);
        let subset = cost_subset(&reg, Protocol::Tcp, &high_only, &unimportant, 0.1);
        assert_eq!(subset.len(), 42 - 9);
        assert!(!subset.contains(&AttrId::M3));
        assert!(subset.contains(&AttrId::T1));

        let kept = cost_subset(&reg, Protocol::Tcp, &high_only, &important, 0.1);
        assert_eq!(kept.len(), 42);

        let mut all_tiers = BTreeSet::new();
        all_tiers.insert(CostTier::Low);
        all_tiers.insert(CostTier::Medium);
        all_tiers.insert(CostTier::High);
        let none_important = cost_subset(&reg, Protocol::Quic, &all_tiers, &unimportant, 0.1);
        assert!(none_important.is_empty());
    }

    #[test]
    fn slots_for_maps_attribute_subsets_to_columns() {
        let reg = AttributeRegistry::default();
        let layout = SlotLayout::new(&reg, Protocol::Tcp);
        let mut attrs = BTreeSet::new();
        attrs.insert(AttrId::T1);
        attrs.insert(AttrId::M3);
        let slots = layout.slots_for(&attrs);
        assert_eq!(slots.len(), 1 + 32);
        let m3 = layout.range_of(AttrId::M3).unwrap();
        assert!(slots.contains(&0));
        assert!(slots.contains(&m3.start));
    }
}
