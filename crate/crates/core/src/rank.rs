//! Attribute importance ranking.
//!
//! Scores each attribute by the mutual information between its encoded
//! values and a class label column, normalizes scores within a grouping,
//! and buckets them into importance tiers. Also produces a per-field
//! value-distribution diagnostic over labeled datasets.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attr::{AttrId, AttributeRegistry, AttributeVector, CostTier, SlotLayout};
use crate::error::RankError;
use crate::fields::Protocol;

/// Importance bucket for a normalized score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceTier {
    High,
    Medium,
    Low,
}

impl ImportanceTier {
    pub fn as_str(self) -> &'static str {
        match self {
            ImportanceTier::High => "high",
            ImportanceTier::Medium => "medium",
            ImportanceTier::Low => "low",
        }
    }
}

impl fmt::Display for ImportanceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tier cut points: high is strictly above 0.2, low is strictly below 0.1,
/// medium covers the closed band between them.
pub fn tier_for(score: f64) -> ImportanceTier {
    if score > 0.2 {
        ImportanceTier::High
    } else if score >= 0.1 {
        ImportanceTier::Medium
    } else {
        ImportanceTier::Low
    }
}

fn entropy_of_counts<K>(counts: &BTreeMap<K, usize>, total: usize) -> f64 {
    let n = total as f64;
    counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Mutual information in bits between two equal-length discrete columns,
/// computed as H(X) + H(Y) - H(X,Y) with empirical plug-in probabilities.
pub fn mutual_information(column: &[u64], labels: &[u64]) -> Result<f64, RankError> {
    if column.len() != labels.len() {
        return Err(RankError::LengthMismatch {
            column: column.len(),
            labels: labels.len(),
        });
    }
    if column.is_empty() {
        return Err(RankError::EmptyInput);
    }
    let n = column.len();
    let mut cx: BTreeMap<u64, usize> = BTreeMap::new();
    let mut cy: BTreeMap<u64, usize> = BTreeMap::new();
    let mut cxy: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (&x, &y) in column.iter().zip(labels) {
        *cx.entry(x).or_default() += 1;
        *cy.entry(y).or_default() += 1;
        *cxy.entry((x, y)).or_default() += 1;
    }
    let mi = entropy_of_counts(&cx, n) + entropy_of_counts(&cy, n) - entropy_of_counts(&cxy, n);
    // Floating-point cancellation can leave a tiny negative residue.
    Ok(mi.max(0.0))
}

/// Raw MI per attribute. Scalar attributes score their single slot; list
/// attributes take the maximum MI over their slots so each registry row
/// yields exactly one score.
pub fn rank_attributes(
    vectors: &[AttributeVector],
    labels: &[u64],
    registry: &AttributeRegistry,
    protocol: Protocol,
) -> Result<Vec<(AttrId, f64)>, RankError> {
    if vectors.len() != labels.len() {
        return Err(RankError::LengthMismatch {
            column: vectors.len(),
            labels: labels.len(),
        });
    }
    if vectors.is_empty() {
        return Err(RankError::EmptyInput);
    }
    let layout = SlotLayout::new(registry, protocol);
    for v in vectors {
        assert_eq!(
            v.values.len(),
            layout.total_slots(),
            "vector encoded against a different layout"
        );
        assert_eq!(v.protocol, protocol, "vector protocol mismatch");
    }

    let mut scores = Vec::with_capacity(layout.ranges().len());
    let mut column = vec![0u64; vectors.len()];
    for range in layout.ranges() {
        let mut best = 0.0f64;
        for slot in range.start..range.start + range.len {
            for (row, v) in column.iter_mut().zip(vectors) {
                *row = v.values[slot];
            }
            let mi = mutual_information(&column, labels)?;
            if mi > best {
                best = mi;
            }
        }
        scores.push((range.attr, best));
    }
    Ok(scores)
}

/// Divides every score by the grouping's maximum. A grouping whose scores
/// are all zero stays all zero.
pub fn normalize_scores(raw: &[(AttrId, f64)]) -> Vec<(AttrId, f64)> {
    let max = raw.iter().map(|&(_, s)| s).fold(0.0f64, f64::max);
    raw.iter()
        .map(|&(attr, s)| (attr, if max > 0.0 { s / max } else { 0.0 }))
        .collect()
}

/// One attribute's scores within an [`ImportanceReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeImportance {
    pub attribute: String,
    pub raw_mi_bits: f64,
    pub normalized: f64,
    pub tier: ImportanceTier,
    pub cost: CostTier,
}

/// Importance scores for one (provider, protocol, objective) grouping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub provider: String,
    pub protocol: Protocol,
    pub objective: String,
    pub attributes: Vec<AttributeImportance>,
}

impl ImportanceReport {
    /// Ranks, normalizes, and tiers one labeled dataset.
    pub fn build(
        provider: &str,
        protocol: Protocol,
        objective: &str,
        vectors: &[AttributeVector],
        labels: &[u64],
        registry: &AttributeRegistry,
    ) -> Result<ImportanceReport, RankError> {
        let raw = rank_attributes(vectors, labels, registry, protocol)?;
        let normalized = normalize_scores(&raw);
        let attributes = raw
            .iter()
            .zip(&normalized)
            .map(|(&(attr, mi), &(_, score))| AttributeImportance {
                attribute: attr.label().to_string(),
                raw_mi_bits: mi,
                normalized: score,
                tier: tier_for(score),
                cost: registry.row(attr).cost,
            })
            .collect();
        Ok(ImportanceReport {
            provider: provider.to_string(),
            protocol,
            objective: objective.to_string(),
            attributes,
        })
    }

    /// Normalized score lookup by attribute id, for cost-subset selection.
    pub fn normalized_of(&self, attr: AttrId) -> f64 {
        self.attributes
            .iter()
            .find(|a| a.attribute == attr.label())
            .map(|a| a.normalized)
            .unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,raw_mi_bits,normalized,tier,cost\n");
        for a in &self.attributes {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{}\n",
                a.attribute,
                a.raw_mi_bits,
                a.normalized,
                a.tier.as_str(),
                a.cost.as_str()
            ));
        }
        out
    }
}

/// One field's row in the distribution diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDistributionRow {
    pub field: String,
    /// Distinct values the field takes across the whole dataset. A list
    /// attribute's value is its full slot tuple.
    pub unique_values: usize,
    /// Platforms whose empirical value distribution differs from every
    /// other platform's.
    pub discriminating_platforms: usize,
}

fn distributions_equal(
    a: &BTreeMap<Vec<u64>, usize>,
    na: usize,
    b: &BTreeMap<Vec<u64>, usize>,
    nb: usize,
) -> bool {
    // Exact fraction comparison: c_a/n_a = c_b/n_b iff c_a*n_b = c_b*n_a.
    let keys = a.keys().chain(b.keys());
    for key in keys {
        let ca = *a.get(key).unwrap_or(&0) as u128;
        let cb = *b.get(key).unwrap_or(&0) as u128;
        if ca * nb as u128 != cb * na as u128 {
            return false;
        }
    }
    true
}

/// Per-field diagnostic over a labeled dataset: how many distinct values a
/// field takes and how many platforms are fully separable on it.
pub fn field_distribution_report(
    vectors: &[AttributeVector],
    platforms: &[String],
    registry: &AttributeRegistry,
    protocol: Protocol,
) -> Result<Vec<FieldDistributionRow>, RankError> {
    if vectors.len() != platforms.len() {
        return Err(RankError::LengthMismatch {
            column: vectors.len(),
            labels: platforms.len(),
        });
    }
    if vectors.is_empty() {
        return Err(RankError::EmptyInput);
    }
    let layout = SlotLayout::new(registry, protocol);
    for v in vectors {
        assert_eq!(
            v.values.len(),
            layout.total_slots(),
            "vector encoded against a different layout"
        );
    }

    let mut rows = Vec::with_capacity(layout.ranges().len());
    for range in layout.ranges() {
        let mut all_values: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut per_platform: BTreeMap<&str, (BTreeMap<Vec<u64>, usize>, usize)> = BTreeMap::new();
        for (v, platform) in vectors.iter().zip(platforms) {
            let value = v.values[range.start..range.start + range.len].to_vec();
            *all_values.entry(value.clone()).or_default() += 1;
            let entry = per_platform.entry(platform.as_str()).or_default();
            *entry.0.entry(value).or_default() += 1;
            entry.1 += 1;
        }
        let names: Vec<&str> = per_platform.keys().copied().collect();
        let discriminating = names
            .iter()
            .filter(|&&p| {
                let (dp, np) = &per_platform[p];
                names.iter().all(|&q| {
                    if q == p {
                        return true;
                    }
                    let (dq, nq) = &per_platform[q];
                    !distributions_equal(dp, *np, dq, *nq)
                })
            })
            .count();
        rows.push(FieldDistributionRow {
            field: range.attr.label().to_string(),
            unique_values: all_values.len(),
            discriminating_platforms: discriminating,
        });
    }
    Ok(rows)
}

pub fn field_distribution_csv(rows: &[FieldDistributionRow]) -> String {
    let mut out = String::from("field,unique_values,discriminating_platforms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.field, r.unique_values, r.discriminating_platforms
        ));
    }
    out
}
