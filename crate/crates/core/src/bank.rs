//! Classifier bank: per-provider model triples and the confidence cascade.
//!
//! Each (provider, protocol) pair carries three forests sharing one
//! encoder: a composite platform model plus device and agent models.
//! Classification tries the composite first and falls back to the
//! per-objective models only when its confidence is below the threshold.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::attr::AttributeVector;
use crate::error::{BankError, ForestError};
use crate::fields::Protocol;
use crate::forest::{Forest, Prediction};

pub const BANK_SCHEMA: &str = "platsight-bank-v1";
pub const DEFAULT_THRESHOLD: f64 = 0.80;

pub const OBJECTIVE_PLATFORM: &str = "platform";
pub const OBJECTIVE_DEVICE: &str = "device";
pub const OBJECTIVE_AGENT: &str = "agent";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub provider: String,
    pub protocol: Protocol,
    pub objective: String,
    /// Model file path, resolved relative to the manifest's directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub schema: String,
    pub threshold: f64,
    pub models: Vec<ManifestEntry>,
}

#[derive(Debug)]
pub struct ObjectiveModels {
    pub platform: Forest,
    pub device: Forest,
    pub agent: Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledConfidence {
    pub label: String,
    pub confidence: f64,
}

impl LabeledConfidence {
    fn of(p: &Prediction) -> LabeledConfidence {
        LabeledConfidence {
            label: p.class.clone(),
            confidence: p.confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Outcome {
    /// The composite platform model cleared the threshold.
    Composite { label: String, confidence: f64 },
    /// Only individual objectives cleared it; whichever did are present.
    Partial {
        #[serde(skip_serializing_if = "Option::is_none")]
        device: Option<LabeledConfidence>,
        #[serde(skip_serializing_if = "Option::is_none")]
        agent: Option<LabeledConfidence>,
    },
    /// Nothing cleared the threshold.
    Unknown,
}

/// Cascade verdict plus every distribution that was actually computed.
/// `device`/`agent` stay `None` when the composite short-circuited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub outcome: Outcome,
    pub platform: Prediction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device: Option<Prediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<Prediction>,
}

impl CascadeResult {
    /// Confidence used for session filtering: the composite confidence, or
    /// the best member confidence, or the best of the three when unknown.
    pub fn confidence(&self) -> f64 {
        match &self.outcome {
            Outcome::Composite { confidence, .. } => *confidence,
            Outcome::Partial { device, agent } => device
                .iter()
                .chain(agent.iter())
                .map(|m| m.confidence)
                .fold(0.0, f64::max),
            Outcome::Unknown => {
                let mut best = self.platform.confidence;
                if let Some(d) = &self.device {
                    best = best.max(d.confidence);
                }
                if let Some(a) = &self.agent {
                    best = best.max(a.confidence);
                }
                best
            }
        }
    }
}

/// How many times each objective's model ran, for cascade verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub platform: u64,
    pub device: u64,
    pub agent: u64,
}

#[derive(Debug, Default)]
struct EvalCounters {
    platform: AtomicU64,
    device: AtomicU64,
    agent: AtomicU64,
}

#[derive(Debug)]
pub struct Bank {
    threshold: f64,
    groups: BTreeMap<(String, Protocol), ObjectiveModels>,
    counters: EvalCounters,
}

fn group_consistency(models: &ObjectiveModels) -> Result<(), String> {
    let triple = [
        (&models.platform, OBJECTIVE_PLATFORM),
        (&models.device, OBJECTIVE_DEVICE),
        (&models.agent, OBJECTIVE_AGENT),
    ];
    for (forest, objective) in &triple {
        if forest.objective != *objective {
            return Err(format!(
                "model objective is {}, expected {objective}",
                forest.objective
            ));
        }
    }
    let reference = &models.platform;
    for (forest, objective) in &triple[1..] {
        if forest.layout_fingerprint != reference.layout_fingerprint {
            return Err(format!("{objective} model uses a different slot layout"));
        }
        if forest.dict_version != reference.dict_version {
            return Err(format!("{objective} model uses different dictionaries"));
        }
        if forest.n_slots != reference.n_slots {
            return Err(format!("{objective} model expects a different vector length"));
        }
    }
    Ok(())
}

impl Bank {
    pub fn new(threshold: f64) -> Bank {
        Bank {
            threshold,
            groups: BTreeMap::new(),
            counters: EvalCounters::default(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn providers(&self) -> impl Iterator<Item = (&str, Protocol)> {
        self.groups.keys().map(|(p, proto)| (p.as_str(), *proto))
    }

    pub fn insert(
        &mut self,
        provider: &str,
        protocol: Protocol,
        models: ObjectiveModels,
    ) -> Result<(), BankError> {
        group_consistency(&models).map_err(|reason| BankError::BadModel {
            path: format!("{provider}/{protocol}"),
            reason,
        })?;
        self.groups.insert((provider.to_string(), protocol), models);
        Ok(())
    }

    /// Loads a manifest and every model it lists. Model paths resolve
    /// relative to the manifest file's directory.
    pub fn load(manifest_path: &Path) -> Result<Bank, BankError> {
        let manifest: BankManifest =
            serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        if manifest.schema != BANK_SCHEMA {
            return Err(BankError::SchemaVersionMismatch {
                expected: BANK_SCHEMA.to_string(),
                found: manifest.schema,
            });
        }
        if !(manifest.threshold > 0.0 && manifest.threshold <= 1.0) {
            return Err(BankError::BadModel {
                path: manifest_path.display().to_string(),
                reason: format!("threshold {} outside (0, 1]", manifest.threshold),
            });
        }
        let base = manifest_path.parent().unwrap_or(Path::new("."));

        let mut loose: BTreeMap<(String, Protocol), BTreeMap<String, Forest>> = BTreeMap::new();
        for entry in &manifest.models {
            let path = base.join(&entry.path);
            let forest = Forest::load(&path).map_err(|e| match e {
                ForestError::SchemaVersionMismatch { expected, found } => {
                    BankError::SchemaVersionMismatch { expected, found }
                }
                other => BankError::BadModel {
                    path: path.display().to_string(),
                    reason: other.to_string(),
                },
            })?;
            let bad = |reason: String| BankError::BadModel {
                path: path.display().to_string(),
                reason,
            };
            if forest.provider != entry.provider
                || forest.protocol != entry.protocol
                || forest.objective != entry.objective
            {
                return Err(bad(format!(
                    "model identifies as {}/{}/{}, manifest says {}/{}/{}",
                    forest.provider,
                    forest.protocol,
                    forest.objective,
                    entry.provider,
                    entry.protocol,
                    entry.objective
                )));
            }
            let slot = loose
                .entry((entry.provider.clone(), entry.protocol))
                .or_default()
                .insert(entry.objective.clone(), forest);
            if slot.is_some() {
                return Err(bad(format!(
                    "duplicate {}/{}/{} entry",
                    entry.provider, entry.protocol, entry.objective
                )));
            }
        }

        let mut bank = Bank::new(manifest.threshold);
        for ((provider, protocol), mut objectives) in loose {
            let mut take = |objective: &str| {
                objectives.remove(objective).ok_or_else(|| BankError::BadModel {
                    path: manifest_path.display().to_string(),
                    reason: format!("{provider}/{protocol} has no {objective} model"),
                })
            };
            let models = ObjectiveModels {
                platform: take(OBJECTIVE_PLATFORM)?,
                device: take(OBJECTIVE_DEVICE)?,
                agent: take(OBJECTIVE_AGENT)?,
            };
            if let Some(extra) = objectives.keys().next() {
                return Err(BankError::BadModel {
                    path: manifest_path.display().to_string(),
                    reason: format!("{provider}/{protocol} has unknown objective {extra}"),
                });
            }
            bank.insert(&provider, protocol, models)?;
        }
        Ok(bank)
    }

    pub fn evaluation_counts(&self) -> EvalCounts {
        EvalCounts {
            platform: self.counters.platform.load(Ordering::Relaxed),
            device: self.counters.device.load(Ordering::Relaxed),
            agent: self.counters.agent.load(Ordering::Relaxed),
        }
    }

    /// Runs the cascade on one encoded flow. The composite model answers
    /// alone when confident; otherwise device and agent both run and any
    /// that clear the threshold are reported as partial information.
    pub fn classify_flow(
        &self,
        vector: &[u64],
        provider: &str,
        protocol: Protocol,
    ) -> Result<CascadeResult, BankError> {
        let models = self
            .groups
            .get(&(provider.to_string(), protocol))
            .ok_or_else(|| BankError::MissingModel {
                provider: provider.to_string(),
                protocol: protocol.to_string(),
            })?;

        self.counters.platform.fetch_add(1, Ordering::Relaxed);
        let platform = models.platform.predict(vector)?;
        if platform.confidence >= self.threshold {
            return Ok(CascadeResult {
                outcome: Outcome::Composite {
                    label: platform.class.clone(),
                    confidence: platform.confidence,
                },
                platform,
                device: None,
                agent: None,
            });
        }

        self.counters.device.fetch_add(1, Ordering::Relaxed);
        let device = models.device.predict(vector)?;
        self.counters.agent.fetch_add(1, Ordering::Relaxed);
        let agent = models.agent.predict(vector)?;

        let confident_device = (device.confidence >= self.threshold)
            .then(|| LabeledConfidence::of(&device));
        let confident_agent =
            (agent.confidence >= self.threshold).then(|| LabeledConfidence::of(&agent));
        let outcome = if confident_device.is_some() || confident_agent.is_some() {
            Outcome::Partial {
                device: confident_device,
                agent: confident_agent,
            }
        } else {
            Outcome::Unknown
        };
        Ok(CascadeResult {
            outcome,
            platform,
            device: Some(device),
            agent: Some(agent),
        })
    }

    /// Raw per-objective evaluation of a labeled holdout, without the
    /// cascade: accuracy plus median confidence split by correctness.
    pub fn evaluate_open_set(
        &self,
        provider: &str,
        protocol: Protocol,
        vectors: &[AttributeVector],
        labels: &OpenSetLabels,
    ) -> Result<OpenSetReport, BankError> {
        let models = self
            .groups
            .get(&(provider.to_string(), protocol))
            .ok_or_else(|| BankError::MissingModel {
                provider: provider.to_string(),
                protocol: protocol.to_string(),
            })?;
        let n = vectors.len();
        if labels.platform.len() != n || labels.device.len() != n || labels.agent.len() != n {
            return Err(BankError::Forest(ForestError::InvalidConfig(
                "holdout labels do not match vector count".into(),
            )));
        }

        let mut rows = Vec::with_capacity(3);
        for (objective, forest, truth) in [
            (OBJECTIVE_PLATFORM, &models.platform, &labels.platform),
            (OBJECTIVE_DEVICE, &models.device, &labels.device),
            (OBJECTIVE_AGENT, &models.agent, &labels.agent),
        ] {
            let mut correct_conf = Vec::new();
            let mut incorrect_conf = Vec::new();
            for (vector, want) in vectors.iter().zip(truth.iter()) {
                let p = forest.predict(&vector.values)?;
                if p.class == *want {
                    correct_conf.push(p.confidence);
                } else {
                    incorrect_conf.push(p.confidence);
                }
            }
            rows.push(ObjectiveEval {
                objective: objective.to_string(),
                accuracy: if n == 0 {
                    0.0
                } else {
                    correct_conf.len() as f64 / n as f64
                },
                median_confidence_correct: median(&mut correct_conf),
                median_confidence_incorrect: median(&mut incorrect_conf),
            });
        }
        Ok(OpenSetReport { rows })
    }
}

#[derive(Debug, Clone, Default)]
pub struct OpenSetLabels {
    pub platform: Vec<String>,
    pub device: Vec<String>,
    pub agent: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEval {
    pub objective: String,
    pub accuracy: f64,
    pub median_confidence_correct: Option<f64>,
    pub median_confidence_incorrect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSetReport {
    pub rows: Vec<ObjectiveEval>,
}

/// Median with the even-count midpoint averaged; `None` on empty input.
fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("confidences are finite"));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}
