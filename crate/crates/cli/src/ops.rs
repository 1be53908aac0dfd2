//! Implementations behind the subcommands. Each one is a pure function of
//! its flags and input files: outputs depend only on those plus the seed,
//! never on wall clock or environment.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use platsight_core::attr::{AttributeRegistry, AttributeVector, DictionaryStore, EncodeMode, SlotLayout};
use platsight_core::bank::{Bank, BankManifest};
use platsight_core::error::Error as CoreError;
use platsight_core::error::{BankError, ForestError};
use platsight_core::fields::Protocol;
use platsight_core::forest::{self, ModelMeta, TrainConfig};
use platsight_core::pipeline::{self, ExtractedFlow};
use platsight_core::provider::{Provider, ProviderTable};
use platsight_core::quic::ParamRegistry;
use platsight_core::rank::{field_distribution_csv, field_distribution_report, ImportanceReport};
use platsight_core::report::{self, GroupBy, PredictionRecord, ReportSummary};
use platsight_core::synth::{self, FlowLabel};

use crate::{ClassifyArgs, ExtractArgs, RankArgs, ReportArgs, SynthArgs, TrainArgs, TuneArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    BadArgument(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::BadArgument(_) => "cli.bad_argument",
        }
    }
}

macro_rules! from_core {
    ($($ty:ty),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> CliError {
                CliError::Core(e.into())
            }
        })*
    };
}

from_core!(
    platsight_core::error::SynthError,
    platsight_core::error::CodecError,
    platsight_core::error::ForestError,
    platsight_core::error::BankError,
    platsight_core::error::RankError,
    platsight_core::error::ReportError,
    std::io::Error,
    serde_json::Error,
);

fn bad_argument(message: impl Into<String>) -> CliError {
    CliError::BadArgument(message.into())
}

/// Label column a model is trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Platform,
    Device,
    Agent,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Platform => "platform",
            Objective::Device => "device",
            Objective::Agent => "agent",
        }
    }

    /// Ground-truth class for one labeled flow. The platform objective is
    /// the device and agent labels joined as `device/agent`.
    pub fn label_of(self, label: &FlowLabel) -> String {
        match self {
            Objective::Platform => format!("{}/{}", label.os, label.agent),
            Objective::Device => label.os.clone(),
            Objective::Agent => label.agent.clone(),
        }
    }
}

impl FromStr for Objective {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Objective, CliError> {
        match s {
            "platform" => Ok(Objective::Platform),
            "device" => Ok(Objective::Device),
            "agent" => Ok(Objective::Agent),
            other => Err(bad_argument(format!(
                "unknown objective {other:?}; expected platform, device or agent"
            ))),
        }
    }
}

fn parse_protocol(s: &str) -> Result<Protocol, CliError> {
    Protocol::from_str(s).map_err(bad_argument)
}

fn parse_provider(s: &str) -> Result<Provider, CliError> {
    Provider::from_str(s).map_err(bad_argument)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let profiles = match &args.profiles {
        Some(path) => synth::load_profiles(path)?,
        None => synth::builtin_roster(),
    };
    if args.count == 0 {
        return Err(bad_argument("--count must be at least 1"));
    }
    let registry = ParamRegistry::default();
    let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(args.seed);
    let samples = synth::generate_corpus(&profiles, args.count, &registry, &mut rng)?;
    let labels = synth::serialize_to_pcap(&samples, &args.out_pcap)?;
    synth::write_labels_csv(&labels, &args.out_labels)?;
    log::info!(
        "synthesized {} flows from {} profiles",
        labels.len(),
        profiles.len()
    );
    Ok(())
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<(), CliError> {
    let mode = match args.mode.as_str() {
        "train" => EncodeMode::Train,
        "infer" => EncodeMode::Infer,
        other => {
            return Err(bad_argument(format!(
                "unknown mode {other:?}; expected train or infer"
            )))
        }
    };
    let mut dicts = match (&args.dicts, mode) {
        (Some(path), _) if path.exists() => DictionaryStore::load(path)?,
        (Some(_), EncodeMode::Train) => DictionaryStore::new(),
        (None, EncodeMode::Train) => DictionaryStore::new(),
        (path, EncodeMode::Infer) => {
            let shown = path.as_ref().map(|p| p.display().to_string());
            return Err(bad_argument(format!(
                "infer mode needs an existing dictionary store, got {shown:?}"
            )));
        }
    };
    let registry = AttributeRegistry::default();
    let flows = pipeline::extract_pcap(
        &args.pcap,
        ProviderTable::default(),
        ParamRegistry::default(),
        &registry,
        &mut dicts,
        mode,
    )?;
    pipeline::write_flows_jsonl(&flows, &args.out)?;
    if mode == EncodeMode::Train {
        if let Some(path) = &args.dicts {
            dicts.save(path)?;
        }
    }
    log::info!("extracted {} flows", flows.len());
    Ok(())
}

/// Training config file shape; every field optional over the defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfigFile {
    #[serde(default = "default_trees")]
    n_trees: usize,
    #[serde(default = "default_depth")]
    max_depth: usize,
    /// Defaults to the rounded square root of the slot count.
    #[serde(default)]
    n_attributes_per_split: Option<usize>,
    #[serde(default = "default_min_leaf")]
    min_samples_leaf: usize,
    #[serde(default = "default_seed")]
    rng_seed: u64,
}

fn default_trees() -> usize {
    100
}
fn default_depth() -> usize {
    16
}
fn default_min_leaf() -> usize {
    1
}
fn default_seed() -> u64 {
    7
}

impl Default for TrainConfigFile {
    fn default() -> Self {
        TrainConfigFile {
            n_trees: default_trees(),
            max_depth: default_depth(),
            n_attributes_per_split: None,
            min_samples_leaf: default_min_leaf(),
            rng_seed: default_seed(),
        }
    }
}

fn load_train_config(path: Option<&Path>, n_slots: usize) -> Result<TrainConfig, CliError> {
    let file = match path {
        Some(p) => serde_json::from_str::<TrainConfigFile>(&std::fs::read_to_string(p)?)?,
        None => TrainConfigFile::default(),
    };
    let mtry = file
        .n_attributes_per_split
        .unwrap_or_else(|| ((n_slots as f64).sqrt().round() as usize).max(1));
    Ok(TrainConfig {
        n_trees: file.n_trees,
        max_depth: file.max_depth,
        n_attributes_per_split: mtry,
        min_samples_leaf: file.min_samples_leaf,
        rng_seed: file.rng_seed,
    })
}

/// Labeled vectors for one provider and protocol, joined from a flow file
/// and its ground-truth CSV.
struct TrainingSet {
    vectors: Vec<AttributeVector>,
    labels: Vec<FlowLabel>,
}

fn load_training_set(
    data: &Path,
    labels: &Path,
    provider: Provider,
    protocol: Protocol,
) -> Result<TrainingSet, CliError> {
    let flows = pipeline::read_flows_jsonl(data)?;
    let truth = synth::read_labels_csv(labels)?;
    let joined = pipeline::join_labels(&flows, &truth);
    if joined.unmatched_labels > 0 {
        log::warn!("{} labels had no matching flow", joined.unmatched_labels);
    }
    let mut vectors = Vec::new();
    let mut kept = Vec::new();
    for (flow, label) in joined.pairs {
        if label.provider != provider || label.proto != protocol {
            continue;
        }
        if let Some(vector) = &flow.vector {
            vectors.push(vector.clone());
            kept.push(label.clone());
        }
    }
    Ok(TrainingSet {
        vectors,
        labels: kept,
    })
}

fn objective_labels(set: &TrainingSet, objective: Objective) -> Result<Vec<String>, CliError> {
    if set.vectors.is_empty() {
        return Err(ForestError::EmptyTrainingSet.into());
    }
    let labels: Vec<String> = set.labels.iter().map(|l| objective.label_of(l)).collect();
    let distinct: std::collections::BTreeSet<&String> = labels.iter().collect();
    if distinct.len() < 2 {
        return Err(ForestError::DegenerateData.into());
    }
    Ok(labels)
}

fn model_meta(
    provider: Provider,
    protocol: Protocol,
    objective: Objective,
    dicts: &DictionaryStore,
) -> ModelMeta {
    let layout = SlotLayout::new(&AttributeRegistry::default(), protocol);
    ModelMeta {
        provider: provider.to_string(),
        protocol,
        objective: objective.as_str().to_string(),
        layout_fingerprint: layout.fingerprint(),
        dict_version: dicts.version(),
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let provider = parse_provider(&args.provider)?;
    let protocol = parse_protocol(&args.protocol)?;
    let objective = Objective::from_str(&args.objective)?;
    let dicts = DictionaryStore::load(&args.dicts)?;
    let set = load_training_set(&args.data, &args.labels, provider, protocol)?;
    let labels = objective_labels(&set, objective)?;
    let config = load_train_config(args.config.as_deref(), set.vectors[0].values.len())?;
    let meta = model_meta(provider, protocol, objective, &dicts);
    let model = forest::train(&set.vectors, &labels, &config, &meta, None)?;
    model.save(&args.out)?;
    log::info!(
        "trained {} {} {} on {} rows",
        provider,
        protocol,
        objective.as_str(),
        set.vectors.len()
    );
    Ok(())
}

pub fn cmd_tune(args: &TuneArgs) -> Result<(), CliError> {
    let provider = parse_provider(&args.provider)?;
    let protocol = parse_protocol(&args.protocol)?;
    let objective = Objective::from_str(&args.objective)?;
    let dicts = DictionaryStore::load(&args.dicts)?;
    let set = load_training_set(&args.data, &args.labels, provider, protocol)?;
    let labels = objective_labels(&set, objective)?;
    let base = TrainConfig {
        n_trees: default_trees(),
        max_depth: default_depth(),
        n_attributes_per_split: 1,
        min_samples_leaf: default_min_leaf(),
        rng_seed: args.seed,
    };
    let search = forest::grid_search(
        &set.vectors,
        &labels,
        &base,
        &args.depths,
        &args.n_attrs,
        args.folds,
        args.seed,
        None,
    )?;
    std::fs::write(&args.out_surface, search.surface_csv())?;
    let meta = model_meta(provider, protocol, objective, &dicts);
    let model = forest::train(&set.vectors, &labels, &search.best_config, &meta, None)?;
    model.save(&args.out_model)?;
    log::info!(
        "best config depth={} mtry={} accuracy={:.4}",
        search.best_config.max_depth,
        search.best_config.n_attributes_per_split,
        search.best_accuracy
    );
    Ok(())
}

pub fn cmd_rank(args: &RankArgs) -> Result<(), CliError> {
    let provider = parse_provider(&args.provider)?;
    let protocol = parse_protocol(&args.protocol)?;
    let objective = Objective::from_str(&args.group)?;
    let set = load_training_set(&args.data, &args.labels, provider, protocol)?;
    if set.vectors.is_empty() {
        return Err(ForestError::EmptyTrainingSet.into());
    }
    let names: Vec<String> = set.labels.iter().map(|l| objective.label_of(l)).collect();
    let mut classes: BTreeMap<&String, u64> = BTreeMap::new();
    for name in &names {
        let next = classes.len() as u64;
        classes.entry(name).or_insert(next);
    }
    let codes: Vec<u64> = names.iter().map(|n| classes[n]).collect();
    let registry = AttributeRegistry::default();
    let report = ImportanceReport::build(
        &provider.to_string(),
        protocol,
        objective.as_str(),
        &set.vectors,
        &codes,
        &registry,
    )?;
    std::fs::write(&args.out_importance, report.to_csv())?;
    if let Some(path) = &args.out_distribution {
        let platforms: Vec<String> = set
            .labels
            .iter()
            .map(|l| Objective::Platform.label_of(l))
            .collect();
        let rows = field_distribution_report(&set.vectors, &platforms, &registry, protocol)?;
        std::fs::write(path, field_distribution_csv(&rows))?;
    }
    Ok(())
}

/// The store the capture is encoded with must be the one the bank's models
/// were trained against, else dictionary codes silently shift meaning.
fn check_dict_version(bank_path: &Path, dicts: &DictionaryStore) -> Result<(), CliError> {
    let manifest: BankManifest = serde_json::from_str(&std::fs::read_to_string(bank_path)?)?;
    let base = bank_path.parent().unwrap_or(Path::new("."));
    if let Some(entry) = manifest.models.first() {
        let model = forest::Forest::load(&base.join(&entry.path))?;
        if model.dict_version != dicts.version() {
            return Err(bad_argument(format!(
                "dictionary store version {} does not match the bank's models ({})",
                dicts.version(),
                model.dict_version
            )));
        }
    }
    Ok(())
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let mut dicts = DictionaryStore::load(&args.dicts)?;
    check_dict_version(&args.bank, &dicts)?;
    let bank = Bank::load(&args.bank)?;
    let registry = AttributeRegistry::default();
    let flows = pipeline::extract_pcap(
        &args.pcap,
        ProviderTable::default(),
        ParamRegistry::default(),
        &registry,
        &mut dicts,
        EncodeMode::Infer,
    )?;
    let mut predictions = Vec::with_capacity(flows.len());
    for ExtractedFlow { flow, vector } in flows {
        let result = match (&vector, flow.protocol) {
            (Some(v), Some(protocol)) if flow.provider != Provider::None => {
                match bank.classify_flow(&v.values, &flow.provider.to_string(), protocol) {
                    Ok(result) => Some(result),
                    Err(BankError::MissingModel { .. }) => None,
                    Err(e) => return Err(e.into()),
                }
            }
            _ => None,
        };
        predictions.push(PredictionRecord { flow, result });
    }
    report::write_predictions_jsonl(&args.out, &predictions)?;
    log::info!(
        "classified {} of {} flows",
        predictions.iter().filter(|p| p.result.is_some()).count(),
        predictions.len()
    );
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let group_by = GroupBy::from_str(&args.group_by).map_err(bad_argument)?;
    if !(args.threshold >= 0.0 && args.threshold <= 1.0) {
        return Err(bad_argument(format!(
            "--threshold {} outside [0, 1]",
            args.threshold
        )));
    }
    let predictions = report::read_predictions_jsonl(&args.predictions)?;
    let sessions = report::session_records(&predictions);
    let classified = sessions.len();
    let filtered = report::filter_confident(sessions, args.threshold);
    std::fs::create_dir_all(&args.out_dir)?;
    report::write_watch_time_csv(
        &args.out_dir.join("watch_time.csv"),
        &report::watch_time(&filtered.kept, group_by),
    )?;
    report::write_bandwidth_csv(
        &args.out_dir.join("bandwidth_quartiles.csv"),
        &report::bandwidth_stats(&filtered.kept, group_by),
    )?;
    report::write_hourly_csv(
        &args.out_dir.join("hourly_usage.csv"),
        &report::hourly_usage(&filtered.kept, group_by, args.utc_offset),
    )?;
    report::write_summary_json(
        &args.out_dir.join("summary.json"),
        &ReportSummary {
            total_flows: predictions.len(),
            classified_sessions: classified,
            confident_sessions: filtered.kept.len(),
            confidence_threshold: args.threshold,
            excluded_fraction: filtered.excluded_fraction,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(os: &str, agent: &str) -> FlowLabel {
        FlowLabel {
            src: "10.0.0.1".into(),
            dst: "142.250.70.14".into(),
            sport: 40000,
            dport: 443,
            proto: Protocol::Quic,
            provider: Provider::Yt,
            device: "desktop".into(),
            os: os.into(),
            agent: agent.into(),
        }
    }

    #[test]
    fn objective_picks_label_columns() {
        let l = label("windows", "chrome");
        assert_eq!(Objective::Platform.label_of(&l), "windows/chrome");
        assert_eq!(Objective::Device.label_of(&l), "windows");
        assert_eq!(Objective::Agent.label_of(&l), "chrome");
    }

    #[test]
    fn objective_parse_rejects_unknown() {
        assert!(Objective::from_str("platform").is_ok());
        let err = Objective::from_str("codec").unwrap_err();
        assert_eq!(err.code(), "cli.bad_argument");
    }

    #[test]
    fn single_class_data_is_degenerate() {
        let set = TrainingSet {
            vectors: vec![
                AttributeVector {
                    protocol: Protocol::Quic,
                    values: vec![1, 2],
                    truncated_items: 0,
                },
                AttributeVector {
                    protocol: Protocol::Quic,
                    values: vec![3, 4],
                    truncated_items: 0,
                },
            ],
            labels: vec![label("windows", "chrome"), label("windows", "chrome")],
        };
        let err = objective_labels(&set, Objective::Platform).unwrap_err();
        assert_eq!(err.code(), "forest.degenerate_data");

        let empty = TrainingSet {
            vectors: Vec::new(),
            labels: Vec::new(),
        };
        let err = objective_labels(&empty, Objective::Platform).unwrap_err();
        assert_eq!(err.code(), "forest.empty_training_set");
    }

    #[test]
    fn default_config_uses_sqrt_mtry() {
        let config = load_train_config(None, 224).unwrap();
        assert_eq!(config.n_attributes_per_split, 15);
        assert_eq!(config.n_trees, 100);
        let tiny = load_train_config(None, 1).unwrap();
        assert_eq!(tiny.n_attributes_per_split, 1);
    }
}
