//! Stratified k-fold cross-validation and hyperparameter grid search.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{encode_classes, train, ModelMeta, TrainConfig};
use crate::attr::AttributeVector;
use crate::error::ForestError;

/// Confusion counts with true classes as rows and predictions as columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u32>>,
}

impl Confusion {
    fn new(classes: Vec<String>) -> Confusion {
        let n = classes.len();
        Confusion {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    /// Each row divided by its sum; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: u32 = row.iter().sum();
                row.iter()
                    .map(|&c| {
                        if total == 0 {
                            0.0
                        } else {
                            c as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.classes.len())
            .map(|i| self.counts[i][i] as u64)
            .sum();
        let total: u64 = self
            .counts
            .iter()
            .flat_map(|row| row.iter().map(|&c| c as u64))
            .sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    /// Pooled accuracy over all held-out predictions.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub confusion: Confusion,
}

/// Round-robin stratified fold assignment after a seeded per-class shuffle.
fn stratified_folds(
    y: &[u32],
    classes: &[String],
    k: usize,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Vec<usize>>, ForestError> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, &label) in y.iter().enumerate() {
        by_class[label as usize].push(i);
    }
    for (class_idx, group) in by_class.iter().enumerate() {
        if group.len() < k {
            return Err(ForestError::InsufficientClassSamples {
                class: classes[class_idx].clone(),
                count: group.len(),
                k,
            });
        }
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for group in &mut by_class {
        group.shuffle(rng);
        for (i, &sample) in group.iter().enumerate() {
            folds[i % k].push(sample);
        }
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation. Fold assignment and per-fold
/// training seeds derive from `seed`, so a run is reproducible; the
/// config's own `rng_seed` is not used here.
pub fn cross_validate(
    vectors: &[AttributeVector],
    labels: &[String],
    config: &TrainConfig,
    k: usize,
    seed: u64,
    allowed_slots: Option<&[usize]>,
) -> Result<CvReport, ForestError> {
    if k < 2 {
        return Err(ForestError::InvalidConfig("k must be at least 2".into()));
    }
    if vectors.is_empty() {
        return Err(ForestError::EmptyTrainingSet);
    }
    if vectors.len() != labels.len() {
        return Err(ForestError::InvalidConfig(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    let (classes, y) = encode_classes(labels);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let folds = stratified_folds(&y, &classes, k, &mut rng)?;

    let meta = ModelMeta {
        provider: String::new(),
        protocol: vectors[0].protocol,
        objective: String::new(),
        layout_fingerprint: String::new(),
        dict_version: String::new(),
    };

    let mut confusion = Confusion::new(classes.clone());
    let mut fold_accuracies = Vec::with_capacity(k);
    for fold in &folds {
        let holdout: Vec<bool> = {
            let mut mask = vec![false; vectors.len()];
            for &i in fold {
                mask[i] = true;
            }
            mask
        };
        let mut train_vectors = Vec::with_capacity(vectors.len() - fold.len());
        let mut train_labels = Vec::with_capacity(vectors.len() - fold.len());
        for (i, v) in vectors.iter().enumerate() {
            if !holdout[i] {
                train_vectors.push(v.clone());
                train_labels.push(labels[i].clone());
            }
        }
        let fold_config = TrainConfig {
            rng_seed: rng.gen(),
            ..config.clone()
        };
        let forest = train(&train_vectors, &train_labels, &fold_config, &meta, allowed_slots)?;

        let mut correct = 0usize;
        for &i in fold {
            let predicted = forest.predict(&vectors[i].values)?;
            let true_idx = y[i] as usize;
            let predicted_idx = classes
                .iter()
                .position(|c| *c == predicted.class)
                .expect("fold model trained on a label subset");
            confusion.counts[true_idx][predicted_idx] += 1;
            if predicted_idx == true_idx {
                correct += 1;
            }
        }
        fold_accuracies.push(correct as f64 / fold.len() as f64);
    }

    Ok(CvReport {
        accuracy: confusion.accuracy(),
        fold_accuracies,
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub max_depth: usize,
    pub n_attributes_per_split: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_config: TrainConfig,
    pub best_accuracy: f64,
    pub surface: Vec<GridPoint>,
}

impl GridSearch {
    pub fn surface_csv(&self) -> String {
        let mut out = String::from("max_depth,n_attributes_per_split,accuracy\n");
        for p in &self.surface {
            out.push_str(&format!(
                "{},{},{:.6}\n",
                p.max_depth, p.n_attributes_per_split, p.accuracy
            ));
        }
        out
    }
}

/// Cross-validates every (depth, attributes-per-split) pair and returns
/// the best configuration. Ties go to the smaller depth, then to fewer
/// attributes per split.
pub fn grid_search(
    vectors: &[AttributeVector],
    labels: &[String],
    base: &TrainConfig,
    depths: &[usize],
    n_attrs: &[usize],
    k: usize,
    seed: u64,
    allowed_slots: Option<&[usize]>,
) -> Result<GridSearch, ForestError> {
    if depths.is_empty() || n_attrs.is_empty() {
        return Err(ForestError::InvalidConfig("empty hyperparameter grid".into()));
    }
    let mut depths = depths.to_vec();
    depths.sort_unstable();
    depths.dedup();
    let mut n_attrs = n_attrs.to_vec();
    n_attrs.sort_unstable();
    n_attrs.dedup();

    let mut surface = Vec::with_capacity(depths.len() * n_attrs.len());
    let mut best: Option<(f64, TrainConfig)> = None;
    for &depth in &depths {
        for &mtry in &n_attrs {
            let config = TrainConfig {
                max_depth: depth,
                n_attributes_per_split: mtry,
                ..base.clone()
            };
            let report = cross_validate(vectors, labels, &config, k, seed, allowed_slots)?;
            surface.push(GridPoint {
                max_depth: depth,
                n_attributes_per_split: mtry,
                accuracy: report.accuracy,
            });
            if best.as_ref().is_none_or(|(acc, _)| report.accuracy > *acc) {
                best = Some((report.accuracy, config));
            }
        }
    }
    let (best_accuracy, best_config) = best.expect("grid is non-empty");
    Ok(GridSearch {
        best_config,
        best_accuracy,
        surface,
    })
}
