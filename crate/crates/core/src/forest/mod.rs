//! Random-forest classifier built from scratch: bagged CART trees with
//! Gini splits, per-split random slot subsets, and vote-fraction
//! probabilities. Includes stratified cross-validation and a grid search
//! over (max depth, attributes per split).

mod cv;
mod tree;

pub use cv::{cross_validate, grid_search, Confusion, CvReport, GridPoint, GridSearch};
pub use tree::{argmax_lowest, Node, Tree};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attr::AttributeVector;
use crate::error::ForestError;
use crate::fields::Protocol;
use tree::GrowParams;

pub const MODEL_SCHEMA: &str = "platsight-model-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub n_attributes_per_split: usize,
    pub min_samples_leaf: usize,
    pub rng_seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, n_slots: usize) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(ForestError::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.n_attributes_per_split == 0 || self.n_attributes_per_split > n_slots {
            return Err(ForestError::InvalidConfig(format!(
                "n_attributes_per_split must be in 1..={n_slots}"
            )));
        }
        Ok(())
    }
}

/// Identity of a trained model: what it classifies and which encoder
/// produced its training vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub provider: String,
    pub protocol: Protocol,
    pub objective: String,
    pub layout_fingerprint: String,
    pub dict_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: String,
    pub class_index: usize,
    /// Fraction of trees voting for the predicted class.
    pub confidence: f64,
    /// Vote fraction per class, summing to 1.
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub schema: String,
    pub provider: String,
    pub protocol: Protocol,
    pub objective: String,
    pub config: TrainConfig,
    pub layout_fingerprint: String,
    pub dict_version: String,
    /// Expected attribute-vector length.
    pub n_slots: usize,
    /// Slot indices splits were restricted to, when trained on a subset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<usize>>,
    /// True when the training data held a single class; the forest then
    /// degenerates to one constant leaf.
    #[serde(default)]
    pub degenerate: bool,
    pub classes: Vec<String>,
    pub trees: Vec<Tree>,
}

/// Sorted unique class table plus per-sample class indexes.
pub(crate) fn encode_classes(labels: &[String]) -> (Vec<String>, Vec<u32>) {
    let mut table: Vec<String> = labels.to_vec();
    table.sort();
    table.dedup();
    let index: BTreeMap<&str, u32> = table
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let y = labels.iter().map(|l| index[l.as_str()]).collect();
    (table, y)
}

fn bootstrap_indices<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Trains one forest. Each tree grows on a bootstrap sample of the same
/// cardinality as the input, choosing the best Gini split among
/// `n_attributes_per_split` slots drawn uniformly at each node. Given the
/// same data and seed the result is identical, including serialized form.
///
/// `allowed_slots` restricts splits to a slot subset (cost-tiered models);
/// vectors keep their full length either way.
pub fn train(
    vectors: &[AttributeVector],
    labels: &[String],
    config: &TrainConfig,
    meta: &ModelMeta,
    allowed_slots: Option<&[usize]>,
) -> Result<Forest, ForestError> {
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
    let n_slots = vectors[0].values.len();
    if vectors.iter().any(|v| v.values.len() != n_slots) {
        return Err(ForestError::InvalidConfig(
            "vectors have differing lengths".into(),
        ));
    }
    config.validate(n_slots)?;

    let allowed: Vec<usize> = match allowed_slots {
        Some(slots) => {
            let mut slots = slots.to_vec();
            slots.sort_unstable();
            slots.dedup();
            if slots.is_empty() {
                return Err(ForestError::InvalidConfig("allowed slot set is empty".into()));
            }
            if slots.iter().any(|&s| s >= n_slots) {
                return Err(ForestError::InvalidConfig(
                    "allowed slot index out of range".into(),
                ));
            }
            slots
        }
        None => (0..n_slots).collect(),
    };

    let (classes, y) = encode_classes(labels);
    let forest_shell = |trees: Vec<Tree>, degenerate: bool| Forest {
        schema: MODEL_SCHEMA.to_string(),
        provider: meta.provider.clone(),
        protocol: meta.protocol,
        objective: meta.objective.clone(),
        config: config.clone(),
        layout_fingerprint: meta.layout_fingerprint.clone(),
        dict_version: meta.dict_version.clone(),
        n_slots,
        slots: allowed_slots.map(|_| allowed.clone()),
        degenerate,
        classes: classes.clone(),
        trees,
    };

    if classes.len() == 1 {
        let tree = Tree::single_leaf(vec![vectors.len() as u32]);
        return Ok(forest_shell(vec![tree], true));
    }

    let mut master = ChaCha20Rng::seed_from_u64(config.rng_seed);
    let seeds: Vec<u64> = (0..config.n_trees).map(|_| master.gen()).collect();
    let rows: Vec<&[u64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    let params = GrowParams {
        max_depth: config.max_depth,
        n_attributes_per_split: config.n_attributes_per_split,
        min_samples_leaf: config.min_samples_leaf,
        n_classes: classes.len(),
        allowed_slots: &allowed,
    };

    let trees: Vec<Tree> = seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let sample = bootstrap_indices(rows.len(), &mut rng);
            tree::grow_tree(&rows, &y, sample, &params, &mut rng)
        })
        .collect();

    Ok(forest_shell(trees, false))
}

impl Forest {
    /// Classifies one vector: every tree votes its leaf's majority class
    /// and the vote fractions form the class distribution.
    pub fn predict(&self, vector: &[u64]) -> Result<Prediction, ForestError> {
        if vector.len() != self.n_slots {
            return Err(ForestError::LayoutMismatch {
                expected: self.n_slots,
                found: vector.len(),
            });
        }
        let mut votes = vec![0u32; self.classes.len()];
        for tree in &self.trees {
            votes[tree.vote(vector)] += 1;
        }
        let total = self.trees.len() as f64;
        let distribution: Vec<f64> = votes.iter().map(|&v| v as f64 / total).collect();
        let class_index = argmax_lowest(&votes);
        Ok(Prediction {
            class: self.classes[class_index].clone(),
            class_index,
            confidence: distribution[class_index],
            distribution,
        })
    }

    pub fn to_json(&self) -> Result<String, ForestError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Forest, ForestError> {
        let forest: Forest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if forest.schema != MODEL_SCHEMA {
            return Err(ForestError::SchemaVersionMismatch {
                expected: MODEL_SCHEMA.to_string(),
                found: forest.schema,
            });
        }
        Ok(forest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors_of(rows: &[Vec<u64>]) -> Vec<AttributeVector> {
        rows.iter()
            .map(|values| AttributeVector {
                protocol: Protocol::Tcp,
                values: values.clone(),
                truncated_items: 0,
            })
            .collect()
    }

    fn meta() -> ModelMeta {
        ModelMeta {
            provider: "youtube".into(),
            protocol: Protocol::Tcp,
            objective: "platform".into(),
            layout_fingerprint: "test-layout".into(),
            dict_version: "test-dicts".into(),
        }
    }

    fn config(n_trees: usize, max_depth: usize, mtry: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            n_trees,
            max_depth,
            n_attributes_per_split: mtry,
            min_samples_leaf: 1,
            rng_seed: seed,
        }
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn separable_data_learns_at_depth_one() {
        let data = vectors_of(&[
            vec![10, 0],
            vec![12, 1],
            vec![11, 0],
            vec![200, 1],
            vec![210, 0],
            vec![205, 1],
        ]);
        let y = labels(&["low", "low", "low", "high", "high", "high"]);
        let forest = train(&data, &y, &config(30, 1, 2, 1), &meta(), None).unwrap();
        assert!(!forest.degenerate);
        for (v, want) in data.iter().zip(&y) {
            let p = forest.predict(&v.values).unwrap();
            assert_eq!(&p.class, want);
            let sum: f64 = p.distribution.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert_eq!(p.confidence, p.distribution[p.class_index]);
        }
    }

    #[test]
    fn xor_truth_table_learned_exactly() {
        let data = vectors_of(&[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let y = labels(&["same", "diff", "diff", "same"]);
        let forest = train(&data, &y, &config(200, 3, 2, 3), &meta(), None).unwrap();
        for (v, want) in data.iter().zip(&y) {
            assert_eq!(&forest.predict(&v.values).unwrap().class, want);
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_models() {
        let data = vectors_of(&[
            vec![1, 9],
            vec![2, 8],
            vec![3, 7],
            vec![4, 6],
            vec![9, 1],
            vec![8, 2],
        ]);
        let y = labels(&["a", "a", "b", "b", "a", "b"]);
        let cfg = config(20, 4, 2, 42);
        let one = train(&data, &y, &cfg, &meta(), None).unwrap();
        let two = train(&data, &y, &cfg, &meta(), None).unwrap();
        assert_eq!(one.to_json().unwrap(), two.to_json().unwrap());

        let other_seed = train(&data, &y, &config(20, 4, 2, 43), &meta(), None).unwrap();
        assert_ne!(one.to_json().unwrap(), other_seed.to_json().unwrap());
    }

    #[test]
    fn single_tree_confidence_is_zero_or_one() {
        let data = vectors_of(&[vec![0], vec![1], vec![2], vec![9], vec![10], vec![11]]);
        let y = labels(&["a", "a", "a", "b", "b", "b"]);
        let forest = train(&data, &y, &config(1, 2, 1, 5), &meta(), None).unwrap();
        for v in &data {
            let p = forest.predict(&v.values).unwrap();
            assert!(p.distribution.iter().all(|&f| f == 0.0 || f == 1.0));
            assert_eq!(p.confidence, 1.0);
        }
    }

    #[test]
    fn vote_fractions_are_exact() {
        // Hand-built forest: 8 of 10 trees vote class 1.
        let tree_for = |class: usize| {
            let mut hist = vec![0u32; 2];
            hist[class] = 1;
            Tree::single_leaf(hist)
        };
        let forest = Forest {
            schema: MODEL_SCHEMA.into(),
            provider: "youtube".into(),
            protocol: Protocol::Tcp,
            objective: "platform".into(),
            config: config(10, 1, 1, 0),
            layout_fingerprint: "test-layout".into(),
            dict_version: "test-dicts".into(),
            n_slots: 1,
            slots: None,
            degenerate: false,
            classes: vec!["a".into(), "b".into()],
            trees: (0..10).map(|i| tree_for(usize::from(i < 8))).collect(),
        };
        let p = forest.predict(&[0]).unwrap();
        assert_eq!(p.class, "b");
        assert_eq!(p.confidence, 0.8);
        assert_eq!(p.distribution, vec![0.2, 0.8]);
    }

    #[test]
    fn tie_votes_resolve_to_lowest_class() {
        let tree_for = |class: usize| {
            let mut hist = vec![0u32; 2];
            hist[class] = 1;
            Tree::single_leaf(hist)
        };
        let forest = Forest {
            schema: MODEL_SCHEMA.into(),
            provider: "p".into(),
            protocol: Protocol::Tcp,
            objective: "platform".into(),
            config: config(2, 1, 1, 0),
            layout_fingerprint: "f".into(),
            dict_version: "d".into(),
            n_slots: 1,
            slots: None,
            degenerate: false,
            classes: vec!["a".into(), "b".into()],
            trees: vec![tree_for(0), tree_for(1)],
        };
        let p = forest.predict(&[0]).unwrap();
        assert_eq!(p.class, "a");
        assert_eq!(p.confidence, 0.5);
    }

    #[test]
    fn prediction_is_invariant_under_tree_order() {
        let data = vectors_of(&[
            vec![1, 4],
            vec![2, 3],
            vec![3, 2],
            vec![4, 1],
            vec![5, 6],
            vec![6, 5],
        ]);
        let y = labels(&["a", "b", "a", "b", "a", "b"]);
        let forest = train(&data, &y, &config(15, 3, 2, 8), &meta(), None).unwrap();
        let mut reversed = forest.clone();
        reversed.trees.reverse();
        for v in &data {
            assert_eq!(
                forest.predict(&v.values).unwrap(),
                reversed.predict(&v.values).unwrap()
            );
        }
    }

    #[test]
    fn layout_mismatch_is_reported() {
        let data = vectors_of(&[vec![0, 1], vec![5, 1]]);
        let y = labels(&["a", "b"]);
        let forest = train(&data, &y, &config(3, 1, 1, 0), &meta(), None).unwrap();
        let err = forest.predict(&[1, 2, 3]).unwrap_err();
        assert!(matches!(
            err,
            ForestError::LayoutMismatch { expected: 2, found: 3 }
        ));
    }

    #[test]
    fn single_class_training_degenerates() {
        let data = vectors_of(&[vec![1], vec![2], vec![3]]);
        let y = labels(&["only", "only", "only"]);
        let forest = train(&data, &y, &config(50, 4, 1, 2), &meta(), None).unwrap();
        assert!(forest.degenerate);
        assert_eq!(forest.trees.len(), 1);
        let p = forest.predict(&[99]).unwrap();
        assert_eq!(p.class, "only");
        assert_eq!(p.confidence, 1.0);
    }

    #[test]
    fn bootstrap_keeps_input_cardinality() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for n in [1usize, 5, 100] {
            let sample = bootstrap_indices(n, &mut rng);
            assert_eq!(sample.len(), n);
            assert!(sample.iter().all(|&i| i < n));
        }
    }

    #[test]
    fn depth_bound_holds_for_every_tree() {
        let data = vectors_of(
            &(0..80)
                .map(|i: u64| vec![i % 13, i % 7, i % 2])
                .collect::<Vec<_>>(),
        );
        let y: Vec<String> = (0..80).map(|i| format!("c{}", i % 4)).collect();
        let forest = train(&data, &y, &config(25, 3, 2, 6), &meta(), None).unwrap();
        assert!(forest.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn restricted_slots_are_the_only_splits_used() {
        // Slot 0 separates perfectly, slot 1 is noise; restricting to slot 1
        // must keep slot 0 out of every split.
        let data = vectors_of(&[
            vec![0, 5],
            vec![1, 6],
            vec![2, 5],
            vec![100, 6],
            vec![101, 5],
            vec![102, 6],
        ]);
        let y = labels(&["a", "a", "a", "b", "b", "b"]);
        let forest = train(&data, &y, &config(10, 4, 2, 3), &meta(), Some(&[1])).unwrap();
        assert_eq!(forest.slots.as_deref(), Some(&[1][..]));
        for tree in &forest.trees {
            for node in &tree.nodes {
                if let Node::Split { slot, .. } = node {
                    assert_eq!(*slot, 1);
                }
            }
        }
    }

    #[test]
    fn save_load_round_trip_and_schema_check() {
        let dir = tempfile::tempdir().unwrap();
        let data = vectors_of(&[vec![0], vec![10]]);
        let y = labels(&["a", "b"]);
        let forest = train(&data, &y, &config(5, 1, 1, 4), &meta(), None).unwrap();
        let path = dir.path().join("model.json");
        forest.save(&path).unwrap();
        let loaded = Forest::load(&path).unwrap();
        assert_eq!(forest, loaded);

        let mut wrong = forest.clone();
        wrong.schema = "platsight-model-v0".into();
        let bad_path = dir.path().join("bad.json");
        wrong.save(&bad_path).unwrap();
        assert!(matches!(
            Forest::load(&bad_path),
            Err(ForestError::SchemaVersionMismatch { .. })
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let data = vectors_of(&[vec![0, 1], vec![2, 3]]);
        let y = labels(&["a", "b"]);
        for bad in [
            config(0, 1, 1, 0),
            config(1, 0, 1, 0),
            config(1, 1, 0, 0),
            config(1, 1, 3, 0),
        ] {
            assert!(matches!(
                train(&data, &y, &bad, &meta(), None),
                Err(ForestError::InvalidConfig(_))
            ));
        }
        let mut no_leaf = config(1, 1, 1, 0);
        no_leaf.min_samples_leaf = 0;
        assert!(matches!(
            train(&data, &y, &no_leaf, &meta(), None),
            Err(ForestError::InvalidConfig(_))
        ));
        assert!(matches!(
            train(&[], &[], &config(1, 1, 1, 0), &meta(), None),
            Err(ForestError::EmptyTrainingSet)
        ));
    }
}
