//! KNN and random-subspace KNN (RSKNN) classification.
//!
//! The weak learner is a plain Euclidean KNN scoring each class by the
//! fraction of its k nearest neighbors. The ensemble draws feature-index
//! subsets without replacement, scores each learner on its subspace and
//! averages the per-class scores; the highest average wins. All tie-breaks
//! are deterministic: equal distances go to the lower training-row index,
//! equal scores to the lower class id.

use rand::seq::index::sample;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::antinoise::{compensate, PopulationFit};
use crate::features::{FeatureVector, SpectralContext};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct KnnConfig {
    pub k: usize,
}

/// Per-class scores aligned with `classes` (sorted ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub classes: Vec<u32>,
    pub scores: Vec<f64>,
}

impl ClassScores {
    fn argmax_label(&self) -> u32 {
        let mut best = 0usize;
        for i in 1..self.scores.len() {
            if self.scores[i] > self.scores[best] {
                best = i;
            }
        }
        self.classes[best]
    }
}

/// Trained random-subspace KNN ensemble plus the energy fit used for
/// compensation at evaluation time.
#[derive(Debug, Clone)]
pub struct RskModel {
    pub training_features: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    /// Sorted feature-index subset per weak learner.
    pub learners: Vec<Vec<usize>>,
    pub knn: KnnConfig,
    pub seed: u64,
    pub population_fit: PopulationFit,
}

fn sorted_classes(labels: &[u32]) -> Vec<u32> {
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// KNN over the full feature space.
///
/// Returns the winning label and the per-class neighbor-fraction scores.
pub fn knn_classify(
    config: KnnConfig,
    train: &[Vec<f64>],
    labels: &[u32],
    query: &[f64],
) -> Result<(u32, ClassScores)> {
    let all: Vec<usize> = (0..query.len()).collect();
    knn_on_subspace(config, train, labels, &sorted_classes(labels), query, &all)
}

fn knn_on_subspace(
    config: KnnConfig,
    train: &[Vec<f64>],
    labels: &[u32],
    classes: &[u32],
    query: &[f64],
    dims: &[usize],
) -> Result<(u32, ClassScores)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if config.k == 0 || config.k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {} out of range for {} training rows",
            config.k,
            train.len()
        )));
    }
    if train.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: train.len(),
            actual: labels.len(),
        });
    }

    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(train.len());
    for (row, feat) in train.iter().enumerate() {
        if feat.len() != query.len() {
            return Err(Error::LengthMismatch {
                expected: query.len(),
                actual: feat.len(),
            });
        }
        let mut d = 0.0f64;
        for &dim in dims {
            let diff = query[dim] - feat[dim];
            d += diff * diff;
        }
        dists.push((d, row));
    }
    // distance ties break toward the lower row index
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut scores = vec![0.0f64; classes.len()];
    for &(_, row) in dists.iter().take(config.k) {
        let ci = classes.binary_search(&labels[row]).expect("known class");
        scores[ci] += 1.0;
    }
    for s in &mut scores {
        *s /= config.k as f64;
    }

    let scores = ClassScores {
        classes: classes.to_vec(),
        scores,
    };
    Ok((scores.argmax_label(), scores))
}

/// Store the training set and draw `n_learners` feature subsets of size
/// `d_sub` without replacement, deterministically from `seed`.
pub fn train_rsknn(
    features: Vec<Vec<f64>>,
    labels: Vec<u32>,
    n_learners: usize,
    d_sub: usize,
    k: usize,
    seed_value: u64,
    population_fit: PopulationFit,
) -> Result<RskModel> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::InvalidArgument("inconsistent feature dimensions".into()));
    }
    if d_sub == 0 || d_sub > dim {
        return Err(Error::InvalidArgument(format!(
            "d_sub = {d_sub} out of range [1, {dim}]"
        )));
    }
    if n_learners == 0 {
        return Err(Error::InvalidArgument("n_learners must be >= 1".into()));
    }
    if k == 0 || k > features.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for {} training rows",
            features.len()
        )));
    }

    let mut rng = seed::rng(seed_value, "subspaces", &[]);
    let learners = (0..n_learners)
        .map(|_| {
            let mut idx = sample(&mut rng, dim, d_sub).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();

    Ok(RskModel {
        training_features: features,
        labels,
        learners,
        knn: KnnConfig { k },
        seed: seed_value,
        population_fit,
    })
}

/// Average the per-learner KNN scores; the class with the highest average
/// wins, ties to the lower class id.
pub fn rsknn_classify(model: &RskModel, query: &[f64]) -> Result<(u32, ClassScores)> {
    let dim = model.training_features[0].len();
    if query.len() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: query.len(),
        });
    }
    let classes = sorted_classes(&model.labels);
    let mut acc = vec![0.0f64; classes.len()];
    for dims in &model.learners {
        let (_, scores) = knn_on_subspace(
            model.knn,
            &model.training_features,
            &model.labels,
            &classes,
            query,
            dims,
        )?;
        for (a, s) in acc.iter_mut().zip(&scores.scores) {
            *a += s;
        }
    }
    for a in &mut acc {
        *a /= model.learners.len() as f64;
    }
    let scores = ClassScores {
        classes,
        scores: acc,
    };
    Ok((scores.argmax_label(), scores))
}

/// Whether compensation is applied before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compensation {
    Off,
    On,
}

/// Accuracy within one SNR bucket.
#[derive(Debug, Clone)]
pub struct SnrAccuracy {
    pub snr_db: f64,
    pub total: usize,
    pub correct: usize,
    /// (true label, predicted label) -> count.
    pub confusion: BTreeMap<(u32, u32), usize>,
}

impl SnrAccuracy {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Classify every test row, bucketed by its SNR metadata.
///
/// With compensation on, each row passes through the model's effective
/// energy fit and the noise-offset subtraction before scoring; rows must
/// then be normalized SCPSDs carrying an SNR value.
pub fn evaluate_accuracy(
    model: &RskModel,
    test: &[FeatureVector],
    compensation: Compensation,
    ctx: &SpectralContext,
) -> Result<Vec<SnrAccuracy>> {
    let predictions: Vec<(i64, u32, u32)> = test
        .par_iter()
        .map(|row| {
            if row.snr_db.is_nan() {
                return Err(Error::MissingSnr(row.frame_id));
            }
            let label = match compensation {
                Compensation::Off => rsknn_classify(model, &row.values)?.0,
                Compensation::On => {
                    let comp = compensate(
                        row,
                        row.snr_db,
                        model.population_fit.effective(),
                        ctx,
                    )?;
                    rsknn_classify(model, &comp.values)?.0
                }
            };
            // bucket key at 0.01 dB granularity
            Ok(((row.snr_db * 100.0).round() as i64, row.device_id, label))
        })
        .collect::<Result<_>>()?;

    let mut buckets: BTreeMap<i64, SnrAccuracy> = BTreeMap::new();
    for (key, truth, predicted) in predictions {
        let entry = buckets.entry(key).or_insert_with(|| SnrAccuracy {
            snr_db: key as f64 / 100.0,
            total: 0,
            correct: 0,
            confusion: BTreeMap::new(),
        });
        entry.total += 1;
        if truth == predicted {
            entry.correct += 1;
        }
        *entry.confusion.entry((truth, predicted)).or_insert(0) += 1;
    }
    Ok(buckets.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antinoise::{EnergyFit, FitMode};

    fn dummy_fit() -> PopulationFit {
        PopulationFit {
            per_device: BTreeMap::new(),
            averaged: EnergyFit { a: 0.8, b: 0.1, c: 1.0, rms_residual: 0.0 },
            pooled: EnergyFit { a: 0.8, b: 0.1, c: 1.0, rms_residual: 0.0 },
            mode: FitMode::Averaged,
        }
    }

    #[test]
    fn self_match_with_k1() {
        let train = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![10.0, 0.0]];
        let labels = vec![0, 0, 1];
        let (label, scores) = knn_classify(KnnConfig { k: 1 }, &train, &labels, &[10.0, 0.0]).unwrap();
        assert_eq!(label, 1);
        assert_eq!(scores.scores, vec![0.0, 1.0]);
    }

    #[test]
    fn toy_2d_three_point_oracle() {
        // {(0,0):A, (1,0):A, (10,0):B}, query (0.4, 0), k = 3 -> A with 2/3
        let train = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![10.0, 0.0]];
        let labels = vec![0, 0, 1];
        let (label, scores) = knn_classify(KnnConfig { k: 3 }, &train, &labels, &[0.4, 0.0]).unwrap();
        assert_eq!(label, 0);
        assert!((scores.scores[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((scores.scores[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_ties_break_to_lower_row() {
        // duplicate points, k = 1: the lower row index wins
        let train = vec![vec![1.0], vec![1.0]];
        let labels = vec![5, 3];
        let (label, _) = knn_classify(KnnConfig { k: 1 }, &train, &labels, &[1.0]).unwrap();
        assert_eq!(label, 5, "row 0 must win the tie");
    }

    #[test]
    fn score_ties_break_to_lower_class_id() {
        let train = vec![vec![0.0], vec![2.0]];
        let labels = vec![7, 2];
        let (label, _) = knn_classify(KnnConfig { k: 2 }, &train, &labels, &[1.0]).unwrap();
        assert_eq!(label, 2);
    }

    #[test]
    fn k_larger_than_train_errors() {
        let train = vec![vec![0.0]];
        assert!(knn_classify(KnnConfig { k: 2 }, &train, &[0], &[0.0]).is_err());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let train = vec![vec![0.0, 1.0]];
        assert!(knn_classify(KnnConfig { k: 1 }, &train, &[0], &[0.0]).is_err());
    }

    fn toy_training() -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3u32 {
            for i in 0..10 {
                let base = c as f64 * 10.0;
                features.push(vec![
                    base + (i as f64) * 0.01,
                    base - (i as f64) * 0.02,
                    (i as f64) * 0.05,
                    base,
                ]);
                labels.push(c);
            }
        }
        (features, labels)
    }

    #[test]
    fn degenerate_ensemble_equals_plain_knn() {
        let (features, labels) = toy_training();
        let model = train_rsknn(features.clone(), labels.clone(), 1, 4, 3, 7, dummy_fit()).unwrap();
        assert_eq!(model.learners, vec![vec![0, 1, 2, 3]]);
        for q in [
            vec![0.5, 0.5, 0.1, 0.2],
            vec![10.2, 9.8, 0.3, 10.0],
            vec![22.0, 19.5, 0.0, 20.0],
        ] {
            let (l1, s1) = knn_classify(KnnConfig { k: 3 }, &features, &labels, &q).unwrap();
            let (l2, s2) = rsknn_classify(&model, &q).unwrap();
            assert_eq!(l1, l2);
            assert_eq!(s1, s2);
        }
    }

    #[test]
    fn subsets_are_deterministic_and_well_formed() {
        let (features, labels) = toy_training();
        let a = train_rsknn(features.clone(), labels.clone(), 30, 2, 3, 11, dummy_fit()).unwrap();
        let b = train_rsknn(features, labels, 30, 2, 3, 11, dummy_fit()).unwrap();
        assert_eq!(a.learners, b.learners);
        for subset in &a.learners {
            assert_eq!(subset.len(), 2);
            assert!(subset[0] < subset[1]);
            assert!(subset[1] < 4);
        }
    }

    #[test]
    fn larger_subset_structure() {
        let features = vec![vec![0.0; 160]; 10];
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let model = train_rsknn(features, labels, 30, 80, 3, 7, dummy_fit()).unwrap();
        for subset in &model.learners {
            assert_eq!(subset.len(), 80);
            let mut dedup = subset.clone();
            dedup.dedup();
            assert_eq!(dedup.len(), 80, "duplicate index in subset");
            assert!(*subset.last().unwrap() < 160);
        }
    }

    #[test]
    fn two_learner_d1_matches_hand_average() {
        // 3 classes in 2D; learner 0 sees dim 0, learner 1 sees dim 1
        let features = vec![
            vec![0.0, 5.0],
            vec![1.0, 0.0],
            vec![5.0, 1.0],
        ];
        let labels = vec![0, 1, 2];
        let mut model = train_rsknn(features.clone(), labels.clone(), 2, 1, 1, 7, dummy_fit()).unwrap();
        model.learners = vec![vec![0], vec![1]];

        let query = vec![0.2, 0.9];
        // learner 0 (dim 0): nearest is row 0 (class 0)
        // learner 1 (dim 1): nearest is row 2 (class 2)
        let (label, scores) = rsknn_classify(&model, &query).unwrap();
        assert_eq!(scores.scores, vec![0.5, 0.0, 0.5]);
        assert_eq!(label, 0, "score tie goes to lower class id");
    }

    #[test]
    fn bimodal_class_is_recovered_when_cluster_trained() {
        // class 0 occupies two clusters; query in the second cluster
        let features = vec![
            vec![0.0, 0.0],
            vec![100.0, 100.0],
            vec![50.0, 0.0],
        ];
        let labels = vec![0, 0, 1];
        let (label, _) = knn_classify(KnnConfig { k: 1 }, &features, &labels, &[99.0, 101.0]).unwrap();
        assert_eq!(label, 0);
    }

    #[test]
    fn scores_sum_to_one() {
        let (features, labels) = toy_training();
        let model = train_rsknn(features.clone(), labels.clone(), 5, 2, 3, 13, dummy_fit()).unwrap();
        let q = vec![3.0, 2.0, 0.5, 1.0];
        let (_, s1) = knn_classify(KnnConfig { k: 3 }, &features, &labels, &q).unwrap();
        assert!((s1.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (_, s2) = rsknn_classify(&model, &q).unwrap();
        assert!((s2.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s2.scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn permutation_invariance_with_distinct_distances() {
        let (mut features, mut labels) = toy_training();
        let queries: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64 * 2.3 + 0.123, i as f64, 0.5, i as f64 * 1.7])
            .collect();
        let before: Vec<u32> = queries
            .iter()
            .map(|q| knn_classify(KnnConfig { k: 3 }, &features, &labels, q).unwrap().0)
            .collect();
        // reverse training order
        features.reverse();
        labels.reverse();
        let after: Vec<u32> = queries
            .iter()
            .map(|q| knn_classify(KnnConfig { k: 3 }, &features, &labels, q).unwrap().0)
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn evaluate_memorization_and_empty() {
        let (features, labels) = toy_training();
        let model = train_rsknn(features.clone(), labels.clone(), 1, 4, 1, 7, dummy_fit()).unwrap();
        let ctx = SpectralContext {
            x_sq: vec![1.0; 4],
            x_conj_sq: vec![1.0; 4],
            symbol_len: 4,
        };
        let test: Vec<FeatureVector> = features
            .iter()
            .zip(&labels)
            .enumerate()
            .map(|(i, (f, &l))| FeatureVector {
                values: f.clone(),
                device_id: l,
                frame_id: i as u32,
                snr_db: 20.0,
                normalized: true,
                compensated: false,
            })
            .collect();
        let report = evaluate_accuracy(&model, &test, Compensation::Off, &ctx).unwrap();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].accuracy(), 1.0);

        let empty = evaluate_accuracy(&model, &[], Compensation::Off, &ctx).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn evaluate_requires_snr_metadata() {
        let (features, labels) = toy_training();
        let model = train_rsknn(features.clone(), labels, 1, 4, 1, 7, dummy_fit()).unwrap();
        let ctx = SpectralContext {
            x_sq: vec![1.0; 4],
            x_conj_sq: vec![1.0; 4],
            symbol_len: 4,
        };
        let test = vec![FeatureVector {
            values: features[0].clone(),
            device_id: 0,
            frame_id: 9,
            snr_db: f64::NAN,
            normalized: true,
            compensated: false,
        }];
        assert!(matches!(
            evaluate_accuracy(&model, &test, Compensation::Off, &ctx),
            Err(Error::MissingSnr(9))
        ));
    }
}
