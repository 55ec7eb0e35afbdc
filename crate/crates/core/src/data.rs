//! Two-moons dataset generation, stratified splitting, and binary
//! classification metrics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labeled binary-classification dataset in the plane (or any fixed
/// dimension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Inputs.
    pub xs: Vec<Vec<f64>>,
    /// Labels, 0 or 1.
    pub ys: Vec<u8>,
}

impl Dataset {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    /// True when the dataset holds no samples.
    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }
}

/// Samples the interleaved two-moons dataset: class 0 on the upper arc
/// `(cos phi, sin phi)`, class 1 on the shifted lower arc
/// `(1 - cos phi, 1/2 - sin phi)`, `phi` uniform on `[0, pi]`, with
/// isotropic Gaussian noise of the given standard deviation. Classes are
/// balanced to within one sample.
pub fn make_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if noise < 0.0 || !noise.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise must be non-negative, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n0 = n / 2 + n % 2;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let phi: f64 = rng.gen_range(0.0..=std::f64::consts::PI);
        let (mut px, mut py, label) = if i < n0 {
            (phi.cos(), phi.sin(), 0u8)
        } else {
            (1.0 - phi.cos(), 0.5 - phi.sin(), 1u8)
        };
        if noise > 0.0 {
            px += normal.sample(&mut rng);
            py += normal.sample(&mut rng);
        }
        xs.push(vec![px, py]);
        ys.push(label);
    }
    Ok(Dataset { xs, ys })
}

/// Index split of a dataset into train/validation/test parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Training indices.
    pub train: Vec<usize>,
    /// Validation indices.
    pub validation: Vec<usize>,
    /// Test indices.
    pub test: Vec<usize>,
}

impl Split {
    /// Materializes one part as an owned dataset.
    pub fn take(&self, data: &Dataset, part: &[usize]) -> Dataset {
        Dataset {
            xs: part.iter().map(|&i| data.xs[i].clone()).collect(),
            ys: part.iter().map(|&i| data.ys[i]).collect(),
        }
    }
}

/// Allocates `total` into parts proportional to `fractions` by largest
/// remainder.
fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let ideal: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|v| v.floor() as usize).collect();
    let mut remaining = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[i] += 1;
        remaining -= 1;
    }
    counts
}

/// Stratified shuffled split with the given fractions (must sum to 1).
/// Global part sizes follow largest-remainder rounding of `n * fraction`;
/// within each class the same rule applies, adjusted so the global sizes
/// are met exactly. Class proportions per part are within one sample of
/// the overall proportions.
pub fn split_dataset(data: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|&f| !(0.0..=1.0).contains(&f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(Error::InvalidArgument(format!(
            "fractions must be in [0,1] and sum to 1, got {fr:?}"
        )));
    }
    let n = data.len();
    let global = apportion(n, &fr);

    // Shuffle indices per class.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    for (i, &y) in data.ys.iter().enumerate() {
        if y > 1 {
            return Err(Error::InvalidArgument(format!("label {y} is not binary")));
        }
        by_class[y as usize].push(i);
    }
    for class in by_class.iter_mut() {
        // Fisher-Yates.
        for i in (1..class.len()).rev() {
            let j = rng.gen_range(0..=i);
            class.swap(i, j);
        }
    }

    // Per-class quotas by largest remainder, then fix any global mismatch
    // by moving single samples between parts of the larger class.
    let mut quota: Vec<Vec<usize>> = by_class
        .iter()
        .map(|class| apportion(class.len(), &fr))
        .collect();
    for part in 0..3 {
        let mut have: usize = quota.iter().map(|q| q[part]).sum();
        while have > global[part] {
            // Take one away from the class with the larger quota, give it
            // to the most underfull part of the same class.
            let c = if quota[0][part] >= quota[1][part] { 0 } else { 1 };
            let under = (0..3)
                .filter(|&p| {
                    quota.iter().map(|q| q[p]).sum::<usize>() < global[p]
                })
                .next()
                .ok_or_else(|| Error::InvalidArgument("inconsistent apportionment".into()))?;
            quota[c][part] -= 1;
            quota[c][under] += 1;
            have -= 1;
        }
    }

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for (class, q) in by_class.iter().zip(&quota) {
        let mut offset = 0;
        for part in 0..3 {
            parts[part].extend_from_slice(&class[offset..offset + q[part]]);
            offset += q[part];
        }
    }
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    let mut it = parts.into_iter();
    Ok(Split {
        train: it.next().unwrap(),
        validation: it.next().unwrap(),
        test: it.next().unwrap(),
    })
}

/// Confusion counts and derived binary metrics at a fixed threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// True positives.
    pub tp: usize,
    /// False positives.
    pub fp: usize,
    /// False negatives.
    pub fn_: usize,
    /// True negatives.
    pub tn: usize,
    /// `(tp + tn) / total`.
    pub accuracy: f64,
    /// `tp / (tp + fp)`; 0 when undefined.
    pub precision: f64,
    /// `tp / (tp + fn)`; 0 when undefined.
    pub recall: f64,
    /// Harmonic mean of precision and recall; 0 when undefined.
    pub f1: f64,
}

/// Computes confusion counts and metrics for scores thresholded at 0.5.
pub fn compute_metrics(scores: &[f64], labels: &[u8]) -> Result<Metrics> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty scores and labels, got {} and {}",
            scores.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        let pred = s >= 0.5;
        match (pred, y) {
            (true, 1) => tp += 1,
            (true, 0) => fp += 1,
            (false, 1) => fn_ += 1,
            (false, 0) => tn += 1,
            _ => return Err(Error::InvalidArgument(format!("label {y} is not binary"))),
        }
    }
    let total = (tp + fp + fn_ + tn) as f64;
    let accuracy = (tp + tn) as f64 / total;
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics { tp, fp, fn_, tn, accuracy, precision, recall, f1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_are_deterministic_and_balanced() {
        let a = make_moons(252, 0.2, 7).unwrap();
        let b = make_moons(252, 0.2, 7).unwrap();
        assert_eq!(a, b);
        let ones = a.ys.iter().filter(|&&y| y == 1).count();
        assert_eq!(ones, 126);
        let c = make_moons(252, 0.2, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_moons_lie_on_the_arcs() {
        let d = make_moons(100, 0.0, 3).unwrap();
        for (x, &y) in d.xs.iter().zip(&d.ys) {
            if y == 0 {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                assert!((r - 1.0).abs() < 1e-12 && x[1] >= 0.0);
            } else {
                let (cx, cy) = (1.0 - x[0], 0.5 - x[1]);
                let r = (cx * cx + cy * cy).sqrt();
                assert!((r - 1.0).abs() < 1e-12 && cy >= 0.0);
            }
        }
    }

    #[test]
    fn noiseless_moons_are_not_linearly_separable() {
        // A perceptron that converges would certify linear separability;
        // it must still be misclassifying after many epochs.
        let d = make_moons(200, 0.0, 1).unwrap();
        let mut w = [0.0f64; 3];
        let mut last_errors = 0;
        for _ in 0..500 {
            last_errors = 0;
            for (x, &y) in d.xs.iter().zip(&d.ys) {
                let s = w[0] * x[0] + w[1] * x[1] + w[2];
                let pred = if s >= 0.0 { 1.0 } else { 0.0 };
                let err = y as f64 - pred;
                if err != 0.0 {
                    last_errors += 1;
                    w[0] += err * x[0];
                    w[1] += err * x[1];
                    w[2] += err;
                }
            }
            if last_errors == 0 {
                break;
            }
        }
        assert!(last_errors > 0, "two moons unexpectedly separated linearly");
    }

    #[test]
    fn split_100_is_70_5_25() {
        let d = make_moons(100, 0.1, 5).unwrap();
        let s = split_dataset(&d, (0.7, 0.05, 0.25), 11).unwrap();
        assert_eq!(s.train.len(), 70);
        assert_eq!(s.validation.len(), 5);
        assert_eq!(s.test.len(), 25);
        // Stratification: class shares within one sample per part.
        for part in [&s.train, &s.validation, &s.test] {
            let ones = part.iter().filter(|&&i| d.ys[i] == 1).count();
            let expect = part.len() as f64 / 2.0;
            assert!((ones as f64 - expect).abs() <= 1.0, "{ones} ones in {}", part.len());
        }
        // Partition property.
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let d = make_moons(252, 0.2, 5).unwrap();
        let a = split_dataset(&d, (0.7, 0.05, 0.25), 9).unwrap();
        let b = split_dataset(&d, (0.7, 0.05, 0.25), 9).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&d, (0.7, 0.05, 0.25), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn metrics_match_reference_confusion() {
        // 63 test points with TP=26 FP=2 FN=5 TN=30.
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..26 {
            scores.push(0.9);
            labels.push(1);
        }
        for _ in 0..2 {
            scores.push(0.9);
            labels.push(0);
        }
        for _ in 0..5 {
            scores.push(0.1);
            labels.push(1);
        }
        for _ in 0..30 {
            scores.push(0.1);
            labels.push(0);
        }
        let m = compute_metrics(&scores, &labels).unwrap();
        assert!((m.accuracy - 0.8889).abs() < 5e-5);
        assert!((m.precision - 0.9286).abs() < 5e-5);
        assert!((m.recall - 0.8387).abs() < 5e-5);
        assert!((m.f1 - 0.8814).abs() < 5e-5);
    }

    #[test]
    fn degenerate_metrics_are_zero_not_nan() {
        let m = compute_metrics(&[0.1, 0.2], &[0, 0]).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.accuracy, 1.0);
    }
}
