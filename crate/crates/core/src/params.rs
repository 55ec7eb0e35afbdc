//! Network parameter containers.
//!
//! The architecture is a single input neuron driven by a constant current
//! `<a, x>`, `L` hidden layers of `P` neurons each coupled through Gaussian
//! synaptic bumps, and `P` leak-only output accumulators combined by a
//! logistic readout. Structural constants (time constants, thresholds,
//! bump width, horizon) are fixed at build time; trainable scalars live in
//! [`TrainableParams`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed architecture constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    /// Simulation horizon `T`.
    pub horizon: f64,
    /// Input membrane time constant.
    pub tau_v: f64,
    /// Input firing threshold.
    pub theta_v: f64,
    /// Hidden membrane time constants, one per neuron, `layers x width`.
    pub tau_hidden: Vec<Vec<f64>>,
    /// Hidden firing thresholds, `layers x width`.
    pub theta_hidden: Vec<Vec<f64>>,
    /// Output membrane time constant.
    pub tau_u: f64,
    /// Output readout offset.
    pub theta_u: f64,
    /// Synaptic Gaussian width.
    pub mu: f64,
    /// Input dimension `d`.
    pub input_dim: usize,
}

impl StructuralParams {
    /// Builds a network where every hidden neuron shares the same time
    /// constant and threshold.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        horizon: f64,
        tau_v: f64,
        theta_v: f64,
        tau_hidden: f64,
        theta_hidden: f64,
        tau_u: f64,
        theta_u: f64,
        mu: f64,
        layers: usize,
        width: usize,
        input_dim: usize,
    ) -> Self {
        StructuralParams {
            horizon,
            tau_v,
            theta_v,
            tau_hidden: vec![vec![tau_hidden; width]; layers],
            theta_hidden: vec![vec![theta_hidden; width]; layers],
            tau_u,
            theta_u,
            mu,
            input_dim,
        }
    }

    /// Number of hidden layers.
    pub fn layers(&self) -> usize {
        self.tau_hidden.len()
    }

    /// Hidden-layer width (neurons per layer).
    pub fn width(&self) -> usize {
        self.tau_hidden.first().map_or(0, |row| row.len())
    }

    /// Checks positivity and shape consistency.
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("horizon", self.horizon),
            ("tau_v", self.tau_v),
            ("theta_v", self.theta_v),
            ("tau_u", self.tau_u),
            ("mu", self.mu),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.theta_u.is_finite() {
            return Err(Error::InvalidArgument("theta_u must be finite".into()));
        }
        if self.tau_hidden.len() != self.theta_hidden.len() {
            return Err(Error::InvalidArgument(
                "tau_hidden and theta_hidden must have the same layer count".into(),
            ));
        }
        let width = self.width();
        for (tau_row, theta_row) in self.tau_hidden.iter().zip(&self.theta_hidden) {
            if tau_row.len() != width || theta_row.len() != width {
                return Err(Error::InvalidArgument(
                    "hidden layers must all have the same width".into(),
                ));
            }
            for &tau in tau_row {
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "hidden time constants must be positive, got {tau}"
                    )));
                }
            }
            for &theta in theta_row {
                if !(theta.is_finite() && theta > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "hidden thresholds must be positive, got {theta}"
                    )));
                }
            }
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be at least 1".into()));
        }
        Ok(())
    }

    /// Recommended integrator step: fine enough to resolve the Gaussian
    /// bumps, the fastest membrane, and the horizon.
    pub fn default_grid_step(&self) -> f64 {
        let mut tau_min = self.tau_v.min(self.tau_u);
        for row in &self.tau_hidden {
            for &tau in row {
                tau_min = tau_min.min(tau);
            }
        }
        (self.mu / 10.0).min(tau_min / 20.0).min(self.horizon / 10_000.0)
    }
}

/// Trainable scalars: input weights `a`, per-neuron hidden gains, the
/// shared output gain `w`, and readout weights `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainableParams {
    /// Input weight vector `a`, length `input_dim`.
    pub input_weights: Vec<f64>,
    /// Hidden synaptic gains, `layers x width`.
    pub hidden_gains: Vec<Vec<f64>>,
    /// Shared output synaptic gain.
    pub output_gain: f64,
    /// Readout combination weights, length `width`.
    pub readout_weights: Vec<f64>,
}

impl TrainableParams {
    /// Draws every scalar uniformly from `[-1, 1]` with the given RNG.
    pub fn random<R: rand::Rng>(structure: &StructuralParams, rng: &mut R) -> Self {
        fn draw<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        }
        let input_weights = draw(rng, structure.input_dim);
        let hidden_gains = (0..structure.layers())
            .map(|_| draw(rng, structure.width()))
            .collect();
        let output_gain = rng.gen_range(-1.0..=1.0);
        let readout_weights = draw(rng, structure.width());
        TrainableParams { input_weights, hidden_gains, output_gain, readout_weights }
    }

    /// Draws an initialization inside the firing regime: input weights are
    /// positive multiples of the input threshold so unit-scale inputs can
    /// cross it, hidden gains sit in the one-spike-per-bump charge window
    /// `omega / (tau theta) in [1.4, 2.4]`, and the readout weights are
    /// positive with total mass near one so the readout starts inside
    /// `(0, 1)` where the loss has usable slope.
    pub fn spiking_init<R: rand::Rng>(structure: &StructuralParams, rng: &mut R) -> Self {
        let input_weights = (0..structure.input_dim)
            .map(|_| structure.theta_v * rng.gen_range(0.6..=1.8))
            .collect();
        let hidden_gains = (0..structure.layers())
            .map(|l| {
                (0..structure.width())
                    .map(|p| {
                        structure.tau_hidden[l][p]
                            * structure.theta_hidden[l][p]
                            * rng.gen_range(1.4..=2.4)
                    })
                    .collect()
            })
            .collect();
        let output_gain = rng.gen_range(0.8..=1.6);
        let width = structure.width() as f64;
        let readout_weights =
            (0..structure.width()).map(|_| rng.gen_range(0.6..=1.4) / width).collect();
        TrainableParams { input_weights, hidden_gains, output_gain, readout_weights }
    }

    /// Checks shapes against a structure.
    pub fn validate(&self, structure: &StructuralParams) -> Result<()> {
        if self.input_weights.len() != structure.input_dim {
            return Err(Error::InvalidArgument(format!(
                "input_weights has length {}, expected {}",
                self.input_weights.len(),
                structure.input_dim
            )));
        }
        if self.hidden_gains.len() != structure.layers()
            || self.hidden_gains.iter().any(|row| row.len() != structure.width())
        {
            return Err(Error::InvalidArgument(
                "hidden_gains shape does not match the structure".into(),
            ));
        }
        if self.readout_weights.len() != structure.width() {
            return Err(Error::InvalidArgument(format!(
                "readout_weights has length {}, expected {}",
                self.readout_weights.len(),
                structure.width()
            )));
        }
        let all_finite = self
            .flatten()
            .into_iter()
            .all(f64::is_finite);
        if !all_finite {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        Ok(())
    }

    /// Total scalar count: `d + L*P + 1 + P`.
    pub fn len(&self) -> usize {
        self.input_weights.len()
            + self.hidden_gains.iter().map(Vec::len).sum::<usize>()
            + 1
            + self.readout_weights.len()
    }

    /// True when the container holds no scalars (never, for valid shapes).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattens in the fixed order: input weights, hidden gains row by row,
    /// output gain, readout weights.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.input_weights);
        for row in &self.hidden_gains {
            out.extend_from_slice(row);
        }
        out.push(self.output_gain);
        out.extend_from_slice(&self.readout_weights);
        out
    }

    /// Inverse of [`flatten`](Self::flatten), using `self` as the shape template.
    pub fn unflatten_like(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} scalars, got {}",
                self.len(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        let input_weights = take(self.input_weights.len());
        let hidden_gains = self
            .hidden_gains
            .iter()
            .map(|row| take(row.len()))
            .collect();
        let output_gain = take(1)[0];
        let readout_weights = take(self.readout_weights.len());
        Ok(TrainableParams {
            input_weights,
            hidden_gains,
            output_gain,
            readout_weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn structure() -> StructuralParams {
        StructuralParams::uniform(60.0, 8.0, 0.8, 6.0, 0.25, 10.0, 0.3, 0.2, 1, 8, 2)
    }

    #[test]
    fn uniform_structure_validates() {
        structure().validate().unwrap();
    }

    #[test]
    fn scalar_count_matches_architecture() {
        let s = structure();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let p = TrainableParams::random(&s, &mut rng);
        p.validate(&s).unwrap();
        // d + L*P + 1 + P
        assert_eq!(p.len(), 2 + 8 + 1 + 8);
    }

    #[test]
    fn flatten_roundtrip() {
        let s = structure();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p = TrainableParams::random(&s, &mut rng);
        let flat = p.flatten();
        let q = p.unflatten_like(&flat).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let s = structure();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut p = TrainableParams::random(&s, &mut rng);
        p.readout_weights.pop();
        assert!(p.validate(&s).is_err());
    }

    #[test]
    fn default_grid_step_resolves_bumps() {
        let s = structure();
        let h = s.default_grid_step();
        assert!(h <= s.mu / 10.0);
        assert!(h <= 60.0 / 10_000.0);
    }
}
