//! Full-batch gradient descent with an annealed reset sharpness.
//!
//! Early epochs use a soft discharge gate (small `zeta`) so gradients see
//! far around each threshold crossing; the gate is sharpened geometrically
//! toward the hard-reset limit as training proceeds. The step size is
//! halved whenever a step fails to decrease the objective at the current
//! sharpness, which keeps the procedure monotone per rung without any
//! tuning of decay schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::data::{compute_metrics, Dataset, Metrics};
use crate::error::{Error, Result};
use crate::grad::{batch_loss, loss_and_grad, LossConfig};
use crate::params::TrainableParams;

/// Geometric sharpness ramp: `zeta0` at epoch 0, `zeta1` at the last.
pub fn zeta_schedule(zeta0: f64, zeta1: f64, epochs: usize, epoch: usize) -> f64 {
    if epochs <= 1 {
        return zeta1;
    }
    let frac = epoch as f64 / (epochs - 1) as f64;
    zeta0 * (zeta1 / zeta0).powf(frac)
}

/// One epoch of the training history.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    /// Epoch index, from zero.
    pub epoch: usize,
    /// Sharpness used this epoch.
    pub zeta: f64,
    /// Objective after the accepted step.
    pub loss: f64,
    /// Step size after any halvings this epoch.
    pub step: f64,
    /// Hard-reset validation metrics, when a validation set was given.
    pub validation: Option<Metrics>,
}

/// Trained parameters with the per-epoch history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final parameters.
    pub params: TrainableParams,
    /// Per-epoch records.
    pub history: Vec<EpochRecord>,
}

/// Hard-reset readout scores for a set of inputs.
pub fn scores(
    xs: &[Vec<f64>],
    params: &TrainableParams,
    config: &ExperimentConfig,
) -> Result<Vec<f64>> {
    xs.iter()
        .map(|x| {
            crate::lif::forward(x, params, &config.structure, config.grid_step)
                .map(|run| run.output.readout)
        })
        .collect()
}

/// Hard-reset classification metrics on a labeled set.
pub fn evaluate(
    data: &Dataset,
    params: &TrainableParams,
    config: &ExperimentConfig,
) -> Result<Metrics> {
    let s = scores(&data.xs, params, config)?;
    compute_metrics(&s, &data.ys)
}

/// Trains from a seeded random initialization on `train`, tracking
/// hard-reset metrics on `validation` when given.
pub fn train(
    train: &Dataset,
    validation: Option<&Dataset>,
    config: &ExperimentConfig,
) -> Result<TrainOutcome> {
    if train.xs.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let epochs = config.optimizer.epochs;
    if epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    let loss_cfg = LossConfig { gamma: config.optimizer.gamma, ..LossConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    let mut params = TrainableParams::spiking_init(&config.structure, &mut rng);
    let mut step = config.optimizer.step;
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let zeta = zeta_schedule(config.mollifier.zeta0, config.mollifier.zeta1, epochs, epoch);
        let report = loss_and_grad(
            train,
            &params,
            &config.structure,
            zeta,
            config.grid_step,
            &loss_cfg,
        )?;
        let flat = params.flatten();
        let grad = report.grad.flatten();
        let mut accepted = params.clone();
        let mut accepted_loss = report.loss;
        // Backtracking with recovery: a successful step doubles the next
        // epoch's trial step (capped), a failed search resets it. The loss
        // has small jumps where spikes appear or disappear, so a failed
        // search signals a local kink rather than convergence and the step
        // must be allowed to grow back.
        let step_cap = config.optimizer.step * 4.0;
        let mut found = false;
        for _ in 0..12 {
            let moved: Vec<f64> =
                flat.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let candidate = params.unflatten_like(&moved)?;
            match batch_loss(
                train,
                &candidate,
                &config.structure,
                zeta,
                config.grid_step,
                &loss_cfg,
            ) {
                Ok(l) if l <= report.loss => {
                    accepted = candidate;
                    accepted_loss = l;
                    found = true;
                    break;
                }
                // A bad step (higher loss, or a divergence) halves the
                // step.
                Ok(_) | Err(Error::Divergence(_)) | Err(Error::ResourceExhausted(_)) => {
                    step *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        step = if found { (step * 2.0).min(step_cap) } else { config.optimizer.step };
        params = accepted;
        let val = match validation {
            Some(v) if !v.xs.is_empty() => Some(evaluate(v, &params, config)?),
            _ => None,
        };
        history.push(EpochRecord { epoch, zeta, loss: accepted_loss, step, validation: val });
    }
    Ok(TrainOutcome { params, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DatasetConfig, MollifierConfig, OptimizerConfig};
    use crate::params::StructuralParams;

    #[test]
    fn schedule_endpoints_and_monotonicity() {
        let e = 60;
        assert!((zeta_schedule(3.0, 10.0, e, 0) - 3.0).abs() < 1e-12);
        assert!((zeta_schedule(3.0, 10.0, e, e - 1) - 10.0).abs() < 1e-12);
        for k in 1..e {
            assert!(zeta_schedule(3.0, 10.0, e, k) > zeta_schedule(3.0, 10.0, e, k - 1));
        }
        assert_eq!(zeta_schedule(3.0, 10.0, 1, 0), 10.0);
    }

    #[test]
    fn short_run_decreases_loss() {
        let config = ExperimentConfig {
            structure: StructuralParams::uniform(
                12.0, 8.0, 0.8, 5.0, 0.25, 10.0, 0.3, 0.3, 1, 4, 2,
            ),
            grid_step: 0.05,
            dataset: DatasetConfig::default(),
            optimizer: OptimizerConfig { step: 0.1, epochs: 4, gamma: 1e-4 },
            mollifier: MollifierConfig { zeta0: 3.0, zeta1: 6.0 },
            init_seed: 3,
        };
        let data = crate::data::make_moons(16, 0.0, 9).unwrap();
        let outcome = train(&data, None, &config).unwrap();
        assert_eq!(outcome.history.len(), 4);
        let first = outcome.history.first().unwrap().loss;
        let last = outcome.history.last().unwrap().loss;
        assert!(last <= first, "{last} vs {first}");
    }
}
