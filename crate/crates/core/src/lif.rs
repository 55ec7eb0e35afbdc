//! Network-level simulation: exact input-layer spike times, numerical
//! hidden/output integration, and the instantaneous-impulse reference model
//! for the output stage.

use crate::current::pool_spike_times;
use crate::error::{Error, Result};
use crate::integrate::{simulate_neuron, ConstantDrive, CurrentDrive, NeuronRun, Reset};
use crate::params::{StructuralParams, TrainableParams};
use crate::spike::{readout, SnnOutput, SpikeTrain, Trajectory};

/// Inner product guarded against shape mismatch.
fn dot(a: &[f64], x: &[f64]) -> Result<f64> {
    if a.len() != x.len() {
        return Err(Error::InvalidArgument(format!(
            "weight/input length mismatch: {} vs {}",
            a.len(),
            x.len()
        )));
    }
    Ok(a.iter().zip(x).map(|(p, q)| p * q).sum())
}

/// Firing period of the input neuron under constant drive `c`:
/// `beta = tau_v ln(c / (c - theta_v))`, defined only for `c > theta_v`.
pub fn input_period(c: f64, tau_v: f64, theta_v: f64) -> Option<f64> {
    if c > theta_v {
        Some(tau_v * (c / (c - theta_v)).ln())
    } else {
        None
    }
}

/// Exact input-layer spike times: the potential rises as
/// `c (1 - exp(-t/tau_v))` from every reset, so spikes fall at
/// `k beta` for `k = 1..floor(T / beta)`; a drive at or below threshold
/// yields an empty train.
pub fn input_spike_times(
    input_weights: &[f64],
    x: &[f64],
    structure: &StructuralParams,
) -> Result<SpikeTrain> {
    structure.validate()?;
    let c = dot(input_weights, x)?;
    let mut times = Vec::new();
    if let Some(beta) = input_period(c, structure.tau_v, structure.theta_v) {
        let count = (structure.horizon / beta).floor() as usize;
        for k in 1..=count {
            let t = k as f64 * beta;
            // floor() puts t <= T; keep the train strictly inside (0, T).
            if t < structure.horizon {
                times.push(t);
            }
        }
    }
    Ok(SpikeTrain { times, neuron: (0, 0) })
}

/// Numerically integrates the input neuron with hard resets.
pub fn simulate_input(
    input_weights: &[f64],
    x: &[f64],
    structure: &StructuralParams,
    grid_step: f64,
) -> Result<NeuronRun> {
    structure.validate()?;
    let c = dot(input_weights, x)?;
    simulate_neuron(
        &ConstantDrive(c),
        structure.tau_v,
        Some(structure.theta_v),
        Reset::Hard,
        structure.horizon,
        grid_step,
        (0, 0),
    )
}

/// Integrates one hidden layer against a pooled presynaptic spike list.
/// Layer indices are 1-based to match the input neuron's layer 0.
pub fn simulate_hidden(
    layer: usize,
    presyn_pool: &[f64],
    gains: &[f64],
    structure: &StructuralParams,
    grid_step: f64,
) -> Result<Vec<NeuronRun>> {
    structure.validate()?;
    if layer == 0 || layer > structure.layers() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range 1..={}",
            structure.layers()
        )));
    }
    if gains.len() != structure.width() {
        return Err(Error::InvalidArgument(format!(
            "gains has length {}, expected {}",
            gains.len(),
            structure.width()
        )));
    }
    if presyn_pool.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "presynaptic spike times must be sorted".into(),
        ));
    }
    let mut runs = Vec::with_capacity(gains.len());
    for (p, &gain) in gains.iter().enumerate() {
        let drive = CurrentDrive { times: presyn_pool, mu: structure.mu, gain };
        runs.push(simulate_neuron(
            &drive,
            structure.tau_hidden[layer - 1][p],
            Some(structure.theta_hidden[layer - 1][p]),
            Reset::Hard,
            structure.horizon,
            grid_step,
            (layer, p),
        )?);
    }
    Ok(runs)
}

/// Integrates the reset-free output accumulators, one per final-layer
/// neuron, and forms the logistic readout.
pub fn simulate_output(
    presyn_per_neuron: &[SpikeTrain],
    params: &TrainableParams,
    structure: &StructuralParams,
    grid_step: f64,
) -> Result<(Vec<Trajectory>, SnnOutput)> {
    structure.validate()?;
    params.validate(structure)?;
    if presyn_per_neuron.len() != structure.width() {
        return Err(Error::InvalidArgument(format!(
            "expected {} presynaptic trains, got {}",
            structure.width(),
            presyn_per_neuron.len()
        )));
    }
    let mut trajectories = Vec::with_capacity(presyn_per_neuron.len());
    let mut finals = Vec::with_capacity(presyn_per_neuron.len());
    for (p, train) in presyn_per_neuron.iter().enumerate() {
        let drive = CurrentDrive {
            times: &train.times,
            mu: structure.mu,
            gain: params.output_gain,
        };
        let run = simulate_neuron(
            &drive,
            structure.tau_u,
            None,
            Reset::Hard,
            structure.horizon,
            grid_step,
            (structure.layers() + 1, p),
        )?;
        finals.push(*run.trajectory.values.last().unwrap());
        trajectories.push(run.trajectory);
    }
    let r = readout(&finals, &params.readout_weights, structure.theta_u);
    Ok((trajectories, SnnOutput { final_potentials: finals, readout: r }))
}

/// Final accumulator value when every synaptic bump is replaced by an
/// instantaneous impulse: `u(T) = (w / tau_u) sum_k exp(-(T - t_k)/tau_u)`.
pub fn delta_output_final(spike_times: &[f64], output_gain: f64, tau_u: f64, horizon: f64) -> f64 {
    let scale = output_gain / tau_u;
    spike_times
        .iter()
        .map(|&t| scale * (-(horizon - t) / tau_u).exp())
        .sum()
}

/// Full hard-reset forward pass.
pub struct ForwardRun {
    /// Input-neuron run.
    pub input: NeuronRun,
    /// Hidden runs, `layers x width`.
    pub hidden: Vec<Vec<NeuronRun>>,
    /// Output accumulator trajectories.
    pub output_trajectories: Vec<Trajectory>,
    /// Final potentials and readout.
    pub output: SnnOutput,
}

/// Simulates the whole network on one input.
pub fn forward(
    x: &[f64],
    params: &TrainableParams,
    structure: &StructuralParams,
    grid_step: f64,
) -> Result<ForwardRun> {
    structure.validate()?;
    params.validate(structure)?;
    let input = simulate_input(&params.input_weights, x, structure, grid_step)?;

    let mut pool: Vec<f64> = input.spikes.times.clone();
    let mut hidden: Vec<Vec<NeuronRun>> = Vec::with_capacity(structure.layers());
    for layer in 1..=structure.layers() {
        let runs = simulate_hidden(
            layer,
            &pool,
            &params.hidden_gains[layer - 1],
            structure,
            grid_step,
        )?;
        let sources: Vec<&[f64]> = runs.iter().map(|r| r.spikes.times.as_slice()).collect();
        pool = pool_spike_times(&sources).0;
        hidden.push(runs);
    }

    let last: Vec<SpikeTrain> = hidden
        .last()
        .map(|runs| runs.iter().map(|r| r.spikes.clone()).collect())
        .unwrap_or_default();
    let (output_trajectories, output) =
        simulate_output(&last, params, structure, grid_step)?;
    Ok(ForwardRun { input, hidden, output_trajectories, output })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::logistic;

    fn structure() -> StructuralParams {
        StructuralParams::uniform(60.0, 8.0, 0.8, 6.0, 0.25, 10.0, 0.3, 0.2, 1, 8, 2)
    }

    #[test]
    fn subthreshold_input_gives_empty_train() {
        let s = structure();
        let train = input_spike_times(&[0.5, 0.0], &[1.0, 1.0], &s).unwrap();
        assert!(train.is_empty());
        // Boundary case: drive exactly at threshold never crosses.
        let train = input_spike_times(&[0.8, 0.0], &[1.0, 0.0], &s).unwrap();
        assert!(train.is_empty());
    }

    #[test]
    fn input_train_is_periodic_with_floor_count() {
        let s = structure();
        // c = 1.6: beta = 8 ln 2, K = floor(60 / beta).
        let train = input_spike_times(&[1.6, 0.0], &[1.0, 0.0], &s).unwrap();
        let beta = 8.0 * 2.0f64.ln();
        assert_eq!(train.len(), (60.0 / beta) as usize);
        for (k, &t) in train.times.iter().enumerate() {
            assert!((t - (k + 1) as f64 * beta).abs() < 1e-12);
        }
        train.validate(s.horizon).unwrap();
    }

    #[test]
    fn simulated_input_matches_closed_form() {
        let s = structure();
        let a = [1.6, 0.3];
        let x = [0.9, 0.7];
        let exact = input_spike_times(&a, &x, &s).unwrap();
        let run = simulate_input(&a, &x, &s, 0.002).unwrap();
        assert_eq!(run.spikes.len(), exact.len());
        for (sim, want) in run.spikes.times.iter().zip(&exact.times) {
            assert!(
                (sim - want).abs() <= 1e-6 * s.horizon,
                "simulated {sim} vs exact {want}"
            );
        }
    }

    #[test]
    fn consecutive_simulated_resets_share_the_period() {
        let s = structure();
        let a = [1.9, 0.0];
        let x = [1.0, 0.0];
        let c = 1.9;
        let beta = input_period(c, s.tau_v, s.theta_v).unwrap();
        let run = simulate_input(&a, &x, &s, 0.001).unwrap();
        for w in run.spikes.times.windows(2) {
            assert!((w[1] - w[0] - beta).abs() < 1e-6);
        }
    }

    #[test]
    fn delta_model_example() {
        // Single spike at T - tau_u: contribution (w/tau_u) e^{-1}.
        let got = delta_output_final(&[50.0], 1.0, 10.0, 60.0);
        assert!((got - 0.1 * (-1.0f64).exp()).abs() < 1e-15);
        // Empty train gives zero.
        assert_eq!(delta_output_final(&[], 1.0, 10.0, 60.0), 0.0);
    }

    #[test]
    fn gaussian_output_close_to_delta_model_bound() {
        // Three interior spikes; the Gaussian-driven accumulator should sit
        // within K mu |w| / tau_u^2 of the impulse model.
        let s = structure();
        let params = TrainableParams {
            input_weights: vec![0.0, 0.0],
            hidden_gains: vec![vec![0.0; 8]],
            output_gain: 1.0,
            readout_weights: vec![1.0; 8],
        };
        let times = vec![20.0, 35.0, 50.0];
        let mut trains: Vec<SpikeTrain> = (0..8)
            .map(|p| SpikeTrain::empty((1, p)))
            .collect();
        trains[0] = SpikeTrain { times: times.clone(), neuron: (1, 0) };
        let (_, out) = simulate_output(&trains, &params, &s, 0.002).unwrap();
        let delta = delta_output_final(&times, 1.0, s.tau_u, s.horizon);
        let bound = 3.0 * s.mu * 1.0 / (s.tau_u * s.tau_u);
        assert!(
            (out.final_potentials[0] - delta).abs() <= bound,
            "gap {} vs bound {bound}",
            (out.final_potentials[0] - delta).abs()
        );
    }

    #[test]
    fn output_grid_convergence_is_second_order() {
        let s = structure();
        let params = TrainableParams {
            input_weights: vec![0.0, 0.0],
            hidden_gains: vec![vec![0.0; 8]],
            output_gain: 1.0,
            readout_weights: vec![1.0; 8],
        };
        let mut trains: Vec<SpikeTrain> =
            (0..8).map(|p| SpikeTrain::empty((1, p))).collect();
        trains[0] = SpikeTrain { times: vec![20.0, 35.0, 50.0], neuron: (1, 0) };
        let u_at = |h: f64| {
            let (_, out) = simulate_output(&trains, &params, &s, h).unwrap();
            out.final_potentials[0]
        };
        let reference = u_at(0.0005);
        let e1 = (u_at(0.008) - reference).abs();
        let e2 = (u_at(0.004) - reference).abs();
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn forward_readout_matches_components() {
        let s = structure();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(42);
        let params = TrainableParams::random(&s, &mut rng);
        let run = forward(&[0.9, -0.4], &params, &s, 0.01).unwrap();
        let manual: f64 = run
            .output
            .final_potentials
            .iter()
            .zip(&params.readout_weights)
            .map(|(&u, &nu)| nu * logistic(u - s.theta_u))
            .sum();
        assert!((run.output.readout - manual).abs() < 1e-14);
    }

    #[test]
    fn hidden_spikes_obey_drive_necessary_condition() {
        // At any detected hidden spike the drive must at least reach the
        // threshold (up to discretization slack).
        let s = structure();
        let pool = [20.0, 35.0, 50.0];
        let runs = simulate_hidden(1, &pool, &[3.0; 8], &s, 0.005).unwrap();
        let mut fired = 0;
        for run in &runs {
            fired += run.spikes.len();
            for &t in &run.spikes.times {
                let j = crate::current::gaussian_current(&pool, s.mu, t);
                assert!(3.0 * j >= 0.25 - 1e-3, "drive {j} too small at {t}");
            }
        }
        assert!(fired > 0, "expected at least one hidden spike");
    }
}
