//! Constructive function encoding.
//!
//! A shallow logistic model `f(x) = sum_p nu_p s(<alpha_p, x>)` is fitted to
//! a target function, and then each unit's pre-activation is realized by a
//! spiking output accumulator: choosing `K` coincident spike times so that
//! the discounted charge `S = sum_k exp(-(T - t_k)/tau_u)` satisfies
//! `(w / tau_u) S = theta_u + <alpha_p, x>` makes the impulse-model readout
//! reproduce `f(x)` exactly; with Gaussian bumps of width `mu` the readout
//! moves by at most `Lip(s) ||nu||_1 K mu |w| / tau_u^2`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lif::delta_output_final;
use crate::params::{StructuralParams, TrainableParams};
use crate::spike::{logistic, logistic_deriv, SpikeTrain, LOGISTIC_LIP};

/// Shallow logistic combination used as an encoding target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowTarget {
    /// Unit directions `alpha_p`.
    pub directions: Vec<Vec<f64>>,
    /// Combination weights `nu_p`.
    pub weights: Vec<f64>,
}

impl ShallowTarget {
    /// Number of units.
    pub fn width(&self) -> usize {
        self.weights.len()
    }

    /// Pre-activations `<alpha_p, x>`.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.directions
            .iter()
            .map(|alpha| {
                if alpha.len() != x.len() {
                    return Err(Error::InvalidArgument(format!(
                        "direction has dim {}, input has dim {}",
                        alpha.len(),
                        x.len()
                    )));
                }
                Ok(alpha.iter().zip(x).map(|(a, b)| a * b).sum())
            })
            .collect()
    }

    /// Model value `sum_p nu_p s(<alpha_p, x>)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .pre_activations(x)?
            .iter()
            .zip(&self.weights)
            .map(|(&z, &nu)| nu * logistic(z))
            .sum())
    }

    /// `||nu||_1`.
    pub fn weight_l1(&self) -> f64 {
        self.weights.iter().map(|v| v.abs()).sum()
    }
}

/// Outcome of [`fit_shallow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Root-mean-square residual on the training samples.
    pub rms: f64,
    /// Gradient-descent iterations performed.
    pub iterations: usize,
    /// Final step size after any halving.
    pub step: f64,
}

/// Fits a width-`width` shallow logistic model to samples `(x_i, y_i)` by
/// full-batch gradient descent on the mean squared error. The step halves
/// whenever a proposed update would increase the loss.
pub fn fit_shallow(
    xs: &[Vec<f64>],
    ys: &[f64],
    width: usize,
    step: f64,
    iterations: usize,
    seed: u64,
) -> Result<(ShallowTarget, FitReport)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty samples, got {} inputs and {} values",
            xs.len(),
            ys.len()
        )));
    }
    if width == 0 {
        return Err(Error::InvalidArgument("width must be at least 1".into()));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let dim = xs[0].len();
    if xs.iter().any(|x| x.len() != dim) {
        return Err(Error::InvalidArgument("inconsistent sample dimensions".into()));
    }
    let n = xs.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ShallowTarget {
        directions: (0..width)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect(),
        weights: (0..width).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
    };

    let loss_of = |m: &ShallowTarget| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let e = m.eval(x).unwrap() - y;
                e * e
            })
            .sum::<f64>()
            / n
    };

    let mut lr = step;
    let mut loss = loss_of(&model);
    let mut done = 0;
    for _ in 0..iterations {
        // Accumulate the full-batch gradient.
        let mut g_dirs = vec![vec![0.0; dim]; width];
        let mut g_weights = vec![0.0; width];
        for (x, &y) in xs.iter().zip(ys) {
            let pre = model.pre_activations(x)?;
            let value: f64 = pre
                .iter()
                .zip(&model.weights)
                .map(|(&z, &nu)| nu * logistic(z))
                .sum();
            let e = 2.0 * (value - y) / n;
            for p in 0..width {
                g_weights[p] += e * logistic(pre[p]);
                let slope = e * model.weights[p] * logistic_deriv(pre[p]);
                for (gd, &xi) in g_dirs[p].iter_mut().zip(x) {
                    *gd += slope * xi;
                }
            }
        }
        // Propose, and halve the step until the loss stops increasing.
        loop {
            let mut trial = model.clone();
            for p in 0..width {
                trial.weights[p] -= lr * g_weights[p];
                for (t, &g) in trial.directions[p].iter_mut().zip(&g_dirs[p]) {
                    *t -= lr * g;
                }
            }
            let trial_loss = loss_of(&trial);
            if trial_loss <= loss + 1e-12 || lr < 1e-12 {
                model = trial;
                loss = trial_loss;
                break;
            }
            lr *= 0.5;
        }
        done += 1;
        if loss.sqrt() < 1e-12 {
            break;
        }
    }
    Ok((model, FitReport { rms: loss.sqrt(), iterations: done, step: lr }))
}

/// Spike-time realization of a shallow model at one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UaEncoding {
    /// Spikes per unit.
    pub k: usize,
    /// Output gain the design assumed.
    pub w: f64,
    /// Output time constant.
    pub tau_u: f64,
    /// Readout offset.
    pub theta_u: f64,
    /// Horizon.
    pub horizon: f64,
    /// Required discounted charge `S_p` per unit.
    pub charges: Vec<f64>,
    /// Designed spike trains (empty for infeasible units).
    pub trains: Vec<SpikeTrain>,
    /// True when every unit admitted a realization.
    pub feasible: bool,
    /// Units whose required charge fell outside `[K e^{-T/tau_u}, K]`.
    pub infeasible_units: Vec<usize>,
    /// Units whose designed time landed on the interval boundary and was
    /// nudged inward.
    pub boundary_units: Vec<usize>,
}

/// Designs `K` coincident spike times per unit realizing the shallow
/// model's pre-activations at `x` through the impulse output model.
pub fn design_spike_times(
    shallow: &ShallowTarget,
    x: &[f64],
    k: usize,
    w: f64,
    tau_u: f64,
    theta_u: f64,
    horizon: f64,
) -> Result<UaEncoding> {
    if w == 0.0 || !w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "output gain must be nonzero and finite, got {w}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one spike per unit".into()));
    }
    if !(tau_u > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidArgument(
            "tau_u and horizon must be positive".into(),
        ));
    }
    let pre = shallow.pre_activations(x)?;
    let mut charges = Vec::with_capacity(pre.len());
    let mut trains = Vec::with_capacity(pre.len());
    let mut infeasible_units = Vec::new();
    let mut boundary_units = Vec::new();
    let s_min = k as f64 * (-horizon / tau_u).exp();
    let s_max = k as f64;
    for (p, &z) in pre.iter().enumerate() {
        let s = (tau_u / w) * (theta_u + z);
        charges.push(s);
        if !(s >= s_min && s <= s_max) {
            infeasible_units.push(p);
            trains.push(SpikeTrain::empty((1, p)));
            continue;
        }
        let mut t = horizon - tau_u * (k as f64 / s).ln();
        // Keep the train strictly inside (0, horizon).
        let nudge = 1e-9 * horizon;
        if t <= 0.0 || t >= horizon {
            boundary_units.push(p);
            t = t.max(nudge).min(horizon - nudge);
        }
        trains.push(SpikeTrain { times: vec![t; k], neuron: (1, p) });
    }
    // Coincident times are a valid multiset realization but not a strictly
    // increasing train; spread them by 1 ulp-scale offsets would change the
    // charge, so the multiset is kept as-is and validated only for range.
    Ok(UaEncoding {
        k,
        w,
        tau_u,
        theta_u,
        horizon,
        charges,
        trains,
        feasible: infeasible_units.is_empty(),
        infeasible_units,
        boundary_units,
    })
}

/// Verification report for one encoding at one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingCheck {
    /// Target value `f_P(x)`.
    pub target: f64,
    /// Readout under the impulse output model.
    pub delta_readout: f64,
    /// `|delta_readout - target|`.
    pub delta_error: f64,
    /// Readout with Gaussian bumps of the structure's width.
    pub gaussian_readout: f64,
    /// `|gaussian_readout - delta_readout|`.
    pub gaussian_gap: f64,
    /// A-priori gap bound `Lip(s) ||nu||_1 K mu |w| / tau_u^2`.
    pub bound: f64,
    /// `delta_error <= 1e-9` and `gaussian_gap <= bound`.
    pub ok: bool,
}

/// Checks an encoding against its shallow target: the impulse model must
/// reproduce `f_P(x)` to `1e-9`, and the Gaussian-bump simulation must stay
/// within the a-priori readout bound.
pub fn verify_encoding(
    encoding: &UaEncoding,
    shallow: &ShallowTarget,
    x: &[f64],
    mu: f64,
    grid_step: f64,
) -> Result<EncodingCheck> {
    if !encoding.feasible {
        return Err(Error::InvalidArgument(
            "cannot verify an encoding with infeasible units".into(),
        ));
    }
    if shallow.width() != encoding.trains.len() {
        return Err(Error::InvalidArgument(format!(
            "shallow width {} does not match encoding width {}",
            shallow.width(),
            encoding.trains.len()
        )));
    }
    let target = shallow.eval(x)?;
    let delta_readout: f64 = encoding
        .trains
        .iter()
        .zip(&shallow.weights)
        .map(|(train, &nu)| {
            let u = delta_output_final(&train.times, encoding.w, encoding.tau_u, encoding.horizon);
            nu * logistic(u - encoding.theta_u)
        })
        .sum();
    let structure = StructuralParams::uniform(
        encoding.horizon,
        encoding.tau_u, // input stage unused here; any positive value
        1.0,
        encoding.tau_u,
        1.0,
        encoding.tau_u,
        encoding.theta_u,
        mu,
        1,
        shallow.width(),
        x.len().max(1),
    );
    let params = TrainableParams {
        input_weights: vec![0.0; structure.input_dim],
        hidden_gains: vec![vec![0.0; shallow.width()]],
        output_gain: encoding.w,
        readout_weights: shallow.weights.clone(),
    };
    let (_, out) = crate::lif::simulate_output(&encoding.trains, &params, &structure, grid_step)?;
    let gaussian_readout = out.readout;
    let delta_error = (delta_readout - target).abs();
    let gaussian_gap = (gaussian_readout - delta_readout).abs();
    let bound = LOGISTIC_LIP
        * shallow.weight_l1()
        * encoding.k as f64
        * mu
        * encoding.w.abs()
        / (encoding.tau_u * encoding.tau_u);
    Ok(EncodingCheck {
        target,
        delta_readout,
        delta_error,
        gaussian_readout,
        gaussian_gap,
        bound,
        ok: delta_error <= 1e-9 && gaussian_gap <= bound,
    })
}

/// Largest Gaussian width keeping the readout within `epsilon` of the
/// impulse model with margin two: `epsilon tau_u^2 / (2 K |w| ||nu||_1 Lip(s))`.
pub fn mu_budget(epsilon: f64, k: usize, w: f64, nu_l1: f64, tau_u: f64) -> Result<f64> {
    if epsilon < 0.0 {
        return Err(Error::InvalidArgument("epsilon must be non-negative".into()));
    }
    if k == 0 || w == 0.0 || nu_l1 == 0.0 || tau_u <= 0.0 {
        return Err(Error::InvalidArgument(
            "mu budget needs k >= 1, nonzero w and ||nu||_1, positive tau_u".into(),
        ));
    }
    Ok(epsilon * tau_u * tau_u / (2.0 * k as f64 * w.abs() * nu_l1 * LOGISTIC_LIP))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_samples(n_side: usize) -> Vec<Vec<f64>> {
        let mut xs = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                let u = -1.0 + 2.0 * i as f64 / (n_side - 1) as f64;
                let v = -1.0 + 2.0 * j as f64 / (n_side - 1) as f64;
                xs.push(vec![u, v]);
            }
        }
        xs
    }

    #[test]
    fn constant_target_fits_easily() {
        let xs = grid_samples(10);
        let ys = vec![0.4; xs.len()];
        let (_, report) = fit_shallow(&xs, &ys, 4, 0.5, 2000, 1).unwrap();
        assert!(report.rms < 0.01, "rms {}", report.rms);
    }

    #[test]
    fn design_is_exact_under_impulse_model() {
        let shallow = ShallowTarget {
            directions: vec![vec![0.8, -0.3], vec![-0.5, 0.2], vec![0.1, 0.9]],
            weights: vec![0.7, -0.4, 0.9],
        };
        let x = [0.3, 0.1];
        let enc = design_spike_times(&shallow, &x, 3, 5.0, 10.0, 0.3, 60.0).unwrap();
        assert!(enc.feasible, "infeasible units {:?}", enc.infeasible_units);
        let check = verify_encoding(&enc, &shallow, &x, 0.2, 0.002).unwrap();
        assert!(check.delta_error <= 1e-9, "delta error {}", check.delta_error);
        assert!(check.gaussian_gap <= check.bound, "{} > {}", check.gaussian_gap, check.bound);

        // The designed discounted charge matches the impulse model exactly.
        for (train, &s) in enc.trains.iter().zip(&enc.charges) {
            let u = delta_output_final(&train.times, enc.w, enc.tau_u, enc.horizon);
            assert!((u - enc.w / enc.tau_u * s).abs() <= 1e-10);
        }
    }

    #[test]
    fn out_of_range_charge_is_flagged() {
        let shallow = ShallowTarget {
            directions: vec![vec![50.0, 0.0]],
            weights: vec![1.0],
        };
        // Pre-activation 50 needs S = 503 >> K: infeasible.
        let enc = design_spike_times(&shallow, &[1.0, 0.0], 3, 1.0, 10.0, 0.3, 60.0).unwrap();
        assert!(!enc.feasible);
        assert_eq!(enc.infeasible_units, vec![0]);
        assert!(verify_encoding(&enc, &shallow, &[1.0, 0.0], 0.2, 0.01).is_err());
    }

    #[test]
    fn zero_gain_is_rejected() {
        let shallow = ShallowTarget { directions: vec![vec![1.0]], weights: vec![1.0] };
        assert!(design_spike_times(&shallow, &[1.0], 3, 0.0, 10.0, 0.3, 60.0).is_err());
    }

    #[test]
    fn mu_budget_formula() {
        // epsilon tau^2 / (2 K |w| ||nu|| Lip) with Lip = 1/4.
        let b = mu_budget(0.01, 3, 1.0, 2.0, 10.0).unwrap();
        assert!((b - 0.01 * 100.0 / (2.0 * 3.0 * 2.0 * 0.25)).abs() < 1e-15);
        assert_eq!(mu_budget(0.0, 3, 1.0, 2.0, 10.0).unwrap(), 0.0);
        assert!(mu_budget(0.01, 0, 1.0, 2.0, 10.0).is_err());
    }

    #[test]
    fn budgeted_mu_respects_epsilon() {
        let shallow = ShallowTarget {
            directions: vec![vec![0.6, 0.2], vec![-0.3, 0.4]],
            weights: vec![0.8, -0.5],
        };
        let x = [0.5, 0.5];
        let enc = design_spike_times(&shallow, &x, 3, 5.0, 10.0, 0.3, 60.0).unwrap();
        let eps = 1e-3;
        let mu = mu_budget(eps, enc.k, enc.w, shallow.weight_l1(), enc.tau_u).unwrap();
        let check = verify_encoding(&enc, &shallow, &x, mu, 0.0005).unwrap();
        assert!(check.gaussian_gap <= eps, "gap {} vs epsilon {eps}", check.gaussian_gap);
    }
}
