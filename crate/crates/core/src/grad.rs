//! Loss and exact gradient of the smoothed network.
//!
//! The training objective is mean binary cross-entropy of the clipped
//! readout plus an `l2` penalty on all trainable scalars. The gradient is
//! computed by the reverse pass over the recorded forward tapes
//! ([`crate::mollify`]), which differentiates through event times; the
//! finite-difference routine here serves as an independent oracle on the
//! same discretized objective.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mollify::forward_mollified;
use crate::params::{StructuralParams, TrainableParams};
use crate::spike::{logistic, logistic_deriv};

/// Objective settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    /// Weight of the `l2` penalty on all trainable scalars.
    pub gamma: f64,
    /// Readout clip: probabilities are clamped to `[clip, 1 - clip]`.
    pub clip: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { gamma: 1e-4, clip: 1e-7 }
    }
}

/// Loss value with a gradient of the same shape as the parameters.
#[derive(Debug, Clone)]
pub struct GradientReport {
    /// Objective value.
    pub loss: f64,
    /// Gradient, flattenable in the canonical parameter order.
    pub grad: TrainableParams,
}

fn bce_and_slope(r: f64, y: f64, clip: f64) -> (f64, f64) {
    let z = r.clamp(clip, 1.0 - clip);
    let loss = -(y * z.ln() + (1.0 - y) * (1.0 - z).ln());
    // The clamp kills the data gradient outside the open clip band.
    let slope = if r > clip && r < 1.0 - clip {
        (z - y) / (z * (1.0 - z))
    } else {
        0.0
    };
    (loss, slope)
}

fn l2_penalty(params: &TrainableParams, gamma: f64) -> f64 {
    gamma * params.flatten().iter().map(|v| v * v).sum::<f64>()
}

/// Mean objective over the dataset, without gradients (used by line
/// search and the finite-difference oracle).
pub fn batch_loss(
    data: &Dataset,
    params: &TrainableParams,
    structure: &StructuralParams,
    zeta: f64,
    grid_step: f64,
    cfg: &LossConfig,
) -> Result<f64> {
    if data.xs.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut total = 0.0;
    for (x, &y) in data.xs.iter().zip(&data.ys) {
        let run = forward_mollified(x, params, structure, zeta, grid_step)?;
        let (l, _) = bce_and_slope(run.output.readout, y as f64, cfg.clip);
        total += l;
    }
    Ok(total / data.xs.len() as f64 + l2_penalty(params, cfg.gamma))
}

/// Mean objective and its exact gradient over the dataset.
pub fn loss_and_grad(
    data: &Dataset,
    params: &TrainableParams,
    structure: &StructuralParams,
    zeta: f64,
    grid_step: f64,
    cfg: &LossConfig,
) -> Result<GradientReport> {
    if data.xs.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let n = data.xs.len() as f64;
    let width = structure.width();
    let mut loss = 0.0;
    let mut grad = TrainableParams {
        input_weights: vec![0.0; params.input_weights.len()],
        hidden_gains: vec![vec![0.0; width]; structure.layers()],
        output_gain: 0.0,
        readout_weights: vec![0.0; width],
    };
    for (x, &y) in data.xs.iter().zip(&data.ys) {
        let run = forward_mollified(x, params, structure, zeta, grid_step)?;
        let (l, slope) = bce_and_slope(run.output.readout, y as f64, cfg.clip);
        loss += l;
        let weight = slope / n;
        if weight == 0.0 {
            continue;
        }
        // Readout layer: r = sum_p nu_p sigma(u_p(T) - theta_u).
        let mut lam_u = vec![0.0; width];
        for p in 0..width {
            let s = run.output.final_potentials[p] - structure.theta_u;
            grad.readout_weights[p] += weight * logistic(s);
            lam_u[p] = weight * params.readout_weights[p] * logistic_deriv(s);
        }
        let sample = run.backward(params, structure, x, &lam_u)?;
        for (g, d) in grad.input_weights.iter_mut().zip(&sample.input_weights) {
            *g += d;
        }
        for (gl, dl) in grad.hidden_gains.iter_mut().zip(&sample.hidden_gains) {
            for (g, d) in gl.iter_mut().zip(dl) {
                *g += d;
            }
        }
        grad.output_gain += sample.output_gain;
    }
    // l2 penalty.
    let mut flat = grad.flatten();
    for (g, p) in flat.iter_mut().zip(params.flatten()) {
        *g += 2.0 * cfg.gamma * p;
    }
    let grad = params.unflatten_like(&flat)?;
    Ok(GradientReport { loss: loss / n + l2_penalty(params, cfg.gamma), grad })
}

/// Central finite differences of [`batch_loss`] in the canonical flatten
/// order; step `rel_step * max(|p|, 1)` per coordinate.
pub fn finite_difference_gradient(
    data: &Dataset,
    params: &TrainableParams,
    structure: &StructuralParams,
    zeta: f64,
    grid_step: f64,
    cfg: &LossConfig,
    rel_step: f64,
) -> Result<Vec<f64>> {
    let flat = params.flatten();
    let mut out = Vec::with_capacity(flat.len());
    for i in 0..flat.len() {
        let h = rel_step * flat[i].abs().max(1.0);
        let mut plus = flat.clone();
        plus[i] += h;
        let mut minus = flat.clone();
        minus[i] -= h;
        let lp = batch_loss(data, &params.unflatten_like(&plus)?, structure, zeta, grid_step, cfg)?;
        let lm =
            batch_loss(data, &params.unflatten_like(&minus)?, structure, zeta, grid_step, cfg)?;
        out.push((lp - lm) / (2.0 * h));
    }
    Ok(out)
}

/// Worst relative disagreement between the reverse-pass gradient and the
/// finite-difference oracle, coordinate-wise:
/// `|g - g_fd| / max(|g|, |g_fd|, scale)` where `scale` is the largest
/// gradient magnitude (floored at 1e-10), so tiny coordinates are judged
/// against the problem's own scale rather than against zero.
pub fn gradient_check(
    data: &Dataset,
    params: &TrainableParams,
    structure: &StructuralParams,
    zeta: f64,
    grid_step: f64,
    cfg: &LossConfig,
    rel_step: f64,
) -> Result<f64> {
    let report = loss_and_grad(data, params, structure, zeta, grid_step, cfg)?;
    let adj = report.grad.flatten();
    let fd = finite_difference_gradient(data, params, structure, zeta, grid_step, cfg, rel_step)?;
    let scale = adj
        .iter()
        .chain(&fd)
        .fold(1e-10f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for (a, b) in adj.iter().zip(&fd) {
        let denom = a.abs().max(b.abs()).max(scale);
        worst = worst.max((a - b).abs() / denom);
    }
    Ok(worst)
}
