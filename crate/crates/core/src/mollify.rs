//! Differentiable forward model with smoothed resets.
//!
//! The hard reset map is replaced by the partial discharge
//! `D_zeta(z; theta) = (1 - H_zeta(z - theta)) z`, gated on the unreset
//! continuation value `z` sampled a short dwell after the bisected
//! crossing. The crossing time itself is located exactly as in the hard
//! model, so as `zeta` grows the trajectory converges to the hard-reset
//! one while staying differentiable in every parameter at finite `zeta`.
//!
//! Each neuron's integration is recorded as a sequence of *pieces*
//! (midpoint sub-steps between grid points and event times). The reverse
//! pass walks the pieces backward, converts cotangents on event times into
//! cotangents on earlier states through the implicit root condition of the
//! bisection, and hands drive-value cotangents to the caller, which splits
//! them into gain and upstream-spike-time sensitivities. Event times are
//! therefore fully differentiated: sensitivities flow from the loss
//! through output accumulators, hidden spike cascades, and the input
//! neuron back to every trainable scalar.

use crate::current::{
    gaussian_current, gaussian_current_deriv, gaussian_current_with_sensitivity,
    pool_spike_times,
};
use crate::error::{Error, Result};
use crate::integrate::{
    discharge, discharge_deriv, midpoint_step, ConstantDrive, CurrentDrive, Drive, EVENT_TOL,
    MAX_EVENTS_PER_STEP,
};
use crate::params::{StructuralParams, TrainableParams};
use crate::spike::{readout, ResetEvent, SnnOutput, SpikeTrain, Trajectory};

/// Drive with a time derivative, needed by the reverse pass.
pub trait DriveGrad: Drive {
    /// `d g / d t` at time `t`.
    fn time_deriv(&self, t: f64) -> f64;
}

impl DriveGrad for ConstantDrive {
    fn time_deriv(&self, _t: f64) -> f64 {
        0.0
    }
}

impl DriveGrad for CurrentDrive<'_> {
    fn time_deriv(&self, t: f64) -> f64 {
        self.gain * gaussian_current_deriv(self.times, self.mu, t)
    }
}

/// Dwell after a crossing at which the discharge gate samples the unreset
/// continuation: a fraction of the membrane time constant, capped by the
/// bump width when the drive is bump-shaped.
pub fn discharge_dwell(tau: f64, mu: Option<f64>) -> f64 {
    match mu {
        Some(mu) => (tau / 10.0).min(2.0 * mu),
        None => tau / 10.0,
    }
}

/// One recorded midpoint sub-step from `(t0, y0)` to `t1`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    t0: f64,
    t1: f64,
    y0: f64,
    /// Event index when `t0` is an event time (so `y0` is its post value).
    t0_ev: Option<u32>,
    /// Event index when `t1` is an event time located by this piece.
    t1_ev: Option<u32>,
}

/// One smoothed reset.
#[derive(Debug, Clone, Copy)]
struct EventRec {
    t: f64,
    z: f64,
}

/// Recorded integration of one membrane.
pub(crate) struct NeuronTape {
    tau: f64,
    theta: f64,
    zeta: f64,
    dwell: f64,
    pieces: Vec<Piece>,
    events: Vec<EventRec>,
    /// Final potential at the horizon.
    pub(crate) final_value: f64,
    /// Grid-sampled trajectory, for inspection and convergence checks.
    pub(crate) trajectory: Trajectory,
    /// Event times as a spike train.
    pub(crate) spikes: SpikeTrain,
}

/// Partial derivatives of one midpoint sub-step `y1 = F(y0, t0, t1)`.
struct StepPartials {
    d_y0: f64,
    d_g1: f64,
    d_g2: f64,
    d_t0: f64,
    d_t1: f64,
}

fn step_partials<D: DriveGrad + ?Sized>(
    drive: &D,
    tau: f64,
    t0: f64,
    y0: f64,
    t1: f64,
    need_time: bool,
) -> StepPartials {
    let eta = t1 - t0;
    let tm = 0.5 * (t0 + t1);
    let g1 = drive.value(t0);
    let g2 = drive.value(tm);
    let k1 = (g1 - y0) / tau;
    let ym = y0 + 0.5 * eta * k1;
    let k2 = (g2 - ym) / tau;
    let d_y0 = 1.0 - (eta / tau) * (1.0 - eta / (2.0 * tau));
    let d_g1 = -eta * eta / (2.0 * tau * tau);
    let d_g2 = eta / tau;
    let (d_t0, d_t1) = if need_time {
        let gp1 = drive.time_deriv(t0);
        let gp2 = drive.time_deriv(tm);
        // d/dt0: eta shrinks, both eval times move (tm by half).
        let dk1 = gp1 / tau;
        let dym = -0.5 * k1 + 0.5 * eta * dk1;
        let dk2 = (0.5 * gp2 - dym) / tau;
        let d_t0 = -k2 + eta * dk2;
        // d/dt1: eta grows, tm moves by half.
        let dym1 = 0.5 * k1;
        let dk21 = (0.5 * gp2 - dym1) / tau;
        let d_t1 = k2 + eta * dk21;
        (d_t0, d_t1)
    } else {
        (0.0, 0.0)
    };
    StepPartials { d_y0, d_g1, d_g2, d_t0, d_t1 }
}

/// Locates a crossing of `theta` in `(t_anchor, t_hi]` on the in-step
/// midpoint model, by bisection to the value tolerance.
fn bisect_crossing<D: Drive + ?Sized>(
    drive: &D,
    tau: f64,
    theta: f64,
    t_anchor: f64,
    y_anchor: f64,
    t_hi: f64,
) -> f64 {
    let tol = EVENT_TOL * theta.abs().max(f64::MIN_POSITIVE);
    let mut lo = t_anchor;
    let mut hi = t_hi;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let y = midpoint_step(drive, tau, t_anchor, y_anchor, mid);
        if (y - theta).abs() <= tol {
            return mid;
        }
        if y < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Integrates one membrane with smoothed resets, recording the tape.
/// `theta = None` disables events (output accumulators).
pub(crate) fn forward_neuron<D: DriveGrad + ?Sized>(
    drive: &D,
    tau: f64,
    theta: Option<f64>,
    zeta: f64,
    dwell: f64,
    horizon: f64,
    grid_step: f64,
    neuron: (usize, usize),
) -> Result<NeuronTape> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    let n_steps = (horizon / grid_step).ceil().max(1.0) as usize;
    let h = horizon / n_steps as f64;
    let theta_gate = theta.unwrap_or(f64::INFINITY);

    let mut pieces = Vec::with_capacity(n_steps);
    let mut events: Vec<EventRec> = Vec::new();
    let mut resets = Vec::new();
    let mut grid = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);

    let mut y = 0.0;
    grid.push(0.0);
    values.push(y);

    for n in 0..n_steps {
        let t0 = n as f64 * h;
        let t1 = if n + 1 == n_steps { horizon } else { (n + 1) as f64 * h };
        let mut seg_t = t0;
        let mut seg_y = y;
        let mut seg_ev: Option<u32> = None;
        for k in 0..=MAX_EVENTS_PER_STEP {
            if k == MAX_EVENTS_PER_STEP {
                return Err(Error::ResourceExhausted(format!(
                    "more than {MAX_EVENTS_PER_STEP} resets in one grid step near t={seg_t}"
                )));
            }
            let y_end = midpoint_step(drive, tau, seg_t, seg_y, t1);
            if !(seg_y < theta_gate && y_end >= theta_gate) {
                pieces.push(Piece { t0: seg_t, t1, y0: seg_y, t0_ev: seg_ev, t1_ev: None });
                seg_y = y_end;
                break;
            }
            let theta = theta_gate;
            let t_star = bisect_crossing(drive, tau, theta, seg_t, seg_y, t1);
            let pre = midpoint_step(drive, tau, seg_t, seg_y, t_star);
            let z = midpoint_step(drive, tau, t_star, pre, t_star + dwell);
            let post = discharge(zeta, z, theta);
            let ev = events.len() as u32;
            pieces.push(Piece { t0: seg_t, t1: t_star, y0: seg_y, t0_ev: seg_ev, t1_ev: Some(ev) });
            events.push(EventRec { t: t_star, z });
            resets.push(ResetEvent { time: t_star, pre, post });
            seg_t = t_star;
            seg_y = post;
            seg_ev = Some(ev);
            if t_star >= t1 {
                break;
            }
        }
        y = seg_y;
        if !y.is_finite() || y.abs() > 1e12 {
            return Err(Error::Divergence(format!(
                "potential {y} at t={t1} for neuron {neuron:?}"
            )));
        }
        grid.push(t1);
        values.push(y);
    }

    let spike_times: Vec<f64> = events.iter().map(|e| e.t).collect();
    Ok(NeuronTape {
        tau,
        theta: theta_gate,
        zeta,
        dwell,
        pieces,
        events,
        final_value: y,
        trajectory: Trajectory { grid, values, resets },
        spikes: SpikeTrain { times: spike_times, neuron },
    })
}

impl NeuronTape {
    /// Reverse pass over the tape. `lam_final` is the cotangent on the
    /// final potential; `lam_events[i]` carries cotangents on event time
    /// `i` accumulated by downstream consumers. Drive-value cotangents are
    /// handed to `sink(t, lam)`; the residual cotangent on `y(0)` is
    /// discarded (the initial state is the constant zero).
    pub(crate) fn reverse<D: DriveGrad + ?Sized>(
        &self,
        drive: &D,
        lam_final: f64,
        mut lam_events: Vec<f64>,
        sink: &mut dyn FnMut(f64, f64),
    ) -> Result<()> {
        debug_assert_eq!(lam_events.len(), self.events.len());
        let mut lam_post: Vec<f64> = vec![0.0; self.events.len()];
        let mut lam_y = lam_final;
        for piece in self.pieces.iter().rev() {
            let incoming = match piece.t1_ev {
                None => lam_y,
                Some(ev) => {
                    // The piece located event `ev`: its value output is
                    // pinned at theta, so the incoming state cotangent is
                    // produced by the event transform and root condition
                    // rather than by lam_y.
                    let ev = ev as usize;
                    let rec = self.events[ev];
                    // Discharge chain: post = D(z), z = continuation.
                    let lam_z =
                        lam_post[ev] * discharge_deriv(self.zeta, rec.z, self.theta);
                    if lam_z != 0.0 {
                        let zp = step_partials(
                            drive,
                            self.tau,
                            rec.t,
                            self.theta,
                            rec.t + self.dwell,
                            true,
                        );
                        // Both endpoints of the dwell window ride on t*.
                        lam_events[ev] += lam_z * (zp.d_t0 + zp.d_t1);
                        sink(rec.t, lam_z * zp.d_g1);
                        sink(rec.t + 0.5 * self.dwell, lam_z * zp.d_g2);
                    }
                    // Root condition: F(y0, t0, t*) = theta defines t*.
                    let p = step_partials(drive, self.tau, piece.t0, piece.y0, rec.t, true);
                    let rho = p.d_t1;
                    if rho.abs() < 1e-12 {
                        return Err(Error::Divergence(format!(
                            "tangential threshold crossing at t={}",
                            rec.t
                        )));
                    }
                    let factor = -lam_events[ev] / rho;
                    if factor != 0.0 {
                        sink(piece.t0, factor * p.d_g1);
                        sink(0.5 * (piece.t0 + rec.t), factor * p.d_g2);
                        if let Some(prev) = piece.t0_ev {
                            lam_events[prev as usize] += factor * p.d_t0;
                        }
                    }
                    factor * p.d_y0
                }
            };
            if piece.t1_ev.is_none() {
                // Ordinary sub-step: push the state cotangent back.
                if incoming != 0.0 {
                    let p = step_partials(
                        drive,
                        self.tau,
                        piece.t0,
                        piece.y0,
                        piece.t1,
                        piece.t0_ev.is_some(),
                    );
                    sink(piece.t0, incoming * p.d_g1);
                    sink(0.5 * (piece.t0 + piece.t1), incoming * p.d_g2);
                    if let Some(prev) = piece.t0_ev {
                        lam_events[prev as usize] += incoming * p.d_t0;
                    }
                    lam_y = incoming * p.d_y0;
                } else {
                    lam_y = 0.0;
                }
            } else {
                lam_y = incoming;
            }
            // When the piece starts at an event, the state entering it is
            // that event's post value; bank the cotangent and clear the
            // running one (the locator piece will produce the next).
            if let Some(prev) = piece.t0_ev {
                lam_post[prev as usize] += lam_y;
                lam_y = 0.0;
            }
        }
        Ok(())
    }
}

/// Differentiable forward run of the whole network at one input.
pub struct MollifiedRun {
    pub(crate) input_tape: NeuronTape,
    pub(crate) hidden_tapes: Vec<Vec<NeuronTape>>,
    pub(crate) output_tapes: Vec<NeuronTape>,
    /// Pooled spike times feeding each hidden layer, with the
    /// `(source_neuron, event_index)` origins of every pooled time.
    pub(crate) pools: Vec<(Vec<f64>, Vec<Vec<(usize, usize)>>)>,
    /// Final potentials and readout.
    pub output: SnnOutput,
}

impl MollifiedRun {
    /// Input-neuron spike train.
    pub fn input_spikes(&self) -> &SpikeTrain {
        &self.input_tape.spikes
    }

    /// Spike train of hidden neuron `(layer, p)`, `layer >= 1`.
    pub fn hidden_spikes(&self, layer: usize, p: usize) -> &SpikeTrain {
        &self.hidden_tapes[layer - 1][p].spikes
    }

    /// Grid trajectory of the input neuron.
    pub fn input_trajectory(&self) -> &Trajectory {
        &self.input_tape.trajectory
    }

    /// Grid trajectory of hidden neuron `(layer, p)`.
    pub fn hidden_trajectory(&self, layer: usize, p: usize) -> &Trajectory {
        &self.hidden_tapes[layer - 1][p].trajectory
    }
}

/// Runs the smoothed network forward at sharpness `zeta`, recording tapes
/// for a subsequent reverse pass.
pub fn forward_mollified(
    x: &[f64],
    params: &TrainableParams,
    structure: &StructuralParams,
    zeta: f64,
    grid_step: f64,
) -> Result<MollifiedRun> {
    structure.validate()?;
    params.validate(structure)?;
    if structure.layers() == 0 {
        return Err(Error::InvalidArgument("need at least one hidden layer".into()));
    }
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zeta must be positive, got {zeta}"
        )));
    }
    if x.len() != structure.input_dim {
        return Err(Error::InvalidArgument(format!(
            "input has dim {}, structure expects {}",
            x.len(),
            structure.input_dim
        )));
    }
    let c: f64 = params.input_weights.iter().zip(x).map(|(a, b)| a * b).sum();
    let input_tape = forward_neuron(
        &ConstantDrive(c),
        structure.tau_v,
        Some(structure.theta_v),
        zeta,
        discharge_dwell(structure.tau_v, None),
        structure.horizon,
        grid_step,
        (0, 0),
    )?;

    let mut pools = Vec::with_capacity(structure.layers());
    let first_pool = pool_spike_times(&[input_tape.spikes.times.as_slice()]);
    pools.push(first_pool);

    let mut hidden_tapes: Vec<Vec<NeuronTape>> = Vec::with_capacity(structure.layers());
    for layer in 1..=structure.layers() {
        let pool = &pools[layer - 1].0;
        let mut layer_tapes = Vec::with_capacity(structure.width());
        for p in 0..structure.width() {
            let tau = structure.tau_hidden[layer - 1][p];
            let drive = CurrentDrive {
                times: pool,
                mu: structure.mu,
                gain: params.hidden_gains[layer - 1][p],
            };
            layer_tapes.push(forward_neuron(
                &drive,
                tau,
                Some(structure.theta_hidden[layer - 1][p]),
                zeta,
                discharge_dwell(tau, Some(structure.mu)),
                structure.horizon,
                grid_step,
                (layer, p),
            )?);
        }
        if layer < structure.layers() {
            let sources: Vec<&[f64]> = layer_tapes
                .iter()
                .map(|t| t.spikes.times.as_slice())
                .collect();
            pools.push(pool_spike_times(&sources));
        }
        hidden_tapes.push(layer_tapes);
    }

    let last = hidden_tapes.last().unwrap();
    let mut output_tapes = Vec::with_capacity(structure.width());
    let mut finals = Vec::with_capacity(structure.width());
    for (p, tape) in last.iter().enumerate() {
        let drive = CurrentDrive {
            times: &tape.spikes.times,
            mu: structure.mu,
            gain: params.output_gain,
        };
        let out_tape = forward_neuron(
            &drive,
            structure.tau_u,
            None,
            zeta,
            0.0,
            structure.horizon,
            grid_step,
            (structure.layers() + 1, p),
        )?;
        finals.push(out_tape.final_value);
        output_tapes.push(out_tape);
    }
    let r = readout(&finals, &params.readout_weights, structure.theta_u);
    Ok(MollifiedRun {
        input_tape,
        hidden_tapes,
        output_tapes,
        pools,
        output: SnnOutput { final_potentials: finals, readout: r },
    })
}

impl MollifiedRun {
    /// Pushes cotangents on the final potentials back to the input,
    /// hidden, and output gains. Returns a gradient container of the same
    /// shape as the parameters with `readout_weights` left at zero (the
    /// readout is an explicit function handled by the caller).
    pub(crate) fn backward(
        &self,
        params: &TrainableParams,
        structure: &StructuralParams,
        x: &[f64],
        lam_final_potentials: &[f64],
    ) -> Result<TrainableParams> {
        let layers = structure.layers();
        let width = structure.width();
        let mu = structure.mu;
        let mut grad = TrainableParams {
            input_weights: vec![0.0; params.input_weights.len()],
            hidden_gains: vec![vec![0.0; width]; layers],
            output_gain: 0.0,
            readout_weights: vec![0.0; width],
        };

        // Output accumulators: collect cotangents on the last hidden
        // layer's spike times and on the shared output gain.
        let mut lam_hidden_events: Vec<Vec<f64>> = self.hidden_tapes[layers - 1]
            .iter()
            .map(|t| vec![0.0; t.events.len()])
            .collect();
        for (p, tape) in self.output_tapes.iter().enumerate() {
            let times = &self.hidden_tapes[layers - 1][p].spikes.times;
            let drive = CurrentDrive { times, mu, gain: params.output_gain };
            let lam_target = &mut lam_hidden_events[p];
            let mut grad_w = 0.0;
            {
                let mut sink = |t: f64, lam: f64| {
                    if lam == 0.0 {
                        return;
                    }
                    let (j, sens) = gaussian_current_with_sensitivity(times, mu, t);
                    grad_w += lam * j;
                    for (idx, ds) in sens {
                        lam_target[idx] += lam * params.output_gain * ds;
                    }
                };
                tape.reverse(&drive, lam_final_potentials[p], Vec::new(), &mut sink)?;
            }
            grad.output_gain += grad_w;
        }

        // Hidden layers, deepest first.
        for layer in (1..=layers).rev() {
            let pool = &self.pools[layer - 1].0;
            let mut lam_pool = vec![0.0; pool.len()];
            for (p, tape) in self.hidden_tapes[layer - 1].iter().enumerate() {
                let gain = params.hidden_gains[layer - 1][p];
                let drive = CurrentDrive { times: pool, mu, gain };
                let lam_events = std::mem::take(&mut lam_hidden_events[p]);
                let mut grad_gain = 0.0;
                {
                    let lam_pool = &mut lam_pool;
                    let mut sink = |t: f64, lam: f64| {
                        if lam == 0.0 {
                            return;
                        }
                        let (j, sens) = gaussian_current_with_sensitivity(pool, mu, t);
                        grad_gain += lam * j;
                        for (idx, ds) in sens {
                            lam_pool[idx] += lam * gain * ds;
                        }
                    };
                    tape.reverse(&drive, 0.0, lam_events, &mut sink)?;
                }
                grad.hidden_gains[layer - 1][p] += grad_gain;
            }
            // Route pooled-time cotangents to their source events. A
            // coalesced pooled time equals its first member's time, so the
            // cotangent belongs to that member.
            let origins = &self.pools[layer - 1].1;
            if layer == 1 {
                let mut lam_input = vec![0.0; self.input_tape.events.len()];
                for (lam, members) in lam_pool.iter().zip(origins) {
                    let (_, ev) = members[0];
                    lam_input[ev] += lam;
                }
                let drive = ConstantDrive(
                    params.input_weights.iter().zip(x).map(|(a, b)| a * b).sum(),
                );
                let mut lam_c = 0.0;
                {
                    let mut sink = |_t: f64, lam: f64| {
                        lam_c += lam;
                    };
                    self.input_tape.reverse(&drive, 0.0, lam_input, &mut sink)?;
                }
                for (g, &xi) in grad.input_weights.iter_mut().zip(x) {
                    *g += lam_c * xi;
                }
            } else {
                lam_hidden_events = self.hidden_tapes[layer - 2]
                    .iter()
                    .map(|t| vec![0.0; t.events.len()])
                    .collect();
                for (lam, members) in lam_pool.iter().zip(origins) {
                    let (src, ev) = members[0];
                    lam_hidden_events[src][ev] += lam;
                }
            }
        }
        Ok(grad)
    }
}

/// Convergence report of the smoothed model toward the hard-reset one
/// across a ladder of sharpness values.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvergenceReport {
    /// Sharpness ladder, increasing.
    pub zetas: Vec<f64>,
    /// Sup-norm trajectory gap (over input and hidden neurons, on the
    /// shared grid) per ladder rung.
    pub trajectory_gaps: Vec<f64>,
    /// Worst per-spike time gap per rung; infinite when spike counts
    /// differ.
    pub spike_gaps: Vec<f64>,
    /// Smallest |drive slope| over the hard run's crossings.
    pub min_crossing_slope: f64,
    /// True when every crossing is transversal (slope above `1e-6`).
    pub transversal: bool,
    /// True when both gap sequences are non-increasing and the final rung
    /// is below the given tolerances.
    pub verdict: bool,
}

/// Compares smoothed and hard forward runs across a sharpness ladder.
pub fn verify_mollified_convergence(
    x: &[f64],
    params: &TrainableParams,
    structure: &StructuralParams,
    zetas: &[f64],
    grid_step: f64,
    tol_trajectory: f64,
    tol_spike: f64,
) -> Result<ConvergenceReport> {
    if zetas.is_empty() || zetas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "need a strictly increasing, non-empty zeta ladder".into(),
        ));
    }
    let hard = crate::lif::forward(x, params, structure, grid_step)?;

    // Transversality of the hard run's crossings.
    let mut min_slope = f64::INFINITY;
    {
        let c: f64 = params.input_weights.iter().zip(x).map(|(a, b)| a * b).sum();
        for r in &hard.input.trajectory.resets {
            min_slope = min_slope.min(((c - structure.theta_v) / structure.tau_v).abs());
            let _ = r;
        }
        let mut pool: Vec<f64> = hard.input.spikes.times.clone();
        for (l, layer_runs) in hard.hidden.iter().enumerate() {
            for (p, run) in layer_runs.iter().enumerate() {
                let gain = params.hidden_gains[l][p];
                for r in &run.trajectory.resets {
                    let j = gaussian_current(&pool, structure.mu, r.time);
                    let slope =
                        (gain * j - structure.theta_hidden[l][p]) / structure.tau_hidden[l][p];
                    min_slope = min_slope.min(slope.abs());
                }
            }
            let sources: Vec<&[f64]> =
                layer_runs.iter().map(|r| r.spikes.times.as_slice()).collect();
            pool = pool_spike_times(&sources).0;
        }
    }
    let transversal = min_slope > 1e-6;

    let mut trajectory_gaps = Vec::with_capacity(zetas.len());
    let mut spike_gaps = Vec::with_capacity(zetas.len());
    for &zeta in zetas {
        let moll = forward_mollified(x, params, structure, zeta, grid_step)?;
        let mut tgap = 0.0f64;
        let mut sgap = 0.0f64;
        let mut pairs: Vec<(&Trajectory, &SpikeTrain)> = Vec::new();
        pairs.push((&hard.input.trajectory, &hard.input.spikes));
        for layer_runs in &hard.hidden {
            for run in layer_runs {
                pairs.push((&run.trajectory, &run.spikes));
            }
        }
        let mut moll_pairs: Vec<(&Trajectory, &SpikeTrain)> =
            vec![(moll.input_trajectory(), moll.input_spikes())];
        for layer in 1..=structure.layers() {
            for p in 0..structure.width() {
                moll_pairs.push((moll.hidden_trajectory(layer, p), moll.hidden_spikes(layer, p)));
            }
        }
        for ((ht, hs), (mt, ms)) in pairs.iter().zip(&moll_pairs) {
            for (a, b) in ht.values.iter().zip(&mt.values) {
                tgap = tgap.max((a - b).abs());
            }
            if hs.len() != ms.len() {
                sgap = f64::INFINITY;
            } else {
                for (a, b) in hs.times.iter().zip(&ms.times) {
                    sgap = sgap.max((a - b).abs());
                }
            }
        }
        trajectory_gaps.push(tgap);
        spike_gaps.push(sgap);
    }

    let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let verdict = transversal
        && non_increasing(&trajectory_gaps)
        && non_increasing(&spike_gaps)
        && *trajectory_gaps.last().unwrap() <= tol_trajectory
        && *spike_gaps.last().unwrap() <= tol_spike;
    Ok(ConvergenceReport {
        zetas: zetas.to_vec(),
        trajectory_gaps,
        spike_gaps,
        min_crossing_slope: min_slope,
        transversal,
        verdict,
    })
}

/// Re-exported smooth step for outside callers.
pub use crate::integrate::{discharge as discharge_map, mollifier as smooth_step};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::Reset;
    use rand::SeedableRng;

    fn structure() -> StructuralParams {
        StructuralParams::uniform(60.0, 8.0, 0.8, 6.0, 0.25, 10.0, 0.3, 0.2, 1, 8, 2)
    }

    #[test]
    fn mollified_matches_simulate_neuron() {
        // The tape-recording integrator and the plain one implement the
        // same scheme; their trajectories must agree to roundoff.
        let drive = ConstantDrive(1.6);
        let tape = forward_neuron(&drive, 8.0, Some(0.8), 10.0, 0.8, 30.0, 0.01, (0, 0)).unwrap();
        let plain = crate::integrate::simulate_neuron(
            &drive,
            8.0,
            Some(0.8),
            Reset::Mollified { zeta: 10.0, dwell: 0.8 },
            30.0,
            0.01,
            (0, 0),
        )
        .unwrap();
        assert_eq!(tape.spikes.times.len(), plain.spikes.times.len());
        for (a, b) in tape.trajectory.values.iter().zip(&plain.trajectory.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn network_convergence_ladder() {
        let s = StructuralParams::uniform(9.0, 8.0, 0.8, 5.0, 0.25, 10.0, 0.3, 0.3, 1, 4, 2);
        let params = TrainableParams {
            input_weights: vec![1.8, 0.4],
            hidden_gains: vec![vec![2.0, 2.3, 1.8, 2.1]],
            output_gain: 0.8,
            readout_weights: vec![0.5, -0.4, 0.3, 0.2],
        };
        let report = verify_mollified_convergence(
            &[0.9, 0.3],
            &params,
            &s,
            &[3.0, 10.0, 30.0, 100.0, 300.0],
            0.004,
            1e-3 * 0.25,
            0.004,
        )
        .unwrap();
        assert!(report.transversal, "slope {}", report.min_crossing_slope);
        assert!(report.verdict, "report {report:?}");
    }

    #[test]
    fn very_sharp_gate_reproduces_hard_run() {
        let s = structure();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let params = TrainableParams::random(&s, &mut rng);
        let hard = crate::lif::forward(&[0.8, -0.3], &params, &s, 0.01).unwrap();
        let moll = forward_mollified(&[0.8, -0.3], &params, &s, 1e6, 0.01).unwrap();
        for (a, b) in hard
            .output
            .final_potentials
            .iter()
            .zip(&moll.output.final_potentials)
        {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!((hard.output.readout - moll.output.readout).abs() < 1e-4);
    }
}
