//! Spike trains, recorded trajectories, and network outputs, with exact
//! decimal serialization.
//!
//! Text artifacts (CSV and JSON) print floats with 17 significant digits so
//! that parsing them back yields bit-identical `f64` values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Formats a float with enough decimal digits to round-trip exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Strictly increasing spike times inside the open interval `(0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    /// Spike times, strictly increasing.
    pub times: Vec<f64>,
    /// Identity of the emitting neuron as `(layer, index)`; layer 0 is the
    /// input neuron.
    pub neuron: (usize, usize),
}

impl SpikeTrain {
    /// Empty train for a neuron.
    pub fn empty(neuron: (usize, usize)) -> Self {
        SpikeTrain { times: Vec::new(), neuron }
    }

    /// Number of spikes.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when no spike was emitted.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Checks strict ordering and containment in `(0, horizon)`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        for w in self.times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "spike times must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (self.times.first(), self.times.last()) {
            if first <= 0.0 || last >= horizon {
                return Err(Error::InvalidArgument(format!(
                    "spike times must lie in (0, {horizon}); got range [{first}, {last}]"
                )));
            }
        }
        Ok(())
    }

    /// One spike time per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for &t in &self.times {
            out.push_str(&format_f64(t));
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str, neuron: (usize, usize)) -> Result<Self> {
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let t: f64 = line
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            times.push(t);
        }
        Ok(SpikeTrain { times, neuron })
    }
}

/// A hard or mollified reset applied during simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetEvent {
    /// Time of the threshold crossing.
    pub time: f64,
    /// Potential immediately before the reset.
    pub pre: f64,
    /// Potential immediately after the reset.
    pub post: f64,
}

/// A potential sampled on an integration grid, together with the resets
/// applied between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Sample times, uniformly spaced from 0 to the horizon.
    pub grid: Vec<f64>,
    /// Potential at each grid time.
    pub values: Vec<f64>,
    /// Resets in time order.
    pub resets: Vec<ResetEvent>,
}

impl Trajectory {
    /// Checks grid/value agreement and reset ordering.
    pub fn validate(&self) -> Result<()> {
        if self.grid.len() != self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} samples but values has {}",
                self.grid.len(),
                self.values.len()
            )));
        }
        for w in self.resets.windows(2) {
            if !(w[0].time < w[1].time) {
                return Err(Error::InvalidArgument(
                    "reset times must be strictly increasing".into(),
                ));
            }
        }
        if let (Some(&t0), Some(&t1)) = (self.grid.first(), self.grid.last()) {
            for r in &self.resets {
                if r.time < t0 || r.time > t1 {
                    return Err(Error::InvalidArgument(format!(
                        "reset at {} lies outside the grid [{t0}, {t1}]",
                        r.time
                    )));
                }
            }
        }
        Ok(())
    }

    /// `t,value` pairs, one row per grid sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (&t, &v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format_f64(t));
            out.push(',');
            out.push_str(&format_f64(v));
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`to_csv`](Self::to_csv); resets are not part of
    /// the CSV form and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line == "t,value") {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected t,value", i + 1)))?;
            grid.push(
                a.parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?,
            );
            values.push(
                b.parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?,
            );
        }
        Ok(Trajectory { grid, values, resets: Vec::new() })
    }
}

/// Final output-layer state and scalar readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnOutput {
    /// Final accumulator potentials `u_p(T)`.
    pub final_potentials: Vec<f64>,
    /// Logistic readout of the final potentials.
    pub readout: f64,
}

/// Logistic function `1 / (1 + exp(-s))`.
pub fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Derivative of [`logistic`].
pub fn logistic_deriv(s: f64) -> f64 {
    let p = logistic(s);
    p * (1.0 - p)
}

/// Lipschitz constant of the logistic function.
pub const LOGISTIC_LIP: f64 = 0.25;

/// Combines final potentials into the scalar readout
/// `sum_p nu_p * logistic(u_p - theta_u)`.
pub fn readout(final_potentials: &[f64], readout_weights: &[f64], theta_u: f64) -> f64 {
    final_potentials
        .iter()
        .zip(readout_weights)
        .map(|(&u, &nu)| nu * logistic(u - theta_u))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_roundtrips_exactly() {
        for v in [
            0.1,
            -3.0e-17,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            -0.0,
        ] {
            let s = format_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "value {v} via {s}");
        }
    }

    #[test]
    fn spike_train_csv_roundtrip() {
        let train = SpikeTrain {
            times: vec![0.123456789012345678, 1.0 / 7.0, 59.999999],
            neuron: (1, 3),
        };
        let back = SpikeTrain::from_csv(&train.to_csv(), (1, 3)).unwrap();
        assert_eq!(train, back);
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let traj = Trajectory {
            grid: vec![0.0, 0.1 + 1e-17, 0.2],
            values: vec![1.0 / 3.0, -2.0 / 7.0, 0.0],
            resets: Vec::new(),
        };
        traj.validate().unwrap();
        let back = Trajectory::from_csv(&traj.to_csv()).unwrap();
        assert_eq!(traj, back);
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let train = SpikeTrain {
            times: vec![1.0 / 3.0, 2.0 / 3.0, 0.7 + 1e-16],
            neuron: (2, 0),
        };
        let text = serde_json::to_string(&train).unwrap();
        let back: SpikeTrain = serde_json::from_str(&text).unwrap();
        assert_eq!(train, back);
    }

    #[test]
    fn unsorted_spikes_rejected() {
        let train = SpikeTrain { times: vec![2.0, 1.0], neuron: (0, 0) };
        assert!(train.validate(10.0).is_err());
    }

    #[test]
    fn out_of_horizon_spikes_rejected() {
        let train = SpikeTrain { times: vec![1.0, 11.0], neuron: (0, 0) };
        assert!(train.validate(10.0).is_err());
    }

    #[test]
    fn readout_matches_manual_sum() {
        let u = [0.5, -0.2];
        let nu = [1.5, -0.7];
        let theta = 0.3;
        let want = 1.5 * logistic(0.2) + (-0.7) * logistic(-0.5);
        assert!((readout(&u, &nu, theta) - want).abs() < 1e-15);
    }
}
