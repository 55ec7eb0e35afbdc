//! Spike-pattern analysis for hidden neurons driven by Gaussian bump
//! currents.
//!
//! For well-separated bumps the firing pattern per bump is controlled by
//! two dimensionless quantities: the peak drive `omega / (mu sqrt(2 pi))`
//! relative to the threshold, and the charge ratio
//! `gamma = omega / (tau theta)`. Each bump that clears the threshold
//! produces at least one spike inside its half-width window, and the
//! residual-charge halving argument caps the count per bump at
//! `floor(1 + log2 gamma)`.

use serde::{Deserialize, Serialize};

use crate::current::{bump_peak, gaussian_current, gaussian_current_deriv};
use crate::error::{Error, Result};

/// Separation factor (in units of `mu`) past which bumps are analyzed
/// independently.
pub const SEPARATION_FACTOR: f64 = 6.0;

/// Pattern summary for one neuron against one presynaptic train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpAnalysis {
    /// Presynaptic spike times the analysis refers to.
    pub presyn: Vec<f64>,
    /// Gaussian width.
    pub mu: f64,
    /// Synaptic gain.
    pub omega: f64,
    /// Membrane time constant.
    pub tau: f64,
    /// Firing threshold.
    pub theta: f64,
    /// Smallest gap between consecutive presynaptic spikes (infinite for
    /// fewer than two spikes).
    pub min_gap: f64,
    /// True when every gap exceeds `6 mu`.
    pub separated: bool,
    /// True when a single bump's peak drive clears the threshold.
    pub amplitude_ok: bool,
    /// Half-width of the super-threshold window around each bump center,
    /// `mu sqrt(2 ln(omega / (mu sqrt(2 pi) theta)))`; `None` when the
    /// amplitude condition fails.
    pub half_width: Option<f64>,
    /// Charge ratio `omega / (tau theta)`.
    pub gamma: f64,
    /// Maximum spikes a single bump can produce, `floor(1 + log2 gamma)`,
    /// at least 1 whenever the amplitude condition holds.
    pub n_max: usize,
    /// Total spike-count bounds `(K, K * n_max)`; equal when `gamma < 2`.
    pub count_bounds: (usize, usize),
}

/// Analyzes the firing pattern of a neuron with gain `omega`, time constant
/// `tau`, and threshold `theta` against separated presynaptic bumps.
pub fn analyze_separated(
    presyn: &[f64],
    mu: f64,
    omega: f64,
    tau: f64,
    theta: f64,
) -> Result<BumpAnalysis> {
    for (name, v) in [("mu", mu), ("omega", omega), ("tau", tau), ("theta", theta)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if presyn.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "presynaptic spike times must be sorted".into(),
        ));
    }
    let min_gap = presyn
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let separated = min_gap > SEPARATION_FACTOR * mu;
    let peak = omega * bump_peak(mu);
    let amplitude_ok = peak > theta;
    let half_width = if amplitude_ok {
        Some(mu * (2.0 * (peak / theta).ln()).sqrt())
    } else {
        None
    };
    let gamma = omega / (tau * theta);
    let n_max = if amplitude_ok {
        ((1.0 + gamma.log2()).floor().max(1.0)) as usize
    } else {
        0
    };
    let k = if amplitude_ok { presyn.len() } else { 0 };
    Ok(BumpAnalysis {
        presyn: presyn.to_vec(),
        mu,
        omega,
        tau,
        theta,
        min_gap,
        separated,
        amplitude_ok,
        half_width,
        gamma,
        n_max,
        count_bounds: (k, k * n_max),
    })
}

/// Local maxima of a pooled Gaussian current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaSet {
    /// Presynaptic spike times the maxima refer to.
    pub presyn: Vec<f64>,
    /// Gaussian width.
    pub mu: f64,
    /// Locations of local maxima of the current, increasing.
    pub times: Vec<f64>,
    /// Current value at each maximum.
    pub values: Vec<f64>,
}

/// Finds the local maxima of the summed current by scanning the derivative
/// at `mu / 20` resolution and bisecting each sign change; maxima closer
/// than `1e-2 mu` are merged.
pub fn find_maxima(presyn: &[f64], mu: f64) -> Result<MaximaSet> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu must be positive and finite, got {mu}"
        )));
    }
    if presyn.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "presynaptic spike times must be sorted".into(),
        ));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    if !presyn.is_empty() {
        let lo = presyn[0] - 4.0 * mu;
        let hi = presyn[presyn.len() - 1] + 4.0 * mu;
        let step = mu / 20.0;
        let n = ((hi - lo) / step).ceil() as usize;
        let mut prev_t = lo;
        let mut prev_d = gaussian_current_deriv(presyn, mu, prev_t);
        for i in 1..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let d = gaussian_current_deriv(presyn, mu, t);
            if prev_d > 0.0 && d <= 0.0 {
                // Bisect the derivative's sign change down to ~1e-12 mu.
                let (mut a, mut b) = (prev_t, t);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if gaussian_current_deriv(presyn, mu, m) > 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                let t_max = 0.5 * (a + b);
                match times.last() {
                    Some(&last) if t_max - last < 1e-2 * mu => {}
                    _ => {
                        times.push(t_max);
                        values.push(gaussian_current(presyn, mu, t_max));
                    }
                }
            }
            prev_t = t;
            prev_d = d;
        }
    }
    Ok(MaximaSet { presyn: presyn.to_vec(), mu, times, values })
}

/// Firing regime of a neuron/bump-train pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Separated bumps, `gamma < 2`: exactly one spike per bump.
    Stable,
    /// Separated bumps, `gamma >= 2`: between `K` and `K n_max` spikes.
    SeparatedHighGain,
    /// Overlapping bumps, `gamma < 2`: at least one spike per current
    /// maximum.
    Overlap,
    /// Overlapping bumps, `gamma >= 2`: between `|M|` and `|M| n_max`
    /// spikes.
    OverlapHighGain,
}

/// Regime label plus the count check for an observed spike total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    /// Assigned regime.
    pub regime: Regime,
    /// Count bounds the regime predicts (upper bound `usize::MAX` encodes
    /// "unbounded above" for the plain overlap regime).
    pub bounds: (usize, usize),
    /// Whether the observed count satisfies the bounds.
    pub count_ok: bool,
}

/// Classifies the regime and checks an observed spike count against it.
/// The analysis and maxima set must describe the same current (same `mu`
/// and presynaptic train).
pub fn classify_regime(
    analysis: &BumpAnalysis,
    maxima: &MaximaSet,
    observed_count: usize,
) -> Result<RegimeVerdict> {
    if analysis.mu != maxima.mu || analysis.presyn != maxima.presyn {
        return Err(Error::InvalidArgument(
            "analysis and maxima describe different currents".into(),
        ));
    }
    if !analysis.amplitude_ok {
        return Err(Error::InvalidArgument(
            "regime classification requires the amplitude condition".into(),
        ));
    }
    let m = maxima.times.len();
    let (regime, bounds) = match (analysis.separated, analysis.gamma < 2.0) {
        (true, true) => (Regime::Stable, (analysis.presyn.len(), analysis.presyn.len())),
        (true, false) => (Regime::SeparatedHighGain, analysis.count_bounds),
        (false, true) => (Regime::Overlap, (m, usize::MAX)),
        (false, false) => (Regime::OverlapHighGain, (m, m * analysis.n_max)),
    };
    let count_ok = observed_count >= bounds.0 && observed_count <= bounds.1;
    Ok(RegimeVerdict { regime, bounds, count_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{simulate_neuron, CurrentDrive, Reset};

    const FIG_PRESYN: [f64; 3] = [20.0, 35.0, 50.0];
    const FIG_MU: f64 = 0.8;
    const FIG_TAU: f64 = 5.0;
    const FIG_THETA: f64 = 0.2;

    fn fig_spikes(omega: f64) -> Vec<f64> {
        let drive = CurrentDrive { times: &FIG_PRESYN, mu: FIG_MU, gain: omega };
        simulate_neuron(&drive, FIG_TAU, Some(FIG_THETA), Reset::Hard, 60.0, 0.004, (1, 0))
            .unwrap()
            .spikes
            .times
    }

    #[test]
    fn half_width_value() {
        let a = analyze_separated(&FIG_PRESYN, FIG_MU, 1.5, FIG_TAU, FIG_THETA).unwrap();
        assert!(a.separated);
        assert!(a.amplitude_ok);
        let hw = a.half_width.unwrap();
        assert!((hw - 1.2993).abs() < 1e-3, "half width {hw}");
    }

    #[test]
    fn single_spike_regime_times() {
        // omega = 1.5 gives gamma = 1.5 < 2: one spike per bump, shortly
        // before each center.
        let spikes = fig_spikes(1.5);
        assert_eq!(spikes.len(), 3);
        // Charge omega / tau = 0.3 against theta = 0.2: the crossing
        // happens once two thirds of the bump mass has arrived, shortly
        // after each center.
        for (t, want) in spikes.iter().zip([20.68, 35.63, 50.62]) {
            assert!((t - want).abs() <= 0.05, "spike at {t}, expected near {want}");
        }
        let a = analyze_separated(&FIG_PRESYN, FIG_MU, 1.5, FIG_TAU, FIG_THETA).unwrap();
        assert_eq!(a.count_bounds, (3, 3));
        assert_eq!(a.n_max, 1);
        for (t, center) in spikes.iter().zip(FIG_PRESYN) {
            assert!(
                *t > center && *t < center + 2.0 * FIG_MU,
                "spike {t} outside ({center}, {})",
                center + 2.0 * FIG_MU
            );
        }
    }

    #[test]
    fn double_spike_regime_times() {
        // omega = 3 gives gamma = 3: two spikes per bump.
        let spikes = fig_spikes(3.0);
        assert_eq!(spikes.len(), 6);
        for (t, want) in spikes.iter().zip([19.6, 20.5, 34.7, 35.5, 49.7, 50.5]) {
            assert!((t - want).abs() <= 0.15, "spike at {t}, expected near {want}");
        }
        let a = analyze_separated(&FIG_PRESYN, FIG_MU, 3.0, FIG_TAU, FIG_THETA).unwrap();
        assert_eq!(a.n_max, 2);
        assert_eq!(a.count_bounds, (3, 6));
    }

    #[test]
    fn weak_amplitude_yields_no_window() {
        let a = analyze_separated(&FIG_PRESYN, FIG_MU, 0.1, FIG_TAU, FIG_THETA).unwrap();
        assert!(!a.amplitude_ok);
        assert_eq!(a.half_width, None);
        assert_eq!(a.count_bounds, (0, 0));
        assert!(fig_spikes(0.1).is_empty());
    }

    #[test]
    fn separated_maxima_sit_at_centers() {
        let m = find_maxima(&FIG_PRESYN, FIG_MU).unwrap();
        assert_eq!(m.times.len(), 3);
        for (t, center) in m.times.iter().zip(FIG_PRESYN) {
            assert!((t - center).abs() < 1e-6, "maximum {t} vs center {center}");
        }
    }

    #[test]
    fn close_bumps_merge_into_one_maximum() {
        // Two Gaussians one sigma apart have a single joint maximum at the
        // midpoint.
        let mu = 0.8;
        let m = find_maxima(&[10.0, 10.8], mu).unwrap();
        assert_eq!(m.times.len(), 1);
        assert!((m.times[0] - 10.4).abs() < 1e-6);
    }

    #[test]
    fn three_sigma_bumps_keep_two_maxima() {
        let mu = 0.8;
        let m = find_maxima(&[10.0, 12.4], mu).unwrap();
        assert_eq!(m.times.len(), 2);
    }

    #[test]
    fn regime_classification_rows() {
        let sep = analyze_separated(&FIG_PRESYN, FIG_MU, 1.5, FIG_TAU, FIG_THETA).unwrap();
        let max_sep = find_maxima(&FIG_PRESYN, FIG_MU).unwrap();
        let v = classify_regime(&sep, &max_sep, 3).unwrap();
        assert_eq!(v.regime, Regime::Stable);
        assert!(v.count_ok);
        assert!(!classify_regime(&sep, &max_sep, 4).unwrap().count_ok);

        let high = analyze_separated(&FIG_PRESYN, FIG_MU, 3.0, FIG_TAU, FIG_THETA).unwrap();
        let v = classify_regime(&high, &max_sep, 6).unwrap();
        assert_eq!(v.regime, Regime::SeparatedHighGain);
        assert!(v.count_ok);

        let overlap_train = [10.0, 11.0, 12.0];
        let over = analyze_separated(&overlap_train, FIG_MU, 1.5, FIG_TAU, FIG_THETA).unwrap();
        let max_over = find_maxima(&overlap_train, FIG_MU).unwrap();
        let v = classify_regime(&over, &max_over, 3).unwrap();
        assert_eq!(v.regime, Regime::Overlap);
    }

    #[test]
    fn mismatched_provenance_is_rejected() {
        let a = analyze_separated(&FIG_PRESYN, FIG_MU, 1.5, FIG_TAU, FIG_THETA).unwrap();
        let m = find_maxima(&[1.0, 2.0], FIG_MU).unwrap();
        assert!(classify_regime(&a, &m, 3).is_err());
    }
}
