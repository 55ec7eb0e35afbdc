//! Gaussian synaptic currents.
//!
//! Each presynaptic spike at `t*` contributes a unit-mass Gaussian bump
//! `exp(-(t - t*)^2 / (2 mu^2)) / (mu sqrt(2 pi))`. Contributions beyond
//! `8 mu` from the center are below 1e-14 of the peak and are skipped; the
//! spike list is assumed sorted so the active window is found by binary
//! search.

/// Half-width, in units of `mu`, beyond which a bump is treated as zero.
pub const TRUNCATION_SIGMAS: f64 = 8.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Peak height of a single bump, `1 / (mu sqrt(2 pi))`.
pub fn bump_peak(mu: f64) -> f64 {
    INV_SQRT_2PI / mu
}

/// Index range of `times` within the truncation window around `t`.
fn active_range(times: &[f64], mu: f64, t: f64) -> (usize, usize) {
    let radius = TRUNCATION_SIGMAS * mu;
    let lo = times.partition_point(|&s| s < t - radius);
    let hi = times.partition_point(|&s| s <= t + radius);
    (lo, hi)
}

/// Summed Gaussian current at time `t` from sorted spike `times`.
pub fn gaussian_current(times: &[f64], mu: f64, t: f64) -> f64 {
    let (lo, hi) = active_range(times, mu, t);
    let scale = INV_SQRT_2PI / mu;
    let mut total = 0.0;
    for &s in &times[lo..hi] {
        let z = (t - s) / mu;
        total += scale * (-0.5 * z * z).exp();
    }
    total
}

/// Time derivative of [`gaussian_current`].
pub fn gaussian_current_deriv(times: &[f64], mu: f64, t: f64) -> f64 {
    let (lo, hi) = active_range(times, mu, t);
    let scale = INV_SQRT_2PI / mu;
    let mut total = 0.0;
    for &s in &times[lo..hi] {
        let z = (t - s) / mu;
        total += scale * (-0.5 * z * z).exp() * (-z / mu);
    }
    total
}

/// Current value and, for every contributing spike, the sensitivity of that
/// value to the spike's time. Used by the reverse pass of the trainable
/// forward model.
pub fn gaussian_current_with_sensitivity(
    times: &[f64],
    mu: f64,
    t: f64,
) -> (f64, Vec<(usize, f64)>) {
    let (lo, hi) = active_range(times, mu, t);
    let scale = INV_SQRT_2PI / mu;
    let mut total = 0.0;
    let mut sens = Vec::with_capacity(hi - lo);
    for (j, &s) in times[lo..hi].iter().enumerate() {
        let z = (t - s) / mu;
        let g = scale * (-0.5 * z * z).exp();
        total += g;
        // d/ds exp(-(t-s)^2 / 2mu^2) brings down +(t-s)/mu^2.
        sens.push((lo + j, g * z / mu));
    }
    (total, sens)
}

/// Merges several sorted spike lists into one sorted pool, coalescing
/// near-duplicates (within `1e-9`) into a single center. Returns the pooled
/// times and, for each pooled time, the list of `(source, index)` pairs it
/// absorbed.
pub fn pool_spike_times(sources: &[&[f64]]) -> (Vec<f64>, Vec<Vec<(usize, usize)>>) {
    let mut tagged: Vec<(f64, usize, usize)> = Vec::new();
    for (src, times) in sources.iter().enumerate() {
        for (idx, &t) in times.iter().enumerate() {
            tagged.push((t, src, idx));
        }
    }
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pooled = Vec::new();
    let mut origins: Vec<Vec<(usize, usize)>> = Vec::new();
    for (t, src, idx) in tagged {
        match pooled.last() {
            Some(&last) if t - last <= 1e-9 => {
                origins.last_mut().unwrap().push((src, idx));
            }
            _ => {
                pooled.push(t);
                origins.push(vec![(src, idx)]);
            }
        }
    }
    (pooled, origins)
}
