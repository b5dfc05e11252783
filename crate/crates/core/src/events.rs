//! Monte Carlo synthesis of pair-detection events and coincidence
//! histograms, for exercising the analysis pipeline end to end.
//!
//! Pair birth times are Poissonian; the idler-minus-signal delay follows the
//! normalized two-sided exponential law set by the two cavity response
//! rates. Sampling uses the ChaCha8 counter-based generator, so a run is
//! reproducible bit for bit from its seed (record `RNG_ALGORITHM` with the
//! seed in any output metadata).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Axis, GridError, Trace};
use crate::model::ProcessConfig;
use crate::num::Scalar;

/// Name of the generator backing [`sample_pairs`], for run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8";

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("detection efficiency must lie in [0, 1]")]
    BadEfficiency,
    #[error("rates and durations must be finite and nonnegative")]
    BadRate,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which detector fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Signal,
    Idler,
}

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord<T> {
    pub channel: Channel,
    pub timestamp: T,
}

/// Sampling settings beyond the physics configuration.
#[derive(Debug, Clone)]
pub struct SampleSettings<T> {
    /// Mean generated pair rate (1/s).
    pub pair_rate: T,
    /// Acquisition length (s).
    pub duration: T,
    pub efficiency_signal: T,
    pub efficiency_idler: T,
    /// Uncorrelated background rate per channel (1/s); zero disables it.
    pub background_rate_signal: T,
    pub background_rate_idler: T,
    pub seed: u64,
}

/// Whether the pair rate is low enough that overlapping pairs are rare; the
/// sampler stays valid but the pair-overlap approximation degrades above
/// roughly a tenth.
pub fn pair_overlap_fraction<T: Scalar>(config: &ProcessConfig<T>, pair_rate: T) -> T {
    let sum = config.signal.linewidth_total().recip() + config.idler.linewidth_total().recip();
    pair_rate * sum
}

fn sample_exponential<T: Scalar>(rng: &mut ChaCha8Rng, rate: T) -> T {
    // Inverse CDF on (0, 1]; gen::<f64>() is [0, 1), flip to avoid ln(0).
    let u: f64 = 1.0 - rng.gen::<f64>();
    -T::of(u.ln()) / rate
}

/// Draw pair events over `[0, duration)` and thin each channel by its
/// detection efficiency. Events whose partner lands outside the acquisition
/// window keep whichever timestamps are inside it. Output is sorted per
/// channel; identical inputs and seed reproduce identical output.
pub fn sample_pairs<T: Scalar>(
    config: &ProcessConfig<T>,
    settings: &SampleSettings<T>,
) -> Result<Vec<EventRecord<T>>, EventError> {
    for e in [settings.efficiency_signal, settings.efficiency_idler] {
        if !(e >= T::zero() && e <= T::one()) {
            return Err(EventError::BadEfficiency);
        }
    }
    for r in [
        settings.pair_rate,
        settings.duration,
        settings.background_rate_signal,
        settings.background_rate_idler,
    ] {
        if !(r >= T::zero()) || !r.is_finite() {
            return Err(EventError::BadRate);
        }
    }
    let gamma_s = config.signal.linewidth_total();
    let gamma_i = config.idler.linewidth_total();
    // Probability that the idler trails the signal.
    let p_positive = gamma_s / (gamma_s + gamma_i);

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut signal_times: Vec<T> = Vec::new();
    let mut idler_times: Vec<T> = Vec::new();

    if settings.pair_rate > T::zero() {
        let mut t = T::zero();
        loop {
            t += sample_exponential(&mut rng, settings.pair_rate);
            if t >= settings.duration {
                break;
            }
            let delay = if T::of(rng.gen::<f64>()) < p_positive {
                sample_exponential(&mut rng, gamma_i)
            } else {
                -sample_exponential(&mut rng, gamma_s)
            };
            let t_signal = t;
            let t_idler = t + delay;
            let keep_signal = T::of(rng.gen::<f64>()) < settings.efficiency_signal;
            let keep_idler = T::of(rng.gen::<f64>()) < settings.efficiency_idler;
            if keep_signal && t_signal >= T::zero() && t_signal < settings.duration {
                signal_times.push(t_signal);
            }
            if keep_idler && t_idler >= T::zero() && t_idler < settings.duration {
                idler_times.push(t_idler);
            }
        }
    }
    for (rate, bucket) in [
        (settings.background_rate_signal, &mut signal_times),
        (settings.background_rate_idler, &mut idler_times),
    ] {
        if rate > T::zero() {
            let mut t = T::zero();
            loop {
                t += sample_exponential(&mut rng, rate);
                if t >= settings.duration {
                    break;
                }
                bucket.push(t);
            }
        }
    }

    signal_times.sort_by(|a, b| a.partial_cmp(b).expect("finite timestamps"));
    idler_times.sort_by(|a, b| a.partial_cmp(b).expect("finite timestamps"));
    let mut events: Vec<EventRecord<T>> = signal_times
        .into_iter()
        .map(|timestamp| EventRecord {
            channel: Channel::Signal,
            timestamp,
        })
        .collect();
    events.extend(idler_times.into_iter().map(|timestamp| EventRecord {
        channel: Channel::Idler,
        timestamp,
    }));
    Ok(events)
}

/// Analytic delay density the sampler draws from, normalized to unit area.
pub fn delay_density<T: Scalar>(tau: T, gamma_s: T, gamma_i: T) -> T {
    let norm = gamma_s * gamma_i / (gamma_s + gamma_i);
    if tau < T::zero() {
        norm * (gamma_s * tau).exp()
    } else {
        norm * (-gamma_i * tau).exp()
    }
}

/// Histogram of idler-minus-signal time differences within `+-window`,
/// binned with `bin_width`; the axis is symmetric about zero (zero is a bin
/// center).
pub fn coincidence_histogram<T: Scalar>(
    events: &[EventRecord<T>],
    bin_width: T,
    window: T,
) -> Result<Trace<T>, EventError> {
    if !(bin_width > T::zero()) || !(window > T::zero()) {
        return Err(EventError::BadRate);
    }
    let half_bins = (window / bin_width)
        .floor()
        .to_f64()
        .unwrap_or(1.0)
        .max(1.0) as i64;
    let n_bins = (2 * half_bins + 1) as usize;
    let mut counts = vec![T::zero(); n_bins];

    let signals: Vec<T> = events
        .iter()
        .filter(|e| e.channel == Channel::Signal)
        .map(|e| e.timestamp)
        .collect();
    let idlers: Vec<T> = events
        .iter()
        .filter(|e| e.channel == Channel::Idler)
        .map(|e| e.timestamp)
        .collect();

    let reach = bin_width * (T::of(half_bins as f64) + T::half());
    let mut lo = 0usize;
    for &ts in &signals {
        while lo < idlers.len() && idlers[lo] < ts - reach {
            lo += 1;
        }
        let mut k = lo;
        while k < idlers.len() && idlers[k] <= ts + reach {
            let diff = idlers[k] - ts;
            let bin = (diff / bin_width).round().to_f64().unwrap_or(0.0) as i64;
            if bin.abs() <= half_bins {
                counts[(bin + half_bins) as usize] += T::one();
            }
            k += 1;
        }
    }
    let axis = Axis::new(
        -bin_width * T::of(half_bins as f64),
        bin_width,
        n_bins,
        "tau_s",
    )?;
    Ok(Trace::new(axis, counts, "coincidences")?)
}
