//! Measurement-trace analysis: damped Gauss-Newton fits of the two line
//! shapes the experiment relies on (Lorentzian resonances, two-sided
//! exponential coincidence histograms) and the pump-sweep estimation of the
//! frequency mismatch.
//!
//! Both model families carry analytic Jacobians; initialization comes from
//! moments of the trace (extremum position, half-crossing width). Parameter
//! uncertainties are the linearized covariance at the optimum scaled by the
//! residual variance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::grid::{Axis, GridError, Trace};
use crate::model::{ModelError, ProcessConfig};
use crate::num::Scalar;
use crate::pump::reflected_power_ratio;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("optimizer failed to converge")]
    NoConvergence,
    #[error("trace carries no usable structure (flat or too short)")]
    DegenerateData,
    #[error("reflection dip too shallow against the noise floor for a stable normalization")]
    ShallowDip,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One fitted parameter: name, value, and standard uncertainty.
#[derive(Debug, Clone)]
pub struct FitParam<T> {
    pub name: &'static str,
    pub value: T,
    pub uncertainty: T,
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub params: Vec<FitParam<T>>,
    pub residual_ss: T,
    pub iterations: usize,
    pub converged: bool,
    /// Residual sum of squares after every accepted step, starting from the
    /// initial guess; never increasing.
    pub residual_history: Vec<T>,
}

impl<T: Scalar> FitResult<T> {
    pub fn value(&self, name: &str) -> Option<T> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn uncertainty(&self, name: &str) -> Option<T> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.uncertainty)
    }

    pub fn require_converged(self) -> Result<Self, FitError> {
        if self.converged {
            Ok(self)
        } else {
            Err(FitError::NoConvergence)
        }
    }
}

/// Solve the symmetric system `a x = b` in place (Gaussian elimination with
/// partial pivoting); `a` is row-major `n x n`.
fn solve_dense<T: Scalar>(a: &mut [T], b: &mut [T], n: usize) -> Option<Vec<T>> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < T::of(1e-300) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = a[col * n + col].recip();
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

/// Damped Gauss-Newton driver. `model` fills the gradient slice and returns
/// the model value at one abscissa.
fn levenberg_marquardt<T: Scalar>(
    xs: &[T],
    ys: &[T],
    names: &'static [&'static str],
    mut params: Vec<T>,
    model: impl Fn(T, &[T], &mut [T]) -> T,
) -> Result<FitResult<T>, FitError> {
    let n = params.len();
    let m = xs.len();
    if m < n + 1 {
        return Err(FitError::DegenerateData);
    }
    let mut grad_buf = vec![T::zero(); n];
    let cost_of = |p: &[T], grad_scratch: &mut [T]| -> T {
        let mut c = T::zero();
        for (&x, &y) in xs.iter().zip(ys) {
            let f = model(x, p, grad_scratch);
            let r = y - f;
            c += r * r;
        }
        c
    };
    let mut cost = cost_of(&params, &mut grad_buf);
    let mut history = vec![cost];
    let mut lambda = T::of(1e-3);
    let mut converged = false;
    let mut iterations = 0;
    let max_iter = 400;

    while iterations < max_iter {
        iterations += 1;
        // Build the normal equations with analytic gradients.
        let mut a = vec![T::zero(); n * n];
        let mut g = vec![T::zero(); n];
        for (&x, &y) in xs.iter().zip(ys) {
            let f = model(x, &params, &mut grad_buf);
            let r = y - f;
            for j in 0..n {
                g[j] += grad_buf[j] * r;
                for k in j..n {
                    a[j * n + k] += grad_buf[j] * grad_buf[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                a[j * n + k] = a[k * n + j];
            }
        }
        // Try increasingly damped steps until one reduces the cost.
        let mut accepted = false;
        for _ in 0..40 {
            let mut a_damped = a.clone();
            for j in 0..n {
                let d = a[j * n + j];
                a_damped[j * n + j] = d + lambda * d.max(T::of(1e-300));
            }
            let mut rhs = g.clone();
            let step = match solve_dense(&mut a_damped, &mut rhs, n) {
                Some(s) => s,
                None => return Err(FitError::DegenerateData),
            };
            let trial: Vec<T> = params.iter().zip(&step).map(|(&p, &d)| p + d).collect();
            let trial_cost = cost_of(&trial, &mut grad_buf);
            if trial_cost.is_finite() && trial_cost <= cost {
                // Relative step size, for the convergence decision.
                let mut rel_step = T::zero();
                for (p, d) in params.iter().zip(&step) {
                    let denom = p.abs().max(T::of(1e-30));
                    rel_step = rel_step.max(d.abs() / denom);
                }
                let improvement = cost - trial_cost;
                params = trial;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda * T::of(0.3)).max(T::of(1e-12));
                accepted = true;
                if rel_step < T::of(1e-11) || improvement <= T::of(1e-14) * cost {
                    converged = true;
                }
                break;
            }
            lambda *= T::of(10.0);
            if lambda > T::of(1e14) {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // No descent direction left at maximal damping: either at the
            // minimum already, or genuinely stuck.
            converged = cost <= history[0];
            break;
        }
    }

    // Linearized covariance at the optimum.
    let mut a = vec![T::zero(); n * n];
    for &x in xs {
        let _ = model(x, &params, &mut grad_buf);
        for j in 0..n {
            for k in j..n {
                a[j * n + k] += grad_buf[j] * grad_buf[k];
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            a[j * n + k] = a[k * n + j];
        }
    }
    let dof = m.saturating_sub(n).max(1);
    let variance = cost / T::of(dof as f64);
    let mut uncertainties = vec![T::zero(); n];
    for j in 0..n {
        // j-th diagonal of the inverse via a solve against the unit vector.
        let mut a_copy = a.clone();
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        if let Some(col) = solve_dense(&mut a_copy, &mut e, n) {
            let c = col[j];
            if c > T::zero() {
                uncertainties[j] = (c * variance).sqrt();
            }
        }
    }

    Ok(FitResult {
        params: names
            .iter()
            .zip(params.iter().zip(&uncertainties))
            .map(|(&name, (&value, &uncertainty))| FitParam {
                name,
                value,
                uncertainty,
            })
            .collect(),
        residual_ss: cost,
        iterations,
        converged,
        residual_history: history,
    })
}

fn trace_is_degenerate<T: Scalar>(trace: &Trace<T>) -> bool {
    if trace.len() < 8 {
        return true;
    }
    let (_, lo) = trace.argmin();
    let (_, hi) = trace.argmax();
    let span = hi - lo;
    !(span > T::of(1e-12) * hi.abs().max(lo.abs()).max(T::of(1e-300)))
}

/// Half-crossing width of a peak (or dip, when `inverted`), used to seed the
/// Lorentzian width.
fn rough_width<T: Scalar>(trace: &Trace<T>, inverted: bool) -> T {
    let flipped: Vec<T> = if inverted {
        let (_, hi) = trace.argmax();
        trace.values.iter().map(|&v| hi - v).collect()
    } else {
        let (_, lo) = trace.argmin();
        trace.values.iter().map(|&v| v - lo).collect()
    };
    let tr = Trace::new(trace.axis.clone(), flipped, "w").expect("same axis");
    tr.fwhm()
        .unwrap_or_else(|_| (tr.axis.end() - tr.axis.start()) * T::half())
}

/// Least-squares Lorentzian `offset + amplitude / (1 + 4 (x - center)^2 / fwhm^2)`.
///
/// With `inverted` the initialization seeds a dip (negative amplitude), the
/// shape the reflected-pump trace takes around a resonance.
pub fn fit_lorentzian<T: Scalar>(
    trace: &Trace<T>,
    inverted: bool,
) -> Result<FitResult<T>, FitError> {
    if trace_is_degenerate(trace) {
        return Err(FitError::DegenerateData);
    }
    let (center0, amp0, offset0) = if inverted {
        let (k, lo) = trace.argmin();
        let (_, hi) = trace.argmax();
        (trace.axis.value(k), lo - hi, hi)
    } else {
        let (k, hi) = trace.argmax();
        let (_, lo) = trace.argmin();
        (trace.axis.value(k), hi - lo, lo)
    };
    let width0 = rough_width(trace, inverted);
    let xs: Vec<T> = trace.axis.values().collect();
    let names: &'static [&'static str] = &["center", "fwhm", "amplitude", "offset"];
    levenberg_marquardt(
        &xs,
        &trace.values,
        names,
        vec![center0, width0, amp0, offset0],
        |x, p, grad| {
            let (center, fwhm, amplitude, offset) = (p[0], p[1], p[2], p[3]);
            let u = T::two() * (x - center) / fwhm;
            let denom = T::one() + u * u;
            let shape = denom.recip();
            let dshape_du = -T::two() * u * shape * shape;
            grad[0] = amplitude * dshape_du * (-T::two() / fwhm);
            grad[1] = amplitude * dshape_du * (-u / fwhm);
            grad[2] = shape;
            grad[3] = T::one();
            offset + amplitude * shape
        },
    )
}

/// Least-squares two-sided exponential
/// `background + amplitude * exp(-|x - peak| / decay_side)`.
///
/// `symmetric` ties both decay times, the form used when equal signal and
/// idler bandwidths are assumed; otherwise the two sides are independent.
pub fn fit_double_exponential<T: Scalar>(
    histogram: &Trace<T>,
    symmetric: bool,
) -> Result<FitResult<T>, FitError> {
    if trace_is_degenerate(histogram) {
        return Err(FitError::DegenerateData);
    }
    let (k, hi) = histogram.argmax();
    let (_, lo) = histogram.argmin();
    let x0 = histogram.axis.value(k);
    let amp0 = hi - lo;
    let width0 = rough_width(histogram, false);
    // exp(-|x|/t) crosses half maximum at |x| = t ln 2.
    let t0 = (width0 * T::half() / T::of(std::f64::consts::LN_2)).max(
        histogram.axis.step(),
    );
    let xs: Vec<T> = histogram.axis.values().collect();
    if symmetric {
        let names: &'static [&'static str] =
            &["peak_position", "decay_time", "amplitude", "background"];
        levenberg_marquardt(
            &xs,
            &histogram.values,
            names,
            vec![x0, t0, amp0, lo],
            |x, p, grad| {
                let (peak, t, amplitude, background) = (p[0], p[1], p[2], p[3]);
                let s = x - peak;
                let e = (-s.abs() / t).exp();
                grad[0] = amplitude * e * s.signum() / t;
                grad[1] = amplitude * e * s.abs() / (t * t);
                grad[2] = e;
                grad[3] = T::one();
                background + amplitude * e
            },
        )
    } else {
        let names: &'static [&'static str] = &[
            "peak_position",
            "decay_time_left",
            "decay_time_right",
            "amplitude",
            "background",
        ];
        levenberg_marquardt(
            &xs,
            &histogram.values,
            names,
            vec![x0, t0, t0, amp0, lo],
            |x, p, grad| {
                let (peak, t_l, t_r, amplitude, background) = (p[0], p[1], p[2], p[3], p[4]);
                let s = x - peak;
                if s >= T::zero() {
                    let e = (-s / t_r).exp();
                    grad[0] = amplitude * e / t_r;
                    grad[1] = T::zero();
                    grad[2] = amplitude * e * s / (t_r * t_r);
                    grad[3] = e;
                    grad[4] = T::one();
                    background + amplitude * e
                } else {
                    let e = (s / t_l).exp();
                    grad[0] = -amplitude * e / t_l;
                    grad[1] = -amplitude * e * s / (t_l * t_l);
                    grad[2] = T::zero();
                    grad[3] = e;
                    grad[4] = T::one();
                    background + amplitude * e
                }
            },
        )
    }
}

/// One pump-frequency sweep: detuning axis, raw count rate, and the
/// reflected power ratio measured simultaneously.
#[derive(Debug, Clone)]
pub struct SweepRecord<T> {
    pub detuning: Axis<T>,
    pub counts: Vec<T>,
    pub reflection: Vec<T>,
}

impl<T: Scalar> SweepRecord<T> {
    pub fn new(detuning: Axis<T>, counts: Vec<T>, reflection: Vec<T>) -> Result<Self, FitError> {
        if counts.len() != detuning.len() || reflection.len() != detuning.len() {
            return Err(FitError::Grid(GridError::LengthMismatch {
                expected: detuning.len(),
                got: counts.len().min(reflection.len()),
            }));
        }
        if counts.iter().any(|&c| c < T::zero() || !c.is_finite()) {
            return Err(FitError::DegenerateData);
        }
        let eps = T::of(0.5);
        if reflection
            .iter()
            .any(|&r| !(r >= T::zero() && r <= T::one() + eps))
        {
            return Err(FitError::DegenerateData);
        }
        Ok(Self {
            detuning,
            counts,
            reflection,
        })
    }
}

/// Recover the intrinsic frequency mismatch from a pump sweep.
///
/// The count rate is divided by the normalized intracavity pump power
/// `1 - P_out/P_in`; the result is a Lorentzian in the detuning whose center
/// sits at minus the mismatch and whose FWHM should come out near twice the
/// signal-idler bandwidth (returned as `fwhm_check`). The fit window is
/// restricted to three bandwidths around the normalized maximum so that a
/// distant pump dip cannot drag the single-Lorentzian model.
pub fn estimate_mismatch<T: Scalar>(
    sweep: &SweepRecord<T>,
    gamma_si: T,
) -> Result<FitResult<T>, FitError> {
    let n = sweep.detuning.len();
    // Noise floor of the reflection from the sweep wings.
    let wing = (n / 10).max(2);
    let wings: Vec<T> = sweep.reflection[..wing]
        .iter()
        .chain(&sweep.reflection[n - wing..])
        .cloned()
        .collect();
    let mean = wings.iter().cloned().sum::<T>() / T::of(wings.len() as f64);
    let var = wings
        .iter()
        .map(|&r| (r - mean) * (r - mean))
        .sum::<T>()
        / T::of(wings.len() as f64);
    let noise_floor = var.sqrt();
    let dip_depth = sweep
        .reflection
        .iter()
        .fold(T::one(), |acc, &r| acc.min(r));
    let dip_depth = T::one() - dip_depth;
    if !(dip_depth > T::of(5.0) * noise_floor) || !(dip_depth > T::zero()) {
        return Err(FitError::ShallowDip);
    }

    let normalized: Vec<T> = sweep
        .counts
        .iter()
        .zip(&sweep.reflection)
        .map(|(&c, &r)| {
            let denom = (T::one() - r).max(T::of(1e-9));
            c / denom
        })
        .collect();
    let full = Trace::new(sweep.detuning.clone(), normalized, "normalized_counts")?;

    // Window of three bandwidths around the global maximum.
    let (k_peak, _) = full.argmax();
    let center_guess = full.axis.value(k_peak);
    let half_window = T::of(3.0) * gamma_si;
    let lo_idx = full.axis.nearest(center_guess - half_window);
    let hi_idx = full.axis.nearest(center_guess + half_window);
    if hi_idx <= lo_idx + 8 {
        return Err(FitError::DegenerateData);
    }
    let axis = Axis::new(
        full.axis.value(lo_idx),
        full.axis.step(),
        hi_idx - lo_idx + 1,
        full.axis.label.clone(),
    )?;
    let windowed = Trace::new(axis, full.values[lo_idx..=hi_idx].to_vec(), "normalized_counts")?;

    let fit = fit_lorentzian(&windowed, false)?.require_converged()?;
    let center = fit.value("center").expect("fit carries center");
    let center_err = fit.uncertainty("center").unwrap_or_else(T::zero);
    let fwhm = fit.value("fwhm").expect("fit carries fwhm");
    let fwhm_err = fit.uncertainty("fwhm").unwrap_or_else(T::zero);
    let mut params = vec![
        FitParam {
            name: "delta0",
            value: -center,
            uncertainty: center_err,
        },
        FitParam {
            name: "fwhm_check",
            value: fwhm.abs(),
            uncertainty: fwhm_err,
        },
    ];
    params.extend(
        fit.params
            .iter()
            .filter(|p| p.name != "center" && p.name != "fwhm")
            .cloned(),
    );
    Ok(FitResult { params, ..fit })
}

/// Linear map from a temperature change to a frequency mismatch.
pub fn temperature_to_mismatch<T: Scalar>(delta_t: T, coefficient: T) -> T {
    coefficient * delta_t
}

/// Default thermal tuning coefficient of the mismatch, in rad/s per kelvin
/// (-14.4 MHz of mismatch over two pi per millikelvin at zero pump
/// detuning).
pub fn default_thermal_tuning<T: Scalar>() -> T {
    -T::tau() * T::of(14.4e6 / 1e-3)
}

/// One synthetic sweep sample at detuning `dp` (see [`synthesize_sweep`]).
///
/// Each point draws from its own counter-based stream keyed on
/// `(seed, index)`, so fanning points out across threads cannot change the
/// result.
pub fn synthesize_sweep_point<T: Scalar>(
    config: &ProcessConfig<T>,
    dp: T,
    rate_scale: T,
    noise_fraction: T,
    seed: u64,
    index: u64,
) -> Result<(T, T), FitError> {
    let pump = config.require_pump()?;
    let kappa_p = pump.coupling_coefficient();
    let gamma_p = pump.linewidth_total();
    let mut cfg = config.clone();
    cfg.pump_detuning = dp;
    let rate = crate::cw::flux_triply_resonant(&cfg)? * rate_scale;
    let refl = reflected_power_ratio(kappa_p, gamma_p, dp);
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise_c = T::of(normal.sample(&mut rng));
    let noise_r = T::of(normal.sample(&mut rng));
    let count = (rate * (T::one() + noise_fraction * noise_c)).max(T::zero());
    let reflection = (refl * (T::one() + noise_fraction * T::of(0.1) * noise_r))
        .max(T::zero())
        .min(T::of(1.4));
    Ok((count, reflection))
}

/// Count-rate scale that makes the perfectly matched sweep peak at
/// `peak_rate`.
pub fn sweep_rate_scale<T: Scalar>(
    config: &ProcessConfig<T>,
    peak_rate: T,
) -> Result<T, FitError> {
    let mut reference = config.clone();
    reference.pump_detuning = -config.mismatch_delta;
    Ok(peak_rate / crate::cw::flux_triply_resonant(&reference)?)
}

/// Synthesize a pump-frequency sweep from a triply resonant configuration:
/// the count rate follows the two-Lorentzian law, the reflection trace the
/// inverted pump dip. Multiplicative Gaussian noise of fraction
/// `noise_fraction` is applied to the counts; the reflection, a bright
/// classical measurement, receives a tenth of that fraction. Deterministic
/// for a given seed, and identical whether the points are evaluated
/// sequentially or fanned out (per-point streams).
pub fn synthesize_sweep<T: Scalar>(
    config: &ProcessConfig<T>,
    detuning: Axis<T>,
    peak_rate: T,
    noise_fraction: T,
    seed: u64,
) -> Result<SweepRecord<T>, FitError> {
    let scale = sweep_rate_scale(config, peak_rate)?;
    let mut counts = Vec::with_capacity(detuning.len());
    let mut reflection = Vec::with_capacity(detuning.len());
    for (index, dp) in detuning.values().enumerate() {
        let (c, r) =
            synthesize_sweep_point(config, dp, scale, noise_fraction, seed, index as u64)?;
        counts.push(c);
        reflection.push(r);
    }
    SweepRecord::new(detuning, counts, reflection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CavityMode, ProcessOrder};
    use approx::assert_relative_eq;

    const TWO_PI: f64 = std::f64::consts::TAU;

    #[test]
    fn lorentzian_dip_recovers_the_pump_linewidth() {
        let gamma_p = TWO_PI * 28.8e6;
        let axis = Axis::symmetric(TWO_PI * 60e6, 401, "delta_p").unwrap();
        let tr = Trace::from_fn(axis, "reflection", |dp| {
            reflected_power_ratio(0.5, gamma_p, dp)
        });
        let fit = fit_lorentzian(&tr, true).unwrap();
        assert!(fit.converged);
        let fwhm = fit.value("fwhm").unwrap().abs();
        assert_relative_eq!(fwhm, gamma_p, max_relative = 1e-6);
        assert_relative_eq!(fit.value("center").unwrap() / gamma_p, 0.0, epsilon = 1e-9);
        assert!(fit.value("amplitude").unwrap() < 0.0);
    }

    #[test]
    fn flat_trace_is_degenerate() {
        let axis = Axis::span(0.0, 1.0, 64, "x").unwrap();
        let tr = Trace::new(axis, vec![3.3; 64], "y").unwrap();
        assert_eq!(fit_lorentzian(&tr, false).unwrap_err(), FitError::DegenerateData);
    }

    #[test]
    fn noisy_lorentzian_width_recovery_is_within_two_percent() {
        // Median over 100 seeds, five percent multiplicative noise, 200
        // points.
        let gamma = 1.0;
        let axis = Axis::symmetric(4.0, 200, "x").unwrap();
        let mut errors = Vec::new();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let tr = Trace::from_fn(axis.clone(), "y", |x| {
                let clean = 1.0 / (1.0 + 4.0 * x * x / (gamma * gamma));
                clean * (1.0 + 0.05 * normal.sample(&mut rng))
            });
            let fit = fit_lorentzian(&tr, false).unwrap();
            let w: f64 = fit.value("fwhm").unwrap();
            errors.push((w.abs() - gamma).abs() / gamma);
        }
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = errors[errors.len() / 2];
        assert!(median < 0.02, "median width error {median}");
    }

    #[test]
    fn symmetric_histogram_recovers_the_decay_time() {
        let t_si = 24.3e-9;
        let axis = Axis::symmetric(200e-9, 183, "tau_s").unwrap();
        let tr = Trace::from_fn(axis, "counts", |tau: f64| {
            100.0 * (-tau.abs() / t_si).exp()
        });
        let fit = fit_double_exponential(&tr, true).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.value("decay_time").unwrap(), t_si, max_relative = 1e-6);
        assert_relative_eq!(fit.value("peak_position").unwrap() / t_si, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn asymmetric_histogram_recovers_both_rates() {
        // Signal twice as fast as idler.
        let (t_left, t_right) = (0.5, 1.0);
        let axis = Axis::symmetric(6.0, 301, "tau").unwrap();
        let tr = Trace::from_fn(axis, "counts", |tau: f64| {
            if tau < 0.0 {
                7.0 * (tau / t_left).exp()
            } else {
                7.0 * (-tau / t_right).exp()
            }
        });
        let fit = fit_double_exponential(&tr, false).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.value("decay_time_left").unwrap(), t_left, max_relative = 1e-2);
        assert_relative_eq!(fit.value("decay_time_right").unwrap(), t_right, max_relative = 1e-2);
    }

    #[test]
    fn residual_history_never_increases() {
        let axis = Axis::symmetric(5.0, 120, "x").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let tr = Trace::from_fn(axis, "y", |x| {
            2.0 / (1.0 + 4.0 * (x - 0.3f64).powi(2)) + 0.1 + 0.03 * normal.sample(&mut rng)
        });
        let fit = fit_lorentzian(&tr, false).unwrap();
        for w in fit.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-15));
        }
    }

    fn triply_config(delta0: f64) -> ProcessConfig<f64> {
        let gamma_si = TWO_PI * 6.5e6;
        let mut cfg = ProcessConfig::symmetric(gamma_si, delta0, ProcessOrder::Spdc, 1e-3);
        cfg.pump = Some(CavityMode::from_linewidth(TWO_PI * 28.8e6, 0.5).unwrap());
        cfg.with_drive_ratio(1e-3)
    }

    #[test]
    fn closed_loop_mismatch_recovery_noiseless() {
        let gamma_si = TWO_PI * 6.5e6;
        for delta0_mhz in [0.0, 5.0, -5.0, 10.0, -10.0, 20.0, -20.0] {
            let delta0 = TWO_PI * delta0_mhz * 1e6;
            let cfg = triply_config(delta0);
            let axis = Axis::symmetric(TWO_PI * 60e6, 601, "delta_p").unwrap();
            let sweep = synthesize_sweep(&cfg, axis, 1e4, 0.0, 1).unwrap();
            let fit = estimate_mismatch(&sweep, gamma_si).unwrap();
            let rec = fit.value("delta0").unwrap();
            let tol = (delta0.abs()).max(TWO_PI * 1e6) * 0.01;
            assert!((rec - delta0).abs() < tol, "recovered {rec}, truth {delta0}");
            assert_relative_eq!(
                fit.value("fwhm_check").unwrap(),
                2.0 * gamma_si,
                max_relative = 1e-3
            );
        }
    }

    #[test]
    fn zero_mismatch_sweep_is_symmetric() {
        let cfg = triply_config(0.0);
        let axis = Axis::symmetric(TWO_PI * 50e6, 301, "delta_p").unwrap();
        let sweep = synthesize_sweep(&cfg, axis, 1e4, 0.0, 1).unwrap();
        let n = sweep.counts.len();
        for k in 0..n / 2 {
            assert_relative_eq!(sweep.counts[k], sweep.counts[n - 1 - k], max_relative = 1e-9);
        }
    }

    #[test]
    fn shallow_dip_is_rejected_rather_than_normalized() {
        let axis = Axis::symmetric(TWO_PI * 50e6, 201, "delta_p").unwrap();
        let counts: Vec<f64> = axis.values().map(|dp: f64| 1.0 / (1.0 + dp * dp)).collect();
        // Reflection nearly flat: dip of 1e-4 against noise 1e-3.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let reflection: Vec<f64> = axis
            .values()
            .map(|_| 1.0 - 1e-4 + 1e-3 * normal.sample(&mut rng))
            .collect();
        let reflection: Vec<f64> = reflection.into_iter().map(|r| r.clamp(0.0, 1.4)).collect();
        let sweep = SweepRecord::new(axis, counts, reflection).unwrap();
        assert_eq!(
            estimate_mismatch(&sweep, 1.0).unwrap_err(),
            FitError::ShallowDip
        );
    }

    #[test]
    fn thermal_map_is_linear_with_the_documented_default() {
        assert_eq!(temperature_to_mismatch(0.0, default_thermal_tuning::<f64>()), 0.0);
        let per_mk = temperature_to_mismatch(1e-3, default_thermal_tuning::<f64>());
        assert_relative_eq!(per_mk / TWO_PI, -14.4e6, max_relative = 1e-12);
        let opposite = temperature_to_mismatch(-1e-3, default_thermal_tuning::<f64>());
        assert_relative_eq!(opposite / TWO_PI, 14.4e6, max_relative = 1e-12);
    }
}
