//! Time-dependent photon fluxes and non-stationary correlation functions
//! under arbitrary pump pulses.
//!
//! The flux is a double time integral of the pump amplitude against both
//! cavity impulse responses and the partner-arm memory kernel. It is
//! evaluated here by an exact reduction to two nested causal convolutions,
//! each a stable O(N) prefix recursion on a refined internal grid, so a
//! whole trace costs O(N) rather than O(N^3).

use num_complex::Complex;
use thiserror::Error;

use crate::biphoton::jta_direct_point;
use crate::cw::Arm;
use crate::grid::{Axis, GridError, Trace};
use crate::model::{ModelError, ProcessConfig, ProcessOrder, PumpEnvelope};
use crate::num::{cis, Scalar};
use crate::pump::{general_pulse_response, rect_pulse_response, PumpError};

#[derive(Debug, Error, PartialEq)]
pub enum PulsedError {
    #[error("output grid is sampled more coarsely than the flux oscillation demands")]
    UnderSampled,
    #[error("flux vanishes at a requested time; normalized correlation undefined")]
    ZeroFlux,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pump(#[from] PumpError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn arm_rates<T: Scalar>(config: &ProcessConfig<T>, arm: Arm) -> (T, T) {
    match arm {
        Arm::Signal => (
            config.signal.linewidth_total(),
            config.idler.linewidth_total(),
        ),
        Arm::Idler => (
            config.idler.linewidth_total(),
            config.signal.linewidth_total(),
        ),
    }
}

/// CW steady-state value of the same double integral [`flux_pulsed`]
/// evaluates, for an envelope of constant power `power`. Used to normalize
/// pulse traces to their long-pulse plateau.
pub fn cw_steady_flux_kernel<T: Scalar>(config: &ProcessConfig<T>, arm: Arm, power: T) -> T {
    let (g_own, _) = arm_rates(config, arm);
    let gbar = config.gamma_bar();
    let delta = config.effective_mismatch();
    let p = match config.order {
        ProcessOrder::Spdc => power,
        ProcessOrder::Sfwm => power * power,
    };
    p * T::two() * gbar / (g_own * (gbar * gbar + delta * delta))
}

/// In a triply resonant configuration the drive seen by the nonlinearity is
/// the intracavity pump amplitude, not the external envelope; this resolves
/// the effective envelope for either case.
fn effective_envelope<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    end_time: T,
    step: T,
) -> Result<PumpEnvelope<T>, PulsedError> {
    let pump = match &config.pump {
        None => return Ok(envelope.clone()),
        Some(p) => p,
    };
    match envelope {
        PumpEnvelope::Cw { amplitude } => {
            let gain = Complex::new(
                pump.linewidth_total() * T::half(),
                -config.pump_detuning,
            )
            .inv()
            .scale(pump.coupling_rate().sqrt());
            Ok(PumpEnvelope::Cw {
                amplitude: *amplitude * gain,
            })
        }
        PumpEnvelope::Rectangular { duration, .. } => {
            let end = end_time.max(*duration + step * T::two());
            let n = ((end / step).to_f64().unwrap_or(2.0).ceil() as usize).max(2) + 1;
            let grid = Axis::new(T::zero(), step, n, "t_s")?;
            let resp = rect_pulse_response(envelope, pump, config.pump_detuning, &grid)?;
            Ok(PumpEnvelope::Sampled {
                start: T::zero(),
                step,
                values: resp.amplitude,
            })
        }
        PumpEnvelope::Sampled { .. } => {
            let resp = general_pulse_response(envelope, pump, config.pump_detuning)?;
            Ok(PumpEnvelope::Sampled {
                start: resp.times.start(),
                step: resp.times.step(),
                values: resp.amplitude,
            })
        }
    }
}

/// Internal refinement of the output step used by the flux recursion.
const FLUX_REFINE_TARGET: f64 = 0.005;

/// Time-dependent photon flux of one arm (unnormalized kernel integral; the
/// CW plateau of the same quantity is [`cw_steady_flux_kernel`]).
///
/// The output grid must resolve both the fastest cavity response and the
/// mismatch oscillation. With a resonant pump mode configured, the envelope
/// is first converted to the intracavity pump amplitude.
pub fn flux_pulsed<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    grid: &Axis<T>,
    arm: Arm,
) -> Result<Trace<T>, PulsedError> {
    let (g_own, g_other) = arm_rates(config, arm);
    let gbar = config.gamma_bar();
    let delta = config.effective_mismatch();
    let fastest = g_own.max(g_other).max(gbar + delta.abs());
    if grid.step() > T::of(0.05) / fastest {
        return Err(PulsedError::UnderSampled);
    }

    // Refine the output step by an integer factor for the internal grid.
    let target = T::of(FLUX_REFINE_TARGET) / fastest;
    let refine = (grid.step() / target)
        .to_f64()
        .unwrap_or(1.0)
        .ceil()
        .max(1.0) as usize;
    let h = grid.step() / T::of(refine as f64);

    let envelope = effective_envelope(config, envelope, grid.end(), h)?;

    // History before the first output sample: bounded support starts there,
    // a CW drive needs enough history to settle the kernels. The start is
    // snapped onto the internal lattice so that every output node is an
    // internal node.
    let raw_start = match envelope.support_start() {
        Some(s) => s.min(grid.start()),
        None => grid.start() - T::of(45.0) / gbar,
    };
    let offset = ((grid.start() - raw_start) / h)
        .to_f64()
        .unwrap_or(0.0)
        .ceil()
        .max(0.0) as usize;
    let start = grid.start() - h * T::of(offset as f64);
    let total_steps = (((grid.end() - start) / h).to_f64().unwrap_or(2.0).ceil() as usize).max(2);

    // p(x) = q(x) e^{-i delta x} with q the envelope amplitude to the
    // process order. Two cascaded one-pole filters:
    //   K(u) = integral of p*(x) e^{-gbar (u - x)} up to u,
    //   M(t) = integral of p(y) K(y) e^{-g_own (t - y)} up to t,
    // and the flux is 2 Re M(t).
    let p_at = |x: T, from_below: bool| -> Complex<T> {
        let q = if from_below {
            envelope.power_before(x, config.order)
        } else {
            envelope.power_after(x, config.order)
        };
        q * cis(-delta * x)
    };
    let decay_k = (-gbar * h).exp();
    let decay_m = (-g_own * h).exp();
    let half_h = h * T::half();

    let mut k_acc = Complex::new(T::zero(), T::zero());
    let mut m_acc = Complex::new(T::zero(), T::zero());
    let mut out = Vec::with_capacity(grid.len());

    let mut prev_p = p_at(start, false);
    let mut prev_pk = prev_p * k_acc;
    if offset == 0 {
        out.push(T::two() * m_acc.re);
    }
    for step_idx in 1..=total_steps {
        let u = start + h * T::of(step_idx as f64);
        // Trapezoid increment for K over [u - h, u], one-sided at jumps.
        let p_below = p_at(u, true);
        k_acc = k_acc * decay_k + (prev_p.conj() * decay_k + p_below.conj()).scale(half_h);
        let pk_below = p_below * k_acc;
        m_acc = m_acc * decay_m + (prev_pk * decay_m + pk_below).scale(half_h);
        // Values continuing past u use the from-above envelope limit.
        prev_p = p_at(u, false);
        prev_pk = prev_p * k_acc;
        if step_idx >= offset && (step_idx - offset).is_multiple_of(refine) && out.len() < grid.len() {
            out.push(T::two() * m_acc.re);
        }
        if out.len() == grid.len() {
            break;
        }
    }
    while out.len() < grid.len() {
        out.push(T::zero());
    }
    Ok(Trace::new(grid.clone(), out, "flux")?)
}

/// Flux averaged over a uniform window of mismatches, modeling slow drift of
/// the operating point across one acquisition.
pub fn flux_pulsed_delta_averaged<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    grid: &Axis<T>,
    arm: Arm,
    window: T,
    n_samples: usize,
) -> Result<Trace<T>, PulsedError> {
    let n = n_samples.max(1);
    let mut acc = vec![T::zero(); grid.len()];
    for k in 0..n {
        let frac = if n == 1 {
            T::zero()
        } else {
            T::of(k as f64) / T::of((n - 1) as f64) - T::half()
        };
        let mut cfg = config.clone();
        cfg.mismatch_delta = config.mismatch_delta + window * frac;
        let tr = flux_pulsed(&cfg, envelope, grid, arm)?;
        for (a, v) in acc.iter_mut().zip(tr.values) {
            *a += v;
        }
    }
    let scale = T::of(n as f64).recip();
    Ok(Trace::new(
        grid.clone(),
        acc.into_iter().map(|v| v * scale).collect(),
        "flux",
    )?)
}

/// Closed-form flux for a rectangular pulse with equal signal and idler
/// linewidths, normalized to the CW steady state: rises as
/// `1 - e^{-gamma t}(cos(delta t) + (gamma/delta) sin(delta t))` during the
/// pulse and rings down at exactly `gamma` afterwards.
pub fn flux_rect_closed<T: Scalar>(t: T, gamma_si: T, delta: T, tau_p: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let rise = |x: T| -> T {
        let dx = delta * x;
        let sin_term = if dx.abs() < T::of(1e-3) {
            // (gamma/delta) sin(delta x) = gamma x sinc(delta x)
            let d2 = dx * dx;
            gamma_si * x * (T::one() - d2 / T::of(6.0) + d2 * d2 / T::of(120.0))
        } else {
            gamma_si / delta * dx.sin()
        };
        T::one() - (-gamma_si * x).exp() * (dx.cos() + sin_term)
    };
    if t <= tau_p {
        rise(t)
    } else {
        rise(tau_p) * (-gamma_si * (t - tau_p)).exp()
    }
}

/// Non-stationary cross-correlation: the squared modulus of the joint
/// temporal amplitude at the two detection times.
pub fn xcorr_pulsed<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    t: T,
    t_prime: T,
) -> T {
    jta_direct_point(config, envelope, t, t_prime).norm_sqr()
}

/// Overlap of the heralded amplitudes at two times, integrated over the
/// partner detection time; the building block of the pulsed
/// autocorrelation.
fn coherence_overlap<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    t: T,
    t_prime: T,
) -> Complex<T> {
    let gamma_i = config.idler.linewidth_total();
    let gbar = config.gamma_bar();
    let lower = envelope
        .support_start()
        .unwrap_or(t.min(t_prime) - T::of(45.0) / gbar);
    let upper = t.max(t_prime) + T::of(40.0) / gamma_i;
    let n = 2_000usize;
    crate::num::integrate(
        |u| {
            jta_direct_point(config, envelope, t, u).conj()
                * jta_direct_point(config, envelope, t_prime, u)
        },
        lower,
        upper,
        n,
    )
}

/// Normalized single-arm autocorrelation at two times for a pulsed drive;
/// exactly 2 at equal times wherever the flux is nonzero.
pub fn acorr_pulsed<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    t: T,
    t_prime: T,
) -> Result<T, PulsedError> {
    let n_t = coherence_overlap(config, envelope, t, t).re;
    let n_tp = coherence_overlap(config, envelope, t_prime, t_prime).re;
    let floor = T::of(1e-12) * n_t.max(n_tp);
    if !(n_t > floor) || !(n_tp > floor) || !(n_t > T::zero()) {
        return Err(PulsedError::ZeroFlux);
    }
    let overlap = coherence_overlap(config, envelope, t, t_prime);
    Ok(T::one() + overlap.norm_sqr() / (n_t * n_tp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cw::cross_correlation_cw;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn cfg(delta: f64) -> ProcessConfig<f64> {
        ProcessConfig::symmetric(1.0, delta, ProcessOrder::Spdc, 1e-3)
    }

    fn rect(power: f64, tau_p: f64) -> PumpEnvelope<f64> {
        PumpEnvelope::rectangular_from_power(power, tau_p).unwrap()
    }

    #[test]
    fn closed_form_edges() {
        assert_eq!(flux_rect_closed(0.0, 1.0, 0.0, 10.0), 0.0);
        assert_eq!(flux_rect_closed(-1.0, 1.0, 2.0, 10.0), 0.0);
        // Settled step response.
        assert!((flux_rect_closed(10.0f64, 1.0, 0.0, 20.0) - 1.0f64).abs() < 1e-3);
    }

    #[test]
    fn closed_form_small_time_rise_accelerates_with_mismatch() {
        for delta in [0.0, 1.0, 4.0] {
            let t = 1e-3;
            let expect = (1.0 + delta * delta) * t * t / 2.0;
            let got = flux_rect_closed(t, 1.0, delta, 1.0);
            assert_relative_eq!(got, expect, max_relative = 1e-2);
        }
    }

    #[test]
    fn closed_form_oscillates_at_the_mismatch_frequency() {
        let delta = 4.0;
        // Local extrema of the rise term repeat with period 2 pi / delta.
        let mut crossings = vec![];
        let mut prev = flux_rect_closed(0.0, 1.0, delta, 100.0) - 1.0;
        let h = 1e-4;
        let mut t = h;
        while t < 6.0 {
            let v = flux_rect_closed(t, 1.0, delta, 100.0) - 1.0;
            if prev < 0.0 && v >= 0.0 {
                crossings.push(t);
            }
            prev = v;
            t += h;
        }
        assert!(crossings.len() >= 2);
        let period = crossings[1] - crossings[0];
        assert_relative_eq!(period, 2.0 * std::f64::consts::PI / delta, max_relative = 1e-2);
    }

    #[test]
    fn closed_form_ringdown_is_mismatch_independent() {
        for delta in [0.0, 2.0, 4.0] {
            let tau_p = 10.0;
            let a = flux_rect_closed(tau_p + 2.0, 1.0, delta, tau_p);
            let b = flux_rect_closed(tau_p + 5.0, 1.0, delta, tau_p);
            assert_relative_eq!((a as f64 / b).ln(), 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn quadrature_matches_the_closed_form() {
        let tau_p = 10.0;
        for delta in [0.0, 2.0] {
            let grid = Axis::span(0.0, 2.0 * tau_p, 2001, "t_s").unwrap();
            let tr = flux_pulsed(&cfg(delta), &rect(1.0, tau_p), &grid, Arm::Signal).unwrap();
            let scale = cw_steady_flux_kernel(&cfg(delta), Arm::Signal, 1.0);
            let mut worst = 0.0f64;
            for (t, &v) in tr.iter() {
                let expect = flux_rect_closed(t, 1.0, delta, tau_p);
                worst = worst.max((v / scale - expect).abs());
            }
            assert!(worst < 1e-4, "delta={delta}: worst {worst}");
        }
    }

    #[test]
    fn zero_envelope_gives_zero_trace() {
        let env = PumpEnvelope::sampled(0.0, 0.01, vec![Complex64::new(0.0, 0.0); 500]).unwrap();
        let grid = Axis::span(0.0, 4.0, 401, "t_s").unwrap();
        let tr = flux_pulsed(&cfg(1.0), &env, &grid, Arm::Signal).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_envelope_decays_at_the_arm_rate() {
        let mut cfg = cfg(0.0);
        cfg.idler = crate::model::CavityMode::from_linewidth(2.0, 1.0).unwrap();
        let cfg = cfg.with_drive_ratio(1e-3);
        let h = 1e-3;
        let mut vals = vec![Complex64::new(0.0, 0.0); 4000];
        vals[1] = Complex64::new(1.0, 0.0);
        let env = PumpEnvelope::sampled(-h, h, vals).unwrap();
        let grid = Axis::span(0.5, 3.5, 301, "t_s").unwrap();
        let tr = flux_pulsed(&cfg, &env, &grid, Arm::Signal).unwrap();
        // Log slope equals the signal linewidth (idler differs).
        let k1 = 30;
        let k2 = 270;
        let slope = (tr.values[k2] / tr.values[k1]).ln()
            / (grid.value(k2) - grid.value(k1));
        assert_relative_eq!(slope, -1.0, max_relative = 1e-3);
    }

    #[test]
    fn flux_is_invariant_under_envelope_phase_rotation() {
        let grid = Axis::span(0.0, 12.0, 1201, "t_s").unwrap();
        let base = rect(1.0, 6.0);
        let rotated = PumpEnvelope::Rectangular {
            amplitude: Complex64::from_polar(1.0, 1.234),
            duration: 6.0,
        };
        let a = flux_pulsed(&cfg(2.0), &base, &grid, Arm::Signal).unwrap();
        let b = flux_pulsed(&cfg(2.0), &rotated, &grid, Arm::Signal).unwrap();
        let scale = cw_steady_flux_kernel(&cfg(2.0), Arm::Signal, 1.0);
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).abs() <= 1e-10 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn four_wave_flux_scales_with_the_fourth_power_of_amplitude() {
        let cfg = ProcessConfig::symmetric(1.0, 0.5, ProcessOrder::Sfwm, 1e-3);
        let grid = Axis::span(0.0, 8.0, 401, "t_s").unwrap();
        let a = flux_pulsed(&cfg, &rect(1.0, 5.0), &grid, Arm::Signal).unwrap();
        let b = flux_pulsed(&cfg, &rect(2.0, 5.0), &grid, Arm::Signal).unwrap();
        let k = 200;
        assert_relative_eq!(b.values[k], 4.0 * a.values[k], max_relative = 1e-10);
    }

    #[test]
    fn flux_bounded_by_twice_the_steady_state() {
        for delta in [0.0f64, 1.0, 4.0, 10.0] {
            let pts = (20.0 * (1.0 + delta) / 0.04) as usize + 1;
            let grid = Axis::span(0.0, 20.0, pts, "t_s").unwrap();
            let tr = flux_pulsed(&cfg(delta), &rect(1.0, 10.0), &grid, Arm::Signal).unwrap();
            let scale = cw_steady_flux_kernel(&cfg(delta), Arm::Signal, 1.0);
            for &v in &tr.values {
                assert!(v / scale <= 2.0 + 1e-9, "delta={delta}");
            }
        }
    }

    #[test]
    fn mismatch_averaging_damps_the_oscillation() {
        let config = cfg(4.0);
        let grid = Axis::span(0.0, 12.0, 2401, "t_s").unwrap();
        let env = rect(1.0, 12.0);
        let sharp = flux_pulsed(&config, &env, &grid, Arm::Signal).unwrap();
        let smeared =
            flux_pulsed_delta_averaged(&config, &env, &grid, Arm::Signal, 2.0, 15).unwrap();
        // Peak-to-trough swing of the late oscillation shrinks.
        let swing = |tr: &Trace<f64>| {
            let lo = grid.nearest(6.0);
            let hi = grid.nearest(11.5);
            let seg = &tr.values[lo..hi];
            seg.iter().cloned().fold(f64::MIN, f64::max)
                - seg.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!(
            swing(&smeared) < 0.5 * swing(&sharp),
            "smearing must damp the ringing: {} vs {}",
            swing(&smeared),
            swing(&sharp)
        );
    }

    #[test]
    fn undersampled_grid_is_rejected() {
        let grid = Axis::span(0.0, 20.0, 21, "t_s").unwrap();
        assert_eq!(
            flux_pulsed(&cfg(0.0), &rect(1.0, 10.0), &grid, Arm::Signal).unwrap_err(),
            PulsedError::UnderSampled
        );
    }

    #[test]
    fn xcorr_reaches_the_stationary_form_deep_in_a_long_pulse() {
        let config = cfg(1.5);
        let env = rect(1.0, 60.0);
        let t = 40.0;
        let peak = xcorr_pulsed(&config, &env, t, t);
        for tau in [0.4, 1.0, 2.2] {
            let got = xcorr_pulsed(&config, &env, t, t + tau) / peak;
            let expect = cross_correlation_cw(tau, 1.0, 1.0);
            assert_relative_eq!(got, expect, max_relative = 1e-4);
        }
    }

    #[test]
    fn acorr_is_two_at_equal_times_and_errors_off_support() {
        let config = cfg(0.8);
        let env = rect(1.0, 6.0);
        let g2 = acorr_pulsed(&config, &env, 3.0, 3.0).unwrap();
        assert_relative_eq!(g2, 2.0, max_relative = 1e-10);
        // Before the pulse there is no field at all.
        assert_eq!(
            acorr_pulsed(&config, &env, -3.0, -2.5).unwrap_err(),
            PulsedError::ZeroFlux
        );
        // Cross-correlation causality: nothing before the envelope starts.
        assert_eq!(xcorr_pulsed(&config, &env, -1.0, -2.0), 0.0);
    }
}
