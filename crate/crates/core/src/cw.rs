//! Closed-form observables under continuous-wave pumping: pair flux,
//! single-arm spectra, cross- and auto-correlation functions, and the
//! triply-resonant count-rate law used by the mismatch estimation.

use thiserror::Error;

use crate::model::{ModelError, ProcessConfig, ProcessOrder};
use crate::num::{bisect, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum CwError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("autocorrelation width outside the invertible range")]
    WidthOutOfRange,
}

/// Which output arm an observable refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

/// Normalized cross-correlation versus the idler-minus-signal delay: a
/// two-sided exponential peaking at one for zero delay, independent of the
/// frequency mismatch.
pub fn cross_correlation_cw<T: Scalar>(tau: T, gamma_s: T, gamma_i: T) -> T {
    if tau < T::zero() {
        (gamma_s * tau).exp()
    } else {
        (-gamma_i * tau).exp()
    }
}

/// Unnormalized pair flux: the drive raised to the process order over a
/// Lorentzian in the mismatch with FWHM twice the mean response rate.
///
/// In a triply resonant configuration the drive is the stored intracavity
/// pump energy at the configured detuning.
pub fn flux_cw<T: Scalar>(config: &ProcessConfig<T>) -> T {
    let drive = config.nonlinear_drive();
    let p = match config.order {
        ProcessOrder::Spdc => drive,
        ProcessOrder::Sfwm => drive * drive,
    };
    let gbar = config.gamma_bar();
    let delta = config.effective_mismatch();
    p / (gbar * gbar + delta * delta)
}

/// Count rate of a triply resonant source versus pump detuning: the pump
/// enhancement Lorentzian times the parametric efficiency Lorentzian, with
/// the mismatch shifted by the detuning.
pub fn flux_triply_resonant<T: Scalar>(config: &ProcessConfig<T>) -> Result<T, ModelError> {
    config.require_pump()?;
    Ok(flux_cw(config))
}

/// Single-arm spectral density (unnormalized): the arm's own squared line
/// times the partner line displaced by the mismatch.
pub fn spectrum_cw<T: Scalar>(omega: T, config: &ProcessConfig<T>, arm: Arm) -> T {
    let (own, partner) = match arm {
        Arm::Signal => (&config.signal, &config.idler),
        Arm::Idler => (&config.idler, &config.signal),
    };
    let delta = config.effective_mismatch();
    let l_own = lorentzian_line_sq(omega, own.linewidth_total());
    let l_partner = lorentzian_line_sq(omega - delta, partner.linewidth_total());
    l_own * l_partner
}

fn lorentzian_line_sq<T: Scalar>(omega: T, gamma: T) -> T {
    (gamma * gamma * T::of(0.25) + omega * omega).recip()
}

/// Normalized single-arm autocorrelation `g2(tau)`.
///
/// Routes through the general unequal-linewidth expression; the equal
/// linewidth case uses the compact fast path. Equal-time value is exactly 2,
/// the large-delay limit 1.
pub fn autocorrelation_cw<T: Scalar>(tau: T, config: &ProcessConfig<T>) -> T {
    let gamma_s = config.signal.linewidth_total();
    let gamma_i = config.idler.linewidth_total();
    let delta = config.effective_mismatch();
    if gamma_s == gamma_i {
        autocorrelation_equal_linewidths(tau, gamma_s, delta)
    } else {
        autocorrelation_general(tau, gamma_s, gamma_i, delta)
    }
}

/// Fast path for equal signal/idler linewidths.
///
/// The degenerate-mismatch ratio `(gamma/delta) sin(delta |tau| / 2)` is
/// evaluated by series for small `delta * tau` to remove the 0/0.
pub fn autocorrelation_equal_linewidths<T: Scalar>(tau: T, gamma: T, delta: T) -> T {
    let at = tau.abs();
    let x = delta * at * T::half();
    let sinc_term = if x.abs() < T::of(1e-3) {
        // (gamma/delta) sin(delta |tau|/2) = (gamma |tau| / 2) sinc(x)
        let x2 = x * x;
        gamma * at * T::half()
            * (T::one() - x2 / T::of(6.0) + x2 * x2 / T::of(120.0))
    } else {
        gamma / delta * x.sin()
    };
    let osc = (delta * tau * T::half()).cos() + sinc_term;
    T::one() + osc * osc * (-gamma * at).exp()
}

/// General unequal-linewidth autocorrelation: one plus the correlated part.
pub fn autocorrelation_general<T: Scalar>(tau: T, gamma_s: T, gamma_i: T, delta: T) -> T {
    let at = tau.abs();
    let gbar = (gamma_s + gamma_i) * T::half();
    let g2 = gbar * gbar;
    let d2 = delta * delta;
    let e_s = (-gamma_s * at).exp();
    let e_i = (-gamma_i * at).exp();
    let e_bar = (-gbar * at).exp();
    let num = (gamma_i * gamma_i * e_s + gamma_s * gamma_s * e_i) * (g2 + d2)
        - T::two() * gamma_s * gamma_i * (g2 - d2) * (delta * tau).cos() * e_bar
        + T::of(4.0) * gamma_s * gamma_i * gbar * delta * (at * delta).sin() * e_bar;
    let diff = gamma_s - gamma_i;
    let den = g2 * (diff * diff + T::of(4.0) * d2);
    T::one() + num / den
}

/// Normalized signal-idler cross-correlation including its flux-dependent
/// peak: one plus the pair rate times the two-sided exponential.
pub fn g2_si_cw<T: Scalar>(tau: T, config: &ProcessConfig<T>) -> T {
    let gamma_s = config.signal.linewidth_total();
    let gamma_i = config.idler.linewidth_total();
    let inv_sum = (gamma_s.recip() + gamma_i.recip()).recip();
    let rate = crate::langevin::pair_rate(config);
    T::one() + inv_sum / rate * cross_correlation_cw(tau, gamma_s, gamma_i)
}

/// FWHM of the correlated part of the autocorrelation, in seconds, defined
/// from the first half crossing on each side of zero delay.
pub fn autocorrelation_fwhm<T: Scalar>(config: &ProcessConfig<T>) -> T {
    let gamma = config.gamma_bar();
    let f = |tau: T| autocorrelation_cw(tau, config) - T::one();
    let half = T::half(); // peak of g2 - 1 is exactly 1 at tau = 0
    // March outward until the correlated part falls below one half, then
    // bisect the first crossing.
    let step = T::of(0.02) / gamma;
    let mut prev = T::zero();
    for k in 1..200_000 {
        let t = step * T::of(k as f64);
        if f(t) < half {
            let root = bisect(|x| f(x) - half, prev, t);
            return root * T::two();
        }
        prev = t;
    }
    T::infinity()
}

/// Mismatch magnitude from a measured autocorrelation width (the numeric
/// inverse of [`autocorrelation_fwhm`]).
///
/// The map width-versus-mismatch is monotone only on a bounded interval;
/// this inverse is valid for `|delta| <= valid_span * gamma` (checked to be
/// monotone there on construction) and errors outside the reachable widths.
pub fn mismatch_from_autocorr_fwhm<T: Scalar>(
    width: T,
    config_at_zero: &ProcessConfig<T>,
    valid_span: T,
) -> Result<T, CwError> {
    let gamma = config_at_zero.gamma_bar();
    let width_of = |delta_abs: T| {
        let mut cfg = config_at_zero.clone();
        cfg.mismatch_delta = delta_abs;
        autocorrelation_fwhm(&cfg)
    };
    let hi_delta = valid_span * gamma;
    let w0 = width_of(T::zero());
    let w_hi = width_of(hi_delta);
    if width > w0 || width < w_hi {
        return Err(CwError::WidthOutOfRange);
    }
    Ok(bisect(|d| width_of(d) - width, T::zero(), hi_delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sym(delta_over_gamma: f64) -> ProcessConfig<f64> {
        ProcessConfig::symmetric(1.0, delta_over_gamma, ProcessOrder::Spdc, 1e-3)
    }

    #[test]
    fn cross_correlation_peak_and_decay() {
        assert_eq!(cross_correlation_cw(0.0, 1.0, 1.0), 1.0);
        // Equal rates 1/t_si: one decay time on either side gives 1/e.
        let e = (-1.0f64).exp();
        assert_relative_eq!(cross_correlation_cw(1.0, 1.0, 1.0), e);
        assert_relative_eq!(cross_correlation_cw(-1.0, 1.0, 1.0), e);
    }

    #[test]
    fn cross_correlation_ignores_mismatch() {
        // The shape depends only on the linewidths, so two configurations
        // differing in mismatch share it by construction; asserted through
        // the pulsed module elsewhere. Here: asymmetry follows the arms.
        assert!(cross_correlation_cw(0.5, 1.0, 3.0) < cross_correlation_cw(-0.5, 1.0, 3.0));
    }

    #[test]
    fn flux_halves_at_the_mean_rate_detuning() {
        let on = flux_cw(&sym(0.0));
        let half = flux_cw(&sym(1.0));
        assert_relative_eq!(half, on / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn flux_scales_linearly_then_quadratically_with_power() {
        let mut one = sym(0.0);
        one.pump_drive = 1.0;
        let f1 = flux_cw(&one);
        let mut d = one.clone();
        d.pump_drive = 2.0;
        assert_relative_eq!(flux_cw(&d), 2.0 * f1, max_relative = 1e-14);

        let two = ProcessConfig::symmetric(1.0, 0.0, ProcessOrder::Sfwm, 1e-3);
        let f2 = flux_cw(&two);
        let mut d2 = two.clone();
        d2.pump_drive = 2.0;
        assert_relative_eq!(flux_cw(&d2), 4.0 * f2, max_relative = 1e-14);
    }

    #[test]
    fn spectrum_is_single_peaked_on_resonance_and_splits_when_detuned() {
        let cfg = sym(0.0);
        // FWHM of the squared Lorentzian: gamma * sqrt(sqrt(2) - 1).
        let w = crate::num::fwhm_around(|x| spectrum_cw(x, &cfg, Arm::Signal), 0.0, 0.01)
            .unwrap();
        assert_relative_eq!(w, (2.0f64.sqrt() - 1.0).sqrt(), max_relative = 1e-9);

        let detuned = sym(4.0);
        // Two maxima: near the resonance and near the displaced line.
        let axis = crate::grid::Axis::span(-3.0, 7.0, 20_001, "omega").unwrap();
        let tr = crate::grid::Trace::from_fn(axis, "s", |x| {
            spectrum_cw(x, &detuned, Arm::Signal)
        });
        assert_eq!(tr.local_maxima(), 2);
    }

    #[test]
    fn asymmetric_arms_give_unequal_peaks() {
        let mut cfg = sym(0.0);
        cfg.signal = crate::model::CavityMode::from_linewidth(1.0, 1.0).unwrap();
        cfg.idler = crate::model::CavityMode::from_linewidth(2.0, 1.0).unwrap();
        let cfg = cfg.with_drive_ratio(1e-3);
        let mut cfg = cfg;
        cfg.mismatch_delta = 4.0 * cfg.gamma_bar();
        let axis = crate::grid::Axis::span(-4.0, 11.0, 30_001, "omega").unwrap();
        let tr = crate::grid::Trace::from_fn(axis.clone(), "s", |x| {
            spectrum_cw(x, &cfg, Arm::Signal)
        });
        assert_eq!(tr.local_maxima(), 2);
        // Locate the two maxima and compare heights.
        let vals = &tr.values;
        let mut peaks = vec![];
        for k in 1..vals.len() - 1 {
            if vals[k] > vals[k - 1] && vals[k] > vals[k + 1] {
                peaks.push(vals[k]);
            }
        }
        assert!(peaks[0] != peaks[1]);
    }

    #[test]
    fn spectrum_index_swap_symmetry() {
        let mut cfg = sym(2.5);
        cfg.signal = crate::model::CavityMode::from_linewidth(1.0, 1.0).unwrap();
        cfg.idler = crate::model::CavityMode::from_linewidth(1.7, 1.0).unwrap();
        let cfg = cfg.with_drive_ratio(1e-3);
        let mut swapped = cfg.clone();
        std::mem::swap(&mut swapped.signal, &mut swapped.idler);
        for w in [-1.0, 0.0, 0.8, 3.1] {
            assert_relative_eq!(
                spectrum_cw(w, &cfg, Arm::Signal),
                spectrum_cw(w, &swapped, Arm::Idler),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn autocorrelation_equal_time_is_two_for_any_mismatch() {
        for d in [0.0, 1e-8, 0.5, 4.0, 40.0] {
            assert_eq!(autocorrelation_cw(0.0, &sym(d)), 2.0);
        }
    }

    #[test]
    fn autocorrelation_tends_to_one() {
        assert_relative_eq!(autocorrelation_cw(60.0, &sym(0.7)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_mismatch_limit_matches_series_form() {
        // Against 1 + (1 + gamma |tau| / 2)^2 e^{-gamma |tau|}.
        let cfg = sym(0.0);
        for tau in [0.0, 0.3, 1.0, 2.7, 6.0] {
            let expect = 1.0 + (1.0 + tau / 2.0) * (1.0 + tau / 2.0) * (-tau as f64).exp();
            assert_relative_eq!(autocorrelation_cw(tau, &cfg), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn general_formula_agrees_with_equal_linewidth_form() {
        for delta in [0.5f64, 2.0, 4.0] {
            for tau in [0.0f64, 0.2, 0.9, 2.3, 5.0] {
                let fast = autocorrelation_equal_linewidths(tau, 1.0, delta);
                let general = autocorrelation_general(tau, 1.0, 1.0, delta);
                assert!(
                    (fast - general).abs() <= 1e-10 * fast,
                    "delta={delta}, tau={tau}: {fast} vs {general}"
                );
            }
        }
    }

    #[test]
    fn autocorrelation_oscillates_at_the_mismatch_period() {
        let cfg = sym(4.0);
        // Successive local maxima of g2 - 1 beyond the central peak are
        // spaced by 2 pi / delta.
        let axis = crate::grid::Axis::span(0.0, 8.0, 80_001, "tau").unwrap();
        let tr = crate::grid::Trace::from_fn(axis, "g2", |t| {
            autocorrelation_cw(t, &cfg) - 1.0
        });
        let mut peaks = vec![];
        for k in 1..tr.len() - 1 {
            if tr.values[k] > tr.values[k - 1] && tr.values[k] > tr.values[k + 1] {
                peaks.push(tr.axis.value(k));
            }
        }
        assert!(peaks.len() >= 3, "need several oscillation maxima");
        let period = peaks[2] - peaks[1];
        assert_relative_eq!(period, 2.0 * std::f64::consts::PI / 4.0, max_relative = 1e-3);
    }

    #[test]
    fn bunching_peak_dominates() {
        let cfg = sym(2.0);
        let peak = autocorrelation_cw(0.0, &cfg);
        for k in 1..60 {
            let tau = 0.17 * k as f64;
            assert!(peak >= autocorrelation_cw(tau, &cfg));
        }
    }

    #[test]
    fn degenerate_width_is_about_four_point_three_response_times() {
        let w = autocorrelation_fwhm(&sym(0.0));
        assert!((w - 4.3).abs() < 0.1, "width {w}");
    }

    #[test]
    fn width_inverse_recovers_the_mismatch() {
        let cfg0 = sym(0.0);
        for d in [0.5, 1.5, 3.0] {
            let w = autocorrelation_fwhm(&sym(d));
            let rec = mismatch_from_autocorr_fwhm(w, &cfg0, 5.0).unwrap();
            assert_relative_eq!(rec, d, max_relative = 1e-6);
        }
        // Widths larger than the zero-mismatch value are unreachable.
        assert_eq!(
            mismatch_from_autocorr_fwhm(5.0, &cfg0, 5.0).unwrap_err(),
            CwError::WidthOutOfRange
        );
    }

    #[test]
    fn triply_resonant_rate_peaks_where_detuning_cancels_the_mismatch() {
        let gamma_si = 1.0;
        let pump = crate::model::CavityMode::from_linewidth(4.4, 0.5).unwrap();
        let delta0 = -2.0;
        let rate = |dp: f64| {
            let mut cfg = ProcessConfig::symmetric(gamma_si, delta0, ProcessOrder::Spdc, 1e-3);
            cfg.pump = Some(pump);
            cfg.pump_detuning = dp;
            flux_triply_resonant(&cfg).unwrap()
        };
        // Normalizing away the pump Lorentzian leaves a peak at -delta0.
        let normalized = |dp: f64| {
            rate(dp)
                * (1.0
                    - crate::pump::reflected_power_ratio(0.5, 4.4, dp))
                .recip()
        };
        let mut best = (0.0, f64::MIN);
        let mut dp = -6.0;
        while dp <= 6.0 {
            let v = normalized(dp);
            if v > best.1 {
                best = (dp, v);
            }
            dp += 0.001;
        }
        assert_relative_eq!(best.0, -delta0, epsilon = 0.01);

        // Symmetric raw curve when the intrinsic mismatch vanishes.
        let r = |dp: f64| {
            let mut cfg = ProcessConfig::symmetric(gamma_si, 0.0, ProcessOrder::Spdc, 1e-3);
            cfg.pump = Some(pump);
            cfg.pump_detuning = dp;
            flux_triply_resonant(&cfg).unwrap()
        };
        assert_relative_eq!(r(1.3), r(-1.3), max_relative = 1e-12);

        // Missing pump mode is an error.
        let cfg = ProcessConfig::symmetric(1.0, 0.0, ProcessOrder::Spdc, 1e-3);
        assert_eq!(
            flux_triply_resonant(&cfg).unwrap_err(),
            ModelError::MissingPumpMode
        );
    }
}
