//! Joint spectral and temporal amplitudes of the generated photon pair.
//!
//! The two-photon state is described interchangeably by a joint spectral
//! amplitude over the offsets from the signal/idler resonances and by its
//! two-dimensional Fourier partner, the joint temporal amplitude over the
//! detection times. Everything downstream (fluxes, spectra, correlation
//! functions) integrates over these objects.

use num_complex::Complex;
use thiserror::Error;

use crate::grid::{Axis, Grid2, GridError, Trace};
use crate::model::{CavityMode, ProcessConfig, ProcessOrder, PumpEnvelope};
use crate::num::{cis, simpson, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum BiphotonError {
    #[error("output grid is sampled more coarsely than a tenth of the fastest response time")]
    UnderSampled,
    #[error("pump spectrum grid does not cover the requested frequencies")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Complex cavity line factor `1 / (gamma/2 - i omega)`; squared modulus is a
/// Lorentzian of FWHM `gamma` peaking at the resonance.
pub fn cavity_line<T: Scalar>(omega: T, mode: &CavityMode<T>) -> Complex<T> {
    let gamma = mode.linewidth_total();
    Complex::new(gamma * T::half(), -omega).inv()
}

/// Pump description in the frequency domain as consumed by [`jsa`].
///
/// For a four-wave process the effective spectrum entering the joint
/// amplitude is the self-convolution of the field spectrum; callers either
/// pass it directly or build it with [`self_convolve`].
pub enum PumpSpectrum<'a, T: Scalar> {
    /// Monochromatic pump: a spectral delta with the given weight.
    Monochromatic { amplitude: Complex<T> },
    /// Analytic spectral amplitude.
    Analytic(&'a dyn Fn(T) -> Complex<T>),
    /// Sampled spectral amplitude, linearly interpolated, zero outside.
    Sampled(&'a Trace<T, Complex<T>>),
}

impl<T: Scalar> PumpSpectrum<'_, T> {
    fn eval(&self, omega: T) -> Complex<T> {
        match self {
            PumpSpectrum::Monochromatic { .. } => {
                unreachable!("delta spectra are handled symbolically")
            }
            PumpSpectrum::Analytic(f) => f(omega),
            PumpSpectrum::Sampled(tr) => {
                let axis = &tr.axis;
                if omega < axis.start() || omega > axis.end() {
                    return Complex::new(T::zero(), T::zero());
                }
                let pos = (omega - axis.start()) / axis.step();
                let k = pos.floor().to_f64().unwrap_or(0.0) as usize;
                if k + 1 >= tr.values.len() {
                    return tr.values[tr.values.len() - 1];
                }
                let frac = pos - T::of(k as f64);
                tr.values[k] + (tr.values[k + 1] - tr.values[k]) * frac
            }
        }
    }
}

/// Discrete self-convolution of a sampled field spectrum, for building the
/// effective pump spectrum of a four-wave process.
pub fn self_convolve<T: Scalar>(spectrum: &Trace<T, Complex<T>>) -> Trace<T, Complex<T>> {
    let n = spectrum.len();
    let step = spectrum.axis.step();
    let start = spectrum.axis.start() * T::two();
    let mut out = vec![Complex::new(T::zero(), T::zero()); 2 * n - 1];
    for (i, a) in spectrum.values.iter().enumerate() {
        for (j, b) in spectrum.values.iter().enumerate() {
            out[i + j] += *a * *b;
        }
    }
    for v in &mut out {
        *v *= step;
    }
    let axis = Axis::new(start, step, 2 * n - 1, spectrum.axis.label.clone())
        .expect("convolved axis inherits a valid step");
    Trace::new(axis, out, spectrum.value_label.clone()).expect("length matches by construction")
}

/// Joint spectral amplitude of the pair.
///
/// A pump of finite bandwidth yields a gridded amplitude. A monochromatic
/// pump concentrates all weight on the line `omega + omega' = mismatch`;
/// that case is kept symbolic and stores the amplitude along the line
/// instead of a grid full of zeros.
pub enum JointSpectralAmplitude<T: Scalar> {
    Grid(Grid2<T, Complex<T>>),
    MonochromaticLine {
        mismatch: T,
        /// Weight along the line, parameterized by the signal offset.
        line: Trace<T, Complex<T>>,
    },
}

/// Joint temporal amplitude on a `(t, t')` grid.
pub type JointTemporalAmplitude<T> = Grid2<T, Complex<T>>;

/// Default symmetric frequency axis for a pair of modes: span wide enough to
/// capture the slow Lorentzian tails of the narrower line.
pub fn default_frequency_axis<T: Scalar>(
    config: &ProcessConfig<T>,
    len: usize,
    label: &str,
) -> Axis<T> {
    let gmax = config
        .signal
        .linewidth_total()
        .max(config.idler.linewidth_total());
    let span = (config.effective_mismatch().abs() + gmax * T::of(20.0)) * T::of(2.0);
    Axis::symmetric(span * T::half(), len, label).expect("valid axis")
}

/// Default symmetric time axis: twenty response times of the slower mode on
/// either side of zero, which keeps the truncated exponential tails below
/// one part in ten thousand. 1024 samples per axis is the usual grid.
pub fn default_time_axis<T: Scalar>(config: &ProcessConfig<T>, len: usize, label: &str) -> Axis<T> {
    let gmin = config
        .signal
        .linewidth_total()
        .min(config.idler.linewidth_total());
    Axis::symmetric(T::of(20.0) / gmin, len, label).expect("valid axis")
}

/// Joint spectral amplitude with the engine's Lorentzian lines.
pub fn jsa<T: Scalar>(
    config: &ProcessConfig<T>,
    pump: &PumpSpectrum<'_, T>,
    axis_signal: &Axis<T>,
    axis_idler: &Axis<T>,
) -> JointSpectralAmplitude<T> {
    jsa_with_lines(
        config,
        pump,
        axis_signal,
        axis_idler,
        |w| cavity_line(w, &config.signal),
        |w| cavity_line(w, &config.idler),
    )
}

/// Joint spectral amplitude with caller-supplied resonance line factors.
///
/// The line shape is a replaceable hook so that non-Lorentzian resonances
/// (for instance backscattering-split doublets) can be modeled without
/// touching the rest of the engine.
pub fn jsa_with_lines<T: Scalar>(
    config: &ProcessConfig<T>,
    pump: &PumpSpectrum<'_, T>,
    axis_signal: &Axis<T>,
    axis_idler: &Axis<T>,
    line_signal: impl Fn(T) -> Complex<T>,
    line_idler: impl Fn(T) -> Complex<T>,
) -> JointSpectralAmplitude<T> {
    let mismatch = config.effective_mismatch();
    match pump {
        PumpSpectrum::Monochromatic { amplitude } => {
            let weight = match config.order {
                ProcessOrder::Spdc => *amplitude,
                ProcessOrder::Sfwm => *amplitude * *amplitude,
            };
            let line = Trace::from_fn(axis_signal.clone(), "phi", |w| {
                weight * line_signal(w) * line_idler(mismatch - w)
            });
            JointSpectralAmplitude::MonochromaticLine { mismatch, line }
        }
        _ => {
            let grid = Grid2::from_fn(
                axis_signal.clone(),
                axis_idler.clone(),
                "phi",
                |w, wp| pump.eval(w + wp - mismatch) * line_signal(w) * line_idler(wp),
            );
            JointSpectralAmplitude::Grid(grid)
        }
    }
}

/// Closed-form joint temporal amplitude under CW pumping.
///
/// Piecewise exponential in the two detection times, continuous on the
/// diagonal; the mismatch enters through the prefactor and a pure phase, so
/// the modulus is mismatch-independent.
pub fn jta_cw<T: Scalar>(config: &ProcessConfig<T>, t: T, t_prime: T) -> Complex<T> {
    let gamma_s = config.signal.linewidth_total();
    let gamma_i = config.idler.linewidth_total();
    let mismatch = config.effective_mismatch();
    let amp = config.nonlinear_drive().sqrt();
    let weight = match config.order {
        ProcessOrder::Spdc => amp,
        ProcessOrder::Sfwm => amp * amp,
    };
    let prefactor =
        Complex::new(config.gamma_bar(), -mismatch).inv() * weight;
    if t < t_prime {
        prefactor
            * Complex::from_polar(
                (-gamma_i * T::half() * (t_prime - t)).exp(),
                -mismatch * t,
            )
    } else {
        prefactor
            * Complex::from_polar(
                (-gamma_s * T::half() * (t - t_prime)).exp(),
                -mismatch * t_prime,
            )
    }
}

/// Number of quadrature intervals per unit of the fastest decay time used by
/// the direct time-domain integrals.
const QUAD_PER_RESPONSE_TIME: f64 = 40.0;
/// How many response times of history the truncated CW integrals keep.
const TAIL_RESPONSE_TIMES: f64 = 45.0;

/// Joint temporal amplitude by direct quadrature of the defining integral:
/// the pump amplitude (raised to the process order, with the mismatch phase)
/// convolved with both cavity impulse responses.
pub fn jta_direct<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    axis_t: &Axis<T>,
    axis_t_prime: &Axis<T>,
) -> Result<JointTemporalAmplitude<T>, BiphotonError> {
    let gmin = config
        .signal
        .linewidth_total()
        .min(config.idler.linewidth_total());
    let max_step = T::of(0.1) / gmin;
    if axis_t.step() > max_step || axis_t_prime.step() > max_step {
        return Err(BiphotonError::UnderSampled);
    }
    let mut grid = Grid2::from_fn(axis_t.clone(), axis_t_prime.clone(), "psi", |_, _| {
        Complex::new(T::zero(), T::zero())
    });
    for (i, t) in axis_t.values().enumerate() {
        for (j, tp) in axis_t_prime.values().enumerate() {
            grid.set(i, j, jta_direct_point(config, envelope, t, tp));
        }
    }
    Ok(grid)
}

/// Single-point evaluation of the joint temporal amplitude integral.
pub fn jta_direct_point<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    t: T,
    t_prime: T,
) -> Complex<T> {
    let gamma_s = config.signal.linewidth_total();
    let gamma_i = config.idler.linewidth_total();
    let gbar = config.gamma_bar();
    let mismatch = config.effective_mismatch();
    let zero = Complex::new(T::zero(), T::zero());

    let upper_cut = t.min(t_prime);
    let lower = match envelope.support_start() {
        Some(s) => s,
        None => upper_cut - T::of(TAIL_RESPONSE_TIMES) / gbar,
    };
    let upper = match envelope.support_end() {
        Some(e) => e.min(upper_cut),
        None => upper_cut,
    };
    if upper <= lower {
        return zero;
    }

    // Integrand of the defining convolution at the quadrature node.
    let integrand = |u: T, one_sided_before: bool| -> Complex<T> {
        let q = if one_sided_before {
            envelope.power_before(u, config.order)
        } else {
            envelope.power_after(u, config.order)
        };
        if q == zero {
            return zero;
        }
        let damp = (-(gamma_s * (t - u) + gamma_i * (t_prime - u)) * T::half()).exp();
        q * cis(-mismatch * u) * damp
    };

    let gmax = gamma_s.max(gamma_i);
    let n = ((upper - lower) * gmax * T::of(QUAD_PER_RESPONSE_TIME))
        .to_f64()
        .unwrap_or(64.0)
        .ceil() as usize;
    let n = n.clamp(16, 200_000);
    let n = if n.is_multiple_of(2) { n } else { n + 1 };
    let h = (upper - lower) / T::of(n as f64);
    let values: Vec<Complex<T>> = (0..=n)
        .map(|k| {
            let u = lower + h * T::of(k as f64);
            // One-sided evaluation at the segment ends keeps jump edges exact.
            integrand(u, k == n)
        })
        .collect();
    simpson(&values, h)
}

/// Joint temporal amplitude on a full grid via the separable reduction:
/// with `J(t)` the causal convolution of the phase-carrying pump amplitude
/// against `e^{-gbar u}`, the amplitude is `e^{-gamma_i (t'-t)/2} J(t)` above
/// the diagonal and `e^{-gamma_s (t-t')/2} J(t')` below it. One stable 1-D
/// prefix recursion therefore fills the whole grid; agrees with
/// [`jta_direct`] to quadrature accuracy at a fraction of the cost.
pub fn jta_grid<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    axis_t: &Axis<T>,
    axis_t_prime: &Axis<T>,
) -> Result<JointTemporalAmplitude<T>, BiphotonError> {
    if !axis_t.same_sampling(axis_t_prime) {
        return Err(BiphotonError::Grid(GridError::GridMismatch));
    }
    let gamma_s = config.signal.linewidth_total();
    let gamma_i = config.idler.linewidth_total();
    let gbar = config.gamma_bar();
    let mismatch = config.effective_mismatch();
    let gmin = gamma_s.min(gamma_i);
    if axis_t.step() > T::of(0.1) / gmin {
        return Err(BiphotonError::UnderSampled);
    }

    // Internal refinement of the output step for the prefix integral.
    let target = T::of(0.002) / gamma_s.max(gamma_i);
    let refine = (axis_t.step() / target)
        .to_f64()
        .unwrap_or(1.0)
        .ceil()
        .max(1.0) as usize;
    let h = axis_t.step() / T::of(refine as f64);
    let raw_start = match envelope.support_start() {
        Some(s) => s.min(axis_t.start()),
        None => axis_t.start() - T::of(TAIL_RESPONSE_TIMES) / gbar,
    };
    let offset = ((axis_t.start() - raw_start) / h)
        .to_f64()
        .unwrap_or(0.0)
        .ceil()
        .max(0.0) as usize;
    let start = axis_t.start() - h * T::of(offset as f64);
    let total = (((axis_t.end() - start) / h).to_f64().unwrap_or(2.0).ceil() as usize).max(2);

    let q_at = |u: T, from_below: bool| -> Complex<T> {
        let q = if from_below {
            envelope.power_before(u, config.order)
        } else {
            envelope.power_after(u, config.order)
        };
        q * cis(-mismatch * u)
    };
    let decay = (-gbar * h).exp();
    let half_h = h * T::half();
    let mut j_vals = Vec::with_capacity(axis_t.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut prev = q_at(start, false);
    if offset == 0 {
        j_vals.push(acc);
    }
    for k in 1..=total {
        let u = start + h * T::of(k as f64);
        let below = q_at(u, true);
        acc = acc * decay + (prev * decay + below).scale(half_h);
        prev = q_at(u, false);
        if k >= offset && (k - offset).is_multiple_of(refine) && j_vals.len() < axis_t.len() {
            j_vals.push(acc);
        }
        if j_vals.len() == axis_t.len() {
            break;
        }
    }
    while j_vals.len() < axis_t.len() {
        j_vals.push(Complex::new(T::zero(), T::zero()));
    }

    let n = axis_t.len();
    let mut grid = Grid2::from_fn(axis_t.clone(), axis_t_prime.clone(), "psi", |_, _| {
        Complex::new(T::zero(), T::zero())
    });
    for i in 0..n {
        let t = axis_t.value(i);
        for j in 0..n {
            let tp = axis_t_prime.value(j);
            let v = if t <= tp {
                j_vals[i].scale((-gamma_i * T::half() * (tp - t)).exp())
            } else {
                j_vals[j].scale((-gamma_s * T::half() * (t - tp)).exp())
            };
            grid.set(i, j, v);
        }
    }
    Ok(grid)
}

/// Joint temporal amplitude from a gridded joint spectral amplitude via the
/// engine's 2-D transform (see [`crate::fourier`] for the conventions). A
/// monochromatic-line amplitude has the closed form [`jta_cw`] instead.
pub fn jta_from_jsa<T: Scalar + rustfft::FftNum>(
    jsa: &Grid2<T, Complex<T>>,
    axis_t: &Axis<T>,
    axis_t_prime: &Axis<T>,
) -> Result<JointTemporalAmplitude<T>, GridError> {
    crate::fourier::grid_freq_to_time(jsa, axis_t, axis_t_prime)
}

/// Inverse of [`jta_from_jsa`]: round-tripping through the pair returns the
/// input to floating-point accuracy on conjugate grids.
pub fn jsa_from_jta<T: Scalar + rustfft::FftNum>(
    jta: &JointTemporalAmplitude<T>,
    axis_omega: &Axis<T>,
    axis_omega_prime: &Axis<T>,
) -> Result<Grid2<T, Complex<T>>, GridError> {
    crate::fourier::grid_time_to_freq(jta, axis_omega, axis_omega_prime)
}

/// Conjugate (time) axis of a frequency axis under the engine's transform
/// convention: `n` samples, step `2 pi / (n * d_omega)`, centered on zero.
pub fn conjugate_axis<T: Scalar>(axis: &Axis<T>, label: &str) -> Axis<T> {
    let n = axis.len();
    let step = T::tau() / (axis.step() * T::of(n as f64));
    let start = -step * T::of((n / 2) as f64);
    Axis::new(start, step, n, label).expect("conjugate axis is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProcessConfig, ProcessOrder};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn config(gamma_s: f64, gamma_i: f64, mismatch: f64) -> ProcessConfig<f64> {
        let mut cfg = ProcessConfig::symmetric(1.0, mismatch, ProcessOrder::Spdc, 1e-4);
        cfg.signal = CavityMode::from_linewidth(gamma_s, 1.0).unwrap();
        cfg.idler = CavityMode::from_linewidth(gamma_i, 1.0).unwrap();
        cfg.with_drive_ratio(1e-4)
    }

    #[test]
    fn cavity_line_peak_and_half_width() {
        let mode = CavityMode::from_linewidth(2.0f64, 1.0).unwrap();
        let peak = cavity_line(0.0, &mode);
        assert_relative_eq!(peak.re, 1.0, max_relative = 1e-14);
        assert_eq!(peak.im, 0.0);
        // |F(gamma/2)|^2 is half of |F(0)|^2.
        let half = cavity_line(1.0, &mode).norm_sqr();
        assert_relative_eq!(half, peak.norm_sqr() / 2.0, max_relative = 1e-14);
        // Vanishes far away.
        assert!(cavity_line(1e9, &mode).norm() < 1e-8);
    }

    #[test]
    fn cw_jsa_concentrates_on_the_energy_conservation_line() {
        let cfg = config(1.0, 1.0, 0.0);
        let axis = Axis::symmetric(8.0, 65, "omega").unwrap();
        let pump = PumpSpectrum::Monochromatic {
            amplitude: Complex64::new(1.0, 0.0),
        };
        match jsa(&cfg, &pump, &axis, &axis) {
            JointSpectralAmplitude::MonochromaticLine { mismatch, line } => {
                assert_eq!(mismatch, 0.0);
                // Peak of the line weight sits at omega = 0 for zero mismatch.
                let (k, _) = Trace::new(
                    line.axis.clone(),
                    line.values.iter().map(|v| v.norm()).collect(),
                    "abs",
                )
                .unwrap()
                .argmax();
                assert_eq!(line.axis.value(k), 0.0);
            }
            _ => panic!("CW pump must stay symbolic"),
        }

        // Small nonzero mismatch: the line weight stays single-peaked and
        // centered between the two resonances, at mismatch / 2.
        let cfg = config(1.0, 1.0, 0.8);
        match jsa(&cfg, &pump, &axis, &axis) {
            JointSpectralAmplitude::MonochromaticLine { mismatch, line } => {
                assert_eq!(mismatch, 0.8);
                let abs: Vec<f64> = line.values.iter().map(|v| v.norm()).collect();
                let tr = Trace::new(line.axis.clone(), abs, "abs").unwrap();
                let (k, _) = tr.argmax();
                assert_relative_eq!(tr.axis.value(k), 0.4, epsilon = 0.3);
            }
            _ => panic!("CW pump must stay symbolic"),
        }
    }

    #[test]
    fn gaussian_pump_ridge_width_scales_with_process_order() {
        // |Phi|^2 along the sum coordinate has the pump width for a
        // three-wave process and sqrt(2) times that after self-convolution.
        let sigma = 0.5f64;
        let spec_axis = Axis::symmetric(6.0 * sigma, 801, "omega").unwrap();
        let field = Trace::from_fn(spec_axis, "alpha", |w| {
            Complex64::new((-w * w / (2.0 * sigma * sigma)).exp(), 0.0)
        });
        let convolved = self_convolve(&field);
        // Widths of |alpha|^2 and |alpha*alpha|^2 along omega.
        let w_field = Trace::new(
            field.axis.clone(),
            field.values.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>(),
            "p",
        )
        .unwrap()
        .fwhm()
        .unwrap();
        let w_conv = Trace::new(
            convolved.axis.clone(),
            convolved
                .values
                .iter()
                .map(|v| v.norm_sqr())
                .collect::<Vec<_>>(),
            "p",
        )
        .unwrap()
        .fwhm()
        .unwrap();
        assert_relative_eq!(w_conv / w_field, 2.0f64.sqrt(), max_relative = 1e-2);
    }

    #[test]
    fn impulse_pump_factorizes_the_temporal_amplitude() {
        let cfg = config(1.0, 1.5, 0.7);
        // A single-sample kick near zero behaves like a delta drive.
        let step = 1e-3;
        let env = PumpEnvelope::sampled(
            -step,
            step,
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let pts = [(0.4, 0.9), (1.3, 0.5), (2.0, 2.5), (0.8, 0.8)];
        let psi: Vec<Complex64> = pts
            .iter()
            .map(|&(t, tp)| jta_direct_point(&cfg, &env, t, tp))
            .collect();
        // Rank-1 test: psi(t1,t1') psi(t2,t2') = psi(t1,t2') psi(t2,t1').
        let lhs = psi[0] * psi[1];
        let p12 = jta_direct_point(&cfg, &env, pts[0].0, pts[1].1);
        let p21 = jta_direct_point(&cfg, &env, pts[1].0, pts[0].1);
        let rhs = p12 * p21;
        assert!(
            (lhs - rhs).norm() <= 1e-10 * lhs.norm(),
            "impulse-driven amplitude must factorize"
        );
    }

    #[test]
    fn cw_quadrature_matches_closed_form() {
        let cfg = config(1.0, 1.6, 2.3);
        let env = PumpEnvelope::cw_from_power(cfg.pump_drive);
        for &(t, tp) in &[(0.0, 0.0), (0.3, 1.1), (2.0, 0.4), (-1.0, -1.5)] {
            let num = jta_direct_point(&cfg, &env, t, tp);
            let closed = jta_cw(&cfg, t, tp);
            assert!(
                (num - closed).norm() <= 1e-6 * closed.norm(),
                "t={t}, t'={tp}: {num} vs {closed}"
            );
        }
    }

    #[test]
    fn cw_closed_form_is_continuous_on_the_diagonal() {
        let cfg = config(1.0, 2.0, 1.5);
        let t = 0.8;
        let below = jta_cw(&cfg, t - 1e-12, t);
        let above = jta_cw(&cfg, t + 1e-12, t);
        assert!((below - above).norm() < 1e-9 * below.norm());
        // Value on the seam: prefactor times the mismatch phase.
        let expect = Complex64::new(cfg.gamma_bar(), -1.5).inv()
            * cfg.nonlinear_drive().sqrt()
            * cis(-1.5 * t);
        assert!((jta_cw(&cfg, t, t) - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn cw_modulus_shape_is_mismatch_independent() {
        // The mismatch scales the overall amplitude and modulates the phase;
        // the normalized modulus profile in (t, t') does not move.
        let a = config(1.0, 1.0, 0.0);
        let b = config(1.0, 1.0, 5.0);
        let norm_a = jta_cw(&a, 0.0, 0.0).norm();
        let norm_b = jta_cw(&b, 0.0, 0.0).norm();
        for &(t, tp) in &[(0.1, 0.9), (1.4, 0.2), (2.0, 2.0)] {
            assert_relative_eq!(
                jta_cw(&a, t, tp).norm() / norm_a,
                jta_cw(&b, t, tp).norm() / norm_b,
                max_relative = 1e-12
            );
        }
        // Decay check: two idler response times off the diagonal.
        let v0 = jta_cw(&a, 0.0, 0.0).norm();
        let v = jta_cw(&a, 0.0, 2.0).norm();
        assert_relative_eq!(v / v0, (-1.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn process_orders_agree_for_matching_effective_pump() {
        // Same effective pump weight: amplitude a for order two equals a^2
        // for order one; the mismatch enters identically.
        let mut one = config(1.0, 1.3, 2.0);
        one.pump_drive = 0.36; // amplitude 0.6
        let one = one.with_drive_ratio(1e-4);
        let mut two = config(1.0, 1.3, 2.0);
        two.order = ProcessOrder::Sfwm;
        two.pump_drive = 0.6; // amplitude^2 = 0.36
        let two = two.with_drive_ratio(1e-4);
        for &(t, tp) in &[(0.2, 0.5), (1.0, 0.1)] {
            let a = jta_cw(&one, t, tp);
            let b = jta_cw(&two, t, tp);
            assert!((a - b).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn causality_before_pump_support() {
        let cfg = config(1.0, 1.0, 0.0);
        let env = PumpEnvelope::rectangular_from_power(1.0, 2.0).unwrap();
        let psi = jta_direct_point(&cfg, &env, -0.5, -1.0);
        assert_eq!(psi, Complex64::new(0.0, 0.0));
        let zero_env = PumpEnvelope::sampled(
            0.0,
            0.5,
            vec![Complex64::new(0.0, 0.0); 10],
        )
        .unwrap();
        assert_eq!(
            jta_direct_point(&cfg, &zero_env, 3.0, 4.0),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn undersampled_output_grid_is_rejected() {
        let cfg = config(1.0, 1.0, 0.0);
        let env = PumpEnvelope::cw_from_power(1.0);
        let coarse = Axis::new(0.0, 0.5, 8, "t").unwrap();
        assert_eq!(
            jta_direct(&cfg, &env, &coarse, &coarse).unwrap_err(),
            BiphotonError::UnderSampled
        );
    }

    #[test]
    fn fast_grid_matches_pointwise_quadrature() {
        let cfg = config(1.0, 1.7, 1.1);
        let sigma: f64 = 1.2;
        let h = 0.004;
        let n = (12.0 / h) as usize;
        let vals: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = k as f64 * h;
                Complex64::new((-(t - 5.0) * (t - 5.0) / (2.0 * sigma * sigma)).exp(), 0.0)
            })
            .collect();
        let env = PumpEnvelope::sampled(0.0, h, vals).unwrap();
        let axis = Axis::span(0.0, 12.0, 121, "t_s").unwrap();
        let grid = jta_grid(&cfg, &env, &axis, &axis).unwrap();
        let peak = grid.max_modulus();
        for (i, j) in [(20usize, 90usize), (55, 55), (100, 30), (7, 116)] {
            let direct = jta_direct_point(&cfg, &env, axis.value(i), axis.value(j));
            let diff = (grid.at(i, j) - direct).norm() / peak;
            assert!(diff < 1e-6, "({i},{j}): diff {diff}");
        }
    }

    #[test]
    fn default_grids_cover_the_decay_tails() {
        let cfg = config(1.0, 0.4, 0.0);
        let t = default_time_axis(&cfg, 1024, "t_s");
        // Slowest decay (idler, linewidth 0.4) leaves less than 1e-4 of
        // amplitude weight outside the span.
        assert!((-0.4 * t.end()).exp() < 1e-3);
        assert!(t.end() >= 20.0 / 0.4 - 1e-9);
        let f = default_frequency_axis(&cfg, 1024, "omega");
        assert!(f.end() >= 20.0);
    }

    #[test]
    fn single_precision_instantiation_works() {
        let cfg = ProcessConfig::<f32>::symmetric(1.0, 0.5, ProcessOrder::Spdc, 1e-3);
        let v = jta_cw(&cfg, 0.3f32, 0.8f32);
        assert!(v.norm() > 0.0 && v.norm().is_finite());
        let line = cavity_line(0.5f32, &cfg.signal);
        assert!((line.norm_sqr() - 2.0f32).abs() < 1e-5);
    }

    #[test]
    fn cw_amplitude_is_not_factorizable() {
        let cfg = config(1.0, 1.0, 1.0);
        let (t1, t1p, t2, t2p) = (0.2, 0.9, 1.4, 0.3);
        let lhs = jta_cw(&cfg, t1, t1p) * jta_cw(&cfg, t2, t2p);
        let rhs = jta_cw(&cfg, t1, t2p) * jta_cw(&cfg, t2, t1p);
        assert!(
            (lhs - rhs).norm() > 1e-3 * lhs.norm(),
            "CW amplitude must not pass the rank-1 test"
        );
    }
}
