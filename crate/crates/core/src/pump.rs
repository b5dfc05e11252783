//! Pump-cavity response in a triply resonant configuration: intracavity
//! amplitude, stored energy, reflected power, and pulsed step response.

use num_complex::Complex;
use thiserror::Error;

use crate::grid::{Axis, GridError};
use crate::model::{CavityMode, PumpEnvelope};
use crate::num::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum PumpError {
    #[error("time grid must extend beyond the pulse duration")]
    GridTooShort,
    #[error("envelope is not a {0} variant")]
    WrongEnvelope(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Intracavity pump amplitude and stored energy on a shared time axis.
#[derive(Debug, Clone)]
pub struct PumpResponse<T> {
    pub times: Axis<T>,
    pub amplitude: Vec<Complex<T>>,
    pub stored_energy: Vec<T>,
    /// Set when the driving envelope was sampled more coarsely than a tenth
    /// of the cavity response time.
    pub undersampled: bool,
}

impl<T: Scalar> PumpResponse<T> {
    fn from_amplitude(times: Axis<T>, amplitude: Vec<Complex<T>>, undersampled: bool) -> Self {
        let stored_energy = amplitude.iter().map(|a| a.norm_sqr()).collect();
        Self {
            times,
            amplitude,
            stored_energy,
            undersampled,
        }
    }
}

/// Causal impulse response of the pump mode: `exp(-(gamma/2 - i delta) t)`
/// for `t >= 0`, zero before.
pub fn pump_impulse_response<T: Scalar>(t: T, gamma_p: T, detuning: T) -> Complex<T> {
    if t < T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    Complex::from_polar((-gamma_p * T::half() * t).exp(), detuning * t)
}

/// Steady-state intracavity energy under CW drive; a Lorentzian in the
/// detuning with FWHM equal to the pump linewidth.
pub fn cw_intracavity_energy<T: Scalar>(power_in: T, mode: &CavityMode<T>, detuning: T) -> T {
    let gamma = mode.linewidth_total();
    mode.coupling_rate() * power_in / (gamma * gamma * T::of(0.25) + detuning * detuning)
}

/// Reflected-to-input power ratio under CW drive: an inverted Lorentzian dip
/// that reaches zero at critical coupling on resonance.
pub fn reflected_power_ratio<T: Scalar>(kappa_p: T, gamma_p: T, detuning: T) -> T {
    let lorentz = gamma_p * gamma_p / (gamma_p * gamma_p * T::of(0.25) + detuning * detuning);
    T::one() - kappa_p * (T::one() - kappa_p) * lorentz
}

/// Closed-form response to a rectangular drive pulse.
///
/// During the pulse the amplitude follows the step response
/// `1 - exp(-(gamma/2 - i delta) t)` scaled to the CW steady state; after the
/// pulse it rings down at the detuning-independent field rate `gamma/2`.
pub fn rect_pulse_response<T: Scalar>(
    envelope: &PumpEnvelope<T>,
    mode: &CavityMode<T>,
    detuning: T,
    grid: &Axis<T>,
) -> Result<PumpResponse<T>, PumpError> {
    let (amp_in, duration) = match envelope {
        PumpEnvelope::Rectangular {
            amplitude,
            duration,
        } => (*amplitude, *duration),
        _ => return Err(PumpError::WrongEnvelope("Rectangular")),
    };
    if grid.end() <= duration {
        return Err(PumpError::GridTooShort);
    }
    let gamma = mode.linewidth_total();
    // CW steady-state amplitude for this drive and detuning.
    let steady = amp_in * mode.coupling_rate().sqrt()
        / Complex::new(gamma * T::half(), -detuning);
    let step = |t: T| -> Complex<T> {
        Complex::new(T::one(), T::zero())
            - Complex::from_polar((-gamma * T::half() * t).exp(), detuning * t)
    };
    let at_end = step(duration);
    let values = grid
        .values()
        .map(|t| {
            if t < T::zero() {
                Complex::new(T::zero(), T::zero())
            } else if t <= duration {
                steady * step(t)
            } else {
                steady * at_end * (-gamma * T::half() * (t - duration)).exp()
            }
        })
        .collect();
    Ok(PumpResponse::from_amplitude(grid.clone(), values, false))
}

/// Intracavity amplitude for an arbitrary sampled drive: the causal
/// convolution of the input with the impulse response, scaled by the square
/// root of the coupling rate. Trapezoidal weights on the envelope's own grid.
pub fn general_pulse_response<T: Scalar>(
    envelope: &PumpEnvelope<T>,
    mode: &CavityMode<T>,
    detuning: T,
) -> Result<PumpResponse<T>, PumpError> {
    let (start, step, values) = match envelope {
        PumpEnvelope::Sampled {
            start,
            step,
            values,
        } => (*start, *step, values),
        _ => return Err(PumpError::WrongEnvelope("Sampled")),
    };
    let gamma = mode.linewidth_total();
    let undersampled = step > T::of(0.1) / gamma;
    let axis = Axis::new(start, step, values.len(), "t_s")?;
    let root_coupling = mode.coupling_rate().sqrt();

    // alpha(t_k) = sqrt(gamma') * sum over the grid of Gamma(t_k - t_m) a_m h
    // with trapezoidal end weights. Gamma(t_k - t_m) factorizes into
    // phi(t_k) / phi(t_m) with phi(t) = exp(-(gamma/2 - i delta) t), so the
    // whole convolution is a single stable prefix recursion:
    //   alpha_k = decay * alpha_{k-1} + sqrt(gamma') * h/2 * (decay*a_{k-1} + a_k)
    let decay = Complex::from_polar((-gamma * T::half() * step).exp(), detuning * step);
    let half_h = step * T::half();
    let mut out = Vec::with_capacity(values.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    out.push(acc);
    for k in 1..values.len() {
        acc = acc * decay + (values[k - 1] * decay + values[k]) * half_h;
        out.push(acc * root_coupling);
    }
    // First sample carries no accumulated drive yet.
    out[0] = Complex::new(T::zero(), T::zero());
    Ok(PumpResponse::from_amplitude(axis, out, undersampled))
}
