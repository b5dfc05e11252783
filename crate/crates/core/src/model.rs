//! Domain types shared by every other module: cavity modes, process
//! configuration, pump envelopes, and their validation.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * every rate and detuning is an angular frequency in rad/s; conversion
//!   from laboratory `Hz` values happens once at the CLI boundary,
//! * complex carriers rotate as `e^{-i omega t}`,
//! * a mode's total linewidth is always derived as coupling rate plus
//!   intrinsic loss rate, never stored on its own.

use num_complex::Complex;
use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("total linewidth must be positive (coupling and loss rates nonnegative)")]
    InvalidLinewidth,
    #[error("drive ratio {ratio} is at or above the oscillation threshold")]
    AboveThreshold { ratio: f64 },
    #[error("process order must be 1 (three-wave) or 2 (four-wave), got {0}")]
    BadProcessOrder(u8),
    #[error("operation requires a resonant pump mode but none is configured")]
    MissingPumpMode,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// One cavity resonance, defined by its coupling rate and intrinsic loss
/// rate (both rad/s). The total linewidth (FWHM of the Lorentzian line) is
/// their sum by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMode<T> {
    coupling_rate: T,
    intrinsic_loss_rate: T,
}

impl<T: Scalar> CavityMode<T> {
    pub fn new(coupling_rate: T, intrinsic_loss_rate: T) -> Result<Self, ModelError> {
        if !(coupling_rate >= T::zero())
            || !(intrinsic_loss_rate >= T::zero())
            || !(coupling_rate + intrinsic_loss_rate > T::zero())
        {
            return Err(ModelError::InvalidLinewidth);
        }
        Ok(Self {
            coupling_rate,
            intrinsic_loss_rate,
        })
    }

    /// Build from the total linewidth and the coupling coefficient
    /// `kappa = coupling / total` in `[0, 1]`.
    pub fn from_linewidth(total: T, kappa: T) -> Result<Self, ModelError> {
        if !(total > T::zero()) {
            return Err(ModelError::InvalidLinewidth);
        }
        if !(kappa >= T::zero() && kappa <= T::one()) {
            return Err(ModelError::InvalidParameter("kappa must lie in [0, 1]"));
        }
        Self::new(total * kappa, total * (T::one() - kappa))
    }

    /// Total linewidth (rad/s), the FWHM of the resonance.
    pub fn linewidth_total(&self) -> T {
        self.coupling_rate + self.intrinsic_loss_rate
    }

    pub fn coupling_rate(&self) -> T {
        self.coupling_rate
    }

    pub fn intrinsic_loss_rate(&self) -> T {
        self.intrinsic_loss_rate
    }

    /// Coupling coefficient `kappa` in `[0, 1]`; `1/2` is critical coupling.
    pub fn coupling_coefficient(&self) -> T {
        self.coupling_rate / self.linewidth_total()
    }
}

/// Which parametric process generates the pair: three-wave mixing consumes
/// one pump photon per pair, four-wave mixing two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessOrder {
    /// chi(2) down-conversion; rates scale linearly with pump power.
    Spdc,
    /// chi(3) four-wave mixing; rates scale quadratically with pump power.
    Sfwm,
}

impl ProcessOrder {
    /// The pump-amplitude exponent `j`.
    pub fn exponent(self) -> u32 {
        match self {
            ProcessOrder::Spdc => 1,
            ProcessOrder::Sfwm => 2,
        }
    }

    pub fn from_index(j: u8) -> Result<Self, ModelError> {
        match j {
            1 => Ok(ProcessOrder::Spdc),
            2 => Ok(ProcessOrder::Sfwm),
            other => Err(ModelError::BadProcessOrder(other)),
        }
    }
}

/// The (pump, signal, idler) triplet plus mismatch, detuning, and drive.
///
/// `mismatch_delta` is the frequency mismatch at zero pump detuning; the
/// mismatch actually seen by the parametric interaction is
/// [`ProcessConfig::effective_mismatch`], which adds the pump detuning in a
/// triply resonant configuration.
///
/// `pump_drive` is the externally supplied pump power in W. For a doubly
/// resonant configuration it enters the nonlinearity directly; with a pump
/// mode present the stored intracavity energy (J) derived from it is what
/// drives the conversion. `coupling_strength` is the nonlinear efficiency in
/// 1/(s sqrt(W)) or 1/(s sqrt(J)) accordingly.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessConfig<T> {
    pub signal: CavityMode<T>,
    pub idler: CavityMode<T>,
    pub pump: Option<CavityMode<T>>,
    pub mismatch_delta: T,
    pub pump_detuning: T,
    pub order: ProcessOrder,
    pub coupling_strength: T,
    pub pump_drive: T,
}

impl<T: Scalar> ProcessConfig<T> {
    /// Mean response rate of the signal/idler pair.
    pub fn gamma_bar(&self) -> T {
        (self.signal.linewidth_total() + self.idler.linewidth_total()) * T::half()
    }

    /// Mismatch seen by the parametric interaction at the current pump
    /// detuning.
    pub fn effective_mismatch(&self) -> T {
        self.mismatch_delta + self.pump_detuning
    }

    /// Oscillation threshold of the drive in the units of `pump_drive`
    /// (W doubly resonant, J triply resonant).
    pub fn threshold_drive(&self) -> T {
        let g = self.coupling_strength;
        let prod = self.signal.linewidth_total() * self.idler.linewidth_total();
        match self.order {
            ProcessOrder::Spdc => prod / (g * g),
            ProcessOrder::Sfwm => prod.sqrt() / g,
        }
    }

    /// Drive that enters the nonlinearity: pump power for a doubly resonant
    /// configuration, stored intracavity pump energy for a triply resonant
    /// one. The triply resonant value depends on the pump detuning.
    pub fn nonlinear_drive(&self) -> T {
        match &self.pump {
            None => self.pump_drive,
            Some(pump) => {
                crate::pump::cw_intracavity_energy(self.pump_drive, pump, self.pump_detuning)
            }
        }
    }

    /// The dimensionless below-threshold knob `(drive / threshold)^j`.
    pub fn drive_ratio(&self) -> T {
        let base = self.nonlinear_drive() / self.threshold_drive();
        match self.order {
            ProcessOrder::Spdc => base,
            ProcessOrder::Sfwm => base * base,
        }
    }

    /// Rescale the coupling strength so that `drive_ratio()` equals `ratio`
    /// at the current drive and detuning. Convenient because no absolute
    /// value of the nonlinear efficiency is required anywhere below
    /// threshold.
    pub fn with_drive_ratio(mut self, ratio: T) -> Self {
        let prod = self.signal.linewidth_total() * self.idler.linewidth_total();
        let drive = self.nonlinear_drive();
        self.coupling_strength = match self.order {
            ProcessOrder::Spdc => (ratio * prod / drive).sqrt(),
            ProcessOrder::Sfwm => (ratio.sqrt() * prod.sqrt()) / drive,
        };
        self
    }

    /// A symmetric doubly resonant configuration used widely in tests:
    /// equal overcoupled signal/idler modes with the given total linewidth.
    pub fn symmetric(gamma_si: T, mismatch: T, order: ProcessOrder, drive_ratio: T) -> Self {
        let mode = CavityMode::from_linewidth(gamma_si, T::one()).expect("valid mode");
        let cfg = Self {
            signal: mode,
            idler: mode,
            pump: None,
            mismatch_delta: mismatch,
            pump_detuning: T::zero(),
            order,
            coupling_strength: T::one(),
            pump_drive: T::one(),
        };
        cfg.with_drive_ratio(drive_ratio)
    }

    /// Check every type invariant, returning the configuration on success.
    pub fn validate(self) -> Result<Self, ModelError> {
        if !(self.gamma_bar() > T::zero()) {
            return Err(ModelError::InvalidLinewidth);
        }
        for v in [
            self.mismatch_delta,
            self.pump_detuning,
            self.coupling_strength,
            self.pump_drive,
        ] {
            if !v.is_finite() {
                return Err(ModelError::InvalidParameter("non-finite parameter"));
            }
        }
        if self.coupling_strength <= T::zero() {
            return Err(ModelError::InvalidParameter(
                "coupling strength must be positive",
            ));
        }
        if self.pump_drive < T::zero() {
            return Err(ModelError::InvalidParameter("pump drive must be >= 0"));
        }
        if self.pump.is_none() && self.pump_detuning != T::zero() {
            return Err(ModelError::InvalidParameter(
                "pump detuning requires a resonant pump mode",
            ));
        }
        let ratio = self.drive_ratio();
        if !(ratio < T::one()) {
            return Err(ModelError::AboveThreshold {
                ratio: ratio.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self)
    }

    pub fn require_pump(&self) -> Result<&CavityMode<T>, ModelError> {
        self.pump.as_ref().ok_or(ModelError::MissingPumpMode)
    }
}

/// Slowly varying pump amplitude driving the conversion.
///
/// `Sampled` values are linearly interpolated inside their support and are
/// zero outside it.
#[derive(Debug, Clone, PartialEq)]
pub enum PumpEnvelope<T> {
    Cw {
        amplitude: Complex<T>,
    },
    Rectangular {
        amplitude: Complex<T>,
        duration: T,
    },
    Sampled {
        start: T,
        step: T,
        values: Vec<Complex<T>>,
    },
}

impl<T: Scalar> PumpEnvelope<T> {
    pub fn cw_from_power(power: T) -> Self {
        PumpEnvelope::Cw {
            amplitude: Complex::new(power.sqrt(), T::zero()),
        }
    }

    pub fn rectangular_from_power(power: T, duration: T) -> Result<Self, ModelError> {
        if !(duration > T::zero()) {
            return Err(ModelError::InvalidParameter(
                "rectangular pulse duration must be positive",
            ));
        }
        Ok(PumpEnvelope::Rectangular {
            amplitude: Complex::new(power.sqrt(), T::zero()),
            duration,
        })
    }

    pub fn sampled(start: T, step: T, values: Vec<Complex<T>>) -> Result<Self, ModelError> {
        if !(step > T::zero()) {
            return Err(ModelError::InvalidParameter(
                "sample step must be positive",
            ));
        }
        if values.len() < 2 {
            return Err(ModelError::InvalidParameter(
                "sampled envelope needs at least two samples",
            ));
        }
        Ok(PumpEnvelope::Sampled {
            start,
            step,
            values,
        })
    }

    /// Start of the support; `None` for a CW envelope.
    pub fn support_start(&self) -> Option<T> {
        match self {
            PumpEnvelope::Cw { .. } => None,
            PumpEnvelope::Rectangular { .. } => Some(T::zero()),
            PumpEnvelope::Sampled { start, .. } => Some(*start),
        }
    }

    /// End of the support; `None` for a CW envelope.
    pub fn support_end(&self) -> Option<T> {
        match self {
            PumpEnvelope::Cw { .. } => None,
            PumpEnvelope::Rectangular { duration, .. } => Some(*duration),
            PumpEnvelope::Sampled { start, step, values } => {
                Some(*start + *step * T::of((values.len() - 1) as f64))
            }
        }
    }

    /// One-sided limit of the amplitude approaching `t` from above.
    /// Quadrature code uses the one-sided pair so that jump discontinuities
    /// aligned with grid nodes integrate exactly.
    pub fn value_after(&self, t: T) -> Complex<T> {
        self.value_one_sided(t, true)
    }

    /// One-sided limit of the amplitude approaching `t` from below.
    pub fn value_before(&self, t: T) -> Complex<T> {
        self.value_one_sided(t, false)
    }

    /// Amplitude at `t` (two-sided; uses the from-above limit at jumps).
    pub fn value_at(&self, t: T) -> Complex<T> {
        self.value_one_sided(t, true)
    }

    fn value_one_sided(&self, t: T, from_above: bool) -> Complex<T> {
        let zero = Complex::new(T::zero(), T::zero());
        match self {
            PumpEnvelope::Cw { amplitude } => *amplitude,
            PumpEnvelope::Rectangular {
                amplitude,
                duration,
            } => {
                let inside = if from_above {
                    t >= T::zero() && t < *duration
                } else {
                    t > T::zero() && t <= *duration
                };
                if inside {
                    *amplitude
                } else {
                    zero
                }
            }
            PumpEnvelope::Sampled {
                start,
                step,
                values,
            } => {
                let end = *start + *step * T::of((values.len() - 1) as f64);
                if t < *start || t > end {
                    return zero;
                }
                let pos = (t - *start) / *step;
                let k = pos.floor().to_f64().unwrap_or(0.0) as usize;
                if k + 1 >= values.len() {
                    return values[values.len() - 1];
                }
                let frac = pos - T::of(k as f64);
                values[k] + (values[k + 1] - values[k]) * frac
            }
        }
    }

    /// The amplitude raised to the process-order exponent, evaluated with the
    /// same one-sided semantics as [`PumpEnvelope::value_after`].
    pub fn power_after(&self, t: T, order: ProcessOrder) -> Complex<T> {
        let v = self.value_after(t);
        match order {
            ProcessOrder::Spdc => v,
            ProcessOrder::Sfwm => v * v,
        }
    }

    pub fn power_before(&self, t: T, order: ProcessOrder) -> Complex<T> {
        let v = self.value_before(t);
        match order {
            ProcessOrder::Spdc => v,
            ProcessOrder::Sfwm => v * v,
        }
    }
}
