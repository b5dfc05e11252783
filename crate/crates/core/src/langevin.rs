//! Input-output (Heisenberg-picture) description of the source: integral
//! kernels mapping input vacuum noise to the output fields, correlation
//! functions with absolute prefactors, and the canonical-commutator checks.
//!
//! This module is the independent oracle for the Schroedinger-picture
//! observables: fluxes, spectra, and normalized correlation functions are
//! derived here from the kernel solution of the intracavity equations of
//! motion rather than from the joint amplitudes. No stochastic sampling
//! happens anywhere in this module; noise enters only through deterministic
//! kernel contractions.

use num_complex::Complex;
use thiserror::Error;

use crate::cw::Arm;
use crate::grid::{Axis, Grid2};
use crate::model::{ModelError, ProcessConfig, ProcessOrder, PumpEnvelope};
use crate::num::{cis, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum LangevinError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("flux vanishes at a requested time; normalized correlation undefined")]
    ZeroFlux,
    #[error("kernel quadrature step exceeds a tenth of the fastest response time")]
    UnderSampled,
}

/// Pair generation rate (1/s) of the CW source: the harmonic mean of the
/// response rates times the below-threshold drive knob, rolled off by a
/// Lorentzian of half width the mean response rate.
pub fn pair_rate<T: Scalar>(config: &ProcessConfig<T>) -> T {
    let gamma_s = config.signal.linewidth_total();
    let gamma_i = config.idler.linewidth_total();
    let gbar = config.gamma_bar();
    let delta = config.effective_mismatch();
    let inv_sum = (gamma_s.recip() + gamma_i.recip()).recip();
    inv_sum * config.drive_ratio() / (T::one() + delta * delta / (gbar * gbar))
}

/// Output photon fluxes `(n_signal, n_idler)` in photons per second for a CW
/// drive: the coupling coefficients times the pair rate.
pub fn flux_out<T: Scalar>(config: &ProcessConfig<T>) -> Result<(T, T), LangevinError> {
    if !(config.drive_ratio() < T::one()) {
        return Err(LangevinError::Model(ModelError::AboveThreshold {
            ratio: config.drive_ratio().to_f64().unwrap_or(f64::NAN),
        }));
    }
    let r = pair_rate(config);
    Ok((
        config.signal.coupling_coefficient() * r,
        config.idler.coupling_coefficient() * r,
    ))
}

/// Output spectral density with its absolute prefactor: peak value
/// `4 kappa (drive ratio)^1` on resonance at zero mismatch, shaped by the
/// product of the two displaced squared lines. Integrating over angular
/// frequency returns `2 pi` times the output flux (the engine's Fourier
/// normalization).
pub fn spectra_out<T: Scalar>(omega: T, config: &ProcessConfig<T>, arm: Arm) -> T {
    let (own, partner, kappa) = match arm {
        Arm::Signal => (
            &config.signal,
            &config.idler,
            config.signal.coupling_coefficient(),
        ),
        Arm::Idler => (
            &config.idler,
            &config.signal,
            config.idler.coupling_coefficient(),
        ),
    };
    let delta = config.effective_mismatch();
    let g_own = own.linewidth_total();
    let g_partner = partner.linewidth_total();
    let four = T::of(4.0);
    let own_line = T::one() + four * omega * omega / (g_own * g_own);
    let shifted = omega - delta;
    let partner_line = T::one() + four * shifted * shifted / (g_partner * g_partner);
    four * kappa * config.drive_ratio() / (own_line * partner_line)
}

/// Kernel set solving the intracavity dynamics to first order in the
/// nonlinear coupling.
///
/// The direct kernel keeps its distributional part tagged separately: the
/// smooth piece is `coupling_rate * Gamma(t - t')` and the delta carries the
/// coefficient `-1`. The parametric kernel (input partner-conjugate to
/// output) is a genuine two-time function; its dissipative companion is the
/// same kernel scaled by `sqrt(loss/coupling)` of the partner mode.
#[derive(Debug)]
pub struct KernelSet<T: Scalar> {
    config: ProcessConfig<T>,
    envelope: PumpEnvelope<T>,
    quad_step: T,
    tail: T,
}

/// Coefficient of the delta term inside the direct output kernel.
pub fn direct_delta_coefficient<T: Scalar>() -> T {
    -T::one()
}

/// Build the kernel set for a validated configuration and pump envelope.
pub fn build_kernels<T: Scalar>(
    config: &ProcessConfig<T>,
    envelope: &PumpEnvelope<T>,
    quad_step: T,
) -> Result<KernelSet<T>, LangevinError> {
    let gmin = config
        .signal
        .linewidth_total()
        .min(config.idler.linewidth_total());
    if quad_step > T::of(0.1) / gmin {
        return Err(LangevinError::UnderSampled);
    }
    let gbar = (config.signal.linewidth_total() + config.idler.linewidth_total()) * T::half();
    Ok(KernelSet {
        config: config.clone(),
        envelope: envelope.clone(),
        quad_step,
        tail: T::of(45.0) / gbar,
    })
}

impl<T: Scalar> KernelSet<T> {
    pub fn config(&self) -> &ProcessConfig<T> {
        &self.config
    }

    fn gammas(&self, arm: Arm) -> (T, T) {
        match arm {
            Arm::Signal => (
                self.config.signal.linewidth_total(),
                self.config.idler.linewidth_total(),
            ),
            Arm::Idler => (
                self.config.idler.linewidth_total(),
                self.config.signal.linewidth_total(),
            ),
        }
    }

    /// `sqrt(gamma''_partner / gamma'_partner)`: the factor turning the
    /// parametric kernel into its dissipative companion. The partner mode
    /// appears because the parametric kernel multiplies the partner's
    /// conjugated inputs.
    pub fn noise_parametric_ratio(&self, arm: Arm) -> T {
        let partner = match arm {
            Arm::Signal => &self.config.idler,
            Arm::Idler => &self.config.signal,
        };
        (partner.intrinsic_loss_rate() / partner.coupling_rate()).sqrt()
    }

    /// Smooth part of the direct kernel, `gamma' * Gamma(t - t')`.
    pub fn direct_smooth(&self, arm: Arm, t: T, t_prime: T) -> T {
        let mode = match arm {
            Arm::Signal => &self.config.signal,
            Arm::Idler => &self.config.idler,
        };
        if t_prime > t {
            return T::zero();
        }
        mode.coupling_rate() * (-mode.linewidth_total() * T::half() * (t - t_prime)).exp()
    }

    /// Noise-input direct kernel, `sqrt(gamma' gamma'') * Gamma(t - t')`.
    pub fn noise_direct(&self, arm: Arm, t: T, t_prime: T) -> T {
        let mode = match arm {
            Arm::Signal => &self.config.signal,
            Arm::Idler => &self.config.idler,
        };
        if t_prime > t {
            return T::zero();
        }
        (mode.coupling_rate() * mode.intrinsic_loss_rate()).sqrt()
            * (-mode.linewidth_total() * T::half() * (t - t_prime)).exp()
    }

    fn coupling_amp(&self) -> T {
        // (g/2) sqrt(gamma'_s gamma'_i), common to both parametric kernels.
        self.config.coupling_strength
            * T::half()
            * (self.config.signal.coupling_rate() * self.config.idler.coupling_rate()).sqrt()
    }

    /// Stationary part of the CW parametric kernel: the kernel is
    /// `e^{-i Delta t'} W(t - t')` with this `W`.
    fn cw_pair_kernel(&self, arm: Arm, u: T) -> Complex<T> {
        let zero = Complex::new(T::zero(), T::zero());
        if u < T::zero() {
            return zero;
        }
        let (g_own, g_other) = self.gammas(arm);
        let delta = self.config.effective_mismatch();
        let amp = match &self.envelope {
            PumpEnvelope::Cw { amplitude } => match self.config.order {
                ProcessOrder::Spdc => *amplitude,
                ProcessOrder::Sfwm => *amplitude * *amplitude,
            },
            _ => unreachable!("cw_pair_kernel requires a CW envelope"),
        };
        let a = Complex::new((g_own - g_other) * T::half(), -delta);
        let c = amp * self.coupling_amp();
        let x = a * u;
        // (e^{a u} - 1)/a, stable for small |a u|.
        let growth = if x.norm() < T::of(1e-4) {
            let one = Complex::new(T::one(), T::zero());
            (one + x * T::half() + x * x * T::of(1.0 / 6.0) + x * x * x * T::of(1.0 / 24.0))
                .scale(u)
        } else {
            (x.exp() - Complex::new(T::one(), T::zero())) / a
        };
        c * growth * (-g_own * T::half() * u).exp()
    }

    /// Parametric kernel mapping the partner's conjugated input at `t_prime`
    /// to the arm's output at `t`.
    pub fn parametric_kernel(&self, arm: Arm, t: T, t_prime: T) -> Complex<T> {
        if let PumpEnvelope::Cw { .. } = self.envelope {
            let delta = self.config.effective_mismatch();
            return self.cw_pair_kernel(arm, t - t_prime) * cis(-delta * t_prime);
        }
        self.parametric_kernel_quadrature(arm, t, t_prime)
    }

    /// Direct trapezoidal quadrature of the defining sandwich integral; used
    /// for non-CW envelopes and to validate the CW closed form.
    pub fn parametric_kernel_quadrature(&self, arm: Arm, t: T, t_prime: T) -> Complex<T> {
        let zero = Complex::new(T::zero(), T::zero());
        if t_prime >= t {
            return zero;
        }
        let (g_own, g_other) = self.gammas(arm);
        let delta = self.config.effective_mismatch();
        let c = self.coupling_amp();
        let h = self.quad_step;
        let n = (((t - t_prime) / h).to_f64().unwrap_or(2.0).ceil() as usize).max(2);
        let h = (t - t_prime) / T::of(n as f64);
        let f = |u: T, edge_before: bool| -> Complex<T> {
            let q = if edge_before {
                self.envelope.power_before(u, self.config.order)
            } else {
                self.envelope.power_after(u, self.config.order)
            };
            q * cis(-delta * u)
                * ((-(g_own * (t - u) + g_other * (u - t_prime)) * T::half()).exp())
        };
        let mut acc = f(t_prime, false).scale(T::half());
        for k in 1..n {
            acc += f(t_prime + h * T::of(k as f64), false);
        }
        acc += f(t, true).scale(T::half());
        acc * c * h
    }

    fn history_start(&self, upto: T) -> T {
        match self.envelope.support_start() {
            Some(s) => s,
            None => upto - self.tail,
        }
    }

    /// First-order auto-correlation `<a+(t) a(t')>` of one output arm.
    pub fn g1_auto(&self, arm: Arm, t: T, t_prime: T) -> Complex<T> {
        let partner = match arm {
            Arm::Signal => &self.config.idler,
            Arm::Idler => &self.config.signal,
        };
        let weight = partner.linewidth_total() / partner.coupling_rate();
        let upper = t.min(t_prime);
        let lower = self.history_start(upper);
        if upper <= lower {
            return Complex::new(T::zero(), T::zero());
        }
        let h = self.quad_step;
        let n = (((upper - lower) / h).to_f64().unwrap_or(2.0).ceil() as usize).max(2);
        let h = (upper - lower) / T::of(n as f64);
        let f = |u: T| self.parametric_kernel(arm, t, u).conj() * self.parametric_kernel(arm, t_prime, u);
        let mut acc = f(lower).scale(T::half());
        for k in 1..n {
            acc += f(lower + h * T::of(k as f64));
        }
        acc += f(upper).scale(T::half());
        acc.scale(weight * h)
    }

    /// First-order cross-correlation `<a_s(t) a_i(t')>` including the
    /// analytic contraction of the delta inside the direct kernel.
    pub fn g1_cross(&self, t: T, t_prime: T) -> Complex<T> {
        let gamma_s = self.config.signal.linewidth_total();
        let upper = t.min(t_prime);
        let lower = self.history_start(upper);
        let mut delta_term = Complex::new(T::zero(), T::zero());
        if t <= t_prime {
            delta_term = -self.parametric_kernel(Arm::Idler, t_prime, t);
        }
        if upper <= lower {
            return delta_term;
        }
        let h = self.quad_step;
        let n = (((upper - lower) / h).to_f64().unwrap_or(2.0).ceil() as usize).max(2);
        let h = (upper - lower) / T::of(n as f64);
        // gamma_s Gamma_s(t-u) V_i(t', u): the coupling and loss noise paths
        // combine into the total rate.
        let f = |u: T| {
            let gam = (-gamma_s * T::half() * (t - u)).exp();
            self.parametric_kernel(Arm::Idler, t_prime, u).scale(gam)
        };
        let mut acc = f(lower).scale(T::half());
        for k in 1..n {
            acc += f(lower + h * T::of(k as f64));
        }
        acc += f(upper).scale(T::half());
        acc.scale(gamma_s * h) + delta_term
    }

    /// Output flux of one arm at time `t` (photons per second).
    pub fn flux(&self, arm: Arm, t: T) -> T {
        self.g1_auto(arm, t, t).re
    }

    /// Normalized single-arm second-order correlation.
    pub fn g2_auto(&self, arm: Arm, t: T, t_prime: T) -> Result<T, LangevinError> {
        let n_t = self.flux(arm, t);
        let n_tp = self.flux(arm, t_prime);
        if !(n_t > T::zero()) || !(n_tp > T::zero()) {
            return Err(LangevinError::ZeroFlux);
        }
        let g1 = self.g1_auto(arm, t, t_prime);
        Ok(T::one() + g1.norm_sqr() / (n_t * n_tp))
    }

    /// Normalized signal-idler second-order cross-correlation.
    pub fn g2_cross(&self, t: T, t_prime: T) -> Result<T, LangevinError> {
        let n_s = self.flux(Arm::Signal, t);
        let n_i = self.flux(Arm::Idler, t_prime);
        if !(n_s > T::zero()) || !(n_i > T::zero()) {
            return Err(LangevinError::ZeroFlux);
        }
        let g1 = self.g1_cross(t, t_prime);
        Ok(T::one() + g1.norm_sqr() / (n_s * n_i))
    }

    /// Smooth part of the composed output commutator
    /// `[a_out(t), a_out+(t')]` for one arm, with the composed delta
    /// coefficient returned alongside.
    ///
    /// The delta self-pairing contributes exactly `(-1)^2 = 1`; the smooth
    /// direct terms cancel at zeroth order in the coupling (the seam uses
    /// the symmetric step convention), leaving the negated first-order
    /// correlation. For first-order kernels this residual equals the output
    /// correlation function, which is the photon flux on the diagonal.
    pub fn commutator_residual(&self, arm: Arm, t: T, t_prime: T) -> (T, Complex<T>) {
        let mode = match arm {
            Arm::Signal => &self.config.signal,
            Arm::Idler => &self.config.idler,
        };
        let gamma = mode.linewidth_total();
        let coupling = mode.coupling_rate();
        let upper = t.min(t_prime);
        let lower = upper - self.tail;
        let h = self.quad_step;
        let n = (((upper - lower) / h).to_f64().unwrap_or(2.0).ceil() as usize).max(2);
        let h = (upper - lower) / T::of(n as f64);
        // (gamma'^2 + gamma' gamma'') Gamma Gamma = gamma' gamma Gamma Gamma.
        let f = |u: T| (-(gamma * (t - u) + gamma * (t_prime - u)) * T::half()).exp();
        let mut acc = f(lower) * T::half();
        for k in 1..n {
            acc += f(lower + h * T::of(k as f64));
        }
        acc += f(upper) * T::half();
        let direct = coupling * gamma * acc * h;
        let seam = if t == t_prime { T::half() } else { T::one() };
        let step_terms = if t_prime <= t {
            coupling * (-gamma * T::half() * (t - t_prime)).exp() * seam
        } else {
            T::zero()
        } + if t <= t_prime {
            coupling * (-gamma * T::half() * (t_prime - t)).exp() * seam
        } else {
            T::zero()
        };
        let correlated = self.g1_auto(arm, t, t_prime);
        let smooth = Complex::new(direct - step_terms, T::zero()) - correlated;
        let delta_coeff = direct_delta_coefficient::<T>() * direct_delta_coefficient::<T>();
        (delta_coeff, smooth)
    }
}

impl<T: Scalar> KernelSet<T> {
    /// Materialize one parametric kernel on a shared time grid, for export
    /// or inspection.
    pub fn parametric_kernel_grid(&self, arm: Arm, axis: &Axis<T>) -> Grid2<T, Complex<T>> {
        Grid2::from_fn(axis.clone(), axis.clone(), "parametric_kernel", |t, tp| {
            self.parametric_kernel(arm, t, tp)
        })
    }
}

/// Materialized first-order correlation grids on a shared time axis.
pub struct G1Set<T: Scalar> {
    pub auto_signal: Grid2<T, Complex<T>>,
    pub auto_idler: Grid2<T, Complex<T>>,
    pub cross: Grid2<T, Complex<T>>,
}

/// Evaluate the three first-order correlation functions on `axis` squared.
pub fn g1_functions<T: Scalar>(kernels: &KernelSet<T>, axis: &Axis<T>) -> G1Set<T> {
    let auto_signal = Grid2::from_fn(axis.clone(), axis.clone(), "g1_ss", |t, tp| {
        kernels.g1_auto(Arm::Signal, t, tp)
    });
    let auto_idler = Grid2::from_fn(axis.clone(), axis.clone(), "g1_ii", |t, tp| {
        kernels.g1_auto(Arm::Idler, t, tp)
    });
    let cross = Grid2::from_fn(axis.clone(), axis.clone(), "g1_si", |t, tp| {
        kernels.g1_cross(t, tp)
    });
    G1Set {
        auto_signal,
        auto_idler,
        cross,
    }
}

/// Stationary normalized second-order correlations versus delay, evaluated
/// at a reference time deep in the settled regime.
pub struct G2Traces<T: Scalar> {
    pub auto_signal: Vec<T>,
    pub auto_idler: Vec<T>,
    pub cross: Vec<T>,
}

pub fn g2_functions<T: Scalar>(
    kernels: &KernelSet<T>,
    t_ref: T,
    delays: &[T],
) -> Result<G2Traces<T>, LangevinError> {
    let mut auto_signal = Vec::with_capacity(delays.len());
    let mut auto_idler = Vec::with_capacity(delays.len());
    let mut cross = Vec::with_capacity(delays.len());
    for &d in delays {
        auto_signal.push(kernels.g2_auto(Arm::Signal, t_ref, t_ref + d)?);
        auto_idler.push(kernels.g2_auto(Arm::Idler, t_ref, t_ref + d)?);
        cross.push(kernels.g2_cross(t_ref, t_ref + d)?);
    }
    Ok(G2Traces {
        auto_signal,
        auto_idler,
        cross,
    })
}

/// Exact CW transfer coefficients of one output arm at frequency offset
/// `omega`, resumming the parametric coupling to all orders. The four
/// coefficients multiply, in order: the arm's own input, its loss input,
/// the partner's conjugated input, and the partner's conjugated loss input.
#[derive(Debug, Clone, Copy)]
pub struct CwTransfer<T> {
    pub direct: Complex<T>,
    pub direct_noise: Complex<T>,
    pub parametric: Complex<T>,
    pub parametric_noise: Complex<T>,
}

pub fn cw_transfer<T: Scalar>(config: &ProcessConfig<T>, omega: T, arm: Arm) -> CwTransfer<T> {
    let (own, partner) = match arm {
        Arm::Signal => (&config.signal, &config.idler),
        Arm::Idler => (&config.idler, &config.signal),
    };
    let delta = config.effective_mismatch();
    let g_own = own.linewidth_total();
    let g_partner = partner.linewidth_total();
    // c^2 = (gamma_s gamma_i / 4) * drive ratio, for either process order.
    let c = (g_own * g_partner * T::of(0.25) * config.drive_ratio()).sqrt();
    let d_own = Complex::new(g_own * T::half(), -omega);
    let d_conj = Complex::new(g_partner * T::half(), delta - omega);
    let det = d_own * d_conj - Complex::new(c * c, T::zero());
    let inv = det.inv();
    CwTransfer {
        direct: d_conj * inv * own.coupling_rate() - Complex::new(T::one(), T::zero()),
        direct_noise: d_conj * inv * (own.coupling_rate() * own.intrinsic_loss_rate()).sqrt(),
        parametric: inv * (c * (own.coupling_rate() * partner.coupling_rate()).sqrt()),
        parametric_noise: inv
            * (c * (own.coupling_rate() * partner.intrinsic_loss_rate()).sqrt()),
    }
}

/// Canonical contraction `|U|^2 + |u|^2 - |V|^2 - |v|^2` of the exact CW
/// transfer; equals one identically for a correct solution.
pub fn canonical_contraction<T: Scalar>(config: &ProcessConfig<T>, omega: T, arm: Arm) -> T {
    let tr = cw_transfer(config, omega, arm);
    tr.direct.norm_sqr() + tr.direct_noise.norm_sqr()
        - tr.parametric.norm_sqr()
        - tr.parametric_noise.norm_sqr()
}
