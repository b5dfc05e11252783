//! Discrete Fourier transforms between the joint spectral and temporal
//! grids.
//!
//! Convention: the frequency-to-time map is
//! `psi(t, t') = 1/(2 pi) integral Phi(w, w') e^{-i(w t + w' t')} dw dw'`
//! and the inverse carries the remaining `1/(2 pi)`, split symmetrically as
//! `1/sqrt(2 pi)` per axis per direction. This normalization makes the grid
//! transform of a joint spectral amplitude built from a pump spectrum in the
//! `alpha(t) = integral alpha(w) e^{-i w t} dw` convention coincide with the
//! direct time-domain convolution integral, with no stray constants. On
//! uniform grids whose axes are conjugate (`dt * dw = 2 pi / n`) the
//! discrete pair below is exactly inverse up to floating-point rounding,
//! whatever the grid offsets, because the center phases are carried
//! explicitly.

use num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use crate::grid::{Axis, Grid2, GridError};
use crate::num::{cis, Scalar};

fn axes_conjugate<T: Scalar>(freq: &Axis<T>, time: &Axis<T>) -> bool {
    if freq.len() != time.len() {
        return false;
    }
    let product = freq.step() * time.step() * T::of(freq.len() as f64);
    (product - T::tau()).abs() <= T::tau() * T::of(1e-9)
}

/// 1-D transform along a slice: `out_k = scale * phase_k * sum_m in_m w_m`.
#[allow(clippy::too_many_arguments)]
fn dft_axis<T: Scalar + FftNum>(
    data: &mut [Complex<T>],
    stride: usize,
    count: usize,
    lanes: usize,
    lane_stride: usize,
    from: &Axis<T>,
    to: &Axis<T>,
    forward: bool,
    planner: &mut FftPlanner<T>,
) {
    let n = count;
    let fft = if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    };
    let sign = if forward { -T::one() } else { T::one() };
    // Pre-phases depend on the source offset, post-phases on the target grid.
    let pre: Vec<Complex<T>> = (0..n)
        .map(|m| cis(sign * from.value(m) * to.start() - sign * from.start() * to.start()))
        .collect();
    let post: Vec<Complex<T>> = (0..n)
        .map(|k| cis(sign * from.start() * to.value(k)))
        .collect();
    let scale = from.step() / T::tau().sqrt();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for lane in 0..lanes {
        let base = lane * lane_stride;
        for m in 0..n {
            buf[m] = data[base + m * stride] * pre[m];
        }
        fft.process(&mut buf);
        for k in 0..n {
            data[base + k * stride] = buf[k] * post[k] * scale;
        }
    }
}

/// Frequency-domain grid to time-domain grid (`e^{-i w t}` kernel).
pub fn grid_freq_to_time<T: Scalar + FftNum>(
    input: &Grid2<T, Complex<T>>,
    time0: &Axis<T>,
    time1: &Axis<T>,
) -> Result<Grid2<T, Complex<T>>, GridError> {
    transform_2d(input, time0, time1, true)
}

/// Time-domain grid back to the frequency domain (inverse convention with
/// the `1/(2 pi)^2` weight).
pub fn grid_time_to_freq<T: Scalar + FftNum>(
    input: &Grid2<T, Complex<T>>,
    freq0: &Axis<T>,
    freq1: &Axis<T>,
) -> Result<Grid2<T, Complex<T>>, GridError> {
    transform_2d(input, freq0, freq1, false)
}

fn transform_2d<T: Scalar + FftNum>(
    input: &Grid2<T, Complex<T>>,
    out0: &Axis<T>,
    out1: &Axis<T>,
    forward: bool,
) -> Result<Grid2<T, Complex<T>>, GridError> {
    if !axes_conjugate(&input.axis0, out0) || !axes_conjugate(&input.axis1, out1) {
        return Err(GridError::NonUniformGrid);
    }
    let n0 = input.axis0.len();
    let n1 = input.axis1.len();
    let mut data = input.values().to_vec();
    let mut planner = FftPlanner::new();
    // Axis 1 (contiguous rows), then axis 0 (strided columns).
    dft_axis(
        &mut data, 1, n1, n0, n1, &input.axis1, out1, forward, &mut planner,
    );
    dft_axis(
        &mut data, n1, n0, n1, 1, &input.axis0, out0, forward, &mut planner,
    );
    Grid2::new(
        out0.clone(),
        out1.clone(),
        data,
        input.value_label.clone(),
    )
}
