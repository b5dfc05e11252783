//! Scalar abstraction and the small numerical kernels (quadrature, root
//! bracketing) shared by every module.
//!
//! All engine math is generic over [`Scalar`]; `f64` is the default used by
//! the concrete aliases at the crate root. `f32` works too, at correspondingly
//! looser tolerances.

use std::fmt;
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar type the engine is generic over.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` literal (constants, tolerances, defaults).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert into the scalar type")
    }

    /// Two pi as a scalar.
    fn tau() -> Self {
        Self::PI() + Self::PI()
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn two() -> Self {
        Self::of(2.0)
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Sum<T>
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// `e^{i phase}` with the engine-wide `e^{-i omega t}` sign convention left to
/// the caller.
pub fn cis<T: Scalar>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Values that can be accumulated by the quadrature helpers.
pub trait Quadrable<T: Scalar>: Copy {
    fn q_zero() -> Self;
    fn q_add(self, other: Self) -> Self;
    fn q_scale(self, factor: T) -> Self;
}

impl<T: Scalar> Quadrable<T> for T {
    fn q_zero() -> Self {
        T::zero()
    }
    fn q_add(self, other: Self) -> Self {
        self + other
    }
    fn q_scale(self, factor: T) -> Self {
        self * factor
    }
}

impl<T: Scalar> Quadrable<T> for Complex<T> {
    fn q_zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    fn q_add(self, other: Self) -> Self {
        self + other
    }
    fn q_scale(self, factor: T) -> Self {
        self * factor
    }
}

/// Composite trapezoidal rule on uniformly sampled values.
pub fn trapezoid<T: Scalar, V: Quadrable<T>>(values: &[V], step: T) -> V {
    if values.len() < 2 {
        return V::q_zero();
    }
    let mut acc = values[0].q_add(values[values.len() - 1]).q_scale(T::half());
    for v in &values[1..values.len() - 1] {
        acc = acc.q_add(*v);
    }
    acc.q_scale(step)
}

/// Composite Simpson rule on uniformly sampled values.
///
/// Falls back to a 3/8 segment when the interval count is odd and to the
/// trapezoidal rule when fewer than three samples are available.
pub fn simpson<T: Scalar, V: Quadrable<T>>(values: &[V], step: T) -> V {
    let n = values.len();
    if n < 3 {
        return trapezoid(values, step);
    }
    let intervals = n - 1;
    let (simpson_part, tail) = if intervals.is_multiple_of(2) {
        (values, None)
    } else if intervals >= 3 {
        // 3/8 rule on the last three intervals, Simpson on the rest.
        (&values[..n - 3], Some(&values[n - 4..]))
    } else {
        return trapezoid(values, step);
    };

    let mut acc = V::q_zero();
    if simpson_part.len() >= 3 {
        let m = simpson_part.len();
        acc = simpson_part[0].q_add(simpson_part[m - 1]);
        let four = T::of(4.0);
        for (k, v) in simpson_part.iter().enumerate().take(m - 1).skip(1) {
            let w = if k % 2 == 1 { four } else { T::two() };
            acc = acc.q_add(v.q_scale(w));
        }
        acc = acc.q_scale(step / T::of(3.0));
    }
    if let Some(t) = tail {
        let c = step * T::of(3.0 / 8.0);
        let three = T::of(3.0);
        let seg = t[0]
            .q_add(t[1].q_scale(three))
            .q_add(t[2].q_scale(three))
            .q_add(t[3])
            .q_scale(c);
        acc = acc.q_add(seg);
    }
    acc
}

/// Simpson quadrature of a callable over `[a, b]` with `n` intervals
/// (rounded up to the next even count).
pub fn integrate<T: Scalar, V: Quadrable<T>>(f: impl Fn(T) -> V, a: T, b: T, n: usize) -> V {
    if b <= a {
        return V::q_zero();
    }
    let n = if n.is_multiple_of(2) { n.max(2) } else { n + 1 };
    let step = (b - a) / T::of(n as f64);
    let values: Vec<V> = (0..=n).map(|k| f(a + step * T::of(k as f64))).collect();
    simpson(&values, step)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// The bracket must straddle a root; the result is refined to roughly machine
/// precision of the scalar type.
pub fn bisect<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    let mut flo = f(lo);
    if flo == T::zero() {
        return lo;
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::half();
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm > T::zero()) == (flo > T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * T::half()
}

/// Full width at half maximum of a unimodal function centered near `center`.
///
/// Brackets the half crossing on each side by doubling `probe` outward, then
/// bisects. Returns `None` when no crossing is found within `64` doublings.
pub fn fwhm_around<T: Scalar>(f: impl Fn(T) -> T, center: T, probe: T) -> Option<T> {
    let peak = f(center);
    let half = peak * T::half();
    let side = |dir: T| -> Option<T> {
        let mut d = probe;
        let mut prev = center;
        for _ in 0..64 {
            let x = center + dir * d;
            if f(x) < half {
                let g = |y: T| f(y) - half;
                let root = if dir > T::zero() {
                    bisect(g, prev, x)
                } else {
                    bisect(g, x, prev)
                };
                return Some((root - center).abs());
            }
            prev = x;
            d *= T::two();
        }
        None
    };
    Some(side(T::one())? + side(-T::one())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubic_exactly() {
        // x^3 on [0, 2]: Simpson is exact for cubics.
        let f = |x: f64| x * x * x;
        let got: f64 = integrate(f, 0.0, 2.0, 8);
        assert!((got - 4.0).abs() < 1e-13, "got {got}");
    }

    #[test]
    fn simpson_handles_odd_interval_counts() {
        let vals: Vec<f64> = (0..=9).map(|k| (k as f64 * 0.25).sin()).collect();
        let got = simpson(&vals, 0.25);
        let exact = 1.0 - (2.25f64).cos();
        assert!((got - exact).abs() < 1e-4, "got {got}, exact {exact}");
    }

    #[test]
    fn fwhm_of_lorentzian_matches_width_parameter() {
        let gamma = 3.0_f64;
        let f = |x: f64| 1.0 / (gamma * gamma / 4.0 + x * x);
        let w = fwhm_around(f, 0.0, 0.1).unwrap();
        assert!((w - gamma).abs() < 1e-10);
    }

    #[test]
    fn generic_scalar_works_in_f32() {
        let got: f32 = integrate(|x: f32| x * x, 0.0, 1.0, 16);
        assert!((got - 1.0 / 3.0).abs() < 1e-5);
    }
}
