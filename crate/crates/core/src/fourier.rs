//! Thin wrappers around `rustfft` shared by the spectral modules.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Unnormalized forward transform, `X_k = sum_j x_j exp(-2 pi i jk/N)`.
pub(crate) fn forward(buf: &mut [Complex64]) {
    forward_plan(buf.len()).process(buf);
}

/// Unnormalized inverse transform, `x_j = sum_k X_k exp(+2 pi i jk/N)`.
pub(crate) fn inverse(buf: &mut [Complex64]) {
    inverse_plan(buf.len()).process(buf);
}

/// Padded length for linear (non-circular) correlation of two length-`n` inputs.
pub(crate) fn correlation_len(n: usize) -> usize {
    (2 * n).next_power_of_two()
}

/// Zero-pads `x` to `len` and transforms it forward.
pub(crate) fn padded_spectrum(x: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..x.len()].copy_from_slice(x);
    forward(&mut buf);
    buf
}

/// Linear cross-correlation `r(d) = sum_t x(t + d) conj(y(t))` for lags
/// `d = -(n-1) ..= n-1`, returned in that order (index `n - 1` is lag zero).
pub(crate) fn cross_correlation(x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let len = correlation_len(n);
    let fx = padded_spectrum(x, len);
    let fy = padded_spectrum(y, len);
    let mut prod: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a * b.conj()).collect();
    inverse(&mut prod);
    unwrap_lags(&prod, n, len)
}

/// Reorders a circular correlation of padded length `len` into lags `-(n-1)..=n-1`
/// and applies the `1/len` inverse-transform scaling.
pub(crate) fn unwrap_lags(circular: &[Complex64], n: usize, len: usize) -> Vec<Complex64> {
    let scale = 1.0 / len as f64;
    let mut out = Vec::with_capacity(2 * n - 1);
    for d in -(n as i64 - 1)..=(n as i64 - 1) {
        let idx = d.rem_euclid(len as i64) as usize;
        out.push(circular[idx] * scale);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_matches_direct_sum() {
        let x: Vec<Complex64> = (0..7).map(|k| Complex64::new(k as f64, 1.0 - k as f64 * 0.3)).collect();
        let y: Vec<Complex64> = (0..7).map(|k| Complex64::new((k as f64).sin(), 0.5)).collect();
        let r = cross_correlation(&x, &y);
        let n = x.len() as i64;
        for d in -(n - 1)..n {
            let mut direct = Complex64::new(0.0, 0.0);
            for t in 0..n {
                let s = t + d;
                if (0..n).contains(&s) {
                    direct += x[s as usize] * y[t as usize].conj();
                }
            }
            let got = r[(d + n - 1) as usize];
            assert!((got - direct).norm() < 1e-12, "lag {d}");
        }
    }
}
