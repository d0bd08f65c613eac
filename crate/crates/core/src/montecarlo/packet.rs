//! Temporal amplitudes of sampled photons and joint arrival-time sampling.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::vapor::OpticalResponse;
use crate::wavepacket::{FrequencyGrid, PhotonWavepacket};

/// Tabulated amplitude on a uniform time axis, piecewise constant per sample.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    start: f64,
    step: f64,
    amp: Vec<Complex64>,
    cdf: Vec<f64>,
    norm: f64,
}

impl Table {
    /// Lorentzian photon with carrier `carrier` propagated through `length` of `response`.
    pub(crate) fn propagated(
        grid: &FrequencyGrid,
        response: &OpticalResponse,
        length: f64,
        tau: f64,
        carrier: f64,
    ) -> Result<Self> {
        let wp = PhotonWavepacket::lorentzian(grid, tau, carrier, 0.0)?.propagate(response, length)?;
        let trace = wp.to_time_domain();
        let peak = trace.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        let floor = 1e-16 * peak;
        let first = trace.values.iter().position(|v| v.norm_sqr() > floor).unwrap_or(0);
        let last = trace.values.iter().rposition(|v| v.norm_sqr() > floor).unwrap_or(0);
        let amp = trace.values[first..=last].to_vec();
        let mut cdf = Vec::with_capacity(amp.len());
        let mut acc = 0.0;
        for v in &amp {
            acc += v.norm_sqr() * trace.step;
            cdf.push(acc);
        }
        Ok(Self {
            start: trace.start + first as f64 * trace.step,
            step: trace.step,
            amp,
            cdf,
            norm: acc,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Packet {
    /// `τ^{-1/2} exp(-t/2τ) exp(-iΔt)` for `t >= 0`.
    Exponential { tau: f64, detuning: f64 },
    /// Tabulated amplitude times `exp(-i shift t)`.
    Table { table: Arc<Table>, shift: f64 },
}

impl Packet {
    pub(crate) fn exponential(tau: f64, detuning: f64) -> Self {
        Packet::Exponential { tau, detuning }
    }

    pub(crate) fn table(table: Arc<Table>, shift: f64) -> Self {
        Packet::Table { table, shift }
    }

    pub(crate) fn amplitude(&self, t: f64) -> Complex64 {
        match self {
            Packet::Exponential { tau, detuning } => {
                if t < 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar((-t / (2.0 * tau)).exp() / tau.sqrt(), -detuning * t)
                }
            }
            Packet::Table { table, shift } => {
                let k = ((t - table.start) / table.step).round();
                if k < 0.0 || k >= table.amp.len() as f64 {
                    Complex64::new(0.0, 0.0)
                } else {
                    table.amp[k as usize] * Complex64::from_polar(1.0, -shift * t)
                }
            }
        }
    }

    pub(crate) fn norm(&self) -> f64 {
        match self {
            Packet::Exponential { .. } => 1.0,
            Packet::Table { table, .. } => table.norm,
        }
    }

    /// Draws an arrival time from `|amplitude|² / norm`.
    pub(crate) fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Packet::Exponential { tau, .. } => -tau * (1.0 - rng.gen::<f64>()).ln(),
            Packet::Table { table, .. } => {
                let target = rng.gen::<f64>() * table.norm;
                let k = table.cdf.partition_point(|c| *c < target).min(table.amp.len() - 1);
                table.start + (k as f64 + rng.gen::<f64>() - 0.5) * table.step
            }
        }
    }

    /// `<self|other> = ∫ self*(t) other(t) dt`.
    pub(crate) fn overlap(&self, other: &Packet) -> Complex64 {
        match (self, other) {
            (Packet::Exponential { tau: ta, detuning: da }, Packet::Exponential { tau: tb, detuning: db }) => {
                let rate = Complex64::new(0.5 / ta + 0.5 / tb, db - da);
                1.0 / ((ta * tb).sqrt() * rate)
            }
            (Packet::Table { table, shift }, _) => {
                let phase = Complex64::from_polar(1.0, *shift * table.step);
                let mut rot = Complex64::from_polar(1.0, *shift * table.start);
                let mut s = Complex64::new(0.0, 0.0);
                for (k, a) in table.amp.iter().enumerate() {
                    s += (a * rot.conj()).conj() * other.amplitude(table.start + k as f64 * table.step);
                    rot *= phase;
                }
                s * table.step
            }
            (_, Packet::Table { .. }) => other.overlap(self).conj(),
        }
    }
}

/// Draws `(t, t')` from `|α p(t) q(t') + β r(t) s(t')|²` by rejection from the
/// mixture of the two product densities.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_pair(
    alpha: f64,
    p: &Packet,
    q: &Packet,
    beta: f64,
    r: &Packet,
    s: &Packet,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let w1 = alpha * alpha * p.norm() * q.norm();
    let w2 = beta * beta * r.norm() * s.norm();
    let first = w1 / (w1 + w2);
    let mut fallback = None;
    for _ in 0..100_000 {
        let (t, tp) = if rng.gen::<f64>() < first {
            (p.sample(rng), q.sample(rng))
        } else {
            (r.sample(rng), s.sample(rng))
        };
        let x = alpha * p.amplitude(t) * q.amplitude(tp);
        let y = beta * r.amplitude(t) * s.amplitude(tp);
        let bound = 2.0 * (x.norm_sqr() + y.norm_sqr());
        if bound <= 0.0 {
            continue;
        }
        fallback.get_or_insert((t, tp));
        if rng.gen::<f64>() * bound <= (x + y).norm_sqr() {
            return (t, tp);
        }
    }
    fallback.unwrap_or((0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn exponential_overlap() {
        let tau = 0.43e-9;
        let a = Packet::exponential(tau, 0.0);
        let b = Packet::exponential(tau, 3e9);
        assert!((a.overlap(&a) - 1.0).norm() < 1e-15);
        let expected = 1.0 / Complex64::new(1.0, 3e9 * tau);
        assert!((a.overlap(&b) - expected).norm() < 1e-12);
        assert!((b.overlap(&a) - expected.conj()).norm() < 1e-12);
    }

    #[test]
    fn exponential_sampling_mean() {
        let tau = 0.43e-9;
        let a = Packet::exponential(tau, 1e9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean = (0..n).map(|_| a.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - tau).abs() < 5.0 * tau / (n as f64).sqrt());
    }

    #[test]
    fn antisymmetric_pair_never_coincides() {
        // |a(t)b(t') - b(t)a(t')|² vanishes on the diagonal.
        let tau = 1e-9;
        let a = Packet::exponential(tau, 0.0);
        let b = Packet::exponential(tau, 2e9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut close = 0;
        for _ in 0..20_000 {
            let (t, tp) = sample_pair(1.0, &a, &b, -1.0, &b, &a, &mut rng);
            if (t - tp).abs() < 0.01 * tau {
                close += 1;
            }
        }
        // An uncorrelated pair would land this close about 1% of the time.
        assert!(close < 20, "{close}");
    }
}
