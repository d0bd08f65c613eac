//! Single-photon amplitude spectra, their temporal wavepackets, and
//! propagation through a dispersive, absorbing medium.
//!
//! Fourier convention, used everywhere in the crate:
//!
//! ```text
//! chi(t) = ∫ dω/√(2π) exp(-iωt) chi(ω)        chi(ω) = ∫ dt/√(2π) exp(+iωt) chi(t)
//! ```
//!
//! With this pairing a spectral phase `exp(+iφ(ω))` delays the packet by
//! `dφ/dω`, so a medium is applied as `chi(ω) -> chi(ω) exp(+iωn(ω)L/c)`
//! and a passive medium with `d(ωn)/dω > 0` produces a positive delay.
//!
//! Spectra are stored against the detuning from the grid center. The
//! constant phase `ω_c L / c` of the carrier is dropped; it is common to
//! every photon on a grid and cancels in all intensities and correlations.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::fourier;
use crate::vapor::OpticalResponse;

/// Uniform angular-frequency axis shared by all spectral arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    center: f64,
    spacing: f64,
    count: usize,
}

impl FrequencyGrid {
    pub const MIN_POINTS: usize = 1 << 10;

    /// `center` and `spacing` in rad/s; `count` must be a power of two, at least 1024.
    pub fn new(center: f64, spacing: f64, count: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::config(format!("grid spacing must be positive, got {spacing}")));
        }
        if !center.is_finite() {
            return Err(Error::config("grid center must be finite"));
        }
        if count < Self::MIN_POINTS || !count.is_power_of_two() {
            return Err(Error::config(format!(
                "grid point count must be a power of two >= {}, got {count}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { center, spacing, count })
    }

    /// 2^15 points spaced by 2π·2 MHz around `center`: a ±32.8 GHz span and a 500 ns window.
    pub fn standard(center: f64) -> Self {
        Self::new(center, 2.0 * PI * 2.0e6, 1 << 15).expect("valid default grid")
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Detuning of point `j` from the grid center, rad/s.
    pub fn detuning(&self, j: usize) -> f64 {
        (j as f64 - (self.count / 2) as f64) * self.spacing
    }

    /// Absolute angular frequency of point `j`.
    pub fn omega(&self, j: usize) -> f64 {
        self.center + self.detuning(j)
    }

    pub fn lowest(&self) -> f64 {
        self.omega(0)
    }

    pub fn highest(&self) -> f64 {
        self.omega(self.count - 1)
    }

    pub fn span(&self) -> f64 {
        self.count as f64 * self.spacing
    }

    /// Fractional index of an absolute frequency.
    pub fn position(&self, omega: f64) -> f64 {
        (omega - self.center) / self.spacing + (self.count / 2) as f64
    }

    /// Sample spacing of the conjugate time axis, `2π / (count Δω)`.
    pub fn time_step(&self) -> f64 {
        2.0 * PI / (self.count as f64 * self.spacing)
    }

    /// Length of the conjugate time window, `2π / Δω`.
    pub fn time_window(&self) -> f64 {
        2.0 * PI / self.spacing
    }

    /// First sample of the time axis. One sixteenth of the window precedes `t = 0`.
    pub fn time_start(&self) -> f64 {
        -self.time_window() / 16.0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.time_start() + k as f64 * self.time_step()
    }
}

/// Complex samples on a uniform time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub start: f64,
    pub step: f64,
    pub values: Vec<Complex64>,
}

impl TimeTrace {
    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `∫|chi(t)|² dt` as a Riemann sum.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.step
    }

    /// Intensity-weighted mean time.
    pub fn centroid(&self) -> Result<f64> {
        let mut weight = 0.0;
        let mut moment = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let p = v.norm_sqr();
            weight += p;
            moment += p * self.time(k);
        }
        if weight <= 0.0 {
            return Err(Error::Zero("wavepacket norm"));
        }
        Ok(moment / weight)
    }

    /// Inverse of [`PhotonWavepacket::to_time_domain`]: spectrum samples on `grid`.
    pub fn to_spectrum(&self, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        let n = grid.count();
        if self.values.len() != n
            || (self.step - grid.time_step()).abs() > 1e-12 * grid.time_step()
            || (self.start - grid.time_start()).abs() > 1e-9 * grid.time_step()
        {
            return Err(Error::GridMismatch);
        }
        // chi_j = dt/√(2π) Σ_k exp(+iΔ_j t_k) chi_k, with t_k = t_s + k dt and
        // Δ_j = (j - N/2)Δω; the (-1)^k factor absorbs the N/2 offset.
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| if k % 2 == 0 { *v } else { -*v })
            .collect();
        fourier::inverse(&mut buf);
        let scale = self.step / (2.0 * PI).sqrt();
        Ok(buf
            .into_iter()
            .enumerate()
            .map(|(j, v)| v * Complex64::from_polar(scale, grid.detuning(j) * self.start))
            .collect())
    }
}

/// Complex amplitude spectrum of one photon.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonWavepacket {
    grid: FrequencyGrid,
    amplitude: Vec<Complex64>,
    carrier: f64,
    emission_time: f64,
    tau: f64,
    reference_norm: f64,
}

impl PhotonWavepacket {
    /// Spontaneous-emission photon with decay constant `tau` (s), carrier
    /// `carrier` (absolute rad/s) and emission time `emission_time` (s):
    /// `chi(ω) = √(2τ/π) exp(iωt₀) / (1 - 2iτ(ω - ω₀))`, renormalized on the grid.
    pub fn lorentzian(grid: &FrequencyGrid, tau: f64, carrier: f64, emission_time: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::config(format!("decay constant must be positive, got {tau}")));
        }
        if (carrier - grid.center()).abs() > grid.span() / 4.0 {
            return Err(Error::config(
                "carrier lies outside the central half of the frequency grid",
            ));
        }
        if 1.0 / tau > grid.span() / 20.0 {
            return Err(Error::config(
                "emission linewidth is not small compared with the grid span",
            ));
        }
        if emission_time.abs() > grid.time_window() / 4.0 {
            return Err(Error::config("emission time lies outside the time window"));
        }
        let prefactor = (2.0 * tau / PI).sqrt();
        let offset = carrier - grid.center();
        let mut amplitude: Vec<Complex64> = (0..grid.count())
            .map(|j| {
                let d = grid.detuning(j);
                let phase = Complex64::from_polar(prefactor, d * emission_time);
                phase / Complex64::new(1.0, -2.0 * tau * (d - offset))
            })
            .collect();
        let norm = spectral_norm(&amplitude, grid.spacing());
        let scale = 1.0 / norm.sqrt();
        amplitude.iter_mut().for_each(|a| *a *= scale);
        Ok(Self {
            grid: *grid,
            amplitude,
            carrier,
            emission_time,
            tau,
            reference_norm: 1.0,
        })
    }

    /// Wraps arbitrary spectrum samples. The current norm becomes the reference
    /// for [`survival_probability`](Self::survival_probability).
    pub fn from_spectrum(
        grid: &FrequencyGrid,
        amplitude: Vec<Complex64>,
        carrier: f64,
        emission_time: f64,
        tau: f64,
    ) -> Result<Self> {
        if amplitude.len() != grid.count() {
            return Err(Error::GridMismatch);
        }
        let reference_norm = spectral_norm(&amplitude, grid.spacing());
        Ok(Self {
            grid: *grid,
            amplitude,
            carrier,
            emission_time,
            tau,
            reference_norm,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    pub fn emission_time(&self) -> f64 {
        self.emission_time
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `∫|chi(ω)|² dω`.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.amplitude, self.grid.spacing())
    }

    /// `chi(t) = ∫ dω/√(2π) exp(-iωt) chi(ω)` on the conjugate axis of the grid.
    pub fn to_time_domain(&self) -> TimeTrace {
        let grid = &self.grid;
        let t0 = grid.time_start();
        let mut buf: Vec<Complex64> = self
            .amplitude
            .iter()
            .enumerate()
            .map(|(j, a)| a * Complex64::from_polar(1.0, -grid.detuning(j) * t0))
            .collect();
        fourier::forward(&mut buf);
        let scale = grid.spacing() / (2.0 * PI).sqrt();
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= if k % 2 == 0 { scale } else { -scale };
        }
        TimeTrace {
            start: t0,
            step: grid.time_step(),
            values: buf,
        }
    }

    /// Applies `exp(+iωn(ω)L/c)` with the complex index of `response`.
    /// A zero length returns an exact copy.
    pub fn propagate(&self, response: &OpticalResponse, length: f64) -> Result<Self> {
        if response.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if length < 0.0 {
            return Err(Error::domain("propagation length", length, 0.0, f64::INFINITY));
        }
        if length == 0.0 {
            return Ok(self.clone());
        }
        let transfer = response.transfer(length);
        let amplitude = self.amplitude.iter().zip(&transfer).map(|(a, h)| a * h).collect();
        Ok(Self {
            amplitude,
            ..self.clone()
        })
    }

    /// Intensity-weighted mean arrival time.
    pub fn temporal_centroid(&self) -> Result<f64> {
        if self.norm() <= 0.0 {
            return Err(Error::Zero("wavepacket norm"));
        }
        self.to_time_domain().centroid()
    }

    /// Current norm relative to the norm at creation.
    pub fn survival_probability(&self) -> Result<f64> {
        if self.reference_norm <= 0.0 {
            return Err(Error::Zero("wavepacket norm"));
        }
        Ok(self.norm() / self.reference_norm)
    }
}

pub(crate) fn spectral_norm(amplitude: &[Complex64], spacing: f64) -> f64 {
    amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * spacing
}

/// Phase constant `(Δ + ω(n - 1)) / c` per metre for every grid point,
/// with the vacuum carrier term `ω_c / c` removed.
pub(crate) fn wavenumber_offsets(grid: &FrequencyGrid, n_minus_one: &[Complex64]) -> Vec<Complex64> {
    n_minus_one
        .iter()
        .enumerate()
        .map(|(j, dn)| (grid.detuning(j) + grid.omega(j) * dn) / SPEED_OF_LIGHT)
        .collect()
}
