//! Linear optical response of a thermal alkali vapor: Doppler-broadened
//! (Voigt) hyperfine lines summed into a complex susceptibility.
//!
//! Each line contributes
//!
//! ```text
//! chi_i(ω) = N s_i π (c/ω_r)³ Γ_i · i√π w(z_i) / (k u),
//! z_i = (ω - ω_r - δ_i + iΓ_i/2) / (k u),   k = ω_r/c,   u = √(2 k_B T / m)
//! ```
//!
//! where `w` is the Faddeeva function. In the dilute limit `n = 1 + chi/2`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::constants::{ATMOSPHERE, ATOMIC_MASS_UNIT, BOLTZMANN, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::faddeeva::faddeeva;
use crate::wavepacket::{wavenumber_offsets, FrequencyGrid};

const CESIUM_D1: &str = include_str!("../data/cs133_d1.toml");

/// Valid temperature interval of the vapor-pressure correlation, kelvin.
pub const DENSITY_TEMPERATURE_RANGE: (f64, f64) = (273.0, 500.0);

/// One hyperfine component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicLine {
    /// Offset from the reference frequency, rad/s.
    pub detuning: f64,
    pub relative_strength: f64,
    /// Natural linewidth (FWHM), rad/s.
    pub natural_linewidth: f64,
}

impl AtomicLine {
    pub fn new(detuning: f64, relative_strength: f64, natural_linewidth: f64) -> Result<Self> {
        if !(relative_strength > 0.0) {
            return Err(Error::config(format!(
                "line strength must be positive, got {relative_strength}"
            )));
        }
        if !(natural_linewidth > 0.0) {
            return Err(Error::config(format!(
                "natural linewidth must be positive, got {natural_linewidth}"
            )));
        }
        Ok(Self {
            detuning,
            relative_strength,
            natural_linewidth,
        })
    }
}

/// Saturated vapor-pressure correlations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VaporPressure {
    /// Alcock, Itkin & Horrigan (1984) for cesium.
    Alcock1984,
}

impl VaporPressure {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "alcock1984" => Ok(Self::Alcock1984),
            other => Err(Error::config(format!("unknown vapor-pressure correlation '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Alcock1984 => "alcock1984",
        }
    }

    /// Saturated vapor pressure, Pa.
    pub fn pressure(&self, temperature: f64) -> f64 {
        match self {
            Self::Alcock1984 => {
                let log_atm = if temperature < 301.65 {
                    4.711 - 3999.0 / temperature
                } else {
                    8.232 - 4062.0 / temperature - 1.3359 * temperature.log10()
                };
                ATMOSPHERE * 10f64.powf(log_atm)
            }
        }
    }

    /// Number density of the saturated vapor, m⁻³.
    pub fn number_density(&self, temperature: f64) -> Result<f64> {
        let (lo, hi) = DENSITY_TEMPERATURE_RANGE;
        if !(lo..=hi).contains(&temperature) {
            return Err(Error::domain("temperature (K)", temperature, lo, hi));
        }
        Ok(self.pressure(temperature) / (BOLTZMANN * temperature))
    }
}

/// Cesium vapor number density at `temperature` (K).
pub fn number_density(temperature: f64) -> Result<f64> {
    VaporPressure::Alcock1984.number_density(temperature)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineFile {
    version: u32,
    isotope: String,
    mass_amu: f64,
    reference_wavelength_nm: f64,
    vapor_pressure: String,
    #[serde(default)]
    line: Vec<LineEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineEntry {
    #[serde(rename = "detuning_GHz")]
    detuning_ghz: f64,
    strength: f64,
    #[serde(rename = "linewidth_MHz")]
    linewidth_mhz: f64,
}

/// Contents of a line-data file.
#[derive(Debug, Clone, PartialEq)]
pub struct LineData {
    pub version: u32,
    pub isotope: String,
    /// kg
    pub atomic_mass: f64,
    /// rad/s
    pub reference_frequency: f64,
    pub vapor_pressure: VaporPressure,
    pub lines: Vec<AtomicLine>,
}

impl LineData {
    /// The bundled cesium D1 data.
    pub fn cesium_d1() -> Self {
        Self::from_toml_str(CESIUM_D1).expect("bundled line data is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: LineFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        if !(file.mass_amu > 0.0) || !(file.reference_wavelength_nm > 0.0) {
            return Err(Error::config("mass and reference wavelength must be positive"));
        }
        let lines = file
            .line
            .iter()
            .map(|l| {
                AtomicLine::new(
                    2.0 * PI * l.detuning_ghz * 1e9,
                    l.strength,
                    2.0 * PI * l.linewidth_mhz * 1e6,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            version: file.version,
            isotope: file.isotope,
            atomic_mass: file.mass_amu * ATOMIC_MASS_UNIT,
            reference_frequency: 2.0 * PI * SPEED_OF_LIGHT / (file.reference_wavelength_nm * 1e-9),
            vapor_pressure: VaporPressure::from_name(&file.vapor_pressure)?,
            lines,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Data {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Data {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}

/// A heated vapor cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VaporCell {
    /// K
    pub temperature: f64,
    /// m
    pub length: f64,
    pub lines: Vec<AtomicLine>,
    /// kg
    pub atomic_mass: f64,
    /// rad/s
    pub reference_frequency: f64,
    pub vapor_pressure: VaporPressure,
    density_override: Option<f64>,
}

impl VaporCell {
    pub fn new(data: &LineData, temperature: f64, length: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain("temperature (K)", temperature, 0.0, f64::INFINITY));
        }
        if !(length >= 0.0 && length.is_finite()) {
            return Err(Error::domain("cell length (m)", length, 0.0, f64::INFINITY));
        }
        Ok(Self {
            temperature,
            length,
            lines: data.lines.clone(),
            atomic_mass: data.atomic_mass,
            reference_frequency: data.reference_frequency,
            vapor_pressure: data.vapor_pressure,
            density_override: None,
        })
    }

    /// Cesium D1 cell from the bundled line data.
    pub fn cesium_d1(temperature: f64, length: f64) -> Result<Self> {
        Self::new(&LineData::cesium_d1(), temperature, length)
    }

    pub fn with_lines(mut self, lines: Vec<AtomicLine>) -> Self {
        self.lines = lines;
        self
    }

    /// Fixes the number density (m⁻³) instead of deriving it from the temperature.
    pub fn with_number_density(mut self, density: f64) -> Result<Self> {
        if !(density >= 0.0 && density.is_finite()) {
            return Err(Error::domain("number density", density, 0.0, f64::INFINITY));
        }
        self.density_override = Some(density);
        Ok(self)
    }

    pub fn number_density(&self) -> Result<f64> {
        match self.density_override {
            Some(n) => Ok(n),
            None => self.vapor_pressure.number_density(self.temperature),
        }
    }

    /// Most probable thermal speed times the wavenumber: the 1/e Doppler half width, rad/s.
    pub fn doppler_width(&self) -> f64 {
        let u = (2.0 * BOLTZMANN * self.temperature / self.atomic_mass).sqrt();
        self.reference_frequency / SPEED_OF_LIGHT * u
    }

    fn line_prefactors(&self) -> Result<Vec<f64>> {
        let density = self.number_density()?;
        let ku = self.doppler_width();
        let lambda_bar = SPEED_OF_LIGHT / self.reference_frequency;
        Ok(self
            .lines
            .iter()
            .map(|l| density * l.relative_strength * PI * lambda_bar.powi(3) * l.natural_linewidth * PI.sqrt() / ku)
            .collect())
    }

    fn chi_with(&self, prefactors: &[f64], omega: f64) -> Complex64 {
        let ku = self.doppler_width();
        let offset = omega - self.reference_frequency;
        self.lines
            .iter()
            .zip(prefactors)
            .map(|(l, a)| {
                let z = Complex64::new(offset - l.detuning, 0.5 * l.natural_linewidth) / ku;
                Complex64::i() * faddeeva(z) * *a
            })
            .sum()
    }

    /// Complex susceptibility at absolute angular frequency `omega`.
    pub fn susceptibility(&self, omega: f64) -> Result<Complex64> {
        let pre = self.line_prefactors()?;
        Ok(self.chi_with(&pre, omega))
    }

    /// Transmission of the full cell at `omega`.
    pub fn transmission_at(&self, omega: f64) -> Result<f64> {
        let chi = self.susceptibility(omega)?;
        Ok((-omega * chi.im * self.length / SPEED_OF_LIGHT).exp())
    }

    /// Transmission maximum between the two most widely separated neighbouring
    /// lines, as an absolute angular frequency.
    pub fn window_center(&self) -> Result<f64> {
        if self.lines.len() < 2 {
            return Err(Error::config("a transmission window needs at least two lines"));
        }
        let mut detunings: Vec<f64> = self.lines.iter().map(|l| l.detuning).collect();
        detunings.sort_by(f64::total_cmp);
        let (lo, hi) = detunings
            .windows(2)
            .map(|w| (w[0], w[1]))
            .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
            .expect("two lines");
        let pre = self.line_prefactors()?;
        let absorption = |d: f64| {
            let omega = self.reference_frequency + d;
            omega * self.chi_with(&pre, omega).im
        };
        let margin = 0.05 * (hi - lo);
        let best = golden_section_min(absorption, lo + margin, hi - margin, 1e-6 * (hi - lo));
        Ok(self.reference_frequency + best)
    }
}

/// Minimizes a unimodal function on `[a, b]`.
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Complex refractive index sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalResponse {
    grid: FrequencyGrid,
    /// `n - 1`, stored directly to keep the small dispersive part exact.
    n_minus_one: Vec<Complex64>,
}

impl OpticalResponse {
    pub fn vacuum(grid: &FrequencyGrid) -> Self {
        Self {
            grid: *grid,
            n_minus_one: vec![Complex64::new(0.0, 0.0); grid.count()],
        }
    }

    pub fn from_index_offsets(grid: &FrequencyGrid, n_minus_one: Vec<Complex64>) -> Result<Self> {
        if n_minus_one.len() != grid.count() {
            return Err(Error::GridMismatch);
        }
        if n_minus_one
            .iter()
            .any(|d| d.im < 0.0 || !d.re.is_finite() || !d.im.is_finite())
        {
            return Err(Error::config("refractive index must be finite with Im n >= 0"));
        }
        Ok(Self {
            grid: *grid,
            n_minus_one,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn index_minus_one(&self) -> &[Complex64] {
        &self.n_minus_one
    }

    pub fn refractive_index(&self, j: usize) -> Complex64 {
        1.0 + self.n_minus_one[j]
    }

    /// Power absorption coefficient `2 (ω/c) Im n`, 1/m.
    pub fn absorption_coefficient(&self) -> Vec<f64> {
        self.n_minus_one
            .iter()
            .enumerate()
            .map(|(j, d)| 2.0 * self.grid.omega(j) * d.im / SPEED_OF_LIGHT)
            .collect()
    }

    /// Spectral transfer function `exp(i (Δ + ω(n-1)) L / c)` of a slab of length `length`.
    pub fn transfer(&self, length: f64) -> Vec<Complex64> {
        wavenumber_offsets(&self.grid, &self.n_minus_one)
            .into_iter()
            .map(|k| (Complex64::i() * k * length).exp())
            .collect()
    }
}

/// Samples the cell's refractive index on `grid`.
pub fn optical_response(cell: &VaporCell, grid: &FrequencyGrid) -> Result<OpticalResponse> {
    let doppler_fwhm = 2.0 * 2f64.ln().sqrt() * cell.doppler_width();
    for line in &cell.lines {
        let omega = cell.reference_frequency + line.detuning;
        if omega - 5.0 * doppler_fwhm < grid.lowest() || omega + 5.0 * doppler_fwhm > grid.highest() {
            return Err(Error::config(format!(
                "frequency grid does not cover the line at {:.3} GHz with a margin of five Doppler widths",
                line.detuning / (2.0 * PI * 1e9)
            )));
        }
    }
    if cell.lines.is_empty() {
        return Ok(OpticalResponse::vacuum(grid));
    }
    let pre = cell.line_prefactors()?;
    let n_minus_one = (0..grid.count())
        .map(|j| 0.5 * cell.chi_with(&pre, grid.omega(j)))
        .collect();
    Ok(OpticalResponse {
        grid: *grid,
        n_minus_one,
    })
}

/// Intensity transmission `exp(-α L)` at every grid point.
pub fn transmission_spectrum(response: &OpticalResponse, length: f64) -> Result<Vec<f64>> {
    if !(length >= 0.0) {
        return Err(Error::domain("cell length (m)", length, 0.0, f64::INFINITY));
    }
    Ok(response
        .absorption_coefficient()
        .into_iter()
        .map(|alpha| (-alpha * length).exp())
        .collect())
}

/// `d(ω Re n)/dω` at grid point `j` by central difference.
fn group_index_at(response: &OpticalResponse, j: usize) -> f64 {
    let g = &response.grid;
    let phase = |i: usize| g.omega(i) * response.n_minus_one[i].re;
    1.0 + (phase(j + 1) - phase(j - 1)) / (2.0 * g.spacing())
}

/// Group index at an absolute frequency, linearly interpolated between grid points.
pub fn group_index(response: &OpticalResponse, omega: f64) -> Result<f64> {
    let g = &response.grid;
    let pos = g.position(omega);
    let n = g.count();
    if !(pos >= 1.0 && pos <= (n - 2) as f64) {
        return Err(Error::domain(
            "group-delay frequency",
            omega,
            g.omega(1),
            g.omega(n - 2),
        ));
    }
    let j = (pos.floor() as usize).min(n - 3);
    let frac = pos - j as f64;
    Ok((1.0 - frac) * group_index_at(response, j) + frac * group_index_at(response, j + 1))
}

/// Traversal time `(L/c) d(ω n)/dω` through a slab of length `length`.
pub fn group_delay(response: &OpticalResponse, length: f64, omega: f64) -> Result<f64> {
    if !(length >= 0.0) {
        return Err(Error::domain("cell length (m)", length, 0.0, f64::INFINITY));
    }
    Ok(length / SPEED_OF_LIGHT * group_index(response, omega)?)
}

/// Group delay at every interior grid point; the two edge points repeat their neighbours.
pub fn group_delay_spectrum(response: &OpticalResponse, length: f64) -> Result<Vec<f64>> {
    if !(length >= 0.0) {
        return Err(Error::domain("cell length (m)", length, 0.0, f64::INFINITY));
    }
    let n = response.grid.count();
    Ok((0..n)
        .map(|j| length / SPEED_OF_LIGHT * group_index_at(response, j.clamp(1, n - 2)))
        .collect())
}
