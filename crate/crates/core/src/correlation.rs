//! Second-order correlations behind a beam splitter, spectral-diffusion
//! ensembles, HOM visibility, the multi-peak pattern of an unbalanced
//! Mach-Zehnder interferometer, and heralded TCSPC traces.
//!
//! Two photons with temporal amplitudes `a(t)` (input port 1) and `b(t)`
//! (input port 2) meet at a splitter with intensity transmission `T` and
//! reflection `R = 1 - T`. With
//!
//! ```text
//! I(δ) = ∫ |a(t+δ)|² |b(t)|² dt,     C(δ) = Re ∫ u(t+δ) u*(t) dt,   u = a b*
//! ```
//!
//! the coincidence densities (δ = later detection minus earlier reference) are
//!
//! ```text
//! distinct outputs: G34(δ) = T² I(δ) + R² I(-δ) - 2TR C(δ)
//! same output:      G33(δ) = TR (I(δ) + I(-δ) + 2 C(δ))
//! ```
//!
//! and orthogonal polarizations drop `C`. For a 50:50 splitter both reduce to
//! `¼∫|a(t+δ)b(t) ∓ a(t)b(t+δ)|² dt`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::constants::FWHM_PER_SIGMA;
use crate::error::{Error, Result};
use crate::faddeeva::{erfc, erfcx};
use crate::fourier;
use crate::vapor::OpticalResponse;
use crate::wavepacket::{FrequencyGrid, PhotonWavepacket, TimeTrace};

/// Quantum-dot emission parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterModel {
    /// Radiative decay constant, s.
    pub tau: f64,
    /// Standard deviation of the single-photon carrier, rad/s.
    pub diffusion_sigma: f64,
    /// Mean carrier, absolute rad/s.
    pub carrier_center: f64,
    /// s
    pub repetition_period: f64,
    /// Single-photon purity g²(0).
    pub g2_zero: f64,
}

impl EmitterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!(
                "decay constant must be positive, got {}",
                self.tau
            )));
        }
        if !(self.diffusion_sigma >= 0.0 && self.diffusion_sigma.is_finite()) {
            return Err(Error::config("spectral diffusion width must be >= 0"));
        }
        if !(self.repetition_period > 0.0 && self.repetition_period.is_finite()) {
            return Err(Error::config("repetition period must be positive"));
        }
        if !(0.0..1.0).contains(&self.g2_zero) {
            return Err(Error::config(format!("g2(0) must lie in [0, 1), got {}", self.g2_zero)));
        }
        if !self.carrier_center.is_finite() {
            return Err(Error::config("carrier must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Parallel,
    Orthogonal,
}

/// Unbalanced Mach-Zehnder interferometer followed by an analyzer splitter.
///
/// A photon takes the short arm with probability `short_path_probability`
/// and enters BS₁ through port 1; the long arm (delayed by `path_delay`)
/// enters through port 2. BS₁ maps port 1 to output 3 with probability
/// `bs1_transmission` and port 2 to output 4 with the same probability.
/// Output 3 is split by BS₂ onto detectors 5 (transmitted) and 6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerConfig {
    pub path_delay: f64,
    pub polarization: Polarization,
    pub bs1_transmission: f64,
    pub bs2_transmission: f64,
    pub short_path_probability: f64,
    pub vapor_in_path: bool,
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self {
            path_delay: 6.5e-9,
            polarization: Polarization::Parallel,
            bs1_transmission: 0.5,
            bs2_transmission: 0.5,
            short_path_probability: 0.5,
            vapor_in_path: false,
        }
    }
}

impl InterferometerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("BS1 transmission", self.bs1_transmission),
            ("BS2 transmission", self.bs2_transmission),
            ("MZI short-arm probability", self.short_path_probability),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.path_delay >= 0.0 && self.path_delay.is_finite()) {
            return Err(Error::config("path delay must be >= 0"));
        }
        Ok(())
    }
}

/// Which pair of detectors a coincidence histogram refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputPorts {
    /// One photon in each output of BS₁.
    Distinct,
    /// Both photons in the same output of BS₁.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramMode {
    DistinctPorts,
    SamePort,
    Tcspc,
}

impl HistogramMode {
    pub fn label(&self) -> &'static str {
        match self {
            Self::DistinctPorts => "distinct_ports",
            Self::SamePort => "same_port",
            Self::Tcspc => "tcspc",
        }
    }
}

impl From<OutputPorts> for HistogramMode {
    fn from(p: OutputPorts) -> Self {
        match p {
            OutputPorts::Distinct => Self::DistinctPorts,
            OutputPorts::Same => Self::SamePort,
        }
    }
}

/// Symmetric delay axis with a bin centered on zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayAxis {
    pub half_span: f64,
    pub bin_width: f64,
}

impl DelayAxis {
    pub fn new(half_span: f64, bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) || !(half_span >= bin_width) {
            return Err(Error::config(
                "delay axis needs bin_width > 0 and half_span >= bin_width",
            ));
        }
        Ok(Self { half_span, bin_width })
    }

    fn half_bins(&self) -> usize {
        (self.half_span / self.bin_width).round() as usize
    }

    pub fn len(&self) -> usize {
        2 * self.half_bins() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn centers(&self) -> Vec<f64> {
        let k = self.half_bins() as i64;
        (-k..=k).map(|i| i as f64 * self.bin_width).collect()
    }
}

/// Binned coincidence or arrival-time density.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub mode: HistogramMode,
}

impl CorrelationHistogram {
    pub fn new(bin_edges: Vec<f64>, density: Vec<f64>, mode: HistogramMode) -> Result<Self> {
        if bin_edges.len() != density.len() + 1 || density.is_empty() {
            return Err(Error::config("histogram needs one more edge than bins"));
        }
        let w = bin_edges[1] - bin_edges[0];
        if !(w > 0.0) || bin_edges.windows(2).any(|e| ((e[1] - e[0]) - w).abs() > 1e-9 * w) {
            return Err(Error::config("histogram bins must be uniform"));
        }
        if density.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::config("histogram density must be non-negative"));
        }
        Ok(Self {
            bin_edges,
            density,
            mode,
        })
    }

    /// Builds a histogram from bin centers; rounding-level negatives are clipped to zero.
    pub(crate) fn from_centers(centers: &[f64], width: f64, density: Vec<f64>, mode: HistogramMode) -> Self {
        let mut edges: Vec<f64> = centers.iter().map(|c| c - 0.5 * width).collect();
        edges.push(centers[centers.len() - 1] + 0.5 * width);
        let density = density.into_iter().map(|d| d.max(0.0)).collect();
        Self {
            bin_edges: edges,
            density,
            mode,
        }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn same_bins(&self, other: &Self) -> bool {
        self.bin_edges.len() == other.bin_edges.len()
            && self
                .bin_edges
                .iter()
                .zip(&other.bin_edges)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * self.bin_width())
    }

    pub fn total_area(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// Area of the bins whose centers fall inside `[lo, hi]`.
    pub fn area_within(&self, lo: f64, hi: f64) -> f64 {
        let slack = 1e-6 * self.bin_width();
        self.centers()
            .iter()
            .zip(&self.density)
            .filter(|(c, _)| **c >= lo - slack && **c <= hi + slack)
            .map(|(_, d)| d)
            .sum::<f64>()
            * self.bin_width()
    }

    /// Center and value of the highest bin.
    pub fn peak(&self) -> (f64, f64) {
        let (i, v) =
            self.density.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc },
            );
        (0.5 * (self.bin_edges[i] + self.bin_edges[i + 1]), v)
    }

    /// Full width at half maximum of the highest peak, interpolated between bins.
    pub fn fwhm(&self) -> Option<f64> {
        let centers = self.centers();
        let (_, top) = self.peak();
        if !(top > 0.0) {
            return None;
        }
        let imax = self.density.iter().position(|v| *v == top)?;
        let half = 0.5 * top;
        let mut left = None;
        for i in (0..imax).rev() {
            if self.density[i] < half {
                let (y0, y1) = (self.density[i], self.density[i + 1]);
                left = Some(centers[i] + (half - y0) / (y1 - y0) * (centers[i + 1] - centers[i]));
                break;
            }
        }
        let mut right = None;
        for i in imax + 1..self.len() {
            if self.density[i] < half {
                let (y0, y1) = (self.density[i - 1], self.density[i]);
                right = Some(centers[i - 1] + (y0 - half) / (y0 - y1) * (centers[i] - centers[i - 1]));
                break;
            }
        }
        Some(right? - left?)
    }

    /// Density-weighted mean of the bin centers.
    pub fn centroid(&self) -> Option<f64> {
        let total: f64 = self.density.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        Some(
            self.centers()
                .iter()
                .zip(&self.density)
                .map(|(c, d)| c * d)
                .sum::<f64>()
                / total,
        )
    }

    /// Merges groups of `factor` adjacent bins, averaging their densities.
    /// Trailing bins that do not fill a group are dropped.
    pub fn rebin(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor > self.len() {
            return Err(Error::config("rebin factor must lie in 1..=bin count"));
        }
        let groups = self.len() / factor;
        let density = (0..groups)
            .map(|g| self.density[g * factor..(g + 1) * factor].iter().sum::<f64>() / factor as f64)
            .collect();
        let edges = (0..=groups).map(|g| self.bin_edges[g * factor]).collect();
        Ok(Self {
            bin_edges: edges,
            density,
            mode: self.mode,
        })
    }

    /// Largest `|H(δ) - H(-δ)|` over mirrored bins.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        (0..n / 2)
            .map(|i| (self.density[i] - self.density[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

fn symmetrize(values: &mut [f64]) {
    let n = values.len();
    for i in 0..n / 2 {
        let m = 0.5 * (values[i] + values[n - 1 - i]);
        values[i] = m;
        values[n - 1 - i] = m;
    }
}

/// Correlation terms of one photon pair as functions of the delay.
#[derive(Debug, Clone)]
struct PairTerms {
    step: f64,
    /// `I(δ)` at lags `-(n-1)..=n-1` samples.
    intensity: Vec<f64>,
    /// `C(δ)` at the same lags.
    cross: Vec<f64>,
}

impl PairTerms {
    fn from_traces(a: &[Complex64], b: &[Complex64], step: f64) -> Self {
        let pa: Vec<Complex64> = a.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
        let pb: Vec<Complex64> = b.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
        let u: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x * y.conj()).collect();
        let intensity = fourier::cross_correlation(&pa, &pb)
            .iter()
            .map(|v| v.re * step)
            .collect();
        let cross = fourier::cross_correlation(&u, &u).iter().map(|v| v.re * step).collect();
        Self { step, intensity, cross }
    }

    fn interpolate(values: &[f64], step: f64, delta: f64) -> f64 {
        let zero = (values.len() / 2) as f64;
        let pos = delta / step + zero;
        if pos < 0.0 || pos > (values.len() - 1) as f64 {
            return 0.0;
        }
        let i = (pos.floor() as usize).min(values.len() - 2);
        let f = pos - i as f64;
        (1.0 - f) * values[i] + f * values[i + 1]
    }

    fn intensity_at(&self, delta: f64) -> f64 {
        Self::interpolate(&self.intensity, self.step, delta)
    }

    fn cross_at(&self, delta: f64) -> f64 {
        Self::interpolate(&self.cross, self.step, delta)
    }
}

/// Combines `I(δ)`, `I(-δ)` and `C(δ)` into a coincidence density.
fn combine(
    transmission: f64,
    ports: OutputPorts,
    polarization: Polarization,
    i_pos: f64,
    i_neg: f64,
    cross: f64,
) -> f64 {
    let t = transmission;
    let r = 1.0 - t;
    let c = match polarization {
        Polarization::Parallel => cross,
        Polarization::Orthogonal => 0.0,
    };
    match ports {
        OutputPorts::Distinct => t * t * i_pos + r * r * i_neg - 2.0 * t * r * c,
        OutputPorts::Same => t * r * (i_pos + i_neg + 2.0 * c),
    }
}

fn pair_histogram(
    chi1: &PhotonWavepacket,
    chi2: &PhotonWavepacket,
    axis: &DelayAxis,
    ports: OutputPorts,
    polarization: Polarization,
) -> Result<CorrelationHistogram> {
    if chi1.grid() != chi2.grid() {
        return Err(Error::GridMismatch);
    }
    let a = chi1.to_time_domain();
    let b = chi2.to_time_domain();
    let terms = PairTerms::from_traces(&a.values, &b.values, a.step);
    let centers = axis.centers();
    let density = centers
        .iter()
        .map(|&d| {
            combine(
                0.5,
                ports,
                polarization,
                terms.intensity_at(d),
                terms.intensity_at(-d),
                terms.cross_at(d),
            )
        })
        .collect();
    Ok(CorrelationHistogram::from_centers(
        &centers,
        axis.bin_width,
        density,
        ports.into(),
    ))
}

/// Coincidences between the two outputs of a 50:50 splitter, parallel polarization.
pub fn g2_distinct(chi1: &PhotonWavepacket, chi2: &PhotonWavepacket, axis: &DelayAxis) -> Result<CorrelationHistogram> {
    pair_histogram(chi1, chi2, axis, OutputPorts::Distinct, Polarization::Parallel)
}

/// Coincidences within one output of a 50:50 splitter, parallel polarization.
pub fn g2_same(chi1: &PhotonWavepacket, chi2: &PhotonWavepacket, axis: &DelayAxis) -> Result<CorrelationHistogram> {
    pair_histogram(chi1, chi2, axis, OutputPorts::Same, Polarization::Parallel)
}

/// Intensity-only coincidences of orthogonally polarized photons at a 50:50 splitter.
pub fn g2_orthogonal(
    chi1: &PhotonWavepacket,
    chi2: &PhotonWavepacket,
    axis: &DelayAxis,
) -> Result<CorrelationHistogram> {
    pair_histogram(chi1, chi2, axis, OutputPorts::Distinct, Polarization::Orthogonal)
}

/// Spectral-diffusion average at a 50:50 splitter for Lorentzian photons,
/// `(1/4τ) e^{-|δ|/τ} (1 ∓ e^{-σ²δ²})`.
pub fn ensemble_g2_closed_form(delta: f64, tau: f64, sigma: f64, ports: OutputPorts) -> f64 {
    closed_form_general(delta, tau, sigma, 0.5, ports, Polarization::Parallel)
}

fn closed_form_general(delta: f64, tau: f64, sigma: f64, t: f64, ports: OutputPorts, pol: Polarization) -> f64 {
    let envelope = (-delta.abs() / tau).exp() / (2.0 * tau);
    let overlap = (-(sigma * delta).powi(2)).exp();
    combine(t, ports, pol, envelope, envelope, envelope * overlap)
}

/// Visibility of the spectral-diffusion model, `√π x erfcx(x)` with `x = 1/(2στ)`.
pub fn visibility_model(sigma: f64, tau: f64) -> f64 {
    if sigma <= 0.0 {
        return 1.0;
    }
    let x = 1.0 / (2.0 * sigma * tau);
    PI.sqrt() * x * erfcx(x)
}

/// Diffusion width σ (rad/s) at which [`visibility_model`] equals `target`.
pub fn fit_diffusion_sigma(target: f64, tau: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::domain("visibility", target, 0.0, 1.0));
    }
    if !(tau > 0.0) {
        return Err(Error::config("decay constant must be positive"));
    }
    // V rises monotonically with x = 1/(2στ); bisect on ln x.
    let v = |lnx: f64| {
        let x = lnx.exp();
        PI.sqrt() * x * erfcx(x)
    };
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = (0.5 * (lo + hi)).exp();
    Ok(1.0 / (2.0 * x * tau))
}

/// A vapor cell placed in the path of both photons.
#[derive(Debug, Clone, Copy)]
pub struct VaporPath<'a> {
    pub response: &'a OpticalResponse,
    pub length: f64,
}

/// Ensemble histograms for both output-port pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct HomHistograms {
    pub distinct: CorrelationHistogram,
    pub same: CorrelationHistogram,
}

pub(crate) const SAMPLE_CHUNK: usize = 2048;

/// Counter-based generator for independent, partitionable streams.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Stratified standard-normal draw for sample `index` of `count`.
fn stratified_normal(normal: &Normal, index: usize, count: usize, rng: &mut ChaCha8Rng) -> f64 {
    let u = (index as f64 + rng.gen::<f64>()) / count as f64;
    normal.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16))
}

/// Monte Carlo spectral-diffusion ensemble.
///
/// Pair carriers are drawn as `ω_c + m ± d/2` with the pair detuning `d ~ N(0, 2σ²)`
/// and the common offset `m ~ N(0, σ²/2)`, both stratified over `n_samples`
/// strata. Without vapor each pair contributes its exact Lorentzian correlation;
/// with vapor both photons are propagated on the response grid and the
/// correlation terms are accumulated numerically.
pub fn ensemble_g2_numeric(
    emitter: &EmitterModel,
    config: &InterferometerConfig,
    vapor: Option<VaporPath<'_>>,
    axis: &DelayAxis,
    n_samples: usize,
    seed: u64,
) -> Result<HomHistograms> {
    emitter.validate()?;
    config.validate()?;
    if n_samples < 1000 {
        return Err(Error::config(format!(
            "ensemble needs at least 1000 samples, got {n_samples}"
        )));
    }
    let centers = axis.centers();
    let t = config.bs1_transmission;
    let pol = config.polarization;
    let (i_pos, i_neg, cross): (Vec<f64>, Vec<f64>, Vec<f64>) = match vapor {
        None => {
            let mean_cos = sampled_mean_cos(emitter.diffusion_sigma, &centers, n_samples, seed);
            let env: Vec<f64> = centers
                .iter()
                .map(|d| (-d.abs() / emitter.tau).exp() / (2.0 * emitter.tau))
                .collect();
            let cross = env.iter().zip(&mean_cos).map(|(e, c)| e * c).collect();
            (env.clone(), env, cross)
        }
        Some(path) => {
            let terms = sampled_propagated_terms(emitter, path, n_samples, seed)?;
            (
                centers.iter().map(|d| terms.intensity_at(*d)).collect(),
                centers.iter().map(|d| terms.intensity_at(-*d)).collect(),
                centers.iter().map(|d| terms.cross_at(*d)).collect(),
            )
        }
    };
    let build = |ports: OutputPorts| {
        let mut density: Vec<f64> = (0..centers.len())
            .map(|i| combine(t, ports, pol, i_pos[i], i_neg[i], cross[i]))
            .collect();
        symmetrize(&mut density);
        CorrelationHistogram::from_centers(&centers, axis.bin_width, density, ports.into())
    };
    Ok(HomHistograms {
        distinct: build(OutputPorts::Distinct),
        same: build(OutputPorts::Same),
    })
}

/// Stratified estimate of `E[cos(d δ)]` with `d ~ N(0, 2σ²)` at every delay.
fn sampled_mean_cos(sigma: f64, delays: &[f64], n_samples: usize, seed: u64) -> Vec<f64> {
    let normal = standard_normal();
    let scale = 2f64.sqrt() * sigma;
    let chunks = n_samples.div_ceil(SAMPLE_CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut acc = vec![0.0; delays.len()];
            for index in c * SAMPLE_CHUNK..((c + 1) * SAMPLE_CHUNK).min(n_samples) {
                let d = scale * stratified_normal(&normal, index, n_samples, &mut rng);
                for (a, delta) in acc.iter_mut().zip(delays) {
                    *a += (d * delta).cos();
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; delays.len()];
    for p in partial {
        total.iter_mut().zip(p).for_each(|(t, v)| *t += v);
    }
    total.iter_mut().for_each(|t| *t /= n_samples as f64);
    total
}

/// Random pairing of the stratified common-offset draws.
fn pairing_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, u64::MAX);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

fn sampled_propagated_terms(
    emitter: &EmitterModel,
    path: VaporPath<'_>,
    n_samples: usize,
    seed: u64,
) -> Result<PairTerms> {
    let grid = *path.response.grid();
    check_window(&grid, emitter.repetition_period)?;
    let n = grid.count();
    let crop = n / 2;
    let len = fourier::correlation_len(crop);
    let step = grid.time_step();
    let normal = standard_normal();
    let sigma = emitter.diffusion_sigma;
    let perm = pairing_permutation(n_samples, seed);
    let chunks = n_samples.div_ceil(SAMPLE_CHUNK);
    let fft = fourier::forward_plan(len);

    struct Acc {
        p1: Vec<f64>,
        p2: Vec<f64>,
        spectrum: Vec<f64>,
    }

    let partial: Vec<Result<Acc>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng_d = stream_rng(seed, 2 * c as u64);
            let mut rng_m = stream_rng(seed, 2 * c as u64 + 1);
            let mut acc = Acc {
                p1: vec![0.0; crop],
                p2: vec![0.0; crop],
                spectrum: vec![0.0; len],
            };
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for index in c * SAMPLE_CHUNK..((c + 1) * SAMPLE_CHUNK).min(n_samples) {
                let d = 2f64.sqrt() * sigma * stratified_normal(&normal, index, n_samples, &mut rng_d);
                let m = sigma / 2f64.sqrt() * stratified_normal(&normal, perm[index], n_samples, &mut rng_m);
                let trace = |offset: f64| -> Result<TimeTrace> {
                    let wp = PhotonWavepacket::lorentzian(&grid, emitter.tau, emitter.carrier_center + offset, 0.0)?;
                    Ok(wp.propagate(path.response, path.length)?.to_time_domain())
                };
                let a = trace(m + 0.5 * d)?;
                let b = trace(m - 0.5 * d)?;
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for k in 0..crop {
                    let (x, y) = (a.values[k], b.values[k]);
                    acc.p1[k] += x.norm_sqr();
                    acc.p2[k] += y.norm_sqr();
                    buf[k] = x * y.conj();
                }
                fft.process(&mut buf);
                acc.spectrum.iter_mut().zip(&buf).for_each(|(s, v)| *s += v.norm_sqr());
            }
            Ok(acc)
        })
        .collect();

    let mut p1 = vec![0.0; crop];
    let mut p2 = vec![0.0; crop];
    let mut spectrum = vec![0.0; len];
    for acc in partial {
        let acc = acc?;
        p1.iter_mut().zip(&acc.p1).for_each(|(t, v)| *t += v);
        p2.iter_mut().zip(&acc.p2).for_each(|(t, v)| *t += v);
        spectrum.iter_mut().zip(&acc.spectrum).for_each(|(t, v)| *t += v);
    }
    let inv = 1.0 / n_samples as f64;
    let p1: Vec<Complex64> = p1.iter().map(|v| Complex64::new(v * inv, 0.0)).collect();
    let p2: Vec<Complex64> = p2.iter().map(|v| Complex64::new(v * inv, 0.0)).collect();
    let intensity = fourier::cross_correlation(&p1, &p2)
        .iter()
        .map(|v| v.re * step)
        .collect();
    let mut circ: Vec<Complex64> = spectrum.iter().map(|s| Complex64::new(s * inv, 0.0)).collect();
    fourier::inverse(&mut circ);
    let cross = fourier::unwrap_lags(&circ, crop, len)
        .iter()
        .map(|v| v.re * step)
        .collect();
    Ok(PairTerms { step, intensity, cross })
}

fn check_window(grid: &FrequencyGrid, repetition_period: f64) -> Result<()> {
    if grid.time_window() <= 8.0 * repetition_period {
        return Err(Error::config(format!(
            "time window {:.3} ns must exceed eight repetition periods ({:.3} ns)",
            grid.time_window() * 1e9,
            8.0 * repetition_period * 1e9
        )));
    }
    Ok(())
}

/// `V = |1 - A∥/A⊥|`, with `A` the area within `±window/2` of zero delay.
pub fn visibility(parallel: &CorrelationHistogram, orthogonal: &CorrelationHistogram, window: f64) -> Result<f64> {
    if !parallel.same_bins(orthogonal) {
        return Err(Error::config("visibility needs histograms on identical bins"));
    }
    let a_par = parallel.area_within(-0.5 * window, 0.5 * window);
    let a_orth = orthogonal.area_within(-0.5 * window, 0.5 * window);
    if !(a_orth > 0.0) {
        return Err(Error::Zero("orthogonal central-peak area"));
    }
    Ok((1.0 - a_par / a_orth).abs())
}

/// Extra inputs of [`peak_pattern`].
#[derive(Debug, Clone, Copy)]
pub struct PatternOptions<'a> {
    pub bin_width: f64,
    pub vapor: Option<VaporPath<'a>>,
    /// Timing jitter of each detector (FWHM, s); the delay of a pair is blurred by √2 of it.
    pub jitter_fwhm: f64,
    pub samples: usize,
    pub seed: u64,
    /// Half span of the returned axis; defaults to half a period beyond the outermost peak.
    pub half_span: Option<f64>,
}

impl Default for PatternOptions<'_> {
    fn default() -> Self {
        Self {
            bin_width: 10e-12,
            vapor: None,
            jitter_fwhm: 0.0,
            samples: 4000,
            seed: 0,
            half_span: None,
        }
    }
}

/// Detection probability of a photon in output 3 or 4 for arrival delay `d` (0 short, 1 long arm).
fn port_probability(config: &InterferometerConfig, port3: bool, d: usize) -> f64 {
    let p = config.short_path_probability;
    let q = 1.0 - p;
    let t = config.bs1_transmission;
    let r = 1.0 - t;
    match (port3, d) {
        (true, 0) => p * t,
        (true, _) => q * r,
        (false, 0) => p * r,
        (false, _) => q * t,
    }
}

/// Per-pulse weight of the side peak at `m` repetition periods.
///
/// A photon from pulse `i` arrives in slot `i + d_i`, so a pair `(i, j = i + n)`
/// produces a delay of `n + d_j - d_i` periods. Every combination with `n ≠ 0`
/// counts, except those landing in the same slot: those pairs meet at BS₁ and
/// belong to the interference peak.
fn side_weight(config: &InterferometerConfig, ports: OutputPorts, m: i64) -> f64 {
    let (x3, y3, scale) = match ports {
        OutputPorts::Distinct => (true, false, 1.0),
        OutputPorts::Same => {
            let t2 = config.bs2_transmission;
            (true, true, t2 * (1.0 - t2))
        }
    };
    let mut w = 0.0;
    for di in 0..2usize {
        for dj in 0..2usize {
            let n = m - dj as i64 + di as i64;
            if n != 0 && m != 0 {
                w += port_probability(config, x3, di) * port_probability(config, y3, dj);
            }
        }
    }
    w * scale
}

/// Coincidence histogram of the unbalanced-MZI experiment over `n_peaks`
/// repetition periods, normalized per emitted pulse.
///
/// `Distinct` correlates outputs 3 and 4 of BS₁; `Same` correlates detectors
/// 5 and 6 behind BS₂. The central peak is the interference of photons from
/// consecutive pulses that meet at BS₁ (probability `p q` per slot); side
/// peaks are products of independent single-photon arrival densities.
pub fn peak_pattern(
    emitter: &EmitterModel,
    config: &InterferometerConfig,
    ports: OutputPorts,
    n_peaks: usize,
    options: &PatternOptions<'_>,
) -> Result<CorrelationHistogram> {
    emitter.validate()?;
    config.validate()?;
    if n_peaks % 2 == 0 {
        return Err(Error::config(format!("number of peaks must be odd, got {n_peaks}")));
    }
    let period = emitter.repetition_period;
    if (config.path_delay - period).abs() > 1e-9 * period {
        return Err(Error::config("path delay must equal the repetition period"));
    }
    let w = options.bin_width;
    let jitter_sigma = 2f64.sqrt() * options.jitter_fwhm / FWHM_PER_SIGMA;
    let pad = 6.0 * jitter_sigma;
    let half = options
        .half_span
        .unwrap_or((n_peaks / 2) as f64 * period + 0.5 * period);
    let axis = DelayAxis::new(half + pad, w)?;
    let centers = axis.centers();

    let p = config.short_path_probability;
    let pq = p * (1.0 - p);
    let t1 = config.bs1_transmission;
    let central_scale = match ports {
        OutputPorts::Distinct => pq,
        OutputPorts::Same => pq * config.bs2_transmission * (1.0 - config.bs2_transmission),
    };

    let terms = match options.vapor {
        Some(path) => Some(sampled_propagated_terms(emitter, path, options.samples, options.seed)?),
        None => None,
    };
    let tau = emitter.tau;
    let sigma = emitter.diffusion_sigma;
    let intensity = |d: f64| match &terms {
        Some(t) => 0.5 * (t.intensity_at(d) + t.intensity_at(-d)),
        None => (-d.abs() / tau).exp() / (2.0 * tau),
    };
    let central = |d: f64| match &terms {
        Some(t) => {
            0.5 * (combine(
                t1,
                ports,
                config.polarization,
                t.intensity_at(d),
                t.intensity_at(-d),
                t.cross_at(d),
            ) + combine(
                t1,
                ports,
                config.polarization,
                t.intensity_at(-d),
                t.intensity_at(d),
                t.cross_at(-d),
            ))
        }
        None => closed_form_general(d, tau, sigma, t1, ports, config.polarization),
    };
    let reach = (n_peaks / 2) as i64 + 2;
    let weights: Vec<(i64, f64)> = (-reach..=reach)
        .filter(|m| *m != 0)
        .map(|m| (m, side_weight(config, ports, m)))
        .collect();
    let mut density: Vec<f64> = centers
        .iter()
        .map(|&d| {
            let side: f64 = weights
                .iter()
                .map(|(m, wt)| wt * intensity(d - *m as f64 * period))
                .sum();
            central_scale * central(d) + side
        })
        .collect();
    if jitter_sigma > 0.0 {
        density = gaussian_blur(&density, w, jitter_sigma);
    }
    symmetrize(&mut density);
    let skip = (pad / w).round() as usize;
    let keep = centers.len() - 2 * skip;
    Ok(CorrelationHistogram::from_centers(
        &centers[skip..skip + keep],
        w,
        density[skip..skip + keep].to_vec(),
        ports.into(),
    ))
}

/// Area of the peak at `m` periods divided by the mean area of the two outermost peaks.
pub fn peak_ratio(hist: &CorrelationHistogram, period: f64, m: i64) -> Result<f64> {
    let outer = ((hist.bin_edges[hist.bin_edges.len() - 1] / period) - 0.5).round() as i64;
    if outer < 1 {
        return Err(Error::config("histogram spans no side peaks"));
    }
    let area = |k: i64| hist.area_within((k as f64 - 0.5) * period, (k as f64 + 0.5) * period);
    let reference = 0.5 * (area(outer) + area(-outer));
    if !(reference > 0.0) {
        return Err(Error::Zero("outermost peak area"));
    }
    Ok(area(m) / reference)
}

/// Convolution with a normalized Gaussian of standard deviation `sigma`, truncated at 6σ.
pub(crate) fn gaussian_blur(values: &[f64], step: f64, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let reach = (6.0 * sigma / step).ceil() as i64;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|k| (-0.5 * (k as f64 * step / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for (kk, kv) in kernel.iter().enumerate() {
                let j = i + kk as i64 - reach;
                if (0..n).contains(&j) {
                    s += kv * values[j as usize];
                }
            }
            s / norm
        })
        .collect()
}

/// Inputs of the TCSPC calculations.
#[derive(Debug, Clone, Copy)]
pub struct TcspcOptions<'a> {
    /// Grid for the vapor-free traces; ignored when a vapor path is given.
    pub grid: Option<FrequencyGrid>,
    pub vapor: Option<VaporPath<'a>>,
    /// Detector timing jitter (FWHM, s).
    pub jitter_fwhm: f64,
    /// Carrier quadrature nodes across ±6σ.
    pub nodes: usize,
    /// Start and end of the trace relative to the excitation, s.
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for TcspcOptions<'_> {
    fn default() -> Self {
        Self {
            grid: None,
            vapor: None,
            jitter_fwhm: 400e-12,
            nodes: 41,
            t_min: -2e-9,
            t_max: 13e-9,
        }
    }
}

struct CarrierEnsemble {
    step: f64,
    start: f64,
    weights: Vec<f64>,
    traces: Vec<Vec<Complex64>>,
}

fn carrier_ensemble(emitter: &EmitterModel, options: &TcspcOptions<'_>) -> Result<CarrierEnsemble> {
    emitter.validate()?;
    let grid = match (&options.vapor, options.grid) {
        (Some(v), _) => *v.response.grid(),
        (None, Some(g)) => g,
        (None, None) => FrequencyGrid::standard(emitter.carrier_center),
    };
    check_window(&grid, emitter.repetition_period)?;
    let (offsets, mut weights): (Vec<f64>, Vec<f64>) = if emitter.diffusion_sigma == 0.0 || options.nodes <= 1 {
        (vec![0.0], vec![1.0])
    } else {
        let k = options.nodes;
        (0..k)
            .map(|i| {
                let u = -6.0 + 12.0 * i as f64 / (k - 1) as f64;
                let trapezoid = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
                (emitter.diffusion_sigma * u, trapezoid * (-0.5 * u * u).exp())
            })
            .unzip()
    };
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let traces = offsets
        .par_iter()
        .map(|off| {
            let wp = PhotonWavepacket::lorentzian(&grid, emitter.tau, emitter.carrier_center + off, 0.0)?;
            let wp = match options.vapor {
                Some(v) => wp.propagate(v.response, v.length)?,
                None => wp,
            };
            Ok(wp.to_time_domain().values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CarrierEnsemble {
        step: grid.time_step(),
        start: grid.time_start(),
        weights,
        traces,
    })
}

fn finish_trace(ens: &CarrierEnsemble, raw: Vec<f64>, options: &TcspcOptions<'_>) -> Result<CorrelationHistogram> {
    let sigma = options.jitter_fwhm / FWHM_PER_SIGMA;
    let first = ((options.t_min - ens.start) / ens.step).ceil().max(0.0) as usize;
    let last = (((options.t_max - ens.start) / ens.step).floor() as usize).min(raw.len() - 1);
    if first >= last {
        return Err(Error::config("TCSPC time range is outside the grid window"));
    }
    let margin = (6.0 * sigma / ens.step).ceil() as usize;
    let lo = first.saturating_sub(margin);
    let hi = (last + margin).min(raw.len() - 1);
    let blurred = gaussian_blur(&raw[lo..=hi], ens.step, sigma);
    let values = blurred[first - lo..=last - lo].to_vec();
    let centers: Vec<f64> = (first..=last).map(|k| ens.start + k as f64 * ens.step).collect();
    Ok(CorrelationHistogram::from_centers(
        &centers,
        ens.step,
        values,
        HistogramMode::Tcspc,
    ))
}

/// Arrival-time density of a single photon after the optional vapor, averaged
/// over the carrier distribution and blurred by the detector jitter. Its area
/// is the survival probability.
pub fn tcspc_one_photon(emitter: &EmitterModel, options: &TcspcOptions<'_>) -> Result<CorrelationHistogram> {
    let ens = carrier_ensemble(emitter, options)?;
    let raw = one_photon_raw(&ens);
    finish_trace(&ens, raw, options)
}

fn one_photon_raw(ens: &CarrierEnsemble) -> Vec<f64> {
    let n = ens.traces[0].len();
    let mut raw = vec![0.0; n];
    for (w, tr) in ens.weights.iter().zip(&ens.traces) {
        raw.iter_mut().zip(tr).for_each(|(r, v)| *r += w * v.norm_sqr());
    }
    raw
}

/// Single-channel arrival density of the two-photon state postselected on a
/// coincidence behind BS₂, including the exchange term, normalized to the
/// area of the one-photon trace.
pub fn tcspc_two_photon(emitter: &EmitterModel, options: &TcspcOptions<'_>) -> Result<CorrelationHistogram> {
    let ens = carrier_ensemble(emitter, options)?;
    let n = ens.traces[0].len();
    let dt = ens.step;
    let norms: Vec<f64> = ens
        .traces
        .iter()
        .map(|t| t.iter().map(|v| v.norm_sqr()).sum::<f64>() * dt)
        .collect();
    let k = ens.traces.len();
    let rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let a = &ens.traces[i];
            for j in 0..k {
                let b = &ens.traces[j];
                let w = ens.weights[i] * ens.weights[j];
                // <b|a>
                let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| y.conj() * x).sum::<Complex64>() * dt;
                for t in 0..n {
                    let m = b[t].norm_sqr() * norms[i]
                        + a[t].norm_sqr() * norms[j]
                        + 2.0 * (a[t] * b[t].conj() * overlap).re;
                    row[t] += w * m;
                }
            }
            row
        })
        .collect();
    let mut raw = vec![0.0; n];
    for row in rows {
        raw.iter_mut().zip(row).for_each(|(r, v)| *r += v);
    }
    let one = one_photon_raw(&ens);
    let target: f64 = one.iter().sum();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Zero("two-photon trace"));
    }
    raw.iter_mut().for_each(|r| *r *= target / total);
    finish_trace(&ens, raw, options)
}

/// Exponential decay starting at `t = 0` convolved with a Gaussian of standard deviation `sigma`.
pub fn exgaussian(t: f64, tau: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if t >= 0.0 { (-t / tau).exp() / tau } else { 0.0 };
    }
    let a = (sigma / tau - t / sigma) / 2f64.sqrt();
    if a >= 0.0 {
        (-0.5 * (t / sigma).powi(2)).exp() * erfcx(a) / (2.0 * tau)
    } else {
        (0.5 * (sigma / tau).powi(2) - t / tau).exp() * erfc(a) / (2.0 * tau)
    }
}

/// Least-squares decay constant of a trace modelled as `A · exgaussian(t; τ, σ_jitter)`.
pub fn fit_decay_constant(trace: &CorrelationHistogram, jitter_fwhm: f64) -> Result<f64> {
    let sigma = jitter_fwhm / FWHM_PER_SIGMA;
    let centers = trace.centers();
    let residual = |tau: f64| {
        let model: Vec<f64> = centers.iter().map(|t| exgaussian(*t, tau, sigma)).collect();
        let mm: f64 = model.iter().map(|m| m * m).sum();
        let my: f64 = model.iter().zip(&trace.density).map(|(m, y)| m * y).sum();
        let amp = if mm > 0.0 { my / mm } else { 0.0 };
        model
            .iter()
            .zip(&trace.density)
            .map(|(m, y)| (amp * m - y).powi(2))
            .sum::<f64>()
    };
    let span = trace.bin_edges[trace.bin_edges.len() - 1] - trace.bin_edges[0];
    if !(span > 0.0) || trace.total_area() <= 0.0 {
        return Err(Error::Zero("trace area"));
    }
    let lo = (trace.bin_width() * 0.1).ln();
    let hi = span.ln();
    let best = crate::vapor::golden_section_min(|x| residual(x.exp()), lo, hi, 1e-9);
    Ok(best.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emitter(sigma: f64) -> EmitterModel {
        EmitterModel {
            tau: 0.43e-9,
            diffusion_sigma: sigma,
            carrier_center: 2.0 * PI * 335e12,
            repetition_period: 6.5e-9,
            g2_zero: 0.0,
        }
    }

    #[test]
    fn closed_form_limits() {
        let tau = 0.43e-9;
        for sigma in [0.0, 1e9, 5e9] {
            assert_eq!(ensemble_g2_closed_form(0.0, tau, sigma, OutputPorts::Distinct), 0.0);
            let same = ensemble_g2_closed_form(0.0, tau, sigma, OutputPorts::Same);
            assert!((same - 1.0 / (2.0 * tau)).abs() < 1e-9 / tau);
        }
        assert_eq!(ensemble_g2_closed_form(1e-9, tau, 0.0, OutputPorts::Distinct), 0.0);
    }

    #[test]
    fn visibility_model_is_monotone() {
        let tau = 0.43e-9;
        let mut last = 1.0;
        assert_eq!(visibility_model(0.0, tau), 1.0);
        for k in 1..60 {
            let v = visibility_model(1e7 * 1.3f64.powi(k), tau);
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn sigma_fit_round_trip() {
        let tau = 0.43e-9;
        let s = fit_diffusion_sigma(0.53, tau).unwrap();
        assert!((visibility_model(s, tau) - 0.53).abs() < 1e-12);
        assert!((s / (2.0 * PI * 1e9) - 0.3888).abs() < 2e-3);
        assert!(fit_diffusion_sigma(1.2, tau).is_err());
    }

    #[test]
    fn side_weights_at_balanced_splitters() {
        let c = InterferometerConfig::default();
        assert!((side_weight(&c, OutputPorts::Distinct, 1) - 3.0 / 16.0).abs() < 1e-15);
        assert!((side_weight(&c, OutputPorts::Distinct, -1) - 3.0 / 16.0).abs() < 1e-15);
        assert!((side_weight(&c, OutputPorts::Distinct, 2) - 0.25).abs() < 1e-15);
        assert!((side_weight(&c, OutputPorts::Same, 5) - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(side_weight(&c, OutputPorts::Distinct, 0), 0.0);
    }

    #[test]
    fn even_peak_count_is_rejected() {
        let e = emitter(0.0);
        let c = InterferometerConfig::default();
        assert!(peak_pattern(&e, &c, OutputPorts::Distinct, 4, &PatternOptions::default()).is_err());
    }

    #[test]
    fn exgaussian_is_normalized() {
        let tau = 0.43e-9;
        let sigma = 0.17e-9;
        let dt = 1e-12;
        let total: f64 = (-3000..20000)
            .map(|k| exgaussian(k as f64 * dt, tau, sigma))
            .sum::<f64>()
            * dt;
        assert!((total - 1.0).abs() < 1e-6);
        assert!(exgaussian(50e-9, tau, sigma) >= 0.0);
        assert!(exgaussian(-5e-9, tau, sigma) >= 0.0);
    }

    #[test]
    fn histogram_helpers() {
        let centers: Vec<f64> = (-5..=5).map(|k| k as f64).collect();
        let dens: Vec<f64> = centers.iter().map(|c: &f64| (-c.abs()).exp()).collect();
        let h = CorrelationHistogram::from_centers(&centers, 1.0, dens, HistogramMode::SamePort);
        assert_eq!(h.peak(), (0.0, 1.0));
        assert!(h.asymmetry() < 1e-15);
        assert!((h.fwhm().unwrap() - 2.0 * (1.0 - (0.5 - (-1f64).exp()) / (1.0 - (-1f64).exp()))).abs() < 1e-12);
        assert!(h.centroid().unwrap().abs() < 1e-15);
        assert!(CorrelationHistogram::new(vec![0.0, 1.0, 3.0], vec![1.0, 1.0], HistogramMode::Tcspc).is_err());
        assert!(CorrelationHistogram::new(vec![0.0, 1.0], vec![-1.0], HistogramMode::Tcspc).is_err());
    }

    #[test]
    fn too_few_samples() {
        let e = emitter(1e9);
        let c = InterferometerConfig::default();
        let axis = DelayAxis::new(2e-9, 0.02e-9).unwrap();
        assert!(ensemble_g2_numeric(&e, &c, None, &axis, 10, 0).is_err());
    }
}
