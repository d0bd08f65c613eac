//! Scenario files: TOML with the unit of every dimensional key in its name.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::ZERO_CELSIUS;
use crate::correlation::{fit_diffusion_sigma, EmitterModel, InterferometerConfig, OutputPorts, Polarization};
use crate::error::{Error, Result};
use crate::montecarlo::{DetectorModel, Detectors, RunConfig};
use crate::vapor::{LineData, VaporCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Transmission,
    Hom,
    Tcspc,
    Montecarlo,
    Propagate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub command: Option<Command>,
    pub figure: Option<String>,
    pub output_dir: PathBuf,
    pub vapor: VaporSection,
    pub emitter: EmitterSection,
    pub interferometer: InterferometerSection,
    pub detectors: DetectorSection,
    pub transmission: TransmissionSection,
    pub hom: HomSection,
    pub tcspc: TcspcSection,
    pub run: RunSection,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            command: None,
            figure: None,
            output_dir: PathBuf::from("out"),
            vapor: VaporSection::default(),
            emitter: EmitterSection::default(),
            interferometer: InterferometerSection::default(),
            detectors: DetectorSection::default(),
            transmission: TransmissionSection::default(),
            hom: HomSection::default(),
            tcspc: TcspcSection::default(),
            run: RunSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaporSection {
    /// Put the cell in the photon path.
    pub enabled: bool,
    #[serde(rename = "temperature_C")]
    pub temperature_c: f64,
    pub length_cm: f64,
    /// Alternative line-data file; the bundled cesium D1 data otherwise.
    pub line_data: Option<PathBuf>,
}

impl Default for VaporSection {
    fn default() -> Self {
        Self {
            enabled: false,
            temperature_c: 105.0,
            length_cm: 10.0,
            line_data: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterSection {
    pub tau_ns: f64,
    /// Standard deviation of the carrier, σ/2π in GHz. Takes precedence over `visibility`.
    #[serde(rename = "diffusion_sigma_GHz")]
    pub diffusion_sigma_ghz: Option<f64>,
    /// HOM visibility from which σ is fitted.
    pub visibility: f64,
    /// Mean carrier relative to the vapor transmission window center.
    #[serde(rename = "carrier_offset_GHz")]
    pub carrier_offset_ghz: f64,
    pub repetition_period_ns: f64,
    pub g2_zero: f64,
}

impl Default for EmitterSection {
    fn default() -> Self {
        Self {
            tau_ns: 0.43,
            diffusion_sigma_ghz: None,
            visibility: 0.53,
            carrier_offset_ghz: 0.0,
            repetition_period_ns: 6.5,
            g2_zero: 0.014,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortsSetting {
    Distinct,
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationSetting {
    Parallel,
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerSection {
    pub ports: PortsSetting,
    /// Used by the Monte Carlo run; the HOM command always computes both.
    pub polarization: PolarizationSetting,
    pub bs1_transmission: f64,
    pub bs2_transmission: f64,
    pub short_path_probability: f64,
}

impl Default for InterferometerSection {
    fn default() -> Self {
        Self {
            ports: PortsSetting::Distinct,
            polarization: PolarizationSetting::Parallel,
            bs1_transmission: 0.5,
            bs2_transmission: 0.5,
            short_path_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub jitter_fwhm_ps: f64,
    pub efficiency: f64,
    pub dead_time_ns: f64,
    #[serde(rename = "dark_count_rate_Hz")]
    pub dark_count_rate_hz: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorModel::default();
        Self {
            jitter_fwhm_ps: d.jitter_fwhm * 1e12,
            efficiency: d.efficiency,
            dead_time_ns: d.dead_time * 1e9,
            dark_count_rate_hz: d.dark_count_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransmissionSection {
    /// Half width of the written spectrum around the window center.
    #[serde(rename = "span_GHz")]
    pub span_ghz: f64,
    #[serde(rename = "step_MHz")]
    pub step_mhz: f64,
}

impl Default for TransmissionSection {
    fn default() -> Self {
        Self {
            span_ghz: 8.0,
            step_mhz: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HomKind {
    /// Full peak pattern of the interferometer, parallel and orthogonal.
    Pattern,
    /// Ensemble-averaged central peak for several spectral-diffusion widths.
    Theory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomSection {
    pub kind: HomKind,
    pub bin_width_ps: f64,
    pub peaks: usize,
    /// Carrier pairs drawn for the vapor ensemble.
    pub samples: usize,
    pub seed: u64,
    /// Widths in units of the emitter's σ for the theory curves.
    pub sigma_multiples: Vec<f64>,
    pub delay_span_ns: f64,
}

impl Default for HomSection {
    fn default() -> Self {
        Self {
            kind: HomKind::Pattern,
            bin_width_ps: 10.0,
            peaks: 7,
            samples: 4000,
            seed: 1,
            sigma_multiples: vec![0.0, 0.5, 1.0, 3.0],
            delay_span_ns: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TcspcSection {
    pub t_min_ns: f64,
    pub t_max_ns: f64,
    pub nodes: usize,
}

impl Default for TcspcSection {
    fn default() -> Self {
        Self {
            t_min_ns: -2.0,
            t_max_ns: 13.0,
            nodes: 41,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Binary,
    Csv,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub pulses: u64,
    pub seed: u64,
    /// Detect output 3 behind the analyzer splitter (channels 5 and 6).
    pub analyzer: bool,
    pub bin_width_ps: f64,
    pub span_ns: f64,
    pub coincidence_window_ns: f64,
    pub tcspc_bin_ps: f64,
    pub events: EventFormat,
    /// Samples for the analytic comparison histogram with vapor.
    pub samples: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            pulses: 1_000_000,
            seed: 1,
            analyzer: false,
            bin_width_ps: 100.0,
            span_ns: 22.75,
            coincidence_window_ns: 2.0,
            tcspc_bin_ps: 100.0,
            events: EventFormat::Binary,
            samples: 4000,
        }
    }
}

/// A scenario with every quantity converted to SI units and validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cell: VaporCell,
    pub vapor_enabled: bool,
    pub emitter: EmitterModel,
    pub interferometer: InterferometerConfig,
    pub ports: OutputPorts,
    pub detector: DetectorModel,
}

impl Resolved {
    pub fn vapor(&self) -> Option<&VaporCell> {
        self.vapor_enabled.then_some(&self.cell)
    }

    pub fn run_config(&self, run: &RunSection) -> RunConfig {
        let mut c = RunConfig::new(self.emitter, self.interferometer);
        c.n_pulses = run.pulses;
        c.seed = run.seed;
        c.detectors = Detectors::uniform(self.detector);
        c.vapor = self.vapor().cloned();
        c.analyzer = run.analyzer;
        c
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Data {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// SHA-256 of the canonical TOML serialization, ignoring the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("scenario serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Converts units and validates every section.
    pub fn resolve(&self) -> Result<Resolved> {
        let v = &self.vapor;
        let data = match &v.line_data {
            Some(path) => LineData::load(path)?,
            None => LineData::cesium_d1(),
        };
        if !(v.length_cm >= 0.0) {
            return Err(Error::config(format!(
                "vapor length must be >= 0, got {} cm",
                v.length_cm
            )));
        }
        let cell = VaporCell::new(&data, v.temperature_c + ZERO_CELSIUS, v.length_cm * 1e-2)?;
        cell.number_density()?;

        let e = &self.emitter;
        let tau = positive("tau_ns", e.tau_ns)? * 1e-9;
        let sigma = match e.diffusion_sigma_ghz {
            Some(s) if s >= 0.0 => 2.0 * PI * s * 1e9,
            Some(s) => return Err(Error::config(format!("diffusion_sigma_GHz must be >= 0, got {s}"))),
            None => fit_diffusion_sigma(e.visibility, tau)?,
        };
        let center = if e.carrier_offset_ghz.is_finite() {
            cell.window_center()? + 2.0 * PI * e.carrier_offset_ghz * 1e9
        } else {
            return Err(Error::config("carrier_offset_GHz must be finite"));
        };
        let period = positive("repetition_period_ns", e.repetition_period_ns)? * 1e-9;
        let emitter = EmitterModel {
            tau,
            diffusion_sigma: sigma,
            carrier_center: center,
            repetition_period: period,
            g2_zero: e.g2_zero,
        };
        emitter.validate()?;

        let i = &self.interferometer;
        let interferometer = InterferometerConfig {
            path_delay: period,
            polarization: match i.polarization {
                PolarizationSetting::Parallel => Polarization::Parallel,
                PolarizationSetting::Orthogonal => Polarization::Orthogonal,
            },
            bs1_transmission: i.bs1_transmission,
            bs2_transmission: i.bs2_transmission,
            short_path_probability: i.short_path_probability,
            vapor_in_path: v.enabled,
        };
        interferometer.validate()?;
        let ports = match i.ports {
            PortsSetting::Distinct => OutputPorts::Distinct,
            PortsSetting::Same => OutputPorts::Same,
        };

        let d = &self.detectors;
        let detector = DetectorModel {
            jitter_fwhm: d.jitter_fwhm_ps * 1e-12,
            efficiency: d.efficiency,
            dead_time: d.dead_time_ns * 1e-9,
            dark_count_rate: d.dark_count_rate_hz,
        };
        detector.validate()?;

        positive("transmission.span_GHz", self.transmission.span_ghz)?;
        positive("transmission.step_MHz", self.transmission.step_mhz)?;
        positive("hom.bin_width_ps", self.hom.bin_width_ps)?;
        positive("hom.delay_span_ns", self.hom.delay_span_ns)?;
        if self.hom.peaks % 2 == 0 {
            return Err(Error::config("hom.peaks must be odd"));
        }
        if self.hom.sigma_multiples.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::config("hom.sigma_multiples must be >= 0"));
        }
        if !(self.tcspc.t_max_ns > self.tcspc.t_min_ns) {
            return Err(Error::config("tcspc.t_max_ns must exceed tcspc.t_min_ns"));
        }
        let r = &self.run;
        if r.pulses < 1 {
            return Err(Error::config("run.pulses must be >= 1"));
        }
        positive("run.bin_width_ps", r.bin_width_ps)?;
        positive("run.span_ns", r.span_ns)?;
        positive("run.tcspc_bin_ps", r.tcspc_bin_ps)?;
        let window = positive("run.coincidence_window_ns", r.coincidence_window_ns)?;
        if window >= e.repetition_period_ns {
            return Err(Error::config(
                "run.coincidence_window_ns must be shorter than the repetition period",
            ));
        }

        Ok(Resolved {
            cell,
            vapor_enabled: v.enabled,
            emitter,
            interferometer,
            ports,
            detector,
        })
    }
}

/// Bundled scenario of a figure of the experiment.
pub fn preset(figure: &str) -> Result<Scenario> {
    let text = match figure {
        "1c" => include_str!("presets/1c.toml"),
        "2a" => include_str!("presets/2a.toml"),
        "2b" => include_str!("presets/2b.toml"),
        "2c" => include_str!("presets/2c.toml"),
        "3a" => include_str!("presets/3a.toml"),
        "3b" => include_str!("presets/3b.toml"),
        "4a" => include_str!("presets/4a.toml"),
        "4b" => include_str!("presets/4b.toml"),
        other => return Err(Error::config(format!("unknown figure {other:?}"))),
    };
    Scenario::from_toml_str(text)
}

pub const FIGURES: [&str; 8] = ["1c", "2a", "2b", "2c", "3a", "3b", "4a", "4b"];
