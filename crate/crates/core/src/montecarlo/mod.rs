//! Event-level Monte Carlo of the full experiment and the tools that turn
//! detector clicks back into histograms.
//!
//! Every pulse `k` emits one photon, or two with probability `g²(0)/2`. Each
//! photon picks an interferometer arm and a carrier offset drawn from
//! `N(0, σ²)`. A photon from pulse `k` reaches BS₁ in slot `k` (short arm,
//! input port 1) or `k + 1` (long arm, input port 2). When a slot holds
//! exactly one photon per input port with parallel polarization, the pair
//! leaves BS₁ according to the exact two-photon output probabilities and its
//! arrival times are drawn from the two-time amplitude; all other photons are
//! routed independently. The vapor cell sits in output 3, ahead of the
//! analyzer splitter BS₂ (detectors 5 and 6). Without the analyzer, output 3
//! is detected directly on channel 3.
//!
//! Randomness is counter based: pulse `k` draws from stream `2k` and slot `s`
//! from stream `2s + 1` of a ChaCha8 generator seeded with the run seed, so
//! the stream is identical for any partitioning of the work.

pub mod correlator;
pub mod io;
mod packet;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;

use crate::constants::FWHM_PER_SIGMA;
use crate::correlation::{
    peak_pattern, stream_rng, CorrelationHistogram, EmitterModel, InterferometerConfig, OutputPorts, PatternOptions,
    Polarization, VaporPath,
};
use crate::error::{Error, Result};
use crate::vapor::{optical_response, OpticalResponse, VaporCell};
use crate::wavepacket::FrequencyGrid;

pub use correlator::{correlate_events, heralded_tcspc, Coincidences, HeraldedTcspc, TcspcBinning};
pub use io::{read_events, read_events_csv, write_events, write_events_csv};
use packet::{sample_pair, Packet, Table};

/// Single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Gaussian timing jitter, FWHM, s.
    pub jitter_fwhm: f64,
    pub efficiency: f64,
    /// s
    pub dead_time: f64,
    /// Dark counts per second.
    pub dark_count_rate: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            jitter_fwhm: 400e-12,
            efficiency: 0.2,
            dead_time: 0.0,
            dark_count_rate: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_fwhm >= 0.0) {
            return Err(Error::config("detector jitter must be >= 0"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config(format!(
                "detector efficiency must lie in (0, 1], got {}",
                self.efficiency
            )));
        }
        if !(self.dead_time >= 0.0) {
            return Err(Error::config("detector dead time must be >= 0"));
        }
        if !(self.dark_count_rate >= 0.0) {
            return Err(Error::config("dark-count rate must be >= 0"));
        }
        Ok(())
    }
}

/// Detectors on channels 3, 4, 5 and 6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detectors(pub [DetectorModel; 4]);

impl Detectors {
    pub fn uniform(d: DetectorModel) -> Self {
        Self([d; 4])
    }

    pub fn get(&self, channel: u16) -> &DetectorModel {
        &self.0[(channel - 3) as usize]
    }
}

impl Default for Detectors {
    fn default() -> Self {
        Self::uniform(DetectorModel::default())
    }
}

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventRecord {
    pub channel: u16,
    /// Excitation pulse whose clock edge the click is referenced to.
    pub pulse_index: u32,
    /// Femtoseconds.
    pub t_fs: i64,
}

impl EventRecord {
    /// Seconds.
    pub fn timestamp(&self) -> f64 {
        self.t_fs as f64 * 1e-15
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub emitter: EmitterModel,
    /// `None` sends every photon straight to detector 3.
    pub interferometer: Option<InterferometerConfig>,
    pub detectors: Detectors,
    /// Cell in output 3 of BS₁.
    pub vapor: Option<VaporCell>,
    /// Grid for the propagated photons; defaults to 4096 points at 2π·16 MHz around the carrier.
    pub vapor_grid: Option<FrequencyGrid>,
    /// Split output 3 onto detectors 5 and 6.
    pub analyzer: bool,
    /// Carrier lattice (rad/s) on which propagated photons are cached; the
    /// remaining offset is applied as an exact phase ramp. Zero propagates
    /// every photon individually.
    pub carrier_lattice: f64,
}

impl RunConfig {
    pub fn new(emitter: EmitterModel, interferometer: InterferometerConfig) -> Self {
        Self {
            n_pulses: 1_000_000,
            seed: 0,
            emitter,
            interferometer: Some(interferometer),
            detectors: Detectors::default(),
            vapor: None,
            vapor_grid: None,
            analyzer: false,
            carrier_lattice: 2.0 * PI * 4e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses < 1 || self.n_pulses >= u32::MAX as u64 {
            return Err(Error::config(format!(
                "pulse count must lie in 1..{}, got {}",
                u32::MAX,
                self.n_pulses
            )));
        }
        self.emitter.validate()?;
        if let Some(i) = &self.interferometer {
            i.validate()?;
            if (i.path_delay - self.emitter.repetition_period).abs() > 1e-9 * self.emitter.repetition_period {
                return Err(Error::config("path delay must equal the repetition period"));
            }
        }
        if !(self.carrier_lattice >= 0.0) {
            return Err(Error::config("carrier lattice must be >= 0"));
        }
        for d in &self.detectors.0 {
            d.validate()?;
        }
        Ok(())
    }

    /// Channels that can register clicks in this configuration.
    pub fn channels(&self) -> Vec<u16> {
        match (&self.interferometer, self.analyzer) {
            (None, _) => vec![3],
            (Some(_), false) => vec![3, 4],
            (Some(_), true) => vec![4, 5, 6],
        }
    }

    pub fn default_vapor_grid(carrier: f64) -> FrequencyGrid {
        FrequencyGrid::new(carrier, 2.0 * PI * 16e6, 4096).expect("valid grid")
    }
}

struct Medium {
    grid: FrequencyGrid,
    response: OpticalResponse,
    length: f64,
    lattice: f64,
    bank: Vec<OnceLock<Arc<Table>>>,
}

impl Medium {
    fn new(cell: &VaporCell, config: &RunConfig) -> Result<Self> {
        let grid = config
            .vapor_grid
            .unwrap_or_else(|| RunConfig::default_vapor_grid(config.emitter.carrier_center));
        let lattice = config.carrier_lattice;
        let nodes = if lattice > 0.0 {
            2 * (BANK_REACH * config.emitter.diffusion_sigma / lattice).ceil() as usize + 1
        } else {
            0
        };
        Ok(Self {
            response: optical_response(cell, &grid)?,
            grid,
            length: cell.length,
            lattice,
            bank: (0..nodes).map(|_| OnceLock::new()).collect(),
        })
    }

    fn packet(&self, emitter: &EmitterModel, detuning: f64) -> Result<Packet> {
        let exact = || {
            Table::propagated(
                &self.grid,
                &self.response,
                self.length,
                emitter.tau,
                emitter.carrier_center + detuning,
            )
        };
        if self.bank.is_empty() {
            return Ok(Packet::table(Arc::new(exact()?), 0.0));
        }
        let k = (detuning / self.lattice).round();
        let idx = k + (self.bank.len() / 2) as f64;
        if idx < 0.0 || idx >= self.bank.len() as f64 {
            return Ok(Packet::table(Arc::new(exact()?), 0.0));
        }
        let slot = &self.bank[idx as usize];
        let table = match slot.get() {
            Some(t) => t.clone(),
            None => {
                let t = Arc::new(Table::propagated(
                    &self.grid,
                    &self.response,
                    self.length,
                    emitter.tau,
                    emitter.carrier_center + k * self.lattice,
                )?);
                slot.get_or_init(|| t).clone()
            }
        };
        Ok(Packet::table(table, detuning - k * self.lattice))
    }
}

/// Cached propagated photons cover carriers within this many σ.
const BANK_REACH: f64 = 8.0;

struct Photon {
    /// Input port of BS₁: 1 (short arm) or 2 (long arm).
    port: u8,
    detuning: f64,
}

struct Simulator<'a> {
    config: &'a RunConfig,
    medium: Option<Medium>,
    p_short: f64,
    p_double: f64,
}

impl Simulator<'_> {
    fn pulse_photons(&self, k: u64) -> Vec<Photon> {
        let mut rng = stream_rng(self.config.seed, 2 * k);
        let n = if rng.gen::<f64>() < self.p_double { 2 } else { 1 };
        (0..n)
            .map(|_| {
                let long = rng.gen::<f64>() >= self.p_short;
                let z: f64 = rng.sample(StandardNormal);
                Photon {
                    port: if long { 2 } else { 1 },
                    detuning: self.config.emitter.diffusion_sigma * z,
                }
            })
            .collect()
    }

    fn exponential(&self, p: &Photon) -> Packet {
        Packet::exponential(self.config.emitter.tau, p.detuning)
    }

    fn propagated(&self, p: &Photon) -> Result<Option<Packet>> {
        match &self.medium {
            None => Ok(None),
            Some(m) => m.packet(&self.config.emitter, p.detuning).map(Some),
        }
    }

    /// Arrival time of an independent photon leaving through output 3, or `None` if absorbed.
    fn port3_single(&self, p: &Photon, rng: &mut ChaCha8Rng) -> Result<Option<f64>> {
        match self.propagated(p)? {
            None => Ok(Some(self.exponential(p).sample(rng))),
            Some(packet) => {
                if rng.gen::<f64>() < packet.norm() {
                    Ok(Some(packet.sample(rng)))
                } else {
                    Ok(None)
                }
            }
        }
    }

    /// Output port and relative arrival time of every photon leaving BS₁ in slot `s`.
    fn slot_outputs(&self, s: u64, rng: &mut ChaCha8Rng) -> Result<Vec<(u8, f64)>> {
        let n = self.config.n_pulses;
        let mut photons: Vec<Photon> = Vec::new();
        let Some(inter) = &self.config.interferometer else {
            let mut out = Vec::new();
            if s < n {
                for p in self.pulse_photons(s) {
                    if let Some(t) = self.port3_single(&p, rng)? {
                        out.push((3, t));
                    }
                }
            }
            return Ok(out);
        };
        if s < n {
            photons.extend(self.pulse_photons(s).into_iter().filter(|p| p.port == 1));
        }
        if s >= 1 && s - 1 < n {
            photons.extend(self.pulse_photons(s - 1).into_iter().filter(|p| p.port == 2));
        }
        let t1 = inter.bs1_transmission;
        let interfering =
            photons.len() == 2 && photons[0].port != photons[1].port && inter.polarization == Polarization::Parallel;
        if interfering {
            let (a, b) = if photons[0].port == 1 {
                (&photons[0], &photons[1])
            } else {
                (&photons[1], &photons[0])
            };
            return self.interfering_pair(a, b, t1, rng);
        }
        let mut out = Vec::with_capacity(photons.len());
        for p in &photons {
            let to3 = (rng.gen::<f64>() < t1) == (p.port == 1);
            if to3 {
                if let Some(t) = self.port3_single(p, rng)? {
                    out.push((3, t));
                }
            } else {
                out.push((4, self.exponential(p).sample(rng)));
            }
        }
        Ok(out)
    }

    /// Photon `a` enters port 1, `b` port 2 of a splitter with transmission `t`.
    ///
    /// `a† b† -> √(TR) c3†c3† - T c3†[a] c4†[b] + R c4†[a] c3†[b] - √(TR) c4†c4†`,
    /// so with overlap `O = <a|b>` the outputs are (3,4) with `T² + R² - 2TR|O|²`
    /// and (3,3), (4,4) with `TR(1 + |O|²)` each.
    fn interfering_pair(&self, a: &Photon, b: &Photon, t: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(u8, f64)>> {
        let r = 1.0 - t;
        let g = (t * r).sqrt();
        let ea = self.exponential(a);
        let eb = self.exponential(b);
        let o2 = ea.overlap(&eb).norm_sqr();
        let p34 = t * t + r * r - 2.0 * t * r * o2;
        let p33 = t * r * (1.0 + o2);
        let u = rng.gen::<f64>();
        let (la, lb) = match (self.propagated(a)?, self.propagated(b)?) {
            (Some(la), Some(lb)) => (la, lb),
            _ => {
                return Ok(if u < p34 {
                    let (t3, t4) = sample_pair(-t, &ea, &eb, r, &eb, &ea, rng);
                    vec![(3, t3), (4, t4)]
                } else if u < p34 + p33 {
                    let (x, y) = sample_pair(g, &ea, &eb, g, &eb, &ea, rng);
                    vec![(3, x), (3, y)]
                } else {
                    let (x, y) = sample_pair(g, &ea, &eb, g, &eb, &ea, rng);
                    vec![(4, x), (4, y)]
                });
            }
        };
        let ol = la.overlap(&lb);
        let ob = eb.overlap(&ea);
        let m34 = (t * t * la.norm() + r * r * lb.norm() - 2.0 * t * r * (ol * ob).re).clamp(0.0, p34);
        let m33 = (t * r * (la.norm() * lb.norm() + ol.norm_sqr())).clamp(0.0, p33);
        Ok(if u < m34 {
            let (t3, t4) = sample_pair(-t, &la, &eb, r, &lb, &ea, rng);
            vec![(3, t3), (4, t4)]
        } else if u < p34 {
            let (_, t4) = sample_pair(-t, &ea, &eb, r, &eb, &ea, rng);
            vec![(4, t4)]
        } else if u < p34 + m33 {
            let (x, y) = sample_pair(g, &la, &lb, g, &lb, &la, rng);
            vec![(3, x), (3, y)]
        } else if u < p34 + p33 {
            let survival = 0.5 * (la.norm() + lb.norm());
            if rng.gen::<f64>() < 2.0 * survival / (1.0 + survival) {
                let pick_a = rng.gen::<f64>() * (la.norm() + lb.norm()) < la.norm();
                let p = if pick_a { &la } else { &lb };
                vec![(3, p.sample(rng))]
            } else {
                Vec::new()
            }
        } else {
            let (x, y) = sample_pair(g, &ea, &eb, g, &eb, &ea, rng);
            vec![(4, x), (4, y)]
        })
    }

    fn process_slot(&self, s: u64, out: &mut Vec<EventRecord>) -> Result<()> {
        let mut rng = stream_rng(self.config.seed, 2 * s + 1);
        let outputs = self.slot_outputs(s, &mut rng)?;
        let period = self.config.emitter.repetition_period;
        let t2 = self.config.interferometer.map_or(1.0, |i| i.bs2_transmission);
        let analyzer = self.config.analyzer && self.config.interferometer.is_some();
        let base = s as f64 * period;
        let mut emit = |channel: u16, t_rel: f64, rng: &mut ChaCha8Rng| {
            let det = self.config.detectors.get(channel);
            if rng.gen::<f64>() >= det.efficiency {
                return;
            }
            let z: f64 = rng.sample(StandardNormal);
            let t = base + t_rel + z * det.jitter_fwhm / FWHM_PER_SIGMA;
            out.push(EventRecord {
                channel,
                pulse_index: s as u32,
                t_fs: (t * 1e15).round() as i64,
            });
        };
        for (port, t_rel) in outputs {
            let channel = match (port, analyzer) {
                (4, _) => 4,
                (_, false) => 3,
                (_, true) => {
                    if rng.gen::<f64>() < t2 {
                        5
                    } else {
                        6
                    }
                }
            };
            emit(channel, t_rel, &mut rng);
        }
        for channel in self.config.channels() {
            let rate = self.config.detectors.get(channel).dark_count_rate;
            if rate > 0.0 {
                let mean = rate * period;
                let k = rng.sample(Poisson::new(mean).map_err(|e| Error::config(e.to_string()))?) as u64;
                for _ in 0..k {
                    let t = base + rng.gen::<f64>() * period;
                    out.push(EventRecord {
                        channel,
                        pulse_index: s as u32,
                        t_fs: (t * 1e15).round() as i64,
                    });
                }
            }
        }
        Ok(())
    }
}

const SLOT_CHUNK: u64 = 8192;

/// Simulates `config.n_pulses` excitation pulses and returns the detector
/// clicks sorted by time, after per-channel dead-time filtering.
pub fn simulate_stream(config: &RunConfig) -> Result<Vec<EventRecord>> {
    config.validate()?;
    let medium = match &config.vapor {
        Some(cell) if cell.length > 0.0 => Some(Medium::new(cell, config)?),
        _ => None,
    };
    let sim = Simulator {
        config,
        medium,
        p_short: config.interferometer.map_or(1.0, |i| i.short_path_probability),
        p_double: 0.5 * config.emitter.g2_zero,
    };
    let slots = config.n_pulses + u64::from(config.interferometer.is_some());
    let chunks = slots.div_ceil(SLOT_CHUNK);
    let parts: Vec<Result<Vec<EventRecord>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for s in c * SLOT_CHUNK..((c + 1) * SLOT_CHUNK).min(slots) {
                sim.process_slot(s, &mut out)?;
            }
            Ok(out)
        })
        .collect();
    let mut events = Vec::new();
    for p in parts {
        events.extend(p?);
    }
    events.sort_by_key(|e| e.t_fs);
    Ok(apply_dead_time(events, &config.detectors))
}

/// Drops clicks that arrive within the dead time of the previous accepted click on the same channel.
pub fn apply_dead_time(events: Vec<EventRecord>, detectors: &Detectors) -> Vec<EventRecord> {
    let mut last: [Option<i64>; 4] = [None; 4];
    events
        .into_iter()
        .filter(|e| {
            if !(3..=6).contains(&e.channel) {
                return true;
            }
            let idx = (e.channel - 3) as usize;
            let dead = (detectors.0[idx].dead_time * 1e15).round() as i64;
            match last[idx] {
                Some(prev) if e.t_fs - prev < dead => false,
                _ => {
                    last[idx] = Some(e.t_fs);
                    true
                }
            }
        })
        .collect()
}

/// Expected coincidence density (per second of delay, for the whole run)
/// between the channels of `ports`, on the axis used by [`correlate_events`].
pub fn predicted_coincidences(
    config: &RunConfig,
    ports: OutputPorts,
    bin_width: f64,
    span: f64,
    samples: usize,
) -> Result<CorrelationHistogram> {
    config.validate()?;
    let inter = config
        .interferometer
        .ok_or_else(|| Error::config("coincidence prediction needs the interferometer"))?;
    let (ca, cb) = match ports {
        OutputPorts::Distinct => (if config.analyzer { 5 } else { 3 }, 4),
        OutputPorts::Same => (5, 6),
    };
    if ports == OutputPorts::Distinct && config.analyzer {
        return Err(Error::config(
            "distinct-port prediction assumes output 3 is detected directly",
        ));
    }
    if ports == OutputPorts::Same && !config.analyzer {
        return Err(Error::config("same-port prediction needs the analyzer splitter"));
    }
    let (da, db) = (config.detectors.get(ca), config.detectors.get(cb));
    let jitter = ((da.jitter_fwhm.powi(2) + db.jitter_fwhm.powi(2)) / 2.0).sqrt();
    let medium = match &config.vapor {
        Some(cell) if cell.length > 0.0 => {
            if ports == OutputPorts::Distinct {
                return Err(Error::config(
                    "the analytic pattern applies the vapor to both photons; use the analyzer ports",
                ));
            }
            let grid = config
                .vapor_grid
                .unwrap_or_else(|| RunConfig::default_vapor_grid(config.emitter.carrier_center));
            Some((optical_response(cell, &grid)?, cell.length))
        }
        _ => None,
    };
    let factor = 11usize;
    let fine = bin_width / factor as f64;
    let half_bins = (span / bin_width).round();
    let half_span = half_bins * bin_width + 0.5 * bin_width - 0.5 * fine;
    let n_peaks = 2 * ((span / config.emitter.repetition_period).ceil() as usize) + 1;
    let options = PatternOptions {
        bin_width: fine,
        vapor: medium.as_ref().map(|(response, length)| VaporPath {
            response,
            length: *length,
        }),
        jitter_fwhm: jitter,
        samples,
        seed: config.seed,
        half_span: Some(half_span),
    };
    let pattern = peak_pattern(&config.emitter, &inter, ports, n_peaks, &options)?;
    let mut hist = pattern.rebin(factor)?;
    let scale = config.n_pulses as f64 * da.efficiency * db.efficiency;
    hist.density.iter_mut().for_each(|d| *d *= scale);
    Ok(hist)
}

/// Pearson χ² per bin between observed counts and expected densities, over
/// bins expecting at least `min_expected` counts.
pub fn reduced_chi_square(observed: &Coincidences, expected: &CorrelationHistogram, min_expected: f64) -> Result<f64> {
    if !observed.histogram.same_bins(expected) {
        return Err(Error::config("observed and expected histograms use different bins"));
    }
    let w = expected.bin_width();
    let mut chi = 0.0;
    let mut bins = 0usize;
    for (o, e) in observed.counts.iter().zip(&expected.density) {
        let e = e * w;
        if e >= min_expected {
            chi += (*o as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if bins == 0 {
        return Err(Error::Zero("number of populated bins"));
    }
    Ok(chi / bins as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emitter() -> EmitterModel {
        EmitterModel {
            tau: 0.43e-9,
            diffusion_sigma: 2e9,
            carrier_center: 2.0 * PI * 335e12,
            repetition_period: 6.5e-9,
            g2_zero: 0.014,
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut c = RunConfig::new(emitter(), InterferometerConfig::default());
        c.n_pulses = 20_000;
        c.seed = 42;
        let a = simulate_stream(&c).unwrap();
        let b = simulate_stream(&c).unwrap();
        assert_eq!(a, b);
        c.seed = 43;
        assert_ne!(a, simulate_stream(&c).unwrap());
    }

    #[test]
    fn dead_time_filter() {
        let d = Detectors::uniform(DetectorModel {
            dead_time: 10e-15,
            ..Default::default()
        });
        let ev = |t| EventRecord {
            channel: 3,
            pulse_index: 0,
            t_fs: t,
        };
        let kept = apply_dead_time(vec![ev(0), ev(5), ev(10), ev(12), ev(25)], &d);
        assert_eq!(kept.iter().map(|e| e.t_fs).collect::<Vec<_>>(), vec![0, 10, 25]);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = RunConfig::new(emitter(), InterferometerConfig::default());
        c.n_pulses = 0;
        assert!(simulate_stream(&c).is_err());
        c.n_pulses = 10;
        c.detectors.0[0].efficiency = 0.0;
        assert!(simulate_stream(&c).is_err());
    }
}
