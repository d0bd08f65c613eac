//! Command-line front end. Every command reads a scenario, validates it in
//! full and writes CSV files whose first line is
//! `# fockflow <version>, scenario hash <sha256>`.

pub mod scenario;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::correlation::{
    ensemble_g2_closed_form, fit_decay_constant, peak_pattern, peak_ratio, tcspc_one_photon, tcspc_two_photon,
    visibility, visibility_model, CorrelationHistogram, DelayAxis, OutputPorts, PatternOptions, Polarization,
    TcspcOptions, VaporPath,
};
use crate::error::{Error, Result};
use crate::montecarlo::{
    correlate_events, heralded_tcspc, predicted_coincidences, reduced_chi_square, simulate_stream, write_events,
    write_events_csv, RunConfig, TcspcBinning,
};
use crate::vapor::{group_delay, group_delay_spectrum, group_index, optical_response, transmission_spectrum};
use crate::wavepacket::{FrequencyGrid, PhotonWavepacket};
use scenario::{preset, Command, EventFormat, HomKind, Resolved, Scenario, FIGURES};

#[derive(Debug, Parser)]
#[command(
    name = "fockflow",
    version,
    about = "Fock-state interference and slow-light simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Cmd>,
    /// Scenario file (TOML).
    #[arg(long, global = true, conflicts_with = "figure")]
    pub scenario: Option<PathBuf>,
    /// Bundled scenario reproducing one figure.
    #[arg(long, global = true, value_parser = FIGURES)]
    pub figure: Option<String>,
    /// Output directory; overrides the scenario.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of excitation pulses for the Monte Carlo run.
    #[arg(long, global = true)]
    pub pulses: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Cmd {
    /// Vapor transmission and group delay spectrum.
    Transmission,
    /// Coincidence histograms and HOM visibility.
    Hom,
    /// One- and two-photon arrival-time traces.
    Tcspc,
    /// Event-level simulation and the histograms rebuilt from it.
    Montecarlo,
    /// Propagate a single photon through the vapor and dump it.
    Propagate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Transmission => Command::Transmission,
            Cmd::Hom => Command::Hom,
            Cmd::Tcspc => Command::Tcspc,
            Cmd::Montecarlo => Command::Montecarlo,
            Cmd::Propagate => Command::Propagate,
        }
    }
}

/// Files written and a human-readable summary.
#[derive(Debug, Default, Clone)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl Report {
    fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

/// Builds the scenario selected by the flags, with overrides applied.
/// `montecarlo` combines with any figure and simulates its setup event by event.
pub fn scenario_from(cli: &Cli) -> Result<Scenario> {
    let mut s = match (&cli.scenario, &cli.figure) {
        (Some(path), _) => Scenario::load(path)?,
        (None, Some(fig)) => preset(fig)?,
        (None, None) => Scenario::default(),
    };
    if let Some(cmd) = cli.command {
        let cmd = Command::from(cmd);
        match s.command {
            Some(existing) if existing != cmd && cmd != Command::Montecarlo && cli.figure.is_some() => {
                return Err(Error::config(format!(
                    "figure {} is a {existing:?} scenario, not {cmd:?}",
                    cli.figure.as_deref().unwrap_or_default()
                )));
            }
            _ => s.command = Some(cmd),
        }
    }
    if let Some(out) = &cli.out {
        s.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        s.run.seed = seed;
        s.hom.seed = seed;
    }
    if let Some(p) = cli.pulses {
        s.run.pulses = p;
    }
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<Report> {
    run_scenario(&scenario_from(cli)?)
}

pub fn run_scenario(s: &Scenario) -> Result<Report> {
    let command = s
        .command
        .ok_or_else(|| Error::config("no command given: pass a subcommand, --figure or a scenario with `command`"))?;
    let resolved = s.resolve()?;
    fs::create_dir_all(&s.output_dir)?;
    let out = Output {
        dir: s.output_dir.clone(),
        header: format!("# fockflow {}, scenario hash {}", env!("CARGO_PKG_VERSION"), s.hash()),
    };
    let mut report = Report::default();
    match command {
        Command::Transmission => cmd_transmission(s, &resolved, &out, &mut report)?,
        Command::Hom => cmd_hom(s, &resolved, &out, &mut report)?,
        Command::Tcspc => cmd_tcspc(s, &resolved, &out, &mut report)?,
        Command::Montecarlo => cmd_montecarlo(s, &resolved, &out, &mut report)?,
        Command::Propagate => cmd_propagate(s, &resolved, &out, &mut report)?,
    }
    Ok(report)
}

struct Output {
    dir: PathBuf,
    header: String,
}

impl Output {
    fn csv(&self, name: &str, columns: &str, body: &str, report: &mut Report) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, format!("{}\n{columns}\n{body}", self.header))?;
        report.files.push(path);
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

const GHZ: f64 = 2.0 * PI * 1e9;

fn cmd_transmission(s: &Scenario, r: &Resolved, out: &Output, report: &mut Report) -> Result<()> {
    let cell = &r.cell;
    let center = cell.window_center()?;
    let grid = FrequencyGrid::standard(center);
    let response = optical_response(cell, &grid)?;
    let trans = transmission_spectrum(&response, cell.length)?;
    let delay = group_delay_spectrum(&response, cell.length)?;
    let stride = ((2.0 * PI * s.transmission.step_mhz * 1e6 / grid.spacing()).round() as usize).max(1);
    let span = s.transmission.span_ghz * GHZ;
    let mut body = String::new();
    for j in (0..grid.count()).step_by(stride) {
        if grid.detuning(j).abs() <= span {
            let x = (grid.omega(j) - cell.reference_frequency) / GHZ;
            writeln!(body, "{x},{},{}", trans[j], delay[j] * 1e9).expect("string write");
        }
    }
    out.csv(
        "transmission.csv",
        "omega_detuning_GHz,transmission,group_delay_ns",
        &body,
        report,
    )?;
    report.note(format!(
        "window center {:+.5} GHz from the reference, transmission {:.4}",
        (center - cell.reference_frequency) / GHZ,
        cell.transmission_at(center)?
    ));
    if cell.length > 0.0 {
        report.note(format!(
            "group index {:.4}, group delay {:.4} ns",
            group_index(&response, center)?,
            group_delay(&response, cell.length, center)? * 1e9
        ));
    }
    Ok(())
}

fn polarization_label(p: Polarization) -> &'static str {
    match p {
        Polarization::Parallel => "parallel",
        Polarization::Orthogonal => "orthogonal",
    }
}

fn histogram_rows(body: &mut String, h: &CorrelationHistogram, label: &str) {
    for (c, d) in h.centers().iter().zip(&h.density) {
        writeln!(body, "{},{d},{label}", c * 1e9).expect("string write");
    }
}

fn cmd_hom(s: &Scenario, r: &Resolved, out: &Output, report: &mut Report) -> Result<()> {
    let e = &r.emitter;
    let label = crate::correlation::HistogramMode::from(r.ports).label();
    let mut body = String::new();
    match s.hom.kind {
        HomKind::Theory => {
            let axis = DelayAxis::new(s.hom.delay_span_ns * 1e-9, s.hom.bin_width_ps * 1e-12)?;
            let centers = axis.centers();
            for m in &s.hom.sigma_multiples {
                let sigma = m * e.diffusion_sigma;
                let tag = format!("{label}/sigma={:.4}GHz", sigma / GHZ);
                for d in &centers {
                    let g = ensemble_g2_closed_form(*d, e.tau, sigma, r.ports);
                    writeln!(body, "{},{g},{tag}", d * 1e9).expect("string write");
                }
                report.note(format!(
                    "sigma {:.4} GHz: visibility {:.4}",
                    sigma / GHZ,
                    visibility_model(sigma, e.tau)
                ));
            }
            for d in &centers {
                let g = (-d.abs() / e.tau).exp() / (4.0 * e.tau);
                writeln!(body, "{},{g},{label}/orthogonal", d * 1e9).expect("string write");
            }
        }
        HomKind::Pattern => {
            let vapor = match r.vapor() {
                Some(cell) => {
                    let grid = RunConfig::default_vapor_grid(e.carrier_center);
                    Some((optical_response(cell, &grid)?, cell.length))
                }
                None => None,
            };
            let options = PatternOptions {
                bin_width: s.hom.bin_width_ps * 1e-12,
                vapor: vapor.as_ref().map(|(response, length)| VaporPath {
                    response,
                    length: *length,
                }),
                jitter_fwhm: r.detector.jitter_fwhm,
                samples: s.hom.samples,
                seed: s.hom.seed,
                half_span: None,
            };
            let mut hists = Vec::new();
            for pol in [Polarization::Parallel, Polarization::Orthogonal] {
                let mut config = r.interferometer;
                config.polarization = pol;
                let h = peak_pattern(e, &config, r.ports, s.hom.peaks, &options)?;
                histogram_rows(&mut body, &h, &format!("{label}/{}", polarization_label(pol)));
                report.note(format!(
                    "{}: central/outermost peak area {:.4}",
                    polarization_label(pol),
                    peak_ratio(&h, e.repetition_period, 0)?
                ));
                hists.push(h);
            }
            report.note(format!(
                "visibility {:.4}",
                visibility(&hists[0], &hists[1], e.repetition_period)?
            ));
        }
    }
    out.csv("hom.csv", "delta_t_ns,density,mode", &body, report)
}

fn cmd_tcspc(s: &Scenario, r: &Resolved, out: &Output, report: &mut Report) -> Result<()> {
    let e = &r.emitter;
    let grid = FrequencyGrid::standard(e.carrier_center);
    let response = match r.vapor() {
        Some(cell) => Some((optical_response(cell, &grid)?, cell.length)),
        None => None,
    };
    let options = TcspcOptions {
        grid: Some(grid),
        vapor: response.as_ref().map(|(response, length)| VaporPath {
            response,
            length: *length,
        }),
        jitter_fwhm: r.detector.jitter_fwhm,
        nodes: s.tcspc.nodes,
        t_min: s.tcspc.t_min_ns * 1e-9,
        t_max: s.tcspc.t_max_ns * 1e-9,
    };
    let one = tcspc_one_photon(e, &options)?;
    let two = tcspc_two_photon(e, &options)?;
    let mut body = String::new();
    for (state, h) in [("1", &one), ("2", &two)] {
        for (c, d) in h.centers().iter().zip(&h.density) {
            writeln!(body, "{},{d},{state}", c * 1e9).expect("string write");
        }
        report.note(format!(
            "|{state}>: peak {:.3} ns, FWHM {} ns, area {:.4}",
            h.peak().0 * 1e9,
            h.fwhm().map_or("n/a".into(), |f| format!("{:.3}", f * 1e9)),
            h.total_area()
        ));
    }
    if r.vapor().is_none() {
        report.note(format!(
            "fitted decay constant {:.4} ns",
            fit_decay_constant(&one, r.detector.jitter_fwhm)? * 1e9
        ));
    }
    out.csv("tcspc.csv", "t_ns,intensity,state", &body, report)
}

fn cmd_montecarlo(s: &Scenario, r: &Resolved, out: &Output, report: &mut Report) -> Result<()> {
    let run = &s.run;
    let config = r.run_config(run);
    let events = simulate_stream(&config)?;
    report.note(format!("{} events from {} pulses", events.len(), run.pulses));
    match run.events {
        EventFormat::Binary => {
            let path = out.path("events.fevt");
            write_events(&path, &events)?;
            report.files.push(path);
        }
        EventFormat::Csv => {
            let path = out.path("events.csv");
            write_events_csv(&path, &events)?;
            report.files.push(path);
        }
        EventFormat::None => {}
    }
    let (a, b, ports) = if run.analyzer {
        (5, 6, OutputPorts::Same)
    } else {
        (3, 4, OutputPorts::Distinct)
    };
    let bin = run.bin_width_ps * 1e-12;
    let span = run.span_ns * 1e-9;
    let co = correlate_events(&events, a, b, bin, span)?;
    let label = co.histogram.mode.label();
    let mut body = String::new();
    histogram_rows(&mut body, &co.histogram, &format!("{label}/events"));
    let period = r.emitter.repetition_period;
    if let Ok(ratio) = peak_ratio(&co.histogram, period, 0) {
        report.note(format!("channels {a},{b}: central/outermost peak area {ratio:.4}"));
    }
    let comparable = config.vapor.is_none() || ports == OutputPorts::Same;
    if comparable && !co.empty_channel {
        let expected = predicted_coincidences(&config, ports, bin, span, run.samples)?;
        histogram_rows(&mut body, &expected, &format!("{label}/analytic"));
        match reduced_chi_square(&co, &expected, 10.0) {
            Ok(chi) => report.note(format!("reduced chi-square against the analytic pattern {chi:.3}")),
            Err(Error::Zero(_)) => report.note("too few coincidences for a chi-square comparison"),
            Err(e) => return Err(e),
        }
    }
    out.csv("coincidences.csv", "delta_t_ns,density,mode", &body, report)?;
    if run.analyzer {
        let binning = TcspcBinning {
            bin_width: run.tcspc_bin_ps * 1e-12,
            t_min: s.tcspc.t_min_ns * 1e-9,
            t_max: s.tcspc.t_max_ns * 1e-9,
        };
        let traces = heralded_tcspc(&events, (5, 6), run.coincidence_window_ns * 1e-9, period, &binning)?;
        let mut body = String::new();
        for (state, h) in [("1", &traces.unheralded), ("2", &traces.heralded)] {
            for (c, d) in h.centers().iter().zip(&h.density) {
                writeln!(body, "{},{d},{state}", c * 1e9).expect("string write");
            }
        }
        out.csv("tcspc_events.csv", "t_ns,intensity,state", &body, report)?;
        report.note(format!(
            "heralded {} of {} trace events",
            traces.heralded_events,
            traces.heralded_events + traces.unheralded_events
        ));
    }
    Ok(())
}

fn cmd_propagate(s: &Scenario, r: &Resolved, out: &Output, report: &mut Report) -> Result<()> {
    let e = &r.emitter;
    let cell = &r.cell;
    let grid = FrequencyGrid::standard(e.carrier_center);
    let response = optical_response(cell, &grid)?;
    let input = PhotonWavepacket::lorentzian(&grid, e.tau, e.carrier_center, 0.0)?;
    let output = input.propagate(&response, cell.length)?;
    let span = s.transmission.span_ghz * GHZ;
    let stride = ((2.0 * PI * s.transmission.step_mhz * 1e6 / grid.spacing()).round() as usize).max(1);
    let t_min = s.tcspc.t_min_ns * 1e-9;
    let t_max = s.tcspc.t_max_ns * 1e-9;
    for (tag, wp) in [("input", &input), ("output", &output)] {
        let mut body = String::new();
        for j in (0..grid.count()).step_by(stride) {
            if grid.detuning(j).abs() <= span {
                let a = wp.amplitude()[j];
                writeln!(body, "{},{},{}", grid.detuning(j) / GHZ, a.re, a.im).expect("string write");
            }
        }
        out.csv(
            &format!("wavepacket_{tag}_spectrum.csv"),
            "detuning_GHz,re_chi,im_chi",
            &body,
            report,
        )?;
        let trace = wp.to_time_domain();
        let mut body = String::new();
        for (k, v) in trace.values.iter().enumerate() {
            let t = trace.time(k);
            if (t_min..=t_max).contains(&t) {
                writeln!(body, "{},{}", t * 1e9, v.norm_sqr()).expect("string write");
            }
        }
        out.csv(
            &format!("wavepacket_{tag}_time.csv"),
            "time_ns,intensity",
            &body,
            report,
        )?;
    }
    report.note(format!(
        "survival {:.4}, centroid shift {:.4} ns, group delay {:.4} ns",
        output.survival_probability()?,
        (output.temporal_centroid()? - input.temporal_centroid()?) * 1e9,
        group_delay(&response, cell.length, e.carrier_center)? * 1e9
    ));
    Ok(())
}

/// Runs the binary: parses the arguments, prints the summary and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> std::process::ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                std::process::ExitCode::from(2)
            } else {
                std::process::ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(1)
        }
    }
}
