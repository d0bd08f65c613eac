//! Coincidence counting on timestamped clicks.

use log::warn;

use super::EventRecord;
use crate::correlation::{CorrelationHistogram, DelayAxis, HistogramMode};
use crate::error::{Error, Result};

const FS: f64 = 1e15;

/// Binned coincidences between two channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Coincidences {
    /// Density in coincidences per second of delay.
    pub histogram: CorrelationHistogram,
    pub counts: Vec<u64>,
    /// Set when either channel had no events.
    pub empty_channel: bool,
}

fn channel_times(events: &[EventRecord], channel: u16) -> Vec<(i64, usize)> {
    let mut t: Vec<(i64, usize)> = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.channel == channel)
        .map(|(i, e)| (e.t_fs, i))
        .collect();
    t.sort_unstable();
    t
}

/// Bin index of a delay, rounding half away from zero so that swapping the
/// channels mirrors the histogram exactly.
fn bin_of(delta: i64, width: i64) -> i64 {
    let k = (delta.abs() + width / 2) / width;
    if delta < 0 {
        -k
    } else {
        k
    }
}

/// Full cross-correlation of `channel_b` relative to `channel_a`
/// (delay = `t_b - t_a`) over `±span`. Input order is irrelevant.
pub fn correlate_events(
    events: &[EventRecord],
    channel_a: u16,
    channel_b: u16,
    bin_width: f64,
    span: f64,
) -> Result<Coincidences> {
    let axis = DelayAxis::new(span, bin_width)?;
    let width = (bin_width * FS).round() as i64;
    if width < 1 {
        return Err(Error::config("bin width is below one femtosecond"));
    }
    let k_max = (axis.len() / 2) as i64;
    let reach = (k_max * width) + width;
    let a = channel_times(events, channel_a);
    let b = channel_times(events, channel_b);
    let mut counts = vec![0u64; axis.len()];
    let empty_channel = a.is_empty() || b.is_empty();
    if empty_channel {
        warn!("channel {channel_a} or {channel_b} has no events; histogram is empty");
    }
    let mut lo = 0usize;
    for &(ta, ia) in &a {
        while lo < b.len() && b[lo].0 < ta - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && b[j].0 <= ta + reach {
            let (tb, ib) = b[j];
            j += 1;
            if ia == ib {
                continue;
            }
            let k = bin_of(tb - ta, width);
            if k.abs() <= k_max {
                counts[(k + k_max) as usize] += 1;
            }
        }
    }
    let w = width as f64 / FS;
    let centers: Vec<f64> = (-k_max..=k_max).map(|k| k as f64 * w).collect();
    let density = counts.iter().map(|c| *c as f64 / w).collect();
    let mode = if channel_a == 3 && channel_b == 4 || channel_a == 4 && channel_b == 3 {
        HistogramMode::DistinctPorts
    } else {
        HistogramMode::SamePort
    };
    Ok(Coincidences {
        histogram: CorrelationHistogram::from_centers(&centers, w, density, mode),
        counts,
        empty_channel,
    })
}

/// Arrival-time traces split by heralding.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedTcspc {
    /// Events of the trace channel that coincide with the herald channel.
    pub heralded: CorrelationHistogram,
    /// All remaining events of the trace channel.
    pub unheralded: CorrelationHistogram,
    pub heralded_events: u64,
    pub unheralded_events: u64,
}

/// Settings of [`heralded_tcspc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcspcBinning {
    pub bin_width: f64,
    pub t_min: f64,
    pub t_max: f64,
}

/// Time-since-pulse histograms of `herald.1`, split by whether a click on
/// `herald.0` lies within `±coincidence_window/2`. The excitation clock has
/// period `period`; each event's `pulse_index` selects its clock edge.
pub fn heralded_tcspc(
    events: &[EventRecord],
    herald: (u16, u16),
    coincidence_window: f64,
    period: f64,
    binning: &TcspcBinning,
) -> Result<HeraldedTcspc> {
    if !(coincidence_window > 0.0) || coincidence_window >= period {
        return Err(Error::config(format!(
            "coincidence window {:.3} ns must be positive and shorter than the repetition period {:.3} ns",
            coincidence_window * 1e9,
            period * 1e9
        )));
    }
    if !(binning.bin_width > 0.0) || !(binning.t_max > binning.t_min) {
        return Err(Error::config("TCSPC binning needs bin_width > 0 and t_max > t_min"));
    }
    let half = (0.5 * coincidence_window * FS).round() as i64;
    let herald_times = channel_times(events, herald.0);
    let trace = channel_times(events, herald.1);
    let bins = ((binning.t_max - binning.t_min) / binning.bin_width).round() as usize;
    let mut heralded = vec![0u64; bins];
    let mut unheralded = vec![0u64; bins];
    let (mut nh, mut nu) = (0u64, 0u64);
    let mut lo = 0usize;
    for &(t, i) in &trace {
        while lo < herald_times.len() && herald_times[lo].0 < t - half {
            lo += 1;
        }
        let mut hit = false;
        let mut j = lo;
        while j < herald_times.len() && herald_times[j].0 <= t + half {
            if herald_times[j].1 != i {
                hit = true;
                break;
            }
            j += 1;
        }
        let since = t as f64 / FS - events[i].pulse_index as f64 * period;
        let k = ((since - binning.t_min) / binning.bin_width).floor();
        let target = if hit { &mut heralded } else { &mut unheralded };
        if hit {
            nh += 1;
        } else {
            nu += 1;
        }
        if k >= 0.0 && (k as usize) < bins {
            target[k as usize] += 1;
        }
    }
    let centers: Vec<f64> = (0..bins)
        .map(|k| binning.t_min + (k as f64 + 0.5) * binning.bin_width)
        .collect();
    let to_hist = |c: &[u64]| {
        CorrelationHistogram::from_centers(
            &centers,
            binning.bin_width,
            c.iter().map(|v| *v as f64 / binning.bin_width).collect(),
            HistogramMode::Tcspc,
        )
    };
    Ok(HeraldedTcspc {
        heralded: to_hist(&heralded),
        unheralded: to_hist(&unheralded),
        heralded_events: nh,
        unheralded_events: nu,
    })
}
