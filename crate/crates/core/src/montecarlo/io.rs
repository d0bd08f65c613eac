//! Event-stream files: a binary format and a CSV fallback.
//!
//! Binary layout: the 8-byte magic `FOCKEVT1`, then 16-byte little-endian
//! records `u16 channel, u16 reserved (0), u32 pulse_index, i64 t_fs`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EventRecord;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FOCKEVT1";
const RECORD: usize = 16;
pub const CSV_HEADER: &str = "channel,pulse_index,t_fs";

pub fn encode_events(events: &[EventRecord], out: &mut impl Write) -> Result<()> {
    out.write_all(MAGIC)?;
    let mut rec = [0u8; RECORD];
    for e in events {
        rec[0..2].copy_from_slice(&e.channel.to_le_bytes());
        rec[2..4].copy_from_slice(&0u16.to_le_bytes());
        rec[4..8].copy_from_slice(&e.pulse_index.to_le_bytes());
        rec[8..16].copy_from_slice(&e.t_fs.to_le_bytes());
        out.write_all(&rec)?;
    }
    Ok(())
}

pub fn decode_events(input: &mut impl Read) -> Result<Vec<EventRecord>> {
    let mut magic = [0u8; 8];
    let got = read_full(input, &mut magic)?;
    if got < MAGIC.len() || &magic != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "missing FOCKEVT1 magic".into(),
        });
    }
    let mut events = Vec::new();
    let mut offset = MAGIC.len() as u64;
    let mut rec = [0u8; RECORD];
    loop {
        let got = read_full(input, &mut rec)?;
        if got == 0 {
            break;
        }
        if got < RECORD {
            return Err(Error::Parse {
                offset,
                message: format!("truncated record ({got} of {RECORD} bytes)"),
            });
        }
        let reserved = u16::from_le_bytes([rec[2], rec[3]]);
        if reserved != 0 {
            return Err(Error::Parse {
                offset: offset + 2,
                message: format!("reserved field is {reserved}, expected 0"),
            });
        }
        events.push(EventRecord {
            channel: u16::from_le_bytes([rec[0], rec[1]]),
            pulse_index: u32::from_le_bytes(rec[4..8].try_into().expect("4 bytes")),
            t_fs: i64::from_le_bytes(rec[8..16].try_into().expect("8 bytes")),
        });
        offset += RECORD as u64;
    }
    Ok(events)
}

fn read_full(input: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    encode_events(events, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    let mut input = BufReader::new(File::open(path)?);
    decode_events(&mut input)
}

pub fn encode_events_csv(events: &[EventRecord], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for e in events {
        writeln!(out, "{},{},{}", e.channel, e.pulse_index, e.t_fs)?;
    }
    Ok(())
}

pub fn decode_events_csv(input: &mut impl BufRead) -> Result<Vec<EventRecord>> {
    let mut events = Vec::new();
    let mut offset = 0u64;
    let mut line = String::new();
    let mut first = true;
    loop {
        line.clear();
        let n = input.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        let text = line.trim_end_matches(['\n', '\r']);
        let start = offset;
        offset += n as u64;
        if first {
            first = false;
            if text.trim() == CSV_HEADER {
                continue;
            }
        }
        if text.trim().is_empty() || text.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { offset: start, message };
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        }
        events.push(EventRecord {
            channel: fields[0].parse().map_err(|e| bad(format!("channel: {e}")))?,
            pulse_index: fields[1].parse().map_err(|e| bad(format!("pulse_index: {e}")))?,
            t_fs: fields[2].parse().map_err(|e| bad(format!("t_fs: {e}")))?,
        });
    }
    Ok(events)
}

pub fn write_events_csv(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    encode_events_csv(events, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_events_csv(path: &Path) -> Result<Vec<EventRecord>> {
    let mut input = BufReader::new(File::open(path)?);
    decode_events_csv(&mut input)
}
