//! Standard MIDI file export of a key-event log.

use std::path::Path;

use crate::error::{Error, Result};
use crate::piano::{KeyEvent, KeyEventKind, LOWEST_MIDI_NOTE};

pub const DIVISION: u16 = 480;
/// Microseconds per quarter note at the implied 120 BPM.
const QUARTER_US: f64 = 500_000.0;
const NOTE_OFF_VELOCITY: u8 = 0x40;

/// Event time in ms to ticks at 120 BPM.
pub fn ms_to_ticks(t_ms: f64) -> u64 {
    (t_ms.max(0.0) * 1000.0 * f64::from(DIVISION) / QUARTER_US).round() as u64
}

fn push_vlq(out: &mut Vec<u8>, mut value: u64) {
    let mut stack = [0u8; 10];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { stack[i] | 0x80 } else { stack[i] });
    }
}

/// Format-0 file with one note-on/note-off per key event. Events sharing a
/// tick are ordered note-offs first, then by ascending note.
pub fn write_midi(events: &[KeyEvent]) -> Result<Vec<u8>> {
    if events.is_empty() {
        return Err(Error::input("cannot write a MIDI file for an empty event log"));
    }
    let mut timed: Vec<(u64, u8, u8, u8)> = Vec::with_capacity(events.len());
    for e in events {
        let note = usize::from(LOWEST_MIDI_NOTE) + e.key_index;
        let note = u8::try_from(note).ok().filter(|&n| n <= 127).ok_or_else(|| {
            Error::input(format!("key index {} is outside the MIDI note range", e.key_index))
        })?;
        let (order, velocity) = match e.kind {
            KeyEventKind::Off => (0, NOTE_OFF_VELOCITY),
            KeyEventKind::On => (1, e.velocity.clamp(1, 127)),
        };
        timed.push((ms_to_ticks(e.t), order, note, velocity));
    }
    timed.sort_by_key(|&(tick, order, note, _)| (tick, order, note));

    let mut track = Vec::with_capacity(timed.len() * 4 + 4);
    let mut last = 0;
    for (tick, order, note, velocity) in timed {
        push_vlq(&mut track, tick - last);
        last = tick;
        track.push(if order == 0 { 0x80 } else { 0x90 });
        track.push(note);
        track.push(velocity);
    }
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&DIVISION.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    let len = u32::try_from(track.len()).map_err(|_| Error::input("MIDI track too long"))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

pub fn save_midi(events: &[KeyEvent], path: &Path) -> Result<()> {
    let bytes = write_midi(events)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// A decoded channel-voice note message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteMessage {
    pub tick: u64,
    pub on: bool,
    pub note: u8,
    pub velocity: u8,
}

/// Minimal reader for the files [`write_midi`] produces: one track, note
/// messages with explicit status bytes, and meta events.
pub fn read_midi(bytes: &[u8]) -> Result<Vec<NoteMessage>> {
    let bad = |why: &str| Error::input(format!("malformed MIDI file: {why}"));
    if bytes.len() < 22 || &bytes[0..4] != b"MThd" || bytes[4..8] != 6u32.to_be_bytes() {
        return Err(bad("missing header chunk"));
    }
    if &bytes[14..18] != b"MTrk" {
        return Err(bad("missing track chunk"));
    }
    let len = u32::from_be_bytes([bytes[18], bytes[19], bytes[20], bytes[21]]) as usize;
    let track = bytes.get(22..22 + len).ok_or_else(|| bad("track length exceeds file"))?;

    let mut out = Vec::new();
    let mut pos = 0;
    let mut tick = 0u64;
    let mut ended = false;
    while pos < track.len() {
        let mut delta = 0u64;
        loop {
            let b = *track.get(pos).ok_or_else(|| bad("truncated delta time"))?;
            pos += 1;
            delta = (delta << 7) | u64::from(b & 0x7f);
            if b & 0x80 == 0 {
                break;
            }
        }
        tick += delta;
        let status = *track.get(pos).ok_or_else(|| bad("truncated event"))?;
        match status {
            0xff => {
                let kind = *track.get(pos + 1).ok_or_else(|| bad("truncated meta event"))?;
                let mlen = usize::from(*track.get(pos + 2).ok_or_else(|| bad("truncated meta event"))?);
                pos += 3 + mlen;
                if kind == 0x2f {
                    ended = true;
                    break;
                }
            }
            0x80..=0x9f => {
                let data = track.get(pos + 1..pos + 3).ok_or_else(|| bad("truncated note event"))?;
                out.push(NoteMessage { tick, on: status & 0xf0 == 0x90, note: data[0], velocity: data[1] });
                pos += 3;
            }
            _ => return Err(bad("unsupported status byte")),
        }
    }
    if !ended || pos != track.len() {
        return Err(bad("end-of-track missing or not last"));
    }
    Ok(out)
}
