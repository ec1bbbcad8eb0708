//! Piano keyboard geometry: key layout, key lookup by fingertip position, and
//! the key on/off events the simulator emits.
//!
//! Coordinates: `x` runs along the keyboard from the left edge of the lowest
//! key, `depth` runs from the front edge of the white keys toward the fall
//! board. White keys tile the `x` axis; each black key is centred on the
//! boundary between its two neighbouring white keys and is only addressable
//! when the fingertip is at least `black_zone_depth` into the keyboard.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MIDI note number of the lowest key (A0) of a standard keyboard.
pub const LOWEST_MIDI_NOTE: u8 = 21;

const NOTE_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub n_keys: usize,
    /// mm
    pub white_width: f64,
    /// mm
    pub black_width: f64,
    /// mm
    pub key_travel: f64,
    /// N
    pub press_force: f64,
    /// mm from the front edge beyond which black keys are addressable.
    pub black_zone_depth: f64,
    /// mm, left edge of the leftmost key.
    pub origin_x: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            n_keys: 88,
            white_width: 23.5,
            black_width: 13.7,
            key_travel: 10.0,
            press_force: 0.5,
            black_zone_depth: 50.0,
            origin_x: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyColor {
    White,
    Black,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Key {
    pub index: usize,
    pub color: KeyColor,
    /// mm
    pub center_x: f64,
    pub midi_note: u8,
}

impl Key {
    pub fn note_name(&self) -> String {
        note_name(self.midi_note)
    }
}

/// Scientific pitch name for a MIDI note, e.g. 60 -> "C4".
pub fn note_name(midi_note: u8) -> String {
    let octave = i32::from(midi_note) / 12 - 1;
    format!("{}{}", NOTE_NAMES[usize::from(midi_note % 12)], octave)
}

fn is_black_pitch(midi_note: u8) -> bool {
    matches!(midi_note % 12, 1 | 3 | 6 | 8 | 10)
}

#[derive(Debug, Clone)]
pub struct KeyboardLayout {
    config: LayoutConfig,
    keys: Vec<Key>,
    white_keys: Vec<usize>,
    /// `black_at_boundary[b]` is the black key centred on the boundary between
    /// white ordinals `b - 1` and `b`, if one exists.
    black_at_boundary: Vec<Option<usize>>,
}

impl KeyboardLayout {
    pub fn new(config: LayoutConfig) -> Result<Self> {
        validate_layout(&config)?;

        let mut keys = Vec::with_capacity(config.n_keys);
        let mut white_keys = Vec::new();
        let mut pending_black = Vec::new();
        for index in 0..config.n_keys {
            let midi_note = LOWEST_MIDI_NOTE + index as u8;
            if is_black_pitch(midi_note) {
                // Centred on the right edge of the preceding white key.
                let boundary = white_keys.len();
                let center_x = config.origin_x + boundary as f64 * config.white_width;
                pending_black.push((boundary, index));
                keys.push(Key { index, color: KeyColor::Black, center_x, midi_note });
            } else {
                let ordinal = white_keys.len() as f64;
                let center_x = config.origin_x + (ordinal + 0.5) * config.white_width;
                white_keys.push(index);
                keys.push(Key { index, color: KeyColor::White, center_x, midi_note });
            }
        }

        let mut black_at_boundary = vec![None; white_keys.len() + 1];
        for (boundary, index) in pending_black {
            black_at_boundary[boundary] = Some(index);
        }

        Ok(Self { config, keys, white_keys, black_at_boundary })
    }

    pub fn config(&self) -> &LayoutConfig {
        &self.config
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn key(&self, index: usize) -> Option<&Key> {
        self.keys.get(index)
    }

    pub fn white_keys(&self) -> impl Iterator<Item = &Key> + '_ {
        self.white_keys.iter().map(move |&i| &self.keys[i])
    }

    pub fn black_keys(&self) -> impl Iterator<Item = &Key> + '_ {
        self.keys.iter().filter(|k| k.color == KeyColor::Black)
    }

    pub fn n_white(&self) -> usize {
        self.white_keys.len()
    }

    pub fn n_black(&self) -> usize {
        self.keys.len() - self.white_keys.len()
    }

    /// Half-open x-extent `[left, right)` of a key. Black extents are closed
    /// in [`Self::key_at`] but reported the same way here.
    pub fn extent(&self, key: &Key) -> (f64, f64) {
        let half = match key.color {
            KeyColor::White => self.config.white_width / 2.0,
            KeyColor::Black => self.config.black_width / 2.0,
        };
        (key.center_x - half, key.center_x + half)
    }

    pub fn left_edge(&self) -> f64 {
        self.config.origin_x
    }

    pub fn right_edge(&self) -> f64 {
        self.config.origin_x + self.n_white() as f64 * self.config.white_width
    }

    /// Key under a fingertip at `x` mm along the keyboard and `depth` mm into it.
    pub fn key_at(&self, x: f64, depth: f64) -> Option<&Key> {
        if !x.is_finite() || x < self.left_edge() || x >= self.right_edge() {
            return None;
        }
        let w = self.config.white_width;
        let offset = (x - self.config.origin_x) / w;

        if depth >= self.config.black_zone_depth {
            let boundary = offset.round() as usize;
            if let Some(Some(black)) = self.black_at_boundary.get(boundary) {
                let center = self.keys[*black].center_x;
                if (x - center).abs() <= self.config.black_width / 2.0 {
                    return Some(&self.keys[*black]);
                }
            }
        }

        let ordinal = (offset.floor() as usize).min(self.n_white() - 1);
        Some(&self.keys[self.white_keys[ordinal]])
    }
}

fn validate_layout(c: &LayoutConfig) -> Result<()> {
    if c.n_keys == 0 {
        return Err(Error::config("layout.n_keys", "must be at least 1"));
    }
    if usize::from(LOWEST_MIDI_NOTE) + c.n_keys - 1 > 127 {
        return Err(Error::config("layout.n_keys", "exceeds the MIDI note range"));
    }
    let positive = [
        ("layout.white_width", c.white_width),
        ("layout.black_width", c.black_width),
        ("layout.key_travel", c.key_travel),
        ("layout.press_force", c.press_force),
    ];
    for (key, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::config(key, format!("must be positive, got {value}")));
        }
    }
    if c.black_width >= c.white_width {
        return Err(Error::config("layout.black_width", "must be narrower than layout.white_width"));
    }
    if !(c.black_zone_depth >= 0.0 && c.black_zone_depth.is_finite()) {
        return Err(Error::config("layout.black_zone_depth", "must be non-negative"));
    }
    if !c.origin_x.is_finite() {
        return Err(Error::config("layout.origin_x", "must be finite"));
    }
    let last = LOWEST_MIDI_NOTE as usize + c.n_keys - 1;
    if is_black_pitch(last as u8) {
        return Err(Error::config("layout.n_keys", "keyboard must end on a white key"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyEventKind {
    On,
    Off,
}

impl KeyEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KeyEventKind::On => "on",
            KeyEventKind::Off => "off",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyEvent {
    /// ms
    pub t: f64,
    pub kind: KeyEventKind,
    pub key_index: usize,
    /// 1..=127 for key-on, 0 for key-off.
    pub velocity: u8,
}
