//! Electrode, signal and statistic vocabularies shared by every stage.
//!
//! All three enums have a fixed canonical order. Feature columns, CSV
//! headers and model files are laid out by these ranks, so reordering a
//! variant is a format break.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Unknown name passed to one of the `FromStr` impls in this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} '{value}'")]
pub struct ParseNameError {
    pub kind: &'static str,
    pub value: String,
}

/// Headset electrode position (10-20 system).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    #[serde(rename = "TP9")]
    Tp9,
    #[serde(rename = "AF7")]
    Af7,
    #[serde(rename = "AF8")]
    Af8,
    #[serde(rename = "TP10")]
    Tp10,
}

impl ChannelId {
    pub const ALL: [ChannelId; 4] = [ChannelId::Tp9, ChannelId::Af7, ChannelId::Af8, ChannelId::Tp10];

    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Tp9 => "TP9",
            ChannelId::Af7 => "AF7",
            ChannelId::Af8 => "AF8",
            ChannelId::Tp10 => "TP10",
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelId::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParseNameError { kind: "channel", value: s.to_string() })
    }
}

/// One of the five EEG bands reported by the headset, or the unfiltered raw channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignalKind {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
    Raw,
}

impl SignalKind {
    pub const ALL: [SignalKind; 6] = [
        SignalKind::Delta,
        SignalKind::Theta,
        SignalKind::Alpha,
        SignalKind::Beta,
        SignalKind::Gamma,
        SignalKind::Raw,
    ];

    /// Signals kept after Delta removal, in feature order.
    pub const RETAINED: [SignalKind; 5] = [
        SignalKind::Theta,
        SignalKind::Alpha,
        SignalKind::Beta,
        SignalKind::Gamma,
        SignalKind::Raw,
    ];

    /// Rank among all six signals (session layout).
    pub fn rank(self) -> usize {
        self as usize
    }

    /// Rank among the five retained signals, `None` for Delta.
    pub fn retained_rank(self) -> Option<usize> {
        match self {
            SignalKind::Delta => None,
            other => Some(other as usize - 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Delta => "Delta",
            SignalKind::Theta => "Theta",
            SignalKind::Alpha => "Alpha",
            SignalKind::Beta => "Beta",
            SignalKind::Gamma => "Gamma",
            SignalKind::Raw => "Raw",
        }
    }

    /// Nominal frequency range in Hz; `None` for the raw channel.
    pub fn band_hz(self) -> Option<(f64, f64)> {
        match self {
            SignalKind::Delta => Some((0.5, 4.0)),
            SignalKind::Theta => Some((4.0, 7.5)),
            SignalKind::Alpha => Some((7.5, 12.0)),
            SignalKind::Beta => Some((12.0, 30.0)),
            SignalKind::Gamma => Some((30.0, 100.0)),
            SignalKind::Raw => None,
        }
    }

    pub fn is_band(self) -> bool {
        self != SignalKind::Raw
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignalKind {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SignalKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParseNameError { kind: "signal", value: s.to_string() })
    }
}

/// Per-frame summary statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Mean,
    Max,
    Min,
    Zcr,
}

impl Stat {
    pub const ALL: [Stat; 4] = [Stat::Mean, Stat::Max, Stat::Min, Stat::Zcr];

    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Max => "max",
            Stat::Min => "min",
            Stat::Zcr => "zcr",
        }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stat {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stat::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParseNameError { kind: "statistic", value: s.to_string() })
    }
}

/// Music stimulus of a recording task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Every participant hears the same reference song.
    SameSong,
    /// Each participant hears their own favorite song.
    FavoriteSong,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::SameSong, Condition::FavoriteSong];

    /// Directory / CSV token.
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::SameSong => "same_song",
            Condition::FavoriteSong => "favorite_song",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "same_song" | "same" => Ok(Condition::SameSong),
            "favorite_song" | "favorite" | "favourite_song" | "favourite" => Ok(Condition::FavoriteSong),
            _ => Err(ParseNameError { kind: "condition", value: s.to_string() }),
        }
    }
}

/// Number of values per raw sample: six signals on four channels.
pub const SAMPLE_WIDTH: usize = 24;
/// Number of values per sample after Delta removal.
pub const REDUCED_WIDTH: usize = 20;
/// Length of a full frame feature vector.
pub const FEATURE_COUNT: usize = 80;

/// Slot of a (signal, channel) pair in a 24-wide sample.
pub fn sample_slot(signal: SignalKind, channel: ChannelId) -> usize {
    signal.rank() * ChannelId::ALL.len() + channel.rank()
}

/// Slot of a (signal, channel) pair in a 20-wide reduced sample.
pub fn reduced_slot(signal: SignalKind, channel: ChannelId) -> Option<usize> {
    signal
        .retained_rank()
        .map(|r| r * ChannelId::ALL.len() + channel.rank())
}

/// Inverse of [`reduced_slot`].
pub fn reduced_slot_parts(slot: usize) -> (SignalKind, ChannelId) {
    let n = ChannelId::ALL.len();
    (SignalKind::RETAINED[slot / n], ChannelId::ALL[slot % n])
}
