//! Recording sessions, labeled windows, file I/O and the synthetic cohort
//! generator.

mod io;
mod synth;
mod windows;

pub use io::{read_sessions, read_sessions_from, read_truth, write_sessions, write_sessions_to, write_truth};
pub use synth::{generate_cohort, Cohort, OscillationBand, ParamRange, ResponseTemplate, SynthConfig};
pub use windows::extract_windows;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper edge of the hemodynamic content the signals are assumed to carry
/// after low-pass filtering, in Hz.
pub const LOW_PASS_HZ: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnsetKind {
    Noxious,
    BaselineMarker,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Onset {
    pub time_s: f64,
    pub kind: OnsetKind,
}

/// One task's multi-channel HbO-equivalent recording.
///
/// `channels[c][n]` is channel `c` at time `n / sampling_rate`. Onsets of
/// kind [`OnsetKind::BaselineMarker`] open a resting segment that runs to the
/// next onset (of any kind) or to the end of the recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingSession {
    pub task_id: String,
    pub sampling_rate: f64,
    pub onsets: Vec<Onset>,
    pub channels: Vec<Vec<f64>>,
}

impl RecordingSession {
    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate
    }

    /// Checks the structural invariants that do not depend on a window length.
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::Data(format!("session `{}` has no channels", self.task_id)));
        }
        let n = self.n_samples();
        if let Some((c, ch)) = self.channels.iter().enumerate().find(|(_, ch)| ch.len() != n) {
            return Err(Error::Data(format!(
                "session `{}`: channel {c} has {} samples, channel 0 has {n}",
                self.task_id,
                ch.len()
            )));
        }
        if !(self.sampling_rate.is_finite() && self.sampling_rate > 2.0 * LOW_PASS_HZ) {
            return Err(Error::Data(format!(
                "session `{}`: sampling rate {} Hz must exceed {} Hz",
                self.task_id,
                self.sampling_rate,
                2.0 * LOW_PASS_HZ
            )));
        }
        if self.channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("session `{}` contains non-finite samples", self.task_id)));
        }
        let duration = self.duration_s();
        if let Some(o) = self.onsets.iter().find(|o| !(o.time_s >= 0.0 && o.time_s <= duration)) {
            return Err(Error::Data(format!(
                "session `{}`: onset at {} s outside [0, {duration}] s",
                self.task_id, o.time_s
            )));
        }
        Ok(())
    }

    pub fn noxious_onsets(&self) -> impl Iterator<Item = f64> + '_ {
        self.onsets
            .iter()
            .filter(|o| o.kind == OnsetKind::Noxious)
            .map(|o| o.time_s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NoPain,
    Pain,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::NoPain),
            1 => Some(Label::Pain),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::NoPain => 0,
            Label::Pain => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }
}

/// A fixed-duration slice of a session, `samples[channel][t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledWindow {
    pub task_id: String,
    pub label: Label,
    pub samples: Vec<Vec<f64>>,
    pub sampling_rate: f64,
    pub window_s: f64,
    /// Start time within the source session, seconds.
    pub start_s: f64,
}

impl LabeledWindow {
    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of samples in a window of `window_s` seconds at `fs` Hz.
pub fn window_len(window_s: f64, fs: f64) -> usize {
    (window_s * fs).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(channels: Vec<Vec<f64>>) -> RecordingSession {
        RecordingSession {
            task_id: "t".into(),
            sampling_rate: 5.0,
            onsets: vec![],
            channels,
        }
    }

    #[test]
    fn mismatched_channels_rejected() {
        let s = session(vec![vec![0.0; 10], vec![0.0; 9]]);
        assert!(matches!(s.validate(), Err(Error::Data(_))));
    }

    #[test]
    fn sampling_rate_needs_nyquist_margin() {
        let mut s = session(vec![vec![0.0; 10]]);
        s.sampling_rate = 1.0;
        assert!(s.validate().is_err());
        s.sampling_rate = 1.01;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn onset_outside_recording_rejected() {
        let mut s = session(vec![vec![0.0; 10]]);
        s.onsets.push(Onset { time_s: 2.5, kind: OnsetKind::Noxious });
        assert!(s.validate().is_err());
    }

    #[test]
    fn window_length_rounds() {
        assert_eq!(window_len(20.0, 5.0), 100);
        assert_eq!(window_len(20.0, 7.81), 156);
    }
}
