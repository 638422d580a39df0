use rand::seq::index::sample;
use rand::Rng;

use super::{window_len, Label, LabeledWindow, OnsetKind, RecordingSession};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Cuts one pain window at every noxious onset and `n_no_pain` baseline
/// windows drawn at random from the resting segments.
///
/// Baseline windows never overlap a pain window or each other. Pain windows
/// come first in onset order, followed by baseline windows in time order. The
/// random stream is `(seed, "windows/<task_id>")`.
pub fn extract_windows(
    session: &RecordingSession,
    window_s: f64,
    n_no_pain: usize,
    seed: u64,
) -> Result<Vec<LabeledWindow>> {
    session.validate()?;
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::Argument(format!("window_s must be positive, got {window_s}")));
    }
    let fs = session.sampling_rate;
    let len = window_len(window_s, fs);
    if len < 2 {
        return Err(Error::Argument(format!(
            "window of {window_s} s at {fs} Hz has fewer than 2 samples"
        )));
    }
    let n = session.n_samples();
    let to_index = |t: f64| (t * fs).round() as usize;

    let mut pain_starts = Vec::new();
    for onset in session.noxious_onsets() {
        let start = to_index(onset);
        if start + len > n {
            return Err(Error::Data(format!(
                "session `{}`: pain window at {onset} s runs past the end of the recording",
                session.task_id
            )));
        }
        pain_starts.push(start);
    }

    let mut windows: Vec<LabeledWindow> = pain_starts
        .iter()
        .map(|&s| cut(session, s, len, window_s, Label::Pain))
        .collect();

    if n_no_pain > 0 {
        let segments = baseline_segments(session, &pain_starts, len);
        let capacity: usize = segments.iter().map(|&(a, b)| (b - a) / len).sum();
        if capacity < n_no_pain {
            return Err(Error::Sampling(format!(
                "session `{}`: baseline holds {capacity} non-overlapping {window_s} s windows, {n_no_pain} requested",
                session.task_id
            )));
        }
        let mut rng = rng_for(seed, &format!("windows/{}", session.task_id));

        // Choose which capacity slots are used, then place each segment's
        // windows with uniformly random slack between them.
        let chosen = sample(&mut rng, capacity, n_no_pain).into_vec();
        let mut slot_offset = 0;
        let mut starts = Vec::with_capacity(n_no_pain);
        for &(a, b) in &segments {
            let slots = (b - a) / len;
            let count = chosen
                .iter()
                .filter(|&&i| i >= slot_offset && i < slot_offset + slots)
                .count();
            slot_offset += slots;
            if count == 0 {
                continue;
            }
            let slack = (b - a) - count * len;
            let mut gaps: Vec<usize> = (0..count).map(|_| rng.random_range(0..=slack)).collect();
            gaps.sort_unstable();
            starts.extend(gaps.iter().enumerate().map(|(i, g)| a + g + i * len));
        }
        starts.sort_unstable();
        windows.extend(
            starts
                .into_iter()
                .map(|s| cut(session, s, len, window_s, Label::NoPain)),
        );
    }
    Ok(windows)
}

fn cut(session: &RecordingSession, start: usize, len: usize, window_s: f64, label: Label) -> LabeledWindow {
    LabeledWindow {
        task_id: session.task_id.clone(),
        label,
        samples: session
            .channels
            .iter()
            .map(|ch| ch[start..start + len].to_vec())
            .collect(),
        sampling_rate: session.sampling_rate,
        window_s,
        start_s: start as f64 / session.sampling_rate,
    }
}

/// Resting segments as half-open sample ranges with every pain window removed.
///
/// A baseline marker opens a segment that ends at the next later onset of any
/// kind. Sessions without markers use everything before the first noxious
/// onset.
fn baseline_segments(session: &RecordingSession, pain_starts: &[usize], len: usize) -> Vec<(usize, usize)> {
    let fs = session.sampling_rate;
    let n = session.n_samples();
    let to_index = |t: f64| ((t * fs).round() as usize).min(n);

    let mut raw = Vec::new();
    let markers: Vec<f64> = session
        .onsets
        .iter()
        .filter(|o| o.kind == OnsetKind::BaselineMarker)
        .map(|o| o.time_s)
        .collect();
    if markers.is_empty() {
        let end = session.noxious_onsets().fold(session.duration_s(), f64::min);
        raw.push((0, to_index(end)));
    } else {
        for &m in &markers {
            let end = session
                .onsets
                .iter()
                .map(|o| o.time_s)
                .filter(|&t| t > m)
                .fold(session.duration_s(), f64::min);
            raw.push((to_index(m), to_index(end)));
        }
    }

    let mut segments = Vec::new();
    for (a, b) in raw {
        let mut pieces = vec![(a, b)];
        for &p in pain_starts {
            pieces = pieces
                .into_iter()
                .flat_map(|(s, e)| {
                    let (ps, pe) = (p, p + len);
                    if pe <= s || ps >= e {
                        vec![(s, e)]
                    } else {
                        [(s, ps.max(s)), (pe.min(e), e)]
                            .into_iter()
                            .filter(|(x, y)| y > x)
                            .collect()
                    }
                })
                .collect();
        }
        segments.extend(pieces);
    }
    segments.sort_unstable();
    segments.dedup();
    segments
}
