//! Seeded synthetic cohort with cluster-structured pain responses.
//!
//! Each task belongs to one ground-truth cluster. A cluster owns a response
//! template: a Gaussian bump with amplitude, latency and width, multiplied by
//! a signed per-channel gain. A task's recording is
//!
//! ```text
//! x_c(t) = level_c                                           (baseline level)
//!        + sum_b A_{b,c} sin(2 pi f_b t + phase_{b,c})      (baseline oscillations)
//!        + sum_onsets g_c A exp(-(t - onset - L)^2 / 2W^2)   (pain response)
//!        + N(0, noise_sigma^2)                               (white noise)
//! ```
//!
//! On every channel one cluster leads with gain `+-1` and the others take the
//! opposite sign with gain `1 / (clusters - 1)`, so the gains of a channel sum
//! to zero over clusters: activation in one cluster is deactivation in the
//! rest.
//!
//! The response of each onset is confined to `[onset, onset + inter_stimulus_s)`.
//! Oscillations, templates, cluster assignment and noise draw from separate
//! seed streams, so changing e.g. the noise level leaves the oscillations of
//! every task untouched.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Onset, OnsetKind, RecordingSession};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Closed interval `[min, max]`; `min == max` is a point value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
}

impl ParamRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn point(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }

    /// Maps a uniform draw `u` in `[0, 1)` into the range. Point ranges
    /// return exactly their value.
    fn at(&self, u: f64) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            self.min + u * (self.max - self.min)
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.at(u)
    }
}

impl From<[f64; 2]> for ParamRange {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<ParamRange> for [f64; 2] {
    fn from(r: ParamRange) -> Self {
        [r.min, r.max]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillationBand {
    pub center_hz: f64,
    pub amplitude: ParamRange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_tasks: usize,
    pub n_ground_truth_clusters: usize,
    pub windows_per_task_per_class: usize,
    pub channels: usize,
    pub sampling_rate: f64,
    /// Length of the resting segment that opens every session, seconds.
    pub baseline_s: f64,
    /// Spacing between consecutive noxious onsets, seconds.
    pub inter_stimulus_s: f64,
    pub response_amplitude_range: ParamRange,
    pub response_latency_s: ParamRange,
    pub response_width_s: ParamRange,
    pub noise_sigma: f64,
    /// Channels driven by each cluster's template; `None` drives all of them.
    /// Clusters take consecutive runs of a seeded channel permutation, so
    /// their active sets overlap only once the runs wrap around.
    pub active_channels: Option<usize>,
    /// Constant offset added to every channel, drawn per task and channel.
    /// Relative concentrations have an arbitrary baseline; a nonzero level
    /// makes the sign of a response visible to zero-padded magnitude features.
    pub baseline_level: ParamRange,
    pub oscillation_bands: Vec<OscillationBand>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_tasks: 40,
            n_ground_truth_clusters: 3,
            windows_per_task_per_class: 6,
            channels: 8,
            sampling_rate: 5.0,
            baseline_s: 180.0,
            inter_stimulus_s: 30.0,
            response_amplitude_range: ParamRange::new(0.5, 0.8),
            response_latency_s: ParamRange::new(3.0, 17.0),
            response_width_s: ParamRange::new(3.0, 5.0),
            noise_sigma: 0.25,
            active_channels: None,
            baseline_level: ParamRange::point(5.0),
            oscillation_bands: vec![
                OscillationBand {
                    center_hz: 0.04,
                    amplitude: ParamRange::new(0.2, 0.6),
                },
                OscillationBand {
                    center_hz: 0.10,
                    amplitude: ParamRange::new(0.1, 0.4),
                },
            ],
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.n_tasks == 0 {
            return err("n_tasks must be positive".into());
        }
        if self.n_ground_truth_clusters == 0 || self.n_ground_truth_clusters > self.n_tasks {
            return err(format!(
                "n_ground_truth_clusters must be in 1..={}, got {}",
                self.n_tasks, self.n_ground_truth_clusters
            ));
        }
        if self.windows_per_task_per_class == 0 {
            return err("windows_per_task_per_class must be positive".into());
        }
        if self.channels == 0 {
            return err("channels must be positive".into());
        }
        if !(self.sampling_rate.is_finite() && self.sampling_rate > 2.0 * super::LOW_PASS_HZ) {
            return err(format!("sampling_rate must exceed 1 Hz, got {}", self.sampling_rate));
        }
        if !(self.baseline_s.is_finite() && self.baseline_s > 0.0) {
            return err("baseline_s must be positive".into());
        }
        if !(self.inter_stimulus_s.is_finite() && self.inter_stimulus_s > 0.0) {
            return err("inter_stimulus_s must be positive".into());
        }
        if let Some(a) = self.active_channels {
            if a == 0 || a > self.channels {
                return err(format!("active_channels must be in 1..={}, got {a}", self.channels));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return err("noise_sigma must be non-negative".into());
        }
        let ranges = [
            ("response_amplitude_range", self.response_amplitude_range),
            ("response_latency_s", self.response_latency_s),
            ("response_width_s", self.response_width_s),
            ("baseline_level", self.baseline_level),
        ];
        for (name, r) in ranges {
            if !r.is_valid() {
                return err(format!("{name} must satisfy min <= max, got [{}, {}]", r.min, r.max));
            }
        }
        if self.response_latency_s.min < 0.0 {
            return err("response_latency_s must be non-negative".into());
        }
        if self.response_width_s.min <= 0.0 {
            return err("response_width_s must be positive".into());
        }
        for b in &self.oscillation_bands {
            if !(b.center_hz.is_finite() && b.center_hz > 0.0) || !b.amplitude.is_valid() {
                return err(format!("invalid oscillation band at {} Hz", b.center_hz));
            }
        }
        Ok(())
    }

    fn task_id(&self, m: usize) -> String {
        format!("task-{m:03}")
    }
}

/// One cluster's pain response shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseTemplate {
    pub amplitude: f64,
    pub latency_s: f64,
    pub width_s: f64,
    /// Signed gain per channel: positive activation, negative deactivation,
    /// zero silent.
    pub channel_gains: Vec<f64>,
}

impl ResponseTemplate {
    /// Response value at `dt` seconds after onset on `channel`.
    pub fn value(&self, channel: usize, dt: f64) -> f64 {
        let z = (dt - self.latency_s) / self.width_s;
        self.channel_gains[channel] * self.amplitude * (-0.5 * z * z).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub sessions: Vec<RecordingSession>,
    /// Task id to ground-truth cluster index.
    pub truth: BTreeMap<String, usize>,
    pub templates: Vec<ResponseTemplate>,
}

impl Cohort {
    /// Smallest peak absolute difference between any two cluster templates,
    /// taken over channels and the response interval sampled at `fs`.
    pub fn template_separation(&self, fs: f64, span_s: f64) -> f64 {
        let n = (span_s * fs).round() as usize;
        let mut best = f64::INFINITY;
        for (i, a) in self.templates.iter().enumerate() {
            for b in &self.templates[i + 1..] {
                let mut peak = 0.0_f64;
                for c in 0..a.channel_gains.len() {
                    for s in 0..n {
                        let dt = s as f64 / fs;
                        peak = peak.max((a.value(c, dt) - b.value(c, dt)).abs());
                    }
                }
                best = best.min(peak);
            }
        }
        best
    }
}

/// Builds a cohort from `cfg`. Output is a pure function of `cfg`.
pub fn generate_cohort(cfg: &SynthConfig) -> Result<Cohort> {
    cfg.validate()?;
    let n_clusters = cfg.n_ground_truth_clusters;

    // Balanced assignment (every cluster non-empty), then shuffled.
    let mut assignment: Vec<usize> = (0..cfg.n_tasks).map(|m| m % n_clusters).collect();
    assignment.shuffle(&mut rng_for(cfg.seed, "synth/assignment"));

    let mut order: Vec<usize> = (0..cfg.channels).collect();
    order.shuffle(&mut rng_for(cfg.seed, "synth/channels"));
    let active = cfg.active_channels.unwrap_or(cfg.channels);

    // On every channel one cluster responds with full gain and the others
    // with the opposite sign, sharing the same total, so the gains of each
    // channel sum to zero over clusters.
    let signs: Vec<Vec<f64>> = (0..cfg.channels)
        .map(|ch| {
            let mut rng = rng_for(cfg.seed, &format!("synth/signs/{ch}"));
            let lead = rng.random_range(0..n_clusters);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let rest = if n_clusters > 1 { -sign / (n_clusters - 1) as f64 } else { 0.0 };
            (0..n_clusters).map(|c| if c == lead { sign } else { rest }).collect()
        })
        .collect();

    // Latencies are stratified across the configured range so that clusters
    // differ in timing; amplitude and width are drawn freely.
    let templates: Vec<ResponseTemplate> = (0..n_clusters)
        .map(|c| {
            let mut rng = rng_for(cfg.seed, &format!("synth/template/{c}"));
            let amplitude = cfg.response_amplitude_range.sample(&mut rng);
            let u: f64 = rng.random();
            let latency_s = cfg
                .response_latency_s
                .at((c as f64 + u) / n_clusters as f64);
            let width_s = cfg.response_width_s.sample(&mut rng);
            let mut channel_gains: Vec<f64> = signs.iter().map(|col| col[c]).collect();
            if active < cfg.channels {
                let on: Vec<usize> = (0..active).map(|j| order[(c * active + j) % cfg.channels]).collect();
                for (ch, s) in channel_gains.iter_mut().enumerate() {
                    if !on.contains(&ch) {
                        *s = 0.0;
                    }
                }
            }
            ResponseTemplate {
                amplitude,
                latency_s,
                width_s,
                channel_gains,
            }
        })
        .collect();

    let fs = cfg.sampling_rate;
    let n_onsets = cfg.windows_per_task_per_class;
    let onset_times: Vec<f64> = (0..n_onsets)
        .map(|j| cfg.baseline_s + j as f64 * cfg.inter_stimulus_s)
        .collect();
    let duration = cfg.baseline_s + n_onsets as f64 * cfg.inter_stimulus_s;
    let n_samples = (duration * fs).round() as usize;
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let mut sessions = Vec::with_capacity(cfg.n_tasks);
    let mut truth = BTreeMap::new();
    for (m, &cluster) in assignment.iter().enumerate() {
        let task_id = cfg.task_id(m);
        let template = &templates[cluster];
        let mut osc_rng = rng_for(cfg.seed, &format!("synth/oscillation/{task_id}"));
        let mut noise_rng = rng_for(cfg.seed, &format!("synth/noise/{task_id}"));
        let mut level_rng = rng_for(cfg.seed, &format!("synth/level/{task_id}"));

        let mut channels = Vec::with_capacity(cfg.channels);
        for c in 0..cfg.channels {
            let components: Vec<(f64, f64, f64)> = cfg
                .oscillation_bands
                .iter()
                .map(|b| {
                    let amp = b.amplitude.sample(&mut osc_rng);
                    let phase = osc_rng.random::<f64>() * 2.0 * PI;
                    (b.center_hz, amp, phase)
                })
                .collect();
            let level = cfg.baseline_level.sample(&mut level_rng);
            let mut signal: Vec<f64> = (0..n_samples)
                .map(|n| {
                    let t = n as f64 / fs;
                    level
                        + components
                            .iter()
                            .map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                            .sum::<f64>()
                })
                .collect();
            for &onset in &onset_times {
                let first = (onset * fs).round() as usize;
                let last = (((onset + cfg.inter_stimulus_s) * fs).round() as usize).min(n_samples);
                for (n, v) in signal.iter_mut().enumerate().take(last).skip(first) {
                    *v += template.value(c, n as f64 / fs - onset);
                }
            }
            if cfg.noise_sigma > 0.0 {
                for v in &mut signal {
                    *v += noise.sample(&mut noise_rng);
                }
            }
            channels.push(signal);
        }

        let mut onsets = vec![Onset {
            time_s: 0.0,
            kind: OnsetKind::BaselineMarker,
        }];
        onsets.extend(onset_times.iter().map(|&time_s| Onset {
            time_s,
            kind: OnsetKind::Noxious,
        }));
        truth.insert(task_id.clone(), cluster);
        sessions.push(RecordingSession {
            task_id,
            sampling_rate: fs,
            onsets,
            channels,
        });
    }

    Ok(Cohort {
        sessions,
        truth,
        templates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_noise_cfg(amplitude: f64) -> SynthConfig {
        SynthConfig {
            n_tasks: 5,
            n_ground_truth_clusters: 1,
            noise_sigma: 0.0,
            response_amplitude_range: ParamRange::point(amplitude),
            response_latency_s: ParamRange::point(6.0),
            response_width_s: ParamRange::point(2.0),
            seed: 11,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_noise_response_peaks_at_amplitude_and_latency() {
        let with = generate_cohort(&zero_noise_cfg(0.8)).unwrap();
        let without = generate_cohort(&zero_noise_cfg(0.0)).unwrap();
        for (s, base) in with.sessions.iter().zip(&without.sessions) {
            let fs = s.sampling_rate;
            for onset in s.noxious_onsets() {
                let start = (onset * fs).round() as usize;
                let span = (30.0 * fs) as usize;
                let (at, peak) = s.channels[0][start..start + span]
                    .iter()
                    .zip(&base.channels[0][start..start + span])
                    .map(|(a, b)| (a - b).abs())
                    .enumerate()
                    .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
                assert!((peak - 0.8).abs() < 1e-12, "peak {peak}");
                assert_eq!(at, (6.0 * fs) as usize);
            }
        }
    }

    #[test]
    fn every_cluster_is_populated() {
        let cohort = generate_cohort(&SynthConfig::default()).unwrap();
        assert_eq!(cohort.truth.len(), 40);
        let mut counts = [0usize; 3];
        for &c in cohort.truth.values() {
            counts[c] += 1;
        }
        assert!(counts.iter().all(|&n| n > 0), "{counts:?}");
        assert_eq!(counts.iter().sum::<usize>(), 40);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig {
            n_tasks: 4,
            ..SynthConfig::default()
        };
        assert_eq!(generate_cohort(&cfg).unwrap(), generate_cohort(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(generate_cohort(&cfg).unwrap(), generate_cohort(&other).unwrap());
    }

    #[test]
    fn session_layout() {
        let cohort = generate_cohort(&SynthConfig::default()).unwrap();
        let s = &cohort.sessions[0];
        assert_eq!(s.n_channels(), 8);
        assert_eq!(s.noxious_onsets().count(), 6);
        assert_eq!(s.n_samples(), 360 * 5);
        s.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { n_tasks: 0, ..SynthConfig::default() },
            SynthConfig { n_ground_truth_clusters: 41, ..SynthConfig::default() },
            SynthConfig { channels: 0, ..SynthConfig::default() },
            SynthConfig { sampling_rate: 0.0, ..SynthConfig::default() },
            SynthConfig { response_width_s: ParamRange::new(2.0, 1.0), ..SynthConfig::default() },
        ] {
            assert!(matches!(generate_cohort(&cfg), Err(Error::Config(_))));
        }
    }
}
