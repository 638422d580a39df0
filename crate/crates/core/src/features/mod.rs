//! Scalogram band features, feature-vector assembly and normalization.
//!
//! Each channel contributes ten values, channel-major: the five band features
//! of the VLFO band followed by those of the LFO band, i.e. for channel `c`
//! the indices `10c .. 10c + 10` hold
//! `[vlfo_mean, vlfo_max, vlfo_std, vlfo_argmax_loc, vlfo_slope,
//!   lfo_mean, lfo_max, lfo_std, lfo_argmax_loc, lfo_slope]`.

mod io;
mod normalize;

pub use io::{read_features, read_features_from, write_features, write_features_to};
pub use normalize::NormalizationStats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cwt::{CwtPlan, ScaleGrid, Scalogram};
use crate::dataset::{extract_windows, Label, LabeledWindow, RecordingSession};
use crate::error::{Error, Result};

pub const FEATURES_PER_BAND: usize = 5;
pub const BAND_FEATURE_NAMES: [&str; FEATURES_PER_BAND] = ["mean", "max", "std", "argmax_loc", "slope"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandDefinition {
    pub name: String,
    pub f_low: f64,
    pub f_high: f64,
}

impl BandDefinition {
    pub fn new(name: &str, f_low: f64, f_high: f64) -> Result<Self> {
        if !(f_low.is_finite() && f_high.is_finite() && f_low > 0.0 && f_low < f_high) {
            return Err(Error::Band(format!(
                "band {name} must satisfy 0 < f_low < f_high, got [{f_low}, {f_high}]"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            f_low,
            f_high,
        })
    }

    pub fn vlfo() -> Self {
        Self::new("VLFO", 0.01, 0.08).expect("valid band")
    }

    pub fn lfo() -> Self {
        Self::new("LFO", 0.08, 0.15).expect("valid band")
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::vlfo(), Self::lfo()]
    }

    pub fn contains(&self, f: f64) -> bool {
        self.f_low <= f && f <= self.f_high
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Label,
    pub task_id: String,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// All instances of one task, rows sharing a dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskFeatureSet {
    pub task_id: String,
    pub rows: Vec<FeatureVector>,
}

impl TaskFeatureSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.rows.first().map(FeatureVector::dim)
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }
}

/// Groups vectors by task, tasks in order of first appearance.
pub fn group_by_task(vectors: &[FeatureVector]) -> Vec<TaskFeatureSet> {
    let mut sets: Vec<TaskFeatureSet> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for v in vectors {
        let i = *index.entry(v.task_id.clone()).or_insert_with(|| {
            sets.push(TaskFeatureSet {
                task_id: v.task_id.clone(),
                rows: Vec::new(),
            });
            sets.len() - 1
        });
        sets[i].rows.push(v.clone());
    }
    sets
}

/// Human-readable name of feature `index` under the standard two-band layout.
pub fn feature_name(index: usize, bands: &[BandDefinition]) -> String {
    let per_channel = FEATURES_PER_BAND * bands.len();
    let channel = index / per_channel;
    let band = &bands[(index % per_channel) / FEATURES_PER_BAND];
    let feature = BAND_FEATURE_NAMES[index % FEATURES_PER_BAND];
    format!("ch{channel}_{}_{feature}", band.name.to_lowercase())
}

/// The five features of `band` from a scalogram.
///
/// Over the in-band rows (equivalent frequency within `[f_low, f_high]`):
/// mean, max and population standard deviation of `|T|`; then, for the
/// scale-averaged profile `m(b)`, the position of its first maximum as a
/// fraction of the window (`index / (T - 1)`) and the least-squares slope of
/// `m` against time in seconds.
pub fn band_features(scalogram: &Scalogram, band: &BandDefinition) -> Result<[f64; FEATURES_PER_BAND]> {
    let freqs = scalogram.scale_grid.equivalent_frequencies();
    let rows: Vec<&Vec<f64>> = scalogram
        .magnitudes
        .iter()
        .zip(&freqs)
        .filter(|(_, &f)| band.contains(f))
        .map(|(r, _)| r)
        .collect();
    if rows.is_empty() {
        return Err(Error::Band(format!(
            "band {} [{}, {}] Hz contains no grid scale",
            band.name, band.f_low, band.f_high
        )));
    }
    let n_times = scalogram.n_times();
    if n_times == 0 {
        return Err(Error::Band("scalogram has no time samples".into()));
    }

    let count = (rows.len() * n_times) as f64;
    let mean = rows.iter().flat_map(|r| r.iter()).sum::<f64>() / count;
    let max = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let var = rows
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / count;

    let profile: Vec<f64> = (0..n_times)
        .map(|b| rows.iter().map(|r| r[b]).sum::<f64>() / rows.len() as f64)
        .collect();
    let argmax = profile
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0;
    let location = if n_times > 1 {
        argmax as f64 / (n_times - 1) as f64
    } else {
        0.0
    };
    let slope = ols_slope(&profile, scalogram.sampling_rate);

    Ok([mean, max, var.sqrt(), location, slope])
}

/// Least-squares slope of `y[i]` against `t_i = i / fs`.
fn ols_slope(y: &[f64], fs: f64) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let t_mean = (n - 1.0) / (2.0 * fs);
    let y_mean = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dt = i as f64 / fs - t_mean;
        sxy += dt * (v - y_mean);
        sxx += dt * dt;
    }
    sxy / sxx
}

/// Turns windows into feature vectors, reusing one transform plan per
/// distinct window shape.
pub struct FeatureExtractor {
    bands: Vec<BandDefinition>,
    grid: ScaleGrid,
    expected_channels: Option<usize>,
}

impl FeatureExtractor {
    pub fn new(bands: Vec<BandDefinition>, grid: ScaleGrid) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Band("at least one band is required".into()));
        }
        let freqs = grid.equivalent_frequencies();
        for b in &bands {
            if !freqs.iter().any(|&f| b.contains(f)) {
                return Err(Error::Band(format!(
                    "band {} [{}, {}] Hz contains no grid scale",
                    b.name, b.f_low, b.f_high
                )));
            }
        }
        Ok(Self {
            bands,
            grid,
            expected_channels: None,
        })
    }

    /// Rejects windows whose channel count differs from `channels`.
    pub fn with_channels(mut self, channels: usize) -> Self {
        self.expected_channels = Some(channels);
        self
    }

    pub fn dim(&self, channels: usize) -> usize {
        channels * self.bands.len() * FEATURES_PER_BAND
    }

    pub fn bands(&self) -> &[BandDefinition] {
        &self.bands
    }

    fn check(&self, window: &LabeledWindow) -> Result<()> {
        if let Some(c) = self.expected_channels {
            if window.n_channels() != c {
                return Err(Error::Data(format!(
                    "window of task `{}` has {} channels, expected {c}",
                    window.task_id,
                    window.n_channels()
                )));
            }
        }
        if window.n_channels() == 0 {
            return Err(Error::Data(format!("window of task `{}` has no channels", window.task_id)));
        }
        Ok(())
    }

    fn extract_with(&self, plan: &CwtPlan, window: &LabeledWindow) -> Result<FeatureVector> {
        self.check(window)?;
        let mut values = Vec::with_capacity(self.dim(window.n_channels()));
        for channel in &window.samples {
            let scalogram = plan.transform(channel)?;
            for band in &self.bands {
                values.extend_from_slice(&band_features(&scalogram, band)?);
            }
        }
        Ok(FeatureVector {
            values,
            label: window.label,
            task_id: window.task_id.clone(),
        })
    }

    pub fn extract(&self, window: &LabeledWindow) -> Result<FeatureVector> {
        let plan = CwtPlan::new(&self.grid, window.len(), window.sampling_rate)?;
        self.extract_with(&plan, window)
    }

    /// Extracts every window, in input order.
    pub fn extract_all(&self, windows: &[LabeledWindow]) -> Result<Vec<FeatureVector>> {
        let mut plans: Vec<((usize, u64), CwtPlan)> = Vec::new();
        for w in windows {
            let key = (w.len(), w.sampling_rate.to_bits());
            if !plans.iter().any(|(k, _)| *k == key) {
                plans.push((key, CwtPlan::new(&self.grid, w.len(), w.sampling_rate)?));
            }
        }
        windows
            .par_iter()
            .map(|w| {
                let key = (w.len(), w.sampling_rate.to_bits());
                let plan = &plans.iter().find(|(k, _)| *k == key).expect("plan built").1;
                self.extract_with(plan, w)
            })
            .collect()
    }
}

/// Feature vector of one window with the given bands and grid.
pub fn extract_features(window: &LabeledWindow, bands: &[BandDefinition], grid: &ScaleGrid) -> Result<FeatureVector> {
    FeatureExtractor::new(bands.to_vec(), grid.clone())?.extract(window)
}

/// Windows every session and extracts features. `n_no_pain = None` draws as
/// many baseline windows as the session has noxious onsets.
pub fn extract_sessions(
    sessions: &[RecordingSession],
    extractor: &FeatureExtractor,
    window_s: f64,
    n_no_pain: Option<usize>,
    seed: u64,
) -> Result<Vec<FeatureVector>> {
    let mut windows = Vec::new();
    for s in sessions {
        let n = n_no_pain.unwrap_or_else(|| s.noxious_onsets().count());
        windows.extend(extract_windows(s, window_s, n, seed)?);
    }
    extractor.extract_all(&windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cwt::{build_scale_grid, MorletParams};

    fn grid() -> ScaleGrid {
        build_scale_grid(0.01, 0.5, MorletParams::default(), 10).unwrap()
    }

    fn scalogram_from(f: impl Fn(usize, usize) -> f64, n_times: usize, fs: f64) -> Scalogram {
        let g = grid();
        Scalogram {
            magnitudes: (0..g.len()).map(|r| (0..n_times).map(|b| f(r, b)).collect()).collect(),
            scale_grid: g,
            sampling_rate: fs,
        }
    }

    /// Independent recomputation: collect the in-band block explicitly.
    fn brute(s: &Scalogram, band: &BandDefinition) -> [f64; 5] {
        let freqs = s.scale_grid.equivalent_frequencies();
        let idx: Vec<usize> = (0..freqs.len()).filter(|&i| freqs[i] >= band.f_low && freqs[i] <= band.f_high).collect();
        let mut block = Vec::new();
        for &i in &idx {
            block.extend(s.magnitudes[i].iter().copied());
        }
        let n = block.len() as f64;
        let mean = block.iter().sum::<f64>() / n;
        let max = block.iter().cloned().fold(f64::MIN, f64::max);
        let std = (block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let t = s.n_times();
        let m: Vec<f64> = (0..t).map(|b| idx.iter().map(|&i| s.magnitudes[i][b]).sum::<f64>() / idx.len() as f64).collect();
        let mut arg = 0;
        for b in 1..t {
            if m[b] > m[arg] {
                arg = b;
            }
        }
        let times: Vec<f64> = (0..t).map(|b| b as f64 / s.sampling_rate).collect();
        let tm = times.iter().sum::<f64>() / t as f64;
        let mm = m.iter().sum::<f64>() / t as f64;
        let num: f64 = times.iter().zip(&m).map(|(x, y)| (x - tm) * (y - mm)).sum();
        let den: f64 = times.iter().map(|x| (x - tm) * (x - tm)).sum();
        [mean, max, std, arg as f64 / (t - 1) as f64, num / den]
    }

    #[test]
    fn constant_scalogram() {
        let s = scalogram_from(|_, _| 2.5, 100, 5.0);
        let f = band_features(&s, &BandDefinition::vlfo()).unwrap();
        assert!((f[0] - 2.5).abs() < 1e-12);
        assert_eq!(f[1], 2.5);
        assert!(f[2].abs() < 1e-12);
        assert_eq!(f[3], 0.0);
        assert!(f[4].abs() < 1e-12);
    }

    #[test]
    fn linear_profile() {
        let fs = 5.0;
        let s = scalogram_from(|_, b| 0.2 * b as f64 / fs, 100, fs);
        let f = band_features(&s, &BandDefinition::lfo()).unwrap();
        assert!((f[4] - 0.2).abs() < 1e-12);
        assert_eq!(f[3], 1.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut state = 0x1234_5678_u64;
        let mut next = move || {
            state = crate::seed::splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let values: Vec<Vec<f64>> = (0..58).map(|_| (0..73).map(|_| next()).collect()).collect();
        let s = scalogram_from(|r, b| values[r][b], 73, 4.0);
        for band in BandDefinition::defaults() {
            let got = band_features(&s, &band).unwrap();
            let want = brute(&s, &band);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12 * w.abs().max(1.0), "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn empty_band_rejected() {
        let s = scalogram_from(|_, _| 1.0, 10, 5.0);
        let band = BandDefinition::new("HF", 1.0, 2.0).unwrap();
        assert!(matches!(band_features(&s, &band), Err(Error::Band(_))));
        assert!(FeatureExtractor::new(vec![band], grid()).is_err());
        assert!(BandDefinition::new("bad", 0.2, 0.1).is_err());
    }

    fn window(channels: usize) -> LabeledWindow {
        LabeledWindow {
            task_id: "t".into(),
            label: Label::Pain,
            samples: (0..channels)
                .map(|c| (0..100).map(|n| ((n + 7 * c) as f64 * 0.3).sin()).collect())
                .collect(),
            sampling_rate: 5.0,
            window_s: 20.0,
            start_s: 0.0,
        }
    }

    #[test]
    fn dimension_and_order() {
        let bands = BandDefinition::defaults();
        let w8 = window(8);
        let v = extract_features(&w8, &bands, &grid()).unwrap();
        assert_eq!(v.dim(), 80);
        assert_eq!(extract_features(&window(1), &bands, &grid()).unwrap().dim(), 10);
        assert_eq!(v, extract_features(&w8, &bands, &grid()).unwrap());

        // Channel 3's block equals the features of channel 3 on its own.
        let single = LabeledWindow {
            samples: vec![w8.samples[3].clone()],
            ..w8.clone()
        };
        let s = extract_features(&single, &bands, &grid()).unwrap();
        assert_eq!(&v.values[30..40], &s.values[..]);
        assert_eq!(feature_name(30, &bands), "ch3_vlfo_mean");
        assert_eq!(feature_name(39, &bands), "ch3_lfo_slope");
    }

    #[test]
    fn channel_count_enforced() {
        let ex = FeatureExtractor::new(BandDefinition::defaults(), grid()).unwrap().with_channels(8);
        assert!(ex.extract(&window(7)).is_err());
        assert!(ex.extract(&window(8)).is_ok());
    }
}
