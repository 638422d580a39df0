//! Morlet continuous wavelet transform and magnitude scalograms.
//!
//! The transform is evaluated at every sample position `b_m = m / fs` as
//!
//! ```text
//! T(a, b_m) = (dt / sqrt(a)) * sum_n x_n * conj(psi((t_n - b_m) / a))
//! ```
//!
//! with the signal taken as zero outside the window (no cone-of-influence
//! masking). Scales are indexed by their equivalent Fourier frequency
//! `f = w0 / (2 pi a)`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_W0: f64 = 6.0;
pub const DEFAULT_VOICES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorletParams {
    /// Central frequency in radians.
    pub w0: f64,
}

impl Default for MorletParams {
    fn default() -> Self {
        Self { w0: DEFAULT_W0 }
    }
}

impl MorletParams {
    pub fn new(w0: f64) -> Result<Self> {
        if !(w0.is_finite() && w0 > 0.0) {
            return Err(Error::Argument(format!("w0 must be positive, got {w0}")));
        }
        Ok(Self { w0 })
    }

    /// `c_w0 = (1 + e^{-w0^2} - 2 e^{-3 w0^2 / 4})^{-1/2}`.
    pub fn normalization(&self) -> f64 {
        let w2 = self.w0 * self.w0;
        (1.0 + (-w2).exp() - 2.0 * (-0.75 * w2).exp()).powf(-0.5)
    }

    /// Equivalent Fourier frequency of scale `a` seconds.
    pub fn scale_to_frequency(&self, a: f64) -> f64 {
        self.w0 / (2.0 * PI * a)
    }

    pub fn frequency_to_scale(&self, f: f64) -> f64 {
        self.w0 / (2.0 * PI * f)
    }
}

/// `psi(t) = c_w0 pi^{-1/4} e^{-t^2/2} (e^{i w0 t} - e^{-w0^2/2})`.
pub fn morlet_eval(params: &MorletParams, t: f64) -> Complex64 {
    let w0 = params.w0;
    let envelope = params.normalization() * PI.powf(-0.25) * (-0.5 * t * t).exp();
    let (s, c) = (w0 * t).sin_cos();
    Complex64::new(envelope * (c - (-0.5 * w0 * w0).exp()), envelope * s)
}

/// Geometric scale grid, smallest scale (highest frequency) first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub scales: Vec<f64>,
    pub voices_per_octave: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub params: MorletParams,
}

impl ScaleGrid {
    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn equivalent_frequencies(&self) -> Vec<f64> {
        self.scales
            .iter()
            .map(|&a| self.params.scale_to_frequency(a))
            .collect()
    }
}

/// Grid starting at the scale of `f_max` and growing by `2^{1/voices}` until
/// the equivalent frequency reaches `f_min` or below.
pub fn build_scale_grid(f_min: f64, f_max: f64, params: MorletParams, voices: usize) -> Result<ScaleGrid> {
    if !(f_min.is_finite() && f_max.is_finite() && f_min > 0.0 && f_min < f_max) {
        return Err(Error::Argument(format!(
            "frequency band must satisfy 0 < f_min < f_max, got [{f_min}, {f_max}]"
        )));
    }
    if voices == 0 {
        return Err(Error::Argument("voices per octave must be positive".into()));
    }
    let octaves = (f_max / f_min).log2();
    let steps = (voices as f64 * octaves - 1e-9).ceil() as usize;
    let a0 = params.frequency_to_scale(f_max);
    let scales = (0..=steps)
        .map(|j| a0 * 2f64.powf(j as f64 / voices as f64))
        .collect();
    Ok(ScaleGrid {
        scales,
        voices_per_octave: voices,
        f_min,
        f_max,
        params,
    })
}

/// `|T(a, b)|`, one row per scale of the grid, one column per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub scale_grid: ScaleGrid,
    pub sampling_rate: f64,
}

impl Scalogram {
    pub fn n_times(&self) -> usize {
        self.magnitudes.first().map_or(0, Vec::len)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_times())
            .map(|m| m as f64 / self.sampling_rate)
            .collect()
    }

    /// CSV with a header of sample times and one row per scale, led by its
    /// equivalent frequency.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "freq_hz")?;
        for t in self.times() {
            write!(out, ",{t}")?;
        }
        writeln!(out)?;
        for (f, row) in self.scale_grid.equivalent_frequencies().iter().zip(&self.magnitudes) {
            write!(out, "{f}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

/// Precomputed wavelet spectra for signals of one length and sampling rate.
pub struct CwtPlan {
    grid: ScaleGrid,
    n: usize,
    fs: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernels: Vec<Vec<Complex64>>,
}

impl CwtPlan {
    pub fn new(grid: &ScaleGrid, n: usize, fs: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument(format!("signal must have at least 2 samples, got {n}")));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Argument(format!("sampling rate must be positive, got {fs}")));
        }
        let len = 2 * n - 1;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let dt = 1.0 / fs;
        let kernels = grid
            .scales
            .iter()
            .map(|&a| {
                // g[j] = conj(psi(-j dt / a)) for j in -(n-1)..=(n-1), stored
                // circularly; the FFT scaling 1/len is folded in here.
                let scale = dt / a.sqrt() / len as f64;
                let mut g = vec![Complex64::new(0.0, 0.0); len];
                for j in -(n as isize - 1)..=(n as isize - 1) {
                    let t = -(j as f64) * dt / a;
                    g[j.rem_euclid(len as isize) as usize] = morlet_eval(&grid.params, t).conj() * scale;
                }
                forward.process(&mut g);
                g
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            n,
            fs,
            forward,
            inverse,
            kernels,
        })
    }

    pub fn signal_len(&self) -> usize {
        self.n
    }

    pub fn transform(&self, signal: &[f64]) -> Result<Scalogram> {
        if signal.len() != self.n {
            return Err(Error::Argument(format!(
                "plan built for {} samples, got {}",
                self.n,
                signal.len()
            )));
        }
        let len = 2 * self.n - 1;
        let mut spectrum: Vec<Complex64> = signal
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(len)
            .collect();
        self.forward.process(&mut spectrum);
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let magnitudes = self
            .kernels
            .iter()
            .map(|k| {
                for ((b, s), g) in buf.iter_mut().zip(&spectrum).zip(k) {
                    *b = s * g;
                }
                self.inverse.process(&mut buf);
                buf[..self.n].iter().map(|c| c.norm()).collect()
            })
            .collect();
        Ok(Scalogram {
            magnitudes,
            scale_grid: self.grid.clone(),
            sampling_rate: self.fs,
        })
    }
}

/// One-shot transform of `signal` sampled at `fs`.
pub fn cwt_transform(signal: &[f64], fs: f64, grid: &ScaleGrid) -> Result<Scalogram> {
    if signal.is_empty() {
        return Err(Error::Argument("empty signal".into()));
    }
    CwtPlan::new(grid, signal.len(), fs)?.transform(signal)
}
