use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Periodic square-root Hann.
    SqrtHann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::SqrtHann => (0..len)
                .map(|n| {
                    (0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                        .max(0.0)
                        .sqrt()
                })
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub frame_len: usize,
    /// DFT length `K`; frames are zero-padded up to it.
    pub dft_len: usize,
    pub hop: usize,
    pub window: Window,
    pub sample_rate: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 512,
            dft_len: 1024,
            hop: 256,
            window: Window::SqrtHann,
            sample_rate: 16_000.0,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.frame_len || self.frame_len > self.dft_len {
            return Err(Error::Config(format!(
                "STFT needs 0 < hop ({}) <= frame_len ({}) <= dft_len ({})",
                self.hop, self.frame_len, self.dft_len
            )));
        }
        if self.dft_len % 2 != 0 {
            return Err(Error::Config(format!(
                "dft_len must be even, got {}",
                self.dft_len
            )));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// Bins stored per frame (`K/2 + 1`, DC through Nyquist).
    pub fn num_bins(&self) -> usize {
        self.dft_len / 2 + 1
    }

    pub fn num_frames(&self, signal_len: usize) -> usize {
        if signal_len < self.frame_len {
            0
        } else {
            (signal_len - self.frame_len) / self.hop + 1
        }
    }
}

/// Half-spectrum STFT of a real signal: bins `0..=K/2` for each frame. The
/// remaining bins follow from conjugate symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    dft_len: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    pub fn num_bins(&self) -> usize {
        self.dft_len / 2 + 1
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn frame(&self, l: usize) -> &[Complex64] {
        let b = self.num_bins();
        &self.data[l * b..(l + 1) * b]
    }

    /// Bin `k` in `0..K` of frame `l`, using conjugate symmetry above `K/2`.
    pub fn bin(&self, k: usize, l: usize) -> Complex64 {
        let half = self.dft_len / 2;
        if k <= half {
            self.frame(l)[k]
        } else {
            self.frame(l)[self.dft_len - k].conj()
        }
    }
}

/// Reusable STFT analyser (window and FFT plan computed once).
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.dft_len);
        Ok(Self {
            window: cfg.window.coefficients(cfg.frame_len),
            cfg,
            fft,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn process(&self, signal: &[f64]) -> Result<Spectrogram> {
        let cfg = &self.cfg;
        if signal.len() < cfg.frame_len {
            return Err(Error::SignalTooShort {
                len: signal.len(),
                need: cfg.frame_len,
            });
        }
        let frames = cfg.num_frames(signal.len());
        let bins = cfg.num_bins();
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.dft_len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for l in 0..frames {
            let start = l * cfg.hop;
            for (n, slot) in buf.iter_mut().enumerate() {
                *slot = if n < cfg.frame_len {
                    Complex64::new(signal[start + n] * self.window[n], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..bins]);
        }
        Ok(Spectrogram {
            dft_len: cfg.dft_len,
            frames,
            data,
        })
    }
}

pub fn stft(signal: &[f64], cfg: &StftConfig) -> Result<Spectrogram> {
    Stft::new(*cfg)?.process(signal)
}
