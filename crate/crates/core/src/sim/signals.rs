//! Excitation and noise signals, and FFT convolution.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use rustfft::FftPlanner;

/// Lowest frequency shaped by the pink spectrum; bins below are held flat.
const PINK_CORNER_HZ: f64 = 50.0;
/// Syllable rate of the amplitude envelope.
const SYLLABIC_RATE_HZ: f64 = 4.0;

fn white<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / rms);
    }
}

/// Spectrum of white Gaussian noise shaped to `1/f` power, unit RMS, DC removed.
fn pink_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize, sample_rate: f64) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = white(rng, n)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        if kk == 0 {
            *b = Complex64::new(0.0, 0.0);
            continue;
        }
        let f = (kk as f64 * sample_rate / n as f64).max(PINK_CORNER_HZ);
        *b /= f.sqrt();
    }
    buf
}

fn inverse_real(mut spec: Vec<Complex64>) -> Vec<f64> {
    let n = spec.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

/// Pink noise with unit RMS.
pub fn pink_noise<R: Rng + ?Sized>(rng: &mut R, n: usize, sample_rate: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut x = inverse_real(pink_spectrum(rng, n, sample_rate));
    normalize_rms(&mut x, 1.0);
    x
}

/// Pink noise under a 4 Hz syllabic envelope with short pauses, RMS 0.1.
pub fn speechlike<R: Rng + ?Sized>(rng: &mut R, n: usize, sample_rate: f64) -> Vec<f64> {
    let mut x = pink_noise(rng, n, sample_rate);
    let phase: f64 = rng.random_range(0.0..2.0 * PI);
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / sample_rate;
        let env = 0.5 * (1.0 - (2.0 * PI * SYLLABIC_RATE_HZ * t + phase).cos());
        *v *= 0.05 + 0.95 * env * env;
    }
    normalize_rms(&mut x, 0.1);
    x
}

/// Linear convolution truncated to `x.len()` samples.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    let mut b: Vec<Complex64> = h
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    a.iter().take(x.len()).map(|c| c.re / n as f64).collect()
}

/// Approximately diffuse noise: `sources` independent pink plane waves from
/// uniformly random directions, each delayed per microphone by its
/// projection onto the arrival direction (circular fractional delay).
pub fn diffuse_noise<R: Rng + ?Sized>(
    rng: &mut R,
    mics: &[Vector3<f64>],
    n: usize,
    sources: usize,
    speed_of_sound: f64,
    sample_rate: f64,
) -> Vec<Vec<f64>> {
    let centre = mics.iter().fold(Vector3::zeros(), |a, b| a + b) / mics.len() as f64;
    let mut acc = vec![vec![Complex64::new(0.0, 0.0); n]; mics.len()];
    let gain = 1.0 / (sources as f64).sqrt();
    for _ in 0..sources {
        let dir: [f64; 3] = UnitSphere.sample(rng);
        let u = Vector3::from(dir);
        let spec = pink_spectrum(rng, n, sample_rate);
        for (m, mic) in mics.iter().enumerate() {
            // a wave arriving from direction u reaches mics further along u first
            let delay = -u.dot(&(mic - centre)) / speed_of_sound * sample_rate;
            for (k, (a, s)) in acc[m].iter_mut().zip(&spec).enumerate() {
                let f = if k <= n / 2 {
                    k as f64
                } else {
                    k as f64 - n as f64
                };
                let ph = -2.0 * PI * f * delay / n as f64;
                *a += s * Complex64::from_polar(gain, ph);
            }
            if n % 2 == 0 {
                acc[m][n / 2] = Complex64::new(0.0, 0.0);
            }
        }
    }
    acc.into_iter().map(inverse_real).collect()
}

/// Independent white Gaussian noise per microphone.
pub fn white_noise<R: Rng + ?Sized>(rng: &mut R, channels: usize, n: usize) -> Vec<Vec<f64>> {
    (0..channels).map(|_| white(rng, n)).collect()
}

pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// Mean over channels of the per-channel power.
pub fn mean_power(channels: &[Vec<f64>]) -> f64 {
    channels.iter().map(|c| power(c)).sum::<f64>() / channels.len().max(1) as f64
}
