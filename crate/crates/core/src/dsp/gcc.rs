//! Frequency-domain GCC-PHAT, band-limited time-lag evaluation and
//! multi-candidate TDOA extraction.
//!
//! The time-domain curve of one frame is the trigonometric polynomial
//!
//! ```text
//! ξ_l(t) = 1/K · Σ_{k=-K/2+1}^{K/2} ψ[k,l] e^{j2πkt/K}
//! ```
//!
//! evaluated at fractional lags `t = n/R` samples. Over the conjugate-symmetric
//! band this is real and reduces to the inverse DFT at integer lags.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::stft::Spectrogram;
use crate::error::{Error, Result};

/// Instantaneous PHAT-normalised cross-spectrum `Y_i Y_j* / |Y_i Y_j*|` for
/// each frame, stored as a half spectrum (bins `0..=K/2`).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    pair: (usize, usize),
    dft_len: usize,
    frames: usize,
    data: Vec<Complex64>,
}

/// Bins whose cross-power falls below this fraction of the frame RMS are zeroed.
pub const PHAT_MAGNITUDE_FLOOR: f64 = 1e-12;

impl CrossSpectrum {
    /// Wraps precomputed half-spectrum values (`frames × (K/2+1)`, frame-major).
    pub fn from_values(
        pair: (usize, usize),
        dft_len: usize,
        frames: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if dft_len == 0 || dft_len % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "dft_len must be even and positive, got {dft_len}"
            )));
        }
        if data.len() != frames * (dft_len / 2 + 1) {
            return Err(Error::Dimension(format!(
                "{} values for {frames} frames of {} bins",
                data.len(),
                dft_len / 2 + 1
            )));
        }
        Ok(Self {
            pair,
            dft_len,
            frames,
            data,
        })
    }

    /// Ideal cross-spectrum of a pure delay: microphone `pair.0` lags
    /// `pair.1` by `delay_samples`. The Nyquist bin is zero unless the delay
    /// is an integer number of samples.
    pub fn ideal_delay(
        pair: (usize, usize),
        dft_len: usize,
        frames: usize,
        delay_samples: f64,
    ) -> Result<Self> {
        let half = dft_len / 2;
        let mut frame: Vec<Complex64> = (0..=half)
            .map(|k| {
                Complex64::from_polar(1.0, -2.0 * PI * k as f64 * delay_samples / dft_len as f64)
            })
            .collect();
        if delay_samples.fract() != 0.0 {
            frame[half] = Complex64::new(0.0, 0.0);
        } else {
            frame[half] = Complex64::new(frame[half].re.round(), 0.0);
        }
        let data = frame
            .iter()
            .copied()
            .cycle()
            .take(frames * (half + 1))
            .collect();
        Self::from_values(pair, dft_len, frames, data)
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

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

    /// Sum of `ψ[k,l]` over frames.
    pub fn frame_sum(&self) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.num_bins()];
        for l in 0..self.frames {
            for (a, v) in acc.iter_mut().zip(self.frame(l)) {
                *a += v;
            }
        }
        acc
    }
}

pub fn phat_cross_spectrum(
    spec_i: &Spectrogram,
    spec_j: &Spectrogram,
    pair: (usize, usize),
) -> Result<CrossSpectrum> {
    if spec_i.dft_len() != spec_j.dft_len() || spec_i.num_frames() != spec_j.num_frames() {
        return Err(Error::Dimension(format!(
            "spectrogram shapes differ: {}x{} vs {}x{}",
            spec_i.dft_len(),
            spec_i.num_frames(),
            spec_j.dft_len(),
            spec_j.num_frames()
        )));
    }
    let bins = spec_i.num_bins();
    let frames = spec_i.num_frames();
    let mut data = Vec::with_capacity(bins * frames);
    let mut cross = vec![Complex64::new(0.0, 0.0); bins];
    for l in 0..frames {
        for (c, (a, b)) in cross
            .iter_mut()
            .zip(spec_i.frame(l).iter().zip(spec_j.frame(l)))
        {
            *c = a * b.conj();
        }
        let rms = (cross.iter().map(|c| c.norm_sqr()).sum::<f64>() / bins as f64).sqrt();
        let floor = PHAT_MAGNITUDE_FLOOR * rms;
        for c in &cross {
            let mag = c.norm();
            if rms == 0.0 || mag <= floor {
                data.push(Complex64::new(0.0, 0.0));
            } else {
                data.push(c / mag);
            }
        }
    }
    CrossSpectrum::from_values(pair, spec_i.dft_len(), frames, data)
}

/// How per-frame correlation curves are combined across frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FrameWeighting {
    /// Plain sum of `ξ` over frames.
    Linear,
    /// Sum of `exp(β·ξ)` over frames, emphasising strong peaks.
    Exponential { beta: f64 },
}

impl FrameWeighting {
    fn apply(self, xi: f64) -> f64 {
        match self {
            FrameWeighting::Linear => xi,
            FrameWeighting::Exponential { beta } => (beta * xi).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GccConfig {
    /// Lag-grid interpolation factor `R`.
    pub interpolation: u32,
    pub weighting: FrameWeighting,
    /// Oversampling of the FFT-based first pass; the largest divisor of
    /// `interpolation` not exceeding this value is used.
    pub coarse_factor: u32,
    pub speed_of_sound: f64,
}

impl Default for GccConfig {
    fn default() -> Self {
        Self {
            interpolation: 720,
            weighting: FrameWeighting::Exponential { beta: 15.0 },
            coarse_factor: 16,
            speed_of_sound: 343.0,
        }
    }
}

/// Frame-aggregated, weighted GCC-PHAT curve for one microphone pair on the
/// lag grid `n / (f_s·R)` seconds, `|n| ≤ lag_bound()`.
///
/// Only a coarse FFT pass is materialised; any lag of the fine grid can be
/// evaluated exactly on demand.
#[derive(Debug, Clone)]
pub struct GccFunction {
    pair: (usize, usize),
    sample_rate: f64,
    dft_len: usize,
    interpolation: i64,
    weighting: FrameWeighting,
    max_lag: i64,
    coarse_step: i64,
    coarse: Vec<f64>,
    frames: usize,
    /// Per frame: ψ for bins `0..=K/2`, split into real and imaginary parts.
    psi_re: Vec<f64>,
    psi_im: Vec<f64>,
}

pub fn gcc_time_domain(
    cs: &CrossSpectrum,
    mic_distance: f64,
    sample_rate: f64,
    cfg: &GccConfig,
) -> Result<GccFunction> {
    if cfg.interpolation == 0 {
        return Err(Error::InvalidInput(
            "interpolation factor must be at least 1".into(),
        ));
    }
    if !(mic_distance > 0.0) || !(sample_rate > 0.0) || !(cfg.speed_of_sound > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need positive mic distance, sample rate and speed of sound (got {mic_distance}, {sample_rate}, {})",
            cfg.speed_of_sound
        )));
    }
    if cs.num_frames() == 0 {
        return Err(Error::InvalidInput("cross-spectrum has no frames".into()));
    }
    let r = cfg.interpolation as i64;
    let limit = mic_distance * sample_rate * r as f64 / cfg.speed_of_sound;
    let max_lag = (limit.ceil() as i64 - 1).max(0);
    let half = cs.dft_len / 2;
    if max_lag >= half as i64 * r {
        return Err(Error::InvalidInput(format!(
            "lag bound of {:.1} samples exceeds half the DFT length",
            max_lag as f64 / r as f64
        )));
    }
    let coarse_factor = (1..=cfg.coarse_factor.max(1) as i64)
        .rev()
        .find(|d| r % d == 0)
        .unwrap_or(1);

    let mut psi_re = Vec::with_capacity(cs.data.len());
    let mut psi_im = Vec::with_capacity(cs.data.len());
    for c in &cs.data {
        psi_re.push(c.re);
        psi_im.push(c.im);
    }
    let mut f = GccFunction {
        pair: cs.pair,
        sample_rate,
        dft_len: cs.dft_len,
        interpolation: r,
        weighting: cfg.weighting,
        max_lag,
        coarse_step: r / coarse_factor,
        coarse: Vec::new(),
        frames: cs.frames,
        psi_re,
        psi_im,
    };
    f.coarse = f.coarse_pass(cs, coarse_factor as usize);
    Ok(f)
}

impl GccFunction {
    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn interpolation(&self) -> i64 {
        self.interpolation
    }

    /// Largest admissible `|n|` on the fine grid.
    pub fn lag_bound(&self) -> i64 {
        self.max_lag
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn lag_to_seconds(&self, n: i64) -> f64 {
        n as f64 / (self.sample_rate * self.interpolation as f64)
    }

    /// Fine-grid spacing of the coarse pass.
    pub fn coarse_step(&self) -> i64 {
        self.coarse_step
    }

    /// Coarse-pass lags and aggregated values.
    pub fn coarse_curve(&self) -> (Vec<i64>, &[f64]) {
        let j = self.max_lag / self.coarse_step;
        (
            (-j..=j).map(|i| i * self.coarse_step).collect(),
            &self.coarse,
        )
    }

    pub fn value_at(&self, n: i64) -> f64 {
        self.evaluate_range(n, 1)[0]
    }

    /// Aggregated weighted values at fine lags `start..start+len`.
    pub fn evaluate_range(&self, start: i64, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        let mut per_frame = vec![0.0; len];
        for l in 0..self.frames {
            self.frame_values_into(l, start, &mut per_frame);
            for (o, xi) in out.iter_mut().zip(&per_frame) {
                *o += self.weighting.apply(*xi);
            }
        }
        out
    }

    /// Unweighted single-frame curve `ξ_l` at fine lags `start..start+len`.
    pub fn frame_values(&self, l: usize, start: i64, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        self.frame_values_into(l, start, &mut out);
        out
    }

    /// The full fine grid, evaluated directly. Expensive for large `R`.
    pub fn dense(&self) -> (Vec<i64>, Vec<f64>) {
        let lags: Vec<i64> = (-self.max_lag..=self.max_lag).collect();
        let mut values = Vec::with_capacity(lags.len());
        let mut start = -self.max_lag;
        while start <= self.max_lag {
            let len = (self.max_lag - start + 1).min(512) as usize;
            values.extend(self.evaluate_range(start, len));
            start += len as i64;
        }
        (lags, values)
    }

    fn phase(&self, k: usize, n: i64) -> (f64, f64) {
        // exact reduction of k·n modulo K·R keeps the angle accurate for large n
        let period = self.dft_len as i64 * self.interpolation;
        let idx = (k as i64 * n).rem_euclid(period);
        let angle = 2.0 * PI * idx as f64 / period as f64;
        let (s, c) = angle.sin_cos();
        (c, s)
    }

    fn frame_values_into(&self, l: usize, start: i64, out: &mut [f64]) {
        let bins = self.dft_len / 2 + 1;
        let half = self.dft_len / 2;
        let re = &self.psi_re[l * bins..(l + 1) * bins];
        let im = &self.psi_im[l * bins..(l + 1) * bins];
        let inv_k = 1.0 / self.dft_len as f64;
        let mut a_re = vec![0.0; half.saturating_sub(1)];
        let mut a_im = vec![0.0; half.saturating_sub(1)];
        let mut s_re = Vec::with_capacity(half);
        let mut s_im = Vec::with_capacity(half);
        for k in 1..half {
            let (c1, s1) = self.phase(k, 1);
            s_re.push(c1);
            s_im.push(s1);
        }
        // a_k = ψ_k · e^{jθ_k·n}, rotated by e^{jθ_k} per step and re-anchored
        // at absolute multiples of ANCHOR so a value never depends on `start`
        let first = start - start.rem_euclid(ANCHOR);
        let end = start + out.len() as i64;
        let mut n = first;
        while n < end {
            if n.rem_euclid(ANCHOR) == 0 {
                for (idx, k) in (1..half).enumerate() {
                    let (c, s) = self.phase(k, n);
                    a_re[idx] = re[k] * c - im[k] * s;
                    a_im[idx] = re[k] * s + im[k] * c;
                }
            }
            if n >= start {
                let acc: f64 = a_re.iter().sum();
                let nyq = re[half] * (PI * n as f64 / self.interpolation as f64).cos();
                out[(n - start) as usize] = (re[0] + 2.0 * acc + nyq) * inv_k;
            }
            for idx in 0..a_re.len() {
                let r = a_re[idx] * s_re[idx] - a_im[idx] * s_im[idx];
                let m = a_re[idx] * s_im[idx] + a_im[idx] * s_re[idx];
                a_re[idx] = r;
                a_im[idx] = m;
            }
            n += 1;
        }
    }

    fn coarse_pass(&self, cs: &CrossSpectrum, factor: usize) -> Vec<f64> {
        let k = self.dft_len;
        let half = k / 2;
        let n = k * factor;
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let j = (self.max_lag / self.coarse_step) as usize;
        let mut out = vec![0.0; 2 * j + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let inv_k = 1.0 / k as f64;
        for l in 0..cs.frames {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            let frame = cs.frame(l);
            buf[0] = Complex64::new(frame[0].re, 0.0);
            for b in 1..half {
                buf[b] = frame[b];
                buf[n - b] = frame[b].conj();
            }
            if factor == 1 {
                buf[half] = Complex64::new(frame[half].re, 0.0);
            } else {
                buf[half] = Complex64::new(0.5 * frame[half].re, 0.0);
                buf[n - half] = Complex64::new(0.5 * frame[half].re, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (i, o) in out.iter_mut().enumerate() {
                let m = i as i64 - j as i64;
                let xi = buf[m.rem_euclid(n as i64) as usize].re * inv_k;
                *o += self.weighting.apply(xi);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdoaCandidate {
    /// Seconds; positive when the first microphone of the pair hears the
    /// source later than the second.
    pub delay: f64,
    /// Fine-grid lag index.
    pub lag: i64,
    pub score: f64,
}

/// Up to `C` candidate delays for one pair, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdoaCandidateSet {
    pub pair: (usize, usize),
    pub candidates: Vec<TdoaCandidate>,
}

impl TdoaCandidateSet {
    /// A set holding one exactly known delay.
    pub fn single(pair: (usize, usize), delay: f64) -> Self {
        Self {
            pair,
            candidates: vec![TdoaCandidate {
                delay,
                lag: 0,
                score: 1.0,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.delay).collect()
    }
}

const ANCHOR: i64 = 32;

/// Local maxima within this many fine-grid steps of a higher one are dropped.
pub const MIN_PEAK_SEPARATION: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Peak {
    lag: i64,
    value: f64,
}

/// Ranking: higher value, then smaller |lag|, then smaller lag.
fn better(a: &Peak, b: &Peak) -> std::cmp::Ordering {
    b.value
        .total_cmp(&a.value)
        .then(a.lag.abs().cmp(&b.lag.abs()))
        .then(a.lag.cmp(&b.lag))
}

/// Local maxima of a sampled curve. A plateau counts once, at its element
/// with the smallest |lag|. End points count when they exceed their single
/// neighbour, so the top-ranked peak always equals the global maximum.
fn local_maxima(lags: &[i64], values: &[f64]) -> Vec<Peak> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut a = 0;
    while a < n {
        let mut b = a;
        while b + 1 < n && values[b + 1] == values[a] {
            b += 1;
        }
        let left_ok = a == 0 || values[a - 1] < values[a];
        let right_ok = b == n - 1 || values[b + 1] < values[b];
        let whole = a == 0 && b == n - 1;
        if left_ok && right_ok && !whole {
            let best = (a..=b).min_by_key(|&i| (lags[i].abs(), lags[i])).unwrap();
            peaks.push(Peak {
                lag: lags[best],
                value: values[best],
            });
        }
        a = b + 1;
    }
    if peaks.is_empty() && n > 0 {
        let best = (0..n)
            .map(|i| Peak {
                lag: lags[i],
                value: values[i],
            })
            .min_by(better)
            .unwrap();
        peaks.push(best);
    }
    peaks
}

fn select(mut peaks: Vec<Peak>, count: usize) -> Vec<Peak> {
    peaks.sort_by(better);
    let mut kept: Vec<Peak> = Vec::new();
    for p in peaks {
        if kept
            .iter()
            .all(|k| (k.lag - p.lag).abs() > MIN_PEAK_SEPARATION)
        {
            kept.push(p);
        }
    }
    kept.truncate(count);
    kept
}

fn to_set(gcc: &GccFunction, peaks: Vec<Peak>) -> TdoaCandidateSet {
    TdoaCandidateSet {
        pair: gcc.pair,
        candidates: peaks
            .into_iter()
            .map(|p| TdoaCandidate {
                delay: gcc.lag_to_seconds(p.lag),
                lag: p.lag,
                score: p.value,
            })
            .collect(),
    }
}

/// The `count` highest local peaks of the aggregated curve, best first.
///
/// Peaks are located on the coarse pass and then refined on the fine grid by
/// direct evaluation. With `count = 1` the result is the global maximum.
pub fn extract_candidates(gcc: &GccFunction, count: usize) -> Result<TdoaCandidateSet> {
    if count == 0 {
        return Err(Error::InvalidInput(
            "candidate count must be at least 1".into(),
        ));
    }
    let (lags, values) = gcc.coarse_curve();
    let mut coarse = local_maxima(&lags, values);
    if gcc.coarse_step == 1 {
        return Ok(to_set(gcc, select(coarse, count)));
    }
    coarse.sort_by(better);

    let mut refined: Vec<Peak> = Vec::new();
    for (i, cp) in coarse.iter().enumerate() {
        if i >= count + 3 {
            let kept = select(refined.clone(), count);
            if kept.len() == count && cp.value < 0.8 * kept[count - 1].value {
                break;
            }
        }
        refined.push(refine_peak(gcc, cp.lag));
    }
    Ok(to_set(gcc, select(refined, count)))
}

/// Same selection rule on the fully evaluated fine grid; reference path for
/// checking the two-stage search.
pub fn extract_candidates_exhaustive(gcc: &GccFunction, count: usize) -> Result<TdoaCandidateSet> {
    if count == 0 {
        return Err(Error::InvalidInput(
            "candidate count must be at least 1".into(),
        ));
    }
    let (lags, values) = gcc.dense();
    Ok(to_set(gcc, select(local_maxima(&lags, &values), count)))
}

fn refine_peak(gcc: &GccFunction, centre: i64) -> Peak {
    let bound = gcc.max_lag;
    let step = gcc.coarse_step;
    let mut lo = (centre - step).max(-bound);
    let mut hi = (centre + step).min(bound);
    for _ in 0..32 {
        let vals = gcc.evaluate_range(lo, (hi - lo + 1) as usize);
        let best = (0..vals.len())
            .map(|i| Peak {
                lag: lo + i as i64,
                value: vals[i],
            })
            .min_by(better)
            .unwrap();
        let at_low_edge = best.lag == lo && lo > -bound;
        let at_high_edge = best.lag == hi && hi < bound;
        if !(at_low_edge || at_high_edge) {
            return best;
        }
        lo = (best.lag - step).max(-bound);
        hi = (best.lag + step).min(bound);
    }
    Peak {
        lag: centre,
        value: gcc.value_at(centre),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft::{stft, StftConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Circular band-limited fractional delay through the DFT.
    fn delayed(x: &[f64], d: f64) -> Vec<f64> {
        let n = x.len();
        let mut planner = FftPlanner::new();
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        planner.plan_fft_forward(n).process(&mut buf);
        for (k, b) in buf.iter_mut().enumerate() {
            let f = if k <= n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            };
            *b *= Complex64::from_polar(1.0, -2.0 * PI * f * d / n as f64);
        }
        if n % 2 == 0 {
            buf[n / 2] = Complex64::new(0.0, 0.0);
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }

    fn cfg_r(r: u32) -> GccConfig {
        GccConfig {
            interpolation: r,
            ..GccConfig::default()
        }
    }

    #[test]
    fn phat_identical_signals_is_one() {
        let x = white(1, 4000);
        let spec = stft(&x, &StftConfig::default()).unwrap();
        let cs = phat_cross_spectrum(&spec, &spec, (0, 0)).unwrap();
        for l in 0..cs.num_frames() {
            for c in cs.frame(l) {
                assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn phat_unit_magnitude_and_zero_guard() {
        let mut x = white(2, 4000);
        for v in &mut x[..1024] {
            *v = 0.0;
        }
        let y = white(3, 4000);
        let cfg = StftConfig::default();
        let cs = phat_cross_spectrum(&stft(&x, &cfg).unwrap(), &stft(&y, &cfg).unwrap(), (1, 0))
            .unwrap();
        for c in cs.frame(0) {
            assert_eq!(c.norm(), 0.0);
        }
        for l in 0..cs.num_frames() {
            for c in cs.frame(l) {
                let m = c.norm();
                assert!(m == 0.0 || (m - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn phat_dimension_mismatch() {
        let cfg = StftConfig::default();
        let a = stft(&white(1, 4000), &cfg).unwrap();
        let b = stft(&white(1, 3000), &cfg).unwrap();
        assert!(matches!(
            phat_cross_spectrum(&a, &b, (1, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn phat_recovers_integer_phase_ramp() {
        // circular setup: one rectangular frame of length K with x_i = x_j shifted by n0
        let k = 64;
        let n0 = 5;
        let x = white(4, k);
        let xi: Vec<f64> = (0..k).map(|n| x[(n + k - n0) % k]).collect();
        let cfg = StftConfig {
            frame_len: k,
            dft_len: k,
            hop: k,
            window: crate::dsp::Window::Rectangular,
            sample_rate: 16_000.0,
        };
        let cs = phat_cross_spectrum(&stft(&xi, &cfg).unwrap(), &stft(&x, &cfg).unwrap(), (1, 0))
            .unwrap();
        for (b, c) in cs.frame(0).iter().enumerate() {
            let expect = Complex64::from_polar(1.0, -2.0 * PI * (b * n0) as f64 / k as f64);
            assert!((c - expect).norm() < 1e-9, "bin {b}");
        }
    }

    #[test]
    fn identical_signals_peak_at_zero() {
        let cs = CrossSpectrum::ideal_delay((1, 0), 1024, 3, 0.0).unwrap();
        let g = gcc_time_domain(&cs, 1.0, 16_000.0, &cfg_r(8)).unwrap();
        let set = extract_candidates(&g, 1).unwrap();
        assert_eq!(set.candidates[0].lag, 0);
    }

    #[test]
    fn fractional_delay_at_r4() {
        let cs = CrossSpectrum::ideal_delay((1, 0), 1024, 2, 3.25).unwrap();
        let g = gcc_time_domain(&cs, 0.5, 16_000.0, &cfg_r(4)).unwrap();
        let set = extract_candidates(&g, 1).unwrap();
        assert_eq!(set.candidates[0].lag, 13);

        // same through the STFT of a band-limited delayed noise signal
        let x = white(5, 16_000);
        let y = delayed(&x, 3.25);
        let cfg = StftConfig::default();
        let cs = phat_cross_spectrum(&stft(&y, &cfg).unwrap(), &stft(&x, &cfg).unwrap(), (1, 0))
            .unwrap();
        let g = gcc_time_domain(&cs, 0.5, 16_000.0, &cfg_r(4)).unwrap();
        assert_eq!(extract_candidates(&g, 1).unwrap().candidates[0].lag, 13);
    }

    #[test]
    fn two_identical_frames_double_the_weighted_curve() {
        let one = CrossSpectrum::ideal_delay((1, 0), 256, 1, 1.7).unwrap();
        let two = CrossSpectrum::ideal_delay((1, 0), 256, 2, 1.7).unwrap();
        let cfg = cfg_r(6);
        let g1 = gcc_time_domain(&one, 0.3, 16_000.0, &cfg).unwrap();
        let g2 = gcc_time_domain(&two, 0.3, 16_000.0, &cfg).unwrap();
        let (_, v1) = g1.dense();
        let (_, v2) = g2.dense();
        let xi = g1.frame_values(0, -g1.lag_bound(), v1.len());
        for ((a, b), x) in v1.iter().zip(&v2).zip(&xi) {
            assert!((b - 2.0 * a).abs() <= 1e-12 * b.abs());
            assert!((a - (15.0 * x).exp()).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn integer_lags_match_inverse_dft() {
        let x = white(6, 3000);
        let y = white(7, 3000);
        let cfg = StftConfig {
            frame_len: 128,
            dft_len: 256,
            hop: 64,
            ..StftConfig::default()
        };
        let cs = phat_cross_spectrum(&stft(&y, &cfg).unwrap(), &stft(&x, &cfg).unwrap(), (1, 0))
            .unwrap();
        let r = 5;
        let g = gcc_time_domain(
            &cs,
            2.0,
            16_000.0,
            &GccConfig {
                interpolation: r,
                weighting: FrameWeighting::Linear,
                ..GccConfig::default()
            },
        )
        .unwrap();
        let k = cs.dft_len();
        for l in [0, 3] {
            for n in -20i64..=20 {
                // literal inverse DFT over all K bins at integer lag n
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..k {
                    let psi = if b <= k / 2 {
                        cs.frame(l)[b]
                    } else {
                        cs.frame(l)[k - b].conj()
                    };
                    acc += psi
                        * Complex64::from_polar(1.0, 2.0 * PI * (b as i64 * n) as f64 / k as f64);
                }
                let ours = g.frame_values(l, n * r as i64, 1)[0];
                assert!((ours - acc.re / k as f64).abs() < 1e-12, "l={l} n={n}");
                assert!(acc.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coarse_pass_matches_direct_evaluation() {
        let x = white(8, 6000);
        let y = delayed(&x, -2.6);
        let cfg = StftConfig::default();
        let cs = phat_cross_spectrum(&stft(&y, &cfg).unwrap(), &stft(&x, &cfg).unwrap(), (2, 0))
            .unwrap();
        let g = gcc_time_domain(&cs, 0.4, 16_000.0, &GccConfig::default()).unwrap();
        let (lags, coarse) = g.coarse_curve();
        for (lag, v) in lags.iter().zip(coarse).step_by(7) {
            let direct = g.value_at(*lag);
            assert!(
                (direct - v).abs() <= 1e-9 * direct.abs().max(1.0),
                "lag {lag}: {direct} vs {v}"
            );
        }
    }

    #[test]
    fn lag_bound_is_strict() {
        let cs = CrossSpectrum::ideal_delay((1, 0), 1024, 1, 0.0).unwrap();
        for (d, r) in [(0.35, 2u32), (0.2, 720), (1.0, 7), (0.05, 1)] {
            let g = gcc_time_domain(&cs, d, 16_000.0, &cfg_r(r)).unwrap();
            let limit = d * 16_000.0 * r as f64 / 343.0;
            assert!((g.lag_bound() as f64) < limit);
            assert!((g.lag_bound() + 1) as f64 >= limit);
            assert!(g.lag_to_seconds(g.lag_bound()) < d / 343.0);
        }
    }

    #[test]
    fn gcc_errors() {
        let cs = CrossSpectrum::ideal_delay((1, 0), 64, 1, 0.0).unwrap();
        assert!(gcc_time_domain(&cs, 0.1, 16_000.0, &cfg_r(0)).is_err());
        assert!(gcc_time_domain(&cs, 0.0, 16_000.0, &cfg_r(4)).is_err());
        let empty = CrossSpectrum::from_values((1, 0), 64, 0, vec![]).unwrap();
        assert!(gcc_time_domain(&empty, 0.1, 16_000.0, &cfg_r(4)).is_err());
    }

    #[test]
    fn peak_picking_rules() {
        let lags: Vec<i64> = (0..14).collect();
        let vals = [
            0.0, 5.0, 0.0, 0.0, 4.0, 0.0, 0.0, 3.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
        ];
        let picked = select(local_maxima(&lags, &vals), 3);
        assert_eq!(
            picked.iter().map(|p| p.value).collect::<Vec<_>>(),
            vec![5.0, 4.0, 3.0]
        );
        // unimodal curve yields a single candidate regardless of the count
        let uni = [0.0, 1.0, 2.0, 3.0, 2.0, 1.0];
        assert_eq!(select(local_maxima(&lags[..6], &uni), 4).len(), 1);
        // plateau reported once at smallest |lag|
        let lags2: Vec<i64> = (-3..=3).collect();
        let plat = [0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0];
        let p = local_maxima(&lags2, &plat);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].lag, 0);
        // neighbouring maxima closer than the separation merge into the higher one
        let lags3: Vec<i64> = (0..5).collect();
        let close = [0.0, 3.0, 2.9, 3.1, 0.0];
        let p = select(local_maxima(&lags3, &close), 3);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].lag, 3);
        // monotone curve: the boundary maximum is the candidate
        let mono = [0.0, 1.0, 2.0, 3.0];
        let p = select(local_maxima(&lags[..4], &mono), 2);
        assert_eq!(p[0].lag, 3);
        // flat curve: global maximum with smallest |lag|
        let p = local_maxima(&lags2, &[1.0; 7]);
        assert_eq!(p, vec![Peak { lag: 0, value: 1.0 }]);
    }

    #[test]
    fn two_stage_matches_exhaustive() {
        for (seed, d) in [(10u64, 1.37), (11, -4.81), (12, 0.05)] {
            let x = white(seed, 8000);
            let mut y = delayed(&x, d);
            // a weaker echo creates secondary peaks
            let echo = delayed(&x, d + 3.4);
            for (a, b) in y.iter_mut().zip(&echo) {
                *a += 0.6 * b;
            }
            let cfg = StftConfig::default();
            let cs =
                phat_cross_spectrum(&stft(&y, &cfg).unwrap(), &stft(&x, &cfg).unwrap(), (1, 0))
                    .unwrap();
            for r in [48u32, 720] {
                let g = gcc_time_domain(&cs, 0.25, 16_000.0, &cfg_r(r)).unwrap();
                let slow = extract_candidates_exhaustive(&g, 3).unwrap();
                for c in 1..=3 {
                    let fast = extract_candidates(&g, c).unwrap();
                    assert_eq!(
                        fast.candidates[..],
                        slow.candidates[..c.min(slow.len())],
                        "seed {seed} R {r} C {c}"
                    );
                }
            }
        }
    }

    #[test]
    fn c1_equals_argmax() {
        let x = white(20, 8000);
        let y = delayed(&x, 2.2);
        let cfg = StftConfig::default();
        let cs = phat_cross_spectrum(&stft(&y, &cfg).unwrap(), &stft(&x, &cfg).unwrap(), (1, 0))
            .unwrap();
        let g = gcc_time_domain(&cs, 0.2, 16_000.0, &cfg_r(24)).unwrap();
        let (lags, vals) = g.dense();
        let arg = (0..vals.len())
            .map(|i| Peak {
                lag: lags[i],
                value: vals[i],
            })
            .min_by(better)
            .unwrap();
        assert_eq!(
            extract_candidates(&g, 1).unwrap().candidates[0].lag,
            arg.lag
        );
    }
}
