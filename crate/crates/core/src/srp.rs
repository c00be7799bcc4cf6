//! SRP-PHAT baseline: frame-summed steered response power over a
//! two-pass 3D grid.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::CrossSpectrum;
use crate::edm::PositionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SrpGridConfig {
    pub room_dims: [f64; 3],
    pub coarse_step: f64,
    pub fine_step: f64,
    /// Number of coarse maxima refined on the fine grid.
    pub refine_count: usize,
    /// Half edge of the fine cube around each refined coarse point.
    pub fine_halfwidth: f64,
}

impl Default for SrpGridConfig {
    fn default() -> Self {
        Self {
            room_dims: [6.0, 6.0, 2.4],
            coarse_step: 0.10,
            fine_step: 0.01,
            refine_count: 3,
            fine_halfwidth: 0.10,
        }
    }
}

impl SrpGridConfig {
    pub fn validate(&self) -> Result<()> {
        let min_dim = self.room_dims.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_dim > 0.0) {
            return Err(Error::Config(format!(
                "room dimensions must be positive, got {:?}",
                self.room_dims
            )));
        }
        if !(self.fine_step > 0.0
            && self.fine_step <= self.coarse_step
            && self.coarse_step <= min_dim)
        {
            return Err(Error::Config(format!(
                "need 0 < fine_step ({}) <= coarse_step ({}) <= smallest room dimension",
                self.fine_step, self.coarse_step
            )));
        }
        if self.refine_count == 0 || !(self.fine_halfwidth >= 0.0) {
            return Err(Error::Config(
                "refine_count must be at least 1 and fine_halfwidth non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Grid coordinates are snapped to the nanometre so that nominally equal
/// points compare equal.
fn snap(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Inclusive grid `{0, h, 2h, …} ≤ P` along each axis.
pub fn coarse_grid(room_dims: [f64; 3], step: f64) -> Vec<[f64; 3]> {
    let axis = |len: f64| -> Vec<f64> {
        let n = (len / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| snap(i as f64 * step).min(len)).collect()
    };
    let (xs, ys, zs) = (axis(room_dims[0]), axis(room_dims[1]), axis(room_dims[2]));
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                out.push([x, y, z]);
            }
        }
    }
    out
}

/// Frame-summed cross-spectra of every microphone pair, ready for steering.
#[derive(Debug, Clone)]
pub struct SrpAccumulator {
    pairs: Vec<(usize, usize)>,
    mics: Vec<Vector3<f64>>,
    dft_len: usize,
    /// Samples per meter of path difference, `f_s/ν`.
    samples_per_meter: f64,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl SrpAccumulator {
    pub fn new(
        spectra: &[CrossSpectrum],
        mics: &PositionMatrix,
        speed_of_sound: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let m = mics.len();
        let mut seen = vec![false; m * m];
        for cs in spectra {
            let (i, j) = cs.pair();
            if i >= m || j >= m || i == j {
                return Err(Error::InvalidInput(format!(
                    "invalid pair {:?} for {m} microphones",
                    cs.pair()
                )));
            }
            let key = i.min(j) * m + i.max(j);
            if seen[key] {
                return Err(Error::InvalidInput(format!(
                    "pair {:?} given twice",
                    cs.pair()
                )));
            }
            seen[key] = true;
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if !seen[i * m + j] {
                    return Err(Error::InvalidInput(format!(
                        "missing cross-spectrum for pair ({j}, {i})"
                    )));
                }
            }
        }
        let dft_len = spectra.first().map(|c| c.dft_len()).unwrap_or(0);
        if spectra.iter().any(|c| c.dft_len() != dft_len) {
            return Err(Error::Dimension(
                "cross-spectra differ in DFT length".into(),
            ));
        }
        let mut re = Vec::with_capacity(spectra.len());
        let mut im = Vec::with_capacity(spectra.len());
        for cs in spectra {
            let sum = cs.frame_sum();
            re.push(sum.iter().map(|c| c.re).collect());
            im.push(sum.iter().map(|c| c.im).collect());
        }
        Ok(Self {
            pairs: spectra.iter().map(|c| c.pair()).collect(),
            mics: mics.points().collect(),
            dft_len,
            samples_per_meter: sample_rate / speed_of_sound,
            re,
            im,
        })
    }

    /// `Σ_l Σ_pairs Σ_k ψ[k,l] e^{j2πkτ(p)/K}` over all `K` bins.
    pub fn score(&self, p: &[f64; 3]) -> f64 {
        let p = Vector3::from(*p);
        let k_len = self.dft_len;
        let half = k_len / 2;
        let mut total = 0.0;
        for (idx, &(i, j)) in self.pairs.iter().enumerate() {
            let tau =
                ((p - self.mics[i]).norm() - (p - self.mics[j]).norm()) * self.samples_per_meter;
            let re = &self.re[idx];
            let im = &self.im[idx];
            let (s1, c1) = (2.0 * PI * tau / k_len as f64).sin_cos();
            let (mut c, mut s) = (c1, s1);
            let mut acc = 0.0;
            for k in 1..half {
                acc += re[k] * c - im[k] * s;
                let next_c = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = next_c;
            }
            total += re[0] + 2.0 * acc + re[half] * (PI * tau).cos();
        }
        total
    }
}

/// SRP-PHAT score of a single point.
pub fn srp_functional(
    p: &[f64; 3],
    spectra: &[CrossSpectrum],
    mics: &PositionMatrix,
    speed_of_sound: f64,
    sample_rate: f64,
) -> Result<f64> {
    Ok(SrpAccumulator::new(spectra, mics, speed_of_sound, sample_rate)?.score(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrpResult {
    pub position: [f64; 3],
    pub score: f64,
    /// Refined coarse points with their scores, best first.
    pub coarse_maxima: Vec<([f64; 3], f64)>,
}

/// Higher score first, then lexicographically smaller coordinates.
fn rank(a: &([f64; 3], f64), b: &([f64; 3], f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0[0].total_cmp(&b.0[0]))
        .then(a.0[1].total_cmp(&b.0[1]))
        .then(a.0[2].total_cmp(&b.0[2]))
}

fn best_of(acc: &SrpAccumulator, points: Vec<[f64; 3]>) -> Vec<([f64; 3], f64)> {
    points.into_par_iter().map(|p| (p, acc.score(&p))).collect()
}

pub fn srp_localize(acc: &SrpAccumulator, grid: &SrpGridConfig) -> Result<SrpResult> {
    grid.validate()?;
    let mut coarse = best_of(acc, coarse_grid(grid.room_dims, grid.coarse_step));
    coarse.sort_by(rank);
    coarse.truncate(grid.refine_count);

    let h = (grid.fine_halfwidth / grid.fine_step + 1e-9).floor() as i64;
    let mut fine_points: Vec<[f64; 3]> = Vec::new();
    for (c, _) in &coarse {
        let axis = |d: usize| -> Vec<f64> {
            (-h..=h)
                .map(|j| snap(c[d] + j as f64 * grid.fine_step))
                .filter(|v| *v >= -1e-12 && *v <= grid.room_dims[d] + 1e-12)
                .map(|v| v.clamp(0.0, grid.room_dims[d]))
                .collect()
        };
        let (xs, ys, zs) = (axis(0), axis(1), axis(2));
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    fine_points.push([x, y, z]);
                }
            }
        }
    }
    let mut fine = best_of(acc, fine_points);
    fine.extend(coarse.iter().copied());
    let best = fine.into_iter().min_by(rank).expect("grid is never empty");
    Ok(SrpResult {
        position: best.0,
        score: best.1,
        coarse_maxima: coarse,
    })
}

/// Ideal single-frame cross-spectra of all pairs for a known source, as
/// used when bypassing the signal front end.
pub fn ideal_cross_spectra(
    mics: &PositionMatrix,
    source: &Vector3<f64>,
    speed_of_sound: f64,
    sample_rate: f64,
    dft_len: usize,
) -> Result<Vec<CrossSpectrum>> {
    let mut out = Vec::new();
    for i in 1..mics.len() {
        for j in 0..i {
            let tau = ((source - mics.point(i)).norm() - (source - mics.point(j)).norm())
                * sample_rate
                / speed_of_sound;
            out.push(CrossSpectrum::ideal_delay((i, j), dft_len, 1, tau)?);
        }
    }
    Ok(out)
}
