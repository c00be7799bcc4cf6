//! Shoebox image-method impulse responses and their energy measures.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Taps of the windowed-sinc interpolation kernel.
pub const KERNEL_TAPS: usize = 81;
/// Every impulse response starts this many samples before the emission time
/// so the direct-path kernel is never cut off. Delays are shifted equally on
/// every channel, which leaves all TDOAs unchanged.
pub const RIR_LEAD: usize = KERNEL_TAPS / 2;
/// Half width of the direct-path window used for the DRR.
pub const DRR_DIRECT_WINDOW_S: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoomSpec {
    pub dims: [f64; 3],
    /// Walls at `x = 0, x = P_x, y = 0, y = P_y, z = 0, z = P_z`.
    pub reflection_coeffs: [f64; 6],
    /// Reflections per axis.
    pub max_image_order: u32,
    /// Images weaker than the direct path by more than this are skipped.
    pub energy_floor_db: f64,
    pub speed_of_sound: f64,
    pub sample_rate: f64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            dims: [6.0, 6.0, 2.4],
            reflection_coeffs: [0.0; 6],
            max_image_order: 10,
            energy_floor_db: -60.0,
            speed_of_sound: 343.0,
            sample_rate: 16_000.0,
        }
    }
}

impl RoomSpec {
    pub fn with_reflection(mut self, beta: f64) -> Self {
        self.reflection_coeffs = [beta; 6];
        self
    }

    pub fn diagonal(&self) -> f64 {
        Vector3::from(self.dims).norm()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config(format!(
                "room dimensions must be positive, got {:?}",
                self.dims
            )));
        }
        if self
            .reflection_coeffs
            .iter()
            .any(|b| !(0.0..=1.0).contains(b))
        {
            return Err(Error::Config(format!(
                "reflection coefficients must lie in [0, 1], got {:?}",
                self.reflection_coeffs
            )));
        }
        if !(self.speed_of_sound > 0.0) || !(self.sample_rate > 0.0) {
            return Err(Error::Config(
                "speed of sound and sample rate must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] > 0.0 && p[i] < self.dims[i])
    }

    /// Impulse-response length that holds every image up to the order limit.
    pub fn rir_length(&self) -> usize {
        let n = self.max_image_order as f64 + 1.0;
        let far = Vector3::new(n * self.dims[0], n * self.dims[1], n * self.dims[2]).norm();
        (far / self.speed_of_sound * self.sample_rate).ceil() as usize + KERNEL_TAPS
    }

    /// Emission-to-arrival delay of the direct path in samples, including
    /// [`RIR_LEAD`].
    pub fn direct_index(&self, src: &Vector3<f64>, mic: &Vector3<f64>) -> f64 {
        RIR_LEAD as f64 + (src - mic).norm() / self.speed_of_sound * self.sample_rate
    }
}

/// A mirror image of the source: position and the product of the
/// reflection coefficients along its path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Vector3<f64>,
    pub gain: f64,
    pub order: u32,
}

/// Image coordinates along one axis: `(coordinate, gain, reflections)`.
fn axis_images(s: f64, len: f64, beta_lo: f64, beta_hi: f64, order: u32) -> Vec<(f64, f64, u32)> {
    let n_max = order as i64;
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        for q in 0..=1i64 {
            let lo = (n - q).unsigned_abs() as u32;
            let hi = n.unsigned_abs() as u32;
            if lo + hi > order {
                continue;
            }
            let coord = (1 - 2 * q) as f64 * s + 2.0 * n as f64 * len;
            out.push((
                coord,
                beta_lo.powi(lo as i32) * beta_hi.powi(hi as i32),
                lo + hi,
            ));
        }
    }
    out
}

/// All image sources up to the per-axis order limit.
pub fn image_sources(room: &RoomSpec, src: &Vector3<f64>) -> Vec<ImageSource> {
    let b = room.reflection_coeffs;
    let o = room.max_image_order;
    let xs = axis_images(src.x, room.dims[0], b[0], b[1], o);
    let ys = axis_images(src.y, room.dims[1], b[2], b[3], o);
    let zs = axis_images(src.z, room.dims[2], b[4], b[5], o);
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &(x, gx, ox) in &xs {
        for &(y, gy, oy) in &ys {
            for &(z, gz, oz) in &zs {
                out.push(ImageSource {
                    position: Vector3::new(x, y, z),
                    gain: gx * gy * gz,
                    order: ox + oy + oz,
                });
            }
        }
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Adds `amp·δ(n − t)` through the Hann-windowed sinc kernel.
pub fn add_fractional_impulse(h: &mut [f64], t: f64, amp: f64) {
    let half = KERNEL_TAPS as f64 / 2.0;
    let lo = (t - half).ceil().max(0.0) as usize;
    let hi = (t + half).floor();
    if hi < 0.0 {
        return;
    }
    let hi = (hi as usize).min(h.len().saturating_sub(1));
    for (n, slot) in h.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let x = n as f64 - t;
        let w = 0.5 * (1.0 + (2.0 * PI * x / KERNEL_TAPS as f64).cos());
        *slot += amp * w * sinc(x);
    }
}

/// Impulse response from `src` to `mic`, sample `n` ↔ time `(n − RIR_LEAD)/f_s`.
pub fn image_method_rir(
    room: &RoomSpec,
    src: &Vector3<f64>,
    mic: &Vector3<f64>,
    length: usize,
) -> Result<Vec<f64>> {
    room.validate()?;
    if !room.contains(src) {
        return Err(Error::OutsideRoom([src.x, src.y, src.z]));
    }
    if !room.contains(mic) {
        return Err(Error::OutsideRoom([mic.x, mic.y, mic.z]));
    }
    Ok(rir_from_images(
        room,
        &image_sources(room, src),
        mic,
        length,
    ))
}

pub(crate) fn rir_from_images(
    room: &RoomSpec,
    images: &[ImageSource],
    mic: &Vector3<f64>,
    length: usize,
) -> Vec<f64> {
    rir_parts(room, images, mic, length).0
}

/// Full response and its reflected-only part.
fn rir_parts(
    room: &RoomSpec,
    images: &[ImageSource],
    mic: &Vector3<f64>,
    length: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut h = vec![0.0; length];
    let mut reflected = vec![0.0; length];
    let scale = room.sample_rate / room.speed_of_sound;
    let direct = images
        .iter()
        .find(|im| im.order == 0)
        .map(|im| (im.position - mic).norm())
        .unwrap_or(1.0);
    let floor = 10f64.powf(room.energy_floor_db / 20.0) / (4.0 * PI * direct);
    for im in images {
        if im.gain == 0.0 {
            continue;
        }
        let r = (im.position - mic).norm();
        let amp = im.gain / (4.0 * PI * r);
        if amp < floor {
            continue;
        }
        let t = RIR_LEAD as f64 + r * scale;
        add_fractional_impulse(&mut h, t, amp);
        if im.order > 0 {
            add_fractional_impulse(&mut reflected, t, amp);
        }
    }
    (h, reflected)
}

/// Direct-to-reverberant ratio in dB: energy of `h` within `±1 ms` of
/// `direct_index` against the energy of the reflected part outside that
/// window. `+∞` without reflections.
pub fn drr_db(h: &[f64], reflected: &[f64], direct_index: f64, sample_rate: f64) -> f64 {
    let w = DRR_DIRECT_WINDOW_S * sample_rate;
    let (mut direct, mut rest) = (0.0, 0.0);
    for (n, (v, r)) in h.iter().zip(reflected).enumerate() {
        if (n as f64 - direct_index).abs() <= w {
            direct += v * v;
        } else {
            rest += r * r;
        }
    }
    if rest == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (direct / rest).log10()
    }
}

/// Reverberation time from the Schroeder decay curve, extrapolated from a
/// straight-line fit between −5 and −25 dB. `None` if the curve never
/// falls to −25 dB.
pub fn t60_schroeder(h: &[f64], sample_rate: f64) -> Option<f64> {
    let mut edc = vec![0.0; h.len()];
    let mut acc = 0.0;
    for (i, v) in h.iter().enumerate().rev() {
        acc += v * v;
        edc[i] = acc;
    }
    if acc == 0.0 {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / acc).log10()).collect();
    let start = db.iter().position(|&d| d <= -5.0)?;
    let end = db.iter().position(|&d| d <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    let n = (end - start + 1) as f64;
    let (mut st, mut sd, mut stt, mut std) = (0.0, 0.0, 0.0, 0.0);
    for i in start..=end {
        let t = i as f64 / sample_rate;
        st += t;
        sd += db[i];
        stt += t * t;
        std += t * db[i];
    }
    let slope = (n * std - st * sd) / (n * stt - st * st);
    (slope < 0.0).then(|| -60.0 / slope)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomResponses {
    pub rirs: Vec<Vec<f64>>,
    /// Per microphone DRR in dB.
    pub drr_db: Vec<f64>,
    /// Per microphone T60 in seconds, if measurable.
    pub t60_s: Vec<Option<f64>>,
}

impl RoomResponses {
    pub fn mean_drr_db(&self) -> f64 {
        self.drr_db.iter().sum::<f64>() / self.drr_db.len() as f64
    }

    /// Mean over the microphones with a measurable decay.
    pub fn mean_t60_s(&self) -> Option<f64> {
        let v: Vec<f64> = self.t60_s.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn room_responses(
    room: &RoomSpec,
    src: &Vector3<f64>,
    mics: &[Vector3<f64>],
) -> Result<RoomResponses> {
    room.validate()?;
    for p in mics.iter().chain(std::iter::once(src)) {
        if !room.contains(p) {
            return Err(Error::OutsideRoom([p.x, p.y, p.z]));
        }
    }
    let images = image_sources(room, src);
    let len = room.rir_length();
    let mut rirs = Vec::with_capacity(mics.len());
    let mut drr = Vec::with_capacity(mics.len());
    for m in mics {
        let (h, reflected) = rir_parts(room, &images, m, len);
        drr.push(drr_db(
            &h,
            &reflected,
            room.direct_index(src, m),
            room.sample_rate,
        ));
        rirs.push(h);
    }
    let t60 = rirs
        .iter()
        .map(|h| t60_schroeder(h, room.sample_rate))
        .collect();
    Ok(RoomResponses {
        rirs,
        drr_db: drr,
        t60_s: t60,
    })
}

/// Upper end of the coefficient search.
pub const MAX_REFLECTION: f64 = 0.99;
const CALIBRATION_TOL_DB: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub reflection: f64,
    pub responses: RoomResponses,
}

/// Bisection on a common wall reflection coefficient until the mean DRR
/// over the microphones meets `target_drr_db`.
pub fn calibrate_reflections(
    room: &RoomSpec,
    src: &Vector3<f64>,
    mics: &[Vector3<f64>],
    target_drr_db: f64,
) -> Result<Calibration> {
    let eval = |beta: f64| room_responses(&room.with_reflection(beta), src, mics);
    let top = eval(MAX_REFLECTION)?;
    if top.mean_drr_db() > target_drr_db + CALIBRATION_TOL_DB {
        return Err(Error::Calibration(format!(
            "mean DRR is still {:.2} dB at reflection coefficient {MAX_REFLECTION}",
            top.mean_drr_db()
        )));
    }
    let (mut lo, mut hi) = (0.0, MAX_REFLECTION);
    let mut best = (MAX_REFLECTION, top);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let r = eval(mid)?;
        let drr = r.mean_drr_db();
        if (drr - target_drr_db).abs() < (best.1.mean_drr_db() - target_drr_db).abs() {
            best = (mid, r);
        }
        if (best.1.mean_drr_db() - target_drr_db).abs() < 0.01 {
            break;
        }
        if drr > target_drr_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.1.mean_drr_db() - target_drr_db).abs() > CALIBRATION_TOL_DB {
        return Err(Error::Calibration(format!(
            "closest mean DRR {:.2} dB misses the {target_drr_db} dB target",
            best.1.mean_drr_db()
        )));
    }
    Ok(Calibration {
        reflection: best.0,
        responses: best.1,
    })
}
