//! Desk-scale scenario simulation: random array and source placement,
//! image-method room acoustics calibrated to a target DRR, speech-like
//! excitation and approximately diffuse noise at a target SNR.

pub mod io;
pub mod rir;
pub mod signals;
pub mod two_path;

use std::path::PathBuf;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::dsp::read_wav;
use crate::edm::PositionMatrix;
use crate::error::{Error, Result};
use crate::localizer::exact_tdoas;

pub use io::{load_scenario, save_scenario, ScenarioMetadata};
pub use rir::{
    calibrate_reflections, drr_db, image_method_rir, room_responses, t60_schroeder, RoomSpec,
};
pub use two_path::{two_path_scenario, TwoPathInstance};

const MAX_PLACEMENT_TRIES: usize = 100_000;

/// Independent random streams drawn from one scenario seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Geometry = 0,
    Excitation = 1,
    Noise = 2,
    Reflections = 3,
}

pub(crate) fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Excitation {
    /// Pink noise with a 4 Hz syllabic envelope.
    SyntheticSpeechlike,
    /// Mono WAV at the room sample rate, looped or cut to the duration.
    WavFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Far-field pink plane waves from random directions.
    Diffuse { sources: usize },
    /// Independent white noise per microphone.
    White,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub mic_count: usize,
    pub cube_len: f64,
    pub min_mic_spacing: f64,
    /// Source distance from the microphone centroid.
    pub alpha_c: f64,
    /// `None` disables noise.
    pub snr_db: Option<f64>,
    pub duration_s: f64,
    pub excitation: Excitation,
    pub noise: NoiseModel,
    /// Mean DRR the wall reflections are calibrated to; `None` keeps the
    /// coefficients of the room as given.
    pub target_drr_db: Option<f64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            mic_count: 6,
            cube_len: 2.0,
            min_mic_spacing: 0.02,
            alpha_c: 1.0,
            snr_db: Some(5.0),
            duration_s: 5.0,
            excitation: Excitation::SyntheticSpeechlike,
            noise: NoiseModel::Diffuse { sources: 32 },
            target_drr_db: Some(0.0),
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mic_count < 4 {
            return Err(Error::Config(format!(
                "need at least 4 microphones, got {}",
                self.mic_count
            )));
        }
        if !(self.cube_len > 0.0)
            || !(self.alpha_c >= 0.0)
            || !(self.duration_s > 0.0)
            || !(self.min_mic_spacing >= 0.0)
        {
            return Err(Error::Config(
                "cube length, alpha_c, duration and spacing must be positive".into(),
            ));
        }
        if let NoiseModel::Diffuse { sources } = self.noise {
            if sources == 0 {
                return Err(Error::Config(
                    "diffuse noise needs at least one source".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Microphones uniformly in a cube centred in the room with a minimum
/// spacing, and the source at `alpha_c` from their centroid in a uniformly
/// random direction that keeps it inside the room.
pub fn generate_geometry(
    spec: &ScenarioSpec,
    room: &RoomSpec,
) -> Result<(PositionMatrix, Vector3<f64>)> {
    spec.validate()?;
    room.validate()?;
    if room.dims.iter().any(|&d| spec.cube_len >= d) {
        return Err(Error::Placement(format!(
            "a {} m cube does not fit in the room",
            spec.cube_len
        )));
    }
    let mut rng = rng_for(spec.seed, Stream::Geometry);
    let corner = Vector3::from(room.dims) / 2.0 - Vector3::repeat(spec.cube_len / 2.0);
    let mut mics: Vec<Vector3<f64>> = Vec::with_capacity(spec.mic_count);
    let mut tries = 0;
    while mics.len() < spec.mic_count {
        tries += 1;
        if tries > MAX_PLACEMENT_TRIES {
            return Err(Error::Placement(
                "cannot satisfy the minimum microphone spacing".into(),
            ));
        }
        let p = corner
            + Vector3::new(
                rng.random_range(0.0..spec.cube_len),
                rng.random_range(0.0..spec.cube_len),
                rng.random_range(0.0..spec.cube_len),
            );
        if mics.iter().all(|m| (m - p).norm() >= spec.min_mic_spacing) {
            mics.push(p);
        }
    }
    let centroid = mics.iter().fold(Vector3::zeros(), |a, b| a + b) / mics.len() as f64;
    for _ in 0..MAX_PLACEMENT_TRIES {
        let u: [f64; 3] = UnitSphere.sample(&mut rng);
        let s = centroid + Vector3::from(u) * spec.alpha_c;
        if room.contains(&s) {
            return Ok((PositionMatrix::from_points(&mics)?, s));
        }
    }
    Err(Error::Placement(format!(
        "no source direction at {} m stays inside the room",
        spec.alpha_c
    )))
}

/// Source signal of `n` samples for the given spec.
pub fn excitation_signal(spec: &ScenarioSpec, sample_rate: f64, n: usize) -> Result<Vec<f64>> {
    match &spec.excitation {
        Excitation::SyntheticSpeechlike => Ok(signals::speechlike(
            &mut rng_for(spec.seed, Stream::Excitation),
            n,
            sample_rate,
        )),
        Excitation::WavFile { path } => {
            let x = read_wav(path, sample_rate.round() as u32)?;
            if x.is_empty() {
                return Err(Error::InvalidInput(format!("{} is empty", path.display())));
            }
            Ok(x.iter().copied().cycle().take(n).collect())
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioInstance {
    pub spec: ScenarioSpec,
    /// Room with the reflection coefficients actually used.
    pub room: RoomSpec,
    pub mic_positions: PositionMatrix,
    pub source_position: Vector3<f64>,
    pub rirs: Vec<Vec<f64>>,
    /// Reverberant source component per microphone.
    pub speech: Vec<Vec<f64>>,
    /// Scaled noise component per microphone (zeros without noise).
    pub noise: Vec<Vec<f64>>,
    pub mic_signals: Vec<Vec<f64>>,
    /// `τ_m` relative to microphone 0, seconds, for `m = 1..M`.
    pub ground_truth_tdoas: Vec<f64>,
    pub t60_s: Option<f64>,
    /// Mean DRR over microphones; `+∞` when anechoic.
    pub drr_db: f64,
}

impl ScenarioInstance {
    pub fn measured_snr_db(&self) -> Option<f64> {
        let pn = signals::mean_power(&self.noise);
        (pn > 0.0).then(|| 10.0 * (signals::mean_power(&self.speech) / pn).log10())
    }
}

pub fn synthesize_scenario(spec: &ScenarioSpec, room: &RoomSpec) -> Result<ScenarioInstance> {
    let (mic_positions, source) = generate_geometry(spec, room)?;
    let mics: Vec<Vector3<f64>> = mic_positions.points().collect();
    let (room, responses) = match spec.target_drr_db {
        Some(target) => {
            let c = calibrate_reflections(room, &source, &mics, target)?;
            (room.with_reflection(c.reflection), c.responses)
        }
        None => (*room, room_responses(room, &source, &mics)?),
    };
    let n = (spec.duration_s * room.sample_rate).round() as usize;
    let x = excitation_signal(spec, room.sample_rate, n)?;
    let speech: Vec<Vec<f64>> = responses
        .rirs
        .iter()
        .map(|h| signals::convolve(&x, h))
        .collect();

    let noise = match spec.snr_db {
        None => vec![vec![0.0; n]; mics.len()],
        Some(snr) => {
            let mut rng = rng_for(spec.seed, Stream::Noise);
            let mut noise = match spec.noise {
                NoiseModel::Diffuse { sources } => signals::diffuse_noise(
                    &mut rng,
                    &mics,
                    n,
                    sources,
                    room.speed_of_sound,
                    room.sample_rate,
                ),
                NoiseModel::White => signals::white_noise(&mut rng, mics.len(), n),
            };
            let ps = signals::mean_power(&speech);
            let pn = signals::mean_power(&noise);
            let g = (ps / (pn * 10f64.powf(snr / 10.0))).sqrt();
            noise.iter_mut().flatten().for_each(|v| *v *= g);
            noise
        }
    };
    let mic_signals = speech
        .iter()
        .zip(&noise)
        .map(|(s, v)| s.iter().zip(v).map(|(a, b)| a + b).collect())
        .collect();
    let ground_truth_tdoas = exact_tdoas(&mic_positions, &source, room.speed_of_sound);

    Ok(ScenarioInstance {
        spec: spec.clone(),
        room,
        mic_positions,
        source_position: source,
        rirs: responses.rirs.clone(),
        speech,
        noise,
        mic_signals,
        ground_truth_tdoas,
        t60_s: responses.mean_t60_s(),
        drr_db: responses.mean_drr_db(),
    })
}
