//! Direct path plus one strong specular reflection per microphone.
//!
//! The reflector is a plane close to the source, so the reflected arrival
//! trails the direct one by at most a few decimetres of path. Its strength
//! varies per microphone: most microphones see a weak echo, a few see an
//! echo stronger than the direct sound (as with a partly shadowed direct
//! path). Pairs involving a strong-echo microphone then have a GCC peak at a
//! mixed direct/reflected delay that outranks the true TDOA.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use super::rir::{add_fractional_impulse, RIR_LEAD};
use super::{generate_geometry, rng_for, signals, RoomSpec, ScenarioSpec, Stream};
use crate::edm::PositionMatrix;
use crate::error::Result;
use crate::localizer::exact_tdoas;

/// Probability that a microphone receives an echo stronger than the direct path.
pub const STRONG_ECHO_PROBABILITY: f64 = 0.3;
const STRONG_GAIN: (f64, f64) = (1.3, 2.0);
const WEAK_GAIN: (f64, f64) = (0.2, 0.6);
const REFLECTOR_DISTANCE: (f64, f64) = (0.08, 0.25);

#[derive(Debug, Clone)]
pub struct TwoPathInstance {
    pub mic_positions: PositionMatrix,
    pub source_position: Vector3<f64>,
    /// Mirror image of the source in the reflector.
    pub image_position: Vector3<f64>,
    /// Echo amplitude relative to the direct path, per microphone.
    pub echo_gains: Vec<f64>,
    pub mic_signals: Vec<Vec<f64>>,
    pub ground_truth_tdoas: Vec<f64>,
}

/// Uses the geometry of `spec` (seed, α_c, array) and ignores its room
/// acoustics and noise settings.
pub fn two_path_scenario(spec: &ScenarioSpec, room: &RoomSpec) -> Result<TwoPathInstance> {
    let (mic_positions, source) = generate_geometry(spec, room)?;
    let mut rng = rng_for(spec.seed, Stream::Reflections);
    let normal = Vector3::from(UnitSphere.sample(&mut rng) as [f64; 3]);
    let h = rng.random_range(REFLECTOR_DISTANCE.0..REFLECTOR_DISTANCE.1);
    let image = source + normal * (2.0 * h);
    let echo_gains: Vec<f64> = (0..mic_positions.len())
        .map(|_| {
            let (lo, hi) = if rng.random_bool(STRONG_ECHO_PROBABILITY) {
                STRONG_GAIN
            } else {
                WEAK_GAIN
            };
            rng.random_range(lo..hi)
        })
        .collect();

    let fs = room.sample_rate;
    let scale = fs / room.speed_of_sound;
    let n = (spec.duration_s * fs).round() as usize;
    let x = signals::speechlike(&mut rng_for(spec.seed, Stream::Excitation), n, fs);
    let mic_signals = mic_positions
        .points()
        .zip(&echo_gains)
        .map(|(m, &g)| {
            let d = (source - m).norm();
            let r = (image - m).norm();
            let mut rir = vec![0.0; RIR_LEAD + ((d.max(r)) * scale).ceil() as usize + RIR_LEAD + 2];
            let amp = 1.0 / (4.0 * PI * d);
            add_fractional_impulse(&mut rir, RIR_LEAD as f64 + d * scale, amp);
            add_fractional_impulse(&mut rir, RIR_LEAD as f64 + r * scale, g * amp);
            signals::convolve(&x, &rir)
        })
        .collect();
    let ground_truth_tdoas = exact_tdoas(&mic_positions, &source, room.speed_of_sound);
    Ok(TwoPathInstance {
        mic_positions,
        source_position: source,
        image_position: image,
        echo_gains,
        mic_signals,
        ground_truth_tdoas,
    })
}
