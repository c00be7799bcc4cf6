//! Scenario directories: one mono float WAV per microphone plus a JSON
//! metadata document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioInstance;
use crate::dsp::{read_wav, write_wav};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const METADATA_FILE: &str = "scenario.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomMetadata {
    pub dims: [f64; 3],
    pub reflection_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetadata {
    pub format_version: u32,
    pub seed: u64,
    pub sample_rate: u32,
    pub speed_of_sound: f64,
    pub room: RoomMetadata,
    pub mic_positions: Vec<[f64; 3]>,
    /// Absent for recordings without ground truth.
    pub source_position: Option<[f64; 3]>,
    pub alpha_c: Option<f64>,
    /// `null` when no noise was added.
    pub snr_db: Option<f64>,
    pub t60_s: Option<f64>,
    /// `null` when anechoic.
    pub drr_db: Option<f64>,
    /// Relative to the first microphone.
    pub ground_truth_tdoas_s: Option<Vec<f64>>,
    /// WAV files relative to the scenario directory, in microphone order.
    pub mic_files: Vec<String>,
}

impl ScenarioMetadata {
    pub fn from_instance(inst: &ScenarioInstance) -> Self {
        let s = inst.source_position;
        Self {
            format_version: FORMAT_VERSION,
            seed: inst.spec.seed,
            sample_rate: inst.room.sample_rate.round() as u32,
            speed_of_sound: inst.room.speed_of_sound,
            room: RoomMetadata {
                dims: inst.room.dims,
                reflection_coefficient: inst.room.reflection_coeffs[0],
            },
            mic_positions: inst.mic_positions.to_arrays(),
            source_position: Some([s.x, s.y, s.z]),
            alpha_c: Some(inst.spec.alpha_c),
            snr_db: inst.spec.snr_db,
            t60_s: inst.t60_s,
            drr_db: inst.drr_db.is_finite().then_some(inst.drr_db),
            ground_truth_tdoas_s: Some(inst.ground_truth_tdoas.clone()),
            mic_files: (1..=inst.mic_signals.len())
                .map(|m| format!("mic{m:02}.wav"))
                .collect(),
        }
    }
}

pub fn save_scenario(inst: &ScenarioInstance, dir: impl AsRef<Path>) -> Result<ScenarioMetadata> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = ScenarioMetadata::from_instance(inst);
    for (file, x) in meta.mic_files.iter().zip(&inst.mic_signals) {
        write_wav(dir.join(file), x, meta.sample_rate)?;
    }
    fs::write(
        dir.join(METADATA_FILE),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(meta)
}

/// Metadata and microphone signals of a scenario directory.
pub fn load_scenario(dir: impl AsRef<Path>) -> Result<(ScenarioMetadata, Vec<Vec<f64>>)> {
    let dir = dir.as_ref();
    let meta: ScenarioMetadata =
        serde_json::from_str(&fs::read_to_string(dir.join(METADATA_FILE))?)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported scenario format version {}",
            meta.format_version
        )));
    }
    if meta.mic_files.len() != meta.mic_positions.len() {
        return Err(Error::Config(format!(
            "{} microphone files for {} positions",
            meta.mic_files.len(),
            meta.mic_positions.len()
        )));
    }
    let signals = meta
        .mic_files
        .iter()
        .map(|f| read_wav(dir.join(f), meta.sample_rate))
        .collect::<Result<Vec<_>>>()?;
    if signals.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(Error::Config("microphone files differ in length".into()));
    }
    Ok((meta, signals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{synthesize_scenario, RoomSpec, ScenarioSpec};

    #[test]
    fn round_trip() {
        let spec = ScenarioSpec {
            seed: 11,
            duration_s: 0.5,
            ..ScenarioSpec::default()
        };
        let inst = synthesize_scenario(&spec, &RoomSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let meta = save_scenario(&inst, dir.path()).unwrap();
        assert_eq!(meta.mic_files[0], "mic01.wav");
        let (back, signals) = load_scenario(dir.path()).unwrap();
        assert_eq!(back, meta);
        assert_eq!(signals.len(), 6);
        for (a, b) in signals.iter().zip(&inst.mic_signals) {
            assert!(a.iter().zip(b).all(|(x, y)| *x == *y as f32 as f64));
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let meta = ScenarioMetadata {
            format_version: 99,
            seed: 0,
            sample_rate: 16_000,
            speed_of_sound: 343.0,
            room: RoomMetadata {
                dims: [6.0, 6.0, 2.4],
                reflection_coefficient: 0.0,
            },
            mic_positions: vec![],
            source_position: None,
            alpha_c: None,
            snr_db: None,
            t60_s: None,
            drr_db: None,
            ground_truth_tdoas_s: None,
            mic_files: vec![],
        };
        fs::write(
            dir.path().join(METADATA_FILE),
            serde_json::to_string(&meta).unwrap(),
        )
        .unwrap();
        assert!(matches!(load_scenario(dir.path()), Err(Error::Config(_))));
    }
}
