//! Signal-to-position processing chains for both localizers.

use serde::{Deserialize, Serialize};

use crate::dsp::{
    extract_candidates, gcc_time_domain, phat_cross_spectrum, CrossSpectrum, GccConfig,
    Spectrogram, Stft, StftConfig, TdoaCandidateSet,
};
use crate::edm::PositionMatrix;
use crate::error::{Error, Result};
use crate::localizer::{localize, AlphaSearchConfig, LocalizationResult};
use crate::srp::{srp_localize, SrpAccumulator, SrpGridConfig, SrpResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    pub gcc: GccConfig,
    pub alpha: AlphaSearchConfig,
    pub srp: SrpGridConfig,
}

pub fn spectrograms(signals: &[Vec<f64>], cfg: &StftConfig) -> Result<Vec<Spectrogram>> {
    let analyser = Stft::new(*cfg)?;
    signals.iter().map(|x| analyser.process(x)).collect()
}

/// Up to `count` TDOA candidates for every pair `(m, 0)`, `m = 1..M`.
pub fn reference_pair_candidates(
    specs: &[Spectrogram],
    mics: &PositionMatrix,
    gcc: &GccConfig,
    sample_rate: f64,
    count: usize,
) -> Result<Vec<TdoaCandidateSet>> {
    if specs.len() != mics.len() {
        return Err(Error::Dimension(format!(
            "{} signals for {} microphones",
            specs.len(),
            mics.len()
        )));
    }
    (1..mics.len())
        .map(|m| {
            let cs = phat_cross_spectrum(&specs[m], &specs[0], (m, 0))?;
            let dist = (mics.point(m) - mics.point(0)).norm();
            extract_candidates(&gcc_time_domain(&cs, dist, sample_rate, gcc)?, count)
        })
        .collect()
}

/// Cross-spectra of all pairs `(i, j)`, `i > j`.
pub fn all_pair_spectra(specs: &[Spectrogram]) -> Result<Vec<CrossSpectrum>> {
    let mut out = Vec::with_capacity(specs.len() * specs.len().saturating_sub(1) / 2);
    for i in 1..specs.len() {
        for j in 0..i {
            out.push(phat_cross_spectrum(&specs[i], &specs[j], (i, j))?);
        }
    }
    Ok(out)
}

/// Keeps the best `count` candidates of each set.
pub fn truncate_candidates(sets: &[TdoaCandidateSet], count: usize) -> Vec<TdoaCandidateSet> {
    sets.iter()
        .map(|s| TdoaCandidateSet {
            pair: s.pair,
            candidates: s.candidates.iter().take(count).copied().collect(),
        })
        .collect()
}

pub fn edm_from_signals(
    signals: &[Vec<f64>],
    mics: &PositionMatrix,
    cfg: &PipelineConfig,
    candidates: usize,
) -> Result<LocalizationResult> {
    let specs = spectrograms(signals, &cfg.stft)?;
    let sets = reference_pair_candidates(&specs, mics, &cfg.gcc, cfg.stft.sample_rate, candidates)?;
    localize(&sets, mics, &cfg.alpha)
}

pub fn srp_from_signals(
    signals: &[Vec<f64>],
    mics: &PositionMatrix,
    cfg: &PipelineConfig,
) -> Result<SrpResult> {
    let specs = spectrograms(signals, &cfg.stft)?;
    let acc = SrpAccumulator::new(
        &all_pair_spectra(&specs)?,
        mics,
        cfg.gcc.speed_of_sound,
        cfg.stft.sample_rate,
    )?;
    srp_localize(&acc, &cfg.srp)
}
