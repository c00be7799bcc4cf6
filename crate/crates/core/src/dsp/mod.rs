//! STFT analysis, GCC-PHAT and TDOA candidate extraction.

pub mod gcc;
pub mod stft;
pub mod wav;

pub use gcc::{
    extract_candidates, extract_candidates_exhaustive, gcc_time_domain, phat_cross_spectrum,
    CrossSpectrum, FrameWeighting, GccConfig, GccFunction, TdoaCandidate, TdoaCandidateSet,
};
pub use stft::{stft, Spectrogram, Stft, StftConfig, Window};
pub use wav::{read_wav, write_wav};
