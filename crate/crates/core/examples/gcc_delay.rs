//! GCC-PHAT with interpolation on a pair of simulated signals related by a
//! fractional delay.

use edmloc::dsp::{
    extract_candidates, gcc_time_domain, phat_cross_spectrum, stft, GccConfig, StftConfig,
};
use edmloc::sim::rir::{add_fractional_impulse, RIR_LEAD};
use edmloc::sim::signals::{convolve, pink_noise};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> edmloc::Result<()> {
    let fs = 16_000.0;
    let x = pink_noise(&mut ChaCha8Rng::seed_from_u64(7), 16_000, fs);
    let cfg = StftConfig::default();
    let gcc_cfg = GccConfig::default();
    for delay in [-3.7, 0.25, 2.0, 4.9] {
        // shift x by `delay` samples with a windowed-sinc kernel
        let mut h = vec![0.0; 2 * RIR_LEAD + 16];
        add_fractional_impulse(&mut h, RIR_LEAD as f64 + delay, 1.0);
        let mut h0 = vec![0.0; 2 * RIR_LEAD + 16];
        add_fractional_impulse(&mut h0, RIR_LEAD as f64, 1.0);
        let a = stft(&convolve(&x, &h), &cfg)?;
        let b = stft(&convolve(&x, &h0), &cfg)?;
        let cs = phat_cross_spectrum(&a, &b, (1, 0))?;
        let g = gcc_time_domain(&cs, 0.5, fs, &gcc_cfg)?;
        let c = extract_candidates(&g, 3)?;
        let est = c.candidates[0].delay * fs;
        println!(
            "true {delay:+.4} samples, estimate {est:+.4} (error {:.4}, one fine step = {:.4})",
            est - delay,
            1.0 / gcc_cfg.interpolation as f64
        );
    }
    Ok(())
}
