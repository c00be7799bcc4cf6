//! Localizing from exact TDOAs: the only unknown is the distance α between
//! source and reference microphone, found by a 1 mm grid search.

use edmloc::edm::PositionMatrix;
use edmloc::localizer::{exact_tdoas, localize_exact, AlphaSearchConfig};
use nalgebra::Vector3;

fn main() -> edmloc::Result<()> {
    let mics = PositionMatrix::from_arrays(&[
        [2.0, 2.0, 0.2],
        [4.0, 2.1, 0.5],
        [2.3, 3.9, 0.8],
        [3.6, 3.5, 2.2],
        [2.5, 2.7, 1.9],
        [3.1, 2.4, 1.4],
    ])?;
    let cfg = AlphaSearchConfig::default();
    for source in [
        Vector3::new(3.1, 3.3, 1.0),
        Vector3::new(4.8, 1.2, 0.4),
        Vector3::new(0.5, 5.5, 2.3),
    ] {
        let tdoas = exact_tdoas(&mics, &source, cfg.speed_of_sound);
        let r = localize_exact(&tdoas, &mics, &cfg)?;
        let est = Vector3::from(r.source_position);
        println!(
            "source {:?}: α = {:.3} (true {:.3}), J = {:.2e}, error {:.2} mm",
            source.as_slice(),
            r.alpha_hat,
            (source - mics.point(0)).norm(),
            r.cost_min,
            (est - source).norm() * 1e3
        );
    }
    Ok(())
}
