//! Samples J(α) for exact TDOAs and writes it as CSV to stdout. The curve
//! vanishes at the true α and grows away from it.

use edmloc::edm::PositionMatrix;
use edmloc::localizer::{exact_tdoas, AlphaSearchConfig, CostEvaluator};
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
    let source = Vector3::new(3.3, 3.5, 1.8);
    let alpha_s = (source - mics.point(0)).norm();
    let cfg = AlphaSearchConfig {
        resolution: 0.01,
        ..AlphaSearchConfig::default()
    };
    let tdoas = exact_tdoas(&mics, &source, cfg.speed_of_sound);
    let eval = CostEvaluator::new(&mics, cfg.speed_of_sound)?;

    eprintln!(
        "true α = {alpha_s:.4} m, J(α_s) = {:.3e}",
        eval.cost(alpha_s, &tdoas)?
    );
    println!("alpha_m,cost");
    for (a, j) in eval.cost_curve(&tdoas, &cfg)? {
        if j.is_finite() {
            println!("{a:.3},{j:.6e}");
        }
    }
    Ok(())
}
