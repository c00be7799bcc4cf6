//! A small batch comparison in exact-TDOA mode, written as CSV and read back.

use edmloc::experiment::{
    emit_results, read_results, run_experiment, ExperimentConfig, OutputFormat,
};

fn main() -> edmloc::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        master_seed = 3
        repetitions = 5
        alpha_c = [0.5, 2.0]
        methods = ["edm-c1", "srp-phat"]
        exact_tdoa = true
        out_dir = "experiment_out"
        "#,
    )?;
    let table = run_experiment(&cfg)?;
    for p in emit_results(&table, &cfg.out_dir, OutputFormat::Csv)? {
        println!("wrote {}", p.display());
    }
    let back = read_results(&cfg.out_dir, OutputFormat::Csv)?;
    for s in &back.summary {
        println!(
            "α_c {:.1} m  {:<9} median {:.6} m  q75 {:.6} m  >25 cm: {}",
            s.alpha_c,
            s.method.to_string(),
            s.median_m.unwrap_or(f64::NAN),
            s.q75_m.unwrap_or(f64::NAN),
            s.gross_errors
        );
    }
    Ok(())
}
