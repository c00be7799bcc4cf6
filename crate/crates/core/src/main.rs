use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use serde_json::json;

use edmloc::edm::PositionMatrix;
use edmloc::experiment::{
    emit_results, read_results, run_experiment, ExperimentConfig, Method, OutputFormat,
};
use edmloc::pipeline::{edm_from_signals, srp_from_signals};
use edmloc::sim::{load_scenario, save_scenario, synthesize_scenario};
use edmloc::Error;

#[derive(Parser)]
#[command(
    name = "edmloc",
    version,
    about = "EDM and SRP-PHAT acoustic source localization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write per-microphone WAV files plus scenario.json.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Localize the source of a scenario directory.
    Localize {
        /// Directory holding scenario.json and the microphone WAV files.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the batch comparison and write raw, timing and summary tables.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Write JSON instead of CSV.
        #[arg(long, value_name = "FORMAT", default_value = "csv")]
        format: OutputFormat,
    },
    /// Print the summary of a finished experiment.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FORMAT", default_value = "csv")]
        format: OutputFormat,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (experiment) or scenario seed (simulate).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated source distances in meters.
    #[arg(long, value_delimiter = ',')]
    alpha_c: Option<Vec<f64>>,
    /// Comma-separated methods: srp-phat, edm-c1, edm-c2, ...
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated candidate counts; replaces the EDM methods.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Bypass the signal front end with ground-truth TDOAs.
    #[arg(long)]
    exact_tdoa: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn config(&self) -> edmloc::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(r) = self.reps {
            cfg.repetitions = r;
        }
        if let Some(a) = &self.alpha_c {
            cfg.alpha_c = a.clone();
        }
        if let Some(m) = &self.methods {
            cfg.methods = m.clone();
        }
        if let Some(cs) = &self.candidates {
            cfg.methods.retain(|m| !matches!(m, Method::Edm(_)));
            cfg.methods.extend(cs.iter().map(|&c| Method::Edm(c)));
        }
        if let Some(o) = &self.out_dir {
            cfg.out_dir = o.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.exact_tdoa |= self.exact_tdoa;
        Ok(cfg)
    }
}

fn simulate(common: &Common) -> edmloc::Result<()> {
    let cfg = common.config()?;
    cfg.validate()?;
    let spec = edmloc::sim::ScenarioSpec {
        seed: cfg.master_seed,
        alpha_c: cfg.alpha_c[0],
        ..cfg.scenario.clone()
    };
    let inst = synthesize_scenario(&spec, &cfg.room)?;
    let meta = save_scenario(&inst, &cfg.out_dir)?;
    println!("{}", serde_json::to_string_pretty(&meta)?);
    Ok(())
}

fn localize(input: &Path, common: &Common) -> edmloc::Result<()> {
    let mut cfg = common.config()?;
    if common.methods.is_none() && common.candidates.is_none() {
        cfg.methods = vec![Method::SrpPhat, Method::Edm(3)];
    }
    let (meta, signals) = load_scenario(input)?;
    let p = {
        let mut p = cfg.pipeline;
        p.stft.sample_rate = f64::from(meta.sample_rate);
        p.gcc.speed_of_sound = meta.speed_of_sound;
        p.alpha.speed_of_sound = meta.speed_of_sound;
        p
    };
    let mics = PositionMatrix::from_arrays(&meta.mic_positions)?;
    let truth = meta.source_position.map(Vector3::from);
    let mut out = Vec::new();
    for m in &cfg.methods {
        let (pos, extra) = match *m {
            Method::SrpPhat => {
                let r = srp_from_signals(&signals, &mics, &p)?;
                (r.position, json!({ "score": r.score }))
            }
            Method::Edm(c) => {
                let r = edm_from_signals(&signals, &mics, &p, c)?;
                (
                    r.source_position,
                    json!({
                        "alpha_hat": r.alpha_hat,
                        "cost_min": r.cost_min,
                        "chosen_combination": r.chosen_combination,
                        "diagnostics": r.diagnostics,
                    }),
                )
            }
        };
        let error = truth.map(|s| (Vector3::from(pos) - s).norm());
        out.push(json!({ "method": m, "position": pos, "error_m": error, "details": extra }));
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn experiment(common: &Common, format: OutputFormat) -> edmloc::Result<bool> {
    let cfg = common.config()?;
    let table = run_experiment(&cfg)?;
    let paths = emit_results(&table, &cfg.out_dir, format)?;
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    print_summary(&table);
    Ok(table.records.iter().any(|r| r.error_m.is_some()))
}

fn print_summary(table: &edmloc::experiment::ResultTable) {
    println!(
        "{:>8} {:>10} {:>5} {:>5} {:>10} {:>10} {:>10} {:>7}",
        "alpha_c", "method", "n", "fail", "median_m", "q25_m", "q75_m", ">0.25m"
    );
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    for s in &table.summary {
        println!(
            "{:>8.3} {:>10} {:>5} {:>5} {:>10} {:>10} {:>10} {:>7}",
            s.alpha_c,
            s.method.to_string(),
            s.scenarios,
            s.failures,
            f(s.median_m),
            f(s.q25_m),
            f(s.q75_m),
            s.gross_errors
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => simulate(common).map(|_| true),
        Command::Localize { input, common } => localize(input, common).map(|_| true),
        Command::Experiment { common, format } => experiment(common, *format),
        Command::Report { common, format } => common
            .config()
            .and_then(|cfg| read_results(&cfg.out_dir, *format))
            .map(|t| {
                print_summary(&t);
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: every run failed");
            ExitCode::from(1)
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
