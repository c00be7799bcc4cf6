//! Batch comparison of the EDM localizer and SRP-PHAT over simulated scenes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::TdoaCandidateSet;
use crate::edm::PositionMatrix;
use crate::error::{Error, Result};
use crate::localizer::{exact_tdoas, localize, localize_exact, LocalizationResult};
use crate::pipeline::{
    all_pair_spectra, reference_pair_candidates, spectrograms, truncate_candidates, PipelineConfig,
};
use crate::sim::{
    generate_geometry, synthesize_scenario, two_path_scenario, RoomSpec, ScenarioSpec,
};
use crate::srp::{ideal_cross_spectra, srp_localize, SrpAccumulator, SrpResult};

/// Errors above this count as gross failures in the summary.
pub const GROSS_ERROR_M: f64 = 0.25;

pub const RAW_FILE: &str = "raw_results";
pub const TIMINGS_FILE: &str = "timings";
pub const SUMMARY_FILE: &str = "summary";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    SrpPhat,
    /// EDM localizer with `C` candidates per pair.
    Edm(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::SrpPhat => f.write_str("srp-phat"),
            Method::Edm(c) => write!(f, "edm-c{c}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "srp-phat" || t == "srp" {
            return Ok(Method::SrpPhat);
        }
        t.strip_prefix("edm-c")
            .and_then(|c| c.parse::<usize>().ok())
            .filter(|&c| c >= 1)
            .map(Method::Edm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?} (expected srp-phat or edm-cN)"
                ))
            })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// Image-method room with calibrated reflections and noise.
    #[default]
    Room,
    /// Direct path plus one specular echo, noise-free.
    TwoPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub repetitions: usize,
    pub alpha_c: Vec<f64>,
    pub methods: Vec<Method>,
    /// Feed ground-truth TDOAs (EDM) or ideal cross-spectra (SRP) to the
    /// localizers instead of simulated signals.
    pub exact_tdoa: bool,
    pub scene: SceneKind,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Template for every scenario; `seed` and `alpha_c` are overwritten.
    pub scenario: ScenarioSpec,
    pub room: RoomSpec,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            repetitions: 20,
            alpha_c: vec![0.5, 1.0, 2.0],
            methods: vec![
                Method::SrpPhat,
                Method::Edm(1),
                Method::Edm(2),
                Method::Edm(3),
            ],
            exact_tdoa: false,
            scene: SceneKind::Room,
            threads: 0,
            out_dir: PathBuf::from("results"),
            scenario: ScenarioSpec::default(),
            room: RoomSpec::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.alpha_c.is_empty() || self.alpha_c.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config(
                "alpha_c must be a nonempty list of nonnegative distances".into(),
            ));
        }
        if self.methods.contains(&Method::Edm(0)) {
            return Err(Error::Config("EDM needs at least one candidate".into()));
        }
        self.scenario.validate()?;
        self.room.validate()?;
        self.pipeline.stft.validate()?;
        self.pipeline.alpha.validate()?;
        self.pipeline.srp.validate()
    }

    pub fn scenario_count(&self) -> usize {
        self.alpha_c.len() * self.repetitions
    }

    /// Scenario `id` covers distance `alpha_c[id / repetitions]`.
    pub fn scenario(&self, id: usize) -> ScenarioSpec {
        ScenarioSpec {
            seed: scenario_seed(self.master_seed, id as u64),
            alpha_c: self.alpha_c[id / self.repetitions],
            ..self.scenario.clone()
        }
    }
}

/// SplitMix64 finalizer over `(master, id)`.
pub fn scenario_seed(master: u64, id: u64) -> u64 {
    let mut z = master.wrapping_add(id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Round-trips through the fixed 6-decimal text form used in the output files.
fn q(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.6}").parse().unwrap_or(x)
    } else {
        x
    }
}

fn qe(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.6e}").parse().unwrap_or(x)
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub scenario_id: usize,
    pub alpha_c: f64,
    pub repetition: usize,
    pub seed: u64,
    pub method: Method,
    /// `‖s − ŝ‖` in meters; `None` if the method failed.
    pub error_m: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub estimate: Option<[f64; 3]>,
    /// `None` only when the scene itself could not be generated.
    pub source: Option<[f64; 3]>,
    pub alpha_true: Option<f64>,
    /// Minimum of `J` (EDM) or maximum steered power (SRP).
    pub objective: Option<f64>,
    pub combinations: Option<usize>,
    pub at_alpha_boundary: Option<bool>,
    pub eigenvalues_clamped: Option<bool>,
    pub degenerate_array: Option<bool>,
    pub t60_s: Option<f64>,
    pub drr_db: Option<f64>,
    pub failure: Option<String>,
    /// Method-specific time, excluding the shared signal front end.
    pub runtime_ms: f64,
    /// STFT and GCC time shared by all methods of the scenario.
    pub frontend_ms: f64,
}

impl ErrorRecord {
    fn quantized(mut self) -> Self {
        self.alpha_c = q(self.alpha_c);
        self.error_m = self.error_m.map(q);
        self.alpha_hat = self.alpha_hat.map(q);
        self.estimate = self.estimate.map(|p| p.map(q));
        self.source = self.source.map(|p| p.map(q));
        self.alpha_true = self.alpha_true.map(q);
        self.objective = self.objective.map(qe);
        self.t60_s = self.t60_s.map(q);
        self.drr_db = self.drr_db.map(|d| if d.is_finite() { q(d) } else { d });
        self.runtime_ms = q(self.runtime_ms);
        self.frontend_ms = q(self.frontend_ms);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub alpha_c: f64,
    pub method: Method,
    pub scenarios: usize,
    pub failures: usize,
    pub median_m: Option<f64>,
    pub q25_m: Option<f64>,
    pub q75_m: Option<f64>,
    pub min_m: Option<f64>,
    pub max_m: Option<f64>,
    /// Successful runs with error above [`GROSS_ERROR_M`].
    pub gross_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// Sorted by scenario id, then method.
    pub records: Vec<ErrorRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Lower median: element `⌈n/2⌉ − 1` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Element `⌈p·n⌉ − 1` of the sorted values (nearest rank).
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    Some(v[k])
}

/// Per `(α_c, method)` statistics, ordered by `α_c` then method.
pub fn summarize(records: &[ErrorRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, Method)> = records.iter().map(|r| (r.alpha_c, r.method)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(a, m)| {
            let cell: Vec<&ErrorRecord> = records
                .iter()
                .filter(|r| r.alpha_c == a && r.method == m)
                .collect();
            let errs: Vec<f64> = cell.iter().filter_map(|r| r.error_m).collect();
            SummaryRow {
                alpha_c: a,
                method: m,
                scenarios: cell.len(),
                failures: cell.len() - errs.len(),
                median_m: lower_median(&errs),
                q25_m: quantile(&errs, 0.25),
                q75_m: quantile(&errs, 0.75),
                min_m: errs.iter().copied().min_by(f64::total_cmp),
                max_m: errs.iter().copied().max_by(f64::total_cmp),
                gross_errors: errs.iter().filter(|&&e| e > GROSS_ERROR_M).count(),
            }
        })
        .collect()
}

/// Everything a method needs about one scene.
struct Scene {
    mics: PositionMatrix,
    source: Vector3<f64>,
    t60_s: Option<f64>,
    drr_db: Option<f64>,
    inputs: SceneInputs,
}

enum SceneInputs {
    Exact {
        tdoas: Vec<f64>,
    },
    Signals {
        candidates: Option<Vec<TdoaCandidateSet>>,
        srp: Option<SrpAccumulator>,
    },
}

fn prepare(cfg: &ExperimentConfig, spec: &ScenarioSpec) -> Result<(Scene, f64)> {
    let p = &cfg.pipeline;
    let nu = p.gcc.speed_of_sound;
    if cfg.exact_tdoa {
        let (mics, source) = generate_geometry(spec, &cfg.room)?;
        let tdoas = exact_tdoas(&mics, &source, nu);
        return Ok((
            Scene {
                mics,
                source,
                t60_s: None,
                drr_db: None,
                inputs: SceneInputs::Exact { tdoas },
            },
            0.0,
        ));
    }
    let (mics, source, signals, t60_s, drr_db) = match cfg.scene {
        SceneKind::Room => {
            let s = synthesize_scenario(spec, &cfg.room)?;
            (
                s.mic_positions,
                s.source_position,
                s.mic_signals,
                s.t60_s,
                Some(s.drr_db),
            )
        }
        SceneKind::TwoPath => {
            let s = two_path_scenario(spec, &cfg.room)?;
            (
                s.mic_positions,
                s.source_position,
                s.mic_signals,
                None,
                None,
            )
        }
    };
    let start = Instant::now();
    let specs = spectrograms(&signals, &p.stft)?;
    let max_c = cfg
        .methods
        .iter()
        .filter_map(|m| {
            if let Method::Edm(c) = m {
                Some(*c)
            } else {
                None
            }
        })
        .max();
    let candidates = match max_c {
        Some(c) => Some(reference_pair_candidates(
            &specs,
            &mics,
            &p.gcc,
            p.stft.sample_rate,
            c,
        )?),
        None => None,
    };
    let srp = if cfg.methods.contains(&Method::SrpPhat) {
        Some(SrpAccumulator::new(
            &all_pair_spectra(&specs)?,
            &mics,
            nu,
            p.stft.sample_rate,
        )?)
    } else {
        None
    };
    let frontend_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((
        Scene {
            mics,
            source,
            t60_s,
            drr_db,
            inputs: SceneInputs::Signals { candidates, srp },
        },
        frontend_ms,
    ))
}

enum Outcome {
    Edm(LocalizationResult),
    Srp(SrpResult),
}

fn run_method(cfg: &ExperimentConfig, scene: &Scene, method: Method) -> Result<Outcome> {
    let p = &cfg.pipeline;
    match (method, &scene.inputs) {
        (Method::Edm(_), SceneInputs::Exact { tdoas }) => {
            Ok(Outcome::Edm(localize_exact(tdoas, &scene.mics, &p.alpha)?))
        }
        (
            Method::Edm(c),
            SceneInputs::Signals {
                candidates: Some(sets),
                ..
            },
        ) => Ok(Outcome::Edm(localize(
            &truncate_candidates(sets, c),
            &scene.mics,
            &p.alpha,
        )?)),
        (Method::SrpPhat, SceneInputs::Exact { .. }) => {
            let spectra = ideal_cross_spectra(
                &scene.mics,
                &scene.source,
                p.gcc.speed_of_sound,
                p.stft.sample_rate,
                p.stft.dft_len,
            )?;
            let acc = SrpAccumulator::new(
                &spectra,
                &scene.mics,
                p.gcc.speed_of_sound,
                p.stft.sample_rate,
            )?;
            Ok(Outcome::Srp(srp_localize(&acc, &p.srp)?))
        }
        (Method::SrpPhat, SceneInputs::Signals { srp: Some(acc), .. }) => {
            Ok(Outcome::Srp(srp_localize(acc, &p.srp)?))
        }
        _ => unreachable!("scene inputs are prepared for every configured method"),
    }
}

fn run_scenario(cfg: &ExperimentConfig, id: usize) -> Vec<ErrorRecord> {
    let spec = cfg.scenario(id);
    let base = |method: Method| ErrorRecord {
        scenario_id: id,
        alpha_c: spec.alpha_c,
        repetition: id % cfg.repetitions,
        seed: spec.seed,
        method,
        error_m: None,
        alpha_hat: None,
        estimate: None,
        source: None,
        alpha_true: None,
        objective: None,
        combinations: None,
        at_alpha_boundary: None,
        eigenvalues_clamped: None,
        degenerate_array: None,
        t60_s: None,
        drr_db: None,
        failure: None,
        runtime_ms: 0.0,
        frontend_ms: 0.0,
    };
    let (scene, frontend_ms) = match prepare(cfg, &spec) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("scenario {id}: {e}");
            return cfg
                .methods
                .iter()
                .map(|&m| {
                    ErrorRecord {
                        failure: Some(e.to_string()),
                        ..base(m)
                    }
                    .quantized()
                })
                .collect();
        }
    };
    let source = Some([scene.source.x, scene.source.y, scene.source.z]);
    let alpha_true = Some((scene.source - scene.mics.point(0)).norm());
    cfg.methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let outcome = run_method(cfg, &scene, m);
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut r = ErrorRecord {
                source,
                alpha_true,
                t60_s: scene.t60_s,
                drr_db: scene.drr_db,
                runtime_ms,
                frontend_ms,
                ..base(m)
            };
            match outcome {
                Ok(Outcome::Edm(l)) => {
                    r.error_m = Some((Vector3::from(l.source_position) - scene.source).norm());
                    r.alpha_hat = Some(l.alpha_hat);
                    r.estimate = Some(l.source_position);
                    r.objective = Some(l.cost_min);
                    r.combinations = Some(l.diagnostics.combinations_evaluated);
                    r.at_alpha_boundary = Some(l.diagnostics.at_alpha_boundary);
                    r.eigenvalues_clamped = Some(l.diagnostics.eigenvalues_clamped);
                    r.degenerate_array = Some(l.diagnostics.degenerate_array);
                }
                Ok(Outcome::Srp(s)) => {
                    let est = Vector3::from(s.position);
                    r.error_m = Some((est - scene.source).norm());
                    r.alpha_hat = Some((est - scene.mics.point(0)).norm());
                    r.estimate = Some(s.position);
                    r.objective = Some(s.score);
                }
                Err(e) => {
                    log::warn!("scenario {id}, {m}: {e}");
                    r.failure = Some(e.to_string());
                }
            }
            r.quantized()
        })
        .collect()
}

/// Runs every `(scenario, method)` cell. Per-scenario failures are recorded;
/// only configuration errors abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let n = cfg.scenario_count();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut records: Vec<ErrorRecord> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|id| run_scenario(cfg, id))
            .collect()
    });
    records.sort_by(|a, b| {
        a.scenario_id
            .cmp(&b.scenario_id)
            .then(a.method.cmp(&b.method))
    });
    let summary = summarize(&records);
    Ok(ResultTable { records, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown output format {s:?}"))),
        }
    }
}

/// Column order of the raw per-scenario file.
pub const RAW_COLUMNS: [&str; 22] = [
    "scenario_id",
    "alpha_c_m",
    "repetition",
    "seed",
    "method",
    "error_m",
    "alpha_hat_m",
    "est_x_m",
    "est_y_m",
    "est_z_m",
    "src_x_m",
    "src_y_m",
    "src_z_m",
    "alpha_true_m",
    "objective",
    "combinations",
    "at_alpha_boundary",
    "eigenvalues_clamped",
    "degenerate_array",
    "t60_s",
    "drr_db",
    "failure",
];

pub const TIMING_COLUMNS: [&str; 4] = ["scenario_id", "method", "runtime_ms", "frontend_ms"];

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "alpha_c_m",
    "method",
    "scenarios",
    "failures",
    "median_m",
    "q25_m",
    "q75_m",
    "min_m",
    "max_m",
    "gross_errors",
];

fn f6(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn raw_row(r: &ErrorRecord) -> Vec<String> {
    let est = |k: usize| opt(r.estimate, |p| f6(p[k]));
    vec![
        r.scenario_id.to_string(),
        f6(r.alpha_c),
        r.repetition.to_string(),
        r.seed.to_string(),
        r.method.to_string(),
        opt(r.error_m, f6),
        opt(r.alpha_hat, f6),
        est(0),
        est(1),
        est(2),
        opt(r.source, |p| f6(p[0])),
        opt(r.source, |p| f6(p[1])),
        opt(r.source, |p| f6(p[2])),
        opt(r.alpha_true, f6),
        opt(r.objective, |v| format!("{v:.6e}")),
        opt(r.combinations, |v| v.to_string()),
        opt(r.at_alpha_boundary, |v| v.to_string()),
        opt(r.eigenvalues_clamped, |v| v.to_string()),
        opt(r.degenerate_array, |v| v.to_string()),
        opt(r.t60_s, f6),
        opt(r.drr_db, f6),
        r.failure.clone().unwrap_or_default(),
    ]
}

fn summary_row(s: &SummaryRow) -> Vec<String> {
    vec![
        f6(s.alpha_c),
        s.method.to_string(),
        s.scenarios.to_string(),
        s.failures.to_string(),
        opt(s.median_m, f6),
        opt(s.q25_m, f6),
        opt(s.q75_m, f6),
        opt(s.min_m, f6),
        opt(s.max_m, f6),
        s.gross_errors.to_string(),
    ]
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Raw record as written to the raw file: everything but the timings.
#[derive(Serialize, Deserialize)]
struct RawJson {
    scenario_id: usize,
    alpha_c: f64,
    repetition: usize,
    seed: u64,
    method: Method,
    error_m: Option<f64>,
    alpha_hat: Option<f64>,
    estimate: Option<[f64; 3]>,
    source: Option<[f64; 3]>,
    alpha_true: Option<f64>,
    objective: Option<f64>,
    combinations: Option<usize>,
    at_alpha_boundary: Option<bool>,
    eigenvalues_clamped: Option<bool>,
    degenerate_array: Option<bool>,
    t60_s: Option<f64>,
    drr_db: Option<JsonNumber>,
    failure: Option<String>,
}

/// JSON has no infinities; those are written as the strings `"inf"`, `"-inf"`, `"nan"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonNumber {
    Finite(f64),
    Special(String),
}

impl JsonNumber {
    fn new(x: f64) -> Self {
        if x.is_finite() {
            JsonNumber::Finite(x)
        } else {
            JsonNumber::Special(f6(x))
        }
    }

    fn value(&self) -> Result<f64> {
        match self {
            JsonNumber::Finite(x) => Ok(*x),
            JsonNumber::Special(s) => parse_f(s),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TimingJson {
    scenario_id: usize,
    method: Method,
    runtime_ms: f64,
    frontend_ms: f64,
}

fn raw_json(r: &ErrorRecord) -> RawJson {
    RawJson {
        scenario_id: r.scenario_id,
        alpha_c: r.alpha_c,
        repetition: r.repetition,
        seed: r.seed,
        method: r.method,
        error_m: r.error_m,
        alpha_hat: r.alpha_hat,
        estimate: r.estimate,
        source: r.source,
        alpha_true: r.alpha_true,
        objective: r.objective,
        combinations: r.combinations,
        at_alpha_boundary: r.at_alpha_boundary,
        eigenvalues_clamped: r.eigenvalues_clamped,
        degenerate_array: r.degenerate_array,
        t60_s: r.t60_s,
        drr_db: r.drr_db.map(JsonNumber::new),
        failure: r.failure.clone(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `raw_results`, `timings` and `summary` files into `dir`.
///
/// The raw and summary files depend only on the configuration, never on
/// scheduling; wall-clock times live in the separate timings file.
pub fn emit_results(table: &ResultTable, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    if table.records.is_empty() {
        return Err(Error::InvalidInput("empty result table".into()));
    }
    fs::create_dir_all(dir)?;
    let ext = format.extension();
    let paths: Vec<PathBuf> = [RAW_FILE, TIMINGS_FILE, SUMMARY_FILE]
        .iter()
        .map(|f| dir.join(format!("{f}.{ext}")))
        .collect();
    match format {
        OutputFormat::Csv => {
            write_csv(&paths[0], &RAW_COLUMNS, table.records.iter().map(raw_row))?;
            write_csv(
                &paths[1],
                &TIMING_COLUMNS,
                table.records.iter().map(|r| {
                    vec![
                        r.scenario_id.to_string(),
                        r.method.to_string(),
                        f6(r.runtime_ms),
                        f6(r.frontend_ms),
                    ]
                }),
            )?;
            write_csv(
                &paths[2],
                &SUMMARY_COLUMNS,
                table.summary.iter().map(summary_row),
            )?;
        }
        OutputFormat::Json => {
            write_json(
                &paths[0],
                &table.records.iter().map(raw_json).collect::<Vec<_>>(),
            )?;
            let timings: Vec<TimingJson> = table
                .records
                .iter()
                .map(|r| TimingJson {
                    scenario_id: r.scenario_id,
                    method: r.method,
                    runtime_ms: r.runtime_ms,
                    frontend_ms: r.frontend_ms,
                })
                .collect();
            write_json(&paths[1], &timings)?;
            write_json(&paths[2], &table.summary)?;
        }
    }
    Ok(paths)
}

fn parse_f(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad number {s:?}"))),
    }
}

fn parse_opt<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        f(s).map(Some)
    }
}

fn parse_int<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("bad integer {s:?}")))
}

fn parse_bool(s: &str) -> Result<bool> {
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("bad boolean {s:?}")))
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::InvalidInput(format!(
            "{}: unexpected header {found:?}",
            path.display()
        )));
    }
    Ok(r.records().collect::<std::result::Result<_, _>>()?)
}

fn parse_raw(row: &csv::StringRecord) -> Result<ErrorRecord> {
    let g = |k: usize| row.get(k).unwrap_or("");
    let est = match (
        parse_opt(g(7), parse_f)?,
        parse_opt(g(8), parse_f)?,
        parse_opt(g(9), parse_f)?,
    ) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        _ => None,
    };
    Ok(ErrorRecord {
        scenario_id: parse_int(g(0))?,
        alpha_c: parse_f(g(1))?,
        repetition: parse_int(g(2))?,
        seed: parse_int(g(3))?,
        method: g(4).parse()?,
        error_m: parse_opt(g(5), parse_f)?,
        alpha_hat: parse_opt(g(6), parse_f)?,
        estimate: est,
        source: match (
            parse_opt(g(10), parse_f)?,
            parse_opt(g(11), parse_f)?,
            parse_opt(g(12), parse_f)?,
        ) {
            (Some(x), Some(y), Some(z)) => Some([x, y, z]),
            _ => None,
        },
        alpha_true: parse_opt(g(13), parse_f)?,
        objective: parse_opt(g(14), parse_f)?,
        combinations: parse_opt(g(15), parse_int)?,
        at_alpha_boundary: parse_opt(g(16), parse_bool)?,
        eigenvalues_clamped: parse_opt(g(17), parse_bool)?,
        degenerate_array: parse_opt(g(18), parse_bool)?,
        t60_s: parse_opt(g(19), parse_f)?,
        drr_db: parse_opt(g(20), parse_f)?,
        failure: Some(g(21).to_owned()).filter(|s| !s.is_empty()),
        runtime_ms: 0.0,
        frontend_ms: 0.0,
    })
}

/// Reads back the raw and timing files written by [`emit_results`] and
/// recomputes the summary from the raw records.
pub fn read_results(dir: &Path, format: OutputFormat) -> Result<ResultTable> {
    let ext = format.extension();
    let raw_path = dir.join(format!("{RAW_FILE}.{ext}"));
    let timing_path = dir.join(format!("{TIMINGS_FILE}.{ext}"));
    let (mut records, timings): (Vec<ErrorRecord>, Vec<(usize, Method, f64, f64)>) = match format {
        OutputFormat::Csv => {
            let records = read_csv(&raw_path, &RAW_COLUMNS)?
                .iter()
                .map(parse_raw)
                .collect::<Result<Vec<_>>>()?;
            let timings = read_csv(&timing_path, &TIMING_COLUMNS)?
                .iter()
                .map(|t| {
                    let g = |k: usize| t.get(k).unwrap_or("");
                    Ok((
                        parse_int(g(0))?,
                        g(1).parse()?,
                        parse_f(g(2))?,
                        parse_f(g(3))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            (records, timings)
        }
        OutputFormat::Json => {
            let raw: Vec<RawJson> = serde_json::from_str(&fs::read_to_string(&raw_path)?)?;
            let t: Vec<TimingJson> = serde_json::from_str(&fs::read_to_string(&timing_path)?)?;
            let records = raw
                .into_iter()
                .map(|r| -> Result<ErrorRecord> {
                    Ok(ErrorRecord {
                        scenario_id: r.scenario_id,
                        alpha_c: r.alpha_c,
                        repetition: r.repetition,
                        seed: r.seed,
                        method: r.method,
                        error_m: r.error_m,
                        alpha_hat: r.alpha_hat,
                        estimate: r.estimate,
                        source: r.source,
                        alpha_true: r.alpha_true,
                        objective: r.objective,
                        combinations: r.combinations,
                        at_alpha_boundary: r.at_alpha_boundary,
                        eigenvalues_clamped: r.eigenvalues_clamped,
                        degenerate_array: r.degenerate_array,
                        t60_s: r.t60_s,
                        drr_db: r.drr_db.map(|d| d.value()).transpose()?,
                        failure: r.failure,
                        runtime_ms: 0.0,
                        frontend_ms: 0.0,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (
                records,
                t.into_iter()
                    .map(|t| (t.scenario_id, t.method, t.runtime_ms, t.frontend_ms))
                    .collect(),
            )
        }
    };
    if timings.len() != records.len() {
        return Err(Error::InvalidInput(
            "raw and timing files disagree in length".into(),
        ));
    }
    for (r, (id, m, rt, fe)) in records.iter_mut().zip(timings) {
        if r.scenario_id != id || r.method != m {
            return Err(Error::InvalidInput(format!(
                "timing row ({id}, {m}) does not match raw row"
            )));
        }
        r.runtime_ms = rt;
        r.frontend_ms = fe;
    }
    let summary = summarize(&records);
    Ok(ResultTable { records, summary })
}
