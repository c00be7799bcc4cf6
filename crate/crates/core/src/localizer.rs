//! Source localization by minimising the rank-deficiency cost of the
//! augmented EDM over the source-to-reference distance α and over candidate
//! TDOA combinations.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::TdoaCandidateSet;
use crate::edm::{
    build_edm, edm_to_gram, eigen::tridiagonal_eigenvalues, procrustes_align, reconstruct_with,
    symmetric_eigendecompose, symmetric_eigenvalues, NegativeEigenvalues, PositionMatrix,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaSearch {
    /// Every grid point `0, Δ, 2Δ, …, α_max`.
    Exhaustive,
    /// A `10Δ` pass followed by a `Δ/10` pass around the best coarse minima.
    CoarseToFine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaSearchConfig {
    /// Grid spacing Δ in meters.
    pub resolution: f64,
    pub alpha_max: f64,
    pub speed_of_sound: f64,
    pub strategy: AlphaSearch,
    /// Keep the sampled cost curve of the winning combination.
    pub record_cost_curve: bool,
}

impl Default for AlphaSearchConfig {
    fn default() -> Self {
        Self {
            resolution: 0.001,
            alpha_max: (6.0f64 * 6.0 + 6.0 * 6.0 + 2.4 * 2.4).sqrt(),
            speed_of_sound: 343.0,
            strategy: AlphaSearch::Exhaustive,
            record_cost_curve: false,
        }
    }
}

impl AlphaSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || !(self.alpha_max > 0.0) || !(self.speed_of_sound > 0.0) {
            return Err(Error::Config(format!(
                "alpha search needs positive resolution, alpha_max and speed of sound (got {}, {}, {})",
                self.resolution, self.alpha_max, self.speed_of_sound
            )));
        }
        Ok(())
    }

    fn grid_len(&self) -> usize {
        (self.alpha_max / self.resolution + 1e-9).floor() as usize + 1
    }
}

/// `d_1 = α`, `d_m = α + ν·τ_m`. `None` when any distance is negative.
pub fn distance_vector(alpha: f64, tdoas: &[f64], speed_of_sound: f64) -> Option<Vec<f64>> {
    if alpha < 0.0 {
        return None;
    }
    let mut d = Vec::with_capacity(tdoas.len() + 1);
    d.push(alpha);
    for &t in tdoas {
        let v = alpha + speed_of_sound * t;
        if v < 0.0 {
            return None;
        }
        d.push(v);
    }
    Some(d)
}

fn tail_sum(sorted_desc: &[f64]) -> f64 {
    sorted_desc.iter().skip(3).map(|l| l.abs()).sum()
}

/// `J(α)`: sum of `|λ_i|` over all but the three largest (signed) eigenvalues
/// of the Gram matrix built from the augmented EDM. Infeasible α give `+∞`.
///
/// Builds the full matrices; [`CostEvaluator`] computes the same value faster.
pub fn cost_j(
    alpha: f64,
    tdoas: &[f64],
    mics: &PositionMatrix,
    speed_of_sound: f64,
) -> Result<f64> {
    check_inputs(tdoas, mics)?;
    let Some(d) = distance_vector(alpha, tdoas, speed_of_sound) else {
        return Ok(f64::INFINITY);
    };
    let gram = edm_to_gram(&build_edm(mics, &d)?, 0)?;
    Ok(tail_sum(&symmetric_eigenvalues(gram.matrix())?))
}

fn check_inputs(tdoas: &[f64], mics: &PositionMatrix) -> Result<()> {
    if mics.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 microphones, got {}",
            mics.len()
        )));
    }
    if tdoas.len() + 1 != mics.len() {
        return Err(Error::Dimension(format!(
            "{} TDOAs for {} microphones",
            tdoas.len(),
            mics.len()
        )));
    }
    if tdoas.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite TDOA".into()));
    }
    Ok(())
}

/// Fast evaluation of `J(α)` for a fixed microphone geometry.
///
/// The reference row and column of the Gram matrix vanish, so its spectrum is
/// that of the `M×M` block over the other microphones and the source, plus one
/// zero. Only the source row of that block depends on α.
#[derive(Debug, Clone)]
pub struct CostEvaluator {
    m: usize,
    speed_of_sound: f64,
    /// `G_ij` for non-reference microphones, row-major `(M−1)×(M−1)`.
    mic_block: Vec<f64>,
    /// Squared distances from each non-reference microphone to the reference.
    ref_sq: Vec<f64>,
}

impl CostEvaluator {
    pub fn new(mics: &PositionMatrix, speed_of_sound: f64) -> Result<Self> {
        if mics.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "need at least 4 microphones, got {}",
                mics.len()
            )));
        }
        let m = mics.len();
        let r = mics.point(0);
        let rel: Vec<Vector3<f64>> = (1..m).map(|i| mics.point(i) - r).collect();
        let ref_sq: Vec<f64> = rel.iter().map(|v| v.norm_squared()).collect();
        let mut mic_block = vec![0.0; (m - 1) * (m - 1)];
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                let dij = (rel[i] - rel[j]).norm_squared();
                mic_block[i * (m - 1) + j] = 0.5 * (ref_sq[i] + ref_sq[j] - dij);
            }
        }
        Ok(Self {
            m,
            speed_of_sound,
            mic_block,
            ref_sq,
        })
    }

    pub fn mic_count(&self) -> usize {
        self.m
    }

    /// `J(α)`; `+∞` where infeasible.
    pub fn cost(&self, alpha: f64, tdoas: &[f64]) -> Result<f64> {
        if tdoas.len() + 1 != self.m {
            return Err(Error::Dimension(format!(
                "{} TDOAs for {} microphones",
                tdoas.len(),
                self.m
            )));
        }
        let mut work = vec![0.0; self.m * self.m];
        let mut eig = vec![0.0; 2 * self.m + 1];
        self.cost_with(alpha, tdoas, &mut work, &mut eig)
    }

    fn cost_with(
        &self,
        alpha: f64,
        tdoas: &[f64],
        work: &mut [f64],
        eig: &mut [f64],
    ) -> Result<f64> {
        if alpha < 0.0 || tdoas.iter().any(|&t| alpha + self.speed_of_sound * t < 0.0) {
            return Ok(f64::INFINITY);
        }
        let n = self.m;
        let b = n - 1;
        for i in 0..b {
            work[i * n..i * n + b].copy_from_slice(&self.mic_block[i * b..(i + 1) * b]);
            let d = alpha + self.speed_of_sound * tdoas[i];
            let g = 0.5 * (self.ref_sq[i] + alpha * alpha - d * d);
            work[i * n + b] = g;
            work[b * n + i] = g;
        }
        work[b * n + b] = alpha * alpha;
        let (d, e) = eig.split_at_mut(n + 1);
        tridiagonal_eigenvalues(work, n, &mut d[..n], e)?;
        d[n] = 0.0;
        d.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(tail_sum(d))
    }

    /// Grid minimum of `J` for one TDOA vector.
    pub fn minimize(&self, tdoas: &[f64], cfg: &AlphaSearchConfig) -> Result<AlphaMinimum> {
        cfg.validate()?;
        if tdoas.len() + 1 != self.m {
            return Err(Error::Dimension(format!(
                "{} TDOAs for {} microphones",
                tdoas.len(),
                self.m
            )));
        }
        let mut work = vec![0.0; self.m * self.m];
        let mut eig = vec![0.0; 2 * self.m + 1];
        let res = cfg.resolution;
        let last = cfg.grid_len() - 1;
        // smallest feasible grid index
        let min_alpha = tdoas
            .iter()
            .fold(0.0f64, |acc, &t| acc.max(-self.speed_of_sound * t));
        let mut first = (min_alpha / res).ceil() as usize;
        while first <= last
            && self
                .cost_with(first as f64 * res, tdoas, &mut work, &mut eig)?
                .is_infinite()
        {
            first += 1;
        }
        if first > last {
            return Err(Error::Infeasible);
        }

        let mut eval = |alpha: f64| self.cost_with(alpha, tdoas, &mut work, &mut eig);
        let (alpha, cost) = match cfg.strategy {
            AlphaSearch::Exhaustive => {
                let mut best = (f64::NAN, f64::INFINITY);
                for i in first..=last {
                    let a = i as f64 * res;
                    let c = eval(a)?;
                    if c < best.1 {
                        best = (a, c);
                    }
                }
                best
            }
            AlphaSearch::CoarseToFine => coarse_to_fine(&mut eval, first, last, res)?,
        };
        let at_boundary = alpha <= first as f64 * res || alpha >= last as f64 * res;
        Ok(AlphaMinimum {
            alpha,
            cost,
            at_boundary,
        })
    }

    /// `(α, J(α))` at every feasible grid point.
    pub fn cost_curve(&self, tdoas: &[f64], cfg: &AlphaSearchConfig) -> Result<Vec<(f64, f64)>> {
        let mut work = vec![0.0; self.m * self.m];
        let mut eig = vec![0.0; 2 * self.m + 1];
        let mut out = Vec::new();
        for i in 0..cfg.grid_len() {
            let a = i as f64 * cfg.resolution;
            let c = self.cost_with(a, tdoas, &mut work, &mut eig)?;
            if c.is_finite() {
                out.push((a, c));
            }
        }
        Ok(out)
    }
}

const COARSE_FACTOR: usize = 10;
const FINE_DIVISOR: usize = 10;
const COARSE_BASINS: usize = 3;

fn coarse_to_fine(
    eval: &mut impl FnMut(f64) -> Result<f64>,
    first: usize,
    last: usize,
    res: f64,
) -> Result<(f64, f64)> {
    // coarse pass on every COARSE_FACTOR-th grid point, plus the end points
    let mut idx: Vec<usize> = (first..=last).step_by(COARSE_FACTOR).collect();
    if *idx.last().unwrap() != last {
        idx.push(last);
    }
    let vals: Vec<f64> = idx
        .iter()
        .map(|&i| eval(i as f64 * res))
        .collect::<Result<_>>()?;
    let mut minima: Vec<usize> = (0..idx.len())
        .filter(|&k| {
            (k == 0 || vals[k] <= vals[k - 1]) && (k + 1 == idx.len() || vals[k] <= vals[k + 1])
        })
        .collect();
    minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    minima.truncate(COARSE_BASINS);

    let fine = res / FINE_DIVISOR as f64;
    let lo_bound = first as f64 * res;
    let hi_bound = last as f64 * res;
    let mut best = (f64::NAN, f64::INFINITY);
    for k in minima {
        let centre = idx[k] as f64 * res;
        let span = (COARSE_FACTOR * FINE_DIVISOR) as i64;
        for j in -span..=span {
            let a = centre + j as f64 * fine;
            if a < lo_bound - 1e-12 || a > hi_bound + 1e-12 {
                continue;
            }
            let c = eval(a)?;
            if c < best.1 || (c == best.1 && a < best.0) {
                best = (a, c);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMinimum {
    pub alpha: f64,
    pub cost: f64,
    /// The minimiser is the first feasible or the last grid point.
    pub at_boundary: bool,
}

/// Grid argmin of `J(α)` for a single TDOA vector; ties go to the smaller α.
pub fn minimize_alpha(
    tdoas: &[f64],
    mics: &PositionMatrix,
    cfg: &AlphaSearchConfig,
) -> Result<AlphaMinimum> {
    check_inputs(tdoas, mics)?;
    CostEvaluator::new(mics, cfg.speed_of_sound)?.minimize(tdoas, cfg)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationDiagnostics {
    pub combinations_evaluated: usize,
    pub at_alpha_boundary: bool,
    /// A retained eigenvalue at the winner was negative and was zeroed.
    pub eigenvalues_clamped: bool,
    /// The microphones span fewer than three dimensions.
    pub degenerate_array: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub source_position: [f64; 3],
    pub alpha_hat: f64,
    /// Chosen candidate rank per non-reference microphone, `0` = best peak.
    pub chosen_combination: Vec<usize>,
    pub cost_min: f64,
    pub mic_alignment_rms: f64,
    pub cost_curve: Option<Vec<(f64, f64)>>,
    pub diagnostics: LocalizationDiagnostics,
}

pub fn combination_count(sets: &[TdoaCandidateSet]) -> usize {
    sets.iter().map(|s| s.len()).product()
}

/// Candidate ranks of combination number `index` in lexicographic order.
fn decode(index: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    let mut rest = index;
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        *slot = rest % r;
        rest /= r;
    }
    out
}

/// Joint minimisation over α and every candidate combination, then
/// reconstruction and alignment of the winning configuration.
///
/// `candidate_sets[m]` holds the candidates for microphone `m + 1` relative to
/// the reference microphone `0`.
pub fn localize(
    candidate_sets: &[TdoaCandidateSet],
    mics: &PositionMatrix,
    cfg: &AlphaSearchConfig,
) -> Result<LocalizationResult> {
    cfg.validate()?;
    if candidate_sets.len() + 1 != mics.len() {
        return Err(Error::Dimension(format!(
            "{} candidate sets for {} microphones",
            candidate_sets.len(),
            mics.len()
        )));
    }
    if let Some(s) = candidate_sets.iter().find(|s| s.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "empty candidate set for pair {:?}",
            s.pair
        )));
    }
    let evaluator = CostEvaluator::new(mics, cfg.speed_of_sound)?;
    let degenerate_array = mics.affine_rank(1e-9) < 3;
    if degenerate_array {
        log::warn!("microphones are coplanar or colinear; the source position is ambiguous");
    }

    let radices: Vec<usize> = candidate_sets.iter().map(|s| s.len()).collect();
    let total = combination_count(candidate_sets);
    let tdoas_of = |combo: &[usize]| -> Vec<f64> {
        combo
            .iter()
            .zip(candidate_sets)
            .map(|(&c, s)| s.candidates[c].delay)
            .collect()
    };

    let best = (0..total)
        .into_par_iter()
        .map(|i| {
            let tdoas = tdoas_of(&decode(i, &radices));
            match evaluator.minimize(&tdoas, cfg) {
                Ok(min) => Ok(Some((i, min))),
                Err(Error::Infeasible) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(x), Some(y)) => {
                        // lower cost, then lower combination index
                        if (y.1.cost, y.0) < (x.1.cost, x.0) {
                            Some(y)
                        } else {
                            Some(x)
                        }
                    }
                })
            },
        )?;
    let Some((index, min)) = best else {
        return Err(Error::Infeasible);
    };
    log::debug!("evaluated {total} candidate combinations");

    let combo = decode(index, &radices);
    let tdoas = tdoas_of(&combo);
    let d = distance_vector(min.alpha, &tdoas, cfg.speed_of_sound).ok_or(Error::Infeasible)?;
    let gram = edm_to_gram(&build_edm(mics, &d)?, 0)?;
    let eig = symmetric_eigendecompose(gram.matrix())?;
    let (relative, clamped) = reconstruct_with(&eig, NegativeEigenvalues::Clamp)?;
    if clamped {
        log::warn!(
            "negative leading eigenvalue at the cost minimum; missing coordinates zero-filled"
        );
    }
    let aligned = procrustes_align(&relative, mics)?;
    let s = aligned.positions.point(mics.len());
    let cost_curve = if cfg.record_cost_curve {
        Some(evaluator.cost_curve(&tdoas, cfg)?)
    } else {
        None
    };

    Ok(LocalizationResult {
        source_position: [s.x, s.y, s.z],
        alpha_hat: min.alpha,
        chosen_combination: combo,
        cost_min: min.cost,
        mic_alignment_rms: aligned.rms_residual,
        cost_curve,
        diagnostics: LocalizationDiagnostics {
            combinations_evaluated: total,
            at_alpha_boundary: min.at_boundary,
            eigenvalues_clamped: clamped,
            degenerate_array,
        },
    })
}

/// Convenience wrapper for exactly known TDOAs (one candidate per pair).
pub fn localize_exact(
    tdoas: &[f64],
    mics: &PositionMatrix,
    cfg: &AlphaSearchConfig,
) -> Result<LocalizationResult> {
    let sets: Vec<TdoaCandidateSet> = tdoas
        .iter()
        .enumerate()
        .map(|(i, &t)| TdoaCandidateSet::single((i + 1, 0), t))
        .collect();
    localize(&sets, mics, cfg)
}

/// TDOAs `τ_m = (‖s − m_m‖ − ‖s − m_1‖)/ν` for `m = 2..M`.
pub fn exact_tdoas(mics: &PositionMatrix, source: &Vector3<f64>, speed_of_sound: f64) -> Vec<f64> {
    let d0 = (source - mics.point(0)).norm();
    (1..mics.len())
        .map(|m| ((source - mics.point(m)).norm() - d0) / speed_of_sound)
        .collect()
}
