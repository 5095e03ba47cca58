//! Repetition averaging and per-frequency deviation across measurement points.
//!
//! The reduction runs in three steps:
//!
//! 1. [`average_runs`]: the N repetitions of each pair are averaged point by
//!    point (dataset A).
//! 2. [`per_point_gains`]: the three-antenna solution is applied independently
//!    at every (distance, frequency) point (dataset B).
//! 3. [`sigma_f`]: the standard deviation of the per-point gains across the
//!    distance points, per frequency.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AntennaGain, Campaign, FrequencyGrid, GainSolution, PairKey, SolutionMethod, SweepTrace};
use crate::solver::{solve_gain_products_db, solve_three_antenna, PairGainProduct, PathLossMode};
use crate::units::{db_to_power, wavelength};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of the linear power ratios.
    #[default]
    Linear,
    /// Mean of the dB values.
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    /// Divide by M.
    #[default]
    Population,
    /// Divide by M − 1.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReductionOptions {
    pub averaging: Averaging,
    pub deviation: Deviation,
    pub mode: PathLossMode,
}

/// Run-averaged power ratio of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAverage {
    pub pair: PairKey,
    pub distances: Vec<f64>,
    /// Linear |S21|², `[m][f]`.
    pub power: Array2<f64>,
    pub runs: usize,
}

/// Averaged data for all three pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetA {
    pub grid: FrequencyGrid,
    pub pairs: Vec<PairAverage>,
}

/// Per-point gains of the three antennas in dB, `[m][f]`, with a validity
/// mask. Invalid points hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetB {
    pub ids: [String; 3],
    pub frequencies: Vec<f64>,
    pub gain_db: [Array2<f64>; 3],
    pub valid: [Array2<bool>; 3],
}

impl DatasetB {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn gap_count(&self) -> usize {
        self.valid.iter().map(|v| v.iter().filter(|x| !**x).count()).sum()
    }
}

/// Point-wise mean over repetition runs of one pair.
pub fn average_runs(traces: &[SweepTrace], averaging: Averaging) -> Result<PairAverage> {
    let first = traces
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no runs to average".to_string()))?;
    for t in &traces[1..] {
        if t.pair() != first.pair() {
            return Err(Error::ShapeMismatch(format!(
                "cannot average runs of {} with runs of {}",
                first.pair(),
                t.pair()
            )));
        }
        if t.shape() != first.shape() || t.distances() != first.distances() || t.grid() != first.grid() {
            return Err(Error::ShapeMismatch(format!(
                "pair {} run {}: shape or distances differ from run {}",
                t.pair(),
                t.run_index(),
                first.run_index()
            )));
        }
    }
    let n = traces.len() as f64;
    let power = match averaging {
        Averaging::Linear => {
            let mut acc = Array2::<f64>::zeros(first.shape());
            for t in traces {
                acc += &t.power();
            }
            acc / n
        }
        Averaging::Db => {
            let mut acc = Array2::<f64>::zeros(first.shape());
            for t in traces {
                acc += t.s21_db();
            }
            (acc / n).mapv(db_to_power)
        }
    };
    Ok(PairAverage {
        pair: first.pair().clone(),
        distances: first.distances().to_vec(),
        power,
        runs: traces.len(),
    })
}

pub fn dataset_a(campaign: &Campaign, averaging: Averaging) -> Result<DatasetA> {
    let pairs = campaign
        .pair_keys()
        .iter()
        .map(|k| average_runs(campaign.traces(k), averaging))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetA {
        grid: *campaign.grid(),
        pairs,
    })
}

/// Three-antenna solution at every (m, f). Points where a pair has zero
/// power become gaps; structural problems (missing pairs, shape mismatch) are
/// errors.
pub fn per_point_gains(data: &DatasetA, mode: PathLossMode) -> Result<DatasetB> {
    let structure: Vec<(PairKey, f64)> = data.pairs.iter().map(|p| (p.pair.clone(), 0.0)).collect();
    let ids = solve_gain_products_db(&structure)?.ids;
    let shape = data.pairs[0].power.dim();
    for p in &data.pairs {
        if p.power.dim() != shape || p.distances.len() != shape.0 {
            return Err(Error::ShapeMismatch(format!(
                "pair {} has shape {:?}, expected {shape:?}",
                p.pair,
                p.power.dim()
            )));
        }
        if shape.1 != data.grid.count() {
            return Err(Error::ShapeMismatch(format!(
                "pair {} has {} frequencies, grid has {}",
                p.pair,
                shape.1,
                data.grid.count()
            )));
        }
    }
    let (m_count, f_count) = shape;
    let lambdas: Vec<f64> = data.grid.frequencies().into_iter().map(wavelength).collect();
    let rows: Vec<Vec<Option<[f64; 3]>>> = (0..m_count)
        .into_par_iter()
        .map(|m| {
            (0..f_count)
                .map(|f| {
                    let products: Vec<PairGainProduct> = data
                        .pairs
                        .iter()
                        .map(|p| PairGainProduct::new(p.pair.clone(), p.power[[m, f]], p.distances[m]))
                        .collect();
                    solve_three_antenna(&products, lambdas[f], mode)
                        .ok()
                        .map(|s| reorder(&s.ids, &ids, s.gain_db))
                })
                .collect()
        })
        .collect();
    let mut gain_db = [
        Array2::from_elem(shape, f64::NAN),
        Array2::from_elem(shape, f64::NAN),
        Array2::from_elem(shape, f64::NAN),
    ];
    let mut valid = [
        Array2::from_elem(shape, false),
        Array2::from_elem(shape, false),
        Array2::from_elem(shape, false),
    ];
    for (m, row) in rows.into_iter().enumerate() {
        for (f, point) in row.into_iter().enumerate() {
            if let Some(g) = point {
                for k in 0..3 {
                    gain_db[k][[m, f]] = g[k];
                    valid[k][[m, f]] = true;
                }
            }
        }
    }
    Ok(DatasetB {
        ids,
        frequencies: data.grid.frequencies(),
        gain_db,
        valid,
    })
}

fn reorder(from: &[String; 3], to: &[String; 3], values: [f64; 3]) -> [f64; 3] {
    let mut out = [f64::NAN; 3];
    for (k, id) in to.iter().enumerate() {
        let j = from.iter().position(|x| x == id).expect("same antenna set");
        out[k] = values[j];
    }
    out
}

fn column_deviation(values: &[f64], deviation: Deviation) -> Option<f64> {
    let m = values.len();
    if m < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let denom = match deviation {
        Deviation::Population => m as f64,
        Deviation::Sample => (m - 1) as f64,
    };
    Some((ss / denom).sqrt())
}

/// Standard deviation of the per-point gains across measurement points, per
/// antenna and frequency. `None` where fewer than two valid points exist.
pub fn sigma_f(data: &DatasetB, deviation: Deviation) -> [Vec<Option<f64>>; 3] {
    std::array::from_fn(|k| {
        data.gain_db[k]
            .axis_iter(Axis(1))
            .zip(data.valid[k].axis_iter(Axis(1)))
            .map(|(col, ok)| {
                let v: Vec<f64> = col
                    .iter()
                    .zip(ok.iter())
                    .filter(|(_, ok)| **ok)
                    .map(|(g, _)| *g)
                    .collect();
                column_deviation(&v, deviation)
            })
            .collect()
    })
}

/// Mean per-point gain across measurement points, per antenna and frequency.
pub fn mean_gain(data: &DatasetB) -> [Vec<f64>; 3] {
    std::array::from_fn(|k| {
        data.gain_db[k]
            .axis_iter(Axis(1))
            .zip(data.valid[k].axis_iter(Axis(1)))
            .map(|(col, ok)| {
                let (sum, n) = col
                    .iter()
                    .zip(ok.iter())
                    .filter(|(_, ok)| **ok)
                    .fold((0.0, 0usize), |(s, n), (g, _)| (s + g, n + 1));
                if n == 0 {
                    f64::NAN
                } else {
                    sum / n as f64
                }
            })
            .collect()
    })
}

/// The full reduction of a cluster campaign.
pub fn reduce_campaign(campaign: &Campaign, options: &ReductionOptions) -> Result<(DatasetB, GainSolution)> {
    let a = dataset_a(campaign, options.averaging)?;
    let b = per_point_gains(&a, options.mode)?;
    let sigma = sigma_f(&b, options.deviation);
    let mean = mean_gain(&b);
    let antennas = campaign
        .antennas()
        .iter()
        .map(|ant| {
            let k = b.index_of(ant.id()).expect("campaign antennas");
            AntennaGain {
                id: ant.id().to_string(),
                gain_db: mean[k].clone(),
                sigma_f_db: sigma[k].clone(),
            }
        })
        .collect();
    let solution = GainSolution::new(SolutionMethod::Ccm, b.frequencies.clone(), antennas)?;
    Ok((b, solution))
}

/// Standard deviation of a per-point gain when each pair carries independent
/// Gaussian dB noise of `sigma_db` per run and `runs` runs are averaged.
/// Each gain is half the sum of three pair terms, hence (√3/2)·σ/√N.
pub fn expected_point_noise_db(sigma_db: f64, runs: usize) -> f64 {
    3f64.sqrt() / 2.0 * sigma_db / (runs as f64).sqrt()
}

/// Mean of all defined σ_f values of a solution.
pub fn mean_sigma_f(solution: &GainSolution) -> Option<f64> {
    let v: Vec<f64> = solution
        .antennas()
        .iter()
        .flat_map(|a| a.sigma_f_db.iter().flatten().copied())
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Finds the ripple amplitude whose reduction yields `target` mean σ_f.
///
/// `evaluate` maps an amplitude in dB to the resulting mean σ_f; it must be
/// non-decreasing in the amplitude. The search scans `[lo, hi]` on a coarse
/// grid for the bracketing interval and then bisects to `tolerance` in σ_f.
pub fn tune_ripple_amplitude<F>(target: f64, lo: f64, hi: f64, tolerance: f64, mut evaluate: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const SCAN: usize = 16;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::domain("ripple search interval", hi, "needs 0 <= lo < hi"));
    }
    let mut prev = (lo, evaluate(lo)? - target);
    if prev.1 >= 0.0 {
        return Err(Error::Numerical(format!(
            "target sigma {target} dB already exceeded at amplitude {lo} dB"
        )));
    }
    let mut bracket = None;
    for i in 1..=SCAN {
        let a = lo + (hi - lo) * i as f64 / SCAN as f64;
        let r = evaluate(a)? - target;
        if r.abs() <= tolerance {
            return Ok(a);
        }
        if r > 0.0 {
            bracket = Some((prev.0, a));
            break;
        }
        prev = (a, r);
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::Numerical(format!("target sigma {target} dB not reached below amplitude {hi} dB"))
    })?;
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let r = evaluate(mid)? - target;
        if r.abs() <= tolerance {
            return Ok(mid);
        }
        if r > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}
