//! Extrapolation of wide-span distance sweeps to infinite separation.
//!
//! Each pair's sweep is de-embedded from free-space path loss,
//! `y(d) = |S21(d)|dB + 20·log10(4πd/λ)`, and fitted to
//! `a₀ + a₁/d + … + a_K/d^K`. The constant `a₀` is the far-field gain product
//! in dB. Several overlapping cluster sweeps can be stitched into one trace
//! before fitting.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AntennaGain, GainSolution, PairKey, SolutionMethod, SweepTrace};
use crate::solver::{solve_gain_products_db, ThreeAntennaGains};
use crate::stats::{average_runs, Averaging};
use crate::units::{path_loss_db, power_to_db, wavelength};

pub const MAX_ORDER: usize = 4;

/// Span ratio below which the fit is considered poorly leveraged.
pub const RECOMMENDED_SPAN: f64 = 3.0;

/// Fit of one pair at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationFit {
    pub pair: PairKey,
    pub frequency_hz: f64,
    /// `a₀..a_K` in dB, with `a_k` in dB·m^k.
    pub coefficients: Vec<f64>,
    pub asymptote_gain_product_db: f64,
    pub rms_residual_db: f64,
    pub span_ratio: f64,
}

impl ExtrapolationFit {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn is_short_span(&self) -> bool {
        self.span_ratio < RECOMMENDED_SPAN
    }

    /// Model value at distance `d`.
    pub fn evaluate(&self, d: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, a| acc / d + a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub coefficients: Vec<f64>,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationOptions {
    pub order: usize,
    /// Boxcar window in meters applied along distance before fitting; `None`
    /// or a non-positive width disables smoothing.
    pub smoothing_window: Option<f64>,
    pub averaging: Averaging,
}

impl Default for ExtrapolationOptions {
    fn default() -> Self {
        Self {
            order: 2,
            smoothing_window: None,
            averaging: Averaging::Linear,
        }
    }
}

impl ExtrapolationOptions {
    /// Default options with a half-wavelength window at `center_hz`.
    pub fn for_center_frequency(center_hz: f64) -> Self {
        Self {
            smoothing_window: Some(wavelength(center_hz) / 2.0),
            ..Self::default()
        }
    }
}

/// Least-squares fit of `values` to a polynomial in `1/d`.
///
/// The design matrix is built on `x = d_min/d` so its columns stay within
/// [0, 1], and the coefficients are rescaled afterwards.
pub fn fit_series(
    distances: &[f64],
    values: &[f64],
    order: usize,
    weights: Option<&[f64]>,
) -> Result<SeriesFit> {
    if order > MAX_ORDER {
        return Err(Error::Config(format!(
            "extrapolation order {order} is above the maximum of {MAX_ORDER}"
        )));
    }
    let n = distances.len();
    if values.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::ShapeMismatch(format!(
            "fit inputs have different lengths ({n} distances, {} values)",
            values.len()
        )));
    }
    if n < order + 2 {
        return Err(Error::RankDeficient { order, points: n });
    }
    for d in distances {
        crate::error::require_positive("distance", *d)?;
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain("fit sample", *bad, "must be finite"));
    }
    if let Some(w) = weights {
        if let Some(bad) = w.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::domain("fit weight", *bad, "must be finite and >= 0"));
        }
    }
    let d_min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let sqrt_w = |i: usize| weights.map_or(1.0, |w| w[i].sqrt());
    let design = DMatrix::from_fn(n, order + 1, |i, k| {
        sqrt_w(i) * (d_min / distances[i]).powi(k as i32)
    });
    let rhs = DVector::from_fn(n, |i, _| sqrt_w(i) * values[i]);
    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min <= s_max * 1e-13 {
        return Err(Error::RankDeficient { order, points: n });
    }
    let b = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let coefficients: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(k, bk)| bk * d_min.powi(k as i32))
        .collect();
    let ss: f64 = distances
        .iter()
        .zip(values)
        .map(|(d, v)| {
            let model = coefficients.iter().rev().fold(0.0, |acc, a| acc / d + a);
            (v - model).powi(2)
        })
        .sum();
    Ok(SeriesFit {
        coefficients,
        rms_residual: (ss / n as f64).sqrt(),
    })
}

/// Moving average over a distance window of total width `window`.
pub fn boxcar_smooth(distances: &[f64], values: &[f64], window: f64) -> Vec<f64> {
    if !(window > 0.0) {
        return values.to_vec();
    }
    let half = window / 2.0;
    let n = distances.len();
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        while hi < n && distances[hi] <= distances[i] + half {
            sum += values[hi];
            hi += 1;
        }
        while distances[lo] < distances[i] - half {
            sum -= values[lo];
            lo += 1;
        }
        out.push(sum / (hi - lo) as f64);
    }
    out
}

/// De-embedded, optionally smoothed sweep of one frequency column.
fn deembedded_column(trace: &SweepTrace, f: usize, window: Option<f64>) -> Result<Vec<f64>> {
    let lambda = trace.grid().wavelength(f);
    let y: Vec<f64> = trace
        .distances()
        .iter()
        .zip(trace.s21_db().column(f))
        .map(|(d, s)| s + path_loss_db(*d, lambda))
        .collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonPositiveProduct {
            pair: trace.pair().to_string(),
            value: 0.0,
        });
    }
    Ok(match window {
        Some(w) => boxcar_smooth(trace.distances(), &y, w),
        None => y,
    })
}

/// Fits one frequency column of a trace.
pub fn fit_inverse_distance(
    trace: &SweepTrace,
    frequency_index: usize,
    options: &ExtrapolationOptions,
) -> Result<ExtrapolationFit> {
    if frequency_index >= trace.grid().count() {
        return Err(Error::ShapeMismatch(format!(
            "frequency index {frequency_index} outside a grid of {}",
            trace.grid().count()
        )));
    }
    let d = trace.distances();
    let y = deembedded_column(trace, frequency_index, options.smoothing_window)?;
    let fit = fit_series(d, &y, options.order, None)?;
    Ok(ExtrapolationFit {
        pair: trace.pair().clone(),
        frequency_hz: trace.grid().frequency(frequency_index),
        asymptote_gain_product_db: fit.coefficients[0],
        coefficients: fit.coefficients,
        rms_residual_db: fit.rms_residual,
        span_ratio: d[d.len() - 1] / d[0],
    })
}

/// Fits every frequency column of a trace.
pub fn fit_trace(trace: &SweepTrace, options: &ExtrapolationOptions) -> Result<Vec<ExtrapolationFit>> {
    (0..trace.grid().count())
        .into_par_iter()
        .map(|f| fit_inverse_distance(trace, f, options))
        .collect()
}

struct Accumulated {
    distance: f64,
    sum: Vec<f64>,
    count: f64,
}

impl Accumulated {
    fn mean(&self, f: usize) -> f64 {
        self.sum[f] / self.count
    }
}

fn same_distance(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn interpolate(acc: &[Accumulated], d: f64, f: usize) -> f64 {
    let j = acc.partition_point(|p| p.distance < d);
    if j < acc.len() && same_distance(acc[j].distance, d) {
        return acc[j].mean(f);
    }
    if j == 0 {
        return acc[0].mean(f);
    }
    if j == acc.len() {
        return acc[j - 1].mean(f);
    }
    let (a, b) = (&acc[j - 1], &acc[j]);
    let t = (d - a.distance) / (b.distance - a.distance);
    a.mean(f) + t * (b.mean(f) - a.mean(f))
}

/// Offset in dB that aligns a segment with the already stitched data.
pub fn overlap_offset(acc_distances: &[f64], acc_db: &Array2<f64>, segment: &SweepTrace) -> Result<f64> {
    let acc: Vec<Accumulated> = acc_distances
        .iter()
        .zip(acc_db.rows())
        .map(|(d, r)| Accumulated {
            distance: *d,
            sum: r.to_vec(),
            count: 1.0,
        })
        .collect();
    offset_against(&acc, segment)
}

fn offset_against(acc: &[Accumulated], segment: &SweepTrace) -> Result<f64> {
    let first = acc[0].distance;
    let last = acc[acc.len() - 1].distance;
    let inside: Vec<usize> = segment
        .distances()
        .iter()
        .enumerate()
        .filter(|(_, d)| (**d >= first || same_distance(**d, first)) && (**d <= last || same_distance(**d, last)))
        .map(|(i, _)| i)
        .collect();
    if inside.len() < 2 {
        return Err(Error::StitchGap {
            lower_end: last,
            upper_start: segment.distances()[0],
        });
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for &i in &inside {
        let d = segment.distances()[i];
        for f in 0..segment.grid().count() {
            let diff = interpolate(acc, d, f) - segment.s21_db()[[i, f]];
            if diff.is_finite() {
                sum += diff;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Numerical(format!(
            "pair {}: no finite samples in the overlap",
            segment.pair()
        )));
    }
    Ok(sum / n as f64)
}

/// Joins overlapping sweeps of one pair into a single trace.
///
/// Segments are processed in order of their first distance. Each one is
/// shifted by the scalar dB offset that best matches the data stitched so
/// far on the overlap, and coincident distances are averaged. Phase is
/// dropped.
pub fn stitch_clusters(segments: &[SweepTrace]) -> Result<SweepTrace> {
    let first = segments
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no segments to stitch".to_string()))?;
    for s in segments {
        if s.pair() != first.pair() || s.grid() != first.grid() {
            return Err(Error::ShapeMismatch(format!(
                "cannot stitch {} segments with {} segments on a different grid",
                s.pair(),
                first.pair()
            )));
        }
    }
    let mut order: Vec<&SweepTrace> = segments.iter().collect();
    order.sort_by(|a, b| {
        let key = |t: &SweepTrace| (t.distances()[0], t.distances()[t.distances().len() - 1]);
        key(a)
            .partial_cmp(&key(b))
            .expect("finite distances")
            .then(a.run_index().cmp(&b.run_index()))
    });
    let fc = first.grid().count();
    let rows = |t: &SweepTrace, offset: f64| -> Vec<Accumulated> {
        t.distances()
            .iter()
            .zip(t.s21_db().rows())
            .map(|(d, r)| Accumulated {
                distance: *d,
                sum: r.iter().map(|v| v + offset).collect(),
                count: 1.0,
            })
            .collect()
    };
    let mut acc = rows(order[0], 0.0);
    for seg in &order[1..] {
        let offset = offset_against(&acc, seg)?;
        let incoming = rows(seg, offset);
        let mut merged = Vec::with_capacity(acc.len() + incoming.len());
        let mut a = acc.into_iter().peekable();
        let mut b = incoming.into_iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (Some(x), Some(y)) if same_distance(x.distance, y.distance) => {
                    let mut x = a.next().unwrap();
                    let y = b.next().unwrap();
                    for f in 0..fc {
                        x.sum[f] += y.sum[f];
                    }
                    x.count += y.count;
                    merged.push(x);
                }
                (Some(x), Some(y)) => {
                    if x.distance < y.distance {
                        merged.push(a.next().unwrap());
                    } else {
                        merged.push(b.next().unwrap());
                    }
                }
                (Some(_), None) => merged.push(a.next().unwrap()),
                (None, Some(_)) => merged.push(b.next().unwrap()),
                (None, None) => break,
            }
        }
        acc = merged;
    }
    let distances: Vec<f64> = acc.iter().map(|p| p.distance).collect();
    let s21 = Array2::from_shape_fn((acc.len(), fc), |(m, f)| acc[m].mean(f));
    let run = order.iter().map(|t| t.run_index()).min().unwrap_or(0);
    SweepTrace::new(first.pair().clone(), run, *first.grid(), distances, s21, None)
}

/// Gains from the three pair asymptotes at one frequency.
pub fn extrapolated_three_antenna(fits: &[ExtrapolationFit]) -> Result<ThreeAntennaGains> {
    let products: Vec<(PairKey, f64)> = fits
        .iter()
        .map(|f| (f.pair.clone(), f.asymptote_gain_product_db))
        .collect();
    solve_gain_products_db(&products)
}

/// Per-pair result of [`extrapolate_segments`].
#[derive(Debug, Clone)]
pub struct PairExtrapolation {
    pub stitched: SweepTrace,
    pub fits: Vec<ExtrapolationFit>,
}

/// Full extrapolation reduction of a set of segment traces.
///
/// Traces are grouped by pair and by first distance; runs of the same
/// segment are averaged, the segments stitched, each frequency fitted, and
/// the three-antenna system solved on the asymptotes. `ids` fixes the
/// antenna order of the returned solution.
pub fn extrapolate_segments(
    ids: &[String; 3],
    traces: &[SweepTrace],
    options: &ExtrapolationOptions,
) -> Result<(GainSolution, BTreeMap<PairKey, PairExtrapolation>)> {
    let mut grouped: BTreeMap<PairKey, BTreeMap<u64, Vec<SweepTrace>>> = BTreeMap::new();
    for t in traces {
        grouped
            .entry(t.pair().clone())
            .or_default()
            .entry(t.distances()[0].to_bits())
            .or_default()
            .push(t.clone());
    }
    let keys = [
        PairKey::new(&ids[0], &ids[1])?,
        PairKey::new(&ids[0], &ids[2])?,
        PairKey::new(&ids[1], &ids[2])?,
    ];
    for k in grouped.keys() {
        if !keys.contains(k) {
            return Err(Error::InvalidAntenna {
                id: k.to_string(),
                reason: "pair does not belong to the antenna set".to_string(),
            });
        }
    }
    let grid = *traces
        .first()
        .ok_or_else(|| Error::MissingPair(keys[0].to_string()))?
        .grid();
    let mut per_pair = BTreeMap::new();
    for k in &keys {
        let segments = grouped.get(k).ok_or_else(|| Error::MissingPair(k.to_string()))?;
        let averaged = segments
            .values()
            .map(|runs| {
                let avg = average_runs(runs, options.averaging)?;
                SweepTrace::new(k.clone(), 0, grid, avg.distances, avg.power.mapv(power_to_db), None)
            })
            .collect::<Result<Vec<_>>>()?;
        let stitched = stitch_clusters(&averaged)?;
        let fits = fit_trace(&stitched, options)?;
        per_pair.insert(k.clone(), PairExtrapolation { stitched, fits });
    }
    let mut gains = vec![Vec::with_capacity(grid.count()); 3];
    for f in 0..grid.count() {
        let fits: Vec<ExtrapolationFit> = keys.iter().map(|k| per_pair[k].fits[f].clone()).collect();
        let g = extrapolated_three_antenna(&fits)?;
        for (slot, id) in gains.iter_mut().zip(ids) {
            slot.push(g.get_db(id).expect("same antenna set"));
        }
    }
    let antennas = ids
        .iter()
        .zip(gains)
        .map(|(id, gain_db)| AntennaGain {
            id: id.clone(),
            sigma_f_db: vec![None; gain_db.len()],
            gain_db,
        })
        .collect();
    let solution = GainSolution::new(SolutionMethod::Extrapolation, grid.frequencies(), antennas)?;
    Ok((solution, per_pair))
}
