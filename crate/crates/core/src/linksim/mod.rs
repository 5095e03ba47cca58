//! Coupling between two boresight-aligned rectangular apertures, and
//! synthetic campaigns built from it.
//!
//! The coupling coefficient is the scalar radiation integral
//!
//! ```text
//! c = (1/λ) ∬∬ f1(x1,y1) f2(x2,y2) e^{-jkR}/R dA1 dA2 / sqrt(∬f1² ∬f2²)
//! R = sqrt(d² + (x1-x2)² + (y1-y2)²)
//! ```
//!
//! normalized so that `|c|²(4πd/λ)²` tends to the product of the aperture
//! gains as `d` grows. The kernel only depends on the offsets `u = x1-x2` and
//! `v = y1-y2`, so the production route integrates over (u, v) with the field
//! cross-correlations as weights. [`aperture_coupling_direct`] evaluates the
//! full four-dimensional integral for cross-checks.

pub mod quadrature;

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::model::{pair_keys, ApertureAntenna, Campaign, Cluster, FrequencyGrid, SweepTrace};
use crate::units::{amplitude_to_db, power_to_db, wavelength};

pub const MIN_POINTS_PER_WAVELENGTH: f64 = 2.0;

/// Nodes used for the numerical field correlation of tapered apertures.
const CORRELATION_NODES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureField {
    #[default]
    Uniform,
    /// cos(πx/w) across the width, uniform across the height.
    CosineTaper,
}

impl ApertureField {
    pub fn as_str(self) -> &'static str {
        match self {
            ApertureField::Uniform => "uniform",
            ApertureField::CosineTaper => "cosine_taper",
        }
    }
}

/// Standing-wave ripple added to every trace: `A·sin(2πd/period)` dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ripple {
    pub amplitude_db: f64,
    pub period: f64,
}

impl Ripple {
    /// Ripple with a period of half a wavelength at `center_hz`.
    pub fn half_wave(amplitude_db: f64, center_hz: f64) -> Self {
        Self {
            amplitude_db,
            period: wavelength(center_hz) / 2.0,
        }
    }

    pub fn at(&self, d: f64) -> f64 {
        self.amplitude_db * (2.0 * PI * d / self.period).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingModel {
    pub aperture_field: ApertureField,
    pub points_per_wavelength: f64,
    /// Replace the aperture integral by pure Friis coupling with the
    /// analytic gains.
    pub ideal_friis: bool,
    pub ripple: Option<Ripple>,
    pub noise_sigma_db: f64,
    pub seed: u64,
}

impl Default for CouplingModel {
    fn default() -> Self {
        Self {
            aperture_field: ApertureField::Uniform,
            points_per_wavelength: 6.0,
            ideal_friis: false,
            ripple: None,
            noise_sigma_db: 0.0,
            seed: 0,
        }
    }
}

impl CouplingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.points_per_wavelength >= MIN_POINTS_PER_WAVELENGTH) {
            return Err(Error::UnderResolved {
                density: self.points_per_wavelength,
                required: MIN_POINTS_PER_WAVELENGTH,
            });
        }
        if !(self.noise_sigma_db.is_finite() && self.noise_sigma_db >= 0.0) {
            return Err(Error::domain("noise sigma", self.noise_sigma_db, "must be >= 0"));
        }
        if let Some(r) = &self.ripple {
            if !(r.amplitude_db.is_finite() && r.amplitude_db >= 0.0) {
                return Err(Error::domain("ripple amplitude", r.amplitude_db, "must be >= 0"));
            }
            require_positive("ripple period", r.period)?;
        }
        Ok(())
    }

    /// Same model without ripple and noise.
    pub fn noiseless(&self) -> Self {
        Self {
            ripple: None,
            noise_sigma_db: 0.0,
            ..*self
        }
    }
}

/// Exact distance between a point on one aperture and a point on the other,
/// laterally offset by (dx, dy).
pub fn ray_path_length(d: f64, dx: f64, dy: f64) -> f64 {
    d.hypot(dx).hypot(dy)
}

/// One aperture dimension: half-extent and field profile.
#[derive(Debug, Clone, Copy)]
struct Profile {
    half: f64,
    tapered: bool,
}

impl Profile {
    fn value(&self, x: f64) -> f64 {
        if self.tapered {
            (PI * x / (2.0 * self.half)).cos()
        } else {
            1.0
        }
    }

    fn integral(&self) -> f64 {
        if self.tapered {
            4.0 * self.half / PI
        } else {
            2.0 * self.half
        }
    }

    fn energy(&self) -> f64 {
        if self.tapered {
            self.half
        } else {
            2.0 * self.half
        }
    }
}

fn profiles(a: &ApertureAntenna, field: ApertureField) -> (Profile, Profile) {
    (
        Profile {
            half: a.width() / 2.0,
            tapered: field == ApertureField::CosineTaper,
        },
        Profile {
            half: a.height() / 2.0,
            tapered: false,
        },
    )
}

/// ∫ p1(x) p2(x - u) dx.
fn correlation(p1: Profile, p2: Profile, u: f64) -> f64 {
    let lo = (-p1.half).max(u - p2.half);
    let hi = p1.half.min(u + p2.half);
    if hi <= lo {
        return 0.0;
    }
    if !p1.tapered && !p2.tapered {
        return hi - lo;
    }
    quadrature::panel(lo, hi, CORRELATION_NODES)
        .iter()
        .map(|(x, w)| w * p1.value(*x) * p2.value(x - u))
        .sum()
}

fn offset_rule(p1: Profile, p2: Profile, lambda: f64, ppw: f64) -> Vec<(f64, f64, f64)> {
    let outer = p1.half + p2.half;
    let inner = (p1.half - p2.half).abs();
    let breaks = [-outer, -inner, inner, outer];
    // Both profiles are even, so the correlation and the kernel are even in
    // u and the symmetric rule can be folded onto u >= 0.
    let tiny = 1e-14 * outer;
    quadrature::composite(&breaks, ppw / lambda)
        .into_iter()
        .filter(|(u, _)| *u > -tiny)
        .map(|(u, w)| {
            let w = if u > tiny { 2.0 * w } else { w };
            (u, w, correlation(p1, p2, u))
        })
        .filter(|(_, _, c)| *c != 0.0)
        .collect()
}

/// Far-field gain of an aperture with the given field, linear.
pub fn analytic_gain(antenna: &ApertureAntenna, lambda: f64, field: ApertureField) -> f64 {
    let (px, py) = profiles(antenna, field);
    4.0 * PI / (lambda * lambda) * (px.integral() * py.integral()).powi(2) / (px.energy() * py.energy())
}

fn check_inputs(d: f64, frequency_hz: f64, model: &CouplingModel) -> Result<f64> {
    require_positive("distance", d)?;
    require_positive("frequency", frequency_hz)?;
    model.validate()?;
    Ok(wavelength(frequency_hz))
}

fn friis_coupling(a1: &ApertureAntenna, a2: &ApertureAntenna, d: f64, lambda: f64, field: ApertureField) -> Complex64 {
    let g = (analytic_gain(a1, lambda, field) * analytic_gain(a2, lambda, field)).sqrt();
    let k = 2.0 * PI / lambda;
    Complex64::from_polar(g * lambda / (4.0 * PI * d), -k * d)
}

/// Coupling coefficient between two apertures facing each other at
/// aperture-to-aperture distance `d`.
pub fn aperture_coupling(
    a1: &ApertureAntenna,
    a2: &ApertureAntenna,
    d: f64,
    frequency_hz: f64,
    model: &CouplingModel,
) -> Result<Complex64> {
    let lambda = check_inputs(d, frequency_hz, model)?;
    if model.ideal_friis {
        return Ok(friis_coupling(a1, a2, d, lambda, model.aperture_field));
    }
    let (x1, y1) = profiles(a1, model.aperture_field);
    let (x2, y2) = profiles(a2, model.aperture_field);
    let ppw = model.points_per_wavelength;
    let us = offset_rule(x1, x2, lambda, ppw);
    let vs = offset_rule(y1, y2, lambda, ppw);
    let k = 2.0 * PI / lambda;
    let mut sum = Complex64::new(0.0, 0.0);
    for (u, wu, cu) in &us {
        let mut row = Complex64::new(0.0, 0.0);
        for (v, wv, cv) in &vs {
            let r = ray_path_length(d, *u, *v);
            row += Complex64::from_polar(wv * cv / r, -k * r);
        }
        sum += row * (wu * cu);
    }
    let norm = (x1.energy() * y1.energy() * x2.energy() * y2.energy()).sqrt();
    Ok(sum / (lambda * norm))
}

/// The same integral as [`aperture_coupling`], evaluated as a tensor
/// Gauss-Legendre rule over both apertures. Cost grows with the fourth power
/// of the aperture size in wavelengths.
pub fn aperture_coupling_direct(
    a1: &ApertureAntenna,
    a2: &ApertureAntenna,
    d: f64,
    frequency_hz: f64,
    model: &CouplingModel,
) -> Result<Complex64> {
    let lambda = check_inputs(d, frequency_hz, model)?;
    let density = model.points_per_wavelength / lambda;
    let axis = |p: Profile| -> Vec<(f64, f64)> {
        quadrature::composite(&[-p.half, p.half], density)
            .into_iter()
            .map(|(x, w)| (x, w * p.value(x)))
            .collect()
    };
    let (px1, py1) = profiles(a1, model.aperture_field);
    let (px2, py2) = profiles(a2, model.aperture_field);
    let (gx1, gy1, gx2, gy2) = (axis(px1), axis(py1), axis(px2), axis(py2));
    let k = 2.0 * PI / lambda;
    let sum: Complex64 = gx1
        .par_iter()
        .map(|(x1, w1)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (y1, v1) in &gy1 {
                for (x2, w2) in &gx2 {
                    for (y2, v2) in &gy2 {
                        let r = ray_path_length(d, x1 - x2, y1 - y2);
                        acc += Complex64::from_polar(v1 * w2 * v2 / r, -k * r);
                    }
                }
            }
            acc * *w1
        })
        .sum();
    let norm = (px1.energy() * py1.energy() * px2.energy() * py2.energy()).sqrt();
    Ok(sum / (lambda * norm))
}

/// Gain product implied by the coupling at `d`, in dB.
pub fn recovered_gain_product_db(
    a1: &ApertureAntenna,
    a2: &ApertureAntenna,
    d: f64,
    frequency_hz: f64,
    model: &CouplingModel,
) -> Result<f64> {
    let c = aperture_coupling(a1, a2, d, frequency_hz, model)?;
    let lambda = wavelength(frequency_hz);
    Ok(power_to_db(c.norm_sqr()) + crate::units::path_loss_db(d, lambda))
}

/// Error of the Friis gain product at distance `d` relative to the far-field
/// product, in dB.
pub fn gain_product_error_db(
    a1: &ApertureAntenna,
    a2: &ApertureAntenna,
    d: f64,
    frequency_hz: f64,
    model: &CouplingModel,
) -> Result<f64> {
    let lambda = wavelength(frequency_hz);
    let truth = power_to_db(
        analytic_gain(a1, lambda, model.aperture_field) * analytic_gain(a2, lambda, model.aperture_field),
    );
    Ok(recovered_gain_product_db(a1, a2, d, frequency_hz, model)? - truth)
}

/// |S21| in dB over a distance × frequency grid, without impairments.
pub fn ideal_s21_db(
    a1: &ApertureAntenna,
    a2: &ApertureAntenna,
    distances: &[f64],
    grid: &FrequencyGrid,
    model: &CouplingModel,
) -> Result<Array2<f64>> {
    model.validate()?;
    let fc = grid.count();
    let values = (0..distances.len() * fc)
        .into_par_iter()
        .map(|i| {
            let c = aperture_coupling(a1, a2, distances[i / fc], grid.frequency(i % fc), model)?;
            Ok(amplitude_to_db(c.norm()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Array2::from_shape_vec((distances.len(), fc), values).expect("shape"))
}

fn noise_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Adds ripple and per-sample Gaussian dB noise. The noise of each
/// (stream, run) comes from its own generator stream, so results do not
/// depend on evaluation order.
fn impair(ideal: &Array2<f64>, distances: &[f64], model: &CouplingModel, stream: u64, run: u32) -> Result<Array2<f64>> {
    let mut out = ideal.clone();
    if let Some(r) = &model.ripple {
        for (mut row, d) in out.rows_mut().into_iter().zip(distances) {
            let delta = r.at(*d);
            row.mapv_inplace(|v| v + delta);
        }
    }
    if model.noise_sigma_db > 0.0 {
        let normal = Normal::new(0.0, model.noise_sigma_db).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut rng = noise_stream(model.seed, (stream << 32) | u64::from(run));
        for v in out.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// One pair's noiseless sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealSweep {
    pub pair_index: usize,
    pub segment_index: usize,
    pub cluster: Cluster,
    pub distances: Vec<f64>,
    pub s21_db: Array2<f64>,
}

/// Noiseless sweeps of a campaign, computed once and then realized with any
/// number of impairment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealCampaign {
    pub antennas: [ApertureAntenna; 3],
    pub grid: FrequencyGrid,
    pub sweeps: Vec<IdealSweep>,
}

fn pair_members(pair_index: usize) -> (usize, usize) {
    match pair_index {
        0 => (0, 1),
        1 => (0, 2),
        _ => (1, 2),
    }
}

/// Computes the noiseless sweeps. `clusters[p]` lists the segments of pair
/// `p`, with pairs ordered (0,1), (0,2), (1,2).
pub fn ideal_campaign(
    antennas: &[ApertureAntenna; 3],
    clusters: &[Vec<Cluster>; 3],
    grid: &FrequencyGrid,
    model: &CouplingModel,
) -> Result<IdealCampaign> {
    model.validate()?;
    pair_keys(antennas)?;
    let mut jobs = Vec::new();
    for (p, list) in clusters.iter().enumerate() {
        if list.is_empty() {
            let keys = pair_keys(antennas)?;
            return Err(Error::MissingPair(keys[p].to_string()));
        }
        for (s, c) in list.iter().enumerate() {
            jobs.push((p, s, *c));
        }
    }
    let fc = grid.count();
    // Flatten every (sweep, m, f) so the thread pool stays busy.
    let tasks: Vec<(usize, f64, usize)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(j, (_, _, c))| {
            (0..c.count()).flat_map(move |m| (0..fc).map(move |f| (j, c.distance(m), f)))
        })
        .collect();
    let values = tasks
        .par_iter()
        .map(|(j, d, f)| {
            let (i1, i2) = pair_members(jobs[*j].0);
            let c = aperture_coupling(&antennas[i1], &antennas[i2], *d, grid.frequency(*f), model)?;
            Ok(amplitude_to_db(c.norm()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut offset = 0;
    let sweeps = jobs
        .iter()
        .map(|(p, s, c)| {
            let n = c.count() * fc;
            let s21_db = Array2::from_shape_vec((c.count(), fc), values[offset..offset + n].to_vec()).expect("shape");
            offset += n;
            IdealSweep {
                pair_index: *p,
                segment_index: *s,
                cluster: *c,
                distances: c.distances(),
                s21_db,
            }
        })
        .collect();
    Ok(IdealCampaign {
        antennas: antennas.clone(),
        grid: *grid,
        sweeps,
    })
}

impl IdealCampaign {
    /// All sweeps with ripple and `runs` noise realizations applied, in
    /// (pair, segment, run) order.
    pub fn realize_traces(&self, model: &CouplingModel, runs: u32) -> Result<Vec<SweepTrace>> {
        model.validate()?;
        if runs == 0 {
            return Err(Error::domain("run count", 0.0, "must be at least 1"));
        }
        let keys = pair_keys(&self.antennas)?;
        let jobs: Vec<(&IdealSweep, u32)> = self
            .sweeps
            .iter()
            .flat_map(|s| (0..runs).map(move |r| (s, r)))
            .collect();
        jobs.par_iter()
            .map(|(s, r)| {
                let stream = ((s.pair_index as u64) << 16) | s.segment_index as u64;
                let data = impair(&s.s21_db, &s.distances, model, stream, *r)?;
                SweepTrace::new(keys[s.pair_index].clone(), *r, self.grid, s.distances.clone(), data, None)?
                    .with_cluster(s.cluster)
            })
            .collect()
    }

    /// A campaign from the first segment of every pair.
    pub fn realize(&self, model: &CouplingModel, runs: u32) -> Result<Campaign> {
        let traces = self
            .realize_traces(model, runs)?
            .into_iter()
            .zip(self.sweeps.iter().flat_map(|s| std::iter::repeat(s.segment_index).take(runs as usize)))
            .filter(|(_, seg)| *seg == 0)
            .map(|(t, _)| t)
            .collect();
        Campaign::new(self.antennas.to_vec(), self.grid, traces)
    }
}

/// Synthesizes a cluster campaign. `clusters` is indexed like the antenna
/// pairs (0,1), (0,2), (1,2).
pub fn synthesize_campaign(
    antennas: &[ApertureAntenna; 3],
    clusters: &[Cluster; 3],
    grid: &FrequencyGrid,
    model: &CouplingModel,
    runs: u32,
) -> Result<Campaign> {
    let lists = [vec![clusters[0]], vec![clusters[1]], vec![clusters[2]]];
    ideal_campaign(antennas, &lists, grid, model)?.realize(model, runs)
}

/// Synthesizes several overlapping segments per pair for extrapolation.
pub fn synthesize_segments(
    antennas: &[ApertureAntenna; 3],
    clusters: &[Vec<Cluster>; 3],
    grid: &FrequencyGrid,
    model: &CouplingModel,
    runs: u32,
) -> Result<Vec<SweepTrace>> {
    ideal_campaign(antennas, clusters, grid, model)?.realize_traces(model, runs)
}
