//! Domain types shared by the whole pipeline.
//!
//! Distances are aperture-to-aperture in meters, frequencies in Hz. All types
//! validate on construction and are immutable afterwards.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::units::{db_to_amplitude, db_to_power, to_radians, wavelength};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaKind {
    RectangularHorn,
    /// Open-ended waveguide; width and height are the inner dimensions.
    OpenWaveguide,
}

impl AntennaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AntennaKind::RectangularHorn => "rectangular_horn",
            AntennaKind::OpenWaveguide => "open_waveguide",
        }
    }
}

impl fmt::Display for AntennaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AntennaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular_horn" => Ok(AntennaKind::RectangularHorn),
            "open_waveguide" => Ok(AntennaKind::OpenWaveguide),
            other => Err(Error::Config(format!("unknown antenna kind {other:?}"))),
        }
    }
}

/// Ids end up in file headers and pair keys, so the separator characters used
/// there are not allowed.
pub fn validate_id(id: &str) -> Result<()> {
    let bad = id.is_empty()
        || id
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '/' | '#' | '=' | '"'));
    if bad {
        Err(Error::InvalidAntenna {
            id: id.to_string(),
            reason: "ids must be non-empty and contain no whitespace or any of , / # = \""
                .to_string(),
        })
    } else {
        Ok(())
    }
}

/// A rectangular aperture antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureAntenna {
    id: String,
    model: String,
    kind: AntennaKind,
    width: f64,
    height: f64,
    diagonal: f64,
}

impl ApertureAntenna {
    pub fn new(id: &str, kind: AntennaKind, width: f64, height: f64) -> Result<Self> {
        validate_id(id)?;
        for (name, v) in [("aperture width", width), ("aperture height", height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidAntenna {
                    id: id.to_string(),
                    reason: format!("{name} must be positive, got {v}"),
                });
            }
        }
        Ok(Self {
            id: id.to_string(),
            model: id.to_string(),
            kind,
            width,
            height,
            diagonal: width.hypot(height),
        })
    }

    /// Builds the rectangle with the given diagonal and width:height ratio.
    pub fn from_diagonal(id: &str, kind: AntennaKind, diagonal: f64, aspect: f64) -> Result<Self> {
        require_positive("diagonal", diagonal)?;
        require_positive("aspect ratio", aspect)?;
        let height = diagonal / aspect.hypot(1.0);
        Self::new(id, kind, aspect * height, height)
    }

    /// Model label used to group physically identical antennas.
    pub fn with_model(mut self, model: &str) -> Self {
        self.model = model.to_string();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn kind(&self) -> AntennaKind {
        self.kind
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Largest aperture dimension, the diagonal of the rectangle.
    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Uniformly spaced frequency points, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    start_hz: f64,
    stop_hz: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, stop_hz: f64, count: usize) -> Result<Self> {
        require_positive("grid start frequency", start_hz)?;
        require_positive("grid stop frequency", stop_hz)?;
        if start_hz >= stop_hz {
            return Err(Error::domain(
                "grid stop frequency",
                stop_hz,
                "must exceed the start frequency",
            ));
        }
        if count < 2 {
            return Err(Error::domain(
                "grid point count",
                count as f64,
                "at least two points are required",
            ));
        }
        Ok(Self {
            start_hz,
            stop_hz,
            count,
        })
    }

    pub fn start_hz(&self) -> f64 {
        self.start_hz
    }

    pub fn stop_hz(&self) -> f64 {
        self.stop_hz
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn step_hz(&self) -> f64 {
        (self.stop_hz - self.start_hz) / (self.count - 1) as f64
    }

    pub fn frequency(&self, index: usize) -> f64 {
        if index + 1 == self.count {
            self.stop_hz
        } else {
            self.start_hz + self.step_hz() * index as f64
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.frequency(i)).collect()
    }

    pub fn wavelength(&self, index: usize) -> f64 {
        wavelength(self.frequency(index))
    }

    pub fn center_hz(&self) -> f64 {
        0.5 * (self.start_hz + self.stop_hz)
    }
}

/// A contiguous window of aperture-to-aperture distances.
///
/// Point `i` sits at `start_distance + pair_offset + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    start_distance: f64,
    step: f64,
    count: usize,
    pair_offset: f64,
}

impl Cluster {
    pub fn new(start_distance: f64, step: f64, count: usize, pair_offset: f64) -> Result<Self> {
        require_positive("cluster step", step)?;
        if count < 2 {
            return Err(Error::domain(
                "cluster point count",
                count as f64,
                "at least two points are required",
            ));
        }
        if !start_distance.is_finite() || !pair_offset.is_finite() {
            return Err(Error::domain(
                "cluster start distance",
                start_distance,
                "must be finite",
            ));
        }
        if start_distance + pair_offset <= 0.0 {
            return Err(Error::domain(
                "cluster start distance",
                start_distance + pair_offset,
                "all distances must be positive",
            ));
        }
        Ok(Self {
            start_distance,
            step,
            count,
            pair_offset,
        })
    }

    pub fn start_distance(&self) -> f64 {
        self.start_distance
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn pair_offset(&self) -> f64 {
        self.pair_offset
    }

    pub fn with_offset(&self, pair_offset: f64) -> Result<Self> {
        Self::new(self.start_distance, self.step, self.count, pair_offset)
    }

    pub fn distance(&self, index: usize) -> f64 {
        self.start_distance + self.pair_offset + self.step * index as f64
    }

    pub fn distances(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.distance(i)).collect()
    }

    pub fn first(&self) -> f64 {
        self.distance(0)
    }

    pub fn last(&self) -> f64 {
        self.distance(self.count - 1)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.first() + self.last())
    }
}

/// Unordered antenna pair; `(a, b)` and `(b, a)` produce the same key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    first: String,
    second: String,
}

impl PairKey {
    pub fn new(a: &str, b: &str) -> Result<Self> {
        validate_id(a)?;
        validate_id(b)?;
        if a == b {
            return Err(Error::InvalidAntenna {
                id: a.to_string(),
                reason: "a pair needs two distinct antennas".to_string(),
            });
        }
        let (first, second) = if a <= b { (a, b) } else { (b, a) };
        Ok(Self {
            first: first.to_string(),
            second: second.to_string(),
        })
    }

    pub fn first(&self) -> &str {
        &self.first
    }

    pub fn second(&self) -> &str {
        &self.second
    }

    pub fn contains(&self, id: &str) -> bool {
        self.first == id || self.second == id
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.first, self.second)
    }
}

/// One repetition of a distance sweep for one antenna pair.
///
/// Samples are kept as recorded: `s21_db` is 20·log10|S21| (equivalently the
/// power ratio |S21|² in dB) and the optional phase is in degrees. Indexing is
/// `[distance index, frequency index]`. A sample of `-inf` dB means zero
/// magnitude and is carried through as a gap by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    pair: PairKey,
    run_index: u32,
    grid: FrequencyGrid,
    cluster: Option<Cluster>,
    distances: Vec<f64>,
    s21_db: Array2<f64>,
    phase_deg: Option<Array2<f64>>,
}

impl SweepTrace {
    pub fn new(
        pair: PairKey,
        run_index: u32,
        grid: FrequencyGrid,
        distances: Vec<f64>,
        s21_db: Array2<f64>,
        phase_deg: Option<Array2<f64>>,
    ) -> Result<Self> {
        let shape = (distances.len(), grid.count());
        if s21_db.dim() != shape {
            return Err(Error::ShapeMismatch(format!(
                "pair {pair}: s21 array is {:?}, expected {shape:?}",
                s21_db.dim()
            )));
        }
        if let Some(phase) = &phase_deg {
            if phase.dim() != shape {
                return Err(Error::ShapeMismatch(format!(
                    "pair {pair}: phase array is {:?}, expected {shape:?}",
                    phase.dim()
                )));
            }
            if phase.iter().any(|p| !p.is_finite()) {
                return Err(Error::domain("phase", f64::NAN, "must be finite"));
            }
        }
        if distances.is_empty() {
            return Err(Error::ShapeMismatch(format!("pair {pair}: no distances")));
        }
        for (i, d) in distances.iter().enumerate() {
            require_positive("distance", *d)?;
            if i > 0 && *d <= distances[i - 1] {
                return Err(Error::ShapeMismatch(format!(
                    "pair {pair}: distances must be strictly increasing (index {i})"
                )));
            }
        }
        if let Some(bad) = s21_db.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
            return Err(Error::domain(
                "s21 sample",
                *bad,
                "dB values must be finite or -inf",
            ));
        }
        Ok(Self {
            pair,
            run_index,
            grid,
            cluster: None,
            distances,
            s21_db,
            phase_deg,
        })
    }

    /// Builds a trace from linear magnitudes and phases in radians.
    pub fn from_linear(
        pair: PairKey,
        run_index: u32,
        grid: FrequencyGrid,
        distances: Vec<f64>,
        magnitude: &Array2<f64>,
        phase_rad: Option<&Array2<f64>>,
    ) -> Result<Self> {
        if let Some(bad) = magnitude.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::domain("s21 magnitude", *bad, "must be >= 0"));
        }
        let s21_db = magnitude.mapv(crate::units::amplitude_to_db);
        let phase_deg = phase_rad.map(|p| p.mapv(crate::units::to_degrees));
        Self::new(pair, run_index, grid, distances, s21_db, phase_deg)
    }

    /// Attaches the cluster the distances were generated from.
    pub fn with_cluster(mut self, cluster: Cluster) -> Result<Self> {
        if cluster.count() != self.distances.len() {
            return Err(Error::ShapeMismatch(format!(
                "pair {}: cluster has {} points, trace has {}",
                self.pair,
                cluster.count(),
                self.distances.len()
            )));
        }
        self.cluster = Some(cluster);
        Ok(self)
    }

    pub fn pair(&self) -> &PairKey {
        &self.pair
    }

    pub fn run_index(&self) -> u32 {
        self.run_index
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn cluster(&self) -> Option<&Cluster> {
        self.cluster.as_ref()
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn s21_db(&self) -> &Array2<f64> {
        &self.s21_db
    }

    pub fn phase_deg(&self) -> Option<&Array2<f64>> {
        self.phase_deg.as_ref()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.s21_db.dim()
    }

    /// Linear |S21|.
    pub fn magnitude(&self) -> Array2<f64> {
        self.s21_db.mapv(db_to_amplitude)
    }

    /// Linear power ratio |S21|².
    pub fn power(&self) -> Array2<f64> {
        self.s21_db.mapv(db_to_power)
    }

    pub fn phase_rad(&self) -> Option<Array2<f64>> {
        self.phase_deg.as_ref().map(|p| p.mapv(to_radians))
    }
}

/// Three antennas, a complete triangle of pair sweeps and the frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    antennas: [ApertureAntenna; 3],
    grid: FrequencyGrid,
    traces: BTreeMap<PairKey, Vec<SweepTrace>>,
}

impl Campaign {
    pub fn new(
        antennas: Vec<ApertureAntenna>,
        grid: FrequencyGrid,
        traces: Vec<SweepTrace>,
    ) -> Result<Self> {
        let antennas: [ApertureAntenna; 3] = antennas.try_into().map_err(|v: Vec<_>| {
            Error::ShapeMismatch(format!(
                "a campaign needs exactly three antennas, got {}",
                v.len()
            ))
        })?;
        for i in 0..3 {
            for j in i + 1..3 {
                if antennas[i].id() == antennas[j].id() {
                    return Err(Error::InvalidAntenna {
                        id: antennas[i].id().to_string(),
                        reason: "duplicate antenna id".to_string(),
                    });
                }
            }
        }
        let keys = pair_keys(&antennas)?;
        let mut by_pair: BTreeMap<PairKey, Vec<SweepTrace>> = BTreeMap::new();
        for trace in traces {
            if !keys.contains(trace.pair()) {
                return Err(Error::ShapeMismatch(format!(
                    "trace for pair {} does not belong to this campaign",
                    trace.pair()
                )));
            }
            if *trace.grid() != grid {
                return Err(Error::ShapeMismatch(format!(
                    "pair {} run {}: frequency grid differs from the campaign grid",
                    trace.pair(),
                    trace.run_index()
                )));
            }
            by_pair.entry(trace.pair().clone()).or_default().push(trace);
        }
        let mut runs = None;
        let mut points = None;
        for key in &keys {
            let list = by_pair
                .get_mut(key)
                .ok_or_else(|| Error::MissingPair(key.to_string()))?;
            list.sort_by_key(|t| t.run_index());
            for w in list.windows(2) {
                if w[0].run_index() == w[1].run_index() {
                    return Err(Error::DuplicatePair(format!(
                        "{key} run {}",
                        w[0].run_index()
                    )));
                }
                if w[0].cluster() != w[1].cluster() {
                    return Err(Error::ShapeMismatch(format!(
                        "pair {key}: runs disagree on the cluster"
                    )));
                }
            }
            for t in list.iter() {
                if t.distances() != list[0].distances() {
                    return Err(Error::ShapeMismatch(format!(
                        "pair {key}: runs disagree on the distances"
                    )));
                }
            }
            let n = list.len();
            let m = list[0].distances().len();
            if *runs.get_or_insert(n) != n {
                return Err(Error::ShapeMismatch(format!(
                    "pair {key} has {n} runs, other pairs have {}",
                    runs.unwrap()
                )));
            }
            if *points.get_or_insert(m) != m {
                return Err(Error::ShapeMismatch(format!(
                    "pair {key} has {m} distance points, other pairs have {}",
                    points.unwrap()
                )));
            }
        }
        Ok(Self {
            antennas,
            grid,
            traces: by_pair,
        })
    }

    pub fn antennas(&self) -> &[ApertureAntenna; 3] {
        &self.antennas
    }

    pub fn antenna(&self, id: &str) -> Option<&ApertureAntenna> {
        self.antennas.iter().find(|a| a.id() == id)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Pair keys in antenna order: (0,1), (0,2), (1,2).
    pub fn pair_keys(&self) -> [PairKey; 3] {
        pair_keys(&self.antennas).expect("validated at construction")
    }

    pub fn traces(&self, pair: &PairKey) -> &[SweepTrace] {
        self.traces.get(pair).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn cluster(&self, pair: &PairKey) -> Option<&Cluster> {
        self.traces(pair).first().and_then(|t| t.cluster())
    }

    pub fn run_count(&self) -> usize {
        self.traces.values().next().map_or(0, Vec::len)
    }

    pub fn point_count(&self) -> usize {
        self.traces
            .values()
            .next()
            .map_or(0, |t| t[0].distances().len())
    }

    /// Every trace, pair by pair in [`Campaign::pair_keys`] order.
    pub fn all_traces(&self) -> Vec<&SweepTrace> {
        self.pair_keys()
            .iter()
            .flat_map(|k| self.traces(k))
            .collect()
    }
}

pub(crate) fn pair_keys(antennas: &[ApertureAntenna; 3]) -> Result<[PairKey; 3]> {
    Ok([
        PairKey::new(antennas[0].id(), antennas[1].id())?,
        PairKey::new(antennas[0].id(), antennas[2].id())?,
        PairKey::new(antennas[1].id(), antennas[2].id())?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionMethod {
    /// Compact cluster measurement: per-point three-antenna solve, averaged.
    Ccm,
    Extrapolation,
}

impl SolutionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolutionMethod::Ccm => "ccm",
            SolutionMethod::Extrapolation => "extrapolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaGain {
    pub id: String,
    pub gain_db: Vec<f64>,
    /// `None` where fewer than two valid points were available.
    pub sigma_f_db: Vec<Option<f64>>,
}

/// Realized gain per antenna and frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSolution {
    method: SolutionMethod,
    frequencies: Vec<f64>,
    antennas: Vec<AntennaGain>,
}

impl GainSolution {
    pub fn new(
        method: SolutionMethod,
        frequencies: Vec<f64>,
        antennas: Vec<AntennaGain>,
    ) -> Result<Self> {
        for a in &antennas {
            if a.gain_db.len() != frequencies.len() || a.sigma_f_db.len() != frequencies.len() {
                return Err(Error::ShapeMismatch(format!(
                    "antenna {}: {} gains and {} deviations for {} frequencies",
                    a.id,
                    a.gain_db.len(),
                    a.sigma_f_db.len(),
                    frequencies.len()
                )));
            }
            for s in a.sigma_f_db.iter().flatten() {
                require_non_negative("sigma_f", *s)?;
            }
        }
        Ok(Self {
            method,
            frequencies,
            antennas,
        })
    }

    pub fn method(&self) -> SolutionMethod {
        self.method
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn antennas(&self) -> &[AntennaGain] {
        &self.antennas
    }

    pub fn antenna(&self, id: &str) -> Option<&AntennaGain> {
        self.antennas.iter().find(|a| a.id == id)
    }

    /// Mean gain over all frequencies.
    pub fn mean_gain_db(&self, id: &str) -> Option<f64> {
        let a = self.antenna(id)?;
        let valid: Vec<f64> = a.gain_db.iter().copied().filter(|g| g.is_finite()).collect();
        (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn pair(a: &str, b: &str) -> PairKey {
        PairKey::new(a, b).unwrap()
    }

    #[test]
    fn diagonal_is_derived() {
        let a = ApertureAntenna::new("P", AntennaKind::RectangularHorn, 0.003, 0.004).unwrap();
        assert!((a.diagonal() - 0.005).abs() <= 1e-12 * 0.005);
        let wg = ApertureAntenna::new("WR", AntennaKind::OpenWaveguide, 1.651e-3, 0.825e-3).unwrap();
        assert_eq!(wg.kind(), AntennaKind::OpenWaveguide);
    }

    #[test]
    fn from_diagonal_round_trips() {
        let a = ApertureAntenna::from_diagonal("P", AntennaKind::RectangularHorn, 0.022679, 4.0 / 3.0)
            .unwrap();
        assert!((a.diagonal() - 0.022679).abs() < 1e-15);
        assert!((a.width() / a.height() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_antennas() {
        assert!(ApertureAntenna::new("P", AntennaKind::RectangularHorn, 0.0, 1.0).is_err());
        assert!(ApertureAntenna::new("P", AntennaKind::RectangularHorn, 1.0, -1.0).is_err());
        assert!(ApertureAntenna::new("a b", AntennaKind::RectangularHorn, 1.0, 1.0).is_err());
        assert!(ApertureAntenna::new("", AntennaKind::RectangularHorn, 1.0, 1.0).is_err());
    }

    #[test]
    fn pair_key_is_canonical() {
        assert_eq!(pair("B", "A"), pair("A", "B"));
        assert_eq!(pair("B", "A").to_string(), "A/B");
        assert!(PairKey::new("A", "A").is_err());
    }

    #[test]
    fn grid_points() {
        let g = FrequencyGrid::new(145e9, 170e9, 667).unwrap();
        assert_eq!(g.frequency(0), 145e9);
        assert_eq!(g.frequency(666), 170e9);
        assert!(FrequencyGrid::new(170e9, 145e9, 3).is_err());
        assert!(FrequencyGrid::new(145e9, 170e9, 1).is_err());
    }

    #[test]
    fn cluster_distances_include_offset() {
        let c = Cluster::new(1.20, 0.0002, 151, 0.028).unwrap();
        assert!((c.first() - 1.228).abs() < 1e-12);
        assert!((c.last() - 1.258).abs() < 1e-12);
        assert!(Cluster::new(1.0, 0.0, 10, 0.0).is_err());
        assert!(Cluster::new(1.0, 0.1, 1, 0.0).is_err());
        assert!(Cluster::new(0.01, 0.1, 3, -0.02).is_err());
    }

    #[test]
    fn trace_validation() {
        let g = FrequencyGrid::new(1e9, 2e9, 2).unwrap();
        let ok = SweepTrace::new(pair("A", "B"), 0, g, vec![1.0, 2.0], Array2::zeros((2, 2)), None);
        assert!(ok.is_ok());
        let non_monotone =
            SweepTrace::new(pair("A", "B"), 0, g, vec![2.0, 1.0], Array2::zeros((2, 2)), None);
        assert!(non_monotone.is_err());
        let shape = SweepTrace::new(pair("A", "B"), 0, g, vec![1.0], Array2::zeros((2, 2)), None);
        assert!(shape.is_err());
        let nan = SweepTrace::new(
            pair("A", "B"),
            0,
            g,
            vec![1.0, 2.0],
            Array2::from_elem((2, 2), f64::NAN),
            None,
        );
        assert!(nan.is_err());
        let negative = SweepTrace::from_linear(
            pair("A", "B"),
            0,
            g,
            vec![1.0, 2.0],
            &Array2::from_elem((2, 2), -1.0),
            None,
        );
        assert!(negative.is_err());
    }

    #[test]
    fn campaign_requires_all_pairs() {
        let g = FrequencyGrid::new(1e9, 2e9, 2).unwrap();
        let ants: Vec<_> = ["A", "B", "C"]
            .iter()
            .map(|id| ApertureAntenna::new(id, AntennaKind::RectangularHorn, 0.01, 0.01).unwrap())
            .collect();
        let t = |a, b| {
            SweepTrace::new(pair(a, b), 0, g, vec![1.0, 2.0], Array2::zeros((2, 2)), None).unwrap()
        };
        let err = Campaign::new(ants.clone(), g, vec![t("A", "B"), t("A", "C")]).unwrap_err();
        assert!(matches!(err, Error::MissingPair(ref p) if p == "B/C"));
        let c = Campaign::new(ants.clone(), g, vec![t("A", "B"), t("C", "A"), t("B", "C")]).unwrap();
        assert_eq!(c.run_count(), 1);
        assert_eq!(c.point_count(), 2);
        let dup = Campaign::new(ants, g, vec![t("A", "B"), t("A", "B"), t("A", "C"), t("B", "C")]);
        assert!(matches!(dup, Err(Error::DuplicatePair(_))));
    }

    proptest! {
        #[test]
        fn diagonal_is_monotone(w in 1e-4f64..1.0, h in 1e-4f64..1.0, dw in 0.0f64..0.5, dh in 0.0f64..0.5) {
            let a = ApertureAntenna::new("A", AntennaKind::RectangularHorn, w, h).unwrap();
            let b = ApertureAntenna::new("A", AntennaKind::RectangularHorn, w + dw, h + dh).unwrap();
            prop_assert!(b.diagonal() >= a.diagonal());
            prop_assert!((a.diagonal() - (w * w + h * h).sqrt()).abs() <= 1e-12 * a.diagonal());
        }
    }
}
