//! Campaign configuration.
//!
//! A TOML document describing the antennas, frequency grid, cluster table,
//! per-pair distance offsets and the options of every processing stage.
//! Lengths and frequencies are strings with an explicit unit (`"2.8 cm"`,
//! `"170 GHz"`), levels carry `dB`. Unknown keys are rejected.
//!
//! Dotted overrides (`simulation.seed=7`, `antenna.0.diagonal=22 mm`) are
//! applied to the document before it is checked.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::extrapolate::{ExtrapolationOptions, MAX_ORDER};
use crate::linksim::{ApertureField, CouplingModel, Ripple};
use crate::model::{pair_keys, AntennaKind, ApertureAntenna, Cluster, FrequencyGrid, PairKey};
use crate::solver::PathLossMode;
use crate::stats::{Averaging, Deviation, ReductionOptions};

/// The built-in three-antenna campaign.
pub const DEFAULT_CONFIG: &str = include_str!("default.toml");

fn split_unit(text: &str) -> Option<(&str, &str)> {
    let t = text.trim();
    let end = t
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(t.len());
    Some((&t[..end], t[end..].trim()))
}

/// Parses `number` scaled by 10^shift by moving the decimal exponent, so
/// "2.8 cm" gives exactly the f64 nearest to 0.028.
fn parse_shifted(number: &str, shift: i32) -> Option<f64> {
    let (mantissa, exp) = match number.find(['e', 'E']) {
        Some(i) => (&number[..i], number[i + 1..].parse::<i32>().ok()?),
        None => (number, 0),
    };
    mantissa.parse::<f64>().ok()?;
    let v: f64 = format!("{mantissa}e{}", exp + shift).parse().ok()?;
    v.is_finite().then_some(v)
}

/// Units as (name, power of ten).
fn scaled(text: &str, what: &str, units: &[(&str, i32)]) -> std::result::Result<f64, String> {
    let names: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
    let bad = || format!("cannot read {what} {text:?}");
    let (number, unit) = split_unit(text).ok_or_else(bad)?;
    if unit.is_empty() {
        return Err(format!("{what} {text:?} needs a unit ({})", names.join(", ")));
    }
    let shift = units
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, e)| *e)
        .ok_or_else(|| format!("unknown {what} unit {unit:?} in {text:?} (use {})", names.join(", ")))?;
    parse_shifted(number, shift).ok_or_else(bad)
}

const LENGTH_UNITS: &[(&str, i32)] = &[("m", 0), ("cm", -2), ("mm", -3), ("um", -6)];
const FREQUENCY_UNITS: &[(&str, i32)] = &[("Hz", 0), ("kHz", 3), ("MHz", 6), ("GHz", 9), ("THz", 12)];

/// A length in meters, written with a unit.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "String")]
pub struct Length(pub f64);

impl TryFrom<String> for Length {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        scaled(&s, "length", LENGTH_UNITS).map(Length)
    }
}

/// A frequency in Hz, written with a unit.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "String")]
pub struct Frequency(pub f64);

impl TryFrom<String> for Frequency {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        scaled(&s, "frequency", FREQUENCY_UNITS).map(Frequency)
    }
}

/// A level in dB.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "String")]
pub struct Level(pub f64);

impl TryFrom<String> for Level {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        scaled(&s, "level", &[("dB", 0)]).map(Level)
    }
}

/// A length or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "String")]
pub enum AutoLength {
    Auto,
    Fixed(f64),
}

impl TryFrom<String> for AutoLength {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s.trim() == "auto" {
            Ok(AutoLength::Auto)
        } else {
            Length::try_from(s).map(|l| AutoLength::Fixed(l.0))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    frequency: RawFrequency,
    antenna: Vec<RawAntenna>,
    clusters: RawClusters,
    #[serde(default)]
    pair: Vec<RawPair>,
    #[serde(default)]
    campaign: RawCampaign,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    stats: RawStats,
    #[serde(default)]
    simulation: RawSimulation,
    #[serde(default)]
    extrapolation: RawExtrapolation,
    #[serde(default)]
    ffdist: RawFfdist,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrequency {
    start: Frequency,
    stop: Frequency,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAntenna {
    id: String,
    #[serde(default)]
    model: String,
    #[serde(default = "default_kind")]
    kind: AntennaKind,
    width: Option<Length>,
    height: Option<Length>,
    diagonal: Option<Length>,
    aspect: Option<f64>,
}

fn default_kind() -> AntennaKind {
    AntennaKind::RectangularHorn
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClusters {
    starts: Vec<Length>,
    step: Length,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    antennas: [String; 2],
    offset: Length,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCampaign {
    cluster: usize,
    runs: u32,
}

impl Default for RawCampaign {
    fn default() -> Self {
        Self { cluster: 1, runs: 6 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default)]
    mode: PathLossMode,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStats {
    #[serde(default)]
    averaging: Averaging,
    #[serde(default)]
    deviation: Deviation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSimulation {
    aperture_field: ApertureField,
    points_per_wavelength: f64,
    ideal_friis: bool,
    noise_sigma: Level,
    ripple_amplitude: Level,
    ripple_period: AutoLength,
    seed: u64,
}

impl Default for RawSimulation {
    fn default() -> Self {
        Self {
            aperture_field: ApertureField::Uniform,
            points_per_wavelength: 6.0,
            ideal_friis: false,
            noise_sigma: Level(0.0),
            ripple_amplitude: Level(0.0),
            ripple_period: AutoLength::Auto,
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExtrapolation {
    order: usize,
    start: Length,
    stop: Length,
    segments: usize,
    overlap: Length,
    step: Length,
    smoothing_window: AutoLength,
}

impl Default for RawExtrapolation {
    fn default() -> Self {
        Self {
            order: 2,
            start: Length(0.35),
            stop: Length(1.75),
            segments: 3,
            overlap: Length(0.01),
            step: Length(1e-3),
            smoothing_window: AutoLength::Auto,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFfdist {
    frequency: Frequency,
}

impl Default for RawFfdist {
    fn default() -> Self {
        Self {
            frequency: Frequency(170e9),
        }
    }
}

/// Layout of the wide-span sweep used for extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationPlan {
    pub order: usize,
    pub start: f64,
    pub stop: f64,
    pub segments: usize,
    pub overlap: f64,
    pub step: f64,
    /// `None` means half a wavelength at the band center.
    pub smoothing_window: Option<f64>,
}

impl ExtrapolationPlan {
    /// Equal segments on a common distance lattice `start + i·step`, each
    /// overlapping the next by `overlap`.
    pub fn segments(&self) -> Result<Vec<Cluster>> {
        let total = ((self.stop - self.start) / self.step).round() as usize;
        let overlap = (self.overlap / self.step).round() as usize;
        let n = self.segments;
        let len = (total + (n - 1) * overlap).div_ceil(n);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let first = i * (len - overlap);
            let last = if i + 1 == n { total } else { (first + len).min(total) };
            out.push(Cluster::new(
                self.start + first as f64 * self.step,
                self.step,
                last - first + 1,
                0.0,
            )?);
        }
        Ok(out)
    }

    pub fn options(&self, grid: &FrequencyGrid, averaging: Averaging) -> ExtrapolationOptions {
        let window = self
            .smoothing_window
            .unwrap_or_else(|| crate::units::wavelength(grid.center_hz()) / 2.0);
        ExtrapolationOptions {
            order: self.order,
            smoothing_window: Some(window),
            averaging,
        }
    }
}

/// A fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub antennas: [ApertureAntenna; 3],
    pub grid: FrequencyGrid,
    pub cluster_starts: Vec<f64>,
    pub cluster_step: f64,
    pub cluster_points: usize,
    /// Offsets of the pairs (0,1), (0,2), (1,2).
    pub pair_offsets: [f64; 3],
    /// Zero-based index of the cluster used by `simulate` and `solve`.
    pub cluster_index: usize,
    pub runs: u32,
    pub reduction: ReductionOptions,
    pub model: CouplingModel,
    pub extrapolation: ExtrapolationPlan,
    pub ffdist_frequency: f64,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Sets a dotted key in a TOML document. The value is read as TOML when
/// possible and as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override key {path:?}")));
    }
    let mut node = doc;
    for (i, key) in keys[..keys.len() - 1].iter().enumerate() {
        let next_is_index = keys[i + 1].parse::<usize>().is_ok();
        let entry = node
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
        match entry {
            toml::Value::Table(t) if !next_is_index => node = t,
            toml::Value::Array(items) if next_is_index => {
                let idx: usize = keys[i + 1].parse().expect("checked");
                let rest = &keys[i + 2..];
                let item = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("override {path:?}: index {idx} out of range")))?;
                if rest.is_empty() {
                    *item = value;
                    return Ok(());
                }
                let toml::Value::Table(t) = item else {
                    return Err(Error::Config(format!("override {path:?}: {key}.{idx} is not a table")));
                };
                let mut sub = t;
                for k in &rest[..rest.len() - 1] {
                    sub = match sub
                        .entry(k.to_string())
                        .or_insert_with(|| toml::Value::Table(Default::default()))
                    {
                        toml::Value::Table(t) => t,
                        _ => return Err(Error::Config(format!("override {path:?}: {k} is not a table"))),
                    };
                }
                sub.insert(rest[rest.len() - 1].to_string(), value);
                return Ok(());
            }
            _ => return Err(Error::Config(format!("override {path:?}: {key} has the wrong shape"))),
        }
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl CampaignConfig {
    pub fn default_campaign() -> Self {
        Self::from_toml(DEFAULT_CONFIG, &[]).expect("built-in configuration is valid")
    }

    /// Parses, applies overrides and validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(config_err)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let raw: RawConfig = toml::Value::Table(doc).try_into().map_err(config_err)?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let grid = FrequencyGrid::new(raw.frequency.start.0, raw.frequency.stop.0, raw.frequency.points)?;
        if raw.antenna.len() != 3 {
            return Err(Error::Config(format!(
                "exactly three antennas are required, found {}",
                raw.antenna.len()
            )));
        }
        let mut antennas = Vec::with_capacity(3);
        for a in &raw.antenna {
            let built = match (a.width, a.height, a.diagonal) {
                (Some(w), Some(h), None) => {
                    if a.aspect.is_some() {
                        return Err(Error::Config(format!("antenna {}: aspect only applies with diagonal", a.id)));
                    }
                    ApertureAntenna::new(&a.id, a.kind, w.0, h.0)?
                }
                (None, None, Some(d)) => ApertureAntenna::from_diagonal(&a.id, a.kind, d.0, a.aspect.unwrap_or(4.0 / 3.0))?,
                _ => {
                    return Err(Error::Config(format!(
                        "antenna {}: give either width and height, or diagonal",
                        a.id
                    )))
                }
            };
            antennas.push(built.with_model(&a.model));
        }
        let antennas: [ApertureAntenna; 3] = antennas.try_into().expect("three");
        let keys = pair_keys(&antennas)?;
        let mut offsets = [None; 3];
        for p in &raw.pair {
            for id in &p.antennas {
                if !antennas.iter().any(|a| a.id() == id) {
                    return Err(Error::Config(format!("pair refers to unknown antenna {id:?}")));
                }
            }
            let key = PairKey::new(&p.antennas[0], &p.antennas[1])?;
            if p.antennas[0] == p.antennas[1] {
                return Err(Error::Config(format!("pair {key} joins an antenna to itself")));
            }
            let slot = keys.iter().position(|k| *k == key).expect("ids checked");
            if offsets[slot].replace(p.offset.0).is_some() {
                return Err(Error::Config(format!("pair {key} is listed twice")));
            }
        }
        let pair_offsets = offsets.map(|o| o.unwrap_or(0.0));
        if raw.clusters.starts.is_empty() {
            return Err(Error::Config("clusters.starts is empty".to_string()));
        }
        for s in &raw.clusters.starts {
            for off in pair_offsets {
                Cluster::new(s.0, raw.clusters.step.0, raw.clusters.points, off)?;
            }
        }
        if raw.campaign.cluster == 0 || raw.campaign.cluster > raw.clusters.starts.len() {
            return Err(Error::Config(format!(
                "campaign.cluster must be between 1 and {}",
                raw.clusters.starts.len()
            )));
        }
        if raw.campaign.runs == 0 {
            return Err(Error::Config("campaign.runs must be at least 1".to_string()));
        }
        let sim = &raw.simulation;
        let ripple = (sim.ripple_amplitude.0 != 0.0).then(|| match sim.ripple_period {
            AutoLength::Auto => Ripple::half_wave(sim.ripple_amplitude.0, grid.center_hz()),
            AutoLength::Fixed(period) => Ripple {
                amplitude_db: sim.ripple_amplitude.0,
                period,
            },
        });
        let model = CouplingModel {
            aperture_field: sim.aperture_field,
            points_per_wavelength: sim.points_per_wavelength,
            ideal_friis: sim.ideal_friis,
            ripple,
            noise_sigma_db: sim.noise_sigma.0,
            seed: sim.seed,
        };
        model.validate()?;
        let ex = &raw.extrapolation;
        if ex.order > MAX_ORDER {
            return Err(Error::Config(format!("extrapolation.order must be at most {MAX_ORDER}")));
        }
        if !(ex.step.0 > 0.0 && ex.start.0 > 0.0 && ex.stop.0 > ex.start.0) {
            return Err(Error::Config("extrapolation needs 0 < start < stop and step > 0".to_string()));
        }
        if ex.segments == 0 {
            return Err(Error::Config("extrapolation.segments must be at least 1".to_string()));
        }
        if ex.segments > 1 && ex.overlap.0 < ex.step.0 * 1.5 {
            return Err(Error::Config("extrapolation.overlap must cover at least two points".to_string()));
        }
        let extrapolation = ExtrapolationPlan {
            order: ex.order,
            start: ex.start.0,
            stop: ex.stop.0,
            segments: ex.segments,
            overlap: ex.overlap.0,
            step: ex.step.0,
            smoothing_window: match ex.smoothing_window {
                AutoLength::Auto => None,
                AutoLength::Fixed(w) => Some(w),
            },
        };
        let segments = extrapolation.segments()?;
        if segments.iter().any(|s| s.count() < ex.order + 2) {
            return Err(Error::Config("extrapolation segments are too short for the fit order".to_string()));
        }
        crate::error::require_positive("ffdist frequency", raw.ffdist.frequency.0)?;
        Ok(Self {
            antennas,
            grid,
            cluster_starts: raw.clusters.starts.iter().map(|s| s.0).collect(),
            cluster_step: raw.clusters.step.0,
            cluster_points: raw.clusters.points,
            pair_offsets,
            cluster_index: raw.campaign.cluster - 1,
            runs: raw.campaign.runs,
            reduction: ReductionOptions {
                averaging: raw.stats.averaging,
                deviation: raw.stats.deviation,
                mode: raw.solver.mode,
            },
            model,
            extrapolation,
            ffdist_frequency: raw.ffdist.frequency.0,
        })
    }

    pub fn pair_keys(&self) -> [PairKey; 3] {
        pair_keys(&self.antennas).expect("validated")
    }

    /// Cluster `index` of pair `pair` (0..3 in [`CampaignConfig::pair_keys`]
    /// order).
    pub fn cluster(&self, pair: usize, index: usize) -> Cluster {
        Cluster::new(
            self.cluster_starts[index],
            self.cluster_step,
            self.cluster_points,
            self.pair_offsets[pair],
        )
        .expect("validated")
    }

    /// The clusters used for the cluster campaign.
    pub fn campaign_clusters(&self) -> [Cluster; 3] {
        std::array::from_fn(|p| self.cluster(p, self.cluster_index))
    }

    pub fn extrapolation_segments(&self) -> [Vec<Cluster>; 3] {
        let s = self.extrapolation.segments().expect("validated");
        [s.clone(), s.clone(), s]
    }

    pub fn extrapolation_options(&self) -> ExtrapolationOptions {
        self.extrapolation.options(&self.grid, self.reduction.averaging)
    }
}
