//! Tables written by the command-line tool, as CSV or aligned text.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ffcrit::{FarFieldDistances, PhaseBudget};
use crate::io::config::CampaignConfig;
use crate::model::{ApertureAntenna, GainSolution};
use crate::units::{to_degrees, wavelength};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Csv,
    #[default]
    AlignedTable,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "table" | "aligned_table" => Ok(ReportFormat::AlignedTable),
            _ => Err(Error::Config(format!("unknown format {s:?} (csv, table)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.headers).chain(&self.rows) {
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Columns padded to a common width; the first column is left aligned,
    /// the others right aligned.
    pub fn to_aligned(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for line in std::iter::once(&self.headers).chain(&self.rows) {
            let mut text = String::new();
            for (i, (cell, w)) in line.iter().zip(&widths).enumerate() {
                if i == 0 {
                    let _ = write!(text, "{cell:<w$}");
                } else {
                    let _ = write!(text, "  {cell:>w$}");
                }
            }
            out.push_str(text.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::AlignedTable => self.to_aligned(),
        }
    }
}

pub fn fmt_db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2}")
    } else {
        "nan".to_string()
    }
}

fn fmt_cm(meters: f64) -> String {
    format!("{:.1}", meters * 100.0)
}

/// Per-antenna gains and deviations: one row per frequency, then a `mean`
/// row per antenna.
pub fn solution_table(solution: &GainSolution) -> Table {
    let mut t = Table::new(&["antenna", "frequency_hz", "gain_db", "sigma_f_db"]);
    if solution.frequencies().is_empty() {
        return t;
    }
    for a in solution.antennas() {
        for (k, f) in solution.frequencies().iter().enumerate() {
            t.push(vec![
                a.id.clone(),
                f.to_string(),
                fmt_db(a.gain_db[k]),
                a.sigma_f_db[k].map(fmt_db).unwrap_or_default(),
            ]);
        }
        let sigmas: Vec<f64> = a.sigma_f_db.iter().flatten().copied().collect();
        let mean_sigma = (!sigmas.is_empty()).then(|| sigmas.iter().sum::<f64>() / sigmas.len() as f64);
        t.push(vec![
            a.id.clone(),
            "mean".to_string(),
            fmt_db(a.gain_db.iter().sum::<f64>() / a.gain_db.len() as f64),
            mean_sigma.map(fmt_db).unwrap_or_default(),
        ]);
    }
    t
}

pub fn emit_report(solution: &GainSolution, format: ReportFormat) -> String {
    solution_table(solution).render(format)
}

/// One far-field table row: a label and two aperture diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct FfdistEntry {
    pub label: String,
    pub d1: f64,
    pub d2: f64,
}

/// Rows for every combination of distinct antenna models, like-with-like
/// first. Antennas without a model name are treated as their own model.
pub fn ffdist_entries(antennas: &[ApertureAntenna]) -> Vec<FfdistEntry> {
    let mut models: Vec<(String, f64)> = Vec::new();
    for a in antennas {
        let name = if a.model().is_empty() { a.id() } else { a.model() };
        if !models.iter().any(|(m, _)| m == name) {
            models.push((name.to_string(), a.diagonal()));
        }
    }
    let mut out = Vec::new();
    for (m, d) in &models {
        out.push(FfdistEntry {
            label: format!("{m}/{m}"),
            d1: *d,
            d2: *d,
        });
    }
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            out.push(FfdistEntry {
                label: format!("{}/{}", models[i].0, models[j].0),
                d1: models[i].1,
                d2: models[j].1,
            });
        }
    }
    out
}

/// Far-field distances in cm for each entry at `frequency_hz`.
pub fn ffdist_table(entries: &[FfdistEntry], frequency_hz: f64) -> Result<Table> {
    let lambda = wavelength(frequency_hz);
    let mut t = Table::new(&[
        "pair",
        "d_ff_cm",
        "d_mil_cm",
        "d_uno_cm",
        "d_rev_cm",
        "d_fourth_cm",
        "mil_applicable",
    ]);
    for e in entries {
        let ff = FarFieldDistances::new(e.d1, e.d2, lambda)?;
        t.push(vec![
            e.label.clone(),
            fmt_cm(ff.fraunhofer),
            fmt_cm(ff.mil.distance),
            fmt_cm(ff.uno),
            fmt_cm(ff.revised),
            fmt_cm(ff.fourth_order),
            ff.mil.applicable.to_string(),
        ]);
    }
    Ok(t)
}

fn verdict(start: f64, criterion: f64) -> String {
    if start >= criterion { "pass" } else { "fail" }.to_string()
}

/// Cluster schedule of every pair with the worst-case phase deviation at the
/// cluster midpoint and the far-field verdict of the cluster start under each
/// criterion.
pub fn plan_table(config: &CampaignConfig) -> Result<Table> {
    let lambda = wavelength(config.ffdist_frequency);
    let mut t = Table::new(&[
        "pair",
        "cluster",
        "start_cm",
        "stop_cm",
        "points",
        "delta_phi_max_deg",
        "d_ff",
        "d_mil",
        "d_uno",
        "d_rev",
        "d_fourth",
    ]);
    let pairs = [(0, 1), (0, 2), (1, 2)];
    for (p, key) in config.pair_keys().iter().enumerate() {
        let (i, j) = pairs[p];
        let (d1, d2) = (config.antennas[i].diagonal(), config.antennas[j].diagonal());
        let ff = FarFieldDistances::new(d1, d2, lambda)?;
        for c in 0..config.cluster_starts.len() {
            let cl = config.cluster(p, c);
            let budget = PhaseBudget::new(d1, d2, lambda, cl.midpoint())?;
            let start = cl.first();
            t.push(vec![
                key.to_string(),
                (c + 1).to_string(),
                fmt_cm(start),
                fmt_cm(cl.last()),
                cl.count().to_string(),
                format!("{:.1}", to_degrees(budget.delta_phi_max)),
                verdict(start, ff.fraunhofer),
                verdict(start, ff.mil.distance),
                verdict(start, ff.uno),
                verdict(start, ff.revised),
                verdict(start, ff.fourth_order),
            ]);
        }
    }
    Ok(t)
}

/// Mean gain of each antenna from the two methods and the absolute
/// differences of the band averages. With `truth` (dB per antenna), each
/// method's offset from it is listed too. Differences are printed with six
/// decimals.
pub fn compare_table(ccm: &GainSolution, extrapolation: &GainSolution, truth: Option<&[f64]>) -> Result<Table> {
    let mut headers = vec!["antenna", "ccm_gain_db", "extrapolation_gain_db", "abs_difference_db"];
    if truth.is_some() {
        headers.extend(["truth_gain_db", "ccm_abs_offset_db", "extrapolation_abs_offset_db"]);
    }
    let mut t = Table::new(&headers);
    for (k, a) in ccm.antennas().iter().enumerate() {
        let g1 = ccm.mean_gain_db(&a.id).expect("own antenna");
        let g2 = extrapolation
            .mean_gain_db(&a.id)
            .ok_or_else(|| Error::MissingPair(format!("antenna {} in the extrapolation result", a.id)))?;
        let mut row = vec![a.id.clone(), fmt_db(g1), fmt_db(g2), format!("{:.6}", (g1 - g2).abs())];
        if let Some(truth) = truth {
            let g0 = truth[k];
            row.extend([
                fmt_db(g0),
                format!("{:.6}", (g1 - g0).abs()),
                format!("{:.6}", (g2 - g0).abs()),
            ]);
        }
        t.push(row);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AntennaGain, SolutionMethod};

    #[test]
    fn csv_and_aligned() {
        let mut t = Table::new(&["pair", "value"]);
        t.push(vec!["A/B".into(), "1.25".into()]);
        t.push(vec!["LONG/NAME".into(), "10.50".into()]);
        assert_eq!(t.to_csv(), "pair,value\nA/B,1.25\nLONG/NAME,10.50\n");
        assert_eq!(
            t.to_aligned(),
            "pair       value\nA/B         1.25\nLONG/NAME  10.50\n"
        );
    }

    #[test]
    fn empty_solution_is_header_only() {
        let s = GainSolution::new(
            SolutionMethod::Ccm,
            vec![],
            vec![AntennaGain {
                id: "A".into(),
                gain_db: vec![],
                sigma_f_db: vec![],
            }],
        )
        .unwrap();
        assert_eq!(emit_report(&s, ReportFormat::Csv), "antenna,frequency_hz,gain_db,sigma_f_db\n");
    }

    #[test]
    fn report_rows_and_mean() {
        let s = GainSolution::new(
            SolutionMethod::Ccm,
            vec![1.5e11, 1.6e11],
            vec![AntennaGain {
                id: "A".into(),
                gain_db: vec![20.004, 21.0],
                sigma_f_db: vec![Some(0.05), None],
            }],
        )
        .unwrap();
        let csv = emit_report(&s, ReportFormat::Csv);
        assert_eq!(
            csv,
            "antenna,frequency_hz,gain_db,sigma_f_db\nA,150000000000,20.00,0.05\nA,160000000000,21.00,\nA,mean,20.50,0.05\n"
        );
    }

    #[test]
    fn point_partner_row() {
        let t = ffdist_table(
            &[FfdistEntry {
                label: "P/point".into(),
                d1: 0.02,
                d2: 0.0,
            }],
            170e9,
        )
        .unwrap();
        assert_eq!(t.rows[0][1], t.rows[0][4]);
        assert_eq!(t.rows[0][6], "false");
    }
}
