//! Line-oriented trace and campaign files.
//!
//! A trace file is a `#` header followed by one CSV row per
//! (distance, frequency) sample, distance-major:
//!
//! ```text
//! # ffgain-trace v1
//! # pair = A/B
//! # run = 0
//! # grid = 145000000000 170000000000 21
//! # cluster = 1 0.0002 151 0
//! # phase = false
//! distance_m,frequency_hz,s21_db
//! 1,145000000000,-27.06
//! ```
//!
//! The cluster line is optional. Numbers are written in the shortest form
//! that parses back to the same `f64`. A campaign file starts with its own
//! header (grid and antennas) and then holds any number of trace sections.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{AntennaKind, ApertureAntenna, Cluster, FrequencyGrid, PairKey, SweepTrace};

pub const TRACE_MAGIC: &str = "# ffgain-trace v1";
pub const CAMPAIGN_MAGIC: &str = "# ffgain-campaign v1";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(line: usize, field: &str, text: &str) -> Result<f64> {
    let t = text.trim();
    // f64::from_str also takes "infinity" and "nan" spellings; only the
    // forms the emitter writes are accepted.
    let ok = !t.is_empty()
        && t.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E' | 'i' | 'n' | 'f'));
    let v: f64 = if ok { t.parse().ok() } else { None }
        .ok_or_else(|| parse_err(line, format!("{field}: cannot parse {t:?} as a number")))?;
    if v.is_nan() {
        return Err(parse_err(line, format!("{field}: NaN is not allowed")));
    }
    Ok(v)
}

fn integer<T: std::str::FromStr>(line: usize, field: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{field}: cannot parse {:?} as an integer", text.trim())))
}

fn finite(line: usize, field: &str, text: &str) -> Result<f64> {
    let v = number(line, field, text)?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{field}: must be finite")));
    }
    Ok(v)
}

/// Splits `# key = value`.
fn header_entry(line: usize, text: &str) -> Result<(&str, &str)> {
    let body = text
        .strip_prefix('#')
        .ok_or_else(|| parse_err(line, "expected a '#' header line"))?;
    let (k, v) = body
        .split_once('=')
        .ok_or_else(|| parse_err(line, format!("expected 'key = value', got {:?}", text)))?;
    Ok((k.trim(), v.trim()))
}

fn parse_grid(line: usize, value: &str) -> Result<FrequencyGrid> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(parse_err(line, "grid needs: start_hz stop_hz count"));
    }
    FrequencyGrid::new(
        finite(line, "grid start", parts[0])?,
        finite(line, "grid stop", parts[1])?,
        integer(line, "grid count", parts[2])?,
    )
    .map_err(|e| parse_err(line, e.to_string()))
}

fn emit_grid(g: &FrequencyGrid) -> String {
    format!("{} {} {}", g.start_hz(), g.stop_hz(), g.count())
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    offset: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, offset: usize) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
            offset,
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.inner.next().map(|(i, l)| (i + 1 + self.offset, l))
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|(_, l)| *l)
    }

    fn expect(&mut self, what: &str, last_line: usize) -> Result<(usize, &'a str)> {
        self.next()
            .ok_or_else(|| parse_err(last_line + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_trace_section(lines: &mut Lines<'_>) -> Result<SweepTrace> {
    let (n, magic) = lines.expect("trace header", lines.offset)?;
    if magic.trim_end() != TRACE_MAGIC {
        return Err(parse_err(n, format!("expected {TRACE_MAGIC:?}")));
    }
    let mut pair = None;
    let mut run = None;
    let mut grid = None;
    let mut cluster = None;
    let mut phase = None;
    let mut last = n;
    let columns_line = loop {
        let (n, text) = lines.expect("column line", last)?;
        last = n;
        if !text.starts_with('#') {
            break (n, text);
        }
        let (key, value) = header_entry(n, text)?;
        match key {
            "pair" => {
                let (a, b) = value
                    .split_once('/')
                    .ok_or_else(|| parse_err(n, "pair must be written as a/b"))?;
                pair = Some(PairKey::new(a.trim(), b.trim()).map_err(|e| parse_err(n, e.to_string()))?);
            }
            "run" => run = Some(integer::<u32>(n, "run", value)?),
            "grid" => grid = Some(parse_grid(n, value)?),
            "cluster" => {
                let p: Vec<&str> = value.split_whitespace().collect();
                if p.len() != 4 {
                    return Err(parse_err(n, "cluster needs: start step count offset"));
                }
                cluster = Some(
                    Cluster::new(
                        finite(n, "cluster start", p[0])?,
                        finite(n, "cluster step", p[1])?,
                        integer(n, "cluster count", p[2])?,
                        finite(n, "cluster offset", p[3])?,
                    )
                    .map_err(|e| parse_err(n, e.to_string()))?,
                );
            }
            "phase" => {
                phase = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(parse_err(n, "phase must be true or false")),
                })
            }
            other => return Err(parse_err(n, format!("unknown header key {other:?}"))),
        }
    };
    let (n_cols, cols) = columns_line;
    let missing = |what: &str| parse_err(n_cols, format!("header is missing '{what}'"));
    let pair = pair.ok_or_else(|| missing("pair"))?;
    let run = run.ok_or_else(|| missing("run"))?;
    let grid = grid.ok_or_else(|| missing("grid"))?;
    let phase = phase.ok_or_else(|| missing("phase"))?;
    let expected_cols = if phase {
        "distance_m,frequency_hz,s21_db,phase_deg"
    } else {
        "distance_m,frequency_hz,s21_db"
    };
    if cols.trim_end() != expected_cols {
        return Err(parse_err(n_cols, format!("expected column line {expected_cols:?}")));
    }
    let fc = grid.count();
    let width = if phase { 4 } else { 3 };
    let mut distances: Vec<f64> = Vec::new();
    let mut s21 = Vec::new();
    let mut ph = Vec::new();
    let mut f = 0usize;
    let mut last = n_cols;
    loop {
        let Some(peek) = lines.peek() else { break };
        if peek.starts_with('#') {
            break;
        }
        let (n, text) = lines.next().expect("peeked");
        last = n;
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != width {
            return Err(parse_err(n, format!("expected {width} fields, got {}", fields.len())));
        }
        let d = finite(n, "distance", fields[0])?;
        if d <= 0.0 {
            return Err(parse_err(n, "distance must be positive"));
        }
        if f == 0 {
            if let Some(prev) = distances.last() {
                if d <= *prev {
                    return Err(parse_err(n, format!("distance {d} is not above the previous distance {prev}")));
                }
            }
            distances.push(d);
        } else if d != *distances.last().expect("started") {
            return Err(parse_err(
                n,
                format!("expected {fc} frequency rows per distance, distance changed after {f}"),
            ));
        }
        let freq = finite(n, "frequency", fields[1])?;
        let expected = grid.frequency(f);
        if (freq - expected).abs() > 1e-9 * expected {
            return Err(parse_err(n, format!("frequency {freq} does not match grid point {f} ({expected})")));
        }
        let s = number(n, "s21_db", fields[2])?;
        if s == f64::INFINITY {
            return Err(parse_err(n, "s21_db cannot be +inf"));
        }
        s21.push(s);
        if phase {
            ph.push(finite(n, "phase_deg", fields[3])?);
        }
        f = (f + 1) % fc;
    }
    if f != 0 {
        return Err(parse_err(last, format!("distance block ends after {f} of {fc} frequencies")));
    }
    if distances.is_empty() {
        return Err(parse_err(last, "trace has no data rows"));
    }
    let m = distances.len();
    let s21 = Array2::from_shape_vec((m, fc), s21).expect("counted");
    let ph = phase.then(|| Array2::from_shape_vec((m, fc), ph).expect("counted"));
    let trace = SweepTrace::new(pair, run, grid, distances, s21, ph).map_err(|e| parse_err(last, e.to_string()))?;
    match cluster {
        Some(c) => {
            for (i, d) in trace.distances().iter().enumerate() {
                let expected = c.distance(i);
                if (d - expected).abs() > 1e-9 * expected.max(1.0) {
                    return Err(parse_err(n_cols, format!("distance {i} ({d}) disagrees with the cluster ({expected})")));
                }
            }
            trace.with_cluster(c).map_err(|e| parse_err(n_cols, e.to_string()))
        }
        None => Ok(trace),
    }
}

/// Parses a single trace file.
pub fn parse_trace(text: &str) -> Result<SweepTrace> {
    let mut lines = Lines::new(text, 0);
    let trace = parse_trace_section(&mut lines)?;
    if let Some((n, _)) = lines.next() {
        return Err(parse_err(n, "trailing content after the trace"));
    }
    Ok(trace)
}

/// Writes a trace; the output parses back to an equal trace.
pub fn emit_trace(trace: &SweepTrace) -> String {
    let mut out = String::new();
    emit_trace_into(trace, &mut out);
    out
}

fn emit_trace_into(trace: &SweepTrace, out: &mut String) {
    let (m, fc) = trace.shape();
    out.reserve(m * fc * 40);
    let phase = trace.phase_deg();
    let _ = writeln!(out, "{TRACE_MAGIC}");
    let _ = writeln!(out, "# pair = {}", trace.pair());
    let _ = writeln!(out, "# run = {}", trace.run_index());
    let _ = writeln!(out, "# grid = {}", emit_grid(trace.grid()));
    if let Some(c) = trace.cluster() {
        let _ = writeln!(
            out,
            "# cluster = {} {} {} {}",
            c.start_distance(),
            c.step(),
            c.count(),
            c.pair_offset()
        );
    }
    let _ = writeln!(out, "# phase = {}", phase.is_some());
    if phase.is_some() {
        out.push_str("distance_m,frequency_hz,s21_db,phase_deg\n");
    } else {
        out.push_str("distance_m,frequency_hz,s21_db\n");
    }
    let freqs = trace.grid().frequencies();
    for (i, d) in trace.distances().iter().enumerate() {
        for (f, freq) in freqs.iter().enumerate() {
            let _ = write!(out, "{d},{freq},{}", trace.s21_db()[[i, f]]);
            if let Some(p) = phase {
                let _ = write!(out, ",{}", p[[i, f]]);
            }
            out.push('\n');
        }
    }
}

/// Antennas, grid and any number of traces, as stored in a campaign file.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignFile {
    pub antennas: Vec<ApertureAntenna>,
    pub grid: FrequencyGrid,
    pub traces: Vec<SweepTrace>,
}

pub fn emit_campaign(file: &CampaignFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CAMPAIGN_MAGIC}");
    let _ = writeln!(out, "# grid = {}", emit_grid(&file.grid));
    for a in &file.antennas {
        let _ = write!(out, "# antenna = {} {} {} {}", a.id(), a.kind(), a.width(), a.height());
        if !a.model().is_empty() {
            let _ = write!(out, " {}", a.model());
        }
        out.push('\n');
    }
    let _ = writeln!(out, "# traces = {}", file.traces.len());
    for t in &file.traces {
        emit_trace_into(t, &mut out);
    }
    out
}

pub fn parse_campaign(text: &str) -> Result<CampaignFile> {
    let mut lines = Lines::new(text, 0);
    let (n, magic) = lines.expect("campaign header", 0)?;
    if magic.trim_end() != CAMPAIGN_MAGIC {
        return Err(parse_err(n, format!("expected {CAMPAIGN_MAGIC:?}")));
    }
    let mut grid = None;
    let mut antennas = Vec::new();
    let mut count = None;
    let mut last = n;
    while let Some(peek) = lines.peek() {
        if peek.trim_end() == TRACE_MAGIC {
            break;
        }
        let (n, text) = lines.next().expect("peeked");
        last = n;
        let (key, value) = header_entry(n, text)?;
        match key {
            "grid" => grid = Some(parse_grid(n, value)?),
            "antenna" => {
                let mut p = value.splitn(5, ' ');
                let id = p.next().unwrap_or_default();
                let kind: AntennaKind = p
                    .next()
                    .ok_or_else(|| parse_err(n, "antenna needs: id kind width height [model]"))?
                    .parse()
                    .map_err(|e: Error| parse_err(n, e.to_string()))?;
                let w = finite(n, "antenna width", p.next().unwrap_or_default())?;
                let h = finite(n, "antenna height", p.next().unwrap_or_default())?;
                let mut a = ApertureAntenna::new(id, kind, w, h).map_err(|e| parse_err(n, e.to_string()))?;
                if let Some(model) = p.next() {
                    a = a.with_model(model);
                }
                antennas.push(a);
            }
            "traces" => count = Some(integer::<usize>(n, "traces", value)?),
            other => return Err(parse_err(n, format!("unknown header key {other:?}"))),
        }
    }
    let grid = grid.ok_or_else(|| parse_err(last, "campaign header is missing 'grid'"))?;
    let count = count.ok_or_else(|| parse_err(last, "campaign header is missing 'traces'"))?;
    let mut traces = Vec::with_capacity(count);
    while lines.peek().is_some() {
        let start = lines.inner.peek().map(|(i, _)| i + 1).unwrap_or(last);
        let t = parse_trace_section(&mut lines)?;
        if *t.grid() != grid {
            return Err(parse_err(start, "trace grid differs from the campaign grid"));
        }
        traces.push(t);
    }
    if traces.len() != count {
        return Err(parse_err(
            text.lines().count(),
            format!("header announces {count} traces, file holds {}", traces.len()),
        ));
    }
    Ok(CampaignFile { antennas, grid, traces })
}

/// Reads a two-column VNA export (frequency in Hz, |S21| in dB). Lines
/// starting with `#`, `!` or a letter are skipped; commas, semicolons and
/// whitespace all separate columns.
pub fn parse_vna_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with(['#', '!']) || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let fields: Vec<&str> = line
            .split([',', ';', ' ', '\t'])
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() < 2 {
            return Err(parse_err(n, "expected frequency and dB columns"));
        }
        let f = finite(n, "frequency", fields[0])?;
        let db = number(n, "s21_db", fields[1])?;
        if let Some((prev, _)) = out.last() {
            if f <= *prev {
                return Err(parse_err(n, "frequencies must increase"));
            }
        }
        out.push((f, db));
    }
    Ok(out)
}

/// Builds a trace from one VNA export per distance. All exports must share
/// a uniform frequency grid.
pub fn trace_from_vna_exports(pair: PairKey, run: u32, exports: &[(f64, &str)]) -> Result<SweepTrace> {
    let mut columns = Vec::with_capacity(exports.len());
    for (_, text) in exports {
        columns.push(parse_vna_csv(text)?);
    }
    let first = columns
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no VNA exports".to_string()))?;
    if first.len() < 2 {
        return Err(Error::ShapeMismatch("a VNA export needs at least two points".to_string()));
    }
    let grid = FrequencyGrid::new(first[0].0, first[first.len() - 1].0, first.len())?;
    for col in &columns {
        if col.len() != grid.count() {
            return Err(Error::ShapeMismatch("VNA exports have different lengths".to_string()));
        }
        for (k, (f, _)) in col.iter().enumerate() {
            let expected = grid.frequency(k);
            if (f - expected).abs() > 1e-6 * grid.step_hz() {
                return Err(Error::ShapeMismatch(format!(
                    "VNA frequency {f} is not on a uniform grid (expected {expected})"
                )));
            }
        }
    }
    let s21 = Array2::from_shape_fn((columns.len(), grid.count()), |(m, f)| columns[m][f].1);
    let distances = exports.iter().map(|(d, _)| *d).collect();
    SweepTrace::new(pair, run, grid, distances, s21, None)
}
