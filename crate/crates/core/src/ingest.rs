//! Long-format price panels: loading, log-returns with zero jitter, and
//! panel files with a JSON sidecar.
//!
//! Locations and variables keep the order of their first appearance in the
//! input, so they can be lined up with a weight matrix; time labels are
//! sorted as strings (ISO dates sort correctly).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PanelIndex, Result};
use crate::model::{Dimensions, Panel};

/// Column names of the long-format file and its delimiter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelSchema {
    pub location: String,
    pub variable: String,
    pub time: String,
    pub value: String,
    pub delimiter: u8,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            location: "location".into(),
            variable: "variable".into(),
            time: "time".into(),
            value: "value".into(),
            delimiter: b',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPanelRecord {
    pub location_id: String,
    pub variable: String,
    pub time: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// A missing period keeps the previous price.
    CarryForward,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnType {
    LogReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub missing_policy: MissingPolicy,
    /// Standard deviation of the draw replacing an exact-zero return.
    pub jitter_sd: f64,
    pub jitter_seed: u64,
    pub return_type: ReturnType,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            missing_policy: MissingPolicy::CarryForward,
            jitter_sd: 1e-4,
            jitter_seed: 0,
            return_type: ReturnType::LogReturn,
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column '{name}'") })
}

/// Parses records; `positive` demands strictly positive values (prices).
fn parse_records(reader: impl Read, schema: &PanelSchema, positive: bool) -> Result<Vec<RawPanelRecord>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(schema.delimiter).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = [
        column_index(&headers, &schema.location)?,
        column_index(&headers, &schema.variable)?,
        column_index(&headers, &schema.time)?,
        column_index(&headers, &schema.value)?,
    ];
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| {
            row.get(cols[k]).ok_or_else(|| Error::Parse { line, msg: "row is too short".into() })
        };
        let raw_value = field(3)?;
        let value: f64 =
            raw_value.parse().map_err(|_| Error::Parse { line, msg: format!("'{raw_value}' is not a number") })?;
        if !value.is_finite() || (positive && value <= 0.0) {
            return Err(Error::Parse { line, msg: format!("price must be positive and finite, got {raw_value}") });
        }
        let rec = RawPanelRecord {
            location_id: field(0)?.to_string(),
            variable: field(1)?.to_string(),
            time: field(2)?.to_string(),
            value,
        };
        if !seen.insert((rec.location_id.clone(), rec.variable.clone(), rec.time.clone())) {
            return Err(Error::DuplicateKey(format!(
                "(location {}, variable {}, time {}) at line {line}",
                rec.location_id, rec.variable, rec.time
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reads price records from a delimiter-separated file with a header row.
pub fn load_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<Vec<RawPanelRecord>> {
    parse_records(File::open(path)?, schema, true)
}

/// Same as [`load_panel`] for in-memory text.
pub fn parse_panel(text: &str, schema: &PanelSchema) -> Result<Vec<RawPanelRecord>> {
    parse_records(text.as_bytes(), schema, true)
}

fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.filter(|s| seen.insert(*s)).map(str::to_string).collect()
}

/// Log-returns with jittered zeros; the first return becomes `Y_0`.
pub fn to_returns(records: &[RawPanelRecord], options: &IngestOptions) -> Result<Panel<f64>> {
    if !(options.jitter_sd >= 0.0) || !options.jitter_sd.is_finite() {
        return Err(Error::InvalidParameter("jitter_sd must be nonnegative".into()));
    }
    let locations = first_appearance(records.iter().map(|r| r.location_id.as_str()));
    let variables = first_appearance(records.iter().map(|r| r.variable.as_str()));
    let times: Vec<String> = records.iter().map(|r| r.time.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if times.len() < 3 {
        return Err(Error::Data(format!("series need at least 3 time points, found {}", times.len())));
    }
    let loc_ix: HashMap<&str, usize> = locations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let var_ix: HashMap<&str, usize> = variables.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let time_ix: HashMap<&str, usize> = times.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let (n, p, len) = (locations.len(), variables.len(), times.len());
    let mut prices: Vec<Option<f64>> = vec![None; n * p * len];
    for r in records {
        prices[(loc_ix[r.location_id.as_str()] * p + var_ix[r.variable.as_str()]) * len + time_ix[r.time.as_str()]] =
            Some(r.value);
    }

    let dims = Dimensions::new(n, p, len - 2)?;
    let mut values = vec![0.0; dims.len()];
    for i in 0..n {
        for j in 0..p {
            let series = &prices[(i * p + j) * len..(i * p + j + 1) * len];
            let mut prev: Option<f64> = None;
            for (k, price) in series.iter().enumerate() {
                let current = match (price, options.missing_policy, prev) {
                    (Some(v), _, _) => *v,
                    (None, MissingPolicy::CarryForward, Some(before)) => before,
                    (None, _, _) => {
                        return Err(Error::Data(format!(
                            "no price for location {}, variable {} at time {}",
                            locations[i], variables[j], times[k]
                        )))
                    }
                };
                if let Some(before) = prev {
                    values[dims.index(i, j, k - 1)] = (current / before).ln();
                }
                prev = Some(current);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.jitter_seed);
    let mut jittered: Vec<PanelIndex> = Vec::new();
    if options.jitter_sd > 0.0 {
        let normal = Normal::new(0.0, options.jitter_sd).expect("sd checked above");
        for t in 0..dims.slices() {
            for j in 0..p {
                for i in 0..n {
                    let k = dims.index(i, j, t);
                    if values[k] == 0.0 {
                        let mut draw = 0.0;
                        while draw == 0.0 {
                            draw = normal.sample(&mut rng);
                        }
                        values[k] = draw;
                        jittered.push((i, j, t));
                    }
                }
            }
        }
    }
    let mut panel = Panel::new(dims, values, locations, variables, times[1..].to_vec())?;
    panel.jittered = jittered;
    Ok(panel)
}

/// Dimensions, labels and provenance written next to a panel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelManifest {
    pub n: usize,
    pub p: usize,
    pub t_len: usize,
    pub location_ids: Vec<String>,
    pub variable_names: Vec<String>,
    pub time_labels: Vec<String>,
    pub jitter_seed: Option<u64>,
    pub jitter_sd: Option<f64>,
    pub jittered: Vec<PanelIndex>,
}

/// `<panel path>.manifest.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes values in long format (`location,variable,time,value`, 17
/// significant digits) in panel layout order.
pub fn write_long(
    path: impl AsRef<Path>,
    dims: Dimensions,
    locations: &[String],
    variables: &[String],
    times: &[String],
    values: &[f64],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "location,variable,time,value")?;
    for t in 0..dims.slices() {
        for j in 0..dims.p {
            for i in 0..dims.n {
                writeln!(w, "{},{},{},{:.16e}", locations[i], variables[j], times[t], values[dims.index(i, j, t)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a panel and its sidecar manifest.
pub fn write_panel(panel: &Panel<f64>, path: impl AsRef<Path>, jitter: Option<&IngestOptions>) -> Result<()> {
    let path = path.as_ref();
    write_long(path, panel.dims, &panel.location_ids, &panel.variable_names, &panel.time_labels, panel.values())?;
    let manifest = PanelManifest {
        n: panel.dims.n,
        p: panel.dims.p,
        t_len: panel.dims.t_len,
        location_ids: panel.location_ids.clone(),
        variable_names: panel.variable_names.clone(),
        time_labels: panel.time_labels.clone(),
        jitter_seed: jitter.map(|o| o.jitter_seed),
        jitter_sd: jitter.map(|o| o.jitter_sd),
        jittered: panel.jittered.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

/// Reads a panel file (values may be negative). Label order comes from the
/// sidecar manifest if present, otherwise from first appearance with time
/// labels in file order.
pub fn read_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<Panel<f64>> {
    let path = path.as_ref();
    let records = parse_records(File::open(path)?, schema, false)?;
    let manifest: Option<PanelManifest> = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| Error::Data(format!("bad panel manifest: {e}")))?),
        Err(_) => None,
    };
    let (locations, variables, times) = match &manifest {
        Some(m) => (m.location_ids.clone(), m.variable_names.clone(), m.time_labels.clone()),
        None => (
            first_appearance(records.iter().map(|r| r.location_id.as_str())),
            first_appearance(records.iter().map(|r| r.variable.as_str())),
            first_appearance(records.iter().map(|r| r.time.as_str())),
        ),
    };
    if times.len() < 2 {
        return Err(Error::Data("a panel needs at least two time slices".into()));
    }
    let dims = Dimensions::new(locations.len(), variables.len(), times.len() - 1)?;
    let loc_ix: HashMap<&str, usize> = locations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let var_ix: HashMap<&str, usize> = variables.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let time_ix: HashMap<&str, usize> = times.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut values = vec![None; dims.len()];
    for r in &records {
        let (Some(&i), Some(&j), Some(&t)) =
            (loc_ix.get(r.location_id.as_str()), var_ix.get(r.variable.as_str()), time_ix.get(r.time.as_str()))
        else {
            return Err(Error::Data(format!("record ({}, {}, {}) is not in the manifest", r.location_id, r.variable, r.time)));
        };
        values[dims.index(i, j, t)] = Some(r.value);
    }
    if let Some(pos) = values.iter().position(Option::is_none) {
        let (t, rest) = (pos / dims.np(), pos % dims.np());
        return Err(Error::Data(format!(
            "panel file lacks location {}, variable {}, time {}",
            locations[rest % dims.n],
            variables[rest / dims.n],
            times[t]
        )));
    }
    let mut panel = Panel::new(dims, values.into_iter().flatten().collect(), locations, variables, times)?;
    if let Some(m) = manifest {
        if (m.n, m.p, m.t_len) != (dims.n, dims.p, dims.t_len) {
            return Err(Error::Shape("panel file and manifest disagree on dimensions".into()));
        }
        panel.jittered = m.jittered;
    }
    Ok(panel)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub name: String,
    /// Cross-location mean per time slice, `t = 0..=T`.
    pub mean_series: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub jittered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSummary {
    pub n: usize,
    pub p: usize,
    pub t_len: usize,
    pub variables: Vec<VariableSummary>,
}

pub fn panel_summary(panel: &Panel<f64>) -> PanelSummary {
    let d = panel.dims;
    let variables = (0..d.p)
        .map(|j| {
            let mean_series: Vec<f64> =
                (0..d.slices()).map(|t| (0..d.n).map(|i| panel.get(i, j, t)).sum::<f64>() / d.n as f64).collect();
            let count = (d.n * d.slices()) as f64;
            let all = || (0..d.slices()).flat_map(move |t| (0..d.n).map(move |i| panel.get(i, j, t)));
            let mean = all().sum::<f64>() / count;
            let variance = all().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            VariableSummary {
                name: panel.variable_names[j].clone(),
                mean_series,
                mean,
                variance,
                jittered: panel.jittered.iter().filter(|x| x.1 == j).count(),
            }
        })
        .collect();
    PanelSummary { n: d.n, p: d.p, t_len: d.t_len, variables }
}

impl PanelSummary {
    pub fn to_text(&self) -> String {
        let mut out = format!("panel: n = {}, p = {}, T = {}\n", self.n, self.p, self.t_len);
        for v in &self.variables {
            out.push_str(&format!(
                "{}: mean {:.6e}, variance {:.6e}, jittered zeros {}\n",
                v.name, v.mean, v.variance, v.jittered
            ));
        }
        out
    }
}
