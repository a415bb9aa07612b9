//! Mask volumes and per-case comparison reports.
//!
//! A report compares a manual (reference) mask with a tool-produced mask for
//! each case and appends a row of column means. The CSV layout is fixed:
//!
//! ```text
//! case_id,mt_min,tool_min,slices,time_ratio,dsc,hd_mm,vol_manual_mm3,vol_tool_mm3,vol_ratio
//! ```
//!
//! Times enter in seconds and are reported in minutes. Ratios, DSC, HD and
//! times use two decimals; volumes are rounded to whole mm³.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{dice, hausdorff, MetricsError};
use crate::nrrd::{read_labels, NrrdError};
use crate::volume::{Axis, LabelVolume};

pub use crate::timing::{Phase, PhaseTimings};

/// Foreground voxel count times voxel volume. Any nonzero label counts as foreground.
pub fn mask_volume_mm3(mask: &LabelVolume) -> f64 {
    mask.count_nonzero() as f64 * mask.grid().voxel_volume_mm3()
}

/// Number of slices perpendicular to `axis` holding at least one foreground voxel.
pub fn slice_span(mask: &LabelVolume, axis: Axis) -> usize {
    let g = mask.grid();
    let ax = axis.index();
    let mut hit = vec![false; g.dims[ax]];
    for (i, &l) in mask.labels().iter().enumerate() {
        if l != 0 {
            hit[g.coords(i)[ax]] = true;
        }
    }
    hit.into_iter().filter(|&h| h).count()
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("case {case}: {source}")]
    Metrics {
        case: String,
        #[source]
        source: MetricsError,
    },
    #[error("case {case}: cannot read {path}: {source}")]
    Read {
        case: String,
        path: PathBuf,
        #[source]
        source: NrrdError,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CaseInput {
    pub case_id: String,
    pub manual_path: PathBuf,
    pub tool_path: PathBuf,
    #[serde(default, deserialize_with = "optional_seconds")]
    pub manual_time_s: Option<f64>,
    #[serde(default, deserialize_with = "optional_seconds")]
    pub tool_time_s: Option<f64>,
}

fn optional_seconds<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .map(Some)
            .ok_or_else(|| serde::de::Error::custom(format!("bad time {s:?}"))),
    }
}

/// Reads a manifest with header `case_id,manual_path,tool_path,manual_time_s,tool_time_s`.
/// Relative mask paths are resolved against `base_dir`.
pub fn read_manifest(reader: impl Read, base_dir: &Path) -> Result<Vec<CaseInput>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ReportError::Manifest(e.to_string()))?
        .clone();
    let expected = [
        "case_id",
        "manual_path",
        "tool_path",
        "manual_time_s",
        "tool_time_s",
    ];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(ReportError::Manifest(format!(
            "header must be {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<CaseInput>() {
        let mut case = rec.map_err(|e| ReportError::Manifest(e.to_string()))?;
        for p in [&mut case.manual_path, &mut case.tool_path] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        out.push(case);
    }
    Ok(out)
}

/// Metrics for one manual/tool mask pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case_id: String,
    /// Seconds.
    pub manual_time: Option<f64>,
    /// Seconds.
    pub tool_time: Option<f64>,
    /// Slices spanned by the manual mask.
    pub slice_span: usize,
    pub time_ratio: Option<f64>,
    pub dsc: f64,
    pub hd_mm: f64,
    pub vol_manual_mm3: f64,
    pub vol_tool_mm3: f64,
    pub vol_ratio: Option<f64>,
}

/// Builds the row for one case from in-memory masks.
pub fn case_report(
    case_id: &str,
    manual: &LabelVolume,
    tool: &LabelVolume,
    manual_time_s: Option<f64>,
    tool_time_s: Option<f64>,
    axis: Axis,
) -> Result<CaseReport, MetricsError> {
    let dsc = dice(tool, manual)?;
    let hd = hausdorff(tool, manual)?;
    let vol_manual_mm3 = mask_volume_mm3(manual);
    let vol_tool_mm3 = mask_volume_mm3(tool);
    let time_ratio = match (manual_time_s, tool_time_s) {
        (Some(m), Some(t)) if m > 0.0 => Some(t / m),
        _ => None,
    };
    Ok(CaseReport {
        case_id: case_id.to_string(),
        manual_time: manual_time_s,
        tool_time: tool_time_s,
        slice_span: slice_span(manual, axis),
        time_ratio,
        dsc,
        hd_mm: hd.sym,
        vol_manual_mm3,
        vol_tool_mm3,
        vol_ratio: (vol_manual_mm3 > 0.0).then(|| vol_tool_mm3 / vol_manual_mm3),
    })
}

/// Column means over successful rows. Optional columns average the rows that have them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Averages {
    pub mt_min: Option<f64>,
    pub tool_min: Option<f64>,
    pub slices: Option<f64>,
    pub time_ratio: Option<f64>,
    pub dsc: Option<f64>,
    pub hd_mm: Option<f64>,
    pub vol_manual_mm3: Option<f64>,
    pub vol_tool_mm3: Option<f64>,
    pub vol_ratio: Option<f64>,
}

/// A row that failed keeps its id and the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportRow {
    Ok(CaseReport),
    Failed { case_id: String, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub cases: Vec<ReportRow>,
    pub averages: Averages,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

impl Report {
    pub fn from_rows(cases: Vec<ReportRow>) -> Self {
        let ok: Vec<&CaseReport> = cases
            .iter()
            .filter_map(|r| match r {
                ReportRow::Ok(c) => Some(c),
                ReportRow::Failed { .. } => None,
            })
            .collect();
        let col = |f: &dyn Fn(&CaseReport) -> Option<f64>| mean(ok.iter().map(|c| f(c)));
        let averages = Averages {
            mt_min: col(&|c| c.manual_time.map(|s| s / 60.0)),
            tool_min: col(&|c| c.tool_time.map(|s| s / 60.0)),
            slices: col(&|c| Some(c.slice_span as f64)),
            time_ratio: col(&|c| c.time_ratio),
            dsc: col(&|c| Some(c.dsc)),
            hd_mm: col(&|c| Some(c.hd_mm)),
            vol_manual_mm3: col(&|c| Some(c.vol_manual_mm3)),
            vol_tool_mm3: col(&|c| Some(c.vol_tool_mm3)),
            vol_ratio: col(&|c| c.vol_ratio),
        };
        Report { cases, averages }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(out);
        let header = [
            "case_id",
            "mt_min",
            "tool_min",
            "slices",
            "time_ratio",
            "dsc",
            "hd_mm",
            "vol_manual_mm3",
            "vol_tool_mm3",
            "vol_ratio",
        ];
        let csv_err = |e: csv::Error| ReportError::Manifest(e.to_string());
        w.write_record(header).map_err(csv_err)?;
        for row in &self.cases {
            let fields = match row {
                ReportRow::Ok(c) => vec![
                    c.case_id.clone(),
                    fmt2(c.manual_time.map(|s| s / 60.0)),
                    fmt2(c.tool_time.map(|s| s / 60.0)),
                    c.slice_span.to_string(),
                    fmt2(c.time_ratio),
                    fmt2(Some(c.dsc)),
                    fmt2(Some(c.hd_mm)),
                    fmt0(Some(c.vol_manual_mm3)),
                    fmt0(Some(c.vol_tool_mm3)),
                    fmt2(c.vol_ratio),
                ],
                ReportRow::Failed { case_id, .. } => {
                    let mut v = vec![case_id.clone()];
                    v.resize(header.len(), String::new());
                    v
                }
            };
            w.write_record(&fields).map_err(csv_err)?;
        }
        let a = &self.averages;
        w.write_record([
            "Averages".to_string(),
            fmt2(a.mt_min),
            fmt2(a.tool_min),
            fmt2(a.slices),
            fmt2(a.time_ratio),
            fmt2(a.dsc),
            fmt2(a.hd_mm),
            fmt0(a.vol_manual_mm3),
            fmt0(a.vol_tool_mm3),
            fmt2(a.vol_ratio),
        ])
        .map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn fmt2(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

fn fmt0(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.0}")).unwrap_or_default()
}

/// Computes every case (in parallel) and the averages row. A failing case is
/// recorded in its row and does not stop the batch.
pub fn build_report(cases: &[CaseInput], axis: Axis) -> Report {
    let rows = cases
        .par_iter()
        .map(|c| {
            let run = || -> Result<CaseReport, ReportError> {
                let read = |p: &Path| {
                    read_labels(p).map_err(|source| ReportError::Read {
                        case: c.case_id.clone(),
                        path: p.to_path_buf(),
                        source,
                    })
                };
                let manual = read(&c.manual_path)?;
                let tool = read(&c.tool_path)?;
                case_report(
                    &c.case_id,
                    &manual,
                    &tool,
                    c.manual_time_s,
                    c.tool_time_s,
                    axis,
                )
                .map_err(|source| ReportError::Metrics {
                    case: c.case_id.clone(),
                    source,
                })
            };
            match run() {
                Ok(r) => ReportRow::Ok(r),
                Err(e) => ReportRow::Failed {
                    case_id: c.case_id.clone(),
                    error: e.to_string(),
                },
            }
        })
        .collect();
    Report::from_rows(rows)
}
