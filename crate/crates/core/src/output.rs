//! CSV time series and TOML reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! file back yields bit-identical values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::channel::to_db;
use crate::config::RunConfig;
use crate::engine::{CampaignResult, DeltaLambdaPoint, PassSummary, StepRecord, SweepCell};
use crate::oracle::BenchCell;
use crate::swap::BsmRates;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("report serialisation failed: {0}")]
    Toml(#[from] toml::ser::Error),
    #[error("inconsistent result: {0}")]
    Invariant(String),
}

pub const TIMESERIES_COLUMNS: [&str; 22] = [
    "t_s",
    "theta_A_deg",
    "theta_B_deg",
    "L_A_km",
    "L_B_km",
    "L_IS_A_km",
    "L_IS_B_km",
    "eta_dl_or_ul_A_dB",
    "eta_dl_or_ul_B_dB",
    "eta_is_dB",
    "eta_A",
    "eta_B",
    "trt_A_ms",
    "trt_B_ms",
    "dcut_A",
    "dcut_B",
    "r_att_hz",
    "r_succ_hz",
    "r_corr_hz",
    "r_sec_hz",
    "qber_x",
    "night",
];

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, OutputError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| OutputError::Csv { path: path.into(), source })
}

fn db_field(s: Option<crate::channel::ChannelSample>) -> String {
    s.map(|c| to_db(c.eta_total).to_string()).unwrap_or_default()
}

/// Loss columns are empty on steps without links. `eta_is_dB` is the mean of
/// the two inter-satellite losses.
pub fn timeseries_row(r: &StepRecord) -> Vec<String> {
    let is_db = match (r.is_a, r.is_b) {
        (Some(a), Some(b)) => (0.5 * (to_db(a.eta_total) + to_db(b.eta_total))).to_string(),
        _ => String::new(),
    };
    vec![
        r.t.to_string(),
        r.theta_a.to_string(),
        r.theta_b.to_string(),
        r.l_a.to_string(),
        r.l_b.to_string(),
        r.l_is_a.to_string(),
        r.l_is_b.to_string(),
        db_field(r.ground_a),
        db_field(r.ground_b),
        is_db,
        r.eta_a.to_string(),
        r.eta_b.to_string(),
        (r.trt_a_s * 1e3).to_string(),
        (r.trt_b_s * 1e3).to_string(),
        r.d_cut_a.to_string(),
        r.d_cut_b.to_string(),
        r.rates.attempted.to_string(),
        r.rates.successful.to_string(),
        r.rates.correct.to_string(),
        r.rates.secure.to_string(),
        r.rates.qber_x.to_string(),
        u8::from(r.night).to_string(),
    ]
}

pub fn emit_timeseries(records: &[StepRecord], path: &Path) -> Result<(), OutputError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| OutputError::Csv { path: path.into(), source };
    w.write_record(TIMESERIES_COLUMNS).map_err(wrap)?;
    for r in records {
        w.write_record(timeseries_row(r)).map_err(wrap)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.into(), source })
}

pub fn emit_sweep(cells: &[SweepCell], path: &Path) -> Result<(), OutputError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| OutputError::Csv { path: path.into(), source };
    w.write_record(["altitude_km", "ratio", "secure_total", "duration_s", "infeasible"]).map_err(wrap)?;
    for c in cells {
        let reason = match c.infeasible {
            None => "",
            Some(crate::engine::Infeasibility::GroundElevation) => "ground_elevation",
            Some(crate::engine::Infeasibility::IntersatOcclusion) => "intersat_occlusion",
        };
        w.write_record([
            c.altitude_km.to_string(),
            c.ratio.to_string(),
            c.secure_total.to_string(),
            c.duration_s.to_string(),
            reason.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.into(), source })
}

pub fn emit_passes(passes: &[PassSummary], path: &Path) -> Result<(), OutputError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| OutputError::Csv { path: path.into(), source };
    w.write_record([
        "t_start_s",
        "t_end_s",
        "duration_s",
        "max_theta_A_deg",
        "max_theta_B_deg",
        "peak_r_sec_hz",
        "n_att",
        "n_succ",
        "n_corr",
        "n_err",
        "n_sec",
        "night",
        "truncated",
    ])
    .map_err(wrap)?;
    for p in passes {
        w.write_record([
            p.t_start.to_string(),
            p.t_end.to_string(),
            p.duration_s.to_string(),
            p.max_elevation_a.to_string(),
            p.max_elevation_b.to_string(),
            p.peak.secure.to_string(),
            p.totals.attempted.to_string(),
            p.totals.successful.to_string(),
            p.totals.correct.to_string(),
            p.totals.erroneous.to_string(),
            p.totals.secure.to_string(),
            u8::from(p.night).to_string(),
            u8::from(p.truncated).to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.into(), source })
}

pub fn emit_cumulative(c: &CampaignResult, path: &Path) -> Result<(), OutputError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| OutputError::Csv { path: path.into(), source };
    w.write_record(["t_s", "n_sec_night_cum", "n_sec_cum"]).map_err(wrap)?;
    for (t, n, a) in c.cumulative_secure() {
        w.write_record([t.to_string(), n.to_string(), a.to_string()]).map_err(wrap)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.into(), source })
}

pub fn emit_bench(cells: &[BenchCell], path: &Path) -> Result<(), OutputError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| OutputError::Csv { path: path.into(), source };
    let mut header = vec!["eta_A".to_string(), "eta_B".into(), "d_rt_bins".into(), "seed".into()];
    for n in ["att", "succ", "corr", "err"] {
        for k in ["analytic", "mc", "se", "z"] {
            header.push(format!("{n}_{k}"));
        }
    }
    w.write_record(&header).map_err(wrap)?;
    for c in cells {
        let z = c.z();
        let mut row = vec![c.eta_a.to_string(), c.eta_b.to_string(), c.d_rt.to_string(), c.seed.to_string()];
        for k in 0..4 {
            row.extend([c.analytic[k].to_string(), c.simulated[k].to_string(), c.se[k].to_string(), z[k].to_string()]);
        }
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.into(), source })
}

#[derive(Serialize)]
struct Counts {
    attempted: f64,
    successful: f64,
    correct: f64,
    erroneous: f64,
    secure: f64,
    qber_x: f64,
}

impl From<&BsmRates> for Counts {
    fn from(r: &BsmRates) -> Self {
        Counts {
            attempted: r.attempted,
            successful: r.successful,
            correct: r.correct,
            erroneous: r.erroneous,
            secure: r.secure,
            qber_x: r.qber_x,
        }
    }
}

#[derive(Serialize)]
struct PassRow {
    t_start_s: f64,
    t_end_s: f64,
    duration_s: f64,
    max_theta_a_deg: f64,
    max_theta_b_deg: f64,
    night: bool,
    truncated: bool,
    peak_hz: Counts,
    totals: Counts,
}

impl From<&PassSummary> for PassRow {
    fn from(p: &PassSummary) -> Self {
        PassRow {
            t_start_s: p.t_start,
            t_end_s: p.t_end,
            duration_s: p.duration_s,
            max_theta_a_deg: p.max_elevation_a,
            max_theta_b_deg: p.max_elevation_b,
            night: p.night,
            truncated: p.truncated,
            peak_hz: (&p.peak).into(),
            totals: (&p.totals).into(),
        }
    }
}

#[derive(Serialize)]
struct ConfigEcho {
    key: String,
    value: String,
    source: String,
}

#[derive(Serialize, Default)]
struct Report {
    mode: String,
    architecture: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    campaign: Option<CampaignTotals>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    passes: Vec<PassRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sweep: Vec<SweepCell>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    delta_lambda: Vec<DeltaLambdaPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bench: Option<BenchTotals>,
    config: Vec<ConfigEcho>,
}

#[derive(Serialize)]
struct CampaignTotals {
    duration_s: f64,
    passes: usize,
    night_passes: usize,
    total: Counts,
    night: Counts,
    day: Counts,
    peak_secure_hz: f64,
    peak_secure_night_hz: f64,
}

#[derive(Serialize)]
struct BenchTotals {
    cells: usize,
    comparisons: usize,
    max_abs_z: f64,
    beyond_3_se: usize,
    rng: String,
}

/// Everything a report may contain; unused parts stay empty.
#[derive(Default)]
pub struct ReportInput<'a> {
    pub passes: &'a [PassSummary],
    pub campaign: Option<&'a CampaignResult>,
    pub sweep: &'a [SweepCell],
    pub delta_lambda: &'a [DeltaLambdaPoint],
    pub bench: &'a [BenchCell],
}

pub fn render_report(cfg: &RunConfig, input: &ReportInput) -> Result<String, OutputError> {
    let mut rep = Report {
        mode: cfg.mode.label().into(),
        architecture: cfg.scenario.architecture.label().into(),
        ..Default::default()
    };
    let passes = input.campaign.map(|c| c.passes.as_slice()).unwrap_or(input.passes);
    rep.passes = passes.iter().map(PassRow::from).collect();
    if let Some(c) = input.campaign {
        if c.night_total.secure > c.total.secure * (1.0 + 1e-12) {
            return Err(OutputError::Invariant(format!(
                "night secure total {} exceeds total {}",
                c.night_total.secure, c.total.secure
            )));
        }
        let mut day = BsmRates {
            attempted: c.total.attempted - c.night_total.attempted,
            successful: c.total.successful - c.night_total.successful,
            correct: c.total.correct - c.night_total.correct,
            erroneous: c.total.erroneous - c.night_total.erroneous,
            secure: c.total.secure - c.night_total.secure,
            qber_x: 0.0,
        };
        day.qber_x = if day.successful > 0.0 { day.erroneous / day.successful } else { 0.0 };
        rep.campaign = Some(CampaignTotals {
            duration_s: c.duration_s,
            passes: c.passes.len(),
            night_passes: c.passes.iter().filter(|p| p.night).count(),
            total: (&c.total).into(),
            night: (&c.night_total).into(),
            day: (&day).into(),
            peak_secure_hz: c.peak_secure(false),
            peak_secure_night_hz: c.peak_secure(true),
        });
    }
    rep.sweep = input.sweep.to_vec();
    rep.delta_lambda = input.delta_lambda.to_vec();
    if !input.bench.is_empty() {
        let zs: Vec<f64> = input.bench.iter().flat_map(|c| c.z()).collect();
        rep.bench = Some(BenchTotals {
            cells: input.bench.len(),
            comparisons: zs.len(),
            max_abs_z: zs.iter().fold(0.0, |m: f64, z| m.max(z.abs())),
            beyond_3_se: zs.iter().filter(|z| z.abs() > 3.0).count(),
            rng: crate::oracle::RNG_NAME.into(),
        });
    }
    rep.config = cfg
        .resolved
        .iter()
        .map(|(k, v, s)| ConfigEcho { key: k.clone(), value: v.clone(), source: s.clone() })
        .collect();
    Ok(toml::to_string(&rep)?)
}

pub fn emit_report(cfg: &RunConfig, input: &ReportInput, path: &Path) -> Result<(), OutputError> {
    let text = render_report(cfg, input)?;
    let io = |source| OutputError::Io { path: path.into(), source };
    let mut f = BufWriter::new(File::create(path).map_err(io)?);
    f.write_all(text.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}
