//! Report files: CSV for the raw per-bit/per-run tables, JSON for the
//! complete result record (versioned with a top-level `format` tag), and
//! static SVG charts.
//!
//! Writes go to a temporary file in the target directory followed by an
//! atomic rename, so a failed run never leaves a partial report behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{BitEntry, EccEvalResult, EntryStatus, MonteCarloResult, SweepResult};

pub const SWEEP_FORMAT_TAG: &str = "pulseflip/sweep/v1";
pub const MC_FORMAT_TAG: &str = "pulseflip/mc/v1";
pub const ECC_FORMAT_TAG: &str = "pulseflip/ecc/v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write report {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unexpected report format tag {found:?}, expected {expected:?}")]
    FormatTag { found: String, expected: String },
}

/// Output format of a report file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl std::fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReportFormat::Csv => f.write_str("csv"),
            ReportFormat::Json => f.write_str("json"),
            ReportFormat::Svg => f.write_str("svg"),
        }
    }
}

/// A campaign result to be written out.
#[derive(Debug, Clone, Copy)]
pub enum ReportData<'a> {
    Sweep(&'a SweepResult),
    MonteCarlo(&'a MonteCarloResult),
    Ecc(&'a EccEvalResult),
}

/// Render `data` in `format` and write it atomically to `path`.
pub fn write_report(data: ReportData<'_>, format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    let content = render_report(data, format)?;
    write_atomic(path, &content)
}

/// Render a report to a string without touching the filesystem.
pub fn render_report(data: ReportData<'_>, format: ReportFormat) -> Result<String, ReportError> {
    Ok(match (data, format) {
        (ReportData::Sweep(r), ReportFormat::Csv) => entries_csv(&r.entries),
        (ReportData::Sweep(r), ReportFormat::Json) => to_tagged_json(SWEEP_FORMAT_TAG, r)?,
        (ReportData::Sweep(r), ReportFormat::Svg) => sweep_svg(r),
        (ReportData::MonteCarlo(r), ReportFormat::Csv) => mc_csv(r),
        (ReportData::MonteCarlo(r), ReportFormat::Json) => to_tagged_json(MC_FORMAT_TAG, r)?,
        (ReportData::MonteCarlo(r), ReportFormat::Svg) => mc_svg(r),
        (ReportData::Ecc(r), ReportFormat::Csv) => entries_csv(&r.entries),
        (ReportData::Ecc(r), ReportFormat::Json) => to_tagged_json(ECC_FORMAT_TAG, r)?,
        (ReportData::Ecc(r), ReportFormat::Svg) => ecc_svg(r),
    })
}

/// Write with a temp-file-and-rename so partial files never survive.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| io_err(std::io::Error::other("path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    if let Err(source) = std::fs::write(&tmp, contents) {
        let _ = std::fs::remove_file(&tmp);
        return Err(io_err(source));
    }
    if let Err(source) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(io_err(source));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TaggedRef<'a, T: Serialize> {
    format: &'static str,
    #[serde(flatten)]
    data: &'a T,
}

fn to_tagged_json<T: Serialize>(tag: &'static str, data: &T) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(&TaggedRef { format: tag, data })?;
    text.push('\n');
    Ok(text)
}

fn from_tagged_json<T: DeserializeOwned>(text: &str, expected: &str) -> Result<T, ReportError> {
    #[derive(Deserialize)]
    struct TagOnly {
        format: String,
    }
    let tag: TagOnly = serde_json::from_str(text)?;
    if tag.format != expected {
        return Err(ReportError::FormatTag {
            found: tag.format,
            expected: expected.to_string(),
        });
    }
    // The result types tolerate the extra `format` key.
    Ok(serde_json::from_str(text)?)
}

pub fn sweep_from_json(text: &str) -> Result<SweepResult, ReportError> {
    from_tagged_json(text, SWEEP_FORMAT_TAG)
}

pub fn mc_from_json(text: &str) -> Result<MonteCarloResult, ReportError> {
    from_tagged_json(text, MC_FORMAT_TAG)
}

pub fn ecc_from_json(text: &str) -> Result<EccEvalResult, ReportError> {
    from_tagged_json(text, ECC_FORMAT_TAG)
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

fn entries_csv(entries: &[BitEntry]) -> String {
    let mut out = String::from("bit_index,tvd_increase_pct,status\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{}",
            e.bit_index,
            e.tvd_increase_pct,
            e.status.as_str()
        );
    }
    out
}

fn mc_csv(result: &MonteCarloResult) -> String {
    let mut out = String::from("run,bit_index,tvd_increase_pct_pre_ecc,tvd_increase_pct_post_ecc,redraws\n");
    for s in &result.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.run, s.bit_index, s.pre_ecc_pct, s.post_ecc_pct, s.redraws
        );
    }
    out
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

const CHART_W: f64 = 760.0;
const CHART_H: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 56.0;

const SERIES_COLOR: &str = "#1f77b4";
const PRE_COLOR: &str = "#d62728";
const POST_COLOR: &str = "#2ca02c";
const Q_COLOR: &str = "#ff7f0e";

struct Scale {
    min: f64,
    max: f64,
    lo_px: f64,
    hi_px: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        let t = (v - self.min) / (self.max - self.min);
        self.lo_px + t * (self.hi_px - self.lo_px)
    }
}

fn nice_step(range: f64) -> f64 {
    for step in [1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0] {
        if range / step <= 6.0 {
            return step;
        }
    }
    500.0
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{CHART_H}\" viewBox=\"0 0 {CHART_W} {CHART_H}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        out,
        "  <rect width=\"{CHART_W}\" height=\"{CHART_H}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        out,
        "  <text x=\"{MARGIN_L}\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{}</text>",
        xml_escape(title)
    );
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn y_axis(out: &mut String, scale: &Scale, label: &str) {
    let step = nice_step(scale.max - scale.min);
    let mut tick = (scale.min / step).ceil() * step;
    while tick <= scale.max + 1e-9 {
        let y = scale.map(tick);
        let _ = writeln!(
            out,
            "  <line x1=\"{MARGIN_L}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>",
            CHART_W - MARGIN_R
        );
        let label = if tick == 0.0 { 0.0 } else { tick };
        let _ = writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{label}</text>",
            MARGIN_L - 6.0,
            y + 4.0
        );
        tick += step;
    }
    let mid = (MARGIN_T + CHART_H - MARGIN_B) / 2.0;
    let _ = writeln!(
        out,
        "  <text x=\"16\" y=\"{mid:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {mid:.2})\">{}</text>",
        xml_escape(label)
    );
}

fn frame_and_x_label(out: &mut String, label: &str) {
    let x1 = MARGIN_L;
    let y1 = CHART_H - MARGIN_B;
    let x2 = CHART_W - MARGIN_R;
    let _ = writeln!(
        out,
        "  <line x1=\"{x1}\" y1=\"{MARGIN_T}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "  <line x1=\"{x1}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        (x1 + x2) / 2.0,
        CHART_H - 14.0,
        xml_escape(label)
    );
}

fn per_bit_chart(title: &str, entries: &[BitEntry]) -> String {
    let values: Vec<f64> = entries.iter().map(|e| e.tvd_increase_pct).collect();
    let data_min = values.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let data_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(10.0);
    let pad = 0.05 * (data_max - data_min);
    let y = Scale {
        min: data_min - pad,
        max: data_max + pad,
        lo_px: CHART_H - MARGIN_B,
        hi_px: MARGIN_T,
    };
    let x = Scale {
        min: 0.0,
        max: 31.0,
        lo_px: MARGIN_L + 8.0,
        hi_px: CHART_W - MARGIN_R - 8.0,
    };
    let mut out = String::new();
    svg_open(&mut out, title);
    y_axis(&mut out, &y, "TVD increase (%)");
    frame_and_x_label(&mut out, "bit index (0 = sign, 1-8 exponent, 9-31 mantissa)");
    for tick in (0..32).step_by(4).chain([31]) {
        let _ = writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{tick}</text>",
            x.map(tick as f64),
            CHART_H - MARGIN_B + 16.0
        );
    }
    let points: Vec<String> = entries
        .iter()
        .map(|e| format!("{:.2},{:.2}", x.map(e.bit_index as f64), y.map(e.tvd_increase_pct)))
        .collect();
    let _ = writeln!(
        out,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"{SERIES_COLOR}\" stroke-width=\"1.5\"/>",
        points.join(" ")
    );
    for e in entries {
        // Interpolated (halted) points are hollow.
        let fill = if e.status == EntryStatus::Measured {
            SERIES_COLOR
        } else {
            "white"
        };
        let _ = writeln!(
            out,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.2\" fill=\"{fill}\" stroke=\"{SERIES_COLOR}\"/>",
            x.map(e.bit_index as f64),
            y.map(e.tvd_increase_pct)
        );
    }
    let lx = CHART_W - MARGIN_R - 210.0;
    let _ = writeln!(
        out,
        "  <circle cx=\"{lx}\" cy=\"{MARGIN_T}\" r=\"3.2\" fill=\"{SERIES_COLOR}\" stroke=\"{SERIES_COLOR}\"/>\n  <text x=\"{}\" y=\"{}\" font-size=\"11\">measured</text>",
        lx + 8.0,
        MARGIN_T + 4.0
    );
    let _ = writeln!(
        out,
        "  <circle cx=\"{}\" cy=\"{MARGIN_T}\" r=\"3.2\" fill=\"white\" stroke=\"{SERIES_COLOR}\"/>\n  <text x=\"{}\" y=\"{}\" font-size=\"11\">interpolated (halted)</text>",
        lx + 78.0,
        lx + 86.0,
        MARGIN_T + 4.0
    );
    out.push_str("</svg>\n");
    out
}

fn sweep_svg(result: &SweepResult) -> String {
    per_bit_chart(
        &format!(
            "TVD increase per flipped bit - {} gate, {} amplitude, {} ({} shots, seed {})",
            result.gate, result.target, result.backend, result.shots, result.seed
        ),
        &result.entries,
    )
}

fn ecc_svg(result: &EccEvalResult) -> String {
    per_bit_chart(
        &format!(
            "Post-correction TVD increase - {} gate, {} code, {} (overhead {:.2}%)",
            result.gate, result.scheme, result.backend, result.nominal_overhead_pct
        ),
        &result.entries,
    )
}

fn mc_svg(result: &MonteCarloResult) -> String {
    let max_count = result
        .bins
        .iter()
        .map(|b| b.pre_count.max(b.post_count))
        .max()
        .unwrap_or(1)
        .max(1);
    let y = Scale {
        min: 0.0,
        max: max_count as f64 * 1.08,
        lo_px: CHART_H - MARGIN_B,
        hi_px: MARGIN_T,
    };
    let lo = result.bins.first().map_or(0.0, |b| b.lo);
    let hi = result.bins.last().map_or(1.0, |b| b.hi);
    let x = Scale {
        min: lo,
        max: hi,
        lo_px: MARGIN_L + 4.0,
        hi_px: CHART_W - MARGIN_R - 4.0,
    };
    let mut out = String::new();
    svg_open(
        &mut out,
        &format!(
            "TVD increase distribution - {} gate, {} runs, {} ({} shots, seed {})",
            result.gate, result.runs, result.backend, result.shots, result.seed
        ),
    );
    y_axis(&mut out, &y, "runs");
    frame_and_x_label(&mut out, "TVD increase (%)");
    for bin in &result.bins {
        let x0 = x.map(bin.lo);
        let width = (x.map(bin.hi) - x0) * 0.42;
        for (offset, count, color) in [
            (0.04, bin.pre_count, PRE_COLOR),
            (0.50, bin.post_count, POST_COLOR),
        ] {
            if count == 0 {
                continue;
            }
            let top = y.map(count as f64);
            let _ = writeln!(
                out,
                "  <rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{width:.2}\" height=\"{:.2}\" fill=\"{color}\" fill-opacity=\"0.8\"/>",
                x0 + offset * (x.map(bin.hi) - x0),
                y.lo_px - top
            );
        }
        let _ = writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            x.map((bin.lo + bin.hi) / 2.0),
            CHART_H - MARGIN_B + 16.0,
            bin.lo
        );
    }
    let lx = CHART_W - MARGIN_R - 230.0;
    let _ = writeln!(
        out,
        "  <rect x=\"{lx}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{PRE_COLOR}\"/>\n  <text x=\"{}\" y=\"{}\" font-size=\"11\">before ECC</text>",
        MARGIN_T - 6.0,
        lx + 14.0,
        MARGIN_T + 3.0
    );
    let _ = writeln!(
        out,
        "  <rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{POST_COLOR}\"/>\n  <text x=\"{}\" y=\"{}\" font-size=\"11\">after rep3</text>",
        lx + 110.0,
        MARGIN_T - 6.0,
        lx + 124.0,
        MARGIN_T + 3.0
    );
    out.push_str("</svg>\n");
    out
}

/// Two-panel (or single-panel) I/Q waveform chart for the render command.
pub fn pulse_chart_svg(
    title: &str,
    nominal: &[Complex64],
    flipped: Option<(&[Complex64], u8)>,
) -> String {
    let panel_h = 190.0;
    let panels = 1 + flipped.is_some() as usize;
    let height = MARGIN_T + panel_h * panels as f64 + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{height}\" viewBox=\"0 0 {CHART_W} {height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(out, "  <rect width=\"{CHART_W}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "  <text x=\"{MARGIN_L}\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{}</text>",
        xml_escape(title)
    );
    let draw_panel = |out: &mut String, top: f64, samples: &[Complex64], label: &str| {
        let peak = samples
            .iter()
            .map(|s| s.re.abs().max(s.im.abs()))
            .fold(f64::MIN_POSITIVE, f64::max);
        let y = Scale {
            min: -peak * 1.1,
            max: peak * 1.1,
            lo_px: top + panel_h - 18.0,
            hi_px: top + 26.0,
        };
        let x = Scale {
            min: 0.0,
            max: (samples.len().max(2) - 1) as f64,
            lo_px: MARGIN_L,
            hi_px: CHART_W - MARGIN_R,
        };
        let _ = writeln!(
            out,
            "  <text x=\"{MARGIN_L}\" y=\"{:.2}\" font-size=\"12\">{}</text>",
            top + 16.0,
            xml_escape(label)
        );
        let zero = y.map(0.0);
        let _ = writeln!(
            out,
            "  <line x1=\"{MARGIN_L}\" y1=\"{zero:.2}\" x2=\"{:.2}\" y2=\"{zero:.2}\" stroke=\"#bbb\"/>",
            CHART_W - MARGIN_R
        );
        for (component, color, dash) in [(0usize, SERIES_COLOR, ""), (1, Q_COLOR, " stroke-dasharray=\"4 3\"")] {
            let points: Vec<String> = samples
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let v = if component == 0 { s.re } else { s.im };
                    format!("{:.2},{:.2}", x.map(j as f64), y.map(v))
                })
                .collect();
            let _ = writeln!(
                out,
                "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
                points.join(" ")
            );
        }
    };
    draw_panel(&mut out, MARGIN_T - 10.0, nominal, "nominal pulse (I solid, Q dashed)");
    if let Some((samples, bit)) = flipped {
        draw_panel(
            &mut out,
            MARGIN_T - 10.0 + panel_h,
            samples,
            &format!("bit {bit} flipped (I solid, Q dashed)"),
        );
    }
    out.push_str("</svg>\n");
    out
}
