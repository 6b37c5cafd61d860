//! Deterministic CSV and SVG emission for experiment results.

use std::path::{Path, PathBuf};

use crate::error::HarnessError;

use super::{EstimatorKind, RmseRow};

/// Paths of the artifacts an experiment run writes.
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// Renders the RMSE table. Columns: `sigma`, one `rmse_*` per estimator, one
/// `failures_*` per estimator, then `n_trials`. An empty estimator list
/// yields a bare `sigma` column.
pub fn render_csv(rows: &[RmseRow], estimators: &[EstimatorKind]) -> String {
    let mut out = String::new();
    out.push_str("sigma");
    for e in estimators {
        out.push_str(",rmse_");
        out.push_str(e.column_key());
    }
    for e in estimators {
        out.push_str(",failures_");
        out.push_str(e.column_key());
    }
    if !estimators.is_empty() {
        out.push_str(",n_trials");
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{}", row.sigma));
        for e in estimators {
            let entry = row.entries.iter().find(|x| x.estimator == *e);
            match entry.and_then(|x| x.rmse) {
                Some(v) => out.push_str(&format!(",{}", v)),
                None => out.push_str(",NaN"),
            }
        }
        for e in estimators {
            let failures = row
                .entries
                .iter()
                .find(|x| x.estimator == *e)
                .map(|x| x.failures)
                .unwrap_or(0);
            out.push_str(&format!(",{}", failures));
        }
        if !estimators.is_empty() {
            out.push_str(&format!(",{}", row.n_trials));
        }
        out.push('\n');
    }
    out
}

const PLOT_WIDTH: f64 = 640.0;
const PLOT_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

const SERIES_COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

fn fmt(v: f64) -> String {
    format!("{:.3}", v)
}

/// Renders a static line chart of RMSE against the ranging error, RMSE axis
/// log scaled. Byte-deterministic for identical rows.
pub fn render_svg(rows: &[RmseRow], estimators: &[EstimatorKind]) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = PLOT_WIDTH,
        h = PLOT_HEIGHT
    ));
    svg.push('\n');
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    svg.push('\n');

    let x0 = MARGIN_LEFT;
    let x1 = PLOT_WIDTH - MARGIN_RIGHT;
    let y0 = PLOT_HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;

    let mut points: Vec<(EstimatorKind, Vec<(f64, f64)>)> = Vec::new();
    for &e in estimators {
        let series: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.rmse_of(e).map(|v| (r.sigma, v)))
            .filter(|(_, v)| *v > 0.0 && v.is_finite())
            .collect();
        points.push((e, series));
    }

    let xs: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
    let ys: Vec<f64> = points
        .iter()
        .flat_map(|(_, s)| s.iter().map(|(_, v)| *v))
        .collect();

    if xs.is_empty() || ys.is_empty() {
        svg.push_str(&format!(
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">no data</text>"#,
            PLOT_WIDTH / 2.0,
            PLOT_HEIGHT / 2.0
        ));
        svg.push_str("\n</svg>\n");
        return svg;
    }

    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_log_min = ys.iter().cloned().fold(f64::INFINITY, f64::min).log10().floor();
    let y_log_max = ys
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .log10()
        .ceil();
    let y_span = if y_log_max > y_log_min {
        y_log_max - y_log_min
    } else {
        1.0
    };

    let map_x = |x: f64| x0 + (x - x_min) / x_span * (x1 - x0);
    let map_y = |y: f64| y0 - (y.log10() - y_log_min) / y_span * (y0 - y1);

    // Axes.
    svg.push_str(&format!(
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        fmt(x0),
        fmt(y0),
        fmt(x1),
        fmt(y0)
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        fmt(x0),
        fmt(y0),
        fmt(x0),
        fmt(y1)
    ));
    svg.push('\n');

    // X ticks at the grid sigmas.
    for &x in &xs {
        let px = map_x(x);
        svg.push_str(&format!(
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#,
            fmt(px),
            fmt(y0),
            fmt(y0 + 5.0)
        ));
        svg.push_str(&format!(
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            fmt(px),
            fmt(y0 + 18.0),
            x
        ));
        svg.push('\n');
    }

    // Y ticks at decades.
    let mut decade = y_log_min;
    while decade <= y_log_max + 1e-9 {
        let py = map_y(10f64.powf(decade));
        svg.push_str(&format!(
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#cccccc"/>"##,
            fmt(x0),
            fmt(py),
            fmt(x1)
        ));
        svg.push_str(&format!(
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">1e{}</text>"#,
            fmt(x0 - 6.0),
            fmt(py + 4.0),
            decade as i64
        ));
        svg.push('\n');
        decade += 1.0;
    }

    // Axis labels.
    svg.push_str(&format!(
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">ranging error sigma [m]</text>"#,
        fmt((x0 + x1) / 2.0),
        fmt(PLOT_HEIGHT - 12.0)
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {y})">translation RMSE [m]</text>"#,
        fmt((y0 + y1) / 2.0),
        y = fmt((y0 + y1) / 2.0)
    ));
    svg.push('\n');

    // Series.
    for (idx, (e, series)) in points.iter().enumerate() {
        if series.is_empty() {
            continue;
        }
        let color = SERIES_COLORS[idx % SERIES_COLORS.len()];
        let path: Vec<String> = series
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(map_x(*x)), fmt(map_y(*y))))
            .collect();
        svg.push_str(&format!(
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color,
            path.join(" ")
        ));
        svg.push('\n');
        for (x, y) in series {
            svg.push_str(&format!(
                r#"<circle cx="{}" cy="{}" r="3" fill="{}"/>"#,
                fmt(map_x(*x)),
                fmt(map_y(*y)),
                color
            ));
        }
        svg.push('\n');
        // Legend entry.
        let ly = y1 + 16.0 + idx as f64 * 18.0;
        svg.push_str(&format!(
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="1.5"/>"#,
            fmt(x1 - 150.0),
            fmt(ly - 4.0),
            fmt(x1 - 126.0),
            color
        ));
        svg.push_str(&format!(
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            fmt(x1 - 120.0),
            fmt(ly),
            e.column_key()
        ));
        svg.push('\n');
    }

    svg.push_str("</svg>\n");
    svg
}

/// Writes `rmse.csv` and `rmse.svg` under `out_dir`, creating it if needed.
pub fn emit_outputs(
    rows: &[RmseRow],
    estimators: &[EstimatorKind],
    out_dir: &Path,
) -> Result<EmittedFiles, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let csv_path = out_dir.join("rmse.csv");
    let svg_path = out_dir.join("rmse.svg");
    std::fs::write(&csv_path, render_csv(rows, estimators)).map_err(|source| HarnessError::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    std::fs::write(&svg_path, render_svg(rows, estimators)).map_err(|source| HarnessError::Io {
        path: svg_path.display().to_string(),
        source,
    })?;
    Ok(EmittedFiles {
        csv: csv_path,
        svg: svg_path,
    })
}
