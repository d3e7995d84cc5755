//! Static forest-plot rendering.
//!
//! The plot is derived solely from the estimates CSV: parse the rows, lay
//! out one marker-and-whisker line per (comparator, estimator, CI method)
//! grouped by estimator, draw a zero reference line, and emit SVG text with
//! fixed-precision coordinates. Re-rendering from the same CSV reproduces
//! the file byte for byte.

use anyhow::{anyhow, Context};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub comparator_a: String,
    pub comparator_b: String,
    pub estimator: String,
    pub difference: f64,
    pub n: usize,
    pub ci_method: Option<String>,
    pub level: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub se: Option<f64>,
}

pub fn parse_estimates_csv(text: &str) -> Result<Vec<EstimateRow>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record
            .context("reading estimates CSV")
            .map_err(CliError::config)?;
        let field = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let opt_f64 = |idx: usize| -> Result<Option<f64>, CliError> {
            let raw = field(idx);
            if raw.is_empty() {
                Ok(None)
            } else {
                raw.parse::<f64>()
                    .map(Some)
                    .map_err(|_| CliError::config(anyhow!("row {}: bad number {raw:?}", i + 1)))
            }
        };
        rows.push(EstimateRow {
            comparator_a: field(0),
            comparator_b: field(1),
            estimator: field(2),
            difference: opt_f64(3)?
                .ok_or_else(|| CliError::config(anyhow!("row {}: missing difference", i + 1)))?,
            n: field(4).parse().unwrap_or(0),
            ci_method: Some(field(5)).filter(|s| !s.is_empty()),
            level: opt_f64(6)?,
            lower: opt_f64(7)?,
            upper: opt_f64(8)?,
            se: opt_f64(9)?,
        });
    }
    Ok(rows)
}

const WIDTH: f64 = 860.0;
const MARGIN_LEFT: f64 = 300.0;
const MARGIN_RIGHT: f64 = 40.0;
const ROW_HEIGHT: f64 = 26.0;
const TOP: f64 = 46.0;
const BOTTOM: f64 = 56.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders the forest plot; rows are grouped by estimator in order of first
/// appearance, keeping the CSV's comparator order within each group.
pub fn render_forest(rows: &[EstimateRow]) -> String {
    let mut estimators: Vec<&str> = Vec::new();
    for row in rows {
        if !estimators.contains(&row.estimator.as_str()) {
            estimators.push(&row.estimator);
        }
    }
    let ordered: Vec<&EstimateRow> = estimators
        .iter()
        .flat_map(|est| rows.iter().filter(move |r| &r.estimator == est))
        .collect();

    let n_rows = ordered.len();
    let height = TOP + n_rows as f64 * ROW_HEIGHT + BOTTOM;

    // x-range from every plotted quantity, zero included, 8% padding
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for r in &ordered {
        lo = lo.min(r.difference).min(r.lower.unwrap_or(r.difference));
        hi = hi.max(r.difference).max(r.upper.unwrap_or(r.difference));
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.08 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_width = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let x = |v: f64| MARGIN_LEFT + (v - lo) / (hi - lo) * plot_width;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n"
    ));
    svg.push_str("<style>text{font-family:monospace;font-size:12px;}.lab{font-size:12px;}.tick{font-size:11px;fill:#444;}.hdr{font-size:13px;font-weight:bold;}</style>\n");
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    svg.push_str("<text class=\"hdr\" x=\"16\" y=\"24\">Clinical utility (difference in mean outcome) with confidence intervals</text>\n");

    // zero reference line
    svg.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
        fmt(x(0.0)),
        fmt(TOP - 8.0),
        fmt(TOP + n_rows as f64 * ROW_HEIGHT + 8.0),
    ));

    for (i, row) in ordered.iter().enumerate() {
        let cy = TOP + (i as f64 + 0.5) * ROW_HEIGHT;
        let label = match &row.ci_method {
            Some(m) => format!(
                "{} {} vs {} [{m}]",
                row.estimator, row.comparator_a, row.comparator_b
            ),
            None => format!(
                "{} {} vs {}",
                row.estimator, row.comparator_a, row.comparator_b
            ),
        };
        svg.push_str(&format!(
            "<text class=\"lab\" x=\"16\" y=\"{}\">{}</text>\n",
            fmt(cy + 4.0),
            escape(&label)
        ));
        if let (Some(l), Some(u)) = (row.lower, row.upper) {
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#1f4e79\" stroke-width=\"1.5\"/>\n",
                fmt(x(l)),
                fmt(cy),
                fmt(x(u)),
                fmt(cy)
            ));
            for v in [l, u] {
                svg.push_str(&format!(
                    "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#1f4e79\" stroke-width=\"1.5\"/>\n",
                    fmt(x(v)),
                    fmt(cy - 5.0),
                    fmt(cy + 5.0)
                ));
            }
        }
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"#c23b22\"/>\n",
            fmt(x(row.difference)),
            fmt(cy)
        ));
    }

    // axis with five ticks
    let axis_y = TOP + n_rows as f64 * ROW_HEIGHT + 16.0;
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(axis_y),
        fmt(WIDTH - MARGIN_RIGHT),
        fmt(axis_y)
    ));
    for k in 0..5 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>\n",
            fmt(x(v)),
            fmt(axis_y),
            fmt(axis_y + 5.0)
        ));
        svg.push_str(&format!(
            "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>\n",
            fmt(x(v)),
            fmt(axis_y + 18.0),
            v
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
