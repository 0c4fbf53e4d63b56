//! Self-contained SVG line charts over a log-scaled size axis. Every chart
//! carries its data as a comment so the figure can be audited as text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::summarize::SummaryRow;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Bias,
    Sd,
    Rmse,
    Coverage,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Bias, Metric::Sd, Metric::Rmse, Metric::Coverage];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Bias => "bias",
            Metric::Sd => "sd",
            Metric::Rmse => "rmse",
            Metric::Coverage => "coverage",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Bias => "Bias",
            Metric::Sd => "Empirical SD",
            Metric::Rmse => "RMSE",
            Metric::Coverage => "95% CI coverage",
        }
    }

    fn value(self, row: &SummaryRow) -> Option<f64> {
        match self {
            Metric::Bias => row.bias,
            Metric::Sd => row.sd,
            Metric::Rmse => row.rmse,
            Metric::Coverage => row.coverage,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; derived from the data when absent.
    pub y_range: Option<(f64, f64)>,
    pub reference: Option<f64>,
}

/// Number formatting that is stable across platforms.
fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Comment bodies may not contain `--`.
fn comment_safe(s: &str) -> String {
    let mut out = s.to_string();
    while out.contains("--") {
        out = out.replace("--", "-_");
    }
    out
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    while t <= hi + step * 1e-9 {
        ticks.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    ticks
}

impl Chart {
    pub fn to_svg(&self) -> Result<String> {
        let points: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).collect();
        if points.is_empty() {
            return Err(Error::InvalidInput("chart has no data points".into()));
        }
        if points.iter().any(|&(x, y)| !(x > 0.0 && x.is_finite() && y.is_finite())) {
            return Err(Error::InvalidInput("chart points need positive finite x and finite y".into()));
        }
        let (mut x_lo, mut x_hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0.ln()), b.max(p.0.ln())));
        if x_hi - x_lo < 1e-9 {
            x_lo -= 0.5;
            x_hi += 0.5;
        } else {
            let pad = 0.06 * (x_hi - x_lo);
            x_lo -= pad;
            x_hi += pad;
        }
        let (y_lo, y_hi) = match self.y_range {
            Some(r) => r,
            None => {
                let mut lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                let mut hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                if let Some(r) = self.reference {
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                if hi - lo < 1e-12 {
                    let w = lo.abs().max(1.0) * 0.1;
                    (lo - w, hi + w)
                } else {
                    let pad = 0.08 * (hi - lo);
                    (lo - pad, hi + pad)
                }
            }
        };
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x.ln() - x_lo) / (x_hi - x_lo) * plot_w;
        let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

        let mut svg = String::new();
        let w = &mut svg;
        let _ = writeln!(w, r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"##, WIDTH, HEIGHT, WIDTH, HEIGHT);
        let _ = writeln!(w, "<!-- data");
        let _ = writeln!(w, "series,x,y");
        for s in &self.series {
            for &(x, y) in &s.points {
                let _ = writeln!(w, "{},{},{}", comment_safe(&s.name), num(x), num(y));
            }
        }
        let _ = writeln!(w, "-->");
        let _ = writeln!(w, r##"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"##, WIDTH, HEIGHT);
        let _ = writeln!(w, r##"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"##, num(LEFT + plot_w / 2.0), escape(&self.title));
        let _ = writeln!(
            w,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"##,
            num(LEFT),
            num(TOP),
            num(plot_w),
            num(plot_h)
        );
        for t in nice_ticks(y_lo, y_hi) {
            let y = sy(t);
            let _ = writeln!(w, r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd"/>"##, num(LEFT), num(y), num(LEFT + plot_w), num(y));
            let _ = writeln!(w, r##"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"##, num(LEFT - 6.0), num(y + 4.0), num(t));
        }
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for x in xs {
            let px = sx(x);
            let _ = writeln!(w, r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"##, num(px), num(TOP + plot_h), num(px), num(TOP + plot_h + 5.0));
            let _ = writeln!(w, r##"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"##, num(px), num(TOP + plot_h + 18.0), num(x));
        }
        let _ = writeln!(w, r##"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{} (log scale)</text>"##, num(LEFT + plot_w / 2.0), num(HEIGHT - 12.0), escape(&self.x_label));
        let _ = writeln!(w, r##"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"##, num(TOP + plot_h / 2.0), num(TOP + plot_h / 2.0), escape(&self.y_label));
        if let Some(r) = self.reference {
            let y = sy(r);
            let _ = writeln!(w, r##"<line class="reference" x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="5,4"/>"##, num(LEFT), num(y), num(LEFT + plot_w), num(y));
        }
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if s.points.len() >= 2 {
                let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(y)))).collect();
                let _ = writeln!(w, r##"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"##, color, coords.join(" "));
            }
            for &(x, y) in &s.points {
                let _ = writeln!(w, r##"<circle cx="{}" cy="{}" r="3.5" fill="{}"/>"##, num(sx(x)), num(sy(y)), color);
            }
            let ly = TOP + 14.0 + 18.0 * i as f64;
            let lx = LEFT + plot_w + 12.0;
            let _ = writeln!(w, r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>"##, num(lx), num(ly), num(lx + 18.0), num(ly), color);
            let _ = writeln!(w, r##"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"##, num(lx + 24.0), num(ly + 4.0), escape(&s.name));
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

/// One chart for `metric`, with one series per scheme in order of appearance.
pub fn metric_chart(summary: &[SummaryRow], metric: Metric) -> Result<Chart> {
    if summary.is_empty() {
        return Err(Error::InvalidInput("summary is empty".into()));
    }
    let mut series: Vec<Series> = Vec::new();
    for row in summary {
        let Some(v) = metric.value(row) else { continue };
        match series.iter_mut().find(|s| s.name == row.scheme) {
            Some(s) => s.points.push((row.n as f64, v)),
            None => series.push(Series { name: row.scheme.clone(), points: vec![(row.n as f64, v)] }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let first = &summary[0];
    Ok(Chart {
        title: format!("{}: {}", first.experiment, metric.label()),
        x_label: "n".into(),
        y_label: metric.label().into(),
        series,
        y_range: (metric == Metric::Coverage).then_some((0.0, 1.0)),
        reference: match metric {
            Metric::Coverage => Some(0.95),
            Metric::Bias => Some(0.0),
            _ => None,
        },
    })
}

/// Writes `<stem>_<metric>.svg` for every metric into `dir`.
pub fn plot_summary(summary: &[SummaryRow], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if summary.is_empty() {
        return Err(Error::InvalidInput("summary is empty".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for metric in Metric::ALL {
        let svg = metric_chart(summary, metric)?.to_svg()?;
        let path = dir.join(format!("{stem}_{}.svg", metric.as_str()));
        std::fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary_row(scheme: &str, n: usize, v: f64) -> SummaryRow {
        SummaryRow {
            experiment: "x".into(),
            dgp: "clustered".into(),
            scheme: scheme.into(),
            n,
            replicates: 10,
            n_failed: 0,
            true_psi: 1.0,
            mean_estimate: Some(1.0 + v),
            bias: Some(v),
            sd: Some(v.abs() + 0.1),
            rmse: Some(v.abs() + 0.2),
            mean_se: Some(0.1),
            coverage: Some(0.9),
            ep_mean: None,
            ep_variance: None,
        }
    }

    #[test]
    fn one_polyline_per_scheme() {
        let mut rows = Vec::new();
        for scheme in ["as_independent", "two_way"] {
            for (i, n) in [49, 100, 225, 484].into_iter().enumerate() {
                rows.push(summary_row(scheme, n, 0.1 / (i + 1) as f64));
            }
        }
        for metric in Metric::ALL {
            let svg = metric_chart(&rows, metric).unwrap().to_svg().unwrap();
            assert_eq!(svg.matches("<polyline").count(), 2);
            for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
                let pts = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
                assert_eq!(pts.split(' ').count(), 4);
            }
            assert_eq!(svg.matches("<circle").count(), 8);
        }
    }

    #[test]
    fn single_size_gives_markers_only() {
        let rows = [summary_row("a", 100, 0.1), summary_row("b", 100, 0.2)];
        let svg = metric_chart(&rows, Metric::Rmse).unwrap().to_svg().unwrap();
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn coverage_axis_and_reference() {
        let rows = [summary_row("a", 100, 0.1), summary_row("a", 400, 0.1)];
        let chart = metric_chart(&rows, Metric::Coverage).unwrap();
        assert_eq!(chart.y_range, Some((0.0, 1.0)));
        assert_eq!(chart.reference, Some(0.95));
        let svg = chart.to_svg().unwrap();
        assert!(svg.contains(r##"class="reference""##));
        // the reference sits 5% below the top of the plot area
        let y = TOP + 0.05 * (HEIGHT - TOP - BOTTOM);
        assert!(svg.contains(&format!(r##"y1="{}""##, num(y))));
    }

    #[test]
    fn deterministic_and_comment_safe() {
        let rows = [summary_row("a--b", 100, 0.1), summary_row("a--b", 400, -0.1)];
        let a = metric_chart(&rows, Metric::Bias).unwrap().to_svg().unwrap();
        let b = metric_chart(&rows, Metric::Bias).unwrap().to_svg().unwrap();
        assert_eq!(a, b);
        let comment = a.split("<!--").nth(1).unwrap().split("-->").next().unwrap();
        assert!(!comment.contains("--"));
        assert!(comment.contains("400,-0.1"));
    }

    #[test]
    fn empty_summary_rejected() {
        assert!(metric_chart(&[], Metric::Sd).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(plot_summary(&[], dir.path(), "s").is_err());
    }

    #[test]
    fn writes_one_file_per_metric() {
        let rows = [summary_row("a", 100, 0.1), summary_row("a", 400, 0.05)];
        let dir = tempfile::tempdir().unwrap();
        let paths = plot_summary(&rows, dir.path(), "exp").unwrap();
        let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["exp_bias.svg", "exp_sd.svg", "exp_rmse.svg", "exp_coverage.svg"]);
    }
}
