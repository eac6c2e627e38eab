//! Learning-curve files and SVG charts.

use std::fmt::Write as _;

use super::{ExperimentError, Result};

/// Episodes per moving-average window.
pub const WINDOW: usize = 10;

/// Most points drawn per series; longer series are bucket-averaged.
pub const MAX_POINTS: usize = 1000;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#000000", "#d000d0", "#1f4fd0", "#d01f1f", "#1f9f3f", "#e08000", "#008080", "#808080"];

/// Trailing mean over the last `window` values (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= w {
            sum -= values[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

/// `episode,reward,moving_average` rows, episodes counted from 1.
pub fn curve_csv(rewards: &[f64]) -> String {
    let mut s = String::from("episode,reward,moving_average\n");
    for (i, (r, m)) in rewards.iter().zip(moving_average(rewards, WINDOW)).enumerate() {
        let _ = writeln!(s, "{},{r},{m}", i + 1);
    }
    s
}

/// Reads a curve file into `(episode, moving average)` points.
pub fn parse_curve_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let bad = |line: usize, msg: &str| ExperimentError::Curve(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "episode,reward,moving_average" => {}
        _ => return Err(bad(1, "expected header `episode,reward,moving_average`")),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(i + 1, "expected three fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        match (num(fields[0]), num(fields[1]), num(fields[2])) {
            (Some(e), Some(_), Some(m)) => points.push((e, m)),
            _ => return Err(bad(i + 1, "non-numeric field")),
        }
    }
    if points.is_empty() {
        return Err(ExperimentError::Curve("no data rows".into()));
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    /// Moving-average series of per-episode rewards.
    pub fn from_rewards(label: impl Into<String>, rewards: &[f64]) -> Self {
        let ma = moving_average(rewards, WINDOW);
        Series { label: label.into(), points: ma.into_iter().enumerate().map(|(i, m)| ((i + 1) as f64, m)).collect() }
    }
}

fn downsample(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points.to_vec();
    }
    let bucket = points.len().div_ceil(max);
    points
        .chunks(bucket)
        .map(|c| {
            let n = c.len() as f64;
            (c.iter().map(|p| p.0).sum::<f64>() / n, c.iter().map(|p| p.1).sum::<f64>() / n)
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-9 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn label(v: f64) -> String {
    if v.fract().abs() < 1e-9 || v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Line chart of the series with axes and a legend.
pub fn emit_plot(series: &[Series], title: &str) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(ExperimentError::Curve("nothing to plot".into()));
    }
    let drawn: Vec<Vec<(f64, f64)>> = series.iter().map(|s| downsample(&s.points, MAX_POINTS)).collect();
    let (x0, x1) = range(drawn.iter().flatten().map(|p| p.0));
    let (y0, y1) = range(drawn.iter().flatten().map(|p| p.1));
    let pad = (y1 - y0) * 0.05;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let (bx, by) = (LEFT, TOP + ph);
    let _ = writeln!(s, r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, LEFT + pw);
    let _ = writeln!(s, r#"<line x1="{bx}" y1="{TOP}" x2="{bx}" y2="{by}" stroke="black"/>"#);
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{by}" x2="{px:.2}" y2="{}" stroke="black"/>"#, by + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, by + 18.0, label(xv));
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{bx}" y2="{py:.2}" stroke="black"/>"#, bx - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, bx - 8.0, py + 4.0, label(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">cumulative reward ({WINDOW}-episode average)</text>"#,
        TOP + ph / 2.0
    );
    for (i, (ser, pts)) in series.iter().zip(&drawn).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#, path.join(" "));
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 25.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 32.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}
