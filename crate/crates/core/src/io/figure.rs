//! Standalone SVG figure for one compared pair: raw counts, smoothed
//! trends, an optional auxiliary series and the rejected intervals.

use std::fmt::Write as _;

use crate::interval::Interval;
use crate::multiscale::PairResult;

const WIDTH: f64 = 820.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const PANEL_H: f64 = 170.0;
const GAP: f64 = 46.0;
const TOP: f64 = 30.0;
const LANE_H: f64 = 9.0;
const COLOR_I: &str = "#1f4e9c";
const COLOR_J: &str = "#c0392b";

/// Extra series drawn in its own panel (e.g. a policy index).
#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub label: String,
    pub series_i: Vec<f64>,
    pub series_j: Vec<f64>,
}

/// Input for one figure.
pub struct FigureData<'a> {
    pub pair: &'a PairResult<f64>,
    pub raw_i: &'a [f64],
    pub raw_j: &'a [f64],
    pub smooth_i: &'a [f64],
    pub smooth_j: &'a [f64],
    pub overlay: Option<&'a Overlay>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    top: f64,
    t_len: usize,
}

impl Frame {
    fn x(&self, day: f64) -> f64 {
        let span = (self.t_len.max(1)) as f64;
        LEFT + (day - 0.5) / span * (WIDTH - LEFT - RIGHT)
    }

    fn axes(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r##"<text x="{LEFT}" y="{:.1}" font-size="13" font-weight="bold">{}</text>"##,
            self.top - 8.0,
            esc(title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{:.1}" width="{:.1}" height="{PANEL_H}" fill="none" stroke="#444" stroke-width="0.8"/>"##,
            self.top,
            WIDTH - LEFT - RIGHT
        );
        let step = nice_step(self.t_len as f64 / 6.0);
        let mut d = step;
        while d <= self.t_len as f64 {
            let x = self.x(d);
            let _ = writeln!(
                out,
                r##"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{d}</text>"##,
                self.top + PANEL_H + 13.0
            );
            d += step;
        }
    }

    fn line(&self, out: &mut String, values: &[f64], vmax: f64, color: &str) {
        if values.is_empty() {
            return;
        }
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let y = self.top + PANEL_H - (v / vmax) * (PANEL_H - 6.0);
                format!("{:.1},{:.1}", self.x(k as f64 + 1.0), y)
            })
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"##,
            pts.join(" ")
        );
    }

    fn y_label(&self, out: &mut String, vmax: f64) {
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
            LEFT - 4.0,
            self.top + 10.0,
            fmt_count(vmax)
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">0</text>"##,
            LEFT - 4.0,
            self.top + PANEL_H
        );
    }
}

fn nice_step(raw: f64) -> f64 {
    let candidates = [1.0, 2.0, 5.0, 10.0, 20.0, 25.0, 50.0, 100.0, 200.0, 500.0];
    candidates.into_iter().find(|&c| c >= raw).unwrap_or(1000.0)
}

fn fmt_count(v: f64) -> String {
    if v >= 1000.0 {
        format!("{:.0}", v)
    } else {
        format!("{:.1}", v)
    }
}

fn vmax(a: &[f64], b: &[f64]) -> f64 {
    let m = a.iter().chain(b).copied().fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Lanes per scale: intervals of one length are placed on the first lane
/// where they do not overlap the previous bar.
pub fn lane_layout(rejected: &[Interval]) -> Vec<(Interval, usize)> {
    let mut sorted = rejected.to_vec();
    sorted.sort();
    let mut out = Vec::with_capacity(sorted.len());
    let mut base = 0;
    let mut idx = 0;
    while idx < sorted.len() {
        let len = sorted[idx].length;
        let mut lane_end: Vec<usize> = Vec::new();
        while idx < sorted.len() && sorted[idx].length == len {
            let iv = sorted[idx];
            let lane = match lane_end.iter().position(|&e| e < iv.start) {
                Some(l) => l,
                None => {
                    lane_end.push(0);
                    lane_end.len() - 1
                }
            };
            lane_end[lane] = iv.end();
            out.push((iv, base + lane));
            idx += 1;
        }
        base += lane_end.len() + 1;
    }
    out
}

pub fn render_figure(fig: &FigureData<'_>) -> String {
    let pair = fig.pair;
    let t_len = fig.raw_i.len().max(fig.raw_j.len());
    let lanes = lane_layout(&pair.rejected);
    let n_lanes = lanes.iter().map(|(_, l)| l + 1).max().unwrap_or(0);
    let panel_d_h = (n_lanes as f64 * LANE_H + 12.0).max(60.0);
    let n_std = if fig.overlay.is_some() { 3 } else { 2 };
    let height = TOP + n_std as f64 * (PANEL_H + GAP) + panel_d_h + GAP;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height:.0}" viewBox="0 0 {WIDTH} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        s,
        r#"<title>{} vs {}</title>"#,
        esc(&pair.unit_i),
        esc(&pair.unit_j)
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let legend = |y: f64| {
        format!(
            r##"<text x="{:.1}" y="{y:.1}" font-size="11"><tspan fill="{COLOR_I}">{}</tspan> / <tspan fill="{COLOR_J}">{}</tspan></text>"##,
            WIDTH - RIGHT - 160.0,
            esc(&pair.unit_i),
            esc(&pair.unit_j)
        )
    };

    let mut top = TOP;
    let panel = |s: &mut String, title: &str, a: &[f64], b: &[f64], top: f64| {
        let f = Frame { top, t_len };
        let _ = writeln!(s, r#"<g class="panel">"#);
        f.axes(s, title);
        let m = vmax(a, b);
        f.y_label(s, m);
        f.line(s, a, m, COLOR_I);
        f.line(s, b, m, COLOR_J);
        let _ = writeln!(s, "{}", legend(top - 8.0));
        let _ = writeln!(s, "</g>");
    };
    panel(
        &mut s,
        "(a) observed daily counts",
        fig.raw_i,
        fig.raw_j,
        top,
    );
    top += PANEL_H + GAP;
    panel(
        &mut s,
        "(b) smoothed trends",
        fig.smooth_i,
        fig.smooth_j,
        top,
    );
    top += PANEL_H + GAP;
    if let Some(ov) = fig.overlay {
        panel(
            &mut s,
            &format!("(c) {}", ov.label),
            &ov.series_i,
            &ov.series_j,
            top,
        );
        top += PANEL_H + GAP;
    }

    let f = Frame { top, t_len };
    let _ = writeln!(s, r#"<g class="panel rejections">"#);
    let _ = writeln!(
        s,
        r##"<text x="{LEFT}" y="{:.1}" font-size="13" font-weight="bold">(d) rejected intervals (minimal intervals framed)</text>"##,
        top - 8.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#444" stroke-width="0.8"/>"##,
        top + panel_d_h,
        WIDTH - RIGHT,
        top + panel_d_h
    );
    if lanes.is_empty() {
        let _ = writeln!(
            s,
            r##"<text class="caption" x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">no rejected intervals</text>"##,
            (LEFT + WIDTH - RIGHT) / 2.0,
            top + panel_d_h / 2.0
        );
    }
    for (iv, lane) in &lanes {
        let x0 = f.x(iv.start as f64 - 0.5);
        let x1 = f.x(iv.end() as f64 + 0.5);
        let y = top + 4.0 + *lane as f64 * LANE_H;
        let minimal = pair.minimal.contains(iv);
        let (class, stroke) = if minimal {
            (
                "reject minimal",
                r##" stroke="#000000" stroke-width="1.2""##,
            )
        } else {
            ("reject", "")
        };
        let _ = writeln!(
            s,
            r##"<rect class="{class}" x="{x0:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#b0b0b0"{stroke}><title>{iv}</title></rect>"##,
            x1 - x0,
            LANE_H - 2.0
        );
    }
    let step = nice_step(t_len as f64 / 6.0);
    let mut d = step;
    while d <= t_len as f64 {
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{d}</text>"##,
            f.x(d),
            top + panel_d_h + 13.0
        );
        d += step;
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
