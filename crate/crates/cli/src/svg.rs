//! Minimal SVG 1.1 charts: axes with linear or log scales, lines, points,
//! error bars and a legend.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Axis {
    pub label: String,
    pub log: bool,
}

impl Axis {
    pub fn linear(label: &str) -> Self {
        Self {
            label: label.into(),
            log: false,
        }
    }

    pub fn log(label: &str) -> Self {
        Self {
            label: label.into(),
            log: true,
        }
    }

    fn map(&self, v: f64) -> f64 {
        if self.log {
            v.log10()
        } else {
            v
        }
    }
}

#[derive(Debug, Clone)]
pub enum Mark {
    Line {
        points: Vec<(f64, f64)>,
        color: &'static str,
        dashed: bool,
        label: Option<String>,
    },
    Points {
        points: Vec<(f64, f64)>,
        color: &'static str,
        label: Option<String>,
    },
    /// `(x, y, half-width)`.
    ErrorBars {
        points: Vec<(f64, f64, f64)>,
        color: &'static str,
        label: Option<String>,
    },
}

impl Mark {
    fn extent(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Line { points, .. } | Self::Points { points, .. } => points.clone(),
            Self::ErrorBars { points, .. } => points
                .iter()
                .flat_map(|&(x, y, e)| [(x, y - e), (x, y + e)])
                .collect(),
        }
    }

    fn label(&self) -> Option<(&str, &'static str, bool, bool)> {
        match self {
            Self::Line {
                label,
                color,
                dashed,
                ..
            } => label.as_deref().map(|l| (l, *color, true, *dashed)),
            Self::Points { label, color, .. } | Self::ErrorBars { label, color, .. } => {
                label.as_deref().map(|l| (l, *color, false, false))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    pub marks: Vec<Mark>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.ceil() as i32, hi.floor() as i32);
        if b >= a {
            return (a..=b).map(f64::from).collect();
        }
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i32)
    } else if v.abs() < 1e-12 {
        "0".into()
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Chart {
    pub fn render(&self) -> String {
        let map_pts = |pts: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
            pts.into_iter()
                .map(|(x, y)| (self.x.map(x), self.y.map(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        };
        let all: Vec<(f64, f64)> = self
            .marks
            .iter()
            .flat_map(|m| map_pts(m.extent()))
            .collect();
        let (x0, x1) = range(all.iter().map(|p| p.0));
        let (y0, y1) = range(all.iter().map(|p| p.1));
        let f = Frame { x0, x1, y0, y1 };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            escape(&self.title)
        );
        let (bx0, bx1, by0, by1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            s,
            r#"<rect x="{bx0}" y="{by0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            bx1 - bx0,
            by1 - by0
        );
        for t in ticks(x0, x1, self.x.log) {
            let px = f.px(t);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{by1}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
                by1 + 5.0,
                by1 + 18.0,
                tick_label(t, self.x.log)
            );
        }
        for t in ticks(y0, y1, self.y.log) {
            let py = f.py(t);
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{py:.2}" x2="{bx0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                bx0 - 5.0,
                bx0 - 8.0,
                py + 4.0,
                tick_label(t, self.y.log)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (bx0 + bx1) / 2.0,
            HEIGHT - 15.0,
            escape(&self.x.label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
            (by0 + by1) / 2.0,
            escape(&self.y.label)
        );

        for mark in &self.marks {
            match mark {
                Mark::Line {
                    points,
                    color,
                    dashed,
                    ..
                } => {
                    let path: Vec<String> = map_pts(points.clone())
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                        .collect();
                    let dash = if *dashed {
                        r#" stroke-dasharray="6,4""#
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                        path.join(" ")
                    );
                }
                Mark::Points { points, color, .. } => {
                    for (x, y) in map_pts(points.clone()) {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="{color}"/>"#,
                            f.px(x),
                            f.py(y)
                        );
                    }
                }
                Mark::ErrorBars { points, color, .. } => {
                    for &(x, y, e) in points {
                        let (mx, my) = (self.x.map(x), self.y.map(y));
                        if !(mx.is_finite() && my.is_finite()) {
                            continue;
                        }
                        let lo = self.y.map(y - e);
                        let lo = if lo.is_finite() { lo } else { f.y0 };
                        let hi = self.y.map(y + e);
                        let px = f.px(mx);
                        let _ = writeln!(
                            s,
                            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"/><rect x="{:.2}" y="{:.2}" width="6" height="6" fill="{color}"/>"#,
                            f.py(lo),
                            f.py(hi),
                            px - 3.0,
                            f.py(my) - 3.0
                        );
                    }
                }
            }
        }

        let mut ly = TOP + 10.0;
        let lx = WIDTH - RIGHT + 12.0;
        for (label, color, line, dashed) in self.marks.iter().filter_map(Mark::label) {
            if line {
                let dash = if dashed {
                    r#" stroke-dasharray="6,4""#
                } else {
                    ""
                };
                let _ = writeln!(
                    s,
                    r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    lx + 20.0
                );
            } else {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{}" cy="{ly}" r="3" fill="none" stroke="{color}"/>"#,
                    lx + 10.0
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{}</text>"#,
                lx + 26.0,
                ly + 4.0,
                escape(label)
            );
            ly += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}
