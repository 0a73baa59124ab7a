//! Minimal static SVG charts: stacked line panels and bar panels.
//!
//! Output depends only on the data, so identical runs give identical files.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 230.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 34.0;
const BOTTOM: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinePanel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal reference line (value, label).
    pub reference: Option<(f64, String)>,
    pub log_y: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BarPanel {
    pub title: String,
    pub y_label: String,
    pub bars: Vec<(String, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if !v.is_finite() {
        return "n/a".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

struct Frame {
    y0: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    log_y: bool,
}

impl Frame {
    fn plot_w() -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn plot_h() -> f64 {
        PANEL_H - TOP - BOTTOM
    }

    fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        LEFT + (v - lo) / (hi - lo) * Self::plot_w()
    }

    fn ty(&self, v: f64) -> f64 {
        if self.log_y {
            v.max(1e-12).log10()
        } else {
            v
        }
    }

    fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.y0 + TOP + (1.0 - (self.ty(v) - lo) / (hi - lo)) * Self::plot_h()
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, r) = (LEFT, LEFT + Self::plot_w());
        let (t, b) = (self.y0 + TOP, self.y0 + TOP + Self::plot_h());
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"##,
            (l + r) / 2.0,
            self.y0 + 20.0,
            esc(title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        for v in ticks(self.y_range.0, self.y_range.1) {
            let (label, py) = if self.log_y {
                (fmt_tick(10f64.powf(v)), self.y(10f64.powf(v)))
            } else {
                (fmt_tick(v), self.y(v))
            };
            let _ = writeln!(
                out,
                r##"<line x1="{l:.1}" y1="{py:.1}" x2="{r:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{label}</text>"##,
                l - 4.0,
                py + 3.5
            );
        }
        if self.x_range.1 > self.x_range.0 {
            for v in ticks(self.x_range.0, self.x_range.1) {
                let px = self.x(v);
                let _ = writeln!(
                    out,
                    r##"<line x1="{px:.1}" y1="{b:.1}" x2="{px:.1}" y2="{:.1}" stroke="#444"/><text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
                    b + 4.0,
                    b + 15.0,
                    fmt_tick(v)
                );
            }
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
            (l + r) / 2.0,
            b + 31.0,
            esc(x_label)
        );
        let _ = writeln!(
            out,
            r##"<text x="14" y="{0:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {0:.1})">{1}</text>"##,
            (t + b) / 2.0,
            esc(y_label)
        );
    }

    fn legend(&self, out: &mut String, idx: usize, name: &str, color: &str, dashed: bool) {
        let x = LEFT + Self::plot_w() + 12.0;
        let y = self.y0 + TOP + 10.0 + idx as f64 * 16.0;
        let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"##,
            x + 18.0,
            x + 22.0,
            y + 4.0,
            esc(name)
        );
    }
}

fn document(panels: usize, body: &str) -> String {
    let h = PANEL_H * panels.max(1) as f64;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{h:.0}\" \
         viewBox=\"0 0 {WIDTH:.0} {h:.0}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn line_panel(out: &mut String, p: &LinePanel, y0: f64) {
    let finite = |v: f64| v.is_finite() && (!p.log_y || v > 0.0);
    let pts = p.series.iter().flat_map(|s| s.points.iter());
    let (mut xl, mut xh, mut yl, mut yh) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts.filter(|(x, y)| x.is_finite() && finite(*y)) {
        let y = if p.log_y { y.log10() } else { y };
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    if let Some((r, _)) = p.reference.as_ref().filter(|(r, _)| finite(*r)) {
        let r = if p.log_y { r.log10() } else { *r };
        yl = yl.min(r);
        yh = yh.max(r);
    }
    let x_range = if xl <= xh { (xl, xh.max(xl + 1e-9)) } else { (0.0, 1.0) };
    let frame = Frame {
        y0,
        x_range,
        y_range: if yl <= yh { padded(yl, yh) } else { (0.0, 1.0) },
        log_y: p.log_y,
    };
    frame.axes(out, &p.title, &p.x_label, &p.y_label);
    if let Some((r, label)) = &p.reference {
        if finite(*r) {
            let py = frame.y(*r);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#888" stroke-dasharray="2,2"/><text x="{:.1}" y="{:.1}" font-size="10" fill="#666">{}</text>"##,
                LEFT + Frame::plot_w(),
                LEFT + 4.0,
                py - 3.0,
                esc(label)
            );
        }
    }
    for (i, s) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && finite(*y))
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
            coords.join(" ")
        );
        if coords.len() <= 12 {
            for c in &coords {
                let (cx, cy) = c.split_once(',').expect("formatted as x,y");
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
            }
        }
        frame.legend(out, i, &s.name, color, s.dashed);
    }
}

fn bar_panel(out: &mut String, p: &BarPanel, y0: f64) {
    let hi = p
        .bars
        .iter()
        .map(|b| b.1)
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let frame = Frame {
        y0,
        x_range: (0.0, 0.0),
        y_range: (0.0, if hi > 0.0 { hi * 1.1 } else { 1.0 }),
        log_y: false,
    };
    frame.axes(out, &p.title, "", &p.y_label);
    let n = p.bars.len().max(1) as f64;
    let slot = Frame::plot_w() / n;
    let base = frame.y(0.0);
    for (i, (label, v)) in p.bars.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let top = if v.is_finite() { frame.y(v.max(0.0)) } else { base };
        let _ = writeln!(
            out,
            r##"<rect x="{x:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
            slot * 0.7,
            base - top,
            x + slot * 0.35,
            top - 3.0,
            fmt_tick(*v),
            x + slot * 0.35,
            base + 15.0,
            esc(label)
        );
    }
}

/// Line panels stacked vertically in one document.
pub fn line_panels(panels: &[LinePanel]) -> String {
    let mut body = String::new();
    for (i, p) in panels.iter().enumerate() {
        line_panel(&mut body, p, i as f64 * PANEL_H);
    }
    document(panels.len(), &body)
}

pub fn bar_panels(panels: &[BarPanel]) -> String {
    let mut body = String::new();
    for (i, p) in panels.iter().enumerate() {
        bar_panel(&mut body, p, i as f64 * PANEL_H);
    }
    document(panels.len(), &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 100.0), vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
        assert_eq!(ticks(0.7, 0.95).len(), 6);
        assert_eq!(fmt_tick(0.25), "0.25");
        assert_eq!(fmt_tick(1e-9), "1e-9");
    }

    #[test]
    fn line_chart_is_well_formed() {
        let svg = line_panels(&[LinePanel {
            title: "usage <web>".into(),
            x_label: "k".into(),
            y_label: "%".into(),
            series: vec![
                Series::new("usage", vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)]),
                Series::new("alloc", vec![(0.0, 3.0)]).dashed(),
            ],
            reference: Some((0.5, "SLO".into())),
            log_y: false,
        }]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("usage &lt;web&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn degenerate_inputs_render() {
        let svg = line_panels(&[LinePanel::default()]);
        assert!(svg.starts_with("<svg"));
        let svg = bar_panels(&[BarPanel {
            title: "AmRT".into(),
            y_label: "s".into(),
            bars: vec![("a".into(), 0.0), ("b".into(), f64::INFINITY)],
        }]);
        assert_eq!(svg.matches("<rect").count(), 1 + 1 + 2);
        assert!(!svg.contains("inf"));
    }
}
