use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Controller being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sorb,
    GreedyOnly,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sorb, Method::GreedyOnly, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sorb => "sorb",
            Method::GreedyOnly => "greedy_only",
            Method::Random => "random",
        }
    }

    fn color(self) -> &'static str {
        match self {
            Method::Sorb => "#1f77b4",
            Method::GreedyOnly => "#d62728",
            Method::Random => "#7f7f7f",
        }
    }
}

/// Success statistics of one method, seed and goal distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: Method,
    pub seed: u64,
    /// Exact oracle distance of every evaluated pair.
    pub distance: u32,
    pub success_rate: f64,
    /// Mean steps over successful rollouts; empty when none succeeded.
    pub mean_steps: Option<f64>,
}

/// Serializes `rows` with a header derived from the field names.
pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean success per `(method, distance)` across seeds.
pub fn mean_success(records: &[EvalRecord]) -> BTreeMap<(Method, u32), f64> {
    let mut acc: BTreeMap<(Method, u32), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry((r.method, r.distance)).or_default();
        e.0 += r.success_rate;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Success-versus-distance chart: one transparent polyline per
/// `(method, seed)` and a solid polyline for each method's mean.
pub fn success_svg(records: &[EvalRecord], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let max_d = records.iter().map(|r| r.distance).max().unwrap_or(1).max(1) as f64;
    let px = |d: f64| PAD + d / max_d * (W - 2.0 * PAD);
    let py = |s: f64| H - PAD - s * (H - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let (x0, y0, x1, y1) = (px(0.0), py(0.0), px(max_d), py(1.0));
    let _ = writeln!(svg, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let s = k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{s:.2}</text>"#, x0 - 6.0, py(s) + 4.0);
    }
    let mut distances: Vec<u32> = records.iter().map(|r| r.distance).collect();
    distances.sort_unstable();
    distances.dedup();
    for d in &distances {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{d}</text>"#, px(*d as f64), y0 + 16.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">goal distance (steps)</text>"#, W / 2.0, H - 10.0);
    let _ = writeln!(svg, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle" font-size="12">success rate</text>"#, H / 2.0, H / 2.0);

    let mut lines: BTreeMap<(Method, u64), Vec<(u32, f64)>> = BTreeMap::new();
    for r in records {
        lines.entry((r.method, r.seed)).or_default().push((r.distance, r.success_rate));
    }
    for ((method, _), mut pts) in lines {
        pts.sort_by_key(|p| p.0);
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{}" stroke-opacity="0.3" stroke-width="1.5"/>"#, points(&pts, px, py), method.color());
    }
    let means = mean_success(records);
    for (i, method) in Method::ALL.iter().enumerate() {
        let pts: Vec<(u32, f64)> = means.iter().filter(|((m, _), _)| m == method).map(|((_, d), s)| (*d, *s)).collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2.5"/>"#, points(&pts, px, py), method.color());
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2.5"/>"#, W - 170.0, W - 150.0, method.color());
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, W - 144.0, ly + 4.0, method.name());
    }
    svg.push_str("</svg>\n");
    svg
}

fn points(pts: &[(u32, f64)], px: impl Fn(f64) -> f64, py: impl Fn(f64) -> f64) -> String {
    pts.iter().map(|(d, s)| format!("{:.1},{:.1}", px(*d as f64), py(*s))).collect::<Vec<_>>().join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
