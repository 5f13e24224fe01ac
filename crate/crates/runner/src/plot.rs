//! Deterministic SVG figures rendered from a finished result directory.
//!
//! Figures are regenerated from `summary.json` and the CSVs it names, never
//! from in-memory state, so a plot always matches what is on disk. Every SVG
//! carries the SHA-256 of the manifest it was drawn from.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::experiment::Summary;
use crate::output::{sha256_hex, slug, FileEntry, Outputs};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Mean gap ratio of uncorrelated levels, `2 ln 2 − 1`.
pub const R_POISSON: f64 = 0.3863;
pub const R_GOE: f64 = 0.5307;

#[derive(Clone, Debug, PartialEq)]
pub enum Style {
    Line,
    Markers,
    /// Points with symmetric vertical error bars.
    ErrorBars(Vec<f64>),
    Bars,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub label: String,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
    pub references: Vec<Reference>,
}

impl Figure {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            series: Vec::new(),
            references: Vec::new(),
        }
    }

    fn x_of(&self, x: f64) -> Option<f64> {
        if self.log_x {
            (x > 0.0).then(|| x.log10())
        } else {
            Some(x)
        }
    }

    fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                let (Some(x), true) = (self.x_of(x), y.is_finite()) else { continue };
                xs.push(x);
                let e = match &s.style {
                    Style::ErrorBars(err) => err.get(i).copied().filter(|e| e.is_finite()).unwrap_or(0.0),
                    _ => 0.0,
                };
                ys.push(y - e);
                ys.push(y + e);
                if s.style == Style::Bars {
                    ys.push(0.0);
                }
            }
        }
        ys.extend(self.references.iter().map(|r| r.y));
        let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let (x0, x1) = fold(&xs);
        let (y0, y1) = fold(&ys);
        if !x0.is_finite() || !y0.is_finite() {
            return None;
        }
        let pad = |lo: f64, hi: f64| if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        let dy = 0.05 * (y1 - y0);
        Some((x0, x1, y0 - dy, y1 + dy))
    }

    /// Renders the figure; identical inputs give byte-identical output.
    pub fn to_svg(&self, provenance: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<!-- manifest sha256 {provenance} -->");
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, esc(&self.title));
        let Some((x0, x1, y0, y1)) = self.bounds() else {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
            s.push_str("</svg>\n");
            return s;
        };
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for t in ticks(x0, x1) {
            let label = if self.log_x { format!("1e{t}") } else { fmt_num(t) };
            let _ = writeln!(
                s,
                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"#,
                px(t),
                MARGIN_T + ph,
                MARGIN_T + ph + 5.0,
                MARGIN_T + ph + 18.0,
                label
            );
        }
        for t in ticks(y0, y1) {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="black"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"#,
                MARGIN_L - 5.0,
                py(t),
                MARGIN_L,
                MARGIN_L - 8.0,
                py(t) + 4.0,
                fmt_num(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 10.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            MARGIN_T + ph / 2.0,
            esc(&self.y_label)
        );

        let mut legend = Vec::new();
        for r in &self.references {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{2:.2}" x2="{:.2}" y2="{2:.2}" stroke="#555" stroke-dasharray="6 4"/>"##,
                MARGIN_L,
                MARGIN_L + pw,
                py(r.y)
            );
            legend.push(("#555", format!("{} ({})", r.label, fmt_num(r.y))));
        }
        for (k, ser) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<(usize, f64, f64)> = ser
                .points
                .iter()
                .enumerate()
                .filter_map(|(i, &(x, y))| Some((i, px(self.x_of(x)?), y)))
                .filter(|(_, _, y)| y.is_finite())
                .map(|(i, x, y)| (i, x, py(y)))
                .collect();
            match &ser.style {
                Style::Line => {
                    let path: Vec<String> = pts.iter().map(|(_, x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                Style::Markers => {
                    for (_, x, y) in &pts {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
                    }
                }
                Style::ErrorBars(err) => {
                    for &(i, x, y) in &pts {
                        let e = err.get(i).copied().filter(|e| e.is_finite()).unwrap_or(0.0);
                        let yv = ser.points[i].1;
                        let _ = writeln!(
                            s,
                            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/><circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#,
                            py(yv - e),
                            py(yv + e)
                        );
                    }
                }
                Style::Bars => {
                    let w = if pts.len() > 1 { (pts[1].1 - pts[0].1).abs() * 0.9 } else { 6.0 };
                    let base = py(0.0_f64.clamp(y0, y1));
                    for (_, x, y) in &pts {
                        let _ = writeln!(
                            s,
                            r#"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6"/>"#,
                            x - w / 2.0,
                            y.min(base),
                            (base - y).abs()
                        );
                    }
                }
            }
            legend.push((color, ser.label.clone()));
        }
        for (i, (color, label)) in legend.iter().enumerate() {
            let y = MARGIN_T + 12.0 + 16.0 * i as f64;
            let x = MARGIN_L + pw + 10.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                y - 9.0,
                x + 14.0,
                y,
                esc(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_num(x: f64) -> String {
    let t = format!("{x:.4}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" { "0".into() } else { t.into() }
}

/// Round-number ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|f| f * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Parses a CSV with a header row; non-numeric cells become NaN.
pub fn read_csv(path: &Path) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().context("empty csv")?.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    Ok((header, rows))
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Option<Vec<f64>> {
    let i = header.iter().position(|h| h == name)?;
    Some(rows.iter().map(|r| r.get(i).copied().unwrap_or(f64::NAN)).collect())
}

/// Wigner surmise for orthogonal symmetry.
fn wigner_goe(s: f64) -> f64 {
    let a = std::f64::consts::PI / 2.0;
    a * s * (-a * s * s / 2.0).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotIndex {
    pub manifest_sha256: String,
    pub files: Vec<FileEntry>,
}

/// Files named by the summary that are absent from `dir`.
pub fn missing_inputs(dir: &Path, summary: &Summary) -> Vec<String> {
    let mut named: Vec<&str> = Vec::new();
    for c in &summary.cases {
        named.push(&c.timeseries_file);
        named.extend(c.spectrum_files.iter().map(String::as_str));
    }
    named.extend(summary.baselines.iter().map(|b| b.timeseries_file.as_str()));
    named.extend(summary.level_stats.iter().map(|l| l.histogram_file.as_str()));
    named.into_iter().filter(|f| !dir.join(f).is_file()).map(str::to_string).collect()
}

/// Draws every figure derivable from `dir` into `dir/plots`.
pub fn render_all(dir: &Path) -> anyhow::Result<PlotIndex> {
    let manifest = std::fs::read(dir.join("manifest.json"))
        .with_context(|| format!("{} has no manifest.json; not a finished run", dir.display()))?;
    let provenance = sha256_hex(&manifest);
    let summary: Summary = serde_json::from_slice(
        &std::fs::read(dir.join("summary.json")).with_context(|| format!("{} has no summary.json", dir.display()))?,
    )?;
    let missing = missing_inputs(dir, &summary);
    if !missing.is_empty() {
        bail!("missing inputs in {}:\n  {}", dir.display(), missing.join("\n  "));
    }
    let plots = dir.join("plots");
    let mut out = Outputs::create(&plots)?;

    for case in &summary.cases {
        let (h, rows) = read_csv(&dir.join(&case.timeseries_file))?;
        let n = column(&h, &rows, "n").context("time series without an n column")?;
        let mut fig = Figure::new(
            format!("{} {} eps={}", case.protocol, case.initial_state, case.epsilon),
            "period n",
            "ensemble mean",
        );
        for name in h.iter().filter(|c| *c != "n") {
            let y = column(&h, &rows, name).unwrap_or_default();
            fig.series.push(Series {
                label: name.clone(),
                points: n.iter().copied().zip(y).collect(),
                style: Style::Line,
            });
        }
        let stem = case.timeseries_file.trim_end_matches(".csv");
        out.write(&format!("{stem}.svg"), fig.to_svg(&provenance))?;
        for f in &case.spectrum_files {
            let (h, rows) = read_csv(&dir.join(f))?;
            let (Some(x), Some(p)) = (column(&h, &rows, "f"), column(&h, &rows, "S")) else { continue };
            let mut fig = Figure::new(f.trim_end_matches(".csv"), "f (1/T)", "mean power");
            fig.series.push(Series { label: "power".into(), points: x.into_iter().zip(p).collect(), style: Style::Line });
            out.write(&format!("{}.svg", f.trim_end_matches(".csv")), fig.to_svg(&provenance))?;
        }
    }

    let mut sweeps: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("sweep_") && n.ends_with(".csv"))
        .collect();
    sweeps.sort();
    for f in &sweeps {
        let (h, rows) = read_csv(&dir.join(f))?;
        let cols = h.iter().position(|c| c == "column").context("sweep csv without a column field")?;
        let m_idx = h.iter().position(|c| c == "m").context("sweep csv without m")?;
        let text = std::fs::read_to_string(dir.join(f))?;
        let names: Vec<String> = text.lines().skip(1).map(|l| l.split(',').nth(cols).unwrap_or("").to_string()).collect();
        let mut keys: Vec<(String, usize)> = Vec::new();
        for (name, row) in names.iter().zip(&rows) {
            let k = (name.clone(), row[m_idx] as usize);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let mut fig = Figure::new(f.trim_end_matches(".csv"), "epsilon", "C_m");
        fig.log_x = rows.iter().all(|r| r[0] > 0.0);
        for (name, m) in keys {
            let sel: Vec<&Vec<f64>> =
                names.iter().zip(&rows).filter(|(n, r)| **n == name && r[m_idx] as usize == m).map(|(_, r)| r).collect();
            fig.series.push(Series {
                label: format!("{name} m={m}"),
                points: sel.iter().map(|r| (r[0], r[3])).collect(),
                style: Style::ErrorBars(sel.iter().map(|r| r[4]).collect()),
            });
        }
        out.write(&format!("{}.svg", f.trim_end_matches(".csv")), fig.to_svg(&provenance))?;
    }

    let mut protocols: Vec<&str> = summary.level_stats.iter().map(|l| l.protocol.as_str()).collect();
    protocols.dedup();
    if !summary.level_stats.is_empty() {
        let mut fig = Figure::new("mean gap ratio", "epsilon", "<r>");
        for p in &protocols {
            let sel: Vec<_> = summary.level_stats.iter().filter(|l| l.protocol == *p).collect();
            fig.series.push(Series {
                label: p.to_string(),
                points: sel.iter().map(|l| (l.epsilon, l.mean_r.mean)).collect(),
                style: Style::ErrorBars(sel.iter().map(|l| l.mean_r.stderr).collect()),
            });
        }
        fig.references = vec![
            Reference { label: "Poisson".into(), y: R_POISSON },
            Reference { label: "GOE".into(), y: R_GOE },
        ];
        out.write("levels_r_vs_eps.svg", fig.to_svg(&provenance))?;
    }
    for l in &summary.level_stats {
        let (h, rows) = read_csv(&dir.join(&l.histogram_file))?;
        let (Some(s), Some(p)) = (column(&h, &rows, "s"), column(&h, &rows, "P")) else { continue };
        let mut fig = Figure::new(format!("{} eps={} spacings", l.protocol, l.epsilon), "s", "P(s)");
        let grid: Vec<f64> = (0..=80).map(|k| 4.0 * k as f64 / 80.0).collect();
        fig.series.push(Series { label: "data".into(), points: s.into_iter().zip(p).collect(), style: Style::Bars });
        fig.series.push(Series {
            label: "Poisson".into(),
            points: grid.iter().map(|&s| (s, (-s).exp())).collect(),
            style: Style::Line,
        });
        fig.series.push(Series {
            label: "Wigner GOE".into(),
            points: grid.iter().map(|&s| (s, wigner_goe(s))).collect(),
            style: Style::Line,
        });
        out.write(&format!("{}.svg", l.histogram_file.trim_end_matches(".csv")), fig.to_svg(&provenance))?;
    }

    if !summary.baselines.is_empty() {
        for case in &summary.cases {
            let related: Vec<_> = summary
                .baselines
                .iter()
                .filter(|b| b.protocol == case.protocol && b.initial_state == case.initial_state && b.epsilon == case.epsilon)
                .collect();
            if related.is_empty() {
                continue;
            }
            let mut fig = Figure::new(
                format!("{} {} eps={} vs baselines", case.protocol, case.initial_state, case.epsilon),
                "period n",
                "Mz",
            );
            let (h, rows) = read_csv(&dir.join(&case.timeseries_file))?;
            if let (Some(n), Some(y)) = (column(&h, &rows, "n"), column(&h, &rows, "Mz")) {
                fig.series.push(Series { label: "qudit".into(), points: n.into_iter().zip(y).collect(), style: Style::Line });
            }
            for b in related {
                let (h, rows) = read_csv(&dir.join(&b.timeseries_file))?;
                if let (Some(n), Some(y)) = (column(&h, &rows, "n"), column(&h, &rows, "Mz")) {
                    fig.series.push(Series { label: b.label.clone(), points: n.into_iter().zip(y).collect(), style: Style::Line });
                }
            }
            let name = slug(&format!("baselines_{}.svg", case.timeseries_file.trim_end_matches(".csv")));
            out.write(&name, fig.to_svg(&provenance))?;
        }
    }

    if out.files().is_empty() {
        bail!("nothing to plot in {}", dir.display());
    }
    let index = PlotIndex { manifest_sha256: provenance, files: out.files().to_vec() };
    out.write_json("index.json", &index)?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(-3.0, -1.0).len(), 5);
    }

    #[test]
    fn svg_is_deterministic_and_tagged() {
        let mut f = Figure::new("t", "x", "y");
        f.series.push(Series { label: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 2.0)], style: Style::Line });
        f.references.push(Reference { label: "GOE".into(), y: R_GOE });
        let a = f.to_svg("abc");
        assert_eq!(a, f.to_svg("abc"));
        assert!(a.contains("manifest sha256 abc"));
        assert!(a.contains("a&lt;b"));
        assert!(a.contains("0.5307"));
    }

    #[test]
    fn empty_figure_renders() {
        let f = Figure::new("t", "x", "y");
        assert!(f.to_svg("").contains("no data"));
    }

    #[test]
    fn log_axis_drops_nonpositive() {
        let mut f = Figure::new("t", "x", "y");
        f.log_x = true;
        f.series.push(Series { label: "s".into(), points: vec![(0.0, 1.0), (0.01, 1.0), (0.1, 2.0)], style: Style::Markers });
        assert_eq!(f.to_svg("").matches("<circle").count(), 2);
    }

    #[test]
    fn wigner_is_normalized() {
        let n = 40_000;
        let h = 10.0 / n as f64;
        let total: f64 = (0..n).map(|k| wigner_goe((k as f64 + 0.5) * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
