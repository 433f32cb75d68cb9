//! Minimal SVG line charts, rendered purely from a run directory's CSVs so
//! they can be regenerated offline at any time.

use crate::csvfmt::{read_csv, Csv};
use segilm::CoreError;
use std::fmt::Write as _;
use std::path::Path;

pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub stroke: &'static str,
    pub width: f64,
}

pub struct Panel {
    pub title: String,
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 220.0;
const ML: f64 = 48.0; // margins
const MR: f64 = 12.0;
const MT: f64 = 24.0;
const MB: f64 = 30.0;

/// Stack panels vertically into one SVG document. Every panel shares the
/// x-range implied by its own series.
pub fn render(panels: &[Panel]) -> String {
    let total_h = H * panels.len() as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{total_h}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    for (pi, p) in panels.iter().enumerate() {
        let oy = pi as f64 * H;
        let (x_min, x_max) = x_range(p);
        let (y_min, y_max) = p.y_range;
        let sx = |x: f64| ML + (x - x_min) / (x_max - x_min).max(1e-12) * (W - ML - MR);
        let sy = |y: f64| oy + H - MB - (y - y_min) / (y_max - y_min).max(1e-12) * (H - MT - MB);
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\">{}</text>",
            ML,
            oy + 15.0,
            p.title
        );
        let _ = writeln!(
            s,
            "<rect x=\"{ML}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
            oy + MT,
            W - ML - MR,
            H - MT - MB
        );
        for k in 0..=4 {
            let xv = x_min + (x_max - x_min) * k as f64 / 4.0;
            let yv = y_min + (y_max - y_min) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                sx(xv),
                oy + H - MB + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
                ML - 4.0,
                sy(yv) + 4.0,
                tick(yv)
            );
        }
        for line in &p.series {
            if line.points.is_empty() {
                continue;
            }
            let pts: Vec<String> = line
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.clamp(y_min, y_max))))
                .collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" points=\"{}\"/>",
                line.stroke,
                line.width,
                pts.join(" ")
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn x_range(p: &Panel) -> (f64, f64) {
    let xs = p.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let min = xs.clone().fold(f64::INFINITY, f64::min);
    let max = xs.fold(f64::NEG_INFINITY, f64::max);
    if min.is_finite() {
        (min, max)
    } else {
        (0.0, 1.0)
    }
}

fn tick(v: f64) -> String {
    if v == v.round() && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

fn column_points(csv: &Csv, x_col: &str, y_col: &str) -> Vec<(f64, f64)> {
    match (csv.column(x_col), csv.column(y_col)) {
        (Some(xs), Some(ys)) => xs.into_iter().zip(ys).collect(),
        _ => Vec::new(),
    }
}

/// Write metrics.svg (x, c, s: thin per-instantiation lines, thick mean) and,
/// when the run logged losses, losses.svg into `<run_dir>/charts/`.
pub fn write_charts(run_dir: &Path) -> Result<(), CoreError> {
    let charts = run_dir.join("charts");
    std::fs::create_dir_all(&charts)?;

    let mut inst_dirs: Vec<_> = std::fs::read_dir(run_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("inst-"))
        })
        .collect();
    inst_dirs.sort();
    let mut inst_csvs = Vec::new();
    for dir in inst_dirs {
        let p = dir.join("generations.csv");
        if p.exists() {
            inst_csvs.push(read_csv(&p)?);
        }
    }
    let aggregate = read_csv(&run_dir.join("aggregate.csv"))?;

    let panel = |title: &str, col: &str, mean_col: &str, y_range: (f64, f64)| {
        let mut series: Vec<Series> = inst_csvs
            .iter()
            .map(|csv| Series {
                points: column_points(csv, "generation", col),
                stroke: "#aaaaaa",
                width: 0.8,
            })
            .collect();
        series.push(Series {
            points: column_points(&aggregate, "generation", mean_col),
            stroke: "#000000",
            width: 2.2,
        });
        Panel {
            title: title.to_owned(),
            y_range,
            series,
        }
    };
    let svg = render(&[
        panel("expressivity x", "x", "x_mean", (0.0, 1.0)),
        panel("compositionality c", "c", "c_mean", (-0.1, 1.0)),
        panel("stability s", "s", "s_mean", (0.0, 1.0)),
    ]);
    std::fs::write(charts.join("metrics.svg"), svg)?;

    let losses_path = run_dir.join("norm_losses.csv");
    if losses_path.exists() {
        let csv = read_csv(&losses_path)?;
        let epoch_axis: Vec<f64> = match (csv.column("generation"), csv.column("epoch")) {
            (Some(g), Some(e)) => {
                let epochs_per_gen = e.iter().cloned().fold(0.0f64, f64::max);
                g.iter()
                    .zip(&e)
                    .map(|(g, e)| (g - 1.0) * epochs_per_gen + e)
                    .collect()
            }
            _ => Vec::new(),
        };
        let loss_panel = |title: &str, col: &str| {
            let ys = csv.column(col).unwrap_or_default();
            let top = ys.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
            Panel {
                title: format!("normalized {title} loss"),
                y_range: (0.0, top),
                series: vec![Series {
                    points: epoch_axis.iter().cloned().zip(ys).collect(),
                    stroke: "#000000",
                    width: 1.2,
                }],
            }
        };
        let svg = render(&[
            loss_panel("encoder", "enc"),
            loss_panel("decoder", "dec"),
            loss_panel("inner autoencoder", "inner"),
            loss_panel("outer autoencoder", "outer"),
        ]);
        std::fs::write(charts.join("losses.svg"), svg)?;
    }
    Ok(())
}
