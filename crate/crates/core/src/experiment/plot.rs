//! Log-log SVG plots rendered from the CSV series listed in `plots.json`.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit_slope;
use crate::error::{Error, Result};

/// One plot: columns of a CSV file, optionally split into series by a
/// grouping column, drawn on log-log axes with fitted slopes in the legend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub title: String,
    pub csv: String,
    pub x: String,
    pub y: String,
    pub group: Option<String>,
    pub x_label: String,
    pub y_label: String,
    pub svg: String,
    /// Reference slope drawn as a dashed guide through the first series.
    pub reference_slope: Option<f64>,
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("plot rendering failed: {e}"))
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn read_series(dir: &Path, spec: &PlotSpec) -> Result<Series> {
    let mut rdr = csv::Reader::from_path(dir.join(&spec.csv))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("{} has no column '{name}'", spec.csv)))
    };
    let xi = col(&spec.x)?;
    let yi = col(&spec.y)?;
    let gi = spec.group.as_deref().map(col).transpose()?;
    let mut out: Series = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::InvalidInput(format!("{}: {e}", spec.csv)));
        let (x, y) = (parse(xi)?, parse(yi)?);
        if x > 0.0 && y > 0.0 {
            let key = gi.map(|g| rec[g].to_string()).unwrap_or_default();
            out.entry(key).or_default().push((x, y));
        }
    }
    Ok(out)
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

pub fn render(dir: &Path, spec: &PlotSpec) -> Result<()> {
    let series = read_series(dir, spec)?;
    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::InvalidInput(format!("{} has no positive data to plot", spec.csv)));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |lo: f64, hi: f64| if hi > lo * 1.0001 { (lo / 1.2, hi * 1.2) } else { (lo / 2.0, hi * 2.0) };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let path = dir.join(&spec.svg);
    let root = SVGBackend::new(&path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&spec.title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(44)
        .y_label_area_size(70)
        .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(spec.x_label.as_str())
        .y_desc(spec.y_label.as_str())
        .x_label_formatter(&|v| format!("{v:.3}"))
        .y_label_formatter(&|v| format!("{v:.2e}"))
        .draw()
        .map_err(plot_err)?;
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let label = match fit_slope(&xs, &ys) {
            Ok(f) => format!("{name} slope {:.3}", f.slope),
            Err(_) => name.clone(),
        };
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.trim())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    if let (Some(s), Some(pts)) = (spec.reference_slope, series.values().next()) {
        let (xa, ya) = pts[0];
        let guide: Vec<(f64, f64)> = [x0, x1].iter().map(|&x| (x, ya * (x / xa).powf(s))).collect();
        chart
            .draw_series(DashedLineSeries::new(guide, 6, 4, BLACK.stroke_width(1)))
            .map_err(plot_err)?
            .label(format!("reference slope {s}"))
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Re-renders every plot listed in `dir/plots.json`.
pub fn render_manifest(dir: &Path) -> Result<Vec<String>> {
    let specs: Vec<PlotSpec> = serde_json::from_str(&std::fs::read_to_string(dir.join("plots.json"))?)?;
    let mut written = Vec::new();
    for spec in &specs {
        render(dir, spec)?;
        written.push(spec.svg.clone());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_grouped_series() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from("delta,j,value\n");
        for j in 0..2 {
            for k in 1..5 {
                let d = 0.05 * k as f64;
                csv += &format!("{d},{j},{}\n", (j + 1) as f64 * d.powf(-1.5));
            }
        }
        std::fs::write(dir.path().join("s.csv"), csv).unwrap();
        let spec = PlotSpec {
            title: "test".into(),
            csv: "s.csv".into(),
            x: "delta".into(),
            y: "value".into(),
            group: Some("j".into()),
            x_label: "δ".into(),
            y_label: "norm".into(),
            svg: "s.svg".into(),
            reference_slope: Some(-1.5),
        };
        std::fs::write(dir.path().join("plots.json"), serde_json::to_string(&vec![spec]).unwrap()).unwrap();
        render_manifest(dir.path()).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
        assert!(svg.contains("<svg"));
        assert!(svg.contains("slope -1.500"));
    }
}
