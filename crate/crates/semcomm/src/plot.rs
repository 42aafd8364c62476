//! Figure and plot-data emission for sweep results.
//!
//! The figure is an SVG line chart of mean PSNR against the grid value with
//! one series per model. The same numbers go to `plot_data.csv` so the
//! figure can be redrawn with any tool, and the per-point gaps go to
//! `gap_table.csv`.
//!
//! Linear axes are padded by 5 % of the data span on each side (at least
//! 0.5 dB vertically) and the logarithmic sample-count axis by a factor of
//! 1.25, so no marker sits on the frame.

use std::path::{Path, PathBuf};

use anyhow::Context;
use plotters::prelude::*;
use serde::Serialize;

use crate::experiments::{SweepKind, SweepResult};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub figure: PathBuf,
    pub data: PathBuf,
    pub gaps: PathBuf,
}

#[derive(Serialize)]
struct DataRow<'a> {
    series: &'a str,
    x: f64,
    mean_psnr_db: f64,
}

#[derive(Serialize)]
struct GapRow {
    x: f64,
    ssl_psnr_db: f64,
    sl_psnr_db: f64,
    gap_percent: f64,
}

fn padded(lo: f64, hi: f64, min_pad: f64) -> (f64, f64) {
    let pad = (0.05 * (hi - lo)).max(min_pad);
    (lo - pad, hi + pad)
}

fn x_label(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Nasar => "NASAR",
        SweepKind::Samples => "training samples",
    }
}

/// Write the figure, the plot data and the gap table into `dir`.
pub fn emit_plot_data(result: &SweepResult, dir: &Path) -> anyhow::Result<PlotFiles> {
    anyhow::ensure!(!result.points.is_empty(), "sweep result has no points to plot");
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files = PlotFiles {
        figure: dir.join(format!("{}_sweep.svg", result.spec.kind.as_str())),
        data: dir.join("plot_data.csv"),
        gaps: dir.join("gap_table.csv"),
    };

    let mut data = csv::Writer::from_writer(Vec::new());
    for (series, pick) in [("SSL", 0), ("SL", 1)] {
        for p in &result.points {
            let r = if pick == 0 { &p.ssl } else { &p.sl };
            data.serialize(DataRow { series, x: p.value, mean_psnr_db: r.mean_psnr })?;
        }
    }
    write_atomic(&files.data, &data.into_inner()?)?;

    let mut gaps = csv::Writer::from_writer(Vec::new());
    for p in &result.points {
        gaps.serialize(GapRow { x: p.value, ssl_psnr_db: p.ssl.mean_psnr, sl_psnr_db: p.sl.mean_psnr, gap_percent: p.gap_percent })?;
    }
    write_atomic(&files.gaps, &gaps.into_inner()?)?;

    let svg = render_svg(result)?;
    write_atomic(&files.figure, svg.as_bytes())?;
    Ok(files)
}

fn render_svg(result: &SweepResult) -> anyhow::Result<String> {
    let xs: Vec<f64> = result.points.iter().map(|p| p.value).collect();
    let ys: Vec<f64> = result.points.iter().flat_map(|p| [p.ssl.mean_psnr, p.sl.mean_psnr]).collect();
    let (x_min, x_max) = (xs[0], xs[xs.len() - 1]);
    let (y_lo, y_hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let (y0, y1) = padded(y_lo, y_hi, 0.5);
    let ssl: Vec<(f64, f64)> = result.points.iter().map(|p| (p.value, p.ssl.mean_psnr)).collect();
    let sl: Vec<(f64, f64)> = result.points.iter().map(|p| (p.value, p.sl.mean_psnr)).collect();
    let caption = format!("Mean PSNR vs {}", x_label(result.spec.kind));

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 500)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut builder = ChartBuilder::on(&root);
        builder.caption(caption, ("sans-serif", 22)).margin(16).x_label_area_size(44).y_label_area_size(60);
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart
                    .configure_mesh()
                    .x_desc(x_label(result.spec.kind))
                    .y_desc("mean PSNR (dB)")
                    .draw()?;
                chart
                    .draw_series(LineSeries::new(ssl.clone(), BLUE.stroke_width(2)))?
                    .label("SSL")
                    .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE.stroke_width(2)));
                chart.draw_series(ssl.iter().map(|&(x, y)| Circle::new((x, y), 4, BLUE.filled())))?;
                chart
                    .draw_series(LineSeries::new(sl.clone(), RED.stroke_width(2)))?
                    .label("SL")
                    .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], RED.stroke_width(2)));
                chart.draw_series(sl.iter().map(|&(x, y)| TriangleMarker::new((x, y), 5, RED.filled())))?;
                chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
            }};
        }
        match result.spec.kind {
            SweepKind::Samples => {
                let (lo, hi) = (x_min / 1.25, x_max * 1.25);
                draw!(builder.build_cartesian_2d((lo..hi).log_scale(), y0..y1)?);
            }
            SweepKind::Nasar => {
                let (lo, hi) = padded(x_min, x_max, 0.01);
                draw!(builder.build_cartesian_2d(lo..hi, y0..y1)?);
            }
        }
        root.present()?;
    }
    Ok(svg)
}
