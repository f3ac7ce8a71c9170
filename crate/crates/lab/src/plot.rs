//! SVG figures of the summary bands and log-error curves.

use masgrad::diagnostics::{Band, LogErrorSeries};
use plotters::prelude::*;

use crate::output::OutputDir;

const PALETTE: [RGBColor; 7] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(127, 127, 127),
];

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-12);
    (lo - pad, hi + pad)
}

/// One figure per band family: mean line and 95% band for each method.
fn band_figure(path: &std::path::Path, title: &str, curves: &[(&str, Vec<Band>)]) -> anyhow::Result<()> {
    let steps = curves.iter().map(|(_, b)| b.len()).max().unwrap_or(1).max(2);
    let (lo, hi) = range(curves.iter().flat_map(|(_, b)| b.iter().flat_map(|x| [x.lo, x.hi, x.mean])));
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..(steps - 1) as f64, lo..hi)?;
    chart.configure_mesh().x_desc("step").draw()?;
    for (k, (name, bands)) in curves.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        for edge in [|b: &Band| b.lo, |b: &Band| b.hi] {
            chart.draw_series(LineSeries::new(
                bands.iter().enumerate().map(|(t, b)| (t as f64, edge(b))),
                colour.mix(0.35).stroke_width(1),
            ))?;
        }
        chart
            .draw_series(LineSeries::new(
                bands.iter().enumerate().map(|(t, b)| (t as f64, b.mean)),
                colour.stroke_width(2),
            ))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], colour.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

/// `summary_coord<j>.svg` for each coordinate.
pub fn summary_plots(out: &mut OutputDir, summaries: &[(String, Vec<Vec<Band>>)]) -> anyhow::Result<()> {
    let dim = summaries.first().and_then(|(_, s)| s.first()).map_or(0, |r| r.len());
    for j in 0..dim {
        let curves: Vec<(&str, Vec<Band>)> = summaries
            .iter()
            .map(|(m, s)| (m.as_str(), s.iter().map(|row| row[j]).collect()))
            .collect();
        let path = out.path(&format!("summary_coord{j}.svg"));
        band_figure(&path, &format!("coordinate {j}"), &curves)?;
    }
    Ok(())
}

pub fn logerr_plot(out: &mut OutputDir, series: &[(String, LogErrorSeries)]) -> anyhow::Result<()> {
    if series.is_empty() {
        return Ok(());
    }
    let curves: Vec<(&str, Vec<Band>)> = series.iter().map(|(m, s)| (m.as_str(), s.bands.clone())).collect();
    let path = out.path("logerr.svg");
    band_figure(&path, "log |theta_t - theta*|", &curves)
}
