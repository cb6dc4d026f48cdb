use std::path::Path;

use plotters::prelude::*;

use crate::dqn::CurvePoint;
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Px};
use crate::metrics::{coverage_indicator, Thresholds};
use crate::oracle::RadioMaps;

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => crate::io::ensure_dir(dir).map(|_| ()),
        _ => Ok(()),
    }
}

/// Episode return (raw and trailing mean over 5% of the run) versus episode.
pub fn learning_curve_svg(curve: &[CurvePoint], title: &str, path: &Path) -> Result<()> {
    if curve.is_empty() {
        return Err(Error::InvalidConfig("empty learning curve".into()));
    }
    ensure_parent(path)?;
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
            (l.min(p.ret), h.max(p.ret))
        });
    let pad = ((hi - lo) * 0.05).max(1e-3);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..curve.len() as f64, (lo - pad)..(hi + pad))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("Episode")
        .y_desc("Return")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(
            curve.iter().map(|p| (p.episode as f64, p.ret)),
            RGBColor(170, 190, 220),
        ))
        .map_err(plot_err)?
        .label("return")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RGBColor(170, 190, 220)));
    let w = (curve.len() / 20).max(1);
    let smooth: Vec<(f64, f64)> = (0..curve.len())
        .map(|i| {
            let a = i.saturating_sub(w - 1);
            let s = &curve[a..=i];
            (
                curve[i].episode as f64,
                s.iter().map(|p| p.ret).sum::<f64>() / s.len() as f64,
            )
        })
        .collect();
    chart
        .draw_series(LineSeries::new(smooth, BLUE.stroke_width(2)))
        .map_err(plot_err)?
        .label(format!("trailing mean ({w})"))
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE.stroke_width(2)));
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

const STOPS: [(f64, (u8, u8, u8)); 5] = [
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
];

/// Viridis-like ramp for `t` in [0, 1].
pub fn colormap(t: f64) -> RGBColor {
    let t = t.clamp(0.0, 1.0);
    let k = STOPS
        .iter()
        .position(|s| s.0 >= t)
        .unwrap_or(STOPS.len() - 1)
        .max(1);
    let (a, ca) = STOPS[k - 1];
    let (b, cb) = STOPS[k];
    let f = if b > a { (t - a) / (b - a) } else { 0.0 };
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    RGBColor(mix(ca.0, cb.0), mix(ca.1, cb.1), mix(ca.2, cb.2))
}

struct Panel<'a> {
    title: String,
    map: &'a Grid<f64>,
    valid: &'a Mask,
    range: (f64, f64),
    unit: &'static str,
}

fn draw_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    panel: &Panel,
    txs: &[Px],
) -> Result<()> {
    let n = panel.map.size();
    let (map_area, bar_area) = area.split_horizontally(area.dim_in_pixel().0.saturating_sub(90));
    let mut chart = ChartBuilder::on(&map_area)
        .caption(&panel.title, ("sans-serif", 16))
        .margin(6)
        .x_label_area_size(24)
        .y_label_area_size(30)
        .build_cartesian_2d(0..n as i32, n as i32..0)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc("column")
        .y_desc("row")
        .draw()
        .map_err(plot_err)?;
    let (lo, hi) = panel.range;
    chart
        .draw_series(panel.map.indexed().map(|((i, j), &v)| {
            let color = if panel.valid[(i, j)] {
                colormap((v - lo) / (hi - lo))
            } else {
                RGBColor(60, 60, 60)
            };
            Rectangle::new(
                [(j as i32, i as i32), (j as i32 + 1, i as i32 + 1)],
                color.filled(),
            )
        }))
        .map_err(plot_err)?;
    chart
        .draw_series(
            txs.iter()
                .map(|&(i, j)| Cross::new((j as i32, i as i32), 5, RED.stroke_width(2))),
        )
        .map_err(plot_err)?;

    let mut bar = ChartBuilder::on(&bar_area)
        .margin_top(30)
        .margin_bottom(30)
        .margin_right(8)
        .y_label_area_size(55)
        .build_cartesian_2d(0..1, lo..hi)
        .map_err(plot_err)?;
    bar.configure_mesh()
        .disable_mesh()
        .disable_x_axis()
        .y_desc(panel.unit)
        .draw()
        .map_err(plot_err)?;
    let steps = 64;
    bar.draw_series((0..steps).map(|k| {
        let a = lo + (hi - lo) * k as f64 / steps as f64;
        let b = lo + (hi - lo) * (k + 1) as f64 / steps as f64;
        Rectangle::new(
            [(0, a), (1, b)],
            colormap(k as f64 / (steps - 1) as f64).filled(),
        )
    }))
    .map_err(plot_err)?;
    Ok(())
}

fn joint_range(maps: &[&Grid<f64>], valid: &Mask) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in maps {
        for (p, &v) in m.indexed() {
            if valid[p] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() || hi - lo < 1e-9 {
        (lo.min(0.0), lo.min(0.0) + 1.0)
    } else {
        (lo, hi)
    }
}

/// Reference and predicted RSS/exposure maps on a 2×2 grid with shared
/// per-quantity colour ranges and TX markers.
pub fn map_panels_svg(
    reference: &RadioMaps,
    predicted: &RadioMaps,
    txs: &[Px],
    path: &Path,
) -> Result<()> {
    ensure_parent(path)?;
    let valid = &reference.valid_mask;
    let rss_range = joint_range(&[&reference.rss_dbm, &predicted.rss_dbm], valid);
    let exp_range = joint_range(&[&reference.exposure_dbuv, &predicted.exposure_dbuv], valid);
    let panels = [
        Panel {
            title: "Reference RSS".into(),
            map: &reference.rss_dbm,
            valid,
            range: rss_range,
            unit: "RSS (dBm)",
        },
        Panel {
            title: "Predicted RSS".into(),
            map: &predicted.rss_dbm,
            valid,
            range: rss_range,
            unit: "RSS (dBm)",
        },
        Panel {
            title: "Reference exposure".into(),
            map: &reference.exposure_dbuv,
            valid,
            range: exp_range,
            unit: "E (dBuV/m)",
        },
        Panel {
            title: "Predicted exposure".into(),
            map: &predicted.exposure_dbuv,
            valid,
            range: exp_range,
            unit: "E (dBuV/m)",
        },
    ];
    let root = SVGBackend::new(path, (1000, 900)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    for (area, panel) in root.split_evenly((2, 2)).iter().zip(&panels) {
        draw_panel(area, panel, txs)?;
    }
    root.present().map_err(plot_err)
}

/// Coverage (RSS ≥ φ) and exposure-compliance (E ≤ γ) masks side by side.
pub fn coverage_masks_svg(
    maps: &RadioMaps,
    thresholds: &Thresholds,
    txs: &[Px],
    path: &Path,
) -> Result<()> {
    ensure_parent(path)?;
    let valid = &maps.valid_mask;
    let to_f = |m: &Mask| m.map(|&b| if b { 1.0 } else { 0.0 });
    let cov = to_f(&coverage_indicator(&maps.rss_dbm, thresholds.phi_dbm));
    let ok = maps
        .exposure_dbuv
        .map(|&v| if v <= thresholds.gamma_dbuv { 1.0 } else { 0.0 });
    let panels = [
        Panel {
            title: format!("Coverage (RSS >= {} dBm)", thresholds.phi_dbm),
            map: &cov,
            valid,
            range: (0.0, 1.0),
            unit: "covered",
        },
        Panel {
            title: format!("Exposure compliant (E <= {} dBuV/m)", thresholds.gamma_dbuv),
            map: &ok,
            valid,
            range: (0.0, 1.0),
            unit: "compliant",
        },
    ];
    let root = SVGBackend::new(path, (1000, 460)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    for (area, panel) in root.split_evenly((1, 2)).iter().zip(&panels) {
        draw_panel(area, panel, txs)?;
    }
    root.present().map_err(plot_err)
}
