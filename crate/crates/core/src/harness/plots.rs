//! Static SVG figures drawn straight from the sweep tables.
//!
//! Points are the table values themselves; log-scaled figures drop
//! nonpositive values. Output depends only on the input rows.

use super::studies::GapRow;
use super::sweep::SummaryRow;
use crate::error::{Error, Result};
use plotters::prelude::*;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    LogLog,
    Lines,
    Bars,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    /// File stem under `plots/`.
    pub name: &'static str,
    pub title: &'static str,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub kind: PlotKind,
    pub series: Vec<Series>,
    /// Category names for bar charts, indexed by x.
    pub categories: Vec<String>,
}

impl PlotSpec {
    pub fn is_empty(&self) -> bool {
        self.series.iter().all(|s| s.points.is_empty())
    }
}

fn unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// The four standard figures. `gaps` feeds the planner-gap figure and may
/// be empty.
pub fn plot_specs(summary: &[SummaryRow], gaps: &[GapRow]) -> Vec<PlotSpec> {
    let epsilons = unique(summary.iter().map(|r| r.epsilon));
    let horizons = unique(summary.iter().map(|r| r.horizon));
    let positive = |p: &(f64, f64)| p.0 > 0.0 && p.1 > 0.0;

    let regret = epsilons
        .iter()
        .map(|&e| Series {
            label: format!("eps = {e}"),
            points: summary
                .iter()
                .filter(|r| r.epsilon == e)
                .filter_map(|r| Some((r.horizon, r.median_regret?)))
                .filter(positive)
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    let per_time = horizons
        .iter()
        .map(|&t| Series {
            label: format!("T = {t}"),
            points: summary
                .iter()
                .filter(|r| r.horizon == t)
                .filter_map(|r| Some((r.epsilon, r.median_regret_per_time?)))
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    let covered: Vec<&SummaryRow> = summary
        .iter()
        .filter(|r| r.coverage_frequency.is_some())
        .collect();
    let coverage = vec![Series {
        label: "coverage frequency".into(),
        points: covered
            .iter()
            .enumerate()
            .map(|(i, r)| (i as f64, r.coverage_frequency.unwrap_or(0.0)))
            .collect(),
    }];
    let categories = covered
        .iter()
        .map(|r| format!("{}/{}", r.epsilon, r.horizon))
        .collect();
    let gap = vec![
        Series {
            label: "|rho_bar - rho|".into(),
            points: gaps
                .iter()
                .map(|g| (g.epsilon, g.gap))
                .filter(positive)
                .collect(),
        },
        Series {
            label: "policy suboptimality".into(),
            points: gaps
                .iter()
                .map(|g| (g.epsilon, g.suboptimality))
                .filter(positive)
                .collect(),
        },
    ]
    .into_iter()
    .filter(|s| !s.points.is_empty())
    .collect();

    vec![
        PlotSpec {
            name: "regret_vs_horizon",
            title: "median regret",
            x_label: "T",
            y_label: "regret",
            kind: PlotKind::LogLog,
            series: regret,
            categories: vec![],
        },
        PlotSpec {
            name: "regret_per_time_vs_epsilon",
            title: "median regret per unit time",
            x_label: "epsilon",
            y_label: "regret / T",
            kind: PlotKind::Lines,
            series: per_time,
            categories: vec![],
        },
        PlotSpec {
            name: "coverage",
            title: "coverage frequency per cell (eps/T)",
            x_label: "cell",
            y_label: "frequency",
            kind: PlotKind::Bars,
            series: coverage,
            categories,
        },
        PlotSpec {
            name: "gap_vs_epsilon",
            title: "diffusive approximation",
            x_label: "epsilon",
            y_label: "gap",
            kind: PlotKind::LogLog,
            series: gap,
            categories: vec![],
        },
    ]
}

/// Writes every nonempty figure to `dir/plots/<name>.svg`.
pub fn emit_plots(dir: &Path, summary: &[SummaryRow], gaps: &[GapRow]) -> Result<Vec<PathBuf>> {
    let out = dir.join("plots");
    std::fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    for spec in plot_specs(summary, gaps) {
        if spec.is_empty() {
            continue;
        }
        let path = out.join(format!("{}.svg", spec.name));
        std::fs::write(&path, render_svg(&spec)?)?;
        written.push(path);
    }
    Ok(written)
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn bounds(spec: &PlotSpec) -> ((f64, f64), (f64, f64)) {
    let pts = spec.series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    match spec.kind {
        PlotKind::LogLog => ((x0 / 1.5, x1 * 1.5), (y0 / 1.5, y1 * 1.5)),
        PlotKind::Lines => {
            let (px, py) = (0.05 * (x1 - x0).max(1e-12), 0.1 * (y1 - y0).max(1e-12));
            ((x0 - px, x1 + px), (y0.min(0.0) - py, y1 + py))
        }
        PlotKind::Bars => ((-0.5, x1 + 0.5), (0.0, 1.05)),
    }
}

/// SVG text of one figure.
pub fn render_svg(spec: &PlotSpec) -> Result<String> {
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (800, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let ((x0, x1), (y0, y1)) = bounds(spec);
        let mut builder = ChartBuilder::on(&root);
        builder
            .caption(spec.title, ("sans-serif", 22))
            .margin(16)
            .x_label_area_size(44)
            .y_label_area_size(64);
        match spec.kind {
            PlotKind::LogLog => {
                let mut chart = builder
                    .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
                    .map_err(plot_err)?;
                chart
                    .configure_mesh()
                    .x_desc(spec.x_label)
                    .y_desc(spec.y_label)
                    .draw()
                    .map_err(plot_err)?;
                for (i, s) in spec.series.iter().enumerate() {
                    let color = Palette99::pick(i).to_rgba();
                    chart
                        .draw_series(LineSeries::new(
                            s.points.iter().copied(),
                            color.stroke_width(2),
                        ))
                        .map_err(plot_err)?
                        .label(s.label.as_str())
                        .legend(move |(x, y)| {
                            PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                        });
                    chart
                        .draw_series(s.points.iter().map(|&p| Circle::new(p, 4, color.filled())))
                        .map_err(plot_err)?;
                }
                chart
                    .configure_series_labels()
                    .background_style(WHITE)
                    .border_style(BLACK)
                    .draw()
                    .map_err(plot_err)?;
            }
            PlotKind::Lines => {
                let mut chart = builder
                    .build_cartesian_2d(x0..x1, y0..y1)
                    .map_err(plot_err)?;
                chart
                    .configure_mesh()
                    .x_desc(spec.x_label)
                    .y_desc(spec.y_label)
                    .draw()
                    .map_err(plot_err)?;
                for (i, s) in spec.series.iter().enumerate() {
                    let color = Palette99::pick(i).to_rgba();
                    chart
                        .draw_series(LineSeries::new(
                            s.points.iter().copied(),
                            color.stroke_width(2),
                        ))
                        .map_err(plot_err)?
                        .label(s.label.as_str())
                        .legend(move |(x, y)| {
                            PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                        });
                    chart
                        .draw_series(s.points.iter().map(|&p| Circle::new(p, 4, color.filled())))
                        .map_err(plot_err)?;
                }
                chart
                    .configure_series_labels()
                    .background_style(WHITE)
                    .border_style(BLACK)
                    .draw()
                    .map_err(plot_err)?;
            }
            PlotKind::Bars => {
                let mut chart = builder
                    .build_cartesian_2d(x0..x1, y0..y1)
                    .map_err(plot_err)?;
                let cats = spec.categories.clone();
                let label = move |x: &f64| {
                    let i = x.round();
                    if (x - i).abs() < 1e-9 && i >= 0.0 {
                        cats.get(i as usize).cloned().unwrap_or_default()
                    } else {
                        String::new()
                    }
                };
                chart
                    .configure_mesh()
                    .x_desc(spec.x_label)
                    .y_desc(spec.y_label)
                    .x_labels(spec.categories.len().max(2) * 2 + 1)
                    .x_label_formatter(&label)
                    .draw()
                    .map_err(plot_err)?;
                for s in &spec.series {
                    chart
                        .draw_series(s.points.iter().map(|&(x, y)| {
                            Rectangle::new([(x - 0.35, 0.0), (x + 0.35, y)], BLUE.mix(0.6).filled())
                        }))
                        .map_err(plot_err)?;
                }
            }
        }
        root.present().map_err(plot_err)?;
    }
    Ok(buf)
}
