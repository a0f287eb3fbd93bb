//! Summaries over finished runs: one CSV and a few SVG line plots.

use plotters::prelude::*;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::config::ExperimentKind;
use crate::error::CliError;
use crate::experiments::fit_line;
use crate::record::{fmt_num, RunContext, RunRecord, RECORD_FILE};

/// One curve of a plot.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

/// Renders curves as a self-contained SVG. With `fit`, each legend entry
/// carries the least-squares slope in the plotted coordinates.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, curves: &[Curve], axes: Axes, fit: bool) -> Result<String, CliError> {
    let tx = |v: f64| if axes.log_x { v.log10() } else { v };
    let ty = |v: f64| if axes.log_y { v.log10() } else { v };
    let curves: Vec<Curve> = curves
        .iter()
        .map(|c| Curve {
            label: c.label.clone(),
            points: c
                .points
                .iter()
                .filter(|(x, y)| (!axes.log_x || *x > 0.0) && (!axes.log_y || *y > 0.0))
                .map(|(x, y)| (tx(*x), ty(*y)))
                .collect(),
        })
        .filter(|c| c.points.len() >= 2)
        .collect();
    if curves.is_empty() {
        return Err(CliError::Other(format!("{title}: no curve with two or more points")));
    }
    let all = curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    let pad = |a: f64, b: f64| {
        let w = if b > a { 0.05 * (b - a) } else { 0.5 * a.abs().max(1.0) };
        (a - w, b + w)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let axis_name = |name: &str, log: bool| if log { format!("log10 {name}") } else { name.to_string() };

    let mut svg = String::new();
    {
        let err = |e: DrawingAreaErrorKind<std::io::Error>| CliError::Other(format!("plotting {title}: {e}"));
        let root = SVGBackend::with_string(&mut svg, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(err)?;
        chart
            .configure_mesh()
            .x_desc(axis_name(x_label, axes.log_x))
            .y_desc(axis_name(y_label, axes.log_y))
            .draw()
            .map_err(err)?;
        for (i, c) in curves.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let label = match fit.then(|| fit_line(&c.points)).flatten() {
                Some((slope, _)) => format!("{} (slope {:.3})", c.label, slope),
                None => c.label.clone(),
            };
            chart
                .draw_series(LineSeries::new(c.points.iter().cloned(), color.stroke_width(2)))
                .map_err(err)?
                .label(label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
            chart
                .draw_series(c.points.iter().map(|p| Circle::new(*p, 3, color.filled())))
                .map_err(err)?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(err)?;
        root.present().map_err(err)?;
    }
    Ok(svg)
}

fn load_records(run_dirs: &[PathBuf], ctx: &RunContext) -> (Vec<(String, RunRecord)>, Vec<String>) {
    let mut found = Vec::new();
    let mut skipped = Vec::new();
    for dir in run_dirs {
        match RunRecord::load(dir) {
            Ok(r) => found.push((dir.display().to_string(), r)),
            Err(e) => {
                ctx.progress(format!("skipping {}: {e}", dir.display()));
                skipped.push(dir.display().to_string());
            }
        }
    }
    (found, skipped)
}

fn series<'a>(r: &'a RunRecord, name: &str) -> Option<&'a [[f64; 2]]> {
    r.metrics.series.get(name).map(|v| v.as_slice())
}

fn lookup(s: Option<&[[f64; 2]]>, t: f64) -> String {
    s.and_then(|s| s.iter().find(|p| p[0] == t)).map_or(String::new(), |p| fmt_num(p[1]))
}

fn scalar(r: &RunRecord, name: &str) -> String {
    r.metrics.scalars.get(name).map_or(String::new(), |v| fmt_num(*v))
}

/// Writes `summary.csv` and the plots for `run_dirs` into `out_dir`, with a
/// record of its own. Directories without a readable record are listed and
/// skipped; if none is left the call fails with "no runs found".
pub fn render_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<RunRecord, CliError> {
    let mut ctx = RunContext::create(ExperimentKind::Report, out_dir)?;
    let runs: Vec<String> = run_dirs.iter().map(|p| p.display().to_string()).collect();
    let config = serde_json::json!({ "kind": "report", "report": { "runs": runs } });
    match render_into(run_dirs, &mut ctx) {
        Ok(()) => ctx.finish(0, config, None),
        Err(e) => {
            ctx.finish(0, config, Some(&e))?;
            Err(e)
        }
    }
}

pub(crate) fn render_into(run_dirs: &[PathBuf], ctx: &mut RunContext) -> Result<(), CliError> {
    let out = ctx.dir().to_path_buf();
    let dirs: Vec<PathBuf> = run_dirs
        .iter()
        .filter(|d| !(d.join(RECORD_FILE).exists() && same_dir(d, &out)))
        .cloned()
        .collect();
    let (records, skipped) = load_records(&dirs, ctx);
    if records.is_empty() {
        return Err(CliError::Other("no runs found".into()));
    }
    ctx.progress(format!("{} runs, {} skipped", records.len(), skipped.len()));

    let mut rows = Vec::new();
    for (name, r) in &records {
        let l1 = series(r, "l1_error");
        let dom = series(r, "domination_C");
        let times: BTreeSet<u64> = l1
            .into_iter()
            .chain(dom)
            .flat_map(|s| s.iter().map(|p| p[0].to_bits()))
            .collect();
        let mut times: Vec<f64> = times.into_iter().map(f64::from_bits).collect();
        times.sort_by(f64::total_cmp);
        let (hs, ht) = (scalar(r, "holder_C_space"), scalar(r, "holder_C_time"));
        if times.is_empty() {
            rows.push(vec![name.clone(), r.kind.clone(), String::new(), String::new(), String::new(), hs, ht]);
        } else {
            for t in times {
                rows.push(vec![name.clone(), r.kind.clone(), fmt_num(t), lookup(l1, t), lookup(dom, t), hs.clone(), ht.clone()]);
            }
        }
    }
    ctx.write_csv(
        "summary.csv",
        &["run", "kind", "time", "l1_error", "domination_C", "holder_C_space", "holder_C_time"],
        &rows,
    )?;

    // L1 error and domination against the step count
    let mut err_curves = Vec::new();
    let mut dom_curves = Vec::new();
    let mut single_err = Vec::new();
    let mut single_dom = Vec::new();
    let mut lp_curves = Vec::new();
    for (name, r) in &records {
        let pts = |s: &[[f64; 2]]| s.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
        if let Some(s) = series(r, "final_error_vs_N") {
            err_curves.push(Curve {
                label: name.clone(),
                points: pts(s),
            });
        }
        if let Some(s) = series(r, "domination_vs_N") {
            dom_curves.push(Curve {
                label: name.clone(),
                points: pts(s),
            });
        }
        let sc = &r.metrics.scalars;
        if let Some(n) = sc.get("n_steps") {
            if let Some(e) = sc.get("final_l1_error") {
                single_err.push((*n, *e));
            }
            if let Some(c) = sc.get("domination_sup") {
                single_dom.push((*n, *c));
            }
        }
        for (key, s) in &r.metrics.series {
            if let Some(alpha) = key.strip_prefix("lp_decay_alpha_") {
                lp_curves.push(Curve {
                    label: format!("alpha {alpha}"),
                    points: pts(s),
                });
            }
        }
    }
    let sort = |mut v: Vec<(f64, f64)>| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    if single_err.len() >= 2 {
        err_curves.push(Curve {
            label: "single runs".into(),
            points: sort(single_err),
        });
    }
    if single_dom.len() >= 2 {
        dom_curves.push(Curve {
            label: "single runs".into(),
            points: sort(single_dom),
        });
    }
    let log_log = Axes { log_x: true, log_y: true };
    type Plot<'a> = (&'a str, &'a str, &'a str, &'a str, &'a [Curve], Axes, bool);
    let plots: [Plot<'_>; 3] = [
        ("l1_error_vs_N.svg", "L1 error at T against N", "N", "e(T)", &err_curves, log_log, true),
        (
            "domination_vs_N.svg",
            "Domination constant against N",
            "N",
            "sup C(t)",
            &dom_curves,
            Axes { log_x: true, log_y: false },
            false,
        ),
        (
            "lp_decay.svg",
            "Block heat integrals",
            "j",
            "log2 I_j",
            &lp_curves,
            Axes { log_x: false, log_y: false },
            true,
        ),
    ];
    let mut plotted = Vec::new();
    for (file, title, xl, yl, curves, axes, fit) in plots {
        if curves.iter().any(|c| c.points.len() >= 2) {
            let svg = line_plot(title, xl, yl, curves, axes, fit)?;
            ctx.write_bytes(file, svg.as_bytes())?;
            plotted.push(file.to_string());
        }
    }
    ctx.write_json(
        "report_index.json",
        &serde_json::json!({
            "runs": records.iter().map(|(n, r)| serde_json::json!({"run": n, "kind": r.kind, "status": r.status})).collect::<Vec<_>>(),
            "skipped": skipped,
            "plots": plotted,
        }),
    )?;
    ctx.scalar("runs", records.len() as f64);
    ctx.scalar("skipped_runs", skipped.len() as f64);
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_needs_two_points() {
        let c = Curve {
            label: "a".into(),
            points: vec![(1.0, 1.0)],
        };
        assert!(line_plot("t", "x", "y", &[c], Axes { log_x: false, log_y: false }, false).is_err());
    }

    #[test]
    fn log_plot_carries_the_slope() {
        let c = Curve {
            label: "a".into(),
            points: vec![(1.0, 1.0), (10.0, 0.1), (100.0, 0.01)],
        };
        let svg = line_plot("t", "N", "e", &[c], Axes { log_x: true, log_y: true }, true).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("slope -1.000"));
    }
}
