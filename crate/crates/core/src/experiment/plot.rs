use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{rows_to_csv, SweepRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

struct Series<'a> {
    title: &'a str,
    y_label: &'a str,
    points: Vec<(f64, f64, f64)>,
}

/// Grid values are placed at equal spacing; sweeps mix zero with
/// log-spaced values, so neither a linear nor a log axis fits.
fn render(series: &Series<'_>, x_label: &str) -> String {
    let n = series.points.len();
    let finite: Vec<f64> = series
        .points
        .iter()
        .flat_map(|&(_, y, e)| [y - e, y + e])
        .filter(|v| v.is_finite())
        .collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |i: usize| {
        if n == 1 {
            MARGIN + plot_w / 2.0
        } else {
            MARGIN + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let py = |v: f64| HEIGHT - MARGIN - plot_h * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, series.title);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"##, x0 - 4.0, x0 - 6.0, y + 4.0, fmt_tick(v));
    }
    for (i, &(x, _, _)) in series.points.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, px(i), y0 + 18.0, fmt_tick(x));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, WIDTH / 2.0, HEIGHT - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        series.y_label
    );

    let drawn: Vec<(f64, f64, f64)> = series
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1.is_finite())
        .map(|(i, p)| (px(i), py(p.1), if p.2.is_finite() { p.2 } else { 0.0 }))
        .collect();
    if drawn.len() > 1 {
        let path: Vec<String> = drawn.iter().map(|(x, y, _)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="2"/>"##, path.join(" "));
    }
    for (&(x, y, _), p) in drawn.iter().zip(series.points.iter().filter(|p| p.1.is_finite())) {
        if p.2 > 0.0 && p.2.is_finite() {
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#1f5fa8"/>"##, py(p.1 - p.2), py(p.1 + p.2));
        }
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#1f5fa8"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

/// Writes `adv.svg`, `rho_kl.svg` and `plot_data.csv` (same columns as the
/// sweep table) into `dir`.
pub fn emit_plots(rows: &[SweepRow], dir: &Path) -> Result<Vec<PathBuf>> {
    let first = rows.first().ok_or_else(|| Error::Range("nothing to plot".into()))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let x_label = first.sweep_var.name();
    let adv = Series {
        title: "Membership advantage",
        y_label: "Adv (mean, +-1 sd over seeds)",
        points: rows.iter().map(|r| (r.sweep_value, r.adv_mean, r.adv_std)).collect(),
    };
    let kl = Series {
        title: "KL membership leakage",
        y_label: "rho_KL (nats, +-1 se)",
        points: rows.iter().map(|r| (r.sweep_value, r.rho_kl, r.rho_kl_stderr)).collect(),
    };
    let files = [
        (dir.join("adv.svg"), render(&adv, x_label)),
        (dir.join("rho_kl.svg"), render(&kl, x_label)),
        (dir.join("plot_data.csv"), rows_to_csv(rows)),
    ];
    let mut out = Vec::with_capacity(files.len());
    for (path, text) in files {
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{parse_sweep_csv, SweepVar, SWEEP_HEADER};

    fn row(v: f64, adv: f64) -> SweepRow {
        SweepRow {
            sweep_var: SweepVar::N,
            sweep_value: v,
            adv_mean: adv,
            adv_std: 0.01,
            rho_kl: 2.0 * adv,
            rho_kl_stderr: 0.02,
            rho_mi: 0.1,
            success_bound: adv.sqrt(),
            seed_count: 5,
            config_hash: "00ff".into(),
        }
    }

    #[test]
    fn four_rows_give_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<SweepRow> = [10.0, 20.0, 40.0, 80.0].iter().map(|&v| row(v, 1.0 / v)).collect();
        let files = emit_plots(&rows, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        for f in &files {
            assert!(fs::metadata(f).unwrap().len() > 0);
        }
        let data = fs::read_to_string(dir.path().join("plot_data.csv")).unwrap();
        assert_eq!(data.lines().next(), Some(SWEEP_HEADER));
        assert_eq!(parse_sweep_csv(&data).unwrap(), rows);
        let svg = fs::read_to_string(dir.path().join("adv.svg")).unwrap();
        assert!(svg.contains("<polyline") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn single_row_is_a_point() {
        let dir = tempfile::tempdir().unwrap();
        emit_plots(&[row(10.0, 0.2)], dir.path()).unwrap();
        let svg = fs::read_to_string(dir.path().join("rho_kl.svg")).unwrap();
        assert!(!svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn nan_leakage_and_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = row(1.0, 0.1);
        r.rho_kl = f64::NAN;
        r.rho_kl_stderr = f64::NAN;
        emit_plots(&[r.clone(), row(2.0, 0.05)], dir.path()).unwrap();
        assert!(emit_plots(&[], dir.path()).is_err());
    }
}
