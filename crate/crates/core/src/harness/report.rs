//! CSV and SVG output for sweeps.

use std::io::Write;

use crate::error::Result;
use crate::harness::fit::median_by_delta;
use crate::harness::sweep::{CheckOutcome, SweepRow, SweepTable};

pub const CSV_HEADER: &str = "method,kernel_id,truth_id,delta,seed,norm,error,N,m,alpha,h,sigma,runtime_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line per row in row order. `runtime_ms` stays blank unless `timings`
/// is set, so untimed output is reproducible byte for byte.
pub fn write_csv(rows: &[SweepRow], timings: bool, mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let p = &r.params;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method.name(),
            csv_field(&r.kernel_id),
            csv_field(&r.truth_id),
            r.delta,
            r.seed,
            r.norm.name(),
            opt(r.error),
            opt(p.n_scale),
            opt(p.m),
            opt(p.alpha),
            opt(p.h),
            opt(p.sigma),
            if timings { r.runtime_ms.to_string() } else { String::new() },
        )?;
    }
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Log-log plot of the per-delta median errors with the fitted line and,
/// for power-law checks, the predicted slope through the same centroid.
pub fn write_svg(table: &SweepTable, outcome: Option<&CheckOutcome>, mut out: impl Write) -> Result<()> {
    let medians = median_by_delta(&table.points());
    let pts: Vec<(f64, f64)> = medians.iter().map(|(d, e)| (d.log10(), e.log10())).collect();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    if pts.is_empty() {
        writeln!(out, r#"<text x="{}" y="{}">no data</text>"#, WIDTH / 2.0, HEIGHT / 2.0)?;
        writeln!(out, "</svg>")?;
        return Ok(());
    }
    let (mut x0, mut x1) = bounds(pts.iter().map(|p| p.0));
    let (mut y0, mut y1) = bounds(pts.iter().map(|p| p.1));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    writeln!(
        out,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{t}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">log10 delta</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    )?;
    writeln!(
        out,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">log10 error</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )?;
    for (x, y) in &pts {
        writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, sx(*x), sy(*y))?;
    }
    if let Some(fit) = outcome.and_then(|o| o.fit) {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let line = |slope: f64, colour: &str, dash: &str, out: &mut dyn Write| -> Result<()> {
            let ya = my + slope * (x0 - mx);
            let yb = my + slope * (x1 - mx);
            writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-dasharray="{dash}"/>"#,
                sx(x0),
                sy(ya),
                sx(x1),
                sy(yb)
            )?;
            Ok(())
        };
        line(fit.slope, "firebrick", "none", &mut out)?;
        line(fit.theoretical_exponent, "grey", "6 4", &mut out)?;
        writeln!(
            out,
            r#"<text x="{}" y="30">fitted slope {:.3}, expected {:.3}</text>"#,
            MARGIN, fit.slope, fit.theoretical_exponent
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
