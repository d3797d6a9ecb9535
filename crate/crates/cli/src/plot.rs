//! Log-log SVG plot of a convergence table.

use std::fmt::Write as _;

use crate::error::CliError;

/// `(ε, e(ε))` rows of a CSV with `eps` and `l2_error` columns; `#` lines
/// are comments.
pub fn parse_study(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Parse("empty CSV".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Parse(format!("missing column {name:?} in header {header:?}")))
    };
    let (ie, ir) = (col("eps")?, col("l2_error")?);
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(CliError::Parse(format!("row {} has {} cells, expected {}", k + 1, cells.len(), header.len())));
        }
        let num = |i: usize| {
            cells[i]
                .parse::<f64>()
                .map_err(|e| CliError::Parse(format!("row {}: {:?}: {e}", k + 1, cells[i])))
        };
        let (eps, err) = (num(ie)?, num(ir)?);
        if !(eps > 0.0 && err > 0.0 && eps.is_finite() && err.is_finite()) {
            return Err(CliError::Parse(format!("row {}: log axes need positive values", k + 1)));
        }
        rows.push((eps, err));
    }
    if rows.len() < 2 {
        return Err(CliError::Parse(format!("{} data rows; a slope needs at least two", rows.len())));
    }
    Ok(rows)
}

/// Least-squares slope of `log e` against `log ε`.
pub fn loglog_slope(rows: &[(f64, f64)]) -> f64 {
    let n = rows.len() as f64;
    let (mx, my) = rows
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln() / n, b + y.ln() / n));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in rows {
        let dx = x.ln() - mx;
        sxy += dx * (y.ln() - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 56.0;

pub fn render_svg(rows: &[(f64, f64)]) -> String {
    let slope = loglog_slope(rows);
    let lx: Vec<f64> = rows.iter().map(|r| r.0.log10()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.1.log10()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi > lo { (lo, hi) } else { (lo, lo + 1.0) }
    };
    let (x0, x1) = range(&lx);
    let (y0, y1) = range(&ly);
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for d in (x0 as i32)..=(x1 as i32) {
        let x = px(f64::from(d));
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">1e{d}</text>"#, H - PAD + 16.0);
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(f64::from(d));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">1e{d}</text>"#, PAD - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">eps</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">L2 error</text>"#,
        H / 2.0,
        H / 2.0
    );
    // fitted line through the centroid
    let n = rows.len() as f64;
    let (cx, cy) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let (a, b) = (
        lx.iter().copied().fold(f64::INFINITY, f64::min),
        lx.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
        px(a),
        py(cy + slope * (a - cx)),
        px(b),
        py(cy + slope * (b - cx))
    );
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="steelblue"/>"#, px(*x), py(*y));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" class="slope">slope = {slope:.3}</text>"#,
        PAD + 8.0,
        PAD + 18.0
    );
    s.push_str("</svg>\n");
    s
}
