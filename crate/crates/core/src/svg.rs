//! Minimal SVG choropleth of per-cell values.

use std::fmt::Write as _;

/// Colour stops from low to high.
const RAMP: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

const MISSING: &str = "#cccccc";

fn colour(x: f64) -> String {
    let x = x.clamp(0.0, 1.0);
    let k = RAMP.iter().position(|s| s.0 >= x).unwrap_or(RAMP.len() - 1).max(1);
    let ((x0, c0), (x1, c1)) = (RAMP[k - 1], RAMP[k]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    let mix = |a: u8, b: u8| (a as f64 + w * (b as f64 - a as f64)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(c0[0], c1[0]),
        mix(c0[1], c1[1]),
        mix(c0[2], c1[2])
    )
}

/// Render cells of `res` degrees at `(lon, lat)` centres coloured by value;
/// `None` values are drawn grey. The colour scale spans the finite values.
pub fn choropleth(title: &str, centres: &[(f64, f64)], res: f64, values: &[Option<f64>]) -> String {
    const SCALE: f64 = 8.0;
    const MARGIN: f64 = 20.0;
    let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let lon0 = centres.iter().map(|c| c.0).fold(f64::INFINITY, f64::min) - 0.5 * res;
    let lon1 = centres.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max) + 0.5 * res;
    let lat0 = centres.iter().map(|c| c.1).fold(f64::INFINITY, f64::min) - 0.5 * res;
    let lat1 = centres.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max) + 0.5 * res;
    let (w, h) = if centres.is_empty() {
        (0.0, 0.0)
    } else {
        ((lon1 - lon0) * SCALE, (lat1 - lat0) * SCALE)
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w + 2.0 * MARGIN,
        h + 3.0 * MARGIN,
        w + 2.0 * MARGIN,
        h + 3.0 * MARGIN
    );
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-size="12">{}</text>"#,
        0.75 * MARGIN,
        escape(title)
    );
    let size = res * SCALE;
    for (&(lon, lat), v) in centres.iter().zip(values) {
        let x = MARGIN + (lon - 0.5 * res - lon0) * SCALE;
        let y = MARGIN + (lat1 - lat - 0.5 * res) * SCALE;
        let fill = match v {
            Some(v) if v.is_finite() => colour((v - lo) / span),
            _ => MISSING.to_string(),
        };
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{y}" width="{size}" height="{size}" fill="{fill}"/>"#
        );
    }
    if !finite.is_empty() {
        let y = h + 2.0 * MARGIN;
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN}" y="{y}" font-size="10">{lo:.3} (dark) to {hi:.3} (light)</text>"#
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_ends() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(colour(2.0), "#fde725");
    }

    #[test]
    fn one_rect_per_cell() {
        let svg = choropleth("onset <sim BC>", &[(0.0, 0.0), (0.5, 0.0)], 0.5, &[Some(1.0), None]);
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.contains(MISSING));
        assert!(svg.contains("&lt;sim BC&gt;"));
    }
}
