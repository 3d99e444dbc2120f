//! Output helpers: float formatting, config hashing, CSV assembly, and a
//! small dependency-free SVG writer for log-log plots.
//!
//! Every floating-point value is printed with 17 significant digits so that
//! emitted files round-trip exactly and repeated runs are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// 17 significant digits; round-trips any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a 64-bit hash of raw bytes, hex-encoded. Used to stamp every output
/// file with the configuration it was produced from.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// One named series of (x, y) points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Renders a log-log scatter/line plot as a standalone SVG string.
/// Nonpositive values cannot be placed on log axes and are skipped.
pub fn loglog_svg(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    config_hash: &str,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;
    let colors = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];

    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if x > 0.0 && y > 0.0 {
                pts.push((x.log10(), y.log10()));
            }
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (-1.0, 1.0, -1.0, 1.0);
    if !pts.is_empty() {
        x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if x1 - x0 < 1e-9 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-9 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let padx = 0.05 * (x1 - x0);
        let pady = 0.08 * (y1 - y0);
        x0 -= padx;
        x1 += padx;
        y0 -= pady;
        y1 += pady;
    }
    let sx = |lx: f64| ML + (lx - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |ly: f64| H - MB - (ly - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<!-- config_hash={config_hash} -->");
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>",
        W / 2.0
    );
    // axes box
    let _ = writeln!(
        svg,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - ML - MR,
        H - MT - MB
    );
    // decade ticks
    for d in (x0.floor() as i64)..=(x1.ceil() as i64) {
        let lx = d as f64;
        if lx < x0 || lx > x1 {
            continue;
        }
        let px = sx(lx);
        let _ = writeln!(
            svg,
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#cccccc\"/>",
            MT,
            H - MB
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">1e{d}</text>",
            H - MB + 16.0
        );
    }
    for d in (y0.floor() as i64)..=(y1.ceil() as i64) {
        let ly = d as f64;
        if ly < y0 || ly > y1 {
            continue;
        }
        let py = sy(ly);
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#cccccc\"/>",
            W - MR
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">1e{d}</text>",
            ML - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{xlabel}</text>",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{ylabel}</text>",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let mut path = String::new();
        let mut markers = String::new();
        let mut first = true;
        for &(x, y) in &s.points {
            if !(x > 0.0 && y > 0.0) {
                continue;
            }
            let (px, py) = (sx(x.log10()), sy(y.log10()));
            let _ = write!(path, "{}{px:.2},{py:.2} ", if first { "M" } else { "L" });
            first = false;
            let _ = writeln!(
                markers,
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"{color}\"/>"
            );
        }
        if !path.is_empty() {
            let _ = writeln!(
                svg,
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.trim_end()
            );
        }
        svg.push_str(&markers);
        let ly = MT + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"3\" fill=\"{color}\"/>",
            W - MR - 150.0,
            ly - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            W - MR - 132.0,
            ly,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips() {
        for x in [0.1, -3.25e-17, 1.0 / 3.0, 6.02e23] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a_hex(b""), "cbf29ce484222325");
        assert_eq!(fnv1a_hex(b"a"), "af63dc4c8601ec8c");
    }

    #[test]
    fn svg_is_deterministic_and_skips_nonpositive() {
        let series = [Series {
            name: "gap".into(),
            points: vec![(0.4, 1e-3), (0.2, 4e-4), (0.1, 0.0)],
        }];
        let a = loglog_svg("t", "x", "y", &series, "deadbeef");
        let b = loglog_svg("t", "x", "y", &series, "deadbeef");
        assert_eq!(a, b);
        assert!(a.contains("config_hash=deadbeef"));
        // the zero point is dropped: only two markers
        assert_eq!(a.matches("<circle").count(), 2);
    }
}
