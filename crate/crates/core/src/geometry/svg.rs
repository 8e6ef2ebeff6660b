//! SVG 1.1 rendering of an [`IndexMap`].

use std::fmt::Write;

use super::IndexMap;

const WIDTH: f64 = 600.0;
const LEGEND: f64 = 140.0;
const BAND: &str = "#bdbdbd";
const BLUES: [&str; 5] = ["#c6dbef", "#9ecae1", "#6baed6", "#3182bd", "#08519c"];

pub fn color(index: Option<u32>) -> &'static str {
    match index {
        None => BAND,
        Some(0) => "#ffffff",
        Some(1) => "#e41a1c",
        Some(2) => "#ffd92f",
        Some(k) => BLUES[((k - 3) as usize).min(BLUES.len() - 1)],
    }
}

/// Six significant digits, trailing zeros trimmed.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let prec = (5 - mag).max(0) as usize;
    let s = format!("{:.*}", prec, x);
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

pub fn render(map: &IndexMap) -> String {
    let res = map.resolution;
    let b = map.bounds;
    let height = WIDTH * (b.y_max - b.y_min) / (b.x_max - b.x_min);
    let cw = WIDTH / res as f64;
    let ch = height / res as f64;
    let px = |x: f64| (x - b.x_min) / (b.x_max - b.x_min) * WIDTH;
    let py = |y: f64| (b.y_max - y) / (b.y_max - b.y_min) * height;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt6(WIDTH + LEGEND),
        fmt6(height),
        fmt6(WIDTH + LEGEND),
        fmt6(height)
    );
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for r in 0..res {
        let mut c = 0;
        while c < res {
            let idx = map.at(r, c);
            let mut end = c + 1;
            while end < res && map.at(r, end) == idx {
                end += 1;
            }
            if idx != Some(0) {
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                    fmt6(c as f64 * cw),
                    fmt6(r as f64 * ch),
                    fmt6((end - c) as f64 * cw),
                    fmt6(ch),
                    color(idx)
                );
            }
            c = end;
        }
    }
    let _ = writeln!(s, "</g>");
    if !map.boundary.is_empty() {
        let mut d = String::new();
        for (k, p) in map.boundary.iter().enumerate() {
            let _ = write!(d, "{}{},{} ", if k == 0 { "M" } else { "L" }, fmt6(px(p.re)), fmt6(py(p.im)));
        }
        d.push('Z');
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="black" stroke-width="1"/>"#);
    }
    for v in &map.branch_values {
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="3" fill="black"/>"#,
            fmt6(px(v.re)),
            fmt6(py(v.im))
        );
    }
    let mut entries: Vec<Option<u32>> = map.cells.iter().map(|c| c.map(|k| k.min(7))).collect();
    entries.sort();
    entries.dedup();
    let x0 = WIDTH + 15.0;
    for (k, e) in entries.iter().enumerate() {
        let y = 20.0 + 24.0 * k as f64;
        let label = match e {
            None => "boundary".to_string(),
            Some(7) => "index ≥ 7".to_string(),
            Some(i) => format!("index {i}"),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="16" height="16" fill="{}" stroke="black"/>"#,
            fmt6(x0),
            fmt6(y),
            color(*e)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{label}</text>"#,
            fmt6(x0 + 22.0),
            fmt6(y + 13.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Bounds, IndexMap};

    #[test]
    fn six_digits() {
        assert_eq!(fmt6(1.0), "1");
        assert_eq!(fmt6(123.456789), "123.457");
        assert_eq!(fmt6(0.000123456789), "0.000123457");
        assert_eq!(fmt6(-2.5), "-2.5");
        assert_eq!(fmt6(1234567.0), "1234567");
    }

    #[test]
    fn minimal_grid() {
        let map = IndexMap {
            bounds: Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            resolution: 1,
            cells: vec![Some(0)],
            boundary: vec![],
            branch_values: vec![],
            regions: vec![],
            probed: 0,
        };
        let svg = render(&map);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg, render(&map));
    }

    #[test]
    fn palette() {
        assert_eq!(color(Some(0)), "#ffffff");
        assert_eq!(color(Some(1)), "#e41a1c");
        assert_eq!(color(Some(2)), "#ffd92f");
        assert!(color(Some(3)).starts_with("#c6"));
    }
}
