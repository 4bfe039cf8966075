//! SVG 1.1 drawing of Stokes lines and curves. The y axis is flipped so the
//! picture has the usual orientation of the complex plane.

use std::fmt::Write;

use crate::geometry::{Direction, StokesCurve};

fn point(r: f64, theta: f64) -> (f64, f64) {
    (r * theta.cos(), -r * theta.sin())
}

pub fn render(lines: &[Direction], curves: &[StokesCurve], radius: f64) -> String {
    let r = radius;
    let stroke = r / 200.0;
    let mut out = String::new();
    writeln!(out, r##"<?xml version="1.0" encoding="UTF-8"?>"##).unwrap();
    writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="600" height="600" viewBox="{} {} {} {}">"##,
        -r,
        -r,
        2.0 * r,
        2.0 * r
    )
    .unwrap();
    writeln!(out, r##"  <circle cx="0" cy="0" r="{r}" fill="none" stroke="#ccc" stroke-width="{stroke}"/>"##).unwrap();
    for d in lines {
        let (x, y) = point(r, d.angle);
        writeln!(
            out,
            r##"  <line class="stokes-line" data-angle="{:.12}" x1="0" y1="0" x2="{x:.12}" y2="{y:.12}" stroke="#888" stroke-dasharray="{} {}" stroke-width="{stroke}"/>"##,
            d.angle,
            4.0 * stroke,
            2.0 * stroke
        )
        .unwrap();
    }
    for c in curves {
        let mut pts: Vec<(f64, f64)> = c.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let body: Vec<String> = pts
            .iter()
            .map(|&(rho, th)| {
                let (x, y) = point(rho, th);
                format!("{x:.15e},{y:.15e}")
            })
            .collect();
        writeln!(
            out,
            r##"  <polyline class="stokes-curve" data-angle="{:.12}" fill="none" stroke="#c22" stroke-width="{stroke}" points="{}"/>"##,
            c.direction.angle,
            body.join(" ")
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
