//! Deterministic SVG output of tessellations.
//!
//! Planar cells are drawn as lattice rasters (one rect per run of equally
//! assigned nodes in a lattice row) clipped to the polygon; the sphere is
//! drawn in the equirectangular projection.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector2;

use crate::domain::Point;
use crate::grid::Lattice;
use crate::topology::Tessellation;

const PALETTE: [&str; 10] =
    ["#e6a23c", "#5b8ff9", "#61c28b", "#e8684a", "#9270ca", "#6dc8ec", "#ff9d4d", "#269a99", "#ff99c3", "#a0a3a6"];

pub fn site_color(site: usize) -> &'static str {
    PALETTE[site % PALETTE.len()]
}

/// Extra geometry drawn over the cells, in domain coordinates.
#[derive(Clone, Debug, Default)]
pub struct Overlay {
    pub polylines: Vec<Vec<Vector2<f64>>>,
    pub segments: Vec<[Vector2<f64>; 2]>,
    pub title: Option<String>,
}

const PLANAR_SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

struct View {
    lo: Vector2<f64>,
    height: f64,
    scale: f64,
}

impl View {
    fn map(&self, v: Vector2<f64>) -> (f64, f64) {
        (MARGIN + (v.x - self.lo.x) * self.scale, MARGIN + (self.height - (v.y - self.lo.y)) * self.scale)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64, title: Option<&str>) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    if let Some(t) = title {
        let _ = writeln!(out, "<title>{}</title>", escape(t));
    }
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#);
}

/// Runs of equal owners along lattice row `j`: (first column, last column, site).
fn row_runs(slots: &[u32], nx: usize, j: usize, owner: impl Fn(usize) -> usize) -> Vec<(usize, usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < nx {
        let s = slots[j * nx + i];
        if s == u32::MAX {
            i += 1;
            continue;
        }
        let site = owner(s as usize);
        let start = i;
        while i + 1 < nx && slots[j * nx + i + 1] != u32::MAX && owner(slots[j * nx + i + 1] as usize) == site {
            i += 1;
        }
        runs.push((start, i, site));
        i += 1;
    }
    runs
}

pub fn render_svg(tess: &Tessellation, overlay: &Overlay) -> String {
    match tess.grid().lattice() {
        Lattice::Planar { origin, nx, ny, slots } => render_planar(tess, overlay, *origin, *nx, *ny, slots),
        Lattice::Sphere { n_lat, n_lon } => render_sphere(tess, overlay, *n_lat, *n_lon),
    }
}

fn render_planar(
    tess: &Tessellation,
    overlay: &Overlay,
    origin: Vector2<f64>,
    nx: usize,
    ny: usize,
    slots: &[u32],
) -> String {
    let poly = tess.domain().as_polygon().expect("planar lattice on a polygon");
    let (lo, hi) = poly.bbox();
    let size = hi - lo;
    let scale = PLANAR_SIZE / size.x.max(size.y);
    let view = View { lo, height: size.y, scale };
    let width = size.x * scale + 2.0 * MARGIN;
    let height = size.y * scale + 2.0 * MARGIN;
    let h = tess.grid().spacing();

    let mut out = String::new();
    header(&mut out, width, height, overlay.title.as_deref());
    let outline: Vec<String> = poly
        .vertices()
        .iter()
        .map(|v| {
            let (x, y) = view.map(*v);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let outline = outline.join(" ");
    let _ = writeln!(out, r#"<defs><clipPath id="domain"><polygon points="{outline}"/></clipPath></defs>"#);
    let _ = writeln!(out, r#"<g clip-path="url(#domain)" shape-rendering="crispEdges">"#);
    for j in 0..ny {
        for (a, b, site) in row_runs(slots, nx, j, |s| tess.owner(s)) {
            let x0 = origin.x + (a as f64 - 0.5) * h;
            let x1 = origin.x + (b as f64 + 0.5) * h;
            let y1 = origin.y + (j as f64 + 0.5) * h;
            let (px, py) = view.map(Vector2::new(x0, y1));
            let w = (x1 - x0) * scale;
            let _ = writeln!(
                out,
                r#"<rect x="{px:.3}" y="{py:.3}" width="{w:.3}" height="{:.3}" fill="{}"/>"#,
                h * scale,
                site_color(site)
            );
        }
    }
    out.push_str("</g>\n");
    let _ = writeln!(out, r#"<polygon points="{outline}" fill="none" stroke="black" stroke-width="1.5"/>"#);

    let _ = writeln!(out, r#"<g clip-path="url(#domain)" fill="none" stroke="black" stroke-width="1.2">"#);
    for line in &overlay.polylines {
        let pts: Vec<String> = line
            .iter()
            .map(|v| {
                let (x, y) = view.map(*v);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}"/>"#, pts.join(" "));
    }
    out.push_str("</g>\n");
    for [a, b] in &overlay.segments {
        let (x0, y0) = view.map(*a);
        let (x1, y1) = view.map(*b);
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="crimson" stroke-width="2" stroke-dasharray="6,4"/>"#
        );
    }
    for (k, s) in tess.sites().iter().enumerate() {
        if let Point::Plane(v) = s.position {
            let (x, y) = view.map(v);
            marker(&mut out, x, y, k);
        }
    }
    out.push_str("</svg>\n");
    out
}

fn marker(out: &mut String, x: f64, y: f64, site: usize) {
    let _ = writeln!(
        out,
        r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{}" stroke="black" stroke-width="1.5"/>"#,
        site_color(site)
    );
}

const SPHERE_WIDTH: f64 = 720.0;

fn render_sphere(tess: &Tessellation, overlay: &Overlay, n_lat: usize, n_lon: usize) -> String {
    let width = SPHERE_WIDTH;
    let height = SPHERE_WIDTH / 2.0;
    let cw = width / n_lon as f64;
    let ch = height / n_lat as f64;
    let mut out = String::new();
    header(&mut out, width + 2.0 * MARGIN, height + 2.0 * MARGIN, overlay.title.as_deref());
    let _ = writeln!(out, r#"<g transform="translate({MARGIN},{MARGIN})" shape-rendering="crispEdges">"#);
    let slots: Vec<u32> = (0..(n_lat * n_lon) as u32).collect();
    for k in 0..n_lat {
        for (a, b, site) in row_runs(&slots, n_lon, k, |s| tess.owner(s)) {
            let y = (n_lat - 1 - k) as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{y:.3}" width="{:.3}" height="{ch:.3}" fill="{}"/>"#,
                a as f64 * cw,
                (b - a + 1) as f64 * cw,
                site_color(site)
            );
        }
    }
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width:.3}" height="{height:.3}" fill="none" stroke="black"/>"#);
    for (k, s) in tess.sites().iter().enumerate() {
        if let Some((lat, lon)) = s.position.lat_lon() {
            let lon = lon.rem_euclid(2.0 * PI);
            marker(&mut out, lon / (2.0 * PI) * width, (PI / 2.0 - lat) / PI * height, k);
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}
