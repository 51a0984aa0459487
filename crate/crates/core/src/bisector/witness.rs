//! Polygons on which the cell of `x1 = (1, 0)` is disconnected.

use nalgebra::Vector2;

use super::level::{find_inflection, level_x, trace_level_curve};
use super::m_value;
use crate::domain::{Domain, Point};
use crate::error::{usage, Error, Result};
use crate::potential::{CostExponent, Site};

#[derive(Clone, Debug)]
pub struct WitnessDomain {
    pub domain: Domain,
    /// `x1 = (1, 0)` with weight `-alpha/p` and `x2 = (-1, 0)` with weight 0,
    /// so the interface is `{m = alpha}` and site 0 owns `{m > alpha}`.
    pub sites: Vec<Site>,
    pub target_site: usize,
    pub expected_components: usize,
    pub p: f64,
    pub alpha: f64,
    /// Polygon edge that crosses the level curve repeatedly.
    pub chord: Option<[Vector2<f64>; 2]>,
    /// Crossings of the chord with `{m = alpha}`.
    pub chord_roots: Vec<Vector2<f64>>,
    /// Inflection height of the level curve (exponents below 2).
    pub inflection: Option<f64>,
}

fn witness_sites(p: f64, alpha: f64) -> Vec<Site> {
    vec![Site::with_weight(Point::plane(1.0, 0.0), -alpha / p), Site::with_weight(Point::plane(-1.0, 0.0), 0.0)]
}

const CHORD_SAMPLES: usize = 20_000;

/// Roots of `m - alpha` along the segment `a -> b`, isolated by dense
/// sampling and refined by bisection.
pub fn count_chord_roots(p: CostExponent, alpha: f64, a: Vector2<f64>, b: Vector2<f64>) -> Vec<Vector2<f64>> {
    let at = |t: f64| a + (b - a) * t;
    let g = |t: f64| {
        let z = at(t);
        m_value(z.x, z.y, p) - alpha
    };
    let mut roots = Vec::new();
    let mut prev_t = 0.0;
    let mut prev = g(0.0);
    for k in 1..=CHORD_SAMPLES {
        let t = k as f64 / CHORD_SAMPLES as f64;
        let v = g(t);
        if v == 0.0 {
            roots.push(at(t));
            prev = 0.0;
            prev_t = t;
            continue;
        }
        if prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) > 0.0) == (prev > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(at(0.5 * (lo + hi)));
        }
        prev = v;
        prev_t = t;
    }
    roots
}

/// Convex polygon on which site 0's cell has two components.
///
/// For `1 < p < 2` the level curve `x = eta(y)` is convex near the axis and
/// concave further out, so a line through points on either side of the
/// inflection crosses it three times; the polygon is a trapezoid with that
/// line as its right edge. For `p > 2` the curve peaks on the axis and the
/// right edge is a vertical segment cutting it twice.
pub fn build_convex_witness(p: CostExponent, alpha: f64) -> Result<WitnessDomain> {
    let pv = p.get();
    if !(pv > 1.0) || pv == 2.0 {
        return Err(usage(format!("convex witness needs p > 1 and p != 2, got {pv}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(usage(format!("alpha must be positive, got {alpha}")));
    }
    if pv < 2.0 {
        convex_below_two(p, alpha)
    } else {
        convex_above_two(p, alpha)
    }
}

const X_LO: f64 = -1.5;

fn eta(p: CostExponent, alpha: f64, y: f64) -> Option<f64> {
    level_x(p, alpha, y.abs(), 0.0)
}

/// A candidate right edge `x = x_a + s (y - y_a)` with its crossings.
#[derive(Clone, Copy, Debug)]
struct Chord {
    x_a: f64,
    y_a: f64,
    s: f64,
    y_lo: f64,
    y_top: f64,
    score: f64,
}

impl Chord {
    fn x(&self, y: f64) -> f64 {
        self.x_a + self.s * (y - self.y_a)
    }
}

fn scan_heights() -> Vec<f64> {
    let mut ys: Vec<f64> = (-1200..=1200).map(|k| k as f64 * 0.05).collect();
    let mut y = 60.0;
    while y < 1e5 {
        y *= 1.02;
        ys.push(y);
        ys.push(-y);
    }
    ys.sort_by(f64::total_cmp);
    ys
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo) > 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == f_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn max_on(f: impl Fn(f64) -> Option<f64>, a: f64, b: f64) -> Option<f64> {
    let n = 64;
    let mut best = f64::NEG_INFINITY;
    for k in 1..n {
        best = best.max(f(a + (b - a) * k as f64 / n as f64)?);
    }
    Some(best)
}

fn evaluate_chord(p: CostExponent, alpha: f64, ys: &[f64], y_a: f64, y_b: f64) -> Option<Chord> {
    let x_a = eta(p, alpha, y_a)?;
    let x_b = eta(p, alpha, y_b)?;
    let s = (x_b - x_a) / (y_b - y_a);
    let line = |y: f64| x_a + s * (y - y_a);
    let g = |y: f64| m_value(line(y), y, p) - alpha;

    let mut roots = Vec::new();
    let mut prev = g(ys[0]);
    for w in ys.windows(2) {
        let v = g(w[1]);
        if (v > 0.0) != (prev > 0.0) {
            roots.push(bisect(g, w[0], w[1]));
            if roots.len() > 3 {
                return None;
            }
        }
        prev = v;
    }
    let [r1, r2, r3] = roots[..] else { return None };
    if !(g(0.5 * (r1 + r2)) > 0.0 && g(0.5 * (r2 + r3)) < 0.0) {
        return None;
    }
    let gap = |y: f64| eta(p, alpha, y).map(|e| line(y) - e);
    let t_right = max_on(gap, r1, r2)?;
    let t_left = max_on(|y| gap(y).map(|v| -v), r2, r3)?;
    let t = t_right.min(t_left);
    if !(t > 0.0) {
        return None;
    }
    let step = (r3 - r2) / 64.0;
    let mut y = r3;
    while gap(y + step)? < t {
        y += step;
        if y > 1e5 {
            return None;
        }
    }
    let y_top = bisect(|v| gap(v).unwrap_or(f64::NAN) - t, y, y + step);
    let y_lo = r1.min(0.0) - 0.5;
    if !(line(0.0) > 1.0 + t.min(0.5) && line(y_lo) > X_LO + 0.5) {
        return None;
    }
    let side = (line(y_top) - X_LO).max(line(y_lo) - X_LO).max(y_top - y_lo);
    Some(Chord { x_a, y_a, s, y_lo, y_top, score: t / side })
}

fn convex_below_two(p: CostExponent, alpha: f64) -> Result<WitnessDomain> {
    let mut y_max = 10.0;
    let y_star = loop {
        let curve = trace_level_curve(p, alpha, y_max, 1000)?;
        match find_inflection(&curve) {
            Ok(y) => break y,
            Err(Error::NotFound { .. }) if y_max < 1e4 && !curve.truncated => y_max *= 4.0,
            Err(e) => return Err(e),
        }
    };

    let ys = scan_heights();
    let lo_a = -2.0 * y_star;
    let hi_b = 4.0 * y_star;
    let n = 24;
    let mut best: Option<(f64, f64, Chord)> = None;
    let consider = |y_a: f64, y_b: f64, best: &mut Option<(f64, f64, Chord)>| {
        if !(y_a >= lo_a && y_a < y_star && y_b > y_star && y_b <= hi_b) {
            return;
        }
        if let Some(c) = evaluate_chord(p, alpha, &ys, y_a, y_b) {
            if best.as_ref().is_none_or(|b| c.score > b.2.score) {
                *best = Some((y_a, y_b, c));
            }
        }
    };
    for i in 0..n {
        for j in 1..=n {
            let y_a = lo_a + (y_star - lo_a) * i as f64 / n as f64;
            let y_b = y_star + (hi_b - y_star) * j as f64 / n as f64;
            consider(y_a, y_b, &mut best);
        }
    }
    let Some((mut y_a, mut y_b, _)) = best else {
        return Err(Error::ConstructionFailed(format!(
            "no line crosses the level curve three times (p = {}, alpha = {alpha}, inflection at y = {y_star:.6})",
            p.get()
        )));
    };
    let mut da = (y_star - lo_a) / n as f64;
    let mut db = (hi_b - y_star) / n as f64;
    for _ in 0..24 {
        let mut moved = false;
        for (sa, sb) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let before = best.as_ref().map(|b| b.2.score);
            consider(y_a + sa * da, y_b + sb * db, &mut best);
            if best.as_ref().map(|b| b.2.score) != before {
                let b = best.as_ref().unwrap();
                y_a = b.0;
                y_b = b.1;
                moved = true;
            }
        }
        if !moved {
            da *= 0.5;
            db *= 0.5;
        }
    }
    let chord = best.unwrap().2;

    let bottom = Vector2::new(chord.x(chord.y_lo), chord.y_lo);
    let top = Vector2::new(chord.x(chord.y_top), chord.y_top);
    let domain = Domain::polygon(vec![[X_LO, chord.y_lo], [bottom.x, bottom.y], [top.x, top.y], [X_LO, chord.y_top]])?;
    finish(p, alpha, domain, bottom, top, 3, Some(y_star))
}

fn convex_above_two(p: CostExponent, alpha: f64) -> Result<WitnessDomain> {
    let at_site = m_value(1.0, 0.0, p);
    if !(at_site < alpha) {
        return Err(Error::ConstructionFailed(format!(
            "m(1, 0) = {at_site} is not below alpha = {alpha}; increase alpha"
        )));
    }
    let eta0 = eta(p, alpha, 0.0).ok_or_else(|| Error::ConstructionFailed("level curve misses the axis".into()))?;
    let c = 0.5 * (1.0 + eta0);
    let g = |y: f64| m_value(c, y, p) - alpha;
    let mut hi = 0.1;
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::ConstructionFailed(format!("level curve never reaches x = {c}")));
        }
    }
    let y_c = bisect(g, 0.0, hi);
    let y_edge = 2.0 * y_c;
    let bottom = Vector2::new(c, -y_edge);
    let top = Vector2::new(c, y_edge);
    let domain = Domain::polygon(vec![[X_LO, -y_edge], [c, -y_edge], [c, y_edge], [X_LO, y_edge]])?;
    finish(p, alpha, domain, bottom, top, 2, None)
}

fn finish(
    p: CostExponent,
    alpha: f64,
    domain: Domain,
    a: Vector2<f64>,
    b: Vector2<f64>,
    crossings: usize,
    inflection: Option<f64>,
) -> Result<WitnessDomain> {
    let roots = count_chord_roots(p, alpha, a, b);
    if roots.len() != crossings {
        return Err(Error::ConstructionFailed(format!(
            "chord ({:.6}, {:.6}) -> ({:.6}, {:.6}) crosses the level curve {} times, expected {crossings}",
            a.x,
            a.y,
            b.x,
            b.y,
            roots.len()
        )));
    }
    let poly = domain.as_polygon().expect("polygon");
    if !poly.is_convex() {
        return Err(Error::ConstructionFailed("completed polygon is not convex".into()));
    }
    let sites = witness_sites(p.get(), alpha);
    check_interior(&domain, &sites)?;
    Ok(WitnessDomain {
        domain,
        sites,
        target_site: 0,
        expected_components: 2,
        p: p.get(),
        alpha,
        chord: Some([a, b]),
        chord_roots: roots,
        inflection,
    })
}

fn check_interior(domain: &Domain, sites: &[Site]) -> Result<()> {
    let poly = domain.as_polygon().expect("polygon");
    for s in sites {
        let v = s.position.as_plane().expect("planar site");
        let clear = poly.edges().all(|(a, b)| segment_distance(v, a, b) > 1e-6);
        if !poly.contains(v) || !clear {
            return Err(Error::ConstructionFailed(format!("site ({}, {}) is not strictly inside", v.x, v.y)));
        }
    }
    Ok(())
}

fn segment_distance(v: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((v - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (v - (a + ab * t)).norm()
}

/// Vertical interface of the quadratic case, `x = 2`.
const BUMP_LINE: f64 = 2.0;
const BASE_RIGHT: f64 = 1.75;
const BASE_HALF_HEIGHT: f64 = 2.0;
const BUMP_MARGIN: f64 = 0.25;

/// Rectangle left of the interface `x = 2` with `n_bumps` rectangular bumps
/// on its right edge, each crossing the interface. Bump `k` (from 1) has
/// height and overshoot `(kappa/2)^(k-1)` and is followed by a gap of
/// `2 (kappa/2)^k`. The cost exponent is 2.
pub fn build_bump_witness(n_bumps: usize, kappa: f64) -> Result<WitnessDomain> {
    if n_bumps == 0 {
        return Err(usage("bump witness needs at least one bump"));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(usage(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let p = 2.0;
    let alpha = 4.0 * BUMP_LINE;
    let r = kappa / 2.0;
    let top = BASE_HALF_HEIGHT - BUMP_MARGIN;
    let floor = -BASE_HALF_HEIGHT + BUMP_MARGIN;

    // (bottom, top, overshoot) from the top of the edge downwards
    let mut bumps = Vec::with_capacity(n_bumps);
    let mut y = top;
    for k in 0..n_bumps {
        let size = r.powi(k as i32);
        if k > 0 {
            y -= 2.0 * size;
        }
        let lo = y - size;
        if lo < floor {
            return Err(Error::GeometryOverflow(format!(
                "{n_bumps} bumps with kappa = {kappa} need {:.4} of a {:.4} edge; use a smaller kappa or fewer bumps",
                top - lo,
                top - floor
            )));
        }
        bumps.push((lo, y, size));
        y = lo;
    }

    let mut vertices = vec![[-BASE_HALF_HEIGHT, -BASE_HALF_HEIGHT], [BASE_RIGHT, -BASE_HALF_HEIGHT]];
    for &(lo, hi, size) in bumps.iter().rev() {
        let x = BUMP_LINE + size;
        vertices.extend([[BASE_RIGHT, lo], [x, lo], [x, hi], [BASE_RIGHT, hi]]);
    }
    vertices.extend([[BASE_RIGHT, BASE_HALF_HEIGHT], [-BASE_HALF_HEIGHT, BASE_HALF_HEIGHT]]);
    let domain = Domain::polygon(vertices)?;
    let sites = witness_sites(p, alpha);
    check_interior(&domain, &sites)?;
    Ok(WitnessDomain {
        domain,
        sites,
        target_site: 0,
        expected_components: n_bumps,
        p,
        alpha,
        chord: None,
        chord_roots: Vec::new(),
        inflection: None,
    })
}
