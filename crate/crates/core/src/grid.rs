//! Quadrature grids for the normalized volume measure, with 4-neighbor
//! adjacency used for component labeling.

use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::domain::{raw_distance, Domain, Point};
use crate::error::{usage, Error, Result};
use crate::par::{compensated_sum, map_range, Exec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridNode {
    pub point: Point,
    pub weight: f64,
}

const EMPTY: u32 = u32::MAX;

/// Index structure behind a grid, used for neighborhood queries and rendering.
#[derive(Clone, Debug, PartialEq)]
pub enum Lattice {
    /// Square lattice `origin + (i, j) * h`; `slots[j * nx + i]` is the node
    /// index or empty when the lattice point is outside the polygon.
    Planar { origin: Vector2<f64>, nx: usize, ny: usize, slots: Vec<u32> },
    /// Cell-centered latitude/longitude lattice, node `k * n_lon + j`.
    Sphere { n_lat: usize, n_lon: usize },
}

#[derive(Clone, Debug)]
pub struct Grid {
    nodes: Vec<GridNode>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    spacing: f64,
    lattice: Lattice,
}

impl Grid {
    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Characteristic spacing `h`: lattice step, or the largest angular step.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Area (planar) or solid angle (sphere) of the lattice cell around a node.
    pub fn node_area(&self, node: usize) -> f64 {
        match &self.lattice {
            Lattice::Planar { .. } => self.spacing * self.spacing,
            Lattice::Sphere { n_lat, n_lon } => {
                let k = node / n_lon;
                let dlat = PI / *n_lat as f64;
                let dlon = 2.0 * PI / *n_lon as f64;
                latitude(k, *n_lat).cos() * dlat * dlon
            }
        }
    }

    /// Largest quadrature weight per unit area over all nodes.
    pub fn max_density(&self) -> f64 {
        (0..self.len()).map(|i| self.nodes[i].weight / self.node_area(i)).fold(0.0, f64::max)
    }

    /// Calls `f` for every node within geodesic distance `radius` of `point`.
    pub fn for_each_within(&self, point: &Point, radius: f64, mut f: impl FnMut(usize)) {
        match (&self.lattice, point) {
            (Lattice::Planar { origin, nx, ny, slots }, Point::Plane(p)) => {
                let h = self.spacing;
                let lo = (p - origin).add_scalar(-radius) / h;
                let hi = (p - origin).add_scalar(radius) / h;
                let i0 = lo.x.ceil().max(0.0) as usize;
                let j0 = lo.y.ceil().max(0.0) as usize;
                if hi.x < 0.0 || hi.y < 0.0 {
                    return;
                }
                let i1 = (hi.x.floor() as usize).min(nx.saturating_sub(1));
                let j1 = (hi.y.floor() as usize).min(ny.saturating_sub(1));
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        let s = slots[j * nx + i];
                        if s != EMPTY && raw_distance(&self.nodes[s as usize].point, point) <= radius {
                            f(s as usize);
                        }
                    }
                }
            }
            (Lattice::Sphere { n_lat, n_lon }, Point::Sphere(_)) => {
                let (lat, lon) = point.lat_lon().expect("sphere point");
                let dlat = PI / *n_lat as f64;
                let dlon = 2.0 * PI / *n_lon as f64;
                let k_lo = (((lat - radius + PI / 2.0) / dlat - 0.5).floor().max(0.0)) as usize;
                let k_hi = (((lat + radius + PI / 2.0) / dlat - 0.5).ceil().max(0.0) as usize).min(n_lat - 1);
                for k in k_lo..=k_hi {
                    let row_lat = latitude(k, *n_lat);
                    let widest = row_lat.abs().max(lat.abs()) + dlat;
                    let full = widest + radius >= PI / 2.0 - 1e-12 || radius >= PI / 2.0;
                    let half_width = if full { PI } else { (radius.sin() / widest.cos()).min(1.0).asin() + dlon };
                    if half_width >= PI - dlon {
                        for j in 0..*n_lon {
                            let s = k * n_lon + j;
                            if raw_distance(&self.nodes[s].point, point) <= radius {
                                f(s);
                            }
                        }
                    } else {
                        let c = (lon / dlon - 0.5).round() as i64;
                        let w = (half_width / dlon).ceil() as i64;
                        for jj in (c - w)..=(c + w) {
                            let j = jj.rem_euclid(*n_lon as i64) as usize;
                            let s = k * n_lon + j;
                            if raw_distance(&self.nodes[s].point, point) <= radius {
                                f(s);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }

    /// True if some node accepted by `keep` lies within `radius` of `point`.
    pub fn any_within(&self, point: &Point, radius: f64, keep: impl Fn(usize) -> bool) -> bool {
        let mut found = false;
        self.for_each_within(point, radius, |s| found |= keep(s));
        found
    }

    /// Node closest to `point`; `None` on an empty grid or a kind mismatch.
    pub fn nearest_node(&self, point: &Point) -> Option<usize> {
        if self.is_empty() || point.kind() != self.nodes[0].point.kind() {
            return None;
        }
        let mut radius = self.spacing;
        let limit = match self.lattice {
            Lattice::Planar { nx, ny, .. } => self.spacing * (nx + ny + 2) as f64 * 2.0,
            Lattice::Sphere { .. } => 2.0 * PI,
        };
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.for_each_within(point, radius, |s| {
                let d = raw_distance(&self.nodes[s].point, point);
                if best.is_none_or(|(b, bd)| d < bd || (d == bd && s < b)) {
                    best = Some((s, d));
                }
            });
            if let Some((s, _)) = best {
                return Some(s);
            }
            if radius > limit {
                return (0..self.len()).min_by(|&a, &b| {
                    raw_distance(&self.nodes[a].point, point).total_cmp(&raw_distance(&self.nodes[b].point, point))
                });
            }
            radius *= 2.0;
        }
    }
}

fn latitude(k: usize, n_lat: usize) -> f64 {
    -PI / 2.0 + (k as f64 + 0.5) * PI / n_lat as f64
}

fn longitude(j: usize, n_lon: usize) -> f64 {
    (j as f64 + 0.5) * 2.0 * PI / n_lon as f64
}

fn normalize_weights(raw: &[f64]) -> Vec<f64> {
    let total = compensated_sum(raw.iter().copied());
    raw.iter().map(|w| w / total).collect()
}

fn into_csr(adjacency: Vec<Vec<u32>>) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = Vec::with_capacity(adjacency.len() + 1);
    let mut neighbors = Vec::with_capacity(adjacency.iter().map(Vec::len).sum());
    offsets.push(0);
    for mut list in adjacency {
        list.sort_unstable();
        list.dedup();
        neighbors.extend(list);
        offsets.push(neighbors.len());
    }
    (offsets, neighbors)
}

/// Square lattice over the bounding box with step `max side / resolution`,
/// restricted to lattice points inside the polygon.
pub fn build_polygon_grid(domain: &Domain, resolution: usize) -> Result<Grid> {
    build_polygon_grid_with(domain, resolution, Exec::default())
}

pub fn build_polygon_grid_with(domain: &Domain, resolution: usize, exec: Exec) -> Result<Grid> {
    let poly = domain.as_polygon().ok_or_else(|| usage("polygon grid needs a polygon domain"))?;
    if resolution < 8 {
        return Err(usage(format!("resolution must be >= 8, got {resolution}")));
    }
    if poly.area() < 1e-12 {
        return Err(Error::DegeneratePolygon(format!("area {:e}", poly.area())));
    }
    let (lo, hi) = poly.bbox();
    let side = (hi - lo).amax();
    let h = side / resolution as f64;
    let count = |len: f64| (len / h + 1e-9).floor() as usize + 1;
    let (nx, ny) = (count(hi.x - lo.x), count(hi.y - lo.y));
    if nx.checked_mul(ny).is_none_or(|n| n >= EMPTY as usize) {
        return Err(usage("grid too large"));
    }

    let inside = map_range(exec, nx * ny, |s| {
        let (i, j) = (s % nx, s / nx);
        poly.contains(lo + Vector2::new(i as f64 * h, j as f64 * h))
    });
    let mut slots = vec![EMPTY; nx * ny];
    let mut nodes = Vec::new();
    for (s, &keep) in inside.iter().enumerate() {
        if keep {
            slots[s] = nodes.len() as u32;
            let (i, j) = (s % nx, s / nx);
            nodes.push(Point::Plane(lo + Vector2::new(i as f64 * h, j as f64 * h)));
        }
    }
    if nodes.is_empty() {
        return Err(Error::DegeneratePolygon("no lattice point inside the polygon".into()));
    }

    let mut adjacency = vec![Vec::with_capacity(4); nodes.len()];
    for j in 0..ny {
        for i in 0..nx {
            let a = slots[j * nx + i];
            if a == EMPTY {
                continue;
            }
            if i + 1 < nx && slots[j * nx + i + 1] != EMPTY {
                let b = slots[j * nx + i + 1];
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
            if j + 1 < ny && slots[(j + 1) * nx + i] != EMPTY {
                let b = slots[(j + 1) * nx + i];
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
        }
    }
    let (offsets, neighbors) = into_csr(adjacency);
    let weights = normalize_weights(&vec![h * h; nodes.len()]);
    let nodes = nodes.into_iter().zip(weights).map(|(point, weight)| GridNode { point, weight }).collect();
    Ok(Grid { nodes, offsets, neighbors, spacing: h, lattice: Lattice::Planar { origin: lo, nx, ny, slots } })
}

/// Cell-centered latitude/longitude lattice with `cos(latitude)` weights.
///
/// Nodes are 4-connected with longitude wraparound; each node of the two
/// polar rows is also linked across the pole to the node at the opposite
/// longitude.
pub fn build_sphere_grid(n_lat: usize, n_lon: usize) -> Result<Grid> {
    if n_lat < 8 || n_lon < 16 {
        return Err(usage(format!("sphere grid needs n_lat >= 8 and n_lon >= 16, got {n_lat} x {n_lon}")));
    }
    let n = n_lat * n_lon;
    let mut nodes = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for k in 0..n_lat {
        let lat = latitude(k, n_lat);
        for j in 0..n_lon {
            nodes.push(Point::from_lat_lon(lat, longitude(j, n_lon)));
            raw.push(lat.cos());
        }
    }
    let idx = |k: usize, j: usize| (k * n_lon + j) as u32;
    let mut adjacency = vec![Vec::with_capacity(5); n];
    for k in 0..n_lat {
        for j in 0..n_lon {
            let a = idx(k, j) as usize;
            let east = idx(k, (j + 1) % n_lon);
            adjacency[a].push(east);
            adjacency[east as usize].push(a as u32);
            if k + 1 < n_lat {
                let north = idx(k + 1, j);
                adjacency[a].push(north);
                adjacency[north as usize].push(a as u32);
            }
            if k == 0 || k == n_lat - 1 {
                let across = idx(k, (j + n_lon / 2) % n_lon);
                adjacency[a].push(across);
                adjacency[across as usize].push(a as u32);
            }
        }
    }
    let (offsets, neighbors) = into_csr(adjacency);
    let weights = normalize_weights(&raw);
    let nodes = nodes.into_iter().zip(weights).map(|(point, weight)| GridNode { point, weight }).collect();
    let spacing = (PI / n_lat as f64).max(2.0 * PI / n_lon as f64);
    Ok(Grid { nodes, offsets, neighbors, spacing, lattice: Lattice::Sphere { n_lat, n_lon } })
}
