//! Grid-level checks of the geometry of computed cells.
//!
//! Geometric slack is two grid spacings throughout: a point counts as being
//! in a cell if it is assigned to it or lies within `2h` of one of its nodes.

use std::collections::VecDeque;

use nalgebra::Vector3;
use rand::Rng;
use serde::Serialize;

use crate::domain::{raw_distance, Domain, DomainKind, Point};
use crate::error::{usage, Error, Result};
use crate::grid::Grid;
use crate::par::{compensated_sum, map_range, Exec};
use crate::potential::{check_sites, in_halfspace, phi_gradient, CostExponent, CostTable, Site};

/// Nodes assigned by argmax (lowest index on ties), with cell masses and a
/// first-order estimate of each node's distance to the nearest interface.
#[derive(Clone, Debug)]
pub struct Tessellation<'a> {
    grid: &'a Grid,
    domain: &'a Domain,
    sites: Vec<Site>,
    p: CostExponent,
    owner: Vec<u32>,
    masses: Vec<f64>,
    interface_distance: Vec<f64>,
}

impl<'a> Tessellation<'a> {
    pub fn new(grid: &'a Grid, domain: &'a Domain, sites: &[Site], p: CostExponent) -> Result<Self> {
        Self::with_exec(grid, domain, sites, p, Exec::default())
    }

    pub fn with_exec(grid: &'a Grid, domain: &'a Domain, sites: &[Site], p: CostExponent, exec: Exec) -> Result<Self> {
        let table = CostTable::build(grid, domain, sites, p, exec)?;
        let weights: Vec<f64> = sites.iter().map(|s| s.weight).collect();
        let per_node = map_range(exec, grid.len(), |z| {
            let (i, top) = table.best(z, &weights);
            let point = &grid.nodes()[z].point;
            let gi = phi_gradient(&sites[i].position, point, p.get());
            let row = table.row(z);
            let mut dist = f64::INFINITY;
            for (j, s) in sites.iter().enumerate() {
                if j == i {
                    continue;
                }
                let gap = top - (weights[j] - row[j]);
                let slope = (gi - phi_gradient(&s.position, point, p.get())).norm();
                let d = if gap <= 0.0 { 0.0 } else { gap / slope };
                dist = dist.min(d);
            }
            (i as u32, dist)
        });
        let (owner, interface_distance): (Vec<u32>, Vec<f64>) = per_node.into_iter().unzip();
        let mut acc = vec![Vec::new(); sites.len()];
        for (z, &i) in owner.iter().enumerate() {
            acc[i as usize].push(grid.nodes()[z].weight);
        }
        let masses = acc.into_iter().map(compensated_sum).collect();
        Ok(Tessellation { grid, domain, sites: sites.to_vec(), p, owner, masses, interface_distance })
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn domain(&self) -> &'a Domain {
        self.domain
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn p(&self) -> CostExponent {
        self.p
    }

    pub fn owner(&self, node: usize) -> usize {
        self.owner[node] as usize
    }

    pub fn owners(&self) -> &[u32] {
        &self.owner
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `min_j (Phi_i - Phi_j) / |grad Phi_i - grad Phi_j|` for the owner `i`.
    pub fn interface_distance(&self, node: usize) -> f64 {
        self.interface_distance[node]
    }

    /// Node lies within `2h` of a cell interface.
    pub fn in_boundary_band(&self, node: usize) -> bool {
        self.interface_distance[node] <= 2.0 * self.grid.spacing()
    }

    /// Argmax site at an arbitrary point, `None` outside the domain.
    pub fn assign_point(&self, z: &Point) -> Option<usize> {
        if !self.domain.contains(z) {
            return None;
        }
        let mut best = 0;
        let mut top = f64::NEG_INFINITY;
        for (k, s) in self.sites.iter().enumerate() {
            let v = s.weight - self.p.cost(raw_distance(&s.position, z));
            if v > top {
                top = v;
                best = k;
            }
        }
        Some(best)
    }

    /// `z` is assigned to `site` or lies within `2h` of one of its nodes.
    fn near_cell(&self, z: &Point, site: usize) -> bool {
        if self.assign_point(z) == Some(site) {
            return true;
        }
        self.grid.any_within(z, 2.0 * self.grid.spacing(), |s| self.owner[s] as usize == site)
    }

    fn check_index(&self, site: usize) -> Result<()> {
        if site >= self.sites.len() {
            return Err(usage(format!("site index {site} out of range for {} sites", self.sites.len())));
        }
        Ok(())
    }

    fn cell_nodes(&self, site: usize) -> Vec<usize> {
        (0..self.owner.len()).filter(|&z| self.owner[z] as usize == site).collect()
    }
}

/// Connected components of a node set under the grid adjacency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Components {
    /// All components.
    pub count: usize,
    /// Components containing at least one node outside the boundary band.
    /// Components made only of band nodes are lattice artifacts of size
    /// `O(h)` along an interface.
    pub resolved: usize,
    /// Component label per node, `u32::MAX` for nodes outside the set.
    #[serde(skip)]
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

pub const UNLABELED: u32 = u32::MAX;

fn label_set(grid: &Grid, member: impl Fn(usize) -> bool, core: impl Fn(usize) -> bool) -> Components {
    let n = grid.len();
    let mut labels = vec![UNLABELED; n];
    let mut sizes = Vec::new();
    let mut resolved = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != UNLABELED || !member(start) {
            continue;
        }
        let label = sizes.len() as u32;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        let mut has_core = false;
        while let Some(z) = queue.pop_front() {
            size += 1;
            has_core |= core(z);
            for &w in grid.neighbors(z) {
                let w = w as usize;
                if labels[w] == UNLABELED && member(w) {
                    labels[w] = label;
                    queue.push_back(w);
                }
            }
        }
        sizes.push(size);
        resolved += has_core as usize;
    }
    Components { count: sizes.len(), resolved, labels, sizes }
}

/// Components of the cell of `site` (0 for an empty cell).
pub fn label_components(tess: &Tessellation, site: usize) -> Result<Components> {
    tess.check_index(site)?;
    Ok(label_set(tess.grid, |z| tess.owner(z) == site, |z| !tess.in_boundary_band(z)))
}

/// Components of the nodes not assigned to `site`.
pub fn label_complement(tess: &Tessellation, site: usize) -> Result<Components> {
    tess.check_index(site)?;
    Ok(label_set(tess.grid, |z| tess.owner(z) != site, |z| !tess.in_boundary_band(z)))
}

/// Components of an arbitrary node set, every node counting as resolved.
pub fn label_nodes(grid: &Grid, member: impl Fn(usize) -> bool) -> Components {
    label_set(grid, member, |_| true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentCheck {
    pub pass: bool,
    /// The cell was empty and nothing was tested.
    pub vacuous: bool,
    pub tested: usize,
    pub violations: usize,
    pub skipped: usize,
}

const SEGMENT_SAMPLES: usize = 16;

/// Samples `n_pairs` node pairs of a planar cell and tests 16 points on each
/// connecting segment.
pub fn check_convexity<R: Rng + ?Sized>(
    tess: &Tessellation,
    site: usize,
    n_pairs: usize,
    rng: &mut R,
) -> Result<SegmentCheck> {
    tess.check_index(site)?;
    if tess.domain.kind() != DomainKind::EuclideanPolygon {
        return Err(usage("convexity check needs a planar domain"));
    }
    let cell = tess.cell_nodes(site);
    if cell.is_empty() {
        return Ok(SegmentCheck { pass: true, vacuous: true, tested: 0, violations: 0, skipped: 0 });
    }
    let nodes = tess.grid.nodes();
    let mut violations = 0;
    for _ in 0..n_pairs {
        let a = nodes[cell[rng.gen_range(0..cell.len())]].point.as_plane().unwrap();
        let b = nodes[cell[rng.gen_range(0..cell.len())]].point.as_plane().unwrap();
        let bad = (0..SEGMENT_SAMPLES).any(|k| {
            let t = (k as f64 + 0.5) / SEGMENT_SAMPLES as f64;
            !tess.near_cell(&Point::Plane(a + (b - a) * t), site)
        });
        violations += bad as usize;
    }
    Ok(SegmentCheck { pass: violations == 0, vacuous: false, tested: n_pairs, violations, skipped: 0 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarlikeCheck {
    pub pass: bool,
    /// The node nearest the site is assigned to it.
    pub fixed_point: bool,
    pub segments: SegmentCheck,
}

const WALK_STEPS: usize = 32;

/// Walks geodesics from the site to `n_samples` random nodes of its cell.
///
/// Walk points outside a polygonal domain are skipped, as are nodes within
/// `2h` of the site's antipode on the sphere.
pub fn check_starlike<R: Rng + ?Sized>(
    tess: &Tessellation,
    site: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<StarlikeCheck> {
    tess.check_index(site)?;
    let cell = tess.cell_nodes(site);
    if cell.is_empty() {
        let segments = SegmentCheck { pass: true, vacuous: true, tested: 0, violations: 0, skipped: 0 };
        return Ok(StarlikeCheck { pass: true, fixed_point: true, segments });
    }
    let x = tess.sites[site].position;
    let grid = tess.grid;
    let h = grid.spacing();
    let fixed_point = grid.nearest_node(&x).is_some_and(|z| tess.owner(z) == site);

    let mut violations = 0;
    let mut skipped = 0;
    for _ in 0..n_samples {
        let target = grid.nodes()[cell[rng.gen_range(0..cell.len())]].point;
        if tess.domain.kind() == DomainKind::UnitSphere && std::f64::consts::PI - raw_distance(&x, &target) < 2.0 * h {
            skipped += 1;
            continue;
        }
        let mut bad = false;
        for k in 0..WALK_STEPS {
            let t = k as f64 / (WALK_STEPS - 1) as f64;
            let z = match tess.domain.geodesic_point(&x, &target, t) {
                Ok(z) => z,
                Err(Error::NonUniqueGeodesic) => {
                    skipped += 1;
                    break;
                }
                Err(e) => return Err(e),
            };
            if !tess.domain.contains(&z) {
                continue;
            }
            if !tess.near_cell(&z, site) {
                bad = true;
                break;
            }
        }
        violations += bad as usize;
    }
    let segments = SegmentCheck { pass: violations == 0, vacuous: false, tested: n_samples, violations, skipped };
    Ok(StarlikeCheck { pass: violations == 0 && fixed_point, fixed_point, segments })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereCell {
    pub site: usize,
    pub components: usize,
    pub complement_components: usize,
    pub resolved_components: usize,
    pub resolved_complement_components: usize,
}

impl SphereCell {
    /// Connected with connected complement (complement empty for a lone cell).
    pub fn simply_connected(&self, nonempty_cells: usize) -> bool {
        let want = usize::from(nonempty_cells > 1);
        self.components == 1 && self.complement_components == want
    }

    pub fn simply_connected_resolved(&self, nonempty_cells: usize) -> bool {
        let want = usize::from(nonempty_cells > 1);
        self.resolved_components == 1 && self.resolved_complement_components == want
    }
}

/// Component counts of every nonempty cell and of its complement.
pub fn check_sphere_connectedness(tess: &Tessellation) -> Result<Vec<SphereCell>> {
    if tess.domain.kind() != DomainKind::UnitSphere {
        return Err(usage("sphere connectedness check needs the sphere domain"));
    }
    let mut out = Vec::new();
    for site in 0..tess.sites.len() {
        if tess.masses[site] == 0.0 {
            continue;
        }
        let cell = label_components(tess, site)?;
        let rest = label_complement(tess, site)?;
        out.push(SphereCell {
            site,
            components: cell.count,
            complement_components: rest.count,
            resolved_components: cell.resolved,
            resolved_complement_components: rest.resolved,
        });
    }
    Ok(out)
}

/// The circle `{z : d(q, z) = r}` on the sphere, sampled at equal angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleSpec {
    center: Vector3<f64>,
    radius: f64,
    n_samples: usize,
}

impl CircleSpec {
    pub fn new(center: Point, radius: f64, n_samples: usize) -> Result<Self> {
        let Point::Sphere(c) = center else {
            return Err(Error::KindMismatch { expected: DomainKind::UnitSphere, found: center.kind() });
        };
        let pi = std::f64::consts::PI;
        if !(radius >= 1e-6 && radius <= pi - 1e-6) {
            return Err(usage(format!("circle radius must lie in [1e-6, pi - 1e-6], got {radius}")));
        }
        if n_samples < 3 {
            return Err(usage("circle needs at least 3 samples"));
        }
        Ok(CircleSpec { center: c, radius, n_samples })
    }

    pub fn with_samples(self, n_samples: usize) -> Self {
        CircleSpec { n_samples, ..self }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Point at angle `2 pi k / n_samples`.
    pub fn point(&self, k: usize) -> Point {
        let q = self.center;
        let helper = if q.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (helper - q * q.dot(&helper)).normalize();
        let e2 = q.cross(&e1);
        let a = 2.0 * std::f64::consts::PI * k as f64 / self.n_samples as f64;
        let (s, c) = self.radius.sin_cos();
        Point::Sphere(q * c + (e1 * a.cos() + e2 * a.sin()) * s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleCheck {
    pub pass: bool,
    /// Cyclic changes of membership along the final sampling.
    pub transitions: usize,
    pub resampled: bool,
}

fn circle_transitions(sites: &[Site], i: usize, j: usize, circle: &CircleSpec, p: CostExponent) -> Result<usize> {
    let sphere = Domain::UnitSphere;
    let inside = (0..circle.n_samples)
        .map(|k| in_halfspace(sites, i, j, &circle.point(k), p, &sphere))
        .collect::<Result<Vec<bool>>>()?;
    let n = inside.len();
    Ok((0..n).filter(|&k| inside[k] != inside[(k + 1) % n]).count())
}

/// `C ∩ H^i_j` is empty, the whole circle, or a single arc. A failure is
/// re-tested once at four times the sampling density.
pub fn check_circle_lemma(
    sites: &[Site],
    i: usize,
    j: usize,
    circle: &CircleSpec,
    p: CostExponent,
) -> Result<CircleCheck> {
    check_sites(&Domain::UnitSphere, sites)?;
    let t = circle_transitions(sites, i, j, circle, p)?;
    if t <= 2 {
        return Ok(CircleCheck { pass: true, transitions: t, resampled: false });
    }
    let fine = circle.with_samples(circle.n_samples * 4);
    let t = circle_transitions(sites, i, j, &fine, p)?;
    Ok(CircleCheck { pass: t <= 2, transitions: t, resampled: true })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AntipodeCheck {
    pub pass: bool,
    /// The antipode of `x_i` lies in `H^i_j`.
    pub premise: bool,
    pub violations: usize,
}

const TIE_BAND: f64 = 1e-12;

/// If the antipode of `x_i` lies in `H^i_j`, every grid node must as well
/// (up to ties within 1e-12).
pub fn check_antipode_lemma(sites: &[Site], i: usize, j: usize, grid: &Grid, p: CostExponent) -> Result<AntipodeCheck> {
    let sphere = Domain::UnitSphere;
    check_sites(&sphere, sites)?;
    let anti = sphere.antipode(&sites.get(i).ok_or_else(|| usage("site index out of range"))?.position)?;
    if !in_halfspace(sites, i, j, &anti, p, &sphere)? {
        return Ok(AntipodeCheck { pass: true, premise: false, violations: 0 });
    }
    let (si, sj) = (&sites[i], &sites[j]);
    let violations = grid
        .nodes()
        .iter()
        .filter(|n| {
            let diff = (si.weight - p.cost(raw_distance(&si.position, &n.point)))
                - (sj.weight - p.cost(raw_distance(&sj.position, &n.point)));
            diff < -TIE_BAND
        })
        .count();
    Ok(AntipodeCheck { pass: violations == 0, premise: true, violations })
}

/// Quadrature mass of nodes whose two largest potentials differ by at most
/// `p diam^(p-1) 2h`, i.e. a band of width about `2h` around the interfaces.
pub fn boundary_measure_estimate(grid: &Grid, domain: &Domain, sites: &[Site], p: CostExponent) -> Result<f64> {
    let table = CostTable::build(grid, domain, sites, p, Exec::default())?;
    if sites.len() < 2 {
        return Ok(0.0);
    }
    let pv = p.get();
    let band = pv * domain.diameter().powf(pv - 1.0) * 2.0 * grid.spacing();
    let weights: Vec<f64> = sites.iter().map(|s| s.weight).collect();
    let per_node = map_range(Exec::default(), grid.len(), |z| {
        let (_, top, second) = table.best_two(z, &weights);
        if top - second <= band {
            grid.nodes()[z].weight
        } else {
            0.0
        }
    });
    Ok(compensated_sum(per_node))
}
