//! Kantorovich potentials `Phi_i(z) = -d(x_i, z)^p / p + b_i` and the induced
//! assignment of points to sites.

use nalgebra::Vector3;

use crate::domain::{raw_distance, Domain, Point};
use crate::error::{usage, Error, Result};
use crate::grid::Grid;
use crate::par::{map_range, Exec};

/// Exponent `p >= 1` of the cost `d^p / p`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct CostExponent(f64);

impl CostExponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(CostExponent(p))
        } else {
            Err(usage(format!("cost exponent must be a finite real >= 1, got {p}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `d^p / p`, computed as `exp(p ln d) / p` with `d = 0` mapped to 0.
    #[inline]
    pub fn cost(self, d: f64) -> f64 {
        if d <= 0.0 {
            0.0
        } else {
            (self.0 * d.ln()).exp() / self.0
        }
    }
}

/// A Dirac target `x_i` with mass `lambda_i` and dual weight `b_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub position: Point,
    pub target_mass: f64,
    pub weight: f64,
}

impl Site {
    pub fn new(position: Point, target_mass: f64, weight: f64) -> Self {
        Site { position, target_mass, weight }
    }

    pub fn with_weight(position: Point, weight: f64) -> Self {
        Site { position, target_mass: 0.0, weight }
    }
}

/// Result of the argmax: a site index, or a tie within tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Assignment {
    Site(usize),
    Boundary,
}

impl Assignment {
    pub fn site(self) -> Option<usize> {
        match self {
            Assignment::Site(i) => Some(i),
            Assignment::Boundary => None,
        }
    }
}

pub fn phi(site: &Site, z: &Point, p: CostExponent, domain: &Domain) -> Result<f64> {
    let d = domain.distance(&site.position, z)?;
    Ok(site.weight - p.cost(d))
}

/// Argmax of `Phi_i(z)`. With `tie_tol > 0` a gap of at most `tie_tol`
/// between the two largest values yields [`Assignment::Boundary`]; with
/// `tie_tol == 0` exact ties go to the smallest index.
pub fn assign(sites: &[Site], z: &Point, p: CostExponent, domain: &Domain, tie_tol: f64) -> Result<Assignment> {
    if sites.is_empty() {
        return Err(usage("assignment needs at least one site"));
    }
    if !(tie_tol >= 0.0) {
        return Err(usage(format!("tie tolerance must be >= 0, got {tie_tol}")));
    }
    let mut values = Vec::with_capacity(sites.len());
    for s in sites {
        values.push(phi(s, z, p, domain)?);
    }
    let (best, top, second) = best_two(&values);
    if tie_tol > 0.0 && top - second <= tie_tol {
        Ok(Assignment::Boundary)
    } else {
        Ok(Assignment::Site(best))
    }
}

/// `z` lies in `H^i_j = {Phi_i > Phi_j}` (strict).
pub fn in_halfspace(sites: &[Site], i: usize, j: usize, z: &Point, p: CostExponent, domain: &Domain) -> Result<bool> {
    if i == j {
        return Err(usage("halfspace H^i_j needs i != j"));
    }
    let n = sites.len();
    if i >= n || j >= n {
        return Err(usage(format!("site index out of range ({i}, {j}) for {n} sites")));
    }
    Ok(phi(&sites[i], z, p, domain)? > phi(&sites[j], z, p, domain)?)
}

/// Index of the largest value (smallest index on exact ties), the largest
/// value and the runner-up (`-inf` for a single value).
#[inline]
pub(crate) fn best_two(values: &[f64]) -> (usize, f64, f64) {
    let mut best = 0;
    let mut top = values[0];
    let mut second = f64::NEG_INFINITY;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > top {
            second = top;
            top = v;
            best = k;
        } else if v > second {
            second = v;
        }
    }
    (best, top, second)
}

/// Gradient of `Phi_i` at `z`, embedded in R³ (tangent to S² on the sphere).
/// Zero where the distance is not differentiable.
pub(crate) fn phi_gradient(site: &Point, z: &Point, p: f64) -> Vector3<f64> {
    match (site, z) {
        (Point::Plane(x), Point::Plane(z)) => {
            let r = z - x;
            let d = r.norm();
            if d == 0.0 {
                return Vector3::zeros();
            }
            let g = -(d.powf(p - 1.0)) * r / d;
            Vector3::new(g.x, g.y, 0.0)
        }
        (Point::Sphere(x), Point::Sphere(z)) => {
            let u = x - z * x.dot(z);
            let s = u.norm();
            if s < 1e-15 {
                return Vector3::zeros();
            }
            let d = crate::domain::sphere_angle(x, z);
            u * (d.powf(p - 1.0) / s)
        }
        _ => panic!("gradient between points of different kinds"),
    }
}

/// Checks that every site belongs to the domain's kind.
pub(crate) fn check_sites(domain: &Domain, sites: &[Site]) -> Result<()> {
    if sites.is_empty() {
        return Err(usage("at least one site is required"));
    }
    for s in sites {
        if s.position.kind() != domain.kind() {
            return Err(Error::KindMismatch { expected: domain.kind(), found: s.position.kind() });
        }
        if !s.position.is_finite() || !s.weight.is_finite() {
            return Err(usage("site position and weight must be finite"));
        }
    }
    Ok(())
}

/// Costs `d(x_i, z)^p / p` for every grid node and site, node-major.
///
/// Site positions are fixed during a weight solve, so the table turns every
/// potential evaluation into a subtraction.
#[derive(Clone, Debug)]
pub struct CostTable {
    n_sites: usize,
    costs: Vec<f64>,
}

impl CostTable {
    pub fn build(grid: &Grid, domain: &Domain, sites: &[Site], p: CostExponent, exec: Exec) -> Result<Self> {
        check_sites(domain, sites)?;
        if let Some(node) = grid.nodes().first() {
            if node.point.kind() != domain.kind() {
                return Err(Error::KindMismatch { expected: domain.kind(), found: node.point.kind() });
            }
        }
        let n_sites = sites.len();
        let rows = map_range(exec, grid.len(), |z| {
            let point = &grid.nodes()[z].point;
            sites.iter().map(|s| p.cost(raw_distance(&s.position, point))).collect::<Vec<_>>()
        });
        Ok(CostTable { n_sites, costs: rows.into_iter().flatten().collect() })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_nodes(&self) -> usize {
        self.costs.len().checked_div(self.n_sites).unwrap_or(0)
    }

    #[inline]
    pub fn row(&self, node: usize) -> &[f64] {
        &self.costs[node * self.n_sites..(node + 1) * self.n_sites]
    }

    /// Argmax site and value of `b_i - c_i(z)`, smallest index on ties.
    #[inline]
    pub fn best(&self, node: usize, weights: &[f64]) -> (usize, f64) {
        let row = self.row(node);
        let mut best = 0;
        let mut top = weights[0] - row[0];
        for k in 1..self.n_sites {
            let v = weights[k] - row[k];
            if v > top {
                top = v;
                best = k;
            }
        }
        (best, top)
    }

    /// Argmax, top value and runner-up value.
    #[inline]
    pub fn best_two(&self, node: usize, weights: &[f64]) -> (usize, f64, f64) {
        let row = self.row(node);
        let mut best = 0;
        let mut top = weights[0] - row[0];
        let mut second = f64::NEG_INFINITY;
        for k in 1..self.n_sites {
            let v = weights[k] - row[k];
            if v > top {
                second = top;
                top = v;
                best = k;
            } else if v > second {
                second = v;
            }
        }
        (best, top, second)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_polygon_grid;
    use std::f64::consts::PI;

    fn p(v: f64) -> CostExponent {
        CostExponent::new(v).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(CostExponent::new(0.5).is_err());
        assert!(CostExponent::new(f64::NAN).is_err());
        assert!(CostExponent::new(1.0).is_ok());
        assert_eq!(p(1.5).cost(0.0), 0.0);
        assert!((p(3.0).cost(2.0) - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn phi_examples() {
        let sq = Domain::unit_square();
        let z = Point::plane(0.3, 0.3);
        assert_eq!(phi(&Site::with_weight(z, 3.0), &z, p(2.0), &sq).unwrap(), 3.0);
        let s = Site::with_weight(Point::plane(1.0, 0.0), 0.0);
        assert_eq!(phi(&s, &Point::plane(0.0, 0.0), p(2.0), &sq).unwrap(), -0.5);

        let sph = Domain::unit_sphere();
        let x = Point::sphere(0.0, 0.0, 1.0);
        let v = phi(&Site::with_weight(x, 0.0), &sph.antipode(&x).unwrap(), p(1.0), &sph).unwrap();
        assert!((v + PI).abs() < 1e-15);
    }

    fn pair() -> Vec<Site> {
        vec![Site::with_weight(Point::plane(0.25, 0.5), 0.0), Site::with_weight(Point::plane(0.75, 0.5), 0.0)]
    }

    #[test]
    fn assign_examples() {
        let sq = Domain::unit_square();
        let mid = Point::plane(0.5, 0.1);
        assert_eq!(assign(&pair(), &mid, p(2.0), &sq, 0.0).unwrap(), Assignment::Site(0));
        assert_eq!(assign(&pair(), &Point::plane(0.7, 0.2), p(2.0), &sq, 0.0).unwrap(), Assignment::Site(1));
        assert_eq!(assign(&pair(), &mid, p(2.0), &sq, 1e-9).unwrap(), Assignment::Boundary);
        assert!(assign(&[], &mid, p(2.0), &sq, 0.0).is_err());
    }

    #[test]
    fn halfspace_examples() {
        let sq = Domain::unit_square();
        let sites = pair();
        assert!(in_halfspace(&sites, 0, 1, &Point::plane(0.1, 0.5), p(1.5), &sq).unwrap());
        assert!(!in_halfspace(&sites, 0, 1, &Point::plane(0.5, 0.9), p(1.5), &sq).unwrap());
        assert!(in_halfspace(&sites, 0, 0, &Point::plane(0.5, 0.9), p(1.5), &sq).is_err());
    }

    #[test]
    fn dominant_weight_wins_everywhere() {
        // Oracle: brute force over a 100x100 grid. In the unit square the cost
        // difference is at most diam^p / p = 2^{p/2} / p < 10.
        let sq = Domain::unit_square();
        let mut sites = pair();
        sites[0].weight = 10.0;
        for pe in [1.0, 1.5, 2.0, 3.0] {
            for a in 0..100 {
                for b in 0..100 {
                    let z = Point::plane(a as f64 / 99.0, b as f64 / 99.0);
                    assert!(in_halfspace(&sites, 0, 1, &z, p(pe), &sq).unwrap());
                }
            }
        }
    }

    #[test]
    fn weight_shift_leaves_assignment_unchanged() {
        let sq = Domain::unit_square();
        let grid = build_polygon_grid(&sq, 40).unwrap();
        let sites = vec![
            Site::with_weight(Point::plane(0.2, 0.3), 0.1),
            Site::with_weight(Point::plane(0.8, 0.4), -0.05),
            Site::with_weight(Point::plane(0.5, 0.9), 0.02),
        ];
        let shifted: Vec<Site> = sites.iter().map(|s| Site { weight: s.weight + 7.25, ..*s }).collect();
        for node in grid.nodes() {
            assert_eq!(
                assign(&sites, &node.point, p(1.5), &sq, 0.0).unwrap(),
                assign(&shifted, &node.point, p(1.5), &sq, 0.0).unwrap()
            );
        }
    }

    #[test]
    fn assignment_is_consistent_with_halfspaces() {
        let sq = Domain::unit_square();
        let grid = build_polygon_grid(&sq, 30).unwrap();
        let sites = vec![
            Site::with_weight(Point::plane(0.2, 0.3), 0.0),
            Site::with_weight(Point::plane(0.8, 0.4), 0.1),
            Site::with_weight(Point::plane(0.5, 0.9), -0.1),
        ];
        for node in grid.nodes() {
            let Assignment::Site(i) = assign(&sites, &node.point, p(3.0), &sq, 0.0).unwrap() else { unreachable!() };
            let tie = assign(&sites, &node.point, p(3.0), &sq, 1e-12).unwrap() == Assignment::Boundary;
            for j in (0..sites.len()).filter(|&j| j != i) {
                assert!(tie || in_halfspace(&sites, i, j, &node.point, p(3.0), &sq).unwrap());
            }
        }
    }

    #[test]
    fn p_one_domination_empties_the_cell() {
        // If Phi_j(x_i) > Phi_i(x_i) then, by the triangle inequality,
        // Phi_j > Phi_i everywhere.
        let sq = Domain::unit_square();
        let grid = build_polygon_grid(&sq, 50).unwrap();
        let xi = Point::plane(0.3, 0.6);
        let xj = Point::plane(0.7, 0.2);
        let dij = sq.distance(&xi, &xj).unwrap();
        let sites = vec![Site::with_weight(xi, 0.0), Site::with_weight(xj, dij + 1e-3)];
        assert!(phi(&sites[1], &xi, p(1.0), &sq).unwrap() > phi(&sites[0], &xi, p(1.0), &sq).unwrap());
        for node in grid.nodes() {
            assert!(in_halfspace(&sites, 1, 0, &node.point, p(1.0), &sq).unwrap());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = Point::plane(0.2, -0.4);
        let z = nalgebra::Vector2::new(0.9, 0.5);
        let pe = 1.7;
        let f = |v: nalgebra::Vector2<f64>| -p(pe).cost((v - x.as_plane().unwrap()).norm());
        let g = phi_gradient(&x, &Point::Plane(z), pe);
        let e = 1e-6;
        let gx = (f(z + nalgebra::Vector2::new(e, 0.0)) - f(z - nalgebra::Vector2::new(e, 0.0))) / (2.0 * e);
        let gy = (f(z + nalgebra::Vector2::new(0.0, e)) - f(z - nalgebra::Vector2::new(0.0, e))) / (2.0 * e);
        assert!((g.x - gx).abs() < 1e-8 && (g.y - gy).abs() < 1e-8);
    }
}
