//! Ambient spaces: planar simple polygons and the unit sphere S².

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::Rng;

use crate::error::{usage, Error, Result};

/// Tolerance on the unit norm of sphere points.
pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainKind {
    EuclideanPolygon,
    UnitSphere,
}

/// A point of a domain: planar coordinates or a unit 3-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    Plane(Vector2<f64>),
    Sphere(Vector3<f64>),
}

impl Point {
    pub fn plane(x: f64, y: f64) -> Self {
        Point::Plane(Vector2::new(x, y))
    }

    /// Normalizes `(x, y, z)` onto the unit sphere.
    ///
    /// Panics on the zero vector.
    pub fn sphere(x: f64, y: f64, z: f64) -> Self {
        let v = Vector3::new(x, y, z);
        let n = v.norm();
        assert!(n > 0.0 && n.is_finite(), "cannot normalize {v:?}");
        Point::Sphere(v / n)
    }

    /// Point at latitude/longitude (radians).
    pub fn from_lat_lon(lat: f64, lon: f64) -> Self {
        Point::Sphere(Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()))
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            Point::Plane(_) => DomainKind::EuclideanPolygon,
            Point::Sphere(_) => DomainKind::UnitSphere,
        }
    }

    pub fn as_plane(&self) -> Option<Vector2<f64>> {
        match self {
            Point::Plane(v) => Some(*v),
            Point::Sphere(_) => None,
        }
    }

    pub fn as_sphere(&self) -> Option<Vector3<f64>> {
        match self {
            Point::Sphere(v) => Some(*v),
            Point::Plane(_) => None,
        }
    }

    /// Latitude and longitude of a sphere point, longitude in `[0, 2π)`.
    pub fn lat_lon(&self) -> Option<(f64, f64)> {
        self.as_sphere().map(|v| {
            let lat = v.z.clamp(-1.0, 1.0).asin();
            let lon = v.y.atan2(v.x).rem_euclid(2.0 * PI);
            (lat, lon)
        })
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Point::Plane(v) => v.iter().all(|c| c.is_finite()),
            Point::Sphere(v) => v.iter().all(|c| c.is_finite()),
        }
    }
}

/// A simple polygon with counterclockwise vertices and positive area.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vector2<f64>>,
    area: f64,
}

impl Polygon {
    /// Validates a vertex ring. Clockwise input is reversed.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("need at least 3 vertices, got {}", vertices.len())));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let mut vertices: Vec<Vector2<f64>> = vertices.into_iter().map(|[x, y]| Vector2::new(x, y)).collect();
        let signed = signed_area(&vertices);
        if signed.abs() < 1e-12 {
            return Err(Error::DegeneratePolygon(format!("area {signed:e} is below 1e-12")));
        }
        if signed < 0.0 {
            vertices.reverse();
        }
        if let Some((a, b)) = first_self_intersection(&vertices) {
            return Err(Error::DegeneratePolygon(format!("edges {a} and {b} intersect")));
        }
        Ok(Polygon { vertices, area: signed.abs() })
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Edges as `(start, end)` pairs, closing the ring.
    pub fn edges(&self) -> impl Iterator<Item = (Vector2<f64>, Vector2<f64>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bbox(&self) -> (Vector2<f64>, Vector2<f64>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// True when every turn is a left turn (collinear vertices allowed).
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross(b - a, c - b) >= -1e-12 * (b - a).norm() * (c - b).norm()
        })
    }

    /// Ray-casting membership; points on the boundary count as inside.
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        let (lo, hi) = self.bbox();
        let scale = 1.0 + (hi - lo).amax();
        let eps = 1e-12 * scale;
        if p.x < lo.x - eps || p.x > hi.x + eps || p.y < lo.y - eps || p.y > hi.y + eps {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if segment_distance(p, a, b) <= eps {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// The ambient space `M`.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Polygon(Polygon),
    UnitSphere,
}

impl Domain {
    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Polygon::new(vertices).map(Domain::Polygon)
    }

    pub fn unit_square() -> Self {
        Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).expect("unit square is valid")
    }

    pub fn unit_sphere() -> Self {
        Domain::UnitSphere
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::Polygon(_) => DomainKind::EuclideanPolygon,
            Domain::UnitSphere => DomainKind::UnitSphere,
        }
    }

    pub fn as_polygon(&self) -> Option<&Polygon> {
        match self {
            Domain::Polygon(p) => Some(p),
            Domain::UnitSphere => None,
        }
    }

    fn check_kind(&self, p: &Point) -> Result<()> {
        if p.kind() == self.kind() {
            Ok(())
        } else {
            Err(Error::KindMismatch { expected: self.kind(), found: p.kind() })
        }
    }

    /// Geodesic distance: Euclidean norm on polygons, great-circle angle on S².
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        self.check_kind(a)?;
        self.check_kind(b)?;
        Ok(raw_distance(a, b))
    }

    /// Point at fraction `t` along the minimizing geodesic from `a` to `b`.
    pub fn geodesic_point(&self, a: &Point, b: &Point, t: f64) -> Result<Point> {
        self.check_kind(a)?;
        self.check_kind(b)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(usage(format!("geodesic parameter {t} outside [0, 1]")));
        }
        match (a, b) {
            (Point::Plane(u), Point::Plane(v)) => Ok(Point::Plane(u + (v - u) * t)),
            (Point::Sphere(u), Point::Sphere(v)) => slerp(u, v, t).map(Point::Sphere),
            _ => unreachable!("kinds checked above"),
        }
    }

    pub fn antipode(&self, a: &Point) -> Result<Point> {
        match (self, a) {
            (Domain::UnitSphere, Point::Sphere(v)) => Ok(Point::Sphere(-v)),
            (Domain::UnitSphere, _) => Err(Error::KindMismatch { expected: DomainKind::UnitSphere, found: a.kind() }),
            (Domain::Polygon(_), _) => Err(usage("antipode is only defined on the sphere")),
        }
    }

    /// Closed-set membership. Always true for unit vectors on the sphere.
    pub fn contains(&self, a: &Point) -> bool {
        match (self, a) {
            (Domain::Polygon(poly), Point::Plane(v)) => poly.contains(*v),
            (Domain::UnitSphere, Point::Sphere(v)) => (v.norm() - 1.0).abs() <= UNIT_NORM_TOL,
            _ => false,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Polygon(p) => p.diameter(),
            Domain::UnitSphere => PI,
        }
    }

    /// Uniform sample from the normalized volume measure.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Domain::Polygon(poly) => {
                let (lo, hi) = poly.bbox();
                loop {
                    let p = Vector2::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
                    if poly.contains(p) {
                        return Point::Plane(p);
                    }
                }
            }
            Domain::UnitSphere => {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let lon: f64 = rng.gen_range(0.0..2.0 * PI);
                let r = (1.0 - z * z).max(0.0).sqrt();
                Point::sphere(r * lon.cos(), r * lon.sin(), z)
            }
        }
    }
}

/// Distance between two points of the same kind, without the kind check.
pub(crate) fn raw_distance(a: &Point, b: &Point) -> f64 {
    match (a, b) {
        (Point::Plane(u), Point::Plane(v)) => (u - v).norm(),
        (Point::Sphere(u), Point::Sphere(v)) => sphere_angle(u, v),
        _ => panic!("distance between points of different kinds"),
    }
}

/// Great-circle angle. Uses atan2 of the cross and dot products, which agrees
/// with the clamped arccos of the dot product and stays accurate near 0 and π.
pub(crate) fn sphere_angle(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let dot = u.dot(v).clamp(-1.0, 1.0);
    let cross = u.cross(v).norm();
    cross.atan2(dot)
}

fn slerp(u: &Vector3<f64>, v: &Vector3<f64>, t: f64) -> Result<Vector3<f64>> {
    let theta = sphere_angle(u, v);
    if theta < 1e-15 {
        return Ok(*u);
    }
    let sin_theta = theta.sin();
    if PI - theta < 1e-12 || sin_theta < 1e-12 {
        return Err(Error::NonUniqueGeodesic);
    }
    let w = u * ((1.0 - t) * theta).sin() / sin_theta + v * (t * theta).sin() / sin_theta;
    Ok(w.normalize())
}

pub(crate) fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn signed_area(v: &[Vector2<f64>]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn segments_intersect(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    // Collinear touching counts as an intersection for non-adjacent edges.
    let on = |p: Vector2<f64>, q: Vector2<f64>, r: Vector2<f64>, o: f64| {
        o == 0.0 && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

fn first_self_intersection(v: &[Vector2<f64>]) -> Option<(usize, usize)> {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Some((i, j));
            }
        }
    }
    None
}
