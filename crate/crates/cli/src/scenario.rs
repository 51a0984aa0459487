//! JSON scenario files.

use std::fmt;
use std::path::Path;

use otess::{CostExponent, Domain, Point, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Tessellate,
    Solve,
    Analyze,
    Levelcurve,
    WitnessConvex,
    WitnessBumps,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Tessellate => "tessellate",
            Mode::Solve => "solve",
            Mode::Analyze => "analyze",
            Mode::Levelcurve => "levelcurve",
            Mode::WitnessConvex => "witness-convex",
            Mode::WitnessBumps => "witness-bumps",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    UnitSquare,
    Polygon { vertices: Vec<[f64; 2]> },
    Sphere { n_lat: usize, n_lon: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    /// `[x, y]` on a polygon, `[x, y, z]` (normalized) on the sphere.
    pub position: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMode {
    Uniform,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSites {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "uniform")]
    pub masses: MassMode,
}

fn uniform() -> MassMode {
    MassMode::Uniform
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-3
}

fn default_max_iter() -> usize {
    2000
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default = "default_pairs")]
    pub convexity_pairs: usize,
    #[serde(default = "default_pairs")]
    pub starlike_samples: usize,
    /// Random circles per site pair for the circle lemma (sphere, analyze).
    #[serde(default = "default_circles")]
    pub circles_per_pair: usize,
}

fn default_pairs() -> usize {
    200
}

fn default_circles() -> usize {
    20
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            convexity_pairs: default_pairs(),
            starlike_samples: default_pairs(),
            circles_per_pair: default_circles(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Planar lattice resolution; on the sphere it replaces `n_lat` (with
    /// `n_lon = 2 n_lat`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<SiteSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_sites: Option<RandomSites>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bumps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Seed for the sampling done by the checks.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: CheckSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn bad(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text).map_err(|e| bad(format!("{}: {}", path.display(), e.0)))
}

/// Sites of a planar or sphere run, with either all weights or all masses.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSet {
    pub sites: Vec<Site>,
    pub has_masses: bool,
}

impl Scenario {
    /// Parses and validates against the scenario's own `mode`.
    pub fn from_json(text: &str) -> Result<Scenario, InputError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| bad(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if let Some(mode) = s.mode {
            s.validate(mode)?;
        }
        Ok(s)
    }

    /// Mode given on the command line wins; a conflicting scenario mode is an error.
    pub fn resolve_mode(&self, requested: Option<Mode>) -> Result<Mode, InputError> {
        match (self.mode, requested) {
            (Some(a), Some(b)) if a != b => Err(bad(format!("scenario mode `{a}` conflicts with requested `{b}`"))),
            (Some(m), _) | (None, Some(m)) => Ok(m),
            (None, None) => Err(bad("no mode given in the scenario or on the command line")),
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<(), InputError> {
        if let Some(p) = self.p {
            CostExponent::new(p).map_err(|e| bad(format!("field `p`: {e}")))?;
        }
        if !(self.solver.tol > 0.0) {
            return Err(bad("field `solver.tol` must be positive"));
        }
        match mode {
            Mode::Tessellate | Mode::Solve | Mode::Analyze => {
                self.domain.as_ref().ok_or_else(|| bad("field `domain` is required"))?;
                self.need_p()?;
                if let Some(r) = self.resolution {
                    if r < 8 {
                        return Err(bad(format!("field `resolution` must be >= 8, got {r}")));
                    }
                }
                let set = self.site_set()?;
                match mode {
                    Mode::Tessellate if set.has_masses && self.sites.is_some() => {
                        Err(bad("tessellate mode needs weights for every site, not target masses"))
                    }
                    Mode::Solve if !set.has_masses => Err(bad("solve mode needs target masses for every site")),
                    _ => Ok(()),
                }
            }
            Mode::Levelcurve => {
                self.need_p()?;
                self.need_alpha()?;
                let y = self.y_max.ok_or_else(|| bad("field `y_max` is required"))?;
                if !(y > 0.0) {
                    return Err(bad("field `y_max` must be positive"));
                }
                if self.steps.is_some_and(|s| s < 32) {
                    return Err(bad("field `steps` must be >= 32"));
                }
                Ok(())
            }
            Mode::WitnessConvex => {
                let p = self.need_p()?;
                if !(p > 1.0) || p == 2.0 {
                    return Err(bad(format!("field `p`: convex witnesses need p > 1 and p != 2, got {p}")));
                }
                self.need_alpha()?;
                Ok(())
            }
            Mode::WitnessBumps => {
                if self.p.is_some_and(|p| p != 2.0) {
                    return Err(bad("field `p`: the bump witness is defined for p = 2"));
                }
                let n = self.n_bumps.ok_or_else(|| bad("field `n_bumps` is required"))?;
                if n == 0 {
                    return Err(bad("field `n_bumps` must be >= 1"));
                }
                let k = self.kappa.ok_or_else(|| bad("field `kappa` is required"))?;
                if !(k > 0.0 && k < 1.0) {
                    return Err(bad(format!("field `kappa` must lie in (0, 1), got {k}")));
                }
                Ok(())
            }
        }
    }

    fn need_p(&self) -> Result<f64, InputError> {
        self.p.ok_or_else(|| bad("field `p` is required"))
    }

    fn need_alpha(&self) -> Result<f64, InputError> {
        let a = self.alpha.ok_or_else(|| bad("field `alpha` is required"))?;
        if !(a > 0.0) || !a.is_finite() {
            return Err(bad("field `alpha` must be positive"));
        }
        Ok(a)
    }

    pub fn build_domain(&self) -> Result<Domain, InputError> {
        match self.domain.as_ref().ok_or_else(|| bad("field `domain` is required"))? {
            DomainSpec::UnitSquare => Ok(Domain::unit_square()),
            DomainSpec::Polygon { vertices } => {
                Domain::polygon(vertices.clone()).map_err(|e| bad(format!("field `domain.polygon`: {e}")))
            }
            DomainSpec::Sphere { .. } => Ok(Domain::unit_sphere()),
        }
    }

    pub fn site_set(&self) -> Result<SiteSet, InputError> {
        let domain = self.build_domain()?;
        match (&self.sites, &self.random_sites) {
            (Some(_), Some(_)) => Err(bad("give either `sites` or `random_sites`, not both")),
            (None, None) => Err(bad("one of `sites` or `random_sites` is required")),
            (Some(list), None) => explicit_sites(&domain, list),
            (None, Some(r)) => Ok(random_sites(&domain, r)),
        }
    }
}

fn explicit_sites(domain: &Domain, list: &[SiteSpec]) -> Result<SiteSet, InputError> {
    if list.is_empty() {
        return Err(bad("field `sites` must not be empty"));
    }
    let all_masses = list.iter().all(|s| s.target_mass.is_some());
    let all_weights = list.iter().all(|s| s.weight.is_some());
    if !all_masses && !all_weights {
        return Err(bad("every site needs a `weight`, or every site needs a `target_mass`"));
    }
    let mut sites = Vec::with_capacity(list.len());
    for (k, s) in list.iter().enumerate() {
        let position = match (domain, s.position.as_slice()) {
            (Domain::Polygon(_), [x, y]) => Point::plane(*x, *y),
            (Domain::UnitSphere, [x, y, z]) if (x * x + y * y + z * z) > 0.0 => Point::sphere(*x, *y, *z),
            _ => return Err(bad(format!("field `sites[{k}].position` has the wrong dimension for the domain"))),
        };
        if !position.is_finite() || !domain.contains(&position) {
            return Err(bad(format!("field `sites[{k}].position` lies outside the domain")));
        }
        if let Some(m) = s.target_mass {
            if !(m > 0.0) {
                return Err(bad(format!("field `sites[{k}].target_mass` must be positive")));
            }
        }
        sites.push(Site::new(position, s.target_mass.unwrap_or(0.0), s.weight.unwrap_or(0.0)));
    }
    if all_masses {
        let total: f64 = sites.iter().map(|s| s.target_mass).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(bad(format!("target masses must sum to 1, got {total}")));
        }
    }
    Ok(SiteSet { sites, has_masses: all_masses })
}

/// Uniform positions and (uniform or Dirichlet-like) masses from a seeded stream.
pub fn random_sites(domain: &Domain, spec: &RandomSites) -> SiteSet {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positions: Vec<Point> = (0..spec.count).map(|_| domain.sample_uniform(&mut rng)).collect();
    let raw: Vec<f64> = match spec.masses {
        MassMode::Uniform => vec![1.0; spec.count],
        MassMode::Random => (0..spec.count).map(|_| rng.gen_range(0.5..1.5)).collect(),
    };
    let total: f64 = raw.iter().sum();
    let sites = positions.into_iter().zip(raw).map(|(x, m)| Site::new(x, m / total, 0.0)).collect();
    SiteSet { sites, has_masses: true }
}
