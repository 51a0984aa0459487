use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::Vector2;
use otess::bisector::{
    build_bump_witness, build_convex_witness, eta_second, find_inflection, level_x, m_value, trace_level_curve,
    LevelCurve, WitnessDomain,
};
use otess::grid::build_polygon_grid_with;
use otess::par::Exec;
use otess::render::{render_svg, Overlay};
use otess::topology::{
    boundary_measure_estimate, check_antipode_lemma, check_circle_lemma, check_convexity, check_sphere_connectedness,
    check_starlike, label_components, CircleSpec,
};
use otess::{build_sphere_grid, CostExponent, Domain, Error, Grid, Point, Site, Tessellation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::*;
use crate::scenario::{DomainSpec, InputError, Mode, Scenario};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InputError = 2,
    SolverFailure = 3,
    CheckFailure = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub enum RunError {
    Input(String),
    /// The pipeline could not produce a report.
    Failed(String),
}

impl RunError {
    pub fn status(&self) -> ExitStatus {
        match self {
            RunError::Input(_) => ExitStatus::InputError,
            RunError::Failed(_) => ExitStatus::CheckFailure,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Input(m) => write!(f, "input error: {m}"),
            RunError::Failed(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<InputError> for RunError {
    fn from(e: InputError) -> Self {
        RunError::Input(e.0)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(_) | Error::DegeneratePolygon(_) | Error::KindMismatch { .. } | Error::GeometryOverflow(_) => {
                RunError::Input(e.to_string())
            }
            _ => RunError::Failed(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    /// Also write `nodes.csv` with every grid node and its owner.
    pub nodes_csv: bool,
    pub exec: Exec,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub svg: String,
    pub status: ExitStatus,
    pub written: Vec<PathBuf>,
}

/// Applies overrides, validates, runs the mode pipeline and writes artifacts
/// to `opts.out_dir` when set.
pub fn run(scenario: &Scenario, mode: Option<Mode>, opts: &RunOptions) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let mut scenario = scenario.clone();
    let mode = scenario.resolve_mode(mode)?;
    scenario.mode = Some(mode);
    if let Some(r) = opts.resolution {
        match &mut scenario.domain {
            Some(DomainSpec::Sphere { n_lat, n_lon }) => {
                *n_lat = r;
                *n_lon = 2 * r;
            }
            _ => scenario.resolution = Some(r),
        }
    }
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
        if let Some(rs) = &mut scenario.random_sites {
            rs.seed = seed;
        }
    }
    scenario.validate(mode)?;

    let mut artifacts = Artifacts::default();
    let mut report = match mode {
        Mode::Tessellate | Mode::Solve | Mode::Analyze => run_cells(&scenario, mode, opts.exec, &mut artifacts)?,
        Mode::Levelcurve => run_levelcurve(&scenario, opts.exec, &mut artifacts)?,
        Mode::WitnessConvex | Mode::WitnessBumps => run_witness(&scenario, mode, opts.exec, &mut artifacts)?,
    };
    report.timing.total_ms = start.elapsed().as_secs_f64() * 1e3;

    let solver_failed = report.solver.as_ref().is_some_and(|s| !s.converged);
    let status = if solver_failed {
        ExitStatus::SolverFailure
    } else if !report.all_checks_pass() {
        ExitStatus::CheckFailure
    } else {
        ExitStatus::Success
    };

    let mut written = Vec::new();
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(|e| RunError::Input(format!("{}: {e}", dir.display())))?;
        let mut write = |name: &str, text: &str| -> Result<(), RunError> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| RunError::Failed(format!("{}: {e}", path.display())))?;
            written.push(path);
            Ok(())
        };
        write("report.json", &report.to_json())?;
        write("figure.svg", &artifacts.svg)?;
        if let Some(csv) = &artifacts.level_csv {
            write("level_curve.csv", csv)?;
        }
        if opts.nodes_csv {
            if let Some(csv) = &artifacts.nodes_csv {
                write("nodes.csv", csv)?;
            }
        }
    }
    Ok(Outcome { report, svg: artifacts.svg, status, written })
}

#[derive(Default)]
struct Artifacts {
    svg: String,
    level_csv: Option<String>,
    nodes_csv: Option<String>,
}

fn empty_report(scenario: &Scenario, mode: Mode) -> RunReport {
    RunReport {
        schema_version: SCHEMA_VERSION,
        mode,
        scenario: scenario.clone(),
        grid: None,
        sites: Vec::new(),
        solver: None,
        boundary_measure: None,
        level_curve: None,
        witness: None,
        lemmas: None,
        checks: BTreeMap::new(),
        timing: Timing::default(),
    }
}

fn position_vec(x: &Point) -> Vec<f64> {
    match x {
        Point::Plane(v) => vec![v.x, v.y],
        Point::Sphere(v) => vec![v.x, v.y, v.z],
    }
}

fn nodes_csv(tess: &Tessellation) -> String {
    let mut out = String::new();
    let sphere = matches!(tess.domain(), Domain::UnitSphere);
    out.push_str(if sphere { "x,y,z,weight,owner\n" } else { "x,y,weight,owner\n" });
    for (k, n) in tess.grid().nodes().iter().enumerate() {
        let coords: Vec<String> = position_vec(&n.point).iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{},{},{}", coords.join(","), n.weight, tess.owner(k));
    }
    out
}

fn site_reports(tess: &Tessellation, targets: Option<&[f64]>) -> Result<Vec<SiteReport>, RunError> {
    let mut out = Vec::new();
    for (i, s) in tess.sites().iter().enumerate() {
        let c = label_components(tess, i)?;
        out.push(SiteReport {
            index: i,
            position: position_vec(&s.position),
            weight: s.weight,
            target_mass: targets.map(|t| t[i]),
            mass: tess.masses()[i],
            components: c.count,
            resolved_components: c.resolved,
            complement_components: None,
            resolved_complement_components: None,
            convex: None,
            starlike: None,
            fixed_point: None,
        });
    }
    Ok(out)
}

fn build_grid(scenario: &Scenario, domain: &Domain, exec: Exec) -> Result<Grid, RunError> {
    Ok(match scenario.domain.as_ref() {
        Some(DomainSpec::Sphere { n_lat, n_lon }) => build_sphere_grid(*n_lat, *n_lon)?,
        _ => build_polygon_grid_with(domain, scenario.resolution.unwrap_or(128), exec)?,
    })
}

fn run_cells(scenario: &Scenario, mode: Mode, exec: Exec, art: &mut Artifacts) -> Result<RunReport, RunError> {
    let mut report = empty_report(scenario, mode);
    let p = CostExponent::new(scenario.p.unwrap_or(2.0))?;
    let domain = scenario.build_domain()?;
    let set = scenario.site_set()?;
    let grid = build_grid(scenario, &domain, exec)?;
    report.grid = Some(GridSummary { nodes: grid.len(), spacing: grid.spacing() });

    let mut sites = set.sites.clone();
    let targets: Option<Vec<f64>> = set.has_masses.then(|| sites.iter().map(|s| s.target_mass).collect());
    if set.has_masses {
        let tol = scenario.solver.tol;
        let solve = otess::solver::solve_weights_with(&grid, &sites, p, &domain, tol, scenario.solver.max_iter, exec)?;
        let trace = &solve.objective_trace;
        let monotone = trace.windows(2).all(|w| w[1] >= w[0]);
        report.solver = Some(SolverSummary {
            converged: solve.converged,
            iterations: solve.iterations,
            residual: solve.residual,
            tol,
            objective_initial: trace.first().copied().unwrap_or(f64::NAN),
            objective_final: trace.last().copied().unwrap_or(f64::NAN),
            objective_monotone: monotone,
        });
        report.checks.insert("solver_converged".into(), solve.converged);
        report.checks.insert("objective_monotone".into(), monotone);
        for (s, w) in sites.iter_mut().zip(&solve.weights) {
            s.weight = *w;
        }
    }

    let tess = Tessellation::with_exec(&grid, &domain, &sites, p, exec)?;
    let mut per_site = site_reports(&tess, targets.as_deref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let nonempty: Vec<usize> = (0..sites.len()).filter(|&i| tess.masses()[i] > 0.0).collect();

    match &domain {
        Domain::Polygon(poly) => {
            if p.get() == 2.0 && poly.is_convex() {
                let mut all = true;
                for &i in &nonempty {
                    let c = check_convexity(&tess, i, scenario.checks.convexity_pairs, &mut rng)?;
                    per_site[i].convex = Some(c.pass);
                    all &= c.pass;
                }
                report.checks.insert("convexity".into(), all);
                report
                    .checks
                    .insert("cells_connected".into(), nonempty.iter().all(|&i| per_site[i].resolved_components == 1));
            }
        }
        Domain::UnitSphere => {
            let cells = check_sphere_connectedness(&tess)?;
            for c in &cells {
                per_site[c.site].complement_components = Some(c.complement_components);
                per_site[c.site].resolved_complement_components = Some(c.resolved_complement_components);
            }
            let n = cells.len();
            report.checks.insert("simply_connected".into(), cells.iter().all(|c| c.simply_connected_resolved(n)));
        }
    }
    if p.get() == 1.0 {
        let (mut star, mut fixed) = (true, true);
        for &i in &nonempty {
            let c = check_starlike(&tess, i, scenario.checks.starlike_samples, &mut rng)?;
            per_site[i].starlike = Some(c.segments.pass);
            per_site[i].fixed_point = Some(c.fixed_point);
            star &= c.segments.pass;
            fixed &= c.fixed_point;
        }
        report.checks.insert("starlike".into(), star);
        report.checks.insert("fixed_point".into(), fixed);
    }

    if mode == Mode::Analyze {
        report.boundary_measure = Some(boundary_measure_estimate(&grid, &domain, &sites, p)?);
        if matches!(domain, Domain::UnitSphere) {
            let lemmas = sphere_lemmas(&sites, &grid, p, scenario.checks.circles_per_pair, &mut rng)?;
            report.checks.insert("circle_lemma".into(), lemmas.circle_failures == 0);
            report.checks.insert("antipode_lemma".into(), lemmas.antipode_violations == 0);
            report.lemmas = Some(lemmas);
        }
    }

    report.sites = per_site;
    art.svg = render_svg(&tess, &Overlay { title: Some(format!("{mode}, p = {}", p.get())), ..Overlay::default() });
    art.nodes_csv = Some(nodes_csv(&tess));
    Ok(report)
}

fn sphere_lemmas(
    sites: &[Site],
    grid: &Grid,
    p: CostExponent,
    circles_per_pair: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LemmaSummary, RunError> {
    let sphere = Domain::unit_sphere();
    let mut out = LemmaSummary::default();
    let pi = std::f64::consts::PI;
    for i in 0..sites.len() {
        for j in 0..sites.len() {
            if i == j {
                continue;
            }
            for _ in 0..circles_per_pair {
                let center = sphere.sample_uniform(rng);
                let r = rng.gen_range(0.05..pi - 0.05);
                let c = check_circle_lemma(sites, i, j, &CircleSpec::new(center, r, 720)?, p)?;
                out.circles_tested += 1;
                out.circle_failures += usize::from(!c.pass);
            }
            let a = check_antipode_lemma(sites, i, j, grid, p)?;
            out.antipode_pairs += 1;
            out.antipode_premises += usize::from(a.premise);
            out.antipode_violations += a.violations;
        }
    }
    Ok(out)
}

/// Share of interior samples where `eta''` agrees with the second difference
/// of the traced curve within `max(1e-4, 10 dy^2)`.
pub fn derivative_agreement(curve: &LevelCurve) -> f64 {
    let Ok(p) = CostExponent::new(curve.p) else { return 0.0 };
    let dy = curve.y_step;
    let tol = (1e-4f64).max(10.0 * dy * dy);
    let interior = curve.samples.len().saturating_sub(2);
    if interior == 0 {
        return 0.0;
    }
    let good = curve
        .samples
        .windows(3)
        .filter(|w| {
            let fd = (w[2].0 - 2.0 * w[1].0 + w[0].0) / (dy * dy);
            eta_second(w[1].0, w[1].1, p).is_ok_and(|e| (e - fd).abs() <= tol)
        })
        .count();
    good as f64 / interior as f64
}

/// Both branches `(x, ±y)` of `{m = alpha}` for `y` in `[0, y_hi]`, split
/// where no crossing with `x >= 0` exists.
fn level_polylines(p: CostExponent, alpha: f64, y_hi: f64, n: usize) -> Vec<Vec<Vector2<f64>>> {
    let mut runs: Vec<Vec<Vector2<f64>>> = Vec::new();
    let mut current = Vec::new();
    for k in 0..=n {
        let y = y_hi * k as f64 / n as f64;
        match level_x(p, alpha, y, 0.0) {
            Some(x) => current.push(Vector2::new(x, y)),
            None => {
                if current.len() > 1 {
                    runs.push(std::mem::take(&mut current));
                }
                current.clear();
            }
        }
    }
    if current.len() > 1 {
        runs.push(current);
    }
    runs.into_iter()
        .map(|upper| {
            let mut line: Vec<Vector2<f64>> = upper.iter().rev().map(|v| Vector2::new(v.x, -v.y)).collect();
            line.extend(upper.iter().skip(usize::from(upper[0].y == 0.0)));
            line
        })
        .collect()
}

fn level_csv(lines: &[Vec<Vector2<f64>>]) -> String {
    let mut out = String::from("y,x\n");
    for line in lines {
        for v in line {
            let _ = writeln!(out, "{},{}", v.y, v.x);
        }
    }
    out
}

fn two_sites(p: f64, alpha: f64) -> Vec<Site> {
    vec![Site::with_weight(Point::plane(1.0, 0.0), -alpha / p), Site::with_weight(Point::plane(-1.0, 0.0), 0.0)]
}

fn run_levelcurve(scenario: &Scenario, exec: Exec, art: &mut Artifacts) -> Result<RunReport, RunError> {
    let mut report = empty_report(scenario, Mode::Levelcurve);
    let pv = scenario.p.unwrap_or(2.0);
    let p = CostExponent::new(pv)?;
    let alpha = scenario.alpha.unwrap_or(1.0);
    let y_max = scenario.y_max.unwrap_or(1.0);
    let curve = trace_level_curve(p, alpha, y_max, scenario.steps.unwrap_or(400))?;
    let inflection = match find_inflection(&curve) {
        Ok(y) => Some(y),
        Err(Error::NotFound { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let agreement = derivative_agreement(&curve);
    let residual_ok =
        !curve.samples.is_empty() && curve.samples.iter().all(|&(x, y)| (m_value(x, y, p) - alpha).abs() <= 1e-10);
    report.checks.insert("level_residual".into(), residual_ok);
    report.checks.insert("derivative_oracle".into(), agreement >= 0.95);
    if pv > 1.0 && pv < 2.0 {
        report.checks.insert("inflection_found".into(), inflection.is_some());
    }
    report.level_curve = Some(LevelSummary {
        samples: curve.samples.len(),
        y_step: curve.y_step,
        truncated: curve.truncated,
        inflection_y: inflection,
        derivative_agreement: agreement,
    });

    let lines = level_polylines(p, alpha, y_max, 400);
    let x_hi = lines.iter().flatten().map(|v| v.x).fold(1.0f64, f64::max) + 1.0;
    let window = Domain::polygon(vec![[-1.5, -y_max], [x_hi, -y_max], [x_hi, y_max], [-1.5, y_max]])?;
    let grid = build_polygon_grid_with(&window, scenario.resolution.unwrap_or(256), exec)?;
    let sites = two_sites(pv, alpha);
    let tess = Tessellation::with_exec(&grid, &window, &sites, p, exec)?;
    report.grid = Some(GridSummary { nodes: grid.len(), spacing: grid.spacing() });
    report.sites = site_reports(&tess, None)?;
    let title = format!("level set m = {alpha}, p = {pv}");
    art.svg = render_svg(&tess, &Overlay { polylines: lines.clone(), segments: Vec::new(), title: Some(title) });
    art.level_csv = Some(level_csv(&lines));
    art.nodes_csv = Some(nodes_csv(&tess));
    Ok(report)
}

fn run_witness(scenario: &Scenario, mode: Mode, exec: Exec, art: &mut Artifacts) -> Result<RunReport, RunError> {
    let mut report = empty_report(scenario, mode);
    let w: WitnessDomain = match mode {
        Mode::WitnessConvex => {
            build_convex_witness(CostExponent::new(scenario.p.unwrap_or(2.0))?, scenario.alpha.unwrap_or(1.0))?
        }
        _ => build_bump_witness(scenario.n_bumps.unwrap_or(1), scenario.kappa.unwrap_or(0.5))?,
    };
    let p = CostExponent::new(w.p)?;
    let poly = w.domain.as_polygon().expect("witness domains are polygons");
    let default_res = if mode == Mode::WitnessConvex { 512 } else { 1024 };
    let grid = build_polygon_grid_with(&w.domain, scenario.resolution.unwrap_or(default_res), exec)?;
    let tess = Tessellation::with_exec(&grid, &w.domain, &w.sites, p, exec)?;
    report.grid = Some(GridSummary { nodes: grid.len(), spacing: grid.spacing() });
    report.sites = site_reports(&tess, None)?;

    let target = &report.sites[w.target_site];
    report.checks.insert("components".into(), target.resolved_components == w.expected_components);
    report.checks.insert("sites_inside".into(), w.sites.iter().all(|s| w.domain.contains(&s.position)));
    if mode == Mode::WitnessConvex {
        let want_roots = if w.p < 2.0 { 3 } else { 2 };
        report.checks.insert("chord_roots".into(), w.chord_roots.len() == want_roots);
        report.checks.insert("polygon_convex".into(), poly.is_convex());
        if w.p > 2.0 {
            report.checks.insert("axis_precondition".into(), m_value(1.0, 0.0, p) < w.alpha);
        }
    }
    let v2 = |v: &Vector2<f64>| [v.x, v.y];
    report.witness = Some(WitnessSummary {
        vertices: poly.vertices().iter().map(v2).collect(),
        target_site: w.target_site,
        expected_components: w.expected_components,
        chord: w.chord.map(|[a, b]| [v2(&a), v2(&b)]),
        chord_roots: w.chord_roots.iter().map(v2).collect(),
        inflection_y: w.inflection,
    });

    let (lo, hi) = poly.bbox();
    let y_hi = lo.y.abs().max(hi.y.abs());
    let lines = if mode == Mode::WitnessConvex {
        level_polylines(p, w.alpha, y_hi, 800)
    } else {
        let x = w.alpha / 4.0;
        vec![vec![Vector2::new(x, lo.y), Vector2::new(x, hi.y)]]
    };
    let title = match mode {
        Mode::WitnessConvex => format!("convex witness, p = {}, alpha = {}", w.p, w.alpha),
        _ => format!("bump witness, {} bumps", w.expected_components),
    };
    let segments = w.chord.map(|c| vec![c]).unwrap_or_default();
    art.svg = render_svg(&tess, &Overlay { polylines: lines.clone(), segments, title: Some(title) });
    art.level_csv = Some(level_csv(&lines));
    art.nodes_csv = Some(nodes_csv(&tess));
    Ok(report)
}
