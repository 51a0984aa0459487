//! Acceptance gate. Runs every criterion, prints one line each and exits
//! nonzero if any fails.
//!
//! Set `OTESS_BLESS=1` to rewrite the golden figure hashes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use otess::bisector::{
    asymptotic_leading, build_bump_witness, build_convex_witness, count_chord_roots, eta_prime, eta_second,
    eta_second_numerator, m_value, trace_level_curve,
};
use otess::grid::build_polygon_grid;
use otess::par::Exec;
use otess::solver::table_objective;
use otess::topology::{
    check_antipode_lemma, check_circle_lemma, check_convexity, check_sphere_connectedness, check_starlike,
    label_components, CircleSpec,
};
use otess::{build_sphere_grid, solve_weights, CostExponent, CostTable, Domain, Grid, Point, Site, Tessellation};
use otess_cli::{load_scenario, run, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const SOLVE_TOL: f64 = 1e-3;
const SOLVE_MAX_ITER: usize = 4000;
const EXPONENTS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cp(p: f64) -> CostExponent {
    CostExponent::new(p).unwrap()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Solver-contract facts recorded for every solve.
struct SolveAudit {
    label: String,
    monotone: bool,
    residual: f64,
    converged: bool,
    grad_err: f64,
    grad_tol: f64,
}

impl SolveAudit {
    fn pass(&self) -> bool {
        self.monotone && self.converged && self.residual <= SOLVE_TOL && self.grad_err <= self.grad_tol
    }
}

/// Solves for weights, audits the result and returns the weighted sites.
fn solve_audited(
    label: String,
    grid: &Grid,
    domain: &Domain,
    sites: &[Site],
    p: CostExponent,
    audits: &mut Vec<SolveAudit>,
) -> Vec<Site> {
    let rep = solve_weights(grid, sites, p, domain, SOLVE_TOL, SOLVE_MAX_ITER).unwrap();
    let mut solved = sites.to_vec();
    for (s, w) in solved.iter_mut().zip(&rep.weights) {
        s.weight = *w;
    }

    // central differences of the discrete dual against lambda - mass
    let table = CostTable::build(grid, domain, &solved, p, Exec::default()).unwrap();
    let lambda: Vec<f64> = sites.iter().map(|s| s.target_mass).collect();
    let eps = 1e-7;
    let mut grad_err = 0.0f64;
    for k in 0..solved.len() {
        let mut up = rep.weights.clone();
        let mut down = rep.weights.clone();
        up[k] += eps;
        down[k] -= eps;
        let fd = (table_objective(&table, grid, &lambda, &up, Exec::default())
            - table_objective(&table, grid, &lambda, &down, Exec::default()))
            / (2.0 * eps);
        grad_err = grad_err.max((fd - (lambda[k] - rep.masses[k])).abs());
    }
    let tess = Tessellation::new(grid, domain, &solved, p).unwrap();
    let band: f64 = (0..grid.len()).filter(|&z| tess.in_boundary_band(z)).map(|z| grid.nodes()[z].weight).sum();

    audits.push(SolveAudit {
        label,
        monotone: rep.objective_trace.windows(2).all(|w| w[1] >= w[0]),
        residual: rep.residual,
        converged: rep.converged,
        grad_err,
        grad_tol: (1e-6f64).max(5.0 * band),
    });
    solved
}

fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|m| m / total).collect()
}

fn random_sites(rng: &mut ChaCha8Rng, domain: &Domain, n: usize) -> Vec<Site> {
    let positions: Vec<Point> = (0..n).map(|_| domain.sample_uniform(rng)).collect();
    let masses = random_masses(rng, n);
    positions.into_iter().zip(masses).map(|(x, m)| Site::new(x, m, 0.0)).collect()
}

fn random_weights(rng: &mut ChaCha8Rng, sites: &mut [Site], p: f64) {
    let span = PI.powf(p) / p;
    for s in sites {
        s.weight = rng.gen_range(-span..span);
    }
}

fn c1_square_p2(audits: &mut Vec<SolveAudit>) -> Outcome {
    let start = Instant::now();
    let sq = Domain::unit_square();
    let grid = build_polygon_grid(&sq, 256).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let sites = random_sites(&mut rng, &sq, 4);
    let p = cp(2.0);
    let solved = solve_audited("square p=2, 4 sites".into(), &grid, &sq, &sites, p, audits);
    let tess = Tessellation::new(&grid, &sq, &solved, p).unwrap();
    let mut comps = Vec::new();
    let mut raw = Vec::new();
    let mut violations = 0;
    for i in 0..solved.len() {
        let c = label_components(&tess, i).unwrap();
        comps.push(c.resolved);
        raw.push(c.count);
        violations += check_convexity(&tess, i, 200, &mut rng).unwrap().violations;
    }
    let t = secs(start.elapsed());
    outcome(
        comps.iter().all(|&c| c == 1) && violations == 0 && t < 30.0,
        format!("components {comps:?} (raw {raw:?}), convexity violations {violations}/800, {t:.1} s"),
    )
}

fn witness_components(w: &otess::bisector::WitnessDomain, res: usize) -> (usize, usize) {
    let grid = build_polygon_grid(&w.domain, res).unwrap();
    let tess = Tessellation::new(&grid, &w.domain, &w.sites, cp(w.p)).unwrap();
    let c = label_components(&tess, w.target_site).unwrap();
    (c.resolved, c.count)
}

fn c2_witness_low() -> Outcome {
    let start = Instant::now();
    let w = build_convex_witness(cp(1.5), 5.0).unwrap();
    let (resolved, raw) = witness_components(&w, 512);
    let [a, b] = w.chord.unwrap();
    let roots = count_chord_roots(cp(1.5), 5.0, a, b).len();
    let convex = w.domain.as_polygon().unwrap().is_convex();
    let t = secs(start.elapsed());
    outcome(
        resolved == 2 && roots == 3 && convex && t < 60.0,
        format!("components {resolved} (raw {raw}), chord roots {roots}, convex {convex}, {t:.1} s"),
    )
}

fn c3_witness_high() -> Outcome {
    let w = build_convex_witness(cp(5.0), 100.0).unwrap();
    let (resolved, raw) = witness_components(&w, 512);
    let [a, b] = w.chord.unwrap();
    let roots = count_chord_roots(cp(5.0), 100.0, a, b).len();
    let m10 = m_value(1.0, 0.0, cp(5.0));
    outcome(
        resolved == 2 && roots == 2 && m10 < 100.0,
        format!("components {resolved} (raw {raw}), chord roots {roots}, m(1,0,5) = {m10}"),
    )
}

fn c4_axis_derivatives() -> Outcome {
    let mut worst_slope = 0.0f64;
    let mut bad_signs = 0;
    for x in [1.5, 2.0, 3.0, 5.0] {
        for p in [1.2, 1.5, 3.0, 5.0] {
            worst_slope = worst_slope.max(eta_prime(x, 0.0, cp(p)).unwrap().abs());
            let s = eta_second(x, 0.0, cp(p)).unwrap();
            if s.signum() != (2.0 - p).signum() || s == 0.0 {
                bad_signs += 1;
            }
        }
    }
    outcome(
        worst_slope <= 1e-12 && bad_signs == 0,
        format!("max |eta'| {worst_slope:e}, sign mismatches {bad_signs}/16"),
    )
}

fn c5_asymptotic_sign() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let x = 2.0;
    for p in [1.2, 1.5, 1.8] {
        let num = |y: f64| eta_second_numerator(x, y, cp(p)).unwrap();
        let positive_start = num(0.01) > 0.0;
        let ys: Vec<f64> = (0..=4000).map(|k| 0.01 * 1e5f64.powf(k as f64 / 4000.0)).collect();
        let Some(k) = ys.windows(2).position(|w| num(w[0]) > 0.0 && num(w[1]) <= 0.0) else {
            pass = false;
            parts.push(format!("p={p}: no sign change"));
            continue;
        };
        let (mut lo, mut hi) = (ys[k], ys[k + 1]);
        while hi - lo > 1e-8 {
            let mid = 0.5 * (lo + hi);
            if num(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y0 = hi;
        let negative_tail = ys.iter().filter(|&&y| y >= y0).all(|&y| num(y) < 0.0);
        let ratio = num(1000.0) / asymptotic_leading(cp(p), x, 1000.0);
        let ok = positive_start && negative_tail && (ratio - 1.0).abs() <= 0.15;
        pass &= ok;
        parts.push(format!("p={p}: Y0 {y0:.6}, ratio at 1000 {ratio:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn c6_derivative_oracle() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, alpha, y_max) in [(1.5, 5.0, 10.0), (5.0, 100.0, 3.0)] {
        let c = trace_level_curve(cp(p), alpha, y_max, 400).unwrap();
        let dy = c.y_step;
        let tol = (1e-4f64).max(10.0 * dy * dy);
        let interior = c.samples.len() - 2;
        let good = c
            .samples
            .windows(3)
            .filter(|w| {
                let fd = (w[2].0 - 2.0 * w[1].0 + w[0].0) / (dy * dy);
                eta_second(w[1].0, w[1].1, cp(p)).is_ok_and(|e| (e - fd).abs() <= tol)
            })
            .count();
        let share = good as f64 / interior as f64;
        pass &= share >= 0.95 && interior >= 50;
        parts.push(format!("p={p}: {good}/{interior} ({:.1}%)", share * 100.0));
    }
    outcome(pass, parts.join("; "))
}

fn c7_bumps() -> Outcome {
    let start = Instant::now();
    let w = build_bump_witness(5, 0.8).unwrap();
    let (resolved, raw) = witness_components(&w, 1024);
    let t = secs(start.elapsed());
    outcome(resolved == 5 && t < 90.0, format!("components {resolved} (raw {raw}), {t:.1} s"))
}

fn c8_sphere_simply_connected(audits: &mut Vec<SolveAudit>) -> Outcome {
    let start = Instant::now();
    let sphere = Domain::unit_sphere();
    let grid = build_sphere_grid(128, 256).unwrap();
    let mut bad = 0;
    let mut raw_bad = 0;
    let mut cells = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let p = EXPONENTS[seed as usize % 4];
        let n = rng.gen_range(2..=8);
        let sites = random_sites(&mut rng, &sphere, n);
        let solved = solve_audited(format!("sphere seed {seed}, p={p}"), &grid, &sphere, &sites, cp(p), audits);
        let tess = Tessellation::new(&grid, &sphere, &solved, cp(p)).unwrap();
        for c in check_sphere_connectedness(&tess).unwrap() {
            cells += 1;
            bad += usize::from((c.resolved_components, c.resolved_complement_components) != (1, 1));
            raw_bad += usize::from((c.components, c.complement_components) != (1, 1));
        }
    }
    let t = secs(start.elapsed());
    outcome(bad == 0 && t < 600.0, format!("{bad}/{cells} cells not (1,1) (raw count: {raw_bad}), {t:.1} s"))
}

fn c9_circle_lemma() -> Outcome {
    let sphere = Domain::unit_sphere();
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let mut failures = Vec::new();
    let mut resampled = 0;
    for case in 0..500 {
        let p = EXPONENTS[rng.gen_range(0..4)];
        let n = rng.gen_range(2..=6);
        let mut sites = random_sites(&mut rng, &sphere, n);
        random_weights(&mut rng, &mut sites, p);
        let i = rng.gen_range(0..n);
        let j = (i + rng.gen_range(1..n)) % n;
        let center = sphere.sample_uniform(&mut rng);
        let r = rng.gen_range(0.05..PI - 0.05);
        let c = check_circle_lemma(&sites, i, j, &CircleSpec::new(center, r, 720).unwrap(), cp(p)).unwrap();
        resampled += usize::from(c.resampled);
        if !c.pass {
            failures.push(format!("case {case} (p={p}, {} transitions)", c.transitions));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} failures in 500 ({resampled} resampled) {}", failures.len(), failures.join(", ")),
    )
}

fn c10_antipode_lemma() -> Outcome {
    let sphere = Domain::unit_sphere();
    let grid = build_sphere_grid(32, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut pairs, mut premises, mut violations) = (0, 0, 0);
    for _ in 0..500 {
        let p = EXPONENTS[rng.gen_range(0..4)];
        let n = rng.gen_range(2..=6);
        let mut sites = random_sites(&mut rng, &sphere, n);
        random_weights(&mut rng, &mut sites, p);
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let a = check_antipode_lemma(&sites, i, j, &grid, cp(p)).unwrap();
                pairs += 1;
                premises += usize::from(a.premise);
                violations += a.violations;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations; premise held for {premises}/{pairs} ordered pairs"))
}

fn l_shape() -> Domain {
    Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]]).unwrap()
}

fn c11_starlike(audits: &mut Vec<SolveAudit>) -> Outcome {
    let p = cp(1.0);
    let domains = [("square", Domain::unit_square()), ("L-shape", l_shape()), ("sphere", Domain::unit_sphere())];
    let grids = [
        build_polygon_grid(&domains[0].1, 256).unwrap(),
        build_polygon_grid(&domains[1].1, 256).unwrap(),
        build_sphere_grid(128, 256).unwrap(),
    ];
    let (mut cells, mut star_fail, mut fixed_fail) = (0, 0, 0);
    let mut where_failed = Vec::new();
    for case in 0..20u64 {
        let k = match case {
            0..=6 => 0,
            7..=13 => 1,
            _ => 2,
        };
        let (name, domain) = &domains[k];
        let grid = &grids[k];
        let mut rng = ChaCha8Rng::seed_from_u64(1100 + case);
        let n = rng.gen_range(2..=6);
        let sites = random_sites(&mut rng, domain, n);
        let solved = solve_audited(format!("{name} p=1 case {case}"), grid, domain, &sites, p, audits);
        let tess = Tessellation::new(grid, domain, &solved, p).unwrap();
        for i in 0..n {
            let c = check_starlike(&tess, i, 100, &mut rng).unwrap();
            cells += 1;
            if !c.segments.pass || !c.fixed_point {
                where_failed.push(format!("{name} case {case} site {i}"));
            }
            star_fail += usize::from(!c.segments.pass);
            fixed_fail += usize::from(!c.fixed_point);
        }
    }
    outcome(
        star_fail == 0 && fixed_fail == 0,
        format!(
            "{cells} cells: starlike failures {star_fail}, fixed-point failures {fixed_fail} {}",
            where_failed.join(", ")
        ),
    )
}

fn c12_solver_contract(audits: &[SolveAudit]) -> Outcome {
    let failed: Vec<&SolveAudit> = audits.iter().filter(|a| !a.pass()).collect();
    let worst_residual = audits.iter().map(|a| a.residual).fold(0.0, f64::max);
    let worst_ratio = audits.iter().map(|a| a.grad_err / a.grad_tol).fold(0.0, f64::max);
    let names: Vec<&str> = failed.iter().map(|a| a.label.as_str()).collect();
    outcome(
        failed.is_empty() && !audits.is_empty(),
        format!(
            "{} solves, max residual {worst_residual:.2e}, max gradient error / tolerance {worst_ratio:.2e}, failing: {names:?}",
            audits.len()
        ),
    )
}

fn c13_boundary_decay() -> Outcome {
    let sq = Domain::unit_square();
    let sites =
        [Site::with_weight(Point::plane(0.2713, 0.4589), 0.0), Site::with_weight(Point::plane(0.7287, 0.5411), 0.0)];
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let est: Vec<f64> = [128, 256, 512]
            .iter()
            .map(|&r| {
                let g = build_polygon_grid(&sq, r).unwrap();
                otess::topology::boundary_measure_estimate(&g, &sq, &sites, cp(p)).unwrap()
            })
            .collect();
        // each refinement should roughly halve the band: ratio / 0.5 within [1/3, 3]
        let ratios: Vec<f64> = est.windows(2).map(|w| w[1] / w[0]).collect();
        let ok = ratios.iter().all(|&r| r < 1.0 && (r / 0.5) >= 1.0 / 3.0 && (r / 0.5) <= 3.0);
        pass &= ok;
        parts
            .push(format!("p={p}: {:.4} {:.4} {:.4} ratios {:.3} {:.3}", est[0], est[1], est[2], ratios[0], ratios[1]));
    }
    outcome(pass, parts.join("; "))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

const FIGURES: [&str; 3] = ["figure1_convex_p1.5.json", "figure2_convex_p5.json", "figure3_bumps.json"];

fn c14_figures() -> Outcome {
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/figures.sha256");
    let bless = std::env::var_os("OTESS_BLESS").is_some();
    let golden = std::fs::read_to_string(&golden_path).unwrap_or_default();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut parts = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    for name in FIGURES {
        let scenario = load_scenario(&repo_root().join("scenarios").join(name)).unwrap();
        let opts = RunOptions { out_dir: Some(dir.path().join(name)), ..RunOptions::default() };
        let first = run(&scenario, None, &opts).unwrap();
        let second = run(&scenario, None, &RunOptions::default()).unwrap();
        let on_disk = std::fs::read_to_string(dir.path().join(name).join("figure.svg")).unwrap();
        let hash = hex::encode(Sha256::digest(on_disk.as_bytes()));
        let deterministic = first.svg == second.svg
            && on_disk == first.svg
            && first.report.to_json_without_timing() == second.report.to_json_without_timing();
        let expected = golden.lines().find(|l| l.ends_with(name)).and_then(|l| l.split_whitespace().next());
        let matches = bless || expected == Some(hash.as_str());
        let ok = deterministic && matches && first.report.all_checks_pass();
        pass &= ok;
        parts.push(format!("{name}: {} {}", &hash[..12], if ok { "ok" } else { "MISMATCH" }));
        lines.push(format!("{hash}  {name}"));
    }
    if bless {
        std::fs::create_dir_all(golden_path.parent().unwrap()).unwrap();
        std::fs::write(&golden_path, lines.join("\n") + "\n").unwrap();
        parts.push("golden hashes rewritten".into());
    }
    outcome(pass, parts.join("; "))
}

fn main() {
    // cargo passes harness flags such as --nocapture or a filter; `--list`
    // must print nothing for tooling that enumerates tests.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut audits = Vec::new();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let t = secs(start.elapsed());
        println!("criterion {id:2} {} {name}: {} [{t:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, t));
    };
    record(1, "quadratic cost cells in the square are convex", &mut || c1_square_p2(&mut audits));
    record(2, "disconnected cell for p = 1.5", &mut c2_witness_low);
    record(3, "disconnected cell for p = 5", &mut c3_witness_high);
    record(4, "bisector slope and curvature on the axis", &mut c4_axis_derivatives);
    record(5, "asymptotic sign of the curvature numerator", &mut c5_asymptotic_sign);
    record(6, "curvature formula against the traced curve", &mut c6_derivative_oracle);
    record(7, "bump domain with five components", &mut c7_bumps);
    record(8, "sphere cells are simply connected", &mut || c8_sphere_simply_connected(&mut audits));
    record(9, "circle meets a halfspace in at most one arc", &mut c9_circle_lemma);
    record(10, "antipode in a halfspace forces the whole sphere", &mut c10_antipode_lemma);
    record(11, "p = 1 cells are starlike about their site", &mut || c11_starlike(&mut audits));
    record(12, "solver contract on every solve", &mut || c12_solver_contract(&audits));
    record(13, "boundary band shrinks under refinement", &mut c13_boundary_decay);
    record(14, "figure scenarios are reproducible", &mut c14_figures);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
