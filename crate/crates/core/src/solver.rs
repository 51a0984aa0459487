//! Cell masses and gradient ascent on the discrete Kantorovich dual
//! `F(b) = sum_i lambda_i b_i - sum_z w_z max_i Phi_i(z)`.
//!
//! `F` is concave and piecewise linear in `b`; away from ties its gradient is
//! `lambda_i - mass_i(b)`.

use serde::Serialize;

use crate::domain::Domain;
use crate::error::{usage, Result};
use crate::grid::Grid;
use crate::par::{compensated_sum, map_range, Exec};
use crate::potential::{check_sites, CostExponent, CostTable, Site};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub weights: Vec<f64>,
    pub masses: Vec<f64>,
    /// `max_i |mass_i - lambda_i|` at the returned weights.
    pub residual: f64,
    pub iterations: usize,
    /// Dual objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Mass of every cell with ties going to the lowest site index.
pub fn cell_masses(grid: &Grid, sites: &[Site], p: CostExponent, domain: &Domain) -> Result<Vec<f64>> {
    let table = CostTable::build(grid, domain, sites, p, Exec::default())?;
    let weights: Vec<f64> = sites.iter().map(|s| s.weight).collect();
    Ok(table_masses(&table, grid, &weights, Exec::default()))
}

/// Dual objective at the sites' current weights and target masses.
pub fn dual_objective(grid: &Grid, sites: &[Site], p: CostExponent, domain: &Domain) -> Result<f64> {
    let table = CostTable::build(grid, domain, sites, p, Exec::default())?;
    let weights: Vec<f64> = sites.iter().map(|s| s.weight).collect();
    let lambda: Vec<f64> = sites.iter().map(|s| s.target_mass).collect();
    Ok(table_objective(&table, grid, &lambda, &weights, Exec::default()))
}

pub fn table_masses(table: &CostTable, grid: &Grid, weights: &[f64], exec: Exec) -> Vec<f64> {
    let owners = map_range(exec, table.n_nodes(), |z| table.best(z, weights).0);
    let mut acc = vec![Vec::new(); table.n_sites()];
    for (z, &i) in owners.iter().enumerate() {
        acc[i].push(grid.nodes()[z].weight);
    }
    acc.into_iter().map(compensated_sum).collect()
}

pub fn table_objective(table: &CostTable, grid: &Grid, lambda: &[f64], weights: &[f64], exec: Exec) -> f64 {
    let tops = map_range(exec, table.n_nodes(), |z| grid.nodes()[z].weight * table.best(z, weights).1);
    let linear = compensated_sum(lambda.iter().zip(weights).map(|(l, b)| l * b));
    linear - compensated_sum(tops)
}

fn validate_targets(domain: &Domain, sites: &[Site]) -> Result<Vec<f64>> {
    check_sites(domain, sites)?;
    let lambda: Vec<f64> = sites.iter().map(|s| s.target_mass).collect();
    if let Some(bad) = lambda.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(usage(format!("target masses must be positive, got {bad}")));
    }
    let total = compensated_sum(lambda.iter().copied());
    if (total - 1.0).abs() > 1e-9 {
        return Err(usage(format!("target masses must sum to 1, got {total}")));
    }
    if let Some(k) = sites.iter().position(|s| !domain.contains(&s.position)) {
        return Err(usage(format!("site {k} lies outside the domain")));
    }
    Ok(lambda)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Backtracking gives up after this many halvings of the step.
const MAX_HALVINGS: usize = 60;
/// Sufficient-increase constant of the line search.
const ARMIJO: f64 = 0.5;

/// Gradient ascent on the dual objective from the sites' current weights.
///
/// Each iteration backtracks from `1 / max node density` (half that for
/// `p = 1`) until the objective increases by at least `t |g|^2 / 2`. The
/// solve stops unconverged when no step increases it: the discrete objective
/// is piecewise linear, so masses move in quanta of node weight and the
/// attainable residual is bounded below by the weight of nodes that tie
/// simultaneously.
pub fn solve_weights(
    grid: &Grid,
    sites: &[Site],
    p: CostExponent,
    domain: &Domain,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    solve_weights_with(grid, sites, p, domain, tol, max_iter, Exec::default())
}

pub fn solve_weights_with(
    grid: &Grid,
    sites: &[Site],
    p: CostExponent,
    domain: &Domain,
    tol: f64,
    max_iter: usize,
    exec: Exec,
) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(usage(format!("tolerance must be positive, got {tol}")));
    }
    let lambda = validate_targets(domain, sites)?;
    let table = CostTable::build(grid, domain, sites, p, exec)?;

    let gauge = |b: &mut Vec<f64>| {
        let b0 = b[0];
        b.iter_mut().for_each(|v| *v -= b0);
    };
    let mut weights: Vec<f64> = sites.iter().map(|s| s.weight).collect();
    gauge(&mut weights);

    let mut t0 = 1.0 / grid.max_density();
    if p.get() == 1.0 {
        t0 *= 0.5;
    }

    let mut masses = table_masses(&table, grid, &weights, exec);
    let mut value = table_objective(&table, grid, &lambda, &weights, exec);
    let mut residual = max_abs_diff(&masses, &lambda);
    let mut trace = vec![value];
    let mut iterations = 0;

    while residual > tol && iterations < max_iter {
        let g: Vec<f64> = lambda.iter().zip(&masses).map(|(l, m)| l - m).collect();
        let g2 = compensated_sum(g.iter().map(|v| v * v));
        let mut t = t0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand: Vec<f64> = weights.iter().zip(&g).map(|(b, gi)| b + t * gi).collect();
            gauge(&mut cand);
            let cand_value = table_objective(&table, grid, &lambda, &cand, exec);
            if cand_value > value && cand_value >= value + ARMIJO * t * g2 {
                accepted = Some((cand, cand_value));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_value)) = accepted else { break };
        weights = cand;
        value = cand_value;
        masses = table_masses(&table, grid, &weights, exec);
        residual = max_abs_diff(&masses, &lambda);
        trace.push(value);
        iterations += 1;
    }

    Ok(SolveReport { weights, masses, residual, iterations, objective_trace: trace, converged: residual <= tol })
}
