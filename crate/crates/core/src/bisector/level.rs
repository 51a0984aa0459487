use serde::Serialize;

use super::{eta_second, m_value, Sign};
use crate::error::{usage, Error, Result};
use crate::potential::CostExponent;

/// Samples `(x, y)` of the branch `x = eta(y) >= 1` of `{m = alpha}` on a
/// uniform grid of `y` values starting at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelCurve {
    pub p: f64,
    pub alpha: f64,
    pub y_step: f64,
    pub samples: Vec<(f64, f64)>,
    /// Set when some `y` had no bracket and the curve stops early.
    pub truncated: bool,
}

const LEVEL_TOL: f64 = 1e-10;

/// Solves `m(x, y) = alpha` for `x >= lo` by bisection, doubling the upper
/// end of the bracket. `lo` must be >= 0, where `m` is increasing in `x`.
pub fn level_x(p: CostExponent, alpha: f64, y: f64, lo: f64) -> Option<f64> {
    let f = |x: f64| m_value(x, y, p) - alpha;
    let f_lo = f(lo);
    if f_lo.abs() <= LEVEL_TOL {
        return Some(lo);
    }
    if f_lo > 0.0 {
        return None;
    }
    let mut a = lo;
    let mut b = lo.max(1.0) * 2.0;
    let mut doublings = 0;
    while f(b) < 0.0 {
        a = b;
        b *= 2.0;
        doublings += 1;
        if doublings > 200 || !b.is_finite() {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let v = f(mid);
        if v.abs() <= LEVEL_TOL * 1e-3 {
            return Some(mid);
        }
        if v < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let x = if f(a).abs() <= f(b).abs() { a } else { b };
    (f(x).abs() <= LEVEL_TOL.max(4.0 * f64::EPSILON * alpha.abs())).then_some(x)
}

pub fn trace_level_curve(p: CostExponent, alpha: f64, y_max: f64, steps: usize) -> Result<LevelCurve> {
    if steps < 32 {
        return Err(usage(format!("level curve needs at least 32 steps, got {steps}")));
    }
    if !(y_max > 0.0) || !y_max.is_finite() || !alpha.is_finite() {
        return Err(usage("level curve needs finite alpha and y_max > 0"));
    }
    let y_step = y_max / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut truncated = false;
    for k in 0..=steps {
        let y = k as f64 * y_step;
        match level_x(p, alpha, y, 1.0) {
            Some(x) => samples.push((x, y)),
            None => {
                truncated = true;
                break;
            }
        }
    }
    Ok(LevelCurve { p: p.get(), alpha, y_step, samples, truncated })
}

fn second_sign(p: CostExponent, x: f64, y: f64) -> Sign {
    eta_second(x, y, p).map(Sign::of).unwrap_or(Sign::Zero)
}

/// Smallest `y > 0` on the curve where `eta''` changes sign, refined by
/// bisection in `y` to 1e-8.
pub fn find_inflection(curve: &LevelCurve) -> Result<f64> {
    let y_max = curve.samples.last().map_or(0.0, |s| s.1);
    let not_found = Error::NotFound { y_max };
    let p = CostExponent::new(curve.p)?;
    if curve.p == 2.0 {
        return Err(not_found);
    }
    let signs: Vec<(f64, Sign)> =
        curve.samples.iter().map(|&(x, y)| (y, second_sign(p, x, y))).filter(|s| s.1 != Sign::Zero).collect();
    let Some(k) = signs.windows(2).position(|w| w[0].1 != w[1].1) else {
        return Err(not_found);
    };
    let (mut a, sa) = signs[k];
    let mut b = signs[k + 1].0;
    while b - a > 1e-8 {
        let mid = 0.5 * (a + b);
        let Some(x) = level_x(p, curve.alpha, mid, 1.0) else { break };
        let s = second_sign(p, x, mid);
        if s == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
