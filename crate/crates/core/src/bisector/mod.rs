//! The two-site planar problem with sites `x1 = (1, 0)` and `x2 = (-1, 0)`.
//!
//! The interface between the two cells is a level set of
//! `m(x, y, p) = |x2 - z|^p - |x1 - z|^p = A^(p/2) - B^(p/2)` with
//! `A = (x+1)^2 + y^2`, `B = (x-1)^2 + y^2`. Near a point with `m_x != 0` the
//! level set `{m = alpha}` is a graph `x = eta(y)`, and the sign of `eta''`
//! decides whether the cell `{m > alpha}` can be cut twice by a line.

mod level;
mod witness;

pub use level::{find_inflection, level_x, trace_level_curve, LevelCurve};
pub use witness::{build_bump_witness, build_convex_witness, count_chord_roots, WitnessDomain};

use crate::error::{Error, Result};
use crate::potential::CostExponent;

/// `a^s - b^s` given `a - b = delta`, accurate when `delta` is small
/// relative to `b`.
#[inline]
fn pow_diff(a: f64, b: f64, delta: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    if b == 0.0 {
        return a.powf(s) - b.powf(s);
    }
    b.powf(s) * (s * (delta / b).ln_1p()).exp_m1()
}

fn squares(x: f64, y: f64) -> (f64, f64) {
    ((x + 1.0) * (x + 1.0) + y * y, (x - 1.0) * (x - 1.0) + y * y)
}

pub fn m_value(x: f64, y: f64, p: CostExponent) -> f64 {
    let p = p.get();
    if p == 2.0 {
        return 4.0 * x;
    }
    let (a, b) = squares(x, y);
    if b < a {
        pow_diff(a, b, 4.0 * x, p / 2.0)
    } else {
        -pow_diff(b, a, -4.0 * x, p / 2.0)
    }
}

/// First and second partial derivatives of `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Partials {
    pub m_x: f64,
    pub m_y: f64,
    pub m_xx: f64,
    pub m_xy: f64,
    pub m_yy: f64,
}

/// Analytic partials of `m` at `(x, y)` for `x > 0`.
pub fn partials(x: f64, y: f64, p: CostExponent) -> Partials {
    let p = p.get();
    if p == 2.0 {
        return Partials { m_x: 4.0, m_y: 0.0, m_xx: 0.0, m_xy: 0.0, m_yy: 0.0 };
    }
    let q = p / 2.0;
    let (a, b) = squares(x, y);
    let d1 = pow_diff(a, b, 4.0 * x, q - 1.0);
    let d2 = pow_diff(a, b, 4.0 * x, q - 2.0);
    let b1 = b.powf(q - 1.0);
    let b2 = b.powf(q - 2.0);
    let xp = x + 1.0;
    Partials {
        m_x: p * (xp * d1 + 2.0 * b1),
        m_y: p * y * d1,
        m_xx: p * (d1 + (p - 2.0) * (xp * xp * d2 + 4.0 * x * b2)),
        m_xy: p * (p - 2.0) * y * (xp * d2 + 2.0 * b2),
        m_yy: p * (d1 + (p - 2.0) * y * y * d2),
    }
}

const SINGULAR: f64 = 1e-14;

fn checked(x: f64, y: f64, p: CostExponent) -> Result<Partials> {
    let d = partials(x, y, p);
    if !(d.m_x.abs() >= SINGULAR) {
        return Err(Error::SingularSlope(d.m_x));
    }
    Ok(d)
}

/// `eta'(y) = -m_y / m_x` on the level set through `(x, y)`.
pub fn eta_prime(x: f64, y: f64, p: CostExponent) -> Result<f64> {
    let d = checked(x, y, p)?;
    Ok(-d.m_y / d.m_x)
}

/// `eta''(y)` by implicit differentiation of `m(eta(y), y) = alpha`:
/// `-(m_xx eta'^2 + 2 m_xy eta' + m_yy) / m_x`.
pub fn eta_second(x: f64, y: f64, p: CostExponent) -> Result<f64> {
    let d = checked(x, y, p)?;
    let e1 = -d.m_y / d.m_x;
    Ok(-(d.m_xx * e1 * e1 + 2.0 * d.m_xy * e1 + d.m_yy) / d.m_x)
}

/// `eta''` with the denominator `m_x^3` cleared, scaled by `1/p`:
/// `-(m_xx m_y^2 - 2 m_xy m_x m_y + m_yy m_x^2) / p`.
/// Its sign matches `eta''` wherever `m_x > 0`.
pub fn eta_second_numerator(x: f64, y: f64, p: CostExponent) -> Result<f64> {
    let d = checked(x, y, p)?;
    let s = d.m_xx * d.m_y * d.m_y - 2.0 * d.m_xy * d.m_x * d.m_y + d.m_yy * d.m_x * d.m_x;
    Ok(-s / p.get())
}

/// Leading term `8 (p-1)(p-2) p^2 x y^(3p-8)` of the numerator as `y -> inf`.
pub fn asymptotic_leading(p: CostExponent, x: f64, y: f64) -> f64 {
    let p = p.get();
    8.0 * (p - 1.0) * (p - 2.0) * p * p * x * y.powf(3.0 * p - 8.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(v: f64) -> Sign {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Sign of `eta''` on the axis `y = 0`, where it reduces to the sign of
/// `((x-1)^2)^(p/2-1) - ((x+1)^2)^(p/2-1)`.
pub fn eta_second_sign_at_axis(x: f64, p: CostExponent) -> Sign {
    let s = p.get() / 2.0 - 1.0;
    let lo = (x - 1.0) * (x - 1.0);
    let hi = (x + 1.0) * (x + 1.0);
    Sign::of(-pow_diff(hi, lo, 4.0 * x, s))
}
