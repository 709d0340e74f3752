//! The set `Xi`, the subordination radius `w(lambda)` and the pushforward
//! map `Phi_gamma`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussexp::{expect_kernel_inv, expect_phi_numerator, GaussQuadrature};

/// Subordination quantities at one `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinationData {
    pub lambda: Complex64,
    /// `lambda` lies in `Xi = { E[|G - lambda|^{-2}] > 1 }`.
    pub in_xi: bool,
    /// Positive root of `E[(|G - lambda|^2 + w^2)^{-1}] = 1` on `Xi`, else 0.
    pub w: f64,
    /// `Phi_gamma(lambda)`.
    pub phi: Complex64,
}

/// `lambda in Xi` iff the (possibly infinite) expectation exceeds 1.
pub fn xi_membership(lambda: Complex64, quad: &GaussQuadrature) -> bool {
    expect_kernel_inv(lambda, 0.0, quad) > 1.0
}

/// Solve `E[(|G - lambda|^2 + w^2)^{-1}] = 1` for the unique positive root.
///
/// The left side is strictly decreasing in `w`, so a geometrically grown
/// bracket from `[tol, 1]` followed by bisection cannot miss. Returns 0 off
/// `Xi`.
pub fn solve_w(lambda: Complex64, quad: &GaussQuadrature, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Parameter("solve_w tolerance must be positive".into()));
    }
    if !xi_membership(lambda, quad) {
        return Ok(0.0);
    }
    let f = |w: f64| expect_kernel_inv(lambda, w, quad) - 1.0;
    let mut lo = 0.0;
    let mut hi = tol.min(1.0);
    if f(hi) > 0.0 {
        lo = hi;
        hi = 1.0;
        let mut guard = 0;
        while f(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 64 {
                return Err(Error::BracketFailure(format!(
                    "no sign change up to w = {hi} at lambda = {lambda}"
                )));
            }
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= 0.1 * tol || (hi - lo) < f64::EPSILON * mid.max(1.0) {
            break;
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// `Phi_gamma(lambda) = lambda + gamma E[(conj(lambda) - conj(G))
/// (|lambda - G|^2 + w(lambda)^2)^{-1}]`, with `w = 0` off `Xi` where the
/// expectation still converges.
pub fn phi_map(lambda: Complex64, gamma: f64, quad: &GaussQuadrature, tol: f64) -> Result<Complex64> {
    if gamma == 0.0 {
        return Ok(lambda);
    }
    let w = solve_w(lambda, quad, tol)?;
    let numer = expect_phi_numerator(lambda, w, quad)?;
    Ok(lambda + gamma * numer)
}

/// All subordination quantities at once.
pub fn subordination(
    lambda: Complex64,
    gamma: f64,
    quad: &GaussQuadrature,
    tol: f64,
) -> Result<SubordinationData> {
    let in_xi = xi_membership(lambda, quad);
    let w = if in_xi { solve_w(lambda, quad, tol)? } else { 0.0 };
    let phi = if gamma == 0.0 {
        lambda
    } else {
        lambda + gamma * expect_phi_numerator(lambda, w, quad)?
    };
    Ok(SubordinationData { lambda, in_xi, w, phi })
}
