//! Limit-law machinery: the 2x2 block fixed-point equation, Stieltjes
//! inversion to singular-value densities, the subordination quantities
//! (`Xi`, `w`, `Phi`) and the scalar free-convolution cross-check.
//!
//! The central object is the pair `(alpha, beta)` solving
//!
//! ```text
//! [[alpha, beta], [beta', alpha]]
//!     = -E ( q(z, eta) + Sigma(Gamma) - [[0, G], [conj(G), 0]] )^{-1}
//! ```
//!
//! with `Sigma [[a, b], [c, d]] = [[d, gamma c], [gamma b, a]]` and the
//! expectation over the limiting Gaussian `G`. `alpha` is the Stieltjes
//! transform of the symmetrized singular-value law of the shifted Laplacian
//! limit; its boundary values give the density. Uniqueness is proven on the
//! imaginary axis only, so off-axis points are selected by damped Picard
//! iteration continued down from large `Im eta`, where the map contracts.

mod cache;
mod density;
mod freeconv;
mod subordination;

pub use cache::TheoryCache;
pub use density::{density_nu, Measure1D};
pub use freeconv::{cauchy_transform_normal, faddeeva_w, semicircle_gaussian_freeconv};
pub use subordination::{phi_map, solve_w, subordination, xi_membership, SubordinationData};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussexp::{expect_block_resolvent, CovarianceSpec, GaussQuadrature, Mat2, QuadratureSpec};

/// A spectral-parameter point `q(z, eta) = [[eta, z], [conj(z), eta]]` with
/// `Im(eta) > 0`; the on-axis form is `eta = i eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPoint {
    pub z: Complex64,
    pub eta: Complex64,
}

impl QPoint {
    pub fn new(z: Complex64, eta: Complex64) -> Result<Self> {
        if eta.im <= 0.0 {
            return Err(Error::Parameter(format!("Im(eta) = {} must be positive", eta.im)));
        }
        Ok(QPoint { z, eta })
    }

    pub fn matrix(&self) -> Mat2 {
        [[self.eta, self.z], [self.z.conj(), self.eta]]
    }
}

/// Solution of the fixed-point equation at one `q(z, eta)`.
///
/// `beta_lower` is the (2,1) entry; on the imaginary axis it equals
/// `conj(beta)` and `alpha` is purely imaginary, up to solver tolerance.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesPair {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub beta_lower: Complex64,
    pub residual: f64,
    pub iterations: u32,
}

impl StieltjesPair {
    pub fn gamma_matrix(&self) -> Mat2 {
        [[self.alpha, self.beta], [self.beta_lower, self.alpha]]
    }
}

/// Tolerances, damping and grid geometry for every solver in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Entrywise fixed-point residual target.
    pub tol: f64,
    /// Iteration cap per eta point.
    pub max_iters: u32,
    /// Picard damping factor in (0, 1].
    pub damping: f64,
    /// Starting height of the eta continuation.
    pub eta_start: f64,
    /// Geometric descent factor for Im(eta).
    pub eta_step: f64,
    /// Smallest admissible Im(eta).
    pub eta_min: f64,
    /// Gauss-Hermite nodes per axis.
    pub quad_order: usize,
    /// Smoothing height used by Stieltjes inversion.
    pub inversion_eps: f64,
    /// Step of the singular-value grid.
    pub s_step: f64,
    /// Grid safety margin: s_max = 2 + |z| + margin.
    pub support_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-11,
            max_iters: 20_000,
            damping: 0.5,
            eta_start: 100.0,
            eta_step: 0.7,
            eta_min: 1e-6,
            quad_order: 64,
            inversion_eps: 0.01,
            s_step: 0.01,
            support_margin: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec { order: self.quad_order }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Parameter("solver tol/damping out of range".into()));
        }
        if !(self.eta_step > 0.0 && self.eta_step < 1.0) || !(self.eta_start > 0.0) {
            return Err(Error::Parameter("eta continuation parameters out of range".into()));
        }
        if self.quad_order == 0 || !(self.inversion_eps > 0.0) || !(self.s_step > 0.0) {
            return Err(Error::Parameter("quadrature/grid parameters out of range".into()));
        }
        Ok(())
    }
}

fn mat2_sub_norm(a: &Mat2, b: &Mat2) -> f64 {
    let mut m = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            m = m.max((a[r][c] - b[r][c]).norm());
        }
    }
    m
}

/// One application of the fixed-point map `F(Gamma) = -E(q + Sigma(Gamma) - A)^{-1}`.
fn picard_map(q: &Mat2, gamma: f64, state: &Mat2, quad: &GaussQuadrature) -> Result<Mat2> {
    // Sigma [[a, b], [c, d]] = [[d, gamma c], [gamma b, a]]
    let sigma = [
        [state[1][1], gamma * state[1][0]],
        [gamma * state[0][1], state[0][0]],
    ];
    let q_eff = [
        [q[0][0] + sigma[0][0], q[0][1] + sigma[0][1]],
        [q[1][0] + sigma[1][0], q[1][1] + sigma[1][1]],
    ];
    let e = expect_block_resolvent(&q_eff, quad)?;
    Ok([[-e[0][0], -e[0][1]], [-e[1][0], -e[1][1]]])
}

fn solve_at(
    q: &Mat2,
    eta: Complex64,
    gamma: f64,
    quad: &GaussQuadrature,
    cfg: &SolverConfig,
    init: Option<Mat2>,
) -> Result<StieltjesPair> {
    let minus_inv_eta = -1.0 / eta;
    let mut state = init.unwrap_or([
        [minus_inv_eta, Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), minus_inv_eta],
    ]);
    let mut residual = f64::INFINITY;
    for iter in 0..cfg.max_iters {
        if state[0][0].im <= 0.0 || state[1][1].im <= 0.0 {
            return Err(Error::HerglotzLoss { eta, iteration: iter });
        }
        let next = picard_map(q, gamma, &state, quad)?;
        residual = mat2_sub_norm(&next, &state);
        if residual <= cfg.tol {
            return Ok(StieltjesPair {
                alpha: next[0][0],
                beta: next[0][1],
                beta_lower: next[1][0],
                residual,
                iterations: iter + 1,
            });
        }
        let d = cfg.damping;
        for r in 0..2 {
            for c in 0..2 {
                state[r][c] = (1.0 - d) * state[r][c] + d * next[r][c];
            }
        }
    }
    Err(Error::NonConvergence {
        eta,
        residual,
        iterations: cfg.max_iters,
    })
}

/// Solve the fixed-point equation at a single `q(z, eta)` by damped Picard
/// iteration from the Herglotz start `-1/eta * I`.
pub fn solve_fixed_point(
    z: Complex64,
    eta: Complex64,
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<StieltjesPair> {
    if gamma.abs() > 1.0 {
        return Err(Error::Parameter(format!("|gamma| = {} must be <= 1", gamma.abs())));
    }
    let q = QPoint::new(z, eta)?;
    let quad = GaussQuadrature::cached(k, cfg.quadrature_spec())?;
    solve_at(&q.matrix(), eta, gamma, &quad, cfg, None)
}

/// Continuation in `Im(eta)`: descend geometrically from `cfg.eta_start` to
/// the target height, warm-starting each solve with the previous solution.
/// Picard contracts at large height, and the warm start carries that branch
/// down to the target.
pub fn continue_in_eta(
    z: Complex64,
    target_eta: Complex64,
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<StieltjesPair> {
    if gamma.abs() > 1.0 {
        return Err(Error::Parameter(format!("|gamma| = {} must be <= 1", gamma.abs())));
    }
    if target_eta.im < cfg.eta_min {
        return Err(Error::Parameter(format!(
            "Im(target_eta) = {} below eta_min = {}",
            target_eta.im, cfg.eta_min
        )));
    }
    let quad = GaussQuadrature::cached(k, cfg.quadrature_spec())?;
    continue_in_eta_with(z, target_eta, gamma, &quad, cfg).map(|(pair, _)| pair)
}

/// Continuation that also returns the final state for warm-starting sweeps.
pub(crate) fn continue_in_eta_with(
    z: Complex64,
    target_eta: Complex64,
    gamma: f64,
    quad: &GaussQuadrature,
    cfg: &SolverConfig,
) -> Result<(StieltjesPair, Mat2)> {
    let re = target_eta.re;
    let target_im = target_eta.im;
    let mut init: Option<Mat2> = None;
    let mut h = cfg.eta_start;
    while h > target_im {
        let eta = Complex64::new(re, h);
        let pair = solve_at(&QPoint::new(z, eta)?.matrix(), eta, gamma, quad, cfg, init)?;
        init = Some(pair.gamma_matrix());
        h *= cfg.eta_step;
    }
    let eta = Complex64::new(re, target_im);
    let pair = solve_at(&QPoint::new(z, eta)?.matrix(), eta, gamma, quad, cfg, init)?;
    let state = pair.gamma_matrix();
    Ok((pair, state))
}

/// Uniqueness probe: run the solver at `q(z, i eps)` from `n_starts` random
/// initial states with the Herglotz sign and return the maximal deviation of
/// `(alpha, beta)` from the continuation solution.
pub fn uniqueness_probe(
    z: Complex64,
    eps: f64,
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
    n_starts: usize,
    seed: u64,
) -> Result<f64> {
    use rand::prelude::*;
    let eta = Complex64::new(0.0, eps);
    let reference = continue_in_eta(z, eta, gamma, k, cfg)?;
    let quad = GaussQuadrature::cached(k, cfg.quadrature_spec())?;
    let q = QPoint::new(z, eta)?.matrix();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_starts {
        let init = [
            [
                Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.1..2.0)),
                Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
            ],
            [
                Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
                Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.1..2.0)),
            ],
        ];
        let pair = solve_at(&q, eta, gamma, &quad, cfg, Some(init))?;
        worst = worst
            .max((pair.alpha - reference.alpha).norm())
            .max((pair.beta - reference.beta).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn k1() -> CovarianceSpec {
        CovarianceSpec::new(1.0).unwrap()
    }

    #[test]
    fn large_eta_expansion() {
        // alpha ~ -1/eta = i/T, beta ~ z/eta^2 = -z/T^2 at eta = iT.
        let cfg = SolverConfig::default();
        let t = 1e3;
        let z = Complex64::new(0.8, -0.3);
        let pair = solve_fixed_point(z, Complex64::new(0.0, t), 0.5, k1(), &cfg).unwrap();
        assert!((pair.alpha - Complex64::new(0.0, 1.0 / t)).norm() < 10.0 * t.powi(-3));
        assert!((pair.beta - (-z / (t * t))).norm() < 1e-9);
        assert!(pair.residual <= cfg.tol);
    }

    #[test]
    fn on_axis_structure() {
        // At eta = i eps the solution has purely imaginary alpha with
        // 0 < Im(alpha) < 1/eps, and beta_lower = conj(beta).
        let cfg = SolverConfig::default();
        let eps = 0.05;
        for (z, gamma) in [
            (Complex64::new(0.5, 0.0), 0.5),
            (Complex64::new(1.0, 1.0), -0.5),
            (Complex64::new(0.0, 0.0), 0.25),
        ] {
            let pair = continue_in_eta(z, Complex64::new(0.0, eps), gamma, k1(), &cfg).unwrap();
            assert!(pair.alpha.re.abs() <= 10.0 * cfg.tol, "Re alpha = {}", pair.alpha.re);
            assert!(pair.alpha.im > 0.0 && pair.alpha.im < 1.0 / eps);
            assert!((pair.beta_lower - pair.beta.conj()).norm() <= 10.0 * cfg.tol);
        }
    }

    #[test]
    fn on_axis_beta_conjugate_pairing() {
        // beta(q(conj(z), i eps)) = conj(beta(q(z, i eps))) for mu = 1.
        let cfg = SolverConfig::default();
        let eps = 0.05;
        let z = Complex64::new(0.7, 0.4);
        let a = continue_in_eta(z, Complex64::new(0.0, eps), 0.5, k1(), &cfg).unwrap();
        let b = continue_in_eta(z.conj(), Complex64::new(0.0, eps), 0.5, k1(), &cfg).unwrap();
        assert!((a.beta.conj() - b.beta).norm() < 100.0 * cfg.tol);
        assert!((a.alpha - b.alpha).norm() < 100.0 * cfg.tol);
    }

    #[test]
    fn continuation_agrees_with_direct_solve() {
        let cfg = SolverConfig::default();
        let z = Complex64::new(0.5, 0.2);
        let eta = Complex64::new(0.0, 0.8);
        let direct = solve_fixed_point(z, eta, 0.5, k1(), &cfg).unwrap();
        let cont = continue_in_eta(z, eta, 0.5, k1(), &cfg).unwrap();
        assert!((direct.alpha - cont.alpha).norm() <= 10.0 * cfg.tol);
        assert!((direct.beta - cont.beta).norm() <= 10.0 * cfg.tol);
    }

    #[test]
    fn continuation_start_height_independence() {
        let z = Complex64::new(1.0, 0.0);
        let target = Complex64::new(0.3, 0.05);
        let mut cfg_a = SolverConfig::default();
        cfg_a.eta_start = 100.0;
        let mut cfg_b = SolverConfig::default();
        cfg_b.eta_start = 1000.0;
        let a = continue_in_eta(z, target, 0.5, k1(), &cfg_a).unwrap();
        let b = continue_in_eta(z, target, 0.5, k1(), &cfg_b).unwrap();
        assert!((a.alpha - b.alpha).norm() <= 10.0 * cfg_a.tol);
        assert!((a.beta - b.beta).norm() <= 10.0 * cfg_a.tol);
    }

    #[test]
    fn uniqueness_probe_random_starts() {
        // Ten random Herglotz initial states converge to the same solution
        // at eta = i eps.
        let cfg = SolverConfig::default();
        let z = Complex64::new(0.6, -0.4);
        let gamma = 0.5;
        let eps = 0.05;
        let quad = GaussQuadrature::cached(k1(), cfg.quadrature_spec()).unwrap();
        let eta = Complex64::new(0.0, eps);
        let q = QPoint::new(z, eta).unwrap().matrix();
        let reference = continue_in_eta(z, eta, gamma, k1(), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let init = [
                [
                    Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.1..2.0)),
                    Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
                ],
                [
                    Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
                    Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.1..2.0)),
                ],
            ];
            let pair = solve_at(&q, eta, gamma, &quad, &cfg, Some(init)).unwrap();
            assert!(
                (pair.alpha - reference.alpha).norm() <= 1e-8,
                "alpha mismatch: {} vs {}",
                pair.alpha,
                reference.alpha
            );
            assert!((pair.beta - reference.beta).norm() <= 1e-8);
        }
    }

    #[test]
    fn herglotz_sign_preserved_along_path() {
        let cfg = SolverConfig::default();
        let quad = GaussQuadrature::cached(k1(), cfg.quadrature_spec()).unwrap();
        let z = Complex64::new(0.5, 0.0);
        let mut h = cfg.eta_start;
        let mut init = None;
        while h > 0.02 {
            let eta = Complex64::new(0.0, h);
            let pair = solve_at(
                &QPoint::new(z, eta).unwrap().matrix(),
                eta,
                0.5,
                &quad,
                &cfg,
                init,
            )
            .unwrap();
            assert!(pair.alpha.im > 0.0, "Im alpha <= 0 at eta = {eta}");
            init = Some(pair.gamma_matrix());
            h *= cfg.eta_step;
        }
    }

    #[test]
    fn gamma_out_of_range_rejected() {
        let cfg = SolverConfig::default();
        assert!(solve_fixed_point(Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0), 1.5, k1(), &cfg).is_err());
        assert!(QPoint::new(Complex64::new(0.0, 0.0), Complex64::new(0.1, -0.2)).is_err());
    }

    #[test]
    fn degenerate_covariance_closed_form() {
        // With G = 0 and gamma = 0, the equation reduces to the scalar
        // semicircle-type equation for the symmetrized quarter-circle law:
        // alpha = -(eta + alpha)/((eta + alpha)^2 - |z + ...|^2) at z = 0
        // gives alpha(eta) = (-eta + sqrt(eta^2 - 4)) / 2.
        let cfg = SolverConfig::default();
        let eta = Complex64::new(0.0, 0.3);
        let pair = continue_in_eta(Complex64::new(0.0, 0.0), eta, 0.0, CovarianceSpec::zero(), &cfg).unwrap();
        let root = (eta * eta - 4.0).sqrt();
        let alpha = (-eta + root) / 2.0;
        assert_abs_diff_eq!(pair.alpha.im, alpha.im, epsilon = 1e-9);
        assert_abs_diff_eq!(pair.alpha.re, alpha.re, epsilon = 1e-9);
    }
}
