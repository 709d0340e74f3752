//! Expectations over the limiting complex Gaussian `G`.
//!
//! The limit laws are driven by a complex Gaussian whose real and imaginary
//! parts are independent centered normals with variances `mu` and `1 - mu`.
//! Everything downstream needs expectations of smooth kernels against that
//! law; they are evaluated with a fixed Gauss–Hermite rule for the standard
//! normal weight, tensorized when both variances are positive and collapsed
//! to a single axis when the covariance is rank one.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// 2x2 complex matrix in row-major form; the working currency of the
/// block fixed-point machinery.
pub type Mat2 = [[Complex64; 2]; 2];

/// Covariance of the limiting Gaussian: `K = variance * diag(mu, 1 - mu)`.
///
/// `variance` is 1 for the model covariance. `variance = 0` is a test hook
/// that degenerates `G` to zero and recovers the pure circular/elliptic
/// baselines; it is not part of the matrix model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    mu: f64,
    variance: f64,
}

impl CovarianceSpec {
    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) || !mu.is_finite() {
            return Err(Error::Parameter(format!("mu = {mu} must lie in [0, 1]")));
        }
        Ok(CovarianceSpec { mu, variance: 1.0 })
    }

    /// Degenerate covariance with `G = 0` almost surely (test hook).
    pub fn zero() -> Self {
        CovarianceSpec { mu: 1.0, variance: 0.0 }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Trace of `K`; 1 for the model covariance, 0 for the degenerate hook.
    pub fn total_variance(&self) -> f64 {
        self.variance
    }

    /// Rank of `K`: 0 (hook), 1 (mu in {0, 1}) or 2.
    pub fn rank(&self) -> u8 {
        if self.variance == 0.0 {
            0
        } else if self.mu == 0.0 || self.mu == 1.0 {
            1
        } else {
            2
        }
    }

    pub fn re_variance(&self) -> f64 {
        self.variance * self.mu
    }

    pub fn im_variance(&self) -> f64 {
        self.variance * (1.0 - self.mu)
    }
}

/// Order of the Gauss–Hermite rule (nodes per axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { order: 64 }
    }
}

/// Gauss–Hermite nodes and weights for the standard normal weight
/// `exp(-x^2/2)/sqrt(2 pi)`, normalized so the weights sum to 1.
///
/// Computed by Golub–Welsch on the Jacobi matrix of the monic probabilists'
/// Hermite polynomials (zero diagonal, off-diagonal `sqrt(k)`). Exact for
/// monomials up to degree `2 * order - 1`.
pub fn hermite_gauss_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::Parameter("quadrature order must be positive".into()));
    }
    if order == 1 {
        return Ok((vec![0.0], vec![1.0]));
    }
    let mut jacobi = Array2::<f64>::zeros((order, order));
    for k in 1..order {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let (vals, vecs) = jacobi
        .eigh(UPLO::Lower)
        .map_err(|e| Error::backend("hermite rule Golub-Welsch", e))?;
    let mut nodes: Vec<f64> = vals.to_vec();
    let mut weights: Vec<f64> = (0..order).map(|i| vecs[(0, i)] * vecs[(0, i)]).collect();
    // Enforce the exact +/- symmetry of the rule so odd monomials integrate
    // to zero identically.
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// A quadrature rule materialized for a specific covariance: a flat list of
/// complex nodes `g` with probability weights, plus the covariance itself.
#[derive(Debug, Clone)]
pub struct GaussQuadrature {
    k: CovarianceSpec,
    order: usize,
    nodes: Vec<(Complex64, f64)>,
}

impl GaussQuadrature {
    pub fn new(k: CovarianceSpec, spec: QuadratureSpec) -> Result<Self> {
        let order = spec.order;
        let nodes = match k.rank() {
            0 => vec![(Complex64::new(0.0, 0.0), 1.0)],
            1 => {
                let (xs, ws) = hermite_gauss_rule(order)?;
                let (sr, si) = (k.re_variance().sqrt(), k.im_variance().sqrt());
                xs.iter()
                    .zip(&ws)
                    .map(|(&x, &w)| (Complex64::new(sr * x, si * x), w))
                    .collect()
            }
            _ => {
                let (xs, ws) = hermite_gauss_rule(order)?;
                let (sr, si) = (k.re_variance().sqrt(), k.im_variance().sqrt());
                let mut nodes = Vec::with_capacity(order * order);
                for (i, &x) in xs.iter().enumerate() {
                    for (j, &y) in xs.iter().enumerate() {
                        nodes.push((Complex64::new(sr * x, si * y), ws[i] * ws[j]));
                    }
                }
                nodes
            }
        };
        Ok(GaussQuadrature { k, order, nodes })
    }

    /// Shared, cached rule; the tables are immutable and safe to read
    /// concurrently.
    pub fn cached(k: CovarianceSpec, spec: QuadratureSpec) -> Result<Arc<GaussQuadrature>> {
        static CACHE: Lazy<Mutex<HashMap<(u64, u64, usize), Arc<GaussQuadrature>>>> =
            Lazy::new(|| Mutex::new(HashMap::new()));
        let key = (k.mu.to_bits(), k.variance.to_bits(), spec.order);
        let mut cache = CACHE.lock().unwrap();
        if let Some(rule) = cache.get(&key) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(GaussQuadrature::new(k, spec)?);
        cache.insert(key, rule.clone());
        Ok(rule)
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        &self.k
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[(Complex64, f64)] {
        &self.nodes
    }

    /// True when `E[|G - lambda|^{-2}]` diverges (logarithmically or worse),
    /// i.e. when `lambda` sits on the support of `G` and the kernel has no
    /// smoothing `w`.
    pub fn kernel_divergent_at(&self, lambda: Complex64) -> bool {
        match self.k.rank() {
            0 => lambda.norm_sqr() == 0.0,
            1 => {
                if self.k.mu == 1.0 {
                    lambda.im == 0.0
                } else {
                    lambda.re == 0.0
                }
            }
            _ => true,
        }
    }
}

/// `E[(|G - lambda|^2 + w^2)^{-1}]`.
///
/// Returns `f64::INFINITY` when `w = 0` and the integral diverges (rank-2
/// covariance, or rank-1 with `lambda` on the support line). The sentinel is
/// deliberate: set membership tests consume it directly.
pub fn expect_kernel_inv(lambda: Complex64, w: f64, quad: &GaussQuadrature) -> f64 {
    if w == 0.0 && quad.kernel_divergent_at(lambda) {
        return f64::INFINITY;
    }
    let w2 = w * w;
    let mut acc = 0.0;
    for &(g, wt) in quad.nodes() {
        acc += wt / ((lambda - g).norm_sqr() + w2);
    }
    acc
}

/// `E[(conj(lambda) - conj(G)) (|lambda - G|^2 + w^2)^{-1}]`, the expectation
/// factor of the pushforward map.
pub fn expect_phi_numerator(lambda: Complex64, w: f64, quad: &GaussQuadrature) -> Result<Complex64> {
    if w == 0.0 && quad.kernel_divergent_at(lambda) {
        return Err(Error::DivergentExpectation);
    }
    let w2 = w * w;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(g, wt) in quad.nodes() {
        let d = lambda - g;
        acc += d.conj() * (wt / (d.norm_sqr() + w2));
    }
    Ok(acc)
}

/// `E[(q_eff - [[0, G], [conj(G), 0]])^{-1}]`, node-by-node 2x2 inversion.
///
/// Requires `q_eff - [[0, g], [conj(g), 0]]` invertible at every node, which
/// holds whenever the diagonal of `q_eff` has strictly positive imaginary
/// part.
pub fn expect_block_resolvent(q_eff: &Mat2, quad: &GaussQuadrature) -> Result<Mat2> {
    let p = q_eff[0][0];
    let pd = q_eff[1][1];
    let lam = q_eff[0][1];
    let lam2 = q_eff[1][0];
    let ppd = p * pd;
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for &(g, wt) in quad.nodes() {
        let u = lam - g;
        let v = lam2 - g.conj();
        let det = ppd - u * v;
        let d2 = det.norm_sqr();
        if d2 == 0.0 {
            return Err(Error::SingularNode);
        }
        let r = det.conj() * (wt / d2); // wt / det
        s0 += r;
        s1 += u * r;
        s2 += v * r;
    }
    Ok([[pd * s0, -s1], [-s2, p * s0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn quad(mu: f64, order: usize) -> GaussQuadrature {
        GaussQuadrature::new(CovarianceSpec::new(mu).unwrap(), QuadratureSpec { order }).unwrap()
    }

    #[test]
    fn hermite_rule_integrates_monomials_exactly() {
        let (xs, ws) = hermite_gauss_rule(64).unwrap();
        // E[x^{2k}] = (2k - 1)!! for the standard normal; odd moments vanish.
        let mut target = 1.0;
        for deg in 0..=20usize {
            let got: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * x.powi(deg as i32)).sum();
            if deg % 2 == 1 {
                assert!(got.abs() < 1e-12, "odd degree {deg}: {got}");
            } else {
                assert!(
                    (got - target).abs() <= 1e-12 * target,
                    "degree {deg}: got {got}, want {target}"
                );
                target *= (deg + 1) as f64;
            }
        }
    }

    #[test]
    fn hermite_rule_weights_positive_and_normalized() {
        for order in [1, 2, 7, 64, 128] {
            let (_, ws) = hermite_gauss_rule(order).unwrap();
            assert!(ws.iter().all(|&w| w > 0.0));
            assert_abs_diff_eq!(ws.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn kernel_inv_rank1_off_line_bounded() {
        // mu = 1, lambda = 2i, w = 0: G^2 + 4 >= 4 so the value is <= 1/4.
        let q = quad(1.0, 64);
        let v = expect_kernel_inv(Complex64::new(0.0, 2.0), 0.0, &q);
        assert!(v.is_finite());
        assert!(v <= 0.25);
    }

    #[test]
    fn kernel_inv_divergent_cases() {
        let q2 = quad(0.5, 32);
        assert_eq!(expect_kernel_inv(Complex64::new(0.3, -1.2), 0.0, &q2), f64::INFINITY);
        let q1 = quad(1.0, 32);
        assert_eq!(expect_kernel_inv(Complex64::new(0.0, 0.0), 0.0, &q1), f64::INFINITY);
        let q0 = GaussQuadrature::new(CovarianceSpec::zero(), QuadratureSpec::default()).unwrap();
        assert_eq!(expect_kernel_inv(Complex64::new(0.0, 0.0), 0.0, &q0), f64::INFINITY);
        assert_abs_diff_eq!(expect_kernel_inv(Complex64::new(2.0, 0.0), 0.0, &q0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn kernel_inv_matches_closed_form_at_origin() {
        // mu = 1, lambda = 0, w = 1: E[1/(G^2+1)] = sqrt(pi/2) e^{1/2} erfc(1/sqrt(2)).
        let q = quad(1.0, 64);
        let v = expect_kernel_inv(Complex64::new(0.0, 0.0), 1.0, &q);
        assert_abs_diff_eq!(v, 0.6556795424187986, epsilon = 1e-12);
    }

    #[test]
    fn kernel_inv_monte_carlo_agreement() {
        // mu = 1, lambda = 0, w = 1 against 10^7 samples within 3 sigma.
        let q = quad(1.0, 64);
        let v = expect_kernel_inv(Complex64::new(0.0, 0.0), 1.0, &q);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let nsamples = 10_000_000usize;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..nsamples {
            let g: f64 = rng.sample(StandardNormal);
            let x = 1.0 / (g * g + 1.0);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / nsamples as f64;
        let se = ((sumsq / nsamples as f64 - mean * mean) / nsamples as f64).sqrt();
        assert!((v - mean).abs() <= 3.0 * se, "quad {v} vs MC {mean} +- {se}");
    }

    #[test]
    fn phi_numerator_frozen_value_and_symmetry() {
        let q = quad(1.0, 64);
        // Independent quadrature oracle (scipy.integrate.quad):
        let v = expect_phi_numerator(Complex64::new(1.0, 1.0), 0.7, &q).unwrap();
        assert_abs_diff_eq!(v.re, 0.24291582041179155, epsilon = 1e-10);
        assert_abs_diff_eq!(v.im, -0.39417735329596765, epsilon = 1e-10);
        // lambda = 0 with symmetric real G: odd integrand.
        let at0 = expect_phi_numerator(Complex64::new(0.0, 0.0), 0.9, &q).unwrap();
        assert!(at0.norm() < 1e-15);
        // conjugation equivariance for rank-1 real covariance.
        let lam = Complex64::new(0.4, 0.8);
        let a = expect_phi_numerator(lam, 0.5, &q).unwrap();
        let b = expect_phi_numerator(lam.conj(), 0.5, &q).unwrap();
        assert!((a.conj() - b).norm() < 1e-14);
    }

    #[test]
    fn block_resolvent_degenerate_covariance_is_exact_inverse() {
        let q0 = GaussQuadrature::new(CovarianceSpec::zero(), QuadratureSpec::default()).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let q_eff = [[i * 2.0, Complex64::new(0.5, 0.1)], [Complex64::new(0.5, -0.1), i * 2.0]];
        let got = expect_block_resolvent(&q_eff, &q0).unwrap();
        // direct 2x2 inverse
        let det = q_eff[0][0] * q_eff[1][1] - q_eff[0][1] * q_eff[1][0];
        let inv = [
            [q_eff[1][1] / det, -q_eff[0][1] / det],
            [-q_eff[1][0] / det, q_eff[0][0] / det],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert!((got[r][c] - inv[r][c]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn block_resolvent_large_eta_asymptotics() {
        let t = 1e3;
        let q = quad(1.0, 64);
        let q_eff = [
            [Complex64::new(0.0, t), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, t)],
        ];
        let got = expect_block_resolvent(&q_eff, &q).unwrap();
        let want = Complex64::new(0.0, -1.0 / t);
        for r in 0..2 {
            assert!((got[r][r] - want).norm() < 10.0 / (t * t * t));
        }
        assert!(got[0][1].norm() < 1e-12);
        assert!(got[1][0].norm() < 1e-12);
    }

    #[test]
    fn block_resolvent_monte_carlo_agreement() {
        // mu = 1, q_eff = [[i, 0.5], [0.5, i]], entrywise within 3 sigma of MC.
        let q = quad(1.0, 64);
        let q_eff = [
            [Complex64::new(0.0, 1.0), Complex64::new(0.5, 0.0)],
            [Complex64::new(0.5, 0.0), Complex64::new(0.0, 1.0)],
        ];
        let got = expect_block_resolvent(&q_eff, &q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nsamples = 10_000_000usize;
        let mut mean = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut m2 = [[0.0f64; 2]; 2];
        for k in 0..nsamples {
            let g: f64 = rng.sample(StandardNormal);
            let u = q_eff[0][1] - g;
            let v = q_eff[1][0] - g;
            let det = q_eff[0][0] * q_eff[1][1] - u * v;
            let inv = [[q_eff[1][1] / det, -u / det], [-v / det, q_eff[0][0] / det]];
            for r in 0..2 {
                for c in 0..2 {
                    let prev = mean[r][c];
                    mean[r][c] += (inv[r][c] - prev) / (k + 1) as f64;
                    m2[r][c] += (inv[r][c] - prev).norm_sqr() * ((k) as f64 / (k + 1) as f64);
                }
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                let se = (m2[r][c] / (nsamples as f64 * nsamples as f64)).sqrt();
                assert!(
                    (got[r][c] - mean[r][c]).norm() <= 3.0 * se + 1e-12,
                    "entry ({r},{c}): {} vs {} +- {}",
                    got[r][c],
                    mean[r][c],
                    se
                );
            }
        }
    }

    #[test]
    fn kernel_inv_strictly_decreasing_in_w() {
        for mu in [0.0, 0.5, 1.0] {
            let q = quad(mu, 48);
            let lam = Complex64::new(0.7, 0.4);
            let mut prev = f64::INFINITY;
            for k in 1..=40 {
                let w = 0.05 * k as f64;
                let v = expect_kernel_inv(lam, w, &q);
                assert!(v < prev, "not decreasing at w = {w} (mu = {mu})");
                prev = v;
            }
        }
    }

    #[test]
    fn block_resolvent_herglotz_sign() {
        // Inputs with positive-definite imaginary part map to outputs with
        // negative-definite imaginary part.
        let q = quad(0.5, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let e: f64 = rng.gen_range(0.05..2.0);
            let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let q_eff = [[Complex64::new(0.0, e), z], [z.conj(), Complex64::new(0.0, e)]];
            let out = expect_block_resolvent(&q_eff, &q).unwrap();
            // imaginary part (out - out^H) / 2i must be negative definite
            let im00 = out[0][0].im;
            let im11 = out[1][1].im;
            let off = (out[0][1] - out[1][0].conj()) / Complex64::new(0.0, 2.0);
            let det = im00 * im11 - off.norm_sqr();
            assert!(im00 < 0.0 && im11 < 0.0 && det > -1e-18, "Herglotz violated");
        }
    }

    #[test]
    fn covariance_spec_validation() {
        assert!(CovarianceSpec::new(-0.1).is_err());
        assert!(CovarianceSpec::new(1.1).is_err());
        assert_eq!(CovarianceSpec::new(1.0).unwrap().rank(), 1);
        assert_eq!(CovarianceSpec::new(0.0).unwrap().rank(), 1);
        assert_eq!(CovarianceSpec::new(0.3).unwrap().rank(), 2);
        assert_eq!(CovarianceSpec::zero().rank(), 0);
    }
}
