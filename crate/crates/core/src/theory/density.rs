//! Stieltjes inversion of the fixed-point solution to a density on a grid.

use num_complex::Complex64;

use super::{continue_in_eta_with, solve_at, QPoint, SolverConfig};
use crate::error::{Error, Result};
use crate::gaussexp::{CovarianceSpec, GaussQuadrature};

/// Grid-backed density on the real line with CDF and quantile access.
///
/// `density` is stored normalized to unit trapezoid mass; `total_mass`
/// records the raw pre-normalization mass so normalization drift stays
/// visible.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure1D {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub total_mass: f64,
    /// Grid indices where the solver failed; their density is linearly
    /// interpolated from the neighbours and flagged here.
    pub failed: Vec<usize>,
}

impl Measure1D {
    pub fn from_raw(grid: Vec<f64>, mut density: Vec<f64>, failed: Vec<usize>) -> Result<Self> {
        if grid.len() != density.len() || grid.len() < 2 {
            return Err(Error::Parameter("grid/density length mismatch".into()));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parameter("grid must be strictly increasing".into()));
        }
        let raw = trapezoid(&grid, &density);
        if raw > 0.0 {
            for d in &mut density {
                *d /= raw;
            }
        }
        Ok(Measure1D {
            grid,
            density,
            total_mass: raw,
            failed,
        })
    }

    /// CDF by cumulative trapezoid with linear interpolation between nodes.
    pub fn cdf(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return 0.0;
        }
        if x >= g[g.len() - 1] {
            return 1.0;
        }
        let mut acc = 0.0;
        for i in 1..g.len() {
            if x < g[i] {
                let t = x - g[i - 1];
                let slope = (self.density[i] - self.density[i - 1]) / (g[i] - g[i - 1]);
                let f = acc + self.density[i - 1] * t + 0.5 * slope * t * t;
                return f.clamp(0.0, 1.0);
            }
            acc += 0.5 * (self.density[i] + self.density[i - 1]) * (g[i] - g[i - 1]);
        }
        1.0
    }

    /// Generalized inverse of the CDF, for inverse-transform sampling.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let g = &self.grid;
        let mut acc = 0.0;
        for i in 1..g.len() {
            let seg = 0.5 * (self.density[i] + self.density[i - 1]) * (g[i] - g[i - 1]);
            if acc + seg >= p {
                if seg <= 0.0 {
                    return g[i - 1];
                }
                // solve the quadratic piece for the crossing point
                let need = p - acc;
                let h = g[i] - g[i - 1];
                let d0 = self.density[i - 1];
                let slope = (self.density[i] - self.density[i - 1]) / h;
                let t = if slope.abs() < 1e-300 {
                    need / d0.max(1e-300)
                } else {
                    let disc = (d0 * d0 + 2.0 * slope * need).max(0.0);
                    (-d0 + disc.sqrt()) / slope
                };
                return g[i - 1] + t.clamp(0.0, h);
            }
            acc += seg;
        }
        g[g.len() - 1]
    }

    pub fn moment(&self, k: u32) -> f64 {
        let vals: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(&t, &d)| t.powi(k as i32) * d)
            .collect();
        trapezoid(&self.grid, &vals)
    }
}

pub(crate) fn trapezoid(grid: &[f64], vals: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (vals[i] + vals[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}

/// Default singular-value grid for a shift `z`: `[0, s_step, ..., s_max]`
/// with `s_max = 2 + |z| + margin`.
pub fn default_s_grid(z: Complex64, cfg: &SolverConfig) -> Vec<f64> {
    let s_max = 2.0 + z.norm() + cfg.support_margin;
    let n = (s_max / cfg.s_step).ceil() as usize + 1;
    (0..n).map(|i| i as f64 * cfg.s_step).collect()
}

/// Density of the singular-value limit law of the shifted Laplacian:
/// `density(s) = (2/pi) Im alpha(q(z, s + i eps))` for `s >= 0`, swept with
/// warm starts from an initial continuation down the first grid point. The
/// factor 2 folds the symmetrized law back onto `[0, infinity)`.
pub fn density_nu(
    z: Complex64,
    s_grid: &[f64],
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<Measure1D> {
    if s_grid.len() < 2 {
        return Err(Error::Parameter("s_grid needs at least two points".into()));
    }
    if s_grid[0] < 0.0 {
        return Err(Error::Parameter("s_grid must be nonnegative".into()));
    }
    let required = 2.0 + z.norm() + 2.0;
    if *s_grid.last().unwrap() < required {
        return Err(Error::Parameter(format!(
            "s_grid max {} below support bound {required}",
            s_grid.last().unwrap()
        )));
    }
    let quad = GaussQuadrature::cached(k, cfg.quadrature_spec())?;
    let eps = cfg.inversion_eps;
    let mut density = Vec::with_capacity(s_grid.len());
    let mut failed = Vec::new();
    let (first, mut state) =
        continue_in_eta_with(z, Complex64::new(s_grid[0], eps), gamma, &quad, cfg)?;
    density.push((2.0 / std::f64::consts::PI) * first.alpha.im);
    for (i, &s) in s_grid.iter().enumerate().skip(1) {
        let eta = Complex64::new(s, eps);
        match solve_at(
            &QPoint::new(z, eta)?.matrix(),
            eta,
            gamma,
            &quad,
            cfg,
            Some(state),
        ) {
            Ok(pair) => {
                state = pair.gamma_matrix();
                density.push((2.0 / std::f64::consts::PI) * pair.alpha.im);
            }
            Err(_) => {
                failed.push(i);
                let prev = *density.last().unwrap();
                density.push(prev);
            }
        }
    }
    Measure1D::from_raw(s_grid.to_vec(), density, failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quarter_circle_from_degenerate_hook() {
        // gamma = 0 with the G = 0 hook at z = 0 is the singular-value law of
        // the circular operator: density sqrt(4 - s^2)/pi on [0, 2], second
        // moment exactly 1.
        let cfg = SolverConfig::default();
        let grid = default_s_grid(Complex64::new(0.0, 0.0), &cfg);
        let nu = density_nu(Complex64::new(0.0, 0.0), &grid, 0.0, CovarianceSpec::zero(), &cfg).unwrap();
        assert!(nu.failed.is_empty());
        assert!((nu.total_mass - 1.0).abs() < 0.02, "raw mass {}", nu.total_mass);
        assert!((nu.moment(2) - 1.0).abs() < 0.02, "second moment {}", nu.moment(2));
        // pointwise against the closed form away from the edge
        for (i, &s) in nu.grid.iter().enumerate() {
            if s < 1.6 {
                let want = (4.0 - s * s).sqrt() / std::f64::consts::PI;
                assert!(
                    (nu.density[i] - want).abs() < 0.05,
                    "density({s}) = {} want {want}",
                    nu.density[i]
                );
            }
        }
    }

    #[test]
    fn mass_close_to_one_for_model_covariance() {
        let cfg = SolverConfig::default();
        let z = Complex64::new(1.0, 0.0);
        let grid = default_s_grid(z, &cfg);
        let nu = density_nu(z, &grid, 0.5, CovarianceSpec::new(1.0).unwrap(), &cfg).unwrap();
        assert!((nu.total_mass - 1.0).abs() < 0.02, "raw mass {}", nu.total_mass);
        assert!(nu.density.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn grid_validation() {
        let cfg = SolverConfig::default();
        let k = CovarianceSpec::new(1.0).unwrap();
        assert!(density_nu(Complex64::new(0.0, 0.0), &[0.0, 1.0], 0.0, k, &cfg).is_err());
        assert!(density_nu(Complex64::new(0.0, 0.0), &[0.0], 0.0, k, &cfg).is_err());
    }

    #[test]
    fn cdf_quantile_roundtrip() {
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.02).collect();
        let density: Vec<f64> = grid.iter().map(|&t| (-(t - 2.0) * (t - 2.0)).exp()).collect();
        let m = Measure1D::from_raw(grid, density, vec![]).unwrap();
        for p in [0.01, 0.1, 0.5, 0.9, 0.99] {
            let x = m.quantile(p);
            assert_abs_diff_eq!(m.cdf(x), p, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(m.cdf(4.0), 1.0, epsilon = 1e-12);
        assert_eq!(m.cdf(-1.0), 0.0);
    }
}
