//! The limiting eigenvalue measure, assembled two independent ways: as the
//! Laplacian of the log-potential `U(z) = integral log(t) d nu_z(t)`, and as
//! the pushforward of the `gamma = 0` measure under the subordination map
//! `Phi_gamma`. Agreement of the two routes is an acceptance criterion.

use ndarray::prelude::*;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussexp::{CovarianceSpec, GaussQuadrature};
use crate::theory::{default_s_grid, density_nu, phi_map, SolverConfig};

/// Closed rectangle in the complex plane. Grid nodes are snapped to the
/// lattice `h Z` so mirrored coordinates coincide bitwise and pushforward
/// binning is exact for the identity map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::Parameter("degenerate rectangle".into()));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn centered(half_width: f64, half_height: f64) -> Self {
        Rect {
            x0: -half_width,
            x1: half_width,
            y0: -half_height,
            y1: half_height,
        }
    }
}

/// How the potential-grid assembly may exploit model symmetries.
///
/// The limiting Gaussian has mean zero with independent real/imaginary
/// parts and `gamma` is real, so `U(z) = U(-z) = U(conj z)` always; when
/// additionally `gamma = 0` and the covariance is isotropic (`mu = 1/2`),
/// `U` depends on `|z|` only. `Auto` picks the strongest valid reduction;
/// `None` evaluates every node independently (used to test the others).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymmetryMode {
    #[default]
    Auto,
    Quadrant,
    Radial,
    None,
}

/// Log-potential values on a lattice-aligned grid.
#[derive(Debug, Clone)]
pub struct PotentialGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `u[(iy, ix)] = U(x[ix] + i y[iy])`.
    pub u: Array2<f64>,
    pub eps_used: f64,
    pub gamma: f64,
    pub mu: f64,
    pub quad_order: usize,
    pub tol: f64,
}

/// Grid-backed planar density (per unit area).
#[derive(Debug, Clone)]
pub struct Measure2D {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub h: f64,
    /// `density[(iy, ix)]`, nonnegative after clipping.
    pub density: Array2<f64>,
    /// Raw mass `h^2 sum(density)` before any normalization.
    pub total_mass: f64,
    /// Magnitude of negative stencil overshoot removed by clipping.
    pub clipped_mass: f64,
}

impl Measure2D {
    /// Bin masses normalized to a probability vector.
    pub fn normalized_masses(&self) -> Array2<f64> {
        let scale = self.h * self.h / self.total_mass;
        self.density.mapv(|d| d * scale)
    }

    /// Index of the bin containing the point, if inside the grid. Bin
    /// `(iy, ix)` is centered at `(x[ix], y[iy])` with side `h`.
    pub fn bin_of(&self, p: Complex64) -> Option<(usize, usize)> {
        let ix = ((p.re - self.x[0]) / self.h).round();
        let iy = ((p.im - self.y[0]) / self.h).round();
        if ix < 0.0 || iy < 0.0 {
            return None;
        }
        let (ix, iy) = (ix as usize, iy as usize);
        if ix >= self.x.len() || iy >= self.y.len() {
            return None;
        }
        Some((iy, ix))
    }
}

/// `U(z) = integral_0^infty log(t) d nu_z(t)`, with the head `[0, s_0)`
/// integrated against the analytic stand-in `c log t` (`c` the density at
/// the first grid point; the log singularity is integrable).
pub fn log_potential(z: Complex64, gamma: f64, k: CovarianceSpec, cfg: &SolverConfig) -> Result<f64> {
    let s0 = 1e-3;
    let mut grid = vec![s0];
    grid.extend(default_s_grid(z, cfg).into_iter().skip(1));
    let nu = density_nu(z, &grid, gamma, k, cfg)?;
    Ok(log_integral(&nu.grid, &nu.density))
}

fn log_integral(grid: &[f64], density: &[f64]) -> f64 {
    let s0 = grid[0];
    let head = density[0] * s0 * (s0.ln() - 1.0);
    let mut acc = head;
    for i in 1..grid.len() {
        acc += 0.5 * (density[i] * grid[i].ln() + density[i - 1] * grid[i - 1].ln()) * (grid[i] - grid[i - 1]);
    }
    acc
}

fn snap(v: f64, h: f64) -> i64 {
    (v / h).round() as i64
}

/// Evaluate the log-potential on the lattice-snapped grid over `rect`.
pub fn potential_grid(
    rect: Rect,
    h: f64,
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
    symmetry: SymmetryMode,
) -> Result<PotentialGrid> {
    if !(h > 0.0) {
        return Err(Error::Parameter("grid step must be positive".into()));
    }
    let (ix0, ix1) = (snap(rect.x0, h), snap(rect.x1, h));
    let (iy0, iy1) = (snap(rect.y0, h), snap(rect.y1, h));
    if ix1 - ix0 < 4 || iy1 - iy0 < 4 {
        return Err(Error::InsufficientRectangle("fewer than 5 nodes per axis".into()));
    }
    let x: Vec<f64> = (ix0..=ix1).map(|i| i as f64 * h).collect();
    let y: Vec<f64> = (iy0..=iy1).map(|i| i as f64 * h).collect();

    let mode = match symmetry {
        SymmetryMode::Auto => {
            if gamma == 0.0 && k.mu() == 0.5 {
                SymmetryMode::Radial
            } else {
                SymmetryMode::Quadrant
            }
        }
        other => other,
    };
    if mode == SymmetryMode::Radial && !(gamma == 0.0 && k.mu() == 0.5) {
        return Err(Error::Parameter(
            "radial symmetry requires gamma = 0 and isotropic covariance".into(),
        ));
    }

    let u = match mode {
        SymmetryMode::None => {
            let rows: Result<Vec<Vec<f64>>> = y
                .par_iter()
                .map(|&yy| {
                    x.iter()
                        .map(|&xx| log_potential(Complex64::new(xx, yy), gamma, k, cfg))
                        .collect()
                })
                .collect();
            let rows = rows?;
            Array2::from_shape_vec((y.len(), x.len()), rows.into_iter().flatten().collect())
                .expect("shape by construction")
        }
        SymmetryMode::Quadrant => {
            // U(z) = U(+/- z) = U(conj z): evaluate one representative per
            // orbit (|ix|, |iy|) and mirror.
            let mut set = std::collections::HashSet::new();
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    set.insert((ix.abs(), iy.abs()));
                }
            }
            let mut reps: Vec<(i64, i64)> = set.into_iter().collect();
            reps.sort_unstable();
            let values: Result<Vec<f64>> = reps
                .par_iter()
                .map(|&(ix, iy)| {
                    log_potential(Complex64::new(ix as f64 * h, iy as f64 * h), gamma, k, cfg)
                })
                .collect();
            let values = values?;
            let table: std::collections::HashMap<(i64, i64), f64> =
                reps.into_iter().zip(values).collect();
            let mut u = Array2::zeros((y.len(), x.len()));
            for (r, iy) in (iy0..=iy1).enumerate() {
                for (c, ix) in (ix0..=ix1).enumerate() {
                    u[(r, c)] = table[&(ix.abs(), iy.abs())];
                }
            }
            u
        }
        SymmetryMode::Radial => {
            // U depends on |z| only: dense radial profile + cubic interpolation.
            let r_max = ((x[0].abs().max(x[x.len() - 1].abs())).powi(2)
                + (y[0].abs().max(y[y.len() - 1].abs())).powi(2))
            .sqrt();
            let dr = h / 4.0;
            let n_r = (r_max / dr).ceil() as usize + 3;
            let profile: Result<Vec<f64>> = (0..n_r)
                .into_par_iter()
                .map(|i| log_potential(Complex64::new(i as f64 * dr, 0.0), gamma, k, cfg))
                .collect();
            let profile = profile?;
            let interp = |r: f64| -> f64 {
                let t = r / dr;
                let i = (t.floor() as usize).min(n_r - 3).max(1);
                let frac = t - i as f64;
                // Catmull-Rom through profile[i-1..=i+2]
                let (p0, p1, p2, p3) = (profile[i - 1], profile[i], profile[i + 1], profile[i + 2]);
                let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
                let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
                let c = -0.5 * p0 + 0.5 * p2;
                ((a * frac + b) * frac + c) * frac + p1
            };
            let mut u = Array2::zeros((y.len(), x.len()));
            for (r, &yy) in y.iter().enumerate() {
                for (c, &xx) in x.iter().enumerate() {
                    u[(r, c)] = interp((xx * xx + yy * yy).sqrt());
                }
            }
            u
        }
        SymmetryMode::Auto => unreachable!(),
    };

    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite potential value".into()));
    }
    Ok(PotentialGrid {
        x,
        y,
        u,
        eps_used: cfg.inversion_eps,
        gamma,
        mu: k.mu(),
        quad_order: cfg.quad_order,
        tol: cfg.tol,
    })
}

/// Five-point-stencil Laplacian of the potential on interior nodes,
/// `density = Delta U / (2 pi)`; negative overshoot is clipped to zero and
/// recorded. Errors when more than 5% of the mass escapes the rectangle.
pub fn brown_density_from(grid: &PotentialGrid, h: f64) -> Result<Measure2D> {
    let (ny, nx) = grid.u.dim();
    let mut density = Array2::zeros((ny - 2, nx - 2));
    let mut clipped = 0.0;
    let scale = 1.0 / (2.0 * std::f64::consts::PI * h * h);
    for r in 1..ny - 1 {
        for c in 1..nx - 1 {
            let lap = grid.u[(r - 1, c)] + grid.u[(r + 1, c)] + grid.u[(r, c - 1)] + grid.u[(r, c + 1)]
                - 4.0 * grid.u[(r, c)];
            let d = lap * scale;
            if d < 0.0 {
                clipped += -d * h * h;
                density[(r - 1, c - 1)] = 0.0;
            } else {
                density[(r - 1, c - 1)] = d;
            }
        }
    }
    let mass = density.sum() * h * h;
    if mass < 0.95 {
        return Err(Error::InsufficientRectangle(format!(
            "interior mass {mass:.4} < 0.95; more than 5% on or beyond the boundary"
        )));
    }
    Ok(Measure2D {
        x: grid.x[1..nx - 1].to_vec(),
        y: grid.y[1..ny - 1].to_vec(),
        h,
        density,
        total_mass: mass,
        clipped_mass: clipped,
    })
}

/// Brown measure via the potential route.
pub fn brown_from_potential(
    rect: Rect,
    h: f64,
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<Measure2D> {
    let grid = potential_grid(rect, h, gamma, k, cfg, SymmetryMode::Auto)?;
    brown_density_from(&grid, h)
}

/// Brown measure via the pushforward route: compute the `gamma = 0` base
/// measure on the same grid, map every cell center by `Phi_gamma` and re-bin.
/// Mass is preserved exactly; a mapped atom escaping the grid is an error.
pub fn brown_pushforward(
    rect: Rect,
    h: f64,
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<Measure2D> {
    let base = brown_from_potential(rect, h, 0.0, k, cfg)?;
    pushforward_of(&base, gamma, k, cfg)
}

/// Pushforward of an already-computed `gamma = 0` base measure.
pub fn pushforward_of(
    base: &Measure2D,
    gamma: f64,
    k: CovarianceSpec,
    cfg: &SolverConfig,
) -> Result<Measure2D> {
    let quad = GaussQuadrature::cached(k, cfg.quadrature_spec())?;
    let (ny, nx) = base.density.dim();
    let mut atoms: Vec<(usize, usize)> = Vec::new();
    for r in 0..ny {
        for c in 0..nx {
            if base.density[(r, c)] > 0.0 {
                atoms.push((r, c));
            }
        }
    }
    let mapped: Result<Vec<Complex64>> = atoms
        .par_iter()
        .map(|&(r, c)| {
            let lambda = Complex64::new(base.x[c], base.y[r]);
            phi_map(lambda, gamma, &quad, cfg.tol)
        })
        .collect();
    let mapped = mapped?;
    let mut density = Array2::zeros((ny, nx));
    for (&(r, c), phi) in atoms.iter().zip(mapped) {
        let target = base.bin_of(phi).ok_or_else(|| {
            Error::InsufficientRectangle(format!(
                "pushforward image {phi} of cell ({r}, {c}) escapes the grid"
            ))
        })?;
        density[target] += base.density[(r, c)];
    }
    Ok(Measure2D {
        x: base.x.clone(),
        y: base.y.clone(),
        h: base.h,
        density,
        total_mass: base.total_mass,
        clipped_mass: base.clipped_mass,
    })
}

/// U must approach `log |z|` on far boundary nodes; returns the maximal
/// deviation over boundary nodes with `|z| >= 4` (None when there are none).
pub fn boundary_log_deviation(grid: &PotentialGrid) -> Option<f64> {
    let (ny, nx) = grid.u.dim();
    let mut worst: Option<f64> = None;
    let mut check = |r: usize, c: usize| {
        let z = Complex64::new(grid.x[c], grid.y[r]);
        if z.norm() >= 4.0 {
            let dev = (grid.u[(r, c)] - z.norm().ln()).abs();
            worst = Some(worst.map_or(dev, |w: f64| w.max(dev)));
        }
    };
    for c in 0..nx {
        check(0, c);
        check(ny - 1, c);
    }
    for r in 0..ny {
        check(r, 0);
        check(r, nx - 1);
    }
    worst
}
