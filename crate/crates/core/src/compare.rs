//! Empirical-vs-theory metrics and the singular-value experiments.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brown::Measure2D;
use crate::ensemble::{sample_elliptic, EnsembleConfig, MatrixSample};
use crate::error::{Error, Result};
use crate::spectra::{singular_values_direct, EmpiricalMeasure1D, EmpiricalMeasure2D};
use crate::theory::Measure1D;

/// Kolmogorov-Smirnov distance between an atomic sample measure and a
/// grid-backed density, evaluated at every sample point and grid node.
pub fn ks_distance(samples: &EmpiricalMeasure1D, target: &Measure1D) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in samples.points().iter().enumerate() {
        let f = target.cdf(x);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max((f - (i + 1) as f64 / n).abs());
    }
    for &g in &target.grid {
        sup = sup.max((samples.cdf(g) - target.cdf(g)).abs());
    }
    Ok(sup.min(1.0))
}

/// Half the L1 distance between bin-mass vectors, the empirical points
/// binned on the target grid. Mass falling outside the grid counts fully
/// toward the distance; more than 1% outside is a coverage error.
pub fn tv2d_binned(points: &EmpiricalMeasure2D, target: &Measure2D) -> Result<f64> {
    if points.points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut counts = ndarray::Array2::<f64>::zeros(target.density.dim());
    let mut inside = 0usize;
    for &p in &points.points {
        if let Some(bin) = target.bin_of(p) {
            counts[bin] += 1.0;
            inside += 1;
        }
    }
    let total = points.points.len() as f64;
    let coverage = inside as f64 / total;
    if coverage < 0.99 {
        return Err(Error::Coverage { coverage });
    }
    let q = target.normalized_masses();
    let mut l1 = 0.0;
    for (c, qb) in counts.iter().zip(q.iter()) {
        l1 += (c / total - qb).abs();
    }
    Ok(0.5 * (l1 + (1.0 - coverage)))
}

/// Half the L1 distance between the normalized bin masses of two measures on
/// the same grid.
pub fn tv2d_measures(a: &Measure2D, b: &Measure2D) -> Result<f64> {
    if a.x != b.x || a.y != b.y {
        return Err(Error::Parameter("measures live on different grids".into()));
    }
    let pa = a.normalized_masses();
    let pb = b.normalized_masses();
    Ok(0.5 * pa.iter().zip(pb.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Fraction of eigenvalues inside the inflated ellipse with semi-axes
/// `(1 + gamma, 1 - gamma)`. For spectra of the pure elliptic ensemble
/// `Z / sqrt(n)`, not the Laplacian.
pub fn ellipsoid_coverage(eigs: &EmpiricalMeasure2D, gamma: f64, inflate: f64) -> Result<f64> {
    if gamma.abs() >= 1.0 {
        return Err(Error::Parameter(
            "gamma = +/-1 degenerates an ellipse axis; use 1D checks".into(),
        ));
    }
    let a = (1.0 + gamma) * inflate;
    let b = (1.0 - gamma) * inflate;
    let inside = eigs
        .points
        .iter()
        .filter(|p| (p.re / a).powi(2) + (p.im / b).powi(2) <= 1.0)
        .count();
    Ok(inside as f64 / eigs.len() as f64)
}

/// Parameters recorded with every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub n: usize,
    pub trials: usize,
    pub z: Complex64,
    pub gamma: f64,
    pub mu: f64,
    pub seed: u64,
}

/// Serializable record of one experiment run; round-trips losslessly
/// through its JSON line form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub params: ExperimentParams,
    /// Per-trial statistics (least singular values, minimal ratios, ...).
    pub stats: Vec<f64>,
    pub pass: bool,
    pub threshold: f64,
}

impl ExperimentReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Cache(format!("bad report line: {e}")))
    }
}

/// Least-singular-value experiment: per trial, sample `L` and record
/// `s_n(L - z sqrt(n))`. Passes when at most 5% of trials fall at or below
/// `n^{-c_exp}`.
pub fn lsv_experiment(
    config: &EnsembleConfig,
    z: Complex64,
    trials: usize,
    c_exp: f64,
) -> Result<ExperimentReport> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Parameter("the least-singular-value bound requires z != 0".into()));
    }
    if config.atoms.anticonc.is_none() {
        return Err(Error::Parameter(
            "atom family lacks anti-concentration constants".into(),
        ));
    }
    config.validate()?;
    let stats: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(trial as u64);
            let sample = sample_elliptic(&cfg)?;
            // L - z sqrt(n) = sqrt(n) (M - z)
            let sv = singular_values_direct(&sample.l, z * (cfg.n as f64).sqrt())?;
            Ok(sv.min())
        })
        .collect();
    let stats = stats?;
    let threshold = (config.n as f64).powf(-c_exp);
    let below = stats.iter().filter(|&&s| s <= threshold).count();
    let pass = (below as f64) <= 0.05 * trials as f64;
    Ok(ExperimentReport {
        name: "lsv".into(),
        params: ExperimentParams {
            n: config.n,
            trials,
            z,
            gamma: config.atoms.gamma,
            mu: config.atoms.mu,
            seed: config.seed,
        },
        stats,
        pass,
        threshold,
    })
}

/// Moderate-singular-value check: with `a_n = n / log^2 n`, verify
/// `s_{n-i}(M - z) >= eps_const * i / n` for all `i` in `[a_n, n - 1]` and
/// report the minimal ratio `min_i s_{n-i} n / i`.
pub fn moderate_sv_check(sample: &MatrixSample, z: Complex64, eps_const: f64) -> Result<ExperimentReport> {
    let n = sample.n;
    if n < 100 {
        return Err(Error::Parameter("moderate-singular-value check needs n >= 100".into()));
    }
    let sv = singular_values_direct(&sample.m, z)?;
    let ascending = sv.points(); // ascending: s_{n-i} is entry i (0-based i-1... entry index i for 1-based i+1)
    let a_n = n as f64 / (n as f64).ln().powi(2);
    let lo = a_n.ceil() as usize;
    let mut min_ratio = f64::INFINITY;
    for i in lo..=(n - 1) {
        // descending s_{n-i} = ascending[i] (both 1-based: s_{n-i} is the
        // (i+1)-th smallest; ascending slice is 0-based)
        let ratio = ascending[i] * n as f64 / i as f64;
        min_ratio = min_ratio.min(ratio);
    }
    let pass = min_ratio >= eps_const;
    Ok(ExperimentReport {
        name: "moderate-sv".into(),
        params: ExperimentParams {
            n,
            trials: 1,
            z,
            gamma: f64::NAN,
            mu: f64::NAN,
            seed: sample.seed,
        },
        stats: vec![min_ratio],
        pass,
        threshold: eps_const,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::make_gaussian_atoms;
    use crate::theory::Measure1D;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_target() -> Measure1D {
        let grid: Vec<f64> = (0..=800).map(|i| i as f64 * 0.01).collect();
        let density: Vec<f64> = grid.iter().map(|&t| (-(t - 4.0) * (t - 4.0)).exp()).collect();
        Measure1D::from_raw(grid, density, vec![]).unwrap()
    }

    #[test]
    fn ks_self_sampling_rate() {
        // inverse-CDF samples from the target itself: KS below the 95%
        // Kolmogorov quantile 1.63/sqrt(n') (doubled for interpolation slack)
        let target = gaussian_target();
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let points: Vec<f64> = (0..n).map(|_| target.quantile(rng.gen())).collect();
        let samples = EmpiricalMeasure1D::new(points).unwrap();
        let d = ks_distance(&samples, &target).unwrap();
        assert!(d <= 2.0 / (n as f64).sqrt() * 1.63, "KS = {d}");
    }

    #[test]
    fn ks_degenerate_cases() {
        let target = gaussian_target();
        // point mass at the CDF median: distance ~ 1/2 each side, sup at steps
        let samples = EmpiricalMeasure1D::new(vec![4.0]).unwrap();
        let d = ks_distance(&samples, &target).unwrap();
        assert!((d - 0.5).abs() < 0.01);
        // disjoint supports
        let far = EmpiricalMeasure1D::new(vec![100.0, 101.0]).unwrap();
        assert!((ks_distance(&far, &target).unwrap() - 1.0).abs() < 1e-12);
    }

    fn checker_measure() -> Measure2D {
        let m = 20usize;
        let h = 0.1;
        let x: Vec<f64> = (0..m).map(|i| (i as f64 - 10.0) * h).collect();
        let density = Array2::from_elem((m, m), 1.0 / (m * m) as f64 / (h * h));
        let total = density.sum() * h * h;
        Measure2D {
            x: x.clone(),
            y: x,
            h,
            density,
            total_mass: total,
            clipped_mass: 0.0,
        }
    }

    #[test]
    fn tv2d_identical_and_disjoint() {
        let target = checker_measure();
        // empirical points exactly at every bin center, equal counts
        let mut pts = Vec::new();
        for &yy in &target.y {
            for &xx in &target.x {
                pts.push(Complex64::new(xx, yy));
            }
        }
        let m = EmpiricalMeasure2D::new(pts).unwrap();
        let d = tv2d_binned(&m, &target).unwrap();
        assert!(d < 1e-12, "TV = {d}");
        // translated far away: coverage failure
        let shifted = EmpiricalMeasure2D::new(
            target
                .x
                .iter()
                .map(|&xx| Complex64::new(xx + 10.0, 0.0))
                .collect(),
        )
        .unwrap();
        assert!(matches!(tv2d_binned(&shifted, &target), Err(Error::Coverage { .. })));
    }

    #[test]
    fn tv2d_self_sampling() {
        let target = checker_measure();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = target.x.len();
        let pts: Vec<Complex64> = (0..n)
            .map(|_| {
                let ix = rng.gen_range(0..m);
                let iy = rng.gen_range(0..m);
                Complex64::new(
                    target.x[ix] + rng.gen_range(-0.05..0.05),
                    target.y[iy] + rng.gen_range(-0.05..0.05),
                )
            })
            .collect();
        let d = tv2d_binned(&EmpiricalMeasure2D::new(pts).unwrap(), &target).unwrap();
        assert!(d <= 0.05 + 0.02, "TV = {d}");
    }

    #[test]
    fn ellipsoid_coverage_containment() {
        let pts = EmpiricalMeasure2D::new(vec![
            Complex64::new(1.4, 0.0),
            Complex64::new(0.0, 0.45),
            Complex64::new(2.0, 0.0),
        ])
        .unwrap();
        // gamma = 0.5: semi-axes (1.5, 0.5)
        let frac = ellipsoid_coverage(&pts, 0.5, 1.0).unwrap();
        assert!((frac - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(ellipsoid_coverage(&pts, 0.5, 10.0).unwrap(), 1.0);
        assert!(ellipsoid_coverage(&pts, 1.0, 1.0).is_err());
    }

    #[test]
    fn lsv_rejects_z_zero() {
        let cfg = EnsembleConfig::new(50, make_gaussian_atoms(1.0, 0.5).unwrap(), 1);
        assert!(lsv_experiment(&cfg, Complex64::new(0.0, 0.0), 3, 3.0).is_err());
    }

    #[test]
    fn moderate_sv_identity_scale() {
        // replace M - z by the identity: all ratios are n/i >= 1
        let n = 120;
        let sample = MatrixSample {
            n,
            x: Array2::zeros((n, n)),
            d: ndarray::Array1::zeros(n),
            l: Array2::zeros((n, n)),
            m: Array2::from_diag_elem(n, Complex64::new(1.0, 0.0)),
            seed: 0,
        };
        let report = moderate_sv_check(&sample, Complex64::new(0.0, 0.0), 0.01).unwrap();
        assert!(report.pass);
        assert!(report.stats[0] >= 1.0);
    }

    #[test]
    fn report_roundtrip() {
        let report = ExperimentReport {
            name: "lsv".into(),
            params: ExperimentParams {
                n: 200,
                trials: 50,
                z: Complex64::new(1.0, -0.5),
                gamma: 0.5,
                mu: 1.0,
                seed: 7,
            },
            stats: vec![0.125, 3.5e-9, f64::MIN_POSITIVE],
            pass: true,
            threshold: 1.25e-7,
        };
        let line = report.to_json_line();
        let back = ExperimentReport::from_json_line(&line).unwrap();
        assert_eq!(report, back);
    }
}
