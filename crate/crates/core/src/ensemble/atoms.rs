//! Atom-variable families for the mirrored off-diagonal pairs.
//!
//! Each family is a strategy behind the [`PairSampler`] trait, registered by
//! kind name and selected at runtime from configuration. The built-in kinds
//! are `gaussian` (jointly Gaussian real/imaginary blocks) and `rademacher`
//! (correlated signs); tests register additional families, including a
//! deliberately corrupted one, through the same registry.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Description of an atom family: which sampler to build and with which
/// parameters. The pair `(xi1, xi2)` it emits has unit variances, real-part
/// variance `mu`, mirrored covariances `(mu gamma, -(1 - mu) gamma)` and
/// vanishing real/imaginary cross moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomFamily {
    pub kind: String,
    pub mu: f64,
    pub gamma: f64,
    /// Common mean `m` of both entries for the non-centered extension;
    /// zero for the centered model.
    pub mean_shift: Complex64,
    /// Anti-concentration constants `(delta0, eps0)` witnessing that one
    /// entry never determines the other; `None` for degenerate families.
    pub anticonc: Option<(f64, f64)>,
}

impl AtomFamily {
    pub fn sampler(&self) -> Result<Box<dyn PairSampler>> {
        build_sampler(self)
    }
}

/// One interchangeable sampling strategy for the atom pair.
pub trait PairSampler: Send + Sync {
    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (Complex64, Complex64);
}

type AtomFactory = fn(&AtomFamily) -> Result<Box<dyn PairSampler>>;

static REGISTRY: Lazy<RwLock<HashMap<String, AtomFactory>>> = Lazy::new(|| {
    let mut map: HashMap<String, AtomFactory> = HashMap::new();
    map.insert("gaussian".into(), build_gaussian);
    map.insert("rademacher".into(), build_rademacher);
    RwLock::new(map)
});

/// Register a new family kind (or override an existing one).
pub fn register_atom_family(kind: &str, factory: AtomFactory) {
    REGISTRY.write().unwrap().insert(kind.to_string(), factory);
}

pub fn registered_kinds() -> Vec<String> {
    let mut kinds: Vec<String> = REGISTRY.read().unwrap().keys().cloned().collect();
    kinds.sort();
    kinds
}

/// Instantiate the sampler for a family through the registry.
pub fn build_sampler(family: &AtomFamily) -> Result<Box<dyn PairSampler>> {
    let registry = REGISTRY.read().unwrap();
    let factory = registry
        .get(&family.kind)
        .ok_or_else(|| Error::UnknownAtomKind(family.kind.clone()))?;
    factory(family)
}

/// Jointly Gaussian family: real parts bivariate normal with variance `mu`
/// and covariance `mu gamma`, imaginary parts with variance `1 - mu` and
/// covariance `-(1 - mu) gamma`, the two blocks independent.
///
/// `|gamma| = 1` is admitted as the degenerate Wigner-type endpoint
/// (`xi2 = +/- conj-symmetric copy`); it carries no anti-concentration
/// constants.
pub fn make_gaussian_atoms(mu: f64, gamma: f64) -> Result<AtomFamily> {
    if !(0.0..=1.0).contains(&mu) || !mu.is_finite() {
        return Err(Error::Parameter(format!("mu = {mu} must lie in [0, 1]")));
    }
    if !(gamma.abs() <= 1.0) {
        return Err(Error::Parameter(format!("|gamma| = {} must be <= 1", gamma.abs())));
    }
    let anticonc = if gamma.abs() < 1.0 {
        // conditional law of one entry given the other keeps a normal
        // component of variance >= max(mu, 1 - mu) (1 - gamma^2)
        let sigma = (mu.max(1.0 - mu) * (1.0 - gamma * gamma)).sqrt();
        Some((sigma / 2.0, 0.7))
    } else {
        None
    };
    Ok(AtomFamily {
        kind: "gaussian".into(),
        mu,
        gamma,
        mean_shift: Complex64::new(0.0, 0.0),
        anticonc,
    })
}

/// Correlated-sign family: values in `{-1, +1}^2` with
/// `P(xi1 = xi2) = (1 + gamma)/2`, so `E[xi1 xi2] = gamma`. Requires
/// `mu = 1` (purely real) and strictly `|gamma| < 1`.
pub fn make_rademacher_atoms(gamma: f64) -> Result<AtomFamily> {
    if !(gamma.abs() < 1.0) {
        return Err(Error::Parameter(format!(
            "|gamma| = {} must be < 1 for the correlated-sign family",
            gamma.abs()
        )));
    }
    Ok(AtomFamily {
        kind: "rademacher".into(),
        mu: 1.0,
        gamma,
        mean_shift: Complex64::new(0.0, 0.0),
        anticonc: Some((0.5, (1.0 - gamma.abs()) / 2.0)),
    })
}

struct GaussianPair {
    sr: f64,
    si: f64,
    gamma: f64,
    root: f64,
    shift: Complex64,
}

impl PairSampler for GaussianPair {
    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (Complex64, Complex64) {
        let u1: f64 = rng.sample(StandardNormal);
        let u2: f64 = rng.sample(StandardNormal);
        let v1: f64 = rng.sample(StandardNormal);
        let v2: f64 = rng.sample(StandardNormal);
        let re1 = self.sr * u1;
        let re2 = self.sr * (self.gamma * u1 + self.root * u2);
        let im1 = self.si * v1;
        let im2 = self.si * (-self.gamma * v1 + self.root * v2);
        (
            Complex64::new(re1, im1) + self.shift,
            Complex64::new(re2, im2) + self.shift,
        )
    }
}

fn build_gaussian(family: &AtomFamily) -> Result<Box<dyn PairSampler>> {
    if !(0.0..=1.0).contains(&family.mu) || family.gamma.abs() > 1.0 {
        return Err(Error::Parameter("gaussian family parameters out of range".into()));
    }
    Ok(Box::new(GaussianPair {
        sr: family.mu.sqrt(),
        si: (1.0 - family.mu).sqrt(),
        gamma: family.gamma,
        root: (1.0 - family.gamma * family.gamma).max(0.0).sqrt(),
        shift: family.mean_shift,
    }))
}

struct RademacherPair {
    p_equal: f64,
    shift: Complex64,
}

impl PairSampler for RademacherPair {
    fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (Complex64, Complex64) {
        let s1: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let s2 = if rng.gen::<f64>() < self.p_equal { s1 } else { -s1 };
        (
            Complex64::new(s1, 0.0) + self.shift,
            Complex64::new(s2, 0.0) + self.shift,
        )
    }
}

fn build_rademacher(family: &AtomFamily) -> Result<Box<dyn PairSampler>> {
    if family.mu != 1.0 {
        return Err(Error::Parameter("rademacher family requires mu = 1".into()));
    }
    if family.gamma.abs() >= 1.0 {
        return Err(Error::Parameter("rademacher family requires |gamma| < 1".into()));
    }
    Ok(Box::new(RademacherPair {
        p_equal: (1.0 + family.gamma) / 2.0,
        shift: family.mean_shift,
    }))
}

/// One moment check of a validation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCheck {
    pub name: String,
    pub empirical: f64,
    pub target: f64,
    pub std_error: f64,
    pub pass: bool,
}

/// Monte Carlo validation of the defining moment conditions of a family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: String,
    pub mu: f64,
    pub gamma: f64,
    pub nsamples: usize,
    pub tol_sigmas: f64,
    pub checks: Vec<MomentCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Estimate every defining moment of the family over `nsamples` draws and
/// compare against its target at `tol_sigmas` standard errors. The draws are
/// centered by the declared `mean_shift` so the shifted extension validates
/// against the same targets.
pub fn validate_family(atoms: &AtomFamily, nsamples: usize, tol_sigmas: f64) -> Result<ValidationReport> {
    if nsamples < 10_000 {
        return Err(Error::Parameter("need at least 10^4 samples".into()));
    }
    let sampler = atoms.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x76616c6964);
    // statistics: mean and variance of each monitored product
    let mut stats: Vec<(String, f64, OnlineStat)> = vec![
        ("E[Re xi1]".into(), 0.0, OnlineStat::new()),
        ("E[Re xi2]".into(), 0.0, OnlineStat::new()),
        ("E[Im xi1]".into(), 0.0, OnlineStat::new()),
        ("E[Im xi2]".into(), 0.0, OnlineStat::new()),
        ("E[(Re xi1)^2]".into(), atoms.mu, OnlineStat::new()),
        ("E[(Re xi2)^2]".into(), atoms.mu, OnlineStat::new()),
        ("E[(Im xi1)^2]".into(), 1.0 - atoms.mu, OnlineStat::new()),
        ("E[(Im xi2)^2]".into(), 1.0 - atoms.mu, OnlineStat::new()),
        ("E[Re xi1 Re xi2]".into(), atoms.mu * atoms.gamma, OnlineStat::new()),
        (
            "E[Im xi1 Im xi2]".into(),
            -(1.0 - atoms.mu) * atoms.gamma,
            OnlineStat::new(),
        ),
        ("E[Re xi1 Im xi1]".into(), 0.0, OnlineStat::new()),
        ("E[Re xi1 Im xi2]".into(), 0.0, OnlineStat::new()),
        ("E[Re xi2 Im xi1]".into(), 0.0, OnlineStat::new()),
        ("E[Re xi2 Im xi2]".into(), 0.0, OnlineStat::new()),
    ];
    for _ in 0..nsamples {
        let (x1, x2) = sampler.sample_pair(&mut rng);
        let x1 = x1 - atoms.mean_shift;
        let x2 = x2 - atoms.mean_shift;
        let values = [
            x1.re,
            x2.re,
            x1.im,
            x2.im,
            x1.re * x1.re,
            x2.re * x2.re,
            x1.im * x1.im,
            x2.im * x2.im,
            x1.re * x2.re,
            x1.im * x2.im,
            x1.re * x1.im,
            x1.re * x2.im,
            x2.re * x1.im,
            x2.re * x2.im,
        ];
        for (slot, v) in stats.iter_mut().zip(values) {
            slot.2.push(v);
        }
    }
    let checks = stats
        .into_iter()
        .map(|(name, target, stat)| {
            let empirical = stat.mean();
            let std_error = stat.std_error();
            // a degenerate estimator (zero spread) passes only on exact match
            let pass = if std_error == 0.0 {
                empirical == target
            } else {
                (empirical - target).abs() <= tol_sigmas * std_error
            };
            MomentCheck {
                name,
                empirical,
                target,
                std_error,
                pass,
            }
        })
        .collect();
    Ok(ValidationReport {
        kind: atoms.kind.clone(),
        mu: atoms.mu,
        gamma: atoms.gamma,
        nsamples,
        tol_sigmas,
        checks,
    })
}

struct OnlineStat {
    n: u64,
    mean: f64,
    m2: f64,
}

impl OnlineStat {
    fn new() -> Self {
        OnlineStat { n: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}
