//! Sampling of elliptic random matrices and the Laplacians built from them.
//!
//! The mirrored off-diagonal pairs `(X_ij, X_ji)`, `i < j`, are i.i.d. draws
//! from an atom family; the diagonal is free. The Laplacian subtracts the
//! row sums, `L = X - D` with `D_ii = sum_k X_ik`, and the working matrix is
//! the rescaling `M = L / sqrt(n)` (or its recentered form when the atoms
//! carry a mean).
//!
//! Randomness contract: every pair `(i, j)` and every diagonal entry draws
//! from its own counter-based stream, `stream = i * n + j` under the master
//! seed. Sampling is therefore order-independent, parallelizes without
//! coordination, and is bitwise reproducible.

mod atoms;
pub mod io;

pub use atoms::{
    build_sampler, make_gaussian_atoms, make_rademacher_atoms, register_atom_family,
    registered_kinds, validate_family, AtomFamily, MomentCheck, PairSampler, ValidationReport,
};

use ndarray::prelude::*;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the free diagonal entries of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagLaw {
    /// Zero diagonal (default): the Laplacian is insensitive to it anyway.
    Zero,
    /// Independent standard real Gaussians, for experiments on the pure
    /// elliptic ensemble `X / sqrt(n)`.
    IidStandard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub atoms: AtomFamily,
    pub diag_law: DiagLaw,
    pub seed: u64,
    /// Apply the recentering shift `M = (L + (n-1) m I)/sqrt(n)` when the
    /// atoms carry a mean `m`.
    pub recenter: bool,
}

impl EnsembleConfig {
    pub fn new(n: usize, atoms: AtomFamily, seed: u64) -> Self {
        EnsembleConfig {
            n,
            atoms,
            diag_law: DiagLaw::Zero,
            seed,
            recenter: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("matrix dimension n must be positive".into()));
        }
        if !self.recenter && self.atoms.mean_shift != Complex64::new(0.0, 0.0) {
            return Err(Error::Parameter(
                "nonzero mean_shift requires recenter = true".into(),
            ));
        }
        Ok(())
    }
}

/// One realization of `X`, its row-sum diagonal `D`, the Laplacian
/// `L = X - D` and the rescaled matrix `M`. Immutable after construction and
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct MatrixSample {
    pub n: usize,
    pub x: Array2<Complex64>,
    /// Diagonal of the row-sum matrix `D`.
    pub d: Array1<Complex64>,
    pub l: Array2<Complex64>,
    pub m: Array2<Complex64>,
    pub seed: u64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw one sample of the ensemble. Deterministic in `(config, seed)`.
pub fn sample_elliptic(config: &EnsembleConfig) -> Result<MatrixSample> {
    config.validate()?;
    let n = config.n;
    let bytes = n
        .checked_mul(n)
        .and_then(|nn| nn.checked_mul(std::mem::size_of::<Complex64>()))
        .ok_or(Error::Allocation { n, bytes: usize::MAX })?;
    let sampler = config.atoms.sampler()?;
    let seed = config.seed;

    let mut entries: Vec<Complex64> = Vec::new();
    entries
        .try_reserve_exact(n * n)
        .map_err(|_| Error::Allocation { n, bytes })?;
    entries.resize(n * n, Complex64::new(0.0, 0.0));

    // Row-parallel fill. Row i re-derives each mirrored pair from the pair's
    // own stream and keeps the half it owns, so no cross-row coordination is
    // needed and the result is schedule-independent.
    let diag_law = config.diag_law;
    entries
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                if i == j {
                    *slot = match diag_law {
                        DiagLaw::Zero => Complex64::new(0.0, 0.0),
                        DiagLaw::IidStandard => {
                            let mut rng = stream_rng(seed, (i * n + i) as u64);
                            Complex64::new(rng.sample(StandardNormal), 0.0)
                        }
                    };
                } else {
                    let (a, b) = (i.min(j), i.max(j));
                    let mut rng = stream_rng(seed, (a * n + b) as u64);
                    let (xi1, xi2) = sampler.sample_pair(&mut rng);
                    *slot = if i < j { xi1 } else { xi2 };
                }
            }
        });

    let x = Array2::from_shape_vec((n, n), entries).expect("shape matches by construction");
    let d = Array1::from_iter(x.rows().into_iter().map(|row| row.iter().sum::<Complex64>()));
    let mut l = x.clone();
    for i in 0..n {
        l[(i, i)] -= d[i];
    }
    let shift = if config.recenter {
        config.atoms.mean_shift * (n as f64 - 1.0)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let sqrt_n = (n as f64).sqrt();
    let mut m = l.clone();
    if shift != Complex64::new(0.0, 0.0) {
        for i in 0..n {
            m[(i, i)] += shift;
        }
    }
    m.mapv_inplace(|v| v / sqrt_n);
    Ok(MatrixSample { n, x, d, l, m, seed })
}

/// `max_i |sum_j L_ij|`; bounded by `n * eps * max |X_ij|` up to rounding.
pub fn row_sum_check(sample: &MatrixSample) -> f64 {
    sample
        .l
        .rows()
        .into_iter()
        .map(|row| row.iter().sum::<Complex64>().norm())
        .fold(0.0, f64::max)
}

/// The rounding bound the row sums must satisfy.
pub fn row_sum_bound(sample: &MatrixSample) -> f64 {
    let max_entry = sample.x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    sample.n as f64 * f64::EPSILON * max_entry
}
