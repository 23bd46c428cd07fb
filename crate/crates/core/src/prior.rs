//! Structured prior over hidden attribute vectors.
//!
//! Samples come from a Gaussian copula: a latent multivariate normal with the
//! configured pairwise correlations is drawn, each coordinate is pushed
//! through the normal CDF and then through the inverse of that attribute's
//! discrete marginal CDF. Feasibility constraints are enforced by rejection.
//! Correlation targets are therefore latent-normal correlations; the rank
//! correlation of the discrete values is somewhat smaller.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{PriorStructure, ThetaVector, DOMAIN_SIZE};
use crate::error::{Error, Result};

pub const MAX_REJECTION_ATTEMPTS: usize = 1_000;

const EIGEN_FLOOR: f64 = 1e-10;

/// Precomputed copula for one prior.
#[derive(Clone, Debug)]
pub struct PriorSampler {
    ids: Vec<String>,
    chol: DMatrix<f64>,
    /// Latent cut points per attribute: value = number of cuts below z.
    cuts: Vec<[f64; DOMAIN_SIZE - 1]>,
    constraints: Vec<(usize, usize)>,
    projected: bool,
}

/// One accepted draw, with the latent normal vector that produced it.
#[derive(Clone, Debug)]
pub struct CopulaDraw {
    pub theta: ThetaVector,
    pub latent: Vec<f64>,
    pub attempts: usize,
}

impl PriorSampler {
    pub fn new(prior: &PriorStructure) -> Result<Self> {
        let ids: Vec<String> = prior.marginals.keys().cloned().collect();
        let index = |id: &str| {
            ids.iter()
                .position(|x| x == id)
                .ok_or_else(|| Error::UnknownAttribute(id.to_string()))
        };
        let n = ids.len();
        let mut corr = DMatrix::<f64>::identity(n, n);
        for c in &prior.correlations {
            let (a, b) = (index(&c.a)?, index(&c.b)?);
            corr[(a, b)] = c.rho;
            corr[(b, a)] = c.rho;
        }
        let (chol, projected) = match corr.clone().cholesky() {
            Some(ch) => (ch.l(), false),
            None => {
                let fixed = nearest_correlation(&corr);
                let ch = fixed
                    .cholesky()
                    .ok_or_else(|| Error::validation("prior.correlations", "not repairable to PSD"))?;
                (ch.l(), true)
            }
        };
        if projected {
            log::warn!("correlation matrix was not positive definite; projected to nearest PSD");
        }

        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let cuts = ids
            .iter()
            .map(|id| {
                let p = &prior.marginals[id];
                let mut cum = 0.0;
                let mut out = [0.0; DOMAIN_SIZE - 1];
                for (v, cut) in out.iter_mut().enumerate() {
                    cum += p[v];
                    *cut = if cum <= 0.0 {
                        f64::NEG_INFINITY
                    } else if cum >= 1.0 {
                        f64::INFINITY
                    } else {
                        normal.inverse_cdf(cum)
                    };
                }
                out
            })
            .collect();

        let constraints = prior
            .constraints
            .iter()
            .map(|c| Ok((index(&c.lo)?, index(&c.hi)?)))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            ids,
            chol,
            cuts,
            constraints,
            projected,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// True when the configured correlations had to be repaired.
    pub fn was_projected(&self) -> bool {
        self.projected
    }

    /// Latent correlation matrix actually used.
    pub fn latent_correlation(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    pub fn sample(&self, seed: u64) -> Result<ThetaVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.draw(&mut rng)?.theta)
    }

    pub fn draw(&self, rng: &mut impl rand::Rng) -> Result<CopulaDraw> {
        let n = self.ids.len();
        for attempt in 1..=MAX_REJECTION_ATTEMPTS {
            let eps = DVector::<f64>::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
            let z = &self.chol * eps;
            let values: Vec<u8> = z
                .iter()
                .zip(&self.cuts)
                .map(|(zi, cuts)| cuts.iter().filter(|c| *zi > **c).count() as u8)
                .collect();
            if self
                .constraints
                .iter()
                .all(|&(lo, hi)| values[lo] <= values[hi])
            {
                let theta = self.ids.iter().cloned().zip(values).collect();
                return Ok(CopulaDraw {
                    theta,
                    latent: z.iter().copied().collect(),
                    attempts: attempt,
                });
            }
        }
        Err(Error::RejectionExhausted {
            attempts: MAX_REJECTION_ATTEMPTS,
        })
    }
}

/// Eigenvalue-clipping projection onto unit-diagonal PSD matrices.
fn nearest_correlation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let clipped = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
    let psd = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale = psd.diagonal().map(|d| 1.0 / d.sqrt());
    let mut out = DMatrix::from_diagonal(&scale) * psd * DMatrix::from_diagonal(&scale);
    for i in 0..out.nrows() {
        out[(i, i)] = 1.0;
    }
    out
}

pub fn sample_theta(prior: &PriorStructure, seed: u64) -> Result<ThetaVector> {
    PriorSampler::new(prior)?.sample(seed)
}

/// Mean of the attribute's marginal, before constraints.
pub fn prior_mean(prior: &PriorStructure, attr_id: &str) -> Result<f64> {
    let p = prior
        .marginals
        .get(attr_id)
        .ok_or_else(|| Error::UnknownAttribute(attr_id.to_string()))?;
    Ok(p.iter().enumerate().map(|(v, pv)| v as f64 * pv).sum())
}

/// Per-attribute marginal mode (lowest on ties), then each constrained
/// attribute is clamped down to its bound until all constraints hold.
pub fn prior_default(prior: &PriorStructure) -> ThetaVector {
    let mut theta: ThetaVector = prior
        .marginals
        .iter()
        .map(|(id, p)| {
            let mut best = 0;
            for (v, pv) in p.iter().enumerate() {
                if *pv > p[best] {
                    best = v;
                }
            }
            (id.clone(), best as u8)
        })
        .collect();
    loop {
        let mut changed = false;
        for c in &prior.constraints {
            let (Some(lo), Some(hi)) = (theta.get(&c.lo), theta.get(&c.hi)) else {
                continue;
            };
            if lo > hi {
                theta.set(&c.lo, hi);
                changed = true;
            }
        }
        if !changed {
            break theta;
        }
    }
}
