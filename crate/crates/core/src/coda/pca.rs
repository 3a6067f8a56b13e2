//! Covariance principal component analysis with a cyclic Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Principal components of an n×m data matrix.
///
/// `components` holds K unit-length rows of length m, `scores` is n×K and
/// `residuals` is whatever the retained components leave unexplained, so
/// `mean + scores·components + residuals` reproduces the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaDecomposition {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
    /// All m eigenvalues, descending, non-negative.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
}

impl PcaDecomposition {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Keeps the leading `k` components and recomputes the residuals.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.min(self.components.len());
        let components = self.components[..k].to_vec();
        let scores: Vec<Vec<f64>> = self.scores.iter().map(|s| s[..k].to_vec()).collect();
        let residuals = self
            .scores
            .iter()
            .zip(&self.residuals)
            .map(|(full, resid)| {
                // dropped components move into the residual
                let mut r = resid.clone();
                for (score, comp) in full[k..].iter().zip(&self.components[k..]) {
                    for (ri, ci) in r.iter_mut().zip(comp) {
                        *ri += score * ci;
                    }
                }
                r
            })
            .collect();
        Self {
            mean: self.mean.clone(),
            components,
            scores,
            eigenvalues: self.eigenvalues.clone(),
            residuals,
        }
    }

    /// Scores of a new observation on the retained components.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        project(&self.mean, &self.components, row)
    }

    /// `mean + Σ_k scores_k · component_k`.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        reconstruct(&self.mean, &self.components, scores)
    }
}

pub(crate) fn project(mean: &[f64], components: &[Vec<f64>], row: &[f64]) -> Vec<f64> {
    components
        .iter()
        .map(|c| {
            c.iter()
                .zip(row.iter().zip(mean))
                .map(|(ci, (x, mu))| ci * (x - mu))
                .sum()
        })
        .collect()
}

pub(crate) fn reconstruct(mean: &[f64], components: &[Vec<f64>], scores: &[f64]) -> Vec<f64> {
    let mut out = mean.to_vec();
    for (score, comp) in scores.iter().zip(components) {
        for (o, c) in out.iter_mut().zip(comp) {
            *o += score * c;
        }
    }
    out
}

/// Sample covariance (divisor n-1) of the columns of `matrix`, plus the
/// column means.
pub fn covariance(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 rows, got {n}"
        )));
    }
    let m = matrix[0].len();
    if matrix.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidDimension("ragged data matrix".into()));
    }
    let mean: Vec<f64> = (0..m)
        .map(|j| matrix.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; m]; m];
    for row in matrix {
        for i in 0..m {
            let di = row[i] - mean[i];
            for j in i..m {
                cov[i][j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..m {
        for j in i..m {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok((mean, cov))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (unsorted) and eigenvectors as the columns of the
/// second matrix.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();

    let norm: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..m)
            .flat_map(|p| ((p + 1)..m).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * norm || off == 0.0 {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..m {
                    if k != p && k != q {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[p][k] = a[k][p];
                        a[k][q] = s * akp + c * akq;
                        a[q][k] = a[k][q];
                    }
                }
                a[p][p] -= t * apq;
                a[q][q] += t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;

                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..m).map(|i| a[i][i]).collect(), v)
}

/// Full-rank PCA of an n×m matrix (n ≥ 2).
///
/// Components are sorted by descending eigenvalue and signed so that each
/// component's largest-magnitude entry is positive.
pub fn pca(matrix: &[Vec<f64>]) -> Result<PcaDecomposition> {
    let (mean, cov) = covariance(matrix)?;
    let m = mean.len();
    let (values, vectors) = jacobi_eigen(&cov);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = vectors.iter().map(|row| row[i]).collect();
            let pivot = c.iter().copied().fold(
                0.0f64,
                |best, x| if x.abs() > best.abs() { x } else { best },
            );
            if pivot < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();

    let scores: Vec<Vec<f64>> = matrix
        .iter()
        .map(|row| project(&mean, &components, row))
        .collect();
    let residuals = matrix
        .iter()
        .zip(&scores)
        .map(|(row, s)| {
            let fit = reconstruct(&mean, &components, s);
            row.iter().zip(fit).map(|(x, f)| x - f).collect()
        })
        .collect();

    Ok(PcaDecomposition {
        mean,
        components,
        scores,
        eigenvalues,
        residuals,
    })
}

/// Number of components by the eigenvalue-ratio criterion: the k in
/// 1..len-1 minimizing λ_{k+1}/λ_k while λ_k/λ_1 ≥ δ (and 1 otherwise),
/// smallest k on ties.
pub fn select_k_evr(eigenvalues: &[f64], delta: f64) -> Result<usize> {
    if eigenvalues.len() < 2 {
        return Ok(1);
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "EVR delta must be positive, got {delta}"
        )));
    }
    if eigenvalues.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter(
            "eigenvalues must be non-negative".into(),
        ));
    }
    if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter(
            "eigenvalues must be descending".into(),
        ));
    }
    let lead = eigenvalues[0];
    if !(lead > 0.0) {
        return Err(Error::InvalidParameter(
            "leading eigenvalue must be positive".into(),
        ));
    }
    let mut best = (1usize, f64::INFINITY);
    for k in 1..eigenvalues.len() {
        let lk = eigenvalues[k - 1];
        let criterion = if lk / lead >= delta {
            eigenvalues[k] / lk
        } else {
            1.0
        };
        if criterion < best.1 {
            best = (k, criterion);
        }
    }
    Ok(best.0)
}
