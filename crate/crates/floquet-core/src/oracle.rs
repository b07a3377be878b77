//! QR re-orthonormalization estimator for the top Lyapunov exponents.
//!
//! Deliberately independent of the pullback machinery: it maintains an
//! orthonormal frame under the cocycle with modified Gram-Schmidt and
//! averages the log diagonal, so agreement with the cone-based estimators
//! is a genuine cross-check rather than a tautology.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cocycle::{ModelSpec, OmegaPath};
use crate::error::{CoreError, Result};
use crate::exec::run_replicates;
use crate::principal::{EstimateRecord, ReplicateEstimate};
use crate::stats::batch_means;

/// Diagonal entries below this end up counted as singular steps.
const SINGULAR_TOL: f64 = 1e-300;

#[derive(Clone, Debug, Serialize)]
pub struct QrEstimate {
    /// Exponent estimates, ordered top down.
    pub exponents: Vec<f64>,
    /// Batch-means standard errors, same order.
    pub standard_errors: Vec<f64>,
    /// Steps skipped because a diagonal entry vanished.
    pub skipped: u64,
    /// Steps that contributed to the averages.
    pub steps: u64,
}

/// One modified Gram-Schmidt sweep in place; returns the diagonal, or None
/// if some column degenerates.
fn mgs(z: &mut DMatrix<f64>) -> Option<Vec<f64>> {
    let k = z.ncols();
    let mut diag = Vec::with_capacity(k);
    for j in 0..k {
        let r = z.column(j).norm();
        if !(r > SINGULAR_TOL) || !r.is_finite() {
            return None;
        }
        let qj: DVector<f64> = z.column(j) / r;
        z.set_column(j, &qj);
        for l in j + 1..k {
            let proj = qj.dot(&z.column(l));
            let updated = z.column(l) - &qj * proj;
            z.set_column(l, &updated);
        }
        diag.push(r);
    }
    Some(diag)
}

/// Top `k_exp` Lyapunov exponents along one path from index `k` over
/// `horizon` steps, with the first tenth discarded as burn-in.
pub fn qr_oseledets_oracle(
    path: &OmegaPath,
    k: i64,
    horizon: u64,
    k_exp: usize,
) -> Result<QrEstimate> {
    let n = path.dim();
    if k_exp == 0 || k_exp > n {
        return Err(CoreError::InvalidConfig(format!(
            "exponent count must be in 1..={n}"
        )));
    }
    if horizon == 0 {
        return Err(CoreError::InvalidConfig("horizon must be positive".into()));
    }
    let burn = horizon / 10;
    let mut q = DMatrix::<f64>::identity(n, n).columns(0, k_exp).into_owned();
    let mut logs: Vec<Vec<f64>> = vec![Vec::new(); k_exp];
    let mut skipped = 0u64;
    let mut steps = 0u64;
    for i in 0..horizon {
        let mut z = path.matrix(k + i as i64) * &q;
        match mgs(&mut z) {
            Some(diag) => {
                q = z;
                if i >= burn {
                    steps += 1;
                    for (j, r) in diag.iter().enumerate() {
                        logs[j].push(r.ln());
                    }
                }
            }
            None => skipped += 1,
        }
    }
    let mut exponents = Vec::with_capacity(k_exp);
    let mut standard_errors = Vec::with_capacity(k_exp);
    for series in &logs {
        let (mean, se) = batch_means(series, 32);
        exponents.push(mean);
        standard_errors.push(se);
    }
    Ok(QrEstimate {
        exponents,
        standard_errors,
        skipped,
        steps,
    })
}

/// Replicated oracle run: one estimate record per exponent, aggregated over
/// seeds exactly like the cone-based estimators.
pub fn qr_exponents(
    model: &ModelSpec,
    seeds: &[u64],
    horizon: u64,
    k_exp: usize,
    workers: Option<usize>,
) -> Result<Vec<EstimateRecord>> {
    if seeds.is_empty() {
        return Err(CoreError::InvalidConfig("need at least one seed".into()));
    }
    let per_seed = run_replicates(seeds, workers, |seed| {
        let path = OmegaPath::new(model, seed)?;
        qr_oseledets_oracle(&path, 0, horizon, k_exp)
    })?;
    let mut records = Vec::with_capacity(k_exp);
    for j in 0..k_exp {
        let replicates = seeds
            .iter()
            .zip(&per_seed)
            .map(|(&seed, est)| ReplicateEstimate {
                seed,
                value: est.exponents[j],
                se: est.standard_errors[j],
                steps: est.steps,
            })
            .collect();
        records.push(EstimateRecord::aggregate(replicates));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::ModelVariant;
    use crate::ordered::NormKind;

    fn det_model(rows: Vec<Vec<f64>>) -> ModelSpec {
        ModelSpec {
            dim: rows.len(),
            norm: NormKind::Ell1,
            variant: ModelVariant::Deterministic { matrix: rows },
        }
    }

    #[test]
    fn symmetric_two_by_two_spectrum() {
        let model = det_model(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        let path = OmegaPath::new(&model, 0).unwrap();
        let est = qr_oseledets_oracle(&path, 0, 4000, 2).unwrap();
        assert!((est.exponents[0] - 3.0_f64.ln()).abs() < 1e-8);
        assert!(est.exponents[1].abs() < 1e-8);
        assert_eq!(est.skipped, 0);
    }

    #[test]
    fn identity_gives_zeros() {
        let model = det_model(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let path = OmegaPath::new(&model, 0).unwrap();
        let est = qr_oseledets_oracle(&path, 0, 100, 2).unwrap();
        assert_eq!(est.exponents, vec![0.0, 0.0]);
    }

    #[test]
    fn diagonal_growth_rates() {
        let model = det_model(vec![vec![4.0, 0.0], vec![0.0, 2.0]]);
        let path = OmegaPath::new(&model, 0).unwrap();
        let est = qr_oseledets_oracle(&path, 0, 200, 2).unwrap();
        assert!((est.exponents[0] - 4.0_f64.ln()).abs() < 1e-12);
        assert!((est.exponents[1] - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rank_one_steps_are_skipped() {
        let model = det_model(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        let path = OmegaPath::new(&model, 0).unwrap();
        let est = qr_oseledets_oracle(&path, 0, 50, 2).unwrap();
        assert_eq!(est.skipped, 50);
        assert_eq!(est.steps, 0);
        // But the top exponent alone is fine: ln 5 for this rank-one matrix.
        let top = qr_oseledets_oracle(&path, 0, 400, 1).unwrap();
        assert_eq!(top.skipped, 0);
        assert!((top.exponents[0] - 5.0_f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn replicated_records_aggregate() {
        let model = det_model(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        let recs = qr_exponents(&model, &[1, 2, 3], 2000, 2, Some(2)).unwrap();
        assert_eq!(recs.len(), 2);
        assert!((recs[0].mean - 3.0_f64.ln()).abs() < 1e-8);
        assert_eq!(recs[0].per_replicate.len(), 3);
    }
}
