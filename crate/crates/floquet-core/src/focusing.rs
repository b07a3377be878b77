//! Focusing and contraction analysis: the projective diameter of one step,
//! the Birkhoff contraction ratio tanh(tau/4), the focusing constants
//! (beta, kappa) relative to a focus direction e, primitivity indices for
//! eventually-positive models, and the strong-positivity certificate.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cocycle::{forward_product, EntryDistribution, ModelSpec, ModelVariant, OmegaPath};
use crate::error::{CoreError, Result};
use crate::hilbert::{proj_distance, ratio_bounds};
use crate::ordered::ConeVector;
use crate::stats::RunningStats;

fn column(a: &DMatrix<f64>, j: usize) -> ConeVector {
    ConeVector::new(a.column(j).iter().copied().collect()).expect("n >= 2")
}

fn require_positive(a: &DMatrix<f64>) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] <= 0.0 {
                return Err(CoreError::NonPositiveEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Projective diameter tau of a strictly positive matrix: the image of the
/// cone is spanned by the columns, so the diameter is the max projective
/// distance over column pairs.
pub fn birkhoff_diameter(a: &DMatrix<f64>) -> Result<f64> {
    require_positive(a)?;
    let n = a.ncols();
    let cols: Vec<ConeVector> = (0..n).map(|j| column(a, j)).collect();
    let mut tau = 0.0_f64;
    for j in 0..n {
        for k in j + 1..n {
            tau = tau.max(proj_distance(&cols[j], &cols[k])?);
        }
    }
    Ok(tau)
}

/// Birkhoff contraction ratio q = tanh(tau/4) of one strictly positive step.
pub fn contraction_ratio(a: &DMatrix<f64>) -> Result<f64> {
    Ok((birkhoff_diameter(a)? / 4.0).tanh())
}

/// Focusing constants of a single image direction: beta = m(Au/e) and
/// kappa_u = M(Au/e)/m(Au/e), so beta e <= Au <= kappa_u beta e.
pub fn kappa_beta(a: &DMatrix<f64>, e: &ConeVector, u: &ConeVector) -> Result<(f64, f64)> {
    if !e.strictly_positive() {
        return Err(CoreError::InvalidConfig(
            "focus vector must be strictly positive".into(),
        ));
    }
    let au = ConeVector::from_dvector(a * u.coords())?;
    if au.is_zero() {
        return Err(CoreError::FocusingViolation { index: 0 });
    }
    let rb = ratio_bounds(&au, e)?;
    match (rb.lower(), rb.upper()) {
        (Some(m), Some(mm)) if m > 0.0 => Ok((m, mm / m)),
        _ => Err(CoreError::FocusingViolation { index: 0 }),
    }
}

/// Model-level kappa(A) = sup over rays of kappa_u. The ratio is maximized
/// at the extreme rays of the simplex, so the n coordinate directions
/// suffice; the sampling cross-check lives in the tests.
pub fn kappa_of(a: &DMatrix<f64>, e: &ConeVector) -> Result<f64> {
    let n = a.ncols();
    let mut kappa = 1.0_f64;
    for j in 0..n {
        let mut coords = vec![0.0; n];
        coords[j] = 1.0;
        let (_, ku) = kappa_beta(a, e, &ConeVector::new(coords)?)?;
        kappa = kappa.max(ku);
    }
    Ok(kappa)
}

/// Boolean closure of one multiplication step on zero patterns.
fn bool_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    let mut c = vec![vec![false; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] {
                for j in 0..n {
                    if b[k][j] {
                        c[i][j] = true;
                    }
                }
            }
        }
    }
    c
}

fn pattern_primitivity(pattern: &[Vec<bool>]) -> Option<u32> {
    let n = pattern.len();
    // No zero column allowed (the cone would collapse).
    for j in 0..n {
        if (0..n).all(|i| !pattern[i][j]) {
            return None;
        }
    }
    let bound = ((n - 1) * (n - 1) + 1) as u32;
    let mut power = pattern.to_vec();
    for t in 1..=bound {
        if power.iter().all(|row| row.iter().all(|&x| x)) {
            return Some(t);
        }
        power = bool_mul(&power, pattern);
    }
    None
}

/// Smallest T <= (n-1)^2 + 1 with A^T entrywise positive; None if A is
/// imprimitive.
pub fn primitivity_index(a: &DMatrix<f64>) -> Result<Option<u32>> {
    let n = a.nrows();
    if a.iter().any(|x| *x < 0.0) {
        return Err(CoreError::InvalidConfig(
            "primitivity index needs a nonnegative matrix".into(),
        ));
    }
    for j in 0..n {
        if a.column(j).iter().all(|x| *x == 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "primitivity index: column {j} is zero"
            )));
        }
    }
    let pattern: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] > 0.0).collect())
        .collect();
    Ok(pattern_primitivity(&pattern))
}

fn entry_as_positive(d: &EntryDistribution) -> bool {
    match d {
        EntryDistribution::Constant { value } => *value > 0.0,
        // Continuous law: positive almost surely whenever the support is not {0}.
        EntryDistribution::Uniform { hi, .. } => *hi > 0.0,
    }
}

/// Almost-sure positivity pattern of one sampled step.
fn model_pattern(model: &ModelSpec) -> Vec<Vec<bool>> {
    let n = model.dim;
    match &model.variant {
        ModelVariant::Deterministic { matrix } => (0..n)
            .map(|i| (0..n).map(|j| matrix[i][j] > 0.0).collect())
            .collect(),
        ModelVariant::IidEnsemble { entry } => {
            vec![vec![entry_as_positive(entry); n]; n]
        }
        ModelVariant::MarkovSwitch { states, .. } => (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| states.iter().all(|s| s[i][j] > 0.0))
                    .collect()
            })
            .collect(),
        ModelVariant::LeslieRandom {
            fecundity,
            survival,
        } => {
            let mut p = vec![vec![false; n]; n];
            for j in 0..n {
                p[0][j] = entry_as_positive(&fecundity[j]);
            }
            for i in 0..n - 1 {
                p[i + 1][i] = entry_as_positive(&survival[i]);
            }
            p
        }
        ModelVariant::ScalarScaled { base, .. } => (0..n)
            .map(|i| (0..n).map(|j| base[i][j] > 0.0).collect())
            .collect(),
    }
}

/// The power T at which every sampled T-step product is strictly positive,
/// from the almost-sure positivity pattern of one step. None for
/// imprimitive models.
pub fn attain_time(model: &ModelSpec) -> Result<Option<u32>> {
    model.validate()?;
    Ok(pattern_primitivity(&model_pattern(model)))
}

/// Per-model focusing summary, serialized into run records.
#[derive(Clone, Debug, Serialize)]
pub struct FocusingReport {
    pub focus_vector: Vec<f64>,
    /// T-step power at which every sample focuses; None for imprimitive models.
    pub attain_time: Option<u32>,
    /// Max observed focusing constant over the sampled T-step products.
    pub kappa: f64,
    /// Max observed projective diameter.
    pub tau: f64,
    /// tanh(tau/4) for the reported tau.
    pub contraction_p: f64,
    pub samples: u64,
    pub ln_kappa_mean: f64,
    pub ln_kappa_max: f64,
    pub passes: bool,
}

/// Sample T-step products along a path and report their focusing statistics.
pub fn focusing_report(model: &ModelSpec, seed: u64, samples: u64) -> Result<FocusingReport> {
    let e = ConeVector::uniform(model.dim, model.norm)?;
    let attain = attain_time(model)?;
    let t = match attain {
        Some(t) => t,
        None => {
            return Ok(FocusingReport {
                focus_vector: e.as_slice().to_vec(),
                attain_time: None,
                kappa: f64::NAN,
                tau: f64::NAN,
                contraction_p: f64::NAN,
                samples: 0,
                ln_kappa_mean: f64::NAN,
                ln_kappa_max: f64::NAN,
                passes: false,
            })
        }
    };
    let path = OmegaPath::new(model, seed)?;
    let mut kappa_max = 1.0_f64;
    let mut tau_max = 0.0_f64;
    let mut ln_kappa = RunningStats::new();
    let mut ln_kappa_max = f64::NEG_INFINITY;
    for s in 0..samples {
        let block = forward_product(&path, (s * t as u64) as i64, t as u64);
        let a = block.value();
        require_positive(a).map_err(|_| CoreError::FocusingViolation {
            index: (s * t as u64) as i64,
        })?;
        let kappa = kappa_of(a, &e)?;
        let tau = birkhoff_diameter(a)?;
        kappa_max = kappa_max.max(kappa);
        tau_max = tau_max.max(tau);
        ln_kappa.push(kappa.ln());
        ln_kappa_max = ln_kappa_max.max(kappa.ln());
    }
    Ok(FocusingReport {
        focus_vector: e.as_slice().to_vec(),
        attain_time: Some(t),
        kappa: kappa_max,
        tau: tau_max,
        contraction_p: (tau_max / 4.0).tanh(),
        samples,
        ln_kappa_mean: ln_kappa.mean(),
        ln_kappa_max,
        passes: true,
    })
}

/// Strong-positivity statistics: nu_k = m(A_k e / e) along the path, and
/// the resulting lower bound mean(ln nu) for the top exponent.
#[derive(Clone, Debug, Serialize)]
pub struct StrongPositivityReport {
    pub horizon: u64,
    pub min_ln_nu: f64,
    pub mean_ln_nu: f64,
    /// Empirical version of the integral lower bound for lambda_1.
    pub lambda_lower_bound: f64,
}

/// Check (A5)-style domination U(1) e >= nu e step by step.
pub fn verify_a5(
    path: &OmegaPath,
    e_bar: &ConeVector,
    horizon: u64,
) -> Result<StrongPositivityReport> {
    if !e_bar.strictly_positive() {
        return Err(CoreError::InvalidConfig(
            "strong-positivity check needs a strictly positive direction".into(),
        ));
    }
    let mut stats = RunningStats::new();
    let mut min_ln = f64::INFINITY;
    for k in 0..horizon {
        let a = path.matrix(k as i64);
        let image = ConeVector::from_dvector(&a * e_bar.coords())?;
        let nu = ratio_bounds(&image, e_bar)?
            .lower()
            .filter(|m| *m > 0.0)
            .ok_or(CoreError::FocusingViolation { index: k as i64 })?;
        stats.push(nu.ln());
        min_ln = min_ln.min(nu.ln());
    }
    Ok(StrongPositivityReport {
        horizon,
        min_ln_nu: min_ln,
        mean_ln_nu: stats.mean(),
        lambda_lower_bound: stats.mean(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::ModelVariant;
    use crate::ordered::NormKind;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        let n = rows.len();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    fn cv(v: &[f64]) -> ConeVector {
        ConeVector::new(v.to_vec()).unwrap()
    }

    fn random_cone_pair(rng: &mut ChaCha8Rng, n: usize) -> (ConeVector, ConeVector) {
        let u = ConeVector::new((0..n).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap();
        let v = ConeVector::new((0..n).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap();
        (u, v)
    }

    #[test]
    fn diameter_examples() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!((birkhoff_diameter(&a).unwrap() - 4.0_f64.ln()).abs() < 1e-14);

        // Rank one: both columns on one ray.
        let r1 = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(birkhoff_diameter(&r1).unwrap(), 0.0);

        let eps = 0.1;
        let pert = mat(&[&[1.0, eps], &[eps, 1.0]]);
        assert!((birkhoff_diameter(&pert).unwrap() - 100.0_f64.ln()).abs() < 1e-12);

        let bad = mat(&[&[1.0, 0.0], &[1.0, 1.0]]);
        assert!(matches!(
            birkhoff_diameter(&bad),
            Err(CoreError::NonPositiveEntry { .. })
        ));
    }

    #[test]
    fn diameter_dominates_sampled_pairs() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let tau = birkhoff_diameter(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sup = 0.0_f64;
        for _ in 0..100_000 {
            let (u, v) = random_cone_pair(&mut rng, 2);
            let au = ConeVector::from_dvector(&a * u.coords()).unwrap();
            let av = ConeVector::from_dvector(&a * v.coords()).unwrap();
            sup = sup.max(proj_distance(&au, &av).unwrap());
        }
        assert!(sup <= tau + 1e-12, "empirical sup {sup} exceeds tau {tau}");
    }

    #[test]
    fn contraction_ratio_closed_forms() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!((contraction_ratio(&a).unwrap() - 1.0 / 3.0).abs() < 1e-14);

        let r1 = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(contraction_ratio(&r1).unwrap(), 0.0);

        let pert = mat(&[&[1.0, 0.1], &[0.1, 1.0]]);
        assert!((contraction_ratio(&pert).unwrap() - 9.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn contraction_certificate_on_sampled_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = 3;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.2..3.0));
            let q = contraction_ratio(&a).unwrap();
            for _ in 0..500 {
                let (u, v) = random_cone_pair(&mut rng, n);
                let d0 = proj_distance(&u, &v).unwrap();
                let au = ConeVector::from_dvector(&a * u.coords()).unwrap();
                let av = ConeVector::from_dvector(&a * v.coords()).unwrap();
                let d1 = proj_distance(&au, &av).unwrap();
                assert!(d1 <= q * d0 + 1e-12);
                assert!(d1 <= d0 + 1e-12);
            }
        }
    }

    #[test]
    fn monotone_refinement_of_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(0.5..2.0));
        for _ in 0..200 {
            let (u, v) = random_cone_pair(&mut rng, 3);
            let rb0 = ratio_bounds(&u, &v).unwrap();
            if (rb0.upper().unwrap() - rb0.lower().unwrap()).abs() < 1e-9 {
                continue; // proportional pair: bounds are already tight
            }
            let au = ConeVector::from_dvector(&a * u.coords()).unwrap();
            let av = ConeVector::from_dvector(&a * v.coords()).unwrap();
            let rb1 = ratio_bounds(&au, &av).unwrap();
            assert!(rb1.lower().unwrap() > rb0.lower().unwrap());
            assert!(rb1.upper().unwrap() < rb0.upper().unwrap());
        }
    }

    #[test]
    fn kappa_beta_examples() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = cv(&[0.5, 0.5]);
        let (beta, ku) = kappa_beta(&a, &e, &cv(&[1.0, 0.0])).unwrap();
        assert!((ku - 2.0).abs() < 1e-14);
        assert!((beta - 2.0).abs() < 1e-14); // min(2/0.5, 1/0.5)

        // Rank one: kappa_u is the same column-ratio constant for every u.
        let r1 = mat(&[&[1.0, 2.0], &[3.0, 6.0]]);
        let (_, k1) = kappa_beta(&r1, &e, &cv(&[1.0, 0.0])).unwrap();
        let (_, k2) = kappa_beta(&r1, &e, &cv(&[0.3, 0.7])).unwrap();
        assert!((k1 - k2).abs() < 1e-12);
        assert!((kappa_of(&r1, &e).unwrap() - k1).abs() < 1e-12);

        // The Perron direction of a symmetric matrix minimizes kappa_u.
        let (_, k_perron) = kappa_beta(&a, &e, &cv(&[0.5, 0.5])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = cv(&[rng.random_range(0.01..1.0), rng.random_range(0.01..1.0)]);
            let (_, ku) = kappa_beta(&a, &e, &u).unwrap();
            assert!(ku + 1e-12 >= k_perron);
        }
    }

    #[test]
    fn kappa_vertex_maximum_vs_simplex_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let n = 4;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.1..4.0));
            let e = ConeVector::uniform(n, NormKind::Ell1).unwrap();
            let kappa = kappa_of(&a, &e).unwrap();
            for _ in 0..2000 {
                let u =
                    ConeVector::new((0..n).map(|_| rng.random_range(0.0..1.0) + 1e-6).collect())
                        .unwrap();
                let (_, ku) = kappa_beta(&a, &e, &u).unwrap();
                assert!(ku <= kappa + 1e-9, "interior point beats vertex max");
            }
        }
    }

    #[test]
    fn diameter_bounded_by_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(2..5);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.05..5.0));
            let e = ConeVector::uniform(n, NormKind::Ell1).unwrap();
            let tau = birkhoff_diameter(&a).unwrap();
            let kappa = kappa_of(&a, &e).unwrap();
            assert!(tau <= 2.0 * kappa.ln() + 1e-10);
        }
    }

    #[test]
    fn primitivity_examples() {
        let pos = mat(&[&[1.0, 2.0], &[0.5, 1.0]]);
        assert_eq!(primitivity_index(&pos).unwrap(), Some(1));

        let perm = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(primitivity_index(&perm).unwrap(), None);

        let leslie = mat(&[&[0.7, 1.3], &[0.5, 0.0]]);
        assert_eq!(primitivity_index(&leslie).unwrap(), Some(2));
    }

    #[test]
    fn attain_time_per_variant() {
        let iid = ModelSpec {
            dim: 2,
            norm: NormKind::Ell1,
            variant: ModelVariant::IidEnsemble {
                entry: EntryDistribution::Uniform { lo: 1.0, hi: 2.0 },
            },
        };
        assert_eq!(attain_time(&iid).unwrap(), Some(1));

        let leslie3 = ModelSpec {
            dim: 3,
            norm: NormKind::Ell1,
            variant: ModelVariant::LeslieRandom {
                fecundity: vec![
                    EntryDistribution::Uniform { lo: 0.2, hi: 0.6 },
                    EntryDistribution::Uniform { lo: 1.0, hi: 2.0 },
                    EntryDistribution::Uniform { lo: 0.8, hi: 1.4 },
                ],
                survival: vec![
                    EntryDistribution::Uniform { lo: 0.5, hi: 0.9 },
                    EntryDistribution::Uniform { lo: 0.4, hi: 0.8 },
                ],
            },
        };
        assert_eq!(attain_time(&leslie3).unwrap(), Some(3));

        let perm = ModelSpec {
            dim: 2,
            norm: NormKind::Ell1,
            variant: ModelVariant::Deterministic {
                matrix: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            },
        };
        assert_eq!(attain_time(&perm).unwrap(), None);
    }

    #[test]
    fn focusing_report_invariants() {
        let model = ModelSpec {
            dim: 2,
            norm: NormKind::Ell1,
            variant: ModelVariant::IidEnsemble {
                entry: EntryDistribution::Uniform { lo: 0.5, hi: 2.0 },
            },
        };
        let report = focusing_report(&model, 7, 64).unwrap();
        assert!(report.passes);
        assert_eq!(report.attain_time, Some(1));
        assert!(report.kappa >= 1.0);
        assert!(report.tau <= 2.0 * report.kappa.ln() + 1e-10);
        assert_eq!(report.contraction_p, (report.tau / 4.0).tanh());
    }

    #[test]
    fn a5_examples() {
        // Perron direction of a deterministic matrix: nu is the Perron root.
        let model = ModelSpec {
            dim: 2,
            norm: NormKind::Ell1,
            variant: ModelVariant::Deterministic {
                matrix: vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            },
        };
        let path = OmegaPath::new(&model, 0).unwrap();
        let report = verify_a5(&path, &cv(&[0.5, 0.5]), 16).unwrap();
        assert!((report.mean_ln_nu - 3.0_f64.ln()).abs() < 1e-14);
        assert!((report.min_ln_nu - 3.0_f64.ln()).abs() < 1e-14);

        // Diagonal domination: A >= c Id gives nu >= c for any direction.
        let dom = ModelSpec {
            dim: 2,
            norm: NormKind::Ell1,
            variant: ModelVariant::Deterministic {
                matrix: vec![vec![1.5, 0.2], vec![0.3, 1.5]],
            },
        };
        let path = OmegaPath::new(&dom, 0).unwrap();
        let report = verify_a5(&path, &cv(&[0.8, 0.2]), 8).unwrap();
        assert!(report.min_ln_nu >= 1.5_f64.ln() - 1e-12);

        // Imprimitive permutation with the symmetric direction: nu = 1.
        let perm = ModelSpec {
            dim: 2,
            norm: NormKind::Ell1,
            variant: ModelVariant::Deterministic {
                matrix: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            },
        };
        let path = OmegaPath::new(&perm, 0).unwrap();
        let half = 0.5_f64.sqrt();
        let report = verify_a5(&path, &cv(&[half, half]), 8).unwrap();
        assert_eq!(report.mean_ln_nu, 0.0);
    }
}
