//! Dual principal covector, principal projection, and the exponential
//! separation between the principal direction and its complement.
//!
//! The dual cocycle is the transpose running backwards, so its pullback
//! consumes forward path samples; the projection P = I - w w*^T / <w, w*>
//! peels off the principal direction, and the second exponent comes from a
//! Kingman-style fit of ln ||U(n) P|| at geometrically spaced horizons.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cocycle::{forward_product, CocycleProduct, ModelSpec, OmegaPath};
use crate::error::{CoreError, Result};
use crate::exec::run_replicates;
use crate::focusing::{contraction_ratio, kappa_of};
use crate::ordered::ConeVector;
use crate::principal::{
    lyapunov_top, pullback_principal, EstimatorConfig, EstimateRecord, PrincipalVector,
    PullbackSettings, ReplicateEstimate,
};
use crate::stats::{batch_means, combined_se, linear_fit, slope_standard_error};

/// Pairings at or below this are treated as degenerate.
pub const PAIRING_TOL: f64 = 1e-12;

/// Dual principal covector at `anchor` by pullback on the transposed
/// cocycle. The dual cocycle at time t covers the window [anchor, anchor+t),
/// so deeper pullbacks consume samples further forward.
pub fn dual_principal(
    path: &OmegaPath,
    anchor: i64,
    settings: &PullbackSettings,
    start: Option<&ConeVector>,
) -> Result<PrincipalVector> {
    let model = path.model();
    let n = model.dim;
    let t = settings.step.max(1);
    let e_star = ConeVector::uniform(n, model.norm)?;
    let start_vec = match start {
        Some(s) => {
            if !s.strictly_positive() {
                return Err(CoreError::InvalidConfig(
                    "dual pullback start must be strictly positive".into(),
                ));
            }
            s.normalized(model.norm)?
        }
        None => e_star.clone(),
    };

    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut depth = 0u32;
    let mut hit_cap = false;
    let mut error_bound = f64::INFINITY;

    if settings.certified {
        let mut kappa_first_sq = None;
        let mut q_product = 1.0;
        let mut best = f64::INFINITY;
        loop {
            depth += 1;
            let block_start = anchor + (depth as i64 - 1) * t as i64;
            let block = forward_product(path, block_start, t as u64);
            let a = block.value().transpose();
            if a.iter().any(|x| *x <= 0.0) {
                return Err(CoreError::FocusingViolation { index: block_start });
            }
            let kappa = kappa_of(&a, &e_star)?;
            let q = contraction_ratio(&a)?;
            match kappa_first_sq {
                None => kappa_first_sq = Some(kappa * kappa),
                Some(k1sq) => {
                    let raw = 6.0 * k1sq * kappa.ln() * q_product;
                    best = best.min(raw.max(0.0));
                }
            }
            q_product *= q;
            blocks.push(a);
            error_bound = best;
            if depth >= 2 && error_bound < settings.tolerance {
                break;
            }
            if depth >= settings.depth_cap {
                hit_cap = true;
                break;
            }
        }
    } else {
        depth = settings.depth_cap.min(64);
        for d in 1..=depth {
            let block_start = anchor + (d as i64 - 1) * t as i64;
            blocks.push(forward_product(path, block_start, t as u64).value().transpose());
        }
    }

    let mut v = start_vec.coords().clone();
    for a in blocks.iter().rev() {
        let u = a * &v;
        let norm = model.norm.vector_norm(&u);
        if norm <= 0.0 || !norm.is_finite() {
            return Err(CoreError::FocusingViolation { index: anchor });
        }
        v = u / norm;
    }

    Ok(PrincipalVector {
        anchor,
        w: ConeVector::from_dvector(v)?,
        depth,
        error_bound,
        hit_cap,
    })
}

/// The data needed to apply the principal projection at one path index.
#[derive(Clone, Debug)]
pub struct ProjectionRecord {
    pub index: i64,
    pub w: ConeVector,
    pub w_star: ConeVector,
    pub pairing: f64,
}

impl ProjectionRecord {
    pub fn new(index: i64, w: ConeVector, w_star: ConeVector) -> Result<Self> {
        let pairing = w.coords().dot(w_star.coords());
        if !(pairing > PAIRING_TOL) {
            return Err(CoreError::DegeneratePairing {
                tolerance: PAIRING_TOL,
            });
        }
        Ok(Self {
            index,
            w,
            w_star,
            pairing,
        })
    }

    /// P u = u - (<u, w*>/<w, w*>) w.
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        let c = u.dot(self.w_star.coords()) / self.pairing;
        u - self.w.coords() * c
    }

    /// Dense I - w w*^T / <w, w*>.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.w.coords().len();
        DMatrix::identity(n, n)
            - self.w.coords() * self.w_star.coords().transpose() / self.pairing
    }
}

/// Forward projection of `u` onto the complement of the principal
/// direction; errors at record construction if the pairing degenerates.
pub fn principal_projection(record: &ProjectionRecord, u: &DVector<f64>) -> DVector<f64> {
    record.apply(u)
}

/// Principal vector, dual covector and their pairing at one index.
pub fn projection_record(
    path: &OmegaPath,
    anchor: i64,
    settings: &PullbackSettings,
) -> Result<ProjectionRecord> {
    let w = pullback_principal(path, anchor, settings, None)?;
    let w_star = dual_principal(path, anchor, settings, None)?;
    ProjectionRecord::new(anchor, w.w, w_star.w)
}

/// The principal pair and its exponents at the anchor of the first seed.
#[derive(Clone, Debug)]
pub struct PrincipalPair {
    pub w: ConeVector,
    pub w_star: ConeVector,
    pub pairing: f64,
    pub lambda1: f64,
    pub lambda1_se: f64,
    pub lambda2: f64,
    pub lambda2_se: f64,
    pub sigma: f64,
}

/// Outcome of a separation run.
#[derive(Debug)]
pub struct SeparationRun {
    pub pair: PrincipalPair,
    pub lambda1: EstimateRecord,
    pub lambda2: EstimateRecord,
    pub sigma: f64,
    pub sigma_se: f64,
    /// σ̂ exceeds three combined standard errors.
    pub separated: bool,
    pub certified: bool,
    /// Per replicate, the fitted (n, g_n) points with g_n = ln ||U(n) P||.
    pub traces: Vec<Vec<(u64, f64)>>,
}

/// Geometrically spaced checkpoints 4, 8, ..., ending exactly at n.
fn geometric_checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut v = 4u64.min(n);
    while v < n {
        out.push(v);
        v *= 2;
    }
    out.push(n);
    out
}

fn second_exponent_replicate(
    model: &ModelSpec,
    seed: u64,
    horizon: u64,
    settings: &PullbackSettings,
) -> Result<(ReplicateEstimate, Vec<(u64, f64)>)> {
    let path = OmegaPath::new(model, seed)?;
    let n = model.dim;

    // Dual covectors along the whole window in one backward sweep: the dual
    // recursion w*(k) ∝ A_k^T w*(k+1) contracts toward smaller k, so seeding
    // it with a certified pullback at the horizon makes every stored vector
    // at least as accurate as that seed.
    let seed_vec = dual_principal(&path, horizon as i64, settings, None)?;
    let mut w_stars = vec![0.0_f64; (horizon as usize + 1) * n];
    w_stars[horizon as usize * n..].copy_from_slice(seed_vec.w.as_slice());
    let mut v = seed_vec.w.coords().clone();
    for k in (0..horizon as usize).rev() {
        let u = path.matrix(k as i64).transpose() * &v;
        let norm = model.norm.vector_norm(&u);
        if norm <= 0.0 || !norm.is_finite() {
            return Err(CoreError::FocusingViolation { index: k as i64 });
        }
        v = u / norm;
        w_stars[k * n..(k + 1) * n].copy_from_slice(v.as_slice());
    }

    let w0 = pullback_principal(&path, 0, settings, None)?;
    let record = ProjectionRecord::new(
        0,
        w0.w.clone(),
        ConeVector::new(w_stars[..n].to_vec())?,
    )?;
    let mut w = w0.w.coords().clone();

    // ln ||U(n) P(ω)|| is evaluated through the exact identity
    // U(n)P(ω) = P(θ_n ω) U(n) P(ω): reapplying the projection at every step
    // removes the top component that rounding keeps reinjecting, without
    // changing the operator.
    let mut prod = CocycleProduct::from_matrix(record.matrix());
    let checkpoints = geometric_checkpoints(horizon);
    let mut trace = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    for k in 0..horizon as usize {
        let a = path.matrix(k as i64);
        prod.apply_left(&a);
        let uw = &a * &w;
        let wn = model.norm.vector_norm(&uw);
        if wn <= 0.0 || !wn.is_finite() {
            return Err(CoreError::FocusingViolation { index: k as i64 });
        }
        w = uw / wn;
        let ws = DVector::from_column_slice(&w_stars[(k + 1) * n..(k + 2) * n]);
        let pairing = w.dot(&ws);
        if !(pairing > PAIRING_TOL) {
            return Err(CoreError::DegeneratePairing {
                tolerance: PAIRING_TOL,
            });
        }
        let projected = prod.value() - &w * (ws.transpose() * prod.value()) / pairing;
        *prod.value_mut() = projected;
        if checkpoints[next] == k as u64 + 1 {
            let g = model.norm.operator_norm(prod.value()).ln() + prod.log_scale();
            trace.push((k as u64 + 1, g));
            next += 1;
            if next == checkpoints.len() {
                break;
            }
        }
    }
    // Fit over the last half of the checkpoints; early horizons carry the
    // subadditive bias upward.
    let half = trace.len() / 2;
    let xs: Vec<f64> = trace[half..].iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = trace[half..].iter().map(|(_, g)| *g).collect();
    let (slope, _) = linear_fit(&xs, &ys);
    let se = slope_standard_error(&xs, &ys);
    Ok((
        ReplicateEstimate {
            seed,
            value: slope,
            se: if se.is_nan() { 0.0 } else { se },
            steps: horizon,
        },
        trace,
    ))
}

/// Second exponent and separation: λ̂₂ from the Kingman surrogate
/// g_n = ln ||U_ω(n) ∘ P(ω)||, σ̂ = λ̂₁ − λ̂₂.
pub fn second_exponent(
    model: &ModelSpec,
    seeds: &[u64],
    cfg: &EstimatorConfig,
) -> Result<SeparationRun> {
    if seeds.is_empty() {
        return Err(CoreError::InvalidConfig("need at least one seed".into()));
    }
    let settings = cfg.pullback_settings(model)?;
    let top = lyapunov_top(model, seeds, cfg)?;
    let outputs = run_replicates(seeds, cfg.workers, |seed| {
        second_exponent_replicate(model, seed, cfg.horizon, &settings)
    })?;
    let mut replicates = Vec::with_capacity(outputs.len());
    let mut traces = Vec::with_capacity(outputs.len());
    for (est, trace) in outputs {
        replicates.push(est);
        traces.push(trace);
    }
    let lambda2 = EstimateRecord::aggregate(replicates);
    let sigma = top.estimate.mean - lambda2.mean;
    let sigma_se = combined_se(top.estimate.se, lambda2.se);
    let path = OmegaPath::new(model, seeds[0])?;
    let record = projection_record(&path, 0, &settings)?;
    let pair = PrincipalPair {
        w: record.w.clone(),
        w_star: record.w_star.clone(),
        pairing: record.pairing,
        lambda1: top.estimate.mean,
        lambda1_se: top.estimate.se,
        lambda2: lambda2.mean,
        lambda2_se: lambda2.se,
        sigma,
    };
    Ok(SeparationRun {
        pair,
        lambda1: top.estimate,
        lambda2,
        sigma,
        sigma_se,
        separated: sigma > 3.0 * sigma_se && sigma > 0.0,
        certified: settings.certified,
        traces,
    })
}

/// One temperedness checkpoint.
#[derive(Clone, Debug, Serialize)]
pub struct TemperednessPoint {
    pub seed: u64,
    pub n: u64,
    pub ln_proj_norm: f64,
    /// ln ||P(θ_n ω)|| / n, the quantity that must vanish in the limit.
    pub ratio: f64,
    pub ln_pairing: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TemperednessReport {
    pub verdict: bool,
    pub epsilon: f64,
    pub points: Vec<TemperednessPoint>,
    /// Trend of ln ||P(θ_n ω)|| against n; sublinear growth fits near zero.
    pub slope: f64,
}

/// Check |ln ||P(θ_n ω)|| / n| ≤ ε at n ∈ {N/4, N/2, N} for each seed.
pub fn temperedness_check(
    model: &ModelSpec,
    seeds: &[u64],
    cfg: &EstimatorConfig,
) -> Result<TemperednessReport> {
    let epsilon = 0.01;
    let settings = cfg.pullback_settings(model)?;
    let ns = [cfg.horizon / 4, cfg.horizon / 2, cfg.horizon];
    let per_seed = run_replicates(seeds, cfg.workers, |seed| {
        let path = OmegaPath::new(model, seed)?;
        let mut points = Vec::new();
        for &n in &ns {
            if n == 0 {
                continue;
            }
            let record = projection_record(&path, n as i64, &settings)?;
            let ln_norm = model.norm.operator_norm(&record.matrix()).ln();
            points.push(TemperednessPoint {
                seed,
                n,
                ln_proj_norm: ln_norm,
                ratio: ln_norm / n as f64,
                ln_pairing: record.pairing.ln(),
            });
        }
        Ok(points)
    })?;
    let points: Vec<TemperednessPoint> = per_seed.into_iter().flatten().collect();
    let verdict = points.iter().all(|p| p.ratio.abs() <= epsilon);
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ln_proj_norm).collect();
    let (slope, _) = if xs.len() >= 2 {
        linear_fit(&xs, &ys)
    } else {
        (0.0, 0.0)
    };
    Ok(TemperednessReport {
        verdict,
        epsilon,
        points,
        slope,
    })
}

/// Empirical cone-alignment defect of the splitting span{v} ⊕ span(frame):
/// the infimum over cone directions u of ||Pu|| / ||u − Pu||, where P
/// projects onto the frame along v. Near zero means the top direction
/// meets the cone; values away from zero flag a misaligned splitting.
pub fn cone_alignment_defect(
    frame: &[DVector<f64>],
    v: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = v.len();
    if frame.len() != n - 1 {
        return Err(CoreError::InvalidConfig(format!(
            "complement frame must have {} vectors",
            n - 1
        )));
    }
    let mut basis = DMatrix::zeros(n, n);
    for (j, f) in frame.iter().enumerate() {
        if f.len() != n {
            return Err(CoreError::DimensionMismatch {
                expected: n,
                got: f.len(),
            });
        }
        basis.set_column(j, f);
    }
    basis.set_column(n - 1, v);
    let lu = basis.clone().lu();
    if lu.determinant().abs() < 1e-14 {
        return Err(CoreError::InvalidConfig(
            "frame and top direction do not span the space".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_defe_c700_0000);
    let mut best = f64::INFINITY;
    let mut probe = |u: DVector<f64>| {
        if let Some(c) = lu.solve(&u) {
            let along_v = v * c[n - 1];
            let proj = &u - &along_v;
            let denom = along_v.norm();
            if denom > 1e-14 {
                best = best.min(proj.norm() / denom);
            }
        }
    };
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        probe(e);
    }
    // When the top direction itself lies in the cone (up to sign), it is a
    // legitimate probe and attains the zero infimum exactly.
    if v.iter().all(|x| *x >= 0.0) || v.iter().all(|x| *x <= 0.0) {
        probe(v.abs());
    }
    for _ in 0..samples {
        let u = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0_f64));
        if u.norm() > 0.0 {
            let un = &u / u.norm();
            probe(un);
        }
    }
    Ok(best)
}

/// Comparison of the top exponents of an entrywise-dominated pair.
#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub lower: EstimateRecord,
    pub upper: EstimateRecord,
    pub gap: f64,
    pub ordered: bool,
}

/// Number of leading samples whose domination is verified per seed.
const DOMINATION_CHECK_STEPS: u64 = 4096;

/// Coupled monotonicity check: with A_lo(k) ≤ A_hi(k) entrywise along
/// shared seeds, the top exponents must be ordered the same way.
pub fn compare_exponents(
    model_lo: &ModelSpec,
    model_hi: &ModelSpec,
    seeds: &[u64],
    cfg: &EstimatorConfig,
) -> Result<ComparisonReport> {
    if model_lo.dim != model_hi.dim {
        return Err(CoreError::DimensionMismatch {
            expected: model_lo.dim,
            got: model_hi.dim,
        });
    }
    let check = cfg.horizon.min(DOMINATION_CHECK_STEPS);
    for &seed in seeds {
        let lo = OmegaPath::new(model_lo, seed)?;
        let hi = OmegaPath::new(model_hi, seed)?;
        for k in 0..check as i64 {
            let a = lo.matrix(k);
            let b = hi.matrix(k);
            if a.iter().zip(b.iter()).any(|(x, y)| *x > *y + 1e-12) {
                return Err(CoreError::DominationViolated { index: k });
            }
        }
    }
    let lower = lyapunov_top(model_lo, seeds, cfg)?.estimate;
    let upper = lyapunov_top(model_hi, seeds, cfg)?.estimate;
    let gap = upper.mean - lower.mean;
    let ordered = lower.mean <= upper.mean + 3.0 * combined_se(lower.se, upper.se);
    Ok(ComparisonReport {
        lower,
        upper,
        gap,
        ordered,
    })
}

/// Top exponent of the dual cocycle: Birkhoff averaging along the
/// dual trajectory v ← A_{-k}^T v, initialized by the dual pullback.
fn dual_lyapunov(model: &ModelSpec, seeds: &[u64], cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    let settings = cfg.pullback_settings(model)?;
    let replicates = run_replicates(seeds, cfg.workers, |seed| {
        let path = OmegaPath::new(model, seed)?;
        let w_star = dual_principal(&path, 0, &settings, None)?;
        let mut v = w_star.w.coords().clone();
        let burn = cfg.burn().min(cfg.horizon.saturating_sub(1));
        let mut values = Vec::with_capacity((cfg.horizon - burn) as usize);
        for k in 0..cfg.horizon {
            let u = path.matrix(-1 - k as i64).transpose() * &v;
            let norm = model.norm.vector_norm(&u);
            if norm <= 0.0 || !norm.is_finite() {
                return Err(CoreError::FocusingViolation { index: -1 - k as i64 });
            }
            v = u / norm;
            if k >= burn {
                values.push(norm.ln());
            }
        }
        let (mean, se) = batch_means(&values, 32);
        Ok(ReplicateEstimate {
            seed,
            value: mean,
            se,
            steps: cfg.horizon - burn,
        })
    })?;
    Ok(EstimateRecord::aggregate(replicates))
}

#[derive(Debug, Serialize)]
pub struct DualityReport {
    pub lambda1: EstimateRecord,
    pub lambda1_star: EstimateRecord,
    pub gap: f64,
}

/// The cocycle and its dual share the top exponent; report both and the gap.
pub fn duality_check(
    model: &ModelSpec,
    seeds: &[u64],
    cfg: &EstimatorConfig,
) -> Result<DualityReport> {
    let lambda1 = lyapunov_top(model, seeds, cfg)?.estimate;
    let lambda1_star = dual_lyapunov(model, seeds, cfg)?;
    let gap = lambda1.mean - lambda1_star.mean;
    Ok(DualityReport {
        lambda1,
        lambda1_star,
        gap,
    })
}
