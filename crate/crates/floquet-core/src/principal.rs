//! Pullback construction of the generalized principal Floquet vector w,
//! growth logging of ln rho, Birkhoff averaging of the top exponent, and
//! entire positive orbits.
//!
//! The pullback iterates the normalized cocycle started ever deeper in the
//! past at a fixed present index. Its two-parameter Cauchy estimate
//! 6 kappa^2(B_1) ln kappa(B_d) q(B_1)...q(B_{d-1}) over the T-step blocks
//! B_j gives a computable stopping certificate; the depth is doubled until
//! the certificate beats the tolerance or a cap is hit.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cocycle::{forward_product, ModelSpec, OmegaPath};
use crate::error::{CoreError, Result};
use crate::exec::run_replicates;
use crate::focusing::{attain_time, contraction_ratio, kappa_of};
use crate::ordered::ConeVector;
use crate::stats::{batch_means, RunningStats};

/// Shared estimator knobs.
#[derive(Clone, Debug)]
pub struct EstimatorConfig {
    /// Horizon in base time steps.
    pub horizon: u64,
    /// Steps discarded before averaging; defaults to horizon/10.
    pub burn_in: Option<u64>,
    /// Pullback certificate tolerance.
    pub tolerance: f64,
    /// Pullback depth cap (in T-step blocks).
    pub depth_cap: u32,
    /// Focusing power T; None resolves it from the model pattern.
    pub step: Option<u32>,
    /// Worker-pool size for replicate parallelism; None = all cores.
    pub workers: Option<usize>,
    /// Keep per-step growth logs.
    pub keep_trace: bool,
}

impl EstimatorConfig {
    pub fn new(horizon: u64) -> Self {
        Self {
            horizon,
            burn_in: None,
            tolerance: 1e-12,
            depth_cap: 1 << 14,
            step: None,
            workers: None,
            keep_trace: false,
        }
    }

    pub fn burn(&self) -> u64 {
        self.burn_in.unwrap_or(self.horizon / 10)
    }

    /// The focusing power to run on, plus whether certificates apply. A
    /// model whose one-step pattern never becomes strictly positive runs
    /// uncertified: the iteration is still defined, but no Cauchy bound
    /// backs it and reports must flag the fact.
    pub fn resolve_step(&self, model: &ModelSpec) -> Result<(u32, bool)> {
        if let Some(t) = self.step {
            if t == 0 {
                return Err(CoreError::InvalidConfig("step must be positive".into()));
            }
            return Ok((t, true));
        }
        match attain_time(model)? {
            Some(t) => Ok((t, true)),
            None => Ok((1, false)),
        }
    }

    pub(crate) fn pullback_settings(&self, model: &ModelSpec) -> Result<PullbackSettings> {
        let (step, certified) = self.resolve_step(model)?;
        Ok(PullbackSettings {
            tolerance: self.tolerance,
            depth_cap: self.depth_cap,
            step,
            certified,
        })
    }
}

/// Resolved pullback parameters.
#[derive(Clone, Copy, Debug)]
pub struct PullbackSettings {
    pub tolerance: f64,
    pub depth_cap: u32,
    pub step: u32,
    pub certified: bool,
}

impl Default for PullbackSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            depth_cap: 1 << 14,
            step: 1,
            certified: true,
        }
    }
}

/// A unit principal vector anchored at a path index, with its convergence
/// certificate.
#[derive(Clone, Debug)]
pub struct PrincipalVector {
    pub anchor: i64,
    pub w: ConeVector,
    /// Pullback depth in T-step blocks.
    pub depth: u32,
    /// Norm-error certificate; infinite in uncertified mode.
    pub error_bound: f64,
    /// Set when the depth cap stopped the recursion before the tolerance.
    pub hit_cap: bool,
}

fn normalize_step(v: &mut DVector<f64>, a: &DMatrix<f64>, model: &ModelSpec) -> Result<f64> {
    let u = a * &*v;
    let norm = model.norm.vector_norm(&u);
    if norm <= 0.0 || !norm.is_finite() {
        return Err(CoreError::ZeroVector);
    }
    *v = u / norm;
    Ok(norm.ln())
}

/// Cauchy certificate over a block window: 6 kappa(first)^2 ln kappa(last)
/// times the product of the interior contraction ratios.
struct CertificateTracker {
    kappa_first_sq: Option<f64>,
    q_product: f64,
    best: f64,
    blocks_seen: u32,
}

impl CertificateTracker {
    fn new() -> Self {
        Self {
            kappa_first_sq: None,
            q_product: 1.0,
            best: f64::INFINITY,
            blocks_seen: 0,
        }
    }

    /// Feed blocks in order of increasing distance from the anchor.
    fn push(&mut self, kappa: f64, q: f64) -> f64 {
        self.blocks_seen += 1;
        match self.kappa_first_sq {
            None => {
                self.kappa_first_sq = Some(kappa * kappa);
            }
            Some(k1sq) => {
                let raw = 6.0 * k1sq * kappa.ln() * self.q_product;
                self.best = self.best.min(raw.max(0.0));
            }
        }
        self.q_product *= q;
        self.best
    }
}

/// Pullback principal vector at `anchor`: the limit of the normalized
/// cocycle applied to the focus direction from depth s in the past, stopped
/// by the Cauchy certificate.
pub fn pullback_principal(
    path: &OmegaPath,
    anchor: i64,
    settings: &PullbackSettings,
    start: Option<&ConeVector>,
) -> Result<PrincipalVector> {
    let model = path.model();
    let n = model.dim;
    let t = settings.step.max(1);
    let e = ConeVector::uniform(n, model.norm)?;
    let start_vec = match start {
        Some(s) => {
            if !s.strictly_positive() {
                return Err(CoreError::InvalidConfig(
                    "pullback start must be strictly positive".into(),
                ));
            }
            s.normalized(model.norm)?
        }
        None => e,
    };

    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut depth = 0u32;
    let mut hit_cap = false;
    let mut error_bound = f64::INFINITY;

    if settings.certified {
        let focus = ConeVector::uniform(n, model.norm)?;
        let mut tracker = CertificateTracker::new();
        loop {
            depth += 1;
            let block_start = anchor - (depth as i64) * t as i64;
            let block = forward_product(path, block_start, t as u64);
            let a = block.value().clone();
            if a.iter().any(|x| *x <= 0.0) {
                return Err(CoreError::FocusingViolation { index: block_start });
            }
            let kappa = kappa_of(&a, &focus)?;
            let q = contraction_ratio(&a)?;
            blocks.push(a);
            error_bound = tracker.push(kappa, q);
            if depth >= 2 && error_bound < settings.tolerance {
                break;
            }
            if depth >= settings.depth_cap {
                hit_cap = true;
                break;
            }
        }
    } else {
        // No focusing certificate available; run a fixed modest depth.
        depth = settings.depth_cap.min(64);
        for d in 1..=depth {
            let block_start = anchor - (d as i64) * t as i64;
            blocks.push(forward_product(path, block_start, t as u64).value().clone());
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

/// Forward-push a principal vector by t base steps, renormalizing each step.
///
/// Equivariance makes this the pullback at anchor+t within certificates;
/// the returned bound is the forward Cauchy estimate when the window covers
/// whole blocks, otherwise the parent bound is carried.
pub fn forward_normalize(
    path: &OmegaPath,
    pv: &PrincipalVector,
    t: u64,
    settings: &PullbackSettings,
) -> Result<PrincipalVector> {
    let model = path.model();
    let mut v = pv.w.coords().clone();
    for i in 0..t as i64 {
        normalize_step(&mut v, &path.matrix(pv.anchor + i), model)?;
    }
    let block = settings.step.max(1) as u64;
    let mut bound = pv.error_bound;
    if settings.certified && t >= block && t % block == 0 {
        let focus = ConeVector::uniform(model.dim, model.norm)?;
        let s = t / block;
        let mut kappa_first = 0.0;
        let mut kappa_last = 0.0;
        let mut q_mid = 1.0;
        let mut positive = true;
        for j in 0..s {
            let a = forward_product(path, pv.anchor + (j * block) as i64, block);
            let a = a.value();
            if a.iter().any(|x| *x <= 0.0) {
                positive = false;
                break;
            }
            let kappa = kappa_of(a, &focus)?;
            if j == 0 {
                kappa_first = kappa;
            }
            if j == s - 1 {
                kappa_last = kappa;
            }
            if j > 0 {
                q_mid *= contraction_ratio(a)?;
            }
        }
        if positive {
            let raw = 6.0 * kappa_last * kappa_last * kappa_first.ln() * q_mid;
            bound = bound.min(raw.max(0.0));
        }
    }
    Ok(PrincipalVector {
        anchor: pv.anchor + t as i64,
        w: ConeVector::from_dvector(v)?,
        depth: pv.depth + (t / block.max(1)) as u32,
        error_bound: bound,
        hit_cap: pv.hit_cap,
    })
}

/// Per-step log of ln rho_1 along a forward-normalized trajectory.
#[derive(Clone, Debug)]
pub struct GrowthLog {
    /// Index of the first logged step.
    pub start: i64,
    pub ln_rho: Vec<f64>,
    /// Convergence certificate carried along the trajectory (same length).
    pub certificate: Vec<f64>,
}

impl GrowthLog {
    /// Partial sums: cumulative[k] = sum of ln_rho[0..=k].
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.ln_rho
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect()
    }
}

/// One replicate's exponent estimate.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicateEstimate {
    pub seed: u64,
    pub value: f64,
    pub se: f64,
    pub steps: u64,
}

/// Aggregated estimate with its replicate breakdown.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateRecord {
    pub mean: f64,
    pub se: f64,
    pub per_replicate: Vec<ReplicateEstimate>,
}

impl EstimateRecord {
    pub fn aggregate(per_replicate: Vec<ReplicateEstimate>) -> Self {
        let mut stats = RunningStats::new();
        for r in &per_replicate {
            stats.push(r.value);
        }
        let se = if per_replicate.len() >= 2 {
            stats.standard_error()
        } else {
            per_replicate.first().map(|r| r.se).unwrap_or(f64::NAN)
        };
        Self {
            mean: stats.mean(),
            se,
            per_replicate,
        }
    }
}

/// Result of a top-exponent run.
#[derive(Debug)]
pub struct LyapunovRun {
    pub estimate: EstimateRecord,
    /// One log per replicate when tracing was requested.
    pub logs: Vec<Option<GrowthLog>>,
    /// Whether the pullback certificates applied (focusing available).
    pub certified: bool,
}

struct ReplicateOutput {
    estimate: ReplicateEstimate,
    log: Option<GrowthLog>,
}

fn lyapunov_replicate(
    model: &ModelSpec,
    seed: u64,
    cfg: &EstimatorConfig,
    settings: &PullbackSettings,
) -> Result<ReplicateOutput> {
    let path = OmegaPath::new(model, seed)?;
    let pv = pullback_principal(&path, 0, settings, None)?;
    let mut v = pv.w.coords().clone();
    let burn = cfg.burn().min(cfg.horizon.saturating_sub(1));
    let mut values = Vec::with_capacity((cfg.horizon - burn) as usize);
    let mut trace = cfg.keep_trace.then(|| GrowthLog {
        start: 0,
        ln_rho: Vec::with_capacity(cfg.horizon as usize),
        certificate: Vec::with_capacity(cfg.horizon as usize),
    });
    let mut cert = pv.error_bound;
    for k in 0..cfg.horizon {
        let a = path.matrix(k as i64);
        let ln_rho = normalize_step(&mut v, &a, model)
            .map_err(|_| CoreError::FocusingViolation { index: k as i64 })?;
        if k >= burn {
            values.push(ln_rho);
        }
        if let Some(log) = trace.as_mut() {
            // A strictly positive step contracts the initialization error by
            // its Birkhoff ratio, so the carried certificate only tightens.
            if settings.certified && a.iter().all(|x| *x > 0.0) {
                if let Ok(q) = contraction_ratio(&a) {
                    cert *= q;
                }
            }
            log.ln_rho.push(ln_rho);
            log.certificate.push(cert);
        }
    }
    let (mean, se) = batch_means(&values, 32);
    Ok(ReplicateOutput {
        estimate: ReplicateEstimate {
            seed,
            value: mean,
            se,
            steps: cfg.horizon - burn,
        },
        log: trace,
    })
}

/// Top Lyapunov exponent by forward Birkhoff averaging of ln rho_1 along a
/// pullback-initialized principal trajectory, replicated over seeds.
pub fn lyapunov_top(model: &ModelSpec, seeds: &[u64], cfg: &EstimatorConfig) -> Result<LyapunovRun> {
    if seeds.is_empty() {
        return Err(CoreError::InvalidConfig("need at least one seed".into()));
    }
    if cfg.horizon == 0 {
        return Err(CoreError::InvalidConfig("horizon must be positive".into()));
    }
    let settings = cfg.pullback_settings(model)?;
    let outputs = run_replicates(seeds, cfg.workers, |seed| {
        lyapunov_replicate(model, seed, cfg, &settings)
    })?;
    let mut estimates = Vec::with_capacity(outputs.len());
    let mut logs = Vec::with_capacity(outputs.len());
    for out in outputs {
        estimates.push(out.estimate);
        logs.push(out.log);
    }
    Ok(LyapunovRun {
        estimate: EstimateRecord::aggregate(estimates),
        logs,
        certified: settings.certified,
    })
}

/// One point of an entire positive orbit: a unit direction and the log of
/// its scalar weight relative to the anchor.
#[derive(Clone, Debug)]
pub struct OrbitPoint {
    pub index: i64,
    pub direction: ConeVector,
    pub log_scale: f64,
}

/// Reconstruct the entire positive orbit through the principal vector at
/// `anchor` over [anchor-backward, anchor+forward].
///
/// Backward values come from one deep pullback below the window; every
/// later value follows by forward normalization, so the orbit relation
/// holds by construction and no matrix is inverted (the inverse acts on a
/// one-dimensional subspace, i.e. scalar division in the log weights).
pub fn entire_orbit(
    path: &OmegaPath,
    anchor: i64,
    backward: u32,
    forward: u32,
    settings: &PullbackSettings,
) -> Result<Vec<OrbitPoint>> {
    let model = path.model();
    let base = anchor - backward as i64;
    let pv = pullback_principal(path, base, settings, None)?;
    let mut v = pv.w.coords().clone();
    let mut cum = 0.0_f64;
    let mut points = vec![OrbitPoint {
        index: base,
        direction: pv.w.clone(),
        log_scale: 0.0,
    }];
    for i in 0..(backward + forward) as i64 {
        let ln_rho = normalize_step(&mut v, &path.matrix(base + i), model)?;
        cum += ln_rho;
        points.push(OrbitPoint {
            index: base + i + 1,
            direction: ConeVector::from_dvector(v.clone())?,
            log_scale: cum,
        });
    }
    // Re-anchor the weights so the orbit passes through the unit vector at
    // the anchor index.
    let at_anchor = points[backward as usize].log_scale;
    for p in &mut points {
        p.log_scale -= at_anchor;
    }
    Ok(points)
}
