//! The acceptance gate: ten numbered criteria, each printing exactly one
//! pass/fail line. Tolerances here are frozen; loosening any of them is a
//! regression, not a fix.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use floquet_core::cocycle::{
    EntryDistribution, ModelSpec, ModelVariant, OmegaPath, ScalarDistribution,
};
use floquet_core::focusing::{attain_time, contraction_ratio, focusing_report};
use floquet_core::hilbert::proj_distance;
use floquet_core::oracle::qr_exponents;
use floquet_core::principal::{
    entire_orbit, lyapunov_top, pullback_principal, EstimatorConfig, PullbackSettings,
};
use floquet_core::separation::{
    compare_exponents, dual_principal, duality_check, projection_record, second_exponent,
};
use floquet_core::stats::{combined_se, linear_fit, RunningStats};
use floquet_core::{ConeVector, NormKind};

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {id:02} {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn det_model(rows: Vec<Vec<f64>>) -> ModelSpec {
    ModelSpec {
        dim: rows.len(),
        norm: NormKind::Ell1,
        variant: ModelVariant::Deterministic { matrix: rows },
    }
}

fn iid_model(n: usize, lo: f64, hi: f64) -> ModelSpec {
    ModelSpec {
        dim: n,
        norm: NormKind::Ell1,
        variant: ModelVariant::IidEnsemble {
            entry: EntryDistribution::Uniform { lo, hi },
        },
    }
}

fn random_positive(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(lo..hi))
}

#[test]
fn criterion_01_perron_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_lambda = 0.0_f64;
    let mut worst_vec = 0.0_f64;
    for n in 2..=6 {
        let a = random_positive(&mut rng, n, 0.5, 2.5);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
        let model = det_model(rows);
        let (rho, right) = common::perron_right(&a, 20_000);
        let (_, left) = common::perron_left(&a, 20_000);

        let run = lyapunov_top(&model, &[0], &EstimatorConfig::new(2_000)).unwrap();
        worst_lambda = worst_lambda.max((run.estimate.mean - rho.ln()).abs());

        let path = OmegaPath::new(&model, 0).unwrap();
        let settings = PullbackSettings::default();
        let w = pullback_principal(&path, 0, &settings, None).unwrap();
        let w_star = dual_principal(&path, 0, &settings, None).unwrap();
        worst_vec = worst_vec.max(common::ray_distance(w.w.coords(), &right));
        worst_vec = worst_vec.max(common::ray_distance(w_star.w.coords(), &left));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst_lambda < 1e-8 && worst_vec < 1e-8 && elapsed < 1.0;
    report(
        1,
        "perron-recovery",
        ok,
        &format!("max |lambda error| {worst_lambda:.2e}, max ray error {worst_vec:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_tanh_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pairs = 100_000usize;
    let mut worst_low = f64::INFINITY; // min over matrices of (sup ratio - q)
    let mut worst_high = f64::NEG_INFINITY; // max over matrices of (sup ratio - q)
    for _ in 0..20 {
        let a = random_positive(&mut rng, 2, 0.2, 3.0);
        let q = contraction_ratio(&a).unwrap();
        // One-parameter sweep of the projective line: u(t) = (e^{t/2}, e^{-t/2})
        // has d(u(t), u(s)) = |t - s| exactly, so neighbouring grid points are
        // comparable pairs at known distance.
        let (t_lo, t_hi) = (-15.0_f64, 15.0_f64);
        let h = (t_hi - t_lo) / pairs as f64;
        let mut sup = 0.0_f64;
        let image = |t: f64| {
            let u = DVector::from_vec(vec![(t / 2.0).exp(), (-t / 2.0).exp()]);
            ConeVector::from_dvector(&a * u).unwrap()
        };
        let mut prev = image(t_lo);
        for i in 1..=pairs {
            let cur = image(t_lo + h * i as f64);
            sup = sup.max(proj_distance(&cur, &prev).unwrap() / h);
            prev = cur;
        }
        worst_low = worst_low.min(sup - q);
        worst_high = worst_high.max(sup - q);
    }
    let q_exact = contraction_ratio(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
    let third = (q_exact - 1.0 / 3.0).abs();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst_low > -0.05 && worst_high < 1e-9 && third < 1e-12 && elapsed < 30.0;
    report(
        2,
        "tanh-identity",
        ok,
        &format!(
            "sup-q in [{worst_low:.2e}, {worst_high:.2e}], |q([[2,1],[1,2]]) - 1/3| = {third:.2e}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_03_metric_norm_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut violations = 0u64;
    let mut checked = 0u64;
    for kind in [NormKind::Ell1, NormKind::Ell2, NormKind::EllInf] {
        for i in 0..100_000u64 {
            let n = 2 + (i % 5) as usize;
            let draw = |rng: &mut ChaCha8Rng| {
                DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0_f64).exp())
            };
            let u = ConeVector::from_dvector(draw(&mut rng)).unwrap().normalized(kind).unwrap();
            let v = ConeVector::from_dvector(draw(&mut rng)).unwrap().normalized(kind).unwrap();
            let d = proj_distance(&u, &v).unwrap();
            let gap = kind.vector_norm(&(u.coords() - v.coords()));
            checked += 1;
            if gap > d.exp() - 1.0 + 1e-12 {
                violations += 1;
            }
        }
    }
    report(
        3,
        "metric-norm-bound",
        violations == 0,
        &format!("{violations} violations over {checked} unit pairs"),
    );
}

#[test]
fn criterion_04_oracle_agreement() {
    let start = Instant::now();
    let model = iid_model(2, 1.0, 2.0);
    let seeds: Vec<u64> = (1..=8).collect();
    let horizon = 1_000_000u64;
    let sep = second_exponent(&model, &seeds, &EstimatorConfig::new(horizon)).unwrap();
    let qr = qr_exponents(&model, &seeds, horizon, 2, None).unwrap();
    let gap1 = (sep.lambda1.mean - qr[0].mean).abs();
    let tol1 = 3.0 * combined_se(sep.lambda1.se, qr[0].se);
    let gap2 = (sep.lambda2.mean - qr[1].mean).abs();
    let tol2 = 3.0 * combined_se(sep.lambda2.se, qr[1].se);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = gap1 <= tol1 && gap2 <= tol2 && elapsed < 120.0;
    report(
        4,
        "oracle-agreement",
        ok,
        &format!(
            "|d lambda1| {gap1:.2e} <= {tol1:.2e}, |d lambda2| {gap2:.2e} <= {tol2:.2e}, {elapsed:.0}s"
        ),
    );
}

#[test]
fn criterion_05_pullback_rate() {
    let ensembles = [
        iid_model(2, 0.8, 1.6),
        iid_model(3, 0.5, 2.0),
        iid_model(4, 1.0, 2.0),
    ];
    let mut detail = String::new();
    let mut ok = true;
    for (which, model) in ensembles.iter().enumerate() {
        let path = OmegaPath::new(model, 9 + which as u64).unwrap();
        let depths: Vec<u32> = (2..13).collect();
        let mut mean_ln_q = RunningStats::new();
        for d in 1..=*depths.last().unwrap() as i64 {
            mean_ln_q.push(contraction_ratio(&path.matrix(-d)).unwrap().ln());
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &d in &depths {
            let shallow = PullbackSettings { tolerance: 0.0, depth_cap: d, ..Default::default() };
            let deep = PullbackSettings { tolerance: 0.0, depth_cap: d + 1, ..Default::default() };
            let a = pullback_principal(&path, 0, &shallow, None).unwrap();
            let b = pullback_principal(&path, 0, &deep, None).unwrap();
            let inc = a.w.sub(&b.w).unwrap().norm(NormKind::Ell1);
            // Increments at the f64 floor saturate and would flatten the fit.
            if inc > 1e-12 {
                xs.push(d as f64);
                ys.push(inc.ln());
            }
        }
        let (slope, _) = linear_fit(&xs, &ys);
        ok &= slope <= mean_ln_q.mean() + 0.05;
        detail.push_str(&format!(
            "[ensemble {which}: slope {slope:.3} vs mean ln q {:.3}] ",
            mean_ln_q.mean()
        ));
    }
    report(5, "pullback-rate", ok, detail.trim());
}

#[test]
fn criterion_06_projection_suite() {
    let model = iid_model(3, 1.0, 2.0);
    let path = OmegaPath::new(&model, 5).unwrap();
    let settings = PullbackSettings::default();
    let record = projection_record(&path, 0, &settings).unwrap();
    let p = record.matrix();

    let idempotent = NormKind::Ell1.operator_norm(&(&p * &p - &p));
    let kills_w = NormKind::Ell1.vector_norm(&(&p * record.w.coords()));
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut range_defect = 0.0_f64;
    let mut pairings_positive = true;
    for _ in 0..100_000 {
        let u = DVector::from_fn(3, |_, _| rng.random_range(0.01..1.0_f64));
        let norm_u = NormKind::Ell1.vector_norm(&u);
        range_defect = range_defect.max((record.w_star.coords().dot(&(&p * &u))).abs() / norm_u);
        pairings_positive &= record.w_star.coords().dot(&u) > 0.0;
    }
    let n = 100_000i64;
    let far = projection_record(&path, n, &settings).unwrap();
    let tempered = NormKind::Ell1.operator_norm(&far.matrix()).ln().abs() / n as f64;

    let ok = idempotent < 1e-10
        && kills_w < 1e-10
        && range_defect < 1e-10
        && pairings_positive
        && tempered <= 0.01;
    report(
        6,
        "projection-suite",
        ok,
        &format!(
            "||P^2-P|| {idempotent:.2e}, ||P w|| {kills_w:.2e}, max |<Pu,w*>|/||u|| {range_defect:.2e}, |ln||P(theta_n)|||/n {tempered:.2e} at n={n}"
        ),
    );
}

#[test]
fn criterion_07_duality() {
    let det = det_model(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    let det_report = duality_check(&det, &[1], &EstimatorConfig::new(10_000)).unwrap();
    let det_ok = det_report.gap.abs() < 1e-10;

    let cfg = EstimatorConfig::new(20_000);
    let iid = iid_model(2, 0.5, 2.0);
    let iid_report = duality_check(&iid, &[1, 2, 3], &cfg).unwrap();
    let iid_tol = 3.0 * combined_se(iid_report.lambda1.se, iid_report.lambda1_star.se);
    let iid_ok = iid_report.gap.abs() <= iid_tol;

    let markov = ModelSpec {
        dim: 2,
        norm: NormKind::Ell1,
        variant: ModelVariant::MarkovSwitch {
            states: vec![
                vec![vec![2.0, 1.0], vec![1.0, 2.0]],
                vec![vec![1.0, 0.5], vec![0.5, 3.0]],
            ],
            transition: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
        },
    };
    let mk_report = duality_check(&markov, &[1, 2, 3], &cfg).unwrap();
    let mk_tol = 3.0 * combined_se(mk_report.lambda1.se, mk_report.lambda1_star.se);
    let mk_ok = mk_report.gap.abs() <= mk_tol;

    report(
        7,
        "duality",
        det_ok && iid_ok && mk_ok,
        &format!(
            "deterministic gap {:.2e}, iid gap {:.2e} (tol {:.2e}), markov gap {:.2e} (tol {:.2e})",
            det_report.gap.abs(),
            iid_report.gap.abs(),
            iid_tol,
            mk_report.gap.abs(),
            mk_tol
        ),
    );
}

#[test]
fn criterion_08_monotonicity() {
    let base = det_model(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    let scaled = ModelSpec {
        dim: 2,
        norm: NormKind::Ell1,
        variant: ModelVariant::ScalarScaled {
            base: vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            log_factor: ScalarDistribution::Uniform {
                lo: 1.1_f64.ln(),
                hi: 1.1_f64.ln(),
            },
        },
    };
    let cfg = EstimatorConfig::new(20_000);
    let exact = compare_exponents(&base, &scaled, &[1], &cfg).unwrap();
    let exact_err = (exact.gap - 1.1_f64.ln()).abs();

    let lo = iid_model(2, 1.0, 2.0);
    let hi = iid_model(2, 1.5, 2.5);
    let coupled = compare_exponents(&lo, &hi, &[1, 2, 3], &EstimatorConfig::new(100_000)).unwrap();

    let ok = exact_err < 1e-10 && exact.ordered && coupled.ordered && coupled.gap > 0.0;
    report(
        8,
        "monotonicity",
        ok,
        &format!(
            "|gap - ln 1.1| {exact_err:.2e}, dominated ensembles ordered = {} with gap {:.3}",
            coupled.ordered, coupled.gap
        ),
    );
}

#[test]
fn criterion_09_entire_orbit() {
    let model = iid_model(3, 0.8, 1.7);
    let path = OmegaPath::new(&model, 11).unwrap();
    let settings = PullbackSettings::default();
    let orbit = entire_orbit(&path, 0, 20, 20, &settings).unwrap();

    let mut relation = 0.0_f64;
    let mut positive = true;
    for pair in orbit.windows(2) {
        let lhs = path.matrix(pair[0].index) * pair[0].direction.coords();
        let rhs = pair[1].direction.coords() * (pair[1].log_scale - pair[0].log_scale).exp();
        let scale = NormKind::Ell1.vector_norm(&lhs);
        relation = relation.max(NormKind::Ell1.vector_norm(&(lhs - rhs)) / scale);
    }
    for p in &orbit {
        positive &= p.direction.strictly_positive();
    }

    // An orbit grown from an unrelated pullback start must trace the same rays.
    let start = ConeVector::new(vec![0.7, 0.2, 0.1]).unwrap();
    let other = pullback_principal(&path, -20, &settings, Some(&start)).unwrap();
    let mut v = other.w.coords().clone();
    let mut uniqueness = common::ray_distance(&v, orbit[0].direction.coords());
    for (i, p) in orbit.iter().enumerate().skip(1) {
        v = path.matrix(-20 + (i as i64 - 1)) * v;
        let norm: f64 = v.iter().sum();
        v /= norm;
        uniqueness = uniqueness.max(common::ray_distance(&v, p.direction.coords()));
    }

    let ok = relation < 1e-10 && positive && uniqueness < 1e-8;
    report(
        9,
        "entire-orbit",
        ok,
        &format!(
            "max relation defect {relation:.2e}, strictly positive = {positive}, max ray gap {uniqueness:.2e}"
        ),
    );
}

#[test]
fn criterion_10_leslie_path() {
    let model = ModelSpec {
        dim: 3,
        norm: NormKind::Ell1,
        variant: ModelVariant::LeslieRandom {
            fecundity: vec![
                EntryDistribution::Constant { value: 0.0 },
                EntryDistribution::Uniform { lo: 0.8, hi: 1.6 },
                EntryDistribution::Uniform { lo: 0.5, hi: 1.5 },
            ],
            survival: vec![
                EntryDistribution::Uniform { lo: 0.5, hi: 0.9 },
                EntryDistribution::Uniform { lo: 0.4, hi: 0.8 },
            ],
        },
    };
    let t = attain_time(&model).unwrap();
    let focusing = focusing_report(&model, 1, 256).unwrap();
    let seeds = [1u64, 2, 3, 4];
    let horizon = 200_000u64;
    let sep = second_exponent(&model, &seeds, &EstimatorConfig::new(horizon)).unwrap();
    let qr = qr_exponents(&model, &seeds, horizon, 1, None).unwrap();
    let gap = (sep.lambda1.mean - qr[0].mean).abs();
    let tol = 3.0 * combined_se(sep.lambda1.se, qr[0].se);

    let ok = t.is_some()
        && focusing.passes
        && focusing.attain_time == t
        && sep.certified
        && sep.lambda1.mean.is_finite()
        && sep.sigma > 0.0
        && sep.separated
        && gap <= tol;
    report(
        10,
        "leslie-path",
        ok,
        &format!(
            "T = {:?}, lambda1 {:.4} (QR gap {gap:.2e} <= {tol:.2e}), sigma {:.4} separated = {}",
            t, sep.lambda1.mean, sep.sigma, sep.separated
        ),
    );
}
