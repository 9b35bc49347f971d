//! End-to-end acceptance run: one line per criterion.
//!
//! Criteria listed in `KNOWN_DEVIATIONS` are reported as FAIL when they fail, and in that
//! case a diagnostic that explains the observed value must hold instead. Any other
//! failure, or a failed diagnostic, makes the run exit nonzero.

use std::io::Write;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use canvas_core::fem::{
    assemble_forms, quadrature::gauss_on, BiharmonicSolver, FemField, LoadTable, Scheme,
    SplineSpace, StochasticStepper,
};
use canvas_core::harness::{
    canvas_error_study, det_space_rate_study, det_time_rate_study, elliptic_rate_study,
    etdr_mc, mc_estimator, sdr_rate_study, stability_contrast, tdr_rate_study, StabilityReport,
    StudyConfig, StudyKind,
};
use canvas_core::noise::{project, projected_norm_sq, projection_identity_check, TestTerm};
use canvas_core::oracle::{canvas_solution, canvas_weights, exact_etdr};
use canvas_core::spectral::mild_second_moment;
use canvas_core::{Model, NoiseGrid, NoiseMatrix, SpectralField};

const DET_TIME_RATE: (f64, f64) = (1.0, 0.1);
const SPACE_RATE_TOL: f64 = 0.15;
const CANVAS_M_SLOPE: (f64, f64) = (-0.5, 0.05);
const ETDR_MC_SIGMAS: f64 = 3.0;
const ETDR_MC_SAMPLES: usize = 10_000;
const SDR_SAMPLES: usize = 1000;
const SDR_MIN_ORDER: f64 = 0.5;
const SDR_NOISE_SIGMAS: f64 = 3.0;
const IDENTITY_REL_TOL: f64 = 1e-12;
const ISOMETRY_REL_TOL: f64 = 0.05;
const ISOMETRY_SAMPLES: usize = 10_000;
const STATIONARY_TOL: f64 = 1e-6;
const SEED: u64 = 20170401;

const KNOWN_DEVIATIONS: &[usize] = &[1, 2, 3, 4, 10];

struct Outcome {
    pass: bool,
    detail: String,
    /// For known deviations: whether the explanation of the failure holds.
    diagnostic: Option<(bool, String)>,
}

fn within(x: f64, (target, tol): (f64, f64)) -> bool {
    (x - target).abs() <= tol
}

fn c1_det_time() -> Outcome {
    let cfg = StudyConfig::for_study(StudyKind::DetTime);
    let t = det_time_rate_study(&cfg).unwrap();
    let slope = t.slope().unwrap();
    let fine = StudyConfig {
        steps_sweep: vec![4096, 8192, 16384],
        ..cfg
    };
    let asym = det_time_rate_study(&fine).unwrap().slope().unwrap();
    Outcome {
        pass: within(slope, DET_TIME_RATE),
        detail: format!("order {slope:.4} over T/64..T/1024 (target 1.0 ± 0.1)"),
        diagnostic: Some((
            within(asym, DET_TIME_RATE),
            format!("order {asym:.4} over T/4096..T/16384"),
        )),
    }
}

fn c2_det_space() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut diag = true;
    for r in [2, 3] {
        let cfg = StudyConfig {
            degree: r,
            ..StudyConfig::for_study(StudyKind::DetSpace)
        };
        let slope = det_space_rate_study(&cfg).unwrap().slope().unwrap();
        pass &= within(slope, (r as f64, SPACE_RATE_TOL));
        // C^{r−1} splines on the fourth-order form: L² order min(r + 1, 2r − 2)
        diag &= within(slope, ((r + 1).min(2 * r - 2) as f64, SPACE_RATE_TOL));
        detail.push(format!("r={r}: order {slope:.4}"));
    }
    Outcome {
        pass,
        detail: format!("{} (target r ± 0.15)", detail.join(", ")),
        diagnostic: Some((diag, "orders match min(r+1, 2r−2) ± 0.15".into())),
    }
}

fn c3_elliptic() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut diag = true;
    for r in [2, 3] {
        let cfg = StudyConfig {
            degree: r,
            ..StudyConfig::for_study(StudyKind::DetSpace)
        };
        let slope = elliptic_rate_study(&cfg).unwrap().slope().unwrap();
        pass &= within(slope, (r as f64, SPACE_RATE_TOL));
        diag &= within(slope, ((r + 1).min(2 * r - 2) as f64, SPACE_RATE_TOL));
        detail.push(format!("r={r}: order {slope:.4}"));
    }
    Outcome {
        pass,
        detail: format!("{} (target r ± 0.15)", detail.join(", ")),
        diagnostic: Some((diag, "orders match min(r+1, 2r−2) ± 0.15".into())),
    }
}

fn canvas() -> canvas_core::harness::CanvasStudy {
    canvas_error_study(&StudyConfig::for_study(StudyKind::Canvas)).unwrap()
}

fn c4_canvas_modes() -> Outcome {
    let c = canvas();
    let slope = c.modes.slope().unwrap();
    let tail = c.truncated.slope().unwrap();
    Outcome {
        pass: within(slope, CANVAS_M_SLOPE),
        detail: format!(
            "slope {slope:.5} for Θ {:.6e}..{:.6e} (target −0.50 ± 0.05)",
            c.modes.rows[0].error,
            c.modes.rows.last().unwrap().error
        ),
        diagnostic: Some((
            within(tail, CANVAS_M_SLOPE),
            format!("modes-beyond-M part alone has slope {tail:.4}"),
        )),
    }
}

fn c5_canvas_dt() -> Outcome {
    let c = canvas();
    let slope = c.slabs.slope().unwrap();
    let decreasing = c.slabs.strictly_increasing();
    Outcome {
        pass: decreasing && slope > 0.0,
        detail: format!(
            "strictly decreasing under refinement: {decreasing}, slope {slope:.4} (guaranteed order 1/8)"
        ),
        diagnostic: None,
    }
}

fn c6_etdr_mc() -> Outcome {
    let model = Model::new(0.0).unwrap();
    let grid = NoiseGrid::new(1.0, 16, 16).unwrap();
    let steps = 64;
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [35, steps] {
        let exact = exact_etdr(&model, &grid, steps, m).unwrap();
        let mc = etdr_mc(&model, &grid, steps, m, ETDR_MC_SAMPLES, SEED).unwrap();
        let z = (mc.mean - exact) / mc.stderr;
        pass &= mc.agrees_with(exact, ETDR_MC_SIGMAS);
        detail.push(format!("m={m}: exact {exact:.6e}, mc {:.6e} ({z:+.2}σ)", mc.mean));
    }
    Outcome {
        pass,
        detail: detail.join("; "),
        diagnostic: None,
    }
}

fn c7_etdr_decay() -> Outcome {
    let t = tdr_rate_study(&StudyConfig::for_study(StudyKind::Tdr)).unwrap();
    let slope = t.slope().unwrap();
    let decreasing = t.strictly_increasing();
    Outcome {
        pass: decreasing && slope > 0.0,
        detail: format!("strictly decreasing 64→2048 steps: {decreasing}, order {slope:.4}"),
        diagnostic: None,
    }
}

fn c8_esdr() -> Outcome {
    let cfg = StudyConfig {
        samples: SDR_SAMPLES,
        seed: SEED,
        ..StudyConfig::for_study(StudyKind::Sdr)
    };
    let t = sdr_rate_study(&cfg).unwrap();
    let beyond_noise = t.rows.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let se = (a.mc_stderr.unwrap().powi(2) + b.mc_stderr.unwrap().powi(2)).sqrt();
        b.error - a.error > SDR_NOISE_SIGMAS * se
    });
    let slope = t.slope().unwrap();
    Outcome {
        pass: beyond_noise && slope >= SDR_MIN_ORDER,
        detail: format!(
            "errors {:?}, decreasing beyond 3σ: {beyond_noise}, order {slope:.3} (≥ 0.5)",
            t.errors().iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
        diagnostic: None,
    }
}

fn c9_isometry() -> Outcome {
    let grid = NoiseGrid::new(1.0, 8, 6).unwrap();
    let g = vec![
        TestTerm::on_slab(&grid, 2, 1, 0.7),
        TestTerm::on_slab(&grid, 5, 4, -1.3),
        TestTerm::on_slab(&grid, 8, 6, 0.4),
        TestTerm { weight: 0.9, start: 0.1, end: 0.55, mode: 2 },
        TestTerm { weight: 0.5, start: 0.3, end: 0.9, mode: 9 },
    ];
    let variance = projected_norm_sq(&grid, &g).unwrap();
    let worst = std::sync::Mutex::new(0.0f64);
    let mc = mc_estimator(&grid, ISOMETRY_SAMPLES, SEED, |noise| {
        let c = projection_identity_check(&g, noise)?;
        // scale: Σ |a[n][i] R[n][i]|, the magnitude the contraction is accumulated from
        let (a, _) = project(&grid, &g)?;
        let scale: f64 = a.iter().zip(noise.increments()).map(|(a, r)| (a * r).abs()).sum();
        let rel = (c.lhs - c.rhs).abs() / scale;
        let mut w = worst.lock().unwrap();
        *w = w.max(rel);
        Ok(c.lhs * c.lhs)
    })
    .unwrap();
    let worst = *worst.lock().unwrap();
    let iso = (mc.mean - variance).abs() / variance;
    Outcome {
        pass: worst <= IDENTITY_REL_TOL && iso <= ISOMETRY_REL_TOL,
        detail: format!(
            "identity worst rel {worst:.2e} (≤ 1e−12); E[(∫Πg dW)²] {:.5} vs ‖Πg‖² {variance:.5}, rel {iso:.4} (≤ 0.05)",
            mc.mean
        ),
        diagnostic: None,
    }
}

fn c10_stability() -> Outcome {
    let cfg = StudyConfig {
        mu: 50.0,
        steps: 100,
        slabs: 16,
        modes: 16,
        seed: SEED,
        ..StudyConfig::default()
    };
    let s = stability_contrast(&cfg, 16).unwrap();
    let bounded = StabilityReport::is_bounded(&s.imex_norms);
    let max_imex = s.imex_norms.iter().fold(0.0f64, |a, b| a.max(*b));
    let pass = bounded && s.be_amplification > 1.0;
    // per-mode spectral amplifications of both schemes
    let model = Model::new(50.0).unwrap();
    let (mut imex_k, mut be_k) = (0.0f64, 0.0f64);
    for k in 1..=64 {
        let r = model.eigen(k).unwrap();
        let l2 = r.lambda * r.lambda;
        imex_k = imex_k.max(((1.0 + s.dtau * 50.0 * l2) / (1.0 + s.dtau * l2 * l2)).abs());
        be_k = be_k.max((1.0 / (1.0 + s.dtau * r.kappa)).abs());
    }
    let diag = (s.imex_amplification / imex_k - 1.0).abs() < 0.02
        && (s.be_amplification / be_k - 1.0).abs() < 0.02;
    Outcome {
        pass,
        detail: format!(
            "IMEX bounded: {bounded} (max ‖U‖ {max_imex:.3e}, step radius {:.4}); BE step radius {:.4} (> 1 required), {} negative pivots",
            s.imex_amplification, s.be_amplification, s.be_negative_pivots
        ),
        diagnostic: Some((
            diag,
            format!("radii match spectral mode factors {imex_k:.4} / {be_k:.4} within 2%"),
        )),
    }
}

fn c11_stationary() -> Outcome {
    let model = Model::new(0.0).unwrap();
    let s = mild_second_moment(&model, 5.0, canvas_core::spectral::DEFAULT_K_CUT).unwrap();
    let err = (s.value - 1.0 / 12.0).abs();
    Outcome {
        pass: err <= STATIONARY_TOL + s.tail_bound,
        detail: format!(
            "E‖u(5)‖² = {:.9}, |·−1/12| = {err:.2e}, tail bound {:.2e}",
            s.value, s.tail_bound
        ),
        diagnostic: None,
    }
}

fn c12_invariants() -> Outcome {
    let mut checks: Vec<(&str, bool)> = Vec::new();

    // Parseval against a trapezoid rule exact for the trigonometric polynomial
    let f = SpectralField::new(vec![0.3, -1.1, 0.0, 0.25, 2.0]);
    let n = 64;
    let quad: f64 = (0..n)
        .map(|j| f.evaluate(j as f64 / n as f64).unwrap().powi(2))
        .sum::<f64>()
        / n as f64;
    checks.push(("parseval", (quad - f.l2_norm_sq()).abs() <= 1e-12 * f.l2_norm_sq()));

    let model = Model::new(3.0).unwrap();
    let a = f.semigroup_apply(&model, 2e-4).unwrap().semigroup_apply(&model, 3e-4).unwrap();
    let b = f.semigroup_apply(&model, 5e-4).unwrap();
    checks.push((
        "semigroup",
        (1..=5).all(|k| (a.coeff(k) - b.coeff(k)).abs() <= 1e-14 * b.coeff(k).abs().max(1e-300)),
    ));

    let g = SpectralField::new(vec![1.0, 0.5, -0.2]);
    let l = f.inner(&g.apply_te());
    let r = f.apply_te().inner(&g);
    checks.push(("te-symmetry", (l - r).abs() <= 1e-15 * l.abs()));

    let space = SplineSpace::new(12, 3).unwrap();
    let forms = assemble_forms(&space);
    let tbh = BiharmonicSolver::new(&forms).unwrap();
    let table = LoadTable::new(&space, 5);
    let l = table.cross(&g, tbh.apply(&f).values());
    let r = table.cross(&f, tbh.apply(&g).values());
    checks.push(("tbh-symmetry", (l - r).abs() <= 1e-12 * l.abs()));

    let v = FemField::new(space.clone(), (0..space.dim()).map(|i| (i as f64 * 1.3).sin()).collect())
        .unwrap();
    let c1 = (1..space.elements()).all(|e| {
        let x = space.element_start(e);
        (0..=1).all(|d| (v.on_element(e - 1, x, d) - v.on_element(e, x, d)).abs() < 1e-10)
    });
    checks.push(("c1-conformity", c1));

    let w: Vec<f64> = (0..space.dim()).map(|i| (i as f64 * 0.4).cos()).collect();
    let wf = FemField::new(space.clone(), w.clone()).unwrap();
    let mixed: f64 = (0..space.elements())
        .flat_map(|e| {
            let x0 = space.element_start(e);
            gauss_on(6, x0, x0 + space.h()).into_iter().map(move |q| (e, q))
        })
        .map(|(e, (x, wt))| wt * v.on_element(e, x, 2) * wf.on_element(e, x, 0))
        .sum();
    let grad: f64 = forms.grad.matvec(v.values()).iter().zip(&w).map(|(a, b)| a * b).sum();
    checks.push(("mixed-form", (mixed + grad).abs() <= 1e-12 * grad.abs()));

    let grid = NoiseGrid::new(1.0, 8, 5).unwrap();
    let noise = NoiseMatrix::sample(grid, SEED);
    let stepper = StochasticStepper::new(&forms, &model, &grid, 24, Scheme::Imex).unwrap();
    let once = stepper.run(&noise).unwrap();
    let again = stepper.clone().with_refactorization(true).run(&noise).unwrap();
    checks.push(("factor-reuse", once == again));

    let weights = canvas_weights(&model, &grid, 0.7).unwrap().apply(&noise);
    let direct = canvas_solution(&model, &noise, 0.7).unwrap();
    let scale = direct.l2_norm();
    checks.push(("weight-table", (&weights - &direct).l2_norm() <= 1e-12 * scale));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks: {}", checks.len(), checks.iter().map(|c| c.0).collect::<Vec<_>>().join(", "))
        } else {
            format!("failed: {}", failed.join(", "))
        },
        diagnostic: None,
    }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "deterministic time rate", c1_det_time),
        (2, "deterministic space rate", c2_det_space),
        (3, "elliptic rate", c3_elliptic),
        (4, "canvas truncation rate in M", c4_canvas_modes),
        (5, "canvas slab-width decay", c5_canvas_dt),
        (6, "E_TDR exact vs Monte Carlo", c6_etdr_mc),
        (7, "E_TDR decay", c7_etdr_decay),
        (8, "E_SDR decay", c8_esdr),
        (9, "projection identity and isometry", c9_isometry),
        (10, "stability contrast", c10_stability),
        (11, "stationary variance", c11_stationary),
        (12, "invariant suites", c12_invariants),
    ];
    let mut err = std::io::stderr().lock();
    let mut unexpected = 0;
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed: Duration = start.elapsed();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        writeln!(err, "criterion {id:>2} [{tag}] {name}: {} ({:.2?})", o.detail, elapsed).unwrap();
        if !o.pass {
            failed += 1;
            let known = KNOWN_DEVIATIONS.contains(&id);
            match (&o.diagnostic, known) {
                (Some((true, why)), true) => {
                    writeln!(err, "             known deviation; diagnostic holds: {why}").unwrap()
                }
                (Some((false, why)), _) => {
                    unexpected += 1;
                    writeln!(err, "             diagnostic FAILED: {why}").unwrap()
                }
                _ => unexpected += 1,
            }
        }
    }
    writeln!(
        err,
        "acceptance: {} of 12 criteria pass; {failed} fail ({unexpected} unexplained)",
        12 - failed
    )
    .unwrap();
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
