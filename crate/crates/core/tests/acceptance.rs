//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use quadinv_core::feedback::DEFAULT_COND_TOL;
use quadinv_core::fir::{affine_closed_loop, fir_closed_loop, fir_subspace_qi_check};
use quadinv_core::probe::{reproduce_example, ExampleId, ExampleOptions, ExampleReport};
use quadinv_core::subspace::{normalized_residual, DEFAULT_QI_TOL};
use quadinv_core::synthesis::{
    h2_model_match, rank_checks, ModelMatchingSystem, PlantRef, SynthesisOptions,
    DEFAULT_FREQ_COUNT, DEFAULT_RANK_TOL,
};
use quadinv_core::{
    fir_causal_inverse, fir_h2_norm, fir_hmap, fir_mul, hmap, homotopy_g, in_domain_m,
    pattern_qi_check, pattern_to_basis, subspace_qi_check, FirPlant, FirSubspace,
    FirTransferMatrix, Matrix, Pattern, StaticPlant, SubspaceBasis,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{dominant_fir, gaussian, max_abs_tap, numeric_on, random_fir, random_pattern};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn failed_checks(r: &ExampleReport) -> String {
    let bad: Vec<String> = r
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| {
            format!(
                "{} (value {:.3e}, threshold {:.3e}: {})",
                c.name, c.value, c.threshold, c.detail
            )
        })
        .collect();
    bad.join("; ")
}

fn example_summary(r: &ExampleReport) -> String {
    r.checks
        .iter()
        .map(|c| format!("{}={:.3e}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = reproduce_example(ExampleId::A, &ExampleOptions::default()).expect("example a runs");
    let secs = start.elapsed().as_secs_f64();
    let passed = r.passed && secs <= 10.0;
    let n = r.cloud.as_ref().map_or(0, |c| c.len());
    let probe = r.probe.as_ref().unwrap();
    let mut detail = format!(
        "{n} points in {secs:.2}s; probe {:?} coverage {:.3e} reject_tol {:.3e}; {}",
        probe.verdict,
        probe.coverage_radius,
        probe.reject_tol,
        example_summary(&r)
    );
    if !r.passed {
        detail = format!("failed: {}; {detail}", failed_checks(&r));
    }
    outcome(passed, detail)
}

fn criterion_2() -> Outcome {
    let r = reproduce_example(ExampleId::B, &ExampleOptions::default()).expect("example b runs");
    let probe = r.probe.as_ref().unwrap();
    let mut detail = format!(
        "probe {:?} diameter {:.3} reject_tol {:.3e}; {}",
        probe.verdict,
        probe.diameter,
        probe.reject_tol,
        example_summary(&r)
    );
    if let Some(w) = &probe.witness {
        detail.push_str(&format!("; witness {}", serde_json::to_string(w).unwrap()));
    }
    if !r.passed {
        detail = format!("failed: {}; {detail}", failed_checks(&r));
    }
    outcome(r.passed, detail)
}

fn criterion_3() -> Outcome {
    let r = reproduce_example(ExampleId::Affine, &ExampleOptions::default())
        .expect("affine example runs");
    let detail = r
        .checks
        .iter()
        .map(|c| format!("{}: {} (value {:.3e})", c.name, c.detail, c.value))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(r.passed, detail)
}

fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_static = 0.0_f64;
    let mut worst_fir = 0.0_f64;
    let horizon = 32;
    for n in 1..=6 {
        let mut done = 0;
        while done < 1000 {
            let g = gaussian(&mut rng, n, n);
            let k = gaussian(&mut rng, n, n);
            if !in_domain_m(&g, &k, DEFAULT_COND_TOL).unwrap() {
                continue;
            }
            let back = hmap(&g, &hmap(&g, &k).unwrap()).unwrap();
            worst_static = worst_static.max(rel_err(&back, &k));
            done += 1;
        }
        let s = 1.0 / (n as f64).sqrt();
        for _ in 0..1000 {
            let g = random_fir(&mut rng, n, n, 1, 4, horizon, 0.5 * s, 0.7);
            let k = random_fir(&mut rng, n, n, 0, 4, horizon, 0.5 * s, 0.7);
            let Ok(q) = fir_hmap(&g, &k, horizon) else {
                continue;
            };
            let back = fir_hmap(&g, &q, horizon).unwrap();
            let scale = max_abs_tap(&k, horizon).max(1.0);
            worst_fir = worst_fir.max(back.max_tap_error(&k, horizon) / scale);
        }
    }
    outcome(
        worst_static <= 1e-8 && worst_fir <= 1e-8,
        format!(
            "6000 static pairs: max relative error {worst_static:.3e}; \
             6000 FIR pairs at horizon {horizon}: max tap error {worst_fir:.3e}"
        ),
    )
}

/// A random sparsity instance for the QI battery.
struct QiInstance {
    s: Pattern,
    g_pattern: Pattern,
    g: Matrix,
    basis: SubspaceBasis,
    qi: bool,
}

fn qi_instances() -> Vec<QiInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..50)
        .map(|_| {
            let nu = rng.random_range(1..=4);
            let ny = rng.random_range(1..=4);
            let (ds, dg) = (rng.random_range(0.3..0.9), rng.random_range(0.1..0.7));
            let s = random_pattern(&mut rng, nu, ny, ds);
            let g_pattern = random_pattern(&mut rng, ny, nu, dg);
            let g = numeric_on(&mut rng, &g_pattern);
            let basis = pattern_to_basis(&s);
            let qi = pattern_qi_check(&s, &g_pattern).unwrap().qi;
            QiInstance {
                s,
                g_pattern,
                g,
                basis,
                qi,
            }
        })
        .collect()
}

fn sample_in_s(rng: &mut ChaCha8Rng, inst: &QiInstance) -> Option<Matrix> {
    if inst.basis.dim() == 0 {
        return Some(Matrix::zeros(inst.s.rows(), inst.s.cols()));
    }
    let coeffs: Vec<f64> = (0..inst.basis.dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let k = inst.basis.combine(&coeffs).unwrap();
    in_domain_m(&inst.g, &k, DEFAULT_COND_TOL)
        .unwrap()
        .then_some(k)
}

fn criterion_5(instances: &[QiInstance]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut mismatches = 0;
    let mut worst_closure = 0.0_f64;
    let mut weakest_witness = f64::INFINITY;
    for inst in instances {
        let pat = pattern_qi_check(&inst.s, &inst.g_pattern).unwrap();
        let sub = subspace_qi_check(&inst.basis, &inst.g, DEFAULT_QI_TOL).unwrap();
        if pat.qi != sub.qi {
            mismatches += 1;
        }
        if inst.qi {
            let mut done = 0;
            while done < 200 {
                if let Some(k) = sample_in_s(&mut rng, inst) {
                    let q = hmap(&inst.g, &k).unwrap();
                    worst_closure =
                        worst_closure.max(normalized_residual(&inst.basis, &q).unwrap());
                    done += 1;
                }
            }
        } else {
            for w in [&pat.witness_controller, &sub.witness_controller] {
                let k = &w.as_ref().expect("non-QI report has a witness").0;
                let kgk = k * &inst.g * k;
                let r = normalized_residual(&inst.basis, &kgk).unwrap();
                weakest_witness = weakest_witness.min(r);
            }
        }
    }
    let n_qi = instances.iter().filter(|i| i.qi).count();
    outcome(
        mismatches == 0 && worst_closure <= 1e-8 && weakest_witness >= 1e-3,
        format!(
            "{n_qi} QI / {} non-QI; pattern vs subspace mismatches {mismatches}; \
             max residual of h(K) on QI instances {worst_closure:.3e}; \
             min witness residual {weakest_witness:.3e}",
            instances.len() - n_qi
        ),
    )
}

fn criterion_6(instances: &[QiInstance]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_path = 0.0_f64;
    let mut worst_ends = 0.0_f64;
    let mut skipped = 0;
    let mut evaluated = 0;
    for inst in instances.iter().filter(|i| i.qi) {
        let mut done = 0;
        while done < 20 {
            let Some(k) = sample_in_s(&mut rng, inst) else {
                continue;
            };
            done += 1;
            for j in 0..=20 {
                let alpha = j as f64 / 20.0;
                match homotopy_g(&inst.g, &k, alpha) {
                    Ok(x) => {
                        worst_path = worst_path.max(normalized_residual(&inst.basis, &x).unwrap());
                        evaluated += 1;
                    }
                    Err(_) => skipped += 1,
                }
            }
            let g0 = homotopy_g(&inst.g, &k, 0.0).unwrap();
            let g1 = homotopy_g(&inst.g, &k, 1.0).unwrap();
            let h = hmap(&inst.g, &k).unwrap();
            worst_ends = worst_ends.max((g0 - h).amax()).max((g1 + &k).amax());
        }
    }
    outcome(
        worst_path <= 1e-8 && worst_ends <= 1e-12,
        format!(
            "{evaluated} path points ({skipped} singular resolvents skipped): \
             max residual {worst_path:.3e}; endpoint identity error {worst_ends:.3e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let horizon = 64;
    let mut worst_inv = 0.0_f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let s = 0.4 / (n as f64).sqrt();
        let x = random_fir(&mut rng, n, n, 1, 5, horizon, s, 0.8);
        let inv = fir_causal_inverse(&x, horizon).unwrap();
        let i_minus_x = FirTransferMatrix::identity(n, horizon).sub(&x).unwrap();
        let prod = fir_mul(&i_minus_x, &inv, horizon).unwrap();
        worst_inv =
            worst_inv.max(prod.max_tap_error(&FirTransferMatrix::identity(n, horizon), horizon));
    }
    let mut worst_static = 0.0_f64;
    let mut compared = 0;
    while compared < 200 {
        let n = rng.random_range(1..=5);
        let g = gaussian(&mut rng, n, n);
        let k = gaussian(&mut rng, n, n) * 0.3;
        let Ok(fir) = fir_hmap(
            &FirTransferMatrix::constant(g.clone()),
            &FirTransferMatrix::constant(k.clone()),
            4,
        ) else {
            continue;
        };
        let stat = FirTransferMatrix::constant(hmap(&g, &k).unwrap());
        worst_static = worst_static.max(fir.max_tap_error(&stat, 4));
        compared += 1;
    }
    outcome(
        worst_inv <= 1e-10 && worst_static <= 1e-10,
        format!(
            "200 strictly causal X at horizon {horizon}: max tap error {worst_inv:.3e}; \
             200 single-tap systems: fir_hmap vs hmap {worst_static:.3e}"
        ),
    )
}

fn separable_instance() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let (n, h) = (3, 8);
    let p11 = random_fir(&mut rng, n, n, 0, h, h, 1.0, 0.8);
    let id = FirTransferMatrix::identity(n, h);
    // Diagonal G keeps the diagonal subspace QI.
    let g = random_fir(&mut rng, n, n, 1, 3, h, 0.3, 1.0);
    let g = FirTransferMatrix::new(
        g.taps()
            .iter()
            .map(|t| Matrix::from_diagonal(&t.diagonal()))
            .collect(),
    )
    .unwrap();
    let plant = FirPlant::new(p11.clone(), id.clone(), id, g).unwrap();
    let s = FirSubspace::from_pattern(&Pattern::identity(n), h);
    let r = h2_model_match(&plant, &s, h, &SynthesisOptions::default()).unwrap();
    let mut diag = FirTransferMatrix::zeros(n, n, h);
    let mut off = p11.clone();
    let mut taps = diag.clone().into_taps();
    let mut off_taps = off.clone().into_taps();
    for (k, t) in p11.taps().iter().enumerate() {
        for i in 0..n {
            taps[k][(i, i)] = t[(i, i)];
            off_taps[k][(i, i)] = 0.0;
        }
    }
    diag = FirTransferMatrix::new(taps).unwrap();
    off = FirTransferMatrix::new(off_taps).unwrap();
    (
        r.q_opt.max_tap_error(&diag, h),
        (r.objective - fir_h2_norm(&off)).abs(),
    )
}

fn lower_triangular(n: usize) -> Pattern {
    let mut p = Pattern::empty(n, n);
    for i in 0..n {
        for j in 0..=i {
            p.set(i, j, true);
        }
    }
    p
}

fn criterion_8() -> Outcome {
    let (q_err, obj_err) = separable_instance();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let h = 6;
    let mut worst_beat = f64::NEG_INFINITY;
    let mut worst_normal = 0.0_f64;
    let mut worst_consistency = 0.0_f64;
    let mut worst_assembly = 0.0_f64;
    let mut all_qi = true;
    for _ in 0..10 {
        let n = rng.random_range(2..=3);
        let (nz, nw) = (n + rng.random_range(0..=1), n + rng.random_range(0..=1));
        let pat = lower_triangular(n);
        let mut g = random_fir(&mut rng, n, n, 1, 3, h, 0.5, 0.8);
        // Lower-triangular G keeps the lower-triangular subspace QI.
        let taps: Vec<Matrix> = g.taps().iter().map(|t| t.lower_triangle()).collect();
        g = FirTransferMatrix::new(taps).unwrap();
        let plant = FirPlant::new(
            random_fir(&mut rng, nz, nw, 0, h, h, 1.0, 0.8),
            dominant_fir(&mut rng, nz, n, h),
            dominant_fir(&mut rng, n, nw, h),
            g,
        )
        .unwrap();
        let s = FirSubspace::from_pattern(&pat, h);
        all_qi &= fir_subspace_qi_check(&s, plant.g(), DEFAULT_QI_TOL)
            .unwrap()
            .qi;
        let r = h2_model_match(&plant, &s, h, &SynthesisOptions::default()).unwrap();
        worst_normal = worst_normal.max(r.normal_equation_residual);
        let direct = fir_closed_loop(&plant, &r.controller, h).unwrap();
        let affine = affine_closed_loop(&plant, &r.q_opt, h).unwrap();
        worst_consistency = worst_consistency.max(direct.max_tap_error(&affine, h));

        let sys = ModelMatchingSystem::assemble(&plant, &s, h).unwrap();
        let opt = DVector::from_vec(r.coefficients.clone());
        let d = opt.len();
        for trial in 0..100_000 {
            let radius = 10f64.powf(rng.random_range(-6.0..1.0));
            let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let u: f64 = rng.random();
            let step = dir.normalize() * (radius * u.powf(1.0 / d as f64));
            let cand = &opt + step;
            let value = sys.objective(&cand);
            worst_beat = worst_beat.max(r.objective - value);
            if trial % 1000 == 0 {
                let q = s.combine_orthonormal(cand.as_slice()).unwrap();
                let direct = fir_h2_norm(&affine_closed_loop(&plant, &q, h).unwrap());
                worst_assembly = worst_assembly.max((direct - value).abs() / value.max(1.0));
            }
        }
    }
    let passed = q_err <= 1e-8
        && obj_err <= 1e-8
        && all_qi
        && worst_beat <= 1e-9
        && worst_normal <= 1e-8
        && worst_consistency <= 1e-8
        && worst_assembly <= 1e-10;
    outcome(
        passed,
        format!(
            "separable: Q* error {q_err:.3e}, objective error {obj_err:.3e}; \
             10 QI instances x 1e5 random Q': best improvement {worst_beat:.3e}; \
             normal-equation residual {worst_normal:.3e}; closed-loop consistency {worst_consistency:.3e}; \
             relative gap between assembled and direct objective {worst_assembly:.3e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    use quadinv_core::probe::{example_a_plant, example_b_plant};
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, p) in [("a", example_a_plant()), ("b", example_b_plant())] {
        let r = rank_checks(PlantRef::Static(&p), 1, DEFAULT_RANK_TOL);
        ok &= !r.p12_left_invertible && !r.p21_right_invertible;
        detail.push(format!(
            "({name}) P12 left-invertible {} P21 right-invertible {}",
            r.p12_left_invertible, r.p21_right_invertible
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut smallest = (f64::INFINITY, f64::INFINITY);
    for _ in 0..20 {
        let nu = rng.random_range(1..=3);
        let ny = rng.random_range(1..=3);
        let nz = nu + rng.random_range(0..=2);
        let nw = ny + rng.random_range(0..=2);
        let p = StaticPlant::new(
            gaussian(&mut rng, nz, nw),
            gaussian(&mut rng, nz, nu),
            gaussian(&mut rng, ny, nw),
            gaussian(&mut rng, ny, nu),
        )
        .unwrap();
        let r = rank_checks(PlantRef::Static(&p), 1, DEFAULT_RANK_TOL);
        ok &= r.p12_left_invertible && r.p21_right_invertible;
        smallest.0 = smallest.0.min(r.p12_min_singular);
        smallest.1 = smallest.1.min(r.p21_min_singular);

        let h = 4;
        let fp = FirPlant::new(
            random_fir(&mut rng, nz, nw, 0, h, h, 1.0, 0.8),
            random_fir(&mut rng, nz, nu, 0, h, h, 1.0, 0.8),
            random_fir(&mut rng, ny, nw, 0, h, h, 1.0, 0.8),
            random_fir(&mut rng, ny, nu, 1, h, h, 1.0, 0.8),
        )
        .unwrap();
        let r = rank_checks(PlantRef::Fir(&fp), DEFAULT_FREQ_COUNT, DEFAULT_RANK_TOL);
        ok &= r.p12_left_invertible && r.p21_right_invertible && r.d12_full_column_rank;
        smallest.0 = smallest.0.min(r.p12_min_singular);
        smallest.1 = smallest.1.min(r.p21_min_singular);
    }
    detail.push(format!(
        "20 static + 20 FIR random full-rank plants invertible; smallest relative sigma_min \
         P12 {:.3e}, P21 {:.3e}",
        smallest.0, smallest.1
    ));
    outcome(ok, detail.join("; "))
}

fn main() -> ExitCode {
    let instances = qi_instances();
    let criteria: Vec<Criterion<'_>> = vec![
        ("example (a) reproduction", Box::new(criterion_1)),
        ("example (b) reproduction", Box::new(criterion_2)),
        ("affine example", Box::new(criterion_3)),
        ("involution suite", Box::new(criterion_4)),
        ("QI iff closure", Box::new(|| criterion_5(&instances))),
        ("homotopy path", Box::new(|| criterion_6(&instances))),
        ("FIR algebra", Box::new(criterion_7)),
        ("synthesis optimality", Box::new(criterion_8)),
        ("invertibility gates", Box::new(criterion_9)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {} ({name}) [{:.2}s]: {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.passed {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
