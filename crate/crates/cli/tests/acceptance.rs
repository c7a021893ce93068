//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances and calibrated thresholds are pinned below.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothntf::dnt::{decode_tensor, encode_tensor, read_tensor, write_tensor};
use smoothntf::netpbm::{decode_ppm, encode_ppm, read_image_ppm, write_image_ppm};
use smoothntf::toy::{toy_generate, ToySpec};
use smoothntf_core::diagnostics::{
    coercivity_check, cv_select_alpha, mask_partition, nmse, sim_score, ssim_masked, CvConfig, SolverKind, SsimParams,
};
use smoothntf_core::model::{
    gradient_objective, objective_normalized, penalty_normalized, penalty_unnormalized, CpModel,
};
use smoothntf_core::penalties::{default_knots, spline_roughness_matrix};
use smoothntf_core::solvers::{grad_fit, hals_fit, FitReport, Init, SolverConfig};
use smoothntf_core::{
    DenseTensor, FactorModel, Matrix, NormalizedFactorModel, PenaltyConfig, SeminormSpec, Shape, WeightMask,
};

const MONOTONE_SLACK: f64 = 1e-10;
const MONOTONE_BUDGET_S: f64 = 30.0;
const FD_STEP: f64 = 1e-6;
const FD_MAX_REL: f64 = 1e-5;
const DIVERGENCE_SLACK: f64 = 1e-9;
const RECOVERY_NMSE: f64 = 1e-6;
const RECOVERY_SIM: f64 = 0.999;
const RECOVERY_BUDGET_S: f64 = 10.0;
// calibrated once on seeds 0..5 and frozen
const TOY_SIM: f64 = 0.90;
const TOY_NMSE: f64 = 0.05;
const TOY_BUDGET_S: f64 = 300.0;
const PENALTY_MATCH: f64 = 1e-12;
const SPLINE_REL: f64 = 1e-8;
// calibrated once on the criterion-6 instance and frozen
const CV_NMSE_RATIO: f64 = 2.0;
const IMAGE_BUDGET_S: f64 = 120.0;

const ALPHA_GRID: [f64; 7] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

type Outcome = Result<String, String>;

fn shape(d: &[usize]) -> Shape {
    Shape::new(d.to_vec()).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smoothntf"))
}

fn penalized(alpha: f64, mu: SeminormSpec) -> PenaltyConfig {
    let mut p = PenaltyConfig::quadratic(vec![1.0, 1.0, 0.0], mu);
    p.alpha = vec![alpha, alpha, 0.0];
    p
}

fn fit(x: &DenseTensor, w: &WeightMask, cfg: &SolverConfig, hals: bool) -> (NormalizedFactorModel, FitReport) {
    if hals {
        hals_fit(x, w, cfg).unwrap()
    } else {
        let (m, r) = grad_fit(x, w, cfg).unwrap();
        (m.normalize_l2(), r)
    }
}

fn is_monotone(report: &FitReport) -> bool {
    report.objective_trajectory.windows(2).all(|p| p[1] <= p[0] * (1.0 + MONOTONE_SLACK))
}

fn random_model(rng: &mut ChaCha8Rng, dims: &[usize], rank: usize) -> FactorModel {
    FactorModel::new(dims.iter().map(|&d| Matrix::from_fn(d, rank, |_, _| rng.random::<f64>())).collect()).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut fits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let s = shape(&[6, 6, 6]);
        let x = DenseTensor::from_fn(s.clone(), |_| rng.random::<f64>()).unwrap();
        let w = WeightMask::from_observed(s, |_| rng.random::<f64>() >= 0.3);
        for mu in [SeminormSpec::tv2(), SeminormSpec::spline()] {
            let mut cfg = SolverConfig::new(2, penalized(0.01, mu.clone()));
            cfg.init = Init::Random(seed);
            for hals in [true, false] {
                let (_, report) = fit(&x, &w, &cfg, hals);
                fits += 1;
                if !is_monotone(&report) {
                    return Err(format!("seed {seed} {mu:?} hals={hals}: objective increased"));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= MONOTONE_BUDGET_S {
        return Err(format!("{fits} fits took {secs:.1}s"));
    }
    Ok(format!("{fits} fits monotone, {secs:.1}s"))
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let dims = [rng.random_range(2..=5), rng.random_range(2..=4), rng.random_range(2..=3)];
        let rank = rng.random_range(1..=3);
        let s = shape(&dims);
        let x = DenseTensor::from_fn(s.clone(), |_| rng.random::<f64>()).unwrap();
        let w = WeightMask::new(
            DenseTensor::from_fn(s, |_| if rng.random::<f64>() < 0.3 { 0.0 } else { 0.5 + rng.random::<f64>() }).unwrap(),
        )
        .unwrap();
        let model = random_model(&mut rng, &dims, rank);
        for mu in [SeminormSpec::tv2(), SeminormSpec::spline()] {
            let mut cfg = PenaltyConfig::quadratic(vec![1.0; 3], mu);
            cfg.alpha = (0..3).map(|_| rng.random::<f64>()).collect();
            let pen = cfg.prepare(&dims).unwrap();
            let grad = gradient_objective(&x, &w, &pen, &model).unwrap();
            let f = |m: &FactorModel| {
                let nm = m.normalize_l2();
                objective_normalized(&x, &w, &pen, &nm).unwrap()
            };
            let base = model.to_flat();
            let analytic: Vec<f64> = grad.iter().flat_map(|g| g.as_slice().to_vec()).collect();
            let mut numeric = vec![0.0; base.len()];
            for k in 0..base.len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[k] += FD_STEP;
                minus[k] -= FD_STEP;
                let fp = f(&FactorModel::from_flat(&dims, rank, &plus).unwrap());
                let fm = f(&FactorModel::from_flat(&dims, rank, &minus).unwrap());
                numeric[k] = (fp - fm) / (2.0 * FD_STEP);
            }
            // ‖g − g_fd‖∞ / ‖g‖∞
            let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = analytic.iter().zip(&numeric).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(err / scale);
        }
    }
    if worst < FD_MAX_REL {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} >= {FD_MAX_REL:e}"))
    }
}

/// Loops over every coordinate tuple of the unpenalized modes and scans the
/// slice it fixes.
fn has_missing_cylinder(w: &WeightMask, alpha: &[f64]) -> bool {
    let dims = w.dims().to_vec();
    let fixed: Vec<usize> = (0..dims.len()).filter(|&n| alpha[n] == 0.0).collect();
    let free: Vec<usize> = (0..dims.len()).filter(|&n| alpha[n] != 0.0).collect();
    let count = |modes: &[usize]| modes.iter().map(|&n| dims[n]).product::<usize>();
    let decode = |mut k: usize, modes: &[usize], idx: &mut Vec<usize>| {
        for &n in modes.iter().rev() {
            idx[n] = k % dims[n];
            k /= dims[n];
        }
    };
    let s = shape(&dims);
    let mut idx = vec![0; dims.len()];
    for a in 0..count(&fixed) {
        decode(a, &fixed, &mut idx);
        let mut all_missing = true;
        for b in 0..count(&free) {
            decode(b, &free, &mut idx);
            if w.values()[s.flat_index(&idx)] > 0.0 {
                all_missing = false;
                break;
            }
        }
        if all_missing {
            return true;
        }
    }
    false
}

fn criterion_3() -> Outcome {
    let mut agree = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let order = rng.random_range(1..=4);
        let dims: Vec<usize> = (0..order).map(|n| rng.random_range(1..=if n == 3 { 3 } else { 4 })).collect();
        let density = rng.random::<f64>();
        let w = WeightMask::from_observed(shape(&dims), |_| rng.random::<f64>() < density * density);
        let alpha: Vec<f64> = (0..order).map(|_| if rng.random::<bool>() { 0.0 } else { rng.random::<f64>() + 0.1 }).collect();
        let verdict = coercivity_check(&w, &alpha).unwrap();
        if verdict.coercive != !has_missing_cylinder(&w, &alpha) {
            return Err(format!("disagreement on case {seed}: dims {dims:?} alpha {alpha:?}"));
        }
        agree += 1;
    }
    Ok(format!("{agree}/200 agree"))
}

fn criterion_4() -> Outcome {
    // channel 2 of a 5×4×3 image fully missing; only the spatial modes penalized
    let s = shape(&[5, 4, 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let x = DenseTensor::from_fn(s.clone(), |_| rng.random::<f64>()).unwrap();
    let w = WeightMask::from_observed(s, |flat| flat % 3 != 1 && rng.random::<f64>() < 0.8);
    let mut results = Vec::new();
    for mu in [SeminormSpec::tv2(), SeminormSpec::spline()] {
        let cfg = PenaltyConfig::quadratic(vec![0.5, 2.0, 0.0], mu);
        if coercivity_check(&w, &cfg.alpha).unwrap().coercive {
            return Err("mask unexpectedly coercive".into());
        }
        let pen = cfg.prepare(&[5, 4, 3]).unwrap();
        let theta = |m: f64| {
            let uniform = |len: usize| vec![1.0 / (len as f64).sqrt(); len];
            let mut e = vec![0.0; 3];
            e[1] = 1.0;
            let second = |len: usize| {
                let mut v = vec![0.0; len];
                v[0] = 1.0;
                v
            };
            let factors = vec![
                Matrix::from_columns(&[uniform(5), second(5)]).unwrap(),
                Matrix::from_columns(&[uniform(4), second(4)]).unwrap(),
                Matrix::from_columns(&[e, second(3)]).unwrap(),
            ];
            NormalizedFactorModel::new(vec![m, 0.0], factors).unwrap()
        };
        let reference = objective_normalized(&x, &w, &pen, &theta(1.0)).unwrap();
        for k in 0..=6 {
            let m = 10f64.powi(k);
            let model = theta(m);
            let value = objective_normalized(&x, &w, &pen, &model).unwrap();
            if value >= reference + DIVERGENCE_SLACK {
                return Err(format!("objective {value} at m = {m:e} exceeds {reference}"));
            }
            let norm = model.lambda().iter().map(|l| l * l).sum::<f64>().sqrt();
            if norm < m {
                return Err(format!("parameter norm {norm} at m = {m:e}"));
            }
        }
        results.push(reference);
    }
    Ok(format!("objective bounded by θ(1) value {:.6} while ‖λ‖ reaches 1e6", results[0]))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let truth = random_model(&mut rng, &[8, 8, 8], 2);
    let truth_n = truth.normalize_l2();
    let x = truth.reconstruct();
    let w = WeightMask::ones(x.shape().clone());
    let start = FactorModel::new(
        truth
            .factors()
            .iter()
            .map(|f| Matrix::from_fn(f.rows(), f.cols(), |i, j| f[(i, j)] * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0))))
            .collect(),
    )
    .unwrap();
    let mut cfg = SolverConfig::new(2, PenaltyConfig::unpenalized(3));
    cfg.init = Init::Given(start.normalize_l2());
    let mut lines = Vec::new();
    for hals in [true, false] {
        let t = Instant::now();
        let (model, report) = fit(&x, &w, &cfg, hals);
        let secs = t.elapsed().as_secs_f64();
        let e = nmse(&x, &model.reconstruct()).unwrap();
        let s = sim_score(&truth_n, &model).unwrap();
        let name = if hals { "hals" } else { "grad" };
        let line = format!("{name}: NMSE {e:.2e}, SIM {s:.6}, {} it, {secs:.2}s", report.iterations);
        if !(e < RECOVERY_NMSE && s > RECOVERY_SIM && report.iterations <= 10_000 && secs < RECOVERY_BUDGET_S) {
            return Err(line);
        }
        lines.push(line);
    }
    Ok(lines.join("; "))
}

/// Fits every grid value; returns `(nmse, sim)` per grid point.
fn toy_grid(seed: u64, hals: bool) -> Vec<(f64, f64)> {
    let data = toy_generate(&ToySpec::new(30, 3, seed)).unwrap();
    ALPHA_GRID
        .iter()
        .map(|&a| {
            let cfg = SolverConfig::new(3, penalized(a, SeminormSpec::tv2()));
            let (model, _) = fit(&data.noisy, &data.mask, &cfg, hals);
            (nmse(&data.clean, &model.reconstruct()).unwrap(), sim_score(&data.truth, &model).unwrap())
        })
        .collect()
}

fn oracle(grid: &[(f64, f64)]) -> usize {
    (0..grid.len()).min_by(|&a, &b| grid[a].0.total_cmp(&grid[b].0)).unwrap()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for hals in [true, false] {
        let best: Vec<(f64, f64)> = (0..5u64)
            .map(|seed| {
                let g = toy_grid(seed, hals);
                g[oracle(&g)]
            })
            .collect();
        let med_nmse = median(best.iter().map(|b| b.0).collect());
        let med_sim = median(best.iter().map(|b| b.1).collect());
        ok &= med_sim >= TOY_SIM && med_nmse <= TOY_NMSE;
        lines.push(format!(
            "{}: median best-α SIM {med_sim:.4}, NMSE {med_nmse:.2e}",
            if hals { "hals" } else { "grad" }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < TOY_BUDGET_S;
    lines.push(format!("{secs:.1}s"));
    if ok { Ok(lines.join("; ")) } else { Err(lines.join("; ")) }
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    for k in 0..100 {
        let (model, cfg) = if k == 0 {
            // N=2, R=1, α=(1,0), μ₁=TV-2: a=(3,4), b=(0,2) gives 4
            let m = FactorModel::new(vec![
                Matrix::from_vec(2, 1, vec![3.0, 4.0]).unwrap(),
                Matrix::from_vec(2, 1, vec![0.0, 2.0]).unwrap(),
            ])
            .unwrap();
            (m, PenaltyConfig::quadratic(vec![1.0, 0.0], SeminormSpec::tv2()))
        } else {
            let order = rng.random_range(2..=4);
            let dims: Vec<usize> = (0..order).map(|_| rng.random_range(2..=6)).collect();
            let rank = rng.random_range(1..=3);
            let mu = if rng.random::<bool>() { SeminormSpec::tv2() } else { SeminormSpec::spline() };
            let alpha: Vec<f64> = (0..order).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() * 2.0 }).collect();
            let mut cfg = PenaltyConfig::quadratic(vec![1.0; order], mu);
            cfg.alpha = alpha;
            (random_model(&mut rng, &dims, rank), cfg)
        };
        let dims: Vec<usize> = model.factors().iter().map(Matrix::rows).collect();
        let pen = cfg.prepare(&dims).unwrap();
        let p = penalty_unnormalized(&pen, &model).unwrap();
        let q = penalty_normalized(&pen, &model.normalize_l2()).unwrap();
        if k == 0 && ((p - 4.0).abs() > PENALTY_MATCH || (q - 4.0).abs() > PENALTY_MATCH) {
            return Err(format!("worked value: {p} vs {q}, expected 4"));
        }
        worst = worst.max((p - q).abs() / p.abs().max(1.0));
    }
    if worst <= PENALTY_MATCH {
        Ok(format!("100 models, max relative difference {worst:.1e}"))
    } else {
        Err(format!("max relative difference {worst:.1e}"))
    }
}

/// `∫(s″)²` of the natural cubic interpolant of `(u_i, a_i)`: second
/// derivatives `M` from the tridiagonal continuity system (Thomas
/// algorithm), then the exact integral of the piecewise linear `s″`.
fn spline_energy(u: &[f64], a: &[f64]) -> f64 {
    let n = u.len();
    let h: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let m = n - 2;
    let mut diag: Vec<f64> = (0..m).map(|j| 2.0 * (h[j] + h[j + 1])).collect();
    let mut rhs: Vec<f64> =
        (0..m).map(|j| 6.0 * ((a[j + 2] - a[j + 1]) / h[j + 1] - (a[j + 1] - a[j]) / h[j])).collect();
    for j in 1..m {
        let factor = h[j] / diag[j - 1];
        diag[j] -= factor * h[j];
        rhs[j] -= factor * rhs[j - 1];
    }
    let mut inner = vec![0.0; m];
    for j in (0..m).rev() {
        let upper = if j + 1 < m { h[j + 1] * inner[j + 1] } else { 0.0 };
        inner[j] = (rhs[j] - upper) / diag[j];
    }
    let mut second = vec![0.0; n];
    second[1..n - 1].copy_from_slice(&inner);
    (0..n - 1).map(|i| h[i] / 3.0 * (second[i] * second[i] + second[i] * second[i + 1] + second[i + 1] * second[i + 1])).sum()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let len = 4 + k % 9;
        let knots = if k % 2 == 0 {
            default_knots(len)
        } else {
            let mut u: Vec<f64> = (0..len).map(|_| 0.02 + 0.96 * rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            u.dedup();
            if u.len() < len {
                default_knots(len)
            } else {
                u
            }
        };
        let a: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
        let k_mat = spline_roughness_matrix(&knots).unwrap();
        let quad = k_mat.quadratic_form(&a);
        let exact = spline_energy(&knots, &a);
        worst = worst.max((quad - exact).abs() / exact);
    }
    if worst < SPLINE_REL {
        Ok(format!("50 vectors, max relative error {worst:.1e}"))
    } else {
        Err(format!("max relative error {worst:.1e}"))
    }
}

fn criterion_9() -> Outcome {
    let data = toy_generate(&ToySpec::new(30, 3, 0)).unwrap();
    let parts = mask_partition(&data.mask, 5, 0).unwrap();
    for i in 0..data.mask.values().len() {
        let covered = parts.iter().filter(|p| p.is_observed(i)).count();
        if covered != usize::from(data.mask.is_observed(i)) {
            return Err(format!("entry {i} covered {covered} times"));
        }
    }
    let mut lines = vec!["partition is a disjoint cover".to_string()];
    for (kind, hals) in [(SolverKind::Hals, true), (SolverKind::Grad, false)] {
        let mut cfg = CvConfig::new(SolverConfig::new(3, penalized(0.0, SeminormSpec::tv2())));
        cfg.solver = kind;
        let result = cv_select_alpha(&data.noisy, &data.mask, &ALPHA_GRID, &cfg).unwrap();
        let best_mean = result.mean.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        if result.mean[result.selected_index] != Some(best_mean) {
            return Err(format!("{kind:?}: selected α is not the holdout minimizer"));
        }
        let grid = toy_grid(0, hals);
        let oracle_nmse = grid[oracle(&grid)].0;
        let selected_nmse = grid[result.selected_index].0;
        let ratio = selected_nmse / oracle_nmse;
        let line = format!("{kind:?}: CV α {} vs oracle α {}, NMSE ratio {ratio:.3}", result.selected_alpha, ALPHA_GRID[oracle(&grid)]);
        if ratio > CV_NMSE_RATIO {
            return Err(line);
        }
        lines.push(line);
    }
    Ok(lines.join("; "))
}

fn smooth_image() -> DenseTensor {
    DenseTensor::from_fn(shape(&[32, 32, 3]), |i| {
        let (y, x) = (i[0] as f64 / 31.0, i[1] as f64 / 31.0);
        let v = match i[2] {
            0 => 128.0 + 90.0 * (std::f64::consts::PI * x).sin() * (1.5 * y).cos(),
            1 => 60.0 + 150.0 * x * y,
            _ => 200.0 - 120.0 * ((x - 0.4).powi(2) + (y - 0.6).powi(2)).sqrt(),
        };
        v.round()
    })
    .unwrap()
}

fn read_csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let image_path = dir.path().join("smooth.ppm");
    write_image_ppm(&image_path, &smooth_image()).unwrap();
    let image = read_image_ppm(&image_path).unwrap();
    let mut lines = Vec::new();
    for (solver, max_iter) in [("grad", "10000"), ("hals", "300")] {
        let out = dir.path().join(solver);
        let start = Instant::now();
        let status = bin()
            .args(["complete", "--image"])
            .arg(&image_path)
            .args(["--mask", "pixelwise:0.8", "--rank", "8", "--alpha", "0.01,0.1,1", "--seed", "3"])
            .args(["--solver", solver, "--max-iter", max_iter, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        let secs = start.elapsed().as_secs_f64();
        if !status.status.success() {
            return Err(format!("{solver}: complete failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        // same mask as the command: pixelwise, fraction 0.8, seed 3
        let w = smoothntf::mask::make_mask(
            image.shape(),
            &smoothntf::mask::MaskSpec::Pixelwise { fraction: 0.8, seed: 3 },
        )
        .unwrap();
        let missing: Vec<bool> = (0..image.values().len()).map(|i| !w.is_observed(i)).collect();
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        for (i, v) in image.values().iter().enumerate() {
            if w.is_observed(i) {
                sums[i % 3] += v;
                counts[i % 3] += 1;
            }
        }
        let baseline = DenseTensor::new(
            image.shape().clone(),
            image
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| if w.is_observed(i) { v } else { sums[i % 3] / counts[i % 3] as f64 })
                .collect(),
        )
        .unwrap();
        let baseline_ssim = ssim_masked(&image, &baseline, &missing, &SsimParams::default()).unwrap();
        let rows = read_csv_rows(&out.join("quality.csv"));
        let missing_row = rows.iter().find(|r| r[0] == "missing").ok_or("no missing-only row")?;
        let psnr: f64 = missing_row[1].parse().unwrap();
        let ssim: f64 = missing_row[2].parse().unwrap();
        let overall_psnr: f64 = rows.iter().find(|r| r[0] == "overall").unwrap()[1].parse().unwrap();
        let line = format!(
            "{solver}: missing-only SSIM {ssim:.4} vs mean-fill {baseline_ssim:.4}, PSNR {psnr:.2} dB, {secs:.1}s"
        );
        if !(ssim > baseline_ssim && psnr.is_finite() && overall_psnr.is_finite() && secs < IMAGE_BUDGET_S) {
            return Err(line);
        }
        lines.push(line);
    }
    Ok(lines.join("; "))
}

fn run_ok(cmd: &mut Command) -> Result<std::process::Output, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!("{cmd:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for name in names {
        if std::fs::read(a.join(name)).unwrap() != std::fs::read(b.join(name)).unwrap() {
            return Err(format!("{name} differs between seeded reruns"));
        }
    }
    Ok(())
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // DNT: bytes → tensor → bytes, and values bit for bit
    let mut rng = ChaCha8Rng::seed_from_u64(11_000);
    let x = DenseTensor::from_fn(shape(&[3, 4, 2]), |_| rng.random::<f64>() * 1e6 - 5e5).unwrap();
    write_tensor(&d.join("x.dnt"), &x).unwrap();
    let back = read_tensor(&d.join("x.dnt")).unwrap();
    if !back.values().iter().zip(x.values()).all(|(a, b)| a.to_bits() == b.to_bits())
        || encode_tensor(&back) != std::fs::read(d.join("x.dnt")).unwrap()
        || decode_tensor(&encode_tensor(&x), Path::new("mem")).unwrap() != x
    {
        return Err("DNT round trip is not bit-identical".into());
    }

    // PPM: quantized image survives read/write unchanged
    let img = DenseTensor::from_fn(shape(&[7, 5, 3]), |_| (rng.random::<f64>() * 255.0).round()).unwrap();
    let bytes = encode_ppm(&img).unwrap();
    let decoded = decode_ppm(&bytes, Path::new("mem")).unwrap();
    if decoded != img || encode_ppm(&decoded).unwrap() != bytes {
        return Err("PPM round trip is not bit-identical".into());
    }

    // exit codes
    let code = |cmd: &mut Command| cmd.output().unwrap().status.code();
    if code(bin().args(["factorize", "--bogus"])) != Some(2) {
        return Err("usage error did not exit 2".into());
    }
    if code(bin().args(["factorize", "--x", "absent.dnt", "--w", "absent.dnt", "--rank", "2", "--out"]).arg(d.join("o"))) != Some(1) {
        return Err("runtime error did not exit 1".into());
    }
    write_tensor(&d.join("zero.dnt"), &DenseTensor::zeros(shape(&[3, 3, 2]))).unwrap();
    let out = bin().args(["check-coercivity", "--w"]).arg(d.join("zero.dnt")).args(["--alpha", "1,1,0"]).output().unwrap();
    if out.status.code() != Some(3) || !String::from_utf8_lossy(&out.stdout).contains("not coercive") {
        return Err("all-zero mask did not exit 3 with \"not coercive\"".into());
    }
    write_tensor(&d.join("ones.dnt"), &DenseTensor::ones(shape(&[3, 3, 2]))).unwrap();
    if code(bin().args(["check-coercivity", "--w"]).arg(d.join("ones.dnt")).args(["--alpha", "1,1,0"])) != Some(0) {
        return Err("full mask did not exit 0".into());
    }

    // seeded reruns
    for run in ["a", "b"] {
        let root = d.join(run);
        run_ok(bin().args(["gen-toy", "--size", "10", "--rank", "2", "--missing", "0.3", "--seed", "9", "--out"]).arg(root.join("toy")))?;
        run_ok(
            bin()
                .args(["factorize", "--x"])
                .arg(root.join("toy/x.dnt"))
                .arg("--w")
                .arg(root.join("toy/w.dnt"))
                .args(["--rank", "2", "--alpha", "0.01,0.01,0", "--init", "random", "--seed", "4", "--clock", "none", "--out"])
                .arg(root.join("fit")),
        )?;
        run_ok(
            bin()
                .args(["cv", "--x"])
                .arg(root.join("toy/x.dnt"))
                .arg("--w")
                .arg(root.join("toy/w.dnt"))
                .args(["--rank", "2", "--grid", "0.001,0.1", "--folds", "3", "--modes", "1,2", "--seed", "2", "--max-iter", "200", "--out"])
                .arg(root.join("cv.csv")),
        )?;
    }
    let (a, b) = (d.join("a"), d.join("b"));
    same_files(&a.join("toy"), &b.join("toy"), &["x.dnt", "w.dnt", "y.dnt", "truth/lambda.dnt", "truth/factor_1.dnt"])?;
    same_files(&a.join("fit"), &b.join("fit"), &["fit_report.csv", "lambda.dnt", "factor_1.dnt", "factor_2.dnt", "factor_3.dnt"])?;
    same_files(&a, &b, &["cv.csv"])?;
    Ok("DNT/PPM bit-identical; exit codes 0/1/2/3; gen-toy, factorize and cv reruns byte-identical".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 monotone descent", criterion_1),
        ("2 gradient vs finite differences", criterion_2),
        ("3 coercivity oracle", criterion_3),
        ("4 non-coercive divergence witness", criterion_4),
        ("5 exact recovery", criterion_5),
        ("6 toy experiment", criterion_6),
        ("7 penalty form consistency", criterion_7),
        ("8 spline seminorm oracle", criterion_8),
        ("9 cross-validation", criterion_9),
        ("10 image pipeline", criterion_10),
        ("11 format fidelity", criterion_11),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(&format!("{o} "))) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
