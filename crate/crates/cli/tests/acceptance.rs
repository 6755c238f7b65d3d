//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Reference values come from independent computations in this file
//! (finite differences, angle sweeps, direct arithmetic), not from the
//! library's own checking helpers.

use std::process::Command;
use std::time::{Duration, Instant};

use blockid::dataset::{cross_validate, CvReport, SplitMode};
use blockid::features::extract_all;
use blockid::grasp::{grasp_direction, width_along, PointCloud};
use blockid::lexicon::Description;
use blockid::model::{posterior, softmax, EnvFeatures};
use blockid::synth::{generate_corpus, rasterize, CorpusSpec};
use blockid::training::{fit, kl_loss, loss_hessian, loss_jacobian, target_distribution, ModelFile, UNSELECTED_MASS};
use blockid::{
    default_lexicon, Corpus, Environment, FitConfig, IdentificationTask, Lexicon, Method, ModelParams, RawFeatures,
    SceneObject,
};
use nalgebra::SymmetricEigen;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_env(id: &str, n: usize, rng: &mut ChaCha8Rng) -> Environment {
    let objects = (0..n)
        .map(|i| {
            let width = rng.random_range(0.03..0.3);
            let height = rng.random_range(0.03..0.3);
            let achromatic = rng.random_bool(0.15);
            SceneObject {
                id: format!("o{i}"),
                features: RawFeatures {
                    x_pos: rng.random_range(0.05..0.95),
                    y_pos: rng.random_range(0.05..0.95),
                    width,
                    height,
                    size: width * height,
                    hue: if achromatic { 0.0 } else { rng.random_range(0.0..1.0) },
                    light: rng.random_range(0.2..0.95),
                    achromatic,
                },
            }
        })
        .collect();
    Environment {
        id: id.into(),
        category: "1".into(),
        objects,
        scene: None,
    }
}

fn random_desc(lex: &Lexicon, max_len: usize, rng: &mut ChaCha8Rng) -> Description {
    let all: Vec<usize> = (0..lex.len()).collect();
    let k = rng.random_range(1..=max_len);
    Description::from_indices(all.choose_multiple(rng, k).copied())
}

fn random_beta(lex: &Lexicon, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = Normal::new(0.0, sigma).unwrap();
    (0..lex.total_dim()).map(|_| n.sample(rng)).collect()
}

/// Three environments of five objects and a dozen random tasks.
fn random_instance(lex: &Lexicon, rng: &mut ChaCha8Rng) -> (Vec<Environment>, Vec<IdentificationTask>) {
    let envs: Vec<Environment> = (0..3).map(|e| random_env(&format!("e{e}"), 5, rng)).collect();
    let mut tasks = Vec::new();
    for _ in 0..12 {
        let env = envs.choose(rng).unwrap();
        let k = rng.random_range(1..=3);
        let mut ids: Vec<String> = env.objects.iter().map(|o| o.id.clone()).collect();
        ids.shuffle(rng);
        ids.truncate(k);
        tasks.push(IdentificationTask::new(env, random_desc(lex, 3, rng), ids).unwrap());
    }
    (envs, tasks)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1e-8)
}

fn criterion_1() -> Outcome {
    let lex = default_lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = 1e-5;
    let ridge = 1e-2;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (envs, tasks) = random_instance(&lex, &mut rng);
        let params = ModelParams::new(lex.clone(), random_beta(&lex, 0.1, &mut rng)).unwrap();
        let jac = loss_jacobian(&params, &tasks, &envs, ridge).unwrap();
        let mut probe = params.clone();
        for (i, &analytic) in jac.iter().enumerate() {
            probe.beta[i] = params.beta[i] + h;
            let up = kl_loss(&probe, &tasks, &envs, ridge).unwrap();
            probe.beta[i] = params.beta[i] - h;
            let down = kl_loss(&probe, &tasks, &envs, ridge).unwrap();
            probe.beta[i] = params.beta[i];
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * h)));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-4 && elapsed < Duration::from_secs(1),
        format!("max rel err {worst:.2e} (< 1e-4), {:.3}s (< 1s)", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let lex = default_lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for _ in 0..20 {
        let (envs, tasks) = random_instance(&lex, &mut rng);
        let params = ModelParams::new(lex.clone(), random_beta(&lex, 0.1, &mut rng)).unwrap();
        let hess = loss_hessian(&params, &tasks, &envs, 0.0).unwrap();
        let mut probe = params.clone();
        for j in 0..params.beta.len() {
            probe.beta[j] = params.beta[j] + h;
            let up = loss_jacobian(&probe, &tasks, &envs, 0.0).unwrap();
            probe.beta[j] = params.beta[j] - h;
            let down = loss_jacobian(&probe, &tasks, &envs, 0.0).unwrap();
            probe.beta[j] = params.beta[j];
            for i in 0..up.len() {
                worst = worst.max(rel_err(hess[(i, j)], (up[i] - down[i]) / (2.0 * h)));
            }
        }
        let eig = SymmetricEigen::new(hess).eigenvalues;
        min_eig = min_eig.min(eig.iter().copied().fold(f64::INFINITY, f64::min));
    }
    outcome(
        worst < 1e-4 && min_eig >= -1e-8,
        format!("max rel err {worst:.2e} (< 1e-4), min eigenvalue {min_eig:.2e} (>= -1e-8)"),
    )
}

fn default_corpus(lex: &Lexicon) -> Corpus {
    generate_corpus(&CorpusSpec::default(), lex).unwrap()
}

fn criterion_3() -> Outcome {
    let lex = default_lexicon();
    let corpus = default_corpus(&lex);
    let start = Instant::now();
    let run = |method| {
        let config = FitConfig {
            method,
            ridge: 1e-6,
            ..FitConfig::default()
        };
        fit(&lex, &corpus.tasks, &corpus.environments, &config).unwrap().1
    };
    let bfgs = run(Method::Bfgs);
    let newton = run(Method::Newton);
    let elapsed = start.elapsed();
    let gap = (bfgs.final_loss - newton.final_loss).abs();
    outcome(
        gap <= 1e-6 && bfgs.grad_norm <= 1e-6 && newton.grad_norm <= 1e-6 && elapsed < Duration::from_secs(30),
        format!(
            "loss gap {gap:.2e} (<= 1e-6), |grad| bfgs {:.1e} newton {:.1e} (<= 1e-6), {:.1}s (< 30s)",
            bfgs.grad_norm,
            newton.grad_norm,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let lex = default_lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut uniform_exact = true;
    let mut worst_shift: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(1..=20);
        let env = random_env(&format!("r{case}"), n, &mut rng);
        let params = ModelParams::new(lex.clone(), random_beta(&lex, 1.0, &mut rng)).unwrap();
        let empty = posterior(&Description::empty(), &env, &params).unwrap();
        uniform_exact &= empty.probs.iter().all(|&p| p == 1.0 / n as f64);

        let desc = random_desc(&lex, 4, &mut rng);
        let post = posterior(&desc, &env, &params).unwrap();
        worst_sum = worst_sum.max((post.probs.iter().sum::<f64>() - 1.0).abs());

        // an extra channel with the same value c on every object adds the
        // same c·b to every score
        let feats = EnvFeatures::new(&env, &lex);
        let mut scores = feats.scores(&desc, &lex, &params.beta);
        let c: f64 = rng.random_range(-5.0..5.0);
        let extra: f64 = desc.iter().map(|_| c * rng.random_range(-2.0..2.0)).sum();
        scores.iter_mut().for_each(|s| *s += extra);
        let shifted = softmax(&scores);
        for (a, b) in post.probs.iter().zip(&shifted) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    outcome(
        uniform_exact && worst_shift <= 1e-12 && worst_sum <= 1e-12,
        format!(
            "empty exact uniform {uniform_exact}, constant-channel change {worst_shift:.1e} (<= 1e-12), |sum-1| {worst_sum:.1e} (<= 1e-12)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut ok = true;
    let mut checked = 0;
    for n in 2..=30 {
        let env = random_env("t", n, &mut rng);
        for k in 1..=n {
            let mut ids: Vec<String> = env.objects.iter().map(|o| o.id.clone()).collect();
            ids.shuffle(&mut rng);
            ids.truncate(k);
            let p = target_distribution(&ids, &env).unwrap();
            let expected_sel = (1.0 - 0.005 * (n - k) as f64) / k as f64;
            for (o, obj) in env.objects.iter().enumerate() {
                if ids.contains(&obj.id) {
                    ok &= (p[o] - expected_sel).abs() <= 1e-15;
                } else {
                    ok &= p[o] == 0.005;
                }
            }
            ok &= (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
            checked += 1;
        }
    }
    ok &= UNSELECTED_MASS == 0.005;
    outcome(ok, format!("{checked} (|env|, |selected|) combinations"))
}

/// Exhaustive sweep over 7200 half-turn angles, then golden-section
/// refinement inside the winning bracket.
fn sweep_min_width(pts: &[[f64; 2]]) -> (f64, f64) {
    let steps = 7200;
    let w = |t: f64| width_along(pts, [t.cos(), t.sin()]);
    let delta = std::f64::consts::PI / steps as f64;
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for k in 0..steps {
        let t = k as f64 * delta;
        let v = w(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let (mut a, mut b) = (best_t - delta, best_t + delta);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if w(c) < w(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = (a + b) / 2.0;
    (t, w(t).min(best))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst_width: f64 = 0.0;
    let mut worst_dir: f64 = 0.0;
    let mut worst_rot_w: f64 = 0.0;
    let mut worst_rot_d: f64 = 0.0;
    for _ in 0..100 {
        let (sx, sy) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
        let shear: f64 = rng.random_range(-1.0..1.0);
        let pts: Vec<[f64; 3]> = (0..200)
            .map(|_| {
                let (u, v): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                [sx * u + shear * sy * v, sy * v, rng.random_range(0.0..0.5)]
            })
            .collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let g = grasp_direction(&cloud).unwrap();
        let (t, w) = sweep_min_width(&cloud.horizontal());
        worst_width = worst_width.max((g.width - w).abs() / w);
        let cross = g.direction[0] * t.sin() - g.direction[1] * t.cos();
        worst_dir = worst_dir.max(cross.abs());

        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (c, s) = (theta.cos(), theta.sin());
        let rotated: Vec<[f64; 3]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect();
        let gr = grasp_direction(&PointCloud::new(rotated).unwrap()).unwrap();
        worst_rot_w = worst_rot_w.max((gr.width - g.width).abs());
        let expect = [c * g.direction[0] - s * g.direction[1], s * g.direction[0] + c * g.direction[1]];
        worst_rot_d = worst_rot_d.max((expect[0] * gr.direction[1] - expect[1] * gr.direction[0]).abs());
    }
    outcome(
        worst_width <= 1e-6 && worst_dir <= 1e-6 && worst_rot_w <= 1e-9 && worst_rot_d <= 1e-9,
        format!(
            "width rel err {worst_width:.1e} (<= 1e-6), direction {worst_dir:.1e}, rotation: width {worst_rot_w:.1e} direction {worst_rot_d:.1e} (<= 1e-9)"
        ),
    )
}

fn criterion_7() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let synth = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_blockid"))
            .args(["synth", "--quiet", "--seed", "7", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let a = synth("a.json");
    let b = synth("b.json");
    let identical = a == b && !a.is_empty();

    let lex = default_lexicon();
    let corpus = Corpus::from_json(std::str::from_utf8(&a).unwrap(), "a.json", &lex).unwrap();
    let (params, report) = fit(&lex, &corpus.tasks, &corpus.environments, &FitConfig::default()).unwrap();
    let path = dir.path().join("model.json");
    ModelFile::new(&params, 1e-6, Some(report)).save(&path).unwrap();
    let back = ModelFile::load(&path).unwrap().params().unwrap();
    let bit_exact = params.beta.len() == back.beta.len()
        && params.beta.iter().zip(&back.beta).all(|(x, y)| x.to_bits() == y.to_bits());
    outcome(
        identical && bit_exact,
        format!("corpus bytes identical {identical} ({} bytes), beta bit-exact {bit_exact}", a.len()),
    )
}

fn criterion_8() -> Outcome {
    let lex = default_lexicon();
    let corpus = default_corpus(&lex);
    let (w, h) = (640usize, 480usize);
    let (mut pos, mut hue, mut light): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut flags_match = true;
    let mut count_match = true;
    for env in &corpus.environments {
        let (img, mask) = rasterize(env, w, h);
        let img = blockid::pnm::RgbImage::from_pnm(&img.to_ppm()).unwrap();
        let mask = blockid::pnm::GrayImage::from_pnm(&mask.to_pgm()).unwrap();
        let found = extract_all(&img, &mask).unwrap();
        count_match &= found.len() == env.len();
        for (label, got) in found {
            let want = &env.objects[label as usize - 1].features;
            pos = pos
                .max((got.x_pos - want.x_pos).abs() * w as f64)
                .max((got.y_pos - want.y_pos).abs() * h as f64)
                .max((got.width - want.width).abs() * w as f64)
                .max((got.height - want.height).abs() * h as f64);
            light = light.max((got.light - want.light).abs());
            flags_match &= got.achromatic == want.achromatic;
            if !want.achromatic {
                let d = (got.hue - want.hue).rem_euclid(1.0);
                hue = hue.max(d.min(1.0 - d));
            }
        }
    }
    outcome(
        count_match && flags_match && pos <= 1.5 && hue <= 0.02 && light <= 0.02,
        format!("position/extent {pos:.2} px (<= 1.5), hue {hue:.4}, light {light:.4} (<= 0.02)"),
    )
}

fn criterion_9() -> Outcome {
    let lex = default_lexicon();
    let start = Instant::now();
    let corpus = default_corpus(&lex);
    let config = FitConfig::default();
    let env: CvReport = cross_validate(&lex, &corpus, &config, SplitMode::Env).unwrap();
    let cat: CvReport = cross_validate(&lex, &corpus, &config, SplitMode::Category).unwrap();
    let elapsed = start.elapsed();
    println!("{}", env.to_table());
    println!("{}", cat.to_table());
    let g1 = cat.fold("1").unwrap().metrics.t_lklh;
    let g5 = cat.fold("5").unwrap().metrics.t_lklh;
    let agg = cat.aggregate.t_lklh;
    let pass = corpus.environments.len() == 22
        && env.aggregate.t_lklh >= 0.85
        && env.aggregate.kl <= 0.30
        && g1 > agg
        && g5 < agg
        && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "env CV t_lklh {:.1}% (>= 85%), KL {:.3} (<= 0.30); cat CV g1 {:.1}% > avg {:.1}% > g5 {:.1}%; {:.1}s (< 300s)",
            100.0 * env.aggregate.t_lklh,
            env.aggregate.kl,
            100.0 * g1,
            100.0 * agg,
            100.0 * g5,
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 9] = [
        ("gradient correctness", criterion_1),
        ("hessian correctness and PSD", criterion_2),
        ("optimizer agreement", criterion_3),
        ("softmax invariants", criterion_4),
        ("target rule", criterion_5),
        ("grasp oracle", criterion_6),
        ("determinism", criterion_7),
        ("feature extraction", criterion_8),
        ("cross-validation table", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
