//! KL-divergence training objective, its exact Jacobian and Hessian, and the
//! fitting driver.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lexicon::{Description, Lexicon};
use crate::model::{log_sum_exp, EnvFeatures, Environment, ModelParams};
use crate::optim::{self, StopCriteria};
use crate::{Error, Result};

/// Probability mass given to every object a user did not select.
pub const UNSELECTED_MASS: f64 = 0.005;

/// One identification: a description interpreted in an environment, with the
/// objects the identifier selected and the resulting target distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationTask {
    pub env_id: String,
    pub desc: Description,
    pub selected: Vec<String>,
    pub target: Vec<f64>,
}

impl IdentificationTask {
    pub fn new(env: &Environment, desc: Description, selected: Vec<String>) -> Result<Self> {
        let target = target_distribution(&selected, env)?;
        Ok(IdentificationTask {
            env_id: env.id.clone(),
            desc,
            selected,
            target,
        })
    }
}

/// Non-selected objects get [`UNSELECTED_MASS`], the rest is shared uniformly
/// among the selected ones.
pub fn target_distribution<S: AsRef<str>>(selected: &[S], env: &Environment) -> Result<Vec<f64>> {
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut mask = vec![false; env.len()];
    for id in selected {
        let id = id.as_ref();
        let i = env
            .object_index(id)
            .ok_or_else(|| Error::UnknownObject(format!("{id} in environment {}", env.id)))?;
        mask[i] = true;
    }
    let n_sel = mask.iter().filter(|m| **m).count();
    let unselected = (env.len() - n_sel) as f64 * UNSELECTED_MASS;
    if unselected >= 1.0 {
        return Err(Error::MassOverflow(unselected));
    }
    let share = (1.0 - unselected) / n_sel as f64;
    Ok(mask
        .into_iter()
        .map(|m| if m { share } else { UNSELECTED_MASS })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bfgs,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Zeros,
    /// N(0, 0.01²) entries from a seeded generator.
    Gaussian { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub method: Method,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub ridge: f64,
    pub init: Init,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: Method::Bfgs,
            grad_tol: 1e-6,
            max_iters: 500,
            ridge: 1e-6,
            init: Init::Zeros,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(Error::InvalidConfig("grad_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(Error::InvalidConfig("ridge must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub iterations: usize,
    pub evaluations: usize,
    pub final_loss: f64,
    pub grad_norm: f64,
    pub converged: bool,
    /// Loss after every accepted step.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

struct Prepared {
    env: usize,
    /// Global parameter rows switched on by the description.
    rows: Vec<usize>,
    target: Vec<f64>,
    /// Σ p log p, constant per task.
    neg_entropy: f64,
}

const CHUNK: usize = 128;

/// The summed KL loss over a task list, with an optional ridge term.
///
/// Evaluation is chunked over tasks in fixed order and chunk partials are
/// added sequentially, so results do not depend on the thread count.
pub struct KlObjective<'a> {
    lex: &'a Lexicon,
    envs: Vec<EnvFeatures>,
    tasks: Vec<Prepared>,
    ridge: f64,
}

impl<'a> KlObjective<'a> {
    pub fn new(
        lex: &'a Lexicon,
        tasks: &[IdentificationTask],
        envs: &[Environment],
        ridge: f64,
    ) -> Result<Self> {
        let index: HashMap<&str, usize> = envs
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect();
        let mut used = vec![None; envs.len()];
        let mut feats = Vec::new();
        let mut prepared = Vec::with_capacity(tasks.len());
        for t in tasks {
            let &ei = index
                .get(t.env_id.as_str())
                .ok_or_else(|| Error::UnknownEnvironment(t.env_id.clone()))?;
            let env = &envs[ei];
            if t.target.len() != env.len() {
                return Err(Error::DimensionMismatch(format!(
                    "target has {} entries, environment {} has {} objects",
                    t.target.len(),
                    env.id,
                    env.len()
                )));
            }
            if let Some(s) = t.desc.iter().find(|&s| s >= lex.len()) {
                return Err(Error::DimensionMismatch(format!("symbol {s} outside lexicon")));
            }
            let slot = *used[ei].get_or_insert_with(|| {
                feats.push(EnvFeatures::new(env, lex));
                feats.len() - 1
            });
            let rows = t
                .desc
                .iter()
                .flat_map(|s| lex.offset(s)..lex.offset(s) + lex.dim(s))
                .collect();
            let neg_entropy = t
                .target
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|p| p * p.ln())
                .sum();
            prepared.push(Prepared {
                env: slot,
                rows,
                target: t.target.clone(),
                neg_entropy,
            });
        }
        Ok(KlObjective {
            lex,
            envs: feats,
            tasks: prepared,
            ridge,
        })
    }

    pub fn lexicon(&self) -> &Lexicon {
        self.lex
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    fn scores(&self, t: &Prepared, beta: &[f64]) -> Vec<f64> {
        let f = &self.envs[t.env];
        (0..f.n_objects())
            .map(|o| {
                let row = f.object(o);
                t.rows.iter().map(|&k| row[k] * beta[k]).sum()
            })
            .collect()
    }

    /// Per-task KL(p‖q) without the ridge term.
    pub fn task_kl(&self, beta: &[f64]) -> Vec<f64> {
        self.tasks
            .iter()
            .map(|t| {
                let s = self.scores(t, beta);
                let lse = log_sum_exp(&s);
                let cross: f64 = t.target.iter().zip(&s).map(|(p, si)| p * (si - lse)).sum();
                t.neg_entropy - cross
            })
            .collect()
    }

    fn chunk_value_grad(&self, tasks: &[Prepared], beta: &[f64], grad: bool) -> (f64, Vec<f64>) {
        let mut loss = 0.0;
        let mut g = if grad { vec![0.0; beta.len()] } else { Vec::new() };
        for t in tasks {
            let s = self.scores(t, beta);
            let lse = log_sum_exp(&s);
            let mut cross = 0.0;
            for (p, si) in t.target.iter().zip(&s) {
                cross += p * (si - lse);
            }
            loss += t.neg_entropy - cross;
            if grad {
                let f = &self.envs[t.env];
                for (o, si) in s.iter().enumerate() {
                    let r = (si - lse).exp() - t.target[o];
                    let row = f.object(o);
                    for &k in &t.rows {
                        g[k] += row[k] * r;
                    }
                }
            }
        }
        (loss, g)
    }

    fn value_grad_impl(&self, beta: &[f64], grad: bool) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, Vec<f64>)> = self
            .tasks
            .par_chunks(CHUNK)
            .map(|c| self.chunk_value_grad(c, beta, grad))
            .collect();
        let mut loss = 0.0;
        let mut g = vec![0.0; if grad { beta.len() } else { 0 }];
        for (l, pg) in parts {
            loss += l;
            for (a, b) in g.iter_mut().zip(&pg) {
                *a += b;
            }
        }
        loss += self.ridge * beta.iter().map(|b| b * b).sum::<f64>();
        if grad {
            for (a, b) in g.iter_mut().zip(beta) {
                *a += 2.0 * self.ridge * b;
            }
        }
        (loss, g)
    }

    pub fn loss(&self, beta: &[f64]) -> f64 {
        self.value_grad_impl(beta, false).0
    }

    pub fn jacobian(&self, beta: &[f64]) -> Vec<f64> {
        self.value_grad_impl(beta, true).1
    }

    /// Σ Φ[diag(q) − qqᵀ]Φᵀ + 2λI, assembled on the upper triangle and mirrored.
    pub fn hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let n = beta.len();
        let parts: Vec<Vec<f64>> = self
            .tasks
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut h = vec![0.0; n * n];
                for t in chunk {
                    let s = self.scores(t, beta);
                    let lse = log_sum_exp(&s);
                    let q: Vec<f64> = s.iter().map(|si| (si - lse).exp()).collect();
                    let f = &self.envs[t.env];
                    let mean: Vec<f64> = t
                        .rows
                        .iter()
                        .map(|&k| (0..q.len()).map(|o| q[o] * f.object(o)[k]).sum())
                        .collect();
                    let mut centered = vec![0.0; t.rows.len()];
                    for (o, qo) in q.iter().enumerate() {
                        let row = f.object(o);
                        for (c, (&k, m)) in centered.iter_mut().zip(t.rows.iter().zip(&mean)) {
                            *c = row[k] - m;
                        }
                        for (a, &ka) in t.rows.iter().enumerate() {
                            let wa = qo * centered[a];
                            for (b, &kb) in t.rows.iter().enumerate().skip(a) {
                                let (i, j) = if ka <= kb { (ka, kb) } else { (kb, ka) };
                                h[i * n + j] += wa * centered[b];
                            }
                        }
                    }
                }
                h
            })
            .collect();
        let mut upper = vec![0.0; n * n];
        for p in parts {
            for (a, b) in upper.iter_mut().zip(&p) {
                *a += b;
            }
        }
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = upper[i * n + i] + 2.0 * self.ridge;
            for j in i + 1..n {
                h[(i, j)] = upper[i * n + j];
                h[(j, i)] = upper[i * n + j];
            }
        }
        h
    }
}

impl optim::Objective for KlObjective<'_> {
    fn dim(&self) -> usize {
        self.lex.total_dim()
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.value_grad_impl(x, true)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        KlObjective::hessian(self, x)
    }
}

/// Σ_tasks KL(p‖q) + λ‖β‖².
pub fn kl_loss(
    params: &ModelParams,
    tasks: &[IdentificationTask],
    envs: &[Environment],
    ridge: f64,
) -> Result<f64> {
    params.check()?;
    Ok(KlObjective::new(&params.lexicon, tasks, envs, ridge)?.loss(&params.beta))
}

/// Σ Φ(q − p) + 2λβ in the global layout.
pub fn loss_jacobian(
    params: &ModelParams,
    tasks: &[IdentificationTask],
    envs: &[Environment],
    ridge: f64,
) -> Result<Vec<f64>> {
    params.check()?;
    Ok(KlObjective::new(&params.lexicon, tasks, envs, ridge)?.jacobian(&params.beta))
}

pub fn loss_hessian(
    params: &ModelParams,
    tasks: &[IdentificationTask],
    envs: &[Environment],
    ridge: f64,
) -> Result<DMatrix<f64>> {
    params.check()?;
    Ok(KlObjective::new(&params.lexicon, tasks, envs, ridge)?.hessian(&params.beta))
}

/// Largest |analytic − numeric| / max(1e-8, |analytic|) over all coordinates,
/// numeric by central differences of `f` with step `h`.
pub fn max_relative_error<F: Fn(&[f64]) -> f64>(analytic: &[f64], f: F, x: &[f64], h: f64) -> f64 {
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1e-8);
        worst = worst.max(err);
    }
    worst
}

/// Compares the analytic Jacobian with central differences of the loss.
pub fn gradient_check(
    params: &ModelParams,
    tasks: &[IdentificationTask],
    envs: &[Environment],
    ridge: f64,
    h: f64,
) -> Result<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    params.check()?;
    let obj = KlObjective::new(&params.lexicon, tasks, envs, ridge)?;
    let analytic = obj.jacobian(&params.beta);
    Ok(max_relative_error(&analytic, |b| obj.loss(b), &params.beta, h))
}

/// Compares the analytic Hessian with central differences of the Jacobian,
/// entrywise with the same relative-error convention as [`gradient_check`].
pub fn hessian_check(
    params: &ModelParams,
    tasks: &[IdentificationTask],
    envs: &[Environment],
    ridge: f64,
    h: f64,
) -> Result<f64> {
    params.check()?;
    let obj = KlObjective::new(&params.lexicon, tasks, envs, ridge)?;
    let analytic = obj.hessian(&params.beta);
    let n = params.beta.len();
    let mut probe = params.beta.clone();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        probe[j] = params.beta[j] + h;
        let up = obj.jacobian(&probe);
        probe[j] = params.beta[j] - h;
        let down = obj.jacobian(&probe);
        probe[j] = params.beta[j];
        for i in 0..n {
            let numeric = (up[i] - down[i]) / (2.0 * h);
            let a = analytic[(i, j)];
            worst = worst.max((a - numeric).abs() / a.abs().max(1e-8));
        }
    }
    Ok(worst)
}

fn initial_beta(dim: usize, init: Init) -> Vec<f64> {
    match init {
        Init::Zeros => vec![0.0; dim],
        Init::Gaussian { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 0.01).expect("valid normal");
            (0..dim).map(|_| normal.sample(&mut rng)).collect()
        }
    }
}

/// Minimizes the KL loss over the given tasks.
pub fn fit(
    lex: &Lexicon,
    tasks: &[IdentificationTask],
    envs: &[Environment],
    config: &FitConfig,
) -> Result<(ModelParams, FitReport)> {
    config.validate()?;
    if tasks.is_empty() {
        return Err(Error::EmptySelection);
    }
    let obj = KlObjective::new(lex, tasks, envs, config.ridge)?;
    let x0 = initial_beta(lex.total_dim(), config.init);
    let stop = StopCriteria {
        grad_tol: config.grad_tol,
        max_iters: config.max_iters,
    };
    let m = match config.method {
        Method::Bfgs => optim::bfgs(&obj, x0, stop),
        Method::Newton => optim::newton(&obj, x0, stop),
    };
    if m.non_finite {
        return Err(Error::NonFiniteLoss(m.iterations));
    }
    let report = FitReport {
        method: config.method,
        iterations: m.iterations,
        evaluations: m.evaluations,
        final_loss: m.value,
        grad_norm: m.grad_norm,
        converged: m.converged,
        loss_history: m.history,
    };
    Ok((
        ModelParams {
            lexicon: lex.clone(),
            beta: m.x,
        },
        report,
    ))
}

pub const MODEL_FORMAT: &str = "blockid-model";
pub const FEATURE_CONFIG: &str = "raw+zscore/hue-phasor/v1";

/// On-disk model: lexicon layout, flat weights, ridge and fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub feature_config: String,
    pub lexicon: Lexicon,
    pub beta: Vec<f64>,
    pub ridge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
}

impl ModelFile {
    pub fn new(params: &ModelParams, ridge: f64, fit: Option<FitReport>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            feature_config: FEATURE_CONFIG.into(),
            lexicon: params.lexicon.clone(),
            beta: params.beta.clone(),
            ridge,
            fit,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.lexicon.clone(), self.beta.clone())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        let m: ModelFile = serde_json::from_str(text).map_err(|e| Error::Schema {
            file: file.into(),
            line: e.line(),
            field: "model".into(),
            message: e.to_string(),
        })?;
        let bad = |field: &str, message: String| Error::Schema {
            file: file.into(),
            line: 0,
            field: field.into(),
            message,
        };
        if m.format != MODEL_FORMAT {
            return Err(bad("format", format!("expected {MODEL_FORMAT}, found {}", m.format)));
        }
        if m.feature_config != FEATURE_CONFIG {
            return Err(bad(
                "feature_config",
                format!("expected {FEATURE_CONFIG}, found {}", m.feature_config),
            ));
        }
        m.params().map_err(|e| bad("beta", e.to_string()))?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}
