//! Per-symbol scores and the identification posterior.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::features::{compute_env_stats, write_symbol_features, EnvStats, RawFeatures};
use crate::lexicon::{Description, Lexicon};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub features: RawFeatures,
}

/// Axis-aligned block rectangle in scene-relative units, `(x, y)` the top-left corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBlock {
    pub object_id: String,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub rgb: [u8; 3],
}

/// The candidate set an identification is normalized over. Object order
/// defines posterior indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub id: String,
    pub category: String,
    pub objects: Vec<SceneObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Vec<SceneBlock>>,
}

impl Environment {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn raw(&self) -> Vec<RawFeatures> {
        self.objects.iter().map(|o| o.features).collect()
    }

    pub fn stats(&self) -> EnvStats {
        compute_env_stats(&self.raw())
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.objects.is_empty() {
            return Err("environment has no objects".into());
        }
        let mut seen = HashSet::new();
        for o in &self.objects {
            if !seen.insert(o.id.as_str()) {
                return Err(format!("duplicate object id {}", o.id));
            }
            o.features
                .validate()
                .map_err(|e| format!("object {}: {e}", o.id))?;
        }
        if let Some(scene) = &self.scene {
            for b in scene {
                if !seen.contains(b.object_id.as_str()) {
                    return Err(format!("scene block for unknown object {}", b.object_id));
                }
            }
        }
        Ok(())
    }
}

/// Per-symbol weight blocks laid out flat in lexicon order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lexicon: Lexicon,
    pub beta: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(lexicon: Lexicon) -> Self {
        let beta = vec![0.0; lexicon.total_dim()];
        ModelParams { lexicon, beta }
    }

    pub fn new(lexicon: Lexicon, beta: Vec<f64>) -> Result<Self> {
        let p = ModelParams { lexicon, beta };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.beta.len() != self.lexicon.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has {} entries, lexicon layout needs {}",
                self.beta.len(),
                self.lexicon.total_dim()
            )));
        }
        if let Some(i) = self.beta.iter().position(|b| !b.is_finite()) {
            return Err(Error::DimensionMismatch(format!("beta[{i}] is not finite")));
        }
        Ok(())
    }

    /// The weight block of one symbol.
    pub fn block(&self, sym: usize) -> &[f64] {
        let o = self.lexicon.offset(sym);
        &self.beta[o..o + self.lexicon.dim(sym)]
    }
}

/// Identification distribution aligned with the environment's object order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Posterior {
    pub probs: Vec<f64>,
}

impl Posterior {
    /// Entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    /// Object indices ordered by descending probability, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx
    }
}

/// Every object's full feature vector in the global layout, computed once per
/// environment. Rows of symbols outside a description are simply skipped.
#[derive(Debug, Clone)]
pub struct EnvFeatures {
    n_objects: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EnvFeatures {
    pub fn new(env: &Environment, lex: &Lexicon) -> Self {
        let stats = env.stats();
        let dim = lex.total_dim();
        let mut data = vec![0.0; env.len() * dim];
        for (o, obj) in env.objects.iter().enumerate() {
            let row = &mut data[o * dim..(o + 1) * dim];
            for sym in 0..lex.len() {
                let off = lex.offset(sym);
                write_symbol_features(lex, sym, &obj.features, &stats, &mut row[off..off + lex.dim(sym)]);
            }
        }
        EnvFeatures {
            n_objects: env.len(),
            dim,
            data,
        }
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// φ(o) over the whole layout.
    pub fn object(&self, o: usize) -> &[f64] {
        &self.data[o * self.dim..(o + 1) * self.dim]
    }

    pub fn score(&self, o: usize, desc: &Description, lex: &Lexicon, beta: &[f64]) -> f64 {
        let row = self.object(o);
        let mut s = 0.0;
        for sym in desc.iter() {
            let off = lex.offset(sym);
            for k in off..off + lex.dim(sym) {
                s += row[k] * beta[k];
            }
        }
        s
    }

    pub fn scores(&self, desc: &Description, lex: &Lexicon, beta: &[f64]) -> Vec<f64> {
        (0..self.n_objects)
            .map(|o| self.score(o, desc, lex, beta))
            .collect()
    }
}

/// Max-shifted log-sum-exp.
pub fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

fn check_symbols(desc: &Description, params: &ModelParams) -> Result<()> {
    params.check()?;
    if let Some(s) = desc.iter().find(|&s| s >= params.lexicon.len()) {
        return Err(Error::DimensionMismatch(format!(
            "description symbol {s} outside a lexicon of {}",
            params.lexicon.len()
        )));
    }
    Ok(())
}

/// Σ_{σ∈D} φ_σ(o)ᵀβ_σ.
pub fn object_score(
    obj_index: usize,
    desc: &Description,
    env: &Environment,
    params: &ModelParams,
) -> Result<f64> {
    check_symbols(desc, params)?;
    if obj_index >= env.len() {
        return Err(Error::UnknownObject(format!("index {obj_index}")));
    }
    let feats = EnvFeatures::new(env, &params.lexicon);
    Ok(feats.score(obj_index, desc, &params.lexicon, &params.beta))
}

pub fn posterior(desc: &Description, env: &Environment, params: &ModelParams) -> Result<Posterior> {
    check_symbols(desc, params)?;
    if env.is_empty() {
        return Err(Error::InvalidEnvironment(format!("{} has no objects", env.id)));
    }
    let feats = EnvFeatures::new(env, &params.lexicon);
    let scores = feats.scores(desc, &params.lexicon, &params.beta);
    Ok(Posterior {
        probs: softmax(&scores),
    })
}

/// −log posterior(o), evaluated as log-sum-exp minus the object's score.
pub fn nll(obj_index: usize, desc: &Description, env: &Environment, params: &ModelParams) -> Result<f64> {
    check_symbols(desc, params)?;
    if obj_index >= env.len() {
        return Err(Error::UnknownObject(format!("index {obj_index}")));
    }
    let feats = EnvFeatures::new(env, &params.lexicon);
    let scores = feats.scores(desc, &params.lexicon, &params.beta);
    Ok(log_sum_exp(&scores) - scores[obj_index])
}
