//! Identification queries shared by the console REPL and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::dataset::Corpus;
use crate::lexicon::Lexicon;
use crate::model::{posterior, Environment, ModelParams, SceneBlock};
use crate::synth::{oracle_select, oracle_truth, scene_blocks};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedObject {
    pub object_id: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyResponse {
    /// Sorted by decreasing probability; ties keep object order.
    pub posterior: Vec<RankedObject>,
    /// Nats.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolInfo {
    pub name: String,
    pub index: usize,
    pub channels: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvSummary {
    pub id: String,
    pub category: String,
    pub n_objects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvDetail {
    pub id: String,
    pub category: String,
    pub object_ids: Vec<String>,
    pub scene: Vec<SceneBlock>,
}

/// A trained model bound to a corpus of environments. Immutable once built.
#[derive(Debug, Clone)]
pub struct Identifier {
    pub params: ModelParams,
    pub corpus: Corpus,
}

impl Identifier {
    pub fn new(params: ModelParams, corpus: Corpus) -> Result<Self> {
        params.check()?;
        Ok(Identifier { params, corpus })
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.params.lexicon
    }

    pub fn env(&self, id: &str) -> Result<&Environment> {
        self.corpus
            .env(id)
            .ok_or_else(|| Error::UnknownEnvironment(id.to_string()))
    }

    pub fn identify<S: AsRef<str>>(&self, env_id: &str, tokens: &[S]) -> Result<IdentifyResponse> {
        let env = self.env(env_id)?;
        let desc = self.lexicon().parse_description(tokens)?;
        let post = posterior(&desc, env, &self.params)?;
        let entropy = post.entropy();
        let posterior = post
            .ranking()
            .into_iter()
            .map(|o| RankedObject {
                object_id: env.objects[o].id.clone(),
                prob: post.probs[o],
            })
            .collect();
        Ok(IdentifyResponse { posterior, entropy })
    }

    /// Objects the oracle identifier would pick, recomputed from features.
    pub fn oracle<S: AsRef<str>>(&self, env_id: &str, tokens: &[S]) -> Result<Vec<String>> {
        let env = self.env(env_id)?;
        let desc = self.lexicon().parse_description(tokens)?;
        let truth = oracle_truth(env, self.lexicon());
        Ok(oracle_select(&truth, &desc)
            .into_iter()
            .map(|o| env.objects[o].id.clone())
            .collect())
    }

    pub fn symbols(&self) -> Vec<SymbolInfo> {
        let lex = self.lexicon();
        lex.symbols()
            .iter()
            .map(|s| SymbolInfo {
                name: s.name.clone(),
                index: s.index,
                channels: lex.channels(s.index).iter().map(|c| c.name()).collect(),
            })
            .collect()
    }

    pub fn environments(&self) -> Vec<EnvSummary> {
        self.corpus
            .environments
            .iter()
            .map(|e| EnvSummary {
                id: e.id.clone(),
                category: e.category.clone(),
                n_objects: e.len(),
            })
            .collect()
    }

    pub fn environment(&self, id: &str) -> Result<EnvDetail> {
        let env = self.env(id)?;
        Ok(EnvDetail {
            id: env.id.clone(),
            category: env.category.clone(),
            object_ids: env.objects.iter().map(|o| o.id.clone()).collect(),
            scene: scene_blocks(env),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::default_lexicon;
    use crate::synth::{generate_corpus, CorpusSpec};

    fn identifier() -> Identifier {
        let lex = default_lexicon();
        let spec = CorpusSpec {
            envs_per_category: [1, 1, 0, 0, 0],
            replicas: 1,
            ..CorpusSpec::default()
        };
        let corpus = generate_corpus(&spec, &lex).unwrap();
        Identifier::new(ModelParams::zeros(lex), corpus).unwrap()
    }

    #[test]
    fn empty_description_is_uniform() {
        let id = identifier();
        let r = id.identify::<&str>("1.1", &[]).unwrap();
        assert_eq!(r.posterior.len(), 3);
        assert!(r.posterior.iter().all(|o| (o.prob - 1.0 / 3.0).abs() < 1e-12));
        assert!((r.entropy - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unknown_inputs() {
        let id = identifier();
        assert!(matches!(id.identify("9.9", &["left"]), Err(Error::UnknownEnvironment(_))));
        assert!(matches!(id.identify("1.1", &["purple"]), Err(Error::UnknownSymbol(t)) if t == "purple"));
    }

    #[test]
    fn environment_detail() {
        let id = identifier();
        let d = id.environment("2.1").unwrap();
        assert_eq!(d.object_ids.len(), d.scene.len());
        assert_eq!(id.environments().len(), 2);
        assert_eq!(id.symbols().len(), 15);
    }
}
