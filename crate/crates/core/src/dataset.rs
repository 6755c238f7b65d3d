//! Corpus files, evaluation metrics and grouped cross-validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::lexicon::Lexicon;
use crate::model::{log_sum_exp, EnvFeatures, Environment, ModelParams};
use crate::training::{fit, target_distribution, FitConfig, FitReport};
use crate::{Error, Result};

pub use crate::training::IdentificationTask;

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub environments: Vec<Environment>,
    pub tasks: Vec<IdentificationTask>,
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    env_id: String,
    symbols: Vec<String>,
    selected: Vec<String>,
}

#[derive(Deserialize)]
struct RawDoc<'a> {
    #[serde(borrow)]
    environments: Vec<&'a RawValue>,
    #[serde(borrow)]
    tasks: Vec<&'a RawValue>,
}

fn line_of(text: &str, part: &str) -> usize {
    let offset = part.as_ptr() as usize - text.as_ptr() as usize;
    1 + text.as_bytes()[..offset].iter().filter(|&&b| b == b'\n').count()
}

impl Corpus {
    pub fn env(&self, id: &str) -> Option<&Environment> {
        self.environments.iter().find(|e| e.id == id)
    }

    /// Category name → environment ids, both sorted.
    pub fn categories(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in &self.environments {
            out.entry(e.category.clone()).or_default().push(e.id.clone());
        }
        for ids in out.values_mut() {
            ids.sort();
        }
        out
    }

    /// Serializes with one environment and one task per line, in stored order.
    pub fn to_json(&self, lex: &Lexicon) -> String {
        let mut s = String::from("{\n  \"environments\": [\n");
        for (i, e) in self.environments.iter().enumerate() {
            let sep = if i + 1 < self.environments.len() { "," } else { "" };
            let _ = writeln!(s, "    {}{sep}", serde_json::to_string(e).expect("env serializes"));
        }
        s.push_str("  ],\n  \"tasks\": [\n");
        for (i, t) in self.tasks.iter().enumerate() {
            let rec = TaskRecord {
                env_id: t.env_id.clone(),
                symbols: lex.render(&t.desc),
                selected: t.selected.clone(),
            };
            let sep = if i + 1 < self.tasks.len() { "," } else { "" };
            let _ = writeln!(s, "    {}{sep}", serde_json::to_string(&rec).expect("task serializes"));
        }
        s.push_str("  ]\n}\n");
        s
    }

    /// Parses and validates a corpus document. Targets are rebuilt from the
    /// selected sets.
    pub fn from_json(text: &str, file: &str, lex: &Lexicon) -> Result<Corpus> {
        let schema = |line: usize, field: String, message: String| Error::Schema {
            file: file.into(),
            line,
            field,
            message,
        };
        let doc: RawDoc = serde_json::from_str(text)
            .map_err(|e| schema(e.line(), "document".into(), e.to_string()))?;

        let mut environments = Vec::with_capacity(doc.environments.len());
        let mut env_lines = HashMap::new();
        for (i, raw) in doc.environments.iter().enumerate() {
            let line = line_of(text, raw.get());
            let env: Environment = serde_json::from_str(raw.get())
                .map_err(|e| schema(line + e.line() - 1, format!("environments[{i}]"), e.to_string()))?;
            if env_lines.insert(env.id.clone(), line).is_some() {
                return Err(Error::DuplicateId {
                    file: file.into(),
                    line,
                    id: env.id,
                });
            }
            let mut ids = HashSet::new();
            for o in &env.objects {
                if !ids.insert(o.id.as_str()) {
                    return Err(Error::DuplicateId {
                        file: file.into(),
                        line,
                        id: format!("{}/{}", env.id, o.id),
                    });
                }
            }
            env.validate()
                .map_err(|m| schema(line, format!("environments[{i}]"), m))?;
            environments.push(env);
        }
        let index: HashMap<&str, usize> = environments
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect();

        let mut tasks = Vec::with_capacity(doc.tasks.len());
        for (i, raw) in doc.tasks.iter().enumerate() {
            let line = line_of(text, raw.get());
            let rec: TaskRecord = serde_json::from_str(raw.get())
                .map_err(|e| schema(line + e.line() - 1, format!("tasks[{i}]"), e.to_string()))?;
            let env = match index.get(rec.env_id.as_str()) {
                Some(&ei) => &environments[ei],
                None => {
                    return Err(Error::DanglingEnvRef {
                        file: file.into(),
                        line,
                        env_id: rec.env_id,
                    })
                }
            };
            let desc = lex
                .parse_description(&rec.symbols)
                .map_err(|e| schema(line, format!("tasks[{i}].symbols"), e.to_string()))?;
            let mut seen = HashSet::new();
            for id in &rec.selected {
                if env.object_index(id).is_none() {
                    return Err(schema(
                        line,
                        format!("tasks[{i}].selected"),
                        format!("object {id} not in environment {}", env.id),
                    ));
                }
                if !seen.insert(id.as_str()) {
                    return Err(schema(
                        line,
                        format!("tasks[{i}].selected"),
                        format!("object {id} listed twice"),
                    ));
                }
            }
            let target = target_distribution(&rec.selected, env)
                .map_err(|e| schema(line, format!("tasks[{i}].selected"), e.to_string()))?;
            tasks.push(IdentificationTask {
                env_id: rec.env_id,
                desc,
                selected: rec.selected,
                target,
            });
        }
        Ok(Corpus {
            environments,
            tasks,
        })
    }

    pub fn save(&self, path: &Path, lex: &Lexicon) -> Result<()> {
        std::fs::write(path, self.to_json(lex)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, lex: &Lexicon) -> Result<Corpus> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Corpus::from_json(&text, &path.display().to_string(), lex)
    }

    fn env_index(&self) -> HashMap<&str, usize> {
        self.environments
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect()
    }
}

pub fn load_corpus(path: &Path, lex: &Lexicon) -> Result<Corpus> {
    Corpus::load(path, lex)
}

pub fn save_corpus(corpus: &Corpus, path: &Path, lex: &Lexicon) -> Result<()> {
    corpus.save(path, lex)
}

/// Which tasks an evaluation covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskFilter {
    All,
    Env(String),
    Category(String),
    Envs(BTreeSet<String>),
}

impl TaskFilter {
    /// Parses `env=ID` or `cat=ID`.
    pub fn parse(s: &str) -> Option<TaskFilter> {
        let (k, v) = s.split_once('=')?;
        match k {
            "env" => Some(TaskFilter::Env(v.into())),
            "cat" | "category" => Some(TaskFilter::Category(v.into())),
            _ => None,
        }
    }

    fn matches(&self, env: &Environment) -> bool {
        match self {
            TaskFilter::All => true,
            TaskFilter::Env(id) => &env.id == id,
            TaskFilter::Category(c) => &env.category == c,
            TaskFilter::Envs(ids) => ids.contains(&env.id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean posterior mass on the selected objects.
    pub t_lklh: f64,
    /// Mean KL(p‖q) in nats.
    pub kl: f64,
    /// Mean qᵀp, reported alongside `t_lklh`.
    pub qtp: f64,
    pub n_tasks: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    t_lklh: f64,
    kl: f64,
    qtp: f64,
    n: usize,
}

impl Sums {
    fn add(&mut self, o: Sums) {
        self.t_lklh += o.t_lklh;
        self.kl += o.kl;
        self.qtp += o.qtp;
        self.n += o.n;
    }

    fn metrics(self) -> EvalMetrics {
        let n = self.n as f64;
        EvalMetrics {
            t_lklh: self.t_lklh / n,
            kl: self.kl / n,
            qtp: self.qtp / n,
            n_tasks: self.n,
        }
    }
}

fn score_tasks(params: &ModelParams, corpus: &Corpus, tasks: &[usize]) -> Result<Sums> {
    params.check()?;
    let index = corpus.env_index();
    let mut cache: HashMap<usize, EnvFeatures> = HashMap::new();
    let mut sums = Sums::default();
    for &ti in tasks {
        let t = &corpus.tasks[ti];
        let ei = *index
            .get(t.env_id.as_str())
            .ok_or_else(|| Error::UnknownEnvironment(t.env_id.clone()))?;
        let env = &corpus.environments[ei];
        let feats = cache
            .entry(ei)
            .or_insert_with(|| EnvFeatures::new(env, &params.lexicon));
        let scores = feats.scores(&t.desc, &params.lexicon, &params.beta);
        let lse = log_sum_exp(&scores);
        let mut kl = 0.0;
        let mut qtp = 0.0;
        for (&p, s) in t.target.iter().zip(&scores) {
            let logq = s - lse;
            if p > 0.0 {
                kl += p * (p.ln() - logq);
            }
            qtp += p * logq.exp();
        }
        let mass: f64 = t
            .selected
            .iter()
            .filter_map(|id| env.object_index(id))
            .map(|o| (scores[o] - lse).exp())
            .sum();
        sums.add(Sums {
            t_lklh: mass,
            kl,
            qtp,
            n: 1,
        });
    }
    Ok(sums)
}

pub fn evaluate(params: &ModelParams, corpus: &Corpus, filter: &TaskFilter) -> Result<EvalMetrics> {
    let index = corpus.env_index();
    let selected: Vec<usize> = corpus
        .tasks
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            index
                .get(t.env_id.as_str())
                .is_some_and(|&ei| filter.matches(&corpus.environments[ei]))
        })
        .map(|(i, _)| i)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(score_tasks(params, corpus, &selected)?.metrics())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Env,
    #[serde(rename = "cat")]
    Category,
}

/// Held-out group and the task indices on either side of the split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub group: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn split_by<F: Fn(&Environment) -> String>(corpus: &Corpus, key: F) -> Result<Vec<Fold>> {
    let index = corpus.env_index();
    let groups: BTreeSet<String> = corpus.environments.iter().map(&key).collect();
    if groups.len() < 2 {
        return Err(Error::TooFewGroups(groups.len()));
    }
    let task_group: Vec<String> = corpus
        .tasks
        .iter()
        .map(|t| {
            index
                .get(t.env_id.as_str())
                .map(|&ei| key(&corpus.environments[ei]))
                .ok_or_else(|| Error::UnknownEnvironment(t.env_id.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(groups
        .into_iter()
        .map(|g| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..corpus.tasks.len()).partition(|&i| task_group[i] == g);
            Fold {
                group: g,
                train,
                test,
            }
        })
        .collect())
}

/// One fold per environment, ordered by id.
pub fn split_leave_one_env(corpus: &Corpus) -> Result<Vec<Fold>> {
    split_by(corpus, |e| e.id.clone())
}

/// One fold per category, ordered by name.
pub fn split_leave_one_category(corpus: &Corpus) -> Result<Vec<Fold>> {
    split_by(corpus, |e| e.category.clone())
}

pub fn split(corpus: &Corpus, mode: SplitMode) -> Result<Vec<Fold>> {
    match mode {
        SplitMode::Env => split_leave_one_env(corpus),
        SplitMode::Category => split_leave_one_category(corpus),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub group: String,
    pub n_train: usize,
    pub metrics: EvalMetrics,
    pub fit: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mode: SplitMode,
    pub folds: Vec<FoldResult>,
    /// Pooled over every held-out task.
    pub aggregate: EvalMetrics,
}

impl CvReport {
    pub fn fold(&self, group: &str) -> Option<&FoldResult> {
        self.folds.iter().find(|f| f.group == group)
    }

    /// Aligned text table: one row per held-out group plus the pooled average.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, EvalMetrics)> = self
            .folds
            .iter()
            .map(|f| (f.group.clone(), f.metrics))
            .collect();
        rows.push(("avg".into(), self.aggregate));
        metrics_table(
            match self.mode {
                SplitMode::Env => "env",
                SplitMode::Category => "cat",
            },
            &rows,
        )
    }
}

pub fn metrics_table(header: &str, rows: &[(String, EvalMetrics)]) -> String {
    let width = rows
        .iter()
        .map(|(g, _)| g.len())
        .chain([header.len()])
        .max()
        .unwrap_or(0);
    let mut s = format!("{header:<width$}  {:>7}  {:>5}  {:>7}\n", "t_lklh", "KL", "tasks");
    for (g, m) in rows {
        let _ = writeln!(
            s,
            "{g:<width$}  {:>6.1}%  {:>5.2}  {:>7}",
            100.0 * m.t_lklh,
            m.kl,
            m.n_tasks
        );
    }
    s
}

/// Trains on each fold's complement and evaluates on the held-out group.
/// Folds run in parallel; the report keeps fold order.
pub fn cross_validate(
    lex: &Lexicon,
    corpus: &Corpus,
    config: &FitConfig,
    mode: SplitMode,
) -> Result<CvReport> {
    let folds = split(corpus, mode)?;
    let results: Vec<Result<Option<(FoldResult, Sums)>>> = folds
        .par_iter()
        .map(|fold| {
            if fold.test.is_empty() {
                return Ok(None);
            }
            let wrap = |e: Error| Error::Fold {
                fold: fold.group.clone(),
                source: Box::new(e),
            };
            let train: Vec<IdentificationTask> =
                fold.train.iter().map(|&i| corpus.tasks[i].clone()).collect();
            let (params, report) = fit(lex, &train, &corpus.environments, config).map_err(wrap)?;
            let sums = score_tasks(&params, corpus, &fold.test).map_err(wrap)?;
            Ok(Some((
                FoldResult {
                    group: fold.group.clone(),
                    n_train: fold.train.len(),
                    metrics: sums.metrics(),
                    fit: report,
                },
                sums,
            )))
        })
        .collect();
    let mut total = Sums::default();
    let mut out = Vec::new();
    for r in results {
        if let Some((fr, sums)) = r? {
            total.add(sums);
            out.push(fr);
        }
    }
    if total.n == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(CvReport {
        mode,
        folds: out,
        aggregate: total.metrics(),
    })
}
