use blockid::dataset::{cross_validate, evaluate, split, SplitMode};
use blockid::synth::{generate_corpus, CorpusSpec};
use blockid::training::{fit, ModelFile};
use blockid::{default_lexicon, Corpus, FitConfig, Method, ModelParams, TaskFilter};

fn small_spec() -> CorpusSpec {
    CorpusSpec {
        envs_per_category: [2, 2, 1, 1, 1],
        replicas: 3,
        ..CorpusSpec::default()
    }
}

#[test]
fn synth_save_load_train_evaluate() {
    let lex = default_lexicon();
    let corpus = generate_corpus(&small_spec(), &lex).unwrap();
    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("corpus.json");
    corpus.save(&path, &lex).unwrap();
    let loaded = Corpus::load(&path, &lex).unwrap();
    assert_eq!(loaded, corpus);

    let (params, report) = fit(&lex, &loaded.tasks, &loaded.environments, &FitConfig::default()).unwrap();
    assert!(report.converged);
    assert!(report.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));

    let trained = evaluate(&params, &loaded, &TaskFilter::All).unwrap();
    let baseline = evaluate(&ModelParams::zeros(lex.clone()), &loaded, &TaskFilter::All).unwrap();
    assert!(trained.t_lklh > baseline.t_lklh);
    assert!(trained.kl < baseline.kl);

    let model_path = dir.path().join("model.json");
    ModelFile::new(&params, 1e-6, Some(report)).save(&model_path).unwrap();
    let again = ModelFile::load(&model_path).unwrap().params().unwrap();
    assert_eq!(evaluate(&again, &loaded, &TaskFilter::All).unwrap(), trained);
}

#[test]
fn newton_and_bfgs_agree_on_small_corpus() {
    let lex = default_lexicon();
    let corpus = generate_corpus(&small_spec(), &lex).unwrap();
    let run = |method| {
        let config = FitConfig {
            method,
            ..FitConfig::default()
        };
        fit(&lex, &corpus.tasks, &corpus.environments, &config).unwrap()
    };
    let (pb, rb) = run(Method::Bfgs);
    let (pn, rn) = run(Method::Newton);
    assert!((rb.final_loss - rn.final_loss).abs() < 1e-8);
    assert!(rn.iterations < rb.iterations);
    for (a, b) in pb.beta.iter().zip(&pn.beta) {
        assert!((a - b).abs() < 1e-3);
    }
}

#[test]
fn folds_partition_tasks_and_groups() {
    let lex = default_lexicon();
    let corpus = generate_corpus(&small_spec(), &lex).unwrap();
    for mode in [SplitMode::Env, SplitMode::Category] {
        let folds = split(&corpus, mode).unwrap();
        let mut seen = vec![0usize; corpus.tasks.len()];
        for f in &folds {
            for &t in &f.test {
                seen[t] += 1;
            }
            assert_eq!(f.train.len() + f.test.len(), corpus.tasks.len());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
    let report = cross_validate(&lex, &corpus, &FitConfig::default(), SplitMode::Category).unwrap();
    assert_eq!(report.folds.len(), 5);
    let total: usize = report.folds.iter().map(|f| f.metrics.n_tasks).sum();
    assert_eq!(total, report.aggregate.n_tasks);
    let pooled: f64 = report
        .folds
        .iter()
        .map(|f| f.metrics.t_lklh * f.metrics.n_tasks as f64)
        .sum::<f64>()
        / total as f64;
    assert!((pooled - report.aggregate.t_lklh).abs() < 1e-12);
    let again = cross_validate(&lex, &corpus, &FitConfig::default(), SplitMode::Category).unwrap();
    assert_eq!(report.to_table(), again.to_table());
}
