use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use blockid::dataset::{cross_validate, evaluate, metrics_table, SplitMode};
use blockid::grasp::{grasp_pose, PointCloud};
use blockid::identify::Identifier;
use blockid::render::render_scene;
use blockid::synth::{default_shape, generate_corpus, rasterize, CorpusSpec};
use blockid::training::{fit, Init, ModelFile};
use blockid::{default_lexicon, Corpus, Error, EvalMetrics, FitConfig, Method, ModelParams, TaskFilter};
use serde::Serialize;

use crate::args::{
    Cli, Command, CvArgs, EvalArgs, FitArgs, GraspArgs, IdentifyArgs, InitArg, MethodArg, ModeArg, RenderArgs,
    ServeArgs, SynthArgs, TrainArgs,
};
use crate::Failure;

type CmdResult = Result<(), Failure>;

pub fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Cv(a) => cv(cli, a),
        Command::Identify(a) => identify(cli, a),
        Command::Render(a) => render(cli, a),
        Command::Grasp(a) => grasp(a),
        Command::Serve(a) => serve(cli, a),
    }
}

fn info(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable report"));
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::InvalidConfig(msg.into()))
}

pub fn parse_env_counts(s: &str) -> Result<[usize; 5], Failure> {
    let counts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(format!("--envs: expected five comma-separated counts, got '{s}'")))?;
    counts
        .try_into()
        .map_err(|_| invalid(format!("--envs: expected five comma-separated counts, got '{s}'")))
}

pub fn load_model(path: &Path) -> Result<ModelParams, Failure> {
    Ok(ModelFile::load(path)?.params()?)
}

pub fn load_identifier(model: &Path, corpus: &Path) -> Result<Identifier, Failure> {
    let params = load_model(model)?;
    let corpus = Corpus::load(corpus, &params.lexicon)?;
    Ok(Identifier::new(params, corpus)?)
}

fn fit_config(cli: &Cli, a: &FitArgs) -> FitConfig {
    FitConfig {
        method: match a.method {
            MethodArg::Bfgs => Method::Bfgs,
            MethodArg::Newton => Method::Newton,
        },
        grad_tol: a.tol,
        max_iters: a.max_iters,
        ridge: a.ridge,
        init: match a.init {
            InitArg::Zeros => Init::Zeros,
            InitArg::Gaussian => Init::Gaussian { seed: cli.seed },
        },
    }
}

#[derive(Serialize)]
struct SynthSummary<'a> {
    out: &'a Path,
    environments: usize,
    tasks: usize,
    seed: u64,
}

fn synth(cli: &Cli, a: &SynthArgs) -> CmdResult {
    let lex = default_lexicon();
    let spec = CorpusSpec {
        envs_per_category: parse_env_counts(&a.envs)?,
        descriptions_per_object: a.descriptions,
        replicas: a.replicas,
        noise: a.noise,
        seed: cli.seed,
        shapes: [1, 2, 3, 4, 5].map(default_shape),
    };
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(invalid("--noise must be a finite non-negative number"));
    }
    let corpus = generate_corpus(&spec, &lex)?;
    corpus.save(&a.out, &lex)?;
    if let Some(dir) = &a.rasters {
        if a.width == 0 || a.height == 0 {
            return Err(invalid("--width and --height must be positive"));
        }
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        for env in &corpus.environments {
            let (img, mask) = rasterize(env, a.width, a.height);
            img.save(&dir.join(format!("{}.ppm", env.id)))?;
            mask.save(&dir.join(format!("{}.mask.pgm", env.id)))?;
        }
    }
    let summary = SynthSummary {
        out: &a.out,
        environments: corpus.environments.len(),
        tasks: corpus.tasks.len(),
        seed: cli.seed,
    };
    if cli.json {
        print_json(&summary);
    } else {
        println!(
            "{} environments, {} tasks -> {}",
            summary.environments,
            summary.tasks,
            a.out.display()
        );
    }
    Ok(())
}

fn train(cli: &Cli, a: &TrainArgs) -> CmdResult {
    let lex = default_lexicon();
    let corpus = Corpus::load(&a.corpus, &lex)?;
    let config = fit_config(cli, &a.fit);
    info(cli, format!("fitting {} tasks", corpus.tasks.len()));
    let (params, report) = fit(&lex, &corpus.tasks, &corpus.environments, &config)?;
    ModelFile::new(&params, config.ridge, Some(report.clone())).save(&a.out)?;
    if cli.json {
        print_json(&report);
    } else {
        println!(
            "method {:?}  iterations {}  loss {:.6}  |grad| {:.2e}  converged {}",
            report.method, report.iterations, report.final_loss, report.grad_norm, report.converged
        );
    }
    if report.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "no convergence after {} iterations (|grad| {:.3e}); model saved to {}",
            report.iterations,
            report.grad_norm,
            a.out.display()
        )))
    }
}

#[derive(Serialize)]
struct Row {
    group: String,
    #[serde(flatten)]
    metrics: EvalMetrics,
}

#[derive(Serialize)]
struct EvalReport {
    rows: Vec<Row>,
    aggregate: EvalMetrics,
}

fn eval(cli: &Cli, a: &EvalArgs) -> CmdResult {
    let params = match &a.model {
        Some(p) => load_model(p)?,
        None => ModelParams::zeros(default_lexicon()),
    };
    let corpus = Corpus::load(&a.corpus, &params.lexicon)?;
    let filter = match &a.filter {
        Some(f) => TaskFilter::parse(f).ok_or_else(|| invalid(format!("--filter: expected env=ID or cat=ID, got '{f}'")))?,
        None => TaskFilter::All,
    };
    let aggregate = evaluate(&params, &corpus, &filter)?;
    let with_tasks: BTreeSet<&str> = corpus.tasks.iter().map(|t| t.env_id.as_str()).collect();
    let mut rows = Vec::new();
    for env in &corpus.environments {
        let selected = match &filter {
            TaskFilter::All => true,
            TaskFilter::Env(id) => &env.id == id,
            TaskFilter::Category(c) => &env.category == c,
            TaskFilter::Envs(ids) => ids.contains(&env.id),
        };
        if selected && with_tasks.contains(env.id.as_str()) {
            rows.push(Row {
                group: env.id.clone(),
                metrics: evaluate(&params, &corpus, &TaskFilter::Env(env.id.clone()))?,
            });
        }
    }
    if cli.json {
        print_json(&EvalReport { rows, aggregate });
    } else {
        let mut table: Vec<(String, EvalMetrics)> = rows.into_iter().map(|r| (r.group, r.metrics)).collect();
        table.push(("avg".into(), aggregate));
        print!("{}", metrics_table("env", &table));
    }
    Ok(())
}

fn cv(cli: &Cli, a: &CvArgs) -> CmdResult {
    let lex = default_lexicon();
    let corpus = Corpus::load(&a.corpus, &lex)?;
    let mode = match a.mode {
        ModeArg::Env => SplitMode::Env,
        ModeArg::Cat => SplitMode::Category,
    };
    let report = cross_validate(&lex, &corpus, &fit_config(cli, &a.fit), mode)?;
    for f in report.folds.iter().filter(|f| !f.fit.converged) {
        info(cli, format!("warning: fold {} stopped at |grad| {:.2e}", f.group, f.fit.grad_norm));
    }
    if cli.json {
        print_json(&report);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn identify(cli: &Cli, a: &IdentifyArgs) -> CmdResult {
    let id = load_identifier(&a.model, &a.corpus)?;
    id.env(&a.env)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    crate::repl::run(&id, &a.env, cli.json, stdin.lock(), stdout.lock())
        .map_err(|e| Failure::Runtime(format!("console i/o: {e}")))
}

fn render(cli: &Cli, a: &RenderArgs) -> CmdResult {
    if a.width == 0 || a.height == 0 {
        return Err(invalid("--width and --height must be positive"));
    }
    let img = match (&a.model, &a.desc) {
        (Some(model), Some(desc)) => {
            let id = load_identifier(model, &a.corpus)?;
            let env = id.env(&a.env)?;
            let tokens: Vec<&str> = desc.split_whitespace().collect();
            let d = id.lexicon().parse_description(&tokens)?;
            let post = blockid::model::posterior(&d, env, &id.params)?;
            render_scene(env, Some(&post.probs), a.width, a.height)
        }
        _ => {
            let corpus = Corpus::load(&a.corpus, &default_lexicon())?;
            let env = corpus
                .env(&a.env)
                .ok_or_else(|| Error::UnknownEnvironment(a.env.clone()))?;
            render_scene(env, None, a.width, a.height)
        }
    };
    img.save(&a.out)?;
    info(cli, format!("wrote {}", a.out.display()));
    Ok(())
}

fn grasp(a: &GraspArgs) -> CmdResult {
    let cloud = PointCloud::load(&a.points)?;
    print_json(&grasp_pose(&cloud)?);
    Ok(())
}

fn serve(cli: &Cli, a: &ServeArgs) -> CmdResult {
    let id = load_identifier(&a.model, &a.corpus)?;
    let app = crate::service::router(id, a.static_dir.as_deref());
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure::Runtime(format!("bind {addr}: {e}")))?;
        info(cli, format!("listening on http://{addr}"));
        axum::serve(listener, app)
            .await
            .map_err(|e| Failure::Runtime(e.to_string()))
    })
}
