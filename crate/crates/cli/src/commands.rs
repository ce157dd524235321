use std::io::Write;
use std::path::Path;

use nextstep_core::evaluator::{detect_reorientations, evaluate, render_table};
use nextstep_core::ingest::{load_corpus_str, write_corpus_jsonl};
use nextstep_core::json::to_canonical_string;
use nextstep_core::synthgen::{generate, GenParams};
use nextstep_core::{
    AliasTable, EvalReport, FrequencyModel, Method, StepKind, Taxonomies, Taxonomy, Trajectory,
};
use nextstep_service::{AppState, ServiceConfig};

use crate::error::CliError;
use crate::{Command, Settings};

const DEFAULT_BIND: &str = "127.0.0.1:8080";
const DEFAULT_THRESHOLD: usize = 6;

pub fn dispatch(command: &Command, s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Gen => gen(s, out),
        Command::Ingest => ingest(s, out),
        Command::Train => train(s, out),
        Command::Predict {
            context,
            model,
            top,
        } => predict(s, context, model.as_deref(), *top, out),
        Command::Evaluate { histogram_dir } => evaluate_cmd(s, histogram_dir.as_deref(), out),
        Command::Reorient => reorient(s, out),
        Command::Serve { bind } => serve(s, bind.as_deref()),
    }
}

fn service_config(s: &Settings) -> ServiceConfig {
    ServiceConfig {
        corpus: s.corpus.clone(),
        taxonomy_diploma: s.taxonomy_diploma.clone(),
        taxonomy_job: s.taxonomy_job.clone(),
        aliases: s.aliases.clone(),
    }
}

fn taxonomies(s: &Settings) -> Result<Taxonomies, CliError> {
    Ok(service_config(s).taxonomies()?)
}

fn corpus(s: &Settings, taxonomies: &Taxonomies) -> Result<(Vec<Trajectory>, nextstep_core::CorpusStats), CliError> {
    let path = s
        .corpus
        .as_deref()
        .ok_or_else(|| CliError::Usage("--corpus is required".into()))?;
    let aliases = match &s.aliases {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            AliasTable::from_csv_str(&text)?
        }
        None => AliasTable::new(),
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(load_corpus_str(&text, &aliases, taxonomies)?)
}

fn require_kind(s: &Settings) -> Result<StepKind, CliError> {
    s.kind
        .ok_or_else(|| CliError::Usage("--kind is required (diploma or job)".into()))
}

fn jobs(s: &Settings) -> usize {
    s.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Writes to `--out` when given, else to `out`.
fn emit(s: &Settings, out: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match &s.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => out
            .write_all(bytes)
            .map_err(|e| CliError::Data(format!("writing output: {e}"))),
    }
}

fn gen(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let defaults = GenParams::default();
    let params = GenParams {
        seed: s.seed.unwrap_or(defaults.seed),
        n_users: s.users.unwrap_or(defaults.n_users),
        ..defaults
    };
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = generate(&params)?;
    let mut buf = Vec::new();
    write_corpus_jsonl(&corpus, &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
    emit(s, out, &buf)
}

fn ingest(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let tax = taxonomies(s)?;
    let (corpus, stats) = corpus(s, &tax)?;
    if let Some(path) = &s.out {
        let mut buf = Vec::new();
        write_corpus_jsonl(&corpus, &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
        std::fs::write(path, buf).map_err(|e| CliError::io(path, e))?;
    }
    let text = if s.json {
        canonical(&stats)?
    } else {
        format!(
            "users: {}\nsteps: {}\ndiploma_steps: {}\njob_steps: {}\nmean_steps_per_user: {:.2}\ndropped_profiles: {}\ndropped_steps: {}\n",
            stats.users,
            stats.steps,
            stats.diploma_steps,
            stats.job_steps,
            stats.mean_steps_per_user,
            stats.dropped_profiles,
            stats.dropped_steps
        )
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(e.to_string()))
}

fn train(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let kind = require_kind(s)?;
    let method = s
        .method
        .ok_or_else(|| CliError::Usage("--method is required".into()))?;
    let tax = taxonomies(s)?;
    let (corpus, _) = corpus(s, &tax)?;
    let model = FrequencyModel::train(&corpus, tax.for_kind(kind), method)?;
    emit(s, out, model.to_dump_string().as_bytes())
}

fn check_model(model: &FrequencyModel, tax: &Taxonomy) -> Result<(), CliError> {
    if model.target_kind() != tax.domain() || model.width() != tax.len() {
        return Err(CliError::Data(format!(
            "model targets {} concepts of kind {}, taxonomy has {} of kind {}",
            model.width(),
            model.target_kind(),
            tax.len(),
            tax.domain()
        )));
    }
    Ok(())
}

fn predict(
    s: &Settings,
    context: &[nextstep_core::ConceptId],
    model_path: Option<&Path>,
    top: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let taxes = taxonomies(s)?;
    for c in context {
        if !taxes.contains(*c) {
            return Err(CliError::Data(format!("unknown concept {c}")));
        }
    }
    let model = match model_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            FrequencyModel::from_dump_str(&text)?
        }
        None => {
            let kind = require_kind(s)?;
            let (corpus, _) = corpus(s, &taxes)?;
            FrequencyModel::train(&corpus, taxes.for_kind(kind), s.method.unwrap_or(Method::PreviousStep))?
        }
    };
    let tax = taxes.for_kind(model.target_kind());
    check_model(&model, tax)?;
    let ctx = (!context.is_empty()).then_some(context);
    let mut pred = model.rank(ctx, tax);
    if let Some(n) = top {
        pred.hypotheses.truncate(n);
    }
    let text = if s.json {
        canonical(&pred)?
    } else {
        let mut t = String::from("Rank | Concept | Label | Score | Count\n");
        for (i, h) in pred.hypotheses.iter().enumerate() {
            t.push_str(&format!(
                "{} | {} | {} | {} | {}\n",
                i + 1,
                h.concept,
                tax.label(h.concept).unwrap_or_default(),
                h.score,
                h.count
            ));
        }
        t
    };
    emit(s, out, text.as_bytes())
}

fn evaluate_cmd(s: &Settings, histogram_dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let tax = taxonomies(s)?;
    let (corpus, _) = corpus(s, &tax)?;
    let kinds = match s.kind {
        Some(k) => vec![k],
        None => StepKind::ALL.to_vec(),
    };
    let mut sections: Vec<(StepKind, Vec<EvalReport>)> = Vec::new();
    for kind in kinds {
        let methods = match s.method {
            Some(m) => vec![m],
            None => Method::report_set(kind).to_vec(),
        };
        let reports = methods
            .into_iter()
            .map(|m| evaluate(&corpus, tax.for_kind(kind), m, &s.score, jobs(s)))
            .collect::<Result<Vec<_>, _>>()?;
        sections.push((kind, reports));
    }
    if let Some(dir) = histogram_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for r in sections.iter().flat_map(|(_, rs)| rs) {
            let path = dir.join(format!("{}-{}.csv", r.target_kind, r.method.token()));
            std::fs::write(&path, r.histogram_csv()).map_err(|e| CliError::io(&path, e))?;
        }
    }
    let text = if s.json {
        let all: Vec<&EvalReport> = sections.iter().flat_map(|(_, rs)| rs).collect();
        match all.as_slice() {
            [single] => single.to_json(),
            many => canonical(&many)?,
        }
    } else if sections.len() == 1 {
        render_table(&sections[0].1)
    } else {
        sections
            .iter()
            .map(|(kind, rs)| format!("# {kind}\n{}", render_table(rs)))
            .collect::<Vec<_>>()
            .join("\n")
    };
    emit(s, out, text.as_bytes())
}

fn reorient(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let tax = taxonomies(s)?;
    let (corpus, _) = corpus(s, &tax)?;
    let kind = s.kind.unwrap_or(StepKind::Job);
    let method = s.method.unwrap_or(Method::PreviousStep);
    let threshold = s.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let flags = detect_reorientations(&corpus, tax.for_kind(kind), method, &s.score, threshold, jobs(s))?;
    let text = if s.json {
        canonical(&flags)?
    } else {
        let mut t = String::from("User | Step | Rank | Threshold\n");
        for f in &flags {
            t.push_str(&format!(
                "{} | {} | {} | {}\n",
                f.user_id, f.step_index, f.rank_of_truth, f.threshold
            ));
        }
        t
    };
    emit(s, out, text.as_bytes())
}

fn serve(s: &Settings, bind: Option<&str>) -> Result<(), CliError> {
    let addr = bind
        .or(s.bind.as_deref())
        .unwrap_or(DEFAULT_BIND)
        .parse()
        .map_err(|e| CliError::Usage(format!("--bind: {e}")))?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let config = service_config(s);
    let mut state = AppState::new(config.load()?);
    state.config = Some(config);
    if let Some(n) = s.jobs {
        state.eval_threads = n.max(1);
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime
        .block_on(nextstep_service::serve(addr, state))
        .map_err(|e| CliError::Data(format!("serve: {e}")))
}

fn canonical<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    to_canonical_string(value).map_err(|e| CliError::Data(e.to_string()))
}
