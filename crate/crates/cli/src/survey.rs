//! survey pool | serve | export.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use distill_core::corpus::sample;
use distill_survey::{build_item_pool, AppState, Candidate, ItemPool, SurveyService};

use crate::error::CliError;
use crate::pipeline::{load_checkpoint, load_corpus, student_explanation};
use crate::run::{Ctx, Plan};

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// JSON array of candidates `{variant, question, predicted_answer, explanation}`.
    #[arg(long, conflicts_with = "checkpoint")]
    pub candidates: Option<PathBuf>,
    /// Checkpoints to draw explanations from, one per variant.
    #[arg(long, requires = "corpus")]
    pub checkpoint: Vec<PathBuf>,
    /// Questions shown to raters when generating from checkpoints.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn pool(ctx: &Ctx, a: PoolArgs) -> Result<(), CliError> {
    if a.candidates.is_none() && a.checkpoint.is_empty() {
        return Err(CliError::Config("survey pool needs --candidates or --checkpoint".into()));
    }
    let per_variant = ctx.config.survey.items_per_variant;
    let mut plan = Plan::new("survey pool", json!({ "items_per_variant": per_variant, "seed": ctx.config.survey.seed }));
    if let Some(c) = &a.candidates {
        plan = plan.input("candidates", c);
    }
    for c in &a.checkpoint {
        plan = plan
            .input("checkpoint weights", &c.join(distill_core::train::WEIGHTS_FILE))
            .input("checkpoint manifest", &c.join(distill_core::train::MANIFEST_FILE));
    }
    if let Some(c) = &a.corpus {
        plan = plan.input("corpus", c);
    }
    plan = plan.output_file(&a.out);
    ctx.execute(plan, || {
        let candidates: Vec<Candidate> = match &a.candidates {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(CliError::runtime)?;
                serde_json::from_slice(&bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?
            }
            None => {
                let corpus = a.corpus.as_ref().expect("clap enforces --corpus");
                let split = load_corpus(corpus, "test", false)?.split;
                let n = per_variant.min(split.len());
                let questions = sample(&split, n, ctx.config.survey.seed).map_err(CliError::runtime)?.questions;
                let mut out = Vec::new();
                for dir in &a.checkpoint {
                    let (manifest, student) = load_checkpoint(dir)?;
                    for q in &questions {
                        let (answer, explanation) =
                            student_explanation(&student, manifest.variant, q, manifest.config.max_gen_tokens);
                        if explanation.is_empty() {
                            eprintln!("warning: {} gave no explanation for {}; skipped", manifest.variant, q.id);
                            continue;
                        }
                        out.push(Candidate { variant: manifest.variant, question: q.clone(), predicted_answer: answer, explanation });
                    }
                }
                out
            }
        };
        let pool = build_item_pool(&candidates).map_err(CliError::runtime)?;
        pool.save(&a.out).map_err(CliError::runtime)?;
        let counts: Vec<String> = pool.counts().iter().map(|(v, n)| format!("{v}={n}")).collect();
        println!("{}: {} items ({})", a.out.display(), pool.items.len(), counts.join(", "));
        Ok(vec![a.out.clone()])
    })
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub pool: PathBuf,
    /// Append-only session journal; replayed on start.
    #[arg(long)]
    pub journal: PathBuf,
    /// Overrides `survey.addr`.
    #[arg(long)]
    pub addr: Option<String>,
}

fn open_service(ctx: &Ctx, pool: &PathBuf, journal: &PathBuf) -> Result<SurveyService, CliError> {
    let pool = ItemPool::load(pool).map_err(CliError::runtime)?;
    Ok(SurveyService::open(pool, ctx.config.survey.seed, journal)
        .map_err(CliError::runtime)?
        .with_show_choices(ctx.config.survey.show_choices))
}

pub fn serve(ctx: &Ctx, a: ServeArgs) -> Result<(), CliError> {
    let addr_text = a.addr.clone().unwrap_or_else(|| ctx.config.survey.addr.clone());
    let addr: SocketAddr = addr_text.parse().map_err(|e| CliError::Config(format!("address `{addr_text}`: {e}")))?;
    let var = &ctx.config.survey.operator_token_env;
    let token = std::env::var(var).unwrap_or_default();
    if token.trim().is_empty() && !ctx.dry_run {
        return Err(CliError::Config(format!("set {var} to the operator token for the export endpoint")));
    }
    let plan = Plan::new("survey serve", json!({ "addr": addr_text })).input("item pool", &a.pool).output_file(&a.journal);
    ctx.execute(plan, || {
        let service = open_service(ctx, &a.pool, &a.journal)?;
        let runtime = tokio::runtime::Runtime::new().map_err(CliError::runtime)?;
        eprintln!("survey service on http://{addr}");
        runtime.block_on(distill_survey::serve(AppState::new(service, token), addr)).map_err(CliError::runtime)?;
        Ok(vec![a.journal.clone()])
    })
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub journal: PathBuf,
    /// Ratings CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn export(ctx: &Ctx, a: ExportArgs) -> Result<(), CliError> {
    let plan = Plan::new("survey export", json!({}))
        .input("item pool", &a.pool)
        .input("session journal", &a.journal)
        .output_file(&a.out);
    ctx.execute(plan, || {
        let service = open_service(ctx, &a.pool, &a.journal)?;
        let csv = service.export_csv();
        std::fs::write(&a.out, &csv).map_err(CliError::runtime)?;
        let rows = service.export_ratings().len();
        println!("{}: {rows} rows from {} completed sessions", a.out.display(), rows / distill_survey::ITEMS_PER_SESSION);
        Ok(vec![a.out.clone()])
    })
}
