//! corpus, datagen, dataset, train and eval commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde_json::json;

use distill_core::corpus::{load_split_with, sample, DatasetSplit, LoadReport, MCQuestion, SplitName};
use distill_core::datagen::{
    build_counterfactual_dataset, build_distillation_dataset, read_records, write_records, CounterfactualRecord,
    DistillationRecord, Generator,
};
use distill_core::evaluation::{accuracy, extract_answer, read_results_csv, write_results_csv, AccuracyResult};
use distill_core::manifest::fingerprint_file;
use distill_core::teacher::{GenerationCache, PromptRole, TeacherClient, TemplateSet};
use distill_core::train::{
    build_for_variant, fit_tokenizer, generate_answer, load_manifest, load_student, read_examples, save_checkpoint,
    tag_histogram, write_examples, write_metrics, CfCorrectTarget, CheckpointManifest, ExamplesHeader, TaskMode,
    MANIFEST_FILE, METRICS_FILE, WEIGHTS_FILE,
};
use distill_core::{ExplanationSource, MlpStudentF32, ModelVariant, TrainingMethod};

use crate::config::TeacherConfig;
use crate::error::{require, CliError};
use crate::run::{Ctx, Plan};

fn parse_split_name(s: &str) -> Result<SplitName, CliError> {
    s.parse().map_err(CliError::config)
}

pub(crate) fn load_corpus(path: &Path, split: &str, strict: bool) -> Result<LoadReport, CliError> {
    require(path, "corpus")?;
    let report = load_split_with(path, parse_split_name(split)?, strict).map_err(CliError::runtime)?;
    for r in &report.rejected {
        eprintln!("warning: {}:{}: {}", path.display(), r.line, r.reason);
    }
    Ok(report)
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub path: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Fail on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Write the rejected-line report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn validate(ctx: &Ctx, a: ValidateArgs) -> Result<(), CliError> {
    parse_split_name(&a.split)?;
    let mut plan = Plan::new("corpus validate", json!({ "split": a.split, "strict": a.strict })).input("corpus", &a.path);
    if let Some(r) = &a.report {
        plan = plan.output_file(r);
    }
    ctx.execute(plan, || {
        let report = load_split_with(&a.path, parse_split_name(&a.split)?, a.strict).map_err(CliError::runtime)?;
        println!(
            "{}: {} valid questions, {} rejected lines, fingerprint {}",
            a.path.display(),
            report.split.len(),
            report.rejected.len(),
            report.split.source_fingerprint
        );
        for r in &report.rejected {
            println!("  line {}: {}", r.line, r.reason);
        }
        match &a.report {
            Some(path) => {
                std::fs::write(path, report.error_report_json()).map_err(CliError::runtime)?;
                Ok(vec![path.clone()])
            }
            None => Ok(Vec::new()),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatagenKind {
    Explain,
    CritiqueRevise,
    Counterfactual,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Generate for a seeded sample of this many questions.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub strict: bool,
}

pub(crate) fn teacher_client(cfg: &TeacherConfig) -> Result<(TeacherClient, TemplateSet), CliError> {
    let backend = cfg.descriptor().connect().map_err(CliError::config)?;
    let mut client = TeacherClient::new(Arc::from(backend)).with_concurrency(cfg.concurrency);
    if let Some(dir) = &cfg.cache_dir {
        client = client.with_cache(GenerationCache::open(dir).map_err(CliError::runtime)?);
    }
    let templates = match &cfg.templates {
        Some(p) => {
            require(p, "prompt templates")?;
            TemplateSet::from_file(p).map_err(CliError::config)?
        }
        None => TemplateSet::default_set(),
    };
    Ok((client, templates))
}

fn failures_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".failures.json");
    out.with_file_name(name)
}

pub fn datagen(ctx: &Ctx, kind: DatagenKind, a: DatagenArgs) -> Result<(), CliError> {
    parse_split_name(&a.split)?;
    let name = match kind {
        DatagenKind::Explain => "datagen explain",
        DatagenKind::CritiqueRevise => "datagen critique-revise",
        DatagenKind::Counterfactual => "datagen counterfactual",
    };
    let plan = Plan::new(name, json!({ "split": a.split, "sample": a.sample, "strict": a.strict }))
        .input("corpus", &a.corpus)
        .output_file(&a.out);
    ctx.execute(plan, || {
        let cfg = &ctx.config;
        let mut split = load_corpus(&a.corpus, &a.split, a.strict)?.split;
        if let Some(n) = a.sample {
            split = sample(&split, n, cfg.seed).map_err(CliError::config)?;
        }
        let (client, templates) = teacher_client(&cfg.teacher)?;
        let g = Generator { teacher: &client, templates: &templates, params: &cfg.teacher.params };
        let threshold = cfg.teacher.failure_threshold;
        let model_id = client.model_id(PromptRole::Explain).to_string();
        let (n, failures) = match kind {
            DatagenKind::Explain | DatagenKind::CritiqueRevise => {
                let build = build_distillation_dataset(&split, &g, kind == DatagenKind::CritiqueRevise, threshold)
                    .map_err(CliError::runtime)?;
                write_records(&a.out, &build.records, &model_id).map_err(CliError::runtime)?;
                (build.records.len(), build.failures)
            }
            DatagenKind::Counterfactual => {
                let build = build_counterfactual_dataset(&split, &g, cfg.seed, threshold).map_err(CliError::runtime)?;
                write_records(&a.out, &build.records, &model_id).map_err(CliError::runtime)?;
                (build.records.len(), build.failures)
            }
        };
        println!("{}: {n} records from {} questions", a.out.display(), split.len());
        let mut outputs = vec![a.out.clone()];
        if !failures.is_empty() {
            let path = failures_path(&a.out);
            std::fs::write(&path, serde_json::to_vec_pretty(&failures).expect("failures serialize"))
                .map_err(CliError::runtime)?;
            eprintln!("warning: {} questions failed; see {}", failures.len(), path.display());
            outputs.push(path);
        }
        Ok(outputs)
    })
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// mt, cf or mt+cf.
    #[arg(long)]
    pub method: String,
    /// unrevised or revised.
    #[arg(long)]
    pub source: String,
    /// Distillation records from `datagen explain` or `datagen critique-revise`.
    #[arg(long)]
    pub records: PathBuf,
    /// Records from `datagen counterfactual`; required for cf and mt+cf.
    #[arg(long)]
    pub counterfactuals: Option<PathBuf>,
    /// Target of the correct-path counterfactual task: answer or explanation-then-answer.
    #[arg(long)]
    pub cf_target: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_cf_target(s: &str) -> Result<CfCorrectTarget, CliError> {
    match s {
        "answer" => Ok(CfCorrectTarget::Answer),
        "explanation-then-answer" => Ok(CfCorrectTarget::ExplanationThenAnswer),
        other => Err(CliError::Config(format!("unknown cf target `{other}` (answer | explanation-then-answer)"))),
    }
}

pub fn build(ctx: &Ctx, a: BuildArgs) -> Result<(), CliError> {
    let method: TrainingMethod = a.method.parse().map_err(CliError::config)?;
    let source: ExplanationSource = a.source.parse().map_err(CliError::config)?;
    let cf_target = match &a.cf_target {
        Some(s) => parse_cf_target(s)?,
        None => ctx.config.training.cf_correct_target.unwrap_or(CfCorrectTarget::default_for(method)),
    };
    let needs_cf = method != TrainingMethod::Multitask;
    if needs_cf && a.counterfactuals.is_none() {
        return Err(CliError::Config(format!("--counterfactuals is required for method {method:?}", method = method.as_str())));
    }
    let mut plan = Plan::new(
        "dataset build",
        json!({ "method": method.as_str(), "source": source.as_str(), "cf_correct_target": cf_target }),
    )
    .input("distillation records", &a.records);
    if let (true, Some(cf)) = (needs_cf, &a.counterfactuals) {
        plan = plan.input("counterfactual records", cf);
    }
    plan = plan.output_file(&a.out);
    ctx.execute(plan, || {
        let (_, records) = read_records::<DistillationRecord>(&a.records).map_err(CliError::runtime)?;
        let cf_records: Vec<CounterfactualRecord> = match (needs_cf, &a.counterfactuals) {
            (true, Some(p)) => read_records(p).map_err(CliError::runtime)?.1,
            _ => Vec::new(),
        };
        let variant = ModelVariant::new(method, source);
        let built = build_for_variant(variant, &records, &cf_records, cf_target, ctx.config.seed).map_err(CliError::runtime)?;
        if !built.unmatched.is_empty() {
            eprintln!(
                "warning: {} records without a counterfactual, {} counterfactuals without a record",
                built.unmatched.records_without_counterfactual.len(),
                built.unmatched.counterfactuals_without_record.len()
            );
        }
        let header = ExamplesHeader::new(method, source, cf_target, ctx.config.seed, &built.examples);
        write_examples(&a.out, &header, &built.examples).map_err(CliError::runtime)?;
        let tags: Vec<String> = tag_histogram(&built.examples).iter().map(|(t, n)| format!("{t}={n}")).collect();
        println!("{}: {} examples over {} questions ({})", a.out.display(), built.examples.len(), header.questions, tags.join(", "));
        Ok(vec![a.out.clone()])
    })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// e.g. MT+CF:Revised.
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub size: String,
    #[arg(long)]
    pub seed: u64,
    /// Examples from `dataset build` matching the variant.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Corpora whose words join the vocabulary (e.g. the test split).
    #[arg(long)]
    pub vocab: Vec<PathBuf>,
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<(), CliError> {
    let variant: ModelVariant = a.variant.parse().map_err(CliError::config)?;
    if !variant.is_canonical() {
        eprintln!("warning: {variant} is a non-canonical variant (outside the four studied configurations); proceeding");
    }
    let size = ctx.config.size(&a.size)?;
    let mut config = ctx.config.training.clone();
    config.seed = a.seed;
    let mut plan = Plan::new("train", json!({ "variant": variant, "size": a.size, "dims": size, "training": config }))
        .input("training examples", &a.dataset);
    for v in &a.vocab {
        plan = plan.input("vocabulary corpus", v);
    }
    plan = plan.output_dir(&a.out);
    ctx.execute(plan, || {
        let (header, examples) = read_examples(&a.dataset).map_err(CliError::runtime)?;
        if header.method != variant.method || header.source != variant.source {
            return Err(CliError::Config(format!(
                "{} holds {}:{} examples, not {variant}",
                a.dataset.display(),
                header.method.as_str(),
                header.source.as_str()
            )));
        }
        config.cf_correct_target = Some(header.cf_correct_target);
        let mut extra = Vec::new();
        for v in &a.vocab {
            extra.extend(load_corpus(v, "test", false)?.split.questions.iter().map(MCQuestion::render));
        }
        let tokenizer = fit_tokenizer(&examples, extra.iter().map(String::as_str));
        let student = MlpStudentF32::new(tokenizer, size.embed, size.hidden, size.max_target_len, a.seed);
        let num_params = student.num_params();
        let run = distill_core::train::train(&config, &examples, student, None).map_err(CliError::runtime)?;
        if !run.rejected_overlong.is_empty() {
            eprintln!("warning: {} examples exceed max_target_len and were skipped", run.rejected_overlong.len());
        }
        let fingerprint = fingerprint_file(&a.dataset).map_err(CliError::runtime)?;
        let manifest = CheckpointManifest::new(&config, variant, &a.size, vec![fingerprint], num_params);
        save_checkpoint(&a.out, &run.student, &manifest).map_err(CliError::runtime)?;
        write_metrics(a.out.join(METRICS_FILE), &run.metrics).map_err(CliError::runtime)?;
        if let Some(last) = run.metrics.last() {
            println!("{}: {num_params} parameters, final loss {:.4} after {} steps", a.out.display(), last.total, last.step);
        }
        Ok(vec![a.out.join(WEIGHTS_FILE), a.out.join(MANIFEST_FILE), a.out.join(METRICS_FILE)])
    })
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Merge into an existing results file, replacing the same (variant, size, seed).
    #[arg(long)]
    pub append: bool,
    /// Also write per-question predictions as NDJSON.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

pub(crate) fn load_checkpoint(dir: &Path) -> Result<(CheckpointManifest, MlpStudentF32), CliError> {
    require(&dir.join(WEIGHTS_FILE), "checkpoint weights")?;
    require(&dir.join(MANIFEST_FILE), "checkpoint manifest")?;
    let manifest = load_manifest(dir).map_err(CliError::runtime)?;
    let student = load_student(dir).map_err(CliError::runtime)?;
    Ok((manifest, student))
}

pub fn eval(ctx: &Ctx, a: EvalArgs) -> Result<(), CliError> {
    parse_split_name(&a.split)?;
    let mut plan = Plan::new("eval", json!({ "split": a.split, "append": a.append }))
        .input("checkpoint weights", &a.checkpoint.join(WEIGHTS_FILE))
        .input("checkpoint manifest", &a.checkpoint.join(MANIFEST_FILE))
        .input("corpus", &a.corpus)
        .output_file(&a.out);
    if let Some(p) = &a.predictions {
        plan = plan.output_file(p);
    }
    ctx.execute(plan, || {
        let (manifest, student) = load_checkpoint(&a.checkpoint)?;
        let split: DatasetSplit = load_corpus(&a.corpus, &a.split, false)?.split;
        let preds: Vec<_> = split
            .questions
            .iter()
            .map(|q| extract_answer(&generate_answer(&student, q, TaskMode::Answer, manifest.config.max_gen_tokens).text, q))
            .collect();
        let result = accuracy(&preds, &split.questions, manifest.variant, &manifest.size, manifest.config.seed)
            .map_err(CliError::runtime)?;
        let mut results: Vec<AccuracyResult> = Vec::new();
        if a.append && a.out.exists() {
            let file = std::fs::File::open(&a.out).map_err(CliError::runtime)?;
            results = read_results_csv(file).map_err(CliError::runtime)?;
            results.retain(|r| !(r.variant == result.variant && r.size == result.size && r.seed == result.seed));
        }
        println!(
            "{} size={} seed={}: {}/{} correct, accuracy {:.4}",
            result.variant, result.size, result.seed, result.n_correct, result.n_total, result.accuracy
        );
        results.push(result);
        if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(CliError::runtime)?;
        }
        let file = std::fs::File::create(&a.out).map_err(CliError::runtime)?;
        write_results_csv(file, &results).map_err(CliError::runtime)?;
        let mut outputs = vec![a.out.clone()];
        if let Some(p) = &a.predictions {
            let gold: std::collections::BTreeMap<&str, char> =
                split.questions.iter().map(|q| (q.id.as_str(), q.answer_label)).collect();
            let mut lines = String::new();
            for p in &preds {
                let mut v = serde_json::to_value(p).expect("prediction serializes");
                v["gold_label"] = json!(gold[p.question_id.as_str()].to_string());
                lines.push_str(&v.to_string());
                lines.push('\n');
            }
            std::fs::write(p, lines).map_err(CliError::runtime)?;
            outputs.push(p.clone());
        }
        Ok(outputs)
    })
}

/// How a student of `variant` explains its answer: MT-trained students have
/// an explain task; a counterfactual-only student explains before its answer.
pub(crate) fn student_explanation(
    student: &MlpStudentF32,
    variant: ModelVariant,
    q: &MCQuestion,
    max_tokens: usize,
) -> (String, String) {
    let answer_raw = generate_answer(student, q, TaskMode::Answer, max_tokens).text;
    let explanation = match variant.method {
        TrainingMethod::Counterfactual => match answer_raw.find(distill_core::train::ANSWER_MARKER) {
            Some(i) => answer_raw[..i].trim().to_string(),
            None => String::new(),
        },
        _ => generate_answer(student, q, TaskMode::Explain, max_tokens).text.trim().to_string(),
    };
    let pred = extract_answer(&answer_raw, q);
    let answer = pred
        .extracted_label
        .and_then(|l| q.choice_text(l))
        .map(str::to_string)
        .unwrap_or_else(|| answer_raw.trim().to_string());
    (answer, explanation)
}
