//! The `distill` command line: every pipeline stage as a subcommand with a
//! shared study config, `--dry-run`, and a run manifest per artifact.

pub mod analyze;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod run;
pub mod survey;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::StudyConfig;
pub use error::CliError;
use run::Ctx;

#[derive(Debug, Parser)]
#[command(name = "distill", version, about = "Teacher-student distillation workbench")]
pub struct Cli {
    /// Study config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the plan and write nothing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset checks.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Teacher data generation.
    #[command(subcommand)]
    Datagen(DatagenCmd),
    /// Training-example construction.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train one student.
    Train(pipeline::TrainArgs),
    /// Score a checkpoint on a question set.
    Eval(pipeline::EvalArgs),
    /// Statistical analysis.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Human-evaluation survey.
    #[command(subcommand)]
    Survey(SurveyCmd),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    Validate(pipeline::ValidateArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatagenCmd {
    /// Teacher explanations for the gold answers.
    Explain(pipeline::DatagenArgs),
    /// Explanations, critiques and revised explanations.
    CritiqueRevise(pipeline::DatagenArgs),
    /// Explanations for a sampled incorrect answer.
    Counterfactual(pipeline::DatagenArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    Build(pipeline::BuildArgs),
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Accuracy results: outlier filter, assumption checks, two-way ANOVA, Tukey.
    Performance(analyze::AnalyzeArgs),
    /// Survey ratings: Kruskal-Wallis, Dunn, effect sizes, ATS, regression.
    Ratings(analyze::AnalyzeArgs),
}

#[derive(Debug, Subcommand)]
pub enum SurveyCmd {
    /// Build the item pool from candidates or checkpoints.
    Pool(survey::PoolArgs),
    /// Run the survey HTTP service.
    Serve(survey::ServeArgs),
    /// Export completed sessions as ratings CSV.
    Export(survey::ExportArgs),
}

/// Parses `argv` and runs the command.
pub fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.render().to_string().trim_end().to_string())),
    };
    let config = StudyConfig::load(cli.config.as_deref())?;
    let ctx = Ctx { config, argv, dry_run: cli.dry_run };
    match cli.command {
        Command::Corpus(CorpusCmd::Validate(a)) => pipeline::validate(&ctx, a),
        Command::Datagen(DatagenCmd::Explain(a)) => pipeline::datagen(&ctx, pipeline::DatagenKind::Explain, a),
        Command::Datagen(DatagenCmd::CritiqueRevise(a)) => pipeline::datagen(&ctx, pipeline::DatagenKind::CritiqueRevise, a),
        Command::Datagen(DatagenCmd::Counterfactual(a)) => pipeline::datagen(&ctx, pipeline::DatagenKind::Counterfactual, a),
        Command::Dataset(DatasetCmd::Build(a)) => pipeline::build(&ctx, a),
        Command::Train(a) => pipeline::train(&ctx, a),
        Command::Eval(a) => pipeline::eval(&ctx, a),
        Command::Analyze(AnalyzeCmd::Performance(a)) => analyze::performance(&ctx, a),
        Command::Analyze(AnalyzeCmd::Ratings(a)) => analyze::ratings(&ctx, a),
        Command::Survey(SurveyCmd::Pool(a)) => survey::pool(&ctx, a),
        Command::Survey(SurveyCmd::Serve(a)) => survey::serve(&ctx, a),
        Command::Survey(SurveyCmd::Export(a)) => survey::export(&ctx, a),
    }
}
