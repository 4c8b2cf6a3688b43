//! analyze performance | ratings.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use distill_core::evaluation::read_results_csv;
use distill_core::stats::{analyze_performance, analyze_ratings, read_ratings_csv, Baselines};

use crate::error::CliError;
use crate::run::{Ctx, Plan};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Results CSV (performance) or ratings CSV (ratings).
    pub input: PathBuf,
    /// Also write the rendered report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn report(ctx: &Ctx, name: &str, what: &str, a: &AnalyzeArgs, analyze: impl FnOnce(std::fs::File) -> Result<String, CliError>) -> Result<(), CliError> {
    let mut plan = Plan::new(name, json!({})).input(what, &a.input);
    if let Some(out) = &a.out {
        plan = plan.output_file(out);
    }
    ctx.execute(plan, || {
        let text = analyze(std::fs::File::open(&a.input).map_err(CliError::runtime)?)?;
        print!("{text}");
        match &a.out {
            Some(out) => {
                std::fs::write(out, &text).map_err(CliError::runtime)?;
                Ok(vec![out.clone()])
            }
            None => Ok(Vec::new()),
        }
    })
}

pub fn performance(ctx: &Ctx, a: AnalyzeArgs) -> Result<(), CliError> {
    report(ctx, "analyze performance", "accuracy results", &a, |file| {
        let results = read_results_csv(file).map_err(CliError::runtime)?;
        Ok(analyze_performance(&results).map_err(CliError::runtime)?.render())
    })
}

pub fn ratings(ctx: &Ctx, a: AnalyzeArgs) -> Result<(), CliError> {
    report(ctx, "analyze ratings", "ratings export", &a, |file| {
        let obs = read_ratings_csv(file).map_err(CliError::runtime)?;
        Ok(analyze_ratings(&obs, &Baselines::default()).map_err(CliError::runtime)?.render())
    })
}
