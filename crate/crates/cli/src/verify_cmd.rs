//! `surreal verify`: run the property suites and report per-property
//! maximum errors against their documented tolerances.

use crate::CliError;
use clap::Args;
use surreal_core::verify::{run_verification, VerifyOptions};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Substring filter on property names (e.g. `equivariance`).
    #[arg(long)]
    pub property: Option<String>,
    /// Override the per-property trial counts.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sampling seed; changes the samples, never the verdict.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: VerifyArgs) -> Result<(), CliError> {
    let reports = run_verification(&VerifyOptions {
        seed: args.seed,
        trials: args.trials,
        property: args.property.clone(),
    });
    if reports.is_empty() {
        return Err(CliError::Usage(format!(
            "no property matches {:?}",
            args.property.unwrap_or_default()
        )));
    }
    let mut failed = Vec::new();
    for r in &reports {
        println!("{}", serde_json::to_string(r).expect("report serializes"));
        if !r.passed {
            failed.push(r.name.clone());
        }
    }
    let summary = serde_json::json!({
        "properties": reports.len(),
        "failed": failed,
        "passed": failed.is_empty(),
    });
    println!("{summary}");
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "{} properties failed: {}",
            failed.len(),
            failed.join(", ")
        )))
    }
}
