//! Run the full classification pipeline against the deterministic mock
//! backend: preprocess, search, render, complete (with caching), extract.
//!
//! ```sh
//! cargo run -p amrclass --example classify_mock
//! ```

use std::path::Path;

use amrclass::llmclient::BackendConfig;
use amrclass::pipeline::{classify_run, read_predictions, RunConfig};
use amrclass::promptgen::TemplateKind;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = std::env::temp_dir().join("amrclass_example_classify");

    let cfg = RunConfig {
        input: fixtures.join("queries.manifest.jsonl"),
        reference_fasta: Some(fixtures.join("refs.fasta")),
        template: TemplateKind::BlastAugmented,
        backend: BackendConfig {
            mock_rules: Some(fixtures.join("mock_rules.json")),
            model_name: "mock-model".into(),
            ..BackendConfig::default()
        },
        output_dir: out.clone(),
        ..RunConfig::default()
    };

    let summary = classify_run(&cfg)?;
    println!(
        "classified {} records ({} cached, {} failed)",
        summary.n_jobs, summary.n_cached, summary.n_failures
    );
    println!("run manifest digest: {}", summary.manifest_digest);

    for row in read_predictions(&summary.predictions_path)? {
        println!("  {:<12} -> {}", row.record_id, row.predicted_class);
    }
    println!("\nartifacts in {}", out.display());
    for name in [
        "jobs.jsonl",
        "hits.jsonl",
        "predictions.jsonl",
        "cache.jsonl",
        "run_manifest.json",
    ] {
        println!("  {}", out.join(name).display());
    }
    Ok(())
}
