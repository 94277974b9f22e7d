//! Score a mock classification run and print all three report tables:
//! unclassified rates, full metrics, and cross-label-scheme accuracy.
//!
//! ```sh
//! cargo run -p amrclass --example evaluate_predictions
//! ```

use std::path::Path;

use amrclass::evalkit::TableLayout;
use amrclass::llmclient::BackendConfig;
use amrclass::pipeline::{classify_run, eval_run, EvalArgs, RunConfig};
use amrclass::promptgen::TemplateKind;
use amrclass::seqio::SourceDb;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let root = std::env::temp_dir().join("amrclass_example_evaluate");

    // classify twice: once per template, to compare the two pipelines
    let mut predictions = Vec::new();
    for (template, name) in [
        (TemplateKind::SequenceOnly, "seq"),
        (TemplateKind::BlastAugmented, "blast"),
    ] {
        let cfg = RunConfig {
            input: fixtures.join("queries.manifest.jsonl"),
            reference_fasta: Some(fixtures.join("refs.fasta")),
            template,
            backend: BackendConfig {
                mock_rules: Some(fixtures.join("mock_rules.json")),
                model_name: "mock-model".into(),
                ..BackendConfig::default()
            },
            output_dir: root.join(name),
            ..RunConfig::default()
        };
        predictions.push(classify_run(&cfg)?.predictions_path);
    }

    for (layout, truth) in [
        (TableLayout::UnclassifiedRate, "queries.manifest.jsonl"),
        (TableLayout::FullMetrics, "queries.manifest.jsonl"),
        (TableLayout::CrossLabel, "queries.card.manifest.jsonl"),
    ] {
        println!("=== {} ===", layout.as_str());
        for path in &predictions {
            let summary = eval_run(&EvalArgs {
                predictions: path.clone(),
                truth: fixtures.join(truth),
                label_table: None,
                layout,
                target_db: SourceDb::Card,
                only_split: None,
                output_dir: root.join("reports"),
            })?;
            let table = std::fs::read_to_string(&summary.text_path)?;
            // drop the provenance header line for display
            for line in table.lines().skip(1) {
                println!("{line}");
            }
            println!();
        }
    }
    Ok(())
}
