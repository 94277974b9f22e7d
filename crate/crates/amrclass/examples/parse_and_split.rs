//! Parse a FASTA file, preprocess it, and build a stratified train/dev/test
//! split keyed by canonical drug class.
//!
//! ```sh
//! cargo run -p amrclass --example parse_and_split
//! ```

use std::path::Path;

use amrclass::labelspace::LabelMap;
use amrclass::seqio::{self, Dataset, Split};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    // the manifest carries raw MEGARes-style labels per record
    let file = std::fs::File::open(fixtures.join("queries.manifest.jsonl"))?;
    let dataset = seqio::read_manifest(std::io::BufReader::new(file))?;
    println!("loaded {} records", dataset.records.len());

    let outcome = seqio::preprocess(dataset.records);
    println!(
        "preprocessed: {} kept, {} dropped",
        outcome.records.len(),
        outcome.dropped.len()
    );

    // the fixture set has one record per stratum, too small for a 3-way cut;
    // replicate it so every class has ten records
    let mut records = Vec::new();
    for copy in 0..10 {
        for rec in &outcome.records {
            let mut clone = rec.clone();
            clone.id = format!("{}_{copy}", rec.id);
            records.push(clone);
        }
    }

    let map = LabelMap::builtin();
    let split = seqio::split(&Dataset::new(records), [0.8, 0.1, 0.1], 7, |rec| {
        map.canonicalize(rec)
            .map(|classes| {
                classes
                    .iter()
                    .map(|c| c.canonical_name())
                    .collect::<Vec<_>>()
                    .join("+")
            })
            .unwrap_or_else(|_| "unlabeled".into())
    })?;

    for bucket in [Split::Train, Split::Dev, Split::Test] {
        println!("{bucket:?}: {} records", split.bucket(bucket).len());
    }

    let out = std::env::temp_dir().join("amrclass_example_split.jsonl");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
    seqio::write_manifest(&split, &mut file)?;
    println!("wrote manifest -> {}", out.display());
    Ok(())
}
