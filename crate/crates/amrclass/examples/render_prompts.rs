//! Render both prompt templates for one record: sequence-only, and
//! alignment-augmented with its top-5 hits.
//!
//! ```sh
//! cargo run -p amrclass --example render_prompts
//! ```

use std::io::BufReader;
use std::path::Path;

use amrclass::align::{search, ScoringScheme, WordIndex};
use amrclass::promptgen::{render_blast_prompt, render_sequence_prompt};
use amrclass::seqio::{parse_fasta, preprocess, SourceDb};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let refs = preprocess(parse_fasta(
        BufReader::new(std::fs::File::open(fixtures.join("refs.fasta"))?),
        SourceDb::Megares,
    )?)
    .records;
    let queries = preprocess(parse_fasta(
        BufReader::new(std::fs::File::open(fixtures.join("queries.fasta"))?),
        SourceDb::Megares,
    )?)
    .records;

    let record = queries
        .iter()
        .find(|r| r.id == "q06_catb")
        .expect("fixture record");

    println!("=== sequence-only prompt ===\n");
    println!("{}\n", render_sequence_prompt(record)?);

    let index = WordIndex::build(&refs, 11)?;
    let hits = search(&index, record, &ScoringScheme::default(), 5)?;
    println!(
        "=== alignment-augmented prompt ({} hit(s)) ===\n",
        hits.len()
    );
    println!("{}", render_blast_prompt(&hits));
    Ok(())
}
