//! Build a word index over the reference set and run a local-alignment
//! search, printing ranked hits and one rendered alignment.
//!
//! ```sh
//! cargo run -p amrclass --example index_and_search
//! ```

use std::io::BufReader;
use std::path::Path;

use amrclass::align::{search, ScoringScheme, WordIndex};
use amrclass::seqio::{parse_fasta, preprocess, SourceDb};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let refs = parse_fasta(
        BufReader::new(std::fs::File::open(fixtures.join("refs.fasta"))?),
        SourceDb::Megares,
    )?;
    let refs = preprocess(refs).records;
    let index = WordIndex::build(&refs, 11)?;
    println!(
        "indexed {} references, {} bp total",
        index.references().len(),
        index.total_db_length()
    );

    let queries = parse_fasta(
        BufReader::new(std::fs::File::open(fixtures.join("queries.fasta"))?),
        SourceDb::Megares,
    )?;
    let queries = preprocess(queries).records;
    let query = &queries[0];
    println!("query {} ({} bp)", query.id, query.sequence.len());

    let hits = search(&index, query, &ScoringScheme::default(), 5)?;
    println!("{} hit(s):", hits.len());
    for hit in &hits {
        println!("  {}", hit.to_json_line());
    }

    if let Some(top) = hits.first() {
        println!(
            "\ntop alignment (score {}, e-value {:?}):",
            top.raw_score, top.e_value
        );
        // print in 60-column blocks
        let len = top.alignment_length;
        for start in (0..len).step_by(60) {
            let end = (start + 60).min(len);
            println!("  query   {}", &top.query_sequence[start..end]);
            println!("          {}", &top.match_sequence[start..end]);
            println!("  subject {}", &top.subject_sequence[start..end]);
            println!();
        }
    }
    Ok(())
}
