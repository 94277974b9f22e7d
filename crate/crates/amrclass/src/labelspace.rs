//! The canonical nine-class drug-resistance label space and the table that
//! harmonizes MEGARes and CARD labels into it.
//!
//! The integration table ships as editable TSV data ([`LabelMap::builtin`]
//! embeds the copy under `data/`); nothing in the pipeline hardcodes
//! source-database label strings.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqio::{SeqRecord, SourceDb};

pub type Result<T> = std::result::Result<T, LabelError>;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("line {line}: expected {expected} tab-separated columns, got {got}")]
    BadRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: unknown canonical class {name:?}")]
    UnknownCanonicalClass { line: usize, name: String },
    #[error("duplicate mapping: ({db}, {label:?}) maps to both {first:?} and {second:?}")]
    DuplicateMapping {
        db: &'static str,
        label: String,
        first: DrugClass,
        second: DrugClass,
    },
    #[error("line {line}: unknown source database {name:?}")]
    UnknownSourceDb { line: usize, name: String },
    #[error("duplicate synonym {form:?} maps to both {first:?} and {second:?}")]
    DuplicateSynonym {
        form: String,
        first: DrugClass,
        second: DrugClass,
    },
    #[error("unmapped source label {label:?} (db {db})")]
    UnmappedLabel { db: &'static str, label: String },
    #[error("no {db} equivalent for class {class:?}")]
    NoTargetEquivalent { db: &'static str, class: DrugClass },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One of the nine substantive drug classes, plus the UNCLASSIFIED sentinel
/// used for replies from which no single class could be extracted.
///
/// Variant order matches the fixed class-list order used in prompts; the
/// canonical spellings are byte-exact, including `Multi-drug_resistance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DrugClass {
    Sulfonamides,
    Aminoglycosides,
    Betalactams,
    Glycopeptides,
    Tetracyclines,
    Phenicol,
    Fluoroquinolones,
    #[serde(rename = "MLS")]
    Mls,
    #[serde(rename = "Multi-drug_resistance")]
    MultiDrugResistance,
    #[serde(rename = "UNCLASSIFIED")]
    Unclassified,
}

impl DrugClass {
    /// The nine substantive classes in prompt order (no sentinel).
    pub const ALL: [DrugClass; 9] = [
        DrugClass::Sulfonamides,
        DrugClass::Aminoglycosides,
        DrugClass::Betalactams,
        DrugClass::Glycopeptides,
        DrugClass::Tetracyclines,
        DrugClass::Phenicol,
        DrugClass::Fluoroquinolones,
        DrugClass::Mls,
        DrugClass::MultiDrugResistance,
    ];

    pub fn canonical_name(&self) -> &'static str {
        match self {
            DrugClass::Sulfonamides => "Sulfonamides",
            DrugClass::Aminoglycosides => "Aminoglycosides",
            DrugClass::Betalactams => "Betalactams",
            DrugClass::Glycopeptides => "Glycopeptides",
            DrugClass::Tetracyclines => "Tetracyclines",
            DrugClass::Phenicol => "Phenicol",
            DrugClass::Fluoroquinolones => "Fluoroquinolones",
            DrugClass::Mls => "MLS",
            DrugClass::MultiDrugResistance => "Multi-drug_resistance",
            DrugClass::Unclassified => "UNCLASSIFIED",
        }
    }

    pub fn from_canonical_name(name: &str) -> Option<DrugClass> {
        DrugClass::ALL
            .iter()
            .copied()
            .find(|c| c.canonical_name() == name)
            .or((name == "UNCLASSIFIED").then_some(DrugClass::Unclassified))
    }

    /// Index into the nine-class axis; the sentinel has no index.
    pub fn class_index(&self) -> Option<usize> {
        DrugClass::ALL.iter().position(|c| c == self)
    }
}

impl std::fmt::Display for DrugClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.canonical_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub source_db: SourceDb,
    pub source_label: String,
    pub class: DrugClass,
}

/// Cross-database label integration table plus the synonym lexicon rows used
/// by reply extraction. Immutable after load; share it read-only.
#[derive(Debug, Clone, Default)]
pub struct LabelMap {
    entries: Vec<LabelRow>,
    by_key: HashMap<(SourceDb, String), DrugClass>,
    synonyms: Vec<(String, DrugClass)>,
}

fn split_tsv(line: &str) -> Vec<&str> {
    line.split('\t').map(|f| f.trim()).collect()
}

impl LabelMap {
    /// Load the integration table. Columns: source_db, source_label,
    /// canonical_class. `#` comments and blank lines are skipped. Lookups are
    /// case-insensitive on the source label; exact duplicate rows are
    /// tolerated, conflicting ones are rejected.
    pub fn load<R: BufRead>(table: R) -> Result<LabelMap> {
        let mut map = LabelMap::default();
        for (lineno, line) in table.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields = split_tsv(trimmed);
            if fields.len() != 3 {
                return Err(LabelError::BadRow {
                    line: lineno,
                    expected: 3,
                    got: fields.len(),
                });
            }
            let db = SourceDb::parse(fields[0]).ok_or_else(|| LabelError::UnknownSourceDb {
                line: lineno,
                name: fields[0].to_string(),
            })?;
            let class = DrugClass::from_canonical_name(fields[2])
                .filter(|c| *c != DrugClass::Unclassified)
                .ok_or_else(|| LabelError::UnknownCanonicalClass {
                    line: lineno,
                    name: fields[2].to_string(),
                })?;
            map.insert(db, fields[1], class)?;
        }
        Ok(map)
    }

    fn insert(&mut self, db: SourceDb, label: &str, class: DrugClass) -> Result<()> {
        let key = (db, label.to_lowercase());
        match self.by_key.get(&key) {
            Some(existing) if *existing != class => {
                return Err(LabelError::DuplicateMapping {
                    db: db.as_str(),
                    label: label.to_string(),
                    first: *existing,
                    second: class,
                })
            }
            Some(_) => return Ok(()),
            None => {}
        }
        self.by_key.insert(key, class);
        self.entries.push(LabelRow {
            source_db: db,
            source_label: label.to_string(),
            class,
        });
        Ok(())
    }

    /// Load the synonym lexicon rows (columns: surface_form, canonical_class)
    /// into this map. Surface forms must be unique after case-folding.
    pub fn load_synonyms<R: BufRead>(&mut self, table: R) -> Result<()> {
        let mut seen: HashMap<String, DrugClass> = self
            .synonyms
            .iter()
            .map(|(f, c)| (f.to_lowercase(), *c))
            .collect();
        for (lineno, line) in table.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields = split_tsv(trimmed);
            if fields.len() != 2 {
                return Err(LabelError::BadRow {
                    line: lineno,
                    expected: 2,
                    got: fields.len(),
                });
            }
            let class = DrugClass::from_canonical_name(fields[1])
                .filter(|c| *c != DrugClass::Unclassified)
                .ok_or_else(|| LabelError::UnknownCanonicalClass {
                    line: lineno,
                    name: fields[1].to_string(),
                })?;
            let folded = fields[0].to_lowercase();
            match seen.get(&folded) {
                Some(existing) if *existing != class => {
                    return Err(LabelError::DuplicateSynonym {
                        form: fields[0].to_string(),
                        first: *existing,
                        second: class,
                    })
                }
                Some(_) => continue,
                None => {
                    seen.insert(folded, class);
                    self.synonyms.push((fields[0].to_string(), class));
                }
            }
        }
        Ok(())
    }

    /// The table shipped with the crate (`data/label_map.tsv` +
    /// `data/synonyms.tsv`).
    pub fn builtin() -> LabelMap {
        let mut map = LabelMap::load(include_str!("../data/label_map.tsv").as_bytes())
            .expect("builtin label table is valid");
        map.load_synonyms(include_str!("../data/synonyms.tsv").as_bytes())
            .expect("builtin synonym table is valid");
        map
    }

    pub fn entries(&self) -> &[LabelRow] {
        &self.entries
    }

    pub fn synonyms(&self) -> &[(String, DrugClass)] {
        &self.synonyms
    }

    pub fn lookup(&self, db: SourceDb, label: &str) -> Option<DrugClass> {
        self.by_key.get(&(db, label.to_lowercase())).copied()
    }

    /// Translate every raw label of `record` into canonical classes.
    /// Multi-label records are legal; the result is a set.
    pub fn canonicalize(&self, record: &SeqRecord) -> Result<BTreeSet<DrugClass>> {
        let mut classes = BTreeSet::new();
        for label in &record.raw_labels {
            let class =
                self.lookup(record.source_db, label)
                    .ok_or_else(|| LabelError::UnmappedLabel {
                        db: record.source_db.as_str(),
                        label: label.clone(),
                    })?;
            classes.insert(class);
        }
        Ok(classes)
    }

    /// Map a canonical prediction into the `target_db` labeling scheme: the
    /// first table row (in load order) for that database and class wins, so
    /// the mapping is deterministic. UNCLASSIFIED passes through.
    pub fn crossmap(&self, prediction: DrugClass, target_db: SourceDb) -> Result<String> {
        if prediction == DrugClass::Unclassified {
            return Ok("UNCLASSIFIED".to_string());
        }
        self.entries
            .iter()
            .find(|row| row.source_db == target_db && row.class == prediction)
            .map(|row| row.source_label.clone())
            .ok_or(LabelError::NoTargetEquivalent {
                db: target_db.as_str(),
                class: prediction,
            })
    }
}
