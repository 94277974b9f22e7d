//! Map verbose model replies to a single drug class.
//!
//! The extractor counts word-bounded, case-insensitive lexicon mentions per
//! class across the whole reply and picks the class with the strictly highest
//! count. Zero mentions or a tie for the top count yields UNCLASSIFIED — tied
//! replies are thereby kept countable instead of being silently excluded.
//! Matching is longest-surface-form-first and non-overlapping. This is a
//! deterministic stand-in for a learned extraction model; negation handling
//! ("not resistant to X") is a known non-goal.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labelspace::{DrugClass, LabelError, LabelMap};
use crate::llmclient::{BackendFingerprint, ModelReply};

pub type Result<T> = std::result::Result<T, ExtractError>;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("surface form {form:?} maps to both {first:?} and {second:?}")]
    DuplicateSurfaceForm {
        form: String,
        first: DrugClass,
        second: DrugClass,
    },
    #[error("lexicon regex failed to compile: {0}")]
    BadPattern(#[from] regex::Error),
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// Case-insensitive surface-form table, longest-match-first. Every canonical
/// class name is always present as its own surface form.
#[derive(Debug, Clone)]
pub struct SynonymLexicon {
    matcher: Regex,
    by_form: HashMap<String, DrugClass>,
    n_forms: usize,
}

impl SynonymLexicon {
    pub fn new(pairs: impl IntoIterator<Item = (String, DrugClass)>) -> Result<SynonymLexicon> {
        let mut by_form: HashMap<String, DrugClass> = HashMap::new();
        let mut insert = |form: &str, class: DrugClass| -> Result<()> {
            let folded = form.to_lowercase();
            match by_form.get(&folded) {
                Some(existing) if *existing != class => Err(ExtractError::DuplicateSurfaceForm {
                    form: form.to_string(),
                    first: *existing,
                    second: class,
                }),
                _ => {
                    by_form.insert(folded, class);
                    Ok(())
                }
            }
        };
        for class in DrugClass::ALL {
            insert(class.canonical_name(), class)?;
        }
        for (form, class) in pairs {
            if form.trim().is_empty() {
                continue;
            }
            insert(form.trim(), class)?;
        }

        // longer alternatives first: the regex engine prefers alternatives in
        // order, which gives longest-match-at-position semantics
        let mut forms: Vec<&String> = by_form.keys().collect();
        forms.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let alternation = forms
            .iter()
            .map(|f| regex::escape(f))
            .collect::<Vec<_>>()
            .join("|");
        let matcher = Regex::new(&format!(r"(?i)\b(?:{alternation})\b"))?;
        Ok(SynonymLexicon {
            matcher,
            n_forms: by_form.len(),
            by_form,
        })
    }

    /// Build from a label map's synonym rows.
    pub fn from_label_map(map: &LabelMap) -> Result<SynonymLexicon> {
        Self::new(map.synonyms().iter().cloned())
    }

    /// Load from TSV rows (surface_form, canonical_class) on top of the
    /// canonical names.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<SynonymLexicon> {
        let mut map = LabelMap::default();
        map.load_synonyms(reader)?;
        Self::from_label_map(&map)
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> SynonymLexicon {
        Self::from_label_map(&LabelMap::builtin()).expect("builtin lexicon is valid")
    }

    pub fn len(&self) -> usize {
        self.n_forms
    }

    pub fn is_empty(&self) -> bool {
        self.n_forms == 0
    }

    /// Count non-overlapping word-bounded mentions per class.
    pub fn count_mentions(&self, text: &str) -> BTreeMap<DrugClass, usize> {
        let mut counts = BTreeMap::new();
        for m in self.matcher.find_iter(text) {
            let class = self.by_form[&m.as_str().to_lowercase()];
            *counts.entry(class).or_insert(0) += 1;
        }
        counts
    }
}

/// One extracted prediction with its mention evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    pub predicted_class: DrugClass,
    pub counts: BTreeMap<DrugClass, usize>,
}

/// Pick the single class with the strictly highest mention count; ties and
/// zero-mention replies map to UNCLASSIFIED.
pub fn extract_label(
    reply: &ModelReply,
    lexicon: &SynonymLexicon,
) -> (DrugClass, BTreeMap<DrugClass, usize>) {
    let counts = lexicon.count_mentions(&reply.raw_text);
    let class = decide(&counts);
    (class, counts)
}

fn decide(counts: &BTreeMap<DrugClass, usize>) -> DrugClass {
    let top = counts.values().copied().max().unwrap_or(0);
    if top == 0 {
        return DrugClass::Unclassified;
    }
    let mut leaders = counts.iter().filter(|(_, n)| **n == top);
    let first = leaders.next().expect("top > 0 implies a leader");
    if leaders.next().is_some() {
        DrugClass::Unclassified
    } else {
        *first.0
    }
}

/// Element-wise [`extract_label`], order preserved. The pipeline issues one
/// job per record, so the reply's job id is the record id.
pub fn extract_batch(replies: &[ModelReply], lexicon: &SynonymLexicon) -> Vec<Prediction> {
    replies
        .iter()
        .map(|reply| {
            let (predicted_class, counts) = extract_label(reply, lexicon);
            Prediction {
                record_id: reply.job_id.clone(),
                predicted_class,
                counts,
            }
        })
        .collect()
}

/// Persisted prediction line: extraction output plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub record_id: String,
    pub predicted_class: DrugClass,
    pub counts: BTreeMap<DrugClass, usize>,
    pub template_kind: crate::promptgen::TemplateKind,
    pub backend: BackendFingerprint,
    pub manifest_digest: String,
}
