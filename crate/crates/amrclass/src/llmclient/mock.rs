//! Deterministic mock backend: an ordered rule list mapping a substring of
//! the prompt to a canned verbose reply. The first matching rule wins; a rule
//! with an empty pattern matches everything, so placing one last gives the
//! table a default. This is the test double standing in for hosted models.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRule {
    pub pattern: String,
    pub reply: String,
}

#[derive(Debug, Clone, Default)]
pub struct MockRules {
    rules: Vec<MockRule>,
}

impl MockRules {
    pub fn new(rules: Vec<MockRule>) -> Self {
        MockRules { rules }
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, LlmError> {
        let rules: Vec<MockRule> = serde_json::from_reader(reader)
            .map_err(|e| LlmError::Config(format!("bad mock rule table: {e}")))?;
        Ok(MockRules { rules })
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        let file = std::fs::File::open(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// First rule whose pattern occurs in the prompt (empty pattern matches
    /// everything).
    pub fn reply_for(&self, prompt: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.pattern.is_empty() || prompt.contains(&r.pattern))
            .map(|r| r.reply.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> MockRules {
        MockRules::new(vec![
            MockRule {
                pattern: "vanXY".into(),
                reply: "This confers resistance to Glycopeptides.".into(),
            },
            MockRule {
                pattern: "tetA".into(),
                reply: "Tetracyclines.".into(),
            },
            MockRule {
                pattern: "".into(),
                reply: "insufficient evidence".into(),
            },
        ])
    }

    #[test]
    fn first_match_wins_in_order() {
        let r = rules();
        assert_eq!(
            r.reply_for("hit: vanXY-C gene, also tetA"),
            Some("This confers resistance to Glycopeptides.")
        );
        assert_eq!(r.reply_for("only tetA here"), Some("Tetracyclines."));
    }

    #[test]
    fn empty_pattern_is_the_default() {
        assert_eq!(
            rules().reply_for("nothing known"),
            Some("insufficient evidence")
        );
    }

    #[test]
    fn no_rules_means_no_reply() {
        assert_eq!(MockRules::default().reply_for("anything"), None);
    }

    #[test]
    fn loads_fixture_table() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mock_rules.json");
        let rules = MockRules::from_path(&path).unwrap();
        assert!(rules.len() >= 10);
        let reply = rules
            .reply_for("... 'sequence_title': '... vanXY-C gene for ...' ...")
            .unwrap();
        assert!(reply.contains("Glycopeptides"));
    }
}
