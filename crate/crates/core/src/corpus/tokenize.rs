use serde::{Deserialize, Serialize};

/// Whitespace tokenizer. Case is preserved unless `lowercase` is set;
/// punctuation is never split off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    #[serde(default)]
    pub lowercase: bool,
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .map(|t| if self.lowercase { t.to_lowercase() } else { t.to_string() })
            .collect()
    }

    pub fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}
