//! Word-level tokenizer for the built-in student.
//!
//! Text is lowercased, split on whitespace, and punctuation characters become
//! tokens of their own. Ids 0..4 are reserved for `<pad>`, `<bos>`, `<eos>`
//! and `<unk>`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() || ch == '\'' || ch == '-' {
                word.extend(ch.to_lowercase());
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(ch.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Tokenizer {
    /// Vocabulary of every word in `texts`, sorted for reproducibility.
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<String> = texts.into_iter().flat_map(split_words).collect();
        let tokens = SPECIALS.iter().map(|s| s.to_string()).chain(words).collect();
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        split_words(text).iter().map(|w| self.index.get(w).copied().unwrap_or(UNK)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id < SPECIALS.len() {
                continue;
            }
            let tok = &self.tokens[id];
            let attach = tok.chars().count() == 1 && tok.chars().all(|c| ".,;:!?)%".contains(c));
            if !out.is_empty() && !attach && !out.ends_with('(') {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_lowercases() {
        assert_eq!(split_words("Hello, World! (A) it's"), vec!["hello", ",", "world", "!", "(", "a", ")", "it's"]);
    }

    #[test]
    fn encode_decode() {
        let t = Tokenizer::fit(["the answer is bank."]);
        assert_eq!(t.vocab_size(), 4 + 5);
        let ids = t.encode("The answer is bank.");
        assert_eq!(t.decode(&ids), "the answer is bank.");
        assert_eq!(t.encode("zebra"), vec![UNK]);
    }
}
