//! Pluggable tokenizers for token-count statistics.

use std::collections::HashMap;
use std::path::Path;

pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Whitespace separates tokens; every punctuation character is a token of
/// its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespacePunctuation;

fn pieces(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace().flat_map(|word| {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, c) in word.char_indices() {
            if c.is_ascii_punctuation() {
                if start < i {
                    out.push(&word[start..i]);
                }
                out.push(&word[i..i + 1]);
                start = i + 1;
            }
        }
        if start < word.len() {
            out.push(&word[start..]);
        }
        out
    })
}

impl Tokenizer for WhitespacePunctuation {
    fn tokenize(&self, text: &str) -> Vec<String> {
        pieces(text).map(str::to_string).collect()
    }

    fn count(&self, text: &str) -> usize {
        pieces(text).count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MergeTableError {
    #[error("reading merge table: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: expected two symbols separated by a space")]
    Malformed(usize),
}

/// Byte-pair merges applied in priority order inside each pre-token produced
/// by [`WhitespacePunctuation`].
#[derive(Debug, Clone, Default)]
pub struct MergeTable {
    ranks: HashMap<(String, String), usize>,
}

impl MergeTable {
    /// One merge per line, `left right`, highest priority first. Blank lines
    /// and a leading `#version` line are ignored.
    pub fn parse(text: &str) -> Result<MergeTable, MergeTableError> {
        let mut ranks = HashMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with("#version")) {
                continue;
            }
            let mut it = line.split(' ');
            match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    let n = ranks.len();
                    ranks.entry((a.to_string(), b.to_string())).or_insert(n);
                }
                _ => return Err(MergeTableError::Malformed(k + 1)),
            }
        }
        Ok(MergeTable { ranks })
    }

    pub fn from_file(path: &Path) -> Result<MergeTable, MergeTableError> {
        MergeTable::parse(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    fn encode_word(&self, word: &str) -> Vec<String> {
        let mut parts: Vec<String> = word.chars().map(String::from).collect();
        loop {
            let best = parts
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.ranks
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&r| (r, i))
                })
                .min();
            let Some((_, i)) = best else { break };
            let right = parts.remove(i + 1);
            parts[i].push_str(&right);
        }
        parts
    }
}

impl Tokenizer for MergeTable {
    fn tokenize(&self, text: &str) -> Vec<String> {
        pieces(text).flat_map(|w| self.encode_word(w)).collect()
    }
}
