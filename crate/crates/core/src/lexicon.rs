//! Identifier splitting and verb/noun tagging.
//!
//! Replaces a part-of-speech tagger with a plain-text verb lexicon: the word
//! list ships with the crate and can be swapped for another file at load
//! time. A word is a verb iff it is listed; everything else alphabetic is a
//! noun. Tagging is deterministic and case-insensitive by construction since
//! all split words are lowercased.

use std::collections::BTreeSet;
use std::path::Path;

use crate::{Error, Result};

/// Tag assigned to one split word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Verb,
    Noun,
    Other,
}

/// A lowercase word with its tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordTag {
    pub word: String,
    pub tag: Tag,
}

/// Verb word list; all lookups go through this.
#[derive(Debug, Clone)]
pub struct Lexicon {
    verbs: BTreeSet<String>,
}

const DEFAULT_VERBS: &str = include_str!("data/verbs.txt");

impl Lexicon {
    /// The verb list shipped with the crate.
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_VERBS).expect("shipped lexicon is well-formed")
    }

    /// Load a lexicon file: UTF-8, one lowercase verb per line, `#` comments.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::format(path, msg.line, msg.message))
    }

    fn parse(text: &str) -> std::result::Result<Self, ParseIssue> {
        let mut verbs = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.chars().any(|c| c.is_whitespace()) || line != line.to_lowercase() {
                return Err(ParseIssue {
                    line: idx + 1,
                    message: format!("expected one lowercase word, got {line:?}"),
                });
            }
            verbs.insert(line.to_string());
        }
        Ok(Lexicon { verbs })
    }

    pub fn len(&self) -> usize {
        self.verbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verbs.is_empty()
    }

    /// Tag one lowercase word: listed verb, alphabetic noun, anything else
    /// `Other`.
    pub fn tag(&self, word: &str) -> WordTag {
        let tag = if self.verbs.contains(word) {
            Tag::Verb
        } else if !word.is_empty() && word.chars().all(|c| c.is_ascii_alphabetic()) {
            Tag::Noun
        } else {
            Tag::Other
        };
        WordTag {
            word: word.to_string(),
            tag,
        }
    }

    /// The verb part of a method name: the first split word when it is a
    /// listed verb, absent otherwise.
    pub fn verb_of(&self, name: &str) -> Option<String> {
        let words = split_identifier(name);
        let first = words.first()?;
        match self.tag(first).tag {
            Tag::Verb => Some(first.clone()),
            _ => None,
        }
    }

    /// All noun-tagged words of a method name.
    pub fn nouns_of(&self, name: &str) -> BTreeSet<String> {
        split_identifier(name)
            .into_iter()
            .filter(|w| self.tag(w).tag == Tag::Noun)
            .collect()
    }
}

#[derive(Debug)]
struct ParseIssue {
    line: usize,
    message: String,
}

/// Split a compound identifier into lowercase words.
///
/// Boundaries: underscores, dollar signs, lower-to-upper transitions,
/// letter/digit transitions, and the last capital of an acronym run followed
/// by a lowercase letter (`parseHTTPHeader` -> `parse`, `http`, `header`).
/// Digit-only segments are dropped.
pub fn split_identifier(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut words = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        if !current.is_empty() && !current.chars().all(|c| c.is_ascii_digit()) {
            words.push(current.to_lowercase());
        }
        current.clear();
    };
    for i in 0..chars.len() {
        let c = chars[i];
        if c == '_' || c == '$' {
            flush(&mut current);
            continue;
        }
        let prev = current.chars().last();
        let boundary = match prev {
            None => false,
            Some(p) => {
                (p.is_lowercase() && c.is_uppercase())
                    || (p.is_ascii_digit() != c.is_ascii_digit())
                    // End of an acronym run: next char is lowercase.
                    || (p.is_uppercase()
                        && c.is_uppercase()
                        && chars.get(i + 1).is_some_and(|n| n.is_lowercase()))
            }
        };
        if boundary {
            flush(&mut current);
        }
        current.push(c);
    }
    flush(&mut current);
    words
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn camel_case_split() {
        assert_eq!(split_identifier("saveFile"), ["save", "file"]);
    }

    #[test]
    fn acronym_grouping() {
        assert_eq!(split_identifier("parseHTTPHeader"), ["parse", "http", "header"]);
        assert_eq!(split_identifier("toXML"), ["to", "xml"]);
    }

    #[test]
    fn underscores_and_digits() {
        assert_eq!(split_identifier("get_name2"), ["get", "name"]);
        assert_eq!(split_identifier("__init__"), ["init"]);
        assert_eq!(split_identifier("v2"), ["v"]);
    }

    #[test]
    fn dollar_signs_split() {
        assert_eq!(split_identifier("outer$inner"), ["outer", "inner"]);
    }

    #[test]
    fn single_word() {
        assert_eq!(split_identifier("parse"), ["parse"]);
        assert_eq!(split_identifier("X"), ["x"]);
    }

    #[test]
    fn tagging() {
        let lex = Lexicon::shipped();
        assert_eq!(lex.tag("get").tag, Tag::Verb);
        assert_eq!(lex.tag("name").tag, Tag::Noun);
        assert_eq!(lex.tag("http").tag, Tag::Noun);
        assert_eq!(lex.tag("123").tag, Tag::Other);
        assert_eq!(lex.tag("").tag, Tag::Other);
    }

    #[test]
    fn verb_of_first_word_priority() {
        let lex = Lexicon::shipped();
        assert_eq!(lex.verb_of("getName").as_deref(), Some("get"));
        assert_eq!(lex.verb_of("nameOf"), None);
        assert_eq!(lex.verb_of("set").as_deref(), Some("set"));
    }

    #[test]
    fn nouns_of_examples() {
        let lex = Lexicon::shipped();
        let nouns: Vec<_> = lex.nouns_of("getName").into_iter().collect();
        assert_eq!(nouns, ["name"]);
        let nouns: Vec<_> = lex.nouns_of("openCloseFile").into_iter().collect();
        assert_eq!(nouns, ["file"]);
        assert!(lex.nouns_of("get").is_empty());
    }

    #[test]
    fn verb_of_agrees_with_first_split_word() {
        let lex = Lexicon::shipped();
        for name in ["saveFile", "flushCache", "doRun", "name", "isEmpty"] {
            if let Some(verb) = lex.verb_of(name) {
                assert_eq!(Some(verb.as_str()), split_identifier(name).first().map(|s| s.as_str()));
            }
        }
    }

    #[test]
    fn custom_lexicon_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verbs.txt");
        std::fs::write(&path, "# comment\nfoo\nbar # trailing\n\n").unwrap();
        let lex = Lexicon::from_path(&path).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.tag("foo").tag, Tag::Verb);
        assert_eq!(lex.tag("get").tag, Tag::Noun);
    }

    #[test]
    fn malformed_lexicon_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verbs.txt");
        std::fs::write(&path, "ok\nTwo Words\n").unwrap();
        match Lexicon::from_path(&path).unwrap_err() {
            crate::Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    proptest! {
        /// Joining the split words reproduces the identifier's letters in order.
        #[test]
        fn split_preserves_letter_sequence(name in "[a-zA-Z_$][a-zA-Z0-9_$]{0,20}") {
            let words = split_identifier(&name);
            let joined: String = words.concat();
            let letters: String = name
                .chars()
                .filter(|c| c.is_ascii_alphabetic())
                .map(|c| c.to_ascii_lowercase())
                .collect();
            // Digit segments are dropped, letters must survive in order.
            let survivors: String = joined.chars().filter(|c| c.is_ascii_alphabetic()).collect();
            prop_assert_eq!(survivors, letters);
        }

        /// Split output is lowercase, non-empty, never digits-only.
        #[test]
        fn split_output_well_formed(name in "[a-zA-Z_$][a-zA-Z0-9_$]{0,20}") {
            for word in split_identifier(&name) {
                prop_assert!(!word.is_empty());
                prop_assert_eq!(word.clone(), word.to_lowercase());
                prop_assert!(!word.chars().all(|c| c.is_ascii_digit()));
            }
        }
    }
}
