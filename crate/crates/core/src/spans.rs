//! Typed spans from BIO / BIOES tag sequences.
//!
//! Repair rules (conlleval-compatible):
//! - a chunk closes before the current tag when that tag is `B`, `S` or `O`,
//!   when the previous tag was `E` or `S`, or when the type changes;
//! - an `I` or `E` with no open chunk of its type starts one;
//! - `E` and `S` close their chunk after themselves.

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bio,
    Bioes,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bio" | "iob2" => Ok(Scheme::Bio),
            "bioes" | "iobes" => Ok(Scheme::Bioes),
            _ => Err(Error::Scheme(format!("unknown tagging scheme {s:?}"))),
        }
    }
}

/// Inclusive token range with an entity type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

impl Span {
    pub fn new(start: usize, end: usize, kind: impl Into<String>) -> Self {
        Span {
            start,
            end,
            kind: kind.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prefix {
    B,
    I,
    E,
    S,
    O,
}

fn split_tag(tag: &str, scheme: Scheme) -> Result<(Prefix, &str)> {
    if tag == "O" {
        return Ok((Prefix::O, ""));
    }
    let Some((p, kind)) = tag.split_once('-') else {
        return Err(Error::Scheme(format!("tag {tag:?} has no B-/I- style prefix")));
    };
    if kind.is_empty() {
        return Err(Error::Scheme(format!("tag {tag:?} has an empty type")));
    }
    let prefix = match (p, scheme) {
        ("B", _) => Prefix::B,
        ("I", _) => Prefix::I,
        ("E", Scheme::Bioes) => Prefix::E,
        ("S", Scheme::Bioes) => Prefix::S,
        _ => return Err(Error::Scheme(format!("prefix {p:?} of tag {tag:?} is not valid under {scheme:?}"))),
    };
    Ok((prefix, kind))
}

pub fn spans_from_labels<S: AsRef<str>>(tags: &[S], scheme: Scheme) -> Result<BTreeSet<Span>> {
    let mut spans = BTreeSet::new();
    let mut open: Option<(usize, &str)> = None;
    let mut prev = Prefix::O;
    for (i, tag) in tags.iter().enumerate() {
        let (prefix, kind) = split_tag(tag.as_ref(), scheme)?;
        if let Some((start, k)) = open {
            let ends = matches!(prefix, Prefix::B | Prefix::S | Prefix::O)
                || matches!(prev, Prefix::E | Prefix::S)
                || k != kind;
            if ends {
                spans.insert(Span::new(start, i - 1, k));
                open = None;
            }
        }
        if prefix != Prefix::O && open.is_none() {
            open = Some((i, kind));
        }
        if matches!(prefix, Prefix::E | Prefix::S) {
            if let Some((start, k)) = open.take() {
                spans.insert(Span::new(start, i, k));
            }
        }
        prev = prefix;
    }
    if let Some((start, k)) = open {
        spans.insert(Span::new(start, tags.len() - 1, k));
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[(usize, usize, &str)]) -> BTreeSet<Span> {
        v.iter().map(|&(s, e, k)| Span::new(s, e, k)).collect()
    }

    #[test]
    fn basic_bio() {
        assert_eq!(spans_from_labels(&["B-PER", "I-PER", "O"], Scheme::Bio).unwrap(), set(&[(0, 1, "PER")]));
        assert!(spans_from_labels(&["O", "O", "O"], Scheme::Bio).unwrap().is_empty());
    }

    #[test]
    fn bioes_repair() {
        let got = spans_from_labels(&["I-LOC", "B-LOC", "E-LOC"], Scheme::Bioes).unwrap();
        assert_eq!(got, set(&[(0, 0, "LOC"), (1, 2, "LOC")]));
    }

    #[test]
    fn type_change_and_stray_inside() {
        let got = spans_from_labels(&["B-PER", "I-ORG", "I-ORG", "O", "I-MISC"], Scheme::Bio).unwrap();
        assert_eq!(got, set(&[(0, 0, "PER"), (1, 2, "ORG"), (4, 4, "MISC")]));
    }

    #[test]
    fn singles_and_adjacent_ends() {
        let got = spans_from_labels(&["S-PER", "S-PER", "B-ORG", "E-ORG", "I-ORG"], Scheme::Bioes).unwrap();
        assert_eq!(got, set(&[(0, 0, "PER"), (1, 1, "PER"), (2, 3, "ORG"), (4, 4, "ORG")]));
    }

    #[test]
    fn scheme_errors() {
        assert!(matches!(spans_from_labels(&["NN"], Scheme::Bio), Err(Error::Scheme(_))));
        assert!(matches!(spans_from_labels(&["S-PER"], Scheme::Bio), Err(Error::Scheme(_))));
        assert!(matches!(spans_from_labels(&["X-PER"], Scheme::Bioes), Err(Error::Scheme(_))));
        assert!("bioes".parse::<Scheme>().is_ok());
        assert!("xyz".parse::<Scheme>().is_err());
    }
}
