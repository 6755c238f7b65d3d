//! Symbol set, symbol-to-feature associations and description parsing.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Raw perceptual channels measured for every object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    XPos,
    YPos,
    Width,
    Height,
    Size,
    Hue,
    Light,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::XPos,
        Channel::YPos,
        Channel::Width,
        Channel::Height,
        Channel::Size,
        Channel::Hue,
        Channel::Light,
    ];

    /// Channels that carry a linear scalar (everything except hue).
    pub const SCALAR: [Channel; 6] = [
        Channel::XPos,
        Channel::YPos,
        Channel::Width,
        Channel::Height,
        Channel::Size,
        Channel::Light,
    ];

    /// Number of feature entries this channel contributes to a symbol vector.
    pub fn encoded_dim(self) -> usize {
        2
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::XPos => "x_pos",
            Channel::YPos => "y_pos",
            Channel::Width => "width",
            Channel::Height => "height",
            Channel::Size => "size",
            Channel::Hue => "hue",
            Channel::Light => "light",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub index: usize,
}

/// An ordered, closed set of symbols. The order fixes the global parameter layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    symbols: Vec<Symbol>,
    associations: Vec<Vec<Channel>>,
    offsets: Vec<usize>,
    total_dim: usize,
}

const DEFAULT_SYMBOLS: [(&str, &[Channel]); 15] = [
    ("left", &[Channel::XPos]),
    ("right", &[Channel::XPos]),
    ("top", &[Channel::YPos]),
    ("bottom", &[Channel::YPos]),
    ("thin", &[Channel::Width]),
    ("wide", &[Channel::Width]),
    ("short", &[Channel::Height]),
    ("tall", &[Channel::Height]),
    ("small", &[Channel::Size]),
    ("big", &[Channel::Size]),
    ("red", &[Channel::Hue]),
    ("green", &[Channel::Hue]),
    ("blue", &[Channel::Hue]),
    ("yellow", &[Channel::Hue]),
    ("white", &[Channel::Light]),
];

/// The blocks-world lexicon: four location, six geometry and five chromatic labels.
pub fn default_lexicon() -> Lexicon {
    Lexicon::new(
        DEFAULT_SYMBOLS
            .iter()
            .map(|(name, chans)| (name.to_string(), chans.to_vec()))
            .collect(),
    )
    .expect("built-in lexicon is valid")
}

impl Lexicon {
    pub fn new(entries: Vec<(String, Vec<Channel>)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut symbols = Vec::with_capacity(entries.len());
        let mut associations = Vec::with_capacity(entries.len());
        let mut offsets = Vec::with_capacity(entries.len());
        let mut total_dim = 0;
        for (index, (name, channels)) in entries.into_iter().enumerate() {
            let name = name.to_lowercase();
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::InvalidLexicon(format!("bad symbol name {name:?}")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidLexicon(format!("duplicate symbol {name}")));
            }
            if channels.is_empty() {
                return Err(Error::InvalidLexicon(format!("symbol {name} has no channels")));
            }
            offsets.push(total_dim);
            total_dim += channels.iter().map(|c| c.encoded_dim()).sum::<usize>();
            symbols.push(Symbol { name, index });
            associations.push(channels);
        }
        Ok(Lexicon {
            symbols,
            associations,
            offsets,
            total_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> &Symbol {
        &self.symbols[index]
    }

    pub fn lookup(&self, name: &str) -> Option<&Symbol> {
        let name = name.to_lowercase();
        self.symbols.iter().find(|s| s.name == name)
    }

    pub fn channels(&self, index: usize) -> &[Channel] {
        &self.associations[index]
    }

    /// Feature dimension of one symbol.
    pub fn dim(&self, index: usize) -> usize {
        self.associations[index]
            .iter()
            .map(|c| c.encoded_dim())
            .sum()
    }

    /// Start of the symbol's block in the flat parameter vector.
    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn parse_description<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Description> {
        let mut set = BTreeSet::new();
        for tok in tokens {
            let tok = tok.as_ref();
            match self.lookup(tok) {
                Some(sym) => {
                    set.insert(sym.index);
                }
                None => return Err(Error::UnknownSymbol(tok.to_string())),
            }
        }
        Ok(Description { symbols: set })
    }

    /// Whitespace-split convenience wrapper around [`Lexicon::parse_description`].
    pub fn parse_str(&self, text: &str) -> Result<Description> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        self.parse_description(&tokens)
    }

    pub fn render(&self, desc: &Description) -> Vec<String> {
        desc.iter().map(|i| self.symbols[i].name.clone()).collect()
    }
}

impl Serialize for Lexicon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            name: &'a str,
            channels: &'a [Channel],
            dim: usize,
        }
        let entries: Vec<Out> = self
            .symbols
            .iter()
            .map(|sym| Out {
                name: &sym.name,
                channels: &self.associations[sym.index],
                dim: self.dim(sym.index),
            })
            .collect();
        entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lexicon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct In {
            name: String,
            channels: Vec<Channel>,
            #[serde(default)]
            dim: Option<usize>,
        }
        let entries = Vec::<In>::deserialize(d)?;
        let mut pairs = Vec::with_capacity(entries.len());
        for e in entries {
            let dim: usize = e.channels.iter().map(|c| c.encoded_dim()).sum();
            if let Some(declared) = e.dim {
                if declared != dim {
                    return Err(serde::de::Error::custom(format!(
                        "symbol {} declares dim {declared}, channels give {dim}",
                        e.name
                    )));
                }
            }
            pairs.push((e.name, e.channels));
        }
        Lexicon::new(pairs).map_err(serde::de::Error::custom)
    }
}

/// A set of symbol indices, read conjunctively. Empty is valid and uninformative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Description {
    symbols: BTreeSet<usize>,
}

impl Description {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        Description {
            symbols: indices.into_iter().collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.symbols.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.symbols.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn union(&self, other: &Description) -> Description {
        Description {
            symbols: self.symbols.union(&other.symbols).copied().collect(),
        }
    }
}

impl fmt::Display for Description {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.symbols.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_has_fifteen_symbols_in_listing_order() {
        let lex = default_lexicon();
        assert_eq!(lex.len(), 15);
        let names: Vec<&str> = lex.symbols().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "left", "right", "top", "bottom", "thin", "wide", "short", "tall", "small",
                "big", "red", "green", "blue", "yellow", "white"
            ]
        );
        for (i, s) in lex.symbols().iter().enumerate() {
            assert_eq!(s.index, i);
        }
        assert_eq!(lex.total_dim(), 30);
    }

    #[test]
    fn associations() {
        let lex = default_lexicon();
        let ch = |n: &str| lex.channels(lex.lookup(n).unwrap().index).to_vec();
        assert_eq!(ch("left"), vec![Channel::XPos]);
        assert_eq!(ch("bottom"), vec![Channel::YPos]);
        assert_eq!(ch("wide"), vec![Channel::Width]);
        assert_eq!(ch("tall"), vec![Channel::Height]);
        assert_eq!(ch("big"), vec![Channel::Size]);
        assert_eq!(ch("yellow"), vec![Channel::Hue]);
        assert_eq!(ch("white"), vec![Channel::Light]);
    }

    #[test]
    fn deterministic() {
        assert_eq!(default_lexicon(), default_lexicon());
    }

    #[test]
    fn parse_examples() {
        let lex = default_lexicon();
        let d = lex.parse_description(&["green", "left"]).unwrap();
        assert_eq!(d, Description::from_indices([0, 11]));
        let empty: [&str; 0] = [];
        assert!(lex.parse_description(&empty).unwrap().is_empty());
        assert_eq!(lex.parse_description(&["green", "green"]).unwrap().len(), 1);
        assert_eq!(lex.parse_description(&["GREEN"]).unwrap().len(), 1);
        match lex.parse_description(&["teal"]) {
            Err(Error::UnknownSymbol(t)) => assert_eq!(t, "teal"),
            other => panic!("expected UnknownSymbol, got {other:?}"),
        }
    }

    #[test]
    fn lexicon_json_roundtrip() {
        let lex = default_lexicon();
        let s = serde_json::to_string(&lex).unwrap();
        let back: Lexicon = serde_json::from_str(&s).unwrap();
        assert_eq!(lex, back);
    }

    #[test]
    fn rejects_duplicates_and_empty_associations() {
        assert!(Lexicon::new(vec![
            ("a".into(), vec![Channel::XPos]),
            ("A".into(), vec![Channel::YPos])
        ])
        .is_err());
        assert!(Lexicon::new(vec![("a".into(), vec![])]).is_err());
    }

    proptest! {
        #[test]
        fn parse_render_roundtrip(mask in 0u32..(1 << 15)) {
            let lex = default_lexicon();
            let desc = Description::from_indices((0..15).filter(|i| mask & (1 << i) != 0));
            let tokens = lex.render(&desc);
            prop_assert_eq!(lex.parse_description(&tokens).unwrap(), desc);
        }
    }
}
