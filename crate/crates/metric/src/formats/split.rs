//! Dataset split manifest: `<image_id> <train|val|test>` per line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        })
    }
}

/// Disjoint assignment of image ids to splits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitManifest {
    assignment: BTreeMap<String, Split>,
}

impl SplitManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            match fields.as_slice() {
                [] => continue,
                [id, split] => {
                    let split = split.parse().map_err(|e: Error| Error::Parse { line, msg: e.to_string() })?;
                    if assignment.insert(id.to_string(), split).is_some() {
                        return Err(Error::Parse { line, msg: format!("image `{id}` listed twice") });
                    }
                }
                _ => return Err(Error::Parse { line, msg: "expected `<image_id> <train|val|test>`".into() }),
            }
        }
        Ok(Self { assignment })
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn split_of(&self, image_id: &str) -> Option<Split> {
        self.assignment.get(image_id).copied()
    }

    /// Sorted image ids of one split.
    pub fn ids(&self, split: Split) -> Vec<&str> {
        self.assignment.iter().filter(|(_, s)| **s == split).map(|(id, _)| id.as_str()).collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        [Split::Train, Split::Val, Split::Test].map(|s| self.ids(s).len())
    }

    pub fn to_text(&self) -> String {
        self.assignment.iter().map(|(id, s)| format!("{id} {s}\n")).collect()
    }
}
