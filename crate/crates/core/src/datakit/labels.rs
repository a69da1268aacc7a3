use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HATE: &str = "Hate";
pub const NO_HATE: &str = "NoHate";

/// The six multi-class hate labels; every class except "No Hate" merges to Hate.
pub const MMHS_CLASSES: [&str; 6] = ["No Hate", "Racist", "Sexist", "Homophobic", "Religion-based", "Other Hate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    Binary,
    Multi,
}

/// Ordered class names plus an optional multi-to-binary merge map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub names: Vec<String>,
    pub mode: LabelMode,
    /// For each class, its index in the binary `[Hate, NoHate]` space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge: Option<Vec<usize>>,
}

impl LabelSpace {
    /// `[Hate, NoHate]`.
    pub fn binary() -> Self {
        Self {
            names: vec![HATE.into(), NO_HATE.into()],
            mode: LabelMode::Binary,
            merge: Some(vec![0, 1]),
        }
    }

    /// Six-class hate-speech labels with their binary merge.
    pub fn mmhs() -> Self {
        Self {
            names: MMHS_CLASSES.iter().map(|s| s.to_string()).collect(),
            mode: LabelMode::Multi,
            merge: Some(MMHS_CLASSES.iter().map(|c| usize::from(*c == "No Hate")).collect()),
        }
    }

    /// User-supplied classes without a binary merge.
    pub fn custom<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let space = Self {
            mode: if names.len() == 2 { LabelMode::Binary } else { LabelMode::Multi },
            names,
            merge: None,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() < 2 {
            return Err(Error::Schema(format!("label space needs at least two classes, got {:?}", self.names)));
        }
        for (i, n) in self.names.iter().enumerate() {
            if self.names[..i].contains(n) {
                return Err(Error::Schema(format!("duplicate class {n:?}")));
            }
        }
        if let Some(m) = &self.merge {
            if m.len() != self.names.len() || m.iter().any(|&b| b > 1) {
                return Err(Error::Schema("merge map must send every class to 0 (Hate) or 1 (NoHate)".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Schema(format!("unknown label {name:?}; expected one of {:?}", self.names)))
    }

    pub fn name(&self, id: usize) -> Result<&str> {
        self.names
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::Schema(format!("label id {id} outside {} classes", self.names.len())))
    }
}

/// Maps a class id of `space` to its id in [`LabelSpace::binary`].
pub fn merge_to_binary(label: usize, space: &LabelSpace) -> Result<usize> {
    space.name(label)?;
    let merge = space
        .merge
        .as_ref()
        .ok_or_else(|| Error::Schema(format!("label space {:?} has no binary merge", space.names)))?;
    Ok(merge[label])
}
