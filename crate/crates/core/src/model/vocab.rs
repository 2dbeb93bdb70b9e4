use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD_ACTION: &str = "<pad>";

/// Ordered action names; index 0 is the padding action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionVocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ActionVocab {
    /// Vocabulary over the distinct actions, sorted by name.
    pub fn from_actions<'a>(actions: impl IntoIterator<Item = &'a str>) -> Self {
        let mut names: Vec<String> = actions.into_iter().map(str::to_string).collect();
        names.sort();
        names.dedup();
        names.retain(|n| n != PAD_ACTION);
        names.insert(0, PAD_ACTION.to_string());
        Self::from_names(names).expect("deduplicated")
    }

    /// Rebuilds a vocabulary from its full name list (padding first).
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.first().map(String::as_str) != Some(PAD_ACTION) {
            return Err(Error::Config("action vocabulary must start with the padding action".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate action {n:?} in vocabulary")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.len() <= 1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, action: &str) -> Result<usize> {
        match self.index.get(action) {
            Some(&0) | None => Err(Error::Vocabulary(action.to_string())),
            Some(&i) => Ok(i),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_first_and_sorted() {
        let v = ActionVocab::from_actions(["share", "like", "like", "comment"]);
        assert_eq!(v.names(), &[PAD_ACTION, "comment", "like", "share"]);
        assert_eq!(v.index_of("like").unwrap(), 2);
        assert!(matches!(v.index_of("wow"), Err(Error::Vocabulary(_))));
        assert!(v.index_of(PAD_ACTION).is_err());
    }
}
