use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

/// Token ↔ id table. Ids 0 and 1 are reserved for padding and unknown
/// tokens; the rest follow sorted token order so that the table depends only
/// on the set of training tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn build<'a, I, S>(documents: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut seen = BTreeSet::new();
        for doc in documents {
            for t in doc {
                let t = t.as_ref();
                if t != PAD_TOKEN && t != UNK_TOKEN {
                    seen.insert(t.to_string());
                }
            }
        }
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(seen);
        Self::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Maps tokens to ids, sending unseen ones to the unknown id.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_and_sorted_order() {
        let docs: Vec<Vec<&str>> = vec![vec!["b", "a"], vec!["c", "a"]];
        let v = Vocab::build(docs.iter().map(Vec::as_slice));
        assert_eq!(v.len(), 5);
        assert_eq!(v.token(0), Some(PAD_TOKEN));
        assert_eq!(v.token(1), Some(UNK_TOKEN));
        assert_eq!(v.encode(&["a", "b", "c", "zzz"]), vec![2, 3, 4, UNK_ID]);
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let docs = [vec!["x".to_string(), "y".to_string()]];
        let v = Vocab::build(docs.iter().map(Vec::as_slice));
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<pad>","<unk>","x","y"]"#);
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back.id("y"), 3);
        assert_eq!(back, v);
    }
}
