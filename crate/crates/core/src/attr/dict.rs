//! Persistent token dictionaries for categorical and list attributes.
//!
//! Each field keeps a 1:1 map from token to a positive code. Codes are
//! handed out densely from 1 in first-seen order while training; code 0
//! means absent, 65534 is every GREASE token, and 65535 marks tokens never
//! seen during training. A store loaded from disk is frozen: models and
//! dictionaries version together, so inference must not grow them.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attr::registry::GREASE_TOKEN;
use crate::error::CodecError;

pub const ABSENT_CODE: u64 = 0;
pub const GREASE_CODE: u64 = 65534;
pub const UNSEEN_CODE: u64 = 65535;
const MAX_DENSE_CODE: u64 = GREASE_CODE - 1;

const SCHEMA: &str = "platsight-dicts-v1";

#[derive(Debug, Clone, Default)]
struct FieldDict {
    values: Vec<String>,
    index: HashMap<String, u64>,
}

impl FieldDict {
    fn get(&self, token: &str) -> Option<u64> {
        self.index.get(token).copied()
    }

    fn insert(&mut self, token: &str) -> u64 {
        let code = self.values.len() as u64 + 1;
        self.values.push(token.to_string());
        self.index.insert(token.to_string(), code);
        code
    }
}

#[derive(Debug, Clone, Default)]
pub struct DictionaryStore {
    fields: BTreeMap<String, FieldDict>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    schema: String,
    fields: BTreeMap<String, Vec<String>>,
}

impl DictionaryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Code for a token while training: known tokens return their code,
    /// new tokens get the next dense code. `field` is the attribute label.
    pub fn code_train(&mut self, field: &str, token: &str) -> Result<u64, CodecError> {
        if token == GREASE_TOKEN {
            return Ok(GREASE_CODE);
        }
        if let Some(code) = self.fields.get(field).and_then(|d| d.get(token)) {
            return Ok(code);
        }
        if self.frozen {
            return Err(CodecError::FrozenDictionary {
                field: field.to_string(),
                value: token.to_string(),
            });
        }
        let dict = self.fields.entry(field.to_string()).or_default();
        if dict.values.len() as u64 >= MAX_DENSE_CODE {
            return Err(CodecError::DictionaryOverflow(field.to_string()));
        }
        Ok(dict.insert(token))
    }

    /// Code for a token at inference: tokens outside the dictionary map to
    /// the unseen sentinel instead of growing the store.
    pub fn code_infer(&self, field: &str, token: &str) -> u64 {
        if token == GREASE_TOKEN {
            return GREASE_CODE;
        }
        self.fields
            .get(field)
            .and_then(|d| d.get(token))
            .unwrap_or(UNSEEN_CODE)
    }

    /// Number of distinct tokens recorded for a field.
    pub fn field_len(&self, field: &str) -> usize {
        self.fields.get(field).map_or(0, |d| d.values.len())
    }

    /// Content hash identifying this store. Models record it so a model is
    /// never applied with dictionaries it was not trained with.
    pub fn version(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(SCHEMA.as_bytes());
        for (field, dict) in &self.fields {
            hasher.update([0u8]);
            hasher.update(field.as_bytes());
            for value in &dict.values {
                hasher.update([1u8]);
                hasher.update(value.as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<(), CodecError> {
        let file = StoreFile {
            schema: SCHEMA.to_string(),
            fields: self
                .fields
                .iter()
                .map(|(k, d)| (k.clone(), d.values.clone()))
                .collect(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Loads a store; the result is frozen.
    pub fn load(path: &Path) -> Result<Self, CodecError> {
        let text = std::fs::read_to_string(path)?;
        let file: StoreFile = serde_json::from_str(&text)?;
        if file.schema != SCHEMA {
            return Err(CodecError::SchemaVersionMismatch {
                expected: SCHEMA.to_string(),
                found: file.schema,
            });
        }
        let mut store = DictionaryStore {
            fields: BTreeMap::new(),
            frozen: true,
        };
        for (field, values) in file.fields {
            let mut dict = FieldDict::default();
            for value in values {
                dict.insert(&value);
            }
            store.fields.insert(field, dict);
        }
        Ok(store)
    }
}
