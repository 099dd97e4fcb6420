use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::value::hex_digest;
use crate::inversion::fnv64;

/// Append-only, content-addressed blob store shared between sessions.
/// Ids are the hex FNV-1a 64 of the bytes.
#[derive(Clone, Debug, Default)]
pub struct ArtifactStore {
    inner: Arc<RwLock<HashMap<String, Arc<Vec<u8>>>>>,
}

impl ArtifactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn id_of(bytes: &[u8]) -> String {
        hex_digest(fnv64(bytes))
    }

    pub fn put(&self, bytes: Vec<u8>) -> String {
        let id = Self::id_of(&bytes);
        self.inner.write().expect("artifact lock").entry(id.clone()).or_insert_with(|| Arc::new(bytes));
        id
    }

    pub fn get(&self, id: &str) -> Option<Arc<Vec<u8>>> {
        self.inner.read().expect("artifact lock").get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.inner.read().expect("artifact lock").contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("artifact lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
