use std::collections::BTreeMap;

use crate::codec::{CodecError, Reader, Writer};

/// Opaque function state. The empty map is the initial state.
///
/// Encodes as a sorted key list so two equal states always serialize to the
/// same bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FunctionState(BTreeMap<String, Vec<u8>>);

impl FunctionState {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[u8]> {
        self.0.get(key).map(Vec::as_slice)
    }

    pub fn insert(&mut self, key: &str, value: Vec<u8>) {
        self.0.insert(key.to_owned(), value);
    }

    pub fn remove(&mut self, key: &str) -> Option<Vec<u8>> {
        self.0.remove(key)
    }

    pub fn encode(&self) -> Vec<u8> {
        let entries: Vec<_> = self.0.iter().collect();
        Writer::new()
            .list(&entries, |w, (k, v)| {
                w.str(k).bytes(v);
            })
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let entries = r.list(|r| Ok((r.string()?, r.vec()?)))?;
        r.finish()?;
        Ok(Self(entries.into_iter().collect()))
    }
}
