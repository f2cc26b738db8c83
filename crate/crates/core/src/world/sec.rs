use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Reader, Writer};

/// One hourly location sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensitiveData {
    pub location_cell: u32,
    pub hour: u8,
}

/// A user's sensitive samples up to `as_of_tick`, as uploaded on sharing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SecHistory {
    pub as_of_tick: u64,
    pub samples: Vec<(u64, SensitiveData)>,
}

impl SecHistory {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new()
            .u64(self.as_of_tick)
            .list(&self.samples, |w, (tick, d)| {
                w.u64(*tick).u32(d.location_cell).u32(u32::from(d.hour));
            })
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let as_of_tick = r.u64()?;
        let samples = r.list(|r| {
            let tick = r.u64()?;
            let location_cell = r.u32()?;
            let hour = r.u32()?;
            let hour = u8::try_from(hour).map_err(|_| CodecError::BadLength {
                expected: 24,
                actual: hour as usize,
            })?;
            Ok((
                tick,
                SensitiveData {
                    location_cell,
                    hour,
                },
            ))
        })?;
        r.finish()?;
        Ok(Self {
            as_of_tick,
            samples,
        })
    }
}
