use rand::RngCore;

use crate::rng::{self, SimRng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crs {
    pub bytes: [u8; 32],
    /// Only ever populated by test harnesses that need a simulation trapdoor.
    pub trapdoor: Option<Vec<u8>>,
}

/// Session-scoped CRS cell: the first `get` samples uniformly, later calls
/// return the same string.
#[derive(Debug)]
pub struct CrsFunctionality {
    rng: SimRng,
    crs: Option<Crs>,
}

impl CrsFunctionality {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::derive(seed, &[b"crs"]),
            crs: None,
        }
    }

    pub fn get(&mut self) -> Crs {
        let rng = &mut self.rng;
        self.crs
            .get_or_insert_with(|| {
                let mut bytes = [0u8; 32];
                rng.fill_bytes(&mut bytes);
                Crs {
                    bytes,
                    trapdoor: None,
                }
            })
            .clone()
    }
}
