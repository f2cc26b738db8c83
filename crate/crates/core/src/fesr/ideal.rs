use std::collections::{BTreeMap, BTreeSet};

use super::{Disclosure, FeBackend, FesrError, MAX_PLAINTEXT};
use crate::func::{f0, Descriptor, FunctionSpec, FunctionState, Output};
use crate::ids::{Handle, PartyId, Role};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone)]
struct Message {
    x: Vec<u8>,
    k: u64,
}

/// The ideal functionality: a trusted party that stores plaintexts and
/// evaluates authorized functions itself.
#[derive(Debug)]
pub struct IdealDdFesr {
    seed: u64,
    setup: BTreeSet<PartyId>,
    a_set: Vec<PartyId>,
    b_set: Vec<PartyId>,
    messages: BTreeMap<Handle, Message>,
    next_handle: u64,
    key_shares: BTreeMap<(PartyId, Descriptor), Vec<PartyId>>,
    states: BTreeMap<(PartyId, Descriptor), (FunctionState, SimRng)>,
    corrupted: BTreeSet<PartyId>,
}

impl IdealDdFesr {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            setup: BTreeSet::new(),
            a_set: vec![],
            b_set: vec![],
            messages: BTreeMap::new(),
            next_handle: 1,
            key_shares: BTreeMap::new(),
            states: BTreeMap::new(),
            corrupted: BTreeSet::new(),
        }
    }

    /// Raw authorization list for `(b, f)`, duplicates included.
    pub fn key_shares(&self, b: &PartyId, f: &Descriptor) -> &[PartyId] {
        self.key_shares
            .get(&(b.clone(), *f))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Current function state of `b` for `f`.
    pub fn function_state(&self, b: &PartyId, f: &Descriptor) -> Option<&FunctionState> {
        self.states.get(&(b.clone(), *f)).map(|(s, _)| s)
    }

    pub fn is_setup(&self, party: &PartyId) -> bool {
        self.setup.contains(party)
    }

    fn corrupted_encryptors(&self) -> usize {
        self.a_set
            .iter()
            .filter(|a| self.corrupted.contains(*a))
            .count()
    }

    fn distinct_authorizers(&self, b: &PartyId, f: &Descriptor) -> usize {
        self.key_shares(b, f)
            .iter()
            .filter(|a| self.setup.contains(*a))
            .collect::<BTreeSet<_>>()
            .len()
    }
}

impl FeBackend for IdealDdFesr {
    fn setup(&mut self, party: &PartyId, role: Role) -> Result<(), FesrError> {
        if self.setup.contains(party) {
            return Err(FesrError::AlreadySetup(party.clone()));
        }
        match role {
            Role::A => self.a_set.push(party.clone()),
            Role::B => self.b_set.push(party.clone()),
            Role::C => return Ok(()),
        }
        self.setup.insert(party.clone());
        Ok(())
    }

    fn keysharegen(&mut self, a: &PartyId, f: &FunctionSpec, b: &PartyId) {
        if !self.a_set.contains(a) || !self.b_set.contains(b) {
            return;
        }
        self.key_shares
            .entry((b.clone(), f.descriptor()))
            .or_default()
            .push(a.clone());
    }

    fn encrypt(&mut self, party: &PartyId, x: &[u8], k: i64) -> Result<Handle, FesrError> {
        if !self.setup.contains(party) {
            return Err(FesrError::NotSetUp(party.clone()));
        }
        let k = u64::try_from(k).map_err(|_| FesrError::EncryptFailed)?;
        if x.len() > MAX_PLAINTEXT {
            return Err(FesrError::EncryptFailed);
        }
        let h = Handle(self.next_handle);
        self.next_handle += 1;
        self.messages.insert(h, Message { x: x.to_vec(), k });
        Ok(h)
    }

    fn decrypt(&mut self, b: &PartyId, f: &FunctionSpec, h: Handle) -> Result<Output, FesrError> {
        if !self.b_set.contains(b) {
            return Err(FesrError::NotSetUp(b.clone()));
        }
        let Message { x, k } = self
            .messages
            .get(&h)
            .cloned()
            .ok_or(FesrError::NoSuchHandle(h))?;
        if f.is_f0() {
            return Ok(Output::Value(f0(&x).to_le_bytes().to_vec()));
        }
        let d = f.descriptor();
        let have = self.distinct_authorizers(b, &d) as u64;
        let bypass = self.corrupted.contains(b) && self.corrupted_encryptors() as u64 >= k;
        if have < k && !bypass {
            return Err(FesrError::PolicyUnsatisfied { have, need: k });
        }
        let seed = self.seed;
        let (state, stream) = self.states.entry((b.clone(), d)).or_insert_with(|| {
            (
                FunctionState::default(),
                rng::function_stream(seed, b.as_str(), &d.0),
            )
        });
        let mut r = stream.clone();
        let (y, next) = f
            .evaluate(&x, state, &mut r)
            .map_err(FesrError::FunctionRejected)?;
        *state = next;
        *stream = r;
        Ok(y)
    }

    fn corrupt(&mut self, party: &PartyId) -> Disclosure {
        self.corrupted.insert(party.clone());
        if self.a_set.contains(party) {
            self.key_shares
                .iter()
                .filter(|(_, auth)| auth.contains(party))
                .map(|((b, f), _)| (b.clone(), *f))
                .collect()
        } else {
            self.key_shares
                .iter()
                .filter(|((b, _), _)| b == party)
                .flat_map(|((_, f), auth)| auth.iter().map(|a| (a.clone(), *f)))
                .collect()
        }
    }

    fn encryptor_count(&self) -> usize {
        self.a_set.len()
    }
}
