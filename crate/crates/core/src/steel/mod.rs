//! DD-Steel: the enclave-based protocol realizing [`crate::fesr`].
//!
//! One `DdSteel` value simulates every party of a run plus the setup
//! functionalities they share. Party contexts only talk through the secure
//! channels, the repository and the attestation registry.

mod wire;

use std::collections::{BTreeMap, BTreeSet};

use zeroize::Zeroize;

use crate::attest::{
    verify_attestation, AttestationSig, EnclaveInput, EnclaveOutput, Gatt, KeyShare, Program,
};
use crate::counters::{Meter, Op};
use crate::crypto::{
    pke_encrypt_with_coins, sig_keygen, sig_sign, CiphertextMsg, Crs, CrsFunctionality,
    NonceBindingProof, PkePublicKey, PlaintextEnvelope, ProofStatement, ProofSystem, ProofWitness,
    SigningKey, VerificationKey,
};
use crate::fesr::{Disclosure, FeBackend, FesrError, MAX_PLAINTEXT};
use crate::func::{Descriptor, FunctionSpec, Output};
use crate::ids::{EnclaveId, Handle, PartyId, Role, SessionId};
use crate::rng::{self, SimRng};
use crate::setups::{CertAuthority, Certificate, Repository, SecureChannels};

pub use wire::WireMsg;

use rand::RngCore;

/// Party id of the key generation authority.
pub const AUTHORITY: &str = "C";

#[derive(Debug)]
struct AuthorityContext {
    eid_kme: EnclaveId,
    mpk: PkePublicKey,
    kme_quote: AttestationSig,
}

#[derive(Debug)]
pub struct EncryptorContext {
    mpk: PkePublicKey,
    crs: Crs,
    vk: VerificationKey,
    sk: SigningKey,
    cert: Certificate,
    issued: BTreeSet<(PartyId, Descriptor)>,
}

#[derive(Debug)]
struct FeEntry {
    eid: EnclaveId,
    pk_fd: PkePublicKey,
    quote: AttestationSig,
}

#[derive(Debug)]
pub struct DecryptorContext {
    mpk: PkePublicKey,
    crs: Crs,
    eid_de: EnclaveId,
    /// Received shares per function, with the channel sender.
    key_shares: BTreeMap<Descriptor, Vec<(PartyId, KeyShare)>>,
    fe: BTreeMap<Descriptor, FeEntry>,
}

pub struct DdSteel {
    seed: u64,
    sid: SessionId,
    authority: PartyId,
    meter: Meter,
    gatt: Gatt,
    cert: CertAuthority,
    crs: CrsFunctionality,
    channels: SecureChannels,
    rep: Repository,
    kme: Option<AuthorityContext>,
    encryptors: BTreeMap<PartyId, EncryptorContext>,
    decryptors: BTreeMap<PartyId, DecryptorContext>,
    rngs: BTreeMap<PartyId, SimRng>,
    corrupted: BTreeSet<PartyId>,
    strict: bool,
    tamper_kme_quote: bool,
}

impl DdSteel {
    pub fn new(seed: u64, meter: Meter) -> Self {
        let sid = SessionId(format!("run-{seed}"));
        Self {
            seed,
            gatt: Gatt::new(seed, sid.clone(), meter.clone()),
            cert: CertAuthority::new(seed, meter.clone()),
            crs: CrsFunctionality::new(seed),
            channels: SecureChannels::new(meter.clone()),
            rep: Repository::new(),
            sid,
            authority: PartyId::from(AUTHORITY),
            meter,
            kme: None,
            encryptors: BTreeMap::new(),
            decryptors: BTreeMap::new(),
            rngs: BTreeMap::new(),
            corrupted: BTreeSet::new(),
            strict: false,
            tamper_kme_quote: false,
        }
    }

    /// Keep full channel contents for inspection.
    pub fn with_channel_tap(mut self) -> Self {
        self.channels = SecureChannels::new(self.meter.clone()).with_tap();
        self
    }

    /// Decryption enclaves set up after this abort on any invalid key share.
    pub fn with_strict_shares(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Test hook: the authority hands out a corrupted KME attestation.
    pub fn tamper_kme_quote(&mut self) {
        self.tamper_kme_quote = true;
    }

    /// Test hook: place a share in `b`'s table without the receive-side
    /// de-duplication.
    pub fn inject_share(&mut self, b: &PartyId, share: KeyShare) {
        if let Some(ctx) = self.decryptors.get_mut(b) {
            ctx.key_shares
                .entry(share.function)
                .or_default()
                .push((PartyId::from("?"), share));
        }
    }

    pub fn channels(&self) -> &SecureChannels {
        &self.channels
    }

    pub fn repository(&self) -> &Repository {
        &self.rep
    }

    pub fn meter(&self) -> &Meter {
        &self.meter
    }

    pub fn session(&self) -> &SessionId {
        &self.sid
    }

    pub fn encryptor(&self, party: &PartyId) -> Option<&EncryptorContext> {
        self.encryptors.get(party)
    }

    /// Number of enclaves installed so far.
    pub fn installed_fe_enclaves(&self, b: &PartyId) -> usize {
        self.decryptors.get(b).map_or(0, |d| d.fe.len())
    }

    fn rng_for(&mut self, party: &PartyId) -> &mut SimRng {
        let seed = self.seed;
        self.rngs
            .entry(party.clone())
            .or_insert_with(|| rng::derive(seed, &[b"party", party.as_str().as_bytes()]))
    }

    fn send(&mut self, from: &PartyId, to: &PartyId, msg: &WireMsg) -> WireMsg {
        let bytes = self.channels.send(from, to, msg.encode());
        WireMsg::decode(&bytes).expect("channel delivers what was sent")
    }

    /// C's side of a setup request: lazily bring up the KME enclave.
    fn authority_setup(&mut self) -> Result<WireMsg, FesrError> {
        if self.kme.is_none() {
            let c = self.authority.clone();
            let vk = self.cert.getk();
            let eid_kme = self.gatt.install(&c, &self.sid, Program::kme(vk))?;
            let input = EnclaveInput::KmeInit {
                crs: self.crs.get(),
                sid: self.sid.clone(),
            };
            let (out, kme_quote) = self.gatt.resume(&c, eid_kme, input)?;
            let EnclaveOutput::Mpk(mpk) = out else {
                return Err(FesrError::SetupAborted("KME init returned no key".into()));
            };
            self.kme = Some(AuthorityContext {
                eid_kme,
                mpk,
                kme_quote,
            });
        }
        let k = self.kme.as_ref().expect("initialized above");
        let mut kme_quote = k.kme_quote;
        if self.tamper_kme_quote {
            kme_quote.0 .0[0] ^= 1;
        }
        Ok(WireMsg::SetupReply {
            eid_kme: k.eid_kme,
            mpk: k.mpk,
            kme_quote,
        })
    }

    /// Common first half of A and B setup. Returns the verified KME identity.
    fn contact_authority(
        &mut self,
        party: &PartyId,
    ) -> Result<(EnclaveId, PkePublicKey), FesrError> {
        let c = self.authority.clone();
        self.send(party, &c, &WireMsg::Setup);
        let reply = self.authority_setup()?;
        let WireMsg::SetupReply {
            eid_kme,
            mpk,
            kme_quote,
        } = self.send(&c, party, &reply)
        else {
            unreachable!("authority replies with SetupReply");
        };
        let vk = self.cert.getk();
        let vk_att = self.gatt.getpk();
        self.meter.add(party, Op::SigVerify);
        let hash = Program::kme(vk).descriptor_hash();
        if !verify_attestation(
            &vk_att,
            &self.sid,
            eid_kme,
            &hash,
            &EnclaveOutput::Mpk(mpk),
            &kme_quote,
        ) {
            return Err(FesrError::SetupAborted(
                "KME attestation does not verify".into(),
            ));
        }
        Ok((eid_kme, mpk))
    }

    fn setup_encryptor(&mut self, party: &PartyId) -> Result<(), FesrError> {
        let (_, mpk) = self.contact_authority(party)?;
        self.meter.add(party, Op::SigKeygen);
        let kp = sig_keygen(self.rng_for(party));
        let cert = self.cert.sign(party, &kp.verification_key)?;
        let ctx = EncryptorContext {
            mpk,
            crs: self.crs.get(),
            vk: kp.verification_key,
            sk: kp.signing_key,
            cert,
            issued: BTreeSet::new(),
        };
        self.encryptors.insert(party.clone(), ctx);
        Ok(())
    }

    fn setup_decryptor(&mut self, party: &PartyId) -> Result<(), FesrError> {
        let (eid_kme, mpk) = self.contact_authority(party)?;
        let vk = self.cert.getk();
        let crs = self.crs.get();
        let eid_de = self.gatt.install(party, &self.sid, Program::de(vk))?;
        let input = EnclaveInput::DeInitSetup {
            eid_kme,
            crs: crs.clone(),
            idx: self.sid.clone(),
            strict: self.strict,
        };
        let (out, de_quote) = self.gatt.resume(party, eid_de, input)?;
        let EnclaveOutput::DeSetup { pk_d, .. } = out else {
            return Err(FesrError::SetupAborted("DE init returned no key".into()));
        };
        let c = self.authority.clone();
        let WireMsg::Provision {
            eid_de,
            pk_d,
            eid_kme,
            de_quote,
        } = self.send(
            party,
            &c,
            &WireMsg::Provision {
                eid_de,
                pk_d,
                eid_kme,
                de_quote,
            },
        )
        else {
            unreachable!("sent a Provision");
        };
        let input = EnclaveInput::KmeProvision {
            de_quote,
            eid_de,
            pk_d,
            eid_kme,
        };
        let (out, kme_quote) = self.gatt.resume(&c, eid_kme, input)?;
        let EnclaveOutput::KeyCiphertext(ct_key) = out else {
            return Err(FesrError::SetupAborted(
                "KME provision returned no key".into(),
            ));
        };
        let WireMsg::ProvisionReply { ct_key, kme_quote } =
            self.send(&c, party, &WireMsg::ProvisionReply { ct_key, kme_quote })
        else {
            unreachable!("sent a ProvisionReply");
        };
        self.gatt.resume(
            party,
            eid_de,
            EnclaveInput::DeCompleteSetup { ct_key, kme_quote },
        )?;
        let ctx = DecryptorContext {
            mpk,
            crs,
            eid_de,
            key_shares: BTreeMap::new(),
            fe: BTreeMap::new(),
        };
        self.decryptors.insert(party.clone(), ctx);
        Ok(())
    }

    fn fe_enclave(
        &mut self,
        b: &PartyId,
        f: &FunctionSpec,
    ) -> Result<(EnclaveId, PkePublicKey, AttestationSig), FesrError> {
        let d = f.descriptor();
        let ctx = self
            .decryptors
            .get(b)
            .ok_or_else(|| FesrError::NotSetUp(b.clone()))?;
        if let Some(e) = ctx.fe.get(&d) {
            return Ok((e.eid, e.pk_fd, e.quote));
        }
        let mpk = ctx.mpk;
        let vk = self.cert.getk();
        let eid = self
            .gatt
            .install(b, &self.sid, Program::fe(f.clone(), vk))?;
        let (out, quote) = self.gatt.resume(
            b,
            eid,
            EnclaveInput::FeInit {
                mpk,
                idx: self.sid.clone(),
            },
        )?;
        let EnclaveOutput::FeKey(pk_fd) = out else {
            unreachable!("FE init returns its key");
        };
        let entry = FeEntry { eid, pk_fd, quote };
        self.decryptors
            .get_mut(b)
            .expect("checked above")
            .fe
            .insert(d, entry);
        Ok((eid, pk_fd, quote))
    }

    /// Shares a corrupted decryptor can obtain from every corrupted encryptor.
    fn adversarial_shares(&self, f: &Descriptor, b: &PartyId) -> Vec<KeyShare> {
        self.encryptors
            .iter()
            .filter(|(a, _)| self.corrupted.contains(*a))
            .map(|(_, ctx)| ctx.share(f, b))
            .collect()
    }
}

impl EncryptorContext {
    fn share(&self, f: &Descriptor, b: &PartyId) -> KeyShare {
        let sigma = sig_sign(&self.sk, &KeyShare::signed_bytes(f, b));
        KeyShare {
            function: *f,
            sigma,
            signer_vk: self.vk,
            cert: self.cert,
        }
    }

    pub fn verification_key(&self) -> &VerificationKey {
        &self.vk
    }
}

impl FeBackend for DdSteel {
    fn setup(&mut self, party: &PartyId, role: Role) -> Result<(), FesrError> {
        if self.encryptors.contains_key(party) || self.decryptors.contains_key(party) {
            return Err(FesrError::AlreadySetup(party.clone()));
        }
        match role {
            Role::A => self.setup_encryptor(party),
            Role::B => self.setup_decryptor(party),
            Role::C => Ok(()),
        }
    }

    fn keysharegen(&mut self, a: &PartyId, f: &FunctionSpec, b: &PartyId) {
        if !self.decryptors.contains_key(b) {
            return;
        }
        let d = f.descriptor();
        let Some(ctx) = self.encryptors.get_mut(a) else {
            return;
        };
        let share = ctx.share(&d, b);
        ctx.issued.insert((b.clone(), d));
        self.meter.add(a, Op::SigSign);
        let WireMsg::KeyShareGen(share) = self.send(a, b, &WireMsg::KeyShareGen(share)) else {
            unreachable!("sent a KeyShareGen");
        };
        let list = self
            .decryptors
            .get_mut(b)
            .expect("checked above")
            .key_shares
            .entry(d)
            .or_default();
        // signatures are deterministic, so a repeat authorization is byte-identical
        if !list.iter().any(|(_, s)| *s == share) {
            list.push((a.clone(), share));
        }
    }

    fn encrypt(&mut self, party: &PartyId, x: &[u8], k: i64) -> Result<Handle, FesrError> {
        let (mpk, crs) = match (self.encryptors.get(party), self.decryptors.get(party)) {
            (Some(c), _) => (c.mpk, c.crs.clone()),
            (_, Some(c)) => (c.mpk, c.crs.clone()),
            _ => return Err(FesrError::NotSetUp(party.clone())),
        };
        let threshold = u64::try_from(k).map_err(|_| FesrError::EncryptFailed)?;
        if x.len() > MAX_PLAINTEXT {
            return Err(FesrError::EncryptFailed);
        }
        let r = self.rng_for(party);
        let mut proof_nonce = [0u8; 16];
        r.fill_bytes(&mut proof_nonce);
        let mut coins = [0u8; 32];
        r.fill_bytes(&mut coins);
        let mut envelope = PlaintextEnvelope {
            message: x.to_vec(),
            threshold,
            proof_nonce,
        };
        let mut plain = envelope.encode();
        self.meter.add(party, Op::PkeEncrypt);
        let ciphertext =
            pke_encrypt_with_coins(&mpk, &plain, coins).map_err(|_| FesrError::EncryptFailed)?;
        plain.zeroize();
        self.meter.add(party, Op::ProofProve);
        let statement = ProofStatement {
            mpk: &mpk,
            ciphertext: &ciphertext,
        };
        let proof = NonceBindingProof
            .prove(
                &crs,
                statement,
                ProofWitness {
                    envelope: &envelope,
                    coins,
                },
            )
            .map_err(|_| FesrError::EncryptFailed)?;
        envelope.message.zeroize();
        coins.zeroize();
        Ok(self.rep.write(CiphertextMsg { ciphertext, proof }))
    }

    fn decrypt(&mut self, b: &PartyId, f: &FunctionSpec, h: Handle) -> Result<Output, FesrError> {
        if !self.decryptors.contains_key(b) {
            return Err(FesrError::NotSetUp(b.clone()));
        }
        let ct_msg = self
            .rep
            .read(h)
            .map_err(|_| FesrError::NoSuchHandle(h))?
            .clone();
        let (eid_fe, pk_fd, fe_quote) = self.fe_enclave(b, f)?;
        let d = f.descriptor();
        let ctx = &self.decryptors[b];
        let mut shares: Vec<KeyShare> = ctx
            .key_shares
            .get(&d)
            .into_iter()
            .flatten()
            .map(|(_, s)| s.clone())
            .collect();
        if self.corrupted.contains(b) {
            for s in self.adversarial_shares(&d, b) {
                if !shares.contains(&s) {
                    shares.push(s);
                }
            }
        }
        let (eid_de, crs) = (ctx.eid_de, ctx.crs.clone());
        let input = EnclaveInput::DeProvision {
            shares,
            eid_fe,
            pk_fd,
            fe_quote,
            function: d,
            pid: b.clone(),
        };
        let (out, de_quote) = self.gatt.resume(b, eid_de, input)?;
        let EnclaveOutput::FeProvision { ct_key, count, .. } = out else {
            unreachable!("DE provision returns a provisioning");
        };
        let input = EnclaveInput::FeRun {
            de_quote,
            eid_de,
            ct_key,
            ct_msg,
            lks: count,
            crs,
            short_circuit: None,
        };
        match self.gatt.resume(b, eid_fe, input)? {
            (EnclaveOutput::Computed(y), _) => Ok(y),
            _ => unreachable!("FE run returns a computation"),
        }
    }

    fn corrupt(&mut self, party: &PartyId) -> Disclosure {
        self.corrupted.insert(party.clone());
        if let Some(ctx) = self.encryptors.get(party) {
            return ctx.issued.clone();
        }
        self.decryptors
            .get(party)
            .map(|ctx| {
                ctx.key_shares
                    .iter()
                    .flat_map(|(d, list)| list.iter().map(move |(a, _)| (a.clone(), *d)))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn encryptor_count(&self) -> usize {
        self.encryptors.len()
    }
}
