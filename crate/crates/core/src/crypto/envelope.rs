use crate::codec::{CodecError, Reader, Writer};

/// What an encryptor actually encrypts: the message, its key policy and the
/// nonce the default proof binds to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaintextEnvelope {
    pub message: Vec<u8>,
    pub threshold: u64,
    pub proof_nonce: [u8; 16],
}

impl PlaintextEnvelope {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new()
            .bytes(&self.message)
            .u64(self.threshold)
            .bytes(&self.proof_nonce)
            .finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(b);
        let env = Self {
            message: r.vec()?,
            threshold: r.u64()?,
            proof_nonce: r.fixed()?,
        };
        r.finish()?;
        Ok(env)
    }
}

/// Repository payload: ciphertext plus its proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiphertextMsg {
    pub ciphertext: Vec<u8>,
    pub proof: Vec<u8>,
}

impl CiphertextMsg {
    pub fn encode(&self) -> Vec<u8> {
        Writer::new()
            .bytes(&self.ciphertext)
            .bytes(&self.proof)
            .finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(b);
        let msg = Self {
            ciphertext: r.vec()?,
            proof: r.vec()?,
        };
        r.finish()?;
        Ok(msg)
    }
}
