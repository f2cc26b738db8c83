//! Ideal setup functionalities the protocol runs on top of: certification
//! authority, ciphertext repository, secure channels and the bulletin board.

mod cert;
mod channel;
mod rep;
mod tbb;

pub use cert::{cert_verify, CertAuthority, CertError, Certificate};
pub use channel::SecureChannels;
pub use rep::{RepError, Repository};
pub use tbb::BulletinBoard;
