//! Basic Access Control: MRZ-derived 3DES keys, the challenge/response
//! mutual authentication, and the BAC secure-messaging session.

use rand::{CryptoRng, RngCore};
use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::apdu::{CommandApdu, INS_EXTERNAL_AUTHENTICATE, INS_GET_CHALLENGE};
use crate::mrz::MrzKey;
use crate::sm::cipher::{decrypt_cbc, encrypt_cbc, retail_mac};
use crate::sm::{pad2, CipherSuite, SmSession};

const SUITE: CipherSuite = CipherSuite::Tdes;
const ZERO_IV: [u8; 8] = [0; 8];
/// E(32 bytes) ‖ MAC(8 bytes)
pub const AUTH_DATA_LEN: usize = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BacError {
    #[error("authentication cryptogram rejected")]
    AuthenticationFailed,
    #[error("authentication data has wrong length")]
    WrongLength,
}

/// K_Enc and K_MAC derived from the MRZ.
#[derive(Clone, PartialEq, Eq)]
pub struct BacKeys {
    pub k_enc: Vec<u8>,
    pub k_mac: Vec<u8>,
}

impl std::fmt::Debug for BacKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BacKeys(..)")
    }
}

pub fn key_seed(mrz: &MrzKey) -> [u8; 16] {
    let digest = Sha1::digest(mrz.bac_string().as_bytes());
    digest[..16].try_into().expect("16 bytes")
}

impl BacKeys {
    pub fn from_seed(seed: &[u8]) -> Self {
        BacKeys {
            k_enc: SUITE.kdf(seed, 1),
            k_mac: SUITE.kdf(seed, 2),
        }
    }

    pub fn from_mrz(mrz: &MrzKey) -> Self {
        Self::from_seed(&key_seed(mrz))
    }

    fn seal(&self, plain: &[u8; 32]) -> Vec<u8> {
        let e = encrypt_cbc(SUITE, &self.k_enc, &ZERO_IV, plain);
        let m = retail_mac(&self.k_mac, &pad2(&e, 8));
        let mut out = e;
        out.extend_from_slice(&m);
        out
    }

    fn open(&self, data: &[u8]) -> Result<[u8; 32], BacError> {
        if data.len() != AUTH_DATA_LEN {
            return Err(BacError::WrongLength);
        }
        let (e, m) = data.split_at(32);
        if retail_mac(&self.k_mac, &pad2(e, 8))[..] != m[..] {
            return Err(BacError::AuthenticationFailed);
        }
        let plain = decrypt_cbc(SUITE, &self.k_enc, &ZERO_IV, e).ok_or(BacError::AuthenticationFailed)?;
        Ok(plain.try_into().expect("32 bytes"))
    }
}

fn session(k_ifd: &[u8], k_ic: &[u8], rnd_ic: &[u8; 8], rnd_ifd: &[u8; 8]) -> SmSession {
    let seed: Vec<u8> = k_ifd.iter().zip(k_ic).map(|(a, b)| a ^ b).collect();
    let keys = BacKeys::from_seed(&seed);
    let mut ssc = [0u8; 8];
    ssc[..4].copy_from_slice(&rnd_ic[4..]);
    ssc[4..].copy_from_slice(&rnd_ifd[4..]);
    SmSession::from_keys(SUITE, keys.k_enc, keys.k_mac, u64::from_be_bytes(ssc) as u128)
}

pub fn get_challenge() -> CommandApdu {
    CommandApdu::new(0x00, INS_GET_CHALLENGE, 0, 0, Vec::new(), Some(8)).expect("static")
}

/// Terminal half of the exchange, between EXTERNAL AUTHENTICATE and its
/// response.
pub struct TerminalAuth {
    keys: BacKeys,
    rnd_ic: [u8; 8],
    rnd_ifd: [u8; 8],
    k_ifd: [u8; 16],
}

impl TerminalAuth {
    pub fn new<R: RngCore + CryptoRng>(keys: BacKeys, rnd_ic: [u8; 8], rng: &mut R) -> Self {
        let mut rnd_ifd = [0u8; 8];
        let mut k_ifd = [0u8; 16];
        rng.fill_bytes(&mut rnd_ifd);
        rng.fill_bytes(&mut k_ifd);
        Self::with_nonces(keys, rnd_ic, rnd_ifd, k_ifd)
    }

    pub fn with_nonces(keys: BacKeys, rnd_ic: [u8; 8], rnd_ifd: [u8; 8], k_ifd: [u8; 16]) -> Self {
        TerminalAuth {
            keys,
            rnd_ic,
            rnd_ifd,
            k_ifd,
        }
    }

    pub fn command(&self) -> CommandApdu {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&self.rnd_ifd);
        s[8..16].copy_from_slice(&self.rnd_ic);
        s[16..].copy_from_slice(&self.k_ifd);
        CommandApdu::new(
            0x00,
            INS_EXTERNAL_AUTHENTICATE,
            0,
            0,
            self.keys.seal(&s),
            Some(AUTH_DATA_LEN as u16),
        )
        .expect("40 bytes")
    }

    pub fn finish(self, response: &[u8]) -> Result<SmSession, BacError> {
        let r = self.keys.open(response)?;
        if r[..8] != self.rnd_ic || r[8..16] != self.rnd_ifd {
            return Err(BacError::AuthenticationFailed);
        }
        Ok(session(&self.k_ifd, &r[16..], &self.rnd_ic, &self.rnd_ifd))
    }
}

/// Chip half: checks the terminal cryptogram against the issued challenge
/// and answers with its own key share.
pub fn chip_authenticate(
    keys: &BacKeys,
    rnd_ic: &[u8; 8],
    data: &[u8],
    k_ic: &[u8; 16],
) -> Result<(Vec<u8>, SmSession), BacError> {
    let s = keys.open(data)?;
    if s[8..16] != rnd_ic[..] {
        return Err(BacError::AuthenticationFailed);
    }
    let rnd_ifd: [u8; 8] = s[..8].try_into().expect("8 bytes");
    let mut r = [0u8; 32];
    r[..8].copy_from_slice(rnd_ic);
    r[8..16].copy_from_slice(&rnd_ifd);
    r[16..].copy_from_slice(k_ic);
    let session = session(&s[16..], k_ic, rnd_ic, &rnd_ifd);
    Ok((keys.seal(&r), session))
}
