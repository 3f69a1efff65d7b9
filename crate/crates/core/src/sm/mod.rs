//! Chip-authentication secure messaging: session key derivation, padding,
//! and encrypt-then-MAC wrapping of command and response APDUs.
//!
//! Protected commands carry `87 01‖E(pad(data))`, `97 Le` and `8E MAC`;
//! protected responses carry `87`, `99 SW` and `8E`. The MAC input is
//! `pad(SSC ‖ [pad(header)] ‖ data objects)` and the counter advances once
//! per protect or unprotect call, so a command uses an odd counter value and
//! its response the following even one.

pub mod cipher;

use std::fmt;

use sha1::Sha1;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::apdu::{ApduError, CommandApdu, ResponseApdu, StatusWord};
use crate::tlv::{TlvError, TlvObject, TlvReader};

pub const TAG_CRYPTOGRAM: u16 = 0x87;
pub const TAG_LE: u16 = 0x97;
pub const TAG_STATUS: u16 = 0x99;
pub const TAG_MAC: u16 = 0x8E;

/// CLA bits marking a command as secure-messaging protected.
pub const CLA_SM: u8 = 0x0C;

pub const MAC_LEN: usize = 8;

const KDF_ENC: u32 = 1;
const KDF_MAC: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmError {
    #[error("MAC verification failed")]
    MacMismatch,
    #[error("secure messaging objects missing or malformed")]
    MalformedSmObjects,
    #[error("protected status word disagrees with the outer status")]
    StatusMismatch,
    #[error("no padding marker found")]
    NoPaddingMarker,
    #[error("send sequence counter exhausted")]
    CounterExhausted,
}

impl From<TlvError> for SmError {
    fn from(_: TlvError) -> Self {
        SmError::MalformedSmObjects
    }
}

impl From<ApduError> for SmError {
    fn from(_: ApduError) -> Self {
        SmError::MalformedSmObjects
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CipherSuite {
    /// id-CA-DH-3DES-CBC-CBC
    Tdes,
    /// id-CA-DH-AES-CBC-CMAC-128
    Aes128,
    /// id-CA-DH-AES-CBC-CMAC-192
    Aes192,
    /// id-CA-DH-AES-CBC-CMAC-256
    Aes256,
}

impl CipherSuite {
    pub const ALL: [CipherSuite; 4] = [
        CipherSuite::Tdes,
        CipherSuite::Aes128,
        CipherSuite::Aes192,
        CipherSuite::Aes256,
    ];

    pub fn block_size(self) -> usize {
        match self {
            CipherSuite::Tdes => 8,
            _ => 16,
        }
    }

    pub fn key_len(self) -> usize {
        match self {
            CipherSuite::Tdes | CipherSuite::Aes128 => 16,
            CipherSuite::Aes192 => 24,
            CipherSuite::Aes256 => 32,
        }
    }

    pub fn is_aes(self) -> bool {
        self != CipherSuite::Tdes
    }

    /// Width of the send sequence counter in bytes.
    pub fn ssc_len(self) -> usize {
        self.block_size()
    }

    /// Single-byte code used by the file formats.
    pub fn code(self) -> u8 {
        match self {
            CipherSuite::Tdes => 1,
            CipherSuite::Aes128 => 2,
            CipherSuite::Aes192 => 3,
            CipherSuite::Aes256 => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.code() == code)
    }

    /// DER body of the id-CA-ECDH-* object identifier (0.4.0.127.0.7.2.2.3.2.x).
    pub fn oid(self) -> [u8; 10] {
        [0x04, 0x00, 0x7F, 0x00, 0x07, 0x02, 0x02, 0x03, 0x02, self.code()]
    }

    pub fn from_oid(oid: &[u8]) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.oid() == oid)
    }

    pub fn name(self) -> &'static str {
        match self {
            CipherSuite::Tdes => "id-CA-DH-3DES-CBC-CBC",
            CipherSuite::Aes128 => "id-CA-DH-AES-CBC-CMAC-128",
            CipherSuite::Aes192 => "id-CA-DH-AES-CBC-CMAC-192",
            CipherSuite::Aes256 => "id-CA-DH-AES-CBC-CMAC-256",
        }
    }

    /// Key derivation `H(secret ‖ counter)` truncated to the key length,
    /// SHA-1 for 3DES and AES-128 keys, SHA-256 otherwise.
    pub fn kdf(self, secret: &[u8], counter: u32) -> Vec<u8> {
        let digest: Vec<u8> = match self {
            CipherSuite::Tdes | CipherSuite::Aes128 => Sha1::new()
                .chain_update(secret)
                .chain_update(counter.to_be_bytes())
                .finalize()
                .to_vec(),
            CipherSuite::Aes192 | CipherSuite::Aes256 => Sha256::new()
                .chain_update(secret)
                .chain_update(counter.to_be_bytes())
                .finalize()
                .to_vec(),
        };
        let mut key = digest[..self.key_len()].to_vec();
        if self == CipherSuite::Tdes {
            cipher::adjust_des_parity(&mut key);
        }
        key
    }
}

impl fmt::Display for CipherSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Padding method 2: append 0x80 then zeros up to the next block boundary.
pub fn pad2(data: &[u8], block_size: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + block_size);
    out.extend_from_slice(data);
    out.push(0x80);
    while out.len() % block_size != 0 {
        out.push(0);
    }
    out
}

pub fn unpad2(data: &[u8], block_size: usize) -> Result<Vec<u8>, SmError> {
    if data.is_empty() || !data.len().is_multiple_of(block_size) {
        return Err(SmError::NoPaddingMarker);
    }
    let end = data.iter().rposition(|&b| b != 0).ok_or(SmError::NoPaddingMarker)?;
    if data[end] != 0x80 || data.len() - end > block_size {
        return Err(SmError::NoPaddingMarker);
    }
    Ok(data[..end].to_vec())
}

fn tlv_size(value_len: usize) -> usize {
    let len_len = match value_len {
        0..=0x7F => 1,
        0x80..=0xFF => 2,
        _ => 3,
    };
    1 + len_len + value_len
}

/// Data-field size of the protected response carrying `plain_len` bytes.
pub fn protected_response_len(suite: CipherSuite, plain_len: usize) -> usize {
    let bs = suite.block_size();
    let cryptogram = if plain_len == 0 {
        0
    } else {
        tlv_size(1 + (plain_len / bs + 1) * bs)
    };
    cryptogram + tlv_size(2) + tlv_size(MAC_LEN)
}

/// Largest plaintext a single protected response can carry within the
/// 255-byte short response budget.
pub fn max_protected_read(suite: CipherSuite) -> usize {
    (1..=255)
        .rev()
        .find(|&n| protected_response_len(suite, n) <= 255)
        .expect("small reads always fit")
}

/// One side of a secure-messaging channel.
#[derive(Clone, PartialEq, Eq)]
pub struct SmSession {
    suite: CipherSuite,
    ks_enc: Vec<u8>,
    ks_mac: Vec<u8>,
    ssc: u128,
}

impl fmt::Debug for SmSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmSession")
            .field("suite", &self.suite)
            .field("ssc", &self.ssc)
            .finish_non_exhaustive()
    }
}

/// Derives a fresh session (counter zero) from the shared secret.
pub fn derive_session_keys(shared_secret: &[u8], suite: CipherSuite) -> SmSession {
    SmSession {
        suite,
        ks_enc: suite.kdf(shared_secret, KDF_ENC),
        ks_mac: suite.kdf(shared_secret, KDF_MAC),
        ssc: 0,
    }
}

impl SmSession {
    pub fn from_keys(suite: CipherSuite, ks_enc: Vec<u8>, ks_mac: Vec<u8>, ssc: u128) -> Self {
        assert_eq!(ks_enc.len(), suite.key_len());
        assert_eq!(ks_mac.len(), suite.key_len());
        SmSession {
            suite,
            ks_enc,
            ks_mac,
            ssc,
        }
    }

    pub fn suite(&self) -> CipherSuite {
        self.suite
    }

    pub fn ks_enc(&self) -> &[u8] {
        &self.ks_enc
    }

    pub fn ks_mac(&self) -> &[u8] {
        &self.ks_mac
    }

    pub fn ssc(&self) -> u128 {
        self.ssc
    }

    fn advance(&mut self) -> Result<(), SmError> {
        let max = if self.suite.ssc_len() == 8 {
            u64::MAX as u128
        } else {
            u128::MAX
        };
        if self.ssc == max {
            return Err(SmError::CounterExhausted);
        }
        self.ssc += 1;
        Ok(())
    }

    fn ssc_bytes(&self) -> Vec<u8> {
        let full = self.ssc.to_be_bytes();
        full[16 - self.suite.ssc_len()..].to_vec()
    }

    fn iv(&self) -> Vec<u8> {
        if self.suite.is_aes() {
            cipher::encrypt_block(self.suite, &self.ks_enc, &self.ssc_bytes())
        } else {
            vec![0u8; 8]
        }
    }

    fn mac(&self, body: &[u8]) -> [u8; MAC_LEN] {
        let bs = self.suite.block_size();
        let mut input = self.ssc_bytes();
        input.extend_from_slice(body);
        cipher::sm_mac(self.suite, &self.ks_mac, &pad2(&input, bs))
    }

    fn encrypt(&self, plain: &[u8]) -> Vec<u8> {
        let padded = pad2(plain, self.suite.block_size());
        cipher::encrypt_cbc(self.suite, &self.ks_enc, &self.iv(), &padded)
    }

    fn decrypt(&self, cryptogram: &[u8]) -> Result<Vec<u8>, SmError> {
        let (&indicator, ct) = cryptogram.split_first().ok_or(SmError::MalformedSmObjects)?;
        if indicator != 0x01 || ct.is_empty() {
            return Err(SmError::MalformedSmObjects);
        }
        let padded =
            cipher::decrypt_cbc(self.suite, &self.ks_enc, &self.iv(), ct).ok_or(SmError::MalformedSmObjects)?;
        unpad2(&padded, self.suite.block_size())
    }

    fn cryptogram_object(&self, plain: &[u8]) -> Vec<u8> {
        let mut value = vec![0x01];
        value.extend(self.encrypt(plain));
        TlvObject::new(TAG_CRYPTOGRAM, value).encode()
    }

    pub fn protect_command(&mut self, command: &CommandApdu) -> Result<CommandApdu, SmError> {
        self.advance()?;
        let cla = command.cla() | CLA_SM;
        let header = [cla, command.ins(), command.p1(), command.p2()];

        let mut objects = Vec::new();
        if !command.data().is_empty() {
            objects.extend(self.cryptogram_object(command.data()));
        }
        if let Some(le) = command.le() {
            objects.extend(TlvObject::new(TAG_LE, vec![le as u8]).encode());
        }

        let mut mac_body = pad2(&header, self.suite.block_size());
        mac_body.extend_from_slice(&objects);
        let mac = self.mac(&mac_body);
        objects.extend(TlvObject::new(TAG_MAC, mac.to_vec()).encode());

        Ok(CommandApdu::new(
            cla,
            command.ins(),
            command.p1(),
            command.p2(),
            objects,
            Some(256),
        )?)
    }

    /// Chip side. The MAC is checked before anything is decrypted.
    pub fn unprotect_command(&mut self, protected: &CommandApdu) -> Result<CommandApdu, SmError> {
        if protected.cla() & CLA_SM != CLA_SM || protected.le() != Some(256) {
            return Err(SmError::MalformedSmObjects);
        }
        self.advance()?;
        let mut reader = TlvReader::new(protected.data())?;
        let cryptogram = reader.optional(TAG_CRYPTOGRAM);
        let le = reader.optional(TAG_LE);
        let mac = reader.expect(TAG_MAC)?;
        reader.finish()?;
        if mac.len() != MAC_LEN || le.as_ref().is_some_and(|l| l.len() != 1) {
            return Err(SmError::MalformedSmObjects);
        }

        let mut mac_body = pad2(&protected.header(), self.suite.block_size());
        if let Some(c) = &cryptogram {
            mac_body.extend(TlvObject::new(TAG_CRYPTOGRAM, c.clone()).encode());
        }
        if let Some(l) = &le {
            mac_body.extend(TlvObject::new(TAG_LE, l.clone()).encode());
        }
        if self.mac(&mac_body)[..] != mac[..] {
            return Err(SmError::MacMismatch);
        }

        let data = match &cryptogram {
            Some(c) => self.decrypt(c)?,
            None => Vec::new(),
        };
        let le = le.map(|l| if l[0] == 0 { 256 } else { l[0] as u16 });
        Ok(CommandApdu::new(
            protected.cla() & !CLA_SM,
            protected.ins(),
            protected.p1(),
            protected.p2(),
            data,
            le,
        )?)
    }

    pub fn protect_response(&mut self, response: &ResponseApdu) -> Result<ResponseApdu, SmError> {
        self.advance()?;
        let mut objects = Vec::new();
        if !response.data.is_empty() {
            objects.extend(self.cryptogram_object(&response.data));
        }
        objects.extend(TlvObject::new(TAG_STATUS, response.sw.to_bytes().to_vec()).encode());
        let mac = self.mac(&objects);
        objects.extend(TlvObject::new(TAG_MAC, mac.to_vec()).encode());
        Ok(ResponseApdu::new(objects, response.sw))
    }

    /// Terminal side. The MAC is checked before anything is decrypted.
    pub fn unprotect_response(&mut self, protected: &ResponseApdu) -> Result<ResponseApdu, SmError> {
        self.advance()?;
        let mut reader = TlvReader::new(&protected.data)?;
        let cryptogram = reader.optional(TAG_CRYPTOGRAM);
        let status = reader.expect(TAG_STATUS)?;
        let mac = reader.expect(TAG_MAC)?;
        reader.finish()?;
        if mac.len() != MAC_LEN || status.len() != 2 {
            return Err(SmError::MalformedSmObjects);
        }

        let mut mac_body = Vec::new();
        if let Some(c) = &cryptogram {
            mac_body.extend(TlvObject::new(TAG_CRYPTOGRAM, c.clone()).encode());
        }
        mac_body.extend(TlvObject::new(TAG_STATUS, status.clone()).encode());
        if self.mac(&mac_body)[..] != mac[..] {
            return Err(SmError::MacMismatch);
        }
        let sw = StatusWord(u16::from_be_bytes([status[0], status[1]]));
        if sw != protected.sw {
            return Err(SmError::StatusMismatch);
        }
        let data = match &cryptogram {
            Some(c) => self.decrypt(c)?,
            None => Vec::new(),
        };
        Ok(ResponseApdu::new(data, sw))
    }
}
