//! The RDE ciphertext envelope.
//!
//! | tag | content                                   |
//! |-----|-------------------------------------------|
//! | 70  | envelope (constructed)                    |
//! | 80  | format version                            |
//! | 81  | cipher suite code                         |
//! | 82  | curve code                                |
//! | 83  | ephemeral key Z, or Z' with a PIN          |
//! | 84  | one protected READ BINARY (repeated)      |
//! | 85  | 12-byte CCM nonce                          |
//! | 86  | flags, bit 0 = PIN protected               |
//! | 87  | CCM ciphertext and tag                     |
//!
//! Everything before tag 87 is authenticated as associated data.

use thiserror::Error;

use crate::group::CurveId;
use crate::sm::CipherSuite;
use crate::tlv::{decode_tlv, encode_sequence, TlvObject, TlvReader};

pub const ENVELOPE_VERSION: u8 = 1;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

const TAG_ENVELOPE: u16 = 0x70;
const TAG_RB: u16 = 0x84;
const FLAG_PIN: u8 = 0x01;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvelopeError {
    #[error("malformed envelope")]
    Malformed,
    #[error("unsupported envelope version {0}")]
    Version(u8),
    #[error("invalid hex text")]
    Hex,
}

impl From<crate::tlv::TlvError> for EnvelopeError {
    fn from(_: crate::tlv::TlvError) -> Self {
        EnvelopeError::Malformed
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RdeCiphertext {
    pub version: u8,
    pub suite: CipherSuite,
    pub curve_id: CurveId,
    pub z_point: Vec<u8>,
    /// One protected READ BINARY per read; more than one in multi-read mode.
    pub rb_protected: Vec<Vec<u8>>,
    pub nonce: [u8; NONCE_LEN],
    pub payload: Vec<u8>,
    pub pin_protected: bool,
}

impl RdeCiphertext {
    pub fn multi_count(&self) -> usize {
        self.rb_protected.len()
    }

    fn header_objects(&self) -> Vec<TlvObject> {
        let mut objs = vec![
            TlvObject::new(0x80, vec![self.version]),
            TlvObject::new(0x81, vec![self.suite.code()]),
            TlvObject::new(0x82, vec![self.curve_id.code()]),
            TlvObject::new(0x83, self.z_point.clone()),
        ];
        objs.extend(self.rb_protected.iter().map(|rb| TlvObject::new(TAG_RB, rb.clone())));
        objs.push(TlvObject::new(0x85, self.nonce.to_vec()));
        objs.push(TlvObject::new(
            0x86,
            vec![if self.pin_protected { FLAG_PIN } else { 0 }],
        ));
        objs
    }

    /// Associated data bound to the payload.
    pub fn header(&self) -> Vec<u8> {
        encode_sequence(&self.header_objects())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = self.header();
        body.extend(TlvObject::new(0x87, self.payload.clone()).encode());
        TlvObject::new(TAG_ENVELOPE, body).encode()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        use EnvelopeError::Malformed;
        let outer = decode_tlv(bytes)?;
        if outer.tag() != TAG_ENVELOPE {
            return Err(Malformed);
        }
        let mut r = TlvReader::new(&outer.value)?;
        let version = byte(&r.expect(0x80)?)?;
        if version != ENVELOPE_VERSION {
            return Err(EnvelopeError::Version(version));
        }
        let suite = CipherSuite::from_code(byte(&r.expect(0x81)?)?).ok_or(Malformed)?;
        let curve_id = CurveId::from_code(byte(&r.expect(0x82)?)?).ok_or(Malformed)?;
        let z_point = r.expect(0x83)?;
        let mut rb_protected = Vec::new();
        while let Some(rb) = r.optional(TAG_RB) {
            rb_protected.push(rb);
        }
        if rb_protected.is_empty() {
            return Err(Malformed);
        }
        let nonce = r.expect(0x85)?.try_into().map_err(|_| Malformed)?;
        let pin_protected = match byte(&r.expect(0x86)?)? {
            0 => false,
            FLAG_PIN => true,
            _ => return Err(Malformed),
        };
        let payload = r.expect(0x87)?;
        r.finish()?;
        if payload.len() < TAG_LEN {
            return Err(Malformed);
        }
        Ok(RdeCiphertext {
            version,
            suite,
            curve_id,
            z_point,
            rb_protected,
            nonce,
            payload,
            pin_protected,
        })
    }

    /// Lowercase hex of the binary envelope.
    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// Inverse of [`to_hex`](Self::to_hex); whitespace is ignored.
    pub fn from_hex(text: &str) -> Result<Self, EnvelopeError> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bytes = hex::decode(compact).map_err(|_| EnvelopeError::Hex)?;
        Self::from_bytes(&bytes)
    }
}

fn byte(bytes: &[u8]) -> Result<u8, EnvelopeError> {
    match bytes {
        [b] => Ok(*b),
        _ => Err(EnvelopeError::Malformed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RdeCiphertext {
        RdeCiphertext {
            version: ENVELOPE_VERSION,
            suite: CipherSuite::Aes256,
            curve_id: CurveId::BrainpoolP320r1,
            z_point: vec![4; 81],
            rb_protected: vec![vec![0x0C, 0xB0, 0x8E, 0x00, 0x0D], vec![1, 2, 3]],
            nonce: [7; NONCE_LEN],
            payload: vec![9; 40],
            pin_protected: true,
        }
    }

    #[test]
    fn binary_and_hex_round_trip() {
        let ct = sample();
        assert_eq!(RdeCiphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
        let text = ct.to_hex();
        assert_eq!(text, text.to_lowercase());
        assert_eq!(RdeCiphertext::from_hex(&format!(" {text}\n")).unwrap(), ct);
        assert_eq!(ct.multi_count(), 2);
    }

    #[test]
    fn header_excludes_payload() {
        let mut ct = sample();
        let header = ct.header();
        ct.payload[0] ^= 1;
        assert_eq!(ct.header(), header);
        ct.pin_protected = false;
        assert_ne!(ct.header(), header);
    }

    #[test]
    fn rejects_bad_envelopes() {
        let mut ct = sample();
        ct.version = 2;
        assert_eq!(
            RdeCiphertext::from_bytes(&ct.to_bytes()),
            Err(EnvelopeError::Version(2))
        );
        let mut ct = sample();
        ct.rb_protected.clear();
        assert_eq!(RdeCiphertext::from_bytes(&ct.to_bytes()), Err(EnvelopeError::Malformed));
        let mut ct = sample();
        ct.payload.truncate(3);
        assert_eq!(RdeCiphertext::from_bytes(&ct.to_bytes()), Err(EnvelopeError::Malformed));
        assert_eq!(RdeCiphertext::from_hex("zz"), Err(EnvelopeError::Hex));
        let mut bytes = sample().to_bytes();
        bytes.push(0);
        assert!(RdeCiphertext::from_bytes(&bytes).is_err());
    }
}
