//! Passive Authentication: an issuer-signed document security object
//! listing the SHA-256 hash of every data group.
//!
//! EF.SOD layout:
//!
//! ```text
//! 77 {
//!   80 hash-alg (01 = SHA-256)
//!   A0 { 30 { 02 dg-number 04 hash } ... }
//!   81 curve code
//!   82 issuer public key (04 ‖ x ‖ y)
//!   83 signature r ‖ s
//! }
//! ```
//!
//! The signature covers the encoded `80` and `A0` objects.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::group::{to_fixed_be, CurveId, DomainParameters, Point, Scalar};
use crate::tlv::{decode_tlv, encode_sequence, TlvError, TlvObject, TlvReader};

pub const TAG_SOD: u16 = 0x77;
const HASH_SHA256: u8 = 0x01;
const ISSUER_CURVE: CurveId = CurveId::BrainpoolP256r1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaError {
    #[error("data group {0} listed twice")]
    DuplicateDgNumber(u8),
    #[error("data group number {0} out of range")]
    InvalidDgNumber(u8),
    #[error("no data groups to sign")]
    Empty,
    #[error("malformed document security object")]
    Malformed,
}

impl From<TlvError> for PaError {
    fn from(_: TlvError) -> Self {
        PaError::Malformed
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataGroup {
    pub number: u8,
    pub content: Vec<u8>,
}

impl DataGroup {
    pub fn new(number: u8, content: impl Into<Vec<u8>>) -> Self {
        DataGroup {
            number,
            content: content.into(),
        }
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(&self.content).into()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IssuerPublicKey(pub Point);

#[derive(Clone, Debug)]
pub struct IssuerKeypair {
    signing_key: Scalar,
    pub public: IssuerPublicKey,
}

impl IssuerKeypair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let (signing_key, public) = ISSUER_CURVE.params().generate_keypair(rng);
        IssuerKeypair {
            signing_key,
            public: IssuerPublicKey(public),
        }
    }

    pub fn from_scalar(signing_key: Scalar) -> Self {
        let public = ISSUER_CURVE.params().mul_generator(&signing_key);
        IssuerKeypair {
            signing_key,
            public: IssuerPublicKey(public),
        }
    }

    /// Deterministic issuer for test documents: the key is SHA-256 of the
    /// seed, reduced mod q.
    pub fn from_seed(seed: &[u8]) -> Self {
        let params = ISSUER_CURVE.params();
        let mut counter = 0u32;
        loop {
            let digest = Sha256::new()
                .chain_update(seed)
                .chain_update(counter.to_be_bytes())
                .finalize();
            let value = BigUint::from_bytes_be(&digest) % &params.q;
            if let Ok(key) = Scalar::new(value, params) {
                return Self::from_scalar(key);
            }
            counter += 1;
        }
    }

    pub fn sign<R: RngCore + CryptoRng>(&self, message: &[u8], rng: &mut R) -> Signature {
        let params = ISSUER_CURVE.params();
        loop {
            let nonce = params.random_scalar(rng);
            if let Some(sig) = self.sign_with_nonce(message, &nonce) {
                return sig;
            }
        }
    }

    /// ECDSA with a caller-chosen nonce; `None` in the negligible r = 0 or
    /// s = 0 cases. Exposed for reproducible test signatures.
    pub fn sign_with_nonce(&self, message: &[u8], nonce: &Scalar) -> Option<Signature> {
        let params = ISSUER_CURVE.params();
        let q = &params.q;
        let e = message_representative(message, params);
        let r = params.mul_generator(nonce).x()? % q;
        if r.is_zero() {
            return None;
        }
        let k_inv = nonce.value().modinv(q)?;
        let s = (k_inv * (e + &r * self.signing_key.value())) % q;
        if s.is_zero() {
            return None;
        }
        Some(Signature { r, s })
    }
}

fn message_representative(message: &[u8], params: &DomainParameters) -> BigUint {
    let digest = Sha256::digest(message);
    let e = BigUint::from_bytes_be(&digest);
    let excess = 256u64.saturating_sub(params.q.bits());
    e >> excess
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub r: BigUint,
    pub s: BigUint,
}

impl Signature {
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = ISSUER_CURVE.params().scalar_len();
        let mut out = to_fixed_be(&self.r, n);
        out.extend(to_fixed_be(&self.s, n));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let n = ISSUER_CURVE.params().scalar_len();
        (bytes.len() == 2 * n).then(|| Signature {
            r: BigUint::from_bytes_be(&bytes[..n]),
            s: BigUint::from_bytes_be(&bytes[n..]),
        })
    }
}

pub fn verify_signature(public: &IssuerPublicKey, message: &[u8], sig: &Signature) -> bool {
    let params = ISSUER_CURVE.params();
    let q = &params.q;
    if sig.r.is_zero() || sig.s.is_zero() || &sig.r >= q || &sig.s >= q {
        return false;
    }
    if public.0.is_identity() || !params.is_on_curve(&public.0) {
        return false;
    }
    let e = message_representative(message, params);
    let Some(w) = sig.s.modinv(q) else {
        return false;
    };
    let u1 = (&e * &w) % q;
    let u2 = (&sig.r * &w) % q;
    let point = params.add(&params.mul(&u1, &params.g), &params.mul(&u2, &public.0));
    match point.x() {
        Some(x) => (x % q) == sig.r,
        None => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentSecurityObject {
    /// (data-group number, SHA-256 hash), sorted by number.
    pub entries: Vec<(u8, [u8; 32])>,
    pub issuer_public: IssuerPublicKey,
    pub signature: Signature,
}

fn signed_content(entries: &[(u8, [u8; 32])]) -> Vec<u8> {
    let list: Vec<TlvObject> = entries
        .iter()
        .map(|(n, h)| {
            TlvObject::new(
                0x30,
                encode_sequence(&[TlvObject::new(0x02, vec![*n]), TlvObject::new(0x04, h.to_vec())]),
            )
        })
        .collect();
    encode_sequence(&[
        TlvObject::new(0x80, vec![HASH_SHA256]),
        TlvObject::new(0xA0, encode_sequence(&list)),
    ])
}

pub fn create_sod<R: RngCore + CryptoRng>(
    issuer: &IssuerKeypair,
    dgs: &[DataGroup],
    rng: &mut R,
) -> Result<DocumentSecurityObject, PaError> {
    if dgs.is_empty() {
        return Err(PaError::Empty);
    }
    let mut entries: Vec<(u8, [u8; 32])> = Vec::with_capacity(dgs.len());
    for dg in dgs {
        if !(1..=16).contains(&dg.number) {
            return Err(PaError::InvalidDgNumber(dg.number));
        }
        if entries.iter().any(|(n, _)| *n == dg.number) {
            return Err(PaError::DuplicateDgNumber(dg.number));
        }
        entries.push((dg.number, dg.hash()));
    }
    entries.sort_by_key(|(n, _)| *n);
    let signature = issuer.sign(&signed_content(&entries), rng);
    Ok(DocumentSecurityObject {
        entries,
        issuer_public: issuer.public.clone(),
        signature,
    })
}

impl DocumentSecurityObject {
    pub fn hash_for(&self, number: u8) -> Option<&[u8; 32]> {
        self.entries.iter().find(|(n, _)| *n == number).map(|(_, h)| h)
    }

    pub fn signature_valid(&self) -> bool {
        verify_signature(&self.issuer_public, &signed_content(&self.entries), &self.signature)
    }

    pub fn encode(&self) -> Vec<u8> {
        let params = ISSUER_CURVE.params();
        let mut body = signed_content(&self.entries);
        body.extend(encode_sequence(&[
            TlvObject::new(0x81, vec![ISSUER_CURVE.code()]),
            TlvObject::new(0x82, params.encode_point(&self.issuer_public.0).expect("issuer key")),
            TlvObject::new(0x83, self.signature.to_bytes()),
        ]));
        TlvObject::new(TAG_SOD, body).encode()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PaError> {
        let outer = decode_tlv(bytes)?;
        if outer.tag() != TAG_SOD {
            return Err(PaError::Malformed);
        }
        let mut r = TlvReader::new(&outer.value)?;
        if r.expect(0x80)? != [HASH_SHA256] {
            return Err(PaError::Malformed);
        }
        let list = r.expect(0xA0)?;
        if r.expect(0x81)? != [ISSUER_CURVE.code()] {
            return Err(PaError::Malformed);
        }
        let public = ISSUER_CURVE
            .params()
            .decode_point(&r.expect(0x82)?)
            .map_err(|_| PaError::Malformed)?;
        let signature = Signature::from_bytes(&r.expect(0x83)?).ok_or(PaError::Malformed)?;
        r.finish()?;

        let mut entries = Vec::new();
        for item in crate::tlv::decode_tlv_sequence(&list)? {
            if item.tag() != 0x30 {
                return Err(PaError::Malformed);
            }
            let mut e = TlvReader::new(&item.value)?;
            let number = e.expect(0x02)?;
            let hash = e.expect(0x04)?;
            e.finish()?;
            let (&[n], Ok(h)) = (number.as_slice(), <[u8; 32]>::try_from(hash.as_slice())) else {
                return Err(PaError::Malformed);
            };
            entries.push((n, h));
        }
        let sod = DocumentSecurityObject {
            entries,
            issuer_public: IssuerPublicKey(public),
            signature,
        };
        // Canonical form only: sorted entries, minimal encoding.
        if sod.encode() != bytes {
            return Err(PaError::Malformed);
        }
        Ok(sod)
    }
}

/// Accepts iff the SOD is signed by the trusted issuer and lists the data
/// group's hash under its number.
pub fn verify_dg(sod: &DocumentSecurityObject, dg: &DataGroup, trusted: &IssuerPublicKey) -> bool {
    sod.issuer_public == *trusted && sod.signature_valid() && sod.hash_for(dg.number) == Some(&dg.hash())
}
