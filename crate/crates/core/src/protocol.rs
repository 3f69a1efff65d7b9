//! Remote document encryption: registration, encryption by simulating the
//! chip's protected READ BINARY response, and decryption by replaying the
//! protected command to the physical document.
//!
//! The key is `SHA-256(M̄₁ ‖ … ‖ M̄ᵢ)` over the full protected responses
//! (status word included). Chip authentication is deterministic in the
//! ephemeral key `k`, so the terminal that picked `k` can compute M̄ without
//! the card, and later only the card can reproduce it from `Z = kG`.

use aes::Aes256;
use ccm::aead::{Aead, KeyInit, Payload};
use ccm::consts::{U12, U16};
use ccm::Ccm;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::apdu::{encode_read_binary_sfi, ResponseApdu, StatusWord};
use crate::chip_auth::{parse_dg14, terminal_chip_auth, Dg14Content};
use crate::envelope::{EnvelopeError, RdeCiphertext, ENVELOPE_VERSION, NONCE_LEN};
use crate::group::{Point, Scalar};
use crate::mrz::{MrzKey, Td3};
use crate::passive_auth::{verify_dg, DataGroup, DocumentSecurityObject, IssuerPublicKey};
use crate::reader::{Reader, ReaderError, Transcript};
use crate::sim::{parse_dg1, CardHarness, SFI_DG1, SFI_DG14, SFI_SOD};
use crate::sm::{max_protected_read, CipherSuite};
use crate::tlv::{decode_tlv, encode_sequence, TlvObject, TlvReader};

type PayloadCipher = Ccm<Aes256, U16, U12>;

/// Largest `n` any suite can serve in one protected response.
pub const MAX_READ: usize = 231;
pub const MAX_MULTI: usize = 16;

const TAG_RECORD: u16 = 0x72;
const RECORD_VERSION: u8 = 1;

/// Groups errors by what the user has to fix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorFamily {
    Usage,
    PassiveAuth,
    Bac,
    /// The card refused the replayed command or the payload did not
    /// authenticate.
    Decryption,
    Format,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RdeError {
    #[error("passive authentication failed for data group {0}")]
    PaFailure(u8),
    #[error("holder consent missing")]
    ConsentMissing,
    #[error("extraction parameters inconsistent: {0}")]
    ParamsInconsistent(&'static str),
    #[error("basic access control failed")]
    BacFailure,
    #[error("card rejected the protected command ({0})")]
    CardRejectedSm(StatusWord),
    #[error("authenticated decryption failed")]
    AuthDecryptFailure,
    #[error("card communication failed: {0}")]
    Card(ReaderError),
    #[error("ciphertext is PIN protected but no PIN was given")]
    PinRequired,
    #[error("PIN cannot be embedded in the group")]
    PinEmbedding,
    #[error("plaintext is empty")]
    EmptyPlaintext,
    #[error("read count must be between 1 and {MAX_MULTI}")]
    InvalidMultiCount,
    #[error("malformed document data: {0}")]
    MalformedDocument(&'static str),
    #[error("malformed registration record")]
    MalformedRecord,
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

impl RdeError {
    pub fn family(&self) -> ErrorFamily {
        match self {
            RdeError::PaFailure(_) => ErrorFamily::PassiveAuth,
            RdeError::BacFailure => ErrorFamily::Bac,
            RdeError::CardRejectedSm(_) | RdeError::AuthDecryptFailure | RdeError::Card(_) => ErrorFamily::Decryption,
            RdeError::MalformedDocument(_) | RdeError::MalformedRecord | RdeError::Envelope(_) => ErrorFamily::Format,
            RdeError::ConsentMissing
            | RdeError::ParamsInconsistent(_)
            | RdeError::PinRequired
            | RdeError::PinEmbedding
            | RdeError::EmptyPlaintext
            | RdeError::InvalidMultiCount => ErrorFamily::Usage,
        }
    }
}

impl From<ReaderError> for RdeError {
    fn from(e: ReaderError) -> Self {
        match e {
            ReaderError::BacFailed => RdeError::BacFailure,
            e => RdeError::Card(e),
        }
    }
}

/// Which file to read and how much of it: `(n, F_Id, F_Cont)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractionParameters {
    n: usize,
    f_id: u8,
    f_cont: Vec<u8>,
}

impl ExtractionParameters {
    pub fn new(n: usize, f_id: u8, f_cont: Vec<u8>) -> Result<Self, RdeError> {
        if !(1..=MAX_READ).contains(&n) {
            return Err(RdeError::ParamsInconsistent("n out of range"));
        }
        if !(1..=16).contains(&f_id) {
            return Err(RdeError::ParamsInconsistent("file is not a data group"));
        }
        if n > f_cont.len() {
            return Err(RdeError::ParamsInconsistent("n exceeds file length"));
        }
        Ok(ExtractionParameters { n, f_id, f_cont })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f_id(&self) -> u8 {
        self.f_id
    }

    pub fn f_cont(&self) -> &[u8] {
        &self.f_cont
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Consent {
    pub given: bool,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// What the encrypting party keeps per holder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegistrationRecord {
    pub holder: Td3,
    pub dg14: Dg14Content,
    pub sod: DocumentSecurityObject,
    pub params: ExtractionParameters,
    pub consent: Consent,
}

/// Checks the read-out against the trusted issuer and builds the record.
pub fn register(
    dg1: &DataGroup,
    dg14: &DataGroup,
    sod: &DocumentSecurityObject,
    params: ExtractionParameters,
    consent: Consent,
    trusted: &IssuerPublicKey,
) -> Result<RegistrationRecord, RdeError> {
    if !consent.given {
        return Err(RdeError::ConsentMissing);
    }
    for dg in [dg1, dg14] {
        if !verify_dg(sod, dg, trusted) {
            return Err(RdeError::PaFailure(dg.number));
        }
    }
    if dg1.number != SFI_DG1 || dg14.number != SFI_DG14 {
        return Err(RdeError::MalformedDocument("unexpected data group numbers"));
    }
    let holder = parse_dg1(&dg1.content).ok_or(RdeError::MalformedDocument("DG1"))?;
    let dg14 = parse_dg14(&dg14.content).map_err(|_| RdeError::MalformedDocument("DG14"))?;
    check_params(&dg14, sod, &params)?;
    if !verify_dg(sod, &DataGroup::new(params.f_id, params.f_cont.clone()), trusted) {
        return Err(RdeError::PaFailure(params.f_id));
    }
    Ok(RegistrationRecord {
        holder,
        dg14,
        sod: sod.clone(),
        params,
        consent,
    })
}

fn check_params(
    dg14: &Dg14Content,
    sod: &DocumentSecurityObject,
    params: &ExtractionParameters,
) -> Result<(), RdeError> {
    if sod.hash_for(params.f_id).is_none() {
        return Err(RdeError::ParamsInconsistent("file not listed in the SOD"));
    }
    if params.n > max_protected_read(dg14.suite) {
        return Err(RdeError::ParamsInconsistent("n exceeds one protected response"));
    }
    Ok(())
}

/// Files a registering party reads over BAC.
#[derive(Clone, Debug)]
pub struct DocumentReadout {
    pub dg1: DataGroup,
    pub dg14: DataGroup,
    pub sod: DocumentSecurityObject,
}

pub fn read_document<C, R>(card: &mut C, mrz: &MrzKey, rng: &mut R) -> Result<DocumentReadout, RdeError>
where
    C: CardHarness + ?Sized,
    R: RngCore + CryptoRng,
{
    let mut reader = Reader::new(card);
    reader.reset();
    reader.select_application()?;
    reader.basic_access_control(mrz, rng)?;
    let dg1 = DataGroup::new(SFI_DG1, reader.read_file(SFI_DG1)?);
    let dg14 = DataGroup::new(SFI_DG14, reader.read_file(SFI_DG14)?);
    let sod = DocumentSecurityObject::decode(&reader.read_file(SFI_SOD)?)
        .map_err(|_| RdeError::MalformedDocument("EF.SOD"))?;
    Ok(DocumentReadout { dg1, dg14, sod })
}

/// One simulated extraction: Z, the protected commands, and the protected
/// responses the card will produce for them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulatedRead {
    pub z: Point,
    pub rb: Vec<Vec<u8>>,
    pub m: Vec<Vec<u8>>,
}

impl SimulatedRead {
    pub fn key(&self) -> RdeKey {
        RdeKey::from_responses(&self.m)
    }
}

pub fn simulate_protected_read(record: &RegistrationRecord, k: &Scalar) -> SimulatedRead {
    simulate_reads(record, k, 1)
}

/// `i` identical reads in one session; command j runs at counter 2j−1 and
/// its response at 2j.
pub fn simulate_reads(record: &RegistrationRecord, k: &Scalar, i: usize) -> SimulatedRead {
    let ca = terminal_chip_auth(&record.dg14, k);
    let mut session = ca.session;
    let params = &record.params;
    let command = encode_read_binary_sfi(params.f_id, 0, params.n as u16).expect("validated parameters");
    let plain = ResponseApdu::new(params.f_cont[..params.n].to_vec(), StatusWord::OK);
    let mut rb = Vec::with_capacity(i);
    let mut m = Vec::with_capacity(i);
    for _ in 0..i {
        rb.push(session.protect_command(&command).expect("fresh counter").encode());
        m.push(session.protect_response(&plain).expect("fresh counter").encode());
    }
    SimulatedRead {
        z: ca.ephemeral_public,
        rb,
        m,
    }
}

/// 32-byte payload key.
#[derive(Clone, PartialEq, Eq)]
pub struct RdeKey([u8; 32]);

impl std::fmt::Debug for RdeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RdeKey(..)")
    }
}

impl RdeKey {
    pub fn from_responses(responses: &[Vec<u8>]) -> Self {
        let mut h = Sha256::new();
        for m in responses {
            h.update(m);
        }
        RdeKey(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

pub fn encrypt<R: RngCore + CryptoRng>(
    record: &RegistrationRecord,
    data: &[u8],
    rng: &mut R,
    pin: Option<&[u8]>,
    multi: usize,
) -> Result<RdeCiphertext, RdeError> {
    let params = record.dg14.params();
    loop {
        let k = params.random_scalar(rng);
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        match encrypt_with(record, data, &k, nonce, pin, multi) {
            // Z' landed on the identity; draw again.
            Err(RdeError::PinEmbedding) if pin.is_some_and(|p| params.embed_pin(p).is_ok()) => continue,
            result => return result,
        }
    }
}

/// Deterministic core of [`encrypt`].
pub fn encrypt_with(
    record: &RegistrationRecord,
    data: &[u8],
    k: &Scalar,
    nonce: [u8; NONCE_LEN],
    pin: Option<&[u8]>,
    multi: usize,
) -> Result<RdeCiphertext, RdeError> {
    if data.is_empty() {
        return Err(RdeError::EmptyPlaintext);
    }
    if !(1..=MAX_MULTI).contains(&multi) {
        return Err(RdeError::InvalidMultiCount);
    }
    let params = record.dg14.params();
    let read = simulate_reads(record, k, multi);
    let z = match pin {
        Some(pin) => {
            let e = params.embed_pin(pin).map_err(|_| RdeError::PinEmbedding)?;
            params.add(&e, &read.z)
        }
        None => read.z.clone(),
    };
    let z_point = params.encode_point(&z).map_err(|_| RdeError::PinEmbedding)?;
    let mut ct = RdeCiphertext {
        version: ENVELOPE_VERSION,
        suite: record.dg14.suite,
        curve_id: record.dg14.curve_id,
        z_point,
        rb_protected: read.rb.clone(),
        nonce,
        payload: Vec::new(),
        pin_protected: pin.is_some(),
    };
    let header = ct.header();
    ct.payload = PayloadCipher::new(read.key().as_bytes().into())
        .encrypt(
            &nonce.into(),
            Payload {
                msg: data,
                aad: &header,
            },
        )
        .expect("CCM accepts any message this size");
    Ok(ct)
}

/// Replays the ciphertext's commands to the card and opens the payload.
pub fn decrypt<C, R>(
    ct: &RdeCiphertext,
    card: &mut C,
    mrz: &MrzKey,
    pin: Option<&[u8]>,
    rng: &mut R,
) -> Result<Vec<u8>, RdeError>
where
    C: CardHarness + ?Sized,
    R: RngCore + CryptoRng,
{
    decrypt_logged(ct, card, mrz, pin, rng, &mut Transcript::new())
}

/// [`decrypt`], appending the card conversation to `log`.
pub fn decrypt_logged<C, R>(
    ct: &RdeCiphertext,
    card: &mut C,
    mrz: &MrzKey,
    pin: Option<&[u8]>,
    rng: &mut R,
    log: &mut Transcript,
) -> Result<Vec<u8>, RdeError>
where
    C: CardHarness + ?Sized,
    R: RngCore + CryptoRng,
{
    let params = ct.curve_id.params();
    let mut z = params.decode_point(&ct.z_point).map_err(|_| EnvelopeError::Malformed)?;
    if ct.pin_protected {
        let pin = pin.ok_or(RdeError::PinRequired)?;
        let e = params.embed_pin(pin).map_err(|_| RdeError::PinEmbedding)?;
        z = params.sub(&z, &e);
    }
    // With a wrong PIN Z may be the identity; any fixed valid point gives the
    // same outcome as a wrong key.
    let z_bytes = params
        .encode_point(&z)
        .unwrap_or_else(|_| params.encode_point(&params.g).expect("generator"));

    let mut reader = Reader::new(card);
    std::mem::swap(&mut reader.transcript, log);
    let result = replay(&mut reader, ct, mrz, &z_bytes, rng);
    std::mem::swap(&mut reader.transcript, log);
    let responses = result?;

    PayloadCipher::new(RdeKey::from_responses(&responses).as_bytes().into())
        .decrypt(
            &ct.nonce.into(),
            Payload {
                msg: &ct.payload,
                aad: &ct.header(),
            },
        )
        .map_err(|_| RdeError::AuthDecryptFailure)
}

fn replay<C, R>(
    reader: &mut Reader<'_, C>,
    ct: &RdeCiphertext,
    mrz: &MrzKey,
    z_bytes: &[u8],
    rng: &mut R,
) -> Result<Vec<Vec<u8>>, RdeError>
where
    C: CardHarness + ?Sized,
    R: RngCore + CryptoRng,
{
    reader.reset();
    reader.select_application()?;
    reader.basic_access_control(mrz, rng)?;
    reader.set_kat(z_bytes).map_err(|e| match e {
        ReaderError::Status(sw) => RdeError::CardRejectedSm(sw),
        e => e.into(),
    })?;
    let mut responses = Vec::with_capacity(ct.rb_protected.len());
    for rb in &ct.rb_protected {
        let raw = reader.transmit_raw(rb);
        match ResponseApdu::decode(&raw) {
            Ok(r) if r.data.is_empty() => return Err(RdeError::CardRejectedSm(r.sw)),
            Ok(_) => responses.push(raw),
            Err(_) => return Err(RdeError::Card(ReaderError::MalformedResponse)),
        }
    }
    Ok(responses)
}

/// Bits of security of the derived key: `min(128, |q|/2)` with 3DES
/// secure messaging and `min(192, |q|/2)` with AES.
pub fn security_strength(suite: CipherSuite, q_bits: u32) -> u32 {
    let cap = if suite.is_aes() { 192 } else { 128 };
    cap.min(q_bits / 2)
}

impl RegistrationRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = encode_sequence(&[
            TlvObject::new(0x80, vec![RECORD_VERSION]),
            TlvObject::new(0x81, crate::sim::encode_dg1(&self.holder)),
            TlvObject::new(0x82, crate::chip_auth::encode_dg14(&self.dg14).expect("parsed key")),
            TlvObject::new(0x83, self.sod.encode()),
            TlvObject::new(0x84, vec![self.params.n as u8]),
            TlvObject::new(0x85, vec![self.params.f_id]),
            TlvObject::new(0x86, self.params.f_cont.clone()),
            TlvObject::new(0x87, self.consent.timestamp.to_be_bytes().to_vec()),
        ]);
        TlvObject::new(TAG_RECORD, body).encode()
    }

    /// Parses a stored record and re-checks that its files match the SOD
    /// it carries. Issuer trust was established at registration.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RdeError> {
        let bad = |_| RdeError::MalformedRecord;
        let outer = decode_tlv(bytes).map_err(bad)?;
        if outer.tag() != TAG_RECORD {
            return Err(RdeError::MalformedRecord);
        }
        let mut r = TlvReader::new(&outer.value).map_err(bad)?;
        if r.expect(0x80).map_err(bad)? != [RECORD_VERSION] {
            return Err(RdeError::MalformedRecord);
        }
        let dg1 = DataGroup::new(SFI_DG1, r.expect(0x81).map_err(bad)?);
        let dg14 = DataGroup::new(SFI_DG14, r.expect(0x82).map_err(bad)?);
        let sod =
            DocumentSecurityObject::decode(&r.expect(0x83).map_err(bad)?).map_err(|_| RdeError::MalformedRecord)?;
        let n = match r.expect(0x84).map_err(bad)?.as_slice() {
            [n] => *n as usize,
            _ => return Err(RdeError::MalformedRecord),
        };
        let f_id = match r.expect(0x85).map_err(bad)?.as_slice() {
            [f] => *f,
            _ => return Err(RdeError::MalformedRecord),
        };
        let f_cont = r.expect(0x86).map_err(bad)?;
        let timestamp = <[u8; 8]>::try_from(r.expect(0x87).map_err(bad)?.as_slice())
            .map(u64::from_be_bytes)
            .map_err(|_| RdeError::MalformedRecord)?;
        r.finish().map_err(bad)?;

        let params = ExtractionParameters::new(n, f_id, f_cont).map_err(|_| RdeError::MalformedRecord)?;
        // The record's own SOD is its trust anchor here.
        let anchor = sod.issuer_public.clone();
        register(&dg1, &dg14, &sod, params, Consent { given: true, timestamp }, &anchor)
            .map_err(|_| RdeError::MalformedRecord)
    }
}
