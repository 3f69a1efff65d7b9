//! A software e-passport chip: file system, BAC access gate, the chip
//! authentication session switch, and protected READ BINARY.
//!
//! Files are addressed by short file identifier; data group `n` lives at
//! SFI `n` and EF.SOD at SFI 0x1D. Every command processed inside a secure
//! messaging session must be protected; anything else aborts the session
//! with 6988.

use std::collections::BTreeMap;
use std::fmt;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::apdu::{
    CommandApdu, ResponseApdu, StatusWord, INS_EXTERNAL_AUTHENTICATE, INS_GET_CHALLENGE, INS_MSE, INS_READ_BINARY,
    INS_SELECT,
};
use crate::bac::{self, BacKeys};
use crate::chip_auth::{chip_receive_ca, encode_dg14, Dg14Content, TAG_EPHEMERAL_KEY};
use crate::group::{CurveId, Scalar};
use crate::mrz::{MrzKey, Td3};
use crate::passive_auth::{create_sod, DataGroup, DocumentSecurityObject, IssuerKeypair};
use crate::sm::{max_protected_read, CipherSuite, SmSession, CLA_SM};
use crate::tlv::{decode_tlv, decode_tlv_sequence, encode_sequence, TlvObject, TlvReader};

/// eMRTD application identifier.
pub const EMRTD_AID: [u8; 7] = [0xA0, 0x00, 0x00, 0x02, 0x47, 0x10, 0x01];
pub const SFI_DG1: u8 = 0x01;
pub const SFI_DG14: u8 = 0x0E;
pub const SFI_SOD: u8 = 0x1D;

const TAG_PASSPORT: u16 = 0x71;
const TAG_DG1: u16 = 0x61;
const TAG_MRZ_INFO: u16 = 0x5F1F;
const FORMAT_VERSION: u8 = 1;

/// The byte-level transport to a card.
pub trait CardHarness {
    /// Sends one command APDU and returns the response APDU. Never fails:
    /// problems are reported as status words.
    fn transmit(&mut self, command: &[u8]) -> Vec<u8>;

    /// Cold reset: drops any session state on the card.
    fn reset(&mut self);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassportProfile {
    pub mrz: Td3,
    pub suite: CipherSuite,
    pub curve_id: CurveId,
    /// Makes creation deterministic when set.
    pub seed: Option<u64>,
}

impl PassportProfile {
    /// A specimen holder with the given chip authentication parameters.
    pub fn specimen(suite: CipherSuite, curve_id: CurveId, seed: Option<u64>) -> Self {
        PassportProfile {
            mrz: Td3 {
                issuing_state: "NLD".into(),
                holder_name: "DE<BRUIJN<<WILLEKE<LISELOTTE".into(),
                nationality: "NLD".into(),
                sex: 'F',
                key: MrzKey::new("SPECI2014", "650310", "240309").expect("valid specimen"),
            },
            suite,
            curve_id,
            seed,
        }
    }

    /// AES-256 secure messaging over brainpoolP320r1, as issued on Dutch
    /// passports.
    pub fn dutch(seed: Option<u64>) -> Self {
        Self::specimen(CipherSuite::Aes256, CurveId::BrainpoolP320r1, seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionKind {
    NoAccess,
    Bac,
    Ca,
}

#[derive(Clone)]
enum Session {
    NoAccess,
    Bac(SmSession),
    Ca(SmSession),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PassportFileError {
    #[error("malformed passport file")]
    Malformed,
    #[error("unsupported passport file version {0}")]
    Version(u8),
}

impl From<crate::tlv::TlvError> for PassportFileError {
    fn from(_: crate::tlv::TlvError) -> Self {
        PassportFileError::Malformed
    }
}

/// One simulated chip.
#[derive(Clone)]
pub struct PassportState {
    mrz: Td3,
    suite: CipherSuite,
    curve_id: CurveId,
    files: BTreeMap<u8, Vec<u8>>,
    ca_private: Scalar,
    bac_keys: BacKeys,
    chip_seed: [u8; 32],
    rng: ChaCha20Rng,
    session: Session,
    challenge: Option<[u8; 8]>,
    current_ef: Option<u8>,
}

impl fmt::Debug for PassportState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PassportState")
            .field("document", &self.mrz.key.document_number)
            .field("suite", &self.suite)
            .field("curve", &self.curve_id)
            .field("session", &self.session_kind())
            .finish_non_exhaustive()
    }
}

/// DG1: the MRZ wrapped in `61 { 5F1F mrz }`.
pub fn encode_dg1(mrz: &Td3) -> Vec<u8> {
    let inner = TlvObject::new(TAG_MRZ_INFO, mrz.text().into_bytes()).encode();
    TlvObject::new(TAG_DG1, inner).encode()
}

pub fn parse_dg1(bytes: &[u8]) -> Option<Td3> {
    let outer = decode_tlv(bytes).ok()?;
    if outer.tag() != TAG_DG1 {
        return None;
    }
    let inner = decode_tlv(&outer.value).ok()?;
    if inner.tag() != TAG_MRZ_INFO {
        return None;
    }
    Td3::parse(std::str::from_utf8(&inner.value).ok()?).ok()
}

pub fn create_passport<R: RngCore + CryptoRng>(
    profile: &PassportProfile,
    issuer: &IssuerKeypair,
    rng: &mut R,
) -> PassportState {
    match profile.seed {
        Some(seed) => build(profile, issuer, &mut ChaCha20Rng::seed_from_u64(seed)),
        None => build(profile, issuer, rng),
    }
}

fn build<R: RngCore + CryptoRng>(profile: &PassportProfile, issuer: &IssuerKeypair, rng: &mut R) -> PassportState {
    let params = profile.curve_id.params();
    let (ca_private, ca_public_key) = params.generate_keypair(rng);
    let dg1 = DataGroup::new(SFI_DG1, encode_dg1(&profile.mrz));
    let dg14 = DataGroup::new(
        SFI_DG14,
        encode_dg14(&Dg14Content {
            suite: profile.suite,
            curve_id: profile.curve_id,
            ca_public_key,
        })
        .expect("generated key is not the identity"),
    );
    let sod = create_sod(issuer, &[dg1.clone(), dg14.clone()], rng).expect("distinct valid numbers");
    let mut chip_seed = [0u8; 32];
    rng.fill_bytes(&mut chip_seed);

    let files = BTreeMap::from([
        (SFI_DG1, dg1.content),
        (SFI_DG14, dg14.content),
        (SFI_SOD, sod.encode()),
    ]);
    PassportState::assemble(
        profile.mrz.clone(),
        profile.suite,
        profile.curve_id,
        files,
        ca_private,
        chip_seed,
    )
}

fn status(sw: StatusWord) -> ResponseApdu {
    ResponseApdu::status(sw)
}

impl PassportState {
    fn assemble(
        mrz: Td3,
        suite: CipherSuite,
        curve_id: CurveId,
        files: BTreeMap<u8, Vec<u8>>,
        ca_private: Scalar,
        chip_seed: [u8; 32],
    ) -> Self {
        PassportState {
            bac_keys: BacKeys::from_mrz(&mrz.key),
            mrz,
            suite,
            curve_id,
            files,
            ca_private,
            chip_seed,
            rng: ChaCha20Rng::from_seed(chip_seed),
            session: Session::NoAccess,
            challenge: None,
            current_ef: None,
        }
    }

    pub fn mrz(&self) -> &Td3 {
        &self.mrz
    }

    pub fn suite(&self) -> CipherSuite {
        self.suite
    }

    pub fn curve_id(&self) -> CurveId {
        self.curve_id
    }

    pub fn file(&self, sfi: u8) -> Option<&[u8]> {
        self.files.get(&sfi).map(Vec::as_slice)
    }

    pub fn data_group(&self, number: u8) -> Option<DataGroup> {
        self.file(number).map(|c| DataGroup::new(number, c))
    }

    pub fn sod(&self) -> Option<DocumentSecurityObject> {
        DocumentSecurityObject::decode(self.file(SFI_SOD)?).ok()
    }

    pub fn session_kind(&self) -> SessionKind {
        match self.session {
            Session::NoAccess => SessionKind::NoAccess,
            Session::Bac(_) => SessionKind::Bac,
            Session::Ca(_) => SessionKind::Ca,
        }
    }

    /// Replaces a stored file. Lets tests build inconsistent documents.
    pub fn set_file(&mut self, sfi: u8, content: Vec<u8>) {
        self.files.insert(sfi, content);
    }

    pub fn reset(&mut self) {
        self.session = Session::NoAccess;
        self.challenge = None;
        self.current_ef = None;
    }

    pub fn process_apdu(&mut self, command: &[u8]) -> Vec<u8> {
        let response = match std::mem::replace(&mut self.session, Session::NoAccess) {
            Session::NoAccess => self.process_plain(command),
            Session::Bac(sm) => self.process_protected(command, sm, false),
            Session::Ca(sm) => self.process_protected(command, sm, true),
        };
        response.encode()
    }

    fn process_plain(&mut self, bytes: &[u8]) -> ResponseApdu {
        let Ok(cmd) = CommandApdu::decode(bytes) else {
            return status(StatusWord::WRONG_LENGTH);
        };
        if cmd.cla() != 0x00 {
            return status(StatusWord::CLA_NOT_SUPPORTED);
        }
        match cmd.ins() {
            INS_SELECT => self.select(&cmd, false),
            INS_GET_CHALLENGE => self.get_challenge(&cmd),
            INS_EXTERNAL_AUTHENTICATE => self.external_authenticate(&cmd),
            INS_READ_BINARY | INS_MSE => status(StatusWord::SECURITY_STATUS),
            _ => status(StatusWord::INS_NOT_SUPPORTED),
        }
    }

    /// On any secure messaging failure the session is dropped and 6988
    /// returned in the clear.
    fn process_protected(&mut self, bytes: &[u8], mut sm: SmSession, is_ca: bool) -> ResponseApdu {
        let inner = match CommandApdu::decode(bytes) {
            Ok(cmd) if cmd.cla() & CLA_SM == CLA_SM => sm.unprotect_command(&cmd),
            _ => return status(StatusWord::SM_OBJECTS_INCORRECT),
        };
        let Ok(inner) = inner else {
            return status(StatusWord::SM_OBJECTS_INCORRECT);
        };
        let (plain, next) = match inner.ins() {
            INS_SELECT => (self.select(&inner, true), None),
            INS_READ_BINARY => (self.read_binary(&inner, sm.suite()), None),
            INS_MSE => self.mse_set_kat(&inner),
            _ => (status(StatusWord::INS_NOT_SUPPORTED), None),
        };
        let Ok(protected) = sm.protect_response(&plain) else {
            return status(StatusWord::SM_OBJECTS_INCORRECT);
        };
        self.session = match next {
            // The BAC session is replaced, not nested.
            Some(ca) => Session::Ca(ca),
            None if is_ca => Session::Ca(sm),
            None => Session::Bac(sm),
        };
        protected
    }

    fn select(&mut self, cmd: &CommandApdu, authenticated: bool) -> ResponseApdu {
        match (cmd.p1(), cmd.data()) {
            (0x04, aid) if aid == EMRTD_AID => {
                self.current_ef = None;
                status(StatusWord::OK)
            }
            (0x04, _) => status(StatusWord::FILE_NOT_FOUND),
            (0x02, &[0x01, sfi]) if authenticated => {
                if self.files.contains_key(&sfi) {
                    self.current_ef = Some(sfi);
                    status(StatusWord::OK)
                } else {
                    status(StatusWord::FILE_NOT_FOUND)
                }
            }
            (0x02, [_, _]) if !authenticated => status(StatusWord::SECURITY_STATUS),
            (0x02, [_, _]) => status(StatusWord::FILE_NOT_FOUND),
            (0x02, _) => status(StatusWord::WRONG_LENGTH),
            _ => status(StatusWord::WRONG_PARAMETERS),
        }
    }

    fn get_challenge(&mut self, cmd: &CommandApdu) -> ResponseApdu {
        if cmd.le() != Some(8) || !cmd.data().is_empty() {
            return status(StatusWord::WRONG_LENGTH);
        }
        let mut challenge = [0u8; 8];
        self.rng.fill_bytes(&mut challenge);
        self.challenge = Some(challenge);
        ResponseApdu::new(challenge.to_vec(), StatusWord::OK)
    }

    fn external_authenticate(&mut self, cmd: &CommandApdu) -> ResponseApdu {
        let Some(rnd_ic) = self.challenge.take() else {
            return status(StatusWord::CONDITIONS_NOT_SATISFIED);
        };
        if cmd.data().len() != bac::AUTH_DATA_LEN {
            return status(StatusWord::WRONG_LENGTH);
        }
        let mut k_ic = [0u8; 16];
        self.rng.fill_bytes(&mut k_ic);
        match bac::chip_authenticate(&self.bac_keys, &rnd_ic, cmd.data(), &k_ic) {
            Ok((answer, sm)) => {
                self.session = Session::Bac(sm);
                ResponseApdu::new(answer, StatusWord::OK)
            }
            Err(_) => status(StatusWord::AUTH_FAILED),
        }
    }

    fn mse_set_kat(&mut self, cmd: &CommandApdu) -> (ResponseApdu, Option<SmSession>) {
        if (cmd.p1(), cmd.p2()) != (0x41, 0xA6) {
            return (status(StatusWord::WRONG_PARAMETERS), None);
        }
        let key = TlvReader::new(cmd.data()).and_then(|mut r| {
            let z = r.expect(TAG_EPHEMERAL_KEY)?;
            r.finish()?;
            Ok(z)
        });
        let Ok(z) = key else {
            return (status(StatusWord::WRONG_DATA), None);
        };
        match chip_receive_ca(&self.ca_private, self.suite, self.curve_id, &z) {
            Ok((_, session)) => (status(StatusWord::OK), Some(session)),
            Err(_) => (status(StatusWord::WRONG_DATA), None),
        }
    }

    fn read_binary(&mut self, cmd: &CommandApdu, suite: CipherSuite) -> ResponseApdu {
        let Some(le) = cmd.le() else {
            return status(StatusWord::WRONG_LENGTH);
        };
        if !cmd.data().is_empty() {
            return status(StatusWord::WRONG_LENGTH);
        }
        let (sfi, offset) = if cmd.p1() & 0x80 != 0 {
            if cmd.p1() & 0x60 != 0 {
                return status(StatusWord::WRONG_PARAMETERS);
            }
            let sfi = cmd.p1() & 0x1F;
            if !self.files.contains_key(&sfi) {
                return status(StatusWord::FILE_NOT_FOUND);
            }
            self.current_ef = Some(sfi);
            (sfi, cmd.p2() as usize)
        } else {
            match self.current_ef {
                Some(sfi) => (sfi, u16::from_be_bytes([cmd.p1(), cmd.p2()]) as usize),
                None => return status(StatusWord::CONDITIONS_NOT_SATISFIED),
            }
        };
        let content = &self.files[&sfi];
        if offset >= content.len() {
            return status(StatusWord::WRONG_PARAMETERS);
        }
        let limit = max_protected_read(suite);
        let n = (le as usize).min(limit).min(content.len() - offset);
        ResponseApdu::new(content[offset..offset + n].to_vec(), StatusWord::OK)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let files: Vec<TlvObject> = self
            .files
            .iter()
            .map(|(sfi, content)| {
                TlvObject::new(
                    0x30,
                    encode_sequence(&[TlvObject::new(0x02, vec![*sfi]), TlvObject::new(0x04, content.clone())]),
                )
            })
            .collect();
        let params = self.curve_id.params();
        let body = encode_sequence(&[
            TlvObject::new(0x80, vec![FORMAT_VERSION]),
            TlvObject::new(0x81, vec![self.suite.code()]),
            TlvObject::new(0x82, vec![self.curve_id.code()]),
            TlvObject::new(0x83, self.mrz.text().into_bytes()),
            TlvObject::new(0x84, self.ca_private.to_be_bytes(params)),
            TlvObject::new(0x85, self.chip_seed.to_vec()),
            TlvObject::new(0xA0, encode_sequence(&files)),
        ]);
        TlvObject::new(TAG_PASSPORT, body).encode()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PassportFileError> {
        use PassportFileError::Malformed;
        let outer = decode_tlv(bytes)?;
        if outer.tag() != TAG_PASSPORT {
            return Err(Malformed);
        }
        let mut r = TlvReader::new(&outer.value)?;
        match r.expect(0x80)?.as_slice() {
            [FORMAT_VERSION] => {}
            [v] => return Err(PassportFileError::Version(*v)),
            _ => return Err(Malformed),
        }
        let suite = single(&r.expect(0x81)?)
            .and_then(CipherSuite::from_code)
            .ok_or(Malformed)?;
        let curve_id = single(&r.expect(0x82)?).and_then(CurveId::from_code).ok_or(Malformed)?;
        let mrz_text = String::from_utf8(r.expect(0x83)?).map_err(|_| Malformed)?;
        let mrz = Td3::parse(&mrz_text).map_err(|_| Malformed)?;
        let ca_private = Scalar::from_be_bytes(&r.expect(0x84)?, curve_id.params()).map_err(|_| Malformed)?;
        let chip_seed: [u8; 32] = r.expect(0x85)?.try_into().map_err(|_| Malformed)?;
        let file_list = r.expect(0xA0)?;
        r.finish()?;

        let mut files = BTreeMap::new();
        for item in decode_tlv_sequence(&file_list)? {
            if item.tag() != 0x30 {
                return Err(Malformed);
            }
            let mut e = TlvReader::new(&item.value)?;
            let sfi = single(&e.expect(0x02)?).ok_or(Malformed)?;
            let content = e.expect(0x04)?;
            e.finish()?;
            if !(1..=30).contains(&sfi) || files.insert(sfi, content).is_some() {
                return Err(Malformed);
            }
        }
        Ok(Self::assemble(mrz, suite, curve_id, files, ca_private, chip_seed))
    }
}

fn single(bytes: &[u8]) -> Option<u8> {
    match bytes {
        [b] => Some(*b),
        _ => None,
    }
}

impl CardHarness for PassportState {
    fn transmit(&mut self, command: &[u8]) -> Vec<u8> {
        self.process_apdu(command)
    }

    fn reset(&mut self) {
        PassportState::reset(self)
    }
}
