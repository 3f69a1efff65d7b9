//! Chip Authentication: the DG14 key profile, ephemeral Diffie-Hellman and
//! the switch into the resulting secure-messaging session.
//!
//! DG14 layout (all lengths DER):
//!
//! ```text
//! 6E {
//!   30 { 06 id-CA-ECDH-<suite>   02 01 01 }
//!   30 { 06 id-PK-ECDH
//!        30 { 06 <curve oid>  81 p  82 a  83 b  84 G  85 q  87 h }
//!        86 Y }
//! }
//! ```

use thiserror::Error;

use crate::apdu::{CommandApdu, INS_MSE};
use crate::group::{to_fixed_be, CurveId, DomainParameters, GroupError, Point, Scalar};
use crate::sm::{derive_session_keys, CipherSuite, SmSession};
use crate::tlv::{decode_tlv, TlvError, TlvObject, TlvReader};

pub const TAG_DG14: u16 = 0x6E;
/// Data object carrying the ephemeral public key in MSE:SET KAT.
pub const TAG_EPHEMERAL_KEY: u16 = 0x91;

/// id-PK-ECDH, 0.4.0.127.0.7.2.2.1.2
const OID_PK_ECDH: [u8; 9] = [0x04, 0x00, 0x7F, 0x00, 0x07, 0x02, 0x02, 0x01, 0x02];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Dg14Error {
    #[error("unknown chip authentication suite")]
    UnknownSuite,
    #[error("unknown or inconsistent curve")]
    UnknownCurve,
    #[error("public key is not on the curve")]
    OffCurvePoint,
    #[error("malformed DG14")]
    Malformed,
}

impl From<TlvError> for Dg14Error {
    fn from(_: TlvError) -> Self {
        Dg14Error::Malformed
    }
}

impl From<GroupError> for Dg14Error {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::OffCurvePoint => Dg14Error::OffCurvePoint,
            _ => Dg14Error::Malformed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dg14Content {
    pub suite: CipherSuite,
    pub curve_id: CurveId,
    pub ca_public_key: Point,
}

impl Dg14Content {
    pub fn params(&self) -> &'static DomainParameters {
        self.curve_id.params()
    }
}

fn domain_parameter_objects(params: &DomainParameters) -> Vec<TlvObject> {
    let n = params.field_len();
    vec![
        TlvObject::new(0x06, params.curve_id.oid()),
        TlvObject::new(0x81, to_fixed_be(&params.p, n)),
        TlvObject::new(0x82, to_fixed_be(&params.a, n)),
        TlvObject::new(0x83, to_fixed_be(&params.b, n)),
        TlvObject::new(0x84, params.encode_point(&params.g).expect("generator")),
        TlvObject::new(0x85, to_fixed_be(&params.q, params.scalar_len())),
        TlvObject::new(0x87, vec![params.h as u8]),
    ]
}

fn seq(objs: &[TlvObject]) -> Vec<u8> {
    crate::tlv::encode_sequence(objs)
}

pub fn encode_dg14(content: &Dg14Content) -> Result<Vec<u8>, GroupError> {
    let params = content.params();
    let ca_info = seq(&[
        TlvObject::new(0x06, content.suite.oid().to_vec()),
        TlvObject::new(0x02, vec![0x01]),
    ]);
    let pk_info = seq(&[
        TlvObject::new(0x06, OID_PK_ECDH.to_vec()),
        TlvObject::new(0x30, seq(&domain_parameter_objects(params))),
        TlvObject::new(0x86, params.encode_point(&content.ca_public_key)?),
    ]);
    let body = seq(&[TlvObject::new(0x30, ca_info), TlvObject::new(0x30, pk_info)]);
    Ok(TlvObject::new(TAG_DG14, body).encode())
}

pub fn parse_dg14(bytes: &[u8]) -> Result<Dg14Content, Dg14Error> {
    let outer = decode_tlv(bytes)?;
    if outer.tag() != TAG_DG14 {
        return Err(Dg14Error::Malformed);
    }
    let mut top = TlvReader::new(&outer.value)?;
    let ca_info = top.expect(0x30)?;
    let pk_info = top.expect(0x30)?;
    top.finish()?;

    let mut ca = TlvReader::new(&ca_info)?;
    let suite = CipherSuite::from_oid(&ca.expect(0x06)?).ok_or(Dg14Error::UnknownSuite)?;
    if ca.expect(0x02)? != [0x01] {
        return Err(Dg14Error::Malformed);
    }
    ca.finish()?;

    let mut pk = TlvReader::new(&pk_info)?;
    if pk.expect(0x06)? != OID_PK_ECDH {
        return Err(Dg14Error::Malformed);
    }
    let domain = pk.expect(0x30)?;
    let public = pk.expect(0x86)?;
    pk.finish()?;

    let curve_oid = TlvReader::new(&domain)?.expect(0x06)?;
    let curve_id = CurveId::from_oid(&curve_oid).ok_or(Dg14Error::UnknownCurve)?;
    let params = curve_id.params();
    // Explicit parameters must match the named curve exactly.
    if domain != seq(&domain_parameter_objects(params)) {
        return Err(Dg14Error::UnknownCurve);
    }
    let ca_public_key = params.decode_point(&public)?;
    Ok(Dg14Content {
        suite,
        curve_id,
        ca_public_key,
    })
}

/// Shared secret bytes: the fixed-width x-coordinate of the DH point.
#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret(Vec<u8>);

impl SharedSecret {
    pub fn from_point(point: &Point, params: &DomainParameters) -> Option<Self> {
        point.x().map(|x| SharedSecret(to_fixed_be(x, params.field_len())))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SharedSecret({})", hex::encode(&self.0))
    }
}

/// Terminal view of a completed key agreement.
#[derive(Clone, Debug)]
pub struct CaTranscript {
    pub ephemeral_public: Point,
    pub shared_secret: SharedSecret,
    pub session: SmSession,
}

/// Terminal side: Z = kG, K = x(kY), session keys from K.
pub fn terminal_chip_auth(dg14: &Dg14Content, k: &Scalar) -> CaTranscript {
    let params = dg14.params();
    let ephemeral_public = params.mul_generator(k);
    let shared = params.scalar_mult(k, &dg14.ca_public_key);
    let shared_secret = SharedSecret::from_point(&shared, params).expect("kY is not the identity for 0 < k < q");
    let session = derive_session_keys(shared_secret.as_bytes(), dg14.suite);
    CaTranscript {
        ephemeral_public,
        shared_secret,
        session,
    }
}

/// Chip side: K = x(xZ) for the received ephemeral key.
pub fn chip_receive_ca(
    private_key: &Scalar,
    suite: CipherSuite,
    curve_id: CurveId,
    ephemeral_public: &[u8],
) -> Result<(SharedSecret, SmSession), GroupError> {
    let params = curve_id.params();
    let z = params.decode_point(ephemeral_public)?;
    let shared = params.scalar_mult(private_key, &z);
    let secret = SharedSecret::from_point(&shared, params).ok_or(GroupError::OffCurvePoint)?;
    let session = derive_session_keys(secret.as_bytes(), suite);
    Ok((secret, session))
}

/// MSE:SET KAT carrying the encoded ephemeral public key.
pub fn mse_set_kat(encoded_z: &[u8]) -> CommandApdu {
    CommandApdu::new(
        0x00,
        INS_MSE,
        0x41,
        0xA6,
        TlvObject::new(TAG_EPHEMERAL_KEY, encoded_z.to_vec()).encode(),
        None,
    )
    .expect("encoded point fits a short APDU")
}
