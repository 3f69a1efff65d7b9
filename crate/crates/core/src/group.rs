//! Elliptic-curve group arithmetic over the Brainpool curves used for chip
//! authentication, plus the deterministic PIN-to-point embedding.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

/// Upper bound on try-and-increment steps before the embedding gives up.
const EMBED_MAX_STEPS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("malformed point encoding")]
    MalformedPoint,
    #[error("point is not on the curve")]
    OffCurvePoint,
    #[error("scalar out of range (0, q)")]
    ScalarOutOfRange,
    #[error("no curve point found within {0} increments")]
    EmbeddingFailed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveId {
    BrainpoolP256r1,
    BrainpoolP320r1,
}

impl CurveId {
    pub const ALL: [CurveId; 2] = [CurveId::BrainpoolP256r1, CurveId::BrainpoolP320r1];

    pub fn params(self) -> &'static DomainParameters {
        static P256: OnceLock<DomainParameters> = OnceLock::new();
        static P320: OnceLock<DomainParameters> = OnceLock::new();
        match self {
            CurveId::BrainpoolP256r1 => P256.get_or_init(|| DomainParameters::from_hex(self, BP256)),
            CurveId::BrainpoolP320r1 => P320.get_or_init(|| DomainParameters::from_hex(self, BP320)),
        }
    }

    /// Single-byte code used by the file formats.
    pub fn code(self) -> u8 {
        match self {
            CurveId::BrainpoolP256r1 => 1,
            CurveId::BrainpoolP320r1 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(CurveId::BrainpoolP256r1),
            2 => Some(CurveId::BrainpoolP320r1),
            _ => None,
        }
    }

    /// DER body of the RFC 5639 object identifier.
    pub fn oid(self) -> &'static [u8] {
        match self {
            CurveId::BrainpoolP256r1 => &[0x2B, 0x24, 0x03, 0x03, 0x02, 0x08, 0x01, 0x01, 0x07],
            CurveId::BrainpoolP320r1 => &[0x2B, 0x24, 0x03, 0x03, 0x02, 0x08, 0x01, 0x01, 0x09],
        }
    }

    pub fn from_oid(oid: &[u8]) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.oid() == oid)
    }

    pub fn name(self) -> &'static str {
        match self {
            CurveId::BrainpoolP256r1 => "brainpoolP256r1",
            CurveId::BrainpoolP320r1 => "brainpoolP320r1",
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct CurveHex {
    p: &'static str,
    a: &'static str,
    b: &'static str,
    gx: &'static str,
    gy: &'static str,
    q: &'static str,
}

// RFC 5639, section 3.
const BP256: CurveHex = CurveHex {
    p: "A9FB57DBA1EEA9BC3E660A909D838D726E3BF623D52620282013481D1F6E5377",
    a: "7D5A0975FC2C3057EEF67530417AFFE7FB8055C126DC5C6CE94A4B44F330B5D9",
    b: "26DC5C6CE94A4B44F330B5D9BBD77CBF958416295CF7E1CE6BCCDC18FF8C07B6",
    gx: "8BD2AEB9CB7E57CB2C4B482FFC81B7AFB9DE27E1E3BD23C23A4453BD9ACE3262",
    gy: "547EF835C3DAC4FD97F8461A14611DC9C27745132DED8E545C1D54C72F046997",
    q: "A9FB57DBA1EEA9BC3E660A909D838D718C397AA3B561A6F7901E0E82974856A7",
};

const BP320: CurveHex = CurveHex {
    p: "D35E472036BC4FB7E13C785ED201E065F98FCFA6F6F40DEF4F92B9EC7893EC28FCD412B1F1B32E27",
    a: "3EE30B568FBAB0F883CCEBD46D3F3BB8A2A73513F5EB79DA66190EB085FFA9F492F375A97D860EB4",
    b: "520883949DFDBC42D3AD198640688A6FE13F41349554B49ACC31DCCD884539816F5EB4AC8FB1F1A6",
    gx: "43BD7E9AFB53D8B85289BCC48EE5BFE6F20137D10A087EB6E7871E2A10A599C710AF8D0D39E20611",
    gy: "14FDD05545EC1CC8AB4093247F77275E0743FFED117182EAA9C77877AAAC6AC7D35245D1692E8EE1",
    q: "D35E472036BC4FB7E13C785ED201E065F98FCFA5B68F12A32D482EC7EE8658E98691555B44C59311",
};

fn hex_uint(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).expect("valid curve constant")
}

/// A point of the group: the identity or an affine point on the curve.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Point {
    Identity,
    Affine { x: BigUint, y: BigUint },
}

impl Point {
    pub fn is_identity(&self) -> bool {
        matches!(self, Point::Identity)
    }

    pub fn x(&self) -> Option<&BigUint> {
        match self {
            Point::Identity => None,
            Point::Affine { x, .. } => Some(x),
        }
    }

    pub fn y(&self) -> Option<&BigUint> {
        match self {
            Point::Identity => None,
            Point::Affine { y, .. } => Some(y),
        }
    }
}

/// An integer in the open interval (0, q).
#[derive(Clone, PartialEq, Eq)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn new(value: BigUint, params: &DomainParameters) -> Result<Self, GroupError> {
        if value.is_zero() || value >= params.q {
            return Err(GroupError::ScalarOutOfRange);
        }
        Ok(Scalar(value))
    }

    pub fn from_be_bytes(bytes: &[u8], params: &DomainParameters) -> Result<Self, GroupError> {
        Self::new(BigUint::from_bytes_be(bytes), params)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Fixed-width big-endian encoding (width of the group order).
    pub fn to_be_bytes(&self, params: &DomainParameters) -> Vec<u8> {
        to_fixed_be(&self.0, params.scalar_len())
    }
}

// Private values stay out of logs.
impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

pub(crate) fn to_fixed_be(v: &BigUint, len: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    debug_assert!(raw.len() <= len);
    let mut out = vec![0u8; len - raw.len().min(len)];
    out.extend_from_slice(&raw);
    out
}

/// Curve y² = x³ + ax + b over GF(p) with a prime-order generator.
#[derive(Debug, Clone)]
pub struct DomainParameters {
    pub curve_id: CurveId,
    pub p: BigUint,
    pub a: BigUint,
    pub b: BigUint,
    pub g: Point,
    pub q: BigUint,
    pub h: u32,
}

/// Jacobian coordinates (X, Y, Z) representing (X/Z², Y/Z³); Z = 0 is the identity.
#[derive(Clone)]
struct Jacobian {
    x: BigUint,
    y: BigUint,
    z: BigUint,
}

impl DomainParameters {
    fn from_hex(curve_id: CurveId, c: CurveHex) -> Self {
        DomainParameters {
            curve_id,
            p: hex_uint(c.p),
            a: hex_uint(c.a),
            b: hex_uint(c.b),
            g: Point::Affine {
                x: hex_uint(c.gx),
                y: hex_uint(c.gy),
            },
            q: hex_uint(c.q),
            h: 1,
        }
    }

    /// Byte length of a field element.
    pub fn field_len(&self) -> usize {
        self.p.bits().div_ceil(8) as usize
    }

    pub fn scalar_len(&self) -> usize {
        self.q.bits().div_ceil(8) as usize
    }

    pub fn q_bits(&self) -> u32 {
        self.q.bits() as u32
    }

    fn add_mod(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.p {
            s - &self.p
        } else {
            s
        }
    }

    fn sub_mod(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            &self.p - b + a
        }
    }

    fn mul_mod(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    fn rhs(&self, x: &BigUint) -> BigUint {
        let x2 = self.mul_mod(x, x);
        let x3 = self.mul_mod(&x2, x);
        let ax = self.mul_mod(&self.a, x);
        self.add_mod(&self.add_mod(&x3, &ax), &self.b)
    }

    pub fn is_on_curve(&self, point: &Point) -> bool {
        match point {
            Point::Identity => true,
            Point::Affine { x, y } => x < &self.p && y < &self.p && self.mul_mod(y, y) == self.rhs(x),
        }
    }

    pub fn neg(&self, point: &Point) -> Point {
        match point {
            Point::Identity => Point::Identity,
            Point::Affine { x, y } => Point::Affine {
                x: x.clone(),
                y: if y.is_zero() { BigUint::zero() } else { &self.p - y },
            },
        }
    }

    pub fn add(&self, lhs: &Point, rhs: &Point) -> Point {
        let sum = self.jacobian_add(&self.to_jacobian(lhs), &self.to_jacobian(rhs));
        self.to_affine(&sum)
    }

    pub fn sub(&self, lhs: &Point, rhs: &Point) -> Point {
        self.add(lhs, &self.neg(rhs))
    }

    /// k·P by left-to-right double-and-add. Accepts any non-negative k.
    pub fn mul(&self, k: &BigUint, point: &Point) -> Point {
        let base = self.to_jacobian(point);
        let mut acc = Jacobian::identity();
        for i in (0..k.bits()).rev() {
            acc = self.jacobian_double(&acc);
            if k.bit(i) {
                acc = self.jacobian_add(&acc, &base);
            }
        }
        self.to_affine(&acc)
    }

    pub fn scalar_mult(&self, k: &Scalar, point: &Point) -> Point {
        self.mul(k.value(), point)
    }

    pub fn mul_generator(&self, k: &Scalar) -> Point {
        self.mul(k.value(), &self.g)
    }

    pub fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Scalar {
        let len = self.scalar_len();
        let excess = len as u64 * 8 - self.q.bits();
        let mut buf = vec![0u8; len];
        loop {
            rng.fill_bytes(&mut buf);
            buf[0] &= 0xFF >> excess;
            let v = BigUint::from_bytes_be(&buf);
            if !v.is_zero() && v < self.q {
                return Scalar(v);
            }
        }
    }

    /// Ephemeral or static key pair (k, kG).
    pub fn generate_keypair<R: RngCore + CryptoRng>(&self, rng: &mut R) -> (Scalar, Point) {
        let k = self.random_scalar(rng);
        let public = self.mul_generator(&k);
        (k, public)
    }

    /// Square root modulo p. Both Brainpool primes satisfy p ≡ 3 (mod 4).
    fn sqrt(&self, v: &BigUint) -> Option<BigUint> {
        debug_assert_eq!(&self.p % 4u32, BigUint::from(3u32));
        let exp = (&self.p + 1u32) >> 2;
        let r = v.modpow(&exp, &self.p);
        (self.mul_mod(&r, &r) == *v).then_some(r)
    }

    /// Maps a PIN to a group element: the PIN is read as a big-endian
    /// integer reduced mod p and incremented until it is the x-coordinate of
    /// a curve point; the even-y point is returned.
    pub fn embed_pin(&self, pin: &[u8]) -> Result<Point, GroupError> {
        let mut x = BigUint::from_bytes_be(pin) % &self.p;
        for _ in 0..EMBED_MAX_STEPS {
            let rhs = self.rhs(&x);
            if let Some(y) = self.sqrt(&rhs) {
                let y = if y.is_odd() { &self.p - y } else { y };
                return Ok(Point::Affine { x, y });
            }
            x = self.add_mod(&x, &BigUint::one());
        }
        Err(GroupError::EmbeddingFailed(EMBED_MAX_STEPS))
    }

    /// Uncompressed encoding 0x04 ‖ x ‖ y. The identity has no encoding.
    pub fn encode_point(&self, point: &Point) -> Result<Vec<u8>, GroupError> {
        match point {
            Point::Identity => Err(GroupError::MalformedPoint),
            Point::Affine { x, y } => {
                let n = self.field_len();
                let mut out = Vec::with_capacity(1 + 2 * n);
                out.push(0x04);
                out.extend(to_fixed_be(x, n));
                out.extend(to_fixed_be(y, n));
                Ok(out)
            }
        }
    }

    pub fn decode_point(&self, bytes: &[u8]) -> Result<Point, GroupError> {
        let n = self.field_len();
        if bytes.len() != 1 + 2 * n || bytes[0] != 0x04 {
            return Err(GroupError::MalformedPoint);
        }
        let point = Point::Affine {
            x: BigUint::from_bytes_be(&bytes[1..1 + n]),
            y: BigUint::from_bytes_be(&bytes[1 + n..]),
        };
        if !self.is_on_curve(&point) {
            return Err(GroupError::OffCurvePoint);
        }
        Ok(point)
    }

    fn to_jacobian(&self, point: &Point) -> Jacobian {
        match point {
            Point::Identity => Jacobian::identity(),
            Point::Affine { x, y } => Jacobian {
                x: x.clone(),
                y: y.clone(),
                z: BigUint::one(),
            },
        }
    }

    fn to_affine(&self, j: &Jacobian) -> Point {
        if j.z.is_zero() {
            return Point::Identity;
        }
        let z_inv = j.z.modinv(&self.p).expect("p is prime");
        let z_inv2 = self.mul_mod(&z_inv, &z_inv);
        let z_inv3 = self.mul_mod(&z_inv2, &z_inv);
        Point::Affine {
            x: self.mul_mod(&j.x, &z_inv2),
            y: self.mul_mod(&j.y, &z_inv3),
        }
    }

    fn jacobian_double(&self, j: &Jacobian) -> Jacobian {
        if j.z.is_zero() || j.y.is_zero() {
            return Jacobian::identity();
        }
        let xx = self.mul_mod(&j.x, &j.x);
        let yy = self.mul_mod(&j.y, &j.y);
        let yyyy = self.mul_mod(&yy, &yy);
        let zz = self.mul_mod(&j.z, &j.z);
        let s = (4u32 * self.mul_mod(&j.x, &yy)) % &self.p;
        let m = (3u32 * xx + self.mul_mod(&self.a, &self.mul_mod(&zz, &zz))) % &self.p;
        let x3 = self.sub_mod(&self.mul_mod(&m, &m), &self.add_mod(&s, &s));
        let y3 = self.sub_mod(&self.mul_mod(&m, &self.sub_mod(&s, &x3)), &((8u32 * yyyy) % &self.p));
        let z3 = (2u32 * self.mul_mod(&j.y, &j.z)) % &self.p;
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn jacobian_add(&self, lhs: &Jacobian, rhs: &Jacobian) -> Jacobian {
        if lhs.z.is_zero() {
            return rhs.clone();
        }
        if rhs.z.is_zero() {
            return lhs.clone();
        }
        let z1z1 = self.mul_mod(&lhs.z, &lhs.z);
        let z2z2 = self.mul_mod(&rhs.z, &rhs.z);
        let u1 = self.mul_mod(&lhs.x, &z2z2);
        let u2 = self.mul_mod(&rhs.x, &z1z1);
        let s1 = self.mul_mod(&lhs.y, &self.mul_mod(&rhs.z, &z2z2));
        let s2 = self.mul_mod(&rhs.y, &self.mul_mod(&lhs.z, &z1z1));
        if u1 == u2 {
            return if s1 == s2 {
                self.jacobian_double(lhs)
            } else {
                Jacobian::identity()
            };
        }
        let h = self.sub_mod(&u2, &u1);
        let r = self.sub_mod(&s2, &s1);
        let hh = self.mul_mod(&h, &h);
        let hhh = self.mul_mod(&hh, &h);
        let u1hh = self.mul_mod(&u1, &hh);
        let x3 = self.sub_mod(&self.sub_mod(&self.mul_mod(&r, &r), &hhh), &self.add_mod(&u1hh, &u1hh));
        let y3 = self.sub_mod(&self.mul_mod(&r, &self.sub_mod(&u1hh, &x3)), &self.mul_mod(&s1, &hhh));
        let z3 = self.mul_mod(&h, &self.mul_mod(&lhs.z, &rhs.z));
        Jacobian { x: x3, y: y3, z: z3 }
    }
}

impl Jacobian {
    fn identity() -> Self {
        Jacobian {
            x: BigUint::one(),
            y: BigUint::one(),
            z: BigUint::zero(),
        }
    }
}
