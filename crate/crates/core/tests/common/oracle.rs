//! Textbook affine arithmetic used as a cross-check for the Jacobian
//! implementation. Inverses come from Fermat's little theorem.

use num_bigint::BigUint;
use rde_core::group::{DomainParameters, Point};

fn inv(v: &BigUint, p: &BigUint) -> BigUint {
    v.modpow(&(p - 2u32), p)
}

fn sub(a: &BigUint, b: &BigUint, p: &BigUint) -> BigUint {
    ((a % p) + p - (b % p)) % p
}

pub fn add(c: &DomainParameters, lhs: &Point, rhs: &Point) -> Point {
    let p = &c.p;
    let (x1, y1, x2, y2) = match (lhs, rhs) {
        (Point::Identity, q) | (q, Point::Identity) => return q.clone(),
        (Point::Affine { x: x1, y: y1 }, Point::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
    };
    let lambda = if x1 == x2 {
        if (y1 + y2) % p == BigUint::from(0u8) {
            return Point::Identity;
        }
        (BigUint::from(3u8) * x1 * x1 + &c.a) * inv(&(BigUint::from(2u8) * y1), p) % p
    } else {
        sub(y2, y1, p) * inv(&sub(x2, x1, p), p) % p
    };
    let x3 = sub(&sub(&(&lambda * &lambda), x1, p), x2, p);
    let y3 = sub(&(&lambda * sub(x1, &x3, p)), y1, p);
    Point::Affine { x: x3, y: y3 }
}

pub fn mul(c: &DomainParameters, k: &BigUint, point: &Point) -> Point {
    let mut acc = Point::Identity;
    for i in (0..k.bits()).rev() {
        acc = add(c, &acc, &acc);
        if k.bit(i) {
            acc = add(c, &acc, point);
        }
    }
    acc
}
