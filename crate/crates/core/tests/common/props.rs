//! Property checks driven by an explicit proptest runner, shared by the
//! property test target and the acceptance harness.

use num_bigint::BigUint;
use num_traits::Zero;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::RngCore;
use rde_core::apdu::{CommandApdu, ResponseApdu};
use rde_core::group::{CurveId, Point, Scalar};
use rde_core::sim::CardHarness;
use rde_core::sm::{derive_session_keys, pad2, unpad2, CipherSuite};
use rde_core::tlv::{decode_tlv_sequence, encode_sequence, TlvObject};

use super::oracle;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn scalar(curve: CurveId) -> impl Strategy<Value = Scalar> {
    any::<[u8; 48]>().prop_map(move |bytes| {
        let params = curve.params();
        let v = BigUint::from_bytes_be(&bytes) % &params.q;
        let v = if v.is_zero() { BigUint::from(1u8) } else { v };
        Scalar::new(v, params).unwrap()
    })
}

pub fn group_laws(curve: CurveId, cases: u32) -> Result<(), String> {
    let params = curve.params();
    run(cases, (scalar(curve), scalar(curve)), |(a, b)| {
        let p = params.mul_generator(&a);
        let q = params.mul_generator(&b);
        prop_assert!(params.is_on_curve(&p) && !p.is_identity());
        let sum = (a.value() + b.value()) % &params.q;
        prop_assert_eq!(params.add(&p, &q), params.mul(&sum, &params.g));
        let product = (a.value() * b.value()) % &params.q;
        let ab = params.mul(&product, &params.g);
        prop_assert_eq!(params.scalar_mult(&a, &q), ab.clone());
        prop_assert_eq!(params.scalar_mult(&b, &p), ab);
        prop_assert_eq!(params.add(&p, &q), params.add(&q, &p));
        prop_assert_eq!(
            params.add(&params.add(&p, &q), &params.g),
            params.add(&p, &params.add(&q, &params.g))
        );
        prop_assert_eq!(params.add(&p, &params.neg(&p)), Point::Identity);
        prop_assert_eq!(params.add(&p, &Point::Identity), p.clone());
        prop_assert_eq!(params.sub(&params.add(&p, &q), &q), p.clone());
        prop_assert_eq!(params.decode_point(&params.encode_point(&p).unwrap()).unwrap(), p);
        Ok(())
    })
}

pub fn group_order(curve: CurveId, cases: u32) -> Result<(), String> {
    let params = curve.params();
    run(cases, scalar(curve), |a| {
        let p = params.mul_generator(&a);
        prop_assert_eq!(params.mul(&params.q, &p), Point::Identity);
        Ok(())
    })
}

pub fn matches_affine_oracle(curve: CurveId, cases: u32) -> Result<(), String> {
    let params = curve.params();
    run(cases, (scalar(curve), scalar(curve)), |(a, b)| {
        let p = params.mul_generator(&a);
        prop_assert_eq!(oracle::mul(params, a.value(), &params.g), p.clone());
        let q = params.mul_generator(&b);
        prop_assert_eq!(oracle::add(params, &p, &q), params.add(&p, &q));
        prop_assert_eq!(oracle::add(params, &p, &p), params.add(&p, &p));
        Ok(())
    })
}

pub fn decode_rejects_corruption(curve: CurveId, cases: u32) -> Result<(), String> {
    let params = curve.params();
    run(
        cases,
        (scalar(curve), any::<prop::sample::Index>(), 1u8..=255),
        |(a, at, flip)| {
            let p = params.mul_generator(&a);
            let mut bytes = params.encode_point(&p).unwrap();
            let i = at.index(bytes.len());
            bytes[i] ^= flip;
            if let Ok(decoded) = params.decode_point(&bytes) {
                prop_assert!(params.is_on_curve(&decoded) && decoded != p)
            }
            let truncated = &bytes[..bytes.len() - 1];
            prop_assert!(params.decode_point(truncated).is_err());
            Ok(())
        },
    )
}

pub fn embedding(curve: CurveId, cases: u32) -> Result<(), String> {
    let params = curve.params();
    run(cases, prop::collection::vec(any::<u8>(), 0..16), |pin| {
        let e = params.embed_pin(&pin).unwrap();
        prop_assert!(params.is_on_curve(&e));
        let y = e.y().unwrap();
        prop_assert!(!y.bit(0));
        prop_assert_eq!(params.embed_pin(&pin).unwrap(), e);
        Ok(())
    })
}

pub fn padding(cases: u32) -> Result<(), String> {
    run(
        cases,
        (
            prop::collection::vec(any::<u8>(), 0..300),
            prop::sample::select(vec![8usize, 16]),
        ),
        |(data, block)| {
            let padded = pad2(&data, block);
            prop_assert_eq!(padded.len() % block, 0);
            prop_assert!(padded.len() > data.len() && padded.len() <= data.len() + block);
            prop_assert_eq!(unpad2(&padded, block).unwrap(), data.clone());
            let _ = unpad2(&data, block);
            Ok(())
        },
    )
}

fn tlv_tree() -> impl Strategy<Value = TlvObject> {
    let tag = prop_oneof![
        (0u16..=0xFF).prop_filter("single-byte tag", |t| t & 0x1F != 0x1F),
        (0x1Fu16..0x80).prop_map(|b| 0x5F00 | b),
    ];
    (tag, prop::collection::vec(any::<u8>(), 0..300)).prop_map(|(t, v)| TlvObject::new(t, v))
}

pub fn tlv_codec(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(any::<u8>(), 0..64), |bytes| {
        if let Ok(objs) = decode_tlv_sequence(&bytes) {
            prop_assert_eq!(encode_sequence(&objs), bytes);
        }
        Ok(())
    })?;
    run(cases / 4, prop::collection::vec(tlv_tree(), 0..4), |objs| {
        let encoded = encode_sequence(&objs);
        prop_assert_eq!(decode_tlv_sequence(&encoded).unwrap(), objs);
        Ok(())
    })
}

pub fn apdu_codec(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(any::<u8>(), 0..270), |bytes| {
        if let Ok(cmd) = CommandApdu::decode(&bytes) {
            prop_assert_eq!(cmd.encode(), bytes.clone());
        }
        if let Ok(r) = ResponseApdu::decode(&bytes) {
            prop_assert_eq!(r.encode(), bytes);
        }
        Ok(())
    })?;
    let command = (
        any::<[u8; 4]>(),
        prop::collection::vec(any::<u8>(), 0..=255),
        prop::option::of(1u16..=256),
    );
    run(cases / 4, command, |(h, data, le)| {
        let cmd = CommandApdu::new(h[0], h[1], h[2], h[3], data, le).unwrap();
        prop_assert_eq!(CommandApdu::decode(&cmd.encode()).unwrap(), cmd);
        Ok(())
    })
}

/// Random bytes into secure-messaging unwrapping and into a card that holds
/// an open chip-authentication session.
pub fn secure_messaging_totality(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(any::<u8>(), 0..270), |bytes| {
        for suite in CipherSuite::ALL {
            let mut s = derive_session_keys(&[7; 32], suite);
            if let Ok(cmd) = CommandApdu::decode(&bytes) {
                prop_assert!(s.unprotect_command(&cmd).is_err() || bytes.len() > 10);
            }
            if let Ok(r) = ResponseApdu::decode(&bytes) {
                let _ = s.unprotect_response(&r);
            }
        }
        Ok(())
    })?;
    let mut card = super::passport(CipherSuite::Aes192, CurveId::BrainpoolP256r1, 1);
    let mrz = card.mrz().key.clone();
    let dg14 = rde_core::chip_auth::parse_dg14(card.file(rde_core::sim::SFI_DG14).unwrap()).unwrap();
    let mut rng = super::rng(cases as u64);
    for _ in 0..cases / 10 {
        let mut reader = rde_core::reader::Reader::new(&mut card);
        reader.reset();
        reader.basic_access_control(&mrz, &mut rng).map_err(|e| e.to_string())?;
        let k = dg14.params().random_scalar(&mut rng);
        reader.chip_authenticate(&dg14, &k).map_err(|e| e.to_string())?;
        drop(reader);
        let mut bytes = vec![0u8; (rng.next_u32() % 270) as usize];
        rng.fill_bytes(&mut bytes);
        if card.transmit(&bytes).len() < 2 {
            return Err("card returned no status word".into());
        }
    }
    Ok(())
}
