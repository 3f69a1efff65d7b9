#![allow(dead_code)]

pub mod oracle;
pub mod props;
pub mod published;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rde_core::group::CurveId;
use rde_core::passive_auth::IssuerKeypair;
use rde_core::protocol::{read_document, register, Consent, ExtractionParameters, RegistrationRecord};
use rde_core::sim::{create_passport, PassportProfile, PassportState, SFI_DG14};
use rde_core::sm::CipherSuite;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn issuer() -> IssuerKeypair {
    IssuerKeypair::from_seed(b"test issuer")
}

/// Every suite on every curve.
pub fn profiles() -> Vec<(CipherSuite, CurveId)> {
    CipherSuite::ALL
        .into_iter()
        .flat_map(|s| CurveId::ALL.into_iter().map(move |c| (s, c)))
        .collect()
}

pub fn passport(suite: CipherSuite, curve: CurveId, seed: u64) -> PassportState {
    create_passport(
        &PassportProfile::specimen(suite, curve, Some(seed)),
        &issuer(),
        &mut rng(0),
    )
}

pub fn consent() -> Consent {
    Consent {
        given: true,
        timestamp: 1_700_000_000,
    }
}

/// Reads the card over BAC and registers DG14 as the extraction file.
pub fn enroll(card: &mut PassportState, n: usize) -> RegistrationRecord {
    let mrz = card.mrz().key.clone();
    let out = read_document(card, &mrz, &mut rng(1)).expect("read-out");
    let params = ExtractionParameters::new(n, SFI_DG14, out.dg14.content.clone()).expect("params");
    register(&out.dg1, &out.dg14, &out.sod, params, consent(), &issuer().public).expect("register")
}
