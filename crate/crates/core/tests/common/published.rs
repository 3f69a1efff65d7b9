//! Published test vectors: NIST SP 800-38A (AES-CBC), RFC 4493 and
//! SP 800-38B (AES-CMAC), the DES validation example, ISO/IEC 9797-1
//! MAC algorithm 3, and the ICAO 9303-11 BAC worked example (two-key 3DES
//! CBC and retail MAC).

use hex_literal::hex;
use rde_core::sm::cipher::{aes_cmac, decrypt_cbc, encrypt_cbc, retail_mac, sm_mac};
use rde_core::sm::CipherSuite;

const SP800_38A_PLAIN: [u8; 64] = hex!(
    "6bc1bee22e409f96e93d7e117393172a ae2d8a571e03ac9c9eb76fac45af8e51"
    "30c81c46a35ce411e5fbc1191a0a52ef f69f2445df4f9b17ad2b417be66c3710"
);
const SP800_38A_IV: [u8; 16] = hex!("000102030405060708090a0b0c0d0e0f");
const KEY_128: [u8; 16] = hex!("2b7e151628aed2a6abf7158809cf4f3c");
const KEY_192: [u8; 24] = hex!("8e73b0f7da0e6452c810f32b809079e562f8ead2522c6b7b");
const KEY_256: [u8; 32] = hex!("603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4");

fn check(name: &str, ok: bool) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(name.to_string())
    }
}

pub fn aes_cbc() -> Result<(), String> {
    let cases: [(CipherSuite, &[u8], [u8; 64]); 3] = [
        (
            CipherSuite::Aes128,
            &KEY_128,
            hex!(
                "7649abac8119b246cee98e9b12e9197d 5086cb9b507219ee95db113a917678b2"
                "73bed6b8e3c1743b7116e69e22229516 3ff1caa1681fac09120eca307586e1a7"
            ),
        ),
        (
            CipherSuite::Aes192,
            &KEY_192,
            hex!(
                "4f021db243bc633d7178183a9fa071e8 b4d9ada9ad7dedf4e5e738763f69145a"
                "571b242012fb7ae07fa9baac3df102e0 08b0e27988598881d920a9e64f5615cd"
            ),
        ),
        (
            CipherSuite::Aes256,
            &KEY_256,
            hex!(
                "f58c4c04d6e5f1ba779eabfb5f7bfbd6 9cfc4e967edb808d679f777bc6702c7d"
                "39f23369a9d9bacfa530e26304231461 b2eb05e2c39be9fcda6c19078c6a9d1b"
            ),
        ),
    ];
    for (suite, key, expected) in cases {
        check(
            &format!("CBC-{suite} encrypt"),
            encrypt_cbc(suite, key, &SP800_38A_IV, &SP800_38A_PLAIN) == expected,
        )?;
        check(
            &format!("CBC-{suite} decrypt"),
            decrypt_cbc(suite, key, &SP800_38A_IV, &expected).as_deref() == Some(&SP800_38A_PLAIN[..]),
        )?;
    }
    Ok(())
}

pub fn aes_cmac_vectors() -> Result<(), String> {
    let cases: [(&[u8], [[u8; 16]; 4]); 3] = [
        (
            &KEY_128,
            [
                hex!("bb1d6929e95937287fa37d129b756746"),
                hex!("070a16b46b4d4144f79bdd9dd04a287c"),
                hex!("dfa66747de9ae63030ca32611497c827"),
                hex!("51f0bebf7e3b9d92fc49741779363cfe"),
            ],
        ),
        (
            &KEY_192,
            [
                hex!("d17ddf46adaacde531cac483de7a9367"),
                hex!("9e99a7bf31e710900662f65e617c5184"),
                hex!("8a1de5be2eb31aad089a82e6ee908b0e"),
                hex!("a1d5df0eed790f794d77589659f39a11"),
            ],
        ),
        (
            &KEY_256,
            [
                hex!("028962f61b7bf89efc6b551f4667d983"),
                hex!("28a7023f452e8f82bd4bf28d8c37c35c"),
                hex!("aaf3d8f1de5640c232f5b169b9c911e6"),
                hex!("e1992190549f6ed5696a2c056c315410"),
            ],
        ),
    ];
    for (key, tags) in cases {
        for (len, tag) in [0, 16, 40, 64].into_iter().zip(tags) {
            check(
                &format!("CMAC key {} bytes, message {len}", key.len()),
                aes_cmac(key, &SP800_38A_PLAIN[..len]) == tag,
            )?;
        }
    }
    // The secure messaging MAC is the leading half of the CMAC tag.
    check(
        "SM MAC truncation",
        sm_mac(CipherSuite::Aes128, &KEY_128, &SP800_38A_PLAIN) == hex!("51f0bebf7e3b9d92"),
    )
}

pub fn tdes_cbc() -> Result<(), String> {
    // With K1 = K2 two-key 3DES collapses to single DES.
    let des_key = hex!("133457799BBCDFF1 133457799BBCDFF1");
    check(
        "DES single block",
        encrypt_cbc(CipherSuite::Tdes, &des_key, &[0; 8], &hex!("0123456789ABCDEF")) == hex!("85E813540F0AB405"),
    )?;
    let k_enc = hex!("AB94FDECF2674FDFB9B391F85D7F76F2");
    let s = hex!("781723860C06C226 4608F91988702212 0B795240CB7049B01C19B33E32804F0B");
    let e_ifd = hex!("72C29C2371CC9BDB65B779B8E8D37B29ECC154AA56A8799FAE2F498F76ED92F2");
    check(
        "ICAO E_IFD",
        encrypt_cbc(CipherSuite::Tdes, &k_enc, &[0; 8], &s) == e_ifd,
    )?;
    check(
        "ICAO E_IFD decrypt",
        decrypt_cbc(CipherSuite::Tdes, &k_enc, &[0; 8], &e_ifd).as_deref() == Some(&s[..]),
    )?;
    let e_ic = hex!("46B9342A41396CD7386BF5803104D7CEDC122B9132139BAF2EEDC94EE178534F");
    let r = hex!("4608F91988702212 781723860C06C226 0B4F80323EB3191CB04970CB4052790B");
    check("ICAO E_IC", encrypt_cbc(CipherSuite::Tdes, &k_enc, &[0; 8], &r) == e_ic)
}

pub fn retail_mac_vectors() -> Result<(), String> {
    check(
        "ISO 9797-1 MAC algorithm 3",
        retail_mac(&hex!("0123456789ABCDEF FEDCBA9876543210"), b"Now is the time for all ") == hex!("A1C72E74EA3FA9B6"),
    )?;
    let k_mac = hex!("7962D9ECE03D1ACD4C76089DCE131543");
    let e_ifd = hex!("72C29C2371CC9BDB65B779B8E8D37B29ECC154AA56A8799FAE2F498F76ED92F2 8000000000000000");
    check("ICAO M_IFD", retail_mac(&k_mac, &e_ifd) == hex!("5F1448EEA8AD90A7"))?;
    let e_ic = hex!("46B9342A41396CD7386BF5803104D7CEDC122B9132139BAF2EEDC94EE178534F 8000000000000000");
    check("ICAO M_IC", retail_mac(&k_mac, &e_ic) == hex!("2F2D235D074D7449"))
}

pub fn all() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("AES-CBC (SP 800-38A)", aes_cbc()),
        ("AES-CMAC (RFC 4493, SP 800-38B)", aes_cmac_vectors()),
        ("3DES-CBC (DES validation, ICAO 9303-11)", tdes_cbc()),
        ("ISO 9797-1 MAC algorithm 3", retail_mac_vectors()),
    ]
}
