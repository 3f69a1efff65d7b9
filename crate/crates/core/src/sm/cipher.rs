//! Block-cipher primitives for secure messaging: CBC encryption under
//! two-key 3DES or AES, retail MAC (ISO 9797-1 algorithm 3) and AES-CMAC.

use aes::{Aes128, Aes192, Aes256};
use cipher::{block_padding::NoPadding, BlockDecryptMut, BlockEncrypt, BlockEncryptMut, KeyInit, KeyIvInit};
use cmac::{Cmac, Mac};
use des::{Des, TdesEde2};

use super::CipherSuite;

fn cbc_encrypt<C>(key: &[u8], iv: &[u8], data: &[u8]) -> Vec<u8>
where
    cbc::Encryptor<C>: KeyIvInit + BlockEncryptMut,
    C: cipher::BlockEncryptMut + cipher::BlockCipher,
{
    let enc = cbc::Encryptor::<C>::new_from_slices(key, iv).expect("key and iv sizes fixed by suite");
    enc.encrypt_padded_vec_mut::<NoPadding>(data)
}

fn cbc_decrypt<C>(key: &[u8], iv: &[u8], data: &[u8]) -> Option<Vec<u8>>
where
    cbc::Decryptor<C>: KeyIvInit + BlockDecryptMut,
    C: cipher::BlockDecryptMut + cipher::BlockCipher,
{
    let dec = cbc::Decryptor::<C>::new_from_slices(key, iv).expect("key and iv sizes fixed by suite");
    dec.decrypt_padded_vec_mut::<NoPadding>(data).ok()
}

/// CBC encryption without padding; `data` must be block aligned.
pub fn encrypt_cbc(suite: CipherSuite, key: &[u8], iv: &[u8], data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len() % suite.block_size(), 0);
    match suite {
        CipherSuite::Tdes => cbc_encrypt::<TdesEde2>(key, iv, data),
        CipherSuite::Aes128 => cbc_encrypt::<Aes128>(key, iv, data),
        CipherSuite::Aes192 => cbc_encrypt::<Aes192>(key, iv, data),
        CipherSuite::Aes256 => cbc_encrypt::<Aes256>(key, iv, data),
    }
}

/// CBC decryption; `None` when `data` is not block aligned.
pub fn decrypt_cbc(suite: CipherSuite, key: &[u8], iv: &[u8], data: &[u8]) -> Option<Vec<u8>> {
    match suite {
        CipherSuite::Tdes => cbc_decrypt::<TdesEde2>(key, iv, data),
        CipherSuite::Aes128 => cbc_decrypt::<Aes128>(key, iv, data),
        CipherSuite::Aes192 => cbc_decrypt::<Aes192>(key, iv, data),
        CipherSuite::Aes256 => cbc_decrypt::<Aes256>(key, iv, data),
    }
}

/// Single-block ECB encryption, used to derive the AES IV from the counter.
pub fn encrypt_block(suite: CipherSuite, key: &[u8], block: &[u8]) -> Vec<u8> {
    let zero = vec![0u8; suite.block_size()];
    encrypt_cbc(suite, key, &zero, block)
}

/// Retail MAC: single-DES CBC over all blocks with K1, then D(K2), E(K1) on
/// the last block. Input must already be padded.
pub fn retail_mac(key: &[u8], data: &[u8]) -> [u8; 8] {
    assert_eq!(key.len(), 16);
    assert_eq!(data.len() % 8, 0);
    let k1 = Des::new_from_slice(&key[..8]).expect("8-byte key");
    let k2 = Des::new_from_slice(&key[8..]).expect("8-byte key");
    let mut state = [0u8; 8];
    for block in data.chunks_exact(8) {
        for (s, b) in state.iter_mut().zip(block) {
            *s ^= b;
        }
        k1.encrypt_block((&mut state).into());
    }
    cipher::BlockDecrypt::decrypt_block(&k2, (&mut state).into());
    k1.encrypt_block((&mut state).into());
    state
}

pub fn aes_cmac(key: &[u8], data: &[u8]) -> [u8; 16] {
    fn run<M: Mac + KeyInit>(key: &[u8], data: &[u8]) -> [u8; 16] {
        let mut mac = <M as Mac>::new_from_slice(key).expect("AES key size");
        mac.update(data);
        let tag = mac.finalize().into_bytes();
        let mut out = [0u8; 16];
        out.copy_from_slice(&tag);
        out
    }
    match key.len() {
        16 => run::<Cmac<Aes128>>(key, data),
        24 => run::<Cmac<Aes192>>(key, data),
        32 => run::<Cmac<Aes256>>(key, data),
        n => panic!("invalid AES key length {n}"),
    }
}

/// 8-byte secure-messaging MAC over already padded input.
pub fn sm_mac(suite: CipherSuite, key: &[u8], data: &[u8]) -> [u8; 8] {
    match suite {
        CipherSuite::Tdes => retail_mac(key, data),
        _ => {
            let full = aes_cmac(key, data);
            let mut out = [0u8; 8];
            out.copy_from_slice(&full[..8]);
            out
        }
    }
}

/// Sets the low bit of each byte so the byte has odd parity.
pub fn adjust_des_parity(key: &mut [u8]) {
    for byte in key {
        *byte &= 0xFE;
        *byte |= 1 ^ (byte.count_ones() as u8 & 1);
    }
}
