//! Remote document encryption: derive a symmetric key by simulating an
//! e-passport's chip-authenticated READ BINARY response, so that only the
//! physical chip can reproduce it.

pub mod apdu;
pub mod bac;
pub mod chip_auth;
pub mod envelope;
pub mod experiment;
pub mod group;
pub mod mrz;
pub mod passive_auth;
pub mod protocol;
pub mod reader;
pub mod sim;
pub mod sm;
pub mod tlv;
