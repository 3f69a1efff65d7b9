//! Terminal side of the card conversation: BAC, chip authentication,
//! chunked protected file reads, and an optional hex transcript.

use std::fmt;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::apdu::{
    encode_read_binary, encode_read_binary_sfi, hex_dump, ApduError, CommandApdu, ResponseApdu, StatusWord, INS_SELECT,
};
use crate::bac::{get_challenge, BacKeys, TerminalAuth};
use crate::chip_auth::{mse_set_kat, terminal_chip_auth, CaTranscript, Dg14Content};
use crate::group::Scalar;
use crate::mrz::MrzKey;
use crate::sim::{CardHarness, EMRTD_AID};
use crate::sm::{max_protected_read, SmError, SmSession};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReaderError {
    #[error("card answered {0}")]
    Status(StatusWord),
    #[error("basic access control failed")]
    BacFailed,
    #[error("secure messaging failure: {0}")]
    Sm(#[from] SmError),
    #[error("malformed card response")]
    MalformedResponse,
    #[error("no secure messaging session")]
    NoSession,
    #[error(transparent)]
    Apdu(#[from] ApduError),
}

/// `[round][ssc] label: HEX` lines.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    round: u32,
    lines: Vec<String>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_round(&mut self, round: u32) {
        self.round = round;
    }

    pub fn log(&mut self, ssc: Option<u128>, label: &str, bytes: &[u8]) {
        let ssc = ssc.map_or_else(|| "-".to_string(), |s| format!("{s:X}"));
        self.lines
            .push(format!("[{}][{ssc}] {label}: {}", self.round, hex_dump(bytes)));
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// A terminal talking to one card.
pub struct Reader<'a, C: CardHarness + ?Sized> {
    card: &'a mut C,
    session: Option<SmSession>,
    pub transcript: Transcript,
}

fn expect_ok(response: ResponseApdu) -> Result<ResponseApdu, ReaderError> {
    if response.sw.is_ok() {
        Ok(response)
    } else {
        Err(ReaderError::Status(response.sw))
    }
}

impl<'a, C: CardHarness + ?Sized> Reader<'a, C> {
    pub fn new(card: &'a mut C) -> Self {
        Reader {
            card,
            session: None,
            transcript: Transcript::new(),
        }
    }

    pub fn session(&self) -> Option<&SmSession> {
        self.session.as_ref()
    }

    /// Cold-resets the card and forgets the session.
    pub fn reset(&mut self) {
        self.card.reset();
        self.session = None;
    }

    /// Sends bytes verbatim and returns the raw response.
    pub fn transmit_raw(&mut self, command: &[u8]) -> Vec<u8> {
        let ssc = self.session.as_ref().map(SmSession::ssc);
        self.transcript.log(ssc, "C", command);
        let response = self.card.transmit(command);
        self.transcript.log(ssc, "R", &response);
        response
    }

    fn transmit_plain(&mut self, command: &CommandApdu) -> Result<ResponseApdu, ReaderError> {
        let raw = self.transmit_raw(&command.encode());
        ResponseApdu::decode(&raw).map_err(|_| ReaderError::MalformedResponse)
    }

    pub fn select_application(&mut self) -> Result<(), ReaderError> {
        let cmd = CommandApdu::new(0x00, INS_SELECT, 0x04, 0x0C, EMRTD_AID.to_vec(), None)?;
        expect_ok(self.transmit_plain(&cmd)?)?;
        Ok(())
    }

    /// GET CHALLENGE then EXTERNAL AUTHENTICATE; installs the BAC session.
    pub fn basic_access_control<R: RngCore + CryptoRng>(
        &mut self,
        mrz: &MrzKey,
        rng: &mut R,
    ) -> Result<(), ReaderError> {
        self.session = None;
        let challenge = expect_ok(self.transmit_plain(&get_challenge())?)?;
        let rnd_ic: [u8; 8] = challenge
            .data
            .as_slice()
            .try_into()
            .map_err(|_| ReaderError::MalformedResponse)?;
        let auth = TerminalAuth::new(BacKeys::from_mrz(mrz), rnd_ic, rng);
        let response = self.transmit_plain(&auth.command())?;
        if response.sw == StatusWord::AUTH_FAILED {
            return Err(ReaderError::BacFailed);
        }
        let response = expect_ok(response)?;
        self.session = Some(auth.finish(&response.data).map_err(|_| ReaderError::BacFailed)?);
        Ok(())
    }

    /// Protects, sends, and unprotects one command. Returns the raw
    /// protected response alongside the plain one.
    pub fn exchange_protected(&mut self, command: &CommandApdu) -> Result<(Vec<u8>, ResponseApdu), ReaderError> {
        let mut session = self.session.take().ok_or(ReaderError::NoSession)?;
        let protected = session.protect_command(command)?;
        self.session = Some(session);
        let raw = self.transmit_raw(&protected.encode());
        let response = ResponseApdu::decode(&raw).map_err(|_| ReaderError::MalformedResponse)?;
        let mut session = self.session.take().expect("installed above");
        // A bare error status means the card dropped the session.
        if response.data.is_empty() && !response.sw.is_ok() {
            return Err(ReaderError::Status(response.sw));
        }
        let plain = session.unprotect_response(&response)?;
        self.session = Some(session);
        Ok((raw, plain))
    }

    /// Reads a whole file by SFI, in chunks sized for the current session.
    pub fn read_file(&mut self, sfi: u8) -> Result<Vec<u8>, ReaderError> {
        let chunk = max_protected_read(self.session.as_ref().ok_or(ReaderError::NoSession)?.suite());
        let (_, first) = self.exchange_protected(&encode_read_binary_sfi(sfi, 0, chunk as u16)?)?;
        let mut content = expect_ok(first)?.data;
        let mut last = content.len();
        while last == chunk {
            let offset = u16::try_from(content.len()).map_err(|_| ReaderError::MalformedResponse)?;
            let (_, next) = self.exchange_protected(&encode_read_binary(offset, chunk as u16)?)?;
            if next.sw == StatusWord::WRONG_PARAMETERS {
                break;
            }
            let data = expect_ok(next)?.data;
            last = data.len();
            content.extend(data);
        }
        Ok(content)
    }

    /// MSE:SET KAT under the current session, then switches to the chip
    /// authentication session derived from `k`.
    pub fn chip_authenticate(&mut self, dg14: &Dg14Content, k: &Scalar) -> Result<CaTranscript, ReaderError> {
        let transcript = terminal_chip_auth(dg14, k);
        let z = dg14
            .params()
            .encode_point(&transcript.ephemeral_public)
            .map_err(|_| ReaderError::MalformedResponse)?;
        self.set_kat(&z)?;
        self.session = Some(transcript.session.clone());
        Ok(transcript)
    }

    /// MSE:SET KAT with an arbitrary encoded key. The terminal session is
    /// dropped afterwards since the resulting keys are not known here.
    pub fn set_kat(&mut self, encoded_z: &[u8]) -> Result<(), ReaderError> {
        let (_, response) = self.exchange_protected(&mse_set_kat(encoded_z))?;
        expect_ok(response)?;
        self.session = None;
        Ok(())
    }
}
