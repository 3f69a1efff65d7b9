//! ISO 7816-4 short command and response APDUs.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApduError {
    #[error("APDU truncated")]
    TruncatedApdu,
    #[error("length fields disagree with APDU size")]
    LengthMismatch,
    #[error("command data longer than 255 bytes")]
    DataTooLong,
    #[error("expected length must be in 1..=256")]
    InvalidLe,
    #[error("parameter out of range: {0}")]
    OutOfRange(&'static str),
}

pub const INS_SELECT: u8 = 0xA4;
pub const INS_READ_BINARY: u8 = 0xB0;
pub const INS_GET_CHALLENGE: u8 = 0x84;
pub const INS_EXTERNAL_AUTHENTICATE: u8 = 0x82;
pub const INS_MSE: u8 = 0x22;

/// Status words used by the simulator and reader.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatusWord(pub u16);

impl StatusWord {
    pub const OK: StatusWord = StatusWord(0x9000);
    pub const AUTH_FAILED: StatusWord = StatusWord(0x6300);
    pub const WRONG_LENGTH: StatusWord = StatusWord(0x6700);
    pub const SECURITY_STATUS: StatusWord = StatusWord(0x6982);
    pub const CONDITIONS_NOT_SATISFIED: StatusWord = StatusWord(0x6985);
    pub const SM_OBJECTS_INCORRECT: StatusWord = StatusWord(0x6988);
    pub const WRONG_DATA: StatusWord = StatusWord(0x6A80);
    pub const FILE_NOT_FOUND: StatusWord = StatusWord(0x6A82);
    pub const WRONG_PARAMETERS: StatusWord = StatusWord(0x6B00);
    pub const INS_NOT_SUPPORTED: StatusWord = StatusWord(0x6D00);
    pub const CLA_NOT_SUPPORTED: StatusWord = StatusWord(0x6E00);

    pub fn to_bytes(self) -> [u8; 2] {
        self.0.to_be_bytes()
    }

    pub fn is_ok(self) -> bool {
        self == Self::OK
    }
}

impl fmt::Debug for StatusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04X}", self.0)
    }
}

impl fmt::Display for StatusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04X}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandApdu {
    cla: u8,
    ins: u8,
    p1: u8,
    p2: u8,
    data: Vec<u8>,
    le: Option<u16>,
}

impl CommandApdu {
    pub fn new(cla: u8, ins: u8, p1: u8, p2: u8, data: impl Into<Vec<u8>>, le: Option<u16>) -> Result<Self, ApduError> {
        let data = data.into();
        if data.len() > 255 {
            return Err(ApduError::DataTooLong);
        }
        if matches!(le, Some(0) | Some(257..)) {
            return Err(ApduError::InvalidLe);
        }
        Ok(CommandApdu {
            cla,
            ins,
            p1,
            p2,
            data,
            le,
        })
    }

    pub fn cla(&self) -> u8 {
        self.cla
    }
    pub fn ins(&self) -> u8 {
        self.ins
    }
    pub fn p1(&self) -> u8 {
        self.p1
    }
    pub fn p2(&self) -> u8 {
        self.p2
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn le(&self) -> Option<u16> {
        self.le
    }

    pub fn header(&self) -> [u8; 4] {
        [self.cla, self.ins, self.p1, self.p2]
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.data.len());
        out.extend_from_slice(&self.header());
        if !self.data.is_empty() {
            out.push(self.data.len() as u8);
            out.extend_from_slice(&self.data);
        }
        if let Some(le) = self.le {
            out.push(le as u8); // 256 wraps to 0x00
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ApduError> {
        if bytes.len() < 4 {
            return Err(ApduError::TruncatedApdu);
        }
        let (header, body) = bytes.split_at(4);
        let le_of = |b: u8| if b == 0 { 256 } else { b as u16 };
        let (data, le) = match body.len() {
            0 => (&[][..], None),
            1 => (&[][..], Some(le_of(body[0]))),
            _ => {
                let lc = body[0] as usize;
                if lc == 0 {
                    // extended length
                    return Err(ApduError::LengthMismatch);
                }
                if body.len() == 1 + lc {
                    (&body[1..], None)
                } else if body.len() == 2 + lc {
                    (&body[1..1 + lc], Some(le_of(body[1 + lc])))
                } else if body.len() < 1 + lc {
                    return Err(ApduError::TruncatedApdu);
                } else {
                    return Err(ApduError::LengthMismatch);
                }
            }
        };
        Ok(CommandApdu {
            cla: header[0],
            ins: header[1],
            p1: header[2],
            p2: header[3],
            data: data.to_vec(),
            le,
        })
    }
}

pub fn encode_command(c: &CommandApdu) -> Vec<u8> {
    c.encode()
}

pub fn decode_command(bytes: &[u8]) -> Result<CommandApdu, ApduError> {
    CommandApdu::decode(bytes)
}

/// READ BINARY addressing a file by short file identifier.
pub fn encode_read_binary_sfi(sfi: u8, offset: u8, n: u16) -> Result<CommandApdu, ApduError> {
    if !(1..=30).contains(&sfi) {
        return Err(ApduError::OutOfRange("sfi"));
    }
    if !(1..=256).contains(&n) {
        return Err(ApduError::OutOfRange("n"));
    }
    CommandApdu::new(0x00, INS_READ_BINARY, 0x80 | sfi, offset, Vec::new(), Some(n))
}

/// READ BINARY on the current file with a 15-bit offset.
pub fn encode_read_binary(offset: u16, n: u16) -> Result<CommandApdu, ApduError> {
    if offset > 0x7FFF {
        return Err(ApduError::OutOfRange("offset"));
    }
    if !(1..=256).contains(&n) {
        return Err(ApduError::OutOfRange("n"));
    }
    CommandApdu::new(
        0x00,
        INS_READ_BINARY,
        (offset >> 8) as u8,
        offset as u8,
        Vec::new(),
        Some(n),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseApdu {
    pub data: Vec<u8>,
    pub sw: StatusWord,
}

impl ResponseApdu {
    pub fn new(data: impl Into<Vec<u8>>, sw: StatusWord) -> Self {
        ResponseApdu { data: data.into(), sw }
    }

    pub fn status(sw: StatusWord) -> Self {
        ResponseApdu::new(Vec::new(), sw)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.data.clone();
        out.extend_from_slice(&self.sw.to_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ApduError> {
        if bytes.len() < 2 {
            return Err(ApduError::TruncatedApdu);
        }
        let (data, sw) = bytes.split_at(bytes.len() - 2);
        Ok(ResponseApdu {
            data: data.to_vec(),
            sw: StatusWord(u16::from_be_bytes([sw[0], sw[1]])),
        })
    }
}

/// Uppercase, space-separated hex dump.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{b:02X}"));
    }
    out
}
