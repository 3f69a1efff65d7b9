//! BER-TLV data objects with DER definite lengths, as used inside protected
//! APDUs and the document file formats.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TlvError {
    #[error("indefinite length form is not allowed")]
    IndefiniteLength,
    #[error("length not minimally encoded")]
    NonMinimalLength,
    #[error("unsupported length field")]
    UnsupportedLength,
    #[error("unsupported tag")]
    UnsupportedTag,
    #[error("input truncated")]
    Truncated,
    #[error("trailing bytes after data object")]
    TrailingGarbage,
    #[error("missing data object {0:#x}")]
    Missing(u16),
    #[error("unexpected data object {0:#x}")]
    Unexpected(u16),
}

/// A one- or two-byte BER tag. Two-byte tags keep their first byte in the
/// high octet (e.g. `0x5F1F`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(u16);

impl Tag {
    pub fn new(value: u16) -> Result<Self, TlvError> {
        let valid = if value <= 0xFF {
            value & 0x1F != 0x1F
        } else {
            (value >> 8) & 0x1F == 0x1F && value & 0x80 == 0 && value & 0xFF >= 0x1F
        };
        if valid {
            Ok(Tag(value))
        } else {
            Err(TlvError::UnsupportedTag)
        }
    }

    pub const fn value(self) -> u16 {
        self.0
    }

    fn encode_into(self, out: &mut Vec<u8>) {
        if self.0 > 0xFF {
            out.push((self.0 >> 8) as u8);
        }
        out.push(self.0 as u8);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlvObject {
    pub tag: Tag,
    pub value: Vec<u8>,
}

impl TlvObject {
    /// Panics on an invalid tag constant; use [`Tag::new`] for untrusted input.
    pub fn new(tag: u16, value: impl Into<Vec<u8>>) -> Self {
        TlvObject {
            tag: Tag::new(tag).expect("valid tag constant"),
            value: value.into(),
        }
    }

    pub fn tag(&self) -> u16 {
        self.tag.value()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.value.len() + 5);
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        self.tag.encode_into(out);
        encode_length(self.value.len(), out);
        out.extend_from_slice(&self.value);
    }

    /// Decodes the value as a nested TLV sequence.
    pub fn children(&self) -> Result<Vec<TlvObject>, TlvError> {
        decode_tlv_sequence(&self.value)
    }
}

pub fn encode_length(len: usize, out: &mut Vec<u8>) {
    if len < 0x80 {
        out.push(len as u8);
        return;
    }
    let bytes = (len as u32).to_be_bytes();
    let skip = bytes.iter().take_while(|&&b| b == 0).count();
    out.push(0x80 | (4 - skip) as u8);
    out.extend_from_slice(&bytes[skip..]);
}

pub fn encode_tlv(obj: &TlvObject) -> Vec<u8> {
    obj.encode()
}

pub fn encode_sequence<'a>(objs: impl IntoIterator<Item = &'a TlvObject>) -> Vec<u8> {
    let mut out = Vec::new();
    for obj in objs {
        obj.encode_into(&mut out);
    }
    out
}

/// Reads one object from the front of `input`, returning it with the rest.
pub fn decode_one(input: &[u8]) -> Result<(TlvObject, &[u8]), TlvError> {
    let (&first, mut rest) = input.split_first().ok_or(TlvError::Truncated)?;
    let mut tag = first as u16;
    if first & 0x1F == 0x1F {
        let (&second, r) = rest.split_first().ok_or(TlvError::Truncated)?;
        tag = (tag << 8) | second as u16;
        rest = r;
    }
    let tag = Tag::new(tag)?;

    let (&len_byte, mut rest) = rest.split_first().ok_or(TlvError::Truncated)?;
    let len = match len_byte {
        0x80 => return Err(TlvError::IndefiniteLength),
        0x00..=0x7F => len_byte as usize,
        0x81..=0x84 => {
            let n = (len_byte & 0x7F) as usize;
            if rest.len() < n {
                return Err(TlvError::Truncated);
            }
            let (len_bytes, r) = rest.split_at(n);
            rest = r;
            if len_bytes[0] == 0 {
                return Err(TlvError::NonMinimalLength);
            }
            let len = len_bytes.iter().fold(0usize, |acc, &b| (acc << 8) | b as usize);
            if n == 1 && len < 0x80 {
                return Err(TlvError::NonMinimalLength);
            }
            len
        }
        _ => return Err(TlvError::UnsupportedLength),
    };
    if rest.len() < len {
        return Err(TlvError::Truncated);
    }
    let (value, rest) = rest.split_at(len);
    Ok((
        TlvObject {
            tag,
            value: value.to_vec(),
        },
        rest,
    ))
}

/// Decodes exactly one object; anything after it is an error.
pub fn decode_tlv(input: &[u8]) -> Result<TlvObject, TlvError> {
    let (obj, rest) = decode_one(input)?;
    if !rest.is_empty() {
        return Err(TlvError::TrailingGarbage);
    }
    Ok(obj)
}

pub fn decode_tlv_sequence(mut input: &[u8]) -> Result<Vec<TlvObject>, TlvError> {
    let mut out = Vec::new();
    while !input.is_empty() {
        let (obj, rest) = decode_one(input)?;
        out.push(obj);
        input = rest;
    }
    Ok(out)
}

/// Cursor over a decoded sequence that expects objects in a fixed order.
pub(crate) struct TlvReader {
    objs: std::vec::IntoIter<TlvObject>,
    peeked: Option<TlvObject>,
}

impl TlvReader {
    pub fn new(input: &[u8]) -> Result<Self, TlvError> {
        Ok(TlvReader {
            objs: decode_tlv_sequence(input)?.into_iter(),
            peeked: None,
        })
    }

    fn peek(&mut self) -> Option<&TlvObject> {
        if self.peeked.is_none() {
            self.peeked = self.objs.next();
        }
        self.peeked.as_ref()
    }

    pub fn optional(&mut self, tag: u16) -> Option<Vec<u8>> {
        if self.peek().map(TlvObject::tag) == Some(tag) {
            self.peeked.take().map(|o| o.value)
        } else {
            None
        }
    }

    pub fn expect(&mut self, tag: u16) -> Result<Vec<u8>, TlvError> {
        self.optional(tag).ok_or(TlvError::Missing(tag))
    }

    pub fn finish(mut self) -> Result<(), TlvError> {
        match self.peek() {
            Some(obj) => Err(TlvError::Unexpected(obj.tag())),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_and_long_lengths() {
        let v = vec![0xAB; 16];
        let enc = TlvObject::new(0x87, v.clone()).encode();
        assert_eq!(&enc[..2], &[0x87, 0x10]);
        assert_eq!(&enc[2..], &v[..]);

        let v = vec![0xCD; 200];
        let enc = TlvObject::new(0x87, v.clone()).encode();
        assert_eq!(&enc[..3], &[0x87, 0x81, 0xC8]);
        assert_eq!(decode_tlv(&enc).unwrap().value, v);

        let enc = TlvObject::new(0x5F1F, vec![1; 300]).encode();
        assert_eq!(&enc[..5], &[0x5F, 0x1F, 0x82, 0x01, 0x2C]);
    }

    #[test]
    fn empty_input_is_empty_sequence() {
        assert_eq!(decode_tlv_sequence(&[]).unwrap(), vec![]);
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode_tlv(&[0x87, 0x80, 0x00]), Err(TlvError::IndefiniteLength));
        assert_eq!(decode_tlv(&[0x87, 0x05, 0x01]), Err(TlvError::Truncated));
        assert_eq!(decode_tlv(&[0x87, 0x01, 0x01, 0x00]), Err(TlvError::TrailingGarbage));
        assert_eq!(
            decode_tlv(&[0x87, 0x81, 0x05, 0, 0, 0, 0, 0]),
            Err(TlvError::NonMinimalLength)
        );
        assert_eq!(decode_tlv(&[0x5F]), Err(TlvError::Truncated));
        assert_eq!(decode_tlv_sequence(&[0x87, 0x00, 0x99]), Err(TlvError::Truncated));
    }

    fn tag_strategy() -> impl Strategy<Value = u16> {
        prop_oneof![
            (0u16..=0xFF).prop_filter("single byte", |t| t & 0x1F != 0x1F),
            (0u16..8, 0x1Fu16..0x80).prop_map(|(hi, lo)| ((hi << 5 | 0x1F) << 8) | lo),
        ]
    }

    proptest! {
        #[test]
        fn sequence_round_trip(objs in prop::collection::vec(
            (tag_strategy(), prop::collection::vec(any::<u8>(), 0..300)), 0..6)) {
            let objs: Vec<TlvObject> = objs.into_iter().map(|(t, v)| TlvObject::new(t, v)).collect();
            let enc = encode_sequence(&objs);
            prop_assert_eq!(decode_tlv_sequence(&enc).unwrap(), objs);
        }

        #[test]
        fn decode_is_total(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            if let Ok(objs) = decode_tlv_sequence(&bytes) {
                prop_assert_eq!(encode_sequence(&objs), bytes);
            }
        }
    }
}
