//! Minimal DER reader covering the subset of ASN.1 used by X.509 certificates.

use std::fmt::Write as _;

pub(crate) const TAG_INTEGER: u8 = 0x02;
pub(crate) const TAG_BIT_STRING: u8 = 0x03;
pub(crate) const TAG_OID: u8 = 0x06;
pub(crate) const TAG_UTC_TIME: u8 = 0x17;
pub(crate) const TAG_GENERALIZED_TIME: u8 = 0x18;
pub(crate) const TAG_SEQUENCE: u8 = 0x30;
pub(crate) const TAG_SET: u8 = 0x31;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DerError(pub String);

impl DerError {
    fn new(msg: impl Into<String>) -> Self {
        DerError(msg.into())
    }
}

pub(crate) type Result<T> = std::result::Result<T, DerError>;

/// One tag-length-value element. `raw` spans header and content.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tlv<'a> {
    pub tag: u8,
    pub content: &'a [u8],
    pub raw: &'a [u8],
}

impl<'a> Tlv<'a> {
    pub fn expect(self, tag: u8, what: &str) -> Result<Self> {
        if self.tag == tag {
            Ok(self)
        } else {
            Err(DerError::new(format!(
                "{what}: expected tag 0x{tag:02x}, found 0x{:02x}",
                self.tag
            )))
        }
    }

    pub fn reader(self) -> Reader<'a> {
        Reader::new(self.content)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    pub fn peek_tag(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    pub fn read(&mut self) -> Result<Tlv<'a>> {
        let start = self.pos;
        let tag = *self
            .data
            .get(self.pos)
            .ok_or_else(|| DerError::new("unexpected end of input"))?;
        if tag & 0x1f == 0x1f {
            return Err(DerError::new("high-tag-number form is not supported"));
        }
        self.pos += 1;
        let first = *self
            .data
            .get(self.pos)
            .ok_or_else(|| DerError::new("missing length"))?;
        self.pos += 1;
        let len = if first < 0x80 {
            first as usize
        } else if first == 0x80 {
            return Err(DerError::new("indefinite length is not DER"));
        } else {
            let n = (first & 0x7f) as usize;
            if n > 4 {
                return Err(DerError::new("length too large"));
            }
            let bytes = self
                .data
                .get(self.pos..self.pos + n)
                .ok_or_else(|| DerError::new("truncated length"))?;
            self.pos += n;
            bytes.iter().fold(0usize, |acc, b| (acc << 8) | *b as usize)
        };
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| DerError::new(format!("element of length {len} overruns input")))?;
        let content = &self.data[self.pos..end];
        self.pos = end;
        Ok(Tlv {
            tag,
            content,
            raw: &self.data[start..end],
        })
    }

    pub fn read_tag(&mut self, tag: u8, what: &str) -> Result<Tlv<'a>> {
        self.read()?.expect(tag, what)
    }

    /// Reads the next element only if it carries `tag`.
    pub fn read_optional(&mut self, tag: u8) -> Result<Option<Tlv<'a>>> {
        if self.peek_tag() == Some(tag) {
            self.read().map(Some)
        } else {
            Ok(None)
        }
    }
}

pub(crate) fn decode_oid(content: &[u8]) -> Result<String> {
    if content.is_empty() {
        return Err(DerError::new("empty object identifier"));
    }
    let mut arcs: Vec<u64> = Vec::new();
    let mut acc: u64 = 0;
    for (i, &b) in content.iter().enumerate() {
        if acc > (u64::MAX >> 7) {
            return Err(DerError::new("object identifier arc overflow"));
        }
        acc = (acc << 7) | (b & 0x7f) as u64;
        if b & 0x80 == 0 {
            arcs.push(acc);
            acc = 0;
        } else if i == content.len() - 1 {
            return Err(DerError::new("truncated object identifier"));
        }
    }
    let first = arcs[0];
    let (a, b) = match first {
        0..=39 => (0, first),
        40..=79 => (1, first - 40),
        _ => (2, first - 80),
    };
    let mut out = format!("{a}.{b}");
    for arc in &arcs[1..] {
        let _ = write!(out, ".{arc}");
    }
    Ok(out)
}

/// Decodes the common ASN.1 string types. Anything else is rendered as
/// `#` followed by the hex of the full encoding.
pub(crate) fn decode_string(tlv: Tlv<'_>) -> String {
    match tlv.tag {
        // UTF8String, PrintableString, IA5String, VisibleString, NumericString
        0x0c | 0x13 | 0x16 | 0x1a | 0x12 => String::from_utf8_lossy(tlv.content).into_owned(),
        // T61String, treated as Latin-1
        0x14 => tlv.content.iter().map(|&b| b as char).collect(),
        // BMPString
        0x1e => {
            let units: Vec<u16> = tlv
                .content
                .chunks(2)
                .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
                .collect();
            String::from_utf16_lossy(&units)
        }
        // UniversalString
        0x1c => tlv
            .content
            .chunks(4)
            .filter(|c| c.len() == 4)
            .map(|c| char::from_u32(u32::from_be_bytes([c[0], c[1], c[2], c[3]])).unwrap_or('\u{fffd}'))
            .collect(),
        _ => format!("#{}", hex::encode(tlv.raw)),
    }
}

fn digits(s: &[u8], what: &str) -> Result<u32> {
    if s.is_empty() || !s.iter().all(u8::is_ascii_digit) {
        return Err(DerError::new(format!("non-digit in {what}")));
    }
    Ok(s.iter().fold(0u32, |acc, d| acc * 10 + (d - b'0') as u32))
}

/// Decodes UTCTime / GeneralizedTime into Unix seconds.
pub(crate) fn decode_time(tlv: Tlv<'_>) -> Result<i64> {
    let s = tlv.content;
    let (year, rest) = match tlv.tag {
        TAG_UTC_TIME => {
            if s.len() < 11 {
                return Err(DerError::new("UTCTime too short"));
            }
            let yy = digits(&s[0..2], "UTCTime year")? as i32;
            (if yy < 50 { 2000 + yy } else { 1900 + yy }, &s[2..])
        }
        TAG_GENERALIZED_TIME => {
            if s.len() < 13 {
                return Err(DerError::new("GeneralizedTime too short"));
            }
            (digits(&s[0..4], "GeneralizedTime year")? as i32, &s[4..])
        }
        t => return Err(DerError::new(format!("expected a time, found tag 0x{t:02x}"))),
    };
    // rest = MMDDHHMM[SS][.fff]Z
    if rest.len() < 9 || *rest.last().unwrap() != b'Z' {
        return Err(DerError::new("time must be UTC ('Z' suffix)"));
    }
    let body = &rest[..rest.len() - 1];
    let body = match body.iter().position(|&b| b == b'.') {
        Some(p) => &body[..p],
        None => body,
    };
    let month = digits(&body[0..2], "month")?;
    let day = digits(&body[2..4], "day")?;
    let hour = digits(&body[4..6], "hour")?;
    let minute = digits(&body[6..8], "minute")?;
    let second = match body.len() {
        8 => 0,
        10 => digits(&body[8..10], "second")?,
        _ => return Err(DerError::new("malformed time")),
    };
    let date = chrono::NaiveDate::from_ymd_opt(year, month, day)
        .and_then(|d| d.and_hms_opt(hour, minute, second))
        .ok_or_else(|| DerError::new("invalid calendar time"))?;
    Ok(date.and_utc().timestamp())
}
