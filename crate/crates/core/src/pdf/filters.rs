//! Stream filter decoders.
//!
//! Supported: FlateDecode (with PNG and TIFF-2 predictors), ASCIIHexDecode,
//! ASCII85Decode, RunLengthDecode and LZWDecode, plus their inline-image
//! abbreviations. Image codecs (DCT, JPX, JBIG2, CCITTFax) and Crypt are
//! reported as unsupported and leave the raw bytes untouched.

use std::io::Read;

use flate2::read::{DeflateDecoder, ZlibDecoder};
use thiserror::Error;

use super::lexer::{hex_value, is_whitespace};
use super::object::{Dictionary, Name, PdfObject};

/// Upper bound on the output of a single filter stage.
pub const MAX_DECODED_LEN: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("unsupported filter /{0}")]
    Unsupported(String),
    #[error("corrupt /{filter} data: {detail}")]
    Corrupt { filter: String, detail: String },
}

impl FilterError {
    fn corrupt(filter: &str, detail: impl Into<String>) -> Self {
        FilterError::Corrupt {
            filter: filter.to_string(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Flate,
    AsciiHex,
    Ascii85,
    RunLength,
    Lzw,
}

impl FilterKind {
    /// Maps a filter name (full or abbreviated) to a supported decoder.
    pub fn from_name(name: &[u8]) -> Option<Self> {
        Some(match name {
            b"FlateDecode" | b"Fl" => FilterKind::Flate,
            b"ASCIIHexDecode" | b"AHx" => FilterKind::AsciiHex,
            b"ASCII85Decode" | b"A85" => FilterKind::Ascii85,
            b"RunLengthDecode" | b"RL" => FilterKind::RunLength,
            b"LZWDecode" | b"LZW" => FilterKind::Lzw,
            _ => return None,
        })
    }
}

/// Applies `filters` in declared order.
///
/// `params` is the stream's `/DecodeParms` value: a dictionary (applies to
/// a single filter) or an array parallel to `filters`.
pub fn decode_stream(
    raw: &[u8],
    filters: &[Name],
    params: Option<&PdfObject>,
) -> Result<Vec<u8>, FilterError> {
    let mut data = raw.to_vec();
    for (i, name) in filters.iter().enumerate() {
        let parm = match params {
            Some(PdfObject::Dictionary(d)) if i == 0 || filters.len() == 1 => Some(d),
            Some(PdfObject::Array(items)) => items.get(i).and_then(PdfObject::as_dict),
            _ => None,
        };
        let label = String::from_utf8_lossy(name.as_bytes()).into_owned();
        let kind = FilterKind::from_name(name.as_bytes())
            .ok_or_else(|| FilterError::Unsupported(label.clone()))?;
        data = match kind {
            FilterKind::Flate => apply_predictor(&flate_decode(&data)?, parm, &label)?,
            FilterKind::AsciiHex => ascii_hex_decode(&data)?,
            FilterKind::Ascii85 => ascii85_decode(&data)?,
            FilterKind::RunLength => run_length_decode(&data)?,
            FilterKind::Lzw => {
                let early = parm
                    .and_then(|d| d.get("EarlyChange"))
                    .and_then(PdfObject::as_i64)
                    .unwrap_or(1);
                apply_predictor(&lzw_decode(&data, early != 0)?, parm, &label)?
            }
        };
    }
    Ok(data)
}

pub fn flate_decode(data: &[u8]) -> Result<Vec<u8>, FilterError> {
    let limit = MAX_DECODED_LEN as u64 + 1;
    let mut out = Vec::new();
    let zlib = ZlibDecoder::new(data).take(limit).read_to_end(&mut out);
    if zlib.is_err() {
        // Some writers omit the zlib header; retry as raw deflate.
        out.clear();
        DeflateDecoder::new(data)
            .take(limit)
            .read_to_end(&mut out)
            .map_err(|e| FilterError::corrupt("FlateDecode", e.to_string()))?;
    }
    if out.len() > MAX_DECODED_LEN {
        return Err(FilterError::corrupt("FlateDecode", "decoded size limit exceeded"));
    }
    Ok(out)
}

pub fn ascii_hex_decode(data: &[u8]) -> Result<Vec<u8>, FilterError> {
    let mut out = Vec::with_capacity(data.len() / 2);
    let mut pending: Option<u8> = None;
    for (i, &b) in data.iter().enumerate() {
        if b == b'>' {
            break;
        }
        if is_whitespace(b) {
            continue;
        }
        let v = hex_value(b).ok_or_else(|| {
            FilterError::corrupt("ASCIIHexDecode", format!("invalid byte 0x{b:02x} at {i}"))
        })?;
        match pending.take() {
            Some(hi) => out.push(hi << 4 | v),
            None => pending = Some(v),
        }
    }
    if let Some(hi) = pending {
        out.push(hi << 4);
    }
    Ok(out)
}

pub fn ascii85_decode(data: &[u8]) -> Result<Vec<u8>, FilterError> {
    let body = data.strip_prefix(b"<~").unwrap_or(data);
    let mut out = Vec::with_capacity(body.len() * 4 / 5);
    let mut group = [0u8; 5];
    let mut n = 0usize;
    for &b in body {
        match b {
            b'~' => break,
            b'z' if n == 0 => out.extend_from_slice(&[0; 4]),
            b'!'..=b'u' => {
                group[n] = b - b'!';
                n += 1;
                if n == 5 {
                    out.extend_from_slice(&a85_group(&group)?);
                    n = 0;
                }
            }
            b if is_whitespace(b) => {}
            other => {
                return Err(FilterError::corrupt(
                    "ASCII85Decode",
                    format!("invalid byte 0x{other:02x}"),
                ))
            }
        }
    }
    match n {
        0 => {}
        1 => return Err(FilterError::corrupt("ASCII85Decode", "dangling single character")),
        _ => {
            for slot in group.iter_mut().skip(n) {
                *slot = 84;
            }
            let bytes = a85_group(&group)?;
            out.extend_from_slice(&bytes[..n - 1]);
        }
    }
    Ok(out)
}

fn a85_group(group: &[u8; 5]) -> Result<[u8; 4], FilterError> {
    let value = group
        .iter()
        .fold(0u64, |acc, &d| acc * 85 + u64::from(d));
    let value = u32::try_from(value)
        .map_err(|_| FilterError::corrupt("ASCII85Decode", "group overflows 32 bits"))?;
    Ok(value.to_be_bytes())
}

pub fn run_length_decode(data: &[u8]) -> Result<Vec<u8>, FilterError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < data.len() {
        let len = data[i];
        i += 1;
        match len {
            128 => break,
            0..=127 => {
                let n = usize::from(len) + 1;
                let chunk = data
                    .get(i..i + n)
                    .ok_or_else(|| FilterError::corrupt("RunLengthDecode", "truncated literal run"))?;
                out.extend_from_slice(chunk);
                i += n;
            }
            _ => {
                let b = *data
                    .get(i)
                    .ok_or_else(|| FilterError::corrupt("RunLengthDecode", "truncated repeat run"))?;
                out.extend(std::iter::repeat_n(b, 257 - usize::from(len)));
                i += 1;
            }
        }
        if out.len() > MAX_DECODED_LEN {
            return Err(FilterError::corrupt("RunLengthDecode", "decoded size limit exceeded"));
        }
    }
    Ok(out)
}

const LZW_CLEAR: u16 = 256;
const LZW_EOD: u16 = 257;

pub fn lzw_decode(data: &[u8], early_change: bool) -> Result<Vec<u8>, FilterError> {
    let mut table: Vec<Vec<u8>> = Vec::with_capacity(4096);
    let reset = |table: &mut Vec<Vec<u8>>| {
        table.clear();
        table.extend((0..=255u8).map(|b| vec![b]));
        table.push(Vec::new());
        table.push(Vec::new());
    };
    reset(&mut table);

    let mut out = Vec::new();
    let mut code_len = 9u32;
    let mut bit_buf = 0u32;
    let mut bit_count = 0u32;
    let mut prev: Option<u16> = None;
    let early = u32::from(early_change);

    for &byte in data {
        bit_buf = (bit_buf << 8) | u32::from(byte);
        bit_count += 8;
        while bit_count >= code_len {
            let code = ((bit_buf >> (bit_count - code_len)) & ((1 << code_len) - 1)) as u16;
            bit_count -= code_len;
            bit_buf &= (1 << bit_count) - 1;
            match code {
                LZW_CLEAR => {
                    reset(&mut table);
                    code_len = 9;
                    prev = None;
                    continue;
                }
                LZW_EOD => return Ok(out),
                _ => {}
            }
            let entry = if usize::from(code) < table.len() {
                table[usize::from(code)].clone()
            } else if let (true, Some(p)) = (usize::from(code) == table.len(), prev) {
                let mut e = table[usize::from(p)].clone();
                e.push(e[0]);
                e
            } else {
                return Err(FilterError::corrupt("LZWDecode", format!("invalid code {code}")));
            };
            if entry.is_empty() {
                return Err(FilterError::corrupt("LZWDecode", format!("invalid code {code}")));
            }
            out.extend_from_slice(&entry);
            if out.len() > MAX_DECODED_LEN {
                return Err(FilterError::corrupt("LZWDecode", "decoded size limit exceeded"));
            }
            if let Some(p) = prev {
                if table.len() < 4096 {
                    let mut e = table[usize::from(p)].clone();
                    e.push(entry[0]);
                    table.push(e);
                }
            }
            prev = Some(code);
            let next = table.len() as u32 + early;
            code_len = if next >= 2048 {
                12
            } else if next >= 1024 {
                11
            } else if next >= 512 {
                10
            } else {
                9
            };
        }
    }
    Ok(out)
}

fn int_param(parm: Option<&Dictionary>, key: &str, default: i64) -> i64 {
    parm.and_then(|d| d.get(key))
        .and_then(PdfObject::as_i64)
        .unwrap_or(default)
}

fn apply_predictor(
    data: &[u8],
    parm: Option<&Dictionary>,
    filter: &str,
) -> Result<Vec<u8>, FilterError> {
    let predictor = int_param(parm, "Predictor", 1);
    if predictor <= 1 {
        return Ok(data.to_vec());
    }
    let colors = int_param(parm, "Colors", 1);
    let bpc = int_param(parm, "BitsPerComponent", 8);
    let columns = int_param(parm, "Columns", 1);
    if !(1..=32).contains(&colors) || ![1, 2, 4, 8, 16].contains(&bpc) || !(1..=1 << 20).contains(&columns)
    {
        return Err(FilterError::corrupt(filter, "invalid predictor parameters"));
    }
    let bits_per_pixel = (colors * bpc) as usize;
    let bpp = bits_per_pixel.div_ceil(8);
    let row_len = (bits_per_pixel * columns as usize).div_ceil(8);
    match predictor {
        2 => tiff_predictor(data, bpc, bpp, row_len, filter),
        10..=15 => png_predictor(data, bpp, row_len, filter),
        other => Err(FilterError::corrupt(filter, format!("unknown predictor {other}"))),
    }
}

fn tiff_predictor(
    data: &[u8],
    bpc: i64,
    bpp: usize,
    row_len: usize,
    filter: &str,
) -> Result<Vec<u8>, FilterError> {
    if bpc != 8 {
        return Err(FilterError::corrupt(filter, "TIFF predictor needs 8 bits per component"));
    }
    let mut out = data.to_vec();
    for row in out.chunks_mut(row_len) {
        for i in bpp..row.len() {
            row[i] = row[i].wrapping_add(row[i - bpp]);
        }
    }
    Ok(out)
}

fn png_predictor(
    data: &[u8],
    bpp: usize,
    row_len: usize,
    filter: &str,
) -> Result<Vec<u8>, FilterError> {
    let mut out = Vec::with_capacity(data.len());
    let mut prev = vec![0u8; row_len];
    for chunk in data.chunks(row_len + 1) {
        let kind = chunk[0];
        let mut row = chunk[1..].to_vec();
        row.resize(row_len, 0);
        for i in 0..row_len {
            let left = if i >= bpp { row[i - bpp] } else { 0 };
            let up = prev[i];
            let up_left = if i >= bpp { prev[i - bpp] } else { 0 };
            row[i] = match kind {
                0 => row[i],
                1 => row[i].wrapping_add(left),
                2 => row[i].wrapping_add(up),
                3 => row[i].wrapping_add(((u16::from(left) + u16::from(up)) / 2) as u8),
                4 => row[i].wrapping_add(paeth(left, up, up_left)),
                other => {
                    return Err(FilterError::corrupt(filter, format!("bad PNG row filter {other}")))
                }
            };
        }
        out.extend_from_slice(&row[..chunk.len() - 1]);
        prev = row;
    }
    Ok(out)
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = i16::from(a) + i16::from(b) - i16::from(c);
    let pa = (p - i16::from(a)).abs();
    let pb = (p - i16::from(b)).abs();
    let pc = (p - i16::from(c)).abs();
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdf::lexer::Lexer;

    fn names(list: &[&str]) -> Vec<Name> {
        list.iter().map(|n| Name(n.as_bytes().to_vec())).collect()
    }

    #[test]
    fn ascii_hex_hello() {
        let out = decode_stream(b"48656C6C6F>", &names(&["ASCIIHexDecode"]), None).unwrap();
        assert_eq!(out, b"Hello");
    }

    #[test]
    fn empty_filter_list_is_identity() {
        let raw = b"\x00\xffsome raw bytes".to_vec();
        assert_eq!(decode_stream(&raw, &[], None).unwrap(), raw);
    }

    #[test]
    fn unsupported_filter_reported() {
        let err = decode_stream(b"xx", &names(&["DCTDecode"]), None).unwrap_err();
        assert_eq!(err, FilterError::Unsupported("DCTDecode".into()));
    }

    #[test]
    fn ascii85_known_vector() {
        // "Man " encodes to "9jqo^"; trailing partial group "sure" → "F*2M7".
        assert_eq!(ascii85_decode(b"9jqo^~>").unwrap(), b"Man ");
        assert_eq!(ascii85_decode(b"<~9jqo^F*2M7~>").unwrap(), b"Man sure");
        assert_eq!(ascii85_decode(b"z~>").unwrap(), vec![0; 4]);
        assert!(ascii85_decode(b"9~>").is_err());
        assert!(ascii85_decode(b"uuuuu~>").is_err());
    }

    #[test]
    fn run_length_known_vector() {
        // literal "abc", then 4 × 'z', then EOD
        let enc = [2, b'a', b'b', b'c', 253, b'z', 128, 9, 9];
        assert_eq!(run_length_decode(&enc).unwrap(), b"abczzzz");
        assert!(run_length_decode(&[5, b'a']).is_err());
    }

    #[test]
    fn lzw_known_vector() {
        // Example from the PDF reference: 45 45 45 45 45 65 45 45 45 66
        let enc = [0x80, 0x0B, 0x60, 0x50, 0x22, 0x0C, 0x0C, 0x85, 0x01];
        assert_eq!(
            lzw_decode(&enc, true).unwrap(),
            [45, 45, 45, 45, 45, 65, 45, 45, 45, 66]
        );
    }

    #[test]
    fn png_up_predictor() {
        // two rows of 3 columns, row filter 2 (Up)
        let data = [2, 1, 2, 3, 2, 1, 1, 1];
        let mut lx = Lexer::new(b"<</Predictor 12 /Columns 3>>", 0, 8);
        let parm = lx.parse_object().unwrap();
        let out = apply_predictor(&data, parm.as_dict(), "FlateDecode").unwrap();
        assert_eq!(out, [1, 2, 3, 2, 3, 4]);
    }

    #[test]
    fn corrupt_flate_fails_cleanly() {
        let err = decode_stream(b"definitely not deflate", &names(&["FlateDecode"]), None);
        assert!(matches!(err, Err(FilterError::Corrupt { .. })));
    }
}
