use memchr::memmem;

use super::entropy::{shannon_entropy, ByteHistogram};
use super::schema::{FEATURE_COUNT, SCHEMA_ID};
use super::FeatureVector;
use crate::pdf::{DiagnosticKind, Dictionary, PdfDocument, PdfObject, StreamContent, Visit};

const LONG_INFO_VALUE: usize = 256;
const OBFUSCATION_TOKENS: [&str; 4] = ["eval", "unescape", "String.fromCharCode", "charCodeAt"];

/// Maps a parsed document and its source bytes to the 48 features of
/// schema `pdfmlp-v1`. Total and deterministic.
pub fn extract_features(doc: &PdfDocument, raw: &[u8]) -> FeatureVector {
    let mut v = Vec::with_capacity(FEATURE_COUNT);

    // structure
    v.push(raw.len() as f64);
    v.push(header_version(doc));
    v.push(doc.objects.len() as f64);
    let streams: Vec<_> = doc
        .objects
        .values()
        .filter_map(PdfObject::as_stream)
        .collect();
    v.push(streams.len() as f64);
    v.push(doc.xref_section_count as f64);
    v.push(doc.trailers.len() as f64);
    v.push(doc.startxref_offsets.len() as f64);
    v.push(doc.eof_marker_offsets.len() as f64);
    v.push(bytes_after_eof(doc, raw) as f64);
    v.push(max_depth(doc) as f64);
    v.push(doc.count_diagnostics(DiagnosticKind::DuplicateObject) as f64);
    v.push(doc.diagnostics.len() as f64);

    // object properties
    let count = |n: &str| doc.iter_name_occurrences(n) as f64;
    let js_names = count("JavaScript");
    let js_keys = count("JS");
    v.push(js_names);
    v.push(js_keys);
    for name in [
        "OpenAction",
        "AA",
        "Launch",
        "EmbeddedFile",
        "RichMedia",
        "AcroForm",
        "XFA",
        "URI",
    ] {
        v.push(count(name));
    }
    v.push(count("GoToR") + count("GoToE"));
    for name in ["ObjStm", "Encrypt", "Names", "SubmitForm", "Action"] {
        v.push(count(name));
    }

    // content statistics
    let mut decoded_hist = ByteHistogram::new();
    let mut outside_hist = ByteHistogram::from_bytes(raw);
    let mut max_stream_entropy = 0.0f64;
    let mut raw_total = 0usize;
    let mut raw_max = 0usize;
    let (mut flate, mut ascii, mut other, mut cascades, mut failures) = (0, 0, 0, 0, 0);
    for s in &streams {
        if let Some(bytes) = s.decoded() {
            decoded_hist.add(bytes);
        }
        let end = s.raw_offset + s.raw.len();
        if end <= raw.len() && raw[s.raw_offset..end] == s.raw[..] {
            outside_hist.subtract(&s.raw);
        }
        max_stream_entropy = max_stream_entropy.max(shannon_entropy(s.decoded().unwrap_or(&s.raw)));
        raw_total += s.raw.len();
        raw_max = raw_max.max(s.raw.len());
        let filters = s.filters();
        for f in &filters {
            match f.as_bytes() {
                b"FlateDecode" | b"Fl" => flate += 1,
                b"ASCIIHexDecode" | b"AHx" | b"ASCII85Decode" | b"A85" => ascii += 1,
                _ => other += 1,
            }
        }
        if filters.len() >= 2 {
            cascades += 1;
        }
        if matches!(s.content, StreamContent::DecodeFailed) {
            failures += 1;
        }
    }
    v.push(shannon_entropy(raw));
    v.push(decoded_hist.entropy());
    v.push(outside_hist.entropy());
    v.push(max_stream_entropy);
    v.push(if streams.is_empty() {
        0.0
    } else {
        raw_total as f64 / streams.len() as f64
    });
    v.push(raw_max as f64);
    v.push(if raw.is_empty() {
        0.0
    } else {
        raw_total as f64 / raw.len() as f64
    });
    v.push(f64::from(flate));
    v.push(f64::from(ascii));
    v.push(f64::from(other));
    v.push(f64::from(cascades));
    v.push(f64::from(failures));

    let info_strings = info_strings(doc);
    v.push(
        info_strings
            .iter()
            .map(|s| longest_hex_run(s))
            .max()
            .unwrap_or(0) as f64,
    );
    v.push(obfuscation_score(doc) as f64);

    // metadata
    v.push(page_count(doc) as f64);
    v.push(if doc.info().is_some() { 1.0 } else { 0.0 });
    v.push(info_strings.iter().map(|s| s.len()).sum::<usize>() as f64);
    v.push(info_strings.iter().filter(|s| s.len() > LONG_INFO_VALUE).count() as f64);
    v.push(if has_xmp(doc) { 1.0 } else { 0.0 });
    v.push(if js_names + js_keys > 0.0 { 1.0 } else { 0.0 });

    debug_assert_eq!(v.len(), FEATURE_COUNT);
    let values: [f64; FEATURE_COUNT] = v.try_into().expect("feature layout has 48 entries");
    FeatureVector {
        values,
        schema_id: SCHEMA_ID.to_string(),
        source_path: None,
    }
}

fn header_version(doc: &PdfDocument) -> f64 {
    doc.header_version
        .as_deref()
        .and_then(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .unwrap_or(0.0)
}

fn bytes_after_eof(doc: &PdfDocument, raw: &[u8]) -> usize {
    let Some(&last) = doc.eof_marker_offsets.last() else {
        return 0;
    };
    let mut tail = &raw[(last + 5).min(raw.len())..];
    for eol in [&b"\r\n"[..], b"\n", b"\r"] {
        if let Some(rest) = tail.strip_prefix(eol) {
            tail = rest;
            break;
        }
    }
    tail.len()
}

fn max_depth(doc: &PdfDocument) -> usize {
    let objects = doc.objects.values().map(PdfObject::depth);
    let trailers = doc
        .trailers
        .iter()
        .map(|t| PdfObject::Dictionary(t.dict.clone()).depth());
    objects.chain(trailers).max().unwrap_or(0)
}

fn page_count(doc: &PdfDocument) -> usize {
    let pages = doc
        .objects
        .values()
        .filter(|o| matches!(o, PdfObject::Dictionary(d) if d.has_name("Type", "Page")))
        .count();
    if pages > 0 {
        return pages;
    }
    doc.catalog()
        .and_then(|c| c.get("Pages"))
        .and_then(|p| doc.resolve(p))
        .and_then(PdfObject::as_dict)
        .and_then(|p| p.get("Count"))
        .and_then(PdfObject::as_i64)
        .map_or(0, |n| n.clamp(0, i64::from(u32::MAX)) as usize)
}

fn info_strings(doc: &PdfDocument) -> Vec<&[u8]> {
    let Some(info) = doc.info() else {
        return Vec::new();
    };
    info.iter()
        .filter_map(|(_, v)| match doc.resolve(v) {
            Some(PdfObject::String(s)) => Some(&s.bytes[..]),
            _ => None,
        })
        .collect()
}

fn longest_hex_run(bytes: &[u8]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for b in bytes {
        if b.is_ascii_hexdigit() {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

fn has_xmp(doc: &PdfDocument) -> bool {
    doc.objects.values().any(|o| {
        o.as_stream()
            .is_some_and(|s| s.dict.has_name("Type", "Metadata") && s.dict.has_name("Subtype", "XML"))
    })
}

/// Collects the code attached to every `/JS` entry (string or stream).
fn javascript_sources(doc: &PdfDocument) -> Vec<&[u8]> {
    let mut dicts: Vec<&Dictionary> = Vec::new();
    doc.walk_objects(&mut |v| {
        if let Visit::Object(o) = v {
            dicts.extend(o.as_dict());
        }
    });
    dicts
        .into_iter()
        .flat_map(|d| d.iter())
        .filter(|(k, _)| k.is("JS"))
        .filter_map(|(_, v)| match doc.resolve(v) {
            Some(PdfObject::String(s)) => Some(&s.bytes[..]),
            Some(PdfObject::Stream(s)) => Some(s.decoded().unwrap_or(&s.raw)),
            _ => None,
        })
        .collect()
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

fn count_token(code: &[u8], token: &[u8]) -> usize {
    memmem::find_iter(code, token)
        .filter(|&p| {
            let before = p == 0 || !is_ident_byte(code[p - 1]);
            let end = p + token.len();
            let after = end >= code.len() || !is_ident_byte(code[end]);
            before && after
        })
        .count()
}

/// Heuristic proxy for script obfuscation: occurrences of common
/// decode/evaluate primitives across all `/JS` code.
fn obfuscation_score(doc: &PdfDocument) -> usize {
    javascript_sources(doc)
        .iter()
        .map(|code| {
            OBFUSCATION_TOKENS
                .iter()
                .map(|t| count_token(code, t.as_bytes()))
                .sum::<usize>()
        })
        .sum()
}
