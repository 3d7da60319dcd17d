use pdfmlp_core::pdf::{
    parse_pdf, DiagnosticKind, ObjectId, PdfObject, StreamContent, TrailerSource,
};
use pdfmlp_core::synth::{deflate, PdfBuilder};
use proptest::prelude::*;

/// Hand-assembled minimal document. Byte accounting:
///   0..9     "%PDF-1.7\n"                                         9
///   9..58    "1 0 obj\n" (8) + catalog dict (33) + "\nendobj\n" (8) 49
///   58..115  "2 0 obj\n" (8) + pages dict (41) + "\nendobj\n" (8)   57
///   115..186 "3 0 obj\n" (8) + page dict (55) + "\nendobj\n" (8)    71
///   186      xref
const MINIMAL: &[u8] = b"%PDF-1.7\n\
1 0 obj\n<< /Type /Catalog /Pages 2 0 R >>\nendobj\n\
2 0 obj\n<< /Type /Pages /Kids [3 0 R] /Count 1 >>\nendobj\n\
3 0 obj\n<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] >>\nendobj\n\
xref\n0 4\n\
0000000000 65535 f \n\
0000000009 00000 n \n\
0000000058 00000 n \n\
0000000115 00000 n \n\
trailer\n<< /Size 4 /Root 1 0 R >>\nstartxref\n186\n%%EOF\n";

#[test]
fn minimal_pdf_parses_without_diagnostics() {
    let doc = parse_pdf(MINIMAL);
    assert_eq!(doc.objects.len(), 3);
    assert_eq!(doc.trailers.len(), 1);
    assert_eq!(doc.eof_marker_offsets.len(), 1);
    assert!(doc.diagnostics.is_empty(), "{:?}", doc.diagnostics);
    assert_eq!(doc.header_version.as_deref(), Some("1.7"));
    assert_eq!(doc.xref_section_count, 1);
    assert_eq!(doc.startxref_offsets, vec![186]);
    assert_eq!(doc.total_size, MINIMAL.len());
    let catalog = doc.catalog().unwrap();
    assert!(catalog.has_name("Type", "Catalog"));
}

#[test]
fn builder_minimal_matches_handcrafted_structure() {
    let doc = parse_pdf(&pdfmlp_core::synth::minimal_pdf());
    assert_eq!(doc.objects.len(), 3);
    assert!(doc.diagnostics.is_empty(), "{:?}", doc.diagnostics);
}

#[test]
fn empty_input() {
    let doc = parse_pdf(b"");
    assert!(doc.objects.is_empty());
    assert!(doc.header_version.is_none());
    assert_eq!(doc.total_size, 0);
    assert_eq!(doc.count_diagnostics(DiagnosticKind::Truncated), 1);
}

fn stream_pdf(length_delta: i64) -> (Vec<u8>, Vec<u8>) {
    let payload = b"BT /F1 12 Tf 72 712 Td (Hello world) Tj ET".to_vec();
    let mut b = PdfBuilder::new("1.4");
    b.add(b"<< /Type /Catalog /Pages 2 0 R >>");
    b.add(b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>");
    b.add(b"<< /Type /Page /Parent 2 0 R /Contents 4 0 R >>");
    let declared = payload.len() as i64 + length_delta;
    let mut body = format!("<< /Length {declared} >>\nstream\n").into_bytes();
    body.extend_from_slice(&payload);
    body.extend_from_slice(b"\nendstream");
    b.add(body);
    b.set_root(1);
    (b.build(), payload)
}

#[test]
fn wrong_length_recovered_by_endstream_scan() {
    let (good, payload) = stream_pdf(0);
    let reference = parse_pdf(&good);
    assert!(reference.diagnostics.is_empty(), "{:?}", reference.diagnostics);

    for delta in [10, -10] {
        let (bad, _) = stream_pdf(delta);
        let doc = parse_pdf(&bad);
        assert_eq!(doc.objects.len(), reference.objects.len());
        assert_eq!(doc.count_diagnostics(DiagnosticKind::BadLength), 1, "delta {delta}");
        let stream = doc.get(ObjectId::new(4, 0)).unwrap().as_stream().unwrap();
        assert_eq!(stream.raw, payload);
        assert_eq!(stream.decoded(), Some(&payload[..]));
    }
}

#[test]
fn indirect_length_is_resolved() {
    let payload = b"0123456789 endstream-lookalike? no".to_vec();
    let mut b = PdfBuilder::new("1.5");
    b.add(b"<< /Type /Catalog >>");
    let mut body = b"<< /Length 3 0 R >>\nstream\n".to_vec();
    body.extend_from_slice(&payload);
    body.extend_from_slice(b"\nendstream");
    b.add(body);
    b.add(format!("{}", payload.len()));
    b.set_root(1);
    let doc = parse_pdf(&b.build());
    assert!(doc.diagnostics.is_empty(), "{:?}", doc.diagnostics);
    let s = doc.get(ObjectId::new(2, 0)).unwrap().as_stream().unwrap();
    assert_eq!(s.raw, payload);
}

#[test]
fn keywords_inside_stream_data_are_ignored() {
    let payload = b"7 0 obj << /JavaScript >> endobj trailer << /Encrypt 1 0 R >> %%EOF";
    let mut b = PdfBuilder::new("1.5");
    b.add(b"<< /Type /Catalog >>");
    b.add_stream("", payload);
    b.set_root(1);
    let doc = parse_pdf(&b.build());
    assert_eq!(doc.objects.len(), 2);
    assert_eq!(doc.iter_name_occurrences("/JavaScript"), 0);
    assert!(!doc.encrypted);
    assert_eq!(doc.eof_marker_offsets.len(), 1);
}

#[test]
fn broken_xref_still_recovers_objects() {
    let mut bytes = MINIMAL.to_vec();
    bytes.splice(9..9, b"% padding that shifts offsets\n".iter().copied());
    let doc = parse_pdf(&bytes);
    assert_eq!(doc.objects.len(), 3);
    assert!(doc.count_diagnostics(DiagnosticKind::BadXref) >= 1);
}

#[test]
fn no_xref_at_all() {
    let bytes = b"%PDF-1.1\n1 0 obj << /Type /Catalog /OpenAction 2 0 R >> endobj\n2 0 obj << /S /JavaScript /JS (app.alert(1)) >> endobj\n";
    let doc = parse_pdf(bytes);
    assert_eq!(doc.objects.len(), 2);
    assert_eq!(doc.iter_name_occurrences("/OpenAction"), 1);
    assert_eq!(doc.iter_name_occurrences("JS"), 1);
    assert_eq!(doc.count_diagnostics(DiagnosticKind::Truncated), 1);
}

#[test]
fn duplicate_definition_last_wins() {
    let bytes = b"%PDF-1.4\n1 0 obj (first) endobj\n1 0 obj (second) endobj\n%%EOF\n";
    let doc = parse_pdf(bytes);
    assert_eq!(doc.objects.len(), 1);
    assert_eq!(doc.count_diagnostics(DiagnosticKind::DuplicateObject), 1);
    match doc.get(ObjectId::new(1, 0)).unwrap() {
        PdfObject::String(s) => assert_eq!(s.bytes, b"second"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn object_stream_contents_are_merged() {
    let inner = b"10 0 11 29 << /S /JavaScript /JS (x) >>\n[ /Launch ]";
    // offsets relative to /First: obj 10 at 0, obj 11 at 29
    let first = b"10 0 11 29 ".len();
    assert_eq!(&inner[first + 29..first + 30], b"[");
    let mut b = PdfBuilder::new("1.5");
    b.add(b"<< /Type /Catalog >>");
    b.add_flate_stream(&format!("/Type /ObjStm /N 2 /First {first}"), inner);
    b.set_root(1);
    let doc = parse_pdf(&b.build());
    assert!(doc.diagnostics.is_empty(), "{:?}", doc.diagnostics);
    assert!(doc.get(ObjectId::new(10, 0)).is_some());
    assert_eq!(doc.iter_name_occurrences("JavaScript"), 1);
    assert_eq!(doc.iter_name_occurrences("Launch"), 1);
    assert_eq!(doc.iter_name_occurrences("ObjStm"), 1);
}

#[test]
fn object_stream_collision_is_diagnosed() {
    let inner = b"1 0 (shadow)";
    let mut b = PdfBuilder::new("1.5");
    b.add(b"<< /Type /Catalog >>");
    b.add_flate_stream("/Type /ObjStm /N 1 /First 4", inner);
    b.set_root(1);
    let doc = parse_pdf(&b.build());
    assert_eq!(doc.count_diagnostics(DiagnosticKind::DuplicateObject), 1);
    assert!(doc.get(ObjectId::new(1, 0)).unwrap().as_dict().is_some());
}

#[test]
fn unknown_and_corrupt_filters_keep_raw_bytes() {
    let mut b = PdfBuilder::new("1.5");
    b.add(b"<< /Type /Catalog >>");
    b.add_stream("/Filter /JBIG2Decode", b"\x97JB2");
    b.add_stream("/Filter /FlateDecode", b"not zlib at all");
    b.add_stream("/Filter [/ASCIIHexDecode /FlateDecode]", hex::encode(deflate(b"cascade")).as_bytes());
    b.set_root(1);
    let doc = parse_pdf(&b.build());
    assert_eq!(doc.count_diagnostics(DiagnosticKind::UnknownFilter), 1);
    assert_eq!(doc.count_diagnostics(DiagnosticKind::DecodeError), 1);
    let s2 = doc.get(ObjectId::new(2, 0)).unwrap().as_stream().unwrap();
    assert!(s2.decode_failed());
    assert_eq!(s2.raw, b"\x97JB2");
    let s4 = doc.get(ObjectId::new(4, 0)).unwrap().as_stream().unwrap();
    assert_eq!(s4.decoded(), Some(&b"cascade"[..]));
}

#[test]
fn encrypted_documents_are_not_decoded() {
    let mut b = PdfBuilder::new("1.6");
    b.add(b"<< /Type /Catalog >>");
    b.add_flate_stream("", b"secret");
    b.add(b"<< /Filter /Standard /V 2 /R 3 /O <00> /U <00> /P -4 >>");
    b.set_root(1);
    b.trailer_extra("/Encrypt 3 0 R");
    let doc = parse_pdf(&b.build());
    assert!(doc.encrypted);
    let s = doc.get(ObjectId::new(2, 0)).unwrap().as_stream().unwrap();
    assert_eq!(s.content, StreamContent::Encrypted);
    assert_eq!(doc.iter_name_occurrences("Encrypt"), 1);
}

#[test]
fn xref_stream_counts_as_trailer() {
    let mut b = PdfBuilder::new("1.5");
    b.add(b"<< /Type /Catalog >>");
    b.add_stream("/Type /XRef /Size 3 /W [1 2 1] /Root 1 0 R", &[0u8; 12]);
    b.set_root(1);
    let doc = parse_pdf(&b.build());
    assert_eq!(doc.xref_section_count, 2);
    assert_eq!(doc.trailers.len(), 2);
    assert!(matches!(doc.trailers[0].source, TrailerSource::XRefStream(_)));
    // The /Root key in the xref-stream dictionary is counted once, via the object map.
    assert_eq!(doc.iter_name_occurrences("Root"), 2);
}

#[test]
fn deep_nesting_is_capped() {
    let mut bytes = b"%PDF-1.4\n1 0 obj\n".to_vec();
    bytes.extend(std::iter::repeat_n(b'[', 10_000));
    bytes.extend_from_slice(b"\nendobj\n2 0 obj /Fine endobj\n%%EOF");
    let doc = parse_pdf(&bytes);
    assert_eq!(doc.count_diagnostics(DiagnosticKind::NestingTooDeep), 1);
    assert!(doc.get(ObjectId::new(2, 0)).is_some());
}

#[test]
fn bytes_after_eof_are_flagged() {
    let mut bytes = MINIMAL.to_vec();
    bytes.extend_from_slice(b"<script>evil</script>");
    let doc = parse_pdf(&bytes);
    assert_eq!(doc.count_diagnostics(DiagnosticKind::GarbageBytes), 1);
}

#[test]
fn name_occurrences() {
    let doc = parse_pdf(
        b"%PDF-1.4\n1 0 obj << /Type /Catalog /OpenAction 2 0 R >> endobj\n\
          2 0 obj << /S /J#61vaScript /JS (x) >> endobj\n%%EOF\n",
    );
    assert_eq!(doc.iter_name_occurrences("/OpenAction"), 1);
    assert_eq!(doc.iter_name_occurrences("/JavaScript"), 1);
    assert_eq!(parse_pdf(b"").iter_name_occurrences("/JavaScript"), 0);
}

fn escape_name(name: &str, mask: &[bool]) -> String {
    name.bytes()
        .zip(mask.iter().cycle())
        .map(|(b, &esc)| {
            if esc {
                format!("#{b:02X}")
            } else {
                char::from(b).to_string()
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn escaped_names_count_like_canonical(
        name in "[A-Za-z][A-Za-z0-9]{0,15}",
        mask in proptest::collection::vec(any::<bool>(), 1..16),
    ) {
        let plain = format!("%PDF-1.4\n1 0 obj << /{name} /{name} >> endobj\n%%EOF\n");
        let escaped = format!("%PDF-1.4\n1 0 obj << /{} /{} >> endobj\n%%EOF\n",
            escape_name(&name, &mask), escape_name(&name, &mask[1..].iter().chain([&true]).copied().collect::<Vec<_>>()));
        let a = parse_pdf(plain.as_bytes()).iter_name_occurrences(&name);
        let b = parse_pdf(escaped.as_bytes()).iter_name_occurrences(&name);
        prop_assert_eq!(a, 2);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn parsing_is_idempotent(bytes in proptest::collection::vec(any::<u8>(), 0..2048)) {
        prop_assert_eq!(parse_pdf(&bytes), parse_pdf(&bytes));
    }

    #[test]
    fn diagnostics_stay_in_bounds(mut bytes in proptest::collection::vec(any::<u8>(), 0..1024), cut in 0usize..400) {
        let mut doc_bytes = MINIMAL.to_vec();
        doc_bytes.truncate(doc_bytes.len().saturating_sub(cut));
        doc_bytes.append(&mut bytes);
        let doc = parse_pdf(&doc_bytes);
        prop_assert_eq!(doc.total_size, doc_bytes.len());
        for d in &doc.diagnostics {
            prop_assert!(d.offset <= doc.total_size);
        }
    }
}
