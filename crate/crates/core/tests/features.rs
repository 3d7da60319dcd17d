use pdfmlp_core::features::{describe_schema, features_from_bytes, Category, FEATURE_COUNT};
use pdfmlp_core::synth::{benign_pdf, malicious_pdf, minimal_pdf, PdfBuilder};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn assert_well_formed(values: &[f64; FEATURE_COUNT]) {
    let schema = describe_schema();
    for (v, d) in values.iter().zip(schema.descriptors) {
        assert!(v.is_finite(), "{} = {v}", d.name);
        assert!(*v >= 0.0, "{} = {v}", d.name);
        if d.unit == "bits/byte" {
            assert!(*v <= 8.0, "{} = {v}", d.name);
        }
        if d.unit == "flag" {
            assert!(*v == 0.0 || *v == 1.0, "{} = {v}", d.name);
        }
    }
}

#[test]
fn minimal_one_page_document() {
    let fv = features_from_bytes(&minimal_pdf());
    assert_eq!(fv.schema_id, "pdfmlp-v1");
    assert_eq!(fv.get("kw_javascript"), Some(0.0));
    assert_eq!(fv.get("kw_js"), Some(0.0));
    assert_eq!(fv.get("js_present"), Some(0.0));
    assert_eq!(fv.get("page_count"), Some(1.0));
    assert_eq!(fv.get("kw_embeddedfile"), Some(0.0));
    assert_eq!(fv.get("decode_failures"), Some(0.0));
    assert_eq!(fv.get("object_count"), Some(3.0));
    assert_eq!(fv.get("eof_markers"), Some(1.0));
    assert_eq!(fv.get("bytes_after_eof"), Some(0.0));
    assert_eq!(fv.get("header_version"), Some(1.7));
    assert_well_formed(&fv.values);
}

#[test]
fn empty_input_is_all_zero_except_truncation_diagnostic() {
    let fv = features_from_bytes(b"");
    let schema = describe_schema();
    for (v, d) in fv.values.iter().zip(schema.descriptors) {
        // Zero bytes is reported by the parser as a truncated file.
        let expected = if d.name == "diagnostic_count" { 1.0 } else { 0.0 };
        assert_eq!(*v, expected, "{}", d.name);
    }
}

fn javascript_action_pdf(code: &[u8], extra_actions: usize) -> Vec<u8> {
    let mut b = PdfBuilder::new("1.7");
    b.add(b"<< /Type /Catalog /Pages 2 0 R /OpenAction 4 0 R >>");
    b.add(b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>");
    b.add(b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] >>");
    let mut action = b"<< /Type /Action /S /JavaScript /JS (".to_vec();
    action.extend_from_slice(code);
    action.extend_from_slice(b") >>");
    b.add(&action);
    for _ in 0..extra_actions {
        b.add(b"<< /Type /Action /S /JavaScript /JS (app.alert\\(1\\)) >>");
    }
    b.set_root(1);
    b.build()
}

#[test]
fn eval_unescape_payload() {
    let fv = features_from_bytes(&javascript_action_pdf(b"eval\\(unescape\\('%75%6e'\\)\\)", 0));
    assert_eq!(fv.get("js_present"), Some(1.0));
    assert!(fv.get("js_obfuscation_score").unwrap() >= 2.0);
    assert_eq!(fv.get("js_obfuscation_score"), Some(2.0));
    assert_eq!(fv.get("kw_javascript"), Some(1.0));
    assert_eq!(fv.get("kw_js"), Some(1.0));
    assert_eq!(fv.get("kw_openaction"), Some(1.0));
}

#[test]
fn javascript_in_flate_stream_is_scored() {
    let mut b = PdfBuilder::new("1.6");
    b.add(b"<< /Type /Catalog /Pages 2 0 R /OpenAction 4 0 R >>");
    b.add(b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>");
    b.add(b"<< /Type /Page /Parent 2 0 R >>");
    b.add(b"<< /S /JavaScript /JS 5 0 R >>");
    b.add_flate_stream("", b"var s = String.fromCharCode(101); eval(s); s.charCodeAt(0);");
    b.set_root(1);
    let fv = features_from_bytes(&b.build());
    assert_eq!(fv.get("js_obfuscation_score"), Some(3.0));
    assert_eq!(fv.get("filter_flate"), Some(1.0));
    assert_eq!(fv.get("stream_count"), Some(1.0));
}

#[test]
fn schema_covers_four_categories() {
    let schema = describe_schema();
    assert_eq!(schema.descriptors.len(), 48);
    for c in Category::ALL {
        assert!(schema.descriptors.iter().any(|d| d.category == c), "{c}");
    }
    let names: std::collections::HashSet<_> = schema.descriptors.iter().map(|d| d.name).collect();
    assert_eq!(names.len(), 48);
    assert_eq!(describe_schema(), schema);
}

#[test]
fn synthetic_documents_have_well_formed_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let benign = features_from_bytes(&benign_pdf(&mut rng));
        assert_well_formed(&benign.values);
        let malicious = features_from_bytes(&malicious_pdf(&mut rng));
        assert_well_formed(&malicious.values);
        assert_eq!(malicious.get("js_present"), Some(1.0));
    }
}

#[test]
fn extraction_is_bitwise_deterministic_across_threads() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let docs: Vec<Vec<u8>> = (0..16)
        .map(|i| if i % 2 == 0 { benign_pdf(&mut rng) } else { malicious_pdf(&mut rng) })
        .collect();
    let bits = |v: &[f64; FEATURE_COUNT]| v.map(f64::to_bits);
    let reference: Vec<_> = docs.iter().map(|d| bits(&features_from_bytes(d).values)).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| s.spawn(|| docs.iter().map(|d| bits(&features_from_bytes(d).values)).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), reference);
        }
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn appending_javascript_action_never_decreases_count(extra in 0usize..5) {
        let before = features_from_bytes(&javascript_action_pdf(b"1", extra));
        let after = features_from_bytes(&javascript_action_pdf(b"1", extra + 1));
        prop_assert!(after.get("kw_javascript").unwrap() >= before.get("kw_javascript").unwrap());
        prop_assert_eq!(after.get("kw_javascript").unwrap(), before.get("kw_javascript").unwrap() + 1.0);
    }

    #[test]
    fn arbitrary_bytes_yield_well_formed_vectors(bytes in proptest::collection::vec(any::<u8>(), 0..2048)) {
        let fv = features_from_bytes(&bytes);
        assert_well_formed(&fv.values);
    }
}
