//! Synthetic PDF generation.
//!
//! [`PdfBuilder`] writes structurally valid files with a correct
//! cross-reference table. [`benign_pdf`] and [`malicious_pdf`] produce
//! seeded, varied documents resembling ordinary office output and
//! script-laden droppers; they stand in for a real labeled corpus in
//! tests and demos.

use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use rand::seq::IndexedRandom;
use rand::Rng;

/// Assembles a PDF from raw object bodies.
#[derive(Debug, Clone)]
pub struct PdfBuilder {
    version: String,
    objects: Vec<Vec<u8>>,
    root: Option<u32>,
    info: Option<u32>,
    trailer_extra: String,
}

impl Default for PdfBuilder {
    fn default() -> Self {
        Self::new("1.7")
    }
}

impl PdfBuilder {
    pub fn new(version: &str) -> Self {
        Self {
            version: version.to_string(),
            objects: Vec::new(),
            root: None,
            info: None,
            trailer_extra: String::new(),
        }
    }

    /// Number the next added object will receive.
    pub fn next_id(&self) -> u32 {
        self.objects.len() as u32 + 1
    }

    /// Adds an object whose body (between `obj` and `endobj`) is `body`.
    pub fn add(&mut self, body: impl AsRef<[u8]>) -> u32 {
        self.objects.push(body.as_ref().to_vec());
        self.objects.len() as u32
    }

    /// Replaces the body of an already added object.
    pub fn set(&mut self, id: u32, body: impl AsRef<[u8]>) {
        self.objects[id as usize - 1] = body.as_ref().to_vec();
    }

    /// Adds a stream object. `dict_entries` is spliced into the stream
    /// dictionary next to a correct `/Length`.
    pub fn add_stream(&mut self, dict_entries: &str, data: &[u8]) -> u32 {
        let mut body = format!("<<{dict_entries} /Length {}>>\nstream\n", data.len()).into_bytes();
        body.extend_from_slice(data);
        body.extend_from_slice(b"\nendstream");
        self.add(body)
    }

    /// Adds a Flate-compressed stream.
    pub fn add_flate_stream(&mut self, dict_entries: &str, data: &[u8]) -> u32 {
        let compressed = deflate(data);
        self.add_stream(&format!("{dict_entries} /Filter /FlateDecode"), &compressed)
    }

    pub fn set_root(&mut self, id: u32) {
        self.root = Some(id);
    }

    pub fn set_info(&mut self, id: u32) {
        self.info = Some(id);
    }

    /// Extra entries for the trailer dictionary (e.g. `/Encrypt 9 0 R`).
    pub fn trailer_extra(&mut self, entries: &str) {
        self.trailer_extra = entries.to_string();
    }

    pub fn build(&self) -> Vec<u8> {
        let mut out = format!("%PDF-{}\n", self.version).into_bytes();
        out.extend_from_slice(b"%\xe2\xe3\xcf\xd3\n");
        let mut offsets = Vec::with_capacity(self.objects.len());
        for (i, body) in self.objects.iter().enumerate() {
            offsets.push(out.len());
            writeln!(out, "{} 0 obj", i + 1).unwrap();
            out.extend_from_slice(body);
            out.extend_from_slice(b"\nendobj\n");
        }
        let xref_at = out.len();
        write!(out, "xref\n0 {}\n0000000000 65535 f \n", self.objects.len() + 1).unwrap();
        for off in &offsets {
            writeln!(out, "{off:010} 00000 n ").unwrap();
        }
        write!(out, "trailer\n<< /Size {}", self.objects.len() + 1).unwrap();
        if let Some(root) = self.root {
            write!(out, " /Root {root} 0 R").unwrap();
        }
        if let Some(info) = self.info {
            write!(out, " /Info {info} 0 R").unwrap();
        }
        if !self.trailer_extra.is_empty() {
            write!(out, " {}", self.trailer_extra).unwrap();
        }
        write!(out, " >>\nstartxref\n{xref_at}\n%%EOF\n").unwrap();
        out
    }
}

pub fn deflate(data: &[u8]) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all(data).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

/// Catalog + page tree + `pages` pages with the given content streams.
fn page_tree(b: &mut PdfBuilder, contents: &[u32], font: Option<u32>) -> (u32, u32) {
    let catalog = b.add(b"");
    let pages = b.add(b"");
    let mut kids = Vec::new();
    for &c in contents {
        let resources = match font {
            Some(f) => format!(" /Resources << /Font << /F1 {f} 0 R >> >>"),
            None => String::new(),
        };
        kids.push(b.add(format!(
            "<< /Type /Page /Parent {pages} 0 R /MediaBox [0 0 612 792] /Contents {c} 0 R{resources} >>"
        )));
    }
    let kids_list: Vec<String> = kids.iter().map(|k| format!("{k} 0 R")).collect();
    b.set(
        pages,
        format!("<< /Type /Pages /Kids [{}] /Count {} >>", kids_list.join(" "), kids.len()),
    );
    b.set(catalog, format!("<< /Type /Catalog /Pages {pages} 0 R >>"));
    b.set_root(catalog);
    (catalog, pages)
}

/// The smallest well-formed document: catalog, page tree, one empty page.
pub fn minimal_pdf() -> Vec<u8> {
    let mut b = PdfBuilder::new("1.7");
    b.add(b"<< /Type /Catalog /Pages 2 0 R >>");
    b.add(b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>");
    b.add(b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] >>");
    b.set_root(1);
    b.build()
}

const WORDS: &[&str] = &[
    "report", "quarterly", "revenue", "summary", "analysis", "the", "of", "and", "customer",
    "project", "schedule", "invoice", "total", "meeting", "notes", "design", "review", "budget",
    "system", "results", "figure", "table", "section", "appendix", "data",
];

fn sentence<R: Rng>(rng: &mut R, words: usize) -> String {
    (0..words)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn text_content<R: Rng>(rng: &mut R) -> Vec<u8> {
    let lines = rng.random_range(5..40);
    let mut s = String::from("BT /F1 11 Tf 72 720 Td 14 TL\n");
    for _ in 0..lines {
        let n = rng.random_range(4..14);
        s.push_str(&format!("({}) '\n", sentence(rng, n)));
    }
    s.push_str("ET\n");
    s.into_bytes()
}

/// A seeded office-style document: several text pages, fonts, metadata,
/// occasionally an image, XMP packet or a benign form script.
pub fn benign_pdf<R: Rng>(rng: &mut R) -> Vec<u8> {
    let version = ["1.4", "1.5", "1.6", "1.7"].choose(rng).expect("non-empty");
    let mut b = PdfBuilder::new(version);
    let font = b.add(b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica >>");
    let pages = rng.random_range(1..12);
    let contents: Vec<u32> = (0..pages)
        .map(|_| {
            let text = text_content(rng);
            if rng.random_bool(0.85) {
                b.add_flate_stream("", &text)
            } else {
                b.add_stream("", &text)
            }
        })
        .collect();
    let (catalog, _) = page_tree(&mut b, &contents, Some(font));

    if rng.random_bool(0.3) {
        let len = rng.random_range(200..4000);
        let jpeg: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        b.add_stream(
            "/Type /XObject /Subtype /Image /Width 32 /Height 32 /ColorSpace /DeviceRGB /BitsPerComponent 8 /Filter /DCTDecode",
            &jpeg,
        );
    }
    let mut catalog_extra = String::new();
    if rng.random_bool(0.4) {
        let xmp = format!(
            "<?xpacket begin=\"\"?><x:xmpmeta xmlns:x=\"adobe:ns:meta/\"><dc:title>{}</dc:title></x:xmpmeta><?xpacket end=\"w\"?>",
            sentence(rng, 4)
        );
        let m = b.add_stream("/Type /Metadata /Subtype /XML", xmp.as_bytes());
        catalog_extra.push_str(&format!(" /Metadata {m} 0 R"));
    }
    if rng.random_bool(0.08) {
        // Forms with simple validation scripts exist in benign corpora too.
        let js = b.add(b"<< /S /JavaScript /JS (app.alert\\('Please fill all fields'\\);) >>");
        let field = b.add(format!("<< /FT /Tx /T (name) /AA << /V {js} 0 R >> >>"));
        catalog_extra.push_str(&format!(" /AcroForm << /Fields [{field} 0 R] >>"));
    }
    if rng.random_bool(0.25) {
        b.add(b"<< /Type /Annot /Subtype /Link /Rect [72 72 200 90] /A << /S /URI /URI (https://www.example.com/) >> >>");
        catalog_extra.push_str(" /Names << /Dests << >> >>");
    }
    if !catalog_extra.is_empty() {
        let pages_ref = catalog + 1;
        b.set(
            catalog,
            format!("<< /Type /Catalog /Pages {pages_ref} 0 R{catalog_extra} >>"),
        );
    }
    if rng.random_bool(0.8) {
        let info = b.add(format!(
            "<< /Title ({}) /Author (Staff) /Producer (Office Writer {}.{}) /CreationDate (D:20180301120000Z) >>",
            sentence(rng, 5),
            rng.random_range(1..9),
            rng.random_range(0..10)
        ));
        b.set_info(info);
    }
    b.build()
}

fn obfuscated_script<R: Rng>(rng: &mut R) -> String {
    let shellcode: String = (0..rng.random_range(40..200))
        .map(|_| format!("%u{:04x}", rng.random::<u16>()))
        .collect();
    let var = ["a", "x", "_0x1f", "q9", "payload"].choose(rng).expect("non-empty");
    let mut js = format!("var {var} = unescape(\"{shellcode}\");\n");
    if rng.random_bool(0.7) {
        js.push_str("var s = String.fromCharCode(101,118,97,108);\n");
    }
    if rng.random_bool(0.5) {
        js.push_str(&format!("for (var i = 0; i < 200; i++) {{ {var} += {var}.charCodeAt(i % 7); }}\n"));
    }
    js.push_str(&format!("eval(unescape(\"{var}\"));\n"));
    js
}

/// A seeded document carrying the traits of script droppers: automatic
/// actions, obfuscated JavaScript (sometimes hidden in object streams or
/// behind escaped names), long encoded metadata, embedded files and
/// structural damage.
pub fn malicious_pdf<R: Rng>(rng: &mut R) -> Vec<u8> {
    let version = ["1.3", "1.4", "1.6", "1.7"].choose(rng).expect("non-empty");
    let mut b = PdfBuilder::new(version);
    let content = b.add_stream("", b"BT /F1 12 Tf 72 712 Td (Loading document...) Tj ET");
    let (catalog, pages) = page_tree(&mut b, &[content], None);

    let script = obfuscated_script(rng);
    let js_key = if rng.random_bool(0.3) { "/J#53" } else { "/JS" };
    let action_type = if rng.random_bool(0.3) { "/J#61vaScript" } else { "/JavaScript" };
    let js_obj = if rng.random_bool(0.6) {
        let s = b.add_flate_stream("", script.as_bytes());
        b.add(format!("<< /Type /Action /S {action_type} {js_key} {s} 0 R >>"))
    } else {
        let escaped = script.replace('\\', "\\\\").replace('(', "\\(").replace(')', "\\)");
        b.add(format!("<< /Type /Action /S {action_type} {js_key} ({escaped}) >>"))
    };

    let mut catalog_extra = format!(" /OpenAction {js_obj} 0 R");
    if rng.random_bool(0.4) {
        let names = b.add(format!("<< /Names [(init) {js_obj} 0 R] >>"));
        catalog_extra.push_str(&format!(" /Names << /JavaScript {names} 0 R >>"));
    }
    if rng.random_bool(0.3) {
        let launch = b.add(b"<< /Type /Action /S /Launch /F (cmd.exe) /P (/c start payload.exe) >>");
        catalog_extra.push_str(&format!(" /AA << /O {launch} 0 R >>"));
    }
    if rng.random_bool(0.3) {
        let len = rng.random_range(500..3000);
        let blob: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let ef = b.add_flate_stream("/Type /EmbeddedFile", &blob);
        b.add(format!("<< /Type /Filespec /F (invoice.exe) /EF << /F {ef} 0 R >> >>"));
    }
    if rng.random_bool(0.2) {
        let xfa = b.add_stream("", b"<xdp:xdp><template/></xdp:xdp>");
        catalog_extra.push_str(&format!(" /AcroForm << /XFA {xfa} 0 R >>"));
    }
    if rng.random_bool(0.3) {
        // Hide a second script inside an object stream.
        let hidden_id = 900 + b.next_id();
        let body = format!("<< /S /JavaScript /JS ({}) >>", "eval(this.info.title);");
        let header = format!("{hidden_id} 0 ");
        let mut data = header.clone().into_bytes();
        data.extend_from_slice(body.as_bytes());
        b.add_flate_stream(
            &format!("/Type /ObjStm /N 1 /First {}", header.len()),
            &data,
        );
    }
    b.set(
        catalog,
        format!("<< /Type /Catalog /Pages {pages} 0 R{catalog_extra} >>"),
    );

    if rng.random_bool(0.6) {
        let hex: String = (0..rng.random_range(300..2000))
            .map(|_| format!("{:02x}", rng.random::<u8>()))
            .collect();
        let info = b.add(format!("<< /Title ({hex}) /Author (admin) >>"));
        b.set_info(info);
    }

    let mut bytes = b.build();
    if rng.random_bool(0.3) {
        // Corrupt the xref table by shifting everything after the header.
        bytes.splice(20..20, b"          ".iter().copied());
    }
    if rng.random_bool(0.2) {
        let trailing: Vec<u8> = (0..rng.random_range(10..300)).map(|_| rng.random()).collect();
        bytes.extend_from_slice(&trailing);
    }
    bytes
}
