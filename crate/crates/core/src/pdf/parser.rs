//! Recovery-first document parser.
//!
//! The cross-reference table is never trusted for locating objects. The
//! file is scanned linearly for `N G obj` headers and the structural
//! keywords; xref data is only checked for consistency so that broken
//! tables surface as diagnostics. Stream data is skipped as a unit so that
//! keywords inside binary payloads are not misread.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use memchr::memmem;

use super::diagnostics::{DiagnosticKind, ParseDiagnostic};
use super::document::{PdfDocument, Trailer, TrailerSource};
use super::filters::{decode_stream, FilterError};
use super::lexer::{is_regular, is_whitespace, read_unsigned, Lexer};
use super::object::{filter_names, ObjectId, PdfObject, PdfStream, StreamContent};

const HEADER_WINDOW: usize = 1024;

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Maximum container nesting depth.
    pub max_depth: usize,
    /// Wall-clock limit; when exceeded, parsing stops with a `truncated`
    /// diagnostic and whatever was recovered so far. `None` disables it,
    /// which keeps output independent of machine speed.
    pub time_budget: Option<Duration>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_depth: 64,
            time_budget: None,
        }
    }
}

/// Parses `bytes` with default options. Never fails.
pub fn parse_pdf(bytes: &[u8]) -> PdfDocument {
    parse_pdf_with(bytes, &ParseOptions::default())
}

pub fn parse_pdf_with(bytes: &[u8], options: &ParseOptions) -> PdfDocument {
    Parser::new(bytes, options).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Object,
    Xref,
    Trailer,
    StartXref,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    start: usize,
    kind: EventKind,
    /// Position right after the keyword.
    body: usize,
    id: ObjectId,
}

struct XrefTable {
    offset: usize,
    entries: Vec<(u32, u64)>,
}

struct Parser<'a> {
    data: &'a [u8],
    options: &'a ParseOptions,
    doc: PdfDocument,
    /// Body position of every object header, per id, in file order.
    headers: HashMap<ObjectId, Vec<usize>>,
    /// Header start position → id.
    header_starts: HashMap<usize, ObjectId>,
    xref_tables: Vec<XrefTable>,
    started: Instant,
}

impl<'a> Parser<'a> {
    fn new(data: &'a [u8], options: &'a ParseOptions) -> Self {
        Self {
            data,
            options,
            doc: PdfDocument::empty(data.len()),
            headers: HashMap::new(),
            header_starts: HashMap::new(),
            xref_tables: Vec::new(),
            started: Instant::now(),
        }
    }

    fn diag(&mut self, offset: usize, kind: DiagnosticKind, detail: impl Into<String>) {
        self.doc.diagnostics.push(ParseDiagnostic {
            offset: offset.min(self.data.len()),
            kind,
            detail: detail.into(),
        });
    }

    fn over_budget(&self) -> bool {
        self.options
            .time_budget
            .is_some_and(|b| self.started.elapsed() > b)
    }

    fn run(mut self) -> PdfDocument {
        if self.data.is_empty() {
            self.diag(0, DiagnosticKind::Truncated, "empty input");
            return self.doc;
        }
        self.doc.header_version = self.header_version();

        let events = self.collect_events();
        for e in &events {
            if e.kind == EventKind::Object {
                self.headers.entry(e.id).or_default().push(e.body);
                self.header_starts.insert(e.start, e.id);
            }
        }

        let mut pos = 0usize;
        for event in events {
            if event.start < pos {
                continue;
            }
            if self.over_budget() {
                self.diag(event.start, DiagnosticKind::Truncated, "time budget exceeded");
                break;
            }
            pos = match event.kind {
                EventKind::Object => self.parse_indirect(event),
                EventKind::Xref => self.parse_xref_table(event),
                EventKind::Trailer => self.parse_trailer(event),
                EventKind::StartXref => self.parse_startxref(event),
                EventKind::Eof => {
                    self.doc.eof_marker_offsets.push(event.start);
                    event.body
                }
            };
        }

        self.detect_encryption();
        self.collect_xref_streams();
        self.decode_streams();
        self.expand_object_streams();
        self.check_xref();
        self.check_tail();
        self.doc
    }

    fn header_version(&self) -> Option<String> {
        let window = &self.data[..self.data.len().min(HEADER_WINDOW)];
        let at = memmem::find(window, b"%PDF-")? + 5;
        let version: String = self.data[at..]
            .iter()
            .take(8)
            .take_while(|b| b.is_ascii_digit() || **b == b'.')
            .map(|&b| char::from(b))
            .collect();
        (!version.is_empty()).then_some(version)
    }

    fn is_token(&self, start: usize, len: usize) -> bool {
        let before = start == 0 || !is_regular(self.data[start - 1]);
        let end = start + len;
        let after = end >= self.data.len() || !is_regular(self.data[end]);
        before && after
    }

    fn collect_events(&self) -> Vec<Event> {
        let d = self.data;
        let none = ObjectId::new(0, 0);
        let mut events = Vec::new();
        for p in memmem::find_iter(d, b"obj") {
            if let Some((start, id)) = self.object_header_before(p) {
                events.push(Event {
                    start,
                    kind: EventKind::Object,
                    body: p + 3,
                    id,
                });
            }
        }
        let keywords: [(&[u8], EventKind); 3] = [
            (b"xref", EventKind::Xref),
            (b"trailer", EventKind::Trailer),
            (b"startxref", EventKind::StartXref),
        ];
        for (word, kind) in keywords {
            for p in memmem::find_iter(d, word) {
                if self.is_token(p, word.len()) {
                    events.push(Event {
                        start: p,
                        kind,
                        body: p + word.len(),
                        id: none,
                    });
                }
            }
        }
        for p in memmem::find_iter(d, b"%%EOF") {
            events.push(Event {
                start: p,
                kind: EventKind::Eof,
                body: p + 5,
                id: none,
            });
        }
        events.sort_unstable();
        events
    }

    /// Given the position of an `obj` keyword, checks for `N G` before it.
    fn object_header_before(&self, p: usize) -> Option<(usize, ObjectId)> {
        let d = self.data;
        if !self.is_token(p, 3) || p == 0 || !is_whitespace(d[p - 1]) {
            return None;
        }
        let mut i = p;
        while i > 0 && is_whitespace(d[i - 1]) {
            i -= 1;
        }
        let gen_end = i;
        while i > 0 && d[i - 1].is_ascii_digit() {
            i -= 1;
        }
        if i == gen_end || i == 0 || !is_whitespace(d[i - 1]) {
            return None;
        }
        let (generation, _) = read_unsigned(d, i)?;
        while i > 0 && is_whitespace(d[i - 1]) {
            i -= 1;
        }
        let num_end = i;
        while i > 0 && d[i - 1].is_ascii_digit() {
            i -= 1;
        }
        if i == num_end || (i > 0 && is_regular(d[i - 1])) {
            return None;
        }
        let (number, _) = read_unsigned(d, i)?;
        let id = ObjectId::new(u32::try_from(number).ok()?, u16::try_from(generation).ok()?);
        Some((i, id))
    }

    fn parse_indirect(&mut self, event: Event) -> usize {
        let mut lexer = Lexer::new(self.data, event.body, self.options.max_depth);
        let object = match lexer.parse_object() {
            Ok(o) => o,
            Err(e) => {
                let detail = format!("object {}: {}", event.id, e.detail);
                self.diag(e.offset, e.kind, detail);
                return event.body;
            }
        };
        let (object, end) = match object {
            PdfObject::Dictionary(dict) if lexer.eat_keyword(b"stream") => {
                let (stream, end) = self.read_stream(dict, lexer.pos, event.id);
                (PdfObject::Stream(stream), end)
            }
            other => (other, lexer.pos),
        };
        let mut lexer = Lexer::new(self.data, end, self.options.max_depth);
        let end = if lexer.eat_keyword(b"endobj") {
            lexer.pos
        } else {
            lexer.skip_whitespace();
            if lexer.pos < self.data.len() {
                let detail = format!("object {} not terminated by endobj", event.id);
                self.diag(lexer.pos, DiagnosticKind::GarbageBytes, detail);
            }
            end
        };
        if self.doc.objects.insert(event.id, object).is_some() {
            let detail = format!("object {} redefined; last definition wins", event.id);
            self.diag(event.start, DiagnosticKind::DuplicateObject, detail);
        }
        end
    }

    /// Locates stream data after the `stream` keyword. Returns the stream
    /// and the position after `endstream`.
    fn read_stream(
        &mut self,
        dict: super::object::Dictionary,
        after_keyword: usize,
        id: ObjectId,
    ) -> (PdfStream, usize) {
        let d = self.data;
        let mut start = after_keyword;
        if d.get(start) == Some(&b'\r') {
            start += 1;
        }
        if d.get(start) == Some(&b'\n') {
            start += 1;
        }
        let declared = self.declared_length(&dict);
        let trusted_end = declared.and_then(|len| {
            let end = start.checked_add(len)?;
            if end > d.len() {
                return None;
            }
            let mut k = end;
            while k < d.len() && is_whitespace(d[k]) {
                k += 1;
            }
            d[k..].starts_with(b"endstream").then_some((end, k + 9))
        });
        let (end, after) = match trusted_end {
            Some(found) => found,
            None => {
                let recovered = memmem::find(&d[start..], b"endstream").map(|rel| {
                    let mut end = start + rel;
                    if end > start && d[end - 1] == b'\n' {
                        end -= 1;
                    }
                    if end > start && d[end - 1] == b'\r' {
                        end -= 1;
                    }
                    (end, start + rel + 9)
                });
                let detail = match declared {
                    Some(len) => format!("object {id}: /Length {len} inconsistent with data"),
                    None => format!("object {id}: missing or unresolvable /Length"),
                };
                self.diag(start, DiagnosticKind::BadLength, detail);
                recovered.unwrap_or_else(|| {
                    self.diag(d.len(), DiagnosticKind::Truncated, format!("object {id}: no endstream"));
                    (d.len(), d.len())
                })
            }
        };
        let stream = PdfStream {
            dict,
            raw: d[start..end].to_vec(),
            raw_offset: start,
            content: StreamContent::DecodeFailed,
        };
        (stream, after)
    }

    fn declared_length(&self, dict: &super::object::Dictionary) -> Option<usize> {
        let value = match dict.get("Length")? {
            PdfObject::Reference(target) => {
                let body = *self.headers.get(target)?.last()?;
                let mut lexer = Lexer::new(self.data, body, 1);
                lexer.parse_object().ok()?.as_i64()?
            }
            other => other.as_i64()?,
        };
        usize::try_from(value).ok()
    }

    fn parse_xref_table(&mut self, event: Event) -> usize {
        let d = self.data;
        self.doc.xref_section_count += 1;
        let mut table = XrefTable {
            offset: event.start,
            entries: Vec::new(),
        };
        let mut lexer = Lexer::new(d, event.body, 1);
        loop {
            lexer.skip_whitespace();
            let Some((first, p)) = read_unsigned(d, lexer.pos) else {
                break;
            };
            lexer.pos = p;
            lexer.skip_whitespace();
            let Some((count, p)) = read_unsigned(d, lexer.pos) else {
                self.diag(lexer.pos, DiagnosticKind::BadXref, "malformed subsection header");
                break;
            };
            lexer.pos = p;
            if count > (d.len() - lexer.pos) as u64 / 18 + 1 {
                self.diag(lexer.pos, DiagnosticKind::BadXref, "subsection count exceeds file size");
                break;
            }
            for k in 0..count {
                lexer.skip_whitespace();
                let entry = read_unsigned(d, lexer.pos).and_then(|(offset, p)| {
                    let mut l = Lexer::new(d, p, 1);
                    l.skip_whitespace();
                    let (_gen, p) = read_unsigned(d, l.pos)?;
                    l.pos = p;
                    let kw = l.peek_keyword();
                    let in_use = match kw {
                        b"n" => true,
                        b"f" => false,
                        _ => return None,
                    };
                    l.pos += 1;
                    Some((offset, in_use, l.pos))
                });
                match entry {
                    Some((offset, in_use, p)) => {
                        lexer.pos = p;
                        if in_use {
                            let number = first.saturating_add(k).min(u64::from(u32::MAX)) as u32;
                            table.entries.push((number, offset));
                        }
                    }
                    None => {
                        self.diag(lexer.pos, DiagnosticKind::BadXref, "malformed xref entry");
                        self.xref_tables.push(table);
                        return lexer.pos;
                    }
                }
            }
        }
        self.xref_tables.push(table);
        lexer.pos
    }

    fn parse_trailer(&mut self, event: Event) -> usize {
        let mut lexer = Lexer::new(self.data, event.body, self.options.max_depth);
        match lexer.parse_object() {
            Ok(PdfObject::Dictionary(dict)) => {
                self.doc.trailers.push(Trailer {
                    offset: event.start,
                    dict,
                    source: TrailerSource::Keyword,
                });
                lexer.pos
            }
            Ok(_) => {
                self.diag(event.body, DiagnosticKind::BadXref, "trailer is not a dictionary");
                lexer.pos
            }
            Err(e) => {
                self.diag(e.offset, e.kind, format!("trailer: {}", e.detail));
                event.body
            }
        }
    }

    fn parse_startxref(&mut self, event: Event) -> usize {
        let mut lexer = Lexer::new(self.data, event.body, 1);
        lexer.skip_whitespace();
        match read_unsigned(self.data, lexer.pos) {
            Some((offset, end)) => {
                self.doc.startxref_offsets.push(offset as usize);
                end
            }
            None => {
                self.diag(event.start, DiagnosticKind::BadXref, "startxref without offset");
                event.body
            }
        }
    }

    fn detect_encryption(&mut self) {
        let in_trailer = self.doc.trailers.iter().any(|t| t.dict.contains_key("Encrypt"));
        let in_xref_stream = self.doc.objects.values().any(|o| {
            o.as_stream()
                .is_some_and(|s| s.dict.has_name("Type", "XRef") && s.dict.contains_key("Encrypt"))
        });
        self.doc.encrypted = in_trailer || in_xref_stream;
    }

    fn collect_xref_streams(&mut self) {
        for (id, obj) in &self.doc.objects {
            if let Some(s) = obj.as_stream() {
                if s.dict.has_name("Type", "XRef") {
                    self.doc.xref_section_count += 1;
                    self.doc.trailers.push(Trailer {
                        offset: s.raw_offset,
                        dict: s.dict.clone(),
                        source: TrailerSource::XRefStream(*id),
                    });
                }
            }
        }
        self.doc.trailers.sort_by_key(|t| t.offset);
    }

    fn decode_streams(&mut self) {
        let encrypted = self.doc.encrypted;
        let mut diags = Vec::new();
        for (id, obj) in self.doc.objects.iter_mut() {
            let PdfObject::Stream(stream) = obj else {
                continue;
            };
            if encrypted && !stream.dict.has_name("Type", "XRef") {
                stream.content = StreamContent::Encrypted;
                continue;
            }
            let filters = filter_names(&stream.dict);
            let params = stream.dict.get("DecodeParms").or_else(|| stream.dict.get("DP"));
            stream.content = match decode_stream(&stream.raw, &filters, params) {
                Ok(bytes) => StreamContent::Decoded(bytes),
                Err(err) => {
                    let kind = match err {
                        FilterError::Unsupported(_) => DiagnosticKind::UnknownFilter,
                        FilterError::Corrupt { .. } => DiagnosticKind::DecodeError,
                    };
                    diags.push((stream.raw_offset, kind, format!("object {id}: {err}")));
                    StreamContent::DecodeFailed
                }
            };
        }
        for (offset, kind, detail) in diags {
            self.diag(offset, kind, detail);
        }
    }

    fn expand_object_streams(&mut self) {
        let mut found: BTreeMap<ObjectId, PdfObject> = BTreeMap::new();
        let mut diags = Vec::new();
        for (id, obj) in &self.doc.objects {
            let Some(stream) = obj.as_stream() else {
                continue;
            };
            if !stream.dict.has_name("Type", "ObjStm") {
                continue;
            }
            let Some(data) = stream.decoded() else {
                continue;
            };
            let n = stream.dict.get("N").and_then(PdfObject::as_i64).unwrap_or(0);
            let first = stream.dict.get("First").and_then(PdfObject::as_i64).unwrap_or(0);
            let (Ok(n), Ok(first)) = (usize::try_from(n), usize::try_from(first)) else {
                diags.push((stream.raw_offset, DiagnosticKind::GarbageBytes, format!("object stream {id}: negative /N or /First")));
                continue;
            };
            let mut lexer = Lexer::new(data, 0, 1);
            let mut index = Vec::new();
            for _ in 0..n.min(data.len()) {
                lexer.skip_whitespace();
                let Some((num, p)) = read_unsigned(data, lexer.pos) else {
                    break;
                };
                lexer.pos = p;
                lexer.skip_whitespace();
                let Some((off, p)) = read_unsigned(data, lexer.pos) else {
                    break;
                };
                lexer.pos = p;
                index.push((num, off as usize));
            }
            if index.len() != n {
                let detail = format!("object stream {id}: index lists {} of {n} objects", index.len());
                diags.push((stream.raw_offset, DiagnosticKind::GarbageBytes, detail));
            }
            for (num, off) in index {
                let Ok(num) = u32::try_from(num) else {
                    continue;
                };
                let child = ObjectId::new(num, 0);
                let Some(at) = first.checked_add(off).filter(|&at| at < data.len()) else {
                    diags.push((stream.raw_offset, DiagnosticKind::GarbageBytes, format!("object stream {id}: offset of {child} out of range")));
                    continue;
                };
                match Lexer::new(data, at, self.options.max_depth).parse_object() {
                    Ok(value) => {
                        if self.doc.objects.contains_key(&child) || found.contains_key(&child) {
                            let detail = format!("object {child} in object stream {id} collides with an existing definition");
                            diags.push((stream.raw_offset, DiagnosticKind::DuplicateObject, detail));
                        } else {
                            found.insert(child, value);
                        }
                    }
                    Err(e) => {
                        let detail = format!("object {child} in object stream {id}: {}", e.detail);
                        diags.push((stream.raw_offset, e.kind, detail));
                    }
                }
            }
        }
        self.doc.objects.extend(found);
        for (offset, kind, detail) in diags {
            self.diag(offset, kind, detail);
        }
    }

    fn check_xref(&mut self) {
        let starts = &self.header_starts;
        let mut diags = Vec::new();
        for table in &self.xref_tables {
            let bad = table
                .entries
                .iter()
                .filter(|(num, offset)| {
                    usize::try_from(*offset)
                        .ok()
                        .and_then(|o| starts.get(&o))
                        .is_none_or(|id| id.number != *num)
                })
                .count();
            if bad > 0 {
                let detail = format!("{bad} of {} in-use entries do not point at their object", table.entries.len());
                diags.push((table.offset, detail));
            }
        }
        for &target in &self.doc.startxref_offsets {
            let ok = target < self.data.len()
                && (self.data[target..].starts_with(b"xref")
                    || starts.get(&target).is_some_and(|id| {
                        self.doc
                            .objects
                            .get(id)
                            .and_then(PdfObject::as_stream)
                            .is_some_and(|s| s.dict.has_name("Type", "XRef"))
                    }));
            if !ok {
                diags.push((target, format!("startxref offset {target} does not point at a cross-reference section")));
            }
        }
        for (offset, detail) in diags {
            self.diag(offset, DiagnosticKind::BadXref, detail);
        }
    }

    fn check_tail(&mut self) {
        match self.doc.eof_marker_offsets.last() {
            None => {
                let end = self.data.len();
                self.diag(end, DiagnosticKind::Truncated, "no %%EOF marker");
            }
            Some(&last) => {
                let tail = &self.data[last + 5..];
                if let Some(rel) = tail.iter().position(|b| !is_whitespace(*b)) {
                    let detail = format!("{} bytes after final %%EOF", tail.len());
                    self.diag(last + 5 + rel, DiagnosticKind::GarbageBytes, detail);
                }
            }
        }
    }
}
