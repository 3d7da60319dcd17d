use std::collections::BTreeMap;

use super::diagnostics::{DiagnosticKind, ParseDiagnostic};
use super::object::{canonical_name, walk_dict, Dictionary, ObjectId, PdfObject, Visit};

/// Where a trailer dictionary came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrailerSource {
    /// A classic `trailer << ... >>` section.
    Keyword,
    /// The dictionary of a cross-reference stream (`/Type /XRef`). The same
    /// dictionary is also present in the object map.
    XRefStream(ObjectId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trailer {
    pub offset: usize,
    pub dict: Dictionary,
    pub source: TrailerSource,
}

/// Object graph recovered from a (possibly malformed) PDF file.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfDocument {
    pub header_version: Option<String>,
    pub objects: BTreeMap<ObjectId, PdfObject>,
    /// Trailers in file order.
    pub trailers: Vec<Trailer>,
    pub xref_section_count: usize,
    /// Offsets declared after each `startxref` keyword.
    pub startxref_offsets: Vec<usize>,
    /// Positions of each `%%EOF` marker.
    pub eof_marker_offsets: Vec<usize>,
    pub total_size: usize,
    pub diagnostics: Vec<ParseDiagnostic>,
    /// An `/Encrypt` entry was found in a trailer; strings and streams were
    /// left undecoded.
    pub encrypted: bool,
}

const MAX_REFERENCE_HOPS: usize = 32;

impl PdfDocument {
    pub(crate) fn empty(total_size: usize) -> Self {
        Self {
            header_version: None,
            objects: BTreeMap::new(),
            trailers: Vec::new(),
            xref_section_count: 0,
            startxref_offsets: Vec::new(),
            eof_marker_offsets: Vec::new(),
            total_size,
            diagnostics: Vec::new(),
            encrypted: false,
        }
    }

    pub fn trailer_dicts(&self) -> impl Iterator<Item = &Dictionary> {
        self.trailers.iter().map(|t| &t.dict)
    }

    pub fn get(&self, id: ObjectId) -> Option<&PdfObject> {
        self.objects.get(&id)
    }

    /// Follows indirect references until a direct object is reached.
    /// Dangling or cyclic references resolve to `None`.
    pub fn resolve<'a>(&'a self, mut obj: &'a PdfObject) -> Option<&'a PdfObject> {
        for _ in 0..MAX_REFERENCE_HOPS {
            match obj {
                PdfObject::Reference(id) => obj = self.objects.get(id)?,
                other => return Some(other),
            }
        }
        None
    }

    /// Looks up `key` in the last trailer that defines it.
    pub fn trailer_entry(&self, key: &str) -> Option<&PdfObject> {
        self.trailers.iter().rev().find_map(|t| t.dict.get(key))
    }

    /// The document catalog (`/Root`).
    pub fn catalog(&self) -> Option<&Dictionary> {
        self.trailer_entry("Root")
            .and_then(|r| self.resolve(r))
            .and_then(PdfObject::as_dict)
    }

    /// The document information dictionary (`/Info`).
    pub fn info(&self) -> Option<&Dictionary> {
        self.trailer_entry("Info")
            .and_then(|r| self.resolve(r))
            .and_then(PdfObject::as_dict)
    }

    pub fn count_diagnostics(&self, kind: DiagnosticKind) -> usize {
        self.diagnostics.iter().filter(|d| d.kind == kind).count()
    }

    /// Counts how often `name` appears as a dictionary key or a name value
    /// anywhere in the object graph, including objects recovered from
    /// object streams and classic trailers. `name` may be given with or
    /// without its leading slash; escaped spellings in the file were
    /// already canonicalized during parsing.
    pub fn iter_name_occurrences(&self, name: &str) -> usize {
        let target = canonical_name(name);
        let mut count = 0usize;
        let mut visit = |v: Visit<'_>| {
            let n = match v {
                Visit::Key(k) => k,
                Visit::Object(PdfObject::Name(n)) => n,
                Visit::Object(_) => return,
            };
            if n.as_bytes() == target {
                count += 1;
            }
        };
        for obj in self.objects.values() {
            obj.walk(&mut visit);
        }
        for trailer in &self.trailers {
            if trailer.source == TrailerSource::Keyword {
                walk_dict(&trailer.dict, &mut visit);
            }
        }
        count
    }

    /// Every direct object in the graph, in key order.
    pub fn walk_objects<'a>(&'a self, visit: &mut dyn FnMut(Visit<'a>)) {
        for obj in self.objects.values() {
            obj.walk(visit);
        }
    }
}
