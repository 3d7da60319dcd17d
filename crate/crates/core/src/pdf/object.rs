//! PDF object model.

use std::fmt;

/// `(object number, generation)` of an indirect object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId {
    pub number: u32,
    pub generation: u16,
}

impl ObjectId {
    pub const fn new(number: u32, generation: u16) -> Self {
        Self { number, generation }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} R", self.number, self.generation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StringKind {
    Literal,
    Hex,
}

/// A string object. `bytes` holds the value after escape / hex decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfString {
    pub bytes: Vec<u8>,
    pub kind: StringKind,
}

/// A name with `#xx` escapes already resolved, stored without the leading `/`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(pub Vec<u8>);

impl Name {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Compares against a name given with or without its leading slash.
    pub fn is(&self, other: &str) -> bool {
        self.0 == canonical_name(other)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}", String::from_utf8_lossy(&self.0))
    }
}

pub(crate) fn canonical_name(name: &str) -> &[u8] {
    name.strip_prefix('/').unwrap_or(name).as_bytes()
}

/// Dictionary preserving source order. Duplicate keys are kept so that
/// keyword counting sees every occurrence; lookups return the last one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dictionary {
    entries: Vec<(Name, PdfObject)>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: Name, value: PdfObject) {
        self.entries.push((key, value));
    }

    pub fn get(&self, key: &str) -> Option<&PdfObject> {
        let key = canonical_name(key);
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k.0 == key)
            .map(|(_, v)| v)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn get_name(&self, key: &str) -> Option<&Name> {
        self.get(key).and_then(PdfObject::as_name)
    }

    /// True when `key` maps to the name `value`.
    pub fn has_name(&self, key: &str, value: &str) -> bool {
        self.get_name(key).is_some_and(|n| n.is(value))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &PdfObject)> {
        self.entries.iter().map(|(k, v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outcome of running a stream's declared filters.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamContent {
    /// Every filter decoded (or none were declared).
    Decoded(Vec<u8>),
    /// A filter was unsupported or its data was corrupt.
    DecodeFailed,
    /// The document is encrypted; decoding was not attempted.
    Encrypted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdfStream {
    pub dict: Dictionary,
    pub raw: Vec<u8>,
    /// Byte range of `raw` within the source file, when the stream came
    /// directly from the file rather than from an object stream.
    pub raw_offset: usize,
    pub content: StreamContent,
}

impl PdfStream {
    pub fn decoded(&self) -> Option<&[u8]> {
        match &self.content {
            StreamContent::Decoded(bytes) => Some(bytes),
            _ => None,
        }
    }

    pub fn decode_failed(&self) -> bool {
        matches!(self.content, StreamContent::DecodeFailed)
    }

    /// Filter names in declared order. Accepts a single name or an array.
    pub fn filters(&self) -> Vec<Name> {
        filter_names(&self.dict)
    }
}

pub(crate) fn filter_names(dict: &Dictionary) -> Vec<Name> {
    match dict.get("Filter") {
        Some(PdfObject::Name(n)) => vec![n.clone()],
        Some(PdfObject::Array(items)) => items
            .iter()
            .filter_map(|o| o.as_name().cloned())
            .collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PdfObject {
    Null,
    Boolean(bool),
    Integer(i64),
    Real(f64),
    String(PdfString),
    Name(Name),
    Array(Vec<PdfObject>),
    Dictionary(Dictionary),
    Stream(PdfStream),
    Reference(ObjectId),
}

impl PdfObject {
    pub fn as_name(&self) -> Option<&Name> {
        match self {
            PdfObject::Name(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&Dictionary> {
        match self {
            PdfObject::Dictionary(d) => Some(d),
            PdfObject::Stream(s) => Some(&s.dict),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            PdfObject::Integer(i) => Some(*i),
            PdfObject::Real(r) if r.is_finite() => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_reference(&self) -> Option<ObjectId> {
        match self {
            PdfObject::Reference(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_stream(&self) -> Option<&PdfStream> {
        match self {
            PdfObject::Stream(s) => Some(s),
            _ => None,
        }
    }

    /// Nesting depth of containers; scalars have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            PdfObject::Array(items) => 1 + items.iter().map(Self::depth).max().unwrap_or(0),
            PdfObject::Dictionary(d) => 1 + dict_depth(d),
            PdfObject::Stream(s) => 1 + dict_depth(&s.dict),
            _ => 0,
        }
    }

    /// Pre-order walk over this object and every nested value.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(Visit<'a>)) {
        visit(Visit::Object(self));
        match self {
            PdfObject::Array(items) => items.iter().for_each(|o| o.walk(visit)),
            PdfObject::Dictionary(d) => walk_dict(d, visit),
            PdfObject::Stream(s) => walk_dict(&s.dict, visit),
            _ => {}
        }
    }
}

fn dict_depth(d: &Dictionary) -> usize {
    d.iter().map(|(_, v)| v.depth()).max().unwrap_or(0)
}

/// Items reported by [`PdfObject::walk`].
#[derive(Debug, Clone, Copy)]
pub enum Visit<'a> {
    Key(&'a Name),
    Object(&'a PdfObject),
}

pub(crate) fn walk_dict<'a>(d: &'a Dictionary, visit: &mut dyn FnMut(Visit<'a>)) {
    for (k, v) in d.iter() {
        visit(Visit::Key(k));
        v.walk(visit);
    }
}
