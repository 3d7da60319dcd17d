use std::fmt;

/// Identifier of the compiled-in feature layout.
pub const SCHEMA_ID: &str = "pdfmlp-v1";

/// Number of features per document.
pub const FEATURE_COUNT: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Structure,
    ObjectProperties,
    Metadata,
    ContentStats,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Structure,
        Category::ObjectProperties,
        Category::Metadata,
        Category::ContentStats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Structure => "structure",
            Category::ObjectProperties => "object-properties",
            Category::Metadata => "metadata",
            Category::ContentStats => "content-stats",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDescriptor {
    pub name: &'static str,
    pub category: Category,
    pub description: &'static str,
    pub unit: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub schema_id: &'static str,
    pub descriptors: &'static [FeatureDescriptor],
}

impl FeatureSchema {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.descriptors.iter().position(|d| d.name == name)
    }

    /// Number of descriptors per category, in [`Category::ALL`] order.
    pub fn category_histogram(&self) -> [(Category, usize); 4] {
        Category::ALL.map(|c| (c, self.descriptors.iter().filter(|d| d.category == c).count()))
    }
}

/// Returns the compiled-in schema.
pub fn describe_schema() -> FeatureSchema {
    FeatureSchema {
        schema_id: SCHEMA_ID,
        descriptors: &DESCRIPTORS,
    }
}

const fn d(
    name: &'static str,
    category: Category,
    description: &'static str,
    unit: &'static str,
) -> FeatureDescriptor {
    FeatureDescriptor {
        name,
        category,
        description,
        unit,
    }
}

use Category::{ContentStats as C, Metadata as M, ObjectProperties as O, Structure as S};

pub(crate) static DESCRIPTORS: [FeatureDescriptor; FEATURE_COUNT] = [
    d("file_size", S, "Total file size", "bytes"),
    d("header_version", S, "Numeric %PDF- header version, 0 when absent", "version"),
    d("object_count", S, "Indirect objects recovered, including object-stream members", "count"),
    d("stream_count", S, "Stream objects", "count"),
    d("xref_sections", S, "Cross-reference tables plus xref streams", "count"),
    d("trailer_count", S, "Trailer dictionaries (keyword and xref-stream)", "count"),
    d("startxref_count", S, "startxref keywords with a readable offset", "count"),
    d("eof_markers", S, "%%EOF markers", "count"),
    d("bytes_after_eof", S, "Bytes following the final %%EOF and its line ending", "bytes"),
    d("max_nesting_depth", S, "Deepest array/dictionary nesting in any object", "levels"),
    d("duplicate_objects", S, "Object redefinitions and object-stream collisions", "count"),
    d("diagnostic_count", S, "Parser diagnostics of any kind", "count"),
    d("kw_javascript", O, "Occurrences of /JavaScript", "count"),
    d("kw_js", O, "Occurrences of /JS", "count"),
    d("kw_openaction", O, "Occurrences of /OpenAction", "count"),
    d("kw_aa", O, "Occurrences of /AA (additional actions)", "count"),
    d("kw_launch", O, "Occurrences of /Launch", "count"),
    d("kw_embeddedfile", O, "Occurrences of /EmbeddedFile", "count"),
    d("kw_richmedia", O, "Occurrences of /RichMedia", "count"),
    d("kw_acroform", O, "Occurrences of /AcroForm", "count"),
    d("kw_xfa", O, "Occurrences of /XFA", "count"),
    d("kw_uri", O, "Occurrences of /URI", "count"),
    d("kw_goto_remote", O, "Occurrences of /GoToR and /GoToE", "count"),
    d("kw_objstm", O, "Occurrences of /ObjStm", "count"),
    d("kw_encrypt", O, "Occurrences of /Encrypt", "count"),
    d("kw_names", O, "Occurrences of /Names", "count"),
    d("kw_submitform", O, "Occurrences of /SubmitForm", "count"),
    d("kw_action", O, "Occurrences of /Action", "count"),
    d("entropy_file", C, "Entropy of the whole file", "bits/byte"),
    d("entropy_streams", C, "Entropy of all successfully decoded stream data", "bits/byte"),
    d("entropy_outside_streams", C, "Entropy of file bytes outside stream data", "bits/byte"),
    d("entropy_stream_max", C, "Highest per-stream entropy (decoded, else raw)", "bits/byte"),
    d("stream_size_mean", C, "Mean raw stream length", "bytes"),
    d("stream_size_max", C, "Largest raw stream length", "bytes"),
    d("stream_byte_ratio", C, "Raw stream bytes divided by file size", "ratio"),
    d("filter_flate", C, "FlateDecode filter uses", "count"),
    d("filter_ascii", C, "ASCIIHexDecode and ASCII85Decode filter uses", "count"),
    d("filter_other", C, "Uses of any other filter", "count"),
    d("filter_cascades", C, "Streams declaring two or more filters", "count"),
    d("decode_failures", C, "Streams whose filters failed or were unsupported", "count"),
    d("info_hex_run_max", C, "Longest run of hex digits in an Info value", "chars"),
    d(
        "js_obfuscation_score",
        C,
        "Occurrences of eval, unescape, String.fromCharCode and charCodeAt in /JS code (heuristic proxy)",
        "count",
    ),
    d("page_count", M, "Objects of /Type /Page, else /Count of the root page tree", "count"),
    d("info_present", M, "Document Info dictionary present", "flag"),
    d("info_bytes", M, "Total length of Info string values", "bytes"),
    d("info_long_values", M, "Info string values longer than 256 bytes", "count"),
    d("xmp_present", M, "XMP metadata stream present", "flag"),
    d("js_present", M, "Any /JavaScript or /JS present", "flag"),
];
