//! Tolerant PDF parsing.
//!
//! [`parse_pdf`] accepts any byte sequence and always returns a
//! [`PdfDocument`]. Anomalies (broken xref, lying `/Length`, unknown
//! filters, duplicate objects, trailing garbage) are recorded as
//! [`ParseDiagnostic`]s instead of aborting, since malicious files are
//! frequently malformed on purpose.

mod diagnostics;
mod document;
pub mod filters;
mod lexer;
mod object;
mod parser;

pub use diagnostics::{DiagnosticKind, ParseDiagnostic};
pub use document::{PdfDocument, Trailer, TrailerSource};
pub use filters::{decode_stream, FilterError};
pub use object::{
    Dictionary, Name, ObjectId, PdfObject, PdfStream, PdfString, StreamContent, StringKind, Visit,
};
pub use parser::{parse_pdf, parse_pdf_with, ParseOptions};
