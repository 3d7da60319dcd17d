use std::fmt;

/// Category of a parse anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticKind {
    BadXref,
    BadLength,
    UnknownFilter,
    DecodeError,
    DuplicateObject,
    GarbageBytes,
    Truncated,
    NestingTooDeep,
}

impl DiagnosticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticKind::BadXref => "bad-xref",
            DiagnosticKind::BadLength => "bad-length",
            DiagnosticKind::UnknownFilter => "unknown-filter",
            DiagnosticKind::DecodeError => "decode-error",
            DiagnosticKind::DuplicateObject => "duplicate-object",
            DiagnosticKind::GarbageBytes => "garbage-bytes",
            DiagnosticKind::Truncated => "truncated",
            DiagnosticKind::NestingTooDeep => "nesting-too-deep",
        }
    }
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An anomaly found while parsing. `offset` never exceeds the input length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub offset: usize,
    pub kind: DiagnosticKind,
    pub detail: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{} {}: {}", self.offset, self.kind, self.detail)
    }
}
