//! Byte-level tokenizer and direct-object parser.
//!
//! Streams are not handled here: the caller sees a dictionary followed by
//! the `stream` keyword and takes over, since locating the data needs
//! `/Length` resolution against the whole file.

use super::diagnostics::DiagnosticKind;
use super::object::{Dictionary, Name, ObjectId, PdfObject, PdfString, StringKind};

pub(crate) fn is_whitespace(b: u8) -> bool {
    matches!(b, b'\0' | b'\t' | b'\n' | b'\x0c' | b'\r' | b' ')
}

pub(crate) fn is_delimiter(b: u8) -> bool {
    matches!(
        b,
        b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%'
    )
}

pub(crate) fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LexError {
    pub offset: usize,
    pub kind: DiagnosticKind,
    pub detail: String,
}

impl LexError {
    fn truncated(offset: usize, what: &str) -> Self {
        Self {
            offset,
            kind: DiagnosticKind::Truncated,
            detail: format!("input ended inside {what}"),
        }
    }

    fn garbage(offset: usize, detail: impl Into<String>) -> Self {
        Self {
            offset,
            kind: DiagnosticKind::GarbageBytes,
            detail: detail.into(),
        }
    }
}

pub(crate) struct Lexer<'a> {
    data: &'a [u8],
    pub pos: usize,
    max_depth: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(data: &'a [u8], pos: usize, max_depth: usize) -> Self {
        Self {
            data,
            pos,
            max_depth,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    pub fn skip_whitespace(&mut self) {
        while let Some(b) = self.peek() {
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                while let Some(c) = self.peek() {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Reads a run of regular characters without consuming it.
    pub fn peek_keyword(&mut self) -> &'a [u8] {
        self.skip_whitespace();
        let start = self.pos;
        let mut end = start;
        while end < self.data.len() && is_regular(self.data[end]) {
            end += 1;
        }
        &self.data[start..end]
    }

    /// Consumes `word` if it is the next token.
    pub fn eat_keyword(&mut self, word: &[u8]) -> bool {
        if self.peek_keyword() == word {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    pub fn parse_object(&mut self) -> Result<PdfObject, LexError> {
        self.parse_at_depth(0)
    }

    fn parse_at_depth(&mut self, depth: usize) -> Result<PdfObject, LexError> {
        self.skip_whitespace();
        let start = self.pos;
        let b = self
            .peek()
            .ok_or_else(|| LexError::truncated(start, "object"))?;
        match b {
            b'/' => Ok(PdfObject::Name(self.parse_name())),
            b'(' => self.parse_literal_string(),
            b'<' if self.data.get(start + 1) == Some(&b'<') => {
                self.check_depth(depth)?;
                self.parse_dictionary(depth).map(PdfObject::Dictionary)
            }
            b'<' => self.parse_hex_string(),
            b'[' => {
                self.check_depth(depth)?;
                self.parse_array(depth)
            }
            b'+' | b'-' | b'.' | b'0'..=b'9' => self.parse_number_or_reference(),
            _ => {
                let word = self.peek_keyword();
                let obj = match word {
                    b"null" => PdfObject::Null,
                    b"true" => PdfObject::Boolean(true),
                    b"false" => PdfObject::Boolean(false),
                    b"" => {
                        return Err(LexError::garbage(
                            start,
                            format!("unexpected delimiter 0x{b:02x}"),
                        ))
                    }
                    other => {
                        return Err(LexError::garbage(
                            start,
                            format!("unexpected token {:?}", String::from_utf8_lossy(other)),
                        ))
                    }
                };
                self.pos += word.len();
                Ok(obj)
            }
        }
    }

    fn check_depth(&self, depth: usize) -> Result<(), LexError> {
        if depth >= self.max_depth {
            Err(LexError {
                offset: self.pos,
                kind: DiagnosticKind::NestingTooDeep,
                detail: format!("containers nested deeper than {}", self.max_depth),
            })
        } else {
            Ok(())
        }
    }

    pub fn parse_dictionary(&mut self, depth: usize) -> Result<Dictionary, LexError> {
        self.pos += 2;
        let mut dict = Dictionary::new();
        loop {
            self.skip_whitespace();
            match self.peek() {
                None => return Err(LexError::truncated(self.pos, "dictionary")),
                Some(b'>') => {
                    if self.data.get(self.pos + 1) == Some(&b'>') {
                        self.pos += 2;
                        return Ok(dict);
                    }
                    return Err(LexError::garbage(self.pos, "single '>' in dictionary"));
                }
                Some(b'/') => {
                    let key = self.parse_name();
                    self.skip_whitespace();
                    // A key directly followed by `>>` has no value; treat it as null.
                    if self.data[self.pos..].starts_with(b">>") {
                        dict.insert(key, PdfObject::Null);
                        continue;
                    }
                    let value = self.parse_at_depth(depth + 1)?;
                    dict.insert(key, value);
                }
                Some(_) => {
                    return Err(LexError::garbage(self.pos, "dictionary key is not a name"));
                }
            }
        }
    }

    fn parse_array(&mut self, depth: usize) -> Result<PdfObject, LexError> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_whitespace();
            match self.peek() {
                None => return Err(LexError::truncated(self.pos, "array")),
                Some(b']') => {
                    self.pos += 1;
                    return Ok(PdfObject::Array(items));
                }
                Some(_) => items.push(self.parse_at_depth(depth + 1)?),
            }
        }
    }

    fn parse_name(&mut self) -> Name {
        self.pos += 1;
        let mut out = Vec::new();
        while let Some(b) = self.peek() {
            if !is_regular(b) {
                break;
            }
            if b == b'#' {
                let hi = self.data.get(self.pos + 1).and_then(|c| hex_value(*c));
                let lo = self.data.get(self.pos + 2).and_then(|c| hex_value(*c));
                if let (Some(hi), Some(lo)) = (hi, lo) {
                    out.push(hi << 4 | lo);
                    self.pos += 3;
                    continue;
                }
            }
            out.push(b);
            self.pos += 1;
        }
        Name(out)
    }

    fn parse_literal_string(&mut self) -> Result<PdfObject, LexError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = Vec::new();
        let mut nesting = 1usize;
        loop {
            let b = self
                .peek()
                .ok_or_else(|| LexError::truncated(start, "literal string"))?;
            self.pos += 1;
            match b {
                b'(' => {
                    nesting += 1;
                    out.push(b);
                }
                b')' => {
                    nesting -= 1;
                    if nesting == 0 {
                        break;
                    }
                    out.push(b);
                }
                b'\\' => {
                    let Some(e) = self.peek() else {
                        return Err(LexError::truncated(start, "literal string"));
                    };
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(8),
                        b'f' => out.push(12),
                        b'\n' => {}
                        b'\r' => {
                            if self.peek() == Some(b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'0'..=b'7' => {
                            let mut value = u32::from(e - b'0');
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        value = value * 8 + u32::from(d - b'0');
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push((value & 0xff) as u8);
                        }
                        other => out.push(other),
                    }
                }
                other => out.push(other),
            }
        }
        Ok(PdfObject::String(PdfString {
            bytes: out,
            kind: StringKind::Literal,
        }))
    }

    fn parse_hex_string(&mut self) -> Result<PdfObject, LexError> {
        let start = self.pos;
        self.pos += 1;
        let mut digits = Vec::new();
        loop {
            let b = self
                .peek()
                .ok_or_else(|| LexError::truncated(start, "hex string"))?;
            self.pos += 1;
            if b == b'>' {
                break;
            }
            if let Some(v) = hex_value(b) {
                digits.push(v);
            } else if !is_whitespace(b) {
                return Err(LexError::garbage(self.pos - 1, "non-hex byte in hex string"));
            }
        }
        if digits.len() % 2 == 1 {
            digits.push(0);
        }
        let bytes = digits.chunks(2).map(|p| p[0] << 4 | p[1]).collect();
        Ok(PdfObject::String(PdfString {
            bytes,
            kind: StringKind::Hex,
        }))
    }

    fn read_number_token(&mut self) -> &'a [u8] {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.') {
                self.pos += 1;
            } else {
                break;
            }
        }
        &self.data[start..self.pos]
    }

    fn parse_number_or_reference(&mut self) -> Result<PdfObject, LexError> {
        let start = self.pos;
        let token = self.read_number_token();
        let number = parse_number(token)
            .ok_or_else(|| LexError::garbage(start, "malformed number"))?;
        if let PdfObject::Integer(num) = number {
            if let Some(id) = self.try_reference_tail(num) {
                return Ok(PdfObject::Reference(id));
            }
        }
        Ok(number)
    }

    /// After an integer, looks ahead for `G R`; consumes it on success.
    fn try_reference_tail(&mut self, num: i64) -> Option<ObjectId> {
        let save = self.pos;
        let result = (|| {
            if !(0..=u32::MAX as i64).contains(&num) {
                return None;
            }
            self.skip_whitespace();
            let gen_start = self.pos;
            while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == gen_start || self.pos - gen_start > 5 {
                return None;
            }
            let generation: u32 = std::str::from_utf8(&self.data[gen_start..self.pos])
                .ok()?
                .parse()
                .ok()?;
            let generation = u16::try_from(generation).ok()?;
            if self.peek_keyword() == b"R" {
                self.pos += 1;
                Some(ObjectId::new(num as u32, generation))
            } else {
                None
            }
        })();
        if result.is_none() {
            self.pos = save;
        }
        result
    }
}

pub(crate) fn hex_value(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

fn parse_number(token: &[u8]) -> Option<PdfObject> {
    let text = std::str::from_utf8(token).ok()?;
    if text.is_empty() {
        return None;
    }
    if !text.contains('.') {
        if let Ok(i) = text.parse::<i64>() {
            return Some(PdfObject::Integer(i));
        }
    }
    // Writers emit things like "-.5" and "4." which Rust accepts; reject
    // anything with more than one sign or point.
    let real: f64 = text.parse().ok()?;
    real.is_finite().then_some(PdfObject::Real(real))
}

/// Parses an unsigned decimal integer at `pos`, returning the value and
/// the position after it.
pub(crate) fn read_unsigned(data: &[u8], pos: usize) -> Option<(u64, usize)> {
    let mut end = pos;
    while end < data.len() && data[end].is_ascii_digit() && end - pos < 19 {
        end += 1;
    }
    if end == pos {
        return None;
    }
    let value = std::str::from_utf8(&data[pos..end]).ok()?.parse().ok()?;
    Some((value, end))
}
