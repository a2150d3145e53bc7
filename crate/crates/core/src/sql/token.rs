use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    /// Identifier or keyword; keywords are matched case-insensitively.
    Word,
    Int(i64),
    Float(f64),
    Str(String),
    Symbol(&'static str),
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub offset: usize,
}

impl Token {
    pub fn is_word(&self, kw: &str) -> bool {
        self.kind == TokenKind::Word && self.lexeme.eq_ignore_ascii_case(kw)
    }

    pub fn is_symbol(&self, s: &str) -> bool {
        matches!(self.kind, TokenKind::Symbol(x) if x == s)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TokenKind::Eof => f.write_str("end of input"),
            TokenKind::Str(_) => write!(f, "string {}", self.lexeme),
            _ => write!(f, "`{}`", self.lexeme),
        }
    }
}

const SYMBOLS: [&str; 15] = ["<=", ">=", "<>", "!=", "=", "<", ">", "+", "-", "*", "/", "(", ")", ",", ";"];

fn lex_error(offset: usize, expected: &str, found: String) -> Error {
    Error::Syntax {
        offset,
        expected: vec![expected.to_string()],
        found,
    }
}

pub fn tokenize(sql: &str) -> Result<Vec<Token>> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if sql[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Word,
                lexeme: sql[start..i].to_string(),
                offset: start,
            });
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let mut float = false;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                float = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    float = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &sql[start..i];
            let kind = if float {
                TokenKind::Float(text.parse().map_err(|_| lex_error(start, "number", text.to_string()))?)
            } else {
                TokenKind::Int(
                    text.parse()
                        .map_err(|_| lex_error(start, "integer within 64-bit range", text.to_string()))?,
                )
            };
            out.push(Token {
                kind,
                lexeme: text.to_string(),
                offset: start,
            });
        } else if c == b'\'' {
            i += 1;
            let mut value = String::new();
            loop {
                let Some(rel) = sql[i..].find('\'') else {
                    return Err(lex_error(start, "closing quote", "end of input".into()));
                };
                value.push_str(&sql[i..i + rel]);
                i += rel + 1;
                if bytes.get(i) == Some(&b'\'') {
                    value.push('\'');
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: TokenKind::Str(value),
                lexeme: sql[start..i].to_string(),
                offset: start,
            });
        } else if let Some(sym) = SYMBOLS.iter().find(|s| sql[i..].starts_with(**s)) {
            i += sym.len();
            out.push(Token {
                kind: TokenKind::Symbol(sym),
                lexeme: sym.to_string(),
                offset: start,
            });
        } else if c == b'.' {
            i += 1;
            out.push(Token {
                kind: TokenKind::Symbol("."),
                lexeme: ".".into(),
                offset: start,
            });
        } else {
            let ch = sql[i..].chars().next().unwrap_or('?');
            return Err(lex_error(start, "token", format!("`{ch}`")));
        }
    }
    out.push(Token {
        kind: TokenKind::Eof,
        lexeme: String::new(),
        offset: sql.len(),
    });
    Ok(out)
}
