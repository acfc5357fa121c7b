//! Tokenizer. Whitespace and `#` comments separate tokens; a number may be
//! followed on the same line by a unit symbol, which becomes its own token.

use std::fmt;
use std::sync::Arc;

use super::span::{Diagnostic, SourceSpan};
use crate::units::Unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Asset,
    Exposure,
    Scenario,
    Params,
    Inject,
    Label,
    On,
    Twin,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Keyword> {
        Some(match word {
            "asset" => Keyword::Asset,
            "exposure" => Keyword::Exposure,
            "scenario" => Keyword::Scenario,
            "params" => Keyword::Params,
            "inject" => Keyword::Inject,
            "label" => Keyword::Label,
            "on" => Keyword::On,
            "twin" => Keyword::Twin,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Asset => "asset",
            Keyword::Exposure => "exposure",
            Keyword::Scenario => "scenario",
            Keyword::Params => "params",
            Keyword::Inject => "inject",
            Keyword::Label => "label",
            Keyword::On => "on",
            Keyword::Twin => "twin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Number,
    Unit,
    Str,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Comma,
    Dot,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
    Keyword(Keyword),
    Eof,
}

impl TokenKind {
    pub fn describe(self) -> &'static str {
        match self {
            TokenKind::Ident => "identifier",
            TokenKind::Number => "number",
            TokenKind::Unit => "unit",
            TokenKind::Str => "string",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::Colon => "`:`",
            TokenKind::Comma => "`,`",
            TokenKind::Dot => "`.`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::And => "`and`",
            TokenKind::Or => "`or`",
            TokenKind::Not => "`not`",
            TokenKind::Keyword(k) => k.as_str(),
            TokenKind::Eof => "end of file",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

/// For `Str` tokens `lexeme` holds the decoded contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: SourceSpan,
}

impl Token {
    /// Human-readable rendering for "found ..." messages.
    pub fn found(&self) -> String {
        match self.kind {
            TokenKind::Eof => "end of file".to_string(),
            TokenKind::Str => format!("string \"{}\"", self.lexeme),
            _ => format!("`{}`", self.lexeme),
        }
    }
}

struct Lexer<'a> {
    text: &'a str,
    file: Arc<str>,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    diags: Vec<Diagnostic>,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(offset)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn span_from(&self, mark: (usize, u32, u32)) -> SourceSpan {
        SourceSpan { file: self.file.clone(), line: mark.1, column: mark.2, byte_start: mark.0, byte_end: self.pos }
    }

    fn push(&mut self, kind: TokenKind, mark: (usize, u32, u32), lexeme: String) {
        let span = self.span_from(mark);
        self.tokens.push(Token { kind, lexeme, span });
    }

    fn run(mut self) -> Result<Vec<Token>, Vec<Diagnostic>> {
        while let Some(c) = self.peek() {
            let mark = self.mark();
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '{' | '}' | '(' | ')' | ':' | ',' | '.' => {
                    self.bump();
                    let kind = match c {
                        '{' => TokenKind::LBrace,
                        '}' => TokenKind::RBrace,
                        '(' => TokenKind::LParen,
                        ')' => TokenKind::RParen,
                        ':' => TokenKind::Colon,
                        ',' => TokenKind::Comma,
                        _ => TokenKind::Dot,
                    };
                    self.push(kind, mark, c.to_string());
                }
                '<' | '>' => {
                    self.bump();
                    let eq = self.peek() == Some('=');
                    if eq {
                        self.bump();
                    }
                    let kind = match (c, eq) {
                        ('<', false) => TokenKind::Lt,
                        ('<', true) => TokenKind::Le,
                        ('>', false) => TokenKind::Gt,
                        _ => TokenKind::Ge,
                    };
                    let lexeme = self.text[mark.0..self.pos].to_string();
                    self.push(kind, mark, lexeme);
                }
                '"' => self.string(mark),
                '-' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => self.number(mark),
                d if d.is_ascii_digit() => self.number(mark),
                a if a.is_ascii_alphabetic() || a == '_' => self.word(mark),
                other => {
                    self.bump();
                    let span = self.span_from(mark);
                    self.diags.push(Diagnostic::error("E_BAD_CHAR", format!("unexpected character {other:?}"), span));
                }
            }
        }
        let mark = self.mark();
        self.push(TokenKind::Eof, mark, String::new());
        if self.diags.is_empty() {
            Ok(self.tokens)
        } else {
            Err(self.diags)
        }
    }

    fn string(&mut self, mark: (usize, u32, u32)) {
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None => {
                    let span = self.span_from(mark);
                    self.diags.push(Diagnostic::error("E_UNTERMINATED_STRING", "string literal is never closed", span));
                    return;
                }
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('n') => value.push('\n'),
                    Some('t') => value.push('\t'),
                    Some('"') => value.push('"'),
                    Some('\\') => value.push('\\'),
                    Some(other) => {
                        value.push('\\');
                        value.push(other);
                    }
                    None => {
                        let span = self.span_from(mark);
                        self.diags.push(Diagnostic::error("E_UNTERMINATED_STRING", "string literal is never closed", span));
                        return;
                    }
                },
                Some(c) => value.push(c),
            }
        }
        self.push(TokenKind::Str, mark, value);
    }

    fn digits(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
    }

    fn number(&mut self, mark: (usize, u32, u32)) {
        if self.peek() == Some('-') {
            self.bump();
        }
        self.digits();
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            self.digits();
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let signed = matches!(self.peek_at(1), Some('+' | '-'));
            let digit_at = if signed { 2 } else { 1 };
            if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
                if signed {
                    self.bump();
                }
                self.digits();
            }
        }
        let lexeme = self.text[mark.0..self.pos].to_string();
        self.push(TokenKind::Number, mark, lexeme);
        self.unit_suffix();
    }

    /// Consumes `[ \t]* unit` when a known unit symbol follows.
    fn unit_suffix(&mut self) {
        let rest = &self.text[self.pos..];
        let gap = rest.len() - rest.trim_start_matches([' ', '\t']).len();
        let after = &rest[gap..];
        let word_len = after.bytes().take_while(u8::is_ascii_alphabetic).count();
        if word_len == 0 {
            return;
        }
        let word = &after[..word_len];
        let tail = &after[word_len..];
        let compound_len = tail
            .strip_prefix('/')
            .map(|t| t.bytes().take_while(u8::is_ascii_alphabetic).count())
            .filter(|n| *n > 0);
        let next_is_word_char = |s: &str| s.chars().next().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_');
        let symbol_len = match compound_len {
            Some(n) if Unit::from_symbol(&after[..word_len + 1 + n]).is_some() => word_len + 1 + n,
            _ if Unit::from_symbol(word).is_some() && !next_is_word_char(tail) => word_len,
            _ => return,
        };
        for _ in 0..gap {
            self.bump();
        }
        let mark = self.mark();
        for _ in 0..symbol_len {
            self.bump();
        }
        let lexeme = self.text[mark.0..self.pos].to_string();
        self.push(TokenKind::Unit, mark, lexeme);
    }

    fn word(&mut self, mark: (usize, u32, u32)) {
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        let word = &self.text[mark.0..self.pos];
        let kind = match word {
            "and" => TokenKind::And,
            "or" => TokenKind::Or,
            "not" => TokenKind::Not,
            w => Keyword::from_word(w).map_or(TokenKind::Ident, TokenKind::Keyword),
        };
        let lexeme = word.to_string();
        self.push(kind, mark, lexeme);
    }
}

/// Splits `text` into tokens ending with `Eof`, or reports every lexical error.
pub fn tokenize(text: &str, file: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    Lexer { text, file: Arc::from(file), pos: 0, line: 1, col: 1, tokens: Vec::new(), diags: Vec::new() }.run()
}
