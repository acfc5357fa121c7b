use std::fmt;
use std::sync::Arc;

/// A byte range in one source file; `line`/`column` (1-based, columns in
/// characters) locate `byte_start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl SourceSpan {
    /// Smallest span covering both `self` and `other` (same file).
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        let (first, last) = if self.byte_start <= other.byte_start { (self, other) } else { (other, self) };
        SourceSpan {
            file: first.file.clone(),
            line: first.line,
            column: first.column,
            byte_start: first.byte_start,
            byte_end: last.byte_end.max(first.byte_end),
        }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.byte_start <= other.byte_start && other.byte_end <= self.byte_end
    }
}

/// Recomputes 1-based (line, column) for a byte offset.
pub fn line_col(text: &str, byte: usize) -> (u32, u32) {
    let before = &text[..byte];
    let line = before.matches('\n').count() as u32 + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let column = text[line_start..byte].chars().count() as u32 + 1;
    (line, column)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagSeverity {
    Error,
    Warning,
}

impl fmt::Display for DiagSeverity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagSeverity::Error => "error",
            DiagSeverity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: DiagSeverity,
    pub code: &'static str,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>, span: SourceSpan) -> Self {
        Diagnostic { severity: DiagSeverity::Error, code, message: message.into(), span }
    }

    pub fn warning(code: &'static str, message: impl Into<String>, span: SourceSpan) -> Self {
        Diagnostic { severity: DiagSeverity::Warning, code, message: message.into(), span }
    }

    pub fn is_error(&self) -> bool {
        self.severity == DiagSeverity::Error
    }
}

/// `file:line:col: severity[code]: message`
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}[{}]: {}",
            self.span.file, self.span.line, self.span.column, self.severity, self.code, self.message
        )
    }
}
