//! Recursive-descent parser. An error inside a block abandons that block and
//! resumes after its matching `}`, so one pass reports every broken block.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{Keyword, Token, TokenKind};
use super::span::Diagnostic;
use crate::labeler::CmpOp;
use crate::units::{Quantity, Unit};

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self) -> TokenKind {
        self.peek().kind
    }

    fn peek_kind_at(&self, offset: usize) -> TokenKind {
        self.tokens.get(self.pos + offset).map_or(TokenKind::Eof, |t| t.kind)
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        match tok.kind {
            TokenKind::Eof => return tok,
            TokenKind::LBrace => self.depth += 1,
            TokenKind::RBrace => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        self.pos += 1;
        tok
    }

    fn expected(&self, what: &str) -> Diagnostic {
        let tok = self.peek();
        Diagnostic::error("E_EXPECTED", format!("expected {what}, found {}", tok.found()), tok.span.clone())
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if self.peek_kind() == kind {
            Ok(self.bump())
        } else {
            Err(self.expected(kind.describe()))
        }
    }

    fn ident(&mut self) -> PResult<Spanned<String>> {
        let tok = self.expect(TokenKind::Ident)?;
        Ok(Spanned::new(tok.lexeme, tok.span))
    }

    fn dotted_id(&mut self) -> PResult<Spanned<String>> {
        let first = self.ident()?;
        let mut text = first.node;
        let mut span = first.span;
        while self.peek_kind() == TokenKind::Dot {
            self.bump();
            let seg = self.ident()?;
            text.push('.');
            text.push_str(&seg.node);
            span = span.to(&seg.span);
        }
        Ok(Spanned::new(text, span))
    }

    fn quantity(&mut self) -> PResult<Spanned<Quantity>> {
        let num = self.expect(TokenKind::Number)?;
        let magnitude: f64 = num
            .lexeme
            .parse()
            .map_err(|_| Diagnostic::error("E_EXPECTED", format!("malformed number `{}`", num.lexeme), num.span.clone()))?;
        let mut span = num.span;
        let mut unit = None;
        if self.peek_kind() == TokenKind::Unit {
            let tok = self.bump();
            unit = Unit::from_symbol(&tok.lexeme);
            span = span.to(&tok.span);
        }
        Ok(Spanned::new(Quantity { magnitude, unit }, span))
    }

    fn dup_key(&mut self, seen: &mut HashSet<String>, key: &Spanned<String>, context: &str) {
        if !seen.insert(key.node.clone()) {
            self.diags.push(Diagnostic::error(
                "E_DUP_KEY",
                format!("duplicate {context} `{}`", key.node),
                key.span.clone(),
            ));
        }
    }

    fn document(&mut self) -> Document {
        let mut doc = Document::default();
        loop {
            self.depth = 0;
            let start = self.pos;
            let item = match self.peek_kind() {
                TokenKind::Eof => break,
                TokenKind::Keyword(Keyword::Asset) => self.asset().map(Item::Asset),
                TokenKind::Keyword(Keyword::Exposure) => self.exposure().map(Item::Exposure),
                TokenKind::Keyword(Keyword::Scenario) => self.scenario().map(Item::Scenario),
                _ => Err(self.expected("`asset`, `exposure` or `scenario`")),
            };
            match item {
                Ok(item) => doc.items.push(item),
                Err(diag) => {
                    self.diags.push(diag);
                    if self.pos == start {
                        self.bump();
                    }
                    self.recover();
                }
            }
        }
        doc
    }

    /// Skips to the end of the current block, or when no block has been
    /// opened yet, to the next top-level keyword or past the next `{ ... }`.
    fn recover(&mut self) {
        if self.depth == 0 {
            loop {
                match self.peek_kind() {
                    TokenKind::Eof
                    | TokenKind::Keyword(Keyword::Asset | Keyword::Exposure | Keyword::Scenario) => return,
                    TokenKind::LBrace => break,
                    _ => {
                        self.bump();
                    }
                }
            }
            self.bump();
        }
        while self.depth > 0 && self.peek_kind() != TokenKind::Eof {
            self.bump();
        }
    }

    fn entries(&mut self) -> PResult<Vec<KeyValue>> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        while self.peek_kind() != TokenKind::RBrace {
            let key = match self.peek_kind() {
                TokenKind::Ident => self.ident()?,
                _ => return Err(self.expected("key or `}`")),
            };
            self.expect(TokenKind::Colon)?;
            let value = match self.peek_kind() {
                TokenKind::Str => {
                    let tok = self.bump();
                    Spanned::new(Value::Str(tok.lexeme), tok.span)
                }
                TokenKind::Number => {
                    let q = self.quantity()?;
                    Spanned::new(Value::Quantity(q.node), q.span)
                }
                TokenKind::Ident => {
                    let p = self.dotted_id()?;
                    Spanned::new(Value::Path(p.node), p.span)
                }
                _ => return Err(self.expected("value")),
            };
            self.dup_key(&mut seen, &key, "key");
            entries.push(KeyValue { key, value });
        }
        Ok(entries)
    }

    fn asset(&mut self) -> PResult<AssetBlock> {
        let kw = self.bump();
        let id = self.dotted_id()?;
        self.expect(TokenKind::LBrace)?;
        let entries = self.entries()?;
        let close = self.expect(TokenKind::RBrace)?;
        Ok(AssetBlock { id, entries, span: kw.span.to(&close.span) })
    }

    fn exposure(&mut self) -> PResult<ExposureBlock> {
        let kw = self.bump();
        let id = self.dotted_id()?;
        self.expect(TokenKind::Keyword(Keyword::On))?;
        let asset = self.dotted_id()?;
        self.expect(TokenKind::LBrace)?;
        let entries = self.entries()?;
        let close = self.expect(TokenKind::RBrace)?;
        Ok(ExposureBlock { id, asset, entries, span: kw.span.to(&close.span) })
    }

    fn scenario(&mut self) -> PResult<ScenarioBlock> {
        let kw = self.bump();
        let id = self.dotted_id()?;
        self.expect(TokenKind::LBrace)?;
        let mut exposure = None;
        let mut twin = None;
        let mut cause = None;
        let mut params: Option<Vec<ParamEntry>> = None;
        let mut injections = Vec::new();
        let mut labels = Vec::new();
        let mut label_names = HashSet::new();
        let close = loop {
            let tok = self.peek().clone();
            match tok.kind {
                TokenKind::RBrace => break self.bump(),
                TokenKind::Keyword(Keyword::Exposure) => {
                    self.bump();
                    self.expect(TokenKind::Colon)?;
                    let value = self.dotted_id()?;
                    self.set_once(&mut exposure, value, &tok);
                }
                TokenKind::Keyword(Keyword::Twin) => {
                    self.bump();
                    self.expect(TokenKind::Colon)?;
                    let value = self.ident()?;
                    self.set_once(&mut twin, value, &tok);
                }
                TokenKind::Ident if tok.lexeme == "cause" && self.peek_kind_at(1) == TokenKind::Colon => {
                    self.bump();
                    self.bump();
                    let s = self.expect(TokenKind::Str)?;
                    self.set_once(&mut cause, Spanned::new(s.lexeme, s.span), &tok);
                }
                TokenKind::Keyword(Keyword::Params) => {
                    self.bump();
                    let entries = self.params()?;
                    self.set_once(&mut params, entries, &tok);
                }
                TokenKind::Keyword(Keyword::Inject) => {
                    self.bump();
                    self.expect(TokenKind::Colon)?;
                    injections.push(self.injection()?);
                }
                TokenKind::Keyword(Keyword::Label) => {
                    let label = self.label()?;
                    self.dup_key(&mut label_names, &label.name, "label");
                    labels.push(label);
                }
                _ => return Err(self.expected("scenario entry or `}`")),
            }
        };
        let field = |v: Option<Spanned<String>>, what: &str| {
            v.ok_or_else(|| {
                Diagnostic::error("E_EXPECTED", format!("expected `{what}` entry before `}}`"), close.span.clone())
            })
        };
        let exposure = field(exposure, "exposure")?;
        let twin = field(twin, "twin")?;
        Ok(ScenarioBlock { id, exposure, twin, cause, params, injections, labels, span: kw.span.to(&close.span) })
    }

    fn set_once<T>(&mut self, slot: &mut Option<T>, value: T, key: &Token) {
        if slot.is_some() {
            self.diags.push(Diagnostic::error(
                "E_DUP_KEY",
                format!("duplicate `{}` entry", key.lexeme),
                key.span.clone(),
            ));
        } else {
            *slot = Some(value);
        }
    }

    fn params(&mut self) -> PResult<Vec<ParamEntry>> {
        self.expect(TokenKind::LBrace)?;
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        while self.peek_kind() != TokenKind::RBrace {
            if self.peek_kind() != TokenKind::Ident {
                return Err(self.expected("parameter name or `}`"));
            }
            let name = self.ident()?;
            self.expect(TokenKind::Colon)?;
            let dist = self.dist()?;
            self.dup_key(&mut seen, &name, "parameter");
            out.push(ParamEntry { name, dist });
        }
        self.bump();
        Ok(out)
    }

    fn dist(&mut self) -> PResult<Spanned<DistExpr>> {
        match self.peek_kind() {
            TokenKind::Number => {
                let q = self.quantity()?;
                Ok(Spanned::new(DistExpr::Constant(q.node), q.span))
            }
            TokenKind::Ident => {
                let func = self.ident()?;
                self.expect(TokenKind::LParen)?;
                let mut args = Vec::new();
                while self.peek_kind() != TokenKind::RParen {
                    let value = self.quantity()?;
                    let weight = if self.peek_kind() == TokenKind::Colon {
                        self.bump();
                        Some(self.quantity()?)
                    } else {
                        None
                    };
                    args.push(DistArg { value, weight });
                    match self.peek_kind() {
                        TokenKind::Comma => {
                            self.bump();
                        }
                        TokenKind::RParen => {}
                        _ => return Err(self.expected("`,` or `)`")),
                    }
                }
                let close = self.bump();
                let span = func.span.to(&close.span);
                Ok(Spanned::new(DistExpr::Call { func, args }, span))
            }
            _ => Err(self.expected("quantity or distribution")),
        }
    }

    fn injection(&mut self) -> PResult<InjectionExpr> {
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        let mut seen = HashSet::new();
        while self.peek_kind() != TokenKind::RParen {
            let key = self.ident()?;
            self.expect(TokenKind::Colon)?;
            let value = self.quantity()?;
            self.dup_key(&mut seen, &key, "argument");
            args.push(InjectionArg { key, value });
            match self.peek_kind() {
                TokenKind::Comma => {
                    self.bump();
                }
                TokenKind::RParen => {}
                _ => return Err(self.expected("`,` or `)`")),
            }
        }
        let close = self.bump();
        let span = name.span.to(&close.span);
        Ok(InjectionExpr { name, args, span })
    }

    fn label(&mut self) -> PResult<LabelExpr> {
        let kw = self.bump();
        let first = self.ident()?;
        let (severity, name) = if self.peek_kind() == TokenKind::Ident {
            (Some(first), self.ident()?)
        } else {
            (None, first)
        };
        self.expect(TokenKind::Colon)?;
        let predicate = self.or_expr()?;
        let span = kw.span.to(&predicate.span);
        Ok(LabelExpr { severity, name, predicate, span })
    }

    fn or_expr(&mut self) -> PResult<Spanned<PredExpr>> {
        let mut lhs = self.and_expr()?;
        while self.peek_kind() == TokenKind::Or {
            self.bump();
            let rhs = self.and_expr()?;
            let span = lhs.span.to(&rhs.span);
            lhs = Spanned::new(PredExpr::Or(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Spanned<PredExpr>> {
        let mut lhs = self.unary()?;
        while self.peek_kind() == TokenKind::And {
            self.bump();
            let rhs = self.unary()?;
            let span = lhs.span.to(&rhs.span);
            lhs = Spanned::new(PredExpr::And(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Spanned<PredExpr>> {
        match self.peek_kind() {
            TokenKind::Not => {
                let kw = self.bump();
                let inner = self.unary()?;
                let span = kw.span.to(&inner.span);
                Ok(Spanned::new(PredExpr::Not(Box::new(inner)), span))
            }
            TokenKind::LParen => {
                let open = self.bump();
                let inner = self.or_expr()?;
                let close = self.expect(TokenKind::RParen)?;
                Ok(Spanned::new(inner.node, open.span.to(&close.span)))
            }
            TokenKind::Ident => {
                let metric = self.ident()?;
                let op = match self.peek_kind() {
                    TokenKind::Lt => CmpOp::Lt,
                    TokenKind::Le => CmpOp::Le,
                    TokenKind::Gt => CmpOp::Gt,
                    TokenKind::Ge => CmpOp::Ge,
                    _ => return Err(self.expected("comparison operator")),
                };
                self.bump();
                let value = self.quantity()?;
                let span = metric.span.to(&value.span);
                Ok(Spanned::new(PredExpr::Compare { metric, op, value }, span))
            }
            _ => Err(self.expected("predicate")),
        }
    }
}

/// Parses a token stream (as produced by [`super::tokenize`]).
pub fn parse(tokens: Vec<Token>) -> Result<Document, Vec<Diagnostic>> {
    assert!(tokens.last().is_some_and(|t| t.kind == TokenKind::Eof), "token stream must end with eof");
    let mut parser = Parser { tokens, pos: 0, depth: 0, diags: Vec::new() };
    let doc = parser.document();
    if parser.diags.is_empty() {
        Ok(doc)
    } else {
        parser.diags.sort_by_key(|d| d.span.byte_start);
        Err(parser.diags)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsl::tokenize;

    fn parse_src(src: &str) -> Result<Document, Vec<Diagnostic>> {
        parse(tokenize(src, "t.hsl").unwrap())
    }

    #[test]
    fn minimal_asset() {
        let doc = parse_src("asset human.child { }").unwrap();
        assert_eq!(doc.items.len(), 1);
        let a = doc.assets().next().unwrap();
        assert_eq!(a.id.node, "human.child");
        assert!(a.entries.is_empty());
    }

    #[test]
    fn missing_twin_value_points_at_brace() {
        let src = "scenario x { twin: }";
        let diags = parse_src(src).unwrap_err();
        assert_eq!(diags[0].code, "E_EXPECTED");
        assert!(diags[0].message.contains("identifier"), "{}", diags[0].message);
        assert_eq!(diags[0].span.byte_start, src.find('}').unwrap());
    }

    #[test]
    fn recovers_to_report_several_blocks() {
        let src = "asset a { kind: }\nasset b { kind: human }\nscenario s { twin tabletop_placement }\nasset c { kind: human }";
        let diags = parse_src(src).unwrap_err();
        assert_eq!(diags.len(), 2);
        assert_eq!(diags[0].span.line, 1);
        assert_eq!(diags[1].span.line, 3);
    }

    #[test]
    fn duplicate_keys() {
        let diags = parse_src("asset a { kind: human kind: human }").unwrap_err();
        assert_eq!(diags[0].code, "E_DUP_KEY");
        assert_eq!(diags[0].span.column, 23);
        let diags = parse_src("scenario s { exposure: e twin: a twin: b }").unwrap_err();
        assert_eq!(diags[0].code, "E_DUP_KEY");
    }

    #[test]
    fn predicate_precedence() {
        let doc = parse_src(
            "scenario s { exposure: e twin: t label l: not a < 1 and b < 2 cm or (c > 3 s) }",
        )
        .unwrap();
        let label = &doc.scenarios().next().unwrap().labels[0];
        match &label.predicate.node {
            PredExpr::Or(lhs, rhs) => {
                assert!(matches!(lhs.node, PredExpr::And(..)));
                assert!(matches!(rhs.node, PredExpr::Compare { .. }));
                if let PredExpr::And(n, _) = &lhs.node {
                    assert!(matches!(n.node, PredExpr::Not(_)));
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_scenario_fields() {
        let diags = parse_src("scenario s { twin: t }").unwrap_err();
        assert_eq!(diags[0].code, "E_EXPECTED");
        assert!(diags[0].message.contains("exposure"));
    }

    #[test]
    fn unclosed_block_reports_eof() {
        let src = "asset a { kind: human";
        let diags = parse_src(src).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].span.byte_start, src.len());
    }
}
