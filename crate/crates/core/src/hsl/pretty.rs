//! Canonical source rendering. Output reparses to an equal [`Document`].

use std::fmt::Write;

use super::ast::*;
use crate::units::Quantity;

pub fn pretty_print(doc: &Document) -> String {
    let mut out = String::new();
    for (i, item) in doc.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::Asset(a) => {
                let _ = writeln!(out, "asset {} {{", a.id.node);
                entries(&mut out, &a.entries);
            }
            Item::Exposure(e) => {
                let _ = writeln!(out, "exposure {} on {} {{", e.id.node, e.asset.node);
                entries(&mut out, &e.entries);
            }
            Item::Scenario(s) => scenario(&mut out, s),
        }
        out.push_str("}\n");
    }
    out
}

fn entries(out: &mut String, entries: &[KeyValue]) {
    for kv in entries {
        let value = match &kv.value.node {
            Value::Path(p) => p.clone(),
            Value::Str(s) => quote(s),
            Value::Quantity(q) => quantity(q),
        };
        let _ = writeln!(out, "  {}: {}", kv.key.node, value);
    }
}

fn scenario(out: &mut String, s: &ScenarioBlock) {
    let _ = writeln!(out, "scenario {} {{", s.id.node);
    let _ = writeln!(out, "  exposure: {}", s.exposure.node);
    let _ = writeln!(out, "  twin: {}", s.twin.node);
    if let Some(cause) = &s.cause {
        let _ = writeln!(out, "  cause: {}", quote(&cause.node));
    }
    if let Some(params) = &s.params {
        out.push_str("  params {\n");
        for p in params {
            let _ = writeln!(out, "    {}: {}", p.name.node, dist(&p.dist.node));
        }
        out.push_str("  }\n");
    }
    for inj in &s.injections {
        let args: Vec<String> = inj.args.iter().map(|a| format!("{}: {}", a.key.node, quantity(&a.value.node))).collect();
        let _ = writeln!(out, "  inject: {}({})", inj.name.node, args.join(", "));
    }
    for label in &s.labels {
        out.push_str("  label ");
        if let Some(sev) = &label.severity {
            out.push_str(&sev.node);
            out.push(' ');
        }
        let _ = writeln!(out, "{}: {}", label.name.node, predicate(&label.predicate.node));
    }
}

fn dist(d: &DistExpr) -> String {
    match d {
        DistExpr::Constant(q) => quantity(q),
        DistExpr::Call { func, args } => {
            let args: Vec<String> = args
                .iter()
                .map(|a| match &a.weight {
                    Some(w) => format!("{}: {}", quantity(&a.value.node), quantity(&w.node)),
                    None => quantity(&a.value.node),
                })
                .collect();
            format!("{}({})", func.node, args.join(", "))
        }
    }
}

/// Binding strength: or < and < not/comparison.
fn precedence(p: &PredExpr) -> u8 {
    match p {
        PredExpr::Or(..) => 0,
        PredExpr::And(..) => 1,
        PredExpr::Not(_) | PredExpr::Compare { .. } => 2,
    }
}

fn operand(p: &PredExpr, min: u8) -> String {
    let text = predicate(p);
    if precedence(p) < min {
        format!("({text})")
    } else {
        text
    }
}

pub fn predicate(p: &PredExpr) -> String {
    match p {
        PredExpr::Compare { metric, op, value } => format!("{} {} {}", metric.node, op, quantity(&value.node)),
        // Left-associative: a right operand at the same level needs parentheses.
        PredExpr::And(a, b) => format!("{} and {}", operand(&a.node, 1), operand(&b.node, 2)),
        PredExpr::Or(a, b) => format!("{} or {}", operand(&a.node, 0), operand(&b.node, 1)),
        PredExpr::Not(inner) => format!("not {}", operand(&inner.node, 2)),
    }
}

fn quantity(q: &Quantity) -> String {
    q.to_string()
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsl::{parse, tokenize};

    fn roundtrip(src: &str) {
        let doc = parse(tokenize(src, "a.hsl").unwrap()).unwrap();
        let printed = pretty_print(&doc);
        let again = parse(tokenize(&printed, "b.hsl").unwrap()).unwrap_or_else(|d| panic!("{printed}\n{d:?}"));
        assert_eq!(doc, again, "{printed}");
    }

    #[test]
    fn nested_predicates_roundtrip() {
        roundtrip("scenario s { exposure: e twin: t label x: a < 1 and (b < 2 or c < 3) }");
        roundtrip("scenario s { exposure: e twin: t label x: not (a < 1 and b < 2) or c >= 3 cm }");
        roundtrip("scenario s { exposure: e twin: t label x: a < 1 or (b < 2 or c <= 3) }");
    }

    #[test]
    fn strings_and_weights_roundtrip() {
        roundtrip("asset a { name: \"tab\\t\\\"q\\\"\" kind: human }");
        roundtrip("scenario s { exposure: e twin: t params { m: choice(1 kg: 2, 2 kg: 1.5e-3) k: 0.000001 } }");
    }
}
