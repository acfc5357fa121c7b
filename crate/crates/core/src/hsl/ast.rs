//! Syntax tree. Equality ignores spans so that a reparsed pretty-print
//! compares equal to the original.

use super::span::SourceSpan;
use crate::labeler::CmpOp;
use crate::units::Quantity;

#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub node: T,
    pub span: SourceSpan,
}

impl<T> Spanned<T> {
    pub fn new(node: T, span: SourceSpan) -> Self {
        Spanned { node, span }
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub items: Vec<Item>,
}

impl Document {
    pub fn assets(&self) -> impl Iterator<Item = &AssetBlock> {
        self.items.iter().filter_map(|i| match i {
            Item::Asset(a) => Some(a),
            _ => None,
        })
    }

    pub fn exposures(&self) -> impl Iterator<Item = &ExposureBlock> {
        self.items.iter().filter_map(|i| match i {
            Item::Exposure(e) => Some(e),
            _ => None,
        })
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &ScenarioBlock> {
        self.items.iter().filter_map(|i| match i {
            Item::Scenario(s) => Some(s),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Asset(AssetBlock),
    Exposure(ExposureBlock),
    Scenario(ScenarioBlock),
}

impl Item {
    pub fn span(&self) -> &SourceSpan {
        match self {
            Item::Asset(a) => &a.span,
            Item::Exposure(e) => &e.span,
            Item::Scenario(s) => &s.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// A bare or dotted identifier such as `human` or `human.child`.
    Path(String),
    Str(String),
    Quantity(Quantity),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyValue {
    pub key: Spanned<String>,
    pub value: Spanned<Value>,
}

#[derive(Debug, Clone)]
pub struct AssetBlock {
    pub id: Spanned<String>,
    pub entries: Vec<KeyValue>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct ExposureBlock {
    pub id: Spanned<String>,
    pub asset: Spanned<String>,
    pub entries: Vec<KeyValue>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct ScenarioBlock {
    pub id: Spanned<String>,
    pub exposure: Spanned<String>,
    pub twin: Spanned<String>,
    pub cause: Option<Spanned<String>>,
    /// `None` when the block has no `params { }` section at all.
    pub params: Option<Vec<ParamEntry>>,
    pub injections: Vec<InjectionExpr>,
    pub labels: Vec<LabelExpr>,
    pub span: SourceSpan,
}

macro_rules! eq_without_span {
    ($ty:ident { $($field:ident),* }) => {
        impl PartialEq for $ty {
            fn eq(&self, other: &Self) -> bool {
                true $(&& self.$field == other.$field)*
            }
        }
    };
}

eq_without_span!(AssetBlock { id, entries });
eq_without_span!(ExposureBlock { id, asset, entries });
eq_without_span!(ScenarioBlock { id, exposure, twin, cause, params, injections, labels });
eq_without_span!(InjectionExpr { name, args });
eq_without_span!(LabelExpr { severity, name, predicate });

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: Spanned<String>,
    pub dist: Spanned<DistExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistExpr {
    Constant(Quantity),
    Call { func: Spanned<String>, args: Vec<DistArg> },
}

/// One distribution argument; `weight` is only meaningful for `choice`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistArg {
    pub value: Spanned<Quantity>,
    pub weight: Option<Spanned<Quantity>>,
}

#[derive(Debug, Clone)]
pub struct InjectionExpr {
    pub name: Spanned<String>,
    pub args: Vec<InjectionArg>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionArg {
    pub key: Spanned<String>,
    pub value: Spanned<Quantity>,
}

#[derive(Debug, Clone)]
pub struct LabelExpr {
    pub severity: Option<Spanned<String>>,
    pub name: Spanned<String>,
    pub predicate: Spanned<PredExpr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredExpr {
    Compare { metric: Spanned<String>, op: CmpOp, value: Spanned<Quantity> },
    And(Box<Spanned<PredExpr>>, Box<Spanned<PredExpr>>),
    Or(Box<Spanned<PredExpr>>, Box<Spanned<PredExpr>>),
    Not(Box<Spanned<PredExpr>>),
}
