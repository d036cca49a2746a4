//! Propositional conditions over source-port activation literals.
//!
//! Grammar (keywords are case-insensitive):
//!
//! ```text
//! expr   := term   (OR term)*
//! term   := factor (AND factor)*
//! factor := NOT factor | '(' expr ')' | 'true' | 'false' | portname
//! AND    := 'and' | '&&' | '&' | '∧'
//! OR     := 'or'  | '||' | '|' | '∨'
//! NOT    := 'not' | '!'  | '¬'
//! ```
//!
//! Empty input is `true`. Quantifiers are rejected.

use std::fmt;

use thiserror::Error;

use super::port::{Direction, PortError, PortName};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    True,
    False,
    Literal(PortName),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn lit(port: PortName) -> Self {
        BoolExpr::Literal(port)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(expr: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(expr))
    }

    pub fn and(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        BoolExpr::And(children.into_iter().collect())
    }

    pub fn or(children: impl IntoIterator<Item = BoolExpr>) -> Self {
        BoolExpr::Or(children.into_iter().collect())
    }

    pub fn is_true(&self) -> bool {
        matches!(self, BoolExpr::True)
    }

    /// Canonical shape: nested `And`/`Or` flattened, constants absorbed,
    /// double negation removed, duplicate children dropped (first occurrence
    /// wins, so child order follows first appearance), and single-child
    /// connectives unwrapped.
    pub fn normalize(&self) -> BoolExpr {
        match self {
            BoolExpr::True | BoolExpr::False | BoolExpr::Literal(_) => self.clone(),
            BoolExpr::Not(inner) => match inner.normalize() {
                BoolExpr::True => BoolExpr::False,
                BoolExpr::False => BoolExpr::True,
                BoolExpr::Not(x) => *x,
                other => BoolExpr::Not(Box::new(other)),
            },
            BoolExpr::And(children) => normalize_nary(children, true),
            BoolExpr::Or(children) => normalize_nary(children, false),
        }
    }

    pub fn eval<F: Fn(&PortName) -> bool>(&self, value: &F) -> bool {
        match self {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Literal(p) => value(p),
            BoolExpr::Not(x) => !x.eval(value),
            BoolExpr::And(xs) => xs.iter().all(|x| x.eval(value)),
            BoolExpr::Or(xs) => xs.iter().any(|x| x.eval(value)),
        }
    }

    /// Distinct literal ports in first-appearance order.
    pub fn literals(&self) -> Vec<PortName> {
        let mut out = Vec::new();
        self.collect_literals(&mut out);
        out
    }

    fn collect_literals(&self, out: &mut Vec<PortName>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Literal(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            BoolExpr::Not(x) => x.collect_literals(out),
            BoolExpr::And(xs) | BoolExpr::Or(xs) => xs.iter().for_each(|x| x.collect_literals(out)),
        }
    }

    /// Substitutes a constant for one literal and normalizes the result.
    pub fn assign(&self, port: &PortName, value: bool) -> BoolExpr {
        fn subst(e: &BoolExpr, port: &PortName, value: bool) -> BoolExpr {
            match e {
                BoolExpr::Literal(p) if p == port => {
                    if value {
                        BoolExpr::True
                    } else {
                        BoolExpr::False
                    }
                }
                BoolExpr::True | BoolExpr::False | BoolExpr::Literal(_) => e.clone(),
                BoolExpr::Not(x) => BoolExpr::not(subst(x, port, value)),
                BoolExpr::And(xs) => BoolExpr::and(xs.iter().map(|x| subst(x, port, value))),
                BoolExpr::Or(xs) => BoolExpr::or(xs.iter().map(|x| subst(x, port, value))),
            }
        }
        subst(self, port, value).normalize()
    }

    /// Top-level conjuncts; a non-`And` expression is its own single conjunct.
    pub fn conjuncts(&self) -> Vec<&BoolExpr> {
        match self {
            BoolExpr::And(xs) => xs.iter().collect(),
            other => vec![other],
        }
    }

    /// Renders in keyword syntax; `parse_condition` reads it back.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, Prec::Or);
        out
    }

    fn render_into(&self, out: &mut String, ctx: Prec) {
        match self {
            BoolExpr::True => out.push_str("true"),
            BoolExpr::False => out.push_str("false"),
            BoolExpr::Literal(p) => out.push_str(p.as_str()),
            BoolExpr::Not(x) => {
                out.push_str("not ");
                x.render_into(out, Prec::Not);
            }
            BoolExpr::And(xs) => render_nary(out, xs, " and ", Prec::And, ctx),
            BoolExpr::Or(xs) => render_nary(out, xs, " or ", Prec::Or, ctx),
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Or,
    And,
    Not,
}

fn render_nary(out: &mut String, xs: &[BoolExpr], sep: &str, own: Prec, ctx: Prec) {
    if xs.is_empty() {
        out.push_str(if own == Prec::And { "true" } else { "false" });
        return;
    }
    let paren = ctx > own && xs.len() > 1;
    if paren {
        out.push('(');
    }
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        // one level tighter, so a same-kind child gets parenthesized
        let child_ctx = if own == Prec::Or { Prec::And } else { Prec::Not };
        x.render_into(out, if xs.len() > 1 { child_ctx } else { ctx });
    }
    if paren {
        out.push(')');
    }
}

fn normalize_nary(children: &[BoolExpr], is_and: bool) -> BoolExpr {
    let (unit, zero) = if is_and {
        (BoolExpr::True, BoolExpr::False)
    } else {
        (BoolExpr::False, BoolExpr::True)
    };
    let mut out: Vec<BoolExpr> = Vec::new();
    let push = |x: BoolExpr, out: &mut Vec<BoolExpr>| {
        if !out.contains(&x) {
            out.push(x);
        }
    };
    for child in children {
        let n = child.normalize();
        if n == zero {
            return zero;
        }
        if n == unit {
            continue;
        }
        match n {
            BoolExpr::And(xs) if is_and => xs.into_iter().for_each(|x| push(x, &mut out)),
            BoolExpr::Or(xs) if !is_and => xs.into_iter().for_each(|x| push(x, &mut out)),
            other => push(other, &mut out),
        }
    }
    match out.len() {
        0 => unit,
        1 => out.pop().unwrap(),
        _ if is_and => BoolExpr::And(out),
        _ => BoolExpr::Or(out),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("condition syntax error at byte {position}: {kind}")]
pub struct ConditionError {
    pub position: usize,
    pub kind: ConditionErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected {found}, expected {expected}")]
    UnexpectedToken { found: String, expected: &'static str },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(&'static str),
    #[error("quantifier `{0}` is not supported; conditions are propositional")]
    Quantifier(String),
    #[error("unknown word `{0}`")]
    UnknownWord(String),
    #[error(transparent)]
    Port(#[from] PortError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    LParen,
    RParen,
    And,
    Or,
    Not,
    True,
    False,
    Port(PortName),
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::And => "`and`".into(),
            Token::Or => "`or`".into(),
            Token::Not => "`not`".into(),
            Token::True => "`true`".into(),
            Token::False => "`false`".into(),
            Token::Port(p) => format!("port `{p}`"),
        }
    }
}

fn is_port_terminator(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '&' | '|' | '!' | '¬' | '∧' | '∨')
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ConditionError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    let err = |position, kind| ConditionError { position, kind };
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let token = match c {
            '(' => {
                chars.next();
                Token::LParen
            }
            ')' => {
                chars.next();
                Token::RParen
            }
            '&' | '|' => {
                chars.next();
                if chars.peek().map(|&(_, n)| n) == Some(c) {
                    chars.next();
                }
                if c == '&' {
                    Token::And
                } else {
                    Token::Or
                }
            }
            '∧' => {
                chars.next();
                Token::And
            }
            '∨' => {
                chars.next();
                Token::Or
            }
            '!' | '¬' => {
                chars.next();
                Token::Not
            }
            '∀' | '∃' => return Err(err(pos, ConditionErrorKind::Quantifier(c.to_string()))),
            '/' => {
                let mut end = pos;
                while let Some(&(i, n)) = chars.peek() {
                    if is_port_terminator(n) {
                        break;
                    }
                    end = i + n.len_utf8();
                    chars.next();
                }
                let port = PortName::parse(&text[pos..end]).map_err(|e| err(pos, e.into()))?;
                port.expect(Direction::Output).map_err(|e| err(pos, e.into()))?;
                Token::Port(port)
            }
            c if c.is_alphabetic() => {
                let mut end = pos;
                while let Some(&(i, n)) = chars.peek() {
                    if !(n.is_alphanumeric() || n == '_') {
                        break;
                    }
                    end = i + n.len_utf8();
                    chars.next();
                }
                let word = &text[pos..end];
                match word.to_ascii_lowercase().as_str() {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "not" => Token::Not,
                    "true" => Token::True,
                    "false" => Token::False,
                    "forall" | "exists" => return Err(err(pos, ConditionErrorKind::Quantifier(word.to_string()))),
                    _ => return Err(err(pos, ConditionErrorKind::UnknownWord(word.to_string()))),
                }
            }
            other => return Err(err(pos, ConditionErrorKind::UnexpectedChar(other))),
        };
        tokens.push((pos, token));
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn fail(&self, expected: &'static str) -> ConditionError {
        let kind = match self.peek() {
            Some(t) => ConditionErrorKind::UnexpectedToken {
                found: t.describe(),
                expected,
            },
            None => ConditionErrorKind::UnexpectedEnd(expected),
        };
        ConditionError {
            position: self.position(),
            kind,
        }
    }

    fn expr(&mut self) -> Result<BoolExpr, ConditionError> {
        let mut terms = vec![self.term()?];
        while self.peek() == Some(&Token::Or) {
            self.at += 1;
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            BoolExpr::Or(terms)
        })
    }

    fn term(&mut self) -> Result<BoolExpr, ConditionError> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(&Token::And) {
            self.at += 1;
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            BoolExpr::And(factors)
        })
    }

    fn factor(&mut self) -> Result<BoolExpr, ConditionError> {
        const EXPECTED: &str = "a port name, `not`, or `(`";
        let token = self.peek().cloned().ok_or_else(|| self.fail(EXPECTED))?;
        match token {
            Token::Not => {
                self.at += 1;
                Ok(BoolExpr::not(self.factor()?))
            }
            Token::LParen => {
                self.at += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.fail("`)`"));
                }
                self.at += 1;
                Ok(inner)
            }
            Token::True => {
                self.at += 1;
                Ok(BoolExpr::True)
            }
            Token::False => {
                self.at += 1;
                Ok(BoolExpr::False)
            }
            Token::Port(p) => {
                self.at += 1;
                Ok(BoolExpr::Literal(p))
            }
            _ => Err(self.fail(EXPECTED)),
        }
    }
}

/// Parses a condition and returns it in normalized form.
pub fn parse_condition(text: &str) -> Result<BoolExpr, ConditionError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Ok(BoolExpr::True);
    }
    let mut parser = Parser {
        tokens,
        at: 0,
        end: text.len(),
    };
    let expr = parser.expr()?;
    if parser.peek().is_some() {
        return Err(parser.fail("`and`, `or`, or end of input"));
    }
    Ok(expr.normalize())
}
