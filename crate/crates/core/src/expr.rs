//! Arithmetic expressions over named variables.
//!
//! Grammar (whitespace-insensitive, `^` binds tighter than unary minus and is
//! right-associative):
//!
//! ```text
//! list    := sum (',' sum)*
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 'pi' | var | func '(' sum ')' | 'atan2' '(' sum ',' sum ')' | '(' sum ')'
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Atan2(Box<Expr>, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: unexpected token '{token}'")]
    Unexpected { position: usize, token: String },
    #[error("syntax error at position {position}: unexpected end of input")]
    UnexpectedEnd { position: usize },
    #[error("invalid number '{text}' at position {position}")]
    BadNumber { position: usize, text: String },
    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { position: usize, name: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Unexpected { position, .. }
            | ParseError::UnexpectedEnd { position }
            | ParseError::BadNumber { position, .. }
            | ParseError::UnknownIdentifier { position, .. } => *position,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of a non-positive value ({0})")]
    LogDomain(f64),
    #[error("square root of a negative value ({0})")]
    SqrtDomain(f64),
    #[error("non-integer power {exponent} of negative base {base}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("variable index {0} out of range")]
    MissingVariable(usize),
}

impl Expr {
    pub fn eval(&self, vars: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *vars.get(*i).ok_or(EvalError::MissingVariable(*i))?,
            Expr::Neg(e) => -e.eval(vars)?,
            Expr::Call(f, e) => {
                let v = e.eval(vars)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => {
                        if v <= 0.0 {
                            return Err(EvalError::LogDomain(v));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(EvalError::SqrtDomain(v));
                        }
                        v.sqrt()
                    }
                }
            }
            Expr::Atan2(a, b) => a.eval(vars)?.atan2(b.eval(vars)?),
            Expr::Binary(op, a, b) => {
                let l = a.eval(vars)?;
                let r = b.eval(vars)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        l / r
                    }
                    BinOp::Pow => power(l, r)?,
                }
            }
        })
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_var(),
            Expr::Atan2(a, b) | Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Fully parenthesised rendering that reparses to an equivalent tree.
    pub fn render(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.write_to(&mut out, names);
        out
    }

    fn write_to(&self, out: &mut String, names: &[String]) {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    out.push_str(&format!("(-{:?})", -c));
                } else {
                    out.push_str(&format!("{c:?}"));
                }
            }
            Expr::Var(i) => match names.get(*i) {
                Some(n) => out.push_str(n),
                None => out.push_str(&format!("x{}", i + 1)),
            },
            Expr::Neg(e) => {
                out.push_str("(-");
                e.write_to(out, names);
                out.push(')');
            }
            Expr::Call(f, e) => {
                out.push_str(f.name());
                out.push('(');
                e.write_to(out, names);
                out.push(')');
            }
            Expr::Atan2(a, b) => {
                out.push_str("atan2(");
                a.write_to(out, names);
                out.push_str(", ");
                b.write_to(out, names);
                out.push(')');
            }
            Expr::Binary(op, a, b) => {
                out.push('(');
                a.write_to(out, names);
                out.push(' ');
                out.push(op.symbol());
                out.push(' ');
                b.write_to(out, names);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&[]))
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    let integral = exponent.fract() == 0.0;
    if base < 0.0 && !integral {
        return Err(EvalError::PowDomain { base, exponent });
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if integral && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

/// Variable names `{prefix}1 .. {prefix}n`.
pub fn indexed_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    pos: usize,
    text: String,
}

fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part: 1e-3, 2.5E+4
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::BadNumber {
                position: start,
                text: text.to_string(),
            })?;
            out.push(Spanned {
                tok: Tok::Num(value),
                pos: start,
                text: text.to_string(),
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            let text = &src[start..i];
            out.push(Spanned {
                tok: Tok::Ident(text.to_string()),
                pos: start,
                text: text.to_string(),
            });
        } else if "+-*/^(),".contains(c) {
            i += 1;
            out.push(Spanned {
                tok: Tok::Sym(c),
                pos: start,
                text: c.to_string(),
            });
        } else {
            // non-ASCII input: report the full character
            let ch = src[start..].chars().next().unwrap_or(c);
            return Err(ParseError::Unexpected {
                position: start,
                token: ch.to_string(),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    idx: usize,
    end: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.idx)
    }

    fn peek_sym(&self) -> Option<char> {
        match self.peek() {
            Some(Spanned { tok: Tok::Sym(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::Unexpected {
                position: t.pos,
                token: t.text.clone(),
            },
            None => ParseError::UnexpectedEnd { position: self.end },
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_sym() == Some(c) {
            self.idx += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn list(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut items = vec![self.sum()?];
        while self.peek_sym() == Some(',') {
            self.idx += 1;
            items.push(self.sum()?);
        }
        if self.peek().is_some() {
            return Err(self.unexpected());
        }
        Ok(items)
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.idx += 1;
            let rhs = self.product()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.idx += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_sym() {
            Some('-') => {
                self.idx += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.idx += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.idx += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(t) = self.peek().cloned() else {
            return Err(self.unexpected());
        };
        match t.tok {
            Tok::Num(v) => {
                self.idx += 1;
                Ok(Expr::Const(v))
            }
            Tok::Sym('(') => {
                self.idx += 1;
                let inner = self.sum()?;
                self.expect_sym(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.idx += 1;
                if name == "atan2" {
                    self.expect_sym('(')?;
                    let a = self.sum()?;
                    self.expect_sym(',')?;
                    let b = self.sum()?;
                    self.expect_sym(')')?;
                    return Ok(Expr::Atan2(Box::new(a), Box::new(b)));
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect_sym('(')?;
                    let arg = self.sum()?;
                    self.expect_sym(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError::UnknownIdentifier {
                        position: t.pos,
                        name,
                    }),
                }
            }
            Tok::Sym(_) => Err(self.unexpected()),
        }
    }
}

/// Parses a comma-separated list of expressions over `vars`.
pub fn parse_list(src: &str, vars: &[String]) -> Result<Vec<Expr>, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: src.len(),
        vars,
    };
    p.list()
}

/// Parses a single expression over `vars`.
pub fn parse(src: &str, vars: &[String]) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: src.len(),
        vars,
    };
    let e = p.sum()?;
    if p.peek().is_some() {
        return Err(p.unexpected());
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs(n: usize) -> Vec<String> {
        indexed_names("x", n)
    }

    #[test]
    fn precedence_and_associativity() {
        let v = xs(2);
        let e = parse("-x1^2", &v).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]).unwrap(), -9.0);
        let e = parse("2^3^2", &v).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 512.0);
        let e = parse("1 - 2 - 3", &v).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), -4.0);
        let e = parse("8 / 2 / 2 * 3", &v).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 6.0);
        let e = parse("2^-1", &v).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 0.5);
        let e = parse(" x1*x2+ 1e-1 ", &v).unwrap();
        assert!((e.eval(&[2.0, 3.0]).unwrap() - 6.1).abs() < 1e-15);
    }

    #[test]
    fn functions_and_atan2() {
        let v = xs(2);
        let e = parse("atan2(x1, x2) + sqrt(4) + ln(exp(1)) + sin(0) + cos(0)", &v).unwrap();
        let got = e.eval(&[1.0, 1.0]).unwrap();
        assert!((got - (std::f64::consts::FRAC_PI_4 + 4.0)).abs() < 1e-15);
        assert!((parse("pi", &v).unwrap().eval(&[]).unwrap() - std::f64::consts::PI).abs() < 1e-16);
    }

    #[test]
    fn domain_errors() {
        let v = xs(1);
        assert_eq!(parse("1/x1", &v).unwrap().eval(&[0.0]), Err(EvalError::DivisionByZero));
        assert!(matches!(parse("ln(x1)", &v).unwrap().eval(&[-1.0]), Err(EvalError::LogDomain(_))));
        assert!(matches!(parse("sqrt(x1)", &v).unwrap().eval(&[-1.0]), Err(EvalError::SqrtDomain(_))));
        assert!(matches!(
            parse("x1^0.5", &v).unwrap().eval(&[-2.0]),
            Err(EvalError::PowDomain { .. })
        ));
        assert_eq!(parse("x1^3", &v).unwrap().eval(&[-2.0]).unwrap(), -8.0);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let v = xs(2);
        let err = parse_list("x1 + , x2", &v).unwrap_err();
        assert_eq!(
            err,
            ParseError::Unexpected {
                position: 5,
                token: ",".into()
            }
        );
        assert!(matches!(
            parse("x3 + 1", &v),
            Err(ParseError::UnknownIdentifier { position: 0, .. })
        ));
        assert!(matches!(parse("(x1", &v), Err(ParseError::UnexpectedEnd { .. })));
        assert!(matches!(parse("x1 $ 2", &v), Err(ParseError::Unexpected { position: 3, .. })));
    }

    #[test]
    fn list_respects_nested_commas() {
        let v = xs(2);
        let items = parse_list("atan2(x1, x2), x2", &v).unwrap();
        assert_eq!(items.len(), 2);
    }

    #[test]
    fn render_reparses() {
        let v = xs(2);
        let e = parse("-x2 + x1*(1 - x1^2 - x2^2) / -3.25e-2", &v).unwrap();
        let text = e.render(&v);
        let again = parse(&text, &v).unwrap();
        assert_eq!(e, again);
    }
}
