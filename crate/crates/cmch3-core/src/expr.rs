//! Expressions in one complex variable for potential data.
//!
//! The language covers meromorphic functions built from `z`, numeric
//! literals, `i`, `pi`, the arithmetic operators with usual precedence,
//! integer powers `^`, and the entire functions `exp`, `sin`, `cos`,
//! `sinh`, `cosh`. Every function in the language is holomorphic away
//! from division poles, so evaluation can only fail by dividing by a
//! (numerically) vanishing denominator or by overflowing to non-finite
//! values; both failures carry the byte position of the operator that
//! caused them.
//!
//! Exponents are integer literals, optionally negative and optionally
//! parenthesized (`z^2`, `z^-2`, `z^(-2)`). Chained `^` is rejected rather
//! than silently associated.
//!
//! Pretty-printing preserves the tree exactly (parentheses are inserted
//! from precedence), so a printed expression re-parses to a tree that
//! evaluates identically.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

/// Relative scale below which a denominator counts as a pole.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sinh,
    Cosh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    fn apply(self, x: Complex64) -> Complex64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    I,
    Pi,
    Z,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Division; carries the byte position of the `/` for pole reports.
    Div(Box<Expr>, Box<Expr>, usize),
    /// Integer power; carries the byte position of the `^`.
    Pow(Box<Expr>, i32, usize),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source string.
    pub pos: usize,
    pub msg: String,
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.msg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalError {
    /// Denominator vanished (relative to the numerator) at the operator
    /// whose byte position is recorded.
    Pole { pos: usize },
    /// Overflow or an otherwise non-finite intermediate value.
    NonFinite { pos: usize },
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::Pole { pos } => write!(f, "pole at operator byte {pos}"),
            EvalError::NonFinite { pos } => write!(f, "non-finite value at operator byte {pos}"),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let toks = lex(src)?;
        let mut p = Parser { toks: &toks, k: 0, end: src.len() };
        let e = p.expr()?;
        if p.k < p.toks.len() {
            return Err(ParseError {
                pos: p.toks[p.k].1,
                msg: String::from("unexpected trailing input"),
            });
        }
        Ok(e)
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, EvalError> {
        match self {
            Expr::Num(v) => Ok(Complex64::new(*v, 0.0)),
            Expr::I => Ok(Complex64::new(0.0, 1.0)),
            Expr::Pi => Ok(Complex64::new(core::f64::consts::PI, 0.0)),
            Expr::Z => Ok(z),
            Expr::Neg(x) => Ok(-x.eval(z)?),
            Expr::Add(a, b) => Ok(a.eval(z)? + b.eval(z)?),
            Expr::Sub(a, b) => Ok(a.eval(z)? - b.eval(z)?),
            Expr::Mul(a, b) => Ok(a.eval(z)? * b.eval(z)?),
            Expr::Div(a, b, pos) => {
                let num = a.eval(z)?;
                let den = b.eval(z)?;
                if den.norm() <= POLE_TOL * (1.0 + num.norm()) {
                    return Err(EvalError::Pole { pos: *pos });
                }
                Ok(num / den)
            }
            Expr::Pow(b, k, pos) => {
                let base = b.eval(z)?;
                if *k < 0 && base.norm() <= POLE_TOL {
                    return Err(EvalError::Pole { pos: *pos });
                }
                let v = base.powi(*k);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(EvalError::NonFinite { pos: *pos });
                }
                Ok(v)
            }
            Expr::Call(f, x) => {
                let v = f.apply(x.eval(z)?);
                if !v.re.is_finite() || !v.im.is_finite() {
                    // the argument was finite, so blame the call site: byte
                    // position unknown here, report 0-arg overflow as pos 0
                    return Err(EvalError::NonFinite { pos: 0 });
                }
                Ok(v)
            }
        }
    }

    /// True when no subtree can produce a pole (no division, no negative
    /// power). Such expressions evaluate everywhere, barring overflow.
    pub fn is_entire(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::I | Expr::Pi | Expr::Z => true,
            Expr::Neg(x) | Expr::Call(_, x) => x.is_entire(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.is_entire() && b.is_entire(),
            Expr::Div(..) => false,
            Expr::Pow(b, k, _) => *k >= 0 && b.is_entire(),
        }
    }

    /// Structure-preserving rendering; `parse` of the result evaluates
    /// identically to `self`.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, 0);
        s
    }

    // precedence levels: 1 add/sub, 2 mul/div, 3 unary minus, 4 power
    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write(&self, out: &mut String, min_level: u8) {
        let lvl = self.level();
        let parens = lvl < min_level;
        if parens {
            out.push('(');
        }
        match self {
            Expr::Num(v) => out.push_str(&format!("{v}")),
            Expr::I => out.push('i'),
            Expr::Pi => out.push_str("pi"),
            Expr::Z => out.push('z'),
            Expr::Neg(x) => {
                out.push('-');
                // nested unary minus needs parens to avoid `--`
                let need = if matches!(**x, Expr::Neg(..)) { 6 } else { 3 };
                x.write(out, need);
            }
            Expr::Add(a, b) => {
                a.write(out, 1);
                out.push_str(" + ");
                b.write(out, 2);
            }
            Expr::Sub(a, b) => {
                a.write(out, 1);
                out.push_str(" - ");
                b.write(out, 2);
            }
            Expr::Mul(a, b) => {
                a.write(out, 2);
                out.push('*');
                b.write(out, 3);
            }
            Expr::Div(a, b, _) => {
                a.write(out, 2);
                out.push('/');
                b.write(out, 3);
            }
            Expr::Pow(b, k, _) => {
                b.write(out, 5);
                if *k < 0 {
                    out.push_str(&format!("^({k})"));
                } else {
                    out.push_str(&format!("^{k}"));
                }
            }
            Expr::Call(f, x) => {
                out.push_str(f.name());
                out.push('(');
                x.write(out, 0);
                out.push(')');
            }
        }
        if parens {
            out.push(')');
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tok<'a> {
    Num { val: f64, integral: bool },
    Ident(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok<'_>, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut k = 0;
    while k < bytes.len() {
        let b = bytes[k];
        let pos = k;
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                k += 1;
            }
            b'+' => {
                out.push((Tok::Plus, pos));
                k += 1;
            }
            b'-' => {
                out.push((Tok::Minus, pos));
                k += 1;
            }
            b'*' => {
                out.push((Tok::Star, pos));
                k += 1;
            }
            b'/' => {
                out.push((Tok::Slash, pos));
                k += 1;
            }
            b'^' => {
                out.push((Tok::Caret, pos));
                k += 1;
            }
            b'(' => {
                out.push((Tok::LParen, pos));
                k += 1;
            }
            b')' => {
                out.push((Tok::RParen, pos));
                k += 1;
            }
            b'0'..=b'9' | b'.' => {
                let mut j = k;
                let mut integral = true;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    integral = false;
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                // exponent part: e / E followed by optional sign and digits
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut m = j + 1;
                    if m < bytes.len() && (bytes[m] == b'+' || bytes[m] == b'-') {
                        m += 1;
                    }
                    if m < bytes.len() && bytes[m].is_ascii_digit() {
                        integral = false;
                        j = m;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text = &src[k..j];
                let val: f64 = text.parse().map_err(|_| ParseError {
                    pos,
                    msg: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num { val, integral }, pos));
                k = j;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut j = k;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                out.push((Tok::Ident(&src[k..j]), pos));
                k = j;
            }
            _ => {
                return Err(ParseError {
                    pos,
                    msg: format!("unexpected character `{}`", &src[k..k + 1]),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a, 'b> {
    toks: &'b [(Tok<'a>, usize)],
    k: usize,
    end: usize,
}

impl<'a, 'b> Parser<'a, 'b> {
    fn peek(&self) -> Option<&(Tok<'a>, usize)> {
        self.toks.get(self.k)
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.1).unwrap_or(self.end)
    }

    fn eat(&mut self, want: Tok<'a>, what: &str) -> Result<usize, ParseError> {
        match self.peek() {
            Some((t, pos)) if *t == want => {
                let p = *pos;
                self.k += 1;
                Ok(p)
            }
            _ => Err(ParseError {
                pos: self.here(),
                msg: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some((Tok::Plus, _)) => {
                    self.k += 1;
                    let rhs = self.term()?;
                    acc = Expr::Add(Box::new(acc), Box::new(rhs));
                }
                Some((Tok::Minus, _)) => {
                    self.k += 1;
                    let rhs = self.term()?;
                    acc = Expr::Sub(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some((Tok::Star, _)) => {
                    self.k += 1;
                    let rhs = self.unary()?;
                    acc = Expr::Mul(Box::new(acc), Box::new(rhs));
                }
                Some((Tok::Slash, pos)) => {
                    let p = *pos;
                    self.k += 1;
                    let rhs = self.unary()?;
                    acc = Expr::Div(Box::new(acc), Box::new(rhs), p);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some((Tok::Minus, _)) = self.peek() {
            self.k += 1;
            let x = self.unary()?;
            return Ok(Expr::Neg(Box::new(x)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some((Tok::Caret, pos)) = self.peek() {
            let p = *pos;
            self.k += 1;
            let k = self.exponent()?;
            if let Some((Tok::Caret, pos2)) = self.peek() {
                return Err(ParseError {
                    pos: *pos2,
                    msg: String::from("chained `^` needs parentheses"),
                });
            }
            return Ok(Expr::Pow(Box::new(base), k, p));
        }
        Ok(base)
    }

    /// Integer literal, optionally negative, optionally in parentheses.
    fn exponent(&mut self) -> Result<i32, ParseError> {
        let parens = matches!(self.peek(), Some((Tok::LParen, _)));
        if parens {
            self.k += 1;
        }
        let mut sign = 1i64;
        if let Some((Tok::Minus, _)) = self.peek() {
            sign = -1;
            self.k += 1;
        }
        let (val, integral, pos) = match self.peek() {
            Some((Tok::Num { val, integral }, pos)) => (*val, *integral, *pos),
            _ => {
                return Err(ParseError {
                    pos: self.here(),
                    msg: String::from("expected integer exponent after `^`"),
                })
            }
        };
        if !integral || val > i32::MAX as f64 {
            return Err(ParseError {
                pos,
                msg: String::from("exponent must be a plain integer"),
            });
        }
        self.k += 1;
        if parens {
            self.eat(Tok::RParen, "`)` closing the exponent")?;
        }
        Ok((sign * val as i64) as i32)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().copied() {
            Some((Tok::Num { val, .. }, _)) => {
                self.k += 1;
                Ok(Expr::Num(val))
            }
            Some((Tok::LParen, _)) => {
                self.k += 1;
                let e = self.expr()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some((Tok::Ident(name), pos)) => {
                self.k += 1;
                match name {
                    "z" => Ok(Expr::Z),
                    "i" => Ok(Expr::I),
                    "pi" => Ok(Expr::Pi),
                    "exp" | "sin" | "cos" | "sinh" | "cosh" => {
                        let f = match name {
                            "exp" => Func::Exp,
                            "sin" => Func::Sin,
                            "cos" => Func::Cos,
                            "sinh" => Func::Sinh,
                            _ => Func::Cosh,
                        };
                        self.eat(Tok::LParen, "`(` after function name")?;
                        let arg = self.expr()?;
                        self.eat(Tok::RParen, "`)` closing the call")?;
                        Ok(Expr::Call(f, Box::new(arg)))
                    }
                    _ => Err(ParseError {
                        pos,
                        msg: format!("unknown identifier `{name}`"),
                    }),
                }
            }
            _ => Err(ParseError {
                pos: self.here(),
                msg: String::from("expected a value"),
            }),
        }
    }
}
