//! A small expression grammar for scalar node models.
//!
//! Supported: `+`, `-` (binary and unary), `*`, integer powers `^`, `tanh`,
//! numeric literals, the variables `u` (own state) and `v` (sum of input
//! states), and named parameters. Expressions are differentiated
//! symbolically, so scalar models always have exact partials.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Own,
    Input,
    Param(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Tanh(Box<Expr>),
}

#[derive(Clone, Copy, PartialEq)]
pub enum Var {
    Own,
    Input,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input near token {}",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, u: f64, v: f64, param: &impl Fn(&str) -> Result<f64>) -> Result<f64> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Own => u,
            Expr::Input => v,
            Expr::Param(name) => param(name)?,
            Expr::Add(a, b) => a.eval(u, v, param)? + b.eval(u, v, param)?,
            Expr::Sub(a, b) => a.eval(u, v, param)? - b.eval(u, v, param)?,
            Expr::Mul(a, b) => a.eval(u, v, param)? * b.eval(u, v, param)?,
            Expr::Neg(a) => -a.eval(u, v, param)?,
            Expr::Pow(a, n) => a.eval(u, v, param)?.powi(*n as i32),
            Expr::Tanh(a) => a.eval(u, v, param)?.tanh(),
        })
    }

    /// Exact partial derivative with respect to `u` or `v`.
    pub fn diff(&self, wrt: Var) -> Expr {
        match self {
            Expr::Num(_) | Expr::Param(_) => Expr::Num(0.0),
            Expr::Own => Expr::Num(if wrt == Var::Own { 1.0 } else { 0.0 }),
            Expr::Input => Expr::Num(if wrt == Var::Input { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::Add(Box::new(a.diff(wrt)), Box::new(b.diff(wrt))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.diff(wrt)), Box::new(b.diff(wrt))),
            Expr::Mul(a, b) => Expr::Add(
                Box::new(Expr::Mul(Box::new(a.diff(wrt)), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(b.diff(wrt)))),
            ),
            Expr::Neg(a) => Expr::Neg(Box::new(a.diff(wrt))),
            Expr::Pow(a, n) => {
                if *n == 0 {
                    Expr::Num(0.0)
                } else {
                    Expr::Mul(
                        Box::new(Expr::Mul(
                            Box::new(Expr::Num(f64::from(*n))),
                            Box::new(Expr::Pow(a.clone(), n - 1)),
                        )),
                        Box::new(a.diff(wrt)),
                    )
                }
            }
            // d tanh(e) = (1 - tanh(e)^2) e'
            Expr::Tanh(a) => Expr::Mul(
                Box::new(Expr::Sub(
                    Box::new(Expr::Num(1.0)),
                    Box::new(Expr::Pow(Box::new(Expr::Tanh(a.clone())), 2)),
                )),
                Box::new(a.diff(wrt)),
            ),
        }
    }

    /// Parameter names referenced by the expression.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Param(name) => {
                out.insert(name.clone());
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Tanh(a) => a.collect_params(out),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == 'e'
                        || (chars[i] == '-' && i > start && chars[i - 1] == 'e')
                        || (chars[i] == '+' && i > start && chars[i - 1] == 'e'))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let x: f64 = s
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad numeric literal \"{s}\"")))?;
                out.push(Token::Num(x));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    e = Expr::Add(Box::new(e), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    e = Expr::Sub(Box::new(e), Box::new(self.term()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        while self.peek() == Some(&Token::Star) {
            self.pos += 1;
            e = Expr::Mul(Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.pos += 1;
            match self.next() {
                Some(Token::Num(x)) if x.fract() == 0.0 && x >= 0.0 && x <= u32::MAX as f64 => {
                    Ok(Expr::Pow(Box::new(base), x as u32))
                }
                other => Err(Error::Expr(format!(
                    "exponent must be a nonnegative integer, got {other:?}"
                ))),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(x)) => Ok(Expr::Num(x)),
            Some(Token::Ident(name)) => match name.as_str() {
                "u" => Ok(Expr::Own),
                "v" => Ok(Expr::Input),
                "tanh" => {
                    if self.next() != Some(Token::LParen) {
                        return Err(Error::Expr("tanh requires parentheses".into()));
                    }
                    let inner = self.expr()?;
                    if self.next() != Some(Token::RParen) {
                        return Err(Error::Expr("unbalanced parentheses after tanh".into()));
                    }
                    Ok(Expr::Tanh(Box::new(inner)))
                }
                _ => Ok(Expr::Param(name)),
            },
            Some(Token::LParen) => {
                let inner = self.expr()?;
                if self.next() != Some(Token::RParen) {
                    return Err(Error::Expr("unbalanced parentheses".into()));
                }
                Ok(inner)
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}
