//! Text format: sums of products of numbers, `i`, letters `x1..xd` and
//! parenthesized subexpressions, with `^` for non-negative integer powers.
//! Examples: `2.0*x1*x2*x1 - 0.5*x2`, `(1+2i)*x1^2`, `(x1 + x2)^2`.

use num_complex::Complex64;

use super::{NCPolynomial, Word};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Letter(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str, letter: char) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        match c {
            ' ' | '\t' | '\n' | '\r' => k += 1,
            '+' => {
                out.push(Tok::Plus);
                k += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                k += 1;
            }
            '*' => {
                out.push(Tok::Star);
                k += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                k += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                k += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                k += 1;
            }
            'i' => {
                out.push(Tok::Imag(1.0));
                k += 1;
            }
            _ if c == letter => {
                let start = k + 1;
                let mut end = start;
                while end < chars.len() && chars[end].is_ascii_digit() {
                    end += 1;
                }
                if end == start {
                    return Err(Error::Parse(format!(
                        "letter without index at position {k}"
                    )));
                }
                let idx: usize = chars[start..end]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad letter index at position {k}")))?;
                if idx == 0 {
                    return Err(Error::Parse(format!("letters are numbered from {letter}1")));
                }
                out.push(Tok::Letter(idx - 1));
                k = end;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = k;
                while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                    k += 1;
                }
                if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                    let mut j = k + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        k = j;
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                    }
                }
                let s: String = chars[start..k].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
                if k < chars.len() && chars[k] == 'i' {
                    out.push(Tok::Imag(v));
                    k += 1;
                } else {
                    out.push(Tok::Num(v));
                }
            }
            _ => {
                return Err(Error::Parse(format!(
                    "unexpected character '{c}' at position {k}"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    d: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<NCPolynomial> {
        let mut acc = NCPolynomial::zero(self.d);
        let mut sign = 1.0;
        match self.peek() {
            Some(Tok::Minus) => {
                sign = -1.0;
                self.pos += 1;
            }
            Some(Tok::Plus) => self.pos += 1,
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = acc.add(&t.scale_real(sign));
            match self.peek() {
                Some(Tok::Plus) => {
                    sign = 1.0;
                    self.pos += 1;
                }
                Some(Tok::Minus) => {
                    sign = -1.0;
                    self.pos += 1;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<NCPolynomial> {
        let mut acc = self.power()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            acc = acc.mul(&self.power()?);
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<NCPolynomial> {
        let base = self.factor()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.next() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    return Ok(base.pow(v as u32))
                }
                other => {
                    return Err(Error::Parse(format!(
                        "exponent must be a small integer, got {other:?}"
                    )))
                }
            }
        }
        Ok(base)
    }

    fn factor(&mut self) -> Result<NCPolynomial> {
        let d = self.d;
        match self.next() {
            Some(Tok::Num(v)) => Ok(NCPolynomial::constant(d, v)),
            Some(Tok::Imag(v)) => NCPolynomial::monomial(d, Word::unit(), Complex64::new(0.0, v)),
            Some(Tok::Letter(j)) => {
                if j >= d {
                    return Err(Error::Parse(format!(
                        "unknown letter x{} for d = {d}",
                        j + 1
                    )));
                }
                NCPolynomial::var(d, j)
            }
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(Error::Parse("missing ')'".into())),
                }
            }
            Some(Tok::Minus) => Ok(self.factor()?.scale_real(-1.0)),
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

pub(super) fn parse(text: &str, d: usize) -> Result<NCPolynomial> {
    parse_with_letter(text, d, 'x')
}

/// Same grammar with a different letter symbol, e.g. `u1*u2`.
pub(crate) fn parse_with_letter(text: &str, d: usize, letter: char) -> Result<NCPolynomial> {
    let toks = lex(text, letter)?;
    if toks.is_empty() {
        return Err(Error::Parse("empty polynomial".into()));
    }
    let mut p = Parser { toks, pos: 0, d };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!("trailing input at token {}", p.pos)));
    }
    Ok(out)
}

/// Sign and magnitude text of a coefficient. Non-real coefficients are
/// parenthesized and always carry a `+` sign.
pub(super) fn format_coefficient(c: Complex64, _first: bool) -> (&'static str, String) {
    if c.im == 0.0 {
        let sign = if c.re < 0.0 { "-" } else { "+" };
        let mag = c.re.abs();
        let s = if mag == 1.0 {
            "1".to_string()
        } else {
            format!("{mag:?}")
        };
        (sign, s)
    } else if c.re == 0.0 {
        let sign = if c.im < 0.0 { "-" } else { "+" };
        (sign, format!("{:?}i", c.im.abs()))
    } else {
        let op = if c.im < 0.0 { "-" } else { "+" };
        ("+", format!("({:?}{op}{:?}i)", c.re, c.im.abs()))
    }
}
